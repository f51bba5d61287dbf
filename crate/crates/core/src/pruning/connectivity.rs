use crate::autodiff::Scalar;
use crate::graph::NetworkGraph;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockEdge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

/// Block-level view of a network. Node 0 is the input and node `b` is the
/// output of block `b`; edges only run from lower to higher nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDag {
    pub nodes: usize,
    pub edges: Vec<BlockEdge>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnectivityMethod {
    PathCount,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityReport {
    pub score: f64,
    /// Path mass arriving at every block node, input first.
    pub per_block_path_mass: Vec<f64>,
    pub method: ConnectivityMethod,
}

impl BlockDag {
    pub fn new(nodes: usize) -> Self {
        BlockDag {
            nodes,
            edges: Vec::new(),
        }
    }

    pub fn chain(weights: &[f64]) -> Self {
        let mut dag = BlockDag::new(weights.len() + 1);
        for (i, &w) in weights.iter().enumerate() {
            dag.add_edge(i, i + 1, w);
        }
        dag
    }

    pub fn add_edge(&mut self, from: usize, to: usize, weight: f64) {
        assert!(from < to && to < self.nodes, "block edges must run forward");
        self.edges.push(BlockEdge { from, to, weight });
    }

    /// Chain edge weights are the product of per-layer surviving fractions in
    /// the block (a fully pruned layer severs the block). Skip edges weigh
    /// their kernel density. Skips that start and end inside one block bypass
    /// nothing and are left out.
    pub fn from_graph<T: Scalar>(graph: &NetworkGraph<T>) -> Self {
        let blocks = graph.blocks().expect("validated at construction");
        let mut dag = BlockDag::new(blocks.len() + 1);
        for b in &blocks {
            let mut w = 1.0;
            for id in b.first..=b.last {
                if let Some(m) = graph.masks().get(&id) {
                    w *= m.surviving_fraction();
                }
            }
            dag.add_edge(b.block - 1, b.block, w);
        }
        let block_of = |layer: usize| {
            blocks
                .iter()
                .find(|b| b.first <= layer && layer <= b.last)
                .map(|b| b.block)
                .expect("layer belongs to a block")
        };
        for e in graph.skips() {
            let from = block_of(e.src);
            let to = block_of(e.dst) - 1;
            if from < to {
                dag.add_edge(from, to, e.nonzero_count() as f64 / e.fan_area() as f64);
            }
        }
        dag
    }

    /// Sum over all input-to-node paths of the product of edge weights,
    /// by dynamic programming in node order.
    pub fn path_mass(&self) -> Vec<f64> {
        let mut mass = vec![0.0; self.nodes];
        if self.nodes == 0 {
            return mass;
        }
        mass[0] = 1.0;
        let mut edges = self.edges.clone();
        edges.sort_by_key(|e| (e.to, e.from));
        for e in edges {
            mass[e.to] += mass[e.from] * e.weight;
        }
        mass
    }

    pub fn report(&self) -> ConnectivityReport {
        let mass = self.path_mass();
        ConnectivityReport {
            score: mass.last().copied().unwrap_or(0.0),
            per_block_path_mass: mass,
            method: ConnectivityMethod::PathCount,
        }
    }
}

pub fn connectivity_score<T: Scalar>(graph: &NetworkGraph<T>) -> ConnectivityReport {
    BlockDag::from_graph(graph).report()
}
