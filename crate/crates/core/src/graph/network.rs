use std::collections::{BTreeMap, VecDeque};

use rand::Rng;

use super::spec::{infer_shapes, ActShape, ArchSpec, LayerKind, LayerSpec, SkipSpec};
use super::GraphError;
use crate::autodiff::{Scalar, Tape, Tensor, Var};
use crate::pruning::PruneMask;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Sparse 1x1 channel projection from the output of layer `src` into the
/// input of layer `dst`. Only positions flagged in `pattern` carry weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipEdge<T: Scalar> {
    pub src: usize,
    pub dst: usize,
    pub density: f64,
    pub weight: Tensor<T>,
    pub pattern: Vec<bool>,
}

impl<T: Scalar> SkipEdge<T> {
    pub fn fan_area(&self) -> usize {
        self.pattern.len()
    }

    pub fn nonzero_count(&self) -> usize {
        self.pattern.iter().filter(|&&p| p).count()
    }
}

/// Identifies one trainable tensor of a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParamKey {
    Weight(usize),
    Bias(usize),
    Skip(usize),
}

impl ParamKey {
    pub fn name(&self) -> String {
        match self {
            ParamKey::Weight(id) => format!("w.{id}"),
            ParamKey::Bias(id) => format!("b.{id}"),
            ParamKey::Skip(i) => format!("skip.{i}"),
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        let (kind, idx) = name.split_once('.')?;
        let idx = idx.parse().ok()?;
        match kind {
            "w" => Some(ParamKey::Weight(idx)),
            "b" => Some(ParamKey::Bias(idx)),
            "skip" => Some(ParamKey::Skip(idx)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SkipInit {
    Zero,
    /// Nonzero positions drawn from U(-a, a).
    Uniform(f64),
}

/// Which block pairs receive a skip edge. Blocks are 1-based; an edge
/// `(i, j)` feeds block `i`'s output into block `j`'s input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SkipPattern {
    /// Block i output to block i+2 input.
    BlockSkip,
    /// Every conv-block pair at distance two or more.
    DenseSkip,
    Pairs(Vec<(usize, usize)>),
}

impl SkipPattern {
    pub fn parse(s: &str) -> Result<Self, GraphError> {
        match s.trim() {
            "block-skip" => Ok(SkipPattern::BlockSkip),
            "dense-skip" => Ok(SkipPattern::DenseSkip),
            other => {
                let body = other.strip_prefix("pairs:").ok_or_else(|| {
                    GraphError::Pattern(format!(
                        "unknown skip pattern {other:?} (block-skip, dense-skip or pairs:i-j,...)"
                    ))
                })?;
                let mut pairs = Vec::new();
                for item in body.split(',').filter(|s| !s.is_empty()) {
                    let (a, b) = item
                        .split_once('-')
                        .ok_or_else(|| GraphError::Pattern(format!("bad pair {item:?}")))?;
                    let a = a.trim().parse().map_err(|_| GraphError::Pattern(format!("bad pair {item:?}")))?;
                    let b = b.trim().parse().map_err(|_| GraphError::Pattern(format!("bad pair {item:?}")))?;
                    pairs.push((a, b));
                }
                Ok(SkipPattern::Pairs(pairs))
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            SkipPattern::BlockSkip => "block-skip".into(),
            SkipPattern::DenseSkip => "dense-skip".into(),
            SkipPattern::Pairs(p) => {
                let items: Vec<String> = p.iter().map(|(a, b)| format!("{a}-{b}")).collect();
                format!("pairs:{}", items.join(","))
            }
        }
    }

    /// Concrete block pairs for a network with `conv_blocks` convolutional blocks.
    pub fn pairs(&self, conv_blocks: usize) -> Vec<(usize, usize)> {
        match self {
            SkipPattern::BlockSkip => (1..=conv_blocks.saturating_sub(2)).map(|i| (i, i + 2)).collect(),
            SkipPattern::DenseSkip => {
                let mut out = Vec::new();
                for i in 1..=conv_blocks {
                    for j in i + 2..=conv_blocks {
                        out.push((i, j));
                    }
                }
                out
            }
            SkipPattern::Pairs(p) => p.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockRange {
    pub block: usize,
    pub first: usize,
    pub last: usize,
    /// Contains dense/flatten layers (the regression or classification head).
    pub is_head: bool,
}

/// Variables recorded by [`NetworkGraph::record`].
#[derive(Debug, Clone)]
pub struct Recorded {
    pub output: Var,
    pub params: Vec<(ParamKey, Var)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGraph<T: Scalar = f32> {
    input_channels: usize,
    input_len: usize,
    layers: Vec<LayerSpec>,
    shapes: Vec<ActShape>,
    skips: Vec<SkipEdge<T>>,
    params: BTreeMap<usize, LayerParams<T>>,
    masks: BTreeMap<usize, PruneMask>,
}

fn he_uniform<T: Scalar, R: Rng + ?Sized>(rng: &mut R, shape: Vec<usize>, fan_in: usize) -> Tensor<T> {
    let bound = (6.0 / fan_in as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::from_f64(rng.gen_range(-bound..bound))).collect();
    Tensor::new(shape, data).expect("shape matches")
}

impl<T: Scalar> NetworkGraph<T> {
    /// Allocates parameters with fan-in scaled uniform weights and zero biases.
    pub fn new<R: Rng + ?Sized>(
        input_channels: usize,
        input_len: usize,
        layers: Vec<LayerSpec>,
        rng: &mut R,
    ) -> Result<Self, GraphError> {
        for (i, l) in layers.iter().enumerate() {
            if l.id != i {
                return Err(GraphError::Construction(format!(
                    "layer ids must equal their position; layer at {i} has id {}",
                    l.id
                )));
            }
        }
        let shapes = infer_shapes(input_channels, input_len, &layers)?;
        let mut params = BTreeMap::new();
        for l in &layers {
            if let Some((ws, bs)) = l.param_shapes() {
                let fan_in: usize = ws[1..].iter().product();
                params.insert(
                    l.id,
                    LayerParams {
                        weight: he_uniform(rng, ws, fan_in),
                        bias: Tensor::zeros(bs),
                    },
                );
            }
        }
        let g = NetworkGraph {
            input_channels,
            input_len,
            layers,
            shapes,
            skips: Vec::new(),
            params,
            masks: BTreeMap::new(),
        };
        g.blocks()?;
        Ok(g)
    }

    pub fn from_arch<R: Rng + ?Sized>(arch: &ArchSpec, rng: &mut R) -> Result<Self, GraphError> {
        let mut g = Self::new(arch.input_channels, arch.input_len, arch.layers.clone(), rng)?;
        for s in &arch.skips {
            g.add_skip_edge(s.src, s.dst, s.density, SkipInit::Uniform(0.05), rng)?;
        }
        Ok(g)
    }

    pub fn arch(&self) -> ArchSpec {
        ArchSpec {
            input_channels: self.input_channels,
            input_len: self.input_len,
            layers: self.layers.clone(),
            skips: self
                .skips
                .iter()
                .map(|e| SkipSpec {
                    src: e.src,
                    dst: e.dst,
                    density: e.density,
                })
                .collect(),
        }
    }

    pub fn input_channels(&self) -> usize {
        self.input_channels
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn shapes(&self) -> &[ActShape] {
        &self.shapes
    }

    pub fn output_features(&self) -> usize {
        match self.shapes.last() {
            Some(ActShape::Flat { features }) => *features,
            Some(ActShape::Seq { channels, len }) => channels * len,
            None => self.input_channels * self.input_len,
        }
    }

    /// Shape entering layer `id`.
    pub fn input_shape_of(&self, id: usize) -> ActShape {
        if id == 0 {
            ActShape::Seq {
                channels: self.input_channels,
                len: self.input_len,
            }
        } else {
            self.shapes[id - 1]
        }
    }

    pub fn params(&self) -> &BTreeMap<usize, LayerParams<T>> {
        &self.params
    }

    pub fn layer_params(&self, id: usize) -> Option<&LayerParams<T>> {
        self.params.get(&id)
    }

    pub fn layer_params_mut(&mut self, id: usize) -> Option<&mut LayerParams<T>> {
        self.params.get_mut(&id)
    }

    pub fn skips(&self) -> &[SkipEdge<T>] {
        &self.skips
    }

    /// Raw access for callers that construct edges by hand; run
    /// [`NetworkGraph::validate_dag`] afterwards.
    pub fn skips_mut(&mut self) -> &mut Vec<SkipEdge<T>> {
        &mut self.skips
    }

    pub fn masks(&self) -> &BTreeMap<usize, PruneMask> {
        &self.masks
    }

    pub fn set_mask(&mut self, mask: PruneMask) -> Result<(), GraphError> {
        let p = self.params.get(&mask.layer_id).ok_or_else(|| {
            GraphError::Construction(format!("layer {} has no weights to mask", mask.layer_id))
        })?;
        if p.weight.shape() != mask.shape() {
            return Err(GraphError::Construction(format!(
                "mask for layer {} has shape {:?}, weight is {:?}",
                mask.layer_id,
                mask.shape(),
                p.weight.shape()
            )));
        }
        self.masks.insert(mask.layer_id, mask);
        Ok(())
    }

    pub fn clear_masks(&mut self) {
        self.masks.clear();
    }

    /// Every trainable tensor in a fixed order: layers by id (weight, bias),
    /// then skip edges.
    pub fn param_keys(&self) -> Vec<ParamKey> {
        let mut keys = Vec::new();
        for id in self.params.keys() {
            keys.push(ParamKey::Weight(*id));
            keys.push(ParamKey::Bias(*id));
        }
        keys.extend((0..self.skips.len()).map(ParamKey::Skip));
        keys
    }

    pub fn param(&self, key: ParamKey) -> Option<&Tensor<T>> {
        match key {
            ParamKey::Weight(id) => self.params.get(&id).map(|p| &p.weight),
            ParamKey::Bias(id) => self.params.get(&id).map(|p| &p.bias),
            ParamKey::Skip(i) => self.skips.get(i).map(|s| &s.weight),
        }
    }

    pub fn param_mut(&mut self, key: ParamKey) -> Option<&mut Tensor<T>> {
        match key {
            ParamKey::Weight(id) => self.params.get_mut(&id).map(|p| &mut p.weight),
            ParamKey::Bias(id) => self.params.get_mut(&id).map(|p| &mut p.bias),
            ParamKey::Skip(i) => self.skips.get_mut(i).map(|s| &mut s.weight),
        }
    }

    /// Positions that must stay zero for a parameter (pruned weights, or
    /// skip-kernel entries outside the sparsity pattern).
    pub fn keep_pattern(&self, key: ParamKey) -> Option<&[bool]> {
        match key {
            ParamKey::Weight(id) => self.masks.get(&id).map(|m| m.keep()),
            ParamKey::Bias(_) => None,
            ParamKey::Skip(i) => self.skips.get(i).map(|s| s.pattern.as_slice()),
        }
    }

    /// Total allocated parameters (dense storage of skip kernels included).
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum::<usize>()
            + self.skips.iter().map(|s| s.weight.numel()).sum::<usize>()
    }

    /// Allocated parameters minus masked-out positions.
    pub fn effective_param_count(&self) -> usize {
        let masked: usize = self
            .masks
            .values()
            .map(|m| m.keep().len() - m.kept_count())
            .sum();
        let skip_zeros: usize = self
            .skips
            .iter()
            .map(|s| s.fan_area() - s.nonzero_count())
            .sum();
        self.param_count() - masked - skip_zeros
    }

    /// Conv and dense weight elements (biases excluded).
    pub fn prunable_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| l.is_prunable())
            .filter_map(|l| l.param_shapes())
            .map(|(w, _)| w.iter().product::<usize>())
            .sum()
    }

    pub fn bias_count(&self) -> usize {
        self.layers
            .iter()
            .filter_map(|l| l.param_shapes())
            .map(|(_, b)| b.iter().product::<usize>())
            .sum()
    }

    /// Contiguous layer ranges per block, in block order.
    pub fn blocks(&self) -> Result<Vec<BlockRange>, GraphError> {
        let mut out: Vec<BlockRange> = Vec::new();
        for l in &self.layers {
            let head = matches!(l.kind, LayerKind::Dense { .. } | LayerKind::Flatten);
            match out.last_mut() {
                Some(b) if b.block == l.block => {
                    b.last = l.id;
                    b.is_head |= head;
                }
                Some(b) if l.block != b.block + 1 => {
                    return Err(GraphError::Construction(format!(
                        "layer {} jumps from block {} to block {}; blocks must be contiguous and consecutive",
                        l.id, b.block, l.block
                    )))
                }
                None if l.block != 1 => {
                    return Err(GraphError::Construction("the first block must be block 1".into()))
                }
                _ => out.push(BlockRange {
                    block: l.block,
                    first: l.id,
                    last: l.id,
                    is_head: head,
                }),
            }
        }
        Ok(out)
    }

    pub fn conv_block_count(&self) -> usize {
        self.blocks()
            .map(|b| b.iter().filter(|r| !r.is_head).count())
            .unwrap_or(0)
    }

    /// Checks that layers plus skip edges form a DAG and that every merge
    /// reconciles shapes.
    pub fn validate_dag(&self) -> Result<(), GraphError> {
        let n = self.layers.len();
        let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
        for (i, e) in self.skips.iter().enumerate() {
            if e.src >= n || e.dst >= n {
                return Err(GraphError::Cycle(format!(
                    "skip edge {i} references a missing layer ({} -> {})",
                    e.src, e.dst
                )));
            }
            edges.push((e.src, e.dst));
        }
        if !is_acyclic(n, &edges) {
            return Err(GraphError::Cycle(
                "layer chain plus skip edges contains a cycle".into(),
            ));
        }
        for (i, e) in self.skips.iter().enumerate() {
            if e.src >= e.dst {
                return Err(GraphError::Cycle(format!(
                    "skip edge {i} runs backwards ({} -> {})",
                    e.src, e.dst
                )));
            }
            let (sc, dc, _) = self.merge_geometry(e.src, e.dst, i)?;
            if e.weight.shape() != [dc, sc, 1] || e.pattern.len() != dc * sc {
                return Err(GraphError::MergeShape {
                    edge: i,
                    detail: format!(
                        "kernel {:?} / pattern {} do not match projection {dc}x{sc}",
                        e.weight.shape(),
                        e.pattern.len()
                    ),
                });
            }
        }
        Ok(())
    }

    /// (src channels, dst channels, subsampling stride) for a skip merge.
    fn merge_geometry(&self, src: usize, dst: usize, edge: usize) -> Result<(usize, usize, usize), GraphError> {
        let src_shape = self.shapes[src];
        let dst_shape = self.input_shape_of(dst);
        match (src_shape, dst_shape) {
            (
                ActShape::Seq {
                    channels: sc,
                    len: sl,
                },
                ActShape::Seq {
                    channels: dc,
                    len: dl,
                },
            ) if sl >= dl && dl > 0 => Ok((sc, dc, sl / dl)),
            _ => Err(GraphError::MergeShape {
                edge,
                detail: format!("cannot merge output {src_shape:?} of layer {src} into input {dst_shape:?} of layer {dst}"),
            }),
        }
    }

    /// Adds one sparse skip edge between layer outputs/inputs.
    pub fn add_skip_edge<R: Rng + ?Sized>(
        &mut self,
        src: usize,
        dst: usize,
        density: f64,
        init: SkipInit,
        rng: &mut R,
    ) -> Result<usize, GraphError> {
        if !(density > 0.0 && density <= 1.0) {
            return Err(GraphError::Pattern(format!("density {density} outside (0, 1]")));
        }
        if src >= self.layers.len() || dst >= self.layers.len() {
            return Err(GraphError::Pattern(format!("skip {src} -> {dst} references a missing layer")));
        }
        if dst <= src {
            return Err(GraphError::Cycle(format!("skip {src} -> {dst} would create a cycle")));
        }
        let idx = self.skips.len();
        let (sc, dc, _) = self.merge_geometry(src, dst, idx)?;
        let fan = sc * dc;
        let k = ((density * fan as f64).round() as usize).clamp(1, fan);
        let mut pattern = vec![false; fan];
        for pos in rand::seq::index::sample(rng, fan, k).into_vec() {
            pattern[pos] = true;
        }
        let mut data = vec![T::zero(); fan];
        if let SkipInit::Uniform(a) = init {
            for (v, &keep) in data.iter_mut().zip(&pattern) {
                if keep {
                    *v = T::from_f64(rng.gen_range(-a..a));
                }
            }
        }
        self.skips.push(SkipEdge {
            src,
            dst,
            density,
            weight: Tensor::new(vec![dc, sc, 1], data).expect("fan area"),
            pattern,
        });
        Ok(idx)
    }

    /// Adds edges per `pattern` at block granularity. Validates every pair
    /// before touching the graph.
    pub fn add_skip_edges<R: Rng + ?Sized>(
        &mut self,
        pattern: &SkipPattern,
        density: f64,
        init: SkipInit,
        rng: &mut R,
    ) -> Result<Vec<usize>, GraphError> {
        if !(density > 0.0 && density <= 1.0) {
            return Err(GraphError::Pattern(format!("density {density} outside (0, 1]")));
        }
        let blocks = self.blocks()?;
        let conv_blocks = blocks.iter().filter(|b| !b.is_head).count();
        let mut layer_pairs = Vec::new();
        for (i, j) in pattern.pairs(conv_blocks) {
            if i == 0 || i > blocks.len() || j == 0 || j > blocks.len() {
                return Err(GraphError::Pattern(format!("pair ({i}, {j}) references a missing block")));
            }
            if j <= i + 1 {
                return Err(GraphError::Cycle(format!(
                    "pair ({i}, {j}): block {j}'s input is not strictly downstream of block {i}'s output"
                )));
            }
            let (src, dst) = (blocks[i - 1].last, blocks[j - 1].first);
            self.merge_geometry(src, dst, self.skips.len() + layer_pairs.len())?;
            layer_pairs.push((src, dst));
        }
        let mut ids = Vec::new();
        for (src, dst) in layer_pairs {
            ids.push(self.add_skip_edge(src, dst, density, init, rng)?);
        }
        Ok(ids)
    }

    /// Records the forward pass on `tape`. With `trainable`, parameters are
    /// gradient-tracked leaves listed in [`Recorded::params`].
    pub fn record(&self, tape: &mut Tape<T>, input: Var, trainable: bool) -> Result<Recorded, GraphError> {
        let xs = tape.value(input).shape().to_vec();
        if xs.len() != 3 || xs[1] != self.input_channels || xs[2] != self.input_len {
            return Err(GraphError::Input(format!(
                "expected [N, {}, {}], got {xs:?}",
                self.input_channels, self.input_len
            )));
        }
        let mut params = Vec::new();
        let leaf = |tape: &mut Tape<T>, key: ParamKey, t: &Tensor<T>, params: &mut Vec<(ParamKey, Var)>| {
            let v = if trainable {
                tape.param(t.clone())
            } else {
                tape.constant(t.clone())
            };
            params.push((key, v));
            v
        };

        let mut skip_vars = Vec::with_capacity(self.skips.len());
        for (i, e) in self.skips.iter().enumerate() {
            let w = leaf(tape, ParamKey::Skip(i), &e.weight, &mut params);
            let m = tape.constant(pattern_tensor(e.weight.shape(), &e.pattern));
            skip_vars.push(tape.mul(w, m)?);
        }

        let mut outputs: Vec<Var> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let mut x = if layer.id == 0 { input } else { outputs[layer.id - 1] };
            for (i, e) in self.skips.iter().enumerate().filter(|(_, e)| e.dst == layer.id) {
                if e.src >= layer.id {
                    return Err(GraphError::Cycle(format!("skip edge {i} runs backwards")));
                }
                let (_, _, stride) = self.merge_geometry(e.src, e.dst, i)?;
                let ActShape::Seq { len, .. } = self.input_shape_of(layer.id) else {
                    unreachable!("merge_geometry checked shapes")
                };
                let mut s = outputs[e.src];
                if tape.value(s).shape()[2] != len {
                    s = tape.subsample(s, stride, len)?;
                }
                let proj = tape.conv1d(s, skip_vars[i], None, 1, 0)?;
                x = tape.add(x, proj).map_err(|err| GraphError::MergeShape {
                    edge: i,
                    detail: err.to_string(),
                })?;
            }
            let y = match layer.kind {
                LayerKind::Conv1d { stride, padding, .. } => {
                    let p = &self.params[&layer.id];
                    let w = leaf(tape, ParamKey::Weight(layer.id), &p.weight, &mut params);
                    let b = leaf(tape, ParamKey::Bias(layer.id), &p.bias, &mut params);
                    let w = self.masked(tape, layer.id, w)?;
                    tape.conv1d(x, w, Some(b), stride, padding)?
                }
                LayerKind::Dense { .. } => {
                    let p = &self.params[&layer.id];
                    let w = leaf(tape, ParamKey::Weight(layer.id), &p.weight, &mut params);
                    let b = leaf(tape, ParamKey::Bias(layer.id), &p.bias, &mut params);
                    let w = self.masked(tape, layer.id, w)?;
                    tape.dense(x, w, Some(b))?
                }
                LayerKind::MaxPool { kernel, stride } => tape.maxpool1d(x, kernel, stride)?,
                LayerKind::Relu => tape.relu(x),
                LayerKind::Flatten => tape.flatten(x),
                LayerKind::Conv2dRef { .. } => {
                    return Err(GraphError::Construction("conv2d_ref layers are not executable".into()))
                }
            };
            outputs.push(y);
        }
        let output = outputs.last().copied().unwrap_or(input);
        Ok(Recorded { output, params })
    }

    fn masked(&self, tape: &mut Tape<T>, id: usize, w: Var) -> Result<Var, GraphError> {
        match self.masks.get(&id) {
            Some(m) => {
                let mv = tape.constant(m.to_tensor());
                Ok(tape.mul(w, mv)?)
            }
            None => Ok(w),
        }
    }

    /// Inference-only forward pass.
    pub fn forward(&self, batch: &Tensor<T>) -> Result<Tensor<T>, GraphError> {
        let mut tape = Tape::new();
        let x = tape.constant(batch.clone());
        let rec = self.record(&mut tape, x, false)?;
        Ok(tape.value(rec.output).clone())
    }

    /// Same topology and values in another precision.
    pub fn cast<U: Scalar>(&self) -> NetworkGraph<U> {
        NetworkGraph {
            input_channels: self.input_channels,
            input_len: self.input_len,
            layers: self.layers.clone(),
            shapes: self.shapes.clone(),
            skips: self
                .skips
                .iter()
                .map(|e| SkipEdge {
                    src: e.src,
                    dst: e.dst,
                    density: e.density,
                    weight: e.weight.cast(),
                    pattern: e.pattern.clone(),
                })
                .collect(),
            params: self
                .params
                .iter()
                .map(|(k, p)| {
                    (
                        *k,
                        LayerParams {
                            weight: p.weight.cast(),
                            bias: p.bias.cast(),
                        },
                    )
                })
                .collect(),
            masks: self.masks.clone(),
        }
    }
}

fn pattern_tensor<T: Scalar>(shape: &[usize], keep: &[bool]) -> Tensor<T> {
    let data = keep.iter().map(|&k| if k { T::one() } else { T::zero() }).collect();
    Tensor::new(shape.to_vec(), data).expect("pattern matches kernel")
}

/// Kahn's algorithm over `n` nodes.
pub fn is_acyclic(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut indeg = vec![0usize; n];
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        if a >= n || b >= n {
            return false;
        }
        adj[a].push(b);
        indeg[b] += 1;
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut seen = 0;
    while let Some(v) = queue.pop_front() {
        seen += 1;
        for &w in &adj[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                queue.push_back(w);
            }
        }
    }
    seen == n
}
