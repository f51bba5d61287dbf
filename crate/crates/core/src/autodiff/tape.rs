use super::kernels::{self, Conv1dDims};
use super::{AutodiffError, Scalar, Tensor};

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Conv1d {
        x: Var,
        w: Var,
        b: Option<Var>,
        dims: Conv1dDims,
    },
    Dense {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    Relu(Var),
    MaxPool {
        x: Var,
        argmax: Vec<usize>,
    },
    Reshape(Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Subsample {
        x: Var,
        stride: usize,
    },
    Sum(Var),
    Mse {
        pred: Var,
        target: Var,
    },
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Tensor<T>,
    op: Op,
    needs_grad: bool,
}

/// Records operations in execution order; that order is a topological order
/// of the computation, so `backward` is a single reverse sweep.
#[derive(Debug, Clone, Default)]
pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a leaf; it receives gradients iff `tensor.requires_grad()`.
    pub fn leaf(&mut self, tensor: Tensor<T>) -> Var {
        let needs_grad = tensor.requires_grad();
        self.push(tensor, Op::Leaf, needs_grad)
    }

    pub fn param(&mut self, tensor: Tensor<T>) -> Var {
        self.leaf(tensor.with_requires_grad(true))
    }

    pub fn constant(&mut self, tensor: Tensor<T>) -> Var {
        self.leaf(tensor.with_requires_grad(false))
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// Gradient accumulated on a leaf by previous `backward` calls.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.nodes[v.0].value.grad()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.value.zero_grad();
        }
    }

    fn push(&mut self, value: Tensor<T>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn conv1d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        padding: usize,
    ) -> Result<Var, AutodiffError> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        if xs.len() != 3 || ws.len() != 3 {
            return Err(AutodiffError::Shape(format!(
                "conv1d expects input [N,C,L] and weight [Co,Ci,K], got {xs:?} and {ws:?}"
            )));
        }
        if xs[1] != ws[1] {
            return Err(AutodiffError::Shape(format!(
                "conv1d input has {} channels but weight expects {}",
                xs[1], ws[1]
            )));
        }
        if stride == 0 {
            return Err(AutodiffError::Shape("conv1d stride must be >= 1".into()));
        }
        if xs[2] + 2 * padding < ws[2] {
            return Err(AutodiffError::Shape(format!(
                "conv1d kernel {} longer than padded input {}",
                ws[2],
                xs[2] + 2 * padding
            )));
        }
        if let Some(b) = b {
            if self.shape(b) != [ws[0]] {
                return Err(AutodiffError::Shape(format!(
                    "conv1d bias shape {:?} does not match {} output channels",
                    self.shape(b),
                    ws[0]
                )));
            }
        }
        let dims = Conv1dDims {
            batch: xs[0],
            in_channels: xs[1],
            in_len: xs[2],
            out_channels: ws[0],
            kernel: ws[2],
            stride,
            padding,
        };
        let mut out = Tensor::zeros(vec![dims.batch, dims.out_channels, dims.out_len()]);
        kernels::conv1d_forward(
            &dims,
            self.value(x).data(),
            self.value(w).data(),
            b.map(|b| self.value(b).data()),
            out.data_mut(),
        );
        let needs = self.needs(x) || self.needs(w) || b.is_some_and(|b| self.needs(b));
        Ok(self.push(out, Op::Conv1d { x, w, b, dims }, needs))
    }

    pub fn dense(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var, AutodiffError> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] {
            return Err(AutodiffError::Shape(format!(
                "dense expects input [N,I] and weight [O,I], got {xs:?} and {ws:?}"
            )));
        }
        if let Some(b) = b {
            if self.shape(b) != [ws[0]] {
                return Err(AutodiffError::Shape(format!(
                    "dense bias shape {:?} does not match {} units",
                    self.shape(b),
                    ws[0]
                )));
            }
        }
        let mut out = Tensor::zeros(vec![xs[0], ws[0]]);
        kernels::dense_forward(
            xs[0],
            xs[1],
            ws[0],
            self.value(x).data(),
            self.value(w).data(),
            b.map(|b| self.value(b).data()),
            out.data_mut(),
        );
        let needs = self.needs(x) || self.needs(w) || b.is_some_and(|b| self.needs(b));
        Ok(self.push(out, Op::Dense { x, w, b }, needs))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let src = self.value(x);
        let data = src
            .data()
            .iter()
            .map(|&v| if v > T::zero() { v } else { T::zero() })
            .collect();
        let out = Tensor::new(src.shape().to_vec(), data).expect("same shape");
        let needs = self.needs(x);
        self.push(out, Op::Relu(x), needs)
    }

    /// Max pooling along the last axis of an `[N, C, L]` tensor.
    pub fn maxpool1d(&mut self, x: Var, kernel: usize, stride: usize) -> Result<Var, AutodiffError> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 3 || kernel == 0 || stride == 0 || xs[2] < kernel {
            return Err(AutodiffError::Shape(format!(
                "maxpool1d(k={kernel}, stride={stride}) cannot apply to {xs:?}"
            )));
        }
        let lo = (xs[2] - kernel) / stride + 1;
        let mut out = Tensor::zeros(vec![xs[0], xs[1], lo]);
        let argmax = kernels::maxpool_forward(
            xs[0] * xs[1],
            xs[2],
            kernel,
            stride,
            self.value(x).data(),
            out.data_mut(),
        );
        let needs = self.needs(x);
        Ok(self.push(out, Op::MaxPool { x, argmax }, needs))
    }

    /// Collapses every axis after the first.
    pub fn flatten(&mut self, x: Var) -> Var {
        let xs = self.shape(x).to_vec();
        let n = xs.first().copied().unwrap_or(1);
        let rest: usize = xs.iter().skip(1).product();
        self.reshape(x, vec![n, rest]).expect("flatten preserves size")
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var, AutodiffError> {
        let mut out = self.value(x).clone();
        out.zero_grad();
        let out = out.with_requires_grad(false).reshape(shape)?;
        let needs = self.needs(x);
        Ok(self.push(out, Op::Reshape(x), needs))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<(), AutodiffError> {
        if self.shape(a) != self.shape(b) {
            return Err(AutodiffError::Shape(format!(
                "{what}: shapes {:?} and {:?} differ",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape(a, b, "add")?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x + y)
            .collect();
        let out = Tensor::new(self.shape(a).to_vec(), data)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Add(a, b), needs))
    }

    /// Element-wise product; used to multiply weights by binary masks.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape(a, b, "mul")?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x * y)
            .collect();
        let out = Tensor::new(self.shape(a).to_vec(), data)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Mul(a, b), needs))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let f = T::from_f64(factor);
        let src = self.value(x);
        let data = src.data().iter().map(|&v| v * f).collect();
        let out = Tensor::new(src.shape().to_vec(), data).expect("same shape");
        let needs = self.needs(x);
        self.push(out, Op::Scale(x, factor), needs)
    }

    /// Keeps every `stride`-th sample of the last axis, truncated to `out_len`.
    pub fn subsample(&mut self, x: Var, stride: usize, out_len: usize) -> Result<Var, AutodiffError> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 3 || stride == 0 || out_len == 0 || (out_len - 1) * stride >= xs[2] {
            return Err(AutodiffError::Shape(format!(
                "cannot subsample {xs:?} with stride {stride} to length {out_len}"
            )));
        }
        let rows = xs[0] * xs[1];
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(rows * out_len);
        for r in 0..rows {
            for j in 0..out_len {
                data.push(src[r * xs[2] + j * stride]);
            }
        }
        let out = Tensor::new(vec![xs[0], xs[1], out_len], data)?;
        let needs = self.needs(x);
        Ok(self.push(out, Op::Subsample { x, stride }, needs))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let mut acc = T::zero();
        for &v in self.value(x).data() {
            acc = acc + v;
        }
        let needs = self.needs(x);
        self.push(Tensor::scalar(acc), Op::Sum(x), needs)
    }

    /// Mean of squared element-wise differences.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var, AutodiffError> {
        self.same_shape(pred, target, "mse")?;
        let p = self.value(pred).data();
        let t = self.value(target).data();
        if p.is_empty() {
            return Err(AutodiffError::Shape("mse of empty tensors".into()));
        }
        let mut acc = T::zero();
        for (&a, &b) in p.iter().zip(t) {
            let d = a - b;
            acc = acc + d * d;
        }
        let n = T::from_f64(p.len() as f64);
        let needs = self.needs(pred) || self.needs(target);
        Ok(self.push(Tensor::scalar(acc / n), Op::Mse { pred, target }, needs))
    }

    /// Mean softmax cross-entropy of `[N, K]` logits against class labels.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var, AutodiffError> {
        let ls = self.shape(logits).to_vec();
        if ls.len() != 2 || ls[0] != labels.len() || labels.iter().any(|&l| l >= ls[1]) {
            return Err(AutodiffError::Shape(format!(
                "cross_entropy: logits {ls:?} incompatible with {} labels",
                labels.len()
            )));
        }
        let (n, k) = (ls[0], ls[1]);
        let z = self.value(logits).data();
        let mut probs = vec![0.0f64; n * k];
        let mut loss = 0.0f64;
        for i in 0..n {
            let row = &z[i * k..][..k];
            let m = row.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for (j, v) in row.iter().enumerate() {
                let e = (v.as_f64() - m).exp();
                probs[i * k + j] = e;
                denom += e;
            }
            for p in &mut probs[i * k..][..k] {
                *p /= denom;
            }
            loss -= probs[i * k + labels[i]].ln();
        }
        loss /= n as f64;
        let needs = self.needs(logits);
        Ok(self.push(
            Tensor::scalar(T::from_f64(loss)),
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            needs,
        ))
    }

    /// Reverse sweep from a scalar `loss`. Leaf gradients accumulate across
    /// calls until [`Tape::zero_grad`].
    pub fn backward(&mut self, loss: Var) -> Result<(), AutodiffError> {
        if self.value(loss).numel() != 1 {
            return Err(AutodiffError::NonScalarLoss(self.shape(loss).to_vec()));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![T::one()]);

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            if !self.nodes[id].needs_grad {
                continue;
            }
            let op = &self.nodes[id].op;
            match op {
                Op::Leaf => {
                    self.nodes[id].value.accumulate_grad(&g);
                }
                Op::Conv1d { x, w, b, dims } => {
                    let (x, w, b, dims) = (*x, *w, *b, *dims);
                    let mut dx = self.needs(x).then(|| vec![T::zero(); self.value(x).numel()]);
                    let mut dw = self.needs(w).then(|| vec![T::zero(); self.value(w).numel()]);
                    let mut db = b
                        .filter(|&b| self.needs(b))
                        .map(|b| vec![T::zero(); self.value(b).numel()]);
                    kernels::conv1d_backward(
                        &dims,
                        self.value(x).data(),
                        self.value(w).data(),
                        &g,
                        dx.as_deref_mut(),
                        dw.as_deref_mut(),
                        db.as_deref_mut(),
                    );
                    accumulate(&mut grads, x, dx);
                    accumulate(&mut grads, w, dw);
                    if let Some(b) = b {
                        accumulate(&mut grads, b, db);
                    }
                }
                Op::Dense { x, w, b } => {
                    let (x, w, b) = (*x, *w, *b);
                    let xs = self.shape(x);
                    let (n, in_f) = (xs[0], xs[1]);
                    let out_f = self.shape(w)[0];
                    let mut dx = self.needs(x).then(|| vec![T::zero(); n * in_f]);
                    let mut dw = self.needs(w).then(|| vec![T::zero(); out_f * in_f]);
                    let mut db = b.filter(|&b| self.needs(b)).map(|_| vec![T::zero(); out_f]);
                    kernels::dense_backward(
                        n,
                        in_f,
                        out_f,
                        self.value(x).data(),
                        self.value(w).data(),
                        &g,
                        dx.as_deref_mut(),
                        dw.as_deref_mut(),
                        db.as_deref_mut(),
                    );
                    accumulate(&mut grads, x, dx);
                    accumulate(&mut grads, w, dw);
                    if let Some(b) = b {
                        accumulate(&mut grads, b, db);
                    }
                }
                Op::Relu(x) => {
                    let x = *x;
                    let dx = self
                        .value(x)
                        .data()
                        .iter()
                        .zip(&g)
                        .map(|(&v, &gv)| if v > T::zero() { gv } else { T::zero() })
                        .collect();
                    accumulate(&mut grads, x, Some(dx));
                }
                Op::MaxPool { x, argmax } => {
                    let x = *x;
                    let mut dx = vec![T::zero(); self.value(x).numel()];
                    for (&idx, &gv) in argmax.iter().zip(&g) {
                        dx[idx] = dx[idx] + gv;
                    }
                    accumulate(&mut grads, x, Some(dx));
                }
                Op::Reshape(x) => {
                    let x = *x;
                    accumulate(&mut grads, x, Some(g));
                }
                Op::Add(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.needs(b) {
                        accumulate(&mut grads, b, Some(g.clone()));
                    }
                    accumulate(&mut grads, a, Some(g));
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.needs(a) {
                        let da = g.iter().zip(self.value(b).data()).map(|(&gv, &bv)| gv * bv).collect();
                        accumulate(&mut grads, a, Some(da));
                    }
                    if self.needs(b) {
                        let db = g.iter().zip(self.value(a).data()).map(|(&gv, &av)| gv * av).collect();
                        accumulate(&mut grads, b, Some(db));
                    }
                }
                Op::Scale(x, f) => {
                    let (x, f) = (*x, T::from_f64(*f));
                    accumulate(&mut grads, x, Some(g.iter().map(|&v| v * f).collect()));
                }
                Op::Subsample { x, stride } => {
                    let (x, stride) = (*x, *stride);
                    let xs = self.shape(x);
                    let (rows, len) = (xs[0] * xs[1], xs[2]);
                    let out_len = g.len() / rows;
                    let mut dx = vec![T::zero(); rows * len];
                    for r in 0..rows {
                        for j in 0..out_len {
                            dx[r * len + j * stride] = g[r * out_len + j];
                        }
                    }
                    accumulate(&mut grads, x, Some(dx));
                }
                Op::Sum(x) => {
                    let x = *x;
                    let n = self.value(x).numel();
                    accumulate(&mut grads, x, Some(vec![g[0]; n]));
                }
                Op::Mse { pred, target } => {
                    let (pred, target) = (*pred, *target);
                    let p = self.value(pred).data();
                    let t = self.value(target).data();
                    let scale = T::from_f64(2.0) / T::from_f64(p.len() as f64) * g[0];
                    let dp: Vec<T> = p.iter().zip(t).map(|(&a, &b)| (a - b) * scale).collect();
                    if self.needs(target) {
                        let dt = dp.iter().map(|&v| -v).collect();
                        accumulate(&mut grads, target, Some(dt));
                    }
                    accumulate(&mut grads, pred, Some(dp));
                }
                Op::CrossEntropy {
                    logits,
                    labels,
                    probs,
                } => {
                    let logits = *logits;
                    let n = labels.len();
                    let k = probs.len() / n;
                    let g0 = g[0].as_f64() / n as f64;
                    let mut dz: Vec<T> = probs.iter().map(|&p| T::from_f64(p * g0)).collect();
                    for (i, &l) in labels.iter().enumerate() {
                        dz[i * k + l] = dz[i * k + l] - T::from_f64(g0);
                    }
                    accumulate(&mut grads, logits, Some(dz));
                }
            }
        }
        Ok(())
    }
}

fn accumulate<T: Scalar>(grads: &mut [Option<Vec<T>>], v: Var, g: Option<Vec<T>>) {
    let Some(g) = g else { return };
    match &mut grads[v.0] {
        Some(acc) => {
            for (a, b) in acc.iter_mut().zip(g) {
                *a = *a + b;
            }
        }
        slot @ None => *slot = Some(g),
    }
}
