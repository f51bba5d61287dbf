//! Raw forward/backward kernels on flat row-major buffers.
//!
//! Every reduction runs in a fixed order (bias, then input channel, then
//! kernel tap, then batch; long dot products use eight fixed lanes) so
//! results are reproducible bit for bit.

use super::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv1dDims {
    pub batch: usize,
    pub in_channels: usize,
    pub in_len: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl Conv1dDims {
    pub fn out_len(&self) -> usize {
        (self.in_len + 2 * self.padding - self.kernel) / self.stride + 1
    }

    /// Range of output positions whose tap `k` lands inside the unpadded input.
    fn valid_range(&self, k: usize) -> (usize, usize) {
        let lo_out = self.out_len();
        let p = self.padding as isize;
        let s = self.stride as isize;
        let k = k as isize;
        // pos = lo*s + k - p must satisfy 0 <= pos < in_len
        let first = if p - k <= 0 { 0 } else { ((p - k) + s - 1) / s };
        let end_num = self.in_len as isize - k + p;
        let last = if end_num <= 0 { 0 } else { (end_num + s - 1) / s };
        let first = (first.max(0) as usize).min(lo_out);
        let last = (last.max(0) as usize).min(lo_out);
        (first, last.max(first))
    }
}

/// Dot product over eight interleaved partial sums, combined left to right.
/// The grouping is fixed, so the result does not depend on the target's SIMD width.
#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut lanes = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (xa, xb) in ca.zip(cb) {
        for j in 0..8 {
            lanes[j] = lanes[j] + xa[j] * xb[j];
        }
    }
    let mut acc = T::zero();
    for v in lanes {
        acc = acc + v;
    }
    for (&x, &y) in ra.iter().zip(rb) {
        acc = acc + x * y;
    }
    acc
}

pub fn conv1d_forward<T: Scalar>(
    d: &Conv1dDims,
    x: &[T],
    w: &[T],
    bias: Option<&[T]>,
    out: &mut [T],
) {
    let lo = d.out_len();
    let (ci_n, l, k_n, s, p) = (d.in_channels, d.in_len, d.kernel, d.stride, d.padding);
    for n in 0..d.batch {
        for co in 0..d.out_channels {
            let row = &mut out[(n * d.out_channels + co) * lo..][..lo];
            let b = bias.map_or(T::zero(), |b| b[co]);
            row.iter_mut().for_each(|v| *v = b);
            for ci in 0..ci_n {
                let xrow = &x[(n * ci_n + ci) * l..][..l];
                let wrow = &w[(co * ci_n + ci) * k_n..][..k_n];
                for (k, &wv) in wrow.iter().enumerate() {
                    let (first, last) = d.valid_range(k);
                    if first >= last {
                        continue;
                    }
                    let start = first * s + k - p;
                    if s == 1 {
                        let xs = &xrow[start..start + (last - first)];
                        for (o, &xv) in row[first..last].iter_mut().zip(xs) {
                            *o = *o + wv * xv;
                        }
                    } else {
                        for (i, o) in row[first..last].iter_mut().enumerate() {
                            *o = *o + wv * xrow[start + i * s];
                        }
                    }
                }
            }
        }
    }
}

/// Accumulates input, weight and bias gradients of a conv1d given `dy`.
#[allow(clippy::too_many_arguments)]
pub fn conv1d_backward<T: Scalar>(
    d: &Conv1dDims,
    x: &[T],
    w: &[T],
    dy: &[T],
    mut dx: Option<&mut [T]>,
    mut dw: Option<&mut [T]>,
    mut db: Option<&mut [T]>,
) {
    let lo = d.out_len();
    let (ci_n, l, k_n, s, p) = (d.in_channels, d.in_len, d.kernel, d.stride, d.padding);
    for n in 0..d.batch {
        for co in 0..d.out_channels {
            let grow = &dy[(n * d.out_channels + co) * lo..][..lo];
            if let Some(db) = db.as_deref_mut() {
                let mut acc = T::zero();
                for &g in grow {
                    acc = acc + g;
                }
                db[co] = db[co] + acc;
            }
            for ci in 0..ci_n {
                let xoff = (n * ci_n + ci) * l;
                let woff = (co * ci_n + ci) * k_n;
                for k in 0..k_n {
                    let (first, last) = d.valid_range(k);
                    if first >= last {
                        continue;
                    }
                    let start = first * s + k - p;
                    let gs = &grow[first..last];
                    if let Some(dw) = dw.as_deref_mut() {
                        let acc = if s == 1 {
                            dot(gs, &x[xoff + start..][..gs.len()])
                        } else {
                            let mut acc = T::zero();
                            for (i, &g) in gs.iter().enumerate() {
                                acc = acc + g * x[xoff + start + i * s];
                            }
                            acc
                        };
                        dw[woff + k] = dw[woff + k] + acc;
                    }
                    if let Some(dx) = dx.as_deref_mut() {
                        let wv = w[woff + k];
                        if s == 1 {
                            for (d, &g) in dx[xoff + start..][..gs.len()].iter_mut().zip(gs) {
                                *d = *d + wv * g;
                            }
                        } else {
                            for (i, &g) in gs.iter().enumerate() {
                                let idx = xoff + start + i * s;
                                dx[idx] = dx[idx] + wv * g;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// y[n, o] = b[o] + sum_i w[o, i] * x[n, i]
pub fn dense_forward<T: Scalar>(
    batch: usize,
    in_f: usize,
    out_f: usize,
    x: &[T],
    w: &[T],
    bias: Option<&[T]>,
    out: &mut [T],
) {
    for n in 0..batch {
        let xr = &x[n * in_f..][..in_f];
        for o in 0..out_f {
            let wr = &w[o * in_f..][..in_f];
            out[n * out_f + o] = bias.map_or(T::zero(), |b| b[o]) + dot(wr, xr);
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn dense_backward<T: Scalar>(
    batch: usize,
    in_f: usize,
    out_f: usize,
    x: &[T],
    w: &[T],
    dy: &[T],
    mut dx: Option<&mut [T]>,
    mut dw: Option<&mut [T]>,
    mut db: Option<&mut [T]>,
) {
    for n in 0..batch {
        let xr = &x[n * in_f..][..in_f];
        for o in 0..out_f {
            let g = dy[n * out_f + o];
            if let Some(db) = db.as_deref_mut() {
                db[o] = db[o] + g;
            }
            if let Some(dw) = dw.as_deref_mut() {
                for (d, &xv) in dw[o * in_f..][..in_f].iter_mut().zip(xr) {
                    *d = *d + g * xv;
                }
            }
            if let Some(dx) = dx.as_deref_mut() {
                let wr = &w[o * in_f..][..in_f];
                for (d, &wv) in dx[n * in_f..][..in_f].iter_mut().zip(wr) {
                    *d = *d + g * wv;
                }
            }
        }
    }
}

/// Max pooling over the last axis of a `[rows, len]` view. Returns the flat
/// input index of each selected maximum (first occurrence wins).
pub fn maxpool_forward<T: Scalar>(
    rows: usize,
    len: usize,
    kernel: usize,
    stride: usize,
    x: &[T],
    out: &mut [T],
) -> Vec<usize> {
    let lo = (len - kernel) / stride + 1;
    let mut argmax = Vec::with_capacity(rows * lo);
    for r in 0..rows {
        let xr = &x[r * len..][..len];
        for j in 0..lo {
            let start = j * stride;
            let mut best = start;
            for i in start + 1..start + kernel {
                if xr[i] > xr[best] {
                    best = i;
                }
            }
            out[r * lo + j] = xr[best];
            argmax.push(r * len + best);
        }
    }
    argmax
}
