//! Layer kernels. Activations are NHWC; conv weights are `[k, k, C, F]`,
//! dense weights `[F_in, F_out]`.

use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// `c[m×n] += a[m×k] · b[k×n]`
pub(crate) fn gemm_nn<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == T::zero() {
                continue;
            }
            for (cv, &bv) in crow.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *cv += av * bv;
            }
        }
    }
}

/// `c[m×n] += aᵀ · b` with `a` stored `[k×m]` and `b` `[k×n]`.
pub(crate) fn gemm_tn<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert!(a.len() >= k * m && b.len() >= k * n && c.len() >= m * n);
    for p in 0..k {
        let brow = &b[p * n..(p + 1) * n];
        for (i, &av) in a[p * m..(p + 1) * m].iter().enumerate() {
            if av == T::zero() {
                continue;
            }
            for (cv, &bv) in c[i * n..(i + 1) * n].iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
}

fn transpose<T: Scalar>(rows: usize, cols: usize, a: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}

fn dims4(t: &Tensor<impl Scalar>, what: &str) -> Result<[usize; 4]> {
    match *t.shape() {
        [n, h, w, c] => Ok([n, h, w, c]),
        ref s => Err(Error::Dimension(format!("{what} expects N×H×W×C, got {s:?}"))),
    }
}

fn dims2(t: &Tensor<impl Scalar>, what: &str) -> Result<[usize; 2]> {
    match *t.shape() {
        [n, f] => Ok([n, f]),
        ref s => Err(Error::Dimension(format!("{what} expects N×F, got {s:?}"))),
    }
}

/// Patch matrix `[(oh·ow) × (k·k·C)]` for one sample, columns ordered
/// `(dy, dx, c)` to match the weight layout.
fn im2col<T: Scalar>(x: &[T], h: usize, w: usize, c: usize, k: usize, cols: &mut [T]) {
    let (oh, ow) = (h - k + 1, w - k + 1);
    let kc = k * c;
    let width = k * kc;
    for y in 0..oh {
        for xo in 0..ow {
            let row = &mut cols[(y * ow + xo) * width..(y * ow + xo + 1) * width];
            for dy in 0..k {
                let src = ((y + dy) * w + xo) * c;
                row[dy * kc..(dy + 1) * kc].copy_from_slice(&x[src..src + kc]);
            }
        }
    }
}

fn col2im_add<T: Scalar>(cols: &[T], h: usize, w: usize, c: usize, k: usize, dx: &mut [T]) {
    let (oh, ow) = (h - k + 1, w - k + 1);
    let kc = k * c;
    let width = k * kc;
    for y in 0..oh {
        for xo in 0..ow {
            let row = &cols[(y * ow + xo) * width..(y * ow + xo + 1) * width];
            for dy in 0..k {
                let dst = ((y + dy) * w + xo) * c;
                for (d, &s) in dx[dst..dst + kc].iter_mut().zip(&row[dy * kc..(dy + 1) * kc]) {
                    *d += s;
                }
            }
        }
    }
}

fn check_conv<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<([usize; 4], usize, usize)> {
    let [n, h, w, c] = dims4(input, "conv2d")?;
    let (k, f) = match *weights.shape() {
        [k1, k2, wc, f] if k1 == k2 && wc == c => (k1, f),
        ref s => {
            return Err(Error::Dimension(format!(
                "conv weights {s:?} do not fit input with {c} channels"
            )))
        }
    };
    if bias.shape() != [f] {
        return Err(Error::Dimension(format!("conv bias {:?}, expected [{f}]", bias.shape())));
    }
    if h < k || w < k {
        return Err(Error::Dimension(format!("conv input {h}x{w} smaller than kernel {k}")));
    }
    Ok(([n, h, w, c], k, f))
}

/// Valid (unpadded) stride-1 convolution plus bias, optionally followed by
/// ReLU.
pub fn conv2d_forward<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>, relu: bool) -> Result<Tensor<T>> {
    let ([n, h, w, c], k, f) = check_conv(input, weights, bias)?;
    let (oh, ow) = (h - k + 1, w - k + 1);
    let width = k * k * c;
    let mut out = Tensor::zeros(vec![n, oh, ow, f]);
    let mut cols = vec![T::zero(); oh * ow * width];
    let in_stride = h * w * c;
    let out_stride = oh * ow * f;
    for s in 0..n {
        im2col(&input.data()[s * in_stride..(s + 1) * in_stride], h, w, c, k, &mut cols);
        let o = &mut out.data_mut()[s * out_stride..(s + 1) * out_stride];
        for row in o.chunks_exact_mut(f) {
            row.copy_from_slice(bias.data());
        }
        gemm_nn(oh * ow, width, f, &cols, weights.data(), o);
        if relu {
            o.iter_mut().for_each(|v| *v = v.max(T::zero()));
        }
    }
    Ok(out)
}

/// `(dW, db, dX)` from a layer's backward pass.
pub type LayerGrads<T> = (Tensor<T>, Tensor<T>, Option<Tensor<T>>);

/// Gradients of a convolution given its input, its (post-activation) output
/// and the upstream gradient. Returns `(dW, db, dX)`; `dX` only when asked.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    output: &Tensor<T>,
    grad_out: &Tensor<T>,
    relu: bool,
    need_input_grad: bool,
) -> Result<LayerGrads<T>> {
    let ([n, h, w, c], k, f) = check_conv(input, weights, bias)?;
    let (oh, ow) = (h - k + 1, w - k + 1);
    if grad_out.shape() != [n, oh, ow, f] || output.shape() != grad_out.shape() {
        return Err(Error::Dimension(format!(
            "conv grad {:?} / output {:?}, expected [{n}, {oh}, {ow}, {f}]",
            grad_out.shape(),
            output.shape()
        )));
    }
    let width = k * k * c;
    let mut dw = Tensor::zeros(weights.shape().to_vec());
    let mut db = Tensor::zeros(vec![f]);
    let mut dx = need_input_grad.then(|| Tensor::zeros(input.shape().to_vec()));
    let wt = need_input_grad.then(|| transpose(width, f, weights.data()));
    let mut cols = vec![T::zero(); oh * ow * width];
    let mut dcols = vec![T::zero(); if need_input_grad { oh * ow * width } else { 0 }];
    let mut g = vec![T::zero(); oh * ow * f];
    let in_stride = h * w * c;
    let out_stride = oh * ow * f;
    for s in 0..n {
        let go = &grad_out.data()[s * out_stride..(s + 1) * out_stride];
        let out = &output.data()[s * out_stride..(s + 1) * out_stride];
        for ((gv, &gov), &ov) in g.iter_mut().zip(go).zip(out) {
            *gv = if relu && ov <= T::zero() { T::zero() } else { gov };
        }
        for row in g.chunks_exact(f) {
            for (d, &v) in db.data_mut().iter_mut().zip(row) {
                *d += v;
            }
        }
        let xs = &input.data()[s * in_stride..(s + 1) * in_stride];
        im2col(xs, h, w, c, k, &mut cols);
        gemm_tn(width, oh * ow, f, &cols, &g, dw.data_mut());
        if let (Some(dx), Some(wt)) = (dx.as_mut(), wt.as_ref()) {
            dcols.iter_mut().for_each(|v| *v = T::zero());
            gemm_nn(oh * ow, f, width, &g, wt, &mut dcols);
            col2im_add(&dcols, h, w, c, k, &mut dx.data_mut()[s * in_stride..(s + 1) * in_stride]);
        }
    }
    Ok((dw, db, dx))
}

/// 2×2 stride-2 max pooling; incomplete trailing windows are dropped. Ties
/// go to the first element in row-major window order. Also returns, per
/// output element, the flat input index it came from.
pub fn maxpool2_forward<T: Scalar>(input: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
    let [n, h, w, c] = dims4(input, "maxpool2")?;
    if h < 2 || w < 2 {
        return Err(Error::Dimension(format!("maxpool2 input {h}x{w} smaller than 2x2")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(vec![n, oh, ow, c]);
    let mut argmax = Vec::with_capacity(n * oh * ow * c);
    let x = input.data();
    let o = out.data_mut();
    let mut k = 0;
    for s in 0..n {
        for y in 0..oh {
            for xo in 0..ow {
                for ch in 0..c {
                    let idx = |dy: usize, dx: usize| ((s * h + 2 * y + dy) * w + 2 * xo + dx) * c + ch;
                    let mut best = idx(0, 0);
                    for cand in [idx(0, 1), idx(1, 0), idx(1, 1)] {
                        if x[cand] > x[best] {
                            best = cand;
                        }
                    }
                    o[k] = x[best];
                    argmax.push(best);
                    k += 1;
                }
            }
        }
    }
    Ok((out, argmax))
}

pub fn maxpool2_backward<T: Scalar>(input_shape: &[usize], argmax: &[usize], grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if argmax.len() != grad_out.len() {
        return Err(Error::Dimension(format!(
            "maxpool grad has {} values for {} windows",
            grad_out.len(),
            argmax.len()
        )));
    }
    let mut dx = Tensor::zeros(input_shape.to_vec());
    let d = dx.data_mut();
    for (&i, &g) in argmax.iter().zip(grad_out.data()) {
        d[i] += g;
    }
    Ok(dx)
}

pub(crate) fn dropout_with<T: Scalar>(input: &Tensor<T>, rate: f64, rng: &mut SeededRng) -> (Tensor<T>, Vec<T>) {
    let scale = T::of(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..input.len())
        .map(|_| if rng.unit_f64() < rate { T::zero() } else { scale })
        .collect();
    let data = input.data().iter().zip(&mask).map(|(&x, &m)| x * m).collect();
    (
        Tensor::new(input.shape().to_vec(), data).expect("same shape"),
        mask,
    )
}

/// Inverted dropout: when active each value is zeroed with probability
/// `rate` and survivors are scaled by `1/(1-rate)`; inactive is identity.
pub fn dropout<T: Scalar>(input: &Tensor<T>, rate: f64, seed: u64, active: bool) -> Result<Tensor<T>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} not in [0, 1)")));
    }
    if !active || rate == 0.0 {
        return Ok(input.clone());
    }
    Ok(dropout_with(input, rate, &mut SeededRng::new(seed)).0)
}

fn check_dense<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<(usize, usize, usize)> {
    let [n, fin] = dims2(input, "dense")?;
    let fout = match *weights.shape() {
        [a, b] if a == fin => b,
        ref s => return Err(Error::Dimension(format!("dense weights {s:?} for {fin} inputs"))),
    };
    if bias.shape() != [fout] {
        return Err(Error::Dimension(format!("dense bias {:?}, expected [{fout}]", bias.shape())));
    }
    Ok((n, fin, fout))
}

/// `x · W + b`, optionally followed by ReLU.
pub fn dense_forward<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>, relu: bool) -> Result<Tensor<T>> {
    let (n, fin, fout) = check_dense(input, weights, bias)?;
    let mut out = Tensor::zeros(vec![n, fout]);
    for row in out.data_mut().chunks_exact_mut(fout) {
        row.copy_from_slice(bias.data());
    }
    gemm_nn(n, fin, fout, input.data(), weights.data(), out.data_mut());
    if relu {
        out.data_mut().iter_mut().for_each(|v| *v = v.max(T::zero()));
    }
    Ok(out)
}

pub fn dense_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    output: &Tensor<T>,
    grad_out: &Tensor<T>,
    relu: bool,
    need_input_grad: bool,
) -> Result<LayerGrads<T>> {
    let (n, fin, fout) = check_dense(input, weights, bias)?;
    if grad_out.shape() != [n, fout] || output.shape() != grad_out.shape() {
        return Err(Error::Dimension(format!(
            "dense grad {:?}, expected [{n}, {fout}]",
            grad_out.shape()
        )));
    }
    let g: Vec<T> = grad_out
        .data()
        .iter()
        .zip(output.data())
        .map(|(&g, &o)| if relu && o <= T::zero() { T::zero() } else { g })
        .collect();
    let mut db = Tensor::zeros(vec![fout]);
    for row in g.chunks_exact(fout) {
        for (d, &v) in db.data_mut().iter_mut().zip(row) {
            *d += v;
        }
    }
    let mut dw = Tensor::zeros(vec![fin, fout]);
    gemm_tn(fin, n, fout, input.data(), &g, dw.data_mut());
    let dx = need_input_grad.then(|| {
        let wt = transpose(fin, fout, weights.data());
        let mut dx = Tensor::zeros(vec![n, fin]);
        gemm_nn(n, fout, fin, &g, &wt, dx.data_mut());
        dx
    });
    Ok((dw, db, dx))
}

/// Row-wise softmax with max subtraction.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let [_, k] = dims2(logits, "softmax")?;
    let mut out = logits.clone();
    for row in out.data_mut().chunks_exact_mut(k) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v = *v / sum);
    }
    Ok(out)
}

/// Mean cross-entropy of softmax(logits) against one-hot targets, and its
/// gradient `(softmax − onehot) / N`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, onehot: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    let [n, k] = dims2(logits, "softmax_cross_entropy")?;
    if onehot.shape() != logits.shape() {
        return Err(Error::Dimension(format!(
            "targets {:?} vs logits {:?}",
            onehot.shape(),
            logits.shape()
        )));
    }
    if n == 0 {
        return Err(Error::Validation("empty batch".into()));
    }
    for (i, row) in onehot.data().chunks_exact(k).enumerate() {
        let ones = row.iter().filter(|&&v| v == T::one()).count();
        let zeros = row.iter().filter(|&&v| v == T::zero()).count();
        if ones != 1 || zeros != k - 1 {
            return Err(Error::Validation(format!("target row {i} is not one-hot")));
        }
    }
    let inv_n = T::one() / T::of(n as f64);
    let mut grad = Tensor::zeros(vec![n, k]);
    let mut loss = T::zero();
    for ((row, y), g) in logits
        .data()
        .chunks_exact(k)
        .zip(onehot.data().chunks_exact(k))
        .zip(grad.data_mut().chunks_exact_mut(k))
    {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let sum: T = row.iter().fold(T::zero(), |acc, &v| acc + (v - max).exp());
        let log_sum = sum.ln();
        for ((&z, &t), gv) in row.iter().zip(y).zip(g.iter_mut()) {
            let log_p = z - max - log_sum;
            if t == T::one() {
                loss -= log_p;
            }
            *gv = (log_p.exp() - t) * inv_n;
        }
    }
    Ok((loss * inv_n, grad))
}
