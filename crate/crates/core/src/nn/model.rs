use std::fmt;

use super::ops::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, dropout_with, maxpool2_backward,
    maxpool2_forward, softmax_cross_entropy,
};
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    None,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LayerSpec {
    /// Valid stride-1 convolution followed by ReLU.
    Conv2D { out_channels: usize, kernel: usize },
    MaxPool2,
    Dropout { rate: f32 },
    Flatten,
    Dense { units: usize, activation: Activation },
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv2D { out_channels, kernel } => write!(f, "Conv{kernel}x{kernel}({out_channels}, relu)"),
            LayerSpec::MaxPool2 => f.write_str("MaxPool2"),
            LayerSpec::Dropout { rate } => write!(f, "Dropout({rate})"),
            LayerSpec::Flatten => f.write_str("Flatten"),
            LayerSpec::Dense { units, activation: Activation::Relu } => write!(f, "Dense({units}, relu)"),
            LayerSpec::Dense { units, activation: Activation::None } => write!(f, "Dense({units})"),
        }
    }
}

/// Architecture: input `H×W×C`, layer list, class count. The last layer
/// must be `Dense { units: n_classes, activation: None }` (logits).
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub input: [usize; 3],
    pub layers: Vec<LayerSpec>,
    pub n_classes: usize,
}

impl ModelSpec {
    /// Conv(32) → MaxPool → Conv(64) → MaxPool → Dropout(0.25) → Flatten →
    /// Dense(128, ReLU) → Dropout(0.5) → Dense(n_classes).
    pub fn standard(input: [usize; 3], n_classes: usize) -> Self {
        ModelSpec {
            input,
            layers: vec![
                LayerSpec::Conv2D { out_channels: 32, kernel: 3 },
                LayerSpec::MaxPool2,
                LayerSpec::Conv2D { out_channels: 64, kernel: 3 },
                LayerSpec::MaxPool2,
                LayerSpec::Dropout { rate: 0.25 },
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 128, activation: Activation::Relu },
                LayerSpec::Dropout { rate: 0.5 },
                LayerSpec::Dense { units: n_classes, activation: Activation::None },
            ],
            n_classes,
        }
    }

    /// Per-sample activation shapes after each layer (index 0 is the input).
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut shapes = vec![self.input.to_vec()];
        for (i, layer) in self.layers.iter().enumerate() {
            let cur = shapes.last().expect("non-empty").clone();
            let bad = |msg: String| Error::Config(format!("layer {i} ({layer}): {msg}"));
            let next = match (layer, cur.as_slice()) {
                (LayerSpec::Conv2D { out_channels, kernel }, &[h, w, _]) => {
                    if *kernel == 0 || h < *kernel || w < *kernel || *out_channels == 0 {
                        return Err(bad(format!("does not fit input {cur:?}")));
                    }
                    vec![h - kernel + 1, w - kernel + 1, *out_channels]
                }
                (LayerSpec::MaxPool2, &[h, w, c]) => {
                    if h < 2 || w < 2 {
                        return Err(bad(format!("input {cur:?} smaller than 2x2")));
                    }
                    vec![h / 2, w / 2, c]
                }
                (LayerSpec::Dropout { rate }, _) => {
                    if !(0.0..1.0).contains(rate) {
                        return Err(bad(format!("rate {rate} not in [0, 1)")));
                    }
                    cur
                }
                (LayerSpec::Flatten, s) => vec![s.iter().product()],
                (LayerSpec::Dense { units, .. }, &[_]) if *units > 0 => vec![*units],
                _ => return Err(bad(format!("cannot follow activation shape {cur:?}"))),
            };
            shapes.push(next);
        }
        match self.layers.last() {
            Some(LayerSpec::Dense { units, activation: Activation::None }) if *units == self.n_classes => Ok(shapes),
            _ => Err(Error::Config(format!(
                "final layer must be Dense({}) without activation",
                self.n_classes
            ))),
        }
    }

    /// Shapes of the trainable tensors in declaration order (weight, bias
    /// per parameterized layer).
    pub fn param_shapes(&self) -> Result<Vec<Vec<usize>>> {
        let shapes = self.shapes()?;
        let mut out = Vec::new();
        for (layer, input) in self.layers.iter().zip(&shapes) {
            match layer {
                LayerSpec::Conv2D { out_channels, kernel } => {
                    out.push(vec![*kernel, *kernel, input[2], *out_channels]);
                    out.push(vec![*out_channels]);
                }
                LayerSpec::Dense { units, .. } => {
                    out.push(vec![input[0], *units]);
                    out.push(vec![*units]);
                }
                _ => {}
            }
        }
        Ok(out)
    }
}

/// Layer caches recorded by a forward pass for the backward pass.
#[derive(Debug)]
enum LayerCache<T> {
    Conv { input: Tensor<T>, output: Tensor<T> },
    Pool { input_shape: Vec<usize>, argmax: Vec<usize> },
    Dropout { mask: Option<Vec<T>> },
    Flatten { input_shape: Vec<usize> },
    Dense { input: Tensor<T>, output: Tensor<T> },
}

#[derive(Debug)]
pub struct ForwardCache<T> {
    layers: Vec<LayerCache<T>>,
}

/// Dropout is applied only in `Train`, drawing masks from the given stream.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut SeededRng),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub spec: ModelSpec,
    pub params: Vec<Tensor<T>>,
}

impl<T: Scalar> Model<T> {
    /// He-uniform weights (`±√(6/fan_in)`), zero biases.
    pub fn init(spec: ModelSpec, seed: u64) -> Result<Self> {
        let mut rng = SeededRng::new(seed);
        let params = spec
            .param_shapes()?
            .into_iter()
            .map(|shape| {
                if shape.len() == 1 {
                    return Tensor::zeros(shape);
                }
                let fan_in: usize = shape[..shape.len() - 1].iter().product();
                let limit = (6.0 / fan_in as f64).sqrt();
                let len = shape.iter().product();
                let data = (0..len).map(|_| T::of((rng.unit_f64() * 2.0 - 1.0) * limit)).collect();
                Tensor::new(shape, data).expect("shape from spec")
            })
            .collect();
        Ok(Model { spec, params })
    }

    pub fn from_params(spec: ModelSpec, params: Vec<Tensor<T>>) -> Result<Self> {
        let want = spec.param_shapes()?;
        if want.len() != params.len() || want.iter().zip(&params).any(|(w, p)| w.as_slice() != p.shape()) {
            return Err(Error::Dimension(format!(
                "parameter shapes {:?} do not match architecture {want:?}",
                params.iter().map(|p| p.shape().to_vec()).collect::<Vec<_>>()
            )));
        }
        Ok(Model { spec, params })
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            spec: self.spec.clone(),
            params: self.params.iter().map(Tensor::cast).collect(),
        }
    }

    pub fn n_parameters(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let s = x.shape();
        if s.len() != 4 || s[1..] != self.spec.input {
            return Err(Error::Dimension(format!(
                "input {s:?} does not match model input N×{:?}",
                self.spec.input
            )));
        }
        Ok(())
    }

    /// Logits for a batch `N×H×W×C`, plus the caches needed by
    /// [`Model::backward`].
    pub fn forward(&self, x: &Tensor<T>, mut mode: Mode<'_>) -> Result<(Tensor<T>, ForwardCache<T>)> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.spec.layers.len());
        let mut act = x.clone();
        let mut p = 0;
        for layer in &self.spec.layers {
            act = match layer {
                LayerSpec::Conv2D { .. } => {
                    let out = conv2d_forward(&act, &self.params[p], &self.params[p + 1], true)?;
                    p += 2;
                    caches.push(LayerCache::Conv { input: act, output: out.clone() });
                    out
                }
                LayerSpec::MaxPool2 => {
                    let (out, argmax) = maxpool2_forward(&act)?;
                    caches.push(LayerCache::Pool {
                        input_shape: act.shape().to_vec(),
                        argmax,
                    });
                    out
                }
                LayerSpec::Dropout { rate } => match &mut mode {
                    Mode::Train(rng) if *rate > 0.0 => {
                        let (out, mask) = dropout_with(&act, *rate as f64, rng);
                        caches.push(LayerCache::Dropout { mask: Some(mask) });
                        out
                    }
                    _ => {
                        caches.push(LayerCache::Dropout { mask: None });
                        act
                    }
                },
                LayerSpec::Flatten => {
                    let input_shape = act.shape().to_vec();
                    let n = input_shape[0];
                    let f = act.len() / n.max(1);
                    caches.push(LayerCache::Flatten { input_shape });
                    act.reshape(vec![n, f])?
                }
                LayerSpec::Dense { activation, .. } => {
                    let relu = *activation == Activation::Relu;
                    let out = dense_forward(&act, &self.params[p], &self.params[p + 1], relu)?;
                    p += 2;
                    caches.push(LayerCache::Dense { input: act, output: out.clone() });
                    out
                }
            };
        }
        Ok((act, ForwardCache { layers: caches }))
    }

    /// Reverse-mode gradients of the loss with respect to every parameter,
    /// given `d loss / d logits`.
    pub fn backward(&self, cache: ForwardCache<T>, grad_logits: Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.params.len()];
        let mut p = self.params.len();
        let mut grad = grad_logits;
        let n_layers = self.spec.layers.len();
        for (i, (layer, lc)) in self.spec.layers.iter().zip(cache.layers).enumerate().rev() {
            // the first parameterized layer's input gradient is never used
            let need_input = self.spec.layers[..i]
                .iter()
                .any(|l| matches!(l, LayerSpec::Conv2D { .. } | LayerSpec::Dense { .. }));
            grad = match (layer, lc) {
                (LayerSpec::Conv2D { .. }, LayerCache::Conv { input, output }) => {
                    p -= 2;
                    let (dw, db, dx) = conv2d_backward(&input, &self.params[p], &self.params[p + 1], &output, &grad, true, need_input)?;
                    grads[p] = Some(dw);
                    grads[p + 1] = Some(db);
                    match dx {
                        Some(dx) => dx,
                        None => break,
                    }
                }
                (LayerSpec::Dense { activation, .. }, LayerCache::Dense { input, output }) => {
                    p -= 2;
                    let relu = *activation == Activation::Relu;
                    let (dw, db, dx) = dense_backward(&input, &self.params[p], &self.params[p + 1], &output, &grad, relu, need_input)?;
                    grads[p] = Some(dw);
                    grads[p + 1] = Some(db);
                    match dx {
                        Some(dx) => dx,
                        None => break,
                    }
                }
                (LayerSpec::MaxPool2, LayerCache::Pool { input_shape, argmax }) => {
                    maxpool2_backward(&input_shape, &argmax, &grad)?
                }
                (LayerSpec::Dropout { .. }, LayerCache::Dropout { mask }) => {
                    if let Some(mask) = mask {
                        for (g, m) in grad.data_mut().iter_mut().zip(mask) {
                            *g *= m;
                        }
                    }
                    grad
                }
                (LayerSpec::Flatten, LayerCache::Flatten { input_shape }) => grad.reshape(input_shape)?,
                _ => unreachable!("cache of layer {i}/{n_layers} recorded by forward"),
            };
        }
        Ok(grads
            .into_iter()
            .zip(&self.params)
            .map(|(g, p)| g.unwrap_or_else(|| Tensor::zeros(p.shape().to_vec())))
            .collect())
    }

    /// Forward, mean cross-entropy against `onehot`, and backward.
    pub fn loss_and_grads(&self, x: &Tensor<T>, onehot: &Tensor<T>, mode: Mode<'_>) -> Result<(T, Vec<Tensor<T>>, Tensor<T>)> {
        let (logits, cache) = self.forward(x, mode)?;
        let (loss, grad) = softmax_cross_entropy(&logits, onehot)?;
        let grads = self.backward(cache, grad)?;
        Ok((loss, grads, logits))
    }

    /// Logits in evaluation mode.
    pub fn logits(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward(x, Mode::Eval)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> ModelSpec {
        ModelSpec {
            input: [8, 8, 4],
            layers: vec![
                LayerSpec::Conv2D { out_channels: 2, kernel: 3 },
                LayerSpec::MaxPool2,
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 8, activation: Activation::Relu },
                LayerSpec::Dense { units: 3, activation: Activation::None },
            ],
            n_classes: 3,
        }
    }

    #[test]
    fn standard_shapes() {
        let s = ModelSpec::standard([64, 64, 1], 43);
        let shapes = s.shapes().unwrap();
        assert_eq!(shapes[1], vec![62, 62, 32]);
        assert_eq!(shapes[4], vec![14, 14, 64]);
        assert_eq!(shapes[6], vec![12544]);
        let q = ModelSpec::standard([32, 32, 4], 43).shapes().unwrap();
        assert_eq!(q[6], vec![2304]);
        assert_eq!(tiny_spec().param_shapes().unwrap(), vec![vec![3, 3, 4, 2], vec![2], vec![18, 8], vec![8], vec![8, 3], vec![3]]);
    }

    #[test]
    fn spec_rejects_bad_stacks() {
        let mut s = tiny_spec();
        s.layers.remove(2);
        assert!(s.shapes().is_err(), "dense on 4-d input");
        let mut s = tiny_spec();
        s.n_classes = 4;
        assert!(s.shapes().is_err(), "head size");
        let mut s = tiny_spec();
        s.layers.push(LayerSpec::Dropout { rate: 0.1 });
        assert!(s.shapes().is_err(), "logits must be last");
    }

    #[test]
    fn zero_head_blocks_upstream_gradients() {
        let mut m: Model<f64> = Model::init(tiny_spec(), 3).unwrap();
        m.params[4].data_mut().iter_mut().for_each(|v| *v = 0.0);
        let mut rng = SeededRng::new(1);
        let x = Tensor::new(vec![2, 8, 8, 4], (0..512).map(|_| rng.unit_f64()).collect()).unwrap();
        let mut y = Tensor::zeros(vec![2, 3]);
        y.data_mut()[0] = 1.0;
        y.data_mut()[5] = 1.0;
        let (_, grads, _) = m.loss_and_grads(&x, &y, Mode::Eval).unwrap();
        for g in &grads[..4] {
            assert!(g.data().iter().all(|&v| v == 0.0));
        }
        assert!(grads[5].data().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn input_shape_checked() {
        let m: Model<f32> = Model::init(tiny_spec(), 3).unwrap();
        assert!(m.logits(&Tensor::zeros(vec![1, 8, 8, 3])).is_err());
        assert_eq!(m.logits(&Tensor::zeros(vec![5, 8, 8, 4])).unwrap().shape(), [5, 3]);
    }

    #[test]
    fn init_is_seeded_he_uniform() {
        let a: Model<f32> = Model::init(tiny_spec(), 11).unwrap();
        assert_eq!(a, Model::init(tiny_spec(), 11).unwrap());
        let limit = (6.0f32 / 36.0).sqrt();
        assert!(a.params[0].data().iter().all(|v| v.abs() <= limit));
        assert!(a.params[1].data().iter().all(|&v| v == 0.0));
    }
}
