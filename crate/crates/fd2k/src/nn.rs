//! Dense feed-forward networks with hand-written backpropagation, Adam and
//! soft target updates.
//!
//! Weights of a layer are stored `in x out`, so a batch `X` (rows are samples)
//! maps to `X . W + b`. Every operation works on batches; the single-vector
//! entry points wrap a one-row batch.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// `x` for `x > 0`, `e^x - 1` otherwise.
    Elu,
    Sigmoid,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
            Activation::Sigmoid => sigmoid(z),
            Activation::Linear => z,
        }
    }

    /// Derivative at pre-activation `z`, given `a = apply(z)`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z > 0.0 {
                    1.0
                } else {
                    a + 1.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Linear => 1.0,
        }
    }

    fn tag(self) -> u8 {
        match self {
            Activation::Elu => 0,
            Activation::Sigmoid => 1,
            Activation::Linear => 2,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Activation::Elu),
            1 => Ok(Activation::Sigmoid),
            2 => Ok(Activation::Linear),
            other => Err(Error::Decode(format!("unknown activation tag {other}"))),
        }
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Weights (`in x out`) and bias of one layer. Also used for gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weights: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    fn fan_in(&self) -> usize {
        self.weights.nrows()
    }

    fn fan_out(&self) -> usize {
        self.weights.ncols()
    }

    fn len(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn same_shape(&self, other: &Dense) -> bool {
        self.weights.dim() == other.weights.dim() && self.bias.len() == other.bias.len()
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.bias.iter())
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    layers: Vec<Dense>,
    hidden: Activation,
    output: Activation,
}

/// Per-layer inputs and pre-activations recorded by a forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    dims: Vec<usize>,
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    outputs: Array2<f64>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.outputs.nrows()
    }

    pub fn output(&self) -> &Array2<f64> {
        &self.outputs
    }
}

/// Parameter-shaped partial derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Dense::zeros(l.fan_in(), l.fan_out()))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(Dense::values)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.values().copied().collect()
    }

    fn congruent(&self, net: &Mlp) -> bool {
        self.layers.len() == net.layers.len()
            && self.layers.iter().zip(&net.layers).all(|(g, l)| g.same_shape(l))
    }
}

impl Mlp {
    /// Fan-based uniform weights `U(-sqrt(6 / (in + out)), +sqrt(6 / (in + out)))`,
    /// zero biases, elu hidden layers.
    pub fn new(dims: &[usize], output: Activation, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::with_rng(dims, output, &mut rng)
    }

    pub fn with_rng<R: Rng + ?Sized>(dims: &[usize], output: Activation, rng: &mut R) -> Result<Self> {
        check_dims(dims)?;
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights =
                    Array2::from_shape_simple_fn((fan_in, fan_out), || rng.gen_range(-limit..=limit));
                Dense {
                    weights,
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Self {
            dims: dims.to_vec(),
            layers,
            hidden: Activation::Elu,
            output,
        })
    }

    /// Builds a network from explicit layers.
    pub fn from_layers(layers: Vec<Dense>, hidden: Activation, output: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("network needs at least one layer"));
        }
        let mut dims = vec![layers[0].fan_in()];
        for (i, layer) in layers.iter().enumerate() {
            if layer.fan_in() != *dims.last().unwrap() {
                return Err(Error::Shape(format!(
                    "layer {i} expects {} inputs, previous layer gives {}",
                    layer.fan_in(),
                    dims.last().unwrap()
                )));
            }
            if layer.bias.len() != layer.fan_out() {
                return Err(Error::Shape(format!("layer {i} bias length mismatch")));
            }
            dims.push(layer.fan_out());
        }
        check_dims(&dims)?;
        let net = Self {
            dims,
            layers,
            hidden,
            output,
        };
        if !net.is_finite() {
            return Err(Error::NonFinite("network parameters"));
        }
        Ok(net)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::len).sum()
    }

    /// Parameters flattened layer by layer: weights row-major, then bias.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(Dense::values)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(Dense::values_mut)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.params().copied().collect()
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        check_len("flat parameter vector", self.param_count(), values.len())?;
        for (p, v) in self.params_mut().zip(values) {
            *p = *v;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|v| v.is_finite())
    }

    /// Same layer dims and activations.
    pub fn congruent(&self, other: &Mlp) -> bool {
        self.dims == other.dims && self.hidden == other.hidden && self.output == other.output
    }

    fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output
        } else {
            self.hidden
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        let x = Array2::from_shape_vec((1, input.len()), input.to_vec())
            .expect("one-row batch always has a valid shape");
        let cache = self.forward_batch(&x)?;
        let out = cache.outputs.row(0).to_vec();
        Ok((out, cache))
    }

    pub fn forward_batch(&self, input: &Array2<f64>) -> Result<ForwardCache> {
        check_len("network input", self.input_dim(), input.ncols())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = x.dot(&layer.weights) + &layer.bias;
            let act = self.activation_of(i);
            let a = z.mapv(|v| act.apply(v));
            inputs.push(x);
            pre.push(z);
            x = a;
        }
        Ok(ForwardCache {
            dims: self.dims.clone(),
            inputs,
            pre,
            outputs: x,
        })
    }

    /// Forward pass without recording a cache.
    pub fn predict_batch(&self, input: &Array2<f64>) -> Result<Array2<f64>> {
        check_len("network input", self.input_dim(), input.ncols())?;
        let mut x = input.dot(&self.layers[0].weights) + &self.layers[0].bias;
        let act = self.activation_of(0);
        x.mapv_inplace(|v| act.apply(v));
        for (i, layer) in self.layers.iter().enumerate().skip(1) {
            x = x.dot(&layer.weights) + &layer.bias;
            let act = self.activation_of(i);
            x.mapv_inplace(|v| act.apply(v));
        }
        Ok(x)
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = Array2::from_shape_vec((1, input.len()), input.to_vec())
            .expect("one-row batch always has a valid shape");
        Ok(self.predict_batch(&x)?.row(0).to_vec())
    }

    /// Reverse-mode pass. `output_grad` holds `dL/d(output)` per sample; the
    /// returned parameter gradients are summed over the batch, and the input
    /// gradient is per sample.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_grad: &Array2<f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        let (grads, input_grad) = self.backprop(cache, output_grad, true)?;
        Ok((grads.expect("parameter gradients requested"), input_grad))
    }

    /// Only `dL/d(input)`; skips the parameter gradient products.
    pub fn input_gradient(&self, cache: &ForwardCache, output_grad: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.backprop(cache, output_grad, false)?.1)
    }

    fn backprop(
        &self,
        cache: &ForwardCache,
        output_grad: &Array2<f64>,
        with_params: bool,
    ) -> Result<(Option<Gradients>, Array2<f64>)> {
        if cache.dims != self.dims || cache.inputs.len() != self.layers.len() {
            return Err(Error::Shape("forward cache does not belong to this network".into()));
        }
        if output_grad.dim() != cache.outputs.dim() {
            return Err(Error::Shape(format!(
                "output gradient {:?} does not match cached output {:?}",
                output_grad.dim(),
                cache.outputs.dim()
            )));
        }
        let mut grads = with_params.then(|| Gradients::zeros_like(self));
        let mut upstream = output_grad.clone();
        for i in (0..self.layers.len()).rev() {
            let act = self.activation_of(i);
            let z = &cache.pre[i];
            // post-activation of layer i is the next layer's input (or the output)
            let a = if i + 1 == self.layers.len() {
                &cache.outputs
            } else {
                &cache.inputs[i + 1]
            };
            let mut delta = upstream;
            Zip::from(&mut delta)
                .and(z)
                .and(a)
                .for_each(|d, &z, &a| *d *= act.derivative(z, a));
            if let Some(g) = grads.as_mut() {
                g.layers[i].weights = cache.inputs[i].t().dot(&delta);
                g.layers[i].bias = delta.sum_axis(Axis(0));
            }
            upstream = delta.dot(&self.layers[i].weights.t());
        }
        Ok((grads, upstream))
    }

    /// Little-endian model file: magic `FD2K`, version, dim count, dims,
    /// hidden and output activation tags, then every parameter as f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(serialized_len(&self.dims));
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.push(self.hidden.tag());
        out.push(self.output.tag());
        for p in self.params() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(4)? != MODEL_MAGIC {
            return Err(Error::Decode("bad magic, not an FD2K model".into()));
        }
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(Error::Version {
                found: version,
                expected: MODEL_VERSION,
            });
        }
        let n = r.u32()? as usize;
        if !(2..=64).contains(&n) {
            return Err(Error::Decode(format!("implausible layer count {n}")));
        }
        let dims = (0..n).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        check_dims(&dims).map_err(|e| Error::Decode(e.to_string()))?;
        let hidden = Activation::from_tag(r.u8()?)?;
        let output = Activation::from_tag(r.u8()?)?;
        let expected = serialized_len(&dims);
        if bytes.len() != expected {
            return Err(Error::Decode(format!(
                "payload is {} bytes, header implies {expected}",
                bytes.len()
            )));
        }
        let mut layers = Vec::with_capacity(n - 1);
        for w in dims.windows(2) {
            let mut layer = Dense::zeros(w[0], w[1]);
            for p in layer.values_mut() {
                *p = r.f64()?;
            }
            layers.push(layer);
        }
        Ok(Self {
            dims,
            layers,
            hidden,
            output,
        })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

pub const MODEL_MAGIC: &[u8; 4] = b"FD2K";
pub const MODEL_VERSION: u32 = 1;

/// Byte size of a serialized network with the given dims.
pub fn serialized_len(dims: &[usize]) -> usize {
    let params: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    4 + 4 + 4 + 4 * dims.len() + 2 + 8 * params
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Decode(format!(
                "truncated payload: need {end} bytes, have {}",
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::config(format!(
            "network needs at least an input and an output layer, got dims {dims:?}"
        )));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::config(format!("layer dims must be positive, got {dims:?}")));
    }
    Ok(())
}

/// Adam optimizer state for one network.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    m: Gradients,
    v: Gradients,
    step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(net: &Mlp, learning_rate: f64) -> Self {
        Self {
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of `net` along `grads` (descent).
    /// Non-finite gradients are rejected and leave both net and state untouched.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        if !grads.congruent(net) || !self.m.congruent(net) {
            return Err(Error::Shape("gradients, optimizer state and network differ in shape".into()));
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradients"));
        }
        self.step += 1;
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.eps, self.learning_rate);
        let c1 = 1.0 - b1.powf(self.step as f64);
        let c2 = 1.0 - b2.powf(self.step as f64);
        for (((layer, g), m), v) in net
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.m.layers)
            .zip(&mut self.v.layers)
        {
            let update = |p: &mut f64, g: &f64, m: &mut f64, v: &mut f64| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            };
            Zip::from(&mut layer.weights)
                .and(&g.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .for_each(update);
            Zip::from(&mut layer.bias)
                .and(&g.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .for_each(update);
        }
        Ok(())
    }
}

/// `target <- rho * online + (1 - rho) * target`, elementwise.
pub fn soft_update(target: &mut Mlp, online: &Mlp, rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::config(format!("soft update rate must lie in [0, 1], got {rho}")));
    }
    if !target.congruent(online) {
        return Err(Error::Shape(format!(
            "soft update between dims {:?} and {:?}",
            target.dims, online.dims
        )));
    }
    for (t, o) in target.layers.iter_mut().zip(&online.layers) {
        Zip::from(&mut t.weights)
            .and(&o.weights)
            .for_each(|t, &o| *t = rho * o + (1.0 - rho) * *t);
        Zip::from(&mut t.bias)
            .and(&o.bias)
            .for_each(|t, &o| *t = rho * o + (1.0 - rho) * *t);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn scalar_net(w: f64, b: f64, output: Activation) -> Mlp {
        Mlp::from_layers(
            vec![Dense {
                weights: array![[w]],
                bias: array![b],
            }],
            Activation::Elu,
            output,
        )
        .unwrap()
    }

    #[test]
    fn init_is_deterministic_with_zero_bias_and_bounded_weights() {
        let a = Mlp::new(&[2, 3, 1], Activation::Sigmoid, 7).unwrap();
        let b = Mlp::new(&[2, 3, 1], Activation::Sigmoid, 7).unwrap();
        assert_eq!(a, b);
        for layer in a.layers() {
            assert!(layer.bias.iter().all(|&v| v == 0.0));
            let limit = (6.0 / (layer.fan_in() + layer.fan_out()) as f64).sqrt();
            assert!(layer.weights.iter().all(|w| w.abs() <= limit));
        }
    }

    #[test]
    fn init_rejects_bad_dims() {
        assert!(Mlp::new(&[3], Activation::Linear, 0).is_err());
        assert!(Mlp::new(&[], Activation::Linear, 0).is_err());
        assert!(Mlp::new(&[2, 0, 1], Activation::Linear, 0).is_err());
    }

    #[test]
    fn zero_network_with_sigmoid_outputs_half() {
        let mut net = Mlp::new(&[3, 4, 2], Activation::Sigmoid, 1).unwrap();
        net.params_mut().for_each(|p| *p = 0.0);
        let (out, _) = net.forward(&[0.3, -1.0, 2.0]).unwrap();
        assert_eq!(out, vec![0.5, 0.5]);
    }

    #[test]
    fn elu_identities() {
        assert_eq!(Activation::Elu.apply(0.0), 0.0);
        assert_eq!(Activation::Elu.apply(2.5), 2.5);
        assert!((Activation::Elu.apply(-50.0) + 1.0).abs() < 1e-15);
        assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
    }

    #[test]
    fn one_one_one_network_matches_hand_composition() {
        // x -> elu(w1 x + b1) -> sigmoid(w2 h + b2)
        let net = Mlp::from_layers(
            vec![
                Dense {
                    weights: array![[-2.0]],
                    bias: array![0.5],
                },
                Dense {
                    weights: array![[3.0]],
                    bias: array![-0.25],
                },
            ],
            Activation::Elu,
            Activation::Sigmoid,
        )
        .unwrap();
        let x = 0.75;
        let z1: f64 = -2.0 * x + 0.5; // -1.0
        let h = z1.exp() - 1.0;
        let z2 = 3.0 * h - 0.25;
        let expected = 1.0 / (1.0 + (-z2).exp());
        let (out, _) = net.forward(&[x]).unwrap();
        assert!((out[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn forward_rejects_wrong_input_len() {
        let net = Mlp::new(&[3, 2], Activation::Linear, 0).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn backward_rejects_foreign_cache() {
        let a = Mlp::new(&[3, 2], Activation::Linear, 0).unwrap();
        let b = Mlp::new(&[3, 4, 2], Activation::Linear, 0).unwrap();
        let (_, cache) = a.forward(&[1.0, 2.0, 3.0]).unwrap();
        assert!(b.backward(&cache, &Array2::zeros((1, 2))).is_err());
        assert!(a.backward(&cache, &Array2::zeros((2, 2))).is_err());
    }

    #[test]
    fn zero_output_gradient_gives_zero_gradients() {
        let net = Mlp::new(&[3, 5, 2], Activation::Sigmoid, 4).unwrap();
        let (_, cache) = net.forward(&[0.1, 0.2, 0.3]).unwrap();
        let (g, dx) = net.backward(&cache, &Array2::zeros((1, 2))).unwrap();
        assert!(g.values().all(|&v| v == 0.0));
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_scalar_input_gradient_is_weight_times_upstream() {
        let net = scalar_net(1.7, 0.0, Activation::Linear);
        let (_, cache) = net.forward(&[0.4]).unwrap();
        let dx = net.input_gradient(&cache, &array![[2.0]]).unwrap();
        assert!((dx[[0, 0]] - 1.7 * 2.0).abs() < 1e-15);
    }

    #[test]
    fn adam_zero_gradient_leaves_params() {
        let mut net = Mlp::new(&[2, 3, 1], Activation::Linear, 2).unwrap();
        let before = net.clone();
        let mut opt = AdamState::new(&net, 1e-3);
        let zeros = Gradients::zeros_like(&net);
        opt.step(&mut net, &zeros).unwrap();
        assert_eq!(net, before);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut net = scalar_net(0.0, 0.0, Activation::Linear);
        let mut opt = AdamState::new(&net, 0.1);
        let mut g = Gradients::zeros_like(&net);
        g.layers[0].weights[[0, 0]] = 1.0;
        opt.step(&mut net, &g).unwrap();
        // m_hat = 1, v_hat = 1 -> step lr * 1 / (1 + eps)
        let expected = -0.1 / (1.0 + 1e-8);
        assert!((net.layers()[0].weights[[0, 0]] - expected).abs() < 1e-15);
        assert_eq!(net.layers()[0].bias[0], 0.0);
    }

    #[test]
    fn adam_rejects_non_finite_gradient() {
        let mut net = scalar_net(0.5, 0.0, Activation::Linear);
        let before = net.clone();
        let mut opt = AdamState::new(&net, 0.1);
        let mut g = Gradients::zeros_like(&net);
        g.layers[0].bias[0] = f64::NAN;
        assert!(matches!(opt.step(&mut net, &g), Err(Error::NonFinite(_))));
        assert_eq!(net, before);
        assert_eq!(opt.steps(), 0);
    }

    #[test]
    fn adam_is_deterministic() {
        let mut a = Mlp::new(&[2, 3, 1], Activation::Linear, 9).unwrap();
        let mut b = a.clone();
        let (_, cache) = a.forward(&[0.3, 0.9]).unwrap();
        let (g, _) = a.backward(&cache, &array![[1.0]]).unwrap();
        let mut oa = AdamState::new(&a, 1e-3);
        let mut ob = AdamState::new(&b, 1e-3);
        oa.step(&mut a, &g).unwrap();
        ob.step(&mut b, &g).unwrap();
        assert_eq!(a, b);
        assert_eq!(oa, ob);
    }

    #[test]
    fn soft_update_cases() {
        let online = scalar_net(1.0, 1.0, Activation::Linear);
        let mut t = scalar_net(0.0, 0.0, Activation::Linear);
        soft_update(&mut t, &online, 0.01).unwrap();
        assert_eq!(t.to_flat(), vec![0.01, 0.01]);

        let mut t = scalar_net(0.0, 0.0, Activation::Linear);
        soft_update(&mut t, &online, 0.0).unwrap();
        assert_eq!(t.to_flat(), vec![0.0, 0.0]);
        soft_update(&mut t, &online, 1.0).unwrap();
        assert_eq!(t, online);

        assert!(soft_update(&mut t, &online, 1.5).is_err());
        let mut other = Mlp::new(&[1, 2, 1], Activation::Linear, 0).unwrap();
        assert!(soft_update(&mut other, &online, 0.5).is_err());
    }

    #[test]
    fn serialization_size_accounting() {
        let net = Mlp::new(&[4, 7, 3], Activation::Sigmoid, 5).unwrap();
        let bytes = net.to_bytes();
        let header = 4 + 4 + 4 + 4 * 3 + 2;
        assert_eq!(bytes.len(), header + net.param_count() * 8);
        assert_eq!(net.param_count(), 4 * 7 + 7 + 7 * 3 + 3);
    }

    #[test]
    fn corrupted_header_is_reported() {
        let net = Mlp::new(&[2, 2], Activation::Linear, 5).unwrap();
        let mut bytes = net.to_bytes();
        bytes[0] = b'X';
        assert!(matches!(Mlp::from_bytes(&bytes), Err(Error::Decode(_))));

        let mut bytes = net.to_bytes();
        bytes[4] = 99;
        assert!(matches!(Mlp::from_bytes(&bytes), Err(Error::Version { found: 99, .. })));

        let bytes = net.to_bytes();
        assert!(matches!(
            Mlp::from_bytes(&bytes[..bytes.len() - 3]),
            Err(Error::Decode(_))
        ));
    }
}
