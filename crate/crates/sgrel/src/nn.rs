//! Minimal multilayer-perceptron engine: dense layers, ReLU hidden
//! activations, exact hand-written backpropagation.
//!
//! Everything is `f64` and single-threaded; a forward pass records every
//! pre-activation so the backward pass is exact rather than recomputed.
//! Gradients can additionally be injected at hidden activations, which is
//! how auxiliary heads attached to intermediate layers feed their error
//! back into a shared backbone.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Activation applied to the last layer's pre-activations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    /// Identity; used for score/logit outputs.
    Linear,
    /// Elementwise logistic; used for per-bit probabilities.
    Sigmoid,
    /// `ln(1 + e^z)`; strictly positive, used for non-negative scalars.
    Softplus,
}

/// Activation applied between layers. Only ReLU is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HiddenActivation {
    Relu,
}

/// Architecture description: `layer_widths[0]` is the input width,
/// `layer_widths.last()` the output width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_widths: Vec<usize>,
    pub hidden_activation: HiddenActivation,
    pub output_activation: OutputActivation,
}

impl MlpSpec {
    pub fn new(layer_widths: Vec<usize>, output_activation: OutputActivation) -> Result<Self> {
        let spec = MlpSpec {
            layer_widths,
            hidden_activation: HiddenActivation::Relu,
            output_activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 {
            return Err(Error::config(format!(
                "an MLP needs an input and an output width (got {:?})",
                self.layer_widths
            )));
        }
        if let Some(zero) = self.layer_widths.iter().position(|&w| w == 0) {
            return Err(Error::config(format!("layer width {zero} is zero")));
        }
        Ok(())
    }

    pub fn in_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn out_dim(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    /// Number of weight layers.
    pub fn depth(&self) -> usize {
        self.layer_widths.len() - 1
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `ln(1 + e^z)`.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// One dense layer. Weights are row-major `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub(crate) w: Vec<f64>,
    pub(crate) b: Vec<f64>,
    pub(crate) in_dim: usize,
    pub(crate) out_dim: usize,
}

impl Linear {
    fn init(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Linear {
        // Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], weights drawn
        // row-major and biases after, so the stream position is fixed.
        let bound = 1.0 / (in_dim as f64).sqrt();
        let w = (0..in_dim * out_dim).map(|_| rng.gen_range(-bound..bound)).collect();
        let b = (0..out_dim).map(|_| rng.gen_range(-bound..bound)).collect();
        Linear { w, b, in_dim, out_dim }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        let mut out = self.b.clone();
        for (o, out_o) in out.iter_mut().enumerate() {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = 0.0;
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            *out_o += acc;
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// Gradient buffer shaped exactly like the layers of an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<LayerGrads>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub dw: Vec<f64>,
    pub db: Vec<f64>,
}

/// Forward-pass record: the input, every pre-activation vector `z` and
/// every post-activation vector. `acts[l]` is the output of layer `l`, so
/// `acts.last()` is the MLP output.
#[derive(Debug, Clone)]
pub struct MlpCache {
    pub input: Vec<f64>,
    pub zs: Vec<Vec<f64>>,
    pub acts: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }
}

/// A fully-connected network with ReLU hidden layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub(crate) spec: MlpSpec,
    pub(crate) layers: Vec<Linear>,
}

impl Mlp {
    /// Seeded initialization; the given RNG fully determines the weights.
    pub fn init(spec: MlpSpec, rng: &mut impl Rng) -> Result<Mlp> {
        spec.validate()?;
        let layers = spec
            .layer_widths
            .windows(2)
            .map(|wd| Linear::init(wd[0], wd[1], rng))
            .collect();
        Ok(Mlp { spec, layers })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn in_dim(&self) -> usize {
        self.spec.in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.spec.out_dim()
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Index (into a cache's `acts`) of the last hidden activation, the
    /// one feeding the output layer. Needs at least one hidden layer.
    pub fn final_hidden_index(&self) -> usize {
        debug_assert!(self.depth() >= 2, "no hidden layer");
        self.depth() - 2
    }

    /// Index of the hidden activation one step before the final one.
    /// Needs at least two hidden layers.
    pub fn prefinal_hidden_index(&self) -> usize {
        debug_assert!(self.depth() >= 3, "no pre-final hidden layer");
        self.depth() - 3
    }

    pub fn forward(&self, input: &[f64]) -> MlpCache {
        debug_assert_eq!(input.len(), self.in_dim());
        let k = self.layers.len();
        let mut zs = Vec::with_capacity(k);
        let mut acts = Vec::with_capacity(k);
        let mut x = input.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.apply(&x);
            let a: Vec<f64> = if l + 1 < k {
                z.iter().map(|&v| v.max(0.0)).collect()
            } else {
                match self.spec.output_activation {
                    OutputActivation::Linear => z.clone(),
                    OutputActivation::Sigmoid => z.iter().map(|&v| sigmoid(v)).collect(),
                    OutputActivation::Softplus => z.iter().map(|&v| softplus(v)).collect(),
                }
            };
            zs.push(z);
            x = a.clone();
            acts.push(a);
        }
        MlpCache { input: input.to_vec(), zs, acts }
    }

    /// Backpropagates `d_output` (the loss gradient with respect to the
    /// post-activation output) through the network, accumulating into
    /// `grads` and returning the gradient with respect to the input.
    ///
    /// `injections` adds extra gradient at hidden activations: an entry
    /// `(l, g)` adds `g` to the gradient of `acts[l]`, which is how a head
    /// reading that activation contributes error to the backbone. Indices
    /// must address hidden activations (`l < depth - 1`).
    pub fn backward(
        &self,
        cache: &MlpCache,
        d_output: &[f64],
        injections: &[(usize, &[f64])],
        grads: &mut MlpGrads,
    ) -> Vec<f64> {
        let k = self.layers.len();
        debug_assert_eq!(d_output.len(), self.out_dim());

        // dL/dz for the output layer.
        let delta: Vec<f64> = {
            let z = &cache.zs[k - 1];
            let a = &cache.acts[k - 1];
            match self.spec.output_activation {
                OutputActivation::Linear => d_output.to_vec(),
                OutputActivation::Sigmoid => d_output
                    .iter()
                    .zip(a)
                    .map(|(d, &ai)| d * ai * (1.0 - ai))
                    .collect(),
                OutputActivation::Softplus => d_output
                    .iter()
                    .zip(z)
                    .map(|(d, &zi)| d * sigmoid(zi))
                    .collect(),
            }
        };
        self.backward_dz(cache, delta, injections, grads)
    }

    /// Like [`Mlp::backward`] but takes the gradient with respect to the
    /// output layer's **pre-activations** directly. Losses that fuse with
    /// the output activation (cross-entropy through softmax-like outputs,
    /// BCE through a sigmoid) use this to stay finite when the activation
    /// saturates.
    pub fn backward_dz(
        &self,
        cache: &MlpCache,
        dz_output: Vec<f64>,
        injections: &[(usize, &[f64])],
        grads: &mut MlpGrads,
    ) -> Vec<f64> {
        let k = self.layers.len();
        debug_assert_eq!(dz_output.len(), self.out_dim());
        debug_assert!(injections.iter().all(|(l, _)| *l + 1 < k));
        let mut delta = dz_output;

        for l in (0..k).rev() {
            let layer = &self.layers[l];
            let a_in: &[f64] = if l == 0 { &cache.input } else { &cache.acts[l - 1] };
            let g = &mut grads.layers[l];
            for (o, &d) in delta.iter().enumerate() {
                let row = &mut g.dw[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (ri, ai) in row.iter_mut().zip(a_in) {
                    *ri += d * ai;
                }
                g.db[o] += d;
            }

            // Gradient with respect to the layer input.
            let mut d_in = vec![0.0; layer.in_dim];
            for (o, &d) in delta.iter().enumerate() {
                let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (di, wi) in d_in.iter_mut().zip(row) {
                    *di += d * wi;
                }
            }

            if l == 0 {
                return d_in;
            }

            for (idx, extra) in injections {
                if *idx == l - 1 {
                    debug_assert_eq!(extra.len(), d_in.len());
                    for (di, e) in d_in.iter_mut().zip(*extra) {
                        *di += *e;
                    }
                }
            }

            // Through the ReLU at z[l-1]. The derivative at exactly zero is
            // taken as zero.
            delta = d_in
                .iter()
                .zip(&cache.zs[l - 1])
                .map(|(d, &z)| if z > 0.0 { *d } else { 0.0 })
                .collect();
        }
        unreachable!("loop returns at l == 0");
    }

    pub fn zero_grads(&self) -> MlpGrads {
        MlpGrads {
            layers: self
                .layers
                .iter()
                .map(|l| LayerGrads { dw: vec![0.0; l.w.len()], db: vec![0.0; l.b.len()] })
                .collect(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    /// Flat parameter access in a fixed order: layer 0 weights (row-major),
    /// layer 0 biases, layer 1 weights, ... Used by the SGD step, the
    /// checkpoint writer and finite-difference checks.
    pub fn get_param(&self, mut idx: usize) -> f64 {
        for l in &self.layers {
            if idx < l.w.len() {
                return l.w[idx];
            }
            idx -= l.w.len();
            if idx < l.b.len() {
                return l.b[idx];
            }
            idx -= l.b.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, mut idx: usize, value: f64) {
        for l in &mut self.layers {
            if idx < l.w.len() {
                l.w[idx] = value;
                return;
            }
            idx -= l.w.len();
            if idx < l.b.len() {
                l.b[idx] = value;
                return;
            }
            idx -= l.b.len();
        }
        panic!("parameter index out of range");
    }

    /// Mirrors [`Mlp::get_param`] indexing on a gradient buffer.
    pub fn get_grad(grads: &MlpGrads, mut idx: usize) -> f64 {
        for l in &grads.layers {
            if idx < l.dw.len() {
                return l.dw[idx];
            }
            idx -= l.dw.len();
            if idx < l.db.len() {
                return l.db[idx];
            }
            idx -= l.db.len();
        }
        panic!("gradient index out of range");
    }

    /// In-place SGD update `theta <- theta - lr * grad`.
    pub fn sgd_step(&mut self, grads: &MlpGrads, lr: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, dw) in layer.w.iter_mut().zip(&g.dw) {
                *w -= lr * dw;
            }
            for (b, db) in layer.b.iter_mut().zip(&g.db) {
                *b -= lr * db;
            }
        }
    }

    /// Shape consistency against a spec; used when loading checkpoints.
    pub fn check_shape(&self) -> Result<()> {
        self.spec.validate()?;
        if self.layers.len() != self.spec.depth() {
            return Err(Error::config(format!(
                "layer count {} does not match spec depth {}",
                self.layers.len(),
                self.spec.depth()
            )));
        }
        for (i, (layer, wd)) in self.layers.iter().zip(self.spec.layer_widths.windows(2)).enumerate()
        {
            if layer.in_dim != wd[0]
                || layer.out_dim != wd[1]
                || layer.w.len() != wd[0] * wd[1]
                || layer.b.len() != wd[1]
            {
                return Err(Error::config(format!(
                    "layer {i} has shape {}x{} ({} weights, {} biases), spec says {}x{}",
                    layer.out_dim,
                    layer.in_dim,
                    layer.w.len(),
                    layer.b.len(),
                    wd[1],
                    wd[0]
                )));
            }
            if layer.w.iter().chain(&layer.b).any(|v| !v.is_finite()) {
                return Err(Error::config(format!("layer {i} contains non-finite parameters")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn relative_error(a: f64, b: f64) -> f64 {
        (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
    }

    fn mlp(widths: &[usize], out: OutputActivation, seed: u64) -> Mlp {
        let spec = MlpSpec::new(widths.to_vec(), out).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mlp::init(spec, &mut rng).unwrap()
    }

    #[test]
    fn spec_validation_rejects_bad_shapes() {
        assert!(MlpSpec::new(vec![4], OutputActivation::Linear).is_err());
        assert!(MlpSpec::new(vec![4, 0, 2], OutputActivation::Linear).is_err());
        assert!(MlpSpec::new(vec![4, 3, 2], OutputActivation::Linear).is_ok());
    }

    #[test]
    fn init_respects_fan_in_bound_and_seed() {
        let net = mlp(&[10, 7, 3], OutputActivation::Linear, 5);
        let bound0 = 1.0 / 10.0f64.sqrt();
        assert!(net.layers[0].w.iter().all(|w| w.abs() <= bound0));
        let bound1 = 1.0 / 7.0f64.sqrt();
        assert!(net.layers[1].w.iter().all(|w| w.abs() <= bound1));
        // Same seed, same weights; different seed, different weights.
        assert_eq!(net, mlp(&[10, 7, 3], OutputActivation::Linear, 5));
        assert_ne!(net, mlp(&[10, 7, 3], OutputActivation::Linear, 6));
    }

    #[test]
    fn forward_shapes_and_relu() {
        let net = mlp(&[4, 8, 8, 2], OutputActivation::Linear, 1);
        let cache = net.forward(&[0.5, -0.3, 1.2, 0.0]);
        assert_eq!(cache.zs.len(), 3);
        assert_eq!(cache.acts.len(), 3);
        assert_eq!(cache.output().len(), 2);
        // Hidden activations are clamped at zero.
        for l in 0..2 {
            assert!(cache.acts[l].iter().all(|&a| a >= 0.0));
        }
        assert_eq!(net.final_hidden_index(), 1);
        assert_eq!(net.prefinal_hidden_index(), 0);
    }

    #[test]
    fn sigmoid_and_softplus_are_stable_at_extremes() {
        assert_eq!(sigmoid(800.0), 1.0);
        assert_eq!(sigmoid(-800.0), 0.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(softplus(-800.0) >= 0.0);
        assert!((softplus(800.0) - 800.0).abs() < 1e-9);
        assert!((softplus(0.0) - 2.0f64.ln()).abs() < 1e-15);
    }

    /// Scalar loss used by the finite-difference checks below: sum of
    /// squared outputs plus, optionally, the squared sum of a hidden
    /// activation (to exercise the injection path).
    fn toy_loss(net: &Mlp, input: &[f64], tap_hidden: Option<usize>) -> f64 {
        let cache = net.forward(input);
        let mut loss: f64 = cache.output().iter().map(|o| o * o).sum();
        if let Some(l) = tap_hidden {
            let s: f64 = cache.acts[l].iter().sum();
            loss += s * s;
        }
        loss
    }

    fn toy_grads(net: &Mlp, input: &[f64], tap_hidden: Option<usize>) -> MlpGrads {
        let cache = net.forward(input);
        let d_out: Vec<f64> = cache.output().iter().map(|o| 2.0 * o).collect();
        let mut grads = net.zero_grads();
        let injection: Option<Vec<f64>> = tap_hidden.map(|l| {
            let s: f64 = cache.acts[l].iter().sum();
            vec![2.0 * s; cache.acts[l].len()]
        });
        let pairs: Vec<(usize, &[f64])> = match (&injection, tap_hidden) {
            (Some(g), Some(l)) => vec![(l, g.as_slice())],
            _ => vec![],
        };
        net.backward(&cache, &d_out, &pairs, &mut grads);
        grads
    }

    fn check_against_finite_differences(out: OutputActivation, tap_hidden: Option<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..3 {
            let mut net = mlp(&[5, 6, 6, 3], out, rng.gen());
            let input: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let analytic = toy_grads(&net, &input, tap_hidden);
            let h = 1e-5;
            for idx in 0..net.param_count() {
                let orig = net.get_param(idx);
                net.set_param(idx, orig + h);
                let plus = toy_loss(&net, &input, tap_hidden);
                net.set_param(idx, orig - h);
                let minus = toy_loss(&net, &input, tap_hidden);
                net.set_param(idx, orig);
                let numeric = (plus - minus) / (2.0 * h);
                let exact = Mlp::get_grad(&analytic, idx);
                assert!(
                    relative_error(numeric, exact) < 1e-5 || (numeric - exact).abs() < 1e-8,
                    "param {idx}: numeric {numeric} vs analytic {exact} ({out:?}, tap {tap_hidden:?})"
                );
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences_linear_output() {
        check_against_finite_differences(OutputActivation::Linear, None);
    }

    #[test]
    fn backward_matches_finite_differences_sigmoid_output() {
        check_against_finite_differences(OutputActivation::Sigmoid, None);
    }

    #[test]
    fn backward_matches_finite_differences_softplus_output() {
        check_against_finite_differences(OutputActivation::Softplus, None);
    }

    #[test]
    fn backward_matches_finite_differences_with_hidden_injection() {
        check_against_finite_differences(OutputActivation::Linear, Some(0));
        check_against_finite_differences(OutputActivation::Linear, Some(1));
    }

    #[test]
    fn backward_returns_input_gradient() {
        // d/dx of sum((Wx+b)^2) for a single linear layer is 2 W^T (Wx+b).
        let net = mlp(&[3, 2], OutputActivation::Linear, 9);
        let input = [0.3, -0.7, 0.9];
        let cache = net.forward(&input);
        let d_out: Vec<f64> = cache.output().iter().map(|o| 2.0 * o).collect();
        let mut grads = net.zero_grads();
        let d_in = net.backward(&cache, &d_out, &[], &mut grads);
        let w = &net.layers[0].w;
        let out = cache.output();
        for i in 0..3 {
            let expect = 2.0 * (w[i] * out[0] + w[3 + i] * out[1]);
            assert!((d_in[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_param_roundtrip_and_count() {
        let mut net = mlp(&[4, 3, 2], OutputActivation::Linear, 11);
        assert_eq!(net.param_count(), 4 * 3 + 3 + 3 * 2 + 2);
        let before: Vec<f64> = (0..net.param_count()).map(|i| net.get_param(i)).collect();
        for i in 0..net.param_count() {
            net.set_param(i, i as f64);
        }
        for i in 0..net.param_count() {
            assert_eq!(net.get_param(i), i as f64);
        }
        for (i, v) in before.iter().enumerate() {
            net.set_param(i, *v);
        }
        assert_eq!(net, mlp(&[4, 3, 2], OutputActivation::Linear, 11));
    }

    #[test]
    fn sgd_step_moves_against_gradient() {
        let mut net = mlp(&[2, 2], OutputActivation::Linear, 3);
        let before = net.layers[0].w.clone();
        let mut grads = net.zero_grads();
        grads.layers[0].dw = vec![1.0, -2.0, 0.5, 0.0];
        grads.layers[0].db = vec![0.0, 0.0];
        net.sgd_step(&grads, 0.1);
        assert!((net.layers[0].w[0] - (before[0] - 0.1)).abs() < 1e-15);
        assert!((net.layers[0].w[1] - (before[1] + 0.2)).abs() < 1e-15);
        assert!((net.layers[0].w[2] - (before[2] - 0.05)).abs() < 1e-15);
        assert_eq!(net.layers[0].w[3], before[3]);
    }
}
