//! Small dense feed-forward networks with exact forward passes and exact
//! Jacobians with respect to parameters and inputs.
//!
//! These networks are never trained by gradient descent here; they are frozen
//! feature machines whose parameter Jacobians define empirical NTKs:
//!
//! ```text
//! ntk(x, x')[i, j] = <grad_theta f^i(x), grad_theta f^j(x')>
//! ```
//!
//! The final layer always applies the identity activation so that the network
//! output reads as a regression head. ReLU uses subgradient 0 at exactly-zero
//! pre-activations; callers that need differentiability keep inputs away from
//! that measure-zero set.

use crate::linalg::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("invalid network spec: {reason}")]
    InvalidSpec { reason: String },
    #[error("finite-difference step {h} outside [1e-8, 1e-2]")]
    InvalidStep { h: f64 },
}

fn dim_err(context: impl Into<String>) -> NetError {
    NetError::DimensionMismatch {
        context: context.into(),
    }
}

/// Per-hidden-layer activation. The output layer is always identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Architecture description: widths from input to output, one activation per
/// hidden layer, Gaussian init scale, and the seed that pins the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub layer_widths: Vec<usize>,
    pub activations: Vec<Activation>,
    pub init_scale: f64,
    pub seed: u64,
}

impl NetworkSpec {
    pub fn new(
        layer_widths: Vec<usize>,
        activations: Vec<Activation>,
        init_scale: f64,
        seed: u64,
    ) -> Result<Self, NetError> {
        let spec = Self {
            layer_widths,
            activations,
            init_scale,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.layer_widths.len() < 2 {
            return Err(NetError::InvalidSpec {
                reason: "need at least input and output widths".into(),
            });
        }
        if self.layer_widths.contains(&0) {
            return Err(NetError::InvalidSpec {
                reason: "all widths must be at least 1".into(),
            });
        }
        let hidden = self.layer_widths.len() - 2;
        if self.activations.len() != hidden {
            return Err(NetError::InvalidSpec {
                reason: format!(
                    "{} activations for {} hidden layers",
                    self.activations.len(),
                    hidden
                ),
            });
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(NetError::InvalidSpec {
                reason: format!("init_scale {} must be finite and >= 0", self.init_scale),
            });
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.layer_widths.len() - 1
    }

    /// Activation applied after layer `layer` (identity for the final layer).
    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.n_layers() {
            Activation::Identity
        } else {
            self.activations[layer]
        }
    }

    /// Total parameter count: sum of fan_in * fan_out + fan_out per layer.
    pub fn param_count(&self) -> usize {
        self.layer_widths
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }
}

/// Offsets of one layer's weights and bias inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerLayout {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

/// Flat parameter vector plus the per-layer layout that interprets it.
/// Immutable once built; the same network can be evaluated from many threads.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    flat: Vec<f64>,
    layout: Vec<LayerLayout>,
}

impl NetworkParams {
    pub fn from_flat(spec: &NetworkSpec, flat: Vec<f64>) -> Result<Self, NetError> {
        spec.validate()?;
        if flat.len() != spec.param_count() {
            return Err(dim_err(format!(
                "{} parameters for a spec that needs {}",
                flat.len(),
                spec.param_count()
            )));
        }
        Ok(Self {
            flat,
            layout: layout_for(spec),
        })
    }

    pub fn flat(&self) -> &[f64] {
        &self.flat
    }

    pub fn layout(&self) -> &[LayerLayout] {
        &self.layout
    }

    #[inline]
    fn weight(&self, layer: usize, row: usize, col: usize) -> f64 {
        let l = &self.layout[layer];
        self.flat[l.weight_offset + row * l.fan_in + col]
    }

    #[inline]
    fn bias(&self, layer: usize, row: usize) -> f64 {
        let l = &self.layout[layer];
        self.flat[l.bias_offset + row]
    }
}

fn layout_for(spec: &NetworkSpec) -> Vec<LayerLayout> {
    let mut layout = Vec::with_capacity(spec.n_layers());
    let mut offset = 0;
    for w in spec.layer_widths.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        layout.push(LayerLayout {
            fan_in,
            fan_out,
            weight_offset: offset,
            bias_offset: offset + fan_in * fan_out,
        });
        offset += fan_in * fan_out + fan_out;
    }
    layout
}

/// Standard normal via Box-Muller; pinned here so that seeds reproduce the
/// same parameters regardless of RNG-crate sampling internals.
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let mut u1: f64 = rng.gen();
    while u1 <= f64::MIN_POSITIVE {
        u1 = rng.gen();
    }
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Draws weights i.i.d. Gaussian with standard deviation
/// `init_scale / sqrt(fan_in)`; biases start at zero. Deterministic per seed.
pub fn init_network(spec: &NetworkSpec) -> NetworkParams {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let layout = layout_for(spec);
    let mut flat = vec![0.0; spec.param_count()];
    for l in &layout {
        let std = spec.init_scale / (l.fan_in as f64).sqrt();
        for idx in 0..l.fan_in * l.fan_out {
            flat[l.weight_offset + idx] = std * standard_normal(&mut rng);
        }
    }
    NetworkParams { flat, layout }
}

/// Pre- and post-activation values per layer; `post.last()` is the output.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

pub fn forward_trace(
    spec: &NetworkSpec,
    params: &NetworkParams,
    x: &[f64],
) -> Result<ForwardTrace, NetError> {
    if x.len() != spec.input_dim() {
        return Err(dim_err(format!(
            "input length {} for input width {}",
            x.len(),
            spec.input_dim()
        )));
    }
    let mut pre = Vec::with_capacity(spec.n_layers());
    let mut post = Vec::with_capacity(spec.n_layers());
    let mut current: Vec<f64> = x.to_vec();
    for layer in 0..spec.n_layers() {
        let l = params.layout[layer];
        let mut z = vec![0.0; l.fan_out];
        for (r, z_r) in z.iter_mut().enumerate() {
            let mut acc = params.bias(layer, r);
            for (c, xin) in current.iter().enumerate() {
                acc += params.weight(layer, r, c) * xin;
            }
            *z_r = acc;
        }
        let act = spec.activation(layer);
        let a: Vec<f64> = z.iter().map(|&v| act.apply(v)).collect();
        pre.push(z);
        current = a.clone();
        post.push(a);
    }
    Ok(ForwardTrace { pre, post })
}

/// Network output at `x`: affine + activation composition, identity on the
/// final layer.
pub fn forward(spec: &NetworkSpec, params: &NetworkParams, x: &[f64]) -> Result<Vec<f64>, NetError> {
    let mut trace = forward_trace(spec, params, x)?;
    Ok(trace.post.pop().expect("at least one layer"))
}

/// Reverse-mode deltas (d output_i / d pre-activation) for every layer, one
/// output unit at a time. Shared by the parameter and input Jacobians.
fn backprop_deltas(
    spec: &NetworkSpec,
    params: &NetworkParams,
    trace: &ForwardTrace,
    output_unit: usize,
) -> Vec<Vec<f64>> {
    let n_layers = spec.n_layers();
    let mut deltas: Vec<Vec<f64>> = vec![Vec::new(); n_layers];
    let mut delta = vec![0.0; spec.output_dim()];
    delta[output_unit] = 1.0;
    deltas[n_layers - 1] = delta;
    for layer in (1..n_layers).rev() {
        let l = params.layout[layer];
        let upper = &deltas[layer];
        let act = spec.activation(layer - 1);
        let mut lower = vec![0.0; l.fan_in];
        for (c, lower_c) in lower.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (r, d) in upper.iter().enumerate() {
                acc += params.weight(layer, r, c) * d;
            }
            *lower_c = acc * act.derivative(trace.pre[layer - 1][c]);
        }
        deltas[layer - 1] = lower;
    }
    deltas
}

/// Jacobian of the network output with respect to the flat parameter vector:
/// row `i` is `grad_theta f^i(x)` in the layout of [`NetworkParams`].
pub fn jacobian_params(
    spec: &NetworkSpec,
    params: &NetworkParams,
    x: &[f64],
) -> Result<Matrix, NetError> {
    let trace = forward_trace(spec, params, x)?;
    let c = spec.output_dim();
    let p = spec.param_count();
    let mut jac = Matrix::zeros(c, p);
    for i in 0..c {
        let deltas = backprop_deltas(spec, params, &trace, i);
        for layer in 0..spec.n_layers() {
            let l = params.layout[layer];
            let input: &[f64] = if layer == 0 {
                x
            } else {
                &trace.post[layer - 1]
            };
            for (r, d) in deltas[layer].iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                for (cc, xin) in input.iter().enumerate() {
                    jac.set(i, l.weight_offset + r * l.fan_in + cc, d * xin);
                }
                jac.set(i, l.bias_offset + r, *d);
            }
        }
    }
    Ok(jac)
}

/// Jacobian of the network output with respect to the input vector.
pub fn jacobian_input(
    spec: &NetworkSpec,
    params: &NetworkParams,
    x: &[f64],
) -> Result<Matrix, NetError> {
    let trace = forward_trace(spec, params, x)?;
    let c = spec.output_dim();
    let d = spec.input_dim();
    let mut jac = Matrix::zeros(c, d);
    for i in 0..c {
        let deltas = backprop_deltas(spec, params, &trace, i);
        for j in 0..d {
            let mut acc = 0.0;
            for (r, dl) in deltas[0].iter().enumerate() {
                acc += dl * params.weight(0, r, j);
            }
            jac.set(i, j, acc);
        }
    }
    Ok(jac)
}

/// Post-activation values of the last hidden layer; the feature head used by
/// net-feature kernel maps. Requires at least one hidden layer.
pub fn hidden_features(
    spec: &NetworkSpec,
    params: &NetworkParams,
    x: &[f64],
) -> Result<Vec<f64>, NetError> {
    if spec.n_layers() < 2 {
        return Err(NetError::InvalidSpec {
            reason: "hidden features need at least one hidden layer".into(),
        });
    }
    let trace = forward_trace(spec, params, x)?;
    Ok(trace.post[spec.n_layers() - 2].clone())
}

/// Jacobian of [`hidden_features`] with respect to the input, by forward
/// accumulation through every hidden layer (activation included).
pub fn hidden_jacobian_input(
    spec: &NetworkSpec,
    params: &NetworkParams,
    x: &[f64],
) -> Result<Matrix, NetError> {
    if spec.n_layers() < 2 {
        return Err(NetError::InvalidSpec {
            reason: "hidden features need at least one hidden layer".into(),
        });
    }
    let trace = forward_trace(spec, params, x)?;
    let d = spec.input_dim();
    // J starts as the identity on the input and is pushed through each layer.
    let mut jac = Matrix::identity(d);
    for layer in 0..spec.n_layers() - 1 {
        let l = params.layout[layer];
        let mut next = Matrix::zeros(l.fan_out, d);
        let act = spec.activation(layer);
        for r in 0..l.fan_out {
            let gain = act.derivative(trace.pre[layer][r]);
            if gain == 0.0 {
                continue;
            }
            for j in 0..d {
                let mut acc = 0.0;
                for c in 0..l.fan_in {
                    acc += params.weight(layer, r, c) * jac.get(c, j);
                }
                next.set(r, j, gain * acc);
            }
        }
        jac = next;
    }
    Ok(jac)
}

/// What a finite-difference Jacobian differentiates with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianWrt {
    Params,
    Input,
}

/// Central-difference Jacobian of an arbitrary vector function; one column
/// per perturbed coordinate of `x0`.
pub fn central_diff_jacobian(
    f: impl Fn(&[f64]) -> Vec<f64>,
    x0: &[f64],
    h: f64,
) -> Matrix {
    let base = f(x0);
    let mut jac = Matrix::zeros(base.len(), x0.len());
    let mut probe = x0.to_vec();
    for k in 0..x0.len() {
        let saved = probe[k];
        probe[k] = saved + h;
        let plus = f(&probe);
        probe[k] = saved - h;
        let minus = f(&probe);
        probe[k] = saved;
        for i in 0..base.len() {
            jac.set(i, k, (plus[i] - minus[i]) / (2.0 * h));
        }
    }
    jac
}

/// Finite-difference Jacobian of the network output, the test oracle for the
/// exact reverse-mode Jacobians above.
pub fn fd_jacobian(
    spec: &NetworkSpec,
    params: &NetworkParams,
    x: &[f64],
    wrt: JacobianWrt,
    h: f64,
) -> Result<Matrix, NetError> {
    if !(1e-8..=1e-2).contains(&h) {
        return Err(NetError::InvalidStep { h });
    }
    // Probe once to surface dimension errors before differencing.
    forward(spec, params, x)?;
    let jac = match wrt {
        JacobianWrt::Params => central_diff_jacobian(
            |theta| {
                let p = NetworkParams::from_flat(spec, theta.to_vec()).expect("layout fixed");
                forward(spec, &p, x).expect("dims fixed")
            },
            params.flat(),
            h,
        ),
        JacobianWrt::Input => central_diff_jacobian(
            |xv| forward(spec, params, xv).expect("dims fixed"),
            x,
            h,
        ),
    };
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{assert_close, Rng64};

    fn rel_frob(a: &Matrix, b: &Matrix) -> f64 {
        a.sub(b).frob_norm() / a.frob_norm().max(1.0)
    }

    #[test]
    fn init_is_deterministic() {
        let spec = NetworkSpec::new(vec![2, 1], vec![], 1.0, 0).unwrap();
        let a = init_network(&spec);
        let b = init_network(&spec);
        assert_eq!(a.flat(), b.flat());
    }

    #[test]
    fn param_count_matches_layout() {
        let spec = NetworkSpec::new(vec![3, 4, 2], vec![Activation::Relu], 1.0, 1).unwrap();
        assert_eq!(spec.param_count(), 3 * 4 + 4 + 4 * 2 + 2);
        assert_eq!(init_network(&spec).flat().len(), 26);
    }

    #[test]
    fn zero_init_scale_gives_zero_output() {
        let spec =
            NetworkSpec::new(vec![3, 5, 2], vec![Activation::Tanh], 0.0, 9).unwrap();
        let params = init_network(&spec);
        let out = forward(&spec, &params, &[0.3, -0.7, 2.0]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn forward_single_layer() {
        let spec = NetworkSpec::new(vec![1, 1], vec![], 1.0, 0).unwrap();
        let params = NetworkParams::from_flat(&spec, vec![2.0, 1.0]).unwrap();
        let out = forward(&spec, &params, &[3.0]).unwrap();
        assert_close(out[0], 7.0, 1e-15);
    }

    #[test]
    fn relu_saturated_output_is_final_bias() {
        let spec = NetworkSpec::new(vec![1, 1, 1], vec![Activation::Relu], 1.0, 0).unwrap();
        // W0 = [1], b0 = [-5], W1 = [2], b1 = [3]
        let params = NetworkParams::from_flat(&spec, vec![1.0, -5.0, 2.0, 3.0]).unwrap();
        let out = forward(&spec, &params, &[1.0]).unwrap();
        assert_close(out[0], 3.0, 1e-15);
    }

    #[test]
    fn forward_matches_layerwise_recomputation() {
        let spec = NetworkSpec::new(
            vec![3, 4, 2],
            vec![Activation::Tanh],
            0.8,
            5,
        )
        .unwrap();
        let params = init_network(&spec);
        let x = [0.2, -1.1, 0.5];
        let got = forward(&spec, &params, &x).unwrap();

        // Independent recomputation straight from the flat vector.
        let w0 = |r: usize, c: usize| params.flat()[r * 3 + c];
        let b0 = |r: usize| params.flat()[12 + r];
        let w1 = |r: usize, c: usize| params.flat()[16 + r * 4 + c];
        let b1 = |r: usize| params.flat()[16 + 8 + r];
        let mut hidden = [0.0; 4];
        for (r, h) in hidden.iter_mut().enumerate() {
            *h = (b0(r) + (0..3).map(|c| w0(r, c) * x[c]).sum::<f64>()).tanh();
        }
        for (r, want) in got.iter().enumerate() {
            let again = b1(r) + (0..4).map(|c| w1(r, c) * hidden[c]).sum::<f64>();
            assert_close(*want, again, 1e-14);
        }
    }

    #[test]
    fn forward_rejects_wrong_input_length() {
        let spec = NetworkSpec::new(vec![2, 1], vec![], 1.0, 0).unwrap();
        let params = init_network(&spec);
        assert!(matches!(
            forward(&spec, &params, &[1.0]),
            Err(NetError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn jacobian_params_linear_neuron() {
        let spec = NetworkSpec::new(vec![1, 1], vec![], 1.0, 0).unwrap();
        let params = NetworkParams::from_flat(&spec, vec![2.0, 0.0]).unwrap();
        let jac = jacobian_params(&spec, &params, &[3.0]).unwrap();
        assert_close(jac.get(0, 0), 3.0, 1e-15); // d f / d w = x
        assert_close(jac.get(0, 1), 1.0, 1e-15); // d f / d b = 1
    }

    #[test]
    fn jacobian_params_final_bias_rows() {
        let spec = NetworkSpec::new(vec![2, 3, 2], vec![Activation::Tanh], 1.0, 4).unwrap();
        let params = init_network(&spec);
        let jac = jacobian_params(&spec, &params, &[0.4, -0.2]).unwrap();
        let final_bias = params.layout()[1].bias_offset;
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_close(jac.get(i, final_bias + j), want, 1e-15);
            }
        }
    }

    #[test]
    fn jacobian_params_matches_finite_differences() {
        let spec = NetworkSpec::new(vec![2, 3, 2], vec![Activation::Tanh], 1.0, 77).unwrap();
        let params = init_network(&spec);
        let x = [0.3, -0.9];
        let exact = jacobian_params(&spec, &params, &x).unwrap();
        let fd = fd_jacobian(&spec, &params, &x, JacobianWrt::Params, 1e-5).unwrap();
        assert!(rel_frob(&exact, &fd) <= 1e-5);
    }

    #[test]
    fn jacobian_input_linear_layer_equals_weight_matrix() {
        let spec = NetworkSpec::new(vec![2, 2], vec![], 1.0, 0).unwrap();
        let params =
            NetworkParams::from_flat(&spec, vec![1.0, 2.0, 3.0, 4.0, 0.0, 0.0]).unwrap();
        let jac = jacobian_input(&spec, &params, &[0.5, -0.5]).unwrap();
        let w = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(jac, w);
    }

    #[test]
    fn jacobian_input_zero_on_saturated_relu() {
        let spec = NetworkSpec::new(vec![1, 2, 1], vec![Activation::Relu], 1.0, 0).unwrap();
        // Both hidden pre-activations forced negative.
        let params =
            NetworkParams::from_flat(&spec, vec![1.0, 1.0, -10.0, -10.0, 1.0, 1.0, 0.5]).unwrap();
        let jac = jacobian_input(&spec, &params, &[1.0]).unwrap();
        assert_eq!(jac, Matrix::zeros(1, 1));
    }

    #[test]
    fn jacobian_input_matches_finite_differences() {
        let spec = NetworkSpec::new(vec![3, 5, 2], vec![Activation::Tanh], 0.9, 12).unwrap();
        let params = init_network(&spec);
        let x = [0.1, 0.7, -0.4];
        let exact = jacobian_input(&spec, &params, &x).unwrap();
        let fd = fd_jacobian(&spec, &params, &x, JacobianWrt::Input, 1e-5).unwrap();
        assert!(rel_frob(&exact, &fd) <= 1e-5);
    }

    #[test]
    fn hidden_jacobian_matches_finite_differences() {
        let spec = NetworkSpec::new(
            vec![3, 4, 3, 2],
            vec![Activation::Tanh, Activation::Tanh],
            0.9,
            21,
        )
        .unwrap();
        let params = init_network(&spec);
        let x = [0.2, -0.6, 0.9];
        let exact = hidden_jacobian_input(&spec, &params, &x).unwrap();
        let fd = central_diff_jacobian(
            |xv| hidden_features(&spec, &params, xv).unwrap(),
            &x,
            1e-5,
        );
        assert!(rel_frob(&exact, &fd) <= 1e-5);
    }

    #[test]
    fn fd_jacobian_exact_on_linear_and_validates_step() {
        let spec = NetworkSpec::new(vec![1, 1], vec![], 1.0, 0).unwrap();
        let params = NetworkParams::from_flat(&spec, vec![2.0, 0.0]).unwrap();
        for h in [1e-7, 1e-5, 1e-3] {
            let fd = fd_jacobian(&spec, &params, &[3.0], JacobianWrt::Params, h).unwrap();
            assert_close(fd.get(0, 0), 3.0, 1e-9);
        }
        assert!(matches!(
            fd_jacobian(&spec, &params, &[3.0], JacobianWrt::Params, 1.0),
            Err(NetError::InvalidStep { .. })
        ));
    }

    #[test]
    fn central_differences_on_quadratic() {
        let jac = central_diff_jacobian(|x| vec![x[0] * x[0]], &[2.0], 1e-5);
        assert_close(jac.get(0, 0), 4.0, 1e-9);
    }

    #[test]
    fn fd_agrees_with_reverse_mode_across_seeds() {
        for seed in 0..20u64 {
            let spec =
                NetworkSpec::new(vec![2, 4, 2], vec![Activation::Tanh], 1.0, seed).unwrap();
            let params = init_network(&spec);
            let mut rng = Rng64::new(seed ^ 0xabcd);
            let x = [rng.symmetric(), rng.symmetric()];
            let exact = jacobian_params(&spec, &params, &x).unwrap();
            let fd = fd_jacobian(&spec, &params, &x, JacobianWrt::Params, 1e-5).unwrap();
            assert!(rel_frob(&exact, &fd) <= 1e-5, "seed {seed}");
        }
    }

    #[test]
    fn identity_activation_net_is_linear_in_input() {
        let spec = NetworkSpec::new(vec![2, 3, 2], vec![Activation::Identity], 1.0, 3).unwrap();
        let params = init_network(&spec);
        let j1 = jacobian_input(&spec, &params, &[0.0, 0.0]).unwrap();
        let j2 = jacobian_input(&spec, &params, &[5.0, -2.0]).unwrap();
        assert!(rel_frob(&j1, &j2) <= 1e-14);
        // forward is linear: f(ax) = a f(x) when biases are zero by init.
        let f1 = forward(&spec, &params, &[1.0, 2.0]).unwrap();
        let f2 = forward(&spec, &params, &[2.0, 4.0]).unwrap();
        for (a, b) in f1.iter().zip(&f2) {
            assert_close(2.0 * a, *b, 1e-12);
        }
    }
}
