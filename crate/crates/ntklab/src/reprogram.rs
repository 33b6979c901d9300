//! Input transformations, output mappings, the composed target model, and its
//! empirical NTK blocks.
//!
//! A reprogrammed model is the composition `b . f_S . a`: a frozen kernel
//! ridge source model `f_S` wrapped by a trainable input transformation `a`
//! (mapping target inputs into the source input space) and a linear output
//! mapping `b`. Training solves
//!
//! ```text
//! min_{a, b} (1/N_T) sum_i || b f_S(a(x_i)) - y_i ||_2^2
//! ```
//!
//! by full-batch gradient descent over whichever parameter groups are marked
//! trainable. The NTK of the composed model splits over the parameter
//! partition: with `theta = (theta_A, theta_B)`,
//!
//! ```text
//! ntk_T(x, x') = ntk_A(x, x') + ntk_B(x, x')
//! ```
//!
//! where `ntk_A` flows through the feature map's input Jacobian and `ntk_B`
//! is the Gram of source outputs tensored with the identity.

use crate::kernels::{self, Dataset, KernelError, KernelSourceModel};
use crate::linalg::{self, Matrix};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReprogramError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("invalid input transform: {reason}")]
    InvalidTransform { reason: String },
    #[error("training hit a non-finite loss at step {step}")]
    NonFiniteLoss { step: usize, trace: Vec<f64> },
    #[error("invalid training setup: {reason}")]
    InvalidTraining { reason: String },
}

fn dim_err(context: impl Into<String>) -> ReprogramError {
    ReprogramError::DimensionMismatch {
        context: context.into(),
    }
}

/// Trainable map from target input space `R^{d_T}` into source input space
/// `R^{d_S}`.
///
/// * `Fc` — a single fully connected layer `a(x) = W x (+ bias)`. The
///   trainable parameters are the weights only; the optional bias is frozen.
/// * `Vp` — visual-prompt style embedding: target coordinates are scattered
///   into fixed slots of the source input, every remaining slot holds a
///   trainable padding value. `a(x) = scatter(x) + mask .* theta` with the
///   0/1 mask zero exactly on embedded slots.
#[derive(Debug, Clone, PartialEq)]
pub enum InputTransform {
    Fc {
        w: Matrix,
        bias: Option<Vec<f64>>,
    },
    Vp {
        embed_index: Vec<usize>,
        theta: Vec<f64>,
        mask: Vec<f64>,
    },
}

impl InputTransform {
    pub fn fc(w: Matrix, bias: Option<Vec<f64>>) -> Result<Self, ReprogramError> {
        if let Some(b) = &bias {
            if b.len() != w.rows() {
                return Err(ReprogramError::InvalidTransform {
                    reason: format!("bias length {} for {} output slots", b.len(), w.rows()),
                });
            }
        }
        Ok(InputTransform::Fc { w, bias })
    }

    /// VP transform embedding `d_T = embed_index.len()` coordinates into a
    /// `d_s`-dimensional source input; `theta` is the full-length padding
    /// vector (entries on embedded slots are inert).
    pub fn vp(d_s: usize, embed_index: Vec<usize>, theta: Vec<f64>) -> Result<Self, ReprogramError> {
        if theta.len() != d_s {
            return Err(ReprogramError::InvalidTransform {
                reason: format!("theta length {} for source dim {d_s}", theta.len()),
            });
        }
        if embed_index.len() > d_s {
            return Err(ReprogramError::InvalidTransform {
                reason: format!("{} embedded slots exceed source dim {d_s}", embed_index.len()),
            });
        }
        let mut mask = vec![1.0; d_s];
        for &slot in &embed_index {
            if slot >= d_s {
                return Err(ReprogramError::InvalidTransform {
                    reason: format!("embed slot {slot} out of range for source dim {d_s}"),
                });
            }
            if mask[slot] == 0.0 {
                return Err(ReprogramError::InvalidTransform {
                    reason: format!("embed slot {slot} used twice"),
                });
            }
            mask[slot] = 0.0;
        }
        Ok(InputTransform::Vp {
            embed_index,
            theta,
            mask,
        })
    }

    /// VP with the first `d_t` slots embedded and zero-initialized padding.
    pub fn vp_leading(d_s: usize, d_t: usize) -> Result<Self, ReprogramError> {
        Self::vp(d_s, (0..d_t).collect(), vec![0.0; d_s])
    }

    pub fn target_dim(&self) -> usize {
        match self {
            InputTransform::Fc { w, .. } => w.cols(),
            InputTransform::Vp { embed_index, .. } => embed_index.len(),
        }
    }

    pub fn source_dim(&self) -> usize {
        match self {
            InputTransform::Fc { w, .. } => w.rows(),
            InputTransform::Vp { theta, .. } => theta.len(),
        }
    }

    /// Number of trainable coordinates in `theta_A`.
    pub fn param_count(&self) -> usize {
        match self {
            InputTransform::Fc { w, .. } => w.rows() * w.cols(),
            InputTransform::Vp { theta, .. } => theta.len(),
        }
    }

    /// Current `theta_A` as a flat vector (row-major weights for FC, the
    /// padding vector for VP).
    pub fn params(&self) -> Vec<f64> {
        match self {
            InputTransform::Fc { w, .. } => w.data().to_vec(),
            InputTransform::Vp { theta, .. } => theta.clone(),
        }
    }

    /// Copy of the transform with `theta_A` replaced.
    pub fn with_params(&self, v: &[f64]) -> Result<Self, ReprogramError> {
        if v.len() != self.param_count() {
            return Err(dim_err(format!(
                "{} parameters for a transform with {}",
                v.len(),
                self.param_count()
            )));
        }
        Ok(match self {
            InputTransform::Fc { w, bias } => InputTransform::Fc {
                w: Matrix::new(w.rows(), w.cols(), v.to_vec())?,
                bias: bias.clone(),
            },
            InputTransform::Vp {
                embed_index, mask, ..
            } => InputTransform::Vp {
                embed_index: embed_index.clone(),
                theta: v.to_vec(),
                mask: mask.clone(),
            },
        })
    }
}

/// Applies the transform: `Wx (+ bias)` for FC, scatter-plus-padding for VP.
pub fn apply_transform(t: &InputTransform, x: &[f64]) -> Result<Vec<f64>, ReprogramError> {
    if x.len() != t.target_dim() {
        return Err(dim_err(format!(
            "input length {} for target dim {}",
            x.len(),
            t.target_dim()
        )));
    }
    Ok(match t {
        InputTransform::Fc { w, bias } => {
            let mut out = w.mul_vec(x);
            if let Some(b) = bias {
                for (o, bi) in out.iter_mut().zip(b) {
                    *o += bi;
                }
            }
            out
        }
        InputTransform::Vp {
            embed_index,
            theta,
            mask,
        } => {
            let mut out: Vec<f64> = theta
                .iter()
                .zip(mask)
                .map(|(th, m)| th * m)
                .collect();
            for (coord, &slot) in embed_index.iter().enumerate() {
                out[slot] = x[coord];
            }
            out
        }
    })
}

/// Jacobian of `a(x)` with respect to `theta_A`, shape `d_S x P_A`.
///
/// FC: row `s` carries `x^T` in the column block of row `s` of `W`.
/// VP: the constant selector `diag(mask)`, independent of `x`.
pub fn transform_jacobian(t: &InputTransform, x: &[f64]) -> Result<Matrix, ReprogramError> {
    if x.len() != t.target_dim() {
        return Err(dim_err(format!(
            "input length {} for target dim {}",
            x.len(),
            t.target_dim()
        )));
    }
    Ok(match t {
        InputTransform::Fc { w, .. } => {
            let (d_s, d_t) = (w.rows(), w.cols());
            let mut jac = Matrix::zeros(d_s, d_s * d_t);
            for s in 0..d_s {
                for j in 0..d_t {
                    jac.set(s, s * d_t + j, x[j]);
                }
            }
            jac
        }
        InputTransform::Vp { mask, .. } => Matrix::diagonal(mask),
    })
}

/// Linear output mapping `b: R^{c_S} -> R^{c_T}` with a trainability flag.
/// No bias term; the theorem checkers assume a plain linear matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputMapping {
    pub b: Matrix,
    pub trainable: bool,
}

impl OutputMapping {
    pub fn new(b: Matrix, trainable: bool) -> Self {
        Self { b, trainable }
    }

    /// All-zero mapping; the default when `b` is trainable, which also makes
    /// the initial `ntk_A` vanish.
    pub fn zero(c_t: usize, c_s: usize) -> Self {
        Self {
            b: Matrix::zeros(c_t, c_s),
            trainable: true,
        }
    }

    /// Identity padded with zeros; the default when `b` is frozen.
    pub fn identity_padded(c_t: usize, c_s: usize) -> Self {
        Self {
            b: Matrix::from_fn(c_t, c_s, |i, j| if i == j { 1.0 } else { 0.0 }),
            trainable: false,
        }
    }
}

/// The composed target model `b . f_S . a` with trainability flags for both
/// wrapper parameter groups. Immutable during NTK assembly; training mutates
/// a private copy.
#[derive(Debug, Clone)]
pub struct ReprogrammedModel {
    pub transform: InputTransform,
    pub source: KernelSourceModel,
    pub mapping: OutputMapping,
    pub transform_trainable: bool,
}

impl ReprogrammedModel {
    pub fn new(
        transform: InputTransform,
        source: KernelSourceModel,
        mapping: OutputMapping,
        transform_trainable: bool,
    ) -> Result<Self, ReprogramError> {
        if transform.source_dim() != source.source_dim() {
            return Err(dim_err(format!(
                "transform feeds {} dims, source expects {}",
                transform.source_dim(),
                source.source_dim()
            )));
        }
        if mapping.b.cols() != source.label_dim() {
            return Err(dim_err(format!(
                "mapping consumes {} dims, source emits {}",
                mapping.b.cols(),
                source.label_dim()
            )));
        }
        Ok(Self {
            transform,
            source,
            mapping,
            transform_trainable,
        })
    }

    pub fn target_dim(&self) -> usize {
        self.transform.target_dim()
    }

    pub fn target_label_dim(&self) -> usize {
        self.mapping.b.rows()
    }

    /// Frozen source read-out in feature space: `M = alpha^T Phi(X_S)`, so
    /// that `f_S(u) = M phi(u)` as a column vector.
    fn source_readout(&self) -> Result<Matrix, ReprogramError> {
        let f_s = self.source.feature_map().feature_matrix(self.source.x_s())?;
        Ok(self.source.alpha().transpose().matmul(&f_s))
    }
}

/// Rows of `x_t` pushed through the transform: `N_T x d_S`.
pub fn transformed_points(t: &InputTransform, x_t: &Matrix) -> Result<Matrix, ReprogramError> {
    let mut rows = Vec::with_capacity(x_t.rows());
    for i in 0..x_t.rows() {
        rows.push(apply_transform(t, x_t.row(i))?);
    }
    Ok(Matrix::from_rows(&rows)?)
}

/// Target model output `b * f_S(a(x))`.
pub fn target_forward(m: &ReprogrammedModel, x: &[f64]) -> Result<Vec<f64>, ReprogramError> {
    let u = apply_transform(&m.transform, x)?;
    let pred = kernels::predict(&m.source, &Matrix::row_vector(&u))?;
    Ok(m.mapping.b.mul_vec(pred.row(0)))
}

/// Predictions for every row of `x_t`, shape `N_T x c_T`.
pub fn target_predictions(m: &ReprogrammedModel, x_t: &Matrix) -> Result<Matrix, ReprogramError> {
    let transformed = transformed_points(&m.transform, x_t)?;
    let source_preds = kernels::predict(&m.source, &transformed)?;
    Ok(source_preds.matmul(&m.mapping.b.transpose()))
}

/// Per-point Jacobian of the target model with respect to `theta_A`:
/// `G(x) = b M J_phi(a(x)) J_a(x)`, shape `c_T x P_A`.
fn theta_a_jacobian(
    m: &ReprogrammedModel,
    readout: &Matrix,
    x: &[f64],
) -> Result<Matrix, ReprogramError> {
    let u = apply_transform(&m.transform, x)?;
    let j_phi = m.source.feature_map().input_jacobian(&u)?;
    let j_a = transform_jacobian(&m.transform, x)?;
    let bm = m.mapping.b.matmul(readout);
    Ok(bm.matmul(&j_phi).matmul(&j_a))
}

/// NTK block attributable to the input transformation, shape
/// `N_T c_T x N_T c_T`: block `(i, j) = G(x_i) G(x_j)^T`.
pub fn ntk_a(m: &ReprogrammedModel, x_t: &Matrix) -> Result<Matrix, ReprogramError> {
    if x_t.cols() != m.target_dim() {
        return Err(dim_err(format!(
            "points have {} coordinates, transform expects {}",
            x_t.cols(),
            m.target_dim()
        )));
    }
    let readout = m.source_readout()?;
    let jacs: Vec<Matrix> = (0..x_t.rows())
        .map(|i| theta_a_jacobian(m, &readout, x_t.row(i)))
        .collect::<Result<_, _>>()?;
    Ok(block_gram(&jacs))
}

/// NTK attributable to the output mapping, as the scalar
/// `N_T x N_T` kernel `<f_S(a(x_i)), f_S(a(x_j))>` plus its block form
/// `scalar (x) I_{c_T}`.
pub fn ntk_b(m: &ReprogrammedModel, x_t: &Matrix) -> Result<(Matrix, Matrix), ReprogramError> {
    let transformed = transformed_points(&m.transform, x_t)?;
    let source_preds = kernels::predict(&m.source, &transformed)?;
    let scalar = source_preds.matmul(&source_preds.transpose());
    let block = linalg::kron(&scalar, &Matrix::identity(m.target_label_dim()))?;
    Ok((scalar, block))
}

/// Full NTK over the concatenated trainable parameters `(theta_A, theta_B)`.
/// With both groups trainable this equals `ntk_a + ntk_b` up to rounding;
/// frozen groups contribute nothing.
pub fn ntk_t(m: &ReprogrammedModel, x_t: &Matrix) -> Result<Matrix, ReprogramError> {
    let c_t = m.target_label_dim();
    let c_s = m.source.label_dim();
    let readout = if m.transform_trainable {
        Some(m.source_readout()?)
    } else {
        None
    };
    let transformed = transformed_points(&m.transform, x_t)?;
    let source_preds = kernels::predict(&m.source, &transformed)?;

    let mut jacs = Vec::with_capacity(x_t.rows());
    for i in 0..x_t.rows() {
        let p_a = if m.transform_trainable {
            m.transform.param_count()
        } else {
            0
        };
        let p_b = if m.mapping.trainable { c_t * c_s } else { 0 };
        let mut jac = Matrix::zeros(c_t, p_a + p_b);
        if let Some(readout) = &readout {
            let g = theta_a_jacobian(m, readout, x_t.row(i))?;
            for r in 0..c_t {
                for c in 0..p_a {
                    jac.set(r, c, g.get(r, c));
                }
            }
        }
        if m.mapping.trainable {
            // d f^r / d b[k, l] = delta_{rk} * f_S(a(x))_l under row-major b.
            for r in 0..c_t {
                for l in 0..c_s {
                    jac.set(r, p_a + r * c_s + l, source_preds.get(i, l));
                }
            }
        }
        jacs.push(jac);
    }
    Ok(block_gram(&jacs))
}

/// Trace-averaged scalar form of the full target NTK.
pub fn ntk_t_scalar(m: &ReprogrammedModel, x_t: &Matrix) -> Result<Matrix, ReprogramError> {
    let block = ntk_t(m, x_t)?;
    Ok(kernels::scalar_from_block(&block, m.target_label_dim())?)
}

/// Block Gram of per-point Jacobians: block `(i, j) = J_i J_j^T`.
fn block_gram(jacs: &[Matrix]) -> Matrix {
    if jacs.is_empty() {
        return Matrix::zeros(0, 0);
    }
    let c = jacs[0].rows();
    let n = jacs.len();
    let mut out = Matrix::zeros(n * c, n * c);
    for (i, ji) in jacs.iter().enumerate() {
        for (j, jj) in jacs.iter().enumerate() {
            let block = ji.matmul(&jj.transpose());
            for r in 0..c {
                for s in 0..c {
                    out.set(i * c + r, j * c + s, block.get(r, s));
                }
            }
        }
    }
    out
}

/// Block Gram of the transform Jacobians themselves (the paper's
/// `Theta_A(X_T, X_T)`), shape `N_T d_S x N_T d_S`.
pub fn transform_block_gram(t: &InputTransform, x_t: &Matrix) -> Result<Matrix, ReprogramError> {
    let jacs: Vec<Matrix> = (0..x_t.rows())
        .map(|i| transform_jacobian(t, x_t.row(i)))
        .collect::<Result<_, _>>()?;
    Ok(block_gram(&jacs))
}

/// Mean squared loss of the composed model on a dataset.
pub fn mse_loss(m: &ReprogrammedModel, data: &Dataset) -> Result<f64, ReprogramError> {
    let preds = target_predictions(m, &data.x)?;
    if preds.cols() != data.y.cols() {
        return Err(dim_err(format!(
            "model emits {} labels, dataset has {}",
            preds.cols(),
            data.y.cols()
        )));
    }
    let r = preds.sub(&data.y).frob_norm();
    Ok(r * r / data.len() as f64)
}

/// Gradient of [`mse_loss`] over the trainable parameter groups.
#[derive(Debug, Clone)]
pub struct LossGradient {
    /// Gradient with respect to `theta_A`, when the transform is trainable.
    pub transform: Option<Vec<f64>>,
    /// Gradient with respect to `b`, when the mapping is trainable.
    pub mapping: Option<Matrix>,
}

/// Loss and its analytic gradient; the single code path used by training.
pub fn loss_and_gradient(
    m: &ReprogrammedModel,
    data: &Dataset,
) -> Result<(f64, LossGradient), ReprogramError> {
    let n = data.len() as f64;
    let transformed = transformed_points(&m.transform, &data.x)?;
    let source_preds = kernels::predict(&m.source, &transformed)?;
    let preds = source_preds.matmul(&m.mapping.b.transpose());
    if preds.cols() != data.y.cols() {
        return Err(dim_err(format!(
            "model emits {} labels, dataset has {}",
            preds.cols(),
            data.y.cols()
        )));
    }
    let residual = preds.sub(&data.y);
    let loss = {
        let f = residual.frob_norm();
        f * f / n
    };
    // Once the loss has overflowed, gradients are meaningless and their
    // products can overflow too; callers abort on the loss alone.
    if !loss.is_finite() {
        return Ok((
            loss,
            LossGradient {
                transform: None,
                mapping: None,
            },
        ));
    }

    let mapping = if m.mapping.trainable {
        // dL/db = (2/N) sum_i r_i f_S(a(x_i))^T
        Some(residual.transpose().matmul(&source_preds).scale(2.0 / n))
    } else {
        None
    };

    let transform = if m.transform_trainable {
        let readout = m.source_readout()?;
        let mut grad = vec![0.0; m.transform.param_count()];
        for i in 0..data.len() {
            let g = theta_a_jacobian(m, &readout, data.x.row(i))?;
            for (k, gk) in grad.iter_mut().enumerate() {
                let mut acc = 0.0;
                for r in 0..g.rows() {
                    acc += g.get(r, k) * residual.get(i, r);
                }
                *gk += 2.0 * acc / n;
            }
        }
        Some(grad)
    } else {
        None
    };

    Ok((loss, LossGradient { transform, mapping }))
}

/// Outcome of a gradient-descent run; `diverged` flags a final loss above the
/// initial one so divergence is never silent.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub model: ReprogrammedModel,
    pub trace: Vec<f64>,
    pub diverged: bool,
}

/// Full-batch gradient descent on the mean squared reprogramming loss over
/// the trainable parameter groups. The returned trace has `steps + 1` entries
/// starting at the initial loss.
pub fn train_reprogram(
    m: &ReprogrammedModel,
    data: &Dataset,
    lr: f64,
    steps: usize,
) -> Result<TrainResult, ReprogramError> {
    if !(lr.is_finite() && lr >= 0.0) {
        return Err(ReprogramError::InvalidTraining {
            reason: format!("learning rate {lr} must be finite and non-negative"),
        });
    }
    if data.input_dim() != m.target_dim() || data.label_dim() != m.target_label_dim() {
        return Err(dim_err(format!(
            "dataset is {}->{}-dimensional, model is {}->{}",
            data.input_dim(),
            data.label_dim(),
            m.target_dim(),
            m.target_label_dim()
        )));
    }
    let mut model = m.clone();
    let mut trace = Vec::with_capacity(steps + 1);

    // Frozen-transform fast path: source outputs are constant across steps,
    // so predict once and iterate on the mapping alone. Numerically identical
    // to the general path below.
    if !model.transform_trainable {
        let transformed = transformed_points(&model.transform, &data.x)?;
        let source_preds = kernels::predict(&model.source, &transformed)?;
        let n = data.len() as f64;
        for step in 0..=steps {
            let preds = source_preds.matmul(&model.mapping.b.transpose());
            if preds.cols() != data.y.cols() {
                return Err(dim_err(format!(
                    "model emits {} labels, dataset has {}",
                    preds.cols(),
                    data.y.cols()
                )));
            }
            let residual = preds.sub(&data.y);
            let loss = {
                let f = residual.frob_norm();
                f * f / n
            };
            if !loss.is_finite() {
                return Err(ReprogramError::NonFiniteLoss { step, trace });
            }
            trace.push(loss);
            if step == steps || !model.mapping.trainable {
                if step == steps {
                    break;
                }
                trace.resize(steps + 1, loss);
                break;
            }
            let grad = residual.transpose().matmul(&source_preds).scale(2.0 / n);
            let updated: Vec<f64> = model
                .mapping
                .b
                .data()
                .iter()
                .zip(grad.data())
                .map(|(b, g)| b - lr * g)
                .collect();
            match Matrix::new(grad.rows(), grad.cols(), updated) {
                Ok(b) => model.mapping.b = b,
                Err(_) => return Err(ReprogramError::NonFiniteLoss { step, trace }),
            }
        }
        let diverged =
            trace.last().copied().unwrap_or(0.0) > trace.first().copied().unwrap_or(0.0);
        return Ok(TrainResult {
            model,
            trace,
            diverged,
        });
    }

    for step in 0..=steps {
        let (loss, grad) = loss_and_gradient(&model, data)?;
        if !loss.is_finite() {
            return Err(ReprogramError::NonFiniteLoss { step, trace });
        }
        trace.push(loss);
        if step == steps {
            break;
        }
        if let Some(g) = grad.transform {
            let mut theta = model.transform.params();
            for (t, gk) in theta.iter_mut().zip(&g) {
                *t -= lr * gk;
            }
            if theta.iter().any(|v| !v.is_finite()) {
                return Err(ReprogramError::NonFiniteLoss { step, trace });
            }
            model.transform = model.transform.with_params(&theta)?;
        }
        if let Some(g) = grad.mapping {
            let updated: Vec<f64> = model
                .mapping
                .b
                .data()
                .iter()
                .zip(g.data())
                .map(|(b, gk)| b - lr * gk)
                .collect();
            match Matrix::new(g.rows(), g.cols(), updated) {
                Ok(b) => model.mapping.b = b,
                Err(_) => return Err(ReprogramError::NonFiniteLoss { step, trace }),
            }
        }
    }
    let diverged = trace.last().copied().unwrap_or(0.0) > trace.first().copied().unwrap_or(0.0);
    Ok(TrainResult {
        model,
        trace,
        diverged,
    })
}

/// Loss trace as CSV with header `step,loss`.
pub fn loss_trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("step,loss\n");
    for (step, loss) in trace.iter().enumerate() {
        out.push_str(&format!("{step},{}\n", linalg::fmt_float(*loss)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{fit_source, FeatureMap};
    use crate::linalg::Matrix;
    use crate::nets::{central_diff_jacobian, Activation, NetworkSpec};
    use crate::testutil::{assert_close, gauss_jordan_inverse, random_matrix, Rng64};

    fn rel_frob(a: &Matrix, b: &Matrix) -> f64 {
        a.sub(b).frob_norm() / a.frob_norm().max(1e-30)
    }

    /// Random source model over `R^{d_s}` with `c_s` outputs.
    fn random_source(
        rng: &mut Rng64,
        phi: FeatureMap,
        n_s: usize,
        c_s: usize,
        sigma: f64,
    ) -> KernelSourceModel {
        let d_s = phi.input_dim();
        let x = random_matrix(rng, n_s, d_s);
        let y = random_matrix(rng, n_s, c_s);
        let data = Dataset::new(x, y, "source").unwrap();
        fit_source(&phi, &data, sigma).unwrap()
    }

    #[test]
    fn fc_identity_transform_is_identity() {
        let t = InputTransform::fc(Matrix::identity(3), None).unwrap();
        let out = apply_transform(&t, &[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(out, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn vp_scatters_and_pads() {
        let t = InputTransform::vp(4, vec![0, 1], vec![0.0, 0.0, 5.0, 7.0]).unwrap();
        let out = apply_transform(&t, &[1.0, 2.0]).unwrap();
        assert_eq!(out, vec![1.0, 2.0, 5.0, 7.0]);
    }

    #[test]
    fn fc_matches_matrix_vector_oracle() {
        let mut rng = Rng64::new(3);
        let w = random_matrix(&mut rng, 4, 3);
        let bias = vec![0.1, -0.2, 0.3, 0.4];
        let t = InputTransform::fc(w.clone(), Some(bias.clone())).unwrap();
        let x = [0.5, -1.0, 2.0];
        let got = apply_transform(&t, &x).unwrap();
        for s in 0..4 {
            let want: f64 = (0..3).map(|j| w.get(s, j) * x[j]).sum::<f64>() + bias[s];
            assert_close(got[s], want, 1e-14);
        }
    }

    #[test]
    fn vp_rejects_bad_slots() {
        assert!(InputTransform::vp(3, vec![0, 0], vec![0.0; 3]).is_err());
        assert!(InputTransform::vp(3, vec![5], vec![0.0; 3]).is_err());
    }

    #[test]
    fn fc_jacobian_structure() {
        let t = InputTransform::fc(Matrix::zeros(3, 2), None).unwrap();
        let jac = transform_jacobian(&t, &[1.0, 0.0]).unwrap();
        // Row s carries x^T = e_1^T in its own column block.
        for s in 0..3 {
            for k in 0..6 {
                let want = if k == s * 2 { 1.0 } else { 0.0 };
                assert_close(jac.get(s, k), want, 1e-15);
            }
        }
    }

    #[test]
    fn vp_jacobian_is_constant_mask_selector() {
        let t = InputTransform::vp(4, vec![1, 3], vec![0.0; 4]).unwrap();
        let j1 = transform_jacobian(&t, &[0.4, -0.7]).unwrap();
        let j2 = transform_jacobian(&t, &[100.0, 3.0]).unwrap();
        assert_eq!(j1, j2);
        assert_eq!(j1, Matrix::diagonal(&[1.0, 0.0, 1.0, 0.0]));
    }

    #[test]
    fn transform_jacobians_match_finite_differences() {
        let mut rng = Rng64::new(8);
        let fc = InputTransform::fc(random_matrix(&mut rng, 3, 2), Some(vec![0.3, -0.1, 0.2]))
            .unwrap();
        let vp = InputTransform::vp(4, vec![2, 0], vec![0.5, -0.5, 0.1, 0.9]).unwrap();
        for t in [fc, vp] {
            let x: Vec<f64> = (0..t.target_dim()).map(|_| rng.symmetric()).collect();
            let exact = transform_jacobian(&t, &x).unwrap();
            let t2 = t.clone();
            let x2 = x.clone();
            let fd = central_diff_jacobian(
                move |theta| {
                    apply_transform(&t2.with_params(theta).unwrap(), &x2).unwrap()
                },
                &t.params(),
                1e-6,
            );
            assert!(rel_frob(&exact, &fd) <= 1e-6);
        }
    }

    #[test]
    fn fc_transform_gram_is_inner_product_times_identity() {
        // Theta_A(x, x') = <x, x'> I_{d_S} for weights-only FC.
        let t = InputTransform::fc(Matrix::zeros(3, 2), None).unwrap();
        let x = [0.7, -0.3];
        let xp = [0.2, 0.9];
        let ji = transform_jacobian(&t, &x).unwrap();
        let jj = transform_jacobian(&t, &xp).unwrap();
        let gram = ji.matmul(&jj.transpose());
        let ip: f64 = x.iter().zip(&xp).map(|(a, b)| a * b).sum();
        assert!(rel_frob(&gram, &Matrix::identity(3).scale(ip)) <= 1e-14);
    }

    fn linear_model(
        rng: &mut Rng64,
        d_t: usize,
        d_s: usize,
        c_s: usize,
        c_t: usize,
        transform_trainable: bool,
        mapping_trainable: bool,
    ) -> ReprogrammedModel {
        let phi = FeatureMap::linear(d_s);
        let source = random_source(rng, phi, d_s + 2, c_s, 0.5);
        let transform = InputTransform::fc(random_matrix(rng, d_s, d_t), None).unwrap();
        let mapping = OutputMapping::new(random_matrix(rng, c_t, c_s), mapping_trainable);
        ReprogrammedModel::new(transform, source, mapping, transform_trainable).unwrap()
    }

    #[test]
    fn target_forward_zero_mapping() {
        let mut rng = Rng64::new(5);
        let mut m = linear_model(&mut rng, 2, 3, 2, 2, true, true);
        m.mapping.b = Matrix::zeros(2, 2);
        let out = target_forward(&m, &[0.4, 0.6]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn target_forward_collapses_to_source_prediction() {
        let mut rng = Rng64::new(6);
        let phi = FeatureMap::linear(3);
        let source = random_source(&mut rng, phi, 5, 3, 0.4);
        let x_row = source.x_s().row(1).to_vec();
        let m = ReprogrammedModel::new(
            InputTransform::fc(Matrix::identity(3), None).unwrap(),
            source.clone(),
            OutputMapping::new(Matrix::identity(3), false),
            false,
        )
        .unwrap();
        let got = target_forward(&m, &x_row).unwrap();
        let want = kernels::predict(&source, &Matrix::row_vector(&x_row)).unwrap();
        for (g, w) in got.iter().zip(want.row(0)) {
            assert_close(*g, *w, 1e-12);
        }
    }

    #[test]
    fn target_forward_matches_staged_oracle() {
        let mut rng = Rng64::new(7);
        let m = linear_model(&mut rng, 2, 4, 3, 2, true, true);
        let x = [0.3, -0.8];
        let got = target_forward(&m, &x).unwrap();

        let u = apply_transform(&m.transform, &x).unwrap();
        let pred = kernels::predict(&m.source, &Matrix::row_vector(&u)).unwrap();
        let want = m.mapping.b.mul_vec(pred.row(0));
        for (g, w) in got.iter().zip(&want) {
            assert_close(*g, *w, 1e-13);
        }
    }

    #[test]
    fn ntk_a_zero_mapping_is_zero() {
        let mut rng = Rng64::new(9);
        let mut m = linear_model(&mut rng, 2, 3, 2, 2, true, true);
        m.mapping.b = Matrix::zeros(2, 2);
        let points = random_matrix(&mut rng, 3, 2);
        let k = ntk_a(&m, &points).unwrap();
        assert_eq!(k, Matrix::zeros(6, 6));
    }

    #[test]
    fn ntk_a_vanishes_without_trainable_vp_slots() {
        let mut rng = Rng64::new(10);
        let phi = FeatureMap::linear(3);
        let source = random_source(&mut rng, phi, 5, 2, 0.4);
        // d_T = d_S: every slot embedded, mask all zero.
        let transform = InputTransform::vp(3, vec![0, 1, 2], vec![0.0; 3]).unwrap();
        let m = ReprogrammedModel::new(
            transform,
            source,
            OutputMapping::new(random_matrix(&mut rng, 2, 2), true),
            true,
        )
        .unwrap();
        let points = random_matrix(&mut rng, 3, 3);
        let k = ntk_a(&m, &points).unwrap();
        assert!(k.frob_norm() <= 1e-14);
    }

    // -----------------------------------------------------------------
    // Dual-number forward mode through the composed model: an oracle for
    // the whole-model Jacobian that never touches the reverse-mode path.
    // -----------------------------------------------------------------

    /// Forward pass of a network carrying tangents (v, dv) per neuron.
    fn dual_hidden_features(
        spec: &NetworkSpec,
        flat: &[f64],
        x: &[f64],
        dx: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let mut widths = spec.layer_widths.clone();
        widths.pop(); // stop at the last hidden layer
        let mut v = x.to_vec();
        let mut dv = dx.to_vec();
        let mut offset = 0;
        for layer in 0..widths.len() - 1 {
            let (fan_in, fan_out) = (widths[layer], widths[layer + 1]);
            let mut nv = vec![0.0; fan_out];
            let mut ndv = vec![0.0; fan_out];
            for r in 0..fan_out {
                let mut z = flat[offset + fan_in * fan_out + r];
                let mut dz = 0.0;
                for c in 0..fan_in {
                    let w = flat[offset + r * fan_in + c];
                    z += w * v[c];
                    dz += w * dv[c];
                }
                match spec.activations[layer] {
                    Activation::Relu => {
                        if z > 0.0 {
                            nv[r] = z;
                            ndv[r] = dz;
                        }
                    }
                    Activation::Tanh => {
                        let t = z.tanh();
                        nv[r] = t;
                        ndv[r] = dz * (1.0 - t * t);
                    }
                    Activation::Identity => {
                        nv[r] = z;
                        ndv[r] = dz;
                    }
                }
            }
            v = nv;
            dv = ndv;
            offset += fan_in * fan_out + fan_out;
        }
        (v, dv)
    }

    /// Directional derivative of the composed target model along a
    /// perturbation of `theta_A`, computed with dual arithmetic end to end.
    fn dual_target_direction(
        m: &ReprogrammedModel,
        x: &[f64],
        direction: &[f64],
    ) -> Vec<f64> {
        // a(x) and its tangent.
        let (u, du): (Vec<f64>, Vec<f64>) = match &m.transform {
            InputTransform::Fc { w, bias } => {
                let mut u = w.mul_vec(x);
                if let Some(b) = bias {
                    for (o, bi) in u.iter_mut().zip(b) {
                        *o += bi;
                    }
                }
                let d_t = w.cols();
                let du: Vec<f64> = (0..w.rows())
                    .map(|s| (0..d_t).map(|j| direction[s * d_t + j] * x[j]).sum())
                    .collect();
                (u, du)
            }
            InputTransform::Vp {
                embed_index,
                theta,
                mask,
            } => {
                let mut u: Vec<f64> = theta.iter().zip(mask).map(|(t, m)| t * m).collect();
                let mut du: Vec<f64> = direction.iter().zip(mask).map(|(d, m)| d * m).collect();
                for (coord, &slot) in embed_index.iter().enumerate() {
                    u[slot] = x[coord];
                    du[slot] = 0.0;
                }
                (u, du)
            }
        };
        // phi(u) and its tangent.
        let (f, df): (Vec<f64>, Vec<f64>) = match m.source.feature_map().base() {
            None => (u.clone(), du.clone()),
            Some((spec, params)) => dual_hidden_features(spec, params.flat(), &u, &du),
        };
        // Prediction chain: k(u, X_S) alpha then b.
        let f_s = m
            .source
            .feature_map()
            .feature_matrix(m.source.x_s())
            .unwrap();
        let alpha = m.source.alpha();
        let c_s = alpha.cols();
        let mut dpred = vec![0.0; c_s];
        for s in 0..f_s.rows() {
            let dk: f64 = f_s.row(s).iter().zip(&df).map(|(a, b)| a * b).sum();
            for c in 0..c_s {
                dpred[c] += dk * alpha.get(s, c);
            }
        }
        let _ = f;
        m.mapping.b.mul_vec(&dpred)
    }

    fn whole_model_theta_a_jacobian(m: &ReprogrammedModel, x: &[f64]) -> Matrix {
        let p_a = m.transform.param_count();
        let c_t = m.target_label_dim();
        let mut jac = Matrix::zeros(c_t, p_a);
        for k in 0..p_a {
            let mut dir = vec![0.0; p_a];
            dir[k] = 1.0;
            let col = dual_target_direction(m, x, &dir);
            for r in 0..c_t {
                jac.set(r, k, col[r]);
            }
        }
        jac
    }

    #[test]
    fn ntk_a_matches_whole_model_jacobian_oracle() {
        let mut rng = Rng64::new(12);
        // Linear phi with FC, then a net phi with VP.
        let linear = linear_model(&mut rng, 2, 4, 3, 2, true, true);
        let spec = NetworkSpec::new(vec![4, 5, 3], vec![Activation::Tanh], 0.9, 33).unwrap();
        let phi = FeatureMap::net_features(spec).unwrap();
        let source = random_source(&mut rng, phi, 6, 2, 0.6);
        let vp = ReprogrammedModel::new(
            InputTransform::vp(4, vec![0, 2], vec![0.1, 0.2, -0.3, 0.4]).unwrap(),
            source,
            OutputMapping::new(random_matrix(&mut rng, 2, 2), true),
            true,
        )
        .unwrap();
        for m in [linear, vp] {
            let points = random_matrix(&mut rng, 3, m.target_dim());
            let got = ntk_a(&m, &points).unwrap();
            let jacs: Vec<Matrix> = (0..points.rows())
                .map(|i| whole_model_theta_a_jacobian(&m, points.row(i)))
                .collect();
            let want = block_gram(&jacs);
            assert!(rel_frob(&got, &want) <= 1e-9, "gap {}", rel_frob(&got, &want));
        }
    }

    #[test]
    fn ntk_b_single_point_and_orthogonal_outputs() {
        let mut rng = Rng64::new(13);
        let m = linear_model(&mut rng, 2, 3, 2, 2, true, true);
        let point = random_matrix(&mut rng, 1, 2);
        let (scalar, block) = ntk_b(&m, &point).unwrap();
        let u = apply_transform(&m.transform, point.row(0)).unwrap();
        let pred = kernels::predict(&m.source, &Matrix::row_vector(&u)).unwrap();
        let norm2: f64 = pred.row(0).iter().map(|v| v * v).sum();
        assert_close(scalar.get(0, 0), norm2, 1e-12);
        assert_eq!(block.rows(), 2);

        // Hand-built model whose source outputs are orthogonal for two points.
        let phi = FeatureMap::linear(2);
        let src_data = Dataset::new(Matrix::identity(2), Matrix::identity(2), "orth").unwrap();
        let source = fit_source(&phi, &src_data, 1.0).unwrap();
        let m2 = ReprogrammedModel::new(
            InputTransform::fc(Matrix::identity(2), None).unwrap(),
            source,
            OutputMapping::identity_padded(2, 2),
            false,
        )
        .unwrap();
        let (scalar, _) = ntk_b(&m2, &Matrix::identity(2)).unwrap();
        assert_close(scalar.get(0, 1), 0.0, 1e-14);
    }

    #[test]
    fn ntk_b_block_matches_theta_b_jacobian_gram() {
        let mut rng = Rng64::new(14);
        let m = linear_model(&mut rng, 2, 4, 3, 2, true, true);
        let points = random_matrix(&mut rng, 3, 2);
        let (_, block) = ntk_b(&m, &points).unwrap();

        let c_t = 2;
        let c_s = 3;
        let jacs: Vec<Matrix> = (0..points.rows())
            .map(|i| {
                let u = apply_transform(&m.transform, points.row(i)).unwrap();
                let pred = kernels::predict(&m.source, &Matrix::row_vector(&u)).unwrap();
                Matrix::from_fn(c_t, c_t * c_s, |r, k| {
                    if k / c_s == r {
                        pred.get(0, k % c_s)
                    } else {
                        0.0
                    }
                })
            })
            .collect();
        let want = block_gram(&jacs);
        assert!(rel_frob(&block, &want) <= 1e-10);
    }

    #[test]
    fn ntk_t_reduces_to_single_trainable_group() {
        let mut rng = Rng64::new(15);
        let mut m = linear_model(&mut rng, 2, 3, 2, 2, true, true);
        let points = random_matrix(&mut rng, 3, 2);

        m.transform_trainable = false;
        m.mapping.trainable = true;
        let (_, block_b) = ntk_b(&m, &points).unwrap();
        assert!(rel_frob(&ntk_t(&m, &points).unwrap(), &block_b) <= 1e-12);

        m.transform_trainable = true;
        m.mapping.trainable = false;
        let a = ntk_a(&m, &points).unwrap();
        assert!(rel_frob(&ntk_t(&m, &points).unwrap(), &a) <= 1e-12);
    }

    #[test]
    fn ntk_additivity_holds_to_rounding() {
        let mut rng = Rng64::new(16);
        for trial in 0..5 {
            let m = linear_model(&mut rng, 2, 4, 3, 2, true, true);
            let points = random_matrix(&mut rng, 3, 2);
            let full = ntk_t(&m, &points).unwrap();
            let sum = ntk_a(&m, &points)
                .unwrap()
                .add(&ntk_b(&m, &points).unwrap().1);
            assert!(
                rel_frob(&full, &sum) <= 1e-10,
                "trial {trial}: gap {}",
                rel_frob(&full, &sum)
            );
        }
    }

    #[test]
    fn training_with_zero_lr_is_flat() {
        let mut rng = Rng64::new(17);
        let m = linear_model(&mut rng, 2, 3, 2, 2, true, true);
        let data = Dataset::new(
            random_matrix(&mut rng, 5, 2),
            random_matrix(&mut rng, 5, 2),
            "flat",
        )
        .unwrap();
        let before = m.transform.params();
        let result = train_reprogram(&m, &data, 0.0, 10).unwrap();
        assert_eq!(result.trace.len(), 11);
        for w in result.trace.windows(2) {
            assert_eq!(w[0], w[1]);
        }
        assert_eq!(result.model.transform.params(), before);
        assert!(!result.diverged);
    }

    #[test]
    fn fc_training_reaches_least_squares_optimum() {
        let mut rng = Rng64::new(18);
        let d_s = 3;
        let d_t = 2;
        let c = 2;
        let phi = FeatureMap::linear(d_s);
        let source = random_source(&mut rng, phi, d_s + 2, c, 0.5);
        let m = ReprogrammedModel::new(
            InputTransform::fc(random_matrix(&mut rng, d_s, d_t).scale(0.3), None).unwrap(),
            source.clone(),
            OutputMapping::new(Matrix::identity(c), false),
            true,
        )
        .unwrap();
        let n = 20;
        let x_t = random_matrix(&mut rng, n, d_t);
        let y_t = random_matrix(&mut rng, n, c);
        let data = Dataset::new(x_t.clone(), y_t.clone(), "ls").unwrap();

        // Closed-form optimum of (1/N) sum ||M W x - y||^2 over W:
        // (M^T M) W (X^T X) = M^T Y^T X.
        let f_s = source.feature_map().feature_matrix(source.x_s()).unwrap();
        let readout = source.alpha().transpose().matmul(&f_s); // c x d_S
        let mtm = readout.transpose().matmul(&readout);
        let sxx = x_t.transpose().matmul(&x_t);
        let rhs = readout.transpose().matmul(&y_t.transpose().matmul(&x_t));
        let w_star = gauss_jordan_inverse(&mtm)
            .matmul(&rhs)
            .matmul(&gauss_jordan_inverse(&sxx));
        let mut best = m.clone();
        best.transform = InputTransform::fc(w_star, None).unwrap();
        let optimum = mse_loss(&best, &data).unwrap();

        let result = train_reprogram(&m, &data, 0.02, 10_000).unwrap();
        let final_loss = *result.trace.last().unwrap();
        assert!(
            final_loss - optimum <= 1e-4,
            "final {final_loss}, optimum {optimum}"
        );
        assert!(!result.diverged);
    }

    #[test]
    fn convex_training_is_monotone() {
        let mut rng = Rng64::new(19);
        // b-only training of a linear-in-b objective: convex, so small-step
        // GD must never increase the loss.
        let phi = FeatureMap::linear(3);
        let source = random_source(&mut rng, phi, 5, 3, 0.5);
        let m = ReprogrammedModel::new(
            InputTransform::fc(random_matrix(&mut rng, 3, 2), None).unwrap(),
            source,
            OutputMapping::zero(2, 3),
            false,
        )
        .unwrap();
        let data = Dataset::new(
            random_matrix(&mut rng, 6, 2),
            random_matrix(&mut rng, 6, 2),
            "convex",
        )
        .unwrap();
        let result = train_reprogram(&m, &data, 0.05, 200).unwrap();
        for w in result.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "loss increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let mut rng = Rng64::new(20);
        for checkpoint in 0..5 {
            let m = linear_model(&mut rng, 2, 3, 2, 2, true, true);
            let data = Dataset::new(
                random_matrix(&mut rng, 4, 2),
                random_matrix(&mut rng, 4, 2),
                "gradcheck",
            )
            .unwrap();
            let (_, grad) = loss_and_gradient(&m, &data).unwrap();

            let m2 = m.clone();
            let data2 = data.clone();
            let fd_a = central_diff_jacobian(
                move |theta| {
                    let mut probe = m2.clone();
                    probe.transform = probe.transform.with_params(theta).unwrap();
                    vec![mse_loss(&probe, &data2).unwrap()]
                },
                &m.transform.params(),
                1e-6,
            );
            let ga = grad.transform.unwrap();
            for (k, g) in ga.iter().enumerate() {
                assert!(
                    (g - fd_a.get(0, k)).abs() <= 1e-5 * g.abs().max(1.0),
                    "checkpoint {checkpoint}, theta_A[{k}]"
                );
            }

            let m3 = m.clone();
            let data3 = data.clone();
            let b0 = m.mapping.b.clone();
            let fd_b = central_diff_jacobian(
                move |bv| {
                    let mut probe = m3.clone();
                    probe.mapping.b = Matrix::new(b0.rows(), b0.cols(), bv.to_vec()).unwrap();
                    vec![mse_loss(&probe, &data3).unwrap()]
                },
                m.mapping.b.data(),
                1e-6,
            );
            let gb = grad.mapping.unwrap();
            for k in 0..gb.rows() * gb.cols() {
                let g = gb.data()[k];
                assert!(
                    (g - fd_b.get(0, k)).abs() <= 1e-5 * g.abs().max(1.0),
                    "checkpoint {checkpoint}, b[{k}]"
                );
            }
        }
    }

    #[test]
    fn ntk_features_phi_is_rejected_for_ntk_a() {
        let mut rng = Rng64::new(21);
        let spec = NetworkSpec::new(vec![3, 4, 2], vec![Activation::Tanh], 1.0, 2).unwrap();
        let phi = FeatureMap::ntk_features(spec).unwrap();
        let source = random_source(&mut rng, phi, 5, 2, 0.5);
        let m = ReprogrammedModel::new(
            InputTransform::fc(random_matrix(&mut rng, 3, 2), None).unwrap(),
            source,
            OutputMapping::zero(2, 2),
            true,
        )
        .unwrap();
        let points = random_matrix(&mut rng, 2, 2);
        let err = ntk_a(&m, &points).unwrap_err();
        assert!(matches!(
            err,
            ReprogramError::Kernel(KernelError::FeatureMapNotDifferentiable)
        ));
    }

    #[test]
    fn training_divergence_is_flagged_or_aborted() {
        let mut rng = Rng64::new(22);
        let phi = FeatureMap::linear(3);
        let source = random_source(&mut rng, phi, 5, 3, 0.5);
        let m = ReprogrammedModel::new(
            InputTransform::fc(random_matrix(&mut rng, 3, 2), None).unwrap(),
            source,
            OutputMapping::new(random_matrix(&mut rng, 2, 3), true),
            false,
        )
        .unwrap();
        let data = Dataset::new(
            random_matrix(&mut rng, 6, 2),
            random_matrix(&mut rng, 6, 2),
            "diverge",
        )
        .unwrap();
        // Overshooting lr, few steps: the loss grows but stays finite.
        let result = train_reprogram(&m, &data, 500.0, 2).unwrap();
        assert!(result.diverged, "trace {:?}", result.trace);
        assert!(*result.trace.last().unwrap() > result.trace[0]);

        // Long enough to overflow: aborts with the trace so far attached.
        let err = train_reprogram(&m, &data, 500.0, 10_000).unwrap_err();
        match err {
            ReprogramError::NonFiniteLoss { step, trace } => {
                assert!(step > 0);
                assert_eq!(trace.len(), step);
                assert!(trace.iter().all(|l| l.is_finite()));
            }
            other => panic!("expected NonFiniteLoss, got {other:?}"),
        }

        // Same abort contract on the trainable-transform path.
        let mut m2 = m.clone();
        m2.transform_trainable = true;
        let err = train_reprogram(&m2, &data, 50.0, 10_000).unwrap_err();
        assert!(matches!(err, ReprogramError::NonFiniteLoss { .. }));
    }

    #[test]
    fn loss_trace_csv_format() {
        let csv = loss_trace_csv(&[1.0, 0.5]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "step,loss");
        assert!(lines.next().unwrap().starts_with("0,1."));
        assert!(lines.next().unwrap().starts_with("1,5."));
    }
}
