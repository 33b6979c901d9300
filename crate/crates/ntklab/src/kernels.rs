//! Explicit feature maps, empirical NTKs, and kernel ridge regression.
//!
//! Every kernel in this crate is an inner product of an explicit finite
//! feature map `phi`:
//!
//! ```text
//! k(x, x') = <phi(x), phi(x')>
//! ```
//!
//! Three maps are supported: `linear` (phi = identity), `net_features`
//! (post-activation values of a pinned network's last hidden layer), and
//! `ntk_features` (per-output parameter gradients of a pinned network,
//! scaled by 1/sqrt(c) so the induced scalar kernel is the trace-averaged
//! empirical NTK). The source model is kernel ridge regression:
//!
//! ```text
//! f_S(.)^T = k(., X_S) [K_S + sigma I]^{-1} Y_S
//! ```
//!
//! `sigma` here is the effective ridge; callers wanting the dataset-size-
//! scaled convention pass `sigma * N_S`. All bound checkers consume the same
//! effective value, so the two conventions never mix downstream.

use crate::linalg::{self, Matrix};
use crate::nets::{self, NetError, NetworkParams, NetworkSpec};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("feature map has no input Jacobian (ntk_features is not differentiable here)")]
    FeatureMapNotDifferentiable,
    #[error("invalid feature map: {reason}")]
    InvalidFeatureMap { reason: String },
}

fn dim_err(context: impl Into<String>) -> KernelError {
    KernelError::DimensionMismatch {
        context: context.into(),
    }
}

/// Paired feature/label matrices for one task.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Matrix,
    pub name: String,
}

impl Dataset {
    pub fn new(x: Matrix, y: Matrix, name: impl Into<String>) -> Result<Self, KernelError> {
        if x.rows() != y.rows() || x.rows() == 0 {
            return Err(dim_err(format!(
                "dataset needs matching non-empty rows, got X {}x{} and Y {}x{}",
                x.rows(),
                x.cols(),
                y.rows(),
                y.cols()
            )));
        }
        Ok(Self {
            x,
            y,
            name: name.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.x.cols()
    }

    pub fn label_dim(&self) -> usize {
        self.y.cols()
    }

    /// Dataset view with rows restricted to `indices`.
    pub fn subset(&self, indices: &[usize], name: impl Into<String>) -> Dataset {
        let x = Matrix::from_fn(indices.len(), self.x.cols(), |i, j| self.x.get(indices[i], j));
        let y = Matrix::from_fn(indices.len(), self.y.cols(), |i, j| self.y.get(indices[i], j));
        Dataset {
            x,
            y,
            name: name.into(),
        }
    }

    /// CSV with header `y0..y{c-1},x0..x{d-1}`; labels first, then features.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (0..self.y.cols())
            .map(|j| format!("y{j}"))
            .chain((0..self.x.cols()).map(|j| format!("x{j}")))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for i in 0..self.len() {
            let fields: Vec<String> = self
                .y
                .row(i)
                .iter()
                .chain(self.x.row(i).iter())
                .map(|v| linalg::fmt_float(*v))
                .collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, name: impl Into<String>) -> Result<Self, KernelError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| dim_err("empty dataset CSV"))?;
        let columns: Vec<&str> = header.split(',').map(|s| s.trim()).collect();
        let c = columns.iter().take_while(|name| name.starts_with('y')).count();
        let d = columns.len() - c;
        if c == 0 || d == 0 {
            return Err(dim_err(format!("header {header:?} needs y* then x* columns")));
        }
        let mut ys = Vec::new();
        let mut xs = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != c + d {
                return Err(dim_err(format!(
                    "line {} has {} fields, expected {}",
                    lineno + 2,
                    fields.len(),
                    c + d
                )));
            }
            let parse = |s: &str| -> Result<f64, KernelError> {
                s.trim()
                    .parse()
                    .map_err(|e| dim_err(format!("line {}: {e}", lineno + 2)))
            };
            ys.push(fields[..c].iter().map(|s| parse(s)).collect::<Result<Vec<_>, _>>()?);
            xs.push(fields[c..].iter().map(|s| parse(s)).collect::<Result<Vec<_>, _>>()?);
        }
        Dataset::new(Matrix::from_rows(&xs)?, Matrix::from_rows(&ys)?, name)
    }
}

/// Which explicit feature map realizes the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMapKind {
    Linear,
    NetFeatures,
    NtkFeatures,
}

/// Explicit finite-dimensional feature map `phi`.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    kind: FeatureMapKind,
    base: Option<(NetworkSpec, NetworkParams)>,
    input_dim: usize,
    output_dim: usize,
}

impl FeatureMap {
    /// `phi = identity` on `R^dim`.
    pub fn linear(dim: usize) -> Self {
        Self {
            kind: FeatureMapKind::Linear,
            base: None,
            input_dim: dim,
            output_dim: dim,
        }
    }

    /// Last-hidden-layer activations of the network pinned by `spec`.
    pub fn net_features(spec: NetworkSpec) -> Result<Self, KernelError> {
        spec.validate()?;
        if spec.layer_widths.len() < 3 {
            return Err(KernelError::InvalidFeatureMap {
                reason: "net_features needs at least one hidden layer".into(),
            });
        }
        let params = nets::init_network(&spec);
        let input_dim = spec.input_dim();
        let output_dim = spec.layer_widths[spec.layer_widths.len() - 2];
        Ok(Self {
            kind: FeatureMapKind::NetFeatures,
            base: Some((spec, params)),
            input_dim,
            output_dim,
        })
    }

    /// Parameter-gradient features of the network pinned by `spec`:
    /// `phi(x) = vec(grad_theta f(x)) / sqrt(c)`, so the induced kernel is the
    /// trace-averaged empirical NTK.
    pub fn ntk_features(spec: NetworkSpec) -> Result<Self, KernelError> {
        spec.validate()?;
        let params = nets::init_network(&spec);
        let input_dim = spec.input_dim();
        let output_dim = spec.output_dim() * spec.param_count();
        Ok(Self {
            kind: FeatureMapKind::NtkFeatures,
            base: Some((spec, params)),
            input_dim,
            output_dim,
        })
    }

    /// Builds the requested kind from one base spec (ignored for `linear`).
    pub fn from_kind(
        kind: FeatureMapKind,
        dim: usize,
        spec: Option<NetworkSpec>,
    ) -> Result<Self, KernelError> {
        match kind {
            FeatureMapKind::Linear => Ok(Self::linear(dim)),
            FeatureMapKind::NetFeatures => Self::net_features(spec.ok_or_else(|| {
                KernelError::InvalidFeatureMap {
                    reason: "net_features needs a base network spec".into(),
                }
            })?),
            FeatureMapKind::NtkFeatures => Self::ntk_features(spec.ok_or_else(|| {
                KernelError::InvalidFeatureMap {
                    reason: "ntk_features needs a base network spec".into(),
                }
            })?),
        }
    }

    pub fn kind(&self) -> FeatureMapKind {
        self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn base(&self) -> Option<(&NetworkSpec, &NetworkParams)> {
        self.base.as_ref().map(|(s, p)| (s, p))
    }

    /// Whether `input_jacobian` is available.
    pub fn differentiable(&self) -> bool {
        !matches!(self.kind, FeatureMapKind::NtkFeatures)
    }

    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>, KernelError> {
        if x.len() != self.input_dim {
            return Err(dim_err(format!(
                "point has {} coordinates, feature map expects {}",
                x.len(),
                self.input_dim
            )));
        }
        match self.kind {
            FeatureMapKind::Linear => Ok(x.to_vec()),
            FeatureMapKind::NetFeatures => {
                let (spec, params) = self.base.as_ref().unwrap();
                Ok(nets::hidden_features(spec, params, x)?)
            }
            FeatureMapKind::NtkFeatures => {
                let (spec, params) = self.base.as_ref().unwrap();
                let jac = nets::jacobian_params(spec, params, x)?;
                let scale = 1.0 / (spec.output_dim() as f64).sqrt();
                let mut out = Vec::with_capacity(self.output_dim);
                for i in 0..jac.rows() {
                    out.extend(jac.row(i).iter().map(|v| v * scale));
                }
                Ok(out)
            }
        }
    }

    /// Feature matrix with `phi(row_i)` as rows.
    pub fn feature_matrix(&self, points: &Matrix) -> Result<Matrix, KernelError> {
        let mut rows = Vec::with_capacity(points.rows());
        for i in 0..points.rows() {
            rows.push(self.features(points.row(i))?);
        }
        Ok(Matrix::from_rows(&rows)?)
    }

    /// Jacobian of `phi` at `x`, shape `p x d`. Unavailable for
    /// `ntk_features`, which would need second derivatives of the base net.
    pub fn input_jacobian(&self, x: &[f64]) -> Result<Matrix, KernelError> {
        if x.len() != self.input_dim {
            return Err(dim_err(format!(
                "point has {} coordinates, feature map expects {}",
                x.len(),
                self.input_dim
            )));
        }
        match self.kind {
            FeatureMapKind::Linear => Ok(Matrix::identity(self.input_dim)),
            FeatureMapKind::NetFeatures => {
                let (spec, params) = self.base.as_ref().unwrap();
                Ok(nets::hidden_jacobian_input(spec, params, x)?)
            }
            FeatureMapKind::NtkFeatures => Err(KernelError::FeatureMapNotDifferentiable),
        }
    }
}

/// Kernel matrix `k(A, B)`: entry `(i, j) = <phi(a_i), phi(b_j)>`.
pub fn kernel_matrix(phi: &FeatureMap, a: &Matrix, b: &Matrix) -> Result<Matrix, KernelError> {
    if a.cols() != phi.input_dim() || b.cols() != phi.input_dim() {
        return Err(dim_err(format!(
            "points have {}/{} coordinates, feature map expects {}",
            a.cols(),
            b.cols(),
            phi.input_dim()
        )));
    }
    let fa = phi.feature_matrix(a)?;
    let fb = phi.feature_matrix(b)?;
    Ok(fa.matmul(&fb.transpose()))
}

/// Empirical NTK of a network as a block kernel, shape `N_A c x N_B c`:
/// block `(i, j)` is `J(a_i) J(b_j)^T` with `J` the parameter Jacobian.
pub fn empirical_ntk(
    spec: &NetworkSpec,
    params: &NetworkParams,
    a: &Matrix,
    b: &Matrix,
) -> Result<Matrix, KernelError> {
    if a.cols() != spec.input_dim() || b.cols() != spec.input_dim() {
        return Err(dim_err(format!(
            "points have {}/{} coordinates, network expects {}",
            a.cols(),
            b.cols(),
            spec.input_dim()
        )));
    }
    let c = spec.output_dim();
    let ja: Vec<Matrix> = (0..a.rows())
        .map(|i| nets::jacobian_params(spec, params, a.row(i)))
        .collect::<Result<_, _>>()?;
    let jb: Vec<Matrix> = (0..b.rows())
        .map(|i| nets::jacobian_params(spec, params, b.row(i)))
        .collect::<Result<_, _>>()?;
    let mut out = Matrix::zeros(a.rows() * c, b.rows() * c);
    for (i, ji) in ja.iter().enumerate() {
        for (j, jj) in jb.iter().enumerate() {
            let block = ji.matmul(&jj.transpose());
            for r in 0..c {
                for s in 0..c {
                    out.set(i * c + r, j * c + s, block.get(r, s));
                }
            }
        }
    }
    Ok(out)
}

/// Trace-averaged scalar reduction of a block kernel: entry `(i, j)` is
/// `trace(block_ij) / c`.
pub fn scalar_from_block(block: &Matrix, c: usize) -> Result<Matrix, KernelError> {
    if c == 0 || !block.rows().is_multiple_of(c) || !block.cols().is_multiple_of(c) {
        return Err(dim_err(format!(
            "{}x{} block kernel is not divisible by c = {c}",
            block.rows(),
            block.cols()
        )));
    }
    let n = block.rows() / c;
    let m = block.cols() / c;
    Ok(Matrix::from_fn(n, m, |i, j| {
        (0..c).map(|r| block.get(i * c + r, j * c + r)).sum::<f64>() / c as f64
    }))
}

/// Kernel ridge regression source model with cached kernel matrix and dual
/// coefficients. Immutable after fit.
#[derive(Debug, Clone)]
pub struct KernelSourceModel {
    feature_map: FeatureMap,
    x_s: Matrix,
    y_s: Matrix,
    sigma: f64,
    k_s: Matrix,
    alpha: Matrix,
}

impl KernelSourceModel {
    pub fn feature_map(&self) -> &FeatureMap {
        &self.feature_map
    }

    pub fn x_s(&self) -> &Matrix {
        &self.x_s
    }

    pub fn y_s(&self) -> &Matrix {
        &self.y_s
    }

    /// Effective ridge added to `K_S` in the closed form.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn k_s(&self) -> &Matrix {
        &self.k_s
    }

    /// Dual coefficients `(K_S + sigma I)^{-1} Y_S`.
    pub fn alpha(&self) -> &Matrix {
        &self.alpha
    }

    pub fn source_dim(&self) -> usize {
        self.x_s.cols()
    }

    pub fn label_dim(&self) -> usize {
        self.y_s.cols()
    }
}

/// Fits the closed-form kernel ridge source model
/// `alpha = (K_S + sigma I)^{-1} Y_S` and caches `K_S`.
pub fn fit_source(
    phi: &FeatureMap,
    source: &Dataset,
    sigma: f64,
) -> Result<KernelSourceModel, KernelError> {
    let k_s = kernel_matrix(phi, &source.x, &source.x)?;
    let alpha = linalg::ridge_solve(&k_s, &source.y, sigma)?;
    Ok(KernelSourceModel {
        feature_map: phi.clone(),
        x_s: source.x.clone(),
        y_s: source.y.clone(),
        sigma,
        k_s,
        alpha,
    })
}

/// Predictions `k(A, X_S) alpha`, one row per row of `a`.
pub fn predict(model: &KernelSourceModel, a: &Matrix) -> Result<Matrix, KernelError> {
    let cross = kernel_matrix(&model.feature_map, a, &model.x_s)?;
    Ok(cross.matmul(&model.alpha))
}

/// Closed-form empirical risk of the ridge fit:
///
/// ```text
/// (1/N) || (I - K (K + sigma I)^{-1}) Y ||_F^2
/// ```
///
/// The Frobenius norm generalizes the single-output 2-norm to c > 1.
pub fn empirical_risk(k: &Matrix, y: &Matrix, sigma: f64, n: usize) -> Result<f64, KernelError> {
    if !k.is_square() || k.rows() != y.rows() || k.rows() != n {
        return Err(dim_err(format!(
            "risk needs square K matching Y rows and N, got K {}x{}, Y {}x{}, N {}",
            k.rows(),
            k.cols(),
            y.rows(),
            y.cols(),
            n
        )));
    }
    let z = linalg::ridge_solve(k, y, sigma)?;
    let fitted = k.matmul(&z);
    let residual = y.sub(&fitted).frob_norm();
    Ok(residual * residual / n as f64)
}
