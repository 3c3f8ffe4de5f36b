//! The regularized conditional-covariance trace and its gradient.
//!
//! For a reduction `P`, with `G_PX` the centered Gaussian Gram matrix of the
//! reduced data and `G_Y` the centered response Gram matrix, the objective is
//!
//! ```text
//! T(P) = ε · Tr((G_PX + nεI)⁻¹ G_Y)
//! ```
//!
//! `G_Y` is held as a factor `Φ` with `G_Y = ΦΦᵀ`, so an evaluation costs one
//! Cholesky factorization plus triangular solves against the `r` columns of
//! `Φ`. For a linear response kernel `Φ = Hy` and `r = 1`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernels::{self, GramMatrix, KernelSpec};
use crate::linalg;
use crate::simplex::CdrMatrix;

/// Data, response Gram matrix, bandwidth and ridge shared by every
/// evaluation of the objective during a fit.
#[derive(Debug, Clone)]
pub struct ObjectiveContext {
    x: DMatrix<f64>,
    g_y: GramMatrix,
    factor: DMatrix<f64>,
    kernel: KernelSpec,
    epsilon: f64,
}

impl ObjectiveContext {
    /// `x` is the `n × d` composition matrix (one sample per row), `g_y` the
    /// centered response Gram matrix.
    pub fn new(x: DMatrix<f64>, g_y: GramMatrix, sigma: f64, epsilon: f64) -> Result<Self> {
        if !g_y.is_centered() {
            return Err(Error::InvalidConfig("response gram matrix must be centered".into()));
        }
        let factor = psd_factor(g_y.values());
        Self::assemble(x, g_y, factor, sigma, epsilon)
    }

    /// Context for real responses under the linear kernel `k(y, y′) = yy′`.
    pub fn from_real_responses(x: DMatrix<f64>, y: &[f64], sigma: f64, epsilon: f64) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                found: y.len(),
            });
        }
        let mean = y.iter().sum::<f64>() / y.len().max(1) as f64;
        let factor = DMatrix::from_iterator(y.len(), 1, y.iter().map(|v| v - mean));
        let yy = DMatrix::from_column_slice(y.len(), 1, y);
        let g_y = kernels::center_gram(&kernels::gram(&KernelSpec::Linear, &yy)?)?;
        Self::assemble(x, g_y, factor, sigma, epsilon)
    }

    fn assemble(
        x: DMatrix<f64>,
        g_y: GramMatrix,
        factor: DMatrix<f64>,
        sigma: f64,
        epsilon: f64,
    ) -> Result<Self> {
        if g_y.n() != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                found: g_y.n(),
            });
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
        }
        if !linalg::is_finite(&x) {
            return Err(Error::NonFiniteInput);
        }
        let kernel = KernelSpec::gaussian(sigma)?;
        Ok(ObjectiveContext {
            x,
            g_y,
            factor,
            kernel,
            epsilon,
        })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn g_y(&self) -> &GramMatrix {
        &self.g_y
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn sigma(&self) -> f64 {
        self.kernel.sigma().expect("objective kernel is gaussian")
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    /// Same data and responses with a different bandwidth or ridge.
    pub fn with_params(&self, sigma: f64, epsilon: f64) -> Result<Self> {
        Self::assemble(self.x.clone(), self.g_y.clone(), self.factor.clone(), sigma, epsilon)
    }
}

/// `Φ = U √Λ` over the numerically positive eigenpairs of a PSD matrix.
fn psd_factor(g: &DMatrix<f64>) -> DMatrix<f64> {
    let n = g.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = g.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.iter().fold(0.0_f64, |a, &v| a.max(v));
    if lmax <= 0.0 {
        return DMatrix::zeros(n, 0);
    }
    let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 1e-14 * lmax).collect();
    DMatrix::from_fn(n, keep.len(), |i, c| {
        eig.eigenvectors[(i, keep[c])] * eig.eigenvalues[keep[c]].sqrt()
    })
}

/// Objective value and, on request, its gradient with respect to `P`.
#[derive(Debug, Clone)]
pub struct Evaluation {
    /// `ε · Tr((G_PX + nεI)⁻¹ G_Y)`.
    pub value: f64,
    pub gradient: Option<DMatrix<f64>>,
}

impl Evaluation {
    /// `Tr((G_PX + nεI)⁻¹ G_Y)`, the quantity without the ε prefactor.
    pub fn unscaled(&self, epsilon: f64) -> f64 {
        self.value / epsilon
    }
}

pub(crate) fn check_dims(p: &CdrMatrix, ctx: &ObjectiveContext) -> Result<()> {
    if p.d() != ctx.d() {
        return Err(Error::DimensionMismatch {
            expected: ctx.d(),
            found: p.d(),
        });
    }
    Ok(())
}

/// Centered Gram matrix of the reduced data plus the uncentered one.
pub(crate) fn reduced_grams(
    p: &DMatrix<f64>,
    x: &DMatrix<f64>,
    kernel: &KernelSpec,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let z = x * p.transpose();
    let k = kernels::gram_values(kernel, &z);
    let g = linalg::double_center(&k);
    (z, k, g)
}

/// Evaluates the objective on a raw `m × d` matrix (no simplex check);
/// used for finite differences and by the optimizer.
pub fn evaluate_raw(p: &DMatrix<f64>, ctx: &ObjectiveContext, with_gradient: bool) -> Result<Evaluation> {
    let n = ctx.n();
    let (m, d) = p.shape();
    if d != ctx.d() {
        return Err(Error::DimensionMismatch {
            expected: ctx.d(),
            found: d,
        });
    }
    if n <= 1 || ctx.factor.ncols() == 0 {
        return Ok(Evaluation {
            value: 0.0,
            gradient: with_gradient.then(|| DMatrix::zeros(m, d)),
        });
    }
    let eps = ctx.epsilon;
    let (z, k, mut g) = reduced_grams(p, &ctx.x, &ctx.kernel);
    let ridge = n as f64 * eps;
    for i in 0..n {
        g[(i, i)] += ridge;
    }
    let chol = linalg::cholesky(g)?;
    // Tr(A ΦΦᵀ) = ‖L⁻¹Φ‖²_F
    let mut half = ctx.factor.clone();
    chol.l_dirty().solve_lower_triangular_unchecked_mut(&mut half);
    let value = eps * half.norm_squared();
    if !value.is_finite() {
        return Err(Error::SolveFailure("objective is not finite".into()));
    }
    if !with_gradient {
        return Ok(Evaluation { value, gradient: None });
    }

    // B = AΦ; M = −ε·H A G_Y A H = −ε·BBᵀ since AΦ is already centered
    let mut b = half;
    chol.l_dirty().tr_solve_lower_triangular_unchecked_mut(&mut b);
    let sigma = ctx.sigma();
    let scale = eps / (sigma * sigma);
    let bbt = &b * b.transpose();
    // W_ij = −M_ij·K_ij/σ²; gradient = Σ_ij W_ij (z_i − z_j)(x_i − x_j)ᵀ = 2 Zᵀ(D − W)X
    let mut lap = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = 0.0;
        for i in 0..n {
            if i != j {
                let w = scale * bbt[(i, j)] * k[(i, j)];
                lap[(i, j)] = -w;
                diag += w;
            }
        }
        lap[(j, j)] = diag;
    }
    let grad = (z.transpose() * lap) * &ctx.x * 2.0;
    Ok(Evaluation {
        value,
        gradient: Some(grad),
    })
}

/// `ε · Tr((G_PX + nεI)⁻¹ G_Y)`.
pub fn trace_objective(p: &CdrMatrix, ctx: &ObjectiveContext) -> Result<f64> {
    check_dims(p, ctx)?;
    evaluate_raw(p.entries(), ctx, false).map(|e| e.value)
}

/// Gradient of [`trace_objective`] with respect to the entries of `P`.
pub fn trace_gradient(p: &CdrMatrix, ctx: &ObjectiveContext) -> Result<DMatrix<f64>> {
    check_dims(p, ctx)?;
    Ok(evaluate_raw(p.entries(), ctx, true)?
        .gradient
        .expect("gradient requested"))
}

/// Minimized loss of the vector-valued kernel ridge regression with
/// intercept on the reduced data, `nε²Σ‖α_i‖² + ε‖F̂‖²`, evaluated
/// with response inner products taken from the uncentered `k_y`.
///
/// Uses an LU solve and explicit centering so that it shares no numerical
/// path with [`trace_objective`].
pub fn krr_equivalent_loss(p: &CdrMatrix, ctx: &ObjectiveContext, k_y: &GramMatrix) -> Result<f64> {
    check_dims(p, ctx)?;
    let n = ctx.n();
    if k_y.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: k_y.n(),
        });
    }
    if k_y.is_centered() {
        return Err(Error::InvalidConfig("krr loss expects the uncentered response gram".into()));
    }
    if n <= 1 {
        return Ok(0.0);
    }
    let eps = ctx.epsilon;
    let z = ctx.x() * p.entries().transpose();
    let k_px = DMatrix::from_fn(n, n, |i, j| {
        let a: Vec<f64> = z.row(i).iter().copied().collect();
        let b: Vec<f64> = z.row(j).iter().copied().collect();
        ctx.kernel.eval(&a, &b)
    });
    let h = linalg::centering_matrix(n);
    let system = &h * &k_px * &h + DMatrix::identity(n, n) * (n as f64 * eps);
    // α = (G + nεI)⁻¹ H Ψ, represented by its coefficient matrix C
    let coeffs = system
        .lu()
        .solve(&h)
        .ok_or_else(|| Error::SolveFailure("singular ridge system".into()))?;
    let alpha_gram = &coeffs * k_y.values() * coeffs.transpose();
    let residual_term = n as f64 * eps * eps * alpha_gram.trace();
    let norm_term = eps * (&k_px * &alpha_gram).trace();
    Ok(residual_term + norm_term)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::project_columns_to_simplex;

    fn real_ctx(x: DMatrix<f64>, y: &[f64], sigma: f64, eps: f64) -> ObjectiveContext {
        ObjectiveContext::from_real_responses(x, y, sigma, eps).unwrap()
    }

    #[test]
    fn zero_response_gives_zero() {
        let x = DMatrix::from_row_slice(3, 3, &[0.2, 0.3, 0.5, 0.6, 0.2, 0.2, 0.1, 0.1, 0.8]);
        let ctx = real_ctx(x, &[1.5, 1.5, 1.5], 0.5, 0.01);
        let p = CdrMatrix::from_row_slice(2, 3, &[0.3, 0.9, 0.1, 0.7, 0.1, 0.9]).unwrap();
        assert_eq!(trace_objective(&p, &ctx).unwrap(), 0.0);
        assert!(trace_gradient(&p, &ctx).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_point_closed_form() {
        let x = DMatrix::from_row_slice(2, 3, &[0.2, 0.3, 0.5, 0.7, 0.1, 0.2]);
        let y = [1.0, -2.0];
        let (sigma, eps) = (0.4, 0.05);
        let ctx = real_ctx(x.clone(), &y, sigma, eps);
        let p = CdrMatrix::from_row_slice(2, 3, &[0.1, 0.8, 0.5, 0.9, 0.2, 0.5]).unwrap();
        let z = &x * p.entries().transpose();
        let dist2 = (z.row(0) - z.row(1)).norm_squared();
        let c = 1.0 - (-dist2 / (2.0 * sigma * sigma)).exp();
        // G_PX = c·[[.5, −.5], [−.5, .5]], G_Y = (Δ²/4)·[[1, −1], [−1, 1]]
        let delta = y[0] - y[1];
        let gy = delta * delta / 4.0;
        let (a, b) = (0.5 * c + 2.0 * eps, -0.5 * c);
        let det = a * a - b * b;
        let inv = [[a / det, -b / det], [-b / det, a / det]];
        let tr = inv[0][0] * gy - inv[0][1] * gy - inv[1][0] * gy + inv[1][1] * gy;
        let expected = eps * tr;
        let got = trace_objective(&p, &ctx).unwrap();
        assert!((got - expected).abs() < 1e-12 * expected.abs().max(1.0), "{got} vs {expected}");
    }

    #[test]
    fn identical_inputs_give_zero_gradient() {
        let x = DMatrix::from_row_slice(2, 3, &[0.2, 0.3, 0.5, 0.2, 0.3, 0.5]);
        let ctx = real_ctx(x, &[1.0, -1.0], 0.3, 0.01);
        let p = CdrMatrix::from_row_slice(2, 3, &[0.1, 0.8, 0.5, 0.9, 0.2, 0.5]).unwrap();
        assert!(trace_gradient(&p, &ctx).unwrap().amax() == 0.0);
    }

    #[test]
    fn constant_projection_krr_hand_value() {
        // m = 1: P is the all-ones row, every projection equals 1
        let x = DMatrix::from_row_slice(3, 3, &[0.2, 0.3, 0.5, 0.6, 0.2, 0.2, 0.1, 0.1, 0.8]);
        let y = [-1.0, -1.0, 1.0];
        let eps = 0.01;
        let ctx = real_ctx(x, &y, 0.5, eps);
        let p = CdrMatrix::new(DMatrix::from_element(1, 3, 1.0)).unwrap();
        let yy = DMatrix::from_column_slice(3, 1, &y);
        let k_y = kernels::gram(&KernelSpec::Linear, &yy).unwrap();
        let tr_gy = ctx.g_y().values().trace();
        let expected = tr_gy / 3.0;
        let krr = krr_equivalent_loss(&p, &ctx, &k_y).unwrap();
        let obj = trace_objective(&p, &ctx).unwrap();
        assert!((krr - expected).abs() < 1e-12);
        assert!((obj - expected).abs() < 1e-12);
    }

    #[test]
    fn general_gram_path_matches_linear_factor() {
        let x = DMatrix::from_fn(6, 4, |i, j| ((i * 3 + j * 5) % 7) as f64 + 1.0);
        let x = DMatrix::from_fn(6, 4, |i, j| x[(i, j)] / x.row(i).sum());
        let y = [0.3, -1.2, 2.0, 0.1, 0.7, -0.4];
        let fast = real_ctx(x.clone(), &y, 0.3, 0.02);
        let yy = DMatrix::from_column_slice(6, 1, &y);
        let gy = kernels::center_gram(&kernels::gram(&KernelSpec::Linear, &yy).unwrap()).unwrap();
        let general = ObjectiveContext::new(x, gy, 0.3, 0.02).unwrap();
        let p = project_columns_to_simplex(&DMatrix::from_fn(2, 4, |i, j| (i + 2 * j) as f64 * 0.3)).unwrap();
        let a = trace_objective(&p, &fast).unwrap();
        let b = trace_objective(&p, &general).unwrap();
        assert!((a - b).abs() < 1e-12 * a.max(1.0));
    }

    #[test]
    fn context_validation() {
        let x = DMatrix::from_element(3, 3, 1.0 / 3.0);
        assert!(ObjectiveContext::from_real_responses(x.clone(), &[1.0, 2.0], 1.0, 0.1).is_err());
        assert!(ObjectiveContext::from_real_responses(x.clone(), &[1.0, 2.0, 3.0], 1.0, 0.0).is_err());
        assert!(ObjectiveContext::from_real_responses(x.clone(), &[1.0, 2.0, 3.0], -1.0, 0.1).is_err());
        let unc = GramMatrix::from_matrix(DMatrix::identity(3, 3), false).unwrap();
        assert!(ObjectiveContext::new(x, unc, 1.0, 0.1).is_err());
    }
}
