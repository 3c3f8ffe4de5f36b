//! Kernel ridge regression with intercept on the reduced simplex.
//!
//! For a query `x′` with reduced point `z′ = Px′` the fitted predictor acts
//! through the weight vector
//!
//! ```text
//! v(x′) = V k̃(z′) + (1/n) 1,    k̃(z′) = (k(z_i, z′))_i − (1/n) K 1,
//! ```
//!
//! where `V = H (G + nεI)⁻¹` is precomputed. `v` always sums to one, and the
//! intercept is carried implicitly by its `(1/n) 1` part.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::{self, Num};
use crate::kernels::{gram_values, kernel_vector, KernelSpec};
use crate::linalg;
use crate::simplex::CdrMatrix;

/// Version tag of the serialized model document.
pub const MODEL_VERSION: u64 = 1;

/// Training responses: real values under the linear kernel, or an arbitrary
/// uncentered response Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Responses {
    Real(Vec<f64>),
    Gram(DMatrix<f64>),
}

impl Responses {
    pub fn n(&self) -> usize {
        match self {
            Responses::Real(y) => y.len(),
            Responses::Gram(k) => k.nrows(),
        }
    }

    /// Uncentered `K_Y`.
    pub fn gram(&self) -> DMatrix<f64> {
        match self {
            Responses::Real(y) => {
                let y = DVector::from_column_slice(y);
                &y * y.transpose()
            }
            Responses::Gram(k) => k.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Responses::Real(y) => {
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteInput);
                }
            }
            Responses::Gram(k) => {
                if k.nrows() != k.ncols() {
                    return Err(Error::DimensionMismatch { expected: k.nrows(), found: k.ncols() });
                }
                if !linalg::is_finite(k) {
                    return Err(Error::NonFiniteInput);
                }
            }
        }
        Ok(())
    }
}

/// A fitted intrinsic predictor. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    p_hat: CdrMatrix,
    kernel_z: KernelSpec,
    epsilon: f64,
    train_projections: DMatrix<f64>,
    dual_weights: DMatrix<f64>,
    gram_means: DVector<f64>,
    responses: Responses,
    /// Seed of the fit that produced `p_hat`, if recorded.
    pub seed: Option<u64>,
    /// Trace objective at `p_hat`, if recorded.
    pub objective: Option<f64>,
}

/// Fits the dual weights for reduction `p` on training compositions `x`.
pub fn fit_dual(
    p: &CdrMatrix,
    x: &DMatrix<f64>,
    responses: Responses,
    kernel_z: KernelSpec,
    epsilon: f64,
) -> Result<FittedModel> {
    let z = p.project_rows(x)?;
    FittedModel::from_projections(p.clone(), z, responses, kernel_z, epsilon)
}

impl FittedModel {
    /// Builds the model from already reduced training points (rows of `z`).
    pub fn from_projections(
        p_hat: CdrMatrix,
        z: DMatrix<f64>,
        responses: Responses,
        kernel_z: KernelSpec,
        epsilon: f64,
    ) -> Result<Self> {
        let n = z.nrows();
        if n < 2 {
            return Err(Error::TooFewSamples(format!("the predictor needs n ≥ 2, got {n}")));
        }
        if z.ncols() != p_hat.m() {
            return Err(Error::DimensionMismatch { expected: p_hat.m(), found: z.ncols() });
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
        }
        if responses.n() != n {
            return Err(Error::LengthMismatch(n, responses.n()));
        }
        responses.validate()?;
        if !linalg::is_finite(&z) {
            return Err(Error::NonFiniteInput);
        }
        let k = gram_values(&kernel_z, &z);
        let mut shifted = linalg::double_center(&k);
        for i in 0..n {
            shifted[(i, i)] += n as f64 * epsilon;
        }
        let inv = linalg::cholesky(shifted)?.inverse();
        // H A H equals H A because A commutes with H and H is idempotent
        let v = linalg::double_center(&inv);
        let dual_weights = (&v + v.transpose()) * 0.5;
        Ok(FittedModel {
            p_hat,
            kernel_z,
            epsilon,
            train_projections: z,
            dual_weights,
            gram_means: DVector::from_iterator(n, k.row_iter().map(|r| r.mean())),
            responses,
            seed: None,
            objective: None,
        })
    }

    pub fn p_hat(&self) -> &CdrMatrix {
        &self.p_hat
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel_z
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n(&self) -> usize {
        self.train_projections.nrows()
    }

    pub fn m(&self) -> usize {
        self.p_hat.m()
    }

    pub fn d(&self) -> usize {
        self.p_hat.d()
    }

    /// Rows are the reduced training points `Px_i`.
    pub fn train_projections(&self) -> &DMatrix<f64> {
        &self.train_projections
    }

    /// `V = H (G + nεI)⁻¹`.
    pub fn dual_weights(&self) -> &DMatrix<f64> {
        &self.dual_weights
    }

    pub fn responses(&self) -> &Responses {
        &self.responses
    }

    /// Reduced point `Px` of a composition.
    pub fn project(&self, x_new: &[f64]) -> Result<Vec<f64>> {
        if x_new.len() != self.d() {
            return Err(Error::DimensionMismatch { expected: self.d(), found: x_new.len() });
        }
        if x_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        let p = self.p_hat.entries();
        Ok((0..self.m()).map(|a| (0..self.d()).map(|j| p[(a, j)] * x_new[j]).sum()).collect())
    }

    /// `v(x′)` for a composition `x′`.
    pub fn weights(&self, x_new: &[f64]) -> Result<DVector<f64>> {
        let z = self.project(x_new)?;
        self.weights_at(&z)
    }

    /// `v` for a point `z′` of the reduced simplex.
    pub fn weights_at(&self, z_new: &[f64]) -> Result<DVector<f64>> {
        if z_new.len() != self.m() {
            return Err(Error::DimensionMismatch { expected: self.m(), found: z_new.len() });
        }
        let n = self.n();
        let k = DVector::from_vec(kernel_vector(&self.kernel_z, &self.train_projections, z_new));
        let tilde = k - &self.gram_means;
        let mut v = &self.dual_weights * tilde;
        v.add_scalar_mut(1.0 / n as f64);
        Ok(v)
    }

    fn real_responses(&self) -> Result<&[f64]> {
        match &self.responses {
            Responses::Real(y) => Ok(y),
            Responses::Gram(_) => Err(Error::WrongResponseKernel),
        }
    }

    /// `ŷ = yᵀ v(x′)`.
    pub fn predict_real(&self, x_new: &[f64]) -> Result<f64> {
        let y = self.real_responses()?;
        let v = self.weights(x_new)?;
        Ok(y.iter().zip(v.iter()).map(|(a, b)| a * b).sum())
    }

    /// `ŷ` at a point of the reduced simplex.
    pub fn predict_real_at(&self, z_new: &[f64]) -> Result<f64> {
        let y = self.real_responses()?;
        let v = self.weights_at(z_new)?;
        Ok(y.iter().zip(v.iter()).map(|(a, b)| a * b).sum())
    }

    /// `sign(ŷ)` with `sign(0) = +1`.
    pub fn predict_class(&self, x_new: &[f64]) -> Result<i8> {
        Ok(class_of(self.predict_real(x_new)?))
    }

    /// Squared response-space error `k(y′,y′) − 2 k_{y′}ᵀ v + vᵀ K_Y v` before
    /// clamping. `k_y_new[i] = k_Y(y_i, y′)`, `k_y_self = k_Y(y′, y′)`.
    pub fn kernel_error_unclamped(&self, x_new: &[f64], k_y_new: &[f64], k_y_self: f64) -> Result<f64> {
        let n = self.n();
        if k_y_new.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: k_y_new.len() });
        }
        let v = self.weights(x_new)?;
        let cross: f64 = k_y_new.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        let quad = match &self.responses {
            Responses::Real(y) => {
                let s: f64 = y.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                s * s
            }
            Responses::Gram(k) => v.dot(&(k * &v)),
        };
        Ok(k_y_self - 2.0 * cross + quad)
    }

    /// Out-of-sample error for an arbitrary response kernel, clamped at 0.
    pub fn kernel_error(&self, x_new: &[f64], k_y_new: &[f64], k_y_self: f64) -> Result<f64> {
        Ok(self.kernel_error_unclamped(x_new, k_y_new, k_y_self)?.max(0.0))
    }

    /// Out-of-sample error of a real response under the linear kernel.
    pub fn out_of_sample_error(&self, x_new: &[f64], y_new: f64) -> Result<f64> {
        let y = self.real_responses()?;
        let k_y_new: Vec<f64> = y.iter().map(|yi| yi * y_new).collect();
        self.kernel_error(x_new, &k_y_new, y_new * y_new)
    }

    /// `‖F̂‖² = Tr(K V K_Y Vᵀ)`, the squared norm of the centered predictor.
    pub fn regularizer_norm(&self) -> f64 {
        let k = gram_values(&self.kernel_z, &self.train_projections);
        match &self.responses {
            Responses::Real(y) => {
                let w = &self.dual_weights * DVector::from_column_slice(y);
                w.dot(&(&k * &w))
            }
            Responses::Gram(k_y) => {
                let kv = &k * &self.dual_weights;
                let ykv = k_y * self.dual_weights.transpose();
                kv.component_mul(&ykv.transpose()).sum()
            }
        }
    }

    /// Serializes to the versioned JSON model document.
    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDoc {
            version: MODEL_VERSION,
            m: self.m(),
            d: self.d(),
            p: json::matrix_rows(self.p_hat.entries()),
            kernel: KernelDoc::from(self.kernel_z),
            epsilon: Num(self.epsilon),
            train_projections: json::matrix_rows(&self.train_projections),
            dual_weights: json::matrix_rows(&self.dual_weights),
            responses: match &self.responses {
                Responses::Real(y) => ResponsesDoc { kind: "real".into(), values: Some(json::nums(y)), gram: None },
                Responses::Gram(k) => ResponsesDoc { kind: "gram".into(), values: None, gram: Some(json::matrix_rows(k)) },
            },
            seed: self.seed,
            objective: self.objective.map(Num),
        };
        serde_json::to_string_pretty(&doc).map_err(|e| Error::Format(e.to_string()))
    }

    /// Restores a model from its JSON document. Stored dual weights are used
    /// as written.
    pub fn from_json(text: &str) -> Result<Self> {
        json::check_version(text, MODEL_VERSION)?;
        let doc: ModelDoc = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        let p_hat = CdrMatrix::new(json::rows_matrix(&doc.p, doc.m, doc.d, "P")?)?;
        let n = doc.train_projections.len();
        if n < 2 {
            return Err(Error::TooFewSamples(format!("the predictor needs n ≥ 2, got {n}")));
        }
        let kernel_z = doc.kernel.into_spec()?;
        let train_projections = json::rows_matrix(&doc.train_projections, n, doc.m, "train_projections")?;
        let dual_weights = json::rows_matrix(&doc.dual_weights, n, n, "dual_weights")?;
        let responses = match (doc.responses.kind.as_str(), &doc.responses.values, &doc.responses.gram) {
            ("real", Some(values), None) => Responses::Real(json::values(values)),
            ("gram", None, Some(rows)) => Responses::Gram(json::rows_matrix(rows, n, n, "responses")?),
            (kind, _, _) => return Err(Error::Format(format!("malformed responses of kind {kind:?}"))),
        };
        if responses.n() != n {
            return Err(Error::LengthMismatch(n, responses.n()));
        }
        if !(doc.epsilon.0 > 0.0) {
            return Err(Error::InvalidConfig(format!("epsilon must be positive, got {}", doc.epsilon.0)));
        }
        let k = gram_values(&kernel_z, &train_projections);
        let gram_means = DVector::from_iterator(n, k.row_iter().map(|r| r.mean()));
        Ok(FittedModel {
            p_hat,
            kernel_z,
            epsilon: doc.epsilon.0,
            train_projections,
            dual_weights,
            gram_means,
            responses,
            seed: doc.seed,
            objective: doc.objective.map(|o| o.0),
        })
    }
}

/// `sign(ŷ)` with ties sent to `+1`.
pub fn class_of(y_hat: f64) -> i8 {
    if y_hat >= 0.0 {
        1
    } else {
        -1
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    version: u64,
    m: usize,
    d: usize,
    #[serde(rename = "P")]
    p: Vec<Vec<Num>>,
    kernel: KernelDoc,
    epsilon: Num,
    train_projections: Vec<Vec<Num>>,
    dual_weights: Vec<Vec<Num>>,
    responses: ResponsesDoc,
    seed: Option<u64>,
    objective: Option<Num>,
}

#[derive(Serialize, Deserialize)]
struct KernelDoc {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<Num>,
}

impl From<KernelSpec> for KernelDoc {
    fn from(spec: KernelSpec) -> Self {
        match spec {
            KernelSpec::Gaussian { sigma } => KernelDoc { kind: "gaussian".into(), sigma: Some(Num(sigma)) },
            KernelSpec::Linear => KernelDoc { kind: "linear".into(), sigma: None },
        }
    }
}

impl KernelDoc {
    fn into_spec(self) -> Result<KernelSpec> {
        match (self.kind.as_str(), self.sigma) {
            ("gaussian", Some(s)) => KernelSpec::gaussian(s.0),
            ("linear", None) => Ok(KernelSpec::Linear),
            (kind, _) => Err(Error::Format(format!("unknown kernel {kind:?}"))),
        }
    }
}

// a plain struct rather than a tagged enum: buffered enum content loses the
// exact number representation
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResponsesDoc {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<Num>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gram: Option<Vec<Vec<Num>>>,
}
