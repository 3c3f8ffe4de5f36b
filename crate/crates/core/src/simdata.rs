//! Synthetic compositional data with known sufficient amalgamations.
//!
//! Compositions are softmax images of `N(0, Σ)` draws with an AR(1)
//! covariance `Σ_ij = ρ^{|i−j|}`, with the smallest entries of every sample
//! set to zero before renormalizing. Responses depend on the data only
//! through three amalgamated parts `Z₁, Z₂, Z₃` covering 20%, 30% and 50% of
//! the variables.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Subspace;
use crate::rng;
use crate::simplex::{CdrMatrix, Partition};

/// The four response models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    /// `Y = −5Z₁ + 4Z₃ + sε`
    I,
    /// `Y = 3cos(Z₁) + Z₃²/(Z₂ + 0.01) + sε`
    Ii,
    /// `Y = sign(5Z₂ − 3Z₃ + sε)`
    Iii,
    /// `Y = sign(3Z₁² + 4Z₂² − 2Z₃² + sε)`
    Iv,
}

impl Setting {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "i" | "1" => Some(Setting::I),
            "ii" | "2" => Some(Setting::Ii),
            "iii" | "3" => Some(Setting::Iii),
            "iv" | "4" => Some(Setting::Iv),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Setting::I => "i",
            Setting::Ii => "ii",
            Setting::Iii => "iii",
            Setting::Iv => "iv",
        }
    }

    pub fn is_binary(&self) -> bool {
        matches!(self, Setting::Iii | Setting::Iv)
    }

    /// Dimension of the central subspace.
    pub fn true_dim(&self) -> usize {
        match self {
            Setting::I | Setting::Iii => 2,
            Setting::Ii | Setting::Iv => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub setting: Setting,
    pub n: usize,
    pub d: usize,
    pub ar_rho: f64,
    pub trunc_frac: f64,
    pub noise_scale: f64,
    pub seed: u64,
}

impl SimSpec {
    pub fn new(setting: Setting, n: usize, seed: u64) -> Self {
        SimSpec {
            setting,
            n,
            d: 100,
            ar_rho: 0.2,
            trunc_frac: 0.5,
            noise_scale: 0.1,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        if self.d < 3 {
            return Err(Error::DimensionTooSmall(self.d));
        }
        if !(0.0..1.0).contains(&self.trunc_frac) {
            return Err(Error::InvalidConfig("trunc_frac must lie in [0, 1)".into()));
        }
        if !(self.ar_rho.abs() < 1.0) {
            return Err(Error::InvalidConfig("ar_rho must lie in (−1, 1)".into()));
        }
        Ok(())
    }

    /// Number of entries zeroed in every sample.
    pub fn zeros_per_row(&self) -> usize {
        (self.trunc_frac * self.d as f64).floor() as usize
    }
}

/// A simulated data set with its ground truth.
#[derive(Debug, Clone)]
pub struct SimData {
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub truth: Subspace,
    pub blocks: Partition,
}

/// Block boundaries: ends of `Z₁` and `Z₂` (exclusive), 20% and 50% of `d`.
pub fn block_bounds(d: usize) -> Result<(usize, usize)> {
    if d < 3 {
        return Err(Error::DimensionTooSmall(d));
    }
    let first = ((0.2 * d as f64).round() as usize).clamp(1, d - 2);
    let second = ((0.5 * d as f64).round() as usize).clamp(first + 1, d - 1);
    Ok((first, second))
}

/// The three amalgamation blocks.
pub fn true_blocks(d: usize) -> Result<Partition> {
    let (a, b) = block_bounds(d)?;
    Partition::new(vec![(0..a).collect(), (a..b).collect(), (b..d).collect()], d)
}

/// Draws `n` compositions row by row; row `i` uses its own random stream.
pub fn sample_compositions(spec: &SimSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let d = spec.d;
    let cov = DMatrix::from_fn(d, d, |i, j| spec.ar_rho.powi((i as i32 - j as i32).abs()));
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::SolveFailure("AR(1) covariance is not positive definite".into()))?;
    let l = chol.l();
    let zeros = spec.zeros_per_row();
    let mut x = DMatrix::zeros(spec.n, d);
    for i in 0..spec.n {
        let mut rng = rng::stream(spec.seed, rng::domain::SAMPLE_ROW, i as u64);
        let normal = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let w = &l * normal;
        let row = truncated_softmax(w.as_slice(), zeros);
        x.set_row(i, &DVector::from_vec(row).transpose());
    }
    Ok(x)
}

fn truncated_softmax(w: &[f64], zeros: usize) -> Vec<f64> {
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut x: Vec<f64> = w.iter().map(|v| (v - max).exp()).collect();
    let mut order: Vec<usize> = (0..x.len()).collect();
    // ascending by value, lower index first among ties
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    for &j in order.iter().take(zeros) {
        x[j] = 0.0;
    }
    let total: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= total);
    x
}

/// Amalgamated parts `(Z₁, Z₂, Z₃)` of one composition.
pub fn amalgamated_parts(row: &[f64]) -> Result<[f64; 3]> {
    let (a, b) = block_bounds(row.len())?;
    Ok([
        row[..a].iter().sum(),
        row[a..b].iter().sum(),
        row[b..].iter().sum(),
    ])
}

/// Noise-free response ("signal" plus `noise`) of a setting at parts `z`.
pub fn response_value(setting: Setting, z: [f64; 3], noise: f64) -> f64 {
    let [z1, z2, z3] = z;
    let sign = |v: f64| if v >= 0.0 { 1.0 } else { -1.0 };
    match setting {
        Setting::I => -5.0 * z1 + 4.0 * z3 + noise,
        Setting::Ii => 3.0 * z1.cos() + z3 * z3 / (z2 + 0.01) + noise,
        Setting::Iii => sign(5.0 * z2 - 3.0 * z3 + noise),
        Setting::Iv => sign(3.0 * z1 * z1 + 4.0 * z2 * z2 - 2.0 * z3 * z3 + noise),
    }
}

/// Responses for every row of `x`, with `noise_scale · N(0, 1)` noise drawn
/// from a per-row stream.
pub fn generate_responses(x: &DMatrix<f64>, spec: &SimSpec) -> Result<Vec<f64>> {
    let d = x.ncols();
    block_bounds(d)?;
    let mut out = Vec::with_capacity(x.nrows());
    let mut row = vec![0.0; d];
    for i in 0..x.nrows() {
        for (j, r) in row.iter_mut().enumerate() {
            *r = x[(i, j)];
        }
        let mut rng = rng::stream(spec.seed, rng::domain::RESPONSE_NOISE, i as u64);
        let eps: f64 = rng.sample(StandardNormal);
        out.push(response_value(spec.setting, amalgamated_parts(&row)?, spec.noise_scale * eps));
    }
    Ok(out)
}

/// Per-variable coefficients of the linear index in settings (i) and (iii).
pub fn linear_coefficients(setting: Setting, d: usize) -> Result<Option<Vec<f64>>> {
    let coef = match setting {
        Setting::I => [-5.0, 0.0, 4.0],
        Setting::Iii => [0.0, 5.0, -3.0],
        _ => return Ok(None),
    };
    let labels = true_blocks(d)?.labels();
    Ok(Some(labels.into_iter().map(|b| coef[b]).collect()))
}

/// The central subspace of a setting.
pub fn true_subspace(setting: Setting, d: usize) -> Result<Subspace> {
    let ones = vec![1.0; d];
    let rows: Vec<Vec<f64>> = match linear_coefficients(setting, d)? {
        Some(beta) => vec![ones, beta],
        None => {
            let labels = true_blocks(d)?.labels();
            let indicator = |b: usize| labels.iter().map(|&l| if l == b { 1.0 } else { 0.0 }).collect();
            vec![ones, indicator(0), indicator(1)]
        }
    };
    let basis = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
    Subspace::new(&basis)
}

/// Two-row CDR matrix whose column `j` places `x_j` between the two target
/// parts in proportion to where `β_j` sits in `[β_min, β_max]`.
pub fn relative_shift_cdr(beta: &[f64]) -> Result<CdrMatrix> {
    if beta.is_empty() {
        return Err(Error::EmptyInput);
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let lo = beta.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = beta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::ConstantBeta);
    }
    let d = beta.len();
    let span = hi - lo;
    let mut entries = DMatrix::zeros(2, d);
    for (j, &b) in beta.iter().enumerate() {
        let upper = (b - lo) / span;
        entries[(0, j)] = (hi - b) / span;
        entries[(1, j)] = upper;
    }
    CdrMatrix::new(entries)
}

/// Samples compositions and responses and attaches the ground truth.
pub fn simulate(spec: &SimSpec) -> Result<SimData> {
    let x = sample_compositions(spec)?;
    let y = generate_responses(&x, spec)?;
    Ok(SimData {
        x,
        y,
        truth: true_subspace(spec.setting, spec.d)?,
        blocks: true_blocks(spec.d)?,
    })
}
