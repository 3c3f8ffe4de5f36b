//! Kernels, Gram matrices and the median-distance bandwidth heuristic.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Gaussian `exp(−‖z−z′‖²/2σ²)` or linear `⟨y, y′⟩` kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Gaussian { sigma: f64 },
    Linear,
}

impl KernelSpec {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::NonPositiveBandwidth(sigma));
        }
        Ok(KernelSpec::Gaussian { sigma })
    }

    pub fn sigma(&self) -> Option<f64> {
        match self {
            KernelSpec::Gaussian { sigma } => Some(*sigma),
            KernelSpec::Linear => None,
        }
    }

    fn check(&self) -> Result<()> {
        match *self {
            KernelSpec::Gaussian { sigma } if !(sigma > 0.0) || !sigma.is_finite() => {
                Err(Error::NonPositiveBandwidth(sigma))
            }
            _ => Ok(()),
        }
    }

    /// Evaluates the kernel on two points of equal length.
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::Gaussian { sigma } => {
                let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-sq / (2.0 * sigma * sigma)).exp()
            }
            KernelSpec::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        }
    }
}

/// A symmetric kernel matrix, flagged when double-centered.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    values: DMatrix<f64>,
    centered: bool,
}

impl GramMatrix {
    /// Wraps a symmetric matrix; symmetry is checked to 1e-12.
    pub fn from_matrix(values: DMatrix<f64>, centered: bool) -> Result<Self> {
        if !values.is_square() {
            return Err(Error::DimensionMismatch {
                expected: values.nrows(),
                found: values.ncols(),
            });
        }
        let n = values.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                if (values[(i, j)] - values[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidConfig(format!("gram matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(GramMatrix { values, centered })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }
}

/// Gram matrix of the rows of `points`. Only the upper triangle is evaluated,
/// the lower one is mirrored.
pub fn gram(spec: &KernelSpec, points: &DMatrix<f64>) -> Result<GramMatrix> {
    spec.check()?;
    let n = points.nrows();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(GramMatrix {
        values: gram_values(spec, points),
        centered: false,
    })
}

/// Builds a Gram matrix from a list of equal-length points.
pub fn gram_from_points(spec: &KernelSpec, points: &[Vec<f64>]) -> Result<GramMatrix> {
    let first = points.first().ok_or(Error::EmptyInput)?;
    let p = first.len();
    if let Some(bad) = points.iter().find(|v| v.len() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: bad.len(),
        });
    }
    let mat = DMatrix::from_fn(points.len(), p, |i, j| points[i][j]);
    gram(spec, &mat)
}

pub(crate) fn gram_values(spec: &KernelSpec, points: &DMatrix<f64>) -> DMatrix<f64> {
    let n = points.nrows();
    let p = points.ncols();
    // row-major copy for contiguous access
    let rows: Vec<f64> = (0..n).flat_map(|i| (0..p).map(move |j| (i, j))).map(|(i, j)| points[(i, j)]).collect();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        let a = &rows[i * p..(i + 1) * p];
        for j in i..n {
            let b = &rows[j * p..(j + 1) * p];
            let v = if i == j {
                match spec {
                    KernelSpec::Gaussian { .. } => 1.0,
                    KernelSpec::Linear => spec.eval(a, a),
                }
            } else {
                spec.eval(a, b)
            };
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Kernel evaluations between each row of `points` and `query`.
pub fn kernel_vector(spec: &KernelSpec, points: &DMatrix<f64>, query: &[f64]) -> Vec<f64> {
    let p = points.ncols();
    let mut row = vec![0.0; p];
    (0..points.nrows())
        .map(|i| {
            for (j, r) in row.iter_mut().enumerate() {
                *r = points[(i, j)];
            }
            spec.eval(&row, query)
        })
        .collect()
}

/// Double-centers an uncentered Gram matrix: `G = H K H`.
pub fn center_gram(k: &GramMatrix) -> Result<GramMatrix> {
    if k.centered {
        return Err(Error::AlreadyCentered);
    }
    let mut g = linalg::double_center(&k.values);
    // restore exact symmetry lost to summation order
    let n = g.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (g[(i, j)] + g[(j, i)]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(GramMatrix {
        values: g,
        centered: true,
    })
}

/// Median of the pairwise Euclidean distances between rows of `x`; the mean
/// of the two central order statistics when the pair count is even.
pub fn median_heuristic(x: &DMatrix<f64>) -> Result<f64> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::TooFewSamples(format!("median heuristic needs 2 points, got {n}")));
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let sq: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dists.push(sq.sqrt());
        }
    }
    if dists.iter().all(|&v| v == 0.0) {
        return Err(Error::AllPointsIdentical);
    }
    dists.sort_by(f64::total_cmp);
    let len = dists.len();
    let median = if len % 2 == 1 {
        dists[len / 2]
    } else {
        0.5 * (dists[len / 2 - 1] + dists[len / 2])
    };
    if median <= 0.0 {
        return Err(Error::AllPointsIdentical);
    }
    Ok(median)
}
