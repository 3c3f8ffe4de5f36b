//! Compositional primitives.
//!
//! A [`Composition`] is a point of the probability simplex, a [`CdrMatrix`]
//! is an `m × d` column-stochastic matrix mapping the `(d-1)`-simplex into
//! the `(m-1)`-simplex, and a [`Partition`] groups the `d` parts into
//! disjoint blocks (an amalgamation). Indices are zero-based throughout.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Absolute tolerance on the unit-sum constraint.
pub const SUM_TOL: f64 = 1e-9;
/// Relative tolerance for subspace membership tests.
pub const SUBSPACE_TOL: f64 = 1e-8;

/// A nonnegative vector summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Composition(DVector<f64>);

impl Composition {
    pub fn values(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

/// Checks that `v` lies on the simplex. With `normalize`, a nonnegative
/// vector with positive sum is rescaled to unit sum first.
pub fn validate_composition(v: &[f64], tol: f64, normalize: bool) -> Result<Composition> {
    if v.len() < 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    if let Some((index, &value)) = v.iter().enumerate().find(|(_, &x)| x < -tol) {
        return Err(Error::NegativeEntry { index, value });
    }
    let sum: f64 = v.iter().sum();
    if normalize {
        if sum <= 0.0 {
            return Err(Error::ZeroVector { sum });
        }
        return Ok(Composition(DVector::from_iterator(
            v.len(),
            v.iter().map(|x| x.max(0.0) / sum),
        )));
    }
    if (sum - 1.0).abs() > tol {
        return Err(Error::NotNormalized { sum });
    }
    Ok(Composition(DVector::from_column_slice(v)))
}

/// Euclidean projection onto the probability simplex (sort and threshold).
///
/// Returns `argmin_{z ∈ Δ} ‖z − v‖²`. Inputs already on the simplex (to
/// within a few ulps of the unit sum) are returned unchanged, which makes
/// the projection exactly idempotent.
pub fn project_vector_to_simplex(v: &[f64]) -> Result<Composition> {
    let m = v.len();
    if m == 0 {
        return Err(Error::EmptyInput);
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let sum: f64 = v.iter().sum();
    let fixed_tol = 4.0 * m as f64 * f64::EPSILON;
    if v.iter().all(|&x| x >= 0.0) && (sum - 1.0).abs() <= fixed_tol {
        return Ok(Composition(DVector::from_column_slice(v)));
    }

    // descending by value, ties by original index
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));

    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (rank, &idx) in order.iter().enumerate() {
        cumsum += v[idx];
        let candidate = (cumsum - 1.0) / (rank + 1) as f64;
        if v[idx] - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    Ok(Composition(DVector::from_iterator(
        m,
        v.iter().map(|&x| (x - theta).max(0.0)),
    )))
}

/// A column-stochastic `m × d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CdrMatrix {
    entries: DMatrix<f64>,
}

impl CdrMatrix {
    /// Validates entries in `[0, 1]`, unit column sums and `m ≤ d`.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let (m, d) = entries.shape();
        if m == 0 || d == 0 {
            return Err(Error::EmptyInput);
        }
        if m > d {
            return Err(Error::InvalidConfig(format!(
                "target dimension {m} exceeds source dimension {d}"
            )));
        }
        if !linalg::is_finite(&entries) {
            return Err(Error::NonFiniteInput);
        }
        for j in 0..d {
            let col = entries.column(j);
            for (i, &p) in col.iter().enumerate() {
                if p < -SUM_TOL {
                    return Err(Error::NegativeEntry {
                        index: i * d + j,
                        value: p,
                    });
                }
                if p > 1.0 + SUM_TOL {
                    return Err(Error::InvalidConfig(format!(
                        "entry ({i}, {j}) = {p} exceeds 1"
                    )));
                }
            }
            let sum = col.sum();
            if (sum - 1.0).abs() > SUM_TOL {
                return Err(Error::NotNormalized { sum });
            }
        }
        Ok(CdrMatrix { entries })
    }

    pub(crate) fn new_unchecked(entries: DMatrix<f64>) -> Self {
        CdrMatrix { entries }
    }

    /// Builds from row-major data.
    pub fn from_row_slice(m: usize, d: usize, data: &[f64]) -> Result<Self> {
        if data.len() != m * d {
            return Err(Error::DimensionMismatch {
                expected: m * d,
                found: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(m, d, data))
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.entries
    }

    /// Target dimension.
    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    /// Source dimension.
    pub fn d(&self) -> usize {
        self.entries.ncols()
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        let (m, d) = self.entries.shape();
        let mut out = Vec::with_capacity(m * d);
        for i in 0..m {
            for j in 0..d {
                out.push(self.entries[(i, j)]);
            }
        }
        out
    }

    /// Applies the reduction to every row of an `n × d` data matrix, giving
    /// the `n × m` matrix of reduced compositions.
    pub fn project_rows(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                found: x.ncols(),
            });
        }
        Ok(x * self.entries.transpose())
    }

    /// Reorders the rows by `perm`: row `i` of the result is row `perm[i]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Result<Self> {
        let m = self.m();
        let mut seen = vec![false; m];
        if perm.len() != m || perm.iter().any(|&p| p >= m || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidConfig("not a permutation".into()));
        }
        Ok(CdrMatrix {
            entries: DMatrix::from_fn(m, self.d(), |i, j| self.entries[(perm[i], j)]),
        })
    }
}

/// Projects every column of `mat` onto the simplex.
pub fn project_columns_to_simplex(mat: &DMatrix<f64>) -> Result<CdrMatrix> {
    let (m, d) = mat.shape();
    if m == 0 || d == 0 {
        return Err(Error::EmptyInput);
    }
    let mut out = DMatrix::zeros(m, d);
    for j in 0..d {
        let col: Vec<f64> = mat.column(j).iter().copied().collect();
        let projected = project_vector_to_simplex(&col)?;
        out.set_column(j, projected.values());
    }
    Ok(CdrMatrix::new_unchecked(out))
}

/// Computes `z = P x`, a composition of length `m`.
pub fn apply_cdr(p: &CdrMatrix, x: &Composition) -> Result<Composition> {
    if x.len() != p.d() {
        return Err(Error::DimensionMismatch {
            expected: p.d(),
            found: x.len(),
        });
    }
    Ok(Composition(p.entries() * x.values()))
}

/// Disjoint blocks of indices covering `0..d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    /// Validates the blocks; each block is sorted and blocks are ordered by
    /// their smallest element.
    pub fn new(blocks: Vec<Vec<usize>>, d: usize) -> Result<Self> {
        let mut seen = vec![false; d];
        let mut blocks = blocks;
        for block in &mut blocks {
            if block.is_empty() {
                return Err(Error::InvalidPartition("empty block".into()));
            }
            block.sort_unstable();
            for &j in block.iter() {
                if j >= d {
                    return Err(Error::InvalidPartition(format!("index {j} out of range 0..{d}")));
                }
                if seen[j] {
                    return Err(Error::InvalidPartition(format!("index {j} appears twice")));
                }
                seen[j] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!("index {missing} not covered")));
        }
        blocks.sort_by_key(|b| b[0]);
        Ok(Partition { blocks })
    }

    /// Partition from per-index block labels.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut order: Vec<usize> = Vec::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for (j, &l) in labels.iter().enumerate() {
            match order.iter().position(|&o| o == l) {
                Some(b) => blocks[b].push(j),
                None => {
                    order.push(l);
                    blocks.push(vec![j]);
                }
            }
        }
        Partition { blocks }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Number of indices covered.
    pub fn d(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    /// Block index of every element.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.d()];
        for (b, block) in self.blocks.iter().enumerate() {
            for &j in block {
                labels[j] = b;
            }
        }
        labels
    }
}

/// Binary CDR matrix whose column `j` is the indicator of the block holding `j`.
pub fn amalgamation_matrix(partition: &Partition, d: usize) -> Result<CdrMatrix> {
    if partition.d() != d {
        return Err(Error::InvalidPartition(format!(
            "partition covers {} indices, expected {d}",
            partition.d()
        )));
    }
    let mut entries = DMatrix::zeros(partition.len(), d);
    for (i, block) in partition.blocks().iter().enumerate() {
        for &j in block {
            entries[(i, j)] = 1.0;
        }
    }
    CdrMatrix::new(entries)
}

/// Constructs a strictly positive CDR matrix whose row space is the span of
/// `basis` (rows of a `k × d` matrix), which must contain the all-ones vector.
///
/// Builds a basis `u_1..u_{k-1}` of the zero-sum part of the subspace, sets
/// `u_k = −Σ u_i`, shifts every `u_i` by `N·1` with `N = 2·max‖u_i‖_∞ + 1`
/// and scales the rows by `1/(kN)`.
pub fn cdr_from_subspace(basis: &DMatrix<f64>) -> Result<CdrMatrix> {
    let (k, d) = basis.shape();
    if k == 0 || d == 0 {
        return Err(Error::DegenerateBasis("empty basis".into()));
    }
    if !linalg::is_finite(basis) {
        return Err(Error::NonFiniteInput);
    }
    if k > d {
        return Err(Error::DegenerateBasis(format!("{k} vectors in dimension {d}")));
    }
    let q = linalg::row_space_basis(basis, linalg::RANK_TOL);
    if q.nrows() < k {
        return Err(Error::DegenerateBasis(format!(
            "basis has numerical rank {} < {k}",
            q.nrows()
        )));
    }

    let ones = DVector::from_element(d, 1.0);
    let coeffs = &q * &ones;
    let residual = (&ones - q.transpose() * coeffs).norm() / (d as f64).sqrt();
    if residual > SUBSPACE_TOL {
        return Err(Error::OneVectorNotInSpan { residual });
    }

    // zero-sum part: remove the mean from every orthonormal basis row
    let mut centered = q.clone();
    for mut row in centered.row_iter_mut() {
        let mean = row.sum() / d as f64;
        row.add_scalar_mut(-mean);
    }
    let zero_sum = if k > 1 {
        let b = linalg::row_space_basis(&centered, linalg::RANK_TOL);
        if b.nrows() < k - 1 {
            return Err(Error::DegenerateBasis("zero-sum part has deficient rank".into()));
        }
        b.rows(0, k - 1).into_owned()
    } else {
        DMatrix::zeros(0, d)
    };

    let mut u = DMatrix::zeros(k, d);
    for i in 0..k.saturating_sub(1) {
        u.set_row(i, &zero_sum.row(i));
    }
    let total = zero_sum.row_sum();
    if k > 1 {
        u.set_row(k - 1, &(-total));
    }
    let sup = u.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let shift = 2.0 * sup + 1.0;
    let scale = 1.0 / (k as f64 * shift);
    let entries = u.map(|v| (v + shift) * scale);
    CdrMatrix::new(entries)
}

/// Groups indices whose columns agree within `tol` in max-norm, closing the
/// relation transitively.
pub fn detect_amalgamation(p: &CdrMatrix, tol: f64) -> Partition {
    let d = p.d();
    let mut parent: Vec<usize> = (0..d).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let entries = p.entries();
    for a in 0..d {
        for b in (a + 1)..d {
            let dist = entries
                .column(a)
                .iter()
                .zip(entries.column(b).iter())
                .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()));
            if dist <= tol {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let labels: Vec<usize> = (0..d).map(|j| find(&mut parent, j)).collect();
    Partition::from_labels(&labels)
}
