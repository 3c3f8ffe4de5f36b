//! Evaluation metrics: chordal subspace distance, numerical rank, adjusted
//! Rand index and k-means clustering of CDR columns.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;
use crate::simplex::CdrMatrix;

pub use crate::linalg::RANK_TOL;

/// A linear subspace of `R^d`, stored as an orthonormal basis (rows).
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Span of the rows of `basis`, which must be linearly independent.
    pub fn new(basis: &DMatrix<f64>) -> Result<Self> {
        let q = linalg::row_space_basis(basis, RANK_TOL);
        if q.nrows() == 0 {
            return Err(Error::ZeroDimensionalSubspace);
        }
        if q.nrows() < basis.nrows() {
            return Err(Error::DegenerateBasis(format!(
                "{} rows span only {} dimensions",
                basis.nrows(),
                q.nrows()
            )));
        }
        Ok(Subspace { basis: q })
    }

    /// Numerical row space of any matrix.
    pub fn row_space(mat: &DMatrix<f64>) -> Result<Self> {
        let q = linalg::row_space_basis(mat, RANK_TOL);
        if q.nrows() == 0 {
            return Err(Error::ZeroDimensionalSubspace);
        }
        Ok(Subspace { basis: q })
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Orthonormal basis rows.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Orthogonal projector `Π = QᵀQ`.
    pub fn projector(&self) -> DMatrix<f64> {
        self.basis.transpose() * &self.basis
    }
}

/// `ρ(V, W) = sqrt((‖Π_V − Π_W‖²_F − |k − l|) / (2 min(k, l)))`.
///
/// The radicand equals `‖Q_S − Q_S Π_L‖²_F / dim S`, where `S` is the smaller
/// subspace and `L` the larger, which is evaluated instead because it stays
/// accurate when the distance is near zero.
pub fn chordal_distance(v: &Subspace, w: &Subspace) -> Result<f64> {
    if v.ambient_dim() != w.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: v.ambient_dim(),
            found: w.ambient_dim(),
        });
    }
    if v.dim() == 0 || w.dim() == 0 {
        return Err(Error::ZeroDimensionalSubspace);
    }
    let (small, large) = if v.dim() <= w.dim() { (v, w) } else { (w, v) };
    let qs = small.basis();
    let ql = large.basis();
    let residual = qs - (qs * ql.transpose()) * ql;
    let radicand = residual.norm_squared() / small.dim() as f64;
    if !radicand.is_finite() {
        return Err(Error::Internal("non-finite chordal radicand".into()));
    }
    Ok(radicand.clamp(0.0, 1.0).sqrt())
}

/// Number of singular values above `rel_tol` times the largest.
pub fn numerical_rank(p: &CdrMatrix, rel_tol: f64) -> usize {
    matrix_rank(p.entries(), rel_tol)
}

pub fn matrix_rank(mat: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = linalg::singular_values(mat);
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&v| v > rel_tol * smax).count(),
        _ => 0,
    }
}

fn pairs(n: usize) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index<A, B>(a: &[A], b: &[B]) -> Result<f64>
where
    A: Eq + std::hash::Hash,
    B: Eq + std::hash::Hash,
{
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::TooFewSamples(format!("ARI needs at least 2 items, got {n}")));
    }
    let mut joint: HashMap<(&A, &B), usize> = HashMap::new();
    let mut rows: HashMap<&A, usize> = HashMap::new();
    let mut cols: HashMap<&B, usize> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = joint.values().map(|&c| pairs(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| pairs(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| pairs(c)).sum();
    let expected = sum_a * sum_b / pairs(n);
    let max_index = 0.5 * (sum_a + sum_b);
    if max_index == expected {
        // both labelings trivial (one block, or all singletons) and equal
        return Ok(1.0);
    }
    Ok((index - expected) / (max_index - expected))
}

/// Result of a k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub labels: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub wcss: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm with k-means++ seeding, best of `restarts` runs by
/// within-cluster sum of squares.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, restarts: usize) -> Result<KMeans> {
    let d = points.len();
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if k > d {
        return Err(Error::KTooLarge { k, d });
    }
    let mut best: Option<KMeans> = None;
    for r in 0..restarts.max(1) {
        let mut rng = rng::stream(seed, rng::domain::KMEANS, r as u64);
        let run = lloyd(points, k, &mut rng);
        if best.as_ref().is_none_or(|b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn lloyd<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> KMeans {
    let d = points.len();
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut chosen = vec![false; d];
    let first = rng.random_range(0..d);
    chosen[first] = true;
    centers.push(points[first].clone());
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = d - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if w > 0.0 && target < w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            if chosen[idx] || nearest[idx] == 0.0 {
                (0..d).filter(|&i| !chosen[i]).max_by(|&a, &b| nearest[a].total_cmp(&nearest[b]).then(b.cmp(&a))).expect("k ≤ d")
            } else {
                idx
            }
        } else {
            (0..d).find(|&i| !chosen[i]).expect("k ≤ d")
        };
        chosen[pick] = true;
        centers.push(points[pick].clone());
        for (i, p) in points.iter().enumerate() {
            nearest[i] = nearest[i].min(sq_dist(p, &centers[centers.len() - 1]));
        }
    }

    let dim = points.first().map_or(0, Vec::len);
    let mut labels = vec![usize::MAX; d];
    for _ in 0..300 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let dist = sq_dist(p, center);
                if dist < best_d {
                    best_d = dist;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        // reseed empty clusters with the point farthest from its center
        for c in 0..k {
            if !labels.contains(&c) {
                let far = (0..d)
                    .max_by(|&a, &b| {
                        sq_dist(&points[a], &centers[labels[a]])
                            .total_cmp(&sq_dist(&points[b], &centers[labels[b]]))
                            .then(b.cmp(&a))
                    })
                    .expect("nonempty");
                labels[far] = c;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            counts[labels[i]] += 1;
            for (s, v) in sums[labels[i]].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }
    let wcss = points.iter().zip(&labels).map(|(p, &l)| sq_dist(p, &centers[l])).sum();
    // relabel by first appearance
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for &l in &labels {
        if map[l] == usize::MAX {
            map[l] = next;
            next += 1;
        }
    }
    let mut new_centers = vec![Vec::new(); k];
    for (old, &new) in map.iter().enumerate() {
        if new != usize::MAX {
            new_centers[new] = centers[old].clone();
        }
    }
    KMeans {
        labels: labels.iter().map(|&l| map[l]).collect(),
        centers: new_centers,
        wcss,
    }
}

/// Clusters the `d` columns of `P` (points of the `(m−1)`-simplex) into `k`
/// groups.
pub fn cluster_columns(p: &CdrMatrix, k: usize, seed: u64, restarts: usize) -> Result<Vec<usize>> {
    let points: Vec<Vec<f64>> = p.entries().column_iter().map(|c| c.iter().copied().collect()).collect();
    Ok(kmeans(&points, k, seed, restarts)?.labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn span(rows: &[&[f64]]) -> Subspace {
        let d = rows[0].len();
        Subspace::new(&DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j])).unwrap()
    }

    #[test]
    fn chordal_examples() {
        let v = span(&[&[1.0, 0.0, 0.0]]);
        let w = span(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        assert!(chordal_distance(&v, &v).unwrap() < 1e-12);
        assert!(chordal_distance(&v, &w).unwrap() < 1e-12);
        let e1 = span(&[&[1.0, 0.0]]);
        let e2 = span(&[&[0.0, 1.0]]);
        assert!((chordal_distance(&e1, &e2).unwrap() - 1.0).abs() < 1e-12);
        let other = span(&[&[1.0, 0.0]]);
        assert!(matches!(chordal_distance(&v, &other), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn subspace_errors() {
        assert_eq!(Subspace::new(&DMatrix::zeros(1, 3)), Err(Error::ZeroDimensionalSubspace));
        let dup = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        assert!(matches!(Subspace::new(&dup), Err(Error::DegenerateBasis(_))));
        assert_eq!(Subspace::row_space(&dup).unwrap().dim(), 1);
    }

    #[test]
    fn rank_examples() {
        let ident = CdrMatrix::new(DMatrix::identity(3, 3)).unwrap();
        assert_eq!(numerical_rank(&ident, RANK_TOL), 3);
        let flat = CdrMatrix::new(DMatrix::from_element(3, 4, 1.0 / 3.0)).unwrap();
        assert_eq!(numerical_rank(&flat, RANK_TOL), 1);
        // rows 0 and 1 differ by 1e-9
        let mut e = DMatrix::from_row_slice(
            3,
            4,
            &[0.3, 0.2, 0.4, 0.1, 0.3, 0.2, 0.4, 0.1, 0.4, 0.6, 0.2, 0.8],
        );
        e[(0, 0)] += 1e-9;
        e[(2, 0)] -= 1e-9;
        let near = CdrMatrix::new(e).unwrap();
        let s = linalg::singular_values(near.entries());
        assert!(s[2] / s[0] < 1e-6 && s[1] / s[0] > 1e-3);
        assert_eq!(numerical_rank(&near, RANK_TOL), 2);
    }

    #[test]
    fn ari_examples() {
        let a = [0, 0, 1, 1, 2, 2];
        assert_eq!(adjusted_rand_index(&a, &a).unwrap(), 1.0);
        let renamed = [5, 5, 3, 3, 9, 9];
        assert_eq!(adjusted_rand_index(&a, &renamed).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&[0, 0, 0, 0], &[0, 1, 2, 3]).unwrap(), 0.0);
        assert!(matches!(adjusted_rand_index(&[0, 1], &[0]), Err(Error::LengthMismatch(2, 1))));
        // hand count: contingency [[2,1],[0,1]]; index 1, sums 2 and 3, 6 pairs
        let got = adjusted_rand_index(&[0, 0, 0, 1], &[0, 0, 1, 1]).unwrap();
        let expected = (1.0 - 3.0 * 2.0 / 6.0) / (2.5 - 1.0);
        assert!((got - expected).abs() < 1e-15);
    }

    #[test]
    fn cluster_exact_values() {
        let e = DMatrix::from_row_slice(
            2,
            6,
            &[1.0, 0.5, 0.0, 1.0, 0.5, 0.0, 0.0, 0.5, 1.0, 0.0, 0.5, 1.0],
        );
        let p = CdrMatrix::new(e).unwrap();
        let labels = cluster_columns(&p, 3, 1, 20).unwrap();
        assert_eq!(adjusted_rand_index(&labels, &[0, 1, 2, 0, 1, 2]).unwrap(), 1.0);
    }

    #[test]
    fn cluster_noisy_vertices() {
        let noise: [f64; 6] = [1e-3, -5e-4, 8e-4, -1e-3, 2e-4, 6e-4];
        let truth = [0, 1, 0, 1, 1, 0];
        let mut e = DMatrix::zeros(3, 6);
        for j in 0..6 {
            let v = if truth[j] == 0 { 0 } else { 2 };
            let jitter = noise[j].abs();
            e[(v, j)] = 1.0 - jitter;
            e[(1, j)] += jitter;
        }
        let p = CdrMatrix::new(e).unwrap();
        let labels = cluster_columns(&p, 2, 7, 20).unwrap();
        assert_eq!(adjusted_rand_index(&labels, &truth).unwrap(), 1.0);
    }

    #[test]
    fn cluster_k_equals_d() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.2, 1.0 - i as f64 * 0.2]).collect();
        let km = kmeans(&pts, 5, 3, 5).unwrap();
        assert_eq!(km.wcss, 0.0);
        let mut l = km.labels.clone();
        l.sort_unstable();
        l.dedup();
        assert_eq!(l.len(), 5);
        assert!(matches!(kmeans(&pts, 6, 3, 5), Err(Error::KTooLarge { k: 6, d: 5 })));
    }
}
