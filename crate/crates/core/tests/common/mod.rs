//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use ckdr::simplex::CdrMatrix;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

/// Euclidean projection onto the simplex by enumerating every support set.
///
/// On a fixed support `S` the minimizer of `‖x − v‖²` subject to `Σx = 1` is
/// `x_S = v_S − τ`, `τ = (Σ v_S − 1)/|S|`; the answer is the feasible
/// candidate closest to `v`.
pub fn brute_force_projection(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let tau = (support.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / support.len() as f64;
        let mut x = vec![0.0; n];
        let mut feasible = true;
        for &i in &support {
            x[i] = v[i] - tau;
            if x[i] < -1e-15 {
                feasible = false;
            }
        }
        if !feasible {
            continue;
        }
        let dist: f64 = x.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, x));
        }
    }
    best.expect("the full support is always feasible after clamping").1
}

pub fn centering(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64)
}

pub fn gaussian_gram(z: &DMatrix<f64>, sigma: f64) -> DMatrix<f64> {
    let n = z.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        let d2 = (z.row(i) - z.row(j)).norm_squared();
        (-d2 / (2.0 * sigma * sigma)).exp()
    })
}

/// Primal value of the kernel ridge regression with intercept at its
/// minimizer, `(1/n) Σ‖ψ_i − F̂(z_i) − γ̂‖² + ε‖F̂‖²`, with fitted values
/// `S Ψ`, `S = (1/n)11ᵀ + G A`, `A = (G + nεI)⁻¹ H`, and `‖F̂‖² = Tr(AᵀGA K_Y)`.
pub fn krr_primal_loss(z: &DMatrix<f64>, sigma: f64, epsilon: f64, k_y: &DMatrix<f64>) -> f64 {
    let n = z.nrows();
    let h = centering(n);
    let g = &h * gaussian_gram(z, sigma) * &h;
    let system = &g + DMatrix::identity(n, n) * (n as f64 * epsilon);
    let a = system.lu().try_inverse().expect("ridge system is invertible") * &h;
    let s = DMatrix::from_element(n, n, 1.0 / n as f64) + &g * &a;
    let resid = DMatrix::identity(n, n) - s;
    let fit_term = (&resid * k_y * resid.transpose()).trace() / n as f64;
    let norm_term = epsilon * (a.transpose() * &g * &a * k_y).trace();
    fit_term + norm_term
}

/// `ρ` from the definition with explicit projectors.
pub fn chordal_by_projectors(v: &DMatrix<f64>, w: &DMatrix<f64>) -> f64 {
    let proj = |b: &DMatrix<f64>| {
        let q = b.transpose().qr().q();
        let q = q.columns(0, b.nrows()).into_owned();
        &q * q.transpose()
    };
    let (k, l) = (v.nrows() as f64, w.nrows() as f64);
    let diff = (proj(v) - proj(w)).norm_squared();
    ((diff - (k - l).abs()) / (2.0 * k.min(l))).max(0.0).sqrt()
}

pub fn random_composition<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..d).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

pub fn random_compositions<R: Rng>(rng: &mut R, n: usize, d: usize) -> DMatrix<f64> {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| random_composition(rng, d)).collect();
    DMatrix::from_fn(n, d, |i, j| rows[i][j])
}

pub fn random_cdr<R: Rng>(rng: &mut R, m: usize, d: usize) -> CdrMatrix {
    let mut e = DMatrix::zeros(m, d);
    for j in 0..d {
        let c = random_composition(rng, m);
        for a in 0..m {
            e[(a, j)] = c[a];
        }
    }
    CdrMatrix::new(e).expect("columns are compositions")
}

pub fn normal_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn normal_matrix<R: Rng>(rng: &mut R, r: usize, c: usize) -> DMatrix<f64> {
    let v = normal_vec(rng, r * c);
    DMatrix::from_vec(r, c, v)
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Checks well-formedness and a single `svg` root.
pub fn parse_svg(doc: &str) -> roxmltree::Document<'_> {
    let parsed = roxmltree::Document::parse(doc).expect("well-formed XML");
    assert_eq!(parsed.root_element().tag_name().name(), "svg");
    assert_eq!(parsed.root().children().filter(|n| n.is_element()).count(), 1);
    parsed
}
