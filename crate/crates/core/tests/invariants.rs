mod common;

use ckdr::json::Num;
use ckdr::kernels::{center_gram, gram, KernelSpec};
use ckdr::metrics::{adjusted_rand_index, chordal_distance, Subspace};
use ckdr::objective::{trace_objective, ObjectiveContext};
use ckdr::predictor::{fit_dual, Responses};
use ckdr::simplex::{
    amalgamation_matrix, apply_cdr, cdr_from_subspace, detect_amalgamation, project_vector_to_simplex,
    validate_composition, Partition,
};
use ckdr::viz::ternary_coords;
use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_matches_oracle(v in prop::collection::vec(-5.0f64..5.0, 1..9)) {
        let got = project_vector_to_simplex(&v).unwrap();
        let want = brute_force_projection(&v);
        for (a, b) in got.as_slice().iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-8);
        }
    }

    #[test]
    fn projection_is_idempotent(v in prop::collection::vec(-5.0f64..5.0, 1..12)) {
        let once = project_vector_to_simplex(&v).unwrap();
        let twice = project_vector_to_simplex(once.as_slice()).unwrap();
        prop_assert_eq!(once.as_slice(), twice.as_slice());
        prop_assert!(once.as_slice().iter().all(|&x| x >= 0.0));
        prop_assert!((once.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn apply_cdr_preserves_simplex_and_contrasts(seed in any::<u64>(), m in 1usize..5, extra in 0usize..8) {
        let d = m.max(2) + extra;
        let mut r = rng(seed);
        let p = random_cdr(&mut r, m, d);
        let x = validate_composition(&random_composition(&mut r, d), 1e-9, false).unwrap();
        let x2 = validate_composition(&random_composition(&mut r, d), 1e-9, false).unwrap();
        let z = apply_cdr(&p, &x).unwrap();
        prop_assert!(z.as_slice().iter().all(|&v| v >= 0.0));
        prop_assert!((z.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // a zero-sum direction maps to a zero-sum direction
        let z2 = apply_cdr(&p, &x2).unwrap();
        let diff: f64 = z.as_slice().iter().zip(z2.as_slice()).map(|(a, b)| a - b).sum();
        prop_assert!(diff.abs() < 1e-12);
    }

    #[test]
    fn subspace_construction_spans_target(seed in any::<u64>(), k in 1usize..5, d in 5usize..12) {
        let mut r = rng(seed);
        let mut basis = normal_matrix(&mut r, k, d);
        for j in 0..d {
            basis[(0, j)] = 1.0;
        }
        let p = cdr_from_subspace(&basis).unwrap();
        prop_assert_eq!(p.m(), k);
        let rho = chordal_distance(&Subspace::row_space(p.entries()).unwrap(), &Subspace::new(&basis).unwrap()).unwrap();
        prop_assert!(rho < 1e-10);
    }

    #[test]
    fn detect_inverts_amalgamation(labels in prop::collection::vec(0usize..4, 2..15)) {
        let partition = Partition::from_labels(&labels);
        let p = amalgamation_matrix(&partition, labels.len()).unwrap();
        prop_assert_eq!(detect_amalgamation(&p, 1e-12), partition);
    }

    #[test]
    fn gram_is_symmetric_and_centered_rows_vanish(seed in any::<u64>(), n in 2usize..15, d in 3usize..6, sigma in 0.05f64..3.0) {
        let mut r = rng(seed);
        let x = random_compositions(&mut r, n, d);
        let k = gram(&KernelSpec::gaussian(sigma).unwrap(), &x).unwrap();
        prop_assert!((k.values() - k.values().transpose()).amax() == 0.0);
        prop_assert!(k.values().diagonal().iter().all(|&v| v == 1.0));
        prop_assert!(k.values().iter().all(|&v| v > 0.0 && v <= 1.0));
        let g = center_gram(&k).unwrap();
        for row in g.values().row_iter() {
            prop_assert!(row.sum().abs() < 1e-12 * n as f64);
        }
        // PSD up to roundoff
        let min_eig = g.values().clone().symmetric_eigenvalues().min();
        prop_assert!(min_eig > -1e-10);
    }

    #[test]
    fn objective_row_permutation_and_epsilon_monotone(seed in any::<u64>(), n in 4usize..16, d in 3usize..7, m in 2usize..4) {
        let mut r = rng(seed);
        let x = random_compositions(&mut r, n, d);
        let y = normal_vec(&mut r, n);
        let sigma = r.random_range(0.2..1.5);
        let p = random_cdr(&mut r, m, d);
        let ctx = ObjectiveContext::from_real_responses(x, &y, sigma, 1e-2).unwrap();
        let t = trace_objective(&p, &ctx).unwrap();
        let perm: Vec<usize> = (0..m).rev().collect();
        let tp = trace_objective(&p.permute_rows(&perm).unwrap(), &ctx).unwrap();
        prop_assert!((t - tp).abs() <= 1e-12 * t.abs().max(f64::MIN_POSITIVE));
        let lo = trace_objective(&p, &ctx.with_params(sigma, 1e-3).unwrap()).unwrap();
        let hi = trace_objective(&p, &ctx.with_params(sigma, 1e-1).unwrap()).unwrap();
        prop_assert!(lo <= t && t <= hi);
    }

    #[test]
    fn predictor_weights_and_in_sample_identity(seed in any::<u64>(), n in 4usize..16, d in 3usize..7, m in 2usize..4, eps in 1e-3f64..1.0) {
        let mut r = rng(seed);
        let x = random_compositions(&mut r, n, d);
        let y = normal_vec(&mut r, n);
        let sigma = r.random_range(0.2..1.5);
        let p = random_cdr(&mut r, m, d);
        let ctx = ObjectiveContext::from_real_responses(x.clone(), &y, sigma, eps).unwrap();
        let t = trace_objective(&p, &ctx).unwrap();
        let model = fit_dual(&p, &x, Responses::Real(y.clone()), KernelSpec::gaussian(sigma).unwrap(), eps).unwrap();
        prop_assert!((model.dual_weights() * nalgebra::DVector::from_element(n, 1.0)).amax() < 1e-8);
        let mut mean_err = 0.0;
        for i in 0..n {
            let xi: Vec<f64> = x.row(i).iter().copied().collect();
            prop_assert!((model.weights(&xi).unwrap().sum() - 1.0).abs() < 1e-10);
            let raw = model.kernel_error_unclamped(&xi, &y.iter().map(|v| v * y[i]).collect::<Vec<_>>(), y[i] * y[i]).unwrap();
            prop_assert!(raw >= -1e-10);
            mean_err += model.out_of_sample_error(&xi, y[i]).unwrap() / n as f64;
        }
        let rebuilt = mean_err + eps * model.regularizer_norm();
        prop_assert!((rebuilt - t).abs() <= 1e-9 * t.abs().max(1e-300));
    }

    #[test]
    fn predictions_ignore_row_order(seed in any::<u64>(), n in 4usize..12, d in 3usize..6) {
        let mut r = rng(seed);
        let x = random_compositions(&mut r, n, d);
        let y = normal_vec(&mut r, n);
        let p = random_cdr(&mut r, 3, d);
        let k = KernelSpec::gaussian(0.5).unwrap();
        let a = fit_dual(&p, &x, Responses::Real(y.clone()), k, 0.01).unwrap();
        let b = fit_dual(&p.permute_rows(&[2, 0, 1]).unwrap(), &x, Responses::Real(y), k, 0.01).unwrap();
        let q = random_composition(&mut r, d);
        let (ya, yb) = (a.predict_real(&q).unwrap(), b.predict_real(&q).unwrap());
        prop_assert!((ya - yb).abs() <= 1e-9 * ya.abs().max(1.0));
    }

    #[test]
    fn chordal_metric_properties(seed in any::<u64>(), d in 3usize..9, k in 1usize..3, l in 1usize..3) {
        let mut r = rng(seed);
        let a = normal_matrix(&mut r, k, d);
        let b = normal_matrix(&mut r, l, d);
        let (va, vb) = (Subspace::new(&a).unwrap(), Subspace::new(&b).unwrap());
        let ab = chordal_distance(&va, &vb).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - chordal_distance(&vb, &va).unwrap()).abs() < 1e-12);
        prop_assert!(chordal_distance(&va, &va).unwrap() < 1e-7);
        prop_assert!((ab - chordal_by_projectors(&a, &b)).abs() < 1e-7);
        // any subspace of va is at distance zero
        let sub = DMatrix::from_fn(1, d, |_, j| (0..k).map(|i| a[(i, j)] * (i as f64 + 1.0)).sum());
        prop_assert!(chordal_distance(&Subspace::new(&sub).unwrap(), &va).unwrap() < 1e-7);
    }

    #[test]
    fn ari_relabel_invariance(a in prop::collection::vec(0usize..4, 2..30), seed in any::<u64>()) {
        let mut r = rng(seed);
        let b: Vec<usize> = a.iter().map(|_| r.random_range(0..3)).collect();
        let shifted: Vec<usize> = a.iter().map(|v| 7 * v + 3).collect();
        let base = adjusted_rand_index(&a, &b).unwrap();
        prop_assert!((base - adjusted_rand_index(&shifted, &b).unwrap()).abs() < 1e-12);
        prop_assert!((base - adjusted_rand_index(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!(base <= 1.0 + 1e-12);
        prop_assert_eq!(adjusted_rand_index(&a, &shifted).unwrap(), 1.0);
    }

    #[test]
    fn ternary_map_is_affine(seed in any::<u64>(), alpha in 0.0f64..1.0) {
        let mut r = rng(seed);
        let (a, b) = (random_composition(&mut r, 3), random_composition(&mut r, 3));
        let mix = [0, 1, 2].map(|i| alpha * a[i] + (1.0 - alpha) * b[i]);
        let (ua, va) = ternary_coords([a[0], a[1], a[2]]);
        let (ub, vb) = ternary_coords([b[0], b[1], b[2]]);
        let (um, vm) = ternary_coords(mix);
        prop_assert!((um - (alpha * ua + (1.0 - alpha) * ub)).abs() < 1e-12);
        prop_assert!((vm - (alpha * va + (1.0 - alpha) * vb)).abs() < 1e-12);
    }

    #[test]
    fn json_floats_round_trip(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(x.is_finite());
        let text = serde_json::to_string(&Num(x)).unwrap();
        let back: Num = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back.0.to_bits(), x.to_bits());
    }
}
