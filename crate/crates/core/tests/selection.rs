mod common;

use ckdr::metrics::{chordal_distance, Subspace};
use ckdr::optimizer::fit_ckdr_real;
use ckdr::selection::{cross_validate, Grid};
use ckdr::simdata::{simulate, Setting, SimSpec};
use ckdr::{FitConfig, Sigma};
use common::median;

#[test]
fn cross_validated_model_recovers_setting_i() {
    let grid = Grid { m_values: vec![2, 3], b_values: vec![0.0], epsilon_values: vec![1e-3] };
    let mut rhos = Vec::new();
    let mut chosen = Vec::new();
    for seed in 0..5u64 {
        let data = simulate(&SimSpec::new(Setting::I, 200, 300 + seed)).unwrap();
        let config = FitConfig { restarts: 3, seed, ..FitConfig::default() };
        let report = cross_validate(&data.x, &data.y, &grid, 5, &config, seed).unwrap();
        let best = &report.best;
        let refit = FitConfig { m: best.m, sigma: Sigma::Auto { b: best.b }, epsilon: best.epsilon, ..config };
        let fit = fit_ckdr_real(&data.x, &data.y, &refit).unwrap();
        let rho = chordal_distance(&Subspace::row_space(fit.p_hat.entries()).unwrap(), &data.truth).unwrap();
        rhos.push(rho);
        chosen.push(best.m);
    }
    let med = median(rhos.clone());
    println!("chosen m {chosen:?}, rho {rhos:.3?}");
    assert!(med < 0.25, "median rho {med} over {rhos:?}");
    assert!(rhos.iter().all(|&r| r < 0.25), "rho {rhos:?}");
}
