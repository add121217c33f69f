//! Invariants of the numerics, the objective and every block update, checked
//! on random drops and random decision variables.

use std::f64::consts::PI;

use dpma_core::channel::{PolarizationMode, PolarizationState};
use dpma_core::numerics::{hermitian_eig, kron, unvec, vec, CMatrix, CVector, HermitianMatrix};
use dpma_core::objective::{aggregation_gains, mse_at, mse_closed_form, DecisionVars};
use dpma_core::scene::{check_layout_feasible, sample_drop, Drop, SystemConfig};
use dpma_core::subsolvers::{
    sca_update_m, solve_p44, transmit_scalar, update_a, update_positions, update_varpi, update_w, MSubproblemData,
    PositionOptions, VarpiSubproblemData,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn cn(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) / 2f64.sqrt()
}

fn phase(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI))
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
    CMatrix::from_fn(r, c, |_, _| cn(rng))
}

/// Random polarization and transmit scalars; combiners scaled so own-cell
/// aggregation gains are of order `1 / BK`.
fn random_vars(cfg: &SystemConfig, drop: &Drop, rng: &mut ChaCha8Rng) -> DecisionVars {
    let (b, k) = (cfg.cells, cfg.users_per_cell);
    let mut vars = DecisionVars::initial(cfg);
    vars.pol = PolarizationState {
        varpi: (0..b).map(|_| [phase(rng), phase(rng)]).collect(),
        m: (0..b).map(|_| (0..k).map(|_| [phase(rng), phase(rng)]).collect()).collect(),
    };
    vars.a = (0..b * k).map(|_| phase(rng) * cfg.power_w.sqrt() * rng.random_range(0.2..1.0)).collect();
    vars.w = random_matrix(rng, cfg.antennas, b);
    let ch = vars.channels(drop, cfg, PolarizationMode::Dual);
    let g = aggregation_gains(&vars, &ch).unwrap();
    let scale = rng.random_range(0.3..3.0);
    for i in 0..b {
        let own: f64 = (0..k).map(|kk| g[i][i * k + kk].norm()).sum::<f64>() / k as f64;
        vars.w.column_mut(i).scale_mut(scale / (b * k) as f64 / own);
    }
    vars
}

fn small_config(rng: &mut ChaCha8Rng) -> SystemConfig {
    SystemConfig {
        cells: rng.random_range(1..=3),
        users_per_cell: rng.random_range(1..=3),
        antennas: rng.random_range(1..=4),
        paths: rng.random_range(1..=3),
        ..SystemConfig::desk_scale()
    }
}

fn instance(seed: u64) -> (SystemConfig, Drop, DecisionVars, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = small_config(&mut rng);
    let drop = sample_drop(&cfg, seed).unwrap();
    let vars = random_vars(&cfg, &drop, &mut rng);
    (cfg, drop, vars, rng)
}

fn slack(x: f64) -> f64 {
    1e-10 * x.abs().max(1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn eigendecomposition_reconstructs(seed in any::<u64>(), n in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, n, n);
        let h = HermitianMatrix::from_hermitian_part(&a);
        let e = hermitian_eig(&h).unwrap();
        let d = CMatrix::from_diagonal(&e.values.iter().map(|v| Complex64::new(*v, 0.0)).collect::<Vec<_>>().into());
        let back = &e.vectors * d * e.vectors.adjoint();
        prop_assert!((back - h.as_matrix()).norm() <= 1e-10 * h.as_matrix().norm().max(1.0));
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn kron_and_vec_identities(seed in any::<u64>(), n in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b, x) = (random_matrix(&mut rng, n, n), random_matrix(&mut rng, n, n), random_matrix(&mut rng, n, n));
        // vec(A X B) = (B^T kron A) vec(X)
        let lhs = vec(&(&a * &x * &b));
        let rhs = kron(&b.transpose(), &a) * vec(&x);
        prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + x.norm() * a.norm() * b.norm()));
        prop_assert_eq!(unvec(&vec(&x), n), x);
    }

    #[test]
    fn mse_is_nonnegative_and_one_over_k_without_combiners(seed in any::<u64>()) {
        let (cfg, drop, mut vars, _) = instance(seed);
        let ch = vars.channels(&drop, &cfg, PolarizationMode::Dual);
        prop_assert!(mse_closed_form(&vars, &ch, &cfg).unwrap() >= 0.0);
        vars.w.fill(Complex64::new(0.0, 0.0));
        let silent = mse_closed_form(&vars, &ch, &cfg).unwrap();
        prop_assert!((silent - 1.0 / cfg.users_per_cell as f64).abs() < 1e-12);
    }

    #[test]
    fn transmit_scalar_respects_the_budget(r in 1e-6f64..1e3, re in -10.0f64..10.0, im in -10.0f64..10.0, p in 1e-3f64..10.0) {
        let a = transmit_scalar(r, Complex64::new(re, im), p);
        prop_assert!(a.norm_sqr() <= p * (1.0 + 1e-12));
    }

    #[test]
    fn closed_form_blocks_never_raise_the_mse(seed in any::<u64>()) {
        let (cfg, drop, mut vars, _) = instance(seed);
        let ch = vars.channels(&drop, &cfg, PolarizationMode::Dual);
        let before = mse_closed_form(&vars, &ch, &cfg).unwrap();
        vars.w = update_w(&vars, &ch, &cfg).unwrap();
        let after_w = mse_closed_form(&vars, &ch, &cfg).unwrap();
        prop_assert!(after_w <= before + slack(before));
        vars.a = update_a(&vars, &ch, &cfg).unwrap();
        let after_a = mse_closed_form(&vars, &ch, &cfg).unwrap();
        prop_assert!(after_a <= after_w + slack(after_w));
        prop_assert!(vars.power_feasible(&cfg));
    }

    #[test]
    fn polarization_blocks_never_raise_the_mse(seed in any::<u64>()) {
        let (cfg, drop, mut vars, mut rng) = instance(seed);
        let before = mse_at(&vars, &drop, &cfg, PolarizationMode::Dual).unwrap();
        let ch = vars.channels(&drop, &cfg, PolarizationMode::Dual);
        let (m, rep) = sca_update_m(&vars, &ch, 1e-6, 200).unwrap();
        prop_assert!(rep.objective_trace.windows(2).all(|w| w[1] <= w[0] + slack(w[0])));
        vars.pol.m = m;
        let after_m = mse_at(&vars, &drop, &cfg, PolarizationMode::Dual).unwrap();
        prop_assert!(after_m <= before + slack(before));
        let ch = vars.channels(&drop, &cfg, PolarizationMode::Dual);
        let (varpi, _) = update_varpi(&vars, &ch, 1e-6, 10, 50, &mut rng).unwrap();
        vars.pol.varpi = varpi;
        let after_varpi = mse_at(&vars, &drop, &cfg, PolarizationMode::Dual).unwrap();
        prop_assert!(after_varpi <= after_m + slack(after_m));
        prop_assert!(vars.pol.is_unit_modulus(1e-12));
    }

    #[test]
    fn user_polarization_surrogate_is_a_tight_upper_bound(seed in any::<u64>()) {
        let (cfg, drop, vars, mut rng) = instance(seed);
        let ch = vars.channels(&drop, &cfg, PolarizationMode::Dual);
        let data = MSubproblemData::build(&vars, &ch).unwrap();
        let n = 2 * cfg.total_users();
        let mt = CVector::from_fn(n, |_, _| phase(&mut rng));
        let f_t = data.objective(&mt);
        prop_assert!((data.surrogate(&mt, &mt) - f_t).abs() <= 1e-10 * (1.0 + f_t.abs()));
        for _ in 0..8 {
            let m = CVector::from_fn(n, |_, _| phase(&mut rng));
            let f = data.objective(&m);
            prop_assert!(data.surrogate(&m, &mt) >= f - 1e-10 * (1.0 + f.abs()));
        }
        let step = data.step(&mt);
        prop_assert!(data.objective(&step) <= f_t + 1e-10 * (1.0 + f_t.abs()));
        // Objective along the unit circle differs from the MSE by a constant.
        let mut moved = vars.clone();
        moved.pol.m = (0..cfg.cells)
            .map(|j| (0..cfg.users_per_cell).map(|k| [step[2 * (j * cfg.users_per_cell + k)], step[2 * (j * cfg.users_per_cell + k) + 1]]).collect())
            .collect();
        let mut start = vars.clone();
        start.pol.m = (0..cfg.cells)
            .map(|j| (0..cfg.users_per_cell).map(|k| [mt[2 * (j * cfg.users_per_cell + k)], mt[2 * (j * cfg.users_per_cell + k) + 1]]).collect())
            .collect();
        let d_mse = mse_at(&moved, &drop, &cfg, PolarizationMode::Dual).unwrap() - mse_at(&start, &drop, &cfg, PolarizationMode::Dual).unwrap();
        let d_f = data.objective(&step) - f_t;
        prop_assert!((d_mse - d_f).abs() <= 1e-9 * (1.0 + d_f.abs()));
    }

    #[test]
    fn bs_polarization_term_tracks_the_mse(seed in any::<u64>()) {
        let (cfg, drop, vars, mut rng) = instance(seed);
        let ch = vars.channels(&drop, &cfg, PolarizationMode::Dual);
        let bs = rng.random_range(0..cfg.cells);
        let data = VarpiSubproblemData::build(&vars, &ch, bs).unwrap();
        let mut moved = vars.clone();
        moved.pol.varpi[bs] = [phase(&mut rng), phase(&mut rng)];
        let d_g = data.g_value(&moved.pol.varpi[bs]) - data.g_value(&vars.pol.varpi[bs]);
        let d_mse = mse_closed_form(&moved, &ch.with_polarization(&moved.pol), &cfg).unwrap()
            - mse_closed_form(&vars, &ch, &cfg).unwrap();
        prop_assert!((d_g - d_mse).abs() <= 1e-9 * (1.0 + d_mse.abs()));
    }

    #[test]
    fn relaxed_subproblem_stays_in_the_correlation_set(seed in any::<u64>()) {
        let (cfg, drop, vars, mut rng) = instance(seed);
        let ch = vars.channels(&drop, &cfg, PolarizationMode::Dual);
        let data = VarpiSubproblemData::build(&vars, &ch, rng.random_range(0..cfg.cells)).unwrap();
        let x_t = CVector::from_fn(9, |_, _| cn(&mut rng));
        let sol = solve_p44(&data, &x_t, 1e-12).unwrap();
        let v = sol.v.as_matrix();
        prop_assert!((0..3).all(|t| (v[(t, t)] - Complex64::new(1.0, 0.0)).norm() < 1e-8));
        prop_assert!(hermitian_eig(&sol.v).unwrap().min_value() > -1e-8);
        prop_assert!(sol.kkt_residual <= 1e-7);
    }

    #[test]
    fn position_update_is_feasible_and_monotone(seed in any::<u64>()) {
        let (cfg, drop, vars, _) = instance(seed);
        let opts = PositionOptions { alpha0: 0.1 * cfg.lambda_m, tol: 1e-6, t_max: 50 };
        for mode in [PolarizationMode::Dual, PolarizationMode::Single] {
            let before = mse_at(&vars, &drop, &cfg, mode).unwrap();
            let (layout, rep) = update_positions(&vars, &drop, &cfg, mode, opts).unwrap();
            prop_assert!(check_layout_feasible(&layout, &cfg));
            prop_assert!(rep.trace.windows(2).all(|w| w[1] <= w[0]));
            let after = mse_at(&DecisionVars { layout, ..vars.clone() }, &drop, &cfg, mode).unwrap();
            prop_assert!(after <= before + slack(before));
        }
    }
}

#[test]
fn position_update_usually_makes_progress() {
    let mut improved = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = SystemConfig::desk_scale();
        let drop = sample_drop(&cfg, seed).unwrap();
        let vars = random_vars(&cfg, &drop, &mut rng);
        let opts = PositionOptions { alpha0: 0.1 * cfg.lambda_m, tol: 1e-6, t_max: 50 };
        let before = mse_at(&vars, &drop, &cfg, PolarizationMode::Dual).unwrap();
        let (layout, _) = update_positions(&vars, &drop, &cfg, PolarizationMode::Dual, opts).unwrap();
        let after = mse_at(&DecisionVars { layout, ..vars }, &drop, &cfg, PolarizationMode::Dual).unwrap();
        if after < before {
            improved += 1;
        }
    }
    assert!(improved >= 16, "strict decrease on only {improved} of 20 drops");
}

#[test]
fn zero_linear_term_gives_the_identity() {
    let cfg = SystemConfig { cells: 2, users_per_cell: 2, antennas: 2, ..SystemConfig::desk_scale() };
    let drop = sample_drop(&cfg, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let vars = random_vars(&cfg, &drop, &mut rng);
    let ch = vars.channels(&drop, &cfg, PolarizationMode::Dual);
    let mut data = VarpiSubproblemData::build(&vars, &ch, 0).unwrap();
    // With J = 0 and x_t = 0 the surrogate is lambda ||V||_F^2, whose
    // minimizer over unit-diagonal PSD matrices is the identity.
    data.j = HermitianMatrix::from_hermitian_part(&CMatrix::zeros(3, 3));
    let sol = solve_p44(&data, &CVector::zeros(9), 1e-12).unwrap();
    assert!((sol.v.as_matrix() - CMatrix::identity(3, 3)).norm() < 1e-9);
}
