//! Sum-MSE of multi-cell over-the-air averaging: closed form, a Monte-Carlo
//! estimate built from the received signals, and the gradient with respect
//! to antenna coordinates.
//!
//! Every BS `i` estimates the mean of all `B K` user symbols as
//! `w_i^H y_i` with `y_i = sum_j H_ij^H sum_k h_jk a_jk s_jk + sum_j n_j`
//! (own cell: `H_ii = I`). Noise plus interference has power
//! `sigma2 = sigma_n2 + sigma_I2` per receiver, so BS `i` sees `B sigma2`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{field_response, ChannelSet, PolarizationMode, PolarizationState};
use crate::error::{Result, SolverError};
use crate::numerics::{CMatrix, CVector, ZERO};
use crate::scene::{complex_normal, initial_layout, Drop, Layout, SystemConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionVars {
    /// M x B, column `i` is the receive combiner of BS `i`.
    pub w: CMatrix,
    /// Transmit scalars, user `k` of cell `i` at `i * K + k`.
    pub a: Vec<Complex64>,
    pub layout: Layout,
    pub pol: PolarizationState,
}

impl DecisionVars {
    /// Grid layout, `a = sqrt(P)`, `W = 0`, all-ones polarization.
    pub fn initial(cfg: &SystemConfig) -> Self {
        DecisionVars {
            w: CMatrix::zeros(cfg.antennas, cfg.cells),
            a: vec![Complex64::new(cfg.power_w.sqrt(), 0.0); cfg.total_users()],
            layout: initial_layout(cfg),
            pol: PolarizationState::ones(cfg.cells, cfg.users_per_cell),
        }
    }

    pub fn channels(&self, drop: &Drop, cfg: &SystemConfig, mode: PolarizationMode) -> ChannelSet {
        ChannelSet::build(drop, &self.layout, &self.pol, mode, cfg)
    }

    pub fn power_feasible(&self, cfg: &SystemConfig) -> bool {
        self.a.iter().all(|a| a.norm_sqr() <= cfg.power_w + 1e-12)
    }
}

fn check_dims(vars: &DecisionVars, ch: &ChannelSet) -> Result<(usize, usize, usize)> {
    let (b, k, m) = (ch.cells(), ch.users_per_cell(), ch.antennas());
    if vars.w.nrows() != m || vars.w.ncols() != b {
        return Err(SolverError::Dimension(format!(
            "W is {}x{}, channels need {}x{}",
            vars.w.nrows(),
            vars.w.ncols(),
            m,
            b
        )));
    }
    if vars.a.len() != b * k {
        return Err(SolverError::Dimension(format!("a has {} entries, need {}", vars.a.len(), b * k)));
    }
    Ok((b, k, m))
}

/// `x_ijk = a_jk w_i^H H_ij^H h_jk`, indexed `[i][j * K + k]`.
pub fn aggregation_gains(vars: &DecisionVars, ch: &ChannelSet) -> Result<Vec<Vec<Complex64>>> {
    let (b, k, _) = check_dims(vars, ch)?;
    Ok((0..b)
        .map(|i| {
            let w = vars.w.column(i);
            let mut row = Vec::with_capacity(b * k);
            for j in 0..b {
                let u = ch.bs_adj[i][j].adjoint() * w;
                for kk in 0..k {
                    row.push(u.dotc(&ch.h[j][kk]) * vars.a[j * k + kk]);
                }
            }
            row
        })
        .collect())
}

pub fn mse_closed_form(vars: &DecisionVars, ch: &ChannelSet, cfg: &SystemConfig) -> Result<f64> {
    let (b, k, _) = check_dims(vars, ch)?;
    let x = aggregation_gains(vars, ch)?;
    let bk = (b * k) as f64;
    let mut quad = 0.0;
    let mut lin = 0.0;
    for row in &x {
        for z in row {
            quad += z.norm_sqr();
            lin += z.re;
        }
    }
    let noise: f64 = (0..b).map(|i| vars.w.column(i).norm_squared()).sum::<f64>() * b as f64 * cfg.sigma2();
    Ok(1.0 / k as f64 + quad + noise - 2.0 / bk * lin)
}

/// Builds the channels for `vars` and evaluates the closed form.
pub fn mse_at(vars: &DecisionVars, drop: &Drop, cfg: &SystemConfig, mode: PolarizationMode) -> Result<f64> {
    mse_closed_form(vars, &vars.channels(drop, cfg, mode), cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolDist {
    /// Unit-variance circular complex Gaussian.
    Gaussian,
    /// Equiprobable +-1.
    Antipodal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Sample mean of `sum_i |target - w_i^H y_i|^2` over `n_draws` symbol and
/// noise draws.
pub fn mse_monte_carlo<R: Rng + ?Sized>(
    vars: &DecisionVars,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    n_draws: usize,
    symbols: SymbolDist,
    rng: &mut R,
) -> Result<Estimate> {
    let (b, k, m) = check_dims(vars, ch)?;
    let bk = (b * k) as f64;
    let sigma2 = cfg.sigma2();
    let mut samples = Vec::with_capacity(n_draws);
    let mut s = vec![ZERO; b * k];
    for _ in 0..n_draws.max(1) {
        for v in s.iter_mut() {
            *v = match symbols {
                SymbolDist::Gaussian => complex_normal(rng, 1.0),
                SymbolDist::Antipodal => Complex64::new(if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0),
            };
        }
        let target: Complex64 = s.iter().sum::<Complex64>() / bk;
        let tx: Vec<CVector> = (0..b)
            .map(|j| {
                let mut z = CVector::zeros(m);
                for kk in 0..k {
                    z += &ch.h[j][kk] * (vars.a[j * k + kk] * s[j * k + kk]);
                }
                z
            })
            .collect();
        let noise: Vec<CVector> = (0..b).map(|_| CVector::from_fn(m, |_, _| complex_normal(rng, sigma2))).collect();
        let mut err = 0.0;
        for i in 0..b {
            let mut y = CVector::zeros(m);
            for j in 0..b {
                y += &ch.bs_adj[i][j] * &tx[j];
                y += &noise[j];
            }
            err += (target - vars.w.column(i).dotc(&y)).norm_sqr();
        }
        samples.push(err);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 { samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Ok(Estimate { mean, std_error: (var / n).sqrt() })
}

/// Gradient of the closed-form MSE with respect to `vars.layout.coords`.
pub fn mse_grad_positions(
    vars: &DecisionVars,
    drop: &Drop,
    cfg: &SystemConfig,
    mode: PolarizationMode,
) -> Result<Vec<f64>> {
    let ch = vars.channels(drop, cfg, mode);
    let (b, k, m_ant) = check_dims(vars, &ch)?;
    let kappa = 2.0 * PI / cfg.lambda_m;
    let bk = (b * k) as f64;
    let layout = &vars.layout;
    let mut grad = vec![0.0; layout.coords.len()];
    let idx = |i: usize, m: usize| 2 * (i * m_ant + m);
    let minus_j = Complex64::new(0.0, -1.0);

    let dirs = |angles: &crate::scene::PathAngles| -> Vec<[f64; 2]> {
        angles.elevation.iter().zip(&angles.azimuth).map(|(&t, &p)| crate::channel::direction(t, p)).collect()
    };
    let user_q: Vec<Vec<(CMatrix, Vec<[f64; 2]>)>> = (0..b)
        .map(|j| {
            let arr = layout.bs(j);
            (0..k)
                .map(|kk| {
                    let ang = &drop.user(j, kk).angles;
                    (field_response(&arr, ang, cfg.lambda_m), dirs(ang))
                })
                .collect()
        })
        .collect();

    for i in 0..b {
        let w = vars.w.column(i).into_owned();
        for j in 0..b {
            let u = ch.bs_adj[i][j].adjoint() * &w;
            let bs_parts = (i != j).then(|| {
                let link = drop.bs_link(i, j);
                let f = field_response(&layout.bs(j), &link.tx, cfg.lambda_m);
                let g = field_response(&layout.bs(i), &link.rx, cfg.lambda_m);
                (f, g, dirs(&link.tx), dirs(&link.rx), &link.gains)
            });
            for kk in 0..k {
                let a = vars.a[j * k + kk];
                let s = ch.user_factor[j][kk];
                let x = u.dotc(&ch.h[j][kk]) * a;
                let e = x.conj() * 2.0 - 2.0 / bk;
                let gains = &drop.user(j, kk).gains;

                let (q, vdirs) = &user_q[j][kk];
                let coef = e * a * s;
                for m in 0..m_ant {
                    let mut dx = ZERO;
                    let mut dy = ZERO;
                    for (l, v) in vdirs.iter().enumerate() {
                        let t = minus_j * kappa * q[(l, m)].conj() * gains[l];
                        dx += t * v[0];
                        dy += t * v[1];
                    }
                    let c = coef * u[m].conj();
                    grad[idx(j, m)] += (c * dx).re;
                    grad[idx(j, m) + 1] += (c * dy).re;
                }

                if let Some((f, g, fdirs, gdirs, sigma)) = &bs_parts {
                    let hg = &ch.h_gen[j][kk];
                    let fh = f * hg;
                    let gw = g * &w;
                    let coef2 = e * a * s * ch.bs_factor[i][j];
                    for p in 0..m_ant {
                        let mut dx = ZERO;
                        let mut dy = ZERO;
                        for (l, gd) in gdirs.iter().enumerate() {
                            let t = minus_j * kappa * g[(l, p)].conj() * sigma[l] * fh[l];
                            dx += t * gd[0];
                            dy += t * gd[1];
                        }
                        let c = coef2 * w[p].conj();
                        grad[idx(i, p)] += (c * dx).re;
                        grad[idx(i, p) + 1] += (c * dy).re;
                    }
                    for qn in 0..m_ant {
                        let mut dx = ZERO;
                        let mut dy = ZERO;
                        for (l, fd) in fdirs.iter().enumerate() {
                            let t = gw[l].conj() * sigma[l] * Complex64::new(0.0, kappa) * f[(l, qn)];
                            dx += t * fd[0];
                            dy += t * fd[1];
                        }
                        let c = coef2 * hg[qn];
                        grad[idx(j, qn)] += (c * dx).re;
                        grad[idx(j, qn) + 1] += (c * dy).re;
                    }
                }
            }
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{effective_channels, PolarizationMatrices, Unpolarized};
    use crate::numerics::ONE;
    use crate::scene::{sample_drop, stream, Purpose};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Scalar link with every gain and factor equal to one.
    fn scalar_system(h: Complex64) -> (ChannelSet, SystemConfig) {
        let cfg = SystemConfig { cells: 1, users_per_cell: 1, antennas: 1, ..SystemConfig::desk_scale() };
        let un = Unpolarized { h_gen: vec![vec![CVector::from_element(1, h)]], bs_gen: vec![vec![None]] };
        let am = PolarizationMatrices { a_user: vec![vec![[[ONE, ZERO], [ZERO, ONE]]]], a_bs: vec![vec![None]] };
        let ch = effective_channels(un, am, &PolarizationState::ones(1, 1), PolarizationMode::Single);
        (ch, cfg)
    }

    fn scalar_vars(w: f64, a: f64) -> DecisionVars {
        DecisionVars {
            w: CMatrix::from_element(1, 1, c(w, 0.0)),
            a: vec![c(a, 0.0)],
            layout: Layout { antennas: 1, coords: vec![0.0, 0.0] },
            pol: PolarizationState::ones(1, 1),
        }
    }

    #[test]
    fn perfect_scalar_aggregation_is_zero() {
        let (ch, mut cfg) = scalar_system(ONE);
        cfg.sigma_n2 = 0.0;
        cfg.sigma_i2 = 0.0;
        assert!(mse_closed_form(&scalar_vars(1.0, 1.0), &ch, &cfg).unwrap().abs() < 1e-15);
    }

    #[test]
    fn zero_combiner_gives_one_over_k() {
        let cfg = SystemConfig::desk_scale();
        let drop = sample_drop(&cfg, 0).unwrap();
        let vars = DecisionVars::initial(&cfg);
        let v = mse_at(&vars, &drop, &cfg, PolarizationMode::Dual).unwrap();
        assert_eq!(v, 1.0 / cfg.users_per_cell as f64);
    }

    #[test]
    fn scalar_noisy_case_matches_monte_carlo() {
        let (ch, mut cfg) = scalar_system(ONE);
        cfg.sigma_n2 = 1.0;
        cfg.sigma_i2 = 0.0;
        let vars = scalar_vars(0.5, 1.0);
        let closed = mse_closed_form(&vars, &ch, &cfg).unwrap();
        assert!((closed - 0.5).abs() < 1e-15);
        let mut rng = stream(1, Purpose::MonteCarlo, 0);
        let est = mse_monte_carlo(&vars, &ch, &cfg, 1_000_000, SymbolDist::Gaussian, &mut rng).unwrap();
        assert!((est.mean - 0.5).abs() < 0.01 * 0.5);
    }

    #[test]
    fn noiseless_exact_aggregation_monte_carlo_is_zero() {
        let (ch, mut cfg) = scalar_system(c(0.0, 2.0));
        cfg.sigma_n2 = 0.0;
        cfg.sigma_i2 = 0.0;
        let mut vars = scalar_vars(0.0, 1.0);
        vars.w[(0, 0)] = c(0.0, 0.5);
        let mut rng = stream(2, Purpose::MonteCarlo, 0);
        let est = mse_monte_carlo(&vars, &ch, &cfg, 1000, SymbolDist::Gaussian, &mut rng).unwrap();
        assert!(est.mean < 1e-28);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let (ch, cfg) = scalar_system(ONE);
        let mut vars = scalar_vars(1.0, 1.0);
        vars.a.push(ONE);
        assert!(matches!(mse_closed_form(&vars, &ch, &cfg), Err(SolverError::Dimension(_))));
    }

    #[test]
    fn zero_step_leaves_layout() {
        let cfg = SystemConfig::desk_scale();
        let vars = DecisionVars::initial(&cfg);
        let drop = sample_drop(&cfg, 0).unwrap();
        let g = mse_grad_positions(&vars, &drop, &cfg, PolarizationMode::Dual).unwrap();
        let moved: Vec<f64> = vars.layout.coords.iter().zip(&g).map(|(r, gi)| r - 0.0 * gi).collect();
        assert_eq!(moved, vars.layout.coords);
        // W = 0 makes the MSE position-independent.
        assert!(g.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn single_antenna_gradient_matches_differences() {
        let cfg = SystemConfig { cells: 1, users_per_cell: 1, antennas: 1, paths: 1, ..SystemConfig::desk_scale() };
        let drop = sample_drop(&cfg, 3).unwrap();
        let mut vars = DecisionVars::initial(&cfg);
        vars.w[(0, 0)] = c(300.0, -200.0);
        vars.layout.coords = vec![0.01, -0.02];
        let g = mse_grad_positions(&vars, &drop, &cfg, PolarizationMode::Dual).unwrap();
        let hstep = 1e-6 * cfg.lambda_m;
        for n in 0..2 {
            let mut p = vars.clone();
            p.layout.coords[n] += hstep;
            let mut q = vars.clone();
            q.layout.coords[n] -= hstep;
            let fd = (mse_at(&p, &drop, &cfg, PolarizationMode::Dual).unwrap()
                - mse_at(&q, &drop, &cfg, PolarizationMode::Dual).unwrap())
                / (2.0 * hstep);
            assert!((fd - g[n]).abs() <= 1e-4 * fd.abs().max(1e-9), "{fd} vs {}", g[n]);
        }
    }
}
