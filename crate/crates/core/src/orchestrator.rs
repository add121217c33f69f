//! Alternating optimization over instantaneous channels and the two-stage
//! scheme that places antennas against a sample average of channels.

use std::time::Instant;

use log::warn;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSet, PolarizationMode};
use crate::error::Result;
use crate::objective::{mse_at, mse_closed_form, mse_grad_positions, DecisionVars};
use crate::scene::{stream, Drop, Layout, Purpose, SystemConfig};
use crate::subsolvers::{
    descend_positions, sca_update_m, update_a, update_positions, update_varpi, update_w, PositionObjective,
    PositionOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Dual-polarized movable antennas.
    Dpma,
    /// Single-polarized movable antennas.
    Ma,
    /// Dual-polarized antennas on the fixed grid.
    Fpa,
}

impl Scheme {
    pub fn mode(self) -> PolarizationMode {
        match self {
            Scheme::Ma => PolarizationMode::Single,
            Scheme::Dpma | Scheme::Fpa => PolarizationMode::Dual,
        }
    }

    pub fn moves_antennas(self) -> bool {
        self != Scheme::Fpa
    }

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Dpma => "dpma",
            Scheme::Ma => "ma",
            Scheme::Fpa => "fpa",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Relative MSE change that ends the alternating loop.
    pub tol: f64,
    pub max_outer: usize,
    pub m_tol: f64,
    pub m_max_iter: usize,
    pub varpi_tol: f64,
    pub varpi_max_iter: usize,
    pub n_samples: usize,
    /// First trial move of the steepest antenna coordinate, in wavelengths.
    pub alpha0_wavelengths: f64,
    pub pos_tol: f64,
    pub pos_max_iter: usize,
    /// Stage I of the two-stage scheme.
    pub inner_tol: f64,
    pub inner_max: usize,
    /// Stage II of the two-stage scheme.
    pub outer_tol: f64,
    pub outer_max: usize,
    /// Selects the randomization stream under the config seed.
    pub rng_stream: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-5,
            max_outer: 50,
            m_tol: 1e-6,
            m_max_iter: 200,
            varpi_tol: 1e-6,
            varpi_max_iter: 30,
            n_samples: 100,
            alpha0_wavelengths: 0.1,
            pos_tol: 1e-6,
            pos_max_iter: 200,
            inner_tol: 1e-5,
            inner_max: 30,
            outer_tol: 1e-4,
            outer_max: 100,
            rng_stream: 0,
        }
    }
}

impl SolveOptions {
    pub fn positions(&self, cfg: &SystemConfig) -> PositionOptions {
        PositionOptions { alpha0: self.alpha0_wavelengths * cfg.lambda_m, tol: self.pos_tol, t_max: self.pos_max_iter }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub scheme: Scheme,
    /// MSE at the initial point followed by the MSE after every outer round
    /// (for the two-stage scheme: Stage I rounds on the first sample).
    pub mse_trace: Vec<f64>,
    /// Sample-average MSE at the start of Stage II and after each of its
    /// outer iterations; empty for single-drop solves.
    pub stage_two_trace: Vec<f64>,
    pub converged: bool,
    /// Outer rounds performed.
    pub iters: usize,
    /// Iterations summed over all inner solvers.
    pub inner_iters: usize,
    /// Block updates discarded because they would have raised the MSE.
    pub rejected_updates: usize,
    pub wall_time: f64,
    pub final_vars: DecisionVars,
}

impl SolveReport {
    pub fn final_mse(&self) -> f64 {
        *self.stage_two_trace.last().or(self.mse_trace.last()).expect("non-empty trace")
    }
}

struct Round<'a> {
    drop: &'a Drop,
    cfg: &'a SystemConfig,
    scheme: Scheme,
    opts: &'a SolveOptions,
    rng: ChaCha20Rng,
    inner_iters: usize,
    rejected: usize,
}

impl Round<'_> {
    fn keep_if_better(
        &mut self,
        vars: &mut DecisionVars,
        cand: DecisionVars,
        ch: &ChannelSet,
        mse: &mut f64,
    ) -> Result<bool> {
        let new = mse_closed_form(&cand, ch, self.cfg)?;
        if new <= *mse {
            *vars = cand;
            *mse = new;
            Ok(true)
        } else {
            if new > *mse + 1e-9 {
                self.rejected += 1;
                warn!("discarding a block update that raised the MSE from {mse} to {new}");
            }
            Ok(false)
        }
    }

    /// W, a, m, varpi in that order.
    fn short_term(&mut self, vars: &mut DecisionVars, mse: &mut f64) -> Result<()> {
        let mode = self.scheme.mode();
        let mut ch = vars.channels(self.drop, self.cfg, mode);
        let w = update_w(vars, &ch, self.cfg)?;
        self.keep_if_better(vars, DecisionVars { w, ..vars.clone() }, &ch, mse)?;
        let a = update_a(vars, &ch, self.cfg)?;
        self.keep_if_better(vars, DecisionVars { a, ..vars.clone() }, &ch, mse)?;
        if mode == PolarizationMode::Single {
            return Ok(());
        }
        let (m, rep) = sca_update_m(vars, &ch, self.opts.m_tol, self.opts.m_max_iter)?;
        self.inner_iters += rep.iterations;
        let mut cand = vars.clone();
        cand.pol.m = m;
        let cand_ch = ch.with_polarization(&cand.pol);
        if self.keep_if_better(vars, cand, &cand_ch, mse)? {
            ch = cand_ch;
        }
        let (varpi, rep) =
            update_varpi(vars, &ch, self.opts.varpi_tol, self.opts.varpi_max_iter, self.opts.n_samples, &mut self.rng)?;
        self.inner_iters += rep.iterations.iter().sum::<usize>();
        let mut cand = vars.clone();
        cand.pol.varpi = varpi;
        let cand_ch = ch.with_polarization(&cand.pol);
        self.keep_if_better(vars, cand, &cand_ch, mse)?;
        Ok(())
    }

    fn positions(&mut self, vars: &mut DecisionVars, mse: &mut f64) -> Result<()> {
        let mode = self.scheme.mode();
        let (layout, rep) = update_positions(vars, self.drop, self.cfg, mode, self.opts.positions(self.cfg))?;
        self.inner_iters += rep.iterations;
        let cand = DecisionVars { layout, ..vars.clone() };
        let ch = cand.channels(self.drop, self.cfg, mode);
        self.keep_if_better(vars, cand, &ch, mse)?;
        Ok(())
    }
}

fn randomization_rng(cfg: &SystemConfig, opts: &SolveOptions) -> ChaCha20Rng {
    stream(cfg.rng_seed, Purpose::Randomization, opts.rng_stream)
}

fn relative_change(prev: f64, cur: f64) -> f64 {
    (prev - cur).abs() / prev.abs().max(1e-300)
}

/// Alternating optimization for the given scheme, starting from
/// [`DecisionVars::initial`].
pub fn solve_scheme(drop: &Drop, cfg: &SystemConfig, opts: &SolveOptions, scheme: Scheme) -> Result<SolveReport> {
    solve_from(drop, cfg, opts, scheme, DecisionVars::initial(cfg), scheme.moves_antennas())
}

/// Alternating optimization from `vars`; positions are updated only when
/// `move_antennas` is set.
pub fn solve_from(
    drop: &Drop,
    cfg: &SystemConfig,
    opts: &SolveOptions,
    scheme: Scheme,
    mut vars: DecisionVars,
    move_antennas: bool,
) -> Result<SolveReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut round = Round { drop, cfg, scheme, opts, rng: randomization_rng(cfg, opts), inner_iters: 0, rejected: 0 };
    let mut mse = mse_at(&vars, drop, cfg, scheme.mode())?;
    let mut trace = vec![mse];
    let mut converged = false;
    let mut iters = 0;
    while iters < opts.max_outer {
        iters += 1;
        let prev = mse;
        round.short_term(&mut vars, &mut mse).map_err(|e| e.at(iters))?;
        if move_antennas {
            round.positions(&mut vars, &mut mse).map_err(|e| e.at(iters))?;
        }
        trace.push(mse);
        if relative_change(prev, mse) <= opts.tol {
            converged = true;
            break;
        }
    }
    Ok(SolveReport {
        scheme,
        mse_trace: trace,
        stage_two_trace: Vec::new(),
        converged,
        iters,
        inner_iters: round.inner_iters,
        rejected_updates: round.rejected,
        wall_time: start.elapsed().as_secs_f64(),
        final_vars: vars,
    })
}

/// Joint optimization of all five blocks with dual-polarized movable
/// antennas.
pub fn alternating_optimize(drop: &Drop, cfg: &SystemConfig, opts: &SolveOptions) -> Result<SolveReport> {
    solve_scheme(drop, cfg, opts, Scheme::Dpma)
}

/// Average MSE over channel samples at fixed non-position variables.
pub struct SampleAverage<'a> {
    pub vars: &'a DecisionVars,
    pub drops: &'a [Drop],
    pub cfg: &'a SystemConfig,
    pub mode: PolarizationMode,
}

impl SampleAverage<'_> {
    fn at(&self, layout: &Layout) -> DecisionVars {
        DecisionVars { layout: layout.clone(), ..self.vars.clone() }
    }
}

impl PositionObjective for SampleAverage<'_> {
    fn value(&self, layout: &Layout) -> Result<f64> {
        let v = self.at(layout);
        let mut acc = 0.0;
        for d in self.drops {
            acc += mse_at(&v, d, self.cfg, self.mode)?;
        }
        Ok(acc / self.drops.len() as f64)
    }

    fn gradient(&self, layout: &Layout) -> Result<Vec<f64>> {
        let v = self.at(layout);
        let mut acc = vec![0.0; layout.coords.len()];
        for d in self.drops {
            for (a, g) in acc.iter_mut().zip(mse_grad_positions(&v, d, self.cfg, self.mode)?) {
                *a += g;
            }
        }
        let s = self.drops.len() as f64;
        Ok(acc.into_iter().map(|a| a / s).collect())
    }
}

/// Stage I optimizes W, a, m and varpi on `drops[0]` at the initial grid;
/// Stage II then moves the antennas against the average MSE over all
/// `drops` with those variables frozen.
pub fn two_timescale_optimize(
    drops: &[Drop],
    cfg: &SystemConfig,
    opts: &SolveOptions,
    scheme: Scheme,
) -> Result<SolveReport> {
    assert!(!drops.is_empty(), "at least one channel sample is required");
    let start = Instant::now();
    let stage_one = SolveOptions { tol: opts.inner_tol, max_outer: opts.inner_max, ..*opts };
    let mut report = solve_from(&drops[0], cfg, &stage_one, scheme, DecisionVars::initial(cfg), false)?;
    let vars = report.final_vars.clone();
    let obj = SampleAverage { vars: &vars, drops, cfg, mode: scheme.mode() };
    let mut layout = vars.layout.clone();
    let mut value = obj.value(&layout)?;
    let mut trace = vec![value];
    let mut converged = !scheme.moves_antennas();
    let mut outer = 0;
    while scheme.moves_antennas() && outer < opts.outer_max {
        outer += 1;
        let (next, rep) = descend_positions(&obj, &layout, cfg, opts.positions(cfg)).map_err(|e| e.at(outer))?;
        report.inner_iters += rep.iterations;
        let next_value = *rep.trace.last().expect("trace has the start value");
        let prev = value;
        layout = next;
        value = next_value;
        trace.push(value);
        if relative_change(prev, value) <= opts.outer_tol {
            converged = true;
            break;
        }
    }
    report.converged = report.converged && converged;
    report.iters += outer;
    report.stage_two_trace = trace;
    report.final_vars.layout = layout;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Re-optimizes W, a, m and varpi for one drop with the layout held fixed.
pub fn optimize_at_layout(
    drop: &Drop,
    cfg: &SystemConfig,
    opts: &SolveOptions,
    scheme: Scheme,
    layout: &Layout,
) -> Result<SolveReport> {
    let vars = DecisionVars { layout: layout.clone(), ..DecisionVars::initial(cfg) };
    solve_from(drop, cfg, opts, scheme, vars, false)
}
