//! Seeded Monte-Carlo sweeps. Every scheme at a sweep point sees the same
//! drops, and results are gathered in drop order whatever the thread count.

use std::time::Instant;

use dpma_core::baselines::single_cell_scenario;
use dpma_core::objective::{mse_at, DecisionVars};
use dpma_core::orchestrator::{solve_scheme, two_timescale_optimize, Scheme, SolveOptions, SolveReport};
use dpma_core::scene::{initial_layout, resample_gains, sample_drop, stream, ConfigError, Drop, Purpose, SystemConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demo::{distributed_demo, DemoProblem};
use crate::spec::{ExperimentKind, ExperimentSpec};

/// One measured quantity for one drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropRecord {
    pub sweep_value: f64,
    pub scheme: String,
    pub drop: u64,
    pub metric: String,
    pub iteration: Option<usize>,
    pub value: Option<f64>,
    pub iters: usize,
    pub inner_iters: usize,
    pub converged: bool,
    pub rejected_updates: usize,
    pub error: Option<String>,
}

/// Aggregate over the drops of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub experiment: String,
    pub sweep_param: String,
    pub sweep_value: f64,
    pub scheme: String,
    pub metric: String,
    pub iteration: Option<usize>,
    pub mean: Option<f64>,
    pub std_error: Option<f64>,
    pub n_ok: usize,
    pub n_failed: usize,
    pub mean_iters: f64,
    pub mean_inner_iters: f64,
    pub converged_fraction: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub rows: Vec<Row>,
    pub records: Vec<DropRecord>,
    /// Seconds spent on each sweep point, in sweep order.
    pub point_seconds: Vec<f64>,
}

impl ExperimentResult {
    pub fn failed_records(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_some()).count()
    }

    /// Per-drop values of one series, in drop order.
    pub fn series(&self, sweep_value: f64, scheme: &str, metric: &str) -> Vec<Option<f64>> {
        self.records
            .iter()
            .filter(|r| {
                r.sweep_value == sweep_value && r.scheme == scheme && r.metric == metric && r.iteration.is_none()
            })
            .map(|r| r.value)
            .collect()
    }

    pub fn row(&self, sweep_value: f64, scheme: &str, metric: &str) -> Option<&Row> {
        self.rows
            .iter()
            .find(|r| r.sweep_value == sweep_value && r.scheme == scheme && r.metric == metric && r.iteration.is_none())
    }
}

struct Ctx<'a> {
    spec: &'a ExperimentSpec,
    cfg: &'a SystemConfig,
    sweep_value: f64,
    drop: u64,
    out: Vec<DropRecord>,
}

impl Ctx<'_> {
    fn opts(&self) -> SolveOptions {
        SolveOptions { rng_stream: self.drop, ..self.spec.solve }
    }

    fn push(&mut self, scheme: &str, metric: &str, value: f64, rep: Option<&SolveReport>) {
        self.out.push(DropRecord {
            sweep_value: self.sweep_value,
            scheme: scheme.to_string(),
            drop: self.drop,
            metric: metric.to_string(),
            iteration: None,
            value: Some(value),
            iters: rep.map_or(0, |r| r.iters),
            inner_iters: rep.map_or(0, |r| r.inner_iters),
            converged: rep.is_none_or(|r| r.converged),
            rejected_updates: rep.map_or(0, |r| r.rejected_updates),
            error: None,
        });
    }

    fn fail(&mut self, scheme: &str, metric: &str, err: impl ToString) {
        self.out.push(DropRecord {
            sweep_value: self.sweep_value,
            scheme: scheme.to_string(),
            drop: self.drop,
            metric: metric.to_string(),
            iteration: None,
            value: None,
            iters: 0,
            inner_iters: 0,
            converged: false,
            rejected_updates: 0,
            error: Some(err.to_string()),
        });
    }

    fn solve(&mut self, drop: &Drop, cfg: &SystemConfig, scheme: Scheme, label: &str) -> Option<SolveReport> {
        match solve_scheme(drop, cfg, &self.opts(), scheme) {
            Ok(rep) => {
                self.push(label, "mse", rep.final_mse(), Some(&rep));
                Some(rep)
            }
            Err(e) => {
                self.fail(label, "mse", e);
                None
            }
        }
    }

    fn trace(&mut self, label: &str, rep: &SolveReport) {
        let last = rep.final_mse();
        for t in 0..=self.spec.solve.max_outer {
            let value = rep.mse_trace.get(t).copied().unwrap_or(last);
            self.out.push(DropRecord { iteration: Some(t), ..self.template(label, "mse_outer", value, rep) });
        }
    }

    fn template(&self, scheme: &str, metric: &str, value: f64, rep: &SolveReport) -> DropRecord {
        DropRecord {
            sweep_value: self.sweep_value,
            scheme: scheme.to_string(),
            drop: self.drop,
            metric: metric.to_string(),
            iteration: None,
            value: Some(value),
            iters: rep.iters,
            inner_iters: rep.inner_iters,
            converged: rep.converged,
            rejected_updates: rep.rejected_updates,
            error: None,
        }
    }

    fn statistical(&mut self, drop: &Drop, scheme: Scheme) {
        let (cfg, idx) = (self.cfg, self.drop);
        let label = scheme.label();
        let samples: Vec<Drop> = (0..self.spec.samples as u64).map(|n| resample_gains(drop, cfg, idx, n)).collect();
        let held: Vec<Drop> = (0..self.spec.held_out as u64)
            .map(|n| resample_gains(drop, cfg, idx, self.spec.samples as u64 + n))
            .collect();
        let rep = match two_timescale_optimize(&samples, cfg, &self.opts(), scheme) {
            Ok(rep) => rep,
            Err(e) => return self.fail(&format!("{label}_statistical"), "heldout_mse", e),
        };
        let vars = rep.final_vars.clone();
        let grid = DecisionVars { layout: initial_layout(cfg), ..vars.clone() };
        let mode = scheme.mode();
        let heldout = |v: &DecisionVars| -> dpma_core::Result<f64> {
            let mut acc = 0.0;
            for d in &held {
                acc += mse_at(v, d, cfg, mode)?;
            }
            Ok(acc / held.len().max(1) as f64)
        };
        let evals = (heldout(&vars), heldout(&grid), mse_at(&vars, &samples[0], cfg, mode));
        match evals {
            (Ok(h), Ok(g), Ok(t)) => {
                self.push(&format!("{label}_statistical"), "heldout_mse", h, Some(&rep));
                self.push(&format!("{label}_statistical_grid"), "heldout_mse", g, Some(&rep));
                self.push(&format!("{label}_statistical"), "train_mse", t, Some(&rep));
            }
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => {
                self.fail(&format!("{label}_statistical"), "heldout_mse", e)
            }
        }
        match solve_scheme(&samples[0], cfg, &self.opts(), scheme) {
            Ok(inst) => self.push(&format!("{label}_instantaneous"), "train_mse", inst.final_mse(), Some(&inst)),
            Err(e) => self.fail(&format!("{label}_instantaneous"), "train_mse", e),
        }
    }

    fn demo(&mut self, drop: &Drop, scheme: Scheme) {
        let cfg = self.cfg;
        let label = scheme.label();
        let Some(rep) = self.solve(drop, cfg, scheme, label) else { return };
        let vars = &rep.final_vars;
        let ch = vars.channels(drop, cfg, scheme.mode());
        let mut rng = stream(cfg.rng_seed, Purpose::Demo, self.drop);
        let problem = DemoProblem::random(cfg.total_users(), self.spec.demo_dim, &mut rng);
        match distributed_demo(&problem, vars, &ch, cfg, &mut rng) {
            Ok(d) => {
                let mut base = self.template(label, "relative_distance", d.distance_to_optimum, &rep);
                base.iters = d.rounds;
                base.converged = d.stopped_by_tolerance;
                self.out.push(base.clone());
                self.out.push(DropRecord {
                    metric: "consensus_error".into(),
                    value: Some(d.consensus_error),
                    ..base.clone()
                });
                self.out.push(DropRecord { metric: "rounds".into(), value: Some(d.rounds as f64), ..base });
            }
            Err(e) => self.fail(label, "relative_distance", e),
        }
    }
}

fn run_drop(
    spec: &ExperimentSpec,
    cfg: &SystemConfig,
    sweep_value: f64,
    drop_index: u64,
) -> Result<Vec<DropRecord>, ConfigError> {
    let drop = sample_drop(cfg, drop_index)?;
    let mut ctx = Ctx { spec, cfg, sweep_value, drop: drop_index, out: Vec::new() };
    for &scheme in &spec.schemes {
        match spec.kind {
            ExperimentKind::Convergence => {
                if let Some(rep) = ctx.solve(&drop, cfg, scheme, scheme.label()) {
                    ctx.trace(scheme.label(), &rep);
                }
            }
            ExperimentKind::MulticellVsSinglecell => {
                ctx.solve(&drop, cfg, scheme, scheme.label());
                let (single, single_cfg) = single_cell_scenario(&drop, cfg, drop_index);
                ctx.solve(&single, &single_cfg, scheme, &format!("{}_single_cell", scheme.label()));
            }
            ExperimentKind::Statistical => ctx.statistical(&drop, scheme),
            ExperimentKind::DistributedDemo => ctx.demo(&drop, scheme),
            _ => {
                ctx.solve(&drop, cfg, scheme, scheme.label());
            }
        }
    }
    Ok(ctx.out)
}

fn mean_and_se(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (Some(mean), Some(0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (Some(mean), Some((var / n as f64).sqrt()))
}

fn aggregate(spec: &ExperimentSpec, records: &[DropRecord]) -> Vec<Row> {
    let mut keys: Vec<(f64, &str, &str, Option<usize>)> = Vec::new();
    for r in records {
        let key = (r.sweep_value, r.scheme.as_str(), r.metric.as_str(), r.iteration);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(sweep_value, scheme, metric, iteration)| {
            let group: Vec<&DropRecord> = records
                .iter()
                .filter(|r| {
                    r.sweep_value == sweep_value && r.scheme == scheme && r.metric == metric && r.iteration == iteration
                })
                .collect();
            let ok: Vec<&DropRecord> = group.iter().copied().filter(|r| r.value.is_some()).collect();
            let values: Vec<f64> = ok.iter().filter_map(|r| r.value).collect();
            let (mean, std_error) = mean_and_se(&values);
            let n = ok.len().max(1) as f64;
            Row {
                experiment: spec.kind.name().to_string(),
                sweep_param: spec.kind.sweep_param().to_string(),
                sweep_value,
                scheme: scheme.to_string(),
                metric: metric.to_string(),
                iteration,
                mean,
                std_error,
                n_ok: ok.len(),
                n_failed: group.len() - ok.len(),
                mean_iters: ok.iter().map(|r| r.iters as f64).sum::<f64>() / n,
                mean_inner_iters: ok.iter().map(|r| r.inner_iters as f64).sum::<f64>() / n,
                converged_fraction: ok.iter().filter(|r| r.converged).count() as f64 / n,
                error: group.iter().find_map(|r| r.error.clone()),
            }
        })
        .collect()
}

/// Runs `spec.n_drops` seeded drops at every sweep point. The config seed is
/// replaced by `spec.seed`. Solver failures become records with an error;
/// an invalid configuration at any sweep point aborts the run.
pub fn run_experiment(spec: &ExperimentSpec, base: &SystemConfig) -> Result<ExperimentResult, ConfigError> {
    spec.validate()?;
    let base = SystemConfig { rng_seed: spec.seed, ..base.clone() };
    let mut records = Vec::new();
    let mut point_seconds = Vec::new();
    for &value in &spec.sweep {
        let cfg = spec.kind.point_config(&base, value);
        cfg.validate()?;
        let start = Instant::now();
        let per_drop: Vec<Result<Vec<DropRecord>, ConfigError>> =
            (0..spec.n_drops as u64).into_par_iter().map(|d| run_drop(spec, &cfg, value, d)).collect();
        for r in per_drop {
            records.extend(r?);
        }
        point_seconds.push(start.elapsed().as_secs_f64());
    }
    let rows = aggregate(spec, &records);
    Ok(ExperimentResult { rows, records, point_seconds })
}
