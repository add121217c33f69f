use crate::channel::PolarizationMode;
use crate::error::Result;
use crate::objective::{mse_at, mse_grad_positions, DecisionVars};
use crate::scene::{check_layout_feasible, Drop, Layout, SystemConfig};

/// Objective over antenna coordinates with everything else fixed.
pub trait PositionObjective {
    fn value(&self, layout: &Layout) -> Result<f64>;
    fn gradient(&self, layout: &Layout) -> Result<Vec<f64>>;
}

/// MSE of one drop at fixed combiners, scalars and polarization.
pub struct DropObjective<'a> {
    pub vars: &'a DecisionVars,
    pub drop: &'a Drop,
    pub cfg: &'a SystemConfig,
    pub mode: PolarizationMode,
}

impl DropObjective<'_> {
    fn at(&self, layout: &Layout) -> DecisionVars {
        DecisionVars { layout: layout.clone(), ..self.vars.clone() }
    }
}

impl PositionObjective for DropObjective<'_> {
    fn value(&self, layout: &Layout) -> Result<f64> {
        mse_at(&self.at(layout), self.drop, self.cfg, self.mode)
    }

    fn gradient(&self, layout: &Layout) -> Result<Vec<f64>> {
        mse_grad_positions(&self.at(layout), self.drop, self.cfg, self.mode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionOptions {
    /// Length in meters of the first trial move of the coordinate with the
    /// steepest gradient.
    pub alpha0: f64,
    pub tol: f64,
    pub t_max: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionReport {
    pub iterations: usize,
    /// Objective at the start and after every accepted step.
    pub trace: Vec<f64>,
    pub converged: bool,
    pub final_alpha: f64,
}

/// Gradient descent on the coordinates. The first step moves the steepest
/// coordinate by `alpha0`; the step is halved until the candidate is feasible
/// and does not increase the objective. Once the largest move falls below
/// `1e-12 * lambda` the current layout is kept and the descent stops.
pub fn descend_positions<O: PositionObjective + ?Sized>(
    obj: &O,
    start: &Layout,
    cfg: &SystemConfig,
    opts: PositionOptions,
) -> Result<(Layout, PositionReport)> {
    let mut layout = start.clone();
    let mut f = obj.value(&layout)?;
    let mut trace = vec![f];
    let mut alpha = f64::NAN;
    let floor = 1e-12 * cfg.lambda_m;
    let mut converged = false;
    let mut iterations = 0;
    'outer: while iterations < opts.t_max {
        iterations += 1;
        let g = obj.gradient(&layout)?;
        let gmax = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if gmax == 0.0 {
            converged = true;
            break;
        }
        if alpha.is_nan() {
            alpha = opts.alpha0 / gmax;
        }
        loop {
            let cand = Layout {
                antennas: layout.antennas,
                coords: layout.coords.iter().zip(&g).map(|(r, gi)| r - alpha * gi).collect(),
            };
            if check_layout_feasible(&cand, cfg) {
                let fc = obj.value(&cand)?;
                if fc <= f {
                    let delta = f - fc;
                    layout = cand;
                    f = fc;
                    trace.push(f);
                    if delta <= opts.tol * f.abs().max(1e-12) {
                        converged = true;
                        break 'outer;
                    }
                    break;
                }
            }
            alpha *= 0.5;
            if alpha * gmax < floor {
                converged = true;
                break 'outer;
            }
        }
    }
    Ok((layout, PositionReport { iterations, trace, converged, final_alpha: if alpha.is_nan() { 0.0 } else { alpha } }))
}

pub fn update_positions(
    vars: &DecisionVars,
    drop: &Drop,
    cfg: &SystemConfig,
    mode: PolarizationMode,
    opts: PositionOptions,
) -> Result<(Layout, PositionReport)> {
    let obj = DropObjective { vars, drop, cfg, mode };
    descend_positions(&obj, &vars.layout, cfg, opts)
}
