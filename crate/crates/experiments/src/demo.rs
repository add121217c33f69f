//! Distributed gradient descent where every gradient average is formed over
//! the air with the optimized combiners and transmit scalars.

use dpma_core::channel::ChannelSet;
use dpma_core::objective::{aggregation_gains, DecisionVars};
use dpma_core::scene::{complex_normal, SystemConfig};
use dpma_core::SolverError;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("objective diverged at round {round}: {value:e} exceeds 1e3 times the initial {initial:e}")]
    Divergence { round: usize, value: f64, initial: f64 },
    #[error("the least-squares problem has a singular normal matrix")]
    Singular,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Local objectives `F_u(x) = 1/2 ||A_u x - b_u||^2`, one per user in the
/// order of the transmit scalars (`u = j K + k`). The global objective is
/// their average.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoProblem {
    pub a: Vec<DMatrix<f64>>,
    pub b: Vec<DVector<f64>>,
    pub dim: usize,
    pub step: f64,
    /// Stop once `sum_i ||x_i' - x_i||^2 <= tol`.
    pub tol: f64,
    pub max_rounds: usize,
}

impl DemoProblem {
    /// Well-conditioned random least squares with `users` local terms of
    /// `dim` rows each; the step is `1 / L` for the average objective.
    pub fn random<R: Rng + ?Sized>(users: usize, dim: usize, rng: &mut R) -> Self {
        let scale = 0.5 / (dim as f64).sqrt();
        let a: Vec<DMatrix<f64>> = (0..users)
            .map(|_| {
                DMatrix::from_fn(dim, dim, |r, c| {
                    let noise: f64 = rng.sample(StandardNormal);
                    let diag = if r == c { 1.0 } else { 0.0 };
                    diag + scale * noise
                })
            })
            .collect();
        let b = (0..users).map(|_| DVector::from_fn(dim, |_, _| rng.sample(StandardNormal))).collect();
        let mut demo = DemoProblem { a, b, dim, step: 0.0, tol: 1e-12, max_rounds: 2000 };
        demo.step = 1.0 / demo.smoothness();
        demo
    }

    pub fn users(&self) -> usize {
        self.a.len()
    }

    fn normal_matrix(&self) -> DMatrix<f64> {
        let mut n = DMatrix::zeros(self.dim, self.dim);
        for a in &self.a {
            n += a.transpose() * a;
        }
        n / self.users() as f64
    }

    /// Largest eigenvalue of the average Hessian.
    pub fn smoothness(&self) -> f64 {
        self.normal_matrix().symmetric_eigenvalues().max()
    }

    pub fn local_gradient(&self, u: usize, x: &DVector<f64>) -> DVector<f64> {
        self.a[u].transpose() * (&self.a[u] * x - &self.b[u])
    }

    pub fn average_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim);
        for u in 0..self.users() {
            g += self.local_gradient(u, x);
        }
        g / self.users() as f64
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        let total: f64 = (0..self.users()).map(|u| 0.5 * (&self.a[u] * x - &self.b[u]).norm_squared()).sum();
        total / self.users() as f64
    }

    /// Minimizer of the average objective.
    pub fn optimum(&self) -> Result<DVector<f64>, DemoError> {
        let mut rhs = DVector::zeros(self.dim);
        for (a, b) in self.a.iter().zip(&self.b) {
            rhs += a.transpose() * b;
        }
        let rhs = rhs / self.users() as f64;
        let chol = self.normal_matrix().cholesky().ok_or(DemoError::Singular)?;
        Ok(chol.solve(&rhs))
    }
}

/// Plain gradient descent on the average objective; returns the iterates
/// after each of `rounds` steps.
pub fn centralized_gd(demo: &DemoProblem, x0: &DVector<f64>, rounds: usize) -> Vec<DVector<f64>> {
    let mut x = x0.clone();
    let mut out = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        x = &x - demo.average_gradient(&x) * demo.step;
        out.push(x.clone());
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoReport {
    pub rounds: usize,
    /// Whether the update-size rule stopped the run before the round cap.
    pub stopped_by_tolerance: bool,
    /// Largest pairwise distance between the BS iterates.
    pub consensus_error: f64,
    /// `||mean_i x_i - x*|| / ||x*||`.
    pub distance_to_optimum: f64,
    /// Iterates of every BS after each round.
    pub history: Vec<Vec<DVector<f64>>>,
}

/// Runs the over-the-air version of gradient descent from `x = 0`.
///
/// Each round, user `u` evaluates its gradient at the iterate of its serving
/// BS and sends every coordinate in its own slot, scaled by the round's
/// largest gradient magnitude (broadcast to all nodes). BS `i` decodes
/// `w_i^H y_i`, undoes the scaling, keeps the real part and steps.
pub fn distributed_demo<R: Rng + ?Sized>(
    demo: &DemoProblem,
    vars: &DecisionVars,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<DemoReport, DemoError> {
    let (b, k) = (cfg.cells, cfg.users_per_cell);
    assert_eq!(demo.users(), b * k, "one local objective per user");
    let gains = aggregation_gains(vars, ch)?;
    let noise_var: Vec<f64> = (0..b).map(|i| b as f64 * cfg.sigma2() * vars.w.column(i).norm_squared()).collect();
    let mut xs = vec![DVector::zeros(demo.dim); b];
    let initial = demo.objective(&xs[0]).max(f64::MIN_POSITIVE);
    let mut history = Vec::new();
    let mut stopped_by_tolerance = false;
    let mut rounds = 0;
    while rounds < demo.max_rounds {
        rounds += 1;
        let grads: Vec<DVector<f64>> = (0..b * k).map(|u| demo.local_gradient(u, &xs[u / k])).collect();
        let scale = grads.iter().map(|g| g.amax()).fold(0.0, f64::max);
        let mut change = 0.0;
        for (i, x) in xs.iter_mut().enumerate() {
            let est = DVector::from_fn(demo.dim, |c, _| {
                if scale == 0.0 {
                    return 0.0;
                }
                let mut r = complex_normal(rng, noise_var[i]);
                for (u, g) in grads.iter().enumerate() {
                    r += gains[i][u] * (g[c] / scale);
                }
                scale * r.re
            });
            let next = &*x - est * demo.step;
            change += (&next - &*x).norm_squared();
            *x = next;
        }
        history.push(xs.clone());
        let worst = xs.iter().map(|x| demo.objective(x)).fold(0.0, f64::max);
        if !(worst <= 1e3 * initial) {
            return Err(DemoError::Divergence { round: rounds, value: worst, initial });
        }
        if change <= demo.tol {
            stopped_by_tolerance = true;
            break;
        }
    }
    let mut consensus_error = 0.0f64;
    for i in 0..b {
        for j in i + 1..b {
            consensus_error = consensus_error.max((&xs[i] - &xs[j]).norm());
        }
    }
    let mean = xs.iter().fold(DVector::zeros(demo.dim), |acc, x| acc + x) / b as f64;
    let opt = demo.optimum()?;
    let distance_to_optimum = (&mean - &opt).norm() / opt.norm().max(f64::MIN_POSITIVE);
    Ok(DemoReport { rounds, stopped_by_tolerance, consensus_error, distance_to_optimum, history })
}
