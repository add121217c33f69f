use num_complex::Complex64;

use crate::channel::{adjoint2, mat2_vec, ChannelSet, PolarizationMode, PolarizationState};
use crate::error::{Result, SolverError};
use crate::numerics::{hermitian_eig, unit_phase, CMatrix, CVector, HermitianMatrix};
use crate::objective::DecisionVars;

/// Quadratic model of the MSE in the stacked user polarization vector
/// `m = (m_11, m_12, ..)`: `f(m) = m^H D_L m - (2/BK) Re(m^H nu)` plus a
/// constant.
#[derive(Debug, Clone)]
pub struct MSubproblemData {
    /// `iota[i][j*K+k]` with `x_ijk = iota^H m_jk`.
    pub iota: Vec<Vec<[Complex64; 2]>>,
    pub d_l: HermitianMatrix,
    pub nu: CVector,
    /// `D_L` with its diagonal removed. On unit-modulus vectors the diagonal
    /// only adds the constant `tr(D_L)`, so the majorizer bounds this part.
    pub d_off: HermitianMatrix,
    /// Largest eigenvalue of `d_off`.
    pub lam_max: f64,
    pub bk: f64,
}

impl MSubproblemData {
    pub fn build(vars: &DecisionVars, ch: &ChannelSet) -> Result<Self> {
        let (b, k) = (ch.cells(), ch.users_per_cell());
        if vars.a.len() != b * k || vars.w.ncols() != b {
            return Err(SolverError::Dimension("decision variables do not match channels".into()));
        }
        let n = b * k;
        let iota: Vec<Vec<[Complex64; 2]>> = (0..b)
            .map(|i| {
                let w = vars.w.column(i);
                let mut row = Vec::with_capacity(n);
                for j in 0..b {
                    let u = ch.bs_adj[i][j].adjoint() * w;
                    for kk in 0..k {
                        let beta = vars.a[j * k + kk] * u.dotc(&ch.h_gen[j][kk]);
                        let v = mat2_vec(&adjoint2(&ch.a_user[j][kk]), &vars.pol.varpi[j]);
                        row.push([beta.conj() * v[0], beta.conj() * v[1]]);
                    }
                }
                row
            })
            .collect();
        let mut d = CMatrix::zeros(2 * n, 2 * n);
        let mut nu = CVector::zeros(2 * n);
        for row in &iota {
            for (jk, v) in row.iter().enumerate() {
                for r in 0..2 {
                    nu[2 * jk + r] += v[r];
                    for c in 0..2 {
                        d[(2 * jk + r, 2 * jk + c)] += v[r] * v[c].conj();
                    }
                }
            }
        }
        let d_l = HermitianMatrix::from_hermitian_part(&d);
        let mut off = d_l.as_matrix().clone();
        off.fill_diagonal(Complex64::new(0.0, 0.0));
        let d_off = HermitianMatrix::from_hermitian_part(&off);
        let lam_max = hermitian_eig(&d_off)?.max_value().max(0.0);
        Ok(MSubproblemData { iota, d_l, nu, d_off, lam_max, bk: n as f64 })
    }

    pub fn objective(&self, m: &CVector) -> f64 {
        let q = m.dotc(&(self.d_l.as_matrix() * m)).re;
        q - 2.0 / self.bk * m.dotc(&self.nu).re
    }

    /// Majorizer of [`Self::objective`] around `mt`, tight at `m = mt` for
    /// unit-modulus vectors.
    pub fn surrogate(&self, m: &CVector, mt: &CVector) -> f64 {
        let d = self.d_l.as_matrix();
        let lam = self.lam_max;
        let dm = self.d_off.as_matrix() * mt - mt * Complex64::new(lam, 0.0);
        let diag: f64 = (0..m.len()).map(|n| d[(n, n)].re * m[n].norm_sqr()).sum();
        lam * m.norm_squared() + 2.0 * m.dotc(&dm).re - mt.dotc(&dm).re + diag - 2.0 / self.bk * m.dotc(&self.nu).re
    }

    /// Closed-form minimizer of the surrogate over unit-modulus vectors.
    pub fn step(&self, mt: &CVector) -> CVector {
        self.step_with(mt, self.lam_max)
    }

    /// The same step with curvature `lam` in place of `lam_max`. Below
    /// `lam_max` the surrogate is no longer an upper bound, so the caller
    /// has to check the objective.
    pub fn step_with(&self, mt: &CVector, lam: f64) -> CVector {
        let z = (mt * Complex64::new(lam, 0.0) - self.d_off.as_matrix() * mt) * Complex64::new(2.0, 0.0)
            + &self.nu * Complex64::new(2.0 / self.bk, 0.0);
        z.map(unit_phase)
    }
}

pub fn stack_m(pol: &PolarizationState) -> CVector {
    CVector::from_iterator(
        2 * pol.m.iter().map(|r| r.len()).sum::<usize>(),
        pol.m.iter().flatten().flat_map(|v| v.iter().copied()),
    )
}

fn unstack_m(v: &CVector, cells: usize, k: usize) -> Vec<Vec<[Complex64; 2]>> {
    (0..cells).map(|j| (0..k).map(|kk| [v[2 * (j * k + kk)], v[2 * (j * k + kk) + 1]]).collect()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MReport {
    pub iterations: usize,
    /// True objective at the start and after every accepted step.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

/// Iterates the surrogate step from `m0` until the objective changes by at
/// most `tol` relative, or `t_max` steps.
///
/// Each step first tries a curvature below `lam_max` (halved after every
/// success) and doubles it back towards `lam_max` until the objective does
/// not increase; at `lam_max` the majorization guarantees that.
pub fn sca_minimize(data: &MSubproblemData, m0: CVector, tol: f64, t_max: usize) -> (CVector, MReport) {
    let mut m = m0;
    let mut f = data.objective(&m);
    let mut trace = vec![f];
    let mut converged = false;
    let mut iterations = 0;
    let floor = data.lam_max * 2f64.powi(-20);
    let mut lam = data.lam_max;
    for _ in 0..t_max {
        iterations += 1;
        let (next, f_next) = loop {
            let next = data.step_with(&m, lam);
            let f_next = data.objective(&next);
            if f_next <= f || lam >= data.lam_max {
                break (next, f_next);
            }
            lam = (2.0 * lam).min(data.lam_max);
        };
        if f_next > f {
            // Majorization rules this out up to rounding; keep the incumbent.
            converged = true;
            break;
        }
        let delta = f - f_next;
        m = next;
        f = f_next;
        trace.push(f);
        lam = (0.5 * lam).max(floor);
        if delta <= tol * f.abs().max(1e-12) {
            converged = true;
            break;
        }
    }
    (m, MReport { iterations, objective_trace: trace, converged })
}

/// Successive convex approximation over all user polarization vectors,
/// warm-started at the current state.
pub fn sca_update_m(
    vars: &DecisionVars,
    ch: &ChannelSet,
    tol: f64,
    t_max: usize,
) -> Result<(Vec<Vec<[Complex64; 2]>>, MReport)> {
    if ch.mode == PolarizationMode::Single {
        return Ok((vars.pol.m.clone(), MReport { iterations: 0, objective_trace: vec![], converged: true }));
    }
    let data = MSubproblemData::build(vars, ch)?;
    let (m, report) = sca_minimize(&data, stack_m(&vars.pol), tol, t_max);
    Ok((unstack_m(&m, ch.cells(), ch.users_per_cell()), report))
}
