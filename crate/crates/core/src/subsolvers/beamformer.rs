use log::warn;
use num_complex::Complex64;

use crate::channel::ChannelSet;
use crate::error::{Result, SolverError};
use crate::numerics::{hermitian_eig, solve_hpd, CMatrix, CVector, HermitianMatrix, NumericsError};
use crate::objective::DecisionVars;
use crate::scene::SystemConfig;

/// LMMSE combiners: `w_i = (1/BK) (sum |a|^2 g g^H + B sigma2 I)^-1 sum g a`
/// with `g = H_ij^H h_jk`.
pub fn update_w(vars: &DecisionVars, ch: &ChannelSet, cfg: &SystemConfig) -> Result<CMatrix> {
    let (b, k, m) = (ch.cells(), ch.users_per_cell(), ch.antennas());
    if vars.a.len() != b * k {
        return Err(SolverError::Dimension(format!("a has {} entries, need {}", vars.a.len(), b * k)));
    }
    let bk = (b * k) as f64;
    let mut w = CMatrix::zeros(m, b);
    for i in 0..b {
        let mut r = CMatrix::identity(m, m) * Complex64::new(b as f64 * cfg.sigma2(), 0.0);
        let mut rhs = CVector::zeros(m);
        for j in 0..b {
            for kk in 0..k {
                let a = vars.a[j * k + kk];
                let g = &ch.bs_adj[i][j] * &ch.h[j][kk];
                r += &g * g.adjoint() * Complex64::new(a.norm_sqr(), 0.0);
                rhs += g * a;
            }
        }
        if rhs.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            continue;
        }
        let r = HermitianMatrix::from_hermitian_part(&r);
        let x = match solve_hpd(&r, &rhs) {
            Ok(x) => x,
            Err(NumericsError::NearSingular { condition }) => {
                warn!("combiner system of BS {i} is near singular (condition {condition:e}); regularizing");
                regularized_solve(&r, &rhs)?
            }
            Err(e) => return Err(e.into()),
        };
        w.set_column(i, &(x / Complex64::new(bk, 0.0)));
    }
    Ok(w)
}

/// Solve with `1e-12 * lambda_max` added to the spectrum.
fn regularized_solve(r: &HermitianMatrix, rhs: &CVector) -> Result<CVector> {
    let e = hermitian_eig(r)?;
    let reg = 1e-12 * e.max_value().max(f64::MIN_POSITIVE);
    let proj = e.vectors.adjoint() * rhs;
    let scaled = CVector::from_iterator(proj.len(), proj.iter().zip(&e.values).map(|(p, l)| p / (l.max(0.0) + reg)));
    Ok(&e.vectors * scaled)
}
