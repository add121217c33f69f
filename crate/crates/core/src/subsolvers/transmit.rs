use num_complex::Complex64;

use crate::channel::ChannelSet;
use crate::error::Result;
use crate::objective::{aggregation_gains, DecisionVars};
use crate::scene::SystemConfig;

/// Minimizer of `r |a|^2 - 2 Re(conj(b) a)` over `|a|^2 <= power`.
pub fn transmit_scalar(r: f64, b: Complex64, power: f64) -> Complex64 {
    let nb = b.norm();
    if nb == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    if nb <= power.sqrt() * r {
        b / r
    } else {
        b * (power.sqrt() / nb)
    }
}

/// Per-user transmit scalars with the combiners fixed.
pub fn update_a(vars: &DecisionVars, ch: &ChannelSet, cfg: &SystemConfig) -> Result<Vec<Complex64>> {
    let (b, k) = (ch.cells(), ch.users_per_cell());
    let bk = (b * k) as f64;
    // Gains with a = 1 give c_ijk = w_i^H H_ij^H h_jk.
    let unit = DecisionVars { a: vec![Complex64::new(1.0, 0.0); b * k], ..vars.clone() };
    let c = aggregation_gains(&unit, ch)?;
    Ok((0..b * k)
        .map(|jk| {
            let r: f64 = (0..b).map(|i| c[i][jk].norm_sqr()).sum();
            let bb: Complex64 = (0..b).map(|i| c[i][jk].conj()).sum::<Complex64>() / bk;
            transmit_scalar(r, bb, cfg.power_w)
        })
        .collect())
}
