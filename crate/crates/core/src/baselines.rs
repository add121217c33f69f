//! Comparison schemes sharing the drops of the main scheme.

use crate::error::Result;
use crate::orchestrator::{solve_scheme, Scheme, SolveOptions, SolveReport};
use crate::scene::complex_normal;
use crate::scene::{stream, BsLink, Drop, PathAngles, Purpose, SystemConfig, UserLink};

/// Dual-polarized antennas frozen on the initial grid.
pub fn solve_fpa(drop: &Drop, cfg: &SystemConfig, opts: &SolveOptions) -> Result<SolveReport> {
    solve_scheme(drop, cfg, opts, Scheme::Fpa)
}

/// Movable antennas without polarization control.
pub fn solve_ma(drop: &Drop, cfg: &SystemConfig, opts: &SolveOptions) -> Result<SolveReport> {
    solve_scheme(drop, cfg, opts, Scheme::Ma)
}

/// All `B K` users served by one BS at their centroid. Angles and gains of
/// the new links come from the single-cell stream of drop `index`. A
/// single-cell input is returned unchanged.
pub fn single_cell_scenario(drop: &Drop, cfg: &SystemConfig, index: u64) -> (Drop, SystemConfig) {
    if cfg.cells == 1 {
        return (drop.clone(), cfg.clone());
    }
    let users: Vec<[f64; 2]> = drop.user_positions.iter().flatten().copied().collect();
    let n = users.len() as f64;
    let centroid = [users.iter().map(|p| p[0]).sum::<f64>() / n, users.iter().map(|p| p[1]).sum::<f64>() / n];
    let single = SystemConfig { cells: 1, users_per_cell: users.len(), ..cfg.clone() };
    let mut rng = stream(cfg.rng_seed, Purpose::SingleCell, index);
    let links = users
        .iter()
        .map(|p| {
            let d = ((p[0] - centroid[0]).powi(2) + (p[1] - centroid[1]).powi(2)).sqrt();
            let angles = PathAngles::sample(&mut rng, cfg.paths);
            let var = single.path_gain(d) / cfg.paths as f64;
            let gains = (0..cfg.paths).map(|_| complex_normal(&mut rng, var)).collect();
            UserLink { angles, gains }
        })
        .collect();
    let out = Drop {
        bs_positions: vec![centroid],
        user_positions: vec![users],
        users: vec![links],
        bs_links: vec![vec![None::<BsLink>]],
    };
    (out, single)
}
