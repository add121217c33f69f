//! Field-response channels and dual-polarized effective channels.
//!
//! Conventions. `h_gen[i][k]` is the unpolarized uplink channel of user `k`
//! to its BS `i`. `bs_gen[i][j]` is the unpolarized M x M matrix `H_gen`
//! of the link j -> i, stored so that the signal BS `i` receives from BS
//! `j` is `H_gen^H x`. `bs_adj[i][j]` is the effective `H^H` actually applied
//! to the signal, with the polarization factor `varpi_i^H A_b varpi_j` as a
//! plain (non-conjugated) multiplier: receive projection on the left and
//! transmit projection on the right, as for the user links. Self links are
//! the identity.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::numerics::{CMatrix, CVector, ONE, ZERO};
use crate::scene::{Drop, Layout, PathAngles, SystemConfig};

/// Per-BS receive polarization `varpi[i]` and per-user transmit
/// polarization `m[i][k]`, all entries unit modulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationState {
    pub varpi: Vec<[Complex64; 2]>,
    pub m: Vec<Vec<[Complex64; 2]>>,
}

impl PolarizationState {
    pub fn ones(cells: usize, users_per_cell: usize) -> Self {
        PolarizationState { varpi: vec![[ONE; 2]; cells], m: vec![vec![[ONE; 2]; users_per_cell]; cells] }
    }

    pub fn is_unit_modulus(&self, tol: f64) -> bool {
        let ok = |v: &[Complex64; 2]| v.iter().all(|z| (z.norm() - 1.0).abs() <= tol);
        self.varpi.iter().all(ok) && self.m.iter().flatten().all(ok)
    }
}

/// Whether the polarization factor enters the effective channels. `Single`
/// models a single-polarized array: the factor is 1 on every link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolarizationMode {
    Dual,
    Single,
}

pub type Pol2 = [[Complex64; 2]; 2];

pub fn direction(theta: f64, phi: f64) -> [f64; 2] {
    [theta.cos() * phi.sin(), theta.sin()]
}

/// L x M matrix with entries `exp(j 2pi/lambda v_l . r_m)`.
pub fn field_response(positions: &[[f64; 2]], angles: &PathAngles, lambda: f64) -> CMatrix {
    let kappa = 2.0 * PI / lambda;
    let dirs: Vec<[f64; 2]> = angles.elevation.iter().zip(&angles.azimuth).map(|(&t, &p)| direction(t, p)).collect();
    CMatrix::from_fn(dirs.len(), positions.len(), |l, m| {
        let v = dirs[l];
        let r = positions[m];
        Complex64::from_polar(1.0, kappa * (v[0] * r[0] + v[1] * r[1]))
    })
}

pub fn field_response_rx_user(layout_i: &[[f64; 2]], angles: &PathAngles, lambda: f64) -> CMatrix {
    field_response(layout_i, angles, lambda)
}

/// `(F, G)`: transmit response at BS `j`'s array and receive response at BS
/// `i`'s array.
pub fn field_response_bs(
    layout_tx: &[[f64; 2]],
    layout_rx: &[[f64; 2]],
    tx: &PathAngles,
    rx: &PathAngles,
    lambda: f64,
) -> (CMatrix, CMatrix) {
    (field_response(layout_tx, tx, lambda), field_response(layout_rx, rx, lambda))
}

/// `Q^H u`.
pub fn user_channel(q: &CMatrix, gains: &[Complex64]) -> CVector {
    q.adjoint() * CVector::from_column_slice(gains)
}

/// `H_gen` such that `H_gen^H = G^H diag(sigma) F`.
pub fn bs_channel(f: &CMatrix, g: &CMatrix, gains: &[Complex64]) -> CMatrix {
    let sigma = CMatrix::from_diagonal(&CVector::from_column_slice(gains));
    (g.adjoint() * sigma * f).adjoint()
}

#[derive(Debug, Clone)]
pub struct Unpolarized {
    pub h_gen: Vec<Vec<CVector>>,
    /// `None` on the diagonal.
    pub bs_gen: Vec<Vec<Option<CMatrix>>>,
}

pub fn unpolarized_channels(drop: &Drop, layout: &Layout, lambda: f64) -> Unpolarized {
    let b = drop.cells();
    let h_gen = (0..b)
        .map(|i| {
            let arr = layout.bs(i);
            drop.users[i]
                .iter()
                .map(|u| user_channel(&field_response_rx_user(&arr, &u.angles, lambda), &u.gains))
                .collect()
        })
        .collect();
    let bs_gen = (0..b)
        .map(|i| {
            (0..b)
                .map(|j| {
                    (i != j).then(|| {
                        let link = drop.bs_link(i, j);
                        let (f, g) = field_response_bs(&layout.bs(j), &layout.bs(i), &link.tx, &link.rx, lambda);
                        bs_channel(&f, &g, &link.gains)
                    })
                })
                .collect()
        })
        .collect();
    Unpolarized { h_gen, bs_gen }
}

/// Electric-field basis `(z, z_bar)` for mean angles `(theta, phi)`.
pub fn polarization_basis(theta: f64, phi: f64) -> ([f64; 3], [f64; 3]) {
    let z = [theta.sin() * phi.sin(), -theta.cos(), theta.sin() * phi.cos()];
    let zb = [phi.cos(), 0.0, -phi.sin()];
    (z, zb)
}

/// Projection of the basis onto the vertical `(0,1,0)` and horizontal
/// `(1,0,0)` ports: rows are `z`, `z_bar`; columns are V, H.
fn port_projection(theta: f64, phi: f64) -> [[f64; 2]; 2] {
    let (z, zb) = polarization_basis(theta, phi);
    [[z[1], z[0]], [zb[1], zb[0]]]
}

/// `A = Q P` where `P` projects the transmit ports onto the field basis at
/// the transmit mean angles and `Q = P^T` projects the field back onto the
/// receive ports at the receive mean angles.
pub fn polarization_matrix(tx: (f64, f64), rx: (f64, f64)) -> Pol2 {
    let p = port_projection(tx.0, tx.1);
    let r = port_projection(rx.0, rx.1);
    let mut a = [[ZERO; 2]; 2];
    for (row, out) in a.iter_mut().enumerate() {
        for (col, o) in out.iter_mut().enumerate() {
            let s: f64 = (0..2).map(|n| r[n][row] * p[n][col]).sum();
            *o = Complex64::new(s, 0.0);
        }
    }
    a
}

#[derive(Debug, Clone)]
pub struct PolarizationMatrices {
    pub a_user: Vec<Vec<Pol2>>,
    /// `None` on the diagonal.
    pub a_bs: Vec<Vec<Option<Pol2>>>,
}

pub fn polarization_matrices(drop: &Drop) -> PolarizationMatrices {
    let b = drop.cells();
    let a_user = drop
        .users
        .iter()
        .map(|row| {
            row.iter()
                .map(|u| {
                    let mean = u.angles.mean();
                    polarization_matrix(mean, mean)
                })
                .collect()
        })
        .collect();
    let a_bs = (0..b)
        .map(|i| {
            (0..b)
                .map(|j| {
                    (i != j).then(|| {
                        let l = drop.bs_link(i, j);
                        polarization_matrix(l.tx.mean(), l.rx.mean())
                    })
                })
                .collect()
        })
        .collect();
    PolarizationMatrices { a_user, a_bs }
}

/// `x^H A y`.
pub fn bilinear(x: &[Complex64; 2], a: &Pol2, y: &[Complex64; 2]) -> Complex64 {
    let mut s = ZERO;
    for r in 0..2 {
        for c in 0..2 {
            s += x[r].conj() * a[r][c] * y[c];
        }
    }
    s
}

pub fn mat2_vec(a: &Pol2, y: &[Complex64; 2]) -> [Complex64; 2] {
    [a[0][0] * y[0] + a[0][1] * y[1], a[1][0] * y[0] + a[1][1] * y[1]]
}

pub fn adjoint2(a: &Pol2) -> Pol2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

/// All channels of one drop at one layout and polarization state.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub mode: PolarizationMode,
    pub h_gen: Vec<Vec<CVector>>,
    pub bs_gen: Vec<Vec<Option<CMatrix>>>,
    pub a_user: Vec<Vec<Pol2>>,
    pub a_bs: Vec<Vec<Option<Pol2>>>,
    /// Effective `h[i][k]`.
    pub h: Vec<Vec<CVector>>,
    /// Effective `H^H` of the link j -> i; the identity when `i == j`.
    pub bs_adj: Vec<Vec<CMatrix>>,
    /// Scalar `varpi_i^H A_u m` per user (1 in single-polarized mode).
    pub user_factor: Vec<Vec<Complex64>>,
    /// Scalar `varpi_i^H A_b varpi_j` per BS link (1 on the diagonal and in
    /// single-polarized mode).
    pub bs_factor: Vec<Vec<Complex64>>,
}

impl ChannelSet {
    pub fn build(
        drop: &Drop,
        layout: &Layout,
        pol: &PolarizationState,
        mode: PolarizationMode,
        cfg: &SystemConfig,
    ) -> Self {
        let un = unpolarized_channels(drop, layout, cfg.lambda_m);
        let am = polarization_matrices(drop);
        effective_channels(un, am, pol, mode)
    }

    pub fn cells(&self) -> usize {
        self.h.len()
    }

    pub fn users_per_cell(&self) -> usize {
        self.h.first().map_or(0, |r| r.len())
    }

    pub fn antennas(&self) -> usize {
        self.bs_adj[0][0].nrows()
    }

    /// Recomputes effective channels for a new polarization state, reusing
    /// the unpolarized parts.
    pub fn with_polarization(&self, pol: &PolarizationState) -> Self {
        effective_channels(
            Unpolarized { h_gen: self.h_gen.clone(), bs_gen: self.bs_gen.clone() },
            PolarizationMatrices { a_user: self.a_user.clone(), a_bs: self.a_bs.clone() },
            pol,
            self.mode,
        )
    }

    /// Unpolarized `H_gen^H` of link j -> i, identity when `i == j`.
    pub fn bs_gen_adj(&self, i: usize, j: usize) -> CMatrix {
        match &self.bs_gen[i][j] {
            Some(h) => h.adjoint(),
            None => CMatrix::identity(self.antennas(), self.antennas()),
        }
    }
}

pub fn effective_channels(
    un: Unpolarized,
    am: PolarizationMatrices,
    pol: &PolarizationState,
    mode: PolarizationMode,
) -> ChannelSet {
    let b = un.h_gen.len();
    let m_ant = un.h_gen[0].first().map_or(1, |h| h.len());
    let dual = mode == PolarizationMode::Dual;
    let user_factor: Vec<Vec<Complex64>> = (0..b)
        .map(|i| {
            (0..un.h_gen[i].len())
                .map(|k| if dual { bilinear(&pol.varpi[i], &am.a_user[i][k], &pol.m[i][k]) } else { ONE })
                .collect()
        })
        .collect();
    let bs_factor: Vec<Vec<Complex64>> = (0..b)
        .map(|i| {
            (0..b)
                .map(|j| match (&am.a_bs[i][j], dual) {
                    (Some(a), true) => bilinear(&pol.varpi[i], a, &pol.varpi[j]),
                    _ => ONE,
                })
                .collect()
        })
        .collect();
    let h = (0..b).map(|i| un.h_gen[i].iter().zip(&user_factor[i]).map(|(g, &s)| g * s).collect()).collect();
    let bs_adj = (0..b)
        .map(|i| {
            (0..b)
                .map(|j| match &un.bs_gen[i][j] {
                    Some(g) => g.adjoint() * bs_factor[i][j],
                    None => CMatrix::identity(m_ant, m_ant),
                })
                .collect()
        })
        .collect();
    ChannelSet {
        mode,
        h_gen: un.h_gen,
        bs_gen: un.bs_gen,
        a_user: am.a_user,
        a_bs: am.a_bs,
        h,
        bs_adj,
        user_factor,
        bs_factor,
    }
}

/// Serializable snapshot of a channel set, complex numbers as `[re, im]`.
#[derive(Debug, Clone, Serialize)]
pub struct ChannelDump {
    pub h_gen: Vec<Vec<Vec<[f64; 2]>>>,
    pub h: Vec<Vec<Vec<[f64; 2]>>>,
    /// Row-major `H^H` per link.
    pub bs_adj: Vec<Vec<Vec<Vec<[f64; 2]>>>>,
    pub a_user: Vec<Vec<[[[f64; 2]; 2]; 2]>>,
}

impl From<&ChannelSet> for ChannelDump {
    fn from(ch: &ChannelSet) -> Self {
        let z = |c: &Complex64| [c.re, c.im];
        let v = |x: &CVector| x.iter().map(z).collect::<Vec<_>>();
        ChannelDump {
            h_gen: ch.h_gen.iter().map(|r| r.iter().map(v).collect()).collect(),
            h: ch.h.iter().map(|r| r.iter().map(v).collect()).collect(),
            bs_adj: ch
                .bs_adj
                .iter()
                .map(|r| r.iter().map(|m| (0..m.nrows()).map(|p| m.row(p).iter().map(z).collect()).collect()).collect())
                .collect(),
            a_user: ch.a_user.iter().map(|r| r.iter().map(|a| a.map(|row| row.map(|c| z(&c)))).collect()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::kron;
    use crate::scene::{initial_layout, resample_gains, sample_drop};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_phase(rng: &mut impl Rng) -> Complex64 {
        Complex64::from_polar(1.0, rng.random_range(-PI..PI))
    }

    #[test]
    fn zero_angles_give_all_ones() {
        let pts = [[0.1, 0.2], [-0.3, 0.05]];
        let q = field_response(&pts, &PathAngles::zeros(3), 0.1);
        assert!(q.iter().all(|z| (z - ONE).norm() < 1e-15));
    }

    #[test]
    fn quarter_wavelength_gives_j() {
        let lambda = 0.1;
        let angles = PathAngles { elevation: vec![0.0], azimuth: vec![PI / 2.0] };
        let q = field_response(&[[lambda / 4.0, 0.0]], &angles, lambda);
        assert!((q[(0, 0)] - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn vertical_direction_sees_only_y() {
        let angles = PathAngles { elevation: vec![PI / 2.0], azimuth: vec![0.7] };
        let a = field_response(&[[0.0, 0.03], [0.5, 0.03]], &angles, 0.1);
        assert!((a[(0, 0)] - a[(0, 1)]).norm() < 1e-12);
    }

    #[test]
    fn shift_multiplies_rows_by_common_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let angles = PathAngles::sample(&mut rng, 4);
        let pts: Vec<[f64; 2]> = (0..5).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
        let delta = [0.013, -0.021];
        let shifted: Vec<[f64; 2]> = pts.iter().map(|p| [p[0] + delta[0], p[1] + delta[1]]).collect();
        let a = field_response(&pts, &angles, 0.1);
        let b = field_response(&shifted, &angles, 0.1);
        for l in 0..4 {
            let ratio = b[(l, 0)] / a[(l, 0)];
            assert!((ratio.norm() - 1.0).abs() < 1e-12);
            for m in 0..5 {
                assert!((b[(l, m)] - a[(l, m)] * ratio).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn single_path_channel_is_scaled_ones() {
        let q = CMatrix::from_element(1, 3, ONE);
        let h = user_channel(&q, &[c(0.3, -0.2)]);
        assert!(h.iter().all(|z| (z - c(0.3, -0.2)).norm() < 1e-15));
    }

    #[test]
    fn single_path_modulus_is_translation_invariant() {
        // With one path a rigid translation only rotates the common phase.
        let mut cfg = crate::scene::SystemConfig::desk_scale();
        cfg.paths = 1;
        let drop = sample_drop(&cfg, 4).unwrap();
        let l0 = initial_layout(&cfg);
        let mut l1 = l0.clone();
        for (n, x) in l1.coords.iter_mut().enumerate() {
            *x += if n % 2 == 0 { 0.037 } else { -0.052 };
        }
        let pol = PolarizationState::ones(cfg.cells, cfg.users_per_cell);
        let a = ChannelSet::build(&drop, &l0, &pol, PolarizationMode::Dual, &cfg);
        let b = ChannelSet::build(&drop, &l1, &pol, PolarizationMode::Dual, &cfg);
        for i in 0..cfg.cells {
            for k in 0..cfg.users_per_cell {
                for m in 0..cfg.antennas {
                    assert!((a.h[i][k][m].norm() - b.h[i][k][m].norm()).abs() < 1e-12 * a.h[i][k][m].norm().max(1e-30));
                }
            }
        }
    }

    #[test]
    fn channel_power_matches_gain_variance() {
        let cfg = crate::scene::SystemConfig::desk_scale();
        let drop = sample_drop(&cfg, 0).unwrap();
        let layout = initial_layout(&cfg);
        let d = ((drop.user_positions[0][0][0] - drop.bs_positions[0][0]).powi(2)
            + (drop.user_positions[0][0][1] - drop.bs_positions[0][1]).powi(2))
        .sqrt();
        let expect = cfg.antennas as f64 * cfg.path_gain(d);
        let n = 20_000;
        let mut acc = 0.0;
        for s in 0..n {
            let r = resample_gains(&drop, &cfg, 0, s);
            let un = unpolarized_channels(&r, &layout, cfg.lambda_m);
            acc += un.h_gen[0][0].norm_squared();
        }
        let mean = acc / n as f64;
        // Cross-path terms average out, so E||h||^2 = M * total path gain.
        assert!((mean - expect).abs() < 0.03 * expect, "{mean} vs {expect}");
    }

    #[test]
    fn zero_angles_give_identity_polarization() {
        let a = polarization_matrix((0.0, 0.0), (0.0, 0.0));
        assert_eq!(a, [[ONE, ZERO], [ZERO, ONE]]);
    }

    #[test]
    fn basis_is_orthonormal_and_a_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let t = rng.random_range(-PI / 2.0..PI / 2.0);
            let p = rng.random_range(-PI..PI);
            let (z, zb) = polarization_basis(t, p);
            let dot: f64 = z.iter().zip(&zb).map(|(a, b)| a * b).sum();
            let nz: f64 = z.iter().map(|x| x * x).sum();
            let nzb: f64 = zb.iter().map(|x| x * x).sum();
            assert!(dot.abs() < 1e-12 && (nz - 1.0).abs() < 1e-12 && (nzb - 1.0).abs() < 1e-12);
            let t2 = rng.random_range(-PI / 2.0..PI / 2.0);
            let p2 = rng.random_range(-PI..PI);
            let a = polarization_matrix((t, p), (t2, p2));
            assert!(a.iter().flatten().all(|x| x.norm() <= 2.0));
            let u = [random_phase(&mut rng), random_phase(&mut rng)];
            let v = [random_phase(&mut rng), random_phase(&mut rng)];
            assert!(bilinear(&u, &a, &v).norm() <= 4.0);
        }
    }

    #[test]
    fn identity_polarization_with_ones_doubles_channel() {
        let a = [[ONE, ZERO], [ZERO, ONE]];
        assert_eq!(bilinear(&[ONE; 2], &a, &[ONE; 2]), c(2.0, 0.0));
    }

    #[test]
    fn kronecker_form_equals_factored_form() {
        let cfg = crate::scene::SystemConfig::desk_scale();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for idx in 0..100 {
            let drop = sample_drop(&cfg, idx).unwrap();
            let pol = PolarizationState {
                varpi: (0..2).map(|_| [random_phase(&mut rng), random_phase(&mut rng)]).collect(),
                m: (0..2).map(|_| (0..4).map(|_| [random_phase(&mut rng), random_phase(&mut rng)]).collect()).collect(),
            };
            let ch = ChannelSet::build(&drop, &initial_layout(&cfg), &pol, PolarizationMode::Dual, &cfg);
            let (i, k) = (1, 2);
            let a = &ch.a_user[i][k];
            let amat = CMatrix::from_fn(2, 2, |r, cc| a[r][cc]);
            let varpi = CMatrix::from_column_slice(2, 1, &pol.varpi[i]);
            let mv = CMatrix::from_column_slice(2, 1, &pol.m[i][k]);
            let hg = CMatrix::from_column_slice(4, 1, ch.h_gen[i][k].as_slice());
            let lhs = kron(&CMatrix::identity(4, 4), &varpi.adjoint()) * kron(&hg, &amat) * &mv;
            let scale = ch.h[i][k].norm();
            assert!((lhs.column(0) - &ch.h[i][k]).norm() <= 1e-12 * scale);

            let ab = ch.a_bs[0][1].unwrap();
            let abm = CMatrix::from_fn(2, 2, |r, cc| ab[r][cc]);
            let v0 = CMatrix::from_column_slice(2, 1, &pol.varpi[0]);
            let v1 = CMatrix::from_column_slice(2, 1, &pol.varpi[1]);
            let hgen_adj = ch.bs_gen[0][1].as_ref().unwrap().adjoint();
            let lhs = kron(&CMatrix::identity(4, 4), &v0.adjoint())
                * kron(&hgen_adj, &abm)
                * kron(&CMatrix::identity(4, 4), &v1);
            let scale = ch.bs_adj[0][1].norm();
            assert!((lhs - &ch.bs_adj[0][1]).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn self_link_is_identity_and_single_mode_drops_factor() {
        let cfg = crate::scene::SystemConfig::desk_scale();
        let drop = sample_drop(&cfg, 1).unwrap();
        let mut pol = PolarizationState::ones(2, 4);
        pol.varpi[0] = [c(0.0, 1.0), c(-1.0, 0.0)];
        let ch = ChannelSet::build(&drop, &initial_layout(&cfg), &pol, PolarizationMode::Dual, &cfg);
        for i in 0..2 {
            assert_eq!(ch.bs_adj[i][i], CMatrix::identity(4, 4));
        }
        let ma = ChannelSet::build(&drop, &initial_layout(&cfg), &pol, PolarizationMode::Single, &cfg);
        assert_eq!(ma.h, ma.h_gen);
        assert_eq!(ma.bs_adj[0][1], ma.bs_gen[0][1].as_ref().unwrap().adjoint());
    }

    #[test]
    fn dump_serializes_pairs() {
        let cfg = crate::scene::SystemConfig {
            cells: 1,
            users_per_cell: 1,
            antennas: 1,
            ..crate::scene::SystemConfig::desk_scale()
        };
        let drop = sample_drop(&cfg, 0).unwrap();
        let ch = ChannelSet::build(
            &drop,
            &initial_layout(&cfg),
            &PolarizationState::ones(1, 1),
            PolarizationMode::Dual,
            &cfg,
        );
        let json = serde_json::to_value(ChannelDump::from(&ch)).unwrap();
        assert_eq!(json["h"][0][0][0].as_array().unwrap().len(), 2);
    }
}
