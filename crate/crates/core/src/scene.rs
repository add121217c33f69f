//! System configuration, random drops and antenna layouts.
//!
//! Randomness comes from ChaCha20 (`rand_chacha::ChaCha20Rng`). Every
//! random quantity of a drop is drawn from its own ChaCha stream, addressed
//! by `(purpose << 32) | drop_index` under the master seed, so that e.g.
//! resampling gains never perturbs geometry and drops can be generated in
//! any order.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Scalar parameters of the network. Field names in JSON follow the
/// physical symbols (`B`, `K`, `P`, ...); powers are linear watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    #[serde(rename = "B")]
    pub cells: usize,
    #[serde(rename = "K")]
    pub users_per_cell: usize,
    #[serde(rename = "M")]
    pub antennas: usize,
    #[serde(rename = "L")]
    pub paths: usize,
    pub carrier_hz: f64,
    pub lambda_m: f64,
    #[serde(rename = "P")]
    pub power_w: f64,
    pub sigma_n2: f64,
    #[serde(rename = "sigma_I2")]
    pub sigma_i2: f64,
    pub region_half_width: f64,
    #[serde(rename = "D0")]
    pub min_spacing: f64,
    #[serde(rename = "K0_db")]
    pub k0_db: f64,
    pub d0: f64,
    pub beta: f64,
    pub rician_r: f64,
    pub d_min_bs: f64,
    pub user_annulus: [f64; 2],
    pub rng_seed: u64,
}

impl SystemConfig {
    /// Full-size network: 3 cells of 8 users, 4 antennas, 3 paths, 3 GHz.
    pub fn full_scale() -> Self {
        let carrier_hz = 3e9;
        let lambda_m = SPEED_OF_LIGHT / carrier_hz;
        SystemConfig {
            cells: 3,
            users_per_cell: 8,
            antennas: 4,
            paths: 3,
            carrier_hz,
            lambda_m,
            power_w: dbm_to_watts(30.0),
            sigma_n2: dbm_to_watts(-94.0),
            sigma_i2: dbm_to_watts(-88.0),
            region_half_width: 4.0 * lambda_m,
            min_spacing: lambda_m / 2.0,
            k0_db: -40.0,
            d0: 1.0,
            beta: 1.5,
            rician_r: 1.0,
            d_min_bs: 200.0,
            user_annulus: [20.0, 50.0],
            rng_seed: 0,
        }
    }

    /// Small network used for quick runs and tests: 2 cells of 4 users.
    pub fn desk_scale() -> Self {
        SystemConfig { cells: 2, users_per_cell: 4, ..Self::full_scale() }
    }

    pub fn total_users(&self) -> usize {
        self.cells * self.users_per_cell
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma_n2 + self.sigma_i2
    }

    pub fn k0(&self) -> f64 {
        db_to_linear(self.k0_db)
    }

    pub fn path_gain(&self, distance: f64) -> f64 {
        self.k0() * (distance.max(self.d0) / self.d0).powf(-self.beta)
    }

    pub fn with_power_dbm(mut self, dbm: f64) -> Self {
        self.power_w = dbm_to_watts(dbm);
        self
    }

    /// Sets the movement half-width in wavelengths.
    pub fn with_region_wavelengths(mut self, n: f64) -> Self {
        self.region_half_width = n * self.lambda_m;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.cells == 0 || self.users_per_cell == 0 || self.antennas == 0 || self.paths == 0 {
            return bad("B, K, M and L must all be at least 1");
        }
        let positive = [
            ("carrier_hz", self.carrier_hz),
            ("lambda_m", self.lambda_m),
            ("P", self.power_w),
            ("region_half_width", self.region_half_width),
            ("D0", self.min_spacing),
            ("d0", self.d0),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::Invalid(format!("{name} must be positive and finite")));
            }
        }
        for (name, v) in [
            ("sigma_n2", self.sigma_n2),
            ("sigma_I2", self.sigma_i2),
            ("beta", self.beta),
            ("rician_r", self.rician_r),
            ("d_min_bs", self.d_min_bs),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ConfigError::Invalid(format!("{name} must be non-negative and finite")));
            }
        }
        if !self.k0_db.is_finite() {
            return bad("K0_db must be finite");
        }
        if ((self.lambda_m - SPEED_OF_LIGHT / self.carrier_hz) / self.lambda_m).abs() > 1e-6 {
            return bad("lambda_m must equal c / carrier_hz");
        }
        let [r_in, r_out] = self.user_annulus;
        if !(r_in >= 0.0 && r_out >= r_in && r_out.is_finite()) {
            return bad("user_annulus must satisfy 0 <= inner <= outer");
        }
        if self.region_half_width < self.min_spacing {
            return bad("region_half_width must be at least D0");
        }
        let side = (self.antennas as f64).sqrt().ceil();
        if (side - 1.0) * self.min_spacing > 2.0 * self.region_half_width * (1.0 + 1e-12) {
            return bad("a D0-spaced grid of M antennas does not fit in the movement region");
        }
        Ok(())
    }
}

/// Stream purposes under one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Geometry = 1,
    Angles = 2,
    Gains = 3,
    SingleCell = 4,
    Randomization = 5,
    MonteCarlo = 6,
    Demo = 7,
    /// Gain resamples for statistical CSI; the sample index is added on top.
    GainSample = 16,
}

/// Returns the generator for `(purpose, index)` under `master_seed`.
pub fn stream(master_seed: u64, purpose: Purpose, index: u64) -> ChaCha20Rng {
    stream_raw(master_seed, purpose as u64, index)
}

fn stream_raw(master_seed: u64, purpose: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream((purpose << 32) | (index & 0xffff_ffff));
    rng
}

/// Circularly-symmetric complex Gaussian with the given variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// `(theta, phi)` per path: elevation in [-pi/2, pi/2], azimuth in [-pi, pi].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathAngles {
    pub elevation: Vec<f64>,
    pub azimuth: Vec<f64>,
}

impl PathAngles {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, paths: usize) -> Self {
        let mut elevation = Vec::with_capacity(paths);
        let mut azimuth = Vec::with_capacity(paths);
        for _ in 0..paths {
            elevation.push(rng.random_range(-PI / 2.0..=PI / 2.0));
            azimuth.push(rng.random_range(-PI..=PI));
        }
        PathAngles { elevation, azimuth }
    }

    pub fn zeros(paths: usize) -> Self {
        PathAngles { elevation: vec![0.0; paths], azimuth: vec![0.0; paths] }
    }

    pub fn len(&self) -> usize {
        self.elevation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elevation.is_empty()
    }

    /// Arithmetic means of elevation and azimuth.
    pub fn mean(&self) -> (f64, f64) {
        let n = self.len() as f64;
        (self.elevation.iter().sum::<f64>() / n, self.azimuth.iter().sum::<f64>() / n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserLink {
    pub angles: PathAngles,
    pub gains: Vec<Complex64>,
}

/// Link from BS `j` (transmitter) to BS `i` (receiver).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsLink {
    pub tx: PathAngles,
    pub rx: PathAngles,
    pub gains: Vec<Complex64>,
}

/// One realization of geometry, path angles and fading gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drop {
    pub bs_positions: Vec<[f64; 2]>,
    /// `[i][k]`: user `k` of cell `i`.
    pub user_positions: Vec<Vec<[f64; 2]>>,
    pub users: Vec<Vec<UserLink>>,
    /// `[i][j]` is the link j -> i; `None` on the diagonal.
    pub bs_links: Vec<Vec<Option<BsLink>>>,
}

impl Drop {
    pub fn cells(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn users_per_cell(&self) -> usize {
        self.users.first().map_or(0, |u| u.len())
    }

    pub fn user(&self, i: usize, k: usize) -> &UserLink {
        &self.users[i][k]
    }

    pub fn bs_link(&self, i: usize, j: usize) -> &BsLink {
        self.bs_links[i][j].as_ref().expect("no self link between a BS and itself")
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub fn bs_polygon(cells: usize, d_min: f64) -> Vec<[f64; 2]> {
    if cells == 1 {
        return vec![[0.0, 0.0]];
    }
    let radius = d_min / (2.0 * (PI / cells as f64).sin());
    (0..cells)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / cells as f64;
            [radius * a.cos(), radius * a.sin()]
        })
        .collect()
}

fn user_gains<R: Rng + ?Sized>(rng: &mut R, cfg: &SystemConfig, d: f64) -> Vec<Complex64> {
    let per_path = cfg.path_gain(d) / cfg.paths as f64;
    (0..cfg.paths).map(|_| complex_normal(rng, per_path)).collect()
}

fn bs_gains<R: Rng + ?Sized>(rng: &mut R, cfg: &SystemConfig, d: f64) -> Vec<Complex64> {
    let pl = cfg.path_gain(d);
    let r = cfg.rician_r;
    if cfg.paths == 1 {
        return vec![complex_normal(rng, pl)];
    }
    (0..cfg.paths)
        .map(|l| {
            let var = if l == 0 { pl * r / (1.0 + r) } else { pl / ((1.0 + r) * (cfg.paths - 1) as f64) };
            complex_normal(rng, var)
        })
        .collect()
}

/// Draws drop number `index` under `cfg.rng_seed`.
pub fn sample_drop(cfg: &SystemConfig, index: u64) -> Result<Drop, ConfigError> {
    cfg.validate()?;
    let (b, k) = (cfg.cells, cfg.users_per_cell);
    let mut geo = stream(cfg.rng_seed, Purpose::Geometry, index);
    let mut ang = stream(cfg.rng_seed, Purpose::Angles, index);

    let bs_positions = bs_polygon(b, cfg.d_min_bs);
    let [r_in, r_out] = cfg.user_annulus;
    let user_positions: Vec<Vec<[f64; 2]>> = bs_positions
        .iter()
        .map(|c| {
            (0..k)
                .map(|_| {
                    let r = rng_annulus_radius(&mut geo, r_in, r_out);
                    let a: f64 = geo.random_range(0.0..2.0 * PI);
                    [c[0] + r * a.cos(), c[1] + r * a.sin()]
                })
                .collect()
        })
        .collect();

    let user_angles: Vec<Vec<PathAngles>> =
        (0..b).map(|_| (0..k).map(|_| PathAngles::sample(&mut ang, cfg.paths)).collect()).collect();
    let bs_angles: Vec<Vec<Option<(PathAngles, PathAngles)>>> = (0..b)
        .map(|i| {
            (0..b)
                .map(|j| {
                    (i != j).then(|| {
                        let tx = PathAngles::sample(&mut ang, cfg.paths);
                        let rx = PathAngles::sample(&mut ang, cfg.paths);
                        (tx, rx)
                    })
                })
                .collect()
        })
        .collect();

    let mut drop = Drop {
        users: user_angles
            .into_iter()
            .map(|row| row.into_iter().map(|angles| UserLink { angles, gains: Vec::new() }).collect())
            .collect(),
        bs_links: bs_angles
            .into_iter()
            .map(|row| row.into_iter().map(|o| o.map(|(tx, rx)| BsLink { tx, rx, gains: Vec::new() })).collect())
            .collect(),
        bs_positions,
        user_positions,
    };
    let mut gains = stream(cfg.rng_seed, Purpose::Gains, index);
    fill_gains(&mut drop, cfg, &mut gains);
    Ok(drop)
}

fn rng_annulus_radius<R: Rng + ?Sized>(rng: &mut R, r_in: f64, r_out: f64) -> f64 {
    if r_out == r_in {
        return r_in;
    }
    let u: f64 = rng.random_range(r_in * r_in..=r_out * r_out);
    u.sqrt()
}

fn fill_gains<R: Rng + ?Sized>(drop: &mut Drop, cfg: &SystemConfig, rng: &mut R) {
    let b = drop.cells();
    for i in 0..b {
        for k in 0..drop.users[i].len() {
            let d = distance(drop.bs_positions[i], drop.user_positions[i][k]);
            drop.users[i][k].gains = user_gains(rng, cfg, d);
        }
    }
    for i in 0..b {
        for j in 0..b {
            if i == j {
                continue;
            }
            let d = distance(drop.bs_positions[i], drop.bs_positions[j]);
            let g = bs_gains(rng, cfg, d);
            drop.bs_links[i][j].as_mut().expect("inter-BS link").gains = g;
        }
    }
}

/// Same geometry and angles, fresh small-scale fading. Used to build the
/// channel samples of the statistical-CSI problem.
pub fn resample_gains(drop: &Drop, cfg: &SystemConfig, drop_index: u64, sample: u64) -> Drop {
    let mut out = drop.clone();
    let purpose = Purpose::GainSample as u64 + sample;
    let mut rng = stream_raw(cfg.rng_seed, purpose, drop_index);
    fill_gains(&mut out, cfg, &mut rng);
    out
}

/// Flattened antenna coordinates of all BSs: `[x, y]` of antenna `m` of BS
/// `i` sit at `2 * (i * M + m)`. Coordinates are local to the BS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub antennas: usize,
    pub coords: Vec<f64>,
}

impl Layout {
    pub fn cells(&self) -> usize {
        self.coords.len() / (2 * self.antennas)
    }

    pub fn pos(&self, i: usize, m: usize) -> [f64; 2] {
        let o = 2 * (i * self.antennas + m);
        [self.coords[o], self.coords[o + 1]]
    }

    pub fn bs(&self, i: usize) -> Vec<[f64; 2]> {
        (0..self.antennas).map(|m| self.pos(i, m)).collect()
    }
}

/// Same `ceil(sqrt(M))`-wide grid at every BS, centered on the local origin
/// and truncated row-major to M points. The spacing spreads the grid over the
/// region (one point per equal cell) but is never below D0.
pub fn initial_layout(cfg: &SystemConfig) -> Layout {
    let m = cfg.antennas;
    let side = (m as f64).sqrt().ceil() as usize;
    let step = cfg.min_spacing.max(2.0 * cfg.region_half_width / side as f64);
    let half = (side as f64 - 1.0) / 2.0;
    let grid: Vec<[f64; 2]> = (0..m)
        .map(|n| {
            let (row, col) = (n / side, n % side);
            [(col as f64 - half) * step, (half - row as f64) * step]
        })
        .collect();
    let mut coords = Vec::with_capacity(2 * m * cfg.cells);
    for _ in 0..cfg.cells {
        for p in &grid {
            coords.extend_from_slice(p);
        }
    }
    Layout { antennas: m, coords }
}

/// Region `[-A, A]^2` per coordinate and pairwise Euclidean distance at
/// least D0, each with a `1e-12` relative slack.
pub fn check_layout_feasible(layout: &Layout, cfg: &SystemConfig) -> bool {
    if layout.antennas != cfg.antennas || layout.coords.len() != 2 * cfg.antennas * cfg.cells {
        return false;
    }
    let bound = cfg.region_half_width * (1.0 + 1e-12);
    if layout.coords.iter().any(|c| !c.is_finite() || c.abs() > bound) {
        return false;
    }
    let min_d = cfg.min_spacing * (1.0 - 1e-12);
    (0..layout.cells()).all(|i| {
        let pts = layout.bs(i);
        (0..pts.len()).all(|a| ((a + 1)..pts.len()).all(|b| distance(pts[a], pts[b]) >= min_d))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SystemConfig::full_scale().validate().unwrap();
        SystemConfig::desk_scale().validate().unwrap();
        let c = SystemConfig::full_scale();
        assert!((c.power_w - 1.0).abs() < 1e-12);
        assert!((c.lambda_m - 0.0999308).abs() < 1e-6);
    }

    #[test]
    fn config_json_uses_symbol_names() {
        let json = serde_json::to_value(SystemConfig::desk_scale()).unwrap();
        for key in ["B", "K", "M", "L", "P", "sigma_I2", "D0", "K0_db", "user_annulus", "rng_seed"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        let back: SystemConfig = serde_json::from_value(json).unwrap();
        assert_eq!(back, SystemConfig::desk_scale());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = SystemConfig::desk_scale();
        c.antennas = 0;
        assert!(c.validate().is_err());
        let mut c = SystemConfig::desk_scale();
        c.region_half_width = c.min_spacing / 2.0;
        assert!(c.validate().is_err());
        let mut c = SystemConfig::desk_scale();
        c.antennas = 100;
        c.region_half_width = c.lambda_m;
        assert!(c.validate().is_err());
    }

    #[test]
    fn single_cell_geometry() {
        let cfg = SystemConfig { cells: 1, ..SystemConfig::desk_scale() };
        let d = sample_drop(&cfg, 0).unwrap();
        assert_eq!(d.bs_positions, vec![[0.0, 0.0]]);
        for p in &d.user_positions[0] {
            let r = distance(*p, [0.0, 0.0]);
            assert!((20.0..=50.0).contains(&r));
        }
        assert!(d.bs_links[0][0].is_none());
    }

    #[test]
    fn bs_spacing_is_d_min() {
        let cfg = SystemConfig::desk_scale();
        let d = sample_drop(&cfg, 3).unwrap();
        assert!((distance(d.bs_positions[0], d.bs_positions[1]) - 200.0).abs() < 1e-9);
        for b in 3..=6 {
            let p = bs_polygon(b, 200.0);
            let mut dmin = f64::INFINITY;
            for i in 0..b {
                for j in (i + 1)..b {
                    dmin = dmin.min(distance(p[i], p[j]));
                }
            }
            assert!((dmin - 200.0).abs() < 1e-9);
        }
    }

    #[test]
    fn drop_invariants_hold() {
        let cfg = SystemConfig::full_scale();
        for idx in 0..5 {
            let d = sample_drop(&cfg, idx).unwrap();
            for i in 0..cfg.cells {
                for k in 0..cfg.users_per_cell {
                    let r = distance(d.bs_positions[i], d.user_positions[i][k]);
                    assert!((20.0..=50.0).contains(&r));
                    let u = d.user(i, k);
                    assert_eq!(u.gains.len(), cfg.paths);
                    assert!(u.angles.elevation.iter().all(|t| t.abs() <= PI / 2.0));
                    assert!(u.angles.azimuth.iter().all(|p| p.abs() <= PI));
                }
                for j in 0..cfg.cells {
                    assert_eq!(d.bs_links[i][j].is_some(), i != j);
                }
            }
        }
    }

    #[test]
    fn drops_are_deterministic_and_streams_independent() {
        let cfg = SystemConfig::desk_scale();
        assert_eq!(sample_drop(&cfg, 7).unwrap(), sample_drop(&cfg, 7).unwrap());
        assert_ne!(sample_drop(&cfg, 7).unwrap(), sample_drop(&cfg, 8).unwrap());
        let d = sample_drop(&cfg, 7).unwrap();
        let r = resample_gains(&d, &cfg, 7, 0);
        assert_eq!(r.user_positions, d.user_positions);
        assert_eq!(r.users[0][0].angles, d.users[0][0].angles);
        assert_ne!(r.users[0][0].gains, d.users[0][0].gains);
    }

    #[test]
    fn gain_variance_at_reference_distance() {
        // At d = d0 the per-path variance is K0 / L, so L * E|u_l|^2 = K0.
        let cfg = SystemConfig::desk_scale();
        let mut rng = stream(99, Purpose::MonteCarlo, 0);
        let n = 100_000;
        let mut acc = Vec::with_capacity(n);
        for _ in 0..n {
            let g = user_gains(&mut rng, &cfg, cfg.d0);
            acc.push(g.iter().map(|z| z.norm_sqr()).sum::<f64>());
        }
        let mean = acc.iter().sum::<f64>() / n as f64;
        let var = acc.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - cfg.k0()).abs() <= 0.02 * cfg.k0());
        assert!((mean - cfg.k0()).abs() <= 3.0 * se);
    }

    #[test]
    fn bs_gain_split_follows_rician_factor() {
        let cfg = SystemConfig { rician_r: 3.0, ..SystemConfig::desk_scale() };
        let mut rng = stream(5, Purpose::MonteCarlo, 1);
        let n = 100_000;
        let mut first = 0.0;
        let mut rest = 0.0;
        for _ in 0..n {
            let g = bs_gains(&mut rng, &cfg, cfg.d0);
            first += g[0].norm_sqr();
            rest += g[1..].iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        let k0 = cfg.k0();
        assert!((first / n as f64 - k0 * 0.75).abs() < 0.02 * k0 * 0.75);
        assert!((rest / n as f64 - k0 * 0.25).abs() < 0.02 * k0 * 0.25);
    }

    #[test]
    fn initial_layout_examples() {
        let cfg = SystemConfig { antennas: 1, ..SystemConfig::desk_scale() };
        assert_eq!(initial_layout(&cfg).pos(1, 0), [0.0, 0.0]);
        let base = SystemConfig::desk_scale();
        let cfg = SystemConfig { region_half_width: base.lambda_m / 2.0, ..base.clone() };
        let l = initial_layout(&cfg);
        let q = cfg.lambda_m / 4.0;
        let mut pts = l.bs(0);
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expect = [[-q, -q], [-q, q], [q, -q], [q, q]];
        for (p, e) in pts.iter().zip(expect) {
            assert!((p[0] - e[0]).abs() < 1e-15 && (p[1] - e[1]).abs() < 1e-15);
        }
        assert!(check_layout_feasible(&l, &cfg));
        let spread = initial_layout(&base);
        let h = base.region_half_width / 2.0;
        assert!((spread.pos(0, 0)[0] + h).abs() < 1e-15 && (spread.pos(0, 3)[1] + h).abs() < 1e-15);
        for m in [2, 3, 5, 6, 9, 10] {
            let c = SystemConfig { antennas: m, ..SystemConfig::desk_scale() };
            assert!(check_layout_feasible(&initial_layout(&c), &c));
        }
    }

    #[test]
    fn feasibility_rejects_violations() {
        let cfg = SystemConfig::desk_scale();
        let mut l = initial_layout(&cfg);
        l.coords[0] = cfg.region_half_width * 1.01;
        assert!(!check_layout_feasible(&l, &cfg));
        let mut l = initial_layout(&cfg);
        l.coords[2] = l.coords[0] + 0.4 * cfg.lambda_m;
        l.coords[3] = l.coords[1];
        assert!(!check_layout_feasible(&l, &cfg));
    }
}
