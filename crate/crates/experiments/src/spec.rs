use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use dpma_core::orchestrator::{Scheme, SolveOptions};
use dpma_core::scene::{ConfigError, SystemConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Convergence,
    VsAntennas,
    VsCells,
    VsUsers,
    VsPower,
    VsPaths,
    VsRegion,
    MulticellVsSinglecell,
    Statistical,
    DistributedDemo,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 10] = [
        ExperimentKind::Convergence,
        ExperimentKind::VsAntennas,
        ExperimentKind::VsCells,
        ExperimentKind::VsUsers,
        ExperimentKind::VsPower,
        ExperimentKind::VsPaths,
        ExperimentKind::VsRegion,
        ExperimentKind::MulticellVsSinglecell,
        ExperimentKind::Statistical,
        ExperimentKind::DistributedDemo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::VsAntennas => "vs_antennas",
            ExperimentKind::VsCells => "vs_cells",
            ExperimentKind::VsUsers => "vs_users",
            ExperimentKind::VsPower => "vs_power",
            ExperimentKind::VsPaths => "vs_paths",
            ExperimentKind::VsRegion => "vs_region",
            ExperimentKind::MulticellVsSinglecell => "multicell_vs_singlecell",
            ExperimentKind::Statistical => "statistical",
            ExperimentKind::DistributedDemo => "distributed_demo",
        }
    }

    /// Name of the swept quantity as written to the CSV.
    pub fn sweep_param(self) -> &'static str {
        match self {
            ExperimentKind::VsAntennas => "M",
            ExperimentKind::VsCells => "B",
            ExperimentKind::VsUsers => "K",
            ExperimentKind::VsPaths => "L",
            ExperimentKind::VsRegion => "region_wavelengths",
            _ => "P_dbm",
        }
    }

    /// Applies one sweep value to the base configuration.
    pub fn point_config(self, base: &SystemConfig, value: f64) -> SystemConfig {
        let count = value.round() as usize;
        match self {
            ExperimentKind::VsAntennas => SystemConfig { antennas: count, ..base.clone() },
            ExperimentKind::VsCells => SystemConfig { cells: count, ..base.clone() },
            ExperimentKind::VsUsers => SystemConfig { users_per_cell: count, ..base.clone() },
            ExperimentKind::VsPaths => SystemConfig { paths: count, ..base.clone() },
            ExperimentKind::VsRegion => base.clone().with_region_wavelengths(value),
            _ => base.clone().with_power_dbm(value),
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExperimentKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
            format!("unknown experiment `{s}`, expected one of: {}", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub sweep: Vec<f64>,
    pub n_drops: usize,
    pub schemes: Vec<Scheme>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub solve: SolveOptions,
    /// Channel samples per training drop (statistical experiment).
    pub samples: usize,
    /// Held-out samples per drop (statistical experiment).
    pub held_out: usize,
    /// Unknowns of the demo least-squares problem.
    pub demo_dim: usize,
}

impl ExperimentSpec {
    /// Desk-scale defaults: 10 drops per point and short sweeps.
    pub fn new(kind: ExperimentKind, seed: u64) -> Self {
        use ExperimentKind::*;
        let sweep = match kind {
            Convergence => vec![30.0],
            VsAntennas => vec![4.0, 6.0],
            VsCells => vec![2.0, 3.0, 4.0],
            VsUsers => vec![4.0, 8.0],
            VsPower | MulticellVsSinglecell | Statistical | DistributedDemo => vec![20.0, 25.0, 30.0],
            VsPaths => vec![2.0, 3.0, 4.0],
            VsRegion => vec![1.0, 2.0, 4.0],
        };
        let schemes = match kind {
            VsRegion => vec![Scheme::Dpma, Scheme::Ma],
            MulticellVsSinglecell | Statistical | DistributedDemo => vec![Scheme::Dpma],
            _ => vec![Scheme::Dpma, Scheme::Ma, Scheme::Fpa],
        };
        ExperimentSpec {
            kind,
            sweep,
            n_drops: 10,
            schemes,
            seed,
            out_dir: PathBuf::from("out"),
            solve: SolveOptions::default(),
            samples: 10,
            held_out: 10,
            demo_dim: 4,
        }
    }

    /// Longer sweeps for the full-size network.
    pub fn full_scale(mut self) -> Self {
        use ExperimentKind::*;
        match self.kind {
            VsAntennas => self.sweep = vec![2.0, 4.0, 6.0, 8.0],
            VsCells => self.sweep = vec![2.0, 3.0, 4.0, 5.0],
            VsUsers => self.sweep = vec![4.0, 6.0, 8.0, 10.0],
            VsPower | MulticellVsSinglecell | Statistical | DistributedDemo => {
                self.sweep = vec![10.0, 15.0, 20.0, 25.0, 30.0]
            }
            VsRegion => self.sweep = vec![1.0, 2.0, 3.0, 4.0],
            Convergence | VsPaths => {}
        }
        self.n_drops = 50;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.sweep.is_empty() {
            return Err(ConfigError::Invalid("the sweep must have at least one value".into()));
        }
        if self.sweep.iter().any(|v| !v.is_finite()) {
            return Err(ConfigError::Invalid("sweep values must be finite".into()));
        }
        if self.n_drops == 0 {
            return Err(ConfigError::Invalid("n_drops must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(ConfigError::Invalid("at least one scheme is required".into()));
        }
        if self.kind == ExperimentKind::Statistical && self.samples == 0 {
            return Err(ConfigError::Invalid("the statistical experiment needs at least one sample".into()));
        }
        if self.kind == ExperimentKind::DistributedDemo && self.demo_dim == 0 {
            return Err(ConfigError::Invalid("demo_dim must be at least 1".into()));
        }
        Ok(())
    }
}
