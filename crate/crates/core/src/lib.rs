//! Joint beamforming, transmit scaling, polarization and antenna placement
//! for multi-cell over-the-air computation with dual-polarized movable
//! antennas.

pub mod baselines;
pub mod channel;
pub mod error;
pub mod numerics;
pub mod objective;
pub mod orchestrator;
pub mod scene;
pub mod subsolvers;

pub use error::{Result, SolverError};
