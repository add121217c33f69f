//! Block updates of the alternating scheme. Each one minimizes the sum-MSE
//! over one block with the others held fixed and never increases it.

mod beamformer;
mod bs_pol;
mod positions;
mod transmit;
mod user_pol;

pub use beamformer::update_w;
pub use bs_pol::{gaussian_randomize, solve_p44, update_varpi, P44Solution, VarpiReport, VarpiSubproblemData};
pub use positions::{
    descend_positions, update_positions, DropObjective, PositionObjective, PositionOptions, PositionReport,
};
pub use transmit::{transmit_scalar, update_a};
pub use user_pol::{sca_minimize, sca_update_m, MReport, MSubproblemData};
