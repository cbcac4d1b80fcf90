//! Non-cooperative base-station selection and base-station sharing games.
//!
//! Players (transmitters) choose how to spread a power budget over a set of
//! base stations, each owning a slice of the bandwidth, and maximize their own
//! spectral efficiency. Both the selection game (one station per player, at
//! full power) and the sharing game (any split of the budget) are exact
//! potential games with the same potential.
//!
//! Players and stations are zero-based throughout the API.

pub mod channel;
pub mod config;
pub mod error;
pub mod game;
pub mod limits;
pub mod metrics;
pub mod report;
pub mod selection;
pub mod sharing;

#[cfg(test)]
mod invariants;

pub use channel::{draw_channels, params_from_snr, ChannelMatrix, NetworkParams, RngSeed};
pub use error::{Error, Result};
pub use game::{
    check_exact_potential, mai, potential, sinr, utilities, utility, PowerProfile, Schedule,
    UtilityVector,
};
pub use limits::{
    empirical_fractions, mixed_potential, mixed_utility, no_fully_mixed_ne_2x2,
    nonatomic_equilibrium_fractions, nonatomic_potential, FractionVector, MixedProfile,
};
pub use metrics::{
    braess_compare, efficiency_selection, network_se, sweep_poa_pos, EfficiencyReport, SweepConfig,
    SweepResult,
};
pub use selection::{
    adjacency_matrices, best_response_selection, enumerate_ne, graph_distance, max_ne_bound,
    run_selection_dynamics, NeReport, OrientedGraph, ProfileIndex, ProfileSpace, SelectionProfile,
};
pub use sharing::{kkt_residual, run_sharing_dynamics, water_fill, WaterFillingSolution};
