//! Energy-minimal partial offloading for a two-UE UAV mobile-edge-computing
//! system under NOMA, FDMA and TDMA, with Shannon-rate and finite-blocklength
//! transmission models.

pub mod bcd;
pub mod comparison;
pub mod convex;
pub mod energy;
pub mod error;
pub mod model;
pub mod oracle;
pub mod power;

pub use energy::{
    check_constraints, check_constraints_in, total_energy, ConstraintEntry, ConstraintId,
    ConstraintReport, EnergyBreakdown, UeEnergy,
};
pub use error::{ModelError, Result};
pub use model::{
    channel_gains, computation_energies, cpu_frequencies, inverse_q, snr_threshold, ChannelState,
    Decision, Regime, Scheme, SystemConfig, UeProfile,
};
pub use power::{min_powers, sic_margin, EvalMode, NomaBranches, PowerSolution};
pub use bcd::{
    bcd_solve, bcd_solve_with, default_init, feasible_init, optimize, solve_offload_time, solve_task_split,
    solve_uav_location, BcdOptions, Blocks, OptResult, ScaOptions, SlackState,
    SubproblemCoefficients,
};
pub use oracle::{grid_search, subproblem_oracle, GridSpec, OracleResult, Subproblem};
pub use comparison::{
    ab_fields, fdma_tdma_gap, noma_fdma_finite_delta, scheme_gaps, symmetric_delta, ComparisonReport,
    DeltaReport, PairGap, Relation,
};
