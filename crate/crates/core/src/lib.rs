//! Multi-period dispatch, storage scheduling and line switching on radial
//! distribution feeders, with a synthetic EV charging demand generator.

pub mod ev;
pub mod fixtures;
pub mod model;
pub mod network;
pub mod schedule;
pub mod solve;
pub mod study;
pub mod topology;
pub mod verify;

pub use model::{build_model, BessBinaries, MilpProblem, ModelError, SolverConfig, VarKey};
pub use network::{
    apply_ev_demand, load_instance, validate_instance, CaseConfig, Configuration, InstanceError, NetworkInstance,
    Profile, ValidationReport,
};
pub use schedule::{DispatchSchedule, HourDispatch};
pub use solve::{
    big_m_probe, branch_and_bound, export_mps, solve_by_enumeration, solve_case, solve_lp, CaseResult, CaseStatus,
    SolveError, SolveStats,
};
pub use topology::{assert_schedule_radial, enumerate_radial_topologies, is_radial_forest, Topology};
pub use verify::{verify_schedule, VerificationReport};
