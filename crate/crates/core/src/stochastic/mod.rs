//! Brownian increments, control schedules, and Euler-Maruyama integration of
//! the controlled forward SDE.

mod bundle;
mod control;
mod grid;
pub mod rng;

pub use bundle::{
    exit_time, make_bundle, make_bundle_stream, read_dump, simulate_forward, write_dump,
    PathBundle,
};
pub use control::{ControlKind, ControlSchedule, FeedbackRule, StatePartition};
pub use grid::TimeGrid;
