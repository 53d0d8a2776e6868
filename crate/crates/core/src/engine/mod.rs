//! Exact event-driven propagation of the forced delay equation.

mod forcing;
mod history;
mod segment;
mod solve;
mod trajectory;

pub use forcing::ForcingSchedule;
pub use history::HistoryFunction;
pub use segment::Segment;
pub use solve::{solve, MAX_NEAR_COINCIDENT, MERGE_REL, ZERO_REL};
pub use trajectory::{residual_check, Crossing, Trajectory, Zero};
