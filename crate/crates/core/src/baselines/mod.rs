//! Wasserstein-family reference metrics: exact transport, sliced and
//! entropic (Sinkhorn).

mod assignment;
mod exact;
mod sinkhorn;
mod sliced;

pub use assignment::solve_assignment;
pub use exact::{exact_ot_sq, CostMatrix, EXACT_SIZE_LIMIT};
pub use sinkhorn::{sinkhorn, sinkhorn_on_cost, sinkhorn_sq, SinkhornConfig, SinkhornOutcome};
pub use sliced::{sliced_wasserstein_sq, sphere_directions, SlicedConfig};
