//! Adaptation laws: deadzones, mirror-map parameter updates, the trajectory
//! tape for the kernel law, and the neural-network gradient law.

pub mod deadzone;
pub mod mirror;
pub mod nn;
pub mod state;
pub mod tape;

pub use deadzone::{deadzone_slope, deadzone_value, DeadzoneSpec};
pub use mirror::{mirror_primal, MirrorMap};
pub use nn::{nn_forward, nn_update_rhs, NNParams};
pub use state::{parametric_update_duals, AdaptState};
pub use tape::{nonparametric_input, tape_append, TrajectoryTape};
