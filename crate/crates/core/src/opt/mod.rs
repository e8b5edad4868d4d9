//! Dense LP and SDP engines used by every bound computation.

pub mod lp;
pub mod sdp;

pub use lp::{lp_solve, lp_solve_with, LpProblem, LpResult, LpStatus, Sense};
pub use sdp::{min_eigenvalue, sdp_solve, sdp_solve_with, SdpConstraint, SdpProblem, SdpResult, SdpStatus};
