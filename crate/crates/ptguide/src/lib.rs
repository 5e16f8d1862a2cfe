//! Prescribed-time guidance with time-independent spatial references.
//!
//! The crate splits simultaneous-arrival guidance into three layers:
//!
//! * [`reference`] — closed-form spatial trajectories parameterized by a
//!   scaled distance instead of time, plus travel-range quadrature and
//!   polynomial speed planning so several vehicles arrive together;
//! * [`ptime`] / [`controller`] — prescribed-time scaling functions and the
//!   cascaded kinematic/dynamic tracking controller built on them;
//! * [`sim`] — fixed-step closed-loop propagation of one vehicle or a
//!   formation against a constant-velocity target, with CSV/JSON outputs
//!   handled by [`scenario`].
//!
//! [`cascade`] contains a standalone verifier for the small-gain-style
//! interconnection conditions that underpin the cascade analysis.

pub mod cascade;
pub mod controller;
pub mod error;
pub mod kinematics;
pub mod ptime;
pub mod reference;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
pub use kinematics::{ErrorState, RelativeState, TargetState};
pub use ptime::{GainSchedule, TauKind};
pub use reference::{ReferenceParams, ReferenceState, ReferenceTrajectory, VelocityProfile};
