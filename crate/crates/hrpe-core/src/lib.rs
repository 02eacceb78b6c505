//! High-resolution multipath parameter estimation for uniform circular
//! arrays driven by stepped-frequency sounding.
//!
//! Given the `P x K` frequency response of a ring of `P` receive positions
//! sampled at `K` frequencies, the crate estimates, per propagation path, the
//! delay, azimuth, elevation, source distance and complex amplitude, using an
//! exact spherical wavefront model so that nearby sources are located in
//! range as well as in angle.
//!
//! The stages, each usable on its own:
//!
//! - [`channel`]: array geometry, exact per-element path parameters, forward
//!   synthesis, and the concatenated power delay profile.
//! - [`sage`]: per-element successive cancellation in the delay domain.
//! - [`bessel`]: first-kind Bessel functions of integer order backing the
//!   phase-mode equalizer.
//! - [`phase_mode`]: circular-harmonic decomposition and the joint
//!   delay-azimuth search spectrum.
//! - [`trajectory`]: elevation estimation by counting per-element support
//!   along candidate delay trajectories.
//! - [`refine`]: maximum-likelihood polish of all five parameters against
//!   the spherical steering model.
//! - [`pipeline`]: the extract-refine-remove outer loop plus scene
//!   evaluation helpers.

pub mod bessel;
pub mod channel;
pub mod error;
pub mod phase_mode;
pub mod pipeline;
pub mod refine;
pub mod sage;
pub mod trajectory;

pub use error::{Error, Result};
