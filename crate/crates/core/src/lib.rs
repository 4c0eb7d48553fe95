//! Online change-point detection for multivariate Hawkes processes.
//!
//! The crate covers the whole pipeline: exact Ogata-thinning simulation of
//! Hawkes networks with an injected change in the influence matrix, the
//! recursive and memory-bounded CUSUM detectors, sliding-window score, GLR
//! and Shewhart baselines, EM estimation, and Monte Carlo ARL/EDD benchmarks.
//!
//! Model and likelihood code is generic over [`Real`] (`f32`/`f64`); the
//! aliases below fix the scalar to `f64`, which the detectors use.

pub mod baseline;
pub mod cusum;
pub mod detector;
pub mod error;
pub mod estimation;
pub mod events;
pub mod harness;
pub mod io;
pub mod kernel;
pub mod likelihood;
pub mod model;
pub mod networks;
pub mod quadrature;
pub mod reproduce;
pub mod scalar;
pub mod simulate;

pub use error::{HawkesError, Result};
pub use scalar::Real;

pub type KernelSpec = kernel::KernelSpec<f64>;
pub type HawkesModel = model::HawkesModel<f64>;
pub type ChangeSpec = model::ChangeSpec<f64>;
pub type EventStream = events::EventStream<f64>;
pub type Event = events::Event<f64>;
