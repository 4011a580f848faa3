//! Joint activity detection and channel estimation for grant-free massive
//! MIMO uplinks with message-scheduling hybrid GAMP.
//!
//! The numerical core is generic over the real scalar type (see [`Real`]);
//! the `*64`/`*32` aliases below pin it for the common cases.

pub mod baselines;
pub mod denoisers;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod scalar;
pub mod scenario;
pub mod scheduling;

pub use baselines::{Estimator, EstimatorResult};
pub use engine::{DenoiserActivity, Engine, OnsagerMode, Start, EngineOptions, GampState, IterationRecord, RunOutcome};
pub use error::{Error, Result};
pub use scalar::{Real, C};
pub use scenario::{Scenario, ScenarioFile, SystemConfig};
pub use scheduling::{GroupSize, Policy, ResidualMetric, ResidualVector, ScheduleSet, Scheduler};

/// Crate version, recorded in experiment metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Complex64 = C<f64>;
pub type Complex32 = C<f32>;

pub type Scenario64 = Scenario<f64>;
pub type Scenario32 = Scenario<f32>;
pub type GampState64 = GampState<f64>;
pub type GampState32 = GampState<f32>;
pub type Engine64<'s> = Engine<'s, f64>;
pub type Engine32<'s> = Engine<'s, f32>;
pub type EstimatorResult64 = EstimatorResult<f64>;
pub type EstimatorResult32 = EstimatorResult<f32>;
pub type RunOutcome64 = RunOutcome<f64>;
