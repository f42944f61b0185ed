//! Compensated one-terminal fault location for radial collector feeders
//! with inverter-based resources.

// `!(x > 0.0)` deliberately rejects NaN alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod feeder;
pub mod locators;
pub mod oracle;
pub mod phasor;
pub mod scenario;

pub use error::{Error, Result};
pub use feeder::{FeederSpec, GridSource, IbrTap, Segment};
pub use locators::{locate, CurrentSource, DistanceEstimate, LocatorConfig, Method};
pub use oracle::{FaultSpec, FaultType, IbrControlConfig, PenetrationVector, ScenarioRecord};
pub use phasor::{Phasor, SequenceImpedances, SequenceSet, ThreePhaseSet};
