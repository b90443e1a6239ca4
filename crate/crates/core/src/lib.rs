//! Temporal imaging simulator: sampled optical envelopes, dispersive elements,
//! pumped time lenses, imaging topologies, design bounds and time-bin
//! interference.
//!
//! Units throughout: time in ps, angular frequency in rad/ps, GDD in ps^2,
//! third-order dispersion in ps^3, wavelengths in nm.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod design;
pub mod elements;
pub mod envelope;
pub mod error;
pub mod interferometry;
pub mod harness;
pub mod par;
pub mod scenario;
pub mod systems;

pub use design::{requirements, Configuration, DesignReport, DesignRequest};
pub use elements::{apply_dispersion, apply_time_lens, Conversion, DispersiveElement, PumpSpec, TimeLens};
pub use envelope::{SampledEnvelope, SpectralEnvelope, TimeGrid};
pub use error::{Error, Result};
pub use interferometry::{recombine, visibility_experiment, InterferenceResult};
pub use systems::{run_system, StageTrace, SystemTopology, TopologyKind};
