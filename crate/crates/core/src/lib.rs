//! Generalized quantum measurement: completely positive maps with
//! rectangular Kraus matrices, POVM dilations, decoherence by an
//! uncontrolled environment, and the Lindblad equation as the coarse-time
//! limit of repeated weak interventions.
//!
//! Module map:
//!
//! - [`linalg`], [`state`], [`povm`], [`random`]: matrices, validated states,
//!   POVMs, seeded streams and Haar sampling.
//! - [`intervention`]: selective and non-selective maps, composition,
//!   refinement checks, record sampling.
//! - [`dilation`]: POVM to Kraus to isometry to unitary, premeasurement and
//!   discarding, factorable and adaptive bipartite constructions.
//! - [`decoherence`]: random environment overlaps and their scaling with the
//!   environment dimension.
//! - [`lindblad`]: master equation, RK4 integration, discrete Kraus steps.
//! - [`io`], [`scenario`]: file formats and experiment descriptions.

pub mod decoherence;
pub mod dilation;
pub mod error;
pub mod fixtures;
pub mod intervention;
pub mod io;
pub mod linalg;
pub mod lindblad;
pub mod povm;
pub mod random;
pub mod scenario;
pub mod state;
pub mod tolerance;

pub use error::{Error, Result};
pub use intervention::{AdaptiveIntervention, Intervention, Outcome, Record, RecordTable};
pub use linalg::{psd_sqrt, tensor, ComplexMatrix, C64};
pub use povm::{Povm, PovmElement};
pub use random::Stream;
pub use state::{partial_trace, trace_distance, validate_density, DensityMatrix, PureState};
