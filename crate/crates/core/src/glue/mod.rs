//! Gluing seed diagrams onto intervals of inverse temperatures.
//!
//! Seed `k` hangs below the base diagram `Br^0` through quivers whose
//! multiplicities follow weight sequences `s_j, t_j` and whose potentials
//! alternate in sign by `κ`. The seed's trace cone extends to a face of the
//! glued β-KMS cone exactly when both weighted series converge, i.e. when β
//! lies in the seed's interval.

mod build;
mod extension;
mod interval;
mod report;
mod weights;

pub use build::{build_glued, GluedDiagram, Segment, MAX_ABSORB};
pub use extension::{
    decompose, minimal_extension, minimal_extension_with, ExtensionOptions, ExtensionStatus,
    MinimalExtensionResult, DIVERGENCE_THRESHOLD,
};
pub use interval::{Endpoint, IntervalSpec};
pub use report::{
    boundary_report, boundary_report_with, default_anchor, face_generators, BoundaryReport,
    FaceCount, FaceGenerators, Topology,
};
pub use weights::{kappa, weight_sequences, WeightForm, WeightSequences};
