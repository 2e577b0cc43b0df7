//! Rare-event samples versus their Poissonized point-process version.
//!
//! The crate builds the exact lattice laws of the sum of a rare-event sample
//! (`H1`), of its Poissonized counterpart (`H2`) and of the centered
//! accompanying law (`H3`), measures their distances, evaluates the shapes of
//! the known upper bounds, and checks the point-process statements by
//! simulation.

pub mod bounds;
pub mod dist;
pub mod error;
pub mod families;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod simulator;

pub use dist::{ConvolutionMethod, LatticeDistribution, MomentSummary};
pub use bounds::{BoundContext, BoundEvaluation, FreeParams, GFunction, TheoremId};
pub use error::{Error, Result};
pub use io::ModelFile;
pub use metrics::{EmpiricalCdf, Estimate};
pub use model::{Component, LawOptions, Laws, ModelSummary, RareEventModel};
pub use simulator::{MarkSampler, PointProcessSample, Region};
