//! Simulation and analysis of convex mixtures of single-qubit Pauli channels.
//!
//! The crate models two families of time-parameterized channel pairs whose
//! convex combinations flip the memory character of the dynamics in opposite
//! directions, reconstructs them through simulated photon-counting tomography,
//! and quantifies memory with two diagnostics: CP-divisibility of intermediate
//! maps and trace-distance information backflow.

pub mod channels;
pub mod experiment;
pub mod linalg;
pub mod markovianity;
pub mod tomography;

pub use channels::{
    ChannelModel, ChiMatrix, ChoiMatrix, DensityMatrix, Member, PauliMixing, Scenario,
    TransferMatrix,
};
pub use experiment::{
    ExperimentRun, FidelityPoint, GbarMode, LambdaPoint, Mode, Resampling, RunConfig, TimeGrid,
};
pub use linalg::{CMatrix, EigDecomposition, Tolerances, TOL};
pub use markovianity::{
    GbarPoint, IntermediateMap, RhpMeasure, TraceDistancePoint, ZeroThreshold,
};
pub use tomography::{CountTable, OutcomeProbabilities, ReconstructionResult};
