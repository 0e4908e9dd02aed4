//! Relative equilibria of symmetric Hamiltonian systems: planar point
//! vortices under SE(2) and an affine rigid body under SO(3)×SO(3).
//!
//! Modules build on each other bottom-up: [`lie`] holds the group
//! machinery, [`gsystem`] the abstract system with integrators, [`vortex`]
//! and [`arb`] the two concrete systems, [`releq`] the solver and
//! diagnostics, and [`persistence`] the continuation experiments.

// `!(x > 0.0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arb;
pub mod error;
pub mod gsystem;
pub mod lie;
pub mod numerics;
pub mod persistence;
pub mod releq;
pub mod vortex;

pub use arb::{ArbState, ArbSystem, ElasticPotential};
pub use error::{Error, Result};
pub use gsystem::{
    conservation_report, integrate, openness_probe, ConservationReport, GSystem, Method, ProbeConfig, ProbeReport,
    Trajectory,
};
pub use lie::{Isotropy, SE2Algebra, SE2Element, SE2Momentum, SO3Pair, SO3PairMomentum};
pub use persistence::{AxisScanReport, ExperimentVerdict, Prop71Report, ScanConfig, ScanOutcome, ScanReport};
pub use releq::{
    Classification, ExtremalityReport, REFailure, REOutcome, REProblem, RESolution, SolverConfig, Verdict,
};
pub use vortex::{VortexConfig, VortexState, VortexSystem, Vorticities};
