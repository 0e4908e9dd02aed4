//! The resolved, serializable form of a run. Every report embeds the
//! [`RunConfig`] that produced it, and `releq replay` re-executes one.

use std::path::PathBuf;

use clap::ValueEnum;
use releq_core::{ElasticPotential, Method, SolverConfig, Vorticities};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Vortex,
    Arb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Rk4,
    Midpoint,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Rk4 => Method::Rk4,
            MethodArg::Midpoint => Method::ImplicitMidpoint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", rename_all = "lowercase", deny_unknown_fields)]
pub enum SystemDef {
    Vortex { gamma: Vorticities },
    Arb { stiffness: f64 },
}

impl SystemDef {
    pub fn potential(&self) -> anyhow::Result<ElasticPotential> {
        match self {
            Self::Arb { stiffness } => Ok(ElasticPotential::new(*stiffness)?),
            Self::Vortex { .. } => anyhow::bail!("not a rigid-body system"),
        }
    }
}

/// A state vector with an optional generator; `xi: None` means fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartPoint {
    pub x: Vec<f64>,
    pub xi: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Command {
    ReFind {
        system: SystemDef,
        mu: Vec<f64>,
        guess: StartPoint,
        solver: SolverConfig,
        extremality: bool,
    },
    Prop71 {
        separation: f64,
        n_offaxis: usize,
        restarts: usize,
    },
    ScanMomentum {
        system: SystemDef,
        guess: StartPoint,
        center: Option<Vec<f64>>,
        half_width: f64,
        points: usize,
        solver: SolverConfig,
        extremality: bool,
    },
    ScanAxis {
        a_min: f64,
        a_max: f64,
        points: usize,
        solver: SolverConfig,
    },
    ScanArb {
        stiffness: f64,
        eps: f64,
        points: usize,
        skew: usize,
        solver: SolverConfig,
    },
    Integrate {
        system: SystemDef,
        state: Vec<f64>,
        t_end: f64,
        dt: f64,
        method: MethodArg,
    },
    Probe {
        center: Vec<f64>,
        targets: Vec<Vec<f64>>,
        delta: f64,
        samples: usize,
        tol: f64,
        saturate: bool,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::ReFind { .. } => "re-find",
            Self::Prop71 { .. } => "prop71",
            Self::ScanMomentum { .. } => "scan-momentum",
            Self::ScanAxis { .. } => "scan-axis",
            Self::ScanArb { .. } => "scan-arb",
            Self::Integrate { .. } => "integrate",
            Self::Probe { .. } => "probe",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: Command,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: Format,
}

/// Every JSON report: tool provenance, the run that produced it, and the
/// command-specific payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope<T> {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub report: T,
}
