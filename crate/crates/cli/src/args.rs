//! Command-line flags and their translation into a [`RunConfig`].

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use releq_core::{ArbState, SolverConfig, VortexState, Vorticities};
use serde::Deserialize;
use serde_json::Value;

use crate::config::{Command, Format, MethodArg, RunConfig, StartPoint, SystemKind, SystemDef};

#[derive(Debug, Parser)]
#[command(name = "releq", version, about = "Find and continue relative equilibria of symmetric Hamiltonian systems")]
pub struct Cli {
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Solve for one relative equilibrium from a guess.
    ReFind(ReFindArgs),
    /// Search near the collinear (1, 1, −2) equilibrium for states above its
    /// energy.
    Prop71(Prop71Args),
    /// Continue relative equilibria over a family of momenta.
    Scan(ScanArgs),
    /// Integrate Hamilton's equations and report conservation.
    Integrate(IntegrateArgs),
    /// Sample the image of q × p near a point.
    Probe(ProbeArgs),
    /// Re-execute a recorded run configuration (JSON file).
    Replay { config: PathBuf },
}

#[derive(Debug, Args)]
pub struct SystemArgs {
    #[arg(long, value_enum)]
    pub system: SystemKind,
    /// Vortex: `{"gamma": [...]}`. Rigid body: `{"stiffness": k}`, default 1.
    /// Inline JSON or a path to a JSON file.
    #[arg(long)]
    pub params: Option<String>,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = SolverConfig::default().tol)]
    pub tol: f64,
    #[arg(long, default_value_t = SolverConfig::default().max_iter)]
    pub max_iter: usize,
}

impl SolverArgs {
    fn config(&self) -> anyhow::Result<SolverConfig> {
        if !(self.tol > 0.0) {
            bail!("--tol must be positive, got {}", self.tol);
        }
        Ok(SolverConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            ..SolverConfig::default()
        })
    }
}

#[derive(Debug, Args)]
pub struct ReFindArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Target momentum. Vortex: `re,im,r`, or `c,r` for real `c`.
    /// Rigid body: the six components of (μ_L, μ_R).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    pub mu: Vec<f64>,
    /// Starting state. Vortex: `[[x, y], ...]` or `{"z": [[x, y], ...]}`.
    /// Rigid body: `{"Q": [[...]], "P": [[...]]}`, default the predictor.
    #[arg(long)]
    pub guess: Option<String>,
    /// Starting generator; fitted to the guess when omitted.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub xi: Option<Vec<f64>>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Also run the energy–momentum extremality test.
    #[arg(long)]
    pub extremality: bool,
}

#[derive(Debug, Args)]
pub struct Prop71Args {
    /// Half-distance `a` of the collinear state (1,−1,0)·a.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub separation: f64,
    #[arg(long, default_value_t = 100)]
    pub n_offaxis: usize,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Experiment {
    Momentum,
    Axis,
    Arb,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long, value_enum)]
    pub experiment: Experiment,
    /// Momentum scans: the system.
    #[arg(long, value_enum)]
    pub system: Option<SystemKind>,
    #[arg(long)]
    pub params: Option<String>,
    /// Momentum scans: starting state, in the `re-find --guess` format.
    #[arg(long)]
    pub guess: Option<String>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub xi: Option<Vec<f64>>,
    /// Momentum scans: box center; defaults to the guess's momentum.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub center: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.05)]
    pub half_width: f64,
    /// Grid points per axis (momentum box, arb grid) or along the axis.
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub a_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub a_max: f64,
    /// Rigid-body scans: half-width of the aligned-momentum grid.
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Rigid-body scans: extra targets with random directions.
    #[arg(long, default_value_t = 8)]
    pub skew: usize,
    #[arg(long)]
    pub extremality: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct IntegrateArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Initial state, in the `re-find --guess` format.
    #[arg(long)]
    pub state: String,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub dt: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Rk4)]
    pub method: MethodArg,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    /// The point (q, p) ∈ ℝ⁶.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "1,0,0,1,0,0")]
    pub center: Vec<f64>,
    /// JSON list of targets in ℝ³, inline or a file path.
    #[arg(long, default_value = "[[0.01, 0, 0], [0, 0, 0]]")]
    pub targets: String,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value_t = 20_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    /// Move each sample by a random rotation pair before mapping.
    #[arg(long)]
    pub saturate: bool,
}

/// Inline JSON, or the contents of the named file.
fn json_arg(s: &str) -> anyhow::Result<Value> {
    let t = s.trim_start();
    let text = if t.starts_with('{') || t.starts_with('[') {
        s.to_owned()
    } else {
        std::fs::read_to_string(Path::new(s)).with_context(|| format!("reading {s}"))?
    };
    serde_json::from_str(&text).with_context(|| format!("parsing JSON {s:?}"))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VortexParams {
    gamma: Vorticities,
}

fn system_def(kind: SystemKind, params: Option<&str>) -> anyhow::Result<SystemDef> {
    match kind {
        SystemKind::Vortex => {
            let p = params.context("--params {\"gamma\": [...]} is required for vortex systems")?;
            let p: VortexParams = serde_json::from_value(json_arg(p)?).context("vortex parameters")?;
            Ok(SystemDef::Vortex { gamma: p.gamma })
        }
        SystemKind::Arb => {
            let pot = match params {
                Some(p) => serde_json::from_value(json_arg(p)?).context("rigid-body parameters")?,
                None => releq_core::ElasticPotential::default(),
            };
            Ok(SystemDef::Arb {
                stiffness: pot.stiffness,
            })
        }
    }
}

fn state_vector(def: &SystemDef, s: &str) -> anyhow::Result<Vec<f64>> {
    let v = json_arg(s)?;
    match def {
        SystemDef::Vortex { .. } => {
            let state: VortexState = match v {
                Value::Array(_) => VortexState::new(serde_json::from_value::<Vec<Complex64>>(v)?),
                other => serde_json::from_value(other).context("vortex state")?,
            };
            Ok(state.to_vector().as_slice().to_vec())
        }
        SystemDef::Arb { .. } => {
            let state: ArbState = serde_json::from_value(v).context("rigid-body state")?;
            Ok(state.to_vector().as_slice().to_vec())
        }
    }
}

fn momentum_vector(def: &SystemDef, mu: &[f64]) -> Vec<f64> {
    match (def, mu) {
        (SystemDef::Vortex { .. }, [c, r]) => vec![*c, 0.0, *r],
        _ => mu.to_vec(),
    }
}

fn start_point(def: &SystemDef, guess: Option<&str>, xi: Option<Vec<f64>>, mu: &[f64]) -> anyhow::Result<StartPoint> {
    let x = match (guess, def) {
        (Some(g), _) => state_vector(def, g)?,
        (None, SystemDef::Arb { .. }) => {
            let m = releq_core::SO3PairMomentum::from_slice(mu)?;
            let (state, l, r) = releq_core::arb::arb_predictor(&m, &def.potential()?);
            let xi = xi.unwrap_or_else(|| l.iter().chain(r.iter()).copied().collect());
            return Ok(StartPoint {
                x: state.to_vector().as_slice().to_vec(),
                xi: Some(xi),
            });
        }
        (None, SystemDef::Vortex { .. }) => bail!("--guess is required for vortex systems"),
    };
    Ok(StartPoint { x, xi })
}

impl Cli {
    /// Resolves flags into a run configuration. `Replay` reads one from disk.
    pub fn into_config(self) -> anyhow::Result<RunConfig> {
        let run = match self.command {
            Sub::Replay { config } => {
                let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
                return serde_json::from_str(&text).with_context(|| format!("parsing {}", config.display()));
            }
            Sub::ReFind(a) => {
                let system = system_def(a.system.system, a.system.params.as_deref())?;
                let mu = momentum_vector(&system, &a.mu);
                let guess = start_point(&system, a.guess.as_deref(), a.xi, &mu)?;
                Command::ReFind {
                    system,
                    mu,
                    guess,
                    solver: a.solver.config()?,
                    extremality: a.extremality,
                }
            }
            Sub::Prop71(a) => Command::Prop71 {
                separation: a.separation,
                n_offaxis: a.n_offaxis,
                restarts: a.restarts,
            },
            Sub::Scan(a) => match a.experiment {
                Experiment::Momentum => {
                    let kind = a.system.context("--system is required for momentum scans")?;
                    let system = system_def(kind, a.params.as_deref())?;
                    let center = a.center.map(|c| momentum_vector(&system, &c));
                    let probe_mu = center.clone().unwrap_or_else(|| vec![0.0; 6]);
                    Command::ScanMomentum {
                        guess: start_point(&system, a.guess.as_deref(), a.xi, &probe_mu)?,
                        system,
                        center,
                        half_width: a.half_width,
                        points: a.points.unwrap_or(3),
                        solver: a.solver.config()?,
                        extremality: a.extremality,
                    }
                }
                Experiment::Axis => Command::ScanAxis {
                    a_min: a.a_min,
                    a_max: a.a_max,
                    points: a.points.unwrap_or(20),
                    solver: a.solver.config()?,
                },
                Experiment::Arb => {
                    let stiffness = system_def(SystemKind::Arb, a.params.as_deref())?.potential()?.stiffness;
                    Command::ScanArb {
                        stiffness,
                        eps: a.eps,
                        points: a.points.unwrap_or(5),
                        skew: a.skew,
                        solver: a.solver.config()?,
                    }
                }
            },
            Sub::Integrate(a) => {
                let system = system_def(a.system.system, a.system.params.as_deref())?;
                Command::Integrate {
                    state: state_vector(&system, &a.state)?,
                    system,
                    t_end: a.t,
                    dt: a.dt,
                    method: a.method,
                }
            }
            Sub::Probe(a) => {
                let targets: Vec<Vec<f64>> = serde_json::from_value(json_arg(&a.targets)?).context("probe targets")?;
                Command::Probe {
                    center: a.center,
                    targets,
                    delta: a.delta,
                    samples: a.samples,
                    tol: a.tol,
                    saturate: a.saturate,
                }
            }
        };
        Ok(RunConfig {
            run,
            seed: self.seed,
            output: self.output,
            format: self.format,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> anyhow::Result<RunConfig> {
        Cli::try_parse_from(std::iter::once("releq").chain(args.iter().copied()))?.into_config()
    }

    #[test]
    fn two_component_vortex_momentum_is_real_c() {
        let cfg = parse(&["re-find", "--system", "vortex", "--params", r#"{"gamma":[1,1,-2]}"#, "--mu", "0.5,-1",
            "--guess", "[[0,0],[1,0],[0,1]]"])
        .unwrap();
        let Command::ReFind { mu, guess, .. } = cfg.run else { panic!("wrong command") };
        assert_eq!(mu, vec![0.5, 0.0, -1.0]);
        assert_eq!(guess.x, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        assert!(guess.xi.is_none());
    }

    #[test]
    fn rigid_body_guess_defaults_to_the_predictor() {
        let cfg = parse(&["re-find", "--system", "arb", "--mu", "0,0,0,0,0,0"]).unwrap();
        let Command::ReFind { guess, system, .. } = cfg.run else { panic!("wrong command") };
        assert_eq!(system, SystemDef::Arb { stiffness: 1.0 });
        assert_eq!(guess.x.len(), 18);
        assert_eq!(guess.xi.as_ref().map(Vec::len), Some(6));
    }

    #[test]
    fn vortex_runs_need_parameters_and_a_guess() {
        assert!(parse(&["re-find", "--system", "vortex", "--mu", "0,1", "--guess", "[[0,0],[1,0]]"]).is_err());
        assert!(parse(&["re-find", "--system", "vortex", "--params", r#"{"gamma":[1,-1]}"#, "--mu", "0,1"]).is_err());
        assert!(parse(&["re-find", "--system", "vortex", "--params", r#"{"gamma":[1,-1],"x":1}"#, "--mu", "0,1",
            "--guess", "[[0,0],[1,0]]"])
        .is_err());
    }

    #[test]
    fn inline_json_or_file() {
        assert_eq!(json_arg("[1, 2]").unwrap(), serde_json::json!([1, 2]));
        let dir = std::env::temp_dir().join(format!("releq-args-{}", std::process::id()));
        std::fs::write(&dir, "{\"a\": 1}").unwrap();
        assert_eq!(json_arg(dir.to_str().unwrap()).unwrap(), serde_json::json!({"a": 1}));
        std::fs::remove_file(&dir).unwrap();
        assert!(json_arg("/nonexistent/releq.json").is_err());
    }

    #[test]
    fn global_flags_are_recorded() {
        let cfg = parse(&["prop71", "--seed", "9", "--format", "csv"]).unwrap();
        assert_eq!((cfg.seed, cfg.format), (9, Format::Csv));
        assert_eq!(cfg.run.name(), "prop71");
    }
}
