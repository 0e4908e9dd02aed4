//! Executes a [`RunConfig`] and renders its report.

use std::fmt::Write as _;

use anyhow::{bail, Context};
use nalgebra::DVector;
use releq_core::gsystem::{cross_product_map, random_rotation_pair};
use releq_core::persistence::{arb_scan, arb_targets, axis_scan, box_grid, momentum_scan, prop71_experiment};
use releq_core::releq::{extremality_test, fit_generator, re_solve};
use releq_core::{
    conservation_report, integrate, openness_probe, ArbSystem, AxisScanReport, ConservationReport,
    ExperimentVerdict, ExtremalityReport, GSystem, Isotropy, ProbeConfig, ProbeReport, Prop71Report, REOutcome,
    REProblem, ScanConfig, ScanReport, Trajectory, VortexSystem,
};
use serde::{Deserialize, Serialize};

use crate::config::{Command, Envelope, Format, RunConfig, StartPoint, SystemDef};

/// Whether the run reached its goal. Maps to exit codes 0 and 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    Unconverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReFindReport {
    pub outcome: REOutcome,
    pub isotropy: Isotropy,
    pub extremality: Option<ExtremalityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrateReport {
    pub trajectory: Trajectory,
    pub conservation: ConservationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Report {
    ReFind(ReFindReport),
    Prop71(Box<Prop71Report>),
    Scan(ScanReport),
    Axis(AxisScanReport),
    Integrate(IntegrateReport),
    Probe(ProbeReport),
}

/// A dynamically dispatched system; the solver entry points are generic,
/// so each arm calls through `with_system`.
enum AnySystem {
    Vortex(VortexSystem),
    Arb(ArbSystem),
}

macro_rules! with_system {
    ($sys:expr, |$s:ident| $body:expr) => {
        match $sys {
            AnySystem::Vortex($s) => $body,
            AnySystem::Arb($s) => $body,
        }
    };
}

fn build(def: &SystemDef) -> anyhow::Result<AnySystem> {
    Ok(match def {
        SystemDef::Vortex { gamma } => AnySystem::Vortex(VortexSystem::new(gamma.clone())),
        SystemDef::Arb { .. } => AnySystem::Arb(ArbSystem::new(def.potential()?)),
    })
}

fn start<S: GSystem>(sys: &S, start: &StartPoint) -> anyhow::Result<(DVector<f64>, DVector<f64>)> {
    let x = DVector::from_column_slice(&start.x);
    if x.len() != sys.state_dim() {
        bail!("guess has {} components, the system needs {}", x.len(), sys.state_dim());
    }
    sys.check_domain(&x).context("guess is outside the phase space")?;
    let xi = match &start.xi {
        Some(xi) if xi.len() != sys.group_dim() => {
            bail!("generator has {} components, the group has dimension {}", xi.len(), sys.group_dim())
        }
        Some(xi) => DVector::from_column_slice(xi),
        None => fit_generator(sys, &x)?,
    };
    Ok((x, xi))
}

fn momentum_arg<S: GSystem>(sys: &S, mu: &[f64]) -> anyhow::Result<DVector<f64>> {
    if mu.len() != sys.group_dim() {
        bail!("momentum has {} components, the group has dimension {}", mu.len(), sys.group_dim());
    }
    Ok(DVector::from_column_slice(mu))
}

pub fn execute(cfg: &RunConfig) -> anyhow::Result<(Status, Report)> {
    match &cfg.run {
        Command::ReFind {
            system,
            mu,
            guess,
            solver,
            extremality,
        } => with_system!(&build(system)?, |sys| {
            let mu = momentum_arg(sys, mu)?;
            let (x0, xi0) = start(sys, guess)?;
            let outcome = re_solve(&REProblem::new(sys, mu.clone()).with_config(*solver), &x0, &xi0)?;
            let extremality = match (&outcome, extremality) {
                (REOutcome::Converged(sol), true) => {
                    Some(extremality_test(sys, sol, &sys.isotropy_algebra(&sol.momentum()))?)
                }
                _ => None,
            };
            let status = match outcome {
                REOutcome::Converged(_) => Status::Success,
                REOutcome::Failed(_) => Status::Unconverged,
            };
            let isotropy = sys.isotropy(&mu);
            Ok((
                status,
                Report::ReFind(ReFindReport {
                    outcome,
                    isotropy,
                    extremality,
                }),
            ))
        }),
        Command::Prop71 {
            separation,
            n_offaxis,
            restarts,
        } => {
            let r = prop71_experiment(*separation, *n_offaxis, *restarts, cfg.seed)?;
            let status = match r.verdict {
                ExperimentVerdict::Pass => Status::Success,
                ExperimentVerdict::Fail => Status::Unconverged,
            };
            Ok((status, Report::Prop71(Box::new(r))))
        }
        Command::ScanMomentum {
            system,
            guess,
            center,
            half_width,
            points,
            solver,
            extremality,
        } => with_system!(&build(system)?, |sys| {
            let (x0, xi0) = start(sys, guess)?;
            let center = match center {
                Some(c) => momentum_arg(sys, c)?,
                None => sys.momentum(&x0),
            };
            let seed = re_solve(&REProblem::new(sys, center.clone()).with_config(*solver), &x0, &xi0)?;
            let Some(seed) = seed.into_converged() else {
                eprintln!("seed relative equilibrium did not converge");
                return Ok((Status::Unconverged, Report::Scan(empty_scan(cfg.seed))));
            };
            let config = ScanConfig {
                solver: *solver,
                exp2pih: matches!(system, SystemDef::Vortex { .. }),
                extremality: *extremality,
                ..ScanConfig::default()
            };
            let mut report = momentum_scan(sys, &seed, &box_grid(&center, *half_width, *points), &config, None)?;
            report.seed = cfg.seed;
            Ok((Status::Success, Report::Scan(report)))
        }),
        Command::ScanAxis {
            a_min,
            a_max,
            points,
            solver,
        } => {
            let mut r = axis_scan(*a_min, *a_max, *points, solver)?;
            r.scan.seed = cfg.seed;
            Ok((Status::Success, Report::Axis(r)))
        }
        Command::ScanArb {
            stiffness,
            eps,
            points,
            skew,
            solver,
        } => {
            let pot = releq_core::ElasticPotential::new(*stiffness)?;
            let targets = arb_targets(*eps, *points, *skew, cfg.seed);
            Ok((Status::Success, Report::Scan(arb_scan(&pot, &targets, solver, cfg.seed)?)))
        }
        Command::Integrate {
            system,
            state,
            t_end,
            dt,
            method,
        } => with_system!(&build(system)?, |sys| {
            if !(*t_end >= 0.0 && t_end.is_finite()) {
                bail!("integration time must be finite and nonnegative, got {t_end}");
            }
            if !(*dt > 0.0 && dt.is_finite()) {
                bail!("time step must be positive, got {dt}");
            }
            let x0 = DVector::from_column_slice(state);
            if x0.len() != sys.state_dim() {
                bail!("state has {} components, the system needs {}", x0.len(), sys.state_dim());
            }
            let steps = (t_end / dt).round() as usize;
            let step = if steps == 0 { *dt } else { t_end / steps as f64 };
            let trajectory = integrate(sys, &x0, step, steps, (*method).into())?;
            let conservation = conservation_report(sys, &trajectory)?;
            Ok((
                Status::Success,
                Report::Integrate(IntegrateReport {
                    trajectory,
                    conservation,
                }),
            ))
        }),
        Command::Probe {
            center,
            targets,
            delta,
            samples,
            tol,
            saturate,
        } => {
            if center.len() != 6 || targets.iter().any(|t| t.len() != 3) {
                bail!("the probe maps (q, p) ∈ ℝ⁶ to q × p ∈ ℝ³");
            }
            let config = ProbeConfig {
                delta: *delta,
                samples: *samples,
                tol: *tol,
                seed: cfg.seed,
                group_saturate: *saturate,
            };
            let targets: Vec<DVector<f64>> = targets.iter().map(|t| DVector::from_column_slice(t)).collect();
            let report = openness_probe(
                cross_product_map,
                &DVector::from_column_slice(center),
                &targets,
                &config,
                Some(&random_rotation_pair),
            )?;
            Ok((Status::Success, Report::Probe(report)))
        }
    }
}

fn empty_scan(seed: u64) -> ScanReport {
    ScanReport {
        experiment: "momentum".into(),
        seed,
        config: ScanConfig::default(),
        seed_solution: None,
        grid: Vec::new(),
        outcomes: Vec::new(),
        converged: 0,
        extremal: 0,
        elapsed_seconds: 0.0,
    }
}

pub fn render(cfg: &RunConfig, report: Report) -> anyhow::Result<String> {
    match cfg.format {
        Format::Json => {
            let env = Envelope {
                tool: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
                config: cfg.clone(),
                report,
            };
            Ok(serde_json::to_string_pretty(&env)? + "\n")
        }
        Format::Csv => {
            let mut out = format!(
                "# {} {} command={} seed={}\n",
                env!("CARGO_PKG_NAME"),
                env!("CARGO_PKG_VERSION"),
                cfg.run.name(),
                cfg.seed
            );
            out.push_str(&csv(cfg, &report)?);
            Ok(out)
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:e}"))
}

fn csv(cfg: &RunConfig, report: &Report) -> anyhow::Result<String> {
    let mut out = String::new();
    match report {
        Report::ReFind(r) => {
            out.push_str("status,class,energy,residual,iterations\n");
            match &r.outcome {
                REOutcome::Converged(s) => writeln!(
                    out,
                    "converged,{},{:e},{:e},{}",
                    s.classification.as_str(),
                    s.energy,
                    s.residual_norm,
                    s.iterations
                )?,
                REOutcome::Failed(f) => writeln!(out, "failed,,,{:e},{}", f.best_residual, f.iterations)?,
            }
        }
        Report::Prop71(r) => {
            out.push_str("mu_re,mu_im,mu_r,attempts,converged,equilateral,above_threshold,max_exp2pih,law_value\n");
            for f in &r.offaxis {
                writeln!(
                    out,
                    "{:e},{:e},{:e},{},{},{},{},{},{:e}",
                    f.target[0],
                    f.target[1],
                    f.target[2],
                    f.attempts,
                    f.converged,
                    f.equilateral,
                    f.above_threshold,
                    opt(f.max_exp2pih),
                    f.law_value
                )?;
            }
        }
        Report::Scan(r) => out.push_str(&r.to_csv()),
        Report::Axis(r) => out.push_str(&r.scan.to_csv()),
        Report::Integrate(r) => {
            let labels: Vec<String> = match &cfg.run {
                Command::Integrate {
                    system: SystemDef::Vortex { .. },
                    ..
                } => (0..r.trajectory.states[0].len() / 2)
                    .flat_map(|k| [format!("x{k}"), format!("y{k}")])
                    .collect(),
                _ => (0..r.trajectory.states[0].len())
                    .map(|k| if k < 9 { format!("Q{}{}", k / 3, k % 3) } else { format!("P{}{}", (k - 9) / 3, k % 3) })
                    .collect(),
            };
            out.push_str(&r.trajectory.to_csv(&labels));
        }
        Report::Probe(r) => {
            out.push_str("target_1,target_2,target_3,hit,min_distance\n");
            for o in &r.outcomes {
                writeln!(out, "{:e},{:e},{:e},{},{:e}", o.target[0], o.target[1], o.target[2], o.hit, o.min_distance)?;
            }
        }
    }
    Ok(out)
}
