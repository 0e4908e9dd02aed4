//! Continuation scans over momentum values and the experiments built on
//! them: the off-axis vortex search around the collinear relative
//! equilibrium, the axis family, and the rigid-body grid near `(I, 0)`.
//!
//! Every report is a deterministic function of its inputs and seed except
//! for the `elapsed_seconds` field.

use nalgebra::{DVector, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::time::Instant;

use crate::arb::{arb_predictor, ArbSystem, ElasticPotential};
use crate::error::{Error, Result};
use crate::gsystem::GSystem;
use crate::lie::{Isotropy, SE2Momentum, SO3PairMomentum};
use crate::releq::{
    extremality_test, fit_generator, re_solve, Classification, ExtremalityReport, FailureKind, REOutcome, REProblem,
    RESolution, SolverConfig, Verdict,
};
use crate::vortex::{collinear_configuration, equilateral_configuration, VortexState, VortexSystem};

/// Tolerance on `e^{2πh}` above the threshold before a solution counts as
/// inside `U`.
pub const THRESHOLD_MARGIN: f64 = 1e-9;
/// Relative tolerance for the equilateral energy law at solver accuracy.
pub const LAW_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub solver: SolverConfig,
    /// Record `e^{2πh}` for each solution (vortex energies).
    pub exp2pih: bool,
    /// Solutions with `e^{2πh}` above this (plus [`THRESHOLD_MARGIN`]) are
    /// flagged as lying in `U`.
    pub u_threshold: Option<f64>,
    pub extremality: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanOutcome {
    pub target: Vec<f64>,
    pub converged: bool,
    pub classification: Classification,
    pub energy: Option<f64>,
    pub exp2pih: Option<f64>,
    pub in_u: Option<bool>,
    /// Final residual on success, best residual otherwise.
    pub residual: f64,
    /// `‖Φ(x) − target‖` on success.
    pub momentum_error: Option<f64>,
    pub x: Option<Vec<f64>>,
    pub xi: Option<Vec<f64>>,
    pub failure: Option<FailureKind>,
    pub isotropy: Isotropy,
    pub extremality: Option<ExtremalityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub experiment: String,
    pub seed: u64,
    pub config: ScanConfig,
    pub seed_solution: Option<RESolution>,
    pub grid: Vec<Vec<f64>>,
    pub outcomes: Vec<ScanOutcome>,
    pub converged: usize,
    pub extremal: usize,
    pub elapsed_seconds: f64,
}

impl ScanReport {
    pub fn all_converged(&self) -> bool {
        self.converged == self.outcomes.len()
    }

    /// One row per grid target. Three-component momenta use the columns
    /// `mu_re, mu_im, mu_r`; others `mu_1, …, mu_d`.
    pub fn to_csv(&self) -> String {
        let d = self.grid.first().map_or(3, Vec::len);
        let mut out = String::new();
        let head: Vec<String> = if d == 3 {
            vec!["mu_re".into(), "mu_im".into(), "mu_r".into()]
        } else {
            (1..=d).map(|i| format!("mu_{i}")).collect()
        };
        out.push_str(&head.join(","));
        out.push_str(",converged,class,energy,exp2pih,in_U\n");
        let opt = |v: Option<f64>| v.map(|v| format!("{v:e}")).unwrap_or_default();
        for o in &self.outcomes {
            let mut row: Vec<String> = o.target.iter().map(|v| format!("{v:e}")).collect();
            row.push(o.converged.to_string());
            row.push(o.classification.as_str().to_string());
            row.push(opt(o.energy));
            row.push(opt(o.exp2pih));
            row.push(o.in_u.map(|b| b.to_string()).unwrap_or_default());
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn outcome_from<S: GSystem + ?Sized>(
    sys: &S,
    target: &DVector<f64>,
    result: &REOutcome,
    config: &ScanConfig,
) -> Result<ScanOutcome> {
    let isotropy = sys.isotropy(target);
    Ok(match result {
        REOutcome::Converged(sol) => {
            let exp2pih = config.exp2pih.then(|| (2.0 * PI * sol.energy).exp());
            let in_u = config
                .u_threshold
                .zip(exp2pih)
                .map(|(t, e)| e > t + THRESHOLD_MARGIN);
            let extremality = if config.extremality {
                Some(extremality_test(sys, sol, &sys.isotropy_algebra(target))?)
            } else {
                None
            };
            ScanOutcome {
                target: target.as_slice().to_vec(),
                converged: true,
                classification: sol.classification,
                energy: Some(sol.energy),
                exp2pih,
                in_u,
                residual: sol.residual_norm,
                momentum_error: Some((sol.momentum() - target).norm()),
                x: Some(sol.x.clone()),
                xi: Some(sol.xi.clone()),
                failure: None,
                isotropy,
                extremality,
            }
        }
        REOutcome::Failed(f) => ScanOutcome {
            target: target.as_slice().to_vec(),
            converged: false,
            classification: Classification::NotApplicable,
            energy: None,
            exp2pih: None,
            in_u: None,
            residual: f.best_residual,
            momentum_error: None,
            x: None,
            xi: None,
            failure: Some(f.kind.clone()),
            isotropy,
            extremality: None,
        },
    })
}

fn count(outcomes: &[ScanOutcome]) -> (usize, usize) {
    let converged = outcomes.iter().filter(|o| o.converged).count();
    let extremal = outcomes
        .iter()
        .filter(|o| {
            o.extremality
                .as_ref()
                .is_some_and(|e| matches!(e.verdict, Verdict::Min | Verdict::Max))
        })
        .count();
    (converged, extremal)
}

/// Fallback starting point `(x, ξ)` for a target momentum.
pub type Predictor<'a> = dyn Fn(&DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> + 'a;

/// Natural-parameter continuation: each target in grid order is solved from
/// the previously converged solution (or `seed`) with the nearest momentum.
/// When that fails and a `fallback` predictor is given, it is tried next.
pub fn momentum_scan<S: GSystem + ?Sized>(
    sys: &S,
    seed: &RESolution,
    grid: &[DVector<f64>],
    config: &ScanConfig,
    fallback: Option<&Predictor<'_>>,
) -> Result<ScanReport> {
    let start = Instant::now();
    let mut bank: Vec<(DVector<f64>, DVector<f64>, DVector<f64>)> =
        vec![(seed.momentum(), seed.state(), seed.generator())];
    let mut outcomes = Vec::with_capacity(grid.len());
    for target in grid {
        let (_, x0, xi0) = bank
            .iter()
            .min_by(|a, b| (&a.0 - target).norm().total_cmp(&(&b.0 - target).norm()))
            .expect("bank holds the seed");
        let problem = REProblem::new(sys, target.clone()).with_config(config.solver);
        let mut result = re_solve(&problem, x0, xi0)?;
        if result.converged().is_none() {
            if let Some((px, pxi)) = fallback.and_then(|f| f(target)) {
                if sys.check_domain(&px).is_ok() {
                    result = re_solve(&problem, &px, &pxi)?;
                }
            }
        }
        if let REOutcome::Converged(sol) = &result {
            bank.push((sol.momentum(), sol.state(), sol.generator()));
        }
        outcomes.push(outcome_from(sys, target, &result, config)?);
    }
    let (converged, extremal) = count(&outcomes);
    Ok(ScanReport {
        experiment: "momentum".into(),
        seed: 0,
        config: *config,
        seed_solution: Some(seed.clone()),
        grid: grid.iter().map(|g| g.as_slice().to_vec()).collect(),
        outcomes,
        converged,
        extremal,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

/// `n³` momenta on the cube of half-width `half_width` about `center`.
pub fn box_grid(center: &DVector<f64>, half_width: f64, n: usize) -> Vec<DVector<f64>> {
    let steps = linspace(-half_width, half_width, n);
    let mut out = Vec::with_capacity(n * n * n);
    for a in &steps {
        for b in &steps {
            for c in &steps {
                out.push(center + DVector::from_vec(vec![*a, *b, *c]));
            }
        }
    }
    out
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn vortex_vec(s: &VortexState) -> DVector<f64> {
    s.to_vector()
}

// --- axis family -------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisScanReport {
    pub scan: ScanReport,
    pub a_values: Vec<f64>,
    /// `ω·a²` per converged point.
    pub omega_a2: Vec<f64>,
    /// Largest relative deviation of `ω·a²` from its first value.
    pub omega_a2_spread: f64,
    /// Largest relative deviation of `e^{2πh}` from `a³/2`.
    pub collinear_law_error: f64,
}

/// Collinear relative equilibria of `(1, 1, −2)` along the axis `c = 0`,
/// `r = a²` for `n` values of `a` in `[a_min, a_max]`, each solved from the
/// previous solution.
pub fn axis_scan(a_min: f64, a_max: f64, n: usize, solver: &SolverConfig) -> Result<AxisScanReport> {
    if !(a_min > 0.0 && a_max >= a_min && a_max.is_finite()) || n == 0 {
        return Err(Error::InvalidInput(format!(
            "axis range must satisfy 0 < a_min ≤ a_max with n ≥ 1, got [{a_min}, {a_max}], n = {n}"
        )));
    }
    let start = Instant::now();
    let sys = VortexSystem::from_slice(&[1.0, 1.0, -2.0])?;
    let config = ScanConfig {
        solver: *solver,
        exp2pih: true,
        ..ScanConfig::default()
    };
    let a_values = linspace(a_min, a_max, n);
    let mut x = vortex_vec(&collinear_configuration(a_min));
    let mut xi = fit_generator(&sys, &x)?;
    let mut outcomes = Vec::with_capacity(n);
    let mut grid = Vec::with_capacity(n);
    let mut omega_a2 = Vec::new();
    let mut law = 0.0_f64;
    let mut seed_solution = None;
    for &a in &a_values {
        let target = DVector::from_vec(vec![0.0, 0.0, a * a]);
        let result = re_solve(&REProblem::new(&sys, target.clone()).with_config(*solver), &x, &xi)?;
        if let REOutcome::Converged(sol) = &result {
            x = sol.state();
            xi = sol.generator();
            omega_a2.push(sol.xi[2] * a * a);
            let e = (2.0 * PI * sol.energy).exp();
            law = law.max((e - a.powi(3) / 2.0).abs() / (a.powi(3) / 2.0));
            seed_solution.get_or_insert_with(|| sol.clone());
        }
        outcomes.push(outcome_from(&sys, &target, &result, &config)?);
        grid.push(target.as_slice().to_vec());
    }
    let spread = match omega_a2.first() {
        Some(&w0) => omega_a2.iter().map(|w| (w - w0).abs() / w0.abs()).fold(0.0, f64::max),
        None => f64::INFINITY,
    };
    let (converged, extremal) = count(&outcomes);
    Ok(AxisScanReport {
        scan: ScanReport {
            experiment: "axis".into(),
            seed: 0,
            config,
            seed_solution,
            grid,
            outcomes,
            converged,
            extremal,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        },
        a_values,
        omega_a2,
        omega_a2_spread: spread,
        collinear_law_error: if converged == 0 { f64::INFINITY } else { law },
    })
}

// --- off-axis search around the collinear equilibrium ------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffAxisFinding {
    pub target: Vec<f64>,
    pub attempts: usize,
    pub converged: usize,
    pub equilateral: usize,
    pub non_equilateral: usize,
    pub above_threshold: usize,
    /// Largest `e^{2πh}` among the converged solutions.
    pub max_exp2pih: Option<f64>,
    /// `|c|³/(3√3)`.
    pub law_value: f64,
    pub max_law_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentVerdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop71Report {
    pub gamma: Vec<f64>,
    pub separation: f64,
    pub seed: u64,
    pub n_offaxis: usize,
    pub restarts: usize,
    pub collinear: RESolution,
    pub collinear_exp2pih: f64,
    pub collinear_extremality: ExtremalityReport,
    pub energy_threshold: f64,
    pub disc_radius: f64,
    pub offaxis: Vec<OffAxisFinding>,
    pub offaxis_converged: usize,
    pub offaxis_above_threshold: usize,
    pub offaxis_non_equilateral: usize,
    pub targets_without_solution: usize,
    pub axis: AxisScanReport,
    pub verdict: ExperimentVerdict,
    pub reasons: Vec<String>,
    pub elapsed_seconds: f64,
}

/// Off-axis targets `(c, r)`: `|c|` on a radial grid from 10 % to 99 % of
/// `radius`, a rotating phase, and `r` drawn uniformly from `[a²/2, 3a²/2]`.
pub fn offaxis_targets(a: f64, radius: f64, n: usize, seed: u64) -> Vec<DVector<f64>> {
    const RADIAL: usize = 10;
    let fractions = linspace(0.1, 0.99, RADIAL);
    let rings = n.div_ceil(RADIAL).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let rho = fractions[i % RADIAL] * radius;
            let phase = 2.0 * PI * ((i / RADIAL) as f64 + (i % RADIAL) as f64 / RADIAL as f64) / rings as f64;
            let c = Complex64::from_polar(rho, phase);
            let r = a * a * rng.random_range(0.5..1.5);
            DVector::from_vec(vec![c.re, c.im, r])
        })
        .collect()
}

/// Starting points for one off-axis target: the equilateral configuration
/// in both orientations, then `restarts` random perturbations of it with
/// scale comparable to the triangle side.
fn offaxis_guesses(
    sys: &VortexSystem,
    mu: &SE2Momentum,
    restarts: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<DVector<f64>> {
    let side = mu.c.norm() / 3f64.sqrt();
    let mut out = Vec::with_capacity(2 + restarts);
    let base: Vec<DVector<f64>> = [1.0, -1.0]
        .iter()
        .filter_map(|&o| equilateral_configuration(mu, o).ok())
        .map(|s| vortex_vec(&s))
        .collect();
    out.extend(base.iter().cloned());
    if base.is_empty() {
        return out;
    }
    for k in 0..restarts {
        let scale = side * (0.1 + 0.5 * k as f64 / restarts.max(1) as f64);
        let mut x = base[k % base.len()].clone();
        for v in x.iter_mut() {
            let g: f64 = StandardNormal.sample(rng);
            *v += scale * g;
        }
        if sys.check_domain(&x).is_ok() {
            out.push(x);
        }
    }
    out
}

fn search_target(
    sys: &VortexSystem,
    target: &DVector<f64>,
    threshold: f64,
    restarts: usize,
    solver: &SolverConfig,
    rng: &mut ChaCha8Rng,
) -> Result<OffAxisFinding> {
    let mu = SE2Momentum::new(Complex64::new(target[0], target[1]), target[2]);
    let law_value = mu.c.norm().powi(3) / (3.0 * 3f64.sqrt());
    let guesses = offaxis_guesses(sys, &mu, restarts, rng);
    let problem = REProblem::new(sys, target.clone()).with_config(*solver);
    let mut f = OffAxisFinding {
        target: target.as_slice().to_vec(),
        attempts: guesses.len(),
        converged: 0,
        equilateral: 0,
        non_equilateral: 0,
        above_threshold: 0,
        max_exp2pih: None,
        law_value,
        max_law_error: None,
    };
    for x0 in guesses {
        let xi0 = fit_generator(sys, &x0)?;
        if let REOutcome::Converged(sol) = re_solve(&problem, &x0, &xi0)? {
            f.converged += 1;
            if sol.classification == Classification::Equilateral {
                f.equilateral += 1;
            } else {
                f.non_equilateral += 1;
            }
            let e = (2.0 * PI * sol.energy).exp();
            if e > threshold + THRESHOLD_MARGIN {
                f.above_threshold += 1;
            }
            let law_err = (e - law_value).abs() / e;
            f.max_exp2pih = Some(f.max_exp2pih.map_or(e, |m: f64| m.max(e)));
            f.max_law_error = Some(f.max_law_error.map_or(law_err, |m: f64| m.max(law_err)));
        }
    }
    Ok(f)
}

/// Searches for relative equilibria of `(1, 1, −2)` at off-axis momenta
/// inside the disc `|c| < (√3·e^{2πh(γ)})^{1/3}` around the collinear
/// equilibrium `γ = (a, −a, 0)`, and runs the axis family through `γ`.
///
/// PASS requires: `γ` converges, is collinear and extremal; no off-axis
/// solution has `e^{2πh}` above `e^{2πh(γ)}/3`; every off-axis solution is
/// equilateral and satisfies the energy law; the axis family converges.
pub fn prop71_experiment(a: f64, n_offaxis: usize, restarts: usize, seed: u64) -> Result<Prop71Report> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidInput(format!("separation must be positive, got {a}")));
    }
    if n_offaxis == 0 {
        return Err(Error::InvalidInput("need at least one off-axis target".into()));
    }
    let start = Instant::now();
    let gamma = vec![1.0, 1.0, -2.0];
    let sys = VortexSystem::from_slice(&gamma)?;
    let solver = SolverConfig::default();

    let x_gamma = vortex_vec(&collinear_configuration(a));
    let mu_gamma = DVector::from_vec(vec![0.0, 0.0, a * a]);
    let xi_gamma = fit_generator(&sys, &x_gamma)?;
    let collinear = match re_solve(&REProblem::new(&sys, mu_gamma.clone()), &x_gamma, &xi_gamma)? {
        REOutcome::Converged(sol) => sol,
        REOutcome::Failed(f) => {
            return Err(Error::InvalidInput(format!(
                "collinear equilibrium did not converge (residual {:e})",
                f.best_residual
            )))
        }
    };
    let collinear_extremality = extremality_test(&sys, &collinear, &sys.isotropy_algebra(&mu_gamma))?;
    let collinear_exp2pih = (2.0 * PI * collinear.energy).exp();
    let energy_threshold = collinear_exp2pih / 3.0;
    let disc_radius = (3f64.sqrt() * collinear_exp2pih).cbrt();

    let targets = offaxis_targets(a, disc_radius, n_offaxis, seed);
    let offaxis: Vec<OffAxisFinding> = targets
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1 + i as u64);
            search_target(&sys, t, energy_threshold, restarts, &solver, &mut rng)
        })
        .collect::<Result<_>>()?;

    let axis = axis_scan(0.5 * a, 2.0 * a, 20, &solver)?;

    let offaxis_converged = offaxis.iter().map(|f| f.converged).sum();
    let offaxis_above_threshold = offaxis.iter().map(|f| f.above_threshold).sum();
    let offaxis_non_equilateral = offaxis.iter().map(|f| f.non_equilateral).sum();
    let targets_without_solution = offaxis.iter().filter(|f| f.converged == 0).count();
    let worst_law = offaxis.iter().filter_map(|f| f.max_law_error).fold(0.0, f64::max);

    let mut reasons = Vec::new();
    if collinear.classification != Classification::Collinear {
        reasons.push(format!("γ classified {:?}", collinear.classification));
    }
    if !matches!(collinear_extremality.verdict, Verdict::Min | Verdict::Max) {
        reasons.push(format!("γ extremality verdict {:?}", collinear_extremality.verdict));
    }
    if offaxis_above_threshold > 0 {
        reasons.push(format!("{offaxis_above_threshold} off-axis solutions above the energy threshold"));
    }
    if offaxis_non_equilateral > 0 {
        reasons.push(format!("{offaxis_non_equilateral} off-axis solutions are not equilateral"));
    }
    if worst_law > LAW_TOL {
        reasons.push(format!("equilateral energy law violated by {worst_law:e}"));
    }
    if !axis.scan.all_converged() {
        reasons.push(format!(
            "axis family converged at {}/{} points",
            axis.scan.converged,
            axis.scan.outcomes.len()
        ));
    }
    let verdict = if reasons.is_empty() {
        ExperimentVerdict::Pass
    } else {
        ExperimentVerdict::Fail
    };
    Ok(Prop71Report {
        gamma,
        separation: a,
        seed,
        n_offaxis,
        restarts,
        collinear,
        collinear_exp2pih,
        collinear_extremality,
        energy_threshold,
        disc_radius,
        offaxis,
        offaxis_converged,
        offaxis_above_threshold,
        offaxis_non_equilateral,
        targets_without_solution,
        axis,
        verdict,
        reasons,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

// --- rigid body near (I, 0) ----------------------------------------------------

/// Targets for [`arb_scan`]: `μ_L = s·e₃`, `μ_R = t·e₃` on an `n × n` grid
/// over `[−ε, ε]²`, followed by `skew` pairs with independent random
/// directions and norms up to `ε`.
pub fn arb_targets(eps: f64, n: usize, skew: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(n * n + skew);
    let values = linspace(-eps, eps, n);
    for &s in &values {
        for &t in &values {
            out.push(DVector::from_vec(vec![0.0, 0.0, s, 0.0, 0.0, t]));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ball = |rng: &mut ChaCha8Rng| {
        let v = Vector3::from_fn(|_, _| StandardNormal.sample(rng));
        v.normalize() * (eps * rng.random::<f64>())
    };
    for _ in 0..skew {
        let l = ball(&mut rng);
        let r = ball(&mut rng);
        out.push(DVector::from_iterator(6, l.iter().chain(r.iter()).copied()));
    }
    out
}

/// Solves for a relative equilibrium of the rigid body at each target from
/// [`arb_predictor`] and tests its extremality. Targets run in parallel;
/// the report keeps target order.
pub fn arb_scan(
    pot: &ElasticPotential,
    targets: &[DVector<f64>],
    solver: &SolverConfig,
    seed: u64,
) -> Result<ScanReport> {
    let start = Instant::now();
    let sys = ArbSystem::new(*pot);
    let config = ScanConfig {
        solver: *solver,
        extremality: true,
        ..ScanConfig::default()
    };
    let outcomes: Vec<ScanOutcome> = targets
        .par_iter()
        .map(|t| {
            let mu = SO3PairMomentum::from_slice(t.as_slice())?;
            let (state, xi_l, xi_r) = arb_predictor(&mu, pot);
            let xi0 = DVector::from_iterator(6, xi_l.iter().chain(xi_r.iter()).copied());
            let result = re_solve(&REProblem::new(&sys, t.clone()).with_config(*solver), &state.to_vector(), &xi0)?;
            outcome_from(&sys, t, &result, &config)
        })
        .collect::<Result<_>>()?;
    let (converged, extremal) = count(&outcomes);
    Ok(ScanReport {
        experiment: "arb".into(),
        seed,
        config,
        seed_solution: None,
        grid: targets.iter().map(|g| g.as_slice().to_vec()).collect(),
        outcomes,
        converged,
        extremal,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}
