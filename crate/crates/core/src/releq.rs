//! Relative equilibria: the augmented residual, a damped Newton solver with
//! gauge rows, Synge classification for three vortices, dynamic verification
//! and the slice extremality test.
//!
//! A relative equilibrium is a pair `(x, ξ)` with `X_h(x) = ξ_M(x)`. With
//! `Sᵀ X_h = ∇h` this is `∇h(x) − Sᵀ ξ_M(x) = 0`, which by the momentum
//! identity equals the gradient of `h + ⟨Φ, ξ⟩`. The unknowns of the solver
//! are `y = (x, ξ)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::gsystem::{integrate, unit, GSystem, Method};
use crate::numerics::{self, kernel, range_basis};
use crate::vortex::check_collision_free;

/// Relative tolerance of [`synge_classify`].
pub const SYNGE_TOL: f64 = 1e-8;
/// Rank tolerance for `dΦ` in the extremality test.
pub const MOMENTUM_RANK_TOL: f64 = 1e-10;
/// Eigenvalues with `|λ|` at or below this count as zero.
pub const DEGENERACY_TOL: f64 = 1e-8;
pub const HESSIAN_STEP: f64 = 1e-5;
const NEWTON_FD_STEP: f64 = 1e-7;

/// Affine constraint `coefficients · (x, ξ) = value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeRow {
    pub coefficients: Vec<f64>,
    pub value: f64,
    pub label: String,
}

impl GaugeRow {
    pub fn eval(&self, y: &DVector<f64>) -> f64 {
        self.coefficients.iter().zip(y.iter()).map(|(a, b)| a * b).sum::<f64>() - self.value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub max_damping_steps: usize,
    /// Smallest admissible `σ_min/σ_max` of the Newton matrix.
    pub rank_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            damping: 0.5,
            max_damping_steps: 20,
            rank_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Classification {
    Collinear,
    Equilateral,
    Other,
    NotApplicable,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Collinear => "Collinear",
            Self::Equilateral => "Equilateral",
            Self::Other => "Other",
            Self::NotApplicable => "NA",
        }
    }
}

/// A target momentum with solver settings. `gauge: None` means the
/// system's own gauge, anchored at the guess.
#[derive(Debug, Clone)]
pub struct REProblem<'a, S: GSystem + ?Sized> {
    pub system: &'a S,
    pub target_mu: DVector<f64>,
    pub gauge: Option<Vec<GaugeRow>>,
    pub config: SolverConfig,
}

impl<'a, S: GSystem + ?Sized> REProblem<'a, S> {
    pub fn new(system: &'a S, target_mu: DVector<f64>) -> Self {
        Self {
            system,
            target_mu,
            gauge: None,
            config: SolverConfig::default(),
        }
    }

    pub fn with_config(mut self, config: SolverConfig) -> Self {
        self.config = config;
        self
    }

    pub fn with_gauge(mut self, gauge: Vec<GaugeRow>) -> Self {
        self.gauge = Some(gauge);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Guess {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RESolution {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    /// `Φ(x)`, recomputed after convergence.
    pub mu: Vec<f64>,
    pub target_mu: Vec<f64>,
    pub energy: f64,
    pub residual_norm: f64,
    pub classification: Classification,
    pub iterations: usize,
    pub guess: Guess,
    pub gauge: Vec<GaugeRow>,
    pub config: SolverConfig,
}

impl RESolution {
    pub fn state(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x)
    }

    pub fn generator(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.xi)
    }

    pub fn momentum(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.mu)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureKind {
    MaxIterations,
    /// No damped step reduced the residual.
    Stalled,
    DomainExit { message: String },
    GaugeDeficient { condition: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct REFailure {
    pub kind: FailureKind,
    pub iterations: usize,
    pub best_residual: f64,
    pub best_x: Vec<f64>,
    pub best_xi: Vec<f64>,
    pub target_mu: Vec<f64>,
    pub guess: Guess,
    pub gauge: Vec<GaugeRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum REOutcome {
    Converged(RESolution),
    Failed(REFailure),
}

impl REOutcome {
    pub fn converged(&self) -> Option<&RESolution> {
        match self {
            Self::Converged(s) => Some(s),
            Self::Failed(_) => None,
        }
    }

    pub fn into_converged(self) -> Option<RESolution> {
        match self {
            Self::Converged(s) => Some(s),
            Self::Failed(_) => None,
        }
    }

    pub fn residual(&self) -> f64 {
        match self {
            Self::Converged(s) => s.residual_norm,
            Self::Failed(f) => f.best_residual,
        }
    }
}

/// `[∇h(x) − Sᵀ ξ_M(x); Φ(x) − μ]`.
pub fn re_residual<S: GSystem + ?Sized>(
    sys: &S,
    x: &DVector<f64>,
    xi: &DVector<f64>,
    mu: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n2 = sys.state_dim();
    let d = sys.group_dim();
    check_len("state", n2, x.len())?;
    check_len("algebra element", d, xi.len())?;
    check_len("momentum", d, mu.len())?;
    sys.check_domain(x)?;
    let grad = stationarity(sys, x, xi)?;
    let mut out = DVector::zeros(n2 + d);
    out.rows_mut(0, n2).copy_from(&grad);
    out.rows_mut(n2, d).copy_from(&(sys.momentum(x) - mu));
    Ok(out)
}

/// Gradient of the augmented function `h + ⟨Φ, ξ⟩`.
fn stationarity<S: GSystem + ?Sized>(sys: &S, x: &DVector<f64>, xi: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(sys.energy_gradient(x)? - sys.symplectic_matrix().transpose() * sys.generator(xi, x))
}

/// The `ξ` minimising `‖ξ_M(x) − X_h(x)‖`.
pub fn fit_generator<S: GSystem + ?Sized>(sys: &S, x: &DVector<f64>) -> Result<DVector<f64>> {
    let d = sys.group_dim();
    let field = sys.hamiltonian_field(x)?;
    let cols: Vec<DVector<f64>> = (0..d).map(|i| sys.generator(&unit(d, i), x)).collect();
    Ok(numerics::lstsq(&DMatrix::from_columns(&cols), &field, 1e-12))
}

/// Gauge built from the isotropy algebra `𝔤_μ`: for each direction of
/// `𝔤_μ` that moves `x_guess`, an affine row holding the state's component
/// along that orbit direction; for each direction fixing `x_guess`, a row
/// pinning the matching component of `ξ` to zero.
pub fn isotropy_gauge<S: GSystem + ?Sized>(
    sys: &S,
    mu: &DVector<f64>,
    x: &DVector<f64>,
    _xi: &DVector<f64>,
) -> Vec<GaugeRow> {
    let n2 = sys.state_dim();
    let d = sys.group_dim();
    let basis = sys.isotropy_algebra(mu);
    let k = basis.ncols();
    if k == 0 {
        return Vec::new();
    }
    let gens: Vec<DVector<f64>> = (0..k).map(|i| sys.generator(&basis.column(i).into_owned(), x)).collect();
    let gmat = DMatrix::from_columns(&gens);
    let svd = gmat.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let sigma_max = svd.singular_values.max();
    let threshold = 1e-8 * sigma_max.max(1.0);
    let mut rows = Vec::with_capacity(k);
    for j in 0..k {
        let mut coefficients = vec![0.0; n2 + d];
        if svd.singular_values[j] > threshold {
            let uj = u.column(j);
            coefficients[..n2].copy_from_slice(uj.as_slice());
            rows.push(GaugeRow {
                value: uj.dot(x),
                coefficients,
                label: format!("orbit direction {j}"),
            });
        } else {
            let zeta = &basis * v_t.row(j).transpose();
            coefficients[n2..].copy_from_slice(zeta.as_slice());
            rows.push(GaugeRow {
                value: 0.0,
                coefficients,
                label: format!("stabiliser direction {j}"),
            });
        }
    }
    rows
}

struct Augmented<'a, S: GSystem + ?Sized> {
    sys: &'a S,
    mu: &'a DVector<f64>,
    gauge: &'a [GaugeRow],
}

impl<S: GSystem + ?Sized> Augmented<'_, S> {
    fn split(&self, y: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let n2 = self.sys.state_dim();
        (y.rows(0, n2).into_owned(), y.rows(n2, self.sys.group_dim()).into_owned())
    }

    fn eval(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let (x, xi) = self.split(y);
        let r = re_residual(self.sys, &x, &xi, self.mu)?;
        let m = r.len();
        let mut out = DVector::zeros(m + self.gauge.len());
        out.rows_mut(0, m).copy_from(&r);
        for (i, g) in self.gauge.iter().enumerate() {
            out[m + i] = g.eval(y);
        }
        Ok(out)
    }

    fn jacobian(&self, y: &DVector<f64>, f0_len: usize) -> Result<DMatrix<f64>> {
        let mut j = DMatrix::zeros(f0_len, y.len());
        let mut yp = y.clone();
        for c in 0..y.len() {
            let h = NEWTON_FD_STEP * y[c].abs().max(1.0);
            yp[c] = y[c] + h;
            let fp = self.eval(&yp)?;
            yp[c] = y[c] - h;
            let fm = self.eval(&yp)?;
            yp[c] = y[c];
            j.set_column(c, &((fp - fm) / (2.0 * h)));
        }
        Ok(j)
    }
}

/// Damped Newton on `[re_residual; gauge rows]` from `(x0, ξ0)`.
///
/// Invalid input and a guess outside the domain are errors; every failure
/// after the first evaluation is returned as [`REOutcome::Failed`].
pub fn re_solve<S: GSystem + ?Sized>(
    problem: &REProblem<'_, S>,
    x0: &DVector<f64>,
    xi0: &DVector<f64>,
) -> Result<REOutcome> {
    let sys = problem.system;
    let cfg = &problem.config;
    let n2 = sys.state_dim();
    let d = sys.group_dim();
    check_len("guess state", n2, x0.len())?;
    check_len("guess generator", d, xi0.len())?;
    check_len("target momentum", d, problem.target_mu.len())?;
    let gauge = match &problem.gauge {
        Some(g) => g.clone(),
        None => sys.gauge(&problem.target_mu, x0, xi0),
    };
    if let Some(bad) = gauge.iter().find(|g| g.coefficients.len() != n2 + d) {
        return Err(Error::Dimension {
            what: "gauge row",
            expected: n2 + d,
            got: bad.coefficients.len(),
        });
    }
    let aug = Augmented {
        sys,
        mu: &problem.target_mu,
        gauge: &gauge,
    };
    let guess = Guess {
        x: x0.as_slice().to_vec(),
        xi: xi0.as_slice().to_vec(),
    };
    let mut y = DVector::zeros(n2 + d);
    y.rows_mut(0, n2).copy_from(x0);
    y.rows_mut(n2, d).copy_from(xi0);
    let mut f = aug.eval(&y)?;
    let mut norm = f.norm();

    let fail = |kind: FailureKind, iterations: usize, y: &DVector<f64>, norm: f64| {
        let (x, xi) = aug.split(y);
        Ok(REOutcome::Failed(REFailure {
            kind,
            iterations,
            best_residual: norm,
            best_x: x.as_slice().to_vec(),
            best_xi: xi.as_slice().to_vec(),
            target_mu: problem.target_mu.as_slice().to_vec(),
            guess: guess.clone(),
            gauge: gauge.clone(),
        }))
    };

    for it in 0..=cfg.max_iter {
        if norm <= cfg.tol {
            let (x, xi) = aug.split(&y);
            return Ok(REOutcome::Converged(RESolution {
                mu: sys.momentum(&x).as_slice().to_vec(),
                target_mu: problem.target_mu.as_slice().to_vec(),
                energy: sys.energy(&x)?,
                residual_norm: norm,
                classification: sys.classify(&x),
                iterations: it,
                x: x.as_slice().to_vec(),
                xi: xi.as_slice().to_vec(),
                guess,
                gauge,
                config: *cfg,
            }));
        }
        if it == cfg.max_iter {
            break;
        }
        let jac = match aug.jacobian(&y, f.len()) {
            Ok(j) => j,
            Err(e) => return fail(FailureKind::DomainExit { message: e.to_string() }, it, &y, norm),
        };
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let condition = if smax > 0.0 { smin / smax } else { 0.0 };
        if condition < cfg.rank_tol {
            return fail(FailureKind::GaugeDeficient { condition }, it, &y, norm);
        }
        let step = svd.solve(&(-&f), 0.0).expect("U and V^T were computed");
        let mut lambda = 1.0;
        let mut accepted = None;
        let mut last_error = None;
        for _ in 0..=cfg.max_damping_steps {
            let trial = &y + &step * lambda;
            match aug.eval(&trial) {
                Ok(ft) if ft.norm() < norm => {
                    accepted = Some((trial, ft));
                    break;
                }
                Ok(_) => {}
                Err(e) => last_error = Some(e),
            }
            lambda *= cfg.damping;
        }
        match accepted {
            Some((trial, ft)) => {
                y = trial;
                norm = ft.norm();
                f = ft;
            }
            None => {
                let kind = match last_error {
                    Some(e) => FailureKind::DomainExit { message: e.to_string() },
                    None => FailureKind::Stalled,
                };
                return fail(kind, it, &y, norm);
            }
        }
    }
    fail(FailureKind::MaxIterations, cfg.max_iter, &y, norm)
}

/// Synge's dichotomy for three points: collinear when twice the triangle
/// area over the squared longest side is below `tol`, equilateral when the
/// side lengths agree to relative `tol`.
pub fn synge_classify(z: &[Complex64], tol: f64) -> Result<Classification> {
    check_len("Synge classification points", 3, z.len())?;
    check_collision_free(z)?;
    let sides = [(z[1] - z[0]).norm(), (z[2] - z[1]).norm(), (z[0] - z[2]).norm()];
    let longest = sides.iter().cloned().fold(0.0_f64, f64::max);
    let shortest = sides.iter().cloned().fold(f64::INFINITY, f64::min);
    let twice_area = ((z[1] - z[0]).conj() * (z[2] - z[0])).im.abs();
    if twice_area / (longest * longest) < tol {
        Ok(Classification::Collinear)
    } else if (longest - shortest) / longest <= tol {
        Ok(Classification::Equilateral)
    } else {
        Ok(Classification::Other)
    }
}

/// Sup-norm distance between the rk4 trajectory from `sol.x` and the group
/// motion `exp(tξ)·x` over `[0, t_end]`.
pub fn re_verify_dynamic<S: GSystem + ?Sized>(sys: &S, sol: &RESolution, t_end: f64, dt: f64) -> Result<f64> {
    let steps = (t_end / dt).round() as usize;
    let x0 = sol.state();
    let xi = sol.generator();
    let traj = integrate(sys, &x0, dt, steps, Method::Rk4)?;
    let mut dev = 0.0_f64;
    for (i, t) in traj.times.iter().enumerate() {
        let expected = sys.group_flow(&xi, *t, &x0);
        dev = dev.max(numerics::sup_norm(&(traj.state(i) - expected)));
    }
    Ok(dev)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict")]
pub enum Verdict {
    Min,
    Max,
    Saddle,
    Degenerate { tol: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExtremalityWarning {
    /// A singular value of `dΦ` lies within a decade of the rank threshold.
    AmbiguousRank { singular_value: f64, threshold: f64 },
    /// The group orbit through `x` has dimension below `dim G`.
    NotFree { orbit_dim: usize, group_dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalityReport {
    pub slice_dim: usize,
    pub eigenvalues: Vec<f64>,
    pub verdict: Verdict,
    pub kernel_dim: usize,
    /// Dimension of `𝔤_μ · x` inside `ker dΦ`.
    pub isotropy_orbit_dim: usize,
    pub warnings: Vec<ExtremalityWarning>,
}

/// Sign pattern of the augmented Hessian restricted to the symplectic
/// slice `ker dΦ(x) ⊖ 𝔤_μ·x`. `isotropy_basis` holds a basis of `𝔤_μ` as
/// columns.
pub fn extremality_test<S: GSystem + ?Sized>(
    sys: &S,
    sol: &RESolution,
    isotropy_basis: &DMatrix<f64>,
) -> Result<ExtremalityReport> {
    let x = sol.state();
    let xi = sol.generator();
    let d = sys.group_dim();
    check_len("isotropy basis rows", d, isotropy_basis.nrows())?;
    sys.check_domain(&x)?;
    let mut warnings = Vec::new();

    let split = kernel(&sys.momentum_jacobian(&x), MOMENTUM_RANK_TOL);
    for &s in &split.singular_values {
        if s > split.threshold / 10.0 && s < split.threshold * 10.0 {
            warnings.push(ExtremalityWarning::AmbiguousRank {
                singular_value: s,
                threshold: split.threshold,
            });
        }
    }
    let all_gens: Vec<DVector<f64>> = (0..d).map(|i| sys.generator(&unit(d, i), &x)).collect();
    let orbit_dim = range_basis(&DMatrix::from_columns(&all_gens), 1e-10).ncols();
    if orbit_dim < d {
        warnings.push(ExtremalityWarning::NotFree { orbit_dim, group_dim: d });
    }

    let k = &split.kernel;
    let gens: Vec<DVector<f64>> = (0..isotropy_basis.ncols())
        .map(|i| k.transpose() * sys.generator(&isotropy_basis.column(i).into_owned(), &x))
        .collect();
    let t0 = if gens.is_empty() {
        DMatrix::zeros(k.ncols(), 0)
    } else {
        range_basis(&DMatrix::from_columns(&gens), 1e-10)
    };
    let slice = if t0.ncols() == 0 {
        k.clone()
    } else {
        k * kernel(&t0.transpose(), 1e-10).kernel
    };

    let mut verdict = Verdict::Min;
    let mut eigenvalues = Vec::new();
    if slice.ncols() > 0 {
        let hess = augmented_hessian(sys, &x, &xi)?;
        let restricted = slice.transpose() * hess * &slice;
        let restricted = (&restricted + restricted.transpose()) * 0.5;
        let mut ev: Vec<f64> = SymmetricEigen::new(restricted).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        verdict = if ev.iter().any(|l| l.abs() <= DEGENERACY_TOL) {
            Verdict::Degenerate { tol: DEGENERACY_TOL }
        } else if ev.iter().all(|&l| l > 0.0) {
            Verdict::Min
        } else if ev.iter().all(|&l| l < 0.0) {
            Verdict::Max
        } else {
            Verdict::Saddle
        };
        eigenvalues = ev;
    }
    Ok(ExtremalityReport {
        slice_dim: slice.ncols(),
        eigenvalues,
        verdict,
        kernel_dim: k.ncols(),
        isotropy_orbit_dim: t0.ncols(),
        warnings,
    })
}

/// Symmetrised central-difference Hessian of `h + ⟨Φ, ξ⟩` in `x`.
fn augmented_hessian<S: GSystem + ?Sized>(sys: &S, x: &DVector<f64>, xi: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    let mut xp = x.clone();
    for j in 0..n {
        xp[j] = x[j] + HESSIAN_STEP;
        let gp = stationarity(sys, &xp, xi)?;
        xp[j] = x[j] - HESSIAN_STEP;
        let gm = stationarity(sys, &xp, xi)?;
        xp[j] = x[j];
        h.set_column(j, &((gp - gm) / (2.0 * HESSIAN_STEP)));
    }
    Ok((&h + h.transpose()) * 0.5)
}

/// Smallest distance between `b` and the points `g·a`, `g` in `candidates`.
pub fn orbit_distance<S: GSystem + ?Sized>(
    sys: &S,
    a: &DVector<f64>,
    b: &DVector<f64>,
    candidates: &[S::Group],
) -> f64 {
    candidates
        .iter()
        .map(|g| (sys.act(g, a) - b).norm())
        .fold(f64::INFINITY, f64::min)
}
