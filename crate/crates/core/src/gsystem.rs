//! Symmetric Hamiltonian systems with a constant symplectic matrix, their
//! integrators and conservation diagnostics, and the momentum-image
//! openness probe.
//!
//! States are real vectors `x ∈ ℝ²ⁿ` and `ω(u, v) = uᵀ S v`. The Hamiltonian
//! vector field of `f` is the `X_f` with `ω(X_f, ·) = df`, i.e. `Sᵀ X_f = ∇f`.
//! The momentum map is tied to the infinitesimal action by the defining
//! identity `S · ξ_M(x) = ∇⟨Φ(x), ξ⟩`, where `⟨·,·⟩` is the system's
//! [`GSystem::pairing`].

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::fmt::Debug;

use crate::error::{check_len, Error, Result};
use crate::lie::Isotropy;
use crate::numerics;
use crate::releq::{Classification, GaugeRow};

pub trait GSystem: Sync {
    type Group: Clone + Send + Sync + Debug;

    /// `2n`
    fn state_dim(&self) -> usize;
    /// Dimension `d` of the symmetry group.
    fn group_dim(&self) -> usize;
    fn symplectic_matrix(&self) -> DMatrix<f64>;

    fn check_domain(&self, x: &DVector<f64>) -> Result<()>;
    fn energy(&self, x: &DVector<f64>) -> Result<f64>;
    fn energy_gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>>;

    fn hamiltonian_field(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        field_from_gradient(&self.symplectic_matrix(), &self.energy_gradient(x)?)
    }

    fn momentum(&self, x: &DVector<f64>) -> DVector<f64>;
    /// `d × 2n` Jacobian of [`GSystem::momentum`].
    fn momentum_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;
    /// Infinitesimal generator `ξ_M(x)`.
    fn generator(&self, xi: &DVector<f64>, x: &DVector<f64>) -> DVector<f64>;
    fn pairing(&self, mu: &DVector<f64>, xi: &DVector<f64>) -> f64;

    fn act(&self, g: &Self::Group, x: &DVector<f64>) -> DVector<f64>;
    /// The (possibly modified) coadjoint action for which `Φ` is equivariant.
    fn coad(&self, g: &Self::Group, mu: &DVector<f64>) -> DVector<f64>;
    /// `d/dt|₀ coad(exp(tξ), μ)`.
    fn coad_infinitesimal(&self, xi: &DVector<f64>, mu: &DVector<f64>) -> DVector<f64>;
    fn sample_group(&self, rng: &mut dyn RngCore) -> Self::Group;
    /// `exp(tξ) · x`.
    fn group_flow(&self, xi: &DVector<f64>, t: f64, x: &DVector<f64>) -> DVector<f64>;

    fn isotropy(&self, mu: &DVector<f64>) -> Isotropy;

    /// Basis (columns) of the isotropy algebra `𝔤_μ`, computed as the kernel
    /// of the linearised coadjoint action at `μ`.
    fn isotropy_algebra(&self, mu: &DVector<f64>) -> DMatrix<f64> {
        let d = self.group_dim();
        let cols: Vec<DVector<f64>> = (0..d)
            .map(|i| self.coad_infinitesimal(&unit(d, i), mu))
            .collect();
        numerics::kernel(&DMatrix::from_columns(&cols), 1e-10).kernel
    }

    fn classify(&self, _x: &DVector<f64>) -> Classification {
        Classification::NotApplicable
    }

    /// Gauge rows removing the group degeneracy of the relative-equilibrium
    /// equations at momentum `mu`, anchored at the given guess.
    fn gauge(&self, mu: &DVector<f64>, x: &DVector<f64>, xi: &DVector<f64>) -> Vec<GaugeRow> {
        crate::releq::isotropy_gauge(self, mu, x, xi)
    }

    fn component_labels(&self) -> Vec<String> {
        (0..self.state_dim()).map(|i| format!("x{i}")).collect()
    }
}

pub(crate) fn unit(n: usize, i: usize) -> DVector<f64> {
    let mut e = DVector::zeros(n);
    e[i] = 1.0;
    e
}

/// Solve `Sᵀ X = ∇f`.
pub fn field_from_gradient(s: &DMatrix<f64>, grad: &DVector<f64>) -> Result<DVector<f64>> {
    s.transpose()
        .lu()
        .solve(grad)
        .ok_or_else(|| Error::InvalidInput("symplectic matrix is singular".into()))
}

pub fn hamiltonian_field<S: GSystem>(sys: &S, x: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("state", sys.state_dim(), x.len())?;
    sys.hamiltonian_field(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4,
    ImplicitMidpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub method: Method,
    pub dt: f64,
}

impl Trajectory {
    pub fn state(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.states[i])
    }

    pub fn last(&self) -> DVector<f64> {
        self.state(self.states.len() - 1)
    }

    /// CSV with header `t,<component labels…>`.
    pub fn to_csv(&self, labels: &[String]) -> String {
        let mut out = String::from("t");
        for l in labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (t, x) in self.times.iter().zip(&self.states) {
            out.push_str(&format!("{t:e}"));
            for v in x {
                out.push_str(&format!(",{v:e}"));
            }
            out.push('\n');
        }
        out
    }
}

pub const MIDPOINT_TOL: f64 = 1e-12;
pub const MIDPOINT_MAX_ITER: usize = 50;

fn rk4_step<S: GSystem + ?Sized>(sys: &S, x: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
    let k1 = sys.hamiltonian_field(x)?;
    let k2 = sys.hamiltonian_field(&(x + &k1 * (dt / 2.0)))?;
    let k3 = sys.hamiltonian_field(&(x + &k2 * (dt / 2.0)))?;
    let k4 = sys.hamiltonian_field(&(x + &k3 * dt))?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// Implicit midpoint `x' = x + dt·X((x + x')/2)` by fixed-point iteration.
/// The inner `Err` carries the last increment when the iteration does not
/// settle.
fn midpoint_step<S: GSystem + ?Sized>(
    sys: &S,
    x: &DVector<f64>,
    dt: f64,
) -> Result<std::result::Result<DVector<f64>, f64>> {
    let mut next = x + sys.hamiltonian_field(x)? * dt;
    let mut increment = f64::INFINITY;
    for _ in 0..MIDPOINT_MAX_ITER {
        let mid = (x + &next) * 0.5;
        let candidate = x + sys.hamiltonian_field(&mid)? * dt;
        increment = numerics::sup_norm(&(&candidate - &next));
        next = candidate;
        if increment <= MIDPOINT_TOL {
            return Ok(Ok(next));
        }
    }
    Ok(Err(increment))
}

pub fn integrate<S: GSystem + ?Sized>(
    sys: &S,
    x0: &DVector<f64>,
    dt: f64,
    steps: usize,
    method: Method,
) -> Result<Trajectory> {
    check_len("initial state", sys.state_dim(), x0.len())?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    sys.check_domain(x0)?;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(x0.as_slice().to_vec());
    let mut x = x0.clone();
    let wrap = |step: usize, e: Error| match e {
        e @ Error::Collision { .. } => Error::DomainExit {
            step,
            source: Box::new(e),
        },
        other => other,
    };
    for step in 1..=steps {
        x = match method {
            Method::Rk4 => rk4_step(sys, &x, dt).map_err(|e| wrap(step, e))?,
            Method::ImplicitMidpoint => match midpoint_step(sys, &x, dt).map_err(|e| wrap(step, e))? {
                Ok(next) => next,
                Err(increment) => return Err(Error::MidpointNonconvergence { step, increment }),
            },
        };
        sys.check_domain(&x).map_err(|e| wrap(step, e))?;
        times.push(step as f64 * dt);
        states.push(x.as_slice().to_vec());
    }
    Ok(Trajectory {
        times,
        states,
        method,
        dt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub max_energy_drift: f64,
    pub max_momentum_drift: f64,
}

/// Sup-norm drift of energy and momentum along the trajectory, relative to
/// the initial state.
pub fn conservation_report<S: GSystem + ?Sized>(sys: &S, traj: &Trajectory) -> Result<ConservationReport> {
    if traj.states.is_empty() {
        return Err(Error::InvalidInput("empty trajectory".into()));
    }
    let x0 = traj.state(0);
    let h0 = sys.energy(&x0)?;
    let m0 = sys.momentum(&x0);
    let mut report = ConservationReport {
        max_energy_drift: 0.0,
        max_momentum_drift: 0.0,
    };
    for i in 1..traj.states.len() {
        let x = traj.state(i);
        report.max_energy_drift = report.max_energy_drift.max((sys.energy(&x)? - h0).abs());
        report.max_momentum_drift = report
            .max_momentum_drift
            .max(numerics::sup_norm(&(sys.momentum(&x) - &m0)));
    }
    Ok(report)
}

// --- openness probe --------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub delta: f64,
    pub samples: usize,
    pub tol: f64,
    pub seed: u64,
    pub group_saturate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub target: Vec<f64>,
    pub hit: bool,
    pub min_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub config: ProbeConfig,
    pub center: Vec<f64>,
    pub outcomes: Vec<ProbeOutcome>,
}

/// Uniform sample from the ball of radius `radius` about `center`.
pub fn sample_ball(rng: &mut dyn RngCore, center: &DVector<f64>, radius: f64) -> DVector<f64> {
    let n = center.len();
    let dir = DVector::from_fn(n, |_, _| {
        let g: f64 = StandardNormal.sample(rng);
        g
    });
    let norm = dir.norm();
    let u: f64 = rand::Rng::random(rng);
    let r = radius * u.powf(1.0 / n as f64);
    center + dir * (r / norm)
}

/// Moves a state by a random group element.
pub type GroupSampler<'a> = dyn Fn(&mut dyn RngCore, &DVector<f64>) -> DVector<f64> + 'a;

/// Sample the image of a small ball under `map` and report, per target,
/// whether some sampled value lands within `tol` and the closest approach.
///
/// With `group_saturate`, every ball sample is moved by a random group
/// element drawn from `saturate` before applying the map.
pub fn openness_probe<F>(
    map: F,
    center: &DVector<f64>,
    targets: &[DVector<f64>],
    config: &ProbeConfig,
    saturate: Option<&GroupSampler<'_>>,
) -> Result<ProbeReport>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    if !(config.delta > 0.0) {
        return Err(Error::InvalidInput("probe radius must be positive".into()));
    }
    if config.samples == 0 {
        return Err(Error::InvalidInput("probe needs at least one sample".into()));
    }
    if config.group_saturate && saturate.is_none() {
        return Err(Error::InvalidInput("group saturation requested without a group sampler".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut min_dist = vec![f64::INFINITY; targets.len()];
    for _ in 0..config.samples {
        let mut x = sample_ball(&mut rng, center, config.delta);
        if config.group_saturate {
            if let Some(s) = saturate {
                x = s(&mut rng, &x);
            }
        }
        let image = map(&x);
        for (d, t) in min_dist.iter_mut().zip(targets) {
            *d = d.min((&image - t).norm());
        }
    }
    let outcomes = targets
        .iter()
        .zip(min_dist)
        .map(|(t, d)| ProbeOutcome {
            target: t.as_slice().to_vec(),
            hit: d <= config.tol,
            min_distance: d,
        })
        .collect();
    Ok(ProbeReport {
        config: config.clone(),
        center: center.as_slice().to_vec(),
        outcomes,
    })
}

/// `Φ(q, p) = q × p` on `ℝ³ × ℝ³`, the momentum map of the diagonal SO(3)
/// action.
pub fn cross_product_map(x: &DVector<f64>) -> DVector<f64> {
    let q = nalgebra::Vector3::new(x[0], x[1], x[2]);
    let p = nalgebra::Vector3::new(x[3], x[4], x[5]);
    let l = q.cross(&p);
    DVector::from_column_slice(l.as_slice())
}

/// Uniformly random rotation applied to both `q` and `p`.
pub fn random_rotation_pair(rng: &mut dyn RngCore, x: &DVector<f64>) -> DVector<f64> {
    let r = random_rotation(rng);
    let q = r * nalgebra::Vector3::new(x[0], x[1], x[2]);
    let p = r * nalgebra::Vector3::new(x[3], x[4], x[5]);
    DVector::from_iterator(6, q.iter().chain(p.iter()).copied())
}

/// Haar-random rotation from a normalised Gaussian quaternion.
pub fn random_rotation(rng: &mut dyn RngCore) -> nalgebra::Matrix3<f64> {
    let mut c = [0.0f64; 4];
    for v in c.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
    let q = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(c[0], c[1], c[2], c[3]));
    q.to_rotation_matrix().into_inner()
}

/// The 26 nonzero directions of the `{−1, 0, 1}³` grid, normalised.
pub fn grid_directions() -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(26);
    for i in -1..=1 {
        for j in -1..=1 {
            for k in -1..=1 {
                if (i, j, k) == (0, 0, 0) {
                    continue;
                }
                let v = DVector::from_vec(vec![i as f64, j as f64, k as f64]);
                let n = v.norm();
                out.push(v / n);
            }
        }
    }
    out
}
