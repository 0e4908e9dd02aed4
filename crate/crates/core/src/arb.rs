//! Affine rigid body on `T*GL⁺(3)` with an elastic potential.
//!
//! State vectors are `(Q, P)` flattened row-major, 18 entries, with the
//! canonical symplectic matrix `[[0, I], [−I, 0]]`. The group SO(3)×SO(3)
//! acts by `(Q, P) ↦ (A Q Bᵀ, A P Bᵀ)`.

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, Vector3};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::gsystem::{random_rotation, GSystem};
use crate::lie::{hat, so3_pair_coad, so3_pair_coad_infinitesimal, vee, Isotropy, SO3Pair, SO3PairMomentum, ZERO_TOL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArbState {
    pub q: Matrix3<f64>,
    pub p: Matrix3<f64>,
}

/// JSON form `{"Q": [[…], …], "P": [[…], …]}`, rows first.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArbStateJson {
    #[serde(rename = "Q")]
    q: [[f64; 3]; 3],
    #[serde(rename = "P")]
    p: [[f64; 3]; 3],
}

fn rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

fn from_rows(r: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| r[i][j])
}

impl Serialize for ArbState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ArbStateJson {
            q: rows(&self.q),
            p: rows(&self.p),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ArbState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = ArbStateJson::deserialize(d)?;
        Ok(Self {
            q: from_rows(&j.q),
            p: from_rows(&j.p),
        })
    }
}

impl ArbState {
    pub fn new(q: Matrix3<f64>, p: Matrix3<f64>) -> Self {
        Self { q, p }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Matrix3::zeros())
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let mut x = DVector::zeros(18);
        for i in 0..3 {
            for j in 0..3 {
                x[3 * i + j] = self.q[(i, j)];
                x[9 + 3 * i + j] = self.p[(i, j)];
            }
        }
        x
    }

    pub fn from_vector(x: &DVector<f64>) -> Self {
        Self::new(
            Matrix3::from_fn(|i, j| x[3 * i + j]),
            Matrix3::from_fn(|i, j| x[9 + 3 * i + j]),
        )
    }
}

/// `V(Q) = (κ/4)‖QᵀQ − I‖²_F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElasticPotential {
    pub stiffness: f64,
}

impl ElasticPotential {
    pub fn new(stiffness: f64) -> Result<Self> {
        if !(stiffness > 0.0) || !stiffness.is_finite() {
            return Err(Error::InvalidInput(format!("stiffness must be positive, got {stiffness}")));
        }
        Ok(Self { stiffness })
    }

    pub fn value(&self, q: &Matrix3<f64>) -> f64 {
        let strain = q.transpose() * q - Matrix3::identity();
        self.stiffness / 4.0 * strain.norm_squared()
    }

    /// `∇V(Q) = κ Q (QᵀQ − I)`.
    pub fn gradient(&self, q: &Matrix3<f64>) -> Matrix3<f64> {
        self.stiffness * q * (q.transpose() * q - Matrix3::identity())
    }
}

impl Default for ElasticPotential {
    fn default() -> Self {
        Self { stiffness: 1.0 }
    }
}

pub fn arb_energy(state: &ArbState, pot: &ElasticPotential) -> f64 {
    state.p.norm_squared() / 2.0 + pot.value(&state.q)
}

/// `Φ_L = vee((PQᵀ − QPᵀ)/2)`, `Φ_R = vee((PᵀQ − QᵀP)/2)`.
pub fn arb_momentum(state: &ArbState) -> SO3PairMomentum {
    momentum_bilinear(&state.q, &state.p)
}

fn momentum_bilinear(q: &Matrix3<f64>, p: &Matrix3<f64>) -> SO3PairMomentum {
    let l = (p * q.transpose() - q * p.transpose()) * 0.5;
    let r = (p.transpose() * q - q.transpose() * p) * 0.5;
    SO3PairMomentum::new(vee(&l), vee(&r))
}

/// `(Q̇, Ṗ) = (P, −∇V(Q))`.
pub fn arb_field(state: &ArbState, pot: &ElasticPotential) -> ArbState {
    ArbState::new(state.p, -pot.gradient(&state.q))
}

/// `(Q̇, Ṗ) = (ξ̂_L Q − Q ξ̂_R, ξ̂_L P − P ξ̂_R)`.
pub fn arb_generator(xi_l: &Vector3<f64>, xi_r: &Vector3<f64>, state: &ArbState) -> ArbState {
    let (l, r) = (hat(xi_l), hat(xi_r));
    ArbState::new(l * state.q - state.q * r, l * state.p - state.p * r)
}

pub fn so3_pair_act(g: &SO3Pair, state: &ArbState) -> ArbState {
    ArbState::new(
        g.left * state.q * g.right.transpose(),
        g.left * state.p * g.right.transpose(),
    )
}

/// Checked form of [`so3_pair_act`] taking raw matrices.
pub fn so3_pair_act_checked(a: &Matrix3<f64>, b: &Matrix3<f64>, state: &ArbState) -> Result<ArbState> {
    Ok(so3_pair_act(&SO3Pair::new(*a, *b)?, state))
}

fn split_algebra(xi: &DVector<f64>) -> (Vector3<f64>, Vector3<f64>) {
    (
        Vector3::new(xi[0], xi[1], xi[2]),
        Vector3::new(xi[3], xi[4], xi[5]),
    )
}

fn momentum_of(mu: &DVector<f64>) -> SO3PairMomentum {
    SO3PairMomentum::new(Vector3::new(mu[0], mu[1], mu[2]), Vector3::new(mu[3], mu[4], mu[5]))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ArbSystem {
    pub potential: ElasticPotential,
}

impl ArbSystem {
    pub fn new(potential: ElasticPotential) -> Self {
        Self { potential }
    }
}

impl GSystem for ArbSystem {
    type Group = SO3Pair;

    fn state_dim(&self) -> usize {
        18
    }

    fn group_dim(&self) -> usize {
        6
    }

    fn symplectic_matrix(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(18, 18);
        for i in 0..9 {
            s[(i, 9 + i)] = 1.0;
            s[(9 + i, i)] = -1.0;
        }
        s
    }

    fn check_domain(&self, x: &DVector<f64>) -> Result<()> {
        check_len("rigid-body state", 18, x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite rigid-body state".into()));
        }
        let det = ArbState::from_vector(x).q.determinant();
        if !(det > 0.0) {
            return Err(Error::InvalidInput(format!("configuration has det Q = {det}, need > 0")));
        }
        Ok(())
    }

    fn energy(&self, x: &DVector<f64>) -> Result<f64> {
        check_len("rigid-body state", 18, x.len())?;
        Ok(arb_energy(&ArbState::from_vector(x), &self.potential))
    }

    fn energy_gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("rigid-body state", 18, x.len())?;
        let s = ArbState::from_vector(x);
        Ok(ArbState::new(self.potential.gradient(&s.q), s.p).to_vector())
    }

    fn hamiltonian_field(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("rigid-body state", 18, x.len())?;
        Ok(arb_field(&ArbState::from_vector(x), &self.potential).to_vector())
    }

    fn momentum(&self, x: &DVector<f64>) -> DVector<f64> {
        arb_momentum(&ArbState::from_vector(x)).to_vector()
    }

    fn momentum_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let s = ArbState::from_vector(x);
        let mut j = DMatrix::zeros(6, 18);
        for k in 0..9 {
            let mut e = Matrix3::zeros();
            e[(k / 3, k % 3)] = 1.0;
            j.set_column(k, &momentum_bilinear(&e, &s.p).to_vector());
            j.set_column(9 + k, &momentum_bilinear(&s.q, &e).to_vector());
        }
        j
    }

    fn generator(&self, xi: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        let (l, r) = split_algebra(xi);
        arb_generator(&l, &r, &ArbState::from_vector(x)).to_vector()
    }

    /// `⟨μ, ξ⟩ = −2(μ_L·ξ_L + μ_R·ξ_R)`: the normalisation under which
    /// `S·ξ_M = ∇⟨Φ, ξ⟩` holds for the half-commutator momenta.
    fn pairing(&self, mu: &DVector<f64>, xi: &DVector<f64>) -> f64 {
        -2.0 * mu.dot(xi)
    }

    fn act(&self, g: &SO3Pair, x: &DVector<f64>) -> DVector<f64> {
        so3_pair_act(g, &ArbState::from_vector(x)).to_vector()
    }

    fn coad(&self, g: &SO3Pair, mu: &DVector<f64>) -> DVector<f64> {
        so3_pair_coad(g, &momentum_of(mu)).to_vector()
    }

    fn coad_infinitesimal(&self, xi: &DVector<f64>, mu: &DVector<f64>) -> DVector<f64> {
        let (l, r) = split_algebra(xi);
        so3_pair_coad_infinitesimal(&l, &r, &momentum_of(mu)).to_vector()
    }

    fn sample_group(&self, rng: &mut dyn RngCore) -> SO3Pair {
        let left = random_rotation(rng);
        let right = random_rotation(rng);
        SO3Pair { left, right }
    }

    fn group_flow(&self, xi: &DVector<f64>, t: f64, x: &DVector<f64>) -> DVector<f64> {
        let (l, r) = split_algebra(xi);
        self.act(&SO3Pair::exp(&l, &r, t), x)
    }

    /// Each factor contributes 3 when its component vanishes and 1
    /// otherwise; SO(3)×SO(3) is compact.
    fn isotropy(&self, mu: &DVector<f64>) -> Isotropy {
        let m = momentum_of(mu);
        let factor = |v: &Vector3<f64>| if v.norm() <= ZERO_TOL { 3 } else { 1 };
        Isotropy {
            dimension: factor(&m.mu_l) + factor(&m.mu_r),
            compact: true,
        }
    }

    fn component_labels(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(18);
        for name in ["Q", "P"] {
            for i in 1..=3 {
                for j in 1..=3 {
                    out.push(format!("{name}{i}{j}"));
                }
            }
        }
        out
    }
}

/// A rotation taking `e₃` to the unit vector `u`.
fn rotation_to(u: &Vector3<f64>) -> Matrix3<f64> {
    let e3 = Vector3::z();
    Rotation3::rotation_between(&e3, u)
        .unwrap_or_else(|| Rotation3::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI))
        .into_inner()
}

/// Starting point for the relative-equilibrium solver at momentum `mu`:
/// a state `(Q, P)` with generator `(ξ_L, ξ_R)`, built from diagonal
/// configurations spinning about a common axis.
///
/// The target is first rotated so that `μ_L = s·e₃` with `s ≥ 0` and
/// `μ_R = t·e₃` with `t ≤ 0`. When `s + t = 0` the body is an oblate
/// spheroid `diag(a, a, 1)` balancing centrifugal stretch against the
/// potential; otherwise the equatorial axes split to `1 ± d/2`, which spins
/// the body and its internal flow together.
pub fn arb_predictor(mu: &SO3PairMomentum, pot: &ElasticPotential) -> (ArbState, Vector3<f64>, Vector3<f64>) {
    let kappa = pot.stiffness;
    let s = mu.mu_l.norm();
    let t = -mu.mu_r.norm();
    let a_rot = if s > 0.0 { rotation_to(&(mu.mu_l / s)) } else { Matrix3::identity() };
    let b_rot = if t < 0.0 { rotation_to(&(-mu.mu_r / -t)) } else { Matrix3::identity() };

    let (d, alpha, beta) = if (s + t).abs() < 1e-12 {
        let mut a = 1.0_f64;
        for _ in 0..100 {
            let delta = s / (a * a);
            a = (1.0 + delta * delta / kappa).sqrt();
        }
        let delta = s / (a * a);
        (Matrix3::from_diagonal(&Vector3::new(a, a, 1.0)), delta / 2.0, -delta / 2.0)
    } else {
        let sigma = (s + t).signum() * (2.0 * kappa).sqrt();
        let split = (2.0 * (s + t).abs() / sigma.abs()).sqrt();
        let delta = (s - t) / 2.0;
        (
            Matrix3::from_diagonal(&Vector3::new(1.0 + split / 2.0, 1.0 - split / 2.0, 1.0)),
            (sigma + delta) / 2.0,
            (sigma - delta) / 2.0,
        )
    };
    let e3 = hat(&Vector3::z());
    let p = alpha * e3 * d - beta * d * e3;
    let state = ArbState::new(a_rot * d * b_rot.transpose(), a_rot * p * b_rot.transpose());
    (state, a_rot * Vector3::z() * alpha, b_rot * Vector3::z() * beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::fd_gradient;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, scale: f64) -> Matrix3<f64> {
        use rand::Rng;
        Matrix3::from_fn(|_, _| rng.random_range(-scale..scale))
    }

    #[test]
    fn energy_examples() {
        let pot = ElasticPotential::default();
        assert_eq!(arb_energy(&ArbState::identity(), &pot), 0.0);
        let lambda: f64 = 1.3;
        let q = Matrix3::from_diagonal(&Vector3::new(lambda, 1.0 / lambda, 1.0));
        let expected = ((lambda * lambda - 1.0).powi(2) + (1.0 / (lambda * lambda) - 1.0).powi(2)) / 4.0;
        assert_relative_eq!(arb_energy(&ArbState::new(q, Matrix3::zeros()), &pot), expected, max_relative = 1e-14);
    }

    #[test]
    fn momentum_of_antisymmetric_p() {
        let a = Vector3::new(0.3, -0.2, 0.7);
        let m = arb_momentum(&ArbState::new(Matrix3::identity(), hat(&a)));
        assert!((m.mu_l - a).norm() < 1e-15);
        assert!((m.mu_r + a).norm() < 1e-15);
        assert_eq!(arb_momentum(&ArbState::identity()).to_vector().norm(), 0.0);
    }

    #[test]
    fn potential_gradient_matches_finite_differences() {
        let pot = ElasticPotential::new(1.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let q = Matrix3::identity() + random_matrix(&mut rng, 0.5);
            let x = DVector::from_iterator(9, (0..9).map(|k| q[(k / 3, k % 3)]));
            let fd = fd_gradient(|y| pot.value(&Matrix3::from_fn(|i, j| y[3 * i + j])), &x, 1e-6);
            let g = pot.gradient(&q);
            let g = DVector::from_iterator(9, (0..9).map(|k| g[(k / 3, k % 3)]));
            assert!((fd - &g).norm() <= 1e-6 * g.norm().max(1e-3));
        }
    }

    #[test]
    fn identity_is_an_equilibrium_and_diagonal_action_fixes_it() {
        let sys = ArbSystem::default();
        let x = ArbState::identity().to_vector();
        assert_eq!(sys.hamiltonian_field(&x).unwrap().norm(), 0.0);
        let e3 = Vector3::z();
        assert_eq!(arb_generator(&e3, &e3, &ArbState::identity()).to_vector().norm(), 0.0);
    }

    #[test]
    fn momentum_jacobian_matches_finite_differences() {
        let sys = ArbSystem::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = ArbState::new(Matrix3::identity() + random_matrix(&mut rng, 0.3), random_matrix(&mut rng, 0.5)).to_vector();
        let fd = crate::numerics::fd_jacobian(|y| sys.momentum(y), &x, 1e-6);
        assert!((fd - sys.momentum_jacobian(&x)).abs().max() < 1e-9);
    }

    #[test]
    fn rotations_are_checked() {
        let bad = Matrix3::identity() * 2.0;
        assert!(matches!(
            so3_pair_act_checked(&bad, &Matrix3::identity(), &ArbState::identity()),
            Err(Error::NotRotation(_))
        ));
        let s = so3_pair_act_checked(&Matrix3::identity(), &Matrix3::identity(), &ArbState::identity()).unwrap();
        assert_eq!(s, ArbState::identity());
    }

    #[test]
    fn json_is_row_major() {
        let s: ArbState = serde_json::from_str(r#"{"Q":[[1,2,0],[0,1,0],[0,0,1]],"P":[[0,0,0],[0,0,0],[0,0,0]]}"#).unwrap();
        assert_eq!(s.q[(0, 1)], 2.0);
        let back: ArbState = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<ArbState>(r#"{"Q":[[1,0,0],[0,1,0],[0,0,1]],"P":[[0,0,0],[0,0,0],[0,0,0]],"x":1}"#).is_err());
    }

    #[test]
    fn predictor_lands_near_target_momentum() {
        let pot = ElasticPotential::default();
        for (l, r) in [
            (Vector3::new(0.0, 0.0, 0.05), Vector3::new(0.0, 0.0, 0.05)),
            (Vector3::new(0.02, -0.03, 0.0), Vector3::new(0.0, 0.0, -0.1)),
            (Vector3::new(0.0, 0.0, 0.1), Vector3::new(0.0, 0.0, 0.0)),
        ] {
            let (s, _, _) = arb_predictor(&SO3PairMomentum::new(l, r), &pot);
            let m = arb_momentum(&s);
            assert!((m.mu_l - l).norm() < 0.05 && (m.mu_r - r).norm() < 0.05, "{m:?}");
            assert!(s.q.determinant() > 0.0);
        }
        let (s, l, r) = arb_predictor(&SO3PairMomentum::new(Vector3::zeros(), Vector3::zeros()), &pot);
        assert_eq!(s, ArbState::identity());
        assert_eq!((l.norm(), r.norm()), (0.0, 0.0));
    }
}
