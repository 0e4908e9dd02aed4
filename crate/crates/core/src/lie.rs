//! Group machinery for SE(2) (planar rigid motions, acting on vortex
//! configurations) and SO(3)×SO(3) (left/right rotations of the affine rigid
//! body).
//!
//! Conventions:
//! * `SE2Element { v, phi }` acts on the plane by `z ↦ e^{iφ} z + v`.
//! * `SE2Algebra { w, omega }` generates the vector field `ż = w + iωz`.
//! * `SE2Momentum { c, r }` pairs with the algebra as `Re(c̄w) + rω`.
//! * The hat map sends `a ∈ ℝ³` to the matrix with `â x = a × x`.

use nalgebra::{DVector, Matrix3, Rotation3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::vortex::{vortex_momentum, Vorticities};

/// Below this, a total vorticity or a momentum component counts as zero in
/// the closed-form isotropy case analysis.
pub const ZERO_TOL: f64 = 1e-12;

/// Reduce an angle to `(-π, π]`.
pub fn reduce_angle(phi: f64) -> f64 {
    if phi > -PI && phi <= PI {
        return phi;
    }
    let r = phi.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SE2Element {
    pub v: Complex64,
    pub phi: f64,
}

impl SE2Element {
    pub fn new(v: Complex64, phi: f64) -> Self {
        Self {
            v,
            phi: reduce_angle(phi),
        }
    }

    pub fn identity() -> Self {
        Self::new(Complex64::new(0.0, 0.0), 0.0)
    }

    pub fn translation(v: Complex64) -> Self {
        Self::new(v, 0.0)
    }

    pub fn rotation(phi: f64) -> Self {
        Self::new(Complex64::new(0.0, 0.0), phi)
    }

    fn unit(&self) -> Complex64 {
        Complex64::from_polar(1.0, self.phi)
    }

    /// Group exponential of `t·ξ`, i.e. the time-`t` flow of `ż = w + iωz`.
    pub fn exp(xi: &SE2Algebra, t: f64) -> Self {
        let theta = xi.omega * t;
        let v = if theta.abs() < 1e-8 {
            // series of (e^{iθ} − 1)/(iω) = t (1 + iθ/2 − θ²/6 + …)
            let i = Complex64::i();
            xi.w * t * (1.0 + i * theta / 2.0 - theta * theta / 6.0)
        } else {
            xi.w * (Complex64::from_polar(1.0, theta) - 1.0) / (Complex64::i() * xi.omega)
        };
        Self::new(v, theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SE2Algebra {
    pub w: Complex64,
    pub omega: f64,
}

impl SE2Algebra {
    pub fn new(w: Complex64, omega: f64) -> Self {
        Self { w, omega }
    }

    pub fn zero() -> Self {
        Self::new(Complex64::new(0.0, 0.0), 0.0)
    }

    /// `[Re w, Im w, ω]`
    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.w.re, self.w.im, self.omega])
    }

    pub fn from_slice(s: &[f64]) -> Result<Self> {
        crate::error::check_len("se(2) algebra element", 3, s.len())?;
        Ok(Self::new(Complex64::new(s[0], s[1]), s[2]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SE2Momentum {
    pub c: Complex64,
    pub r: f64,
}

impl SE2Momentum {
    pub fn new(c: Complex64, r: f64) -> Self {
        Self { c, r }
    }

    pub fn zero() -> Self {
        Self::new(Complex64::new(0.0, 0.0), 0.0)
    }

    pub fn pair(&self, xi: &SE2Algebra) -> f64 {
        (self.c.conj() * xi.w).re + self.r * xi.omega
    }

    /// `[Re c, Im c, r]`
    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.c.re, self.c.im, self.r])
    }

    pub fn from_slice(s: &[f64]) -> Result<Self> {
        crate::error::check_len("se(2)* momentum", 3, s.len())?;
        Ok(Self::new(Complex64::new(s[0], s[1]), s[2]))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(self.c + other.c, self.r + other.r)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new(self.c - other.c, self.r - other.r)
    }

    pub fn norm(&self) -> f64 {
        (self.c.norm_sqr() + self.r * self.r).sqrt()
    }
}

pub fn se2_act(g: &SE2Element, z: Complex64) -> Complex64 {
    g.unit() * z + g.v
}

pub fn se2_compose(g1: &SE2Element, g2: &SE2Element) -> SE2Element {
    SE2Element::new(g1.v + g1.unit() * g2.v, g1.phi + g2.phi)
}

pub fn se2_inverse(g: &SE2Element) -> SE2Element {
    SE2Element::new(-(g.unit().conj() * g.v), -g.phi)
}

/// `Ad_g (w, ω) = (e^{iφ}w − iωv, ω)`.
pub fn se2_adjoint(g: &SE2Element, xi: &SE2Algebra) -> SE2Algebra {
    SE2Algebra::new(g.unit() * xi.w - Complex64::i() * xi.omega * g.v, xi.omega)
}

/// Standard coadjoint action `Coad_g = Ad*_{g⁻¹}`:
/// `(c, r) ↦ (e^{iφ}c, r − Im(c̄′v))` with `c′ = e^{iφ}c`.
pub fn se2_coad(g: &SE2Element, mu: &SE2Momentum) -> SE2Momentum {
    let c = g.unit() * mu.c;
    SE2Momentum::new(c, mu.r - (c.conj() * g.v).im)
}

/// Fixed collision-free configuration used as the base point of the cocycle.
fn cocycle_base_point(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            let k = k as f64;
            Complex64::new(0.7 * k + 0.2, 0.3 * k * k - 0.1)
        })
        .collect()
}

/// Cocycle `θ(g) = Φ(g·x) − Coad_g Φ(x)` of the vortex momentum map,
/// evaluated at the supplied base point.
pub fn se2_cocycle_at(gamma: &Vorticities, g: &SE2Element, base: &[Complex64]) -> SE2Momentum {
    let moved: Vec<Complex64> = base.iter().map(|&z| se2_act(g, z)).collect();
    vortex_momentum(gamma, &moved).sub(&se2_coad(g, &vortex_momentum(gamma, base)))
}

/// Cocycle `θ(g)` of the vortex momentum map. It does not depend on the base
/// point; a fixed internal configuration is used.
pub fn se2_cocycle(gamma: &Vorticities, g: &SE2Element) -> SE2Momentum {
    se2_cocycle_at(gamma, g, &cocycle_base_point(gamma.len()))
}

/// Modified coadjoint action `Coad^θ_g μ = Coad_g μ + θ(g)`.
pub fn se2_coad_modified(gamma: &Vorticities, g: &SE2Element, mu: &SE2Momentum) -> SE2Momentum {
    se2_coad(g, mu).add(&se2_cocycle(gamma, g))
}

/// `d/dt|₀ Coad^θ_{exp(tξ)} μ = (iωc + iΓw, −Im(c̄w))`, Γ the total vorticity.
pub fn se2_coad_infinitesimal(total: f64, xi: &SE2Algebra, mu: &SE2Momentum) -> SE2Momentum {
    let i = Complex64::i();
    SE2Momentum::new(
        i * xi.omega * mu.c + i * total * xi.w,
        -(mu.c.conj() * xi.w).im,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Isotropy {
    pub dimension: usize,
    pub compact: bool,
}

/// Isotropy subgroup of `μ` under the (modified) coadjoint action.
///
/// Vanishing total vorticity gives the standard action: the axis `c = 0` is
/// fixed by all of SE(2), any other point by the line of translations
/// parallel to `c`. Otherwise the stabiliser is the conjugate of SO(2) by
/// the translation to `−ic/Γ`.
pub fn se2_isotropy(gamma: &Vorticities, mu: &SE2Momentum) -> Isotropy {
    if gamma.total_vanishes() {
        if mu.c.norm() <= ZERO_TOL {
            Isotropy {
                dimension: 3,
                compact: false,
            }
        } else {
            Isotropy {
                dimension: 1,
                compact: false,
            }
        }
    } else {
        Isotropy {
            dimension: 1,
            compact: true,
        }
    }
}

/// Function of `μ` constant on (modified) coadjoint orbits.
pub fn se2_casimir(gamma: &Vorticities, mu: &SE2Momentum) -> f64 {
    if gamma.total_vanishes() {
        mu.c.norm()
    } else {
        mu.r - mu.c.norm_sqr() / (2.0 * gamma.total())
    }
}

// --- SO(3) × SO(3) ---------------------------------------------------------

pub fn hat(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

/// Inverse of [`hat`] applied to the antisymmetric part of `m`.
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// `exp(â)`, the rotation by angle `|a|` about `a`.
pub fn so3_exp(a: &Vector3<f64>) -> Matrix3<f64> {
    Rotation3::new(*a).into_inner()
}

pub fn check_rotation(m: &Matrix3<f64>) -> Result<()> {
    let orth = (m.transpose() * m - Matrix3::identity()).abs().max();
    let det = m.determinant();
    if orth > 1e-10 || (det - 1.0).abs() > 1e-10 {
        return Err(Error::NotRotation(format!(
            "orthogonality defect {orth:e}, determinant {det}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SO3PairMomentum {
    pub mu_l: Vector3<f64>,
    pub mu_r: Vector3<f64>,
}

impl SO3PairMomentum {
    pub fn new(mu_l: Vector3<f64>, mu_r: Vector3<f64>) -> Self {
        Self { mu_l, mu_r }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(6, self.mu_l.iter().chain(self.mu_r.iter()).copied())
    }

    pub fn from_slice(s: &[f64]) -> Result<Self> {
        crate::error::check_len("so(3)×so(3) momentum", 6, s.len())?;
        Ok(Self::new(
            Vector3::new(s[0], s[1], s[2]),
            Vector3::new(s[3], s[4], s[5]),
        ))
    }
}

/// A pair of rotations `(A, B)` acting by `Q ↦ A Q Bᵀ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SO3Pair {
    pub left: Matrix3<f64>,
    pub right: Matrix3<f64>,
}

impl SO3Pair {
    pub fn new(left: Matrix3<f64>, right: Matrix3<f64>) -> Result<Self> {
        check_rotation(&left)?;
        check_rotation(&right)?;
        Ok(Self { left, right })
    }

    pub fn identity() -> Self {
        Self {
            left: Matrix3::identity(),
            right: Matrix3::identity(),
        }
    }

    pub fn exp(xi_l: &Vector3<f64>, xi_r: &Vector3<f64>, t: f64) -> Self {
        Self {
            left: so3_exp(&(xi_l * t)),
            right: so3_exp(&(xi_r * t)),
        }
    }
}

/// `(μ_L, μ_R) ↦ (A μ_L, B μ_R)`.
pub fn so3_pair_coad(g: &SO3Pair, mu: &SO3PairMomentum) -> SO3PairMomentum {
    SO3PairMomentum::new(g.left * mu.mu_l, g.right * mu.mu_r)
}

/// Infinitesimal version of [`so3_pair_coad`]: `(ξ_L × μ_L, ξ_R × μ_R)`.
pub fn so3_pair_coad_infinitesimal(
    xi_l: &Vector3<f64>,
    xi_r: &Vector3<f64>,
    mu: &SO3PairMomentum,
) -> SO3PairMomentum {
    SO3PairMomentum::new(xi_l.cross(&mu.mu_l), xi_r.cross(&mu.mu_r))
}
