//! Planar point vortices with SE(2) symmetry.
//!
//! Real coordinates are `(x₁, y₁, …, x_N, y_N)` with `z_k = x_k + i y_k`; the
//! symplectic form `Σ Γ_k dx_k ∧ dy_k` has the block-diagonal matrix with
//! blocks `Γ_k [[0, 1], [−1, 0]]`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{check_len, Error, Result};
use crate::gsystem::GSystem;
use crate::lie::{
    se2_act, se2_casimir, se2_coad_infinitesimal, se2_coad_modified, se2_isotropy, Isotropy,
    SE2Algebra, SE2Element, SE2Momentum, ZERO_TOL,
};
use crate::releq::{synge_classify, Classification, GaugeRow, SYNGE_TOL};

/// Minimum pairwise distance for a configuration to count as collision-free.
pub const COLLISION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Vorticities {
    gamma: Vec<f64>,
    total: f64,
}

impl Vorticities {
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if gamma.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least two vortices, got {}",
                gamma.len()
            )));
        }
        if let Some(k) = gamma.iter().position(|g| *g == 0.0 || !g.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "vorticity {k} must be finite and nonzero"
            )));
        }
        let total = gamma.iter().sum();
        Ok(Self { gamma, total })
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.gamma
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Whether ΣΓ vanishes, relative to the largest |Γ_k|.
    pub fn total_vanishes(&self) -> bool {
        let scale = self.gamma.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        self.total.abs() <= ZERO_TOL * scale
    }
}

impl Serialize for Vorticities {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.gamma.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vorticities {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let gamma = Vec::<f64>::deserialize(d)?;
        Vorticities::new(gamma).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VortexState {
    pub z: Vec<Complex64>,
}

impl VortexState {
    pub fn new(z: Vec<Complex64>) -> Self {
        Self { z }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(2 * self.z.len(), self.z.iter().flat_map(|z| [z.re, z.im]))
    }

    pub fn from_vector(x: &DVector<f64>) -> Self {
        Self::new(x.as_slice().chunks(2).map(|p| Complex64::new(p[0], p[1])).collect())
    }

    pub fn min_pairwise_distance(&self) -> f64 {
        min_pairwise_distance(&self.z)
    }
}

/// On-disk form `{"gamma": […], "z": [[re, im], …]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VortexConfig {
    pub gamma: Vorticities,
    pub z: Vec<Complex64>,
}

impl VortexConfig {
    pub fn validate(&self) -> Result<()> {
        check_len("vortex positions", self.gamma.len(), self.z.len())?;
        check_collision_free(&self.z)
    }
}

pub fn min_pairwise_distance(z: &[Complex64]) -> f64 {
    let mut m = f64::INFINITY;
    for k in 0..z.len() {
        for l in k + 1..z.len() {
            m = m.min((z[k] - z[l]).norm());
        }
    }
    m
}

pub fn check_collision_free(z: &[Complex64]) -> Result<()> {
    let d = min_pairwise_distance(z);
    if !(d >= COLLISION_TOL) {
        return Err(Error::Collision {
            min_distance: d,
            tolerance: COLLISION_TOL,
        });
    }
    Ok(())
}

fn check_state(gamma: &Vorticities, z: &[Complex64]) -> Result<()> {
    check_len("vortex positions", gamma.len(), z.len())?;
    check_collision_free(z)
}

/// `h = −(1/2π) Σ_{k<l} Γ_k Γ_l log|z_k − z_l|`.
pub fn vortex_energy(gamma: &Vorticities, z: &[Complex64]) -> Result<f64> {
    check_state(gamma, z)?;
    let g = gamma.as_slice();
    let mut s = 0.0;
    for k in 0..z.len() {
        for l in k + 1..z.len() {
            s += g[k] * g[l] * 0.5 * (z[k] - z[l]).norm_sqr().ln();
        }
    }
    Ok(-s / (2.0 * PI))
}

/// `ż_k = −(1/2πi) Σ_{l≠k} Γ_l / (z̄_k − z̄_l)`.
pub fn vortex_field(gamma: &Vorticities, z: &[Complex64]) -> Result<Vec<Complex64>> {
    check_state(gamma, z)?;
    let g = gamma.as_slice();
    let pref = -1.0 / (2.0 * PI * Complex64::i());
    Ok((0..z.len())
        .map(|k| {
            let s: Complex64 = (0..z.len())
                .filter(|&l| l != k)
                .map(|l| g[l] / (z[k] - z[l]).conj())
                .sum();
            pref * s
        })
        .collect())
}

/// `(Φ_ℂ, Φ_ℝ) = (i Σ Γ_k z_k, Σ Γ_k |z_k|²/2)`.
pub fn vortex_momentum(gamma: &Vorticities, z: &[Complex64]) -> SE2Momentum {
    let g = gamma.as_slice();
    let c: Complex64 = Complex64::i() * g.iter().zip(z).map(|(g, z)| *g * z).sum::<Complex64>();
    let r = g.iter().zip(z).map(|(g, z)| g * z.norm_sqr()).sum::<f64>() / 2.0;
    SE2Momentum::new(c, r)
}

/// Rows are the gradients of `Re Φ_ℂ`, `Im Φ_ℂ` and `Φ_ℝ` in real coordinates.
pub fn vortex_momentum_jacobian(gamma: &Vorticities, z: &[Complex64]) -> DMatrix<f64> {
    let n = z.len();
    let mut j = DMatrix::zeros(3, 2 * n);
    for (k, (g, z)) in gamma.as_slice().iter().zip(z).enumerate() {
        j[(0, 2 * k + 1)] = -g;
        j[(1, 2 * k)] = *g;
        j[(2, 2 * k)] = g * z.re;
        j[(2, 2 * k + 1)] = g * z.im;
    }
    j
}

/// `ż_k = w + iω z_k`.
pub fn vortex_generator(xi: &SE2Algebra, z: &[Complex64]) -> Vec<Complex64> {
    z.iter()
        .map(|z| xi.w + Complex64::i() * xi.omega * z)
        .collect()
}

fn complex_to_vector(v: &[Complex64]) -> DVector<f64> {
    DVector::from_iterator(2 * v.len(), v.iter().flat_map(|z| [z.re, z.im]))
}

fn vector_to_complex(x: &DVector<f64>) -> Vec<Complex64> {
    x.as_slice()
        .chunks(2)
        .map(|p| Complex64::new(p[0], p[1]))
        .collect()
}

#[derive(Debug, Clone)]
pub struct VortexSystem {
    pub gamma: Vorticities,
}

impl VortexSystem {
    pub fn new(gamma: Vorticities) -> Self {
        Self { gamma }
    }

    pub fn from_slice(gamma: &[f64]) -> Result<Self> {
        Ok(Self::new(Vorticities::new(gamma.to_vec())?))
    }

    pub fn n(&self) -> usize {
        self.gamma.len()
    }

    pub fn casimir(&self, mu: &DVector<f64>) -> f64 {
        se2_casimir(&self.gamma, &momentum_from_vector(mu))
    }
}

pub fn momentum_from_vector(mu: &DVector<f64>) -> SE2Momentum {
    SE2Momentum::new(Complex64::new(mu[0], mu[1]), mu[2])
}

pub fn algebra_from_vector(xi: &DVector<f64>) -> SE2Algebra {
    SE2Algebra::new(Complex64::new(xi[0], xi[1]), xi[2])
}

impl GSystem for VortexSystem {
    type Group = SE2Element;

    fn state_dim(&self) -> usize {
        2 * self.n()
    }

    fn group_dim(&self) -> usize {
        3
    }

    fn symplectic_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut s = DMatrix::zeros(2 * n, 2 * n);
        for (k, g) in self.gamma.as_slice().iter().enumerate() {
            s[(2 * k, 2 * k + 1)] = *g;
            s[(2 * k + 1, 2 * k)] = -g;
        }
        s
    }

    fn check_domain(&self, x: &DVector<f64>) -> Result<()> {
        check_len("vortex state", self.state_dim(), x.len())?;
        check_collision_free(&vector_to_complex(x))
    }

    fn energy(&self, x: &DVector<f64>) -> Result<f64> {
        check_len("vortex state", self.state_dim(), x.len())?;
        vortex_energy(&self.gamma, &vector_to_complex(x))
    }

    fn energy_gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("vortex state", self.state_dim(), x.len())?;
        let z = vector_to_complex(x);
        check_collision_free(&z)?;
        let g = self.gamma.as_slice();
        let mut grad = DVector::zeros(x.len());
        for k in 0..z.len() {
            let mut acc = Complex64::new(0.0, 0.0);
            for l in 0..z.len() {
                if l != k {
                    let d = z[k] - z[l];
                    acc += g[l] * d / d.norm_sqr();
                }
            }
            acc *= -g[k] / (2.0 * PI);
            grad[2 * k] = acc.re;
            grad[2 * k + 1] = acc.im;
        }
        Ok(grad)
    }

    fn hamiltonian_field(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("vortex state", self.state_dim(), x.len())?;
        Ok(complex_to_vector(&vortex_field(&self.gamma, &vector_to_complex(x))?))
    }

    fn momentum(&self, x: &DVector<f64>) -> DVector<f64> {
        vortex_momentum(&self.gamma, &vector_to_complex(x)).to_vector()
    }

    fn momentum_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        vortex_momentum_jacobian(&self.gamma, &vector_to_complex(x))
    }

    fn generator(&self, xi: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        complex_to_vector(&vortex_generator(&algebra_from_vector(xi), &vector_to_complex(x)))
    }

    fn pairing(&self, mu: &DVector<f64>, xi: &DVector<f64>) -> f64 {
        momentum_from_vector(mu).pair(&algebra_from_vector(xi))
    }

    fn act(&self, g: &SE2Element, x: &DVector<f64>) -> DVector<f64> {
        let z: Vec<Complex64> = vector_to_complex(x).into_iter().map(|z| se2_act(g, z)).collect();
        complex_to_vector(&z)
    }

    fn coad(&self, g: &SE2Element, mu: &DVector<f64>) -> DVector<f64> {
        se2_coad_modified(&self.gamma, g, &momentum_from_vector(mu)).to_vector()
    }

    fn coad_infinitesimal(&self, xi: &DVector<f64>, mu: &DVector<f64>) -> DVector<f64> {
        let total = if self.gamma.total_vanishes() {
            0.0
        } else {
            self.gamma.total()
        };
        se2_coad_infinitesimal(total, &algebra_from_vector(xi), &momentum_from_vector(mu)).to_vector()
    }

    fn sample_group(&self, rng: &mut dyn RngCore) -> SE2Element {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        let phi = rng.random_range(-PI..PI);
        SE2Element::new(Complex64::new(re, im), phi)
    }

    fn group_flow(&self, xi: &DVector<f64>, t: f64, x: &DVector<f64>) -> DVector<f64> {
        self.act(&SE2Element::exp(&algebra_from_vector(xi), t), x)
    }

    fn isotropy(&self, mu: &DVector<f64>) -> Isotropy {
        se2_isotropy(&self.gamma, &momentum_from_vector(mu))
    }

    fn classify(&self, x: &DVector<f64>) -> Classification {
        if self.n() != 3 {
            return Classification::NotApplicable;
        }
        synge_classify(&vector_to_complex(x), SYNGE_TOL).unwrap_or(Classification::NotApplicable)
    }

    /// Pins exactly the isotropy directions of `μ`:
    /// * ΣΓ = 0 on the axis: last vortex at the origin, first on the real axis;
    /// * ΣΓ = 0 off the axis: first vortex has no component along `c`;
    /// * ΣΓ ≠ 0: first vortex level with the rotation centre `−ic/ΣΓ`.
    fn gauge(&self, mu: &DVector<f64>, _x: &DVector<f64>, _xi: &DVector<f64>) -> Vec<GaugeRow> {
        let n = self.n();
        let dim = 2 * n + 3;
        let row = |entries: &[(usize, f64)], value: f64, label: &str| {
            let mut coefficients = vec![0.0; dim];
            for &(i, v) in entries {
                coefficients[i] = v;
            }
            GaugeRow {
                coefficients,
                value,
                label: label.to_string(),
            }
        };
        let m = momentum_from_vector(mu);
        if self.gamma.total_vanishes() {
            if m.c.norm() <= ZERO_TOL {
                let last = n - 1;
                vec![
                    row(&[(2 * last, 1.0)], 0.0, "Re z_N = 0"),
                    row(&[(2 * last + 1, 1.0)], 0.0, "Im z_N = 0"),
                    row(&[(1, 1.0)], 0.0, "Im z_1 = 0"),
                ]
            } else {
                let u = m.c / m.c.norm();
                vec![row(&[(0, u.re), (1, u.im)], 0.0, "Re(conj(c/|c|) z_1) = 0")]
            }
        } else {
            let center = -Complex64::i() * m.c / self.gamma.total();
            vec![row(&[(1, 1.0)], center.im, "Im z_1 = Im(centre of vorticity)")]
        }
    }

    fn component_labels(&self) -> Vec<String> {
        (1..=self.n())
            .flat_map(|k| [format!("x{k}"), format!("y{k}")])
            .collect()
    }
}

/// Collinear configuration `(a, −a, 0)`.
pub fn collinear_configuration(a: f64) -> VortexState {
    VortexState::new(vec![
        Complex64::new(a, 0.0),
        Complex64::new(-a, 0.0),
        Complex64::new(0.0, 0.0),
    ])
}

/// Equilateral triangle for vorticities `(1, 1, −2)` with momentum exactly
/// `μ = (c, r)`, `c ≠ 0`. `orientation = ±1` selects `z₂ − z₃ = e^{±iπ/3}(z₁ − z₃)`.
/// The triangle is translated along `c` so that `Re(c̄ z₁) = 0`.
pub fn equilateral_configuration(mu: &SE2Momentum, orientation: f64) -> Result<VortexState> {
    let cn = mu.c.norm();
    if !(cn > 0.0) {
        return Err(Error::InvalidInput("equilateral configurations need c ≠ 0".into()));
    }
    let side = cn / 3f64.sqrt();
    let turn = orientation.signum() * PI / 3.0;
    let theta = mu.c.arg() - PI / 2.0 - turn / 2.0;
    let d = [
        Complex64::from_polar(side, theta),
        Complex64::from_polar(side, theta + turn),
        Complex64::new(0.0, 0.0),
    ];
    let r_shape = (d[0].norm_sqr() + d[1].norm_sqr()) / 2.0;
    let kappa = (mu.r - r_shape) / (cn * cn);
    let p = -Complex64::i() * mu.c * kappa;
    let u = mu.c / cn;
    let shift = -(u.conj() * (p + d[0])).re;
    Ok(VortexState::new(d.iter().map(|d| p + d + shift * u).collect()))
}

/// `min_{g ∈ SE(2)} ‖g·a − b‖` over real coordinates. The optimum aligns
/// centroids and rotates by `arg Σ conj(a_k − ā)(b_k − b̄)`.
pub fn orbit_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let n = a.len() as f64;
    let ca: Complex64 = a.iter().sum::<Complex64>() / n;
    let cb: Complex64 = b.iter().sum::<Complex64>() / n;
    let cross: Complex64 = a.iter().zip(b).map(|(a, b)| (a - ca).conj() * (b - cb)).sum();
    let rot = if cross.norm() > 0.0 { cross / cross.norm() } else { Complex64::new(1.0, 0.0) };
    a.iter()
        .zip(b)
        .map(|(a, b)| (rot * (a - ca) + cb - b).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Random configuration of `n` vortices inside the disc of radius `radius`
/// with all pairwise distances at least `min_separation`.
pub fn random_separated_state(
    rng: &mut dyn RngCore,
    n: usize,
    radius: f64,
    min_separation: f64,
) -> VortexState {
    loop {
        let z: Vec<Complex64> = (0..n)
            .map(|_| loop {
                let p = Complex64::new(rng.random_range(-radius..radius), rng.random_range(-radius..radius));
                if p.norm() <= radius {
                    break p;
                }
            })
            .collect();
        if min_pairwise_distance(&z) >= min_separation {
            return VortexState::new(z);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn g112() -> Vorticities {
        Vorticities::new(vec![1.0, 1.0, -2.0]).unwrap()
    }

    fn eq_triangle() -> Vec<Complex64> {
        vec![c(0.0, 0.0), c(1.0, 0.0), Complex64::from_polar(1.0, PI / 3.0)]
    }

    #[test]
    fn vorticities_validation() {
        assert!(Vorticities::new(vec![1.0]).is_err());
        assert!(Vorticities::new(vec![1.0, 0.0]).is_err());
        assert!(g112().total_vanishes());
        assert!(!Vorticities::new(vec![1.0, 1.0, 1.0]).unwrap().total_vanishes());
    }

    #[test]
    fn energy_examples() {
        let h = vortex_energy(&g112(), &[c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]).unwrap();
        // pair terms: Γ₁Γ₂ log 2 = log 2, Γ₁Γ₃ log 1 = 0, Γ₂Γ₃ log 1 = 0
        assert_relative_eq!(h, -(2f64.ln()) / (2.0 * PI), max_relative = 1e-14);
        assert_relative_eq!(h, -0.110_317_8, epsilon = 1e-7);
        let h = vortex_energy(&g112(), &eq_triangle()).unwrap();
        assert!(h.abs() < 1e-15);
    }

    #[test]
    fn collision_is_an_error() {
        let z = [c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        assert!(matches!(vortex_energy(&g112(), &z), Err(Error::Collision { .. })));
        assert!(vortex_field(&g112(), &z).is_err());
    }

    #[test]
    fn field_examples() {
        let v = vortex_field(&g112(), &[c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let k = 3.0 / (4.0 * PI);
        assert!((v[0] - c(0.0, -k)).norm() < 1e-15);
        assert!((v[1] - c(0.0, k)).norm() < 1e-15);
        assert!(v[2].norm() < 1e-15);

        let v = vortex_field(&g112(), &eq_triangle()).unwrap();
        let u = -(3f64.sqrt()) / (2.0 * PI);
        for vk in v {
            assert!((vk - c(u, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn field_scales_inversely() {
        let z = [c(0.3, 0.1), c(-0.7, 0.4), c(0.2, -0.9)];
        let v = vortex_field(&g112(), &z).unwrap();
        for lambda in [0.5, 2.0, 3.7] {
            let zs: Vec<_> = z.iter().map(|z| z * lambda).collect();
            let vs = vortex_field(&g112(), &zs).unwrap();
            for (a, b) in vs.iter().zip(&v) {
                assert!((a - b / lambda).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn momentum_examples() {
        let m = vortex_momentum(&g112(), &[c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]);
        assert!(m.c.norm() < 1e-15);
        assert_relative_eq!(m.r, 1.0);
        let m = vortex_momentum(&g112(), &eq_triangle());
        assert!((m.c - c(3f64.sqrt(), 0.0)).norm() < 1e-14);
        assert_relative_eq!(m.r, -0.5, max_relative = 1e-14);
        let m = vortex_momentum(&g112(), &[c(0.0, 0.0); 3]);
        assert_eq!(m, SE2Momentum::zero());
    }

    #[test]
    fn jacobian_rows() {
        let gamma = Vorticities::new(vec![1.5, -0.5, 2.0]).unwrap();
        let z = [c(0.3, 0.1), c(-0.7, 0.4), c(0.2, -0.9)];
        let j = vortex_momentum_jacobian(&gamma, &z);
        for (k, g) in gamma.as_slice().iter().enumerate() {
            assert_eq!(j[(0, 2 * k)], 0.0);
            assert_eq!(j[(0, 2 * k + 1)], -g);
            assert_eq!(j[(2, 2 * k)], g * z[k].re);
            assert_eq!(j[(2, 2 * k + 1)], g * z[k].im);
        }
    }

    #[test]
    fn generator_examples() {
        let z = [c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)];
        assert!(vortex_generator(&SE2Algebra::zero(), &z).iter().all(|v| v.norm() == 0.0));
        let v = vortex_generator(&SE2Algebra::new(c(1.0, 0.0), 0.0), &z);
        assert!(v.iter().all(|v| *v == c(1.0, 0.0)));
        let v = vortex_generator(&SE2Algebra::new(c(0.0, 0.0), 1.0), &z);
        assert_eq!(v, vec![c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.0)]);
    }

    #[test]
    fn equilateral_configuration_hits_momentum() {
        for (cv, r) in [(c(3f64.sqrt(), 0.0), -0.5), (c(0.3, -0.4), 2.0), (c(-0.1, 0.05), -1.0)] {
            let mu = SE2Momentum::new(cv, r);
            for o in [1.0, -1.0] {
                let s = equilateral_configuration(&mu, o).unwrap();
                let m = vortex_momentum(&g112(), &s.z);
                assert!(m.sub(&mu).norm() < 1e-13, "{m:?} vs {mu:?}");
                let u = cv / cv.norm();
                assert!((u.conj() * s.z[0]).re.abs() < 1e-14);
                assert_eq!(synge_classify(&s.z, SYNGE_TOL).unwrap(), Classification::Equilateral);
            }
        }
    }

    #[test]
    fn config_json_roundtrip_and_rejects_unknown() {
        let cfg: VortexConfig =
            serde_json::from_str(r#"{"gamma":[1,1,-2],"z":[[1,0],[-1,0],[0,0]]}"#).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.z[1], c(-1.0, 0.0));
        let back: VortexConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(serde_json::from_str::<VortexConfig>(r#"{"gamma":[1,1],"z":[],"w":1}"#).is_err());
        assert!(serde_json::from_str::<VortexConfig>(r#"{"gamma":[1,0],"z":[[0,0],[1,0]]}"#).is_err());
    }
}
