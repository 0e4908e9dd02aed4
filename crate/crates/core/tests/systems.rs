use std::f64::consts::PI;

use nalgebra::{DVector, Matrix3, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use releq_core::arb::{arb_generator, ArbState, ArbSystem, ElasticPotential};
use releq_core::gsystem::{
    conservation_report, cross_product_map, field_from_gradient, hamiltonian_field, integrate, openness_probe,
    GSystem, Method, ProbeConfig,
};
use releq_core::lie::SE2Element;
use releq_core::numerics::fd_gradient;
use releq_core::vortex::{
    collinear_configuration, random_separated_state, vortex_energy, vortex_momentum, VortexState, VortexSystem,
    Vorticities,
};
use releq_core::Error;

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn vortices() -> VortexSystem {
    VortexSystem::from_slice(&[1.0, 1.0, -2.0]).unwrap()
}

fn random_arb_state(rng: &mut ChaCha8Rng, q_scale: f64, p_scale: f64) -> ArbState {
    ArbState::new(
        Matrix3::identity() + Matrix3::from_fn(|_, _| q_scale * gauss(rng)),
        Matrix3::from_fn(|_, _| p_scale * gauss(rng)),
    )
}

#[test]
fn collinear_field_is_a_rotation_generator() {
    let sys = vortices();
    let x = collinear_configuration(1.0).to_vector();
    let field = hamiltonian_field(&sys, &x).unwrap();
    let gen = sys.generator(&DVector::from_vec(vec![0.0, 0.0, -3.0 / (4.0 * PI)]), &x);
    assert!((field - gen).norm() < 1e-15);
}

#[test]
fn direct_vortex_field_agrees_with_symplectic_solve() {
    let sys = vortices();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let x = random_separated_state(&mut rng, 3, 2.0, 0.2).to_vector();
        let generic = field_from_gradient(&sys.symplectic_matrix(), &sys.energy_gradient(&x).unwrap()).unwrap();
        assert!((generic - sys.hamiltonian_field(&x).unwrap()).norm() < 1e-12);
    }
}

#[test]
fn rigid_body_equilibrium_has_zero_field() {
    let sys = ArbSystem::default();
    assert_eq!(hamiltonian_field(&sys, &ArbState::identity().to_vector()).unwrap().norm(), 0.0);
}

#[test]
fn field_contracts_to_energy_differential() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let vs = vortices();
    let arb = ArbSystem::default();
    for k in 0..100 {
        let (x, s, field, grad): (DVector<f64>, _, _, _) = if k % 2 == 0 {
            let x = random_separated_state(&mut rng, 3, 2.0, 0.3).to_vector();
            let f = vs.hamiltonian_field(&x).unwrap();
            let g = fd_gradient(|y| vs.energy(y).unwrap(), &x, 1e-6);
            (x, vs.symplectic_matrix(), f, g)
        } else {
            let x = random_arb_state(&mut rng, 0.3, 1.0).to_vector();
            let f = arb.hamiltonian_field(&x).unwrap();
            let g = fd_gradient(|y| arb.energy(y).unwrap(), &x, 1e-6);
            (x, arb.symplectic_matrix(), f, g)
        };
        let v = DVector::from_fn(x.len(), |_, _| gauss(&mut rng));
        let omega = field.dot(&(&s * &v));
        let dh = grad.dot(&v);
        assert!((omega - dh).abs() <= 1e-6 * dh.abs().max(1.0), "{omega} vs {dh}");
    }
}

#[test]
fn energy_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let vs = vortices();
    for _ in 0..50 {
        let x = random_separated_state(&mut rng, 3, 2.0, 0.3).to_vector();
        let fd = fd_gradient(|y| vs.energy(y).unwrap(), &x, 1e-6);
        let g = vs.energy_gradient(&x).unwrap();
        assert!((fd - &g).norm() <= 1e-6 * g.norm().max(1.0));
    }
}

#[test]
fn energy_is_group_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let vs = vortices();
    let arb = ArbSystem::default();
    for _ in 0..100 {
        let x = random_separated_state(&mut rng, 3, 2.0, 0.1).to_vector();
        let g = vs.sample_group(&mut rng);
        assert!((vs.energy(&vs.act(&g, &x)).unwrap() - vs.energy(&x).unwrap()).abs() <= 1e-10);
        let x = random_arb_state(&mut rng, 0.3, 1.0).to_vector();
        let g = arb.sample_group(&mut rng);
        assert!((arb.energy(&arb.act(&g, &x)).unwrap() - arb.energy(&x).unwrap()).abs() <= 1e-10);
    }
}

#[test]
fn momentum_jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let vs = VortexSystem::from_slice(&[1.5, -0.3, 0.8, 2.0]).unwrap();
    for _ in 0..20 {
        let x = random_separated_state(&mut rng, 4, 2.0, 0.2).to_vector();
        let fd = releq_core::numerics::fd_jacobian(|y| vs.momentum(y), &x, 1e-6);
        assert!((fd - vs.momentum_jacobian(&x)).amax() < 1e-8);
    }
}

#[test]
fn momentum_identity_for_four_vortices() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let vs = VortexSystem::from_slice(&[1.5, -0.3, 0.8, 2.0]).unwrap();
    let s = vs.symplectic_matrix();
    for _ in 0..20 {
        let x = random_separated_state(&mut rng, 4, 2.0, 0.2).to_vector();
        for i in 0..3 {
            let mut xi = DVector::zeros(3);
            xi[i] = 1.0;
            let lhs = &s * vs.generator(&xi, &x);
            let rhs = fd_gradient(|y| vs.pairing(&vs.momentum(y), &xi), &x, 1e-6);
            assert!((&lhs - &rhs).norm() <= 1e-6 * lhs.norm().max(1.0));
        }
    }
}

#[test]
fn rigid_body_momentum_identity_under_its_pairing() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let sys = ArbSystem::default();
    let s = sys.symplectic_matrix();
    for _ in 0..20 {
        let x = random_arb_state(&mut rng, 0.3, 1.0).to_vector();
        for i in 0..6 {
            let mut xi = DVector::zeros(6);
            xi[i] = 1.0;
            let lhs = &s * sys.generator(&xi, &x);
            let rhs = fd_gradient(|y| sys.pairing(&sys.momentum(y), &xi), &x, 1e-6);
            assert!((&lhs - &rhs).norm() <= 1e-6 * lhs.norm().max(1.0));
        }
    }
}

#[test]
fn zero_steps_is_the_initial_state() {
    let sys = vortices();
    let x0 = collinear_configuration(1.0).to_vector();
    for method in [Method::Rk4, Method::ImplicitMidpoint] {
        let t = integrate(&sys, &x0, 1e-2, 0, method).unwrap();
        assert_eq!(t.states.len(), 1);
        assert_eq!(t.state(0), x0);
        let r = conservation_report(&sys, &t).unwrap();
        assert_eq!((r.max_energy_drift, r.max_momentum_drift), (0.0, 0.0));
    }
}

#[test]
fn collinear_state_rotates_rigidly() {
    let sys = vortices();
    let x0 = collinear_configuration(1.0).to_vector();
    let t = integrate(&sys, &x0, 1e-3, 1000, Method::Rk4).unwrap();
    let omega = -3.0 / (4.0 * PI);
    for (i, time) in t.times.iter().enumerate() {
        let expected = sys.act(&SE2Element::rotation(omega * time), &x0);
        assert!((t.state(i) - expected).amax() <= 1e-6);
    }
}

#[test]
fn equilateral_state_translates_uniformly() {
    let sys = vortices();
    let z = vec![
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::from_polar(1.0, PI / 3.0),
    ];
    let x0 = VortexState::new(z).to_vector();
    let t = integrate(&sys, &x0, 1e-3, 1000, Method::Rk4).unwrap();
    let u = -(3f64.sqrt()) / (2.0 * PI);
    for (i, time) in t.times.iter().enumerate() {
        let expected = sys.act(&SE2Element::translation(Complex64::new(u * time, 0.0)), &x0);
        assert!((t.state(i) - expected).amax() <= 1e-6);
    }
}

#[test]
fn midpoint_conserves_vortex_momentum_and_rk4_energy() {
    let sys = vortices();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let x0 = random_separated_state(&mut rng, 3, 1.0, 0.75).to_vector();
    let t = integrate(&sys, &x0, 1e-2, 1000, Method::ImplicitMidpoint).unwrap();
    let r = conservation_report(&sys, &t).unwrap();
    assert!(r.max_momentum_drift <= 1e-9, "{r:?}");
    let t = integrate(&sys, &x0, 1e-2, 1000, Method::Rk4).unwrap();
    let r = conservation_report(&sys, &t).unwrap();
    assert!(r.max_energy_drift <= 1e-6, "{r:?}");
}

#[test]
fn rigid_body_rk4_energy_and_midpoint_momenta() {
    let sys = ArbSystem::new(ElasticPotential::new(1.0).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x0 = random_arb_state(&mut rng, 0.1, 0.1).to_vector();
    let t = integrate(&sys, &x0, 1e-3, 1000, Method::Rk4).unwrap();
    assert!(conservation_report(&sys, &t).unwrap().max_energy_drift <= 1e-8);
    let t = integrate(&sys, &x0, 1e-2, 1000, Method::ImplicitMidpoint).unwrap();
    assert!(conservation_report(&sys, &t).unwrap().max_momentum_drift <= 1e-9);
    for i in 0..t.states.len() {
        assert!(ArbState::from_vector(&t.state(i)).q.determinant() > 0.0);
    }
}

#[test]
fn integrator_orders() {
    let sys = vortices();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x0 = random_separated_state(&mut rng, 3, 1.0, 0.75).to_vector();
    let reference = integrate(&sys, &x0, 1e-4, 10_000, Method::Rk4).unwrap().last();
    for (method, min_order) in [(Method::Rk4, 3.5), (Method::ImplicitMidpoint, 1.8)] {
        let err = |dt: f64| {
            let steps = (1.0 / dt).round() as usize;
            (integrate(&sys, &x0, dt, steps, method).unwrap().last() - &reference).norm()
        };
        let (e1, e2) = (err(0.02), err(0.01));
        let order = (e1 / e2).log2();
        assert!(order >= min_order, "{method:?}: observed order {order}");
    }
}

#[test]
fn collisions_abort_integration() {
    let sys = VortexSystem::from_slice(&[1.0, -1.0]).unwrap();
    let x0 = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0]);
    assert!(matches!(integrate(&sys, &x0, 1e-2, 10, Method::Rk4), Err(Error::Collision { .. })));
    assert!(matches!(
        integrate(&sys, &DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0]), -1.0, 10, Method::Rk4),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn collinear_law() {
    let gamma = Vorticities::new(vec![1.0, 1.0, -2.0]).unwrap();
    for a in [0.3, 1.0, 2.5] {
        let z = collinear_configuration(a).z;
        let m = vortex_momentum(&gamma, &z);
        assert!(m.c.norm() < 1e-15);
        assert!((m.r - a * a).abs() <= 1e-12 * a * a);
        let e = (2.0 * PI * vortex_energy(&gamma, &z).unwrap()).exp();
        assert!((e - a.powi(3) / 2.0).abs() <= 1e-10 * e);
    }
}

#[test]
fn diagonal_generator_fixes_identity() {
    let e = Vector3::z();
    assert_eq!(arb_generator(&e, &e, &ArbState::identity()).to_vector().norm(), 0.0);
    assert_eq!(arb_generator(&Vector3::zeros(), &Vector3::zeros(), &ArbState::identity()).to_vector().norm(), 0.0);
}

#[test]
fn probe_examples() {
    let center = DVector::from_vec(vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    let config = ProbeConfig {
        delta: 0.05,
        samples: 20_000,
        tol: 1e-3,
        seed: 1,
        group_saturate: false,
    };
    let targets = [DVector::from_vec(vec![0.01, 0.0, 0.0]), DVector::zeros(3)];
    let r = openness_probe(cross_product_map, &center, &targets, &config, None).unwrap();
    assert!(r.outcomes[0].min_distance >= 0.0075);
    assert!(!r.outcomes[0].hit);
    assert!(r.outcomes[1].hit);
    let again = openness_probe(cross_product_map, &center, &targets, &config, None).unwrap();
    assert_eq!(r, again);
}

#[test]
fn random_states_respect_separation() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let n = rng.random_range(2..6);
        let s = random_separated_state(&mut rng, n, 2.0, 0.3);
        assert!(s.min_pairwise_distance() >= 0.3);
    }
}
