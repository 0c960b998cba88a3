//! Validation of the high-resolution derivative oracle against closed forms.

mod common;

use calabi_core::curvature::sample_from;
use calabi_core::potential::Domain;
use calabi_core::{AdmissibleClass, DelzantPolytope, DerivativeProvider, SymplecticPotential};
use common::*;

fn triangle() -> DelzantPolytope {
    DelzantPolytope::standard_triangle()
}

#[test]
fn extrapolated_jet_is_exact_on_quartics() {
    let c = calabi_core::Correction::polynomial(&[(0.3, 3, 0), (-0.2, 1, 2), (0.1, 2, 2), (0.4, 0, 4), (0.05, 1, 0)]);
    let f = |x| c.value(x);
    let x = [0.2, -0.4];
    let jet = oracle_correction_jet(&f, x, 0.1);
    let exact = c.jet(x);
    for a in 0..5 {
        for b in 0..5 - a {
            assert!((jet.d[a][b] - exact.d[a][b]).abs() < 1e-8, "∂^({a},{b})");
        }
    }
}

#[test]
fn oracle_matches_closed_form_jets() {
    let p = triangle();
    let mut rng = rng(7);
    for _ in 0..10 {
        let c = random_correction(&mut rng, &p, 0.05);
        let f = |x| c.value(x);
        let x = random_interior_point(&mut rng, &p, 0.05);
        let jet = oracle_correction_jet(&f, x, ORACLE_H);
        let exact = c.jet(x);
        for a in 0..5 {
            for b in 0..5 - a {
                let err = (jet.d[a][b] - exact.d[a][b]).abs();
                assert!(err < 1e-6, "∂^({a},{b}) at {x:?}: {err:e}");
            }
        }
    }
}

#[test]
fn richardson_gains_two_orders() {
    let c = calabi_core::Correction::Gaussian { amplitude: 0.1, center: [0.1, 0.2], width: 0.5 };
    let f = |x| c.value(x);
    let x = [-0.2, 0.3];
    let exact = c.jet(x).d[2][2];
    let plain = (central_jet(&f, x, 0.02).d[2][2] - exact).abs();
    let halved = (central_jet(&f, x, 0.01).d[2][2] - exact).abs();
    let extrapolated = (oracle_correction_jet(&f, x, 0.02).d[2][2] - exact).abs();
    let ratio = plain / halved;
    assert!((3.5..4.5).contains(&ratio), "{ratio}");
    assert!(extrapolated < 0.05 * halved, "{extrapolated:e} vs {halved:e}");
}

#[test]
fn oracle_inverse_jet_matches_library_chain_rule() {
    let p = triangle();
    let domain = Domain::new(&p, 16, 3.0 / 32.0).unwrap();
    let mut rng = rng(11);
    let cls = AdmissibleClass::curve([1.0, 1.0], 12.0, -1.0, -2);
    for _ in 0..10 {
        let c = random_correction(&mut rng, &p, 0.05);
        let u = SymplecticPotential::from_correction(domain.clone(), c.clone(), DerivativeProvider::Analytic);
        let x = random_interior_point(&mut rng, &p, 0.1);
        let lib = sample_from(&u.inverse_hessian_jet_at(x).unwrap(), &cls).unwrap();
        let ora = sample_from(&oracle_jet(&p, &|y| c.value(y), x), &cls).unwrap();
        for (name, a, b) in [
            ("r_fiber", lib.r_fiber, ora.r_fiber),
            ("r_weighted", lib.r_weighted, ora.r_weighted),
            ("rm2_fiber", lib.rm2_fiber, ora.rm2_fiber),
            ("rm2_total", lib.rm2_total, ora.rm2_total),
        ] {
            assert!((a - b).abs() <= 1e-5 * b.abs().max(1.0), "{name} at {x:?}: {a} vs {b}");
        }
    }
}

#[test]
fn oracle_reproduces_fubini_study() {
    let p = triangle();
    let mut rng = rng(3);
    for _ in 0..20 {
        let x = random_interior_point(&mut rng, &p, 0.02);
        let s = sample_from(&oracle_jet(&p, &|_| 0.0, x), &AdmissibleClass::trivial()).unwrap();
        assert!((s.r_fiber - 4.0).abs() < 1e-9);
        assert!((s.rm2_fiber - 4.0 / 3.0).abs() < 1e-9);
    }
}
