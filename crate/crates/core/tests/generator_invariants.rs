use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use obe_steady::gobe::{build_liouvillian, integrate_until, numeric_steady_state, IntegratorConfig};
use obe_steady::operators::{coupling_operator, max_abs, max_abs_diff};
use obe_steady::steadystate::dark_subspace;
use obe_steady::{classify, AngularMomentum, DensityMatrix, FieldParams, Frame, Polarization, TransitionSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec(g: u32, e: u32) -> TransitionSpec {
    classify(AngularMomentum::from_twice(g), AngularMomentum::from_twice(e)).unwrap()
}

fn random_ground_state(rng: &mut ChaCha8Rng, ng: usize, ne: usize) -> DensityMatrix {
    let a = DMatrix::from_fn(ng, ng, |_, _| {
        C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let m = &a * a.adjoint();
    let tr = m.trace();
    let mut rho = DensityMatrix::zeros(ng, ne);
    rho.rho_gg = m / tr;
    rho
}

#[test]
fn class_a_relaxes_into_dark_subspace() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (g, e, eps) in [(2, 0, 0.3), (3, 1, 0.5), (4, 2, 0.2)] {
        let sp = spec(g, e);
        let p = Polarization::from_ellipticity(eps, Frame::Conventional).unwrap();
        let f = FieldParams::from_saturation(2.0, 0.7, 1.0).unwrap();
        let l = build_liouvillian(&sp, &p, &f).unwrap();
        let proj = dark_subspace(&sp, &p).unwrap().projector();
        let q = DMatrix::<C>::identity(sp.n_g(), sp.n_g()) - proj;
        let cfg = IntegratorConfig {
            dt: 0.002,
            t_end: 100.0,
            tolerance: 1e-10,
        };
        for _ in 0..5 {
            let rho0 = random_ground_state(&mut rng, sp.n_g(), sp.n_e());
            let out = integrate_until(&l, &rho0, &cfg, 1e4).unwrap();
            let bright = &q * &out.rho.rho_gg * &q;
            assert!(max_abs(&bright) <= 1e-8, "{g}->{e}: {}", max_abs(&bright));
            assert!(out.rho.excited_population() <= 1e-8);
            assert!(out.trace_drift < 1e-10);
        }
    }
}

#[test]
fn generator_spectrum_is_stable() {
    for (g, e) in [(1, 1), (2, 4), (3, 3), (4, 2), (3, 5)] {
        let sp = spec(g, e);
        for eps in [0.0, 0.4, std::f64::consts::FRAC_PI_4] {
            let p = Polarization::from_ellipticity(eps, Frame::Conventional).unwrap();
            let f = FieldParams::from_saturation(3.0, -1.5, 1.0).unwrap();
            let l = build_liouvillian(&sp, &p, &f).unwrap();
            let ev = l.eigenvalues().unwrap();
            let top = ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            assert!(top <= 1e-12, "{g}->{e} eps={eps}: {top}");
        }
    }
}

#[test]
fn null_vector_coherences_follow_populations() {
    for (g, e) in [(1, 1), (1, 3), (2, 4), (3, 3), (4, 6)] {
        let sp = spec(g, e);
        for (eps, s, d) in [(0.1, 0.3, 0.0), (0.5, 4.0, -2.0), (0.7, 20.0, 5.0)] {
            let p = Polarization::from_ellipticity(eps, Frame::Conventional).unwrap();
            let f = FieldParams::from_saturation(s, d, 1.0).unwrap();
            let l = build_liouvillian(&sp, &p, &f).unwrap();
            let rho = numeric_steady_state(&l).unwrap();
            let v = coupling_operator(sp.jg, sp.je, p.vector()).unwrap();
            let expect = (&v * &rho.rho_gg - &rho.rho_ee * &v) * f.coherence_factor();
            assert!(max_abs_diff(&rho.rho_eg, &expect) <= 1e-10, "{g}->{e}");
        }
    }
}
