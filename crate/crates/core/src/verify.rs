//! Verification matrix: analytic results against the GOBE oracle, dark-state
//! residuals, invariant-algebra identities and the published properties.

use std::f64::consts::FRAC_PI_4;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angular::{cg_twice, triangle, wigner6j_twice, AngularMomentum};
use crate::error::Result;
use crate::gobe::{build_liouvillian, numeric_steady_state, phase_diffusion_average, thread_pool, EnsembleConfig};
use crate::operators::{
    coupling_operator, leading_coefficient_ratio, max_abs, max_abs_diff, v_l_operator_with, v_l_scaled, x_by_expansion,
    CMat,
};
use crate::polarization::{couple_with, spherical_harmonic_with, CgFn, ComplexVector3, Frame, Polarization};
use crate::steadystate::{
    branching_matrix, broadband_steady_state, classify, dark_overlap_formula, dark_subspace, light_shift_commutators,
    scan_row, steady_state, FieldParams, TransitionClass, TransitionSpec,
};

type C = Complex64;

/// Ellipticities of the verification grid.
pub const EPSILON_GRID: [f64; 5] = [
    0.0,
    FRAC_PI_4 / 4.0,
    FRAC_PI_4 / 2.0,
    3.0 * FRAC_PI_4 / 4.0,
    FRAC_PI_4 - 1e-3,
];
/// Saturation parameters of the verification grid.
pub const SATURATION_GRID: [f64; 5] = [0.01, 0.3, 1.0, 10.0, 1e3];
/// Detunings in units of `gamma`.
pub const DETUNING_GRID: [f64; 4] = [-5.0, 0.0, 0.7, 5.0];

/// Result of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    /// Largest deviation seen (or the failing margin for property checks).
    pub worst: f64,
    pub tolerance: f64,
    pub cases: usize,
    pub detail: String,
}

impl CheckOutcome {
    fn new(id: u32, name: &str, worst: f64, tolerance: f64, cases: usize, detail: String) -> Self {
        Self {
            id,
            name: name.to_string(),
            passed: worst.is_finite() && worst <= tolerance,
            worst,
            tolerance,
            cases,
            detail,
        }
    }

    fn failed(id: u32, name: &str, tolerance: f64, detail: String) -> Self {
        Self {
            id,
            name: name.to_string(),
            passed: false,
            worst: f64::INFINITY,
            tolerance,
            cases: 0,
            detail,
        }
    }
}

/// Settings for [`run_all`].
#[derive(Debug, Clone, Copy)]
pub struct VerifyConfig {
    /// Largest `2J` for the oracle grid.
    pub max_two_j: u32,
    /// Largest `2J` for dark-state residuals.
    pub dark_max_two_j: u32,
    /// Oracle tolerance on `max |rho_analytic - rho_numeric|`.
    pub tolerance: f64,
    pub seed: u64,
    pub ensemble: EnsembleConfig,
    /// Clebsch-Gordan routine used by the identity suite.
    pub cg: CgFn,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            max_two_j: 8,
            dark_max_two_j: 16,
            tolerance: 1e-8,
            seed: 0,
            ensemble: EnsembleConfig {
                realizations: 400,
                dt: 0.01,
                burn_in: 100.0,
                t_average: 100.0,
                seed: 0,
            },
            cg: cg_twice,
        }
    }
}

/// All allowed transitions with `2Jg, 2Je <= max_two_j`.
pub fn transitions(max_two_j: u32) -> Vec<TransitionSpec> {
    let mut out = Vec::new();
    for g in 0..=max_two_j {
        for e in [g.wrapping_sub(2), g, g + 2] {
            if e > max_two_j || (g == 0 && e == 0) {
                continue;
            }
            if let Ok(sp) = classify(AngularMomentum::from_twice(g), AngularMomentum::from_twice(e)) {
                out.push(sp);
            }
        }
    }
    out
}

fn pol(eps: f64) -> Result<Polarization> {
    Polarization::from_ellipticity(eps, Frame::Conventional)
}

fn field(s: f64, delta: f64) -> Result<FieldParams> {
    FieldParams::from_saturation(s, delta, 1.0)
}

fn field_grid() -> Vec<(f64, f64, f64)> {
    let mut g = Vec::new();
    for &eps in &EPSILON_GRID {
        for &s in &SATURATION_GRID {
            for &d in &DETUNING_GRID {
                g.push((eps, s, d));
            }
        }
    }
    g
}

/// Reduces `(worst, cases)` pairs, keeping the first error.
fn fold_cases(results: Vec<Result<(f64, usize, String)>>) -> Result<(f64, usize, String)> {
    let mut worst = 0.0f64;
    let mut cases = 0;
    let mut at = String::new();
    for r in results {
        let (w, n, label) = r?;
        cases += n;
        if !(w <= worst) {
            worst = w;
            at = label;
        }
    }
    Ok((worst, cases, at))
}

fn finish(id: u32, name: &str, tol: f64, r: Result<(f64, usize, String)>) -> CheckOutcome {
    match r {
        Ok((w, n, at)) => CheckOutcome::new(id, name, w, tol, n, format!("worst at {at}")),
        Err(e) => CheckOutcome::failed(id, name, tol, e.to_string()),
    }
}

fn label(sp: &TransitionSpec, eps: f64, s: f64, d: f64) -> String {
    format!("{}->{} eps={eps:.4} S={s} delta={d}", sp.jg, sp.je)
}

/// Analytic steady state against the Liouvillian null vector; class a via null dark projectors.
pub fn check_oracle(max_two_j: u32, tol: f64) -> CheckOutcome {
    let name = "oracle equivalence";
    let cases: Vec<(TransitionSpec, (f64, f64, f64))> = transitions(max_two_j)
        .into_iter()
        .flat_map(|sp| field_grid().into_iter().map(move |f| (sp, f)))
        .collect();
    let one = |(sp, (eps, s, d)): &(TransitionSpec, (f64, f64, f64))| -> Result<(f64, usize, String)> {
        let p = pol(*eps)?;
        let f = field(*s, *d)?;
        let l = build_liouvillian(sp, &p, &f)?;
        let diff = if sp.class == TransitionClass::DarkTwoDim {
            let dark = dark_subspace(sp, &p)?;
            let n = sp.n_g() + sp.n_e();
            let mut worst = 0.0f64;
            for a in &dark.basis {
                for b in &dark.basis {
                    let mut rho = CMat::zeros(n, n);
                    rho.view_mut((0, 0), (sp.n_g(), sp.n_g())).copy_from(&(a * b.adjoint()));
                    worst = worst.max(max_abs(&l.apply(&rho)));
                }
            }
            worst
        } else {
            let num = numeric_steady_state(&l)?;
            let ana = steady_state(sp, &p, &f)?;
            num.max_abs_diff(&ana.rho)
        };
        Ok((diff, 1, label(sp, *eps, *s, *d)))
    };
    let r = thread_pool().and_then(|pool| pool.install(|| fold_cases(cases.par_iter().map(one).collect())));
    finish(1, name, tol, r)
}

/// Six-point ellipticity grid reaching circular polarization.
pub const DARK_EPSILON_GRID: [f64; 6] = [
    0.0,
    FRAC_PI_4 / 4.0,
    FRAC_PI_4 / 2.0,
    3.0 * FRAC_PI_4 / 4.0,
    FRAC_PI_4 - 1e-3,
    FRAC_PI_4,
];

/// `|V psi|` for class b and both class-a dark states, and the class-a overlap law.
pub fn check_dark_residuals(dark_max_two_j: u32) -> (CheckOutcome, CheckOutcome) {
    let mut res = Ok((0.0f64, 0usize, String::new()));
    let mut ov = Ok((0.0f64, 0usize, String::new()));
    let mut run = || -> Result<()> {
        for tj in 1..=dark_max_two_j {
            let j = AngularMomentum::from_twice(tj);
            let mut specs = Vec::new();
            if tj % 2 == 0 {
                specs.push(classify(j, j));
            }
            if tj >= 2 {
                specs.push(classify(j, AngularMomentum::from_twice(tj - 2)));
            }
            for sp in specs {
                let sp = sp?;
                for &eps in &DARK_EPSILON_GRID {
                    let p = pol(eps)?;
                    let v = coupling_operator(sp.jg, sp.je, p.vector())?;
                    let d = dark_subspace(&sp, &p)?;
                    let mut states: Vec<DVector<C>> = d.basis.clone();
                    if let Some((a, b)) = &d.coherent_pair {
                        states.push(a.clone());
                        states.push(b.clone());
                    }
                    let lab = format!("{}->{} eps={eps:.4}", sp.jg, sp.je);
                    for psi in &states {
                        let r = (&v * psi).norm() / psi.norm();
                        if let Ok((w, n, at)) = res.as_mut() {
                            *n += 1;
                            if !(r <= *w) {
                                *w = r;
                                *at = lab.clone();
                            }
                        }
                    }
                    if let Some((a, b)) = &d.coherent_pair {
                        let direct = a.dotc(b).norm() / (a.norm() * b.norm());
                        let e = p.vector();
                        let x = e.dot(e).norm() / e.norm_sqr();
                        let dev = (direct - dark_overlap_formula(j, x)).abs();
                        if let Ok((w, n, at)) = ov.as_mut() {
                            *n += 1;
                            if !(dev <= *w) {
                                *w = dev;
                                *at = lab.clone();
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    };
    if let Err(e) = run() {
        res = Err(e.clone());
        ov = Err(e);
    }
    (
        finish(2, "dark-state residual |V psi|", 1e-12, res),
        finish(2, "class-a dark-state overlap", 1e-10, ov),
    )
}

/// Leading coefficient ratio at `J = 4` and the single-term truncation of `X`.
pub fn check_truncation() -> (CheckOutcome, CheckOutcome) {
    let j = AngularMomentum::from_twice(8);
    let ratio = leading_coefficient_ratio(j);
    let first = CheckOutcome::new(
        3,
        "leading coefficient ratio 13.3",
        (ratio - 13.3).abs(),
        0.1,
        1,
        format!("C_2J/C_2J-2 = {ratio:.6}"),
    );
    let run = || -> Result<(f64, usize, String)> {
        let sp = classify(j, AngularMomentum::from_twice(10))?;
        let mut worst = 0.0f64;
        let mut at = String::new();
        let mut n = 0;
        for &eps in &EPSILON_GRID {
            let p = pol(eps)?;
            let e = p.vector();
            let w = v_l_scaled(sp.je, sp.jg, 9, e);
            let aa = e.dot(e);
            let w = w * aa.sqrt().powi(-9);
            let a1: f64 = w.iter().map(|z| z.norm_sqr()).sum();
            let x_full = x_by_expansion(j, e, None)?;
            let x_one = x_by_expansion(j, e, Some(1))?;
            let a0_full: f64 = x_full.iter().map(|z| z.norm_sqr()).sum();
            let a0_one: f64 = x_one.iter().map(|z| z.norm_sqr()).sum();
            for &s in &SATURATION_GRID {
                let pe = |a0: f64| s * a1 / (a0 + 2.0 * s * a1);
                let rel = (pe(a0_one) - pe(a0_full)).abs() / pe(a0_full);
                n += 1;
                if rel > worst {
                    worst = rel;
                    at = format!("eps={eps:.4} S={s}");
                }
            }
        }
        Ok((worst, n, at))
    };
    (first, finish(3, "single-term X changes pi_e by < 1%", 0.01, run()))
}

/// `rho_ee` proportional to the identity for half-integer `J -> J`.
pub fn check_isotropy() -> CheckOutcome {
    let run = || -> Result<(f64, usize, String)> {
        let mut all = Vec::new();
        for tj in [1u32, 3, 5, 7, 9] {
            let j = AngularMomentum::from_twice(tj);
            let sp = classify(j, j)?;
            for (eps, s, d) in field_grid() {
                let r = steady_state(&sp, &pol(eps)?, &field(s, d)?)?;
                let ee = &r.rho.rho_ee;
                let mut dev = 0.0f64;
                for a in 0..ee.nrows() {
                    for b in 0..ee.ncols() {
                        let t = if a == b { ee[(a, a)] - ee[(0, 0)] } else { ee[(a, b)] };
                        dev = dev.max(t.norm());
                    }
                }
                all.push(Ok((dev, 1, label(&sp, eps, s, d))));
            }
        }
        fold_cases(all)
    };
    finish(4, "class-c excited-state isotropy", 1e-10, run())
}

/// `[rho_gg, E_g] = [rho_ee, E_e] = 0` with the light-shift operators.
pub fn check_commutators(max_two_j: u32) -> CheckOutcome {
    let run = || -> Result<(f64, usize, String)> {
        let mut all = Vec::new();
        for sp in transitions(max_two_j) {
            if sp.class == TransitionClass::DarkTwoDim {
                continue;
            }
            for (eps, s, d) in field_grid() {
                let p = pol(eps)?;
                let r = steady_state(&sp, &p, &field(s, d)?)?;
                let v = coupling_operator(sp.jg, sp.je, p.vector())?;
                let (cg, ce) = light_shift_commutators(&v, &r.rho, d, s)?;
                all.push(Ok((cg.max(ce), 1, label(&sp, eps, s, d))));
            }
        }
        fold_cases(all)
    };
    finish(5, "light-shift commutators", 1e-10, run())
}

/// `0 -> 1`: `pi_e = S/(1+2S)` for every polarization.
pub fn check_two_level() -> CheckOutcome {
    let run = || -> Result<(f64, usize, String)> {
        let sp = classify(AngularMomentum::from_twice(0), AngularMomentum::from_twice(2))?;
        let mut all = Vec::new();
        for &eps in &DARK_EPSILON_GRID {
            for &s in &SATURATION_GRID {
                for &d in &DETUNING_GRID {
                    let r = steady_state(&sp, &pol(eps)?, &field(s, d)?)?;
                    let exact = s / (1.0 + 2.0 * s);
                    all.push(Ok(((r.pi_e - exact).abs(), 1, label(&sp, eps, s, d))));
                }
            }
        }
        fold_cases(all)
    };
    finish(6, "two-level limit pi_e = S/(1+2S)", 1e-12, run())
}

/// Normalized low-saturation absorption curves of half-integer `J -> J` and `J -> J+1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanCurve {
    pub two_j: u32,
    pub class: TransitionClass,
    pub epsilon: Vec<f64>,
    pub normalized: Vec<f64>,
}

/// Uniform ellipticity grid on `[0, pi/4]`.
pub fn scan_grid(points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| FRAC_PI_4 * i as f64 / (points - 1) as f64)
        .collect()
}

pub fn scan_curves(points: usize) -> Result<Vec<ScanCurve>> {
    let grid = scan_grid(points);
    let mut out = Vec::new();
    let mut add = |tg: u32, te: u32| -> Result<()> {
        let sp = classify(AngularMomentum::from_twice(tg), AngularMomentum::from_twice(te))?;
        let rows = grid
            .iter()
            .map(|&e| scan_row(&sp, e, 1e-3))
            .collect::<Result<Vec<_>>>()?;
        out.push(ScanCurve {
            two_j: tg,
            class: sp.class,
            epsilon: grid.clone(),
            normalized: rows.iter().map(|r| r.pi_e_normalized).collect(),
        });
        Ok(())
    };
    for tj in [1, 3, 5, 7, 9] {
        add(tj, tj)?;
    }
    for tj in 0..=8 {
        add(tj, tj + 2)?;
    }
    Ok(out)
}

/// Shape of the ellipticity curves: bounds, monotonicity, ordering in `J`, circular limit.
pub fn check_scan() -> CheckOutcome {
    const SLACK: f64 = 1e-12;
    let run = || -> Result<(f64, usize, String)> {
        let curves = scan_curves(33)?;
        let mut worst = 0.0f64;
        let mut at = String::new();
        let mut n = 0;
        let mut note = |v: f64, what: String| {
            n += 1;
            if v > worst {
                worst = v;
                at = what;
            }
        };
        for class in [TransitionClass::NoDarkHalfInt, TransitionClass::NoDarkPlus] {
            let cs: Vec<&ScanCurve> = curves.iter().filter(|c| c.class == class).collect();
            // +1 where the curve should rise with eps or with J
            let dir = if class == TransitionClass::NoDarkPlus {
                1.0
            } else {
                -1.0
            };
            for c in &cs {
                for (i, &y) in c.normalized.iter().enumerate() {
                    // above (class d) or below (class c) the unpolarized value
                    note(
                        (dir * (1.0 - y)).max(0.0) - SLACK,
                        format!("2J={} bound at i={i}", c.two_j),
                    );
                    if i > 0 {
                        let step = dir * (c.normalized[i - 1] - y);
                        note(step.max(0.0) - SLACK, format!("2J={} monotonic at i={i}", c.two_j));
                    }
                }
                if class == TransitionClass::NoDarkHalfInt {
                    let last = *c.normalized.last().unwrap();
                    note(last.abs() - 1e-10, format!("2J={} circular limit {last:e}", c.two_j));
                }
            }
            for pair in cs.windows(2) {
                for i in 0..pair[0].normalized.len() {
                    let step = dir * (pair[0].normalized[i] - pair[1].normalized[i]);
                    note(
                        step.max(0.0) - SLACK,
                        format!("order 2J={}..{} at i={i}", pair[0].two_j, pair[1].two_j),
                    );
                }
            }
        }
        Ok((worst.max(0.0), n, at))
    };
    finish(7, "ellipticity scan shape", 0.0, run())
}

/// Zero bandwidth reproduces the monochromatic state.
pub fn check_broadband_zero(max_two_j: u32) -> CheckOutcome {
    let run = || -> Result<(f64, usize, String)> {
        let mut all = Vec::new();
        for sp in transitions(max_two_j) {
            if sp.class == TransitionClass::DarkTwoDim {
                continue;
            }
            for (eps, s, d) in field_grid() {
                let p = pol(eps)?;
                let f = field(s, d)?;
                let mono = steady_state(&sp, &p, &f)?;
                let bb = broadband_steady_state(&sp, &p, &f)?;
                let coh = &mono.rho.rho_eg * f.rabi.conj();
                let dev = max_abs_diff(&bb.rho_gg, &mono.rho.rho_gg)
                    .max(max_abs_diff(&bb.rho_ee, &mono.rho.rho_ee))
                    .max(max_abs_diff(&bb.coherence, &coh));
                all.push(Ok((dev, 1, label(&sp, eps, s, d))));
            }
        }
        fold_cases(all)
    };
    finish(8, "broadband at zero bandwidth", 1e-10, run())
}

/// Phase-diffusion ensemble against the `S -> 2R/gamma` replacement, in standard errors.
pub fn check_broadband_ensemble(cfg: &EnsembleConfig) -> CheckOutcome {
    let run = || -> Result<(f64, usize, String)> {
        let mut worst = 0.0f64;
        let mut at = String::new();
        let mut n = 0;
        for (tg, te) in [(0u32, 2u32), (1, 1)] {
            let sp = classify(AngularMomentum::from_twice(tg), AngularMomentum::from_twice(te))?;
            let p = pol(FRAC_PI_4 / 2.0)?;
            let mono = field(1.0, 0.5)?;
            let f = FieldParams::new(mono.rabi, mono.detuning, 1.0, 1.0)?;
            let det = broadband_steady_state(&sp, &p, &f)?;
            let mc = phase_diffusion_average(&sp, &p, &f, cfg)?;
            let z = (mc.pi_e - det.pi_e).abs() / mc.pi_e_stderr;
            n += 1;
            if z > worst {
                worst = z;
                at = format!("{}->{} pi_e mc={:.6} det={:.6}", sp.jg, sp.je, mc.pi_e, det.pi_e);
            }
        }
        Ok((worst, n, at))
    };
    finish(8, "phase-diffusion ensemble within 3 sigma", 3.0, run())
}

fn random_vector(rng: &mut ChaCha8Rng) -> ComplexVector3 {
    let mut g = || C::new(StandardNormal.sample(rng), StandardNormal.sample(rng));
    ComplexVector3::from_cartesian([g(), g(), g()])
}

fn am(two: u32) -> AngularMomentum {
    AngularMomentum::from_twice(two)
}

fn parity(k: i64) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

fn rel_diff(a: &CMat, b: &CMat) -> f64 {
    max_abs_diff(a, b) / max_abs(a).max(max_abs(b)).max(1.0)
}

/// One identity at one vector pair: returns the relative deviation.
type Identity = dyn Fn(&ComplexVector3, &ComplexVector3, CgFn) -> Result<f64> + Sync;

const MAX_TWO_J: u32 = 5;
const MAX_RANK: u32 = 3;

fn vl(ja: u32, jb: u32, l: u32, a: &ComplexVector3, cg: CgFn) -> Result<CMat> {
    Ok(v_l_operator_with(am(ja), am(jb), l as usize, a, cg)?.matrix)
}

fn product_triples() -> Vec<(u32, u32, u32, u32, u32)> {
    let mut out = Vec::new();
    for ja in 0..=MAX_TWO_J {
        for jb in 0..=MAX_TWO_J {
            for jc in 0..=MAX_TWO_J {
                for l1 in 0..=MAX_RANK {
                    for l2 in 0..=MAX_RANK {
                        if triangle(ja, jb, 2 * l1) && triangle(jb, jc, 2 * l2) {
                            out.push((ja, jb, jc, l1, l2));
                        }
                    }
                }
            }
        }
    }
    out
}

fn general_product(a: &ComplexVector3, b: &ComplexVector3, cg: CgFn) -> Result<f64> {
    let mut worst = 0.0f64;
    for (ja, jb, jc, l1, l2) in product_triples() {
        let lhs = vl(ja, jb, l1, a, cg)? * vl(jb, jc, l2, b, cg)?;
        let n1 = spherical_harmonic_with(a, l1 as usize, cg)?;
        let n2 = spherical_harmonic_with(b, l2 as usize, cg)?;
        let mut rhs = CMat::zeros(lhs.nrows(), lhs.ncols());
        for k in l1.abs_diff(l2)..=l1 + l2 {
            let sixj = wigner6j_twice([2 * k, 2 * l1, 2 * l2, jb, jc, ja]);
            if sixj == 0.0 {
                continue;
            }
            let f = parity(((ja + jc) / 2 + l1 + l2) as i64) * (((2 * l1 + 1) * (2 * l2 + 1)) as f64).sqrt() * sixj;
            let t = couple_with(&n1, &n2, 2 * k, cg);
            rhs += crate::operators::contract_tensor_with(am(ja), am(jc), &t, cg) * C::new(f, 0.0);
        }
        worst = worst.max(rel_diff(&lhs, &rhs));
    }
    Ok(worst)
}

fn coincident_product(a: &ComplexVector3, _b: &ComplexVector3, cg: CgFn) -> Result<f64> {
    let mut worst = 0.0f64;
    for (ja, jb, jc, l1, l2) in product_triples() {
        let lhs = vl(ja, jb, l1, a, cg)? * vl(jb, jc, l2, a, cg)?;
        let mut rhs = CMat::zeros(lhs.nrows(), lhs.ncols());
        for k in l1.abs_diff(l2)..=l1 + l2 {
            let sixj = wigner6j_twice([2 * k, 2 * l1, 2 * l2, jb, jc, ja]);
            let c = cg(2 * l1, 0, 2 * l2, 0, 2 * k, 0);
            if sixj == 0.0 || c == 0.0 || !triangle(ja, jc, 2 * k) {
                continue;
            }
            let f = parity(((ja + jc) / 2 + l1 + l2) as i64) * (((2 * l1 + 1) * (2 * l2 + 1)) as f64).sqrt() * c * sixj;
            rhs += vl(ja, jc, k, a, cg)? * C::new(f, 0.0);
        }
        worst = worst.max(rel_diff(&lhs, &rhs));
    }
    Ok(worst)
}

fn rank_swap(a: &ComplexVector3, _b: &ComplexVector3, cg: CgFn) -> Result<f64> {
    let mut worst = 0.0f64;
    for ja in 0..=MAX_TWO_J {
        for jb in 0..=MAX_TWO_J {
            for l1 in 0..=MAX_RANK {
                for l2 in 0..=MAX_RANK {
                    if !(triangle(ja, jb, 2 * l1) && triangle(ja, jb, 2 * l2)) {
                        continue;
                    }
                    let lhs = vl(ja, jb, l1, a, cg)? * vl(jb, ja, l2, a, cg)?;
                    let rhs = vl(ja, jb, l2, a, cg)? * vl(jb, ja, l1, a, cg)?;
                    worst = worst.max(rel_diff(&lhs, &rhs));
                }
            }
        }
    }
    Ok(worst)
}

fn same_j(a: &ComplexVector3, b: &ComplexVector3, cg: CgFn) -> Result<f64> {
    let mut worst = 0.0f64;
    for j in 1..=MAX_TWO_J {
        let lhs = vl(j, j, 1, b, cg)? * vl(j, j, 0, a, cg)?;
        let rhs = vl(j, j, 0, a, cg)? * vl(j, j, 1, b, cg)?;
        worst = worst.max(rel_diff(&lhs, &rhs));
    }
    Ok(worst)
}

fn raising(a: &ComplexVector3, b: &ComplexVector3, cg: CgFn) -> Result<f64> {
    let mut worst = 0.0f64;
    for g in 0..=MAX_TWO_J - 2 {
        let (e, l) = (g + 2, g + 1);
        let lhs = vl(g, e, 1, a, cg)? * vl(e, g, l, b, cg)?;
        let rhs = vl(g, e, l, b, cg)? * vl(e, g, 1, a, cg)?;
        worst = worst.max(rel_diff(&lhs, &rhs));
    }
    Ok(worst)
}

fn lowering(a: &ComplexVector3, b: &ComplexVector3, cg: CgFn) -> Result<f64> {
    let mut worst = 0.0f64;
    for g in 2..=MAX_TWO_J {
        let (e, l) = (g - 2, g - 1);
        let lhs = vl(e, g, 1, a, cg)? * vl(g, e, l, b, cg)?;
        let rhs = vl(e, g, l, b, cg)? * vl(g, e, 1, a, cg)?;
        worst = worst.max(rel_diff(&lhs, &rhs));
    }
    Ok(worst)
}

/// Names of the invariant-algebra identities in suite order.
pub const IDENTITY_NAMES: [&str; 6] = [
    "general product expansion",
    "coincident-argument expansion",
    "rank exchange V_L1 V_L2 = V_L2 V_L1",
    "J -> J exchange",
    "J -> J+1 exchange",
    "J -> J-1 exchange",
];

/// Product identities of the `V_L` operators at `pairs` random complex vector pairs.
pub fn check_identities(pairs: usize, seed: u64, cg: CgFn) -> Vec<CheckOutcome> {
    let ids: [&Identity; 6] = [
        &general_product,
        &coincident_product,
        &rank_swap,
        &same_j,
        &raising,
        &lowering,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vecs: Vec<(ComplexVector3, ComplexVector3)> = (0..pairs)
        .map(|_| (random_vector(&mut rng), random_vector(&mut rng)))
        .collect();
    ids.iter()
        .zip(IDENTITY_NAMES)
        .map(|(f, name)| {
            let r = thread_pool().and_then(|pool| {
                pool.install(|| {
                    fold_cases(
                        vecs.par_iter()
                            .enumerate()
                            .map(|(i, (a, b))| f(a, b, cg).map(|w| (w, 1, format!("pair {i}"))))
                            .collect(),
                    )
                })
            });
            finish(9, name, 1e-10, r)
        })
        .collect()
}

/// Stationarity of the excited natural populations under spontaneous branching.
pub fn check_branching(max_two_j: u32) -> CheckOutcome {
    let run = || -> Result<(f64, usize, String)> {
        let mut all = Vec::new();
        for sp in transitions(max_two_j) {
            if !matches!(sp.class, TransitionClass::NoDarkHalfInt | TransitionClass::NoDarkPlus) {
                continue;
            }
            for &eps in &EPSILON_GRID {
                let p = pol(eps)?;
                let b = branching_matrix(&sp, &p)?;
                for &s in &SATURATION_GRID {
                    for &d in &DETUNING_GRID {
                        let r = steady_state(&sp, &p, &field(s, d)?)?;
                        let pe = b.excited_populations(&r.rho.rho_ee);
                        all.push(Ok((b.stationarity_residual(&pe), 1, label(&sp, eps, s, d))));
                    }
                }
            }
        }
        fold_cases(all)
    };
    finish(10, "branching stationarity", 1e-10, run())
}

/// Runs every check; returns the outcomes in criterion order.
pub fn run_all(cfg: &VerifyConfig) -> Vec<CheckOutcome> {
    run_selected(cfg, &[])
}

/// Runs the checks whose criterion id is in `ids` (all when empty).
pub fn run_selected(cfg: &VerifyConfig, ids: &[u32]) -> Vec<CheckOutcome> {
    let want = |id: u32| ids.is_empty() || ids.contains(&id);
    let mut out = Vec::new();
    if want(1) {
        out.push(check_oracle(cfg.max_two_j, cfg.tolerance));
    }
    if want(2) {
        let (a, b) = check_dark_residuals(cfg.dark_max_two_j);
        out.extend([a, b]);
    }
    if want(3) {
        let (a, b) = check_truncation();
        out.extend([a, b]);
    }
    if want(4) {
        out.push(check_isotropy());
    }
    if want(5) {
        out.push(check_commutators(cfg.max_two_j));
    }
    if want(6) {
        out.push(check_two_level());
    }
    if want(7) {
        out.push(check_scan());
    }
    if want(8) {
        out.push(check_broadband_zero(cfg.max_two_j));
        let mut ens = cfg.ensemble;
        ens.seed = cfg.seed;
        out.push(check_broadband_ensemble(&ens));
    }
    if want(9) {
        out.extend(check_identities(20, cfg.seed, cfg.cg));
    }
    if want(10) {
        out.push(check_branching(cfg.max_two_j));
    }
    out
}

/// `true` when every outcome with the given id passed.
pub fn criterion_passed(outcomes: &[CheckOutcome], id: u32) -> bool {
    let mut any = false;
    for o in outcomes.iter().filter(|o| o.id == id) {
        any = true;
        if !o.passed {
            return false;
        }
    }
    any
}

/// Clebsch-Gordan coefficients with the sign of every `m1 < 0` entry flipped.
pub fn sign_flipped_cg(two_j1: u32, two_m1: i32, two_j2: u32, two_m2: i32, two_j: u32, two_m: i32) -> f64 {
    let c = cg_twice(two_j1, two_m1, two_j2, two_m2, two_j, two_m);
    if two_m1 < 0 {
        -c
    } else {
        c
    }
}
