//! Zeeman-basis operators between the ground (g) and excited (e) levels.
//!
//! Rows and columns run over projections in descending order `+J ... -J`.
//! `D_q` has entries `C^{Je mu_e}_{Jg mu_g 1 q}`, the coupling is
//! `V = D . e = sum_q (-1)^q e_{-q} D_q`, and the Wigner tensor is
//! `T^{ab}_{LM} = sum |Ja mu_a> (-1)^{Jb - mu_b} C^{LM}_{Ja mu_a Jb -mu_b} <Jb mu_b|`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::angular::{cg_twice, double_factorial, ln_factorial, triangle, wigner6j_twice, AngularMomentum};
use crate::error::{arg_err, Error, Result};
use crate::polarization::{harmonic_factor, tensor_power_with, CgFn, ComplexVector3, SphericalTensor};
use crate::steadystate::{TransitionClass, TransitionSpec};

type C = Complex64;

/// Dense complex operator matrix.
pub type CMat = DMatrix<C>;

const ZERO: C = C::new(0.0, 0.0);

/// Which level a Zeeman basis belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    Ground,
    Excited,
}

/// An operator `|a><b|` mapping level `b` (columns) to level `a` (rows).
#[derive(Debug, Clone, PartialEq)]
pub struct LevelOperator {
    pub row_level: (Level, AngularMomentum),
    pub col_level: (Level, AngularMomentum),
    pub matrix: CMat,
}

impl LevelOperator {
    pub fn new(row_level: (Level, AngularMomentum), col_level: (Level, AngularMomentum), matrix: CMat) -> Result<Self> {
        if matrix.nrows() != row_level.1.dim() || matrix.ncols() != col_level.1.dim() {
            return arg_err(format!(
                "matrix {}x{} does not match levels {} and {}",
                matrix.nrows(),
                matrix.ncols(),
                row_level.1,
                col_level.1
            ));
        }
        Ok(Self {
            row_level,
            col_level,
            matrix,
        })
    }

    pub fn adjoint(&self) -> Self {
        Self {
            row_level: self.col_level,
            col_level: self.row_level,
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.col_level != other.row_level {
            return arg_err("level mismatch in operator product");
        }
        Ok(Self {
            row_level: self.row_level,
            col_level: other.col_level,
            matrix: &self.matrix * &other.matrix,
        })
    }
}

/// How a rank-`L` operator built from a vector is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    /// Built from the harmonic `n_L(a)`, as in the paper.
    Harmonic,
    /// Built from `a^L n_L(a) = sqrt((2L-1)!!/L!) {a}_L`; finite at `(a.a) = 0`.
    TensorPower,
}

fn parity_sign(k: i64) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

fn check_transition(jg: AngularMomentum, je: AngularMomentum) -> Result<()> {
    let (g, e) = (jg.twice() as i64, je.twice() as i64);
    if (g - e).abs() > 2 || (g - e) % 2 != 0 || (g == 0 && e == 0) {
        return Err(Error::ForbiddenTransition {
            jg: jg.to_string(),
            je: je.to_string(),
        });
    }
    Ok(())
}

/// Dipole components `[D_{-1}, D_0, D_{+1}]` using a supplied CG routine.
pub fn dipole_components_with(jg: AngularMomentum, je: AngularMomentum, cg: CgFn) -> Result<[CMat; 3]> {
    check_transition(jg, je)?;
    let build = |q: i32| {
        CMat::from_fn(je.dim(), jg.dim(), |r, c| {
            C::new(
                cg(
                    jg.twice(),
                    jg.projection_at(c),
                    2,
                    2 * q,
                    je.twice(),
                    je.projection_at(r),
                ),
                0.0,
            )
        })
    };
    Ok([build(-1), build(0), build(1)])
}

/// Dipole components `[D_{-1}, D_0, D_{+1}]`, `(2Je+1) x (2Jg+1)` each.
pub fn dipole_components(jg: AngularMomentum, je: AngularMomentum) -> Result<[CMat; 3]> {
    dipole_components_with(jg, je, cg_twice)
}

/// `V = sum_q (-1)^q e_{-q} D_q`.
pub fn coupling_operator(jg: AngularMomentum, je: AngularMomentum, e: &ComplexVector3) -> Result<CMat> {
    let d = dipole_components(jg, je)?;
    Ok(couple_dipoles(&d, e))
}

/// `sum_q (-1)^q a_{-q} D_q` for precomputed components.
pub fn couple_dipoles(d: &[CMat; 3], a: &ComplexVector3) -> CMat {
    &d[0] * (-a.component(1)) + &d[1] * a.component(0) - &d[2] * a.component(-1)
}

/// Wigner tensor operator `T^{ab}_{LM}` (rows `Ja`, columns `Jb`) with a supplied CG routine.
pub fn tensor_operator_with(ja: AngularMomentum, jb: AngularMomentum, two_l: u32, two_m: i32, cg: CgFn) -> CMat {
    CMat::from_fn(ja.dim(), jb.dim(), |r, c| {
        let (ma, mb) = (ja.projection_at(r), jb.projection_at(c));
        let sign = parity_sign(((jb.twice() as i32 - mb) / 2) as i64);
        C::new(sign * cg(ja.twice(), ma, jb.twice(), -mb, two_l, two_m), 0.0)
    })
}

/// Wigner tensor operator `T^{ab}_{LM}`.
pub fn tensor_operator(ja: AngularMomentum, jb: AngularMomentum, l: u32, m: i32) -> Result<CMat> {
    if m.unsigned_abs() > l {
        return arg_err(format!("projection {m} exceeds rank {l}"));
    }
    Ok(tensor_operator_with(ja, jb, 2 * l, 2 * m, cg_twice))
}

/// `sum_M (-1)^M T^{ab}_{LM} t_{L -M}` for an arbitrary rank-`L` tensor `t`.
pub fn contract_tensor_with(ja: AngularMomentum, jb: AngularMomentum, t: &SphericalTensor, cg: CgFn) -> CMat {
    let mut out = CMat::zeros(ja.dim(), jb.dim());
    if !triangle(ja.twice(), jb.twice(), t.two_rank) {
        return out;
    }
    for two_m in t.rank().projections() {
        let comp = t.get(-two_m);
        if comp == ZERO {
            continue;
        }
        let sign = parity_sign((two_m / 2) as i64);
        out += tensor_operator_with(ja, jb, t.two_rank, two_m, cg) * (comp * sign);
    }
    out
}

/// `V^{ab}_L(a)` together with the normalization actually used.
#[derive(Debug, Clone, PartialEq)]
pub struct VlOperator {
    pub matrix: CMat,
    pub normalization: Normalization,
}

/// `V^{ab}_L(a) = sum_M (-1)^M T^{ab}_{LM} n_{L -M}(a)`.
///
/// For a circular direction `(a.a) = 0` the harmonic does not exist; the
/// operator is then built from `a^L n_L(a)` and flagged as such.
pub fn v_l_operator(ja: AngularMomentum, jb: AngularMomentum, l: usize, a: &ComplexVector3) -> Result<VlOperator> {
    v_l_operator_with(ja, jb, l, a, cg_twice)
}

pub fn v_l_operator_with(
    ja: AngularMomentum,
    jb: AngularMomentum,
    l: usize,
    a: &ComplexVector3,
    cg: CgFn,
) -> Result<VlOperator> {
    if !triangle(ja.twice(), jb.twice(), 2 * l as u32) {
        return arg_err(format!("ranks {ja}, {jb} and {l} violate the triangle rule"));
    }
    let aa = a.dot(a);
    let scaled = tensor_power_with(a, l, cg).scale(C::new(harmonic_factor(l), 0.0));
    let matrix = contract_tensor_with(ja, jb, &scaled, cg);
    if aa.norm() <= 1e-15 * a.norm_sqr() {
        Ok(VlOperator {
            matrix,
            normalization: Normalization::TensorPower,
        })
    } else {
        Ok(VlOperator {
            matrix: matrix * aa.sqrt().powi(-(l as i32)),
            normalization: Normalization::Harmonic,
        })
    }
}

/// Scale-free `a^L V^{ab}_L(a)`, finite for every `a`.
pub fn v_l_scaled(ja: AngularMomentum, jb: AngularMomentum, l: usize, a: &ComplexVector3) -> CMat {
    let t = tensor_power_with(a, l, cg_twice).scale(C::new(harmonic_factor(l), 0.0));
    contract_tensor_with(ja, jb, &t, cg_twice)
}

/// Light-shift operators `(E_g, E_e) = (delta S V^+V, -delta S V V^+)`.
pub fn light_shifts(v: &CMat, delta: f64, s: f64) -> Result<(CMat, CMat)> {
    if !(s >= 0.0) {
        return arg_err(format!("saturation {s} must be non-negative"));
    }
    let f = C::new(delta * s, 0.0);
    Ok((v.adjoint() * v * f, -(v * v.adjoint()) * f))
}

/// Raising operator `W` and lowering operator `W~` for classes c and d.
#[derive(Debug, Clone, PartialEq)]
pub struct RaisingOperators {
    pub w: CMat,
    pub w_tilde: CMat,
    pub normalization: Normalization,
}

/// `W = V^{eg}_{2J+1}(e)`, `W~ = V^{ge}_{2J+1}(e)` (class d) or the rank-0 pair (class c).
pub fn raising_operators(spec: &TransitionSpec, e: &ComplexVector3) -> Result<RaisingOperators> {
    let (jg, je) = (spec.jg, spec.je);
    let l = match spec.class {
        TransitionClass::NoDarkPlus => jg.twice() as usize + 1,
        TransitionClass::NoDarkHalfInt => 0,
        other => return Err(Error::NotApplicable(other)),
    };
    let w = v_l_operator(je, jg, l, e)?;
    let wt = v_l_operator(jg, je, l, e)?;
    Ok(RaisingOperators {
        w: w.matrix,
        w_tilde: wt.matrix,
        normalization: w.normalization,
    })
}

/// `W~_{m mu} = (-1)^{Jg - m - Je - mu} W_{-mu, -m}`.
pub fn time_reversed(w: &CMat, jg: AngularMomentum, je: AngularMomentum) -> CMat {
    CMat::from_fn(jg.dim(), je.dim(), |r, c| {
        let (m, mu) = (jg.projection_at(r), je.projection_at(c));
        let k = (jg.twice() as i32 - m - je.twice() as i32 - mu) / 2;
        let rr = je.index_of(-mu).unwrap();
        let cc = jg.index_of(-m).unwrap();
        w[(rr, cc)] * parity_sign(k as i64)
    })
}

/// Natural-frame (natural-plus) closed forms.
pub mod natural {
    use super::*;

    fn tan_ratio(eps: f64) -> (f64, f64) {
        (eps.sin(), crate::polarization::cos_two_eps(eps))
    }

    /// `V` for `J -> J` half-integer at ellipticity `eps`.
    pub fn coupling_jj(j: AngularMomentum, eps: f64) -> CMat {
        let jj = j.value();
        let norm = (jj * (jj + 1.0)).sqrt();
        let (s, x) = tan_ratio(eps);
        CMat::from_fn(j.dim(), j.dim(), |r, c| {
            let (mu, nu) = (j.projection_at(r) as f64 / 2.0, j.projection_at(c) as f64 / 2.0);
            if r == c {
                C::new(mu / norm * x.sqrt(), 0.0)
            } else if (nu - (mu - 1.0)).abs() < 1e-9 {
                C::new(-((jj + mu) * (jj - mu + 1.0)).sqrt() / norm * s, 0.0)
            } else {
                ZERO
            }
        })
    }

    /// Closed-form `V^{-1}` for `J -> J` half-integer; requires `|eps| < pi/4`.
    ///
    /// Each entry is a single product, so the result stays accurate as the
    /// coupling approaches singularity.
    pub fn inverse_jj(j: AngularMomentum, eps: f64) -> CMat {
        let jj = j.value();
        let (s, x) = tan_ratio(eps);
        let sx = x.sqrt();
        CMat::from_fn(j.dim(), j.dim(), |r, c| {
            let mu = j.projection_at(r) as f64 / 2.0;
            let mup = j.projection_at(c) as f64 / 2.0;
            if mup > mu + 1e-9 {
                return ZERO;
            }
            let steps = (mu - mup).round() as i32;
            let mut val = (jj * (jj + 1.0)).sqrt() / sx / mup;
            let mut alpha = mup + 1.0;
            for _ in 0..steps {
                val *= ((jj + alpha) * (jj - alpha + 1.0)).sqrt() / alpha * (s / sx);
                alpha += 1.0;
            }
            C::new(val, 0.0)
        })
    }

    /// `(V^+V)^{-1}` for `J -> J` half-integer as the sum over intermediate `nu`.
    pub fn inverse_vv_jj(j: AngularMomentum, eps: f64) -> CMat {
        let vi = inverse_jj(j, eps);
        &vi * vi.transpose()
    }

    /// `V` for `J -> J+1` at ellipticity `eps`.
    pub fn coupling_plus(j: AngularMomentum, eps: f64) -> CMat {
        let je = AngularMomentum::from_twice(j.twice() + 2);
        let jj = j.value();
        let (s, x) = tan_ratio(eps);
        let den = (jj + 1.0) * (2.0 * jj + 1.0);
        CMat::from_fn(je.dim(), j.dim(), |r, c| {
            let mu = je.projection_at(r) as f64 / 2.0;
            let m = j.projection_at(c) as f64 / 2.0;
            if (mu - m).abs() < 1e-9 {
                C::new(((jj + 1.0 - mu) * (jj + 1.0 + mu) / den).sqrt() * x.sqrt(), 0.0)
            } else if (m - (mu - 1.0)).abs() < 1e-9 {
                C::new(((jj + mu) * (jj + 1.0 + mu) / den).sqrt() * s, 0.0)
            } else {
                ZERO
            }
        })
    }

    fn lf(k: f64) -> f64 {
        ln_factorial(k.round() as i64)
    }

    /// `x^{(2J+1)/2} W` for `J -> J+1`, finite at circular polarization.
    pub fn w_scaled(j: AngularMomentum, eps: f64) -> CMat {
        let je = AngularMomentum::from_twice(j.twice() + 2);
        let jj = j.value();
        let (s, x) = tan_ratio(eps);
        let l = j.twice() as i32 + 1;
        CMat::from_fn(je.dim(), j.dim(), |r, c| {
            let mu = je.projection_at(r) as f64 / 2.0;
            let m = j.projection_at(c) as f64 / 2.0;
            let k = (mu - m).round() as i32;
            if k < 0 {
                return ZERO;
            }
            let ln = lf(2.0 * jj + 1.0 + k as f64) - lf(k as f64)
                + 0.5
                    * (lf(2.0 * jj + 2.0) + lf(2.0 * jj)
                        - lf(4.0 * jj + 2.0)
                        - lf(jj + 1.0 + mu)
                        - lf(jj + 1.0 - mu)
                        - lf(jj + m)
                        - lf(jj - m));
            let sign = parity_sign((jj - m).round() as i64);
            let pow = s.powi(k) * x.sqrt().powi(l - k);
            C::new(sign * ln.exp() * pow, 0.0)
        })
    }

    /// `W` in the paper's normalization; requires `|eps| < pi/4`.
    pub fn w(j: AngularMomentum, eps: f64) -> CMat {
        let (_, x) = tan_ratio(eps);
        w_scaled(j, eps) / C::new(x.sqrt().powi(j.twice() as i32 + 1), 0.0)
    }

    /// Pseudoinverse `U` of `V` for `J -> J+1` with the two zero columns.
    pub fn pseudo_inverse_plus(j: AngularMomentum, eps: f64) -> CMat {
        let je = AngularMomentum::from_twice(j.twice() + 2);
        let jj = j.value();
        let (s, x) = tan_ratio(eps);
        let t = -s / x.sqrt();
        CMat::from_fn(j.dim(), je.dim(), |r, c| {
            let m = j.projection_at(r) as f64 / 2.0;
            let mu = je.projection_at(c) as f64 / 2.0;
            if mu.abs() > jj + 1e-9 || mu > m + 1e-9 {
                return ZERO;
            }
            let k = (m - mu).round() as i32;
            let mut val = ((jj + 1.0) * (2.0 * jj + 1.0) / ((jj + 1.0 + mu) * (jj + 1.0 - mu) * x)).sqrt() * t.powi(k);
            let mut nu = mu + 1.0;
            for _ in 0..k {
                val *= ((jj + nu) / (jj + 1.0 - nu)).sqrt();
                nu += 1.0;
            }
            C::new(val, 0.0)
        })
    }

    /// `x^{(2J+1)/2} X` from the closed-form element sum, finite at circular polarization.
    pub fn x_scaled(j: AngularMomentum, eps: f64) -> CMat {
        let jj = j.value();
        let (s, x) = tan_ratio(eps);
        let l = j.twice() as i32 + 1;
        CMat::from_fn(j.dim(), j.dim(), |r, c| {
            let m = j.projection_at(r) as f64 / 2.0;
            let mp = j.projection_at(c) as f64 / 2.0;
            if m < mp - 1e-9 {
                return ZERO;
            }
            let k = (m - mp).round() as i32;
            let ln_pref = 0.5
                * ((jj + 1.0).ln() + lf(2.0 * jj + 1.0) + lf(2.0 * jj + 2.0) + lf(jj + m) + lf(jj - m)
                    - lf(4.0 * jj + 2.0)
                    - lf(jj + mp)
                    - lf(jj - mp));
            let mut sum = 0.0;
            let mut mu = mp;
            while mu <= m + 1e-9 {
                let ln = lf(2.0 * jj + 1.0 + mu - mp) - lf(mu - mp) - lf(jj + 1.0 + mu) - lf(jj + 1.0 - mu);
                sum += parity_sign((jj - mu).round() as i64) * ln.exp();
                mu += 1.0;
            }
            // x^{-1/2} (-s/sqrt x)^k times x^{(2J+1)/2}
            let pow = (-s).powi(k) * x.sqrt().powi(l - 1 - k);
            C::new(ln_pref.exp() * sum * pow, 0.0)
        })
    }
}

/// Structure constants `E(L, K)` of `V_1 V_L = sum_K E(L,K) V_K` for the given class.
pub fn structure_constant(class: TransitionClass, j: AngularMomentum, l: i64, k: i64) -> Result<f64> {
    if l < 0 || k < 0 {
        return Ok(0.0);
    }
    let tj = j.twice();
    let (two_l, two_k) = (2 * l as u32, 2 * k as u32);
    let cg = cg_twice(2, 0, two_l, 0, two_k, 0);
    match class {
        TransitionClass::NoDarkPlus => {
            let sixj = wigner6j_twice([two_k, 2, two_l, tj, tj, tj + 2]);
            Ok(parity_sign(tj as i64 + l) * (3.0 * (2 * l + 1) as f64).sqrt() * sixj * cg)
        }
        TransitionClass::NoDarkHalfInt => {
            let sixj = wigner6j_twice([two_k, 2, two_l, tj, tj, tj]);
            Ok(parity_sign(tj as i64 + l + 1) * (3.0 * (2 * l + 1) as f64).sqrt() * sixj * cg)
        }
        other => Err(Error::NotApplicable(other)),
    }
}

/// Closed-form expansion coefficient `C_L` of `X` (class d) or `(V_1^{eg})^{-1}` (class c).
pub fn expansion_coefficient(class: TransitionClass, j: AngularMomentum, l: i64) -> Result<f64> {
    let tj = j.twice() as i64;
    if l < 0 || l > tj {
        return arg_err(format!("rank {l} outside 0..={tj}"));
    }
    match class {
        TransitionClass::NoDarkPlus => {
            if (tj - l) % 2 != 0 {
                return Ok(0.0);
            }
            let jj = j.value();
            let ln = ln_factorial(tj - l) + ln_factorial(tj + l + 1) - ln_factorial(2 * tj + 1);
            Ok(((2 * l + 1) as f64 * (2.0 * jj + 3.0) / (3.0 * (2.0 * jj + 1.0)) * ln.exp()).sqrt())
        }
        TransitionClass::NoDarkHalfInt => {
            if l % 2 == 0 {
                return Ok(0.0);
            }
            let sign = parity_sign((l - 1) / 2);
            let df = |n: i64| double_factorial(n);
            let ratio = df(l - 1) / df(l);
            let inner = (2 * l + 1) as f64 * (tj * (tj + 1) * (tj + 2)) as f64 / 3.0 * df(tj + l) * df(tj - l - 1)
                / (df(tj - l) * df(tj + l + 1));
            Ok(sign * ratio * inner.sqrt())
        }
        other => Err(Error::NotApplicable(other)),
    }
}

/// `C_L`, `L = 0..=2J`, obtained by solving the two-term recurrence.
pub fn coefficients_by_recurrence(class: TransitionClass, j: AngularMomentum) -> Result<Vec<f64>> {
    let tj = j.twice() as i64;
    let e = |l: i64, k: i64| structure_constant(class, j, l, k);
    let mut c = vec![0.0; tj as usize + 1];
    match class {
        TransitionClass::NoDarkPlus => {
            // top equation L = 2J+1 fixes C_{2J}; descend in steps of two
            c[tj as usize] = 1.0 / e(tj, tj + 1)?;
            let mut l = tj - 2;
            while l >= 0 {
                let row = l + 1;
                c[l as usize] = -e(l + 2, row)? * c[(l + 2) as usize] / e(l, row)?;
                l -= 2;
            }
        }
        TransitionClass::NoDarkHalfInt => {
            c[1] = (tj as f64 + 1.0).sqrt() / e(1, 0)?;
            let mut l = 3;
            while l <= tj {
                let row = l - 1;
                c[l as usize] = -e(l - 2, row)? * c[(l - 2) as usize] / e(l, row)?;
                l += 2;
            }
        }
        other => return Err(Error::NotApplicable(other)),
    }
    Ok(c)
}

/// Residual of the recurrence for a candidate coefficient vector.
pub fn recurrence_residual(class: TransitionClass, j: AngularMomentum, c: &[f64]) -> Result<f64> {
    let tj = j.twice() as i64;
    let get = |l: i64| if l < 0 || l > tj { 0.0 } else { c[l as usize] };
    let (top, rhs): (i64, Box<dyn Fn(i64) -> f64>) = match class {
        TransitionClass::NoDarkPlus => (tj + 1, Box::new(move |l| if l == tj + 1 { 1.0 } else { 0.0 })),
        TransitionClass::NoDarkHalfInt => {
            let r = (tj as f64 + 1.0).sqrt();
            (tj, Box::new(move |l| if l == 0 { r } else { 0.0 }))
        }
        other => return Err(Error::NotApplicable(other)),
    };
    let mut worst = 0.0f64;
    for l in 0..=top {
        let lhs =
            structure_constant(class, j, l - 1, l)? * get(l - 1) + structure_constant(class, j, l + 1, l)? * get(l + 1);
        worst = worst.max((lhs - rhs(l)).abs());
    }
    Ok(worst)
}

/// `C_{2J} / C_{2J-2} = (4J+1) sqrt(2J/(4J-3))` for `J -> J+1`.
pub fn leading_coefficient_ratio(j: AngularMomentum) -> f64 {
    let jj = j.value();
    (4.0 * jj + 1.0) * (2.0 * jj / (4.0 * jj - 3.0)).sqrt()
}

/// `X = (V^+V)^{-1} V^+ W` solved numerically; `w` may be in either normalization.
pub fn solve_x(v: &CMat, w: &CMat) -> Result<CMat> {
    let vv = v.adjoint() * v;
    let rhs = v.adjoint() * w;
    let chol = vv.cholesky().ok_or(Error::Singular("V^+V"))?;
    Ok(chol.solve(&rhs))
}

/// `X` operator for class d together with its normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct XOperator {
    pub matrix: CMat,
    pub normalization: Normalization,
}

/// The operator `X` with `V X = W` for `J -> J+1`.
pub fn x_operator(spec: &TransitionSpec, e: &ComplexVector3) -> Result<XOperator> {
    if spec.class != TransitionClass::NoDarkPlus {
        return Err(Error::NotApplicable(spec.class));
    }
    let v = coupling_operator(spec.jg, spec.je, e)?;
    let w = raising_operators(spec, e)?;
    Ok(XOperator {
        matrix: solve_x(&v, &w.w)?,
        normalization: w.normalization,
    })
}

/// `X` from its invariant expansion `sqrt(3/((e.e)(2J+3))) sum_L C_L V^{gg}_L(e)`.
pub fn x_by_expansion(j: AngularMomentum, e: &ComplexVector3, max_terms: Option<usize>) -> Result<CMat> {
    let aa = e.dot(e);
    if aa.norm() < 1e-15 {
        return Err(Error::SingularDirection);
    }
    let tj = j.twice() as i64;
    let pref = (C::new(3.0 / (2.0 * j.value() + 3.0), 0.0) / aa).sqrt();
    let mut out = CMat::zeros(j.dim(), j.dim());
    let mut used = 0;
    let mut l = tj;
    while l >= 0 {
        if max_terms.is_some_and(|n| used >= n) {
            break;
        }
        let c = expansion_coefficient(TransitionClass::NoDarkPlus, j, l)?;
        if c != 0.0 {
            out += v_l_operator(j, j, l as usize, e)?.matrix * C::new(c, 0.0);
            used += 1;
        }
        l -= 1;
    }
    Ok(out * pref)
}

/// `(V_1^{eg})^{-1}` from `sum_L C_L V^{ge}_L(e)` for `J -> J` half-integer.
pub fn inverse_by_expansion(j: AngularMomentum, e: &ComplexVector3) -> Result<CMat> {
    let mut out = CMat::zeros(j.dim(), j.dim());
    for l in (1..=j.twice() as i64).step_by(2) {
        let c = expansion_coefficient(TransitionClass::NoDarkHalfInt, j, l)?;
        out += v_l_operator(j, j, l as usize, e)?.matrix * C::new(c, 0.0);
    }
    Ok(out)
}

/// Inverse coupling `(V^{-1}, (V^+V)^{-1})` for `J -> J` half-integer.
///
/// Evaluated in the natural frame by closed-form products and rotated back,
/// so accuracy survives near circular polarization.
pub fn inverse_coupling(spec: &TransitionSpec, pol: &crate::polarization::Polarization) -> Result<(CMat, CMat)> {
    if spec.class != TransitionClass::NoDarkHalfInt {
        return Err(Error::NotApplicable(spec.class));
    }
    if pol.is_circular() {
        return Err(Error::DarkException);
    }
    let d = pol.natural_decomposition();
    let rot = crate::polarization::rotation_operator(spec.jg, &d.rotation);
    let vi = natural::inverse_jj(spec.jg, d.epsilon);
    // V = phase R V_nat R^+  =>  V^{-1} = phase^{-1} R V_nat^{-1} R^+
    let vinv = &rot * vi * rot.adjoint() / d.phase;
    let vv = &vinv * vinv.adjoint();
    Ok((vinv, vv))
}

/// Max-abs entry difference between two matrices.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Max-abs entry of a matrix.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polarization::{Frame, Polarization};
    use crate::steadystate::classify;
    use std::f64::consts::PI;

    fn am(s: &str) -> AngularMomentum {
        s.parse().unwrap()
    }

    #[test]
    fn dipole_sum_rules() {
        let [dm, d0, dp] = dipole_components(am("0"), am("1")).unwrap();
        for d in [&dm, &d0, &dp] {
            assert_eq!(d.iter().filter(|z| z.norm() > 0.0).count(), 1);
            assert!((d.iter().map(|z| z.re).sum::<f64>() - 1.0).abs() < 1e-15);
        }
        let d = dipole_components(am("2"), am("3")).unwrap();
        let ee: CMat = d.iter().map(|q| q * q.adjoint()).sum();
        let gg: CMat = d.iter().map(|q| q.adjoint() * q).sum();
        assert!(max_abs_diff(&ee, &CMat::identity(7, 7)) < 1e-12);
        assert!(max_abs_diff(&gg, &(CMat::identity(5, 5) * C::new(1.4, 0.0))) < 1e-12);
        assert!(matches!(
            dipole_components(am("0"), am("0")),
            Err(Error::ForbiddenTransition { .. })
        ));
    }

    #[test]
    fn coupling_examples() {
        let h = am("1/2");
        let lin = Polarization::from_ellipticity(0.0, Frame::NaturalPlus).unwrap();
        let v = coupling_operator(h, h, lin.vector()).unwrap();
        let r = 1.0 / 3f64.sqrt();
        assert!((v[(0, 0)].re - r).abs() < 1e-15 && (v[(1, 1)].re + r).abs() < 1e-15);
        let circ = Polarization::from_ellipticity(PI / 4.0, Frame::NaturalPlus).unwrap();
        let v = coupling_operator(h, h, circ.vector()).unwrap();
        assert!(v.determinant().norm() < 1e-15);
        let p = Polarization::from_ellipticity(0.37, Frame::Conventional).unwrap();
        let v = coupling_operator(am("0"), am("1"), p.vector()).unwrap();
        assert!(((v.adjoint() * v)[(0, 0)] - 1.0).norm() < 1e-14);
    }

    #[test]
    fn natural_frame_couplings_match_definition() {
        for eps in [0.0, 0.2, -0.3, PI / 4.0 - 1e-3, PI / 4.0] {
            let p = Polarization::from_ellipticity(eps, Frame::NaturalPlus).unwrap();
            for tj in [1, 3, 5] {
                let j = AngularMomentum::from_twice(tj);
                let v = coupling_operator(j, j, p.vector()).unwrap();
                assert!(max_abs_diff(&v, &natural::coupling_jj(j, eps)) < 1e-13);
            }
            for tj in [0, 1, 2, 3, 4] {
                let j = AngularMomentum::from_twice(tj);
                let je = AngularMomentum::from_twice(tj + 2);
                let v = coupling_operator(j, je, p.vector()).unwrap();
                assert!(
                    max_abs_diff(&v, &natural::coupling_plus(j, eps)) < 1e-13,
                    "tj={tj} eps={eps}"
                );
            }
        }
    }

    #[test]
    fn light_shift_examples() {
        let h = am("1/2");
        let lin = Polarization::from_ellipticity(0.0, Frame::NaturalPlus).unwrap();
        let v = coupling_operator(h, h, lin.vector()).unwrap();
        let (eg, ee) = light_shifts(&v, 0.0, 2.0).unwrap();
        assert_eq!(max_abs(&eg) + max_abs(&ee), 0.0);
        let (eg, _) = light_shifts(&v, 1.5, 2.0).unwrap();
        assert!(max_abs_diff(&eg, &(CMat::identity(2, 2) * C::new(1.0, 0.0))) < 1e-14);
        let v0 = coupling_operator(am("0"), am("1"), lin.vector()).unwrap();
        let (eg, _) = light_shifts(&v0, 0.7, 3.0).unwrap();
        assert!((eg[(0, 0)].re - 2.1).abs() < 1e-14);
        assert!(light_shifts(&v, 1.0, -1.0).is_err());
    }

    #[test]
    fn natural_inverse_matches_numeric() {
        for tj in [1, 3, 5] {
            let j = AngularMomentum::from_twice(tj);
            for eps in [0.0, 0.3, -0.5] {
                let v = natural::coupling_jj(j, eps);
                let vi = natural::inverse_jj(j, eps);
                assert!(max_abs_diff(&(&vi * &v), &CMat::identity(j.dim(), j.dim())) < 1e-12);
                assert!(max_abs_diff(&(&v * &vi), &CMat::identity(j.dim(), j.dim())) < 1e-12);
            }
        }
        let h = am("1/2");
        let vi = natural::inverse_jj(h, 0.0);
        assert!((vi[(0, 0)].re - 3f64.sqrt()).abs() < 1e-14);
        assert!((vi[(1, 1)].re + 3f64.sqrt()).abs() < 1e-14);
        let vv = natural::inverse_vv_jj(h, 0.0);
        assert!((vv.trace().re - 6.0).abs() < 1e-13);
    }

    #[test]
    fn class_c_coefficients() {
        let h = am("1/2");
        let c = coefficients_by_recurrence(TransitionClass::NoDarkHalfInt, h).unwrap();
        assert!(c[0].abs() < 1e-15);
        assert!((c[1] - 2.0).abs() < 1e-13);
        for tj in [1, 3, 5, 7, 9] {
            let j = AngularMomentum::from_twice(tj);
            let rec = coefficients_by_recurrence(TransitionClass::NoDarkHalfInt, j).unwrap();
            for l in 0..=tj as i64 {
                let closed = expansion_coefficient(TransitionClass::NoDarkHalfInt, j, l).unwrap();
                assert!(
                    (closed - rec[l as usize]).abs() < 1e-10 * closed.abs().max(1.0),
                    "J={j} L={l}"
                );
            }
            let resid = recurrence_residual(TransitionClass::NoDarkHalfInt, j, &rec).unwrap();
            assert!(resid < 1e-12);
        }
        // alpha_0 at eps = 0, J = 1/2: 3/((e.e) 2) C_1^2 P_1(1) = 6
        assert!((3.0 / 2.0 * c[1] * c[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn class_d_coefficients() {
        for tj in 0..=10 {
            let j = AngularMomentum::from_twice(tj);
            let rec = coefficients_by_recurrence(TransitionClass::NoDarkPlus, j).unwrap();
            let closed: Vec<f64> = (0..=tj as i64)
                .map(|l| expansion_coefficient(TransitionClass::NoDarkPlus, j, l).unwrap())
                .collect();
            let resid = recurrence_residual(TransitionClass::NoDarkPlus, j, &closed).unwrap();
            assert!(resid < 1e-10, "J={j} residual {resid}");
            for l in 0..=tj as usize {
                assert!((closed[l] - rec[l]).abs() < 1e-9 * closed[l].abs().max(1.0));
            }
        }
        let j4 = am("4");
        let c8 = expansion_coefficient(TransitionClass::NoDarkPlus, j4, 8).unwrap();
        let c6 = expansion_coefficient(TransitionClass::NoDarkPlus, j4, 6).unwrap();
        assert!((c8 / c6 - leading_coefficient_ratio(j4)).abs() < 1e-10);
        assert!((leading_coefficient_ratio(j4) - 13.3).abs() < 0.1);
        for class in [TransitionClass::NoDarkPlus, TransitionClass::NoDarkHalfInt] {
            for l in 0..5 {
                assert_eq!(structure_constant(class, am("3/2"), l, l).unwrap(), 0.0);
            }
        }
        assert!(expansion_coefficient(TransitionClass::NoDarkPlus, j4, 9).is_err());
    }

    #[test]
    fn vl_reproduces_coupling() {
        for (g, e) in [("1", "2"), ("1/2", "3/2"), ("3/2", "3/2"), ("2", "1"), ("1", "1")] {
            let (jg, je) = (am(g), am(e));
            let p = Polarization::from_ellipticity(PI / 6.0, Frame::Conventional).unwrap();
            let a = p.vector();
            let v = coupling_operator(jg, je, a).unwrap();
            let v1 = v_l_operator(je, jg, 1, a).unwrap();
            let f = (a.dot(a) * ((je.twice() + 1) as f64 / 3.0)).sqrt();
            assert!(max_abs_diff(&v, &(v1.matrix * f)) < 1e-12, "{g}->{e}");
        }
    }

    #[test]
    fn w_matches_closed_form_and_time_reversal() {
        for tj in [0, 1, 2, 3] {
            let j = AngularMomentum::from_twice(tj);
            let spec = classify(j, AngularMomentum::from_twice(tj + 2)).unwrap();
            for eps in [0.0, 0.3, -0.45] {
                let p = Polarization::from_ellipticity(eps, Frame::NaturalPlus).unwrap();
                let r = raising_operators(&spec, p.vector()).unwrap();
                assert!(max_abs_diff(&r.w, &natural::w(j, eps)) < 1e-11, "tj={tj} eps={eps}");
                let wt = time_reversed(&r.w, spec.jg, spec.je);
                assert!(max_abs_diff(&wt, &r.w_tilde) < 1e-11);
            }
            let circ = Polarization::from_ellipticity(PI / 4.0, Frame::NaturalPlus).unwrap();
            let ws = v_l_scaled(spec.je, spec.jg, tj as usize + 1, circ.vector());
            assert!(max_abs_diff(&ws, &natural::w_scaled(j, PI / 4.0)) < 1e-12);
        }
        let spec = classify(am("3/2"), am("3/2")).unwrap();
        let p = Polarization::from_ellipticity(0.2, Frame::Conventional).unwrap();
        let r = raising_operators(&spec, p.vector()).unwrap();
        let unit = CMat::identity(4, 4) / C::new(2.0, 0.0);
        assert!(max_abs_diff(&r.w, &unit) < 1e-14);
        let b = classify(am("1"), am("1")).unwrap();
        assert_eq!(
            raising_operators(&b, p.vector()),
            Err(Error::NotApplicable(TransitionClass::DarkUnique))
        );
    }

    #[test]
    fn x_routes_agree() {
        for tj in [0, 1, 2, 3, 4] {
            let j = AngularMomentum::from_twice(tj);
            let spec = classify(j, AngularMomentum::from_twice(tj + 2)).unwrap();
            for eps in [0.0, 0.2, -0.5, PI / 4.0 - 1e-3] {
                let p = Polarization::from_ellipticity(eps, Frame::NaturalPlus).unwrap();
                let v = coupling_operator(spec.jg, spec.je, p.vector()).unwrap();
                let x = x_operator(&spec, p.vector()).unwrap().matrix;
                let w = raising_operators(&spec, p.vector()).unwrap().w;
                assert!(max_abs_diff(&(&v * &x), &w) < 1e-12 * max_abs(&w).max(1.0));
                let u = natural::pseudo_inverse_plus(j, eps);
                assert!(max_abs_diff(&(&v * &u * &v), &v) < 1e-10 * max_abs(&(&v * &u)).max(1.0));
                let xu = &u * &w;
                let scale = max_abs(&x).max(1.0);
                assert!(max_abs_diff(&xu, &x) < 1e-10 * scale, "tj={tj} eps={eps}");
                let xs = natural::x_scaled(j, eps);
                let sx = (2.0 * eps).cos().sqrt().powi(tj as i32 + 1);
                assert!(max_abs_diff(&(&x * C::new(sx, 0.0)), &xs) < 1e-10 * max_abs(&xs).max(1.0));
                if eps.abs() < 0.6 {
                    let xe = x_by_expansion(j, p.vector(), None).unwrap();
                    assert!(max_abs_diff(&xe, &x) < 1e-10 * scale);
                }
            }
        }
    }

    #[test]
    fn inverse_coupling_routes() {
        for tj in [1, 3, 5] {
            let j = AngularMomentum::from_twice(tj);
            let spec = classify(j, j).unwrap();
            for frame in [Frame::Conventional, Frame::NaturalPlus, Frame::NaturalMinus] {
                for eps in [0.0, 0.25, -0.4] {
                    let p = Polarization::from_ellipticity(eps, frame).unwrap();
                    let v = coupling_operator(j, j, p.vector()).unwrap();
                    let (vi, vv) = inverse_coupling(&spec, &p).unwrap();
                    let id = CMat::identity(j.dim(), j.dim());
                    assert!(max_abs_diff(&(&vi * &v), &id) < 1e-11);
                    assert!(max_abs_diff(&(&v * &vi), &id) < 1e-11);
                    let direct = (v.adjoint() * &v).try_inverse().unwrap();
                    assert!(max_abs_diff(&vv, &direct) < 1e-10 * max_abs(&direct));
                    let f = (p.vector().dot(p.vector()) * ((tj + 1) as f64 / 3.0)).sqrt();
                    let ve = inverse_by_expansion(j, p.vector()).unwrap() / f;
                    assert!(max_abs_diff(&ve, &vi) < 1e-10 * max_abs(&vi), "{frame:?} {eps}");
                }
            }
            let circ = Polarization::from_ellipticity(PI / 4.0, Frame::Conventional).unwrap();
            assert_eq!(inverse_coupling(&spec, &circ), Err(Error::DarkException));
        }
    }

    #[test]
    fn vl_hermiticity_rule() {
        use crate::polarization::ComplexVector3;
        let a = ComplexVector3::new(C::new(0.3, -0.2), C::new(0.1, 0.7), C::new(-0.5, 0.25));
        for (ja, jb, l) in [("1", "2", 1), ("3/2", "1/2", 2), ("2", "2", 3), ("5/2", "3/2", 3)] {
            let (ja, jb) = (am(ja), am(jb));
            let lhs = v_l_operator(ja, jb, l, &a).unwrap().matrix.adjoint();
            let rhs = v_l_operator(jb, ja, l, &a.conj()).unwrap().matrix;
            let sign = parity_sign(((ja.twice() as i64) - (jb.twice() as i64)) / 2);
            assert!(max_abs_diff(&lhs, &(rhs * C::new(sign, 0.0))) < 1e-12);
        }
    }
}
