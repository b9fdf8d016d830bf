//! Angular-momentum coefficient algebra.
//!
//! Every half-integer quantity is carried as its doubled integer value
//! (`two_j`, `two_m`), so `j = 3/2` is `two_j = 3`. Clebsch-Gordan
//! coefficients and 6j symbols follow the Condon-Shortley phase convention
//! used by Varshalovich et al.; all downstream operators inherit it.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};

/// Largest supported `two_j` for coefficient evaluation.
pub const MAX_TWO_J: u32 = 40;

/// Largest rank with a precomputed scaled-Legendre coefficient table.
pub const MAX_LEGENDRE_RANK: usize = 41;

const LN_FACTORIAL_LEN: usize = 512;

/// An angular momentum quantum number, stored exactly as `2j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AngularMomentum {
    two_j: u32,
}

impl AngularMomentum {
    pub const ZERO: Self = Self { two_j: 0 };
    pub const HALF: Self = Self { two_j: 1 };
    pub const ONE: Self = Self { two_j: 2 };

    pub const fn from_twice(two_j: u32) -> Self {
        Self { two_j }
    }

    pub const fn integer(j: u32) -> Self {
        Self { two_j: 2 * j }
    }

    pub const fn twice(self) -> u32 {
        self.two_j
    }

    pub fn value(self) -> f64 {
        self.two_j as f64 / 2.0
    }

    pub const fn is_integer(self) -> bool {
        self.two_j.is_multiple_of(2)
    }

    /// Number of Zeeman sublevels, `2j + 1`.
    pub const fn dim(self) -> usize {
        self.two_j as usize + 1
    }

    /// Doubled projections `2m` in descending order `+j, ..., -j`.
    pub fn projections(self) -> impl DoubleEndedIterator<Item = i32> {
        let two_j = self.two_j as i32;
        (0..=self.two_j as usize).map(move |k| two_j - 2 * k as i32)
    }

    /// Matrix index of projection `two_m` in the descending Zeeman order.
    pub fn index_of(self, two_m: i32) -> Option<usize> {
        let two_j = self.two_j as i32;
        if two_m.abs() > two_j || (two_j - two_m) % 2 != 0 {
            None
        } else {
            Some(((two_j - two_m) / 2) as usize)
        }
    }

    /// Doubled projection at matrix index `i`.
    pub fn projection_at(self, i: usize) -> i32 {
        self.two_j as i32 - 2 * i as i32
    }

    /// Checks that `two_m` is a valid projection of this momentum.
    pub fn check_projection(self, two_m: i32) -> Result<()> {
        if (self.two_j as i32 - two_m).rem_euclid(2) != 0 {
            return arg_err(format!("projection 2m={two_m} has the wrong parity for j={self}"));
        }
        if two_m.abs() > self.two_j as i32 {
            return arg_err(format!("projection 2m={two_m} exceeds j={self}"));
        }
        Ok(())
    }
}

impl fmt::Display for AngularMomentum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.two_j / 2)
        } else {
            write!(f, "{}/2", self.two_j)
        }
    }
}

impl FromStr for AngularMomentum {
    type Err = Error;

    /// Accepts `"2"`, `"3/2"` or `"1.5"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Argument(format!("cannot parse angular momentum {s:?}"));
        let two_j = if let Some((num, den)) = s.split_once('/') {
            let num: u32 = num.trim().parse().map_err(|_| bad())?;
            match den.trim() {
                "1" => 2 * num,
                "2" => num,
                _ => return Err(bad()),
            }
        } else {
            let x: f64 = s.parse().map_err(|_| bad())?;
            let twice = 2.0 * x;
            if !(twice >= 0.0) || (twice - twice.round()).abs() > 1e-9 {
                return Err(bad());
            }
            twice.round() as u32
        };
        if two_j > MAX_TWO_J {
            return arg_err(format!("j={s} exceeds supported range 2j <= {MAX_TWO_J}"));
        }
        Ok(Self { two_j })
    }
}

fn ln_factorials() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACTORIAL_LEN);
        t.push(0.0);
        let mut acc = 0.0f64;
        for k in 1..LN_FACTORIAL_LEN {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln(n!)` from the precomputed table.
pub fn ln_factorial(n: i64) -> f64 {
    assert!(n >= 0, "ln_factorial of negative argument {n}");
    ln_factorials()[n as usize]
}

/// `n!` as a float (exact up to 22!).
pub fn factorial(n: i64) -> f64 {
    assert!(n >= 0);
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// `n!!` with the conventions `0!! = (-1)!! = 1`.
pub fn double_factorial(n: i64) -> f64 {
    assert!(n >= -1);
    let mut acc = 1.0;
    let mut k = n;
    while k > 1 {
        acc *= k as f64;
        k -= 2;
    }
    acc
}

/// Triangle rule on doubled values, including integer perimeter.
pub fn triangle(two_a: u32, two_b: u32, two_c: u32) -> bool {
    let (a, b, c) = (two_a as i64, two_b as i64, two_c as i64);
    c >= (a - b).abs() && c <= a + b && (a + b + c) % 2 == 0
}

fn half(x: i64) -> i64 {
    debug_assert!(x % 2 == 0);
    x / 2
}

/// Clebsch-Gordan coefficient `C^{J M}_{j1 m1 j2 m2}` on doubled arguments.
///
/// Returns 0 for any selection-rule violation, including parity mismatches.
pub fn cg_twice(two_j1: u32, two_m1: i32, two_j2: u32, two_m2: i32, two_j: u32, two_m: i32) -> f64 {
    let (j1, m1, j2, m2, j, m) = (
        two_j1 as i64,
        two_m1 as i64,
        two_j2 as i64,
        two_m2 as i64,
        two_j as i64,
        two_m as i64,
    );
    if m1 + m2 != m || m1.abs() > j1 || m2.abs() > j2 || m.abs() > j {
        return 0.0;
    }
    if (j1 - m1) % 2 != 0 || (j2 - m2) % 2 != 0 || (j - m) % 2 != 0 {
        return 0.0;
    }
    if !triangle(two_j1, two_j2, two_j) {
        return 0.0;
    }
    let f = ln_factorial;
    let ln_pref = 0.5
        * (((j + 1) as f64).ln() + f(half(j1 + j2 - j)) + f(half(j1 - j2 + j)) + f(half(-j1 + j2 + j))
            - f(half(j1 + j2 + j) + 1)
            + f(half(j1 + m1))
            + f(half(j1 - m1))
            + f(half(j2 + m2))
            + f(half(j2 - m2))
            + f(half(j + m))
            + f(half(j - m)));
    let a = half(j1 + j2 - j);
    let b = half(j1 - m1);
    let c = half(j2 + m2);
    let d = half(j - j2 + m1);
    let e = half(j - j1 - m2);
    let k_min = 0.max(-d).max(-e);
    let k_max = a.min(b).min(c);
    let mut sum = 0.0;
    for k in k_min..=k_max {
        let ln_den = f(k) + f(a - k) + f(b - k) + f(c - k) + f(d + k) + f(e + k);
        let term = (ln_pref - ln_den).exp();
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    sum
}

/// Clebsch-Gordan coefficient `C^{J M}_{j1 m1 j2 m2}`; projections are doubled.
pub fn clebsch_gordan(
    j1: AngularMomentum,
    two_m1: i32,
    j2: AngularMomentum,
    two_m2: i32,
    j: AngularMomentum,
    two_m: i32,
) -> Result<f64> {
    for jj in [j1, j2, j] {
        if jj.twice() > MAX_TWO_J {
            return arg_err(format!("j={jj} exceeds supported range"));
        }
    }
    for (jj, mm) in [(j1, two_m1), (j2, two_m2), (j, two_m)] {
        if (jj.twice() as i32 - mm).rem_euclid(2) != 0 {
            return arg_err(format!("projection 2m={mm} has the wrong parity for j={jj}"));
        }
    }
    Ok(cg_twice(j1.twice(), two_m1, j2.twice(), two_m2, j.twice(), two_m))
}

fn ln_delta(a: i64, b: i64, c: i64) -> f64 {
    let f = ln_factorial;
    f(half(a + b - c)) + f(half(a - b + c)) + f(half(-a + b + c)) - f(half(a + b + c) + 1)
}

/// Wigner 6j symbol `{j1 j2 j3; j4 j5 j6}` on doubled arguments.
pub fn wigner6j_twice(two: [u32; 6]) -> f64 {
    let [a, b, c, d, e, f6] = two;
    if !(triangle(a, b, c) && triangle(a, e, f6) && triangle(d, b, f6) && triangle(d, e, c)) {
        return 0.0;
    }
    let [a, b, c, d, e, f6] = two.map(|x| x as i64);
    let ln_pref = 0.5 * (ln_delta(a, b, c) + ln_delta(a, e, f6) + ln_delta(d, b, f6) + ln_delta(d, e, c));
    let t1 = half(a + b + c);
    let t2 = half(a + e + f6);
    let t3 = half(d + b + f6);
    let t4 = half(d + e + c);
    let t5 = half(a + b + d + e);
    let t6 = half(a + c + d + f6);
    let t7 = half(b + c + e + f6);
    let t_min = t1.max(t2).max(t3).max(t4);
    let t_max = t5.min(t6).min(t7);
    let f = ln_factorial;
    let mut sum = 0.0;
    for t in t_min..=t_max {
        let ln_term = f(t + 1) - f(t - t1) - f(t - t2) - f(t - t3) - f(t - t4) - f(t5 - t) - f(t6 - t) - f(t7 - t);
        let term = (ln_pref + ln_term).exp();
        if t % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    sum
}

/// Wigner 6j symbol `{j1 j2 j3; j4 j5 j6}`; zero when a triad fails.
pub fn wigner6j(js: [AngularMomentum; 6]) -> Result<f64> {
    if let Some(j) = js.iter().find(|j| j.twice() > MAX_TWO_J) {
        return arg_err(format!("j={j} exceeds supported range"));
    }
    Ok(wigner6j_twice(js.map(AngularMomentum::twice)))
}

/// Legendre polynomial `P_L(y)` at complex argument, by upward recurrence.
pub fn legendre(l: usize, y: Complex64) -> Complex64 {
    let mut p_prev = Complex64::new(1.0, 0.0);
    if l == 0 {
        return p_prev;
    }
    let mut p = y;
    for k in 1..l {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * y * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = next;
    }
    p
}

/// The polynomial `Q_L(x) = x^L P_L(1/x)`, finite at `x = 0`.
///
/// Only even powers of `x` occur, so the coefficient vector is dense but
/// every odd entry is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledLegendre {
    rank: usize,
    coefficients: Vec<f64>,
}

impl ScaledLegendre {
    fn build(l: usize) -> Self {
        let li = l as i64;
        let mut coefficients = vec![0.0; l + 1];
        for k in 0..=(li / 2) {
            let ln_mag = ln_factorial(2 * li - 2 * k)
                - (li as f64) * std::f64::consts::LN_2
                - ln_factorial(k)
                - ln_factorial(li - k)
                - ln_factorial(li - 2 * k);
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            coefficients[2 * k as usize] = sign * ln_mag.exp();
        }
        Self { rank: l, coefficients }
    }

    /// Table entry for rank `l <= 41`.
    pub fn of_rank(l: usize) -> &'static ScaledLegendre {
        static TABLE: OnceLock<Vec<ScaledLegendre>> = OnceLock::new();
        let table = TABLE.get_or_init(|| (0..=MAX_LEGENDRE_RANK).map(Self::build).collect());
        &table[l]
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Coefficients of `x^0, x^1, ..., x^L`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Horner evaluation of the explicit polynomial.
    ///
    /// The monomial coefficients grow like `2^L` with alternating signs, so
    /// this loses digits at high rank; [`scaled_legendre`] uses the
    /// recurrence instead.
    pub fn eval_polynomial(&self, x: Complex64) -> Complex64 {
        self.coefficients
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
    }
}

/// `Q_L(x) = x^L P_L(1/x)` via `(L+1) Q_{L+1} = (2L+1) Q_L - L x^2 Q_{L-1}`.
pub fn scaled_legendre(l: usize, x: Complex64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    if l <= 1 {
        return one;
    }
    let x2 = x * x;
    let (mut q_prev, mut q) = (one, one);
    for k in 1..l {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * q - kf * x2 * q_prev) / (kf + 1.0);
        q_prev = q;
        q = next;
    }
    q
}

/// Real-argument convenience wrapper for [`scaled_legendre`].
pub fn scaled_legendre_real(l: usize, x: f64) -> f64 {
    scaled_legendre(l, Complex64::new(x, 0.0)).re
}

/// Wigner small-d element `d^j_{m' m}(beta)` on doubled projections.
pub fn wigner_d_element(two_j: u32, two_mp: i32, two_m: i32, beta: f64) -> f64 {
    let (j, mp, m) = (two_j as i64, two_mp as i64, two_m as i64);
    if mp.abs() > j || m.abs() > j || (j - mp) % 2 != 0 || (j - m) % 2 != 0 {
        return 0.0;
    }
    let f = ln_factorial;
    let ln_pref = 0.5 * (f(half(j + mp)) + f(half(j - mp)) + f(half(j + m)) + f(half(j - m)));
    let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
    let a = half(j + m);
    let b = half(j - mp);
    let d = half(mp - m);
    let k_min = 0.max(-d);
    let k_max = a.min(b);
    let mut sum = 0.0;
    for k in k_min..=k_max {
        let ln_den = f(a - k) + f(k) + f(b - k) + f(d + k);
        let cos_pow = j - 2 * k - d;
        let sin_pow = 2 * k + d;
        let term = (ln_pref - ln_den).exp() * c.powi(cos_pow as i32) * s.powi(sin_pow as i32);
        if (k + d) % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    sum
}

/// Wigner small-d matrix `d^j(beta)` with rows/columns in descending Zeeman order.
pub fn wigner_d_small(j: AngularMomentum, beta: f64) -> DMatrix<f64> {
    let n = j.dim();
    DMatrix::from_fn(n, n, |r, c| {
        wigner_d_element(j.twice(), j.projection_at(r), j.projection_at(c), beta)
    })
}

/// Full Wigner matrix `D^j_{m' m}(alpha, beta, gamma) = e^{-i m' alpha} d^j_{m' m}(beta) e^{-i m gamma}`.
pub fn wigner_d_full(j: AngularMomentum, alpha: f64, beta: f64, gamma: f64) -> DMatrix<Complex64> {
    let d = wigner_d_small(j, beta);
    DMatrix::from_fn(d.nrows(), d.ncols(), |r, c| {
        let mp = j.projection_at(r) as f64 / 2.0;
        let m = j.projection_at(c) as f64 / 2.0;
        Complex64::from_polar(d[(r, c)], -(mp * alpha + m * gamma))
    })
}
