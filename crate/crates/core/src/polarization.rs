//! Polarization vectors, complex-direction spherical harmonics and tensor powers.
//!
//! Vectors are stored by their covariant spherical components
//! `a_q = a . e_q` in the order `(q = +1, 0, -1)` with
//! `e_{+-1} = -+(e_x +- i e_y)/sqrt 2` and `e_0 = e_z`. The bilinear dot product
//! is `(a.b) = sum_q (-1)^q a_q b_{-q}`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, SQRT_2};
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::angular::{cg_twice, double_factorial, factorial, wigner_d_full, AngularMomentum};
use crate::error::{arg_err, Error, Result};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);
const I: C = C::new(0.0, 1.0);

/// Signature of a Clebsch-Gordan routine on doubled arguments.
pub type CgFn = fn(u32, i32, u32, i32, u32, i32) -> f64;

/// Complex 3-vector in covariant spherical components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexVector3 {
    pub plus: C,
    pub zero: C,
    pub minus: C,
}

impl ComplexVector3 {
    pub const fn new(plus: C, zero: C, minus: C) -> Self {
        Self { plus, zero, minus }
    }

    /// Spherical basis vector `e_q` as a vector (not a component list).
    pub fn basis(q: i32) -> Self {
        // covariant components of e_q are (e_q . e_{q'}) = (-1)^q delta_{q', -q}
        match q {
            1 => Self::new(ZERO, ZERO, -ONE),
            0 => Self::new(ZERO, ONE, ZERO),
            -1 => Self::new(-ONE, ZERO, ZERO),
            _ => panic!("spherical index {q} out of range"),
        }
    }

    /// Covariant component `a_q`.
    pub fn component(&self, q: i32) -> C {
        match q {
            1 => self.plus,
            0 => self.zero,
            -1 => self.minus,
            _ => ZERO,
        }
    }

    /// Components in the order `q = +1, 0, -1`.
    pub fn components(&self) -> [C; 3] {
        [self.plus, self.zero, self.minus]
    }

    pub fn from_cartesian(v: [C; 3]) -> Self {
        let [x, y, z] = v;
        Self {
            plus: -(x + I * y) * FRAC_1_SQRT_2,
            zero: z,
            minus: (x - I * y) * FRAC_1_SQRT_2,
        }
    }

    pub fn to_cartesian(&self) -> [C; 3] {
        [
            (self.minus - self.plus) * FRAC_1_SQRT_2,
            I * (self.minus + self.plus) * FRAC_1_SQRT_2,
            self.zero,
        ]
    }

    /// Bilinear dot product `(a.b)`, no complex conjugation.
    pub fn dot(&self, other: &Self) -> C {
        -self.plus * other.minus + self.zero * other.zero - self.minus * other.plus
    }

    /// The conjugate vector `a*`, with `(a*)_q = (-1)^q (a_{-q})*`.
    pub fn conj(&self) -> Self {
        Self {
            plus: -self.minus.conj(),
            zero: self.zero.conj(),
            minus: -self.plus.conj(),
        }
    }

    /// Hermitian norm squared `(a*.a)`.
    pub fn norm_sqr(&self) -> f64 {
        self.plus.norm_sqr() + self.zero.norm_sqr() + self.minus.norm_sqr()
    }

    pub fn cross(&self, other: &Self) -> Self {
        let [a1, a2, a3] = self.to_cartesian();
        let [b1, b2, b3] = other.to_cartesian();
        Self::from_cartesian([a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1])
    }

    pub fn scale(&self, s: C) -> Self {
        Self::new(self.plus * s, self.zero * s, self.minus * s)
    }

    /// Ket coefficients `c_m = (-1)^m a_{-m}` of the `j = 1` state this vector
    /// represents, descending `m = +1, 0, -1`.
    pub fn ket(&self) -> [C; 3] {
        [-self.minus, self.zero, -self.plus]
    }

    pub fn from_ket(c: [C; 3]) -> Self {
        Self::new(-c[2], c[1], -c[0])
    }

    /// Rank-1 spherical tensor with the same components.
    pub fn to_tensor(&self) -> SphericalTensor {
        SphericalTensor {
            two_rank: 2,
            components: vec![self.plus, self.zero, self.minus],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.components().iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

impl Add for ComplexVector3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.plus + o.plus, self.zero + o.zero, self.minus + o.minus)
    }
}

impl Sub for ComplexVector3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.plus - o.plus, self.zero - o.zero, self.minus - o.minus)
    }
}

impl Neg for ComplexVector3 {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-ONE)
    }
}

impl Mul<C> for ComplexVector3 {
    type Output = Self;
    fn mul(self, s: C) -> Self {
        self.scale(s)
    }
}

/// Irreducible spherical tensor with components listed for `M = L, L-1, ..., -L`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalTensor {
    pub two_rank: u32,
    pub components: Vec<C>,
}

impl SphericalTensor {
    pub fn zeros(rank: AngularMomentum) -> Self {
        Self {
            two_rank: rank.twice(),
            components: vec![ZERO; rank.dim()],
        }
    }

    pub fn rank(&self) -> AngularMomentum {
        AngularMomentum::from_twice(self.two_rank)
    }

    /// Component `T_{L M}` for doubled projection `two_m`.
    pub fn get(&self, two_m: i32) -> C {
        match self.rank().index_of(two_m) {
            Some(i) => self.components[i],
            None => ZERO,
        }
    }

    pub fn scale(&self, s: C) -> Self {
        Self {
            two_rank: self.two_rank,
            components: self.components.iter().map(|c| c * s).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.two_rank, other.two_rank);
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Irreducible product `{s (x) t}_K` with a caller-supplied CG routine.
pub fn couple_with(s: &SphericalTensor, t: &SphericalTensor, two_k: u32, cg: CgFn) -> SphericalTensor {
    let k = AngularMomentum::from_twice(two_k);
    let mut out = SphericalTensor::zeros(k);
    for (i, two_m) in k.projections().enumerate() {
        let mut acc = ZERO;
        for (a, two_m1) in s.rank().projections().enumerate() {
            let two_m2 = two_m - two_m1;
            if let Some(b) = t.rank().index_of(two_m2) {
                let c = cg(s.two_rank, two_m1, t.two_rank, two_m2, two_k, two_m);
                if c != 0.0 {
                    acc += s.components[a] * t.components[b] * c;
                }
            }
        }
        out.components[i] = acc;
    }
    out
}

/// Irreducible product `{s (x) t}_K`.
pub fn couple(s: &SphericalTensor, t: &SphericalTensor, k: AngularMomentum) -> Result<SphericalTensor> {
    if !crate::angular::triangle(s.two_rank, t.two_rank, k.twice()) {
        return arg_err(format!("ranks {} and {} cannot couple to {k}", s.rank(), t.rank()));
    }
    Ok(couple_with(s, t, k.twice(), cg_twice))
}

/// `L`-fold tensor power `{...{{a (x) a}_2 (x) a}_3 ... (x) a}_L`.
pub fn tensor_power_with(a: &ComplexVector3, l: usize, cg: CgFn) -> SphericalTensor {
    if l == 0 {
        return SphericalTensor {
            two_rank: 0,
            components: vec![ONE],
        };
    }
    let base = a.to_tensor();
    let mut acc = base.clone();
    for k in 2..=l {
        acc = couple_with(&acc, &base, 2 * k as u32, cg);
    }
    acc
}

/// `L`-fold tensor power `{a}_L`; `L = 1` returns `a` itself and `L = 0` the scalar 1.
pub fn tensor_power(a: &ComplexVector3, l: usize) -> SphericalTensor {
    tensor_power_with(a, l, cg_twice)
}

/// `sqrt((2L-1)!!/L!)`, the factor between `{a}_L` and `a^L n_L(a)`.
pub fn harmonic_factor(l: usize) -> f64 {
    (double_factorial(2 * l as i64 - 1) / factorial(l as i64)).sqrt()
}

/// Scale-free harmonic `n_{LM}(a) = a^{-L} sqrt((2L-1)!!/L!) {a}_L` with `a = sqrt(a.a)`.
pub fn spherical_harmonic(a: &ComplexVector3, l: usize) -> Result<SphericalTensor> {
    spherical_harmonic_with(a, l, cg_twice)
}

pub fn spherical_harmonic_with(a: &ComplexVector3, l: usize, cg: CgFn) -> Result<SphericalTensor> {
    let aa = a.dot(a);
    if aa.norm() <= 1e-15 * a.norm_sqr() {
        return Err(Error::SingularDirection);
    }
    let root = aa.sqrt();
    let scale = root.powi(-(l as i32)) * harmonic_factor(l);
    Ok(tensor_power_with(a, l, cg).scale(scale))
}

/// `(s.t) = sum_M (-1)^M s_{L M} t_{L -M}` for integer ranks.
pub fn spherical_dot(s: &SphericalTensor, t: &SphericalTensor) -> Result<C> {
    if s.two_rank != t.two_rank {
        return arg_err(format!("rank mismatch {} vs {}", s.rank(), t.rank()));
    }
    if !s.two_rank.is_multiple_of(2) {
        return arg_err("spherical_dot is defined for integer ranks");
    }
    let mut acc = ZERO;
    for two_m in s.rank().projections() {
        let sign = if (two_m / 2) % 2 == 0 { 1.0 } else { -1.0 };
        acc += s.get(two_m) * t.get(-two_m) * sign;
    }
    Ok(acc)
}

/// Coordinate frame in which a polarization is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Frame {
    /// `Oz` normal to the ellipse, `Ox` along the major axis.
    Conventional,
    /// Cylinder axis as `Oz`, sign fixed as `e = sqrt(cos 2eps) e_0 - sqrt 2 sin(eps) e_{+1}`.
    NaturalPlus,
    /// The second cylinder, with the opposite rotation angle.
    NaturalMinus,
    /// Built from an explicit vector.
    Custom,
}

impl std::str::FromStr for Frame {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "conventional" | "conv" => Ok(Frame::Conventional),
            "naturalplus" | "natural" | "plus" => Ok(Frame::NaturalPlus),
            "naturalminus" | "minus" => Ok(Frame::NaturalMinus),
            _ => arg_err(format!("unknown frame {s:?}")),
        }
    }
}

/// A unit polarization vector with `Im(e.e) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Polarization {
    e: ComplexVector3,
    epsilon: f64,
    frame: Frame,
}

/// `e = phase * R e_nat(|eps|)`, with `R` a proper rotation acting on Cartesian vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NaturalDecomposition {
    pub epsilon: f64,
    pub rotation: Matrix3<f64>,
    pub phase: C,
}

/// Angle between the conventional and the natural `Oz` axes, `cos theta = |tan eps|`.
pub fn natural_frame_angle(epsilon: f64) -> f64 {
    let c = epsilon.cos();
    (cos_two_eps(epsilon).sqrt() / c).atan2(epsilon.sin().abs() / c)
}

/// `cos 2eps`, exactly zero at circular polarization.
pub fn cos_two_eps(epsilon: f64) -> f64 {
    if FRAC_PI_4 - epsilon.abs() < 1e-15 {
        0.0
    } else {
        (2.0 * epsilon).cos().max(0.0)
    }
}

fn natural_components(epsilon: f64) -> ComplexVector3 {
    let c2 = cos_two_eps(epsilon).sqrt();
    ComplexVector3::new(ZERO, C::new(c2, 0.0), C::new(-SQRT_2 * epsilon.sin(), 0.0))
}

impl Polarization {
    /// Elliptical polarization of ellipticity `eps` expressed in `frame`.
    pub fn from_ellipticity(epsilon: f64, frame: Frame) -> Result<Self> {
        if !epsilon.is_finite() || epsilon.abs() > FRAC_PI_4 + 1e-12 {
            return arg_err(format!("ellipticity {epsilon} outside [-pi/4, pi/4]"));
        }
        let epsilon = epsilon.clamp(-FRAC_PI_4, FRAC_PI_4);
        let e = match frame {
            Frame::NaturalPlus => natural_components(epsilon),
            // rotation by pi about Oz' and an overall sign: the cylinder axis reversed
            Frame::NaturalMinus => {
                let n = natural_components(epsilon);
                ComplexVector3::new(ZERO, -n.zero, -n.minus)
            }
            Frame::Conventional => {
                let (s, c) = epsilon.sin_cos();
                ComplexVector3::new(
                    C::new(-(c - s) * FRAC_1_SQRT_2, 0.0),
                    ZERO,
                    C::new((c + s) * FRAC_1_SQRT_2, 0.0),
                )
            }
            Frame::Custom => return arg_err("use Polarization::from_vector for custom frames"),
        };
        Ok(Self { e, epsilon, frame })
    }

    /// Wraps an explicit vector; it must be unit and satisfy `Im(e.e) = 0`.
    pub fn from_vector(e: ComplexVector3) -> Result<Self> {
        let n = e.norm_sqr();
        if (n - 1.0).abs() > 1e-10 {
            return arg_err(format!("polarization not normalized: (e*.e) = {n}"));
        }
        let x = e.dot(&e);
        if x.im.abs() > 1e-10 {
            return arg_err(format!("Im(e.e) = {} must vanish", x.im));
        }
        let epsilon = 0.5 * x.re.abs().min(1.0).acos();
        Ok(Self {
            e,
            epsilon,
            frame: Frame::Custom,
        })
    }

    pub fn vector(&self) -> &ComplexVector3 {
        &self.e
    }

    /// Ellipticity; for custom vectors only `|eps|` is defined.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    /// `(e.e)`, equal to `+-cos 2eps`.
    pub fn self_dot(&self) -> f64 {
        self.e.dot(&self.e).re
    }

    /// Natural-frame rotation angle with `cos theta = |tan eps|`.
    pub fn theta(&self) -> f64 {
        natural_frame_angle(self.epsilon)
    }

    pub fn is_circular(&self) -> bool {
        self.self_dot().abs() < 1e-15
    }

    pub fn is_linear(&self) -> bool {
        1.0 - self.self_dot().abs() < 1e-15
    }

    /// The complex conjugate polarization `e*`.
    pub fn conj(&self) -> Self {
        Self {
            e: self.e.conj(),
            epsilon: -self.epsilon,
            frame: Frame::Custom,
        }
    }

    /// Rotation and phase relating this vector to the natural-plus form at `|eps|`.
    pub fn natural_decomposition(&self) -> NaturalDecomposition {
        let x = self.e.dot(&self.e);
        let phase = if x.norm() > 1e-14 { (x / x.norm()).sqrt() } else { ONE };
        let target = self.e.scale(phase.conj()).to_cartesian();
        let u = Vector3::new(target[0].re, target[1].re, target[2].re);
        let v = Vector3::new(target[0].im, target[1].im, target[2].im);
        let eps = 0.5 * x.norm().min(1.0).acos();
        let nat = natural_components(eps).to_cartesian();
        let u0 = Vector3::new(nat[0].re, nat[1].re, nat[2].re);
        let v0 = Vector3::new(nat[0].im, nat[1].im, nat[2].im);
        let rotation = frame_of(&u, &v) * frame_of(&u0, &v0).transpose();
        NaturalDecomposition {
            epsilon: eps,
            rotation,
            phase,
        }
    }
}

/// Orthonormal right-handed frame whose first two columns follow `u` and `v`.
fn frame_of(u: &Vector3<f64>, v: &Vector3<f64>) -> Matrix3<f64> {
    let a = u.normalize();
    let b = if v.norm() > 1e-9 * u.norm() {
        let w = v - a * a.dot(v);
        w.normalize()
    } else {
        // any direction normal to u
        let trial = if a.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        (trial - a * a.dot(&trial)).normalize()
    };
    let c = a.cross(&b);
    Matrix3::from_columns(&[a, b, c])
}

/// Cartesian rotation matrix to zyz Euler angles `(alpha, beta, gamma)`.
pub fn euler_zyz(r: &Matrix3<f64>) -> (f64, f64, f64) {
    let sb = (r[(0, 2)].powi(2) + r[(1, 2)].powi(2)).sqrt();
    let beta = sb.atan2(r[(2, 2)]);
    if sb > 1e-12 {
        (r[(1, 2)].atan2(r[(0, 2)]), beta, r[(2, 1)].atan2(-r[(2, 0)]))
    } else if r[(2, 2)] > 0.0 {
        (r[(1, 0)].atan2(r[(0, 0)]), 0.0, 0.0)
    } else {
        ((-r[(1, 0)]).atan2(-r[(0, 0)]), std::f64::consts::PI, 0.0)
    }
}

/// Rotation operator `D^j(R)` on kets for a Cartesian rotation `R`.
pub fn rotation_operator(j: AngularMomentum, r: &Matrix3<f64>) -> DMatrix<C> {
    let (a, b, g) = euler_zyz(r);
    wigner_d_full(j, a, b, g)
}

/// Circular vectors `C` with `(C.C) = 0`, `(e.C) = 0`, `(C*.C) = 1`.
///
/// Fails at linear polarization, where the closed formula is 0/0.
pub fn circular_pair(e: &ComplexVector3) -> Result<(ComplexVector3, ComplexVector3)> {
    let x = e.dot(e);
    let ax = x.norm();
    if 1.0 - ax < 1e-12 {
        return Err(Error::DegeneratePair);
    }
    let ec = e.conj();
    let exe = e.cross(&ec);
    let first = e.cross(&exe);
    let second = exe.scale(I * x.sqrt());
    let den = ((1.0 - ax * ax) * (1.0 + ax)).sqrt();
    let inv = C::new(1.0 / den, 0.0);
    Ok(((first + second) * inv, (first - second) * inv))
}

/// Like [`circular_pair`], falling back at linear polarization to the two
/// opposite circular vectors in the plane normal to `e`.
pub fn circular_pair_limit(e: &ComplexVector3) -> (ComplexVector3, ComplexVector3) {
    match circular_pair(e) {
        Ok(p) => p,
        Err(_) => {
            // e = phase * real unit vector
            let cart = e.to_cartesian();
            let k = cart
                .iter()
                .copied()
                .max_by(|a, b| a.norm().total_cmp(&b.norm()))
                .unwrap();
            let ph = k / k.norm();
            let re = Vector3::new((cart[0] / ph).re, (cart[1] / ph).re, (cart[2] / ph).re).normalize();
            let frame = frame_of(&re, &Vector3::zeros());
            let (v1, v2) = (frame.column(1), frame.column(2));
            let c = |sgn: f64| {
                ComplexVector3::from_cartesian([
                    C::new(v1[0], sgn * v2[0]) * FRAC_1_SQRT_2,
                    C::new(v1[1], sgn * v2[1]) * FRAC_1_SQRT_2,
                    C::new(v1[2], sgn * v2[2]) * FRAC_1_SQRT_2,
                ])
            };
            (c(1.0), c(-1.0))
        }
    }
}

/// Real unit spin direction `n = i C x C*` of a circular vector.
pub fn spin_direction(c: &ComplexVector3) -> Vector3<f64> {
    let n = c.cross(&c.conj()).scale(I).to_cartesian();
    Vector3::new(n[0].re, n[1].re, n[2].re)
}

#[cfg(test)]
fn vec_close(a: &ComplexVector3, b: &ComplexVector3) -> f64 {
    (*a - *b).max_abs()
}
