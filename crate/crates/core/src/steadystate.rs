//! Analytical steady states of a `Jg -> Je` dipole transition.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::angular::{double_factorial, factorial, scaled_legendre_real, wigner_d_element, AngularMomentum};
use crate::error::{arg_err, Error, Result};
use crate::operators::{
    coupling_operator, dipole_components, expansion_coefficient, natural, solve_x, v_l_scaled, CMat, Normalization,
};
use crate::polarization::{
    circular_pair, euler_zyz, rotation_operator, spherical_harmonic, spin_direction, tensor_power, ComplexVector3,
    Polarization,
};

type C = Complex64;

/// The four transition classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransitionClass {
    /// a) `J -> J-1`, two dark states.
    DarkTwoDim,
    /// b) `J -> J`, integer `J`, one dark state.
    DarkUnique,
    /// c) `J -> J`, half-integer `J`, no dark state except at circular polarization.
    NoDarkHalfInt,
    /// d) `J -> J+1`, no dark state.
    NoDarkPlus,
}

impl TransitionClass {
    /// Dimension of the dark subspace for non-circular polarization.
    pub fn dark_dimension(self) -> usize {
        match self {
            TransitionClass::DarkTwoDim => 2,
            TransitionClass::DarkUnique => 1,
            _ => 0,
        }
    }

    pub fn letter(self) -> char {
        match self {
            TransitionClass::DarkTwoDim => 'a',
            TransitionClass::DarkUnique => 'b',
            TransitionClass::NoDarkHalfInt => 'c',
            TransitionClass::NoDarkPlus => 'd',
        }
    }

    pub fn has_dark_states(self) -> bool {
        self.dark_dimension() > 0
    }
}

/// A classified transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransitionSpec {
    pub jg: AngularMomentum,
    pub je: AngularMomentum,
    pub class: TransitionClass,
}

impl TransitionSpec {
    pub fn n_g(&self) -> usize {
        self.jg.dim()
    }

    pub fn n_e(&self) -> usize {
        self.je.dim()
    }

    /// Dark-subspace dimension at polarization `pol` (class c gains one at circular).
    pub fn dark_dimension_at(&self, pol: &Polarization) -> usize {
        match self.class {
            TransitionClass::NoDarkHalfInt if pol.is_circular() => 1,
            c => c.dark_dimension(),
        }
    }
}

/// Classify `jg -> je`.
pub fn classify(jg: AngularMomentum, je: AngularMomentum) -> Result<TransitionSpec> {
    let (g, e) = (jg.twice() as i64, je.twice() as i64);
    let forbidden = || Error::ForbiddenTransition {
        jg: jg.to_string(),
        je: je.to_string(),
    };
    if (g == 0 && e == 0) || (g - e).abs() > 2 || (g - e) % 2 != 0 {
        return Err(forbidden());
    }
    let class = match e - g {
        -2 => TransitionClass::DarkTwoDim,
        2 => TransitionClass::NoDarkPlus,
        _ if jg.is_integer() => TransitionClass::DarkUnique,
        _ => TransitionClass::NoDarkHalfInt,
    };
    Ok(TransitionSpec { jg, je, class })
}

/// Field parameters, all in angular-frequency units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldParams {
    pub rabi: C,
    pub detuning: f64,
    pub gamma: f64,
    pub bandwidth: f64,
}

impl FieldParams {
    pub fn new(rabi: C, detuning: f64, gamma: f64, bandwidth: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return arg_err(format!("gamma {gamma} must be positive"));
        }
        if !(bandwidth >= 0.0) || !bandwidth.is_finite() {
            return arg_err(format!("bandwidth {bandwidth} must be non-negative"));
        }
        if !detuning.is_finite() || !rabi.re.is_finite() || !rabi.im.is_finite() {
            return arg_err("non-finite field parameter");
        }
        Ok(Self {
            rabi,
            detuning,
            gamma,
            bandwidth,
        })
    }

    /// Monochromatic field with real `Omega` chosen to give saturation `s`.
    pub fn from_saturation(s: f64, detuning: f64, gamma: f64) -> Result<Self> {
        if !(s >= 0.0) || !s.is_finite() {
            return arg_err(format!("saturation {s} must be non-negative"));
        }
        let omega = (s * (gamma * gamma / 4.0 + detuning * detuning)).sqrt();
        Self::new(C::new(omega, 0.0), detuning, gamma, 0.0)
    }

    /// `S = |Omega|^2 / (gamma^2/4 + delta^2)`.
    pub fn saturation(&self) -> f64 {
        self.rabi.norm_sqr() / (self.gamma * self.gamma / 4.0 + self.detuning * self.detuning)
    }

    /// `R + iL = |Omega|^2 / (mu + gamma/2 - i delta)`.
    pub fn broadband_rl(&self) -> (f64, f64) {
        let z = C::new(self.rabi.norm_sqr(), 0.0) / C::new(self.bandwidth + self.gamma / 2.0, -self.detuning);
        (z.re, z.im)
    }

    /// Prefactor `-Omega/(delta + i gamma/2)` of the optical coherences.
    pub fn coherence_factor(&self) -> C {
        -self.rabi / C::new(self.detuning, self.gamma / 2.0)
    }
}

/// Rotating-frame density matrix in block form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    pub rho_gg: CMat,
    pub rho_ee: CMat,
    pub rho_eg: CMat,
}

impl DensityMatrix {
    pub fn zeros(n_g: usize, n_e: usize) -> Self {
        Self {
            rho_gg: CMat::zeros(n_g, n_g),
            rho_ee: CMat::zeros(n_e, n_e),
            rho_eg: CMat::zeros(n_e, n_g),
        }
    }

    /// Pure ground state `|psi><psi|`.
    pub fn pure_ground(psi: &DVector<C>, n_e: usize) -> Self {
        let n_g = psi.len();
        let mut out = Self::zeros(n_g, n_e);
        out.rho_gg = psi * psi.adjoint();
        out
    }

    pub fn n_g(&self) -> usize {
        self.rho_gg.nrows()
    }

    pub fn n_e(&self) -> usize {
        self.rho_ee.nrows()
    }

    pub fn trace(&self) -> C {
        self.rho_gg.trace() + self.rho_ee.trace()
    }

    pub fn excited_population(&self) -> f64 {
        self.rho_ee.trace().re
    }

    /// Full matrix with the ground block first.
    pub fn to_full(&self) -> CMat {
        let (ng, ne) = (self.n_g(), self.n_e());
        let mut m = CMat::zeros(ng + ne, ng + ne);
        m.view_mut((0, 0), (ng, ng)).copy_from(&self.rho_gg);
        m.view_mut((ng, ng), (ne, ne)).copy_from(&self.rho_ee);
        m.view_mut((ng, 0), (ne, ng)).copy_from(&self.rho_eg);
        m.view_mut((0, ng), (ng, ne)).copy_from(&self.rho_eg.adjoint());
        m
    }

    pub fn from_full(m: &CMat, n_g: usize) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() < n_g {
            return arg_err("full density matrix has the wrong shape");
        }
        let n_e = m.nrows() - n_g;
        Ok(Self {
            rho_gg: m.view((0, 0), (n_g, n_g)).into_owned(),
            rho_ee: m.view((n_g, n_g), (n_e, n_e)).into_owned(),
            rho_eg: m.view((n_g, 0), (n_e, n_g)).into_owned(),
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let d = |a: &CMat, b: &CMat| (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max);
        d(&self.rho_gg, &other.rho_gg)
            .max(d(&self.rho_ee, &other.rho_ee))
            .max(d(&self.rho_eg, &other.rho_eg))
    }

    /// Largest deviation from Hermiticity of the diagonal blocks.
    pub fn hermiticity_error(&self) -> f64 {
        let d = |a: &CMat| (a - a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        d(&self.rho_gg).max(d(&self.rho_ee))
    }

    /// Smallest eigenvalue of the full matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.to_full();
        let h = (&m + m.adjoint()) * C::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Checks Hermiticity, unit trace and positivity to `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.hermiticity_error() > tol {
            return arg_err("density matrix is not Hermitian");
        }
        if (self.trace() - 1.0).norm() > tol {
            return arg_err(format!("trace {} differs from 1", self.trace()));
        }
        if self.min_eigenvalue() < -tol {
            return arg_err("density matrix is not positive semidefinite");
        }
        Ok(())
    }
}

/// Steady state and its invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateResult {
    pub class: TransitionClass,
    pub rho: DensityMatrix,
    /// `lambda_i^2`, descending.
    pub lambdas: Vec<f64>,
    /// `nu_i^2` on the excited natural basis (classes c and d).
    pub nus: Option<Vec<f64>>,
    pub alpha0: Option<f64>,
    pub alpha1: Option<f64>,
    pub beta: Option<f64>,
    /// Normalization in which `alpha0`, `alpha1`, `beta` and `nus` are reported.
    pub normalization: Normalization,
    pub pi_e: f64,
    pub dark_dimension: usize,
}

/// Dark states of the ground level.
#[derive(Debug, Clone, PartialEq)]
pub struct DarkSubspace {
    /// Orthonormal basis, one column vector each.
    pub basis: Vec<DVector<C>>,
    /// Class a: the two coherent states before orthogonalization.
    pub coherent_pair: Option<(DVector<C>, DVector<C>)>,
    /// Class a: `|<psi1|psi2>|`.
    pub overlap: Option<f64>,
}

impl DarkSubspace {
    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    /// Orthogonal projector onto the subspace.
    pub fn projector(&self) -> CMat {
        let n = self.basis.first().map_or(0, |v| v.len());
        let mut p = CMat::zeros(n, n);
        for v in &self.basis {
            p += v * v.adjoint();
        }
        p
    }
}

/// Ket components of a spherical tensor: `c_mu = (-1)^mu t_{-mu}`.
fn tensor_ket(t: &crate::polarization::SphericalTensor) -> DVector<C> {
    let j = t.rank();
    DVector::from_iterator(
        j.dim(),
        j.projections().map(|two_m| {
            let sign = if (two_m / 2) % 2 == 0 { 1.0 } else { -1.0 };
            t.get(-two_m) * sign
        }),
    )
}

/// `D(alpha, beta, 0)|J, m>` where `(alpha, beta)` are the polar angles of `n`.
fn rotated_state(j: AngularMomentum, n: &nalgebra::Vector3<f64>, two_m: i32) -> DVector<C> {
    let n = n.normalize();
    let beta = n.z.clamp(-1.0, 1.0).acos();
    let alpha = if n.x.abs() + n.y.abs() < 1e-15 {
        0.0
    } else {
        n.y.atan2(n.x)
    };
    DVector::from_iterator(
        j.dim(),
        j.projections().map(|mp| {
            let ph = C::from_polar(1.0, -(mp as f64) / 2.0 * alpha);
            ph * wigner_d_element(j.twice(), mp, two_m, beta)
        }),
    )
}

/// Dark states of the ground level.
pub fn dark_subspace(spec: &TransitionSpec, pol: &Polarization) -> Result<DarkSubspace> {
    let e = pol.vector();
    let j = spec.jg;
    match spec.class {
        TransitionClass::DarkUnique => {
            let x = pol.self_dot().abs();
            let l = j.twice() as usize / 2;
            // <{e}_J|{e}_J> = J!/(2J-1)!! Q_J(|e.e|)
            let n2 = factorial(l as i64) / double_factorial(2 * l as i64 - 1) * scaled_legendre_real(l, x);
            let psi = tensor_ket(&tensor_power(e, l)) / C::new(n2.sqrt(), 0.0);
            Ok(DarkSubspace {
                basis: vec![psi],
                coherent_pair: None,
                overlap: None,
            })
        }
        TransitionClass::NoDarkHalfInt if pol.is_circular() => {
            let n = spin_direction(e);
            Ok(DarkSubspace {
                basis: vec![rotated_state(j, &n, j.twice() as i32)],
                coherent_pair: None,
                overlap: None,
            })
        }
        TransitionClass::DarkTwoDim => class_a_dark(j, pol),
        other => Err(Error::NoDarkState(other)),
    }
}

fn class_a_dark(j: AngularMomentum, pol: &Polarization) -> Result<DarkSubspace> {
    let e = pol.vector();
    let tj = j.twice() as i32;
    if pol.is_circular() {
        let n = spin_direction(e);
        let basis = vec![rotated_state(j, &n, tj), rotated_state(j, &n, tj - 2)];
        return Ok(DarkSubspace {
            basis,
            coherent_pair: None,
            overlap: Some(1.0),
        });
    }
    let (c1, c2) = match circular_pair(e) {
        Ok(p) => p,
        Err(_) => crate::polarization::circular_pair_limit(e),
    };
    let p1 = rotated_state(j, &spin_direction(&c1), tj);
    let mut p2 = rotated_state(j, &spin_direction(&c2), tj);
    let ov = p1.dotc(&p2);
    let ovn = ov.norm();
    if ovn > 1e-300 {
        p2 *= ov.conj() / ovn;
    }
    let plus = (&p1 + &p2) / C::new((2.0 * (1.0 + ovn)).sqrt(), 0.0);
    let minus = (&p1 - &p2) / C::new((2.0 * (1.0 - ovn)).sqrt(), 0.0);
    Ok(DarkSubspace {
        basis: vec![plus, minus],
        coherent_pair: Some((p1, p2)),
        overlap: Some(ovn),
    })
}

/// Expected class-a overlap `((1-|e.e|)/(1+|e.e|))^J`.
pub fn dark_overlap_formula(j: AngularMomentum, self_dot: f64) -> f64 {
    let x = self_dot.abs().min(1.0);
    ((1.0 - x) / (1.0 + x)).powf(j.value())
}

/// Natural basis of the coupling `V = sum_i lambda_i |(e)i><(g)i|`.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalBasis {
    /// `lambda_i^2` for every ground column, descending.
    pub lambdas: Vec<f64>,
    /// Ground basis, columns paired with excited columns `0..rank`.
    pub ground: CMat,
    /// Excited basis; columns beyond the paired ones span the kernel of `V^+`.
    pub excited: CMat,
    pub rank: usize,
    /// `nu_i^2 = <(e)i|W W^+|(e)i>` for classes c and d.
    pub nus: Option<Vec<f64>>,
    pub normalization: Normalization,
}

impl NaturalBasis {
    /// `sum_i lambda_i |(e)i><(g)i|`.
    pub fn reconstruct(&self) -> CMat {
        let mut v = CMat::zeros(self.excited.nrows(), self.ground.nrows());
        for i in 0..self.rank {
            v += self.excited.column(i) * self.ground.column(i).adjoint() * C::new(self.lambdas[i].sqrt(), 0.0);
        }
        v
    }
}

fn hcat(n: usize, cols: Vec<DVector<C>>) -> CMat {
    if cols.is_empty() {
        CMat::zeros(n, 0)
    } else {
        CMat::from_columns(&cols)
    }
}

fn orthonormal_complement(cols: &CMat, n: usize) -> CMat {
    let mut p = CMat::identity(n, n);
    for c in cols.column_iter() {
        p -= c * c.adjoint();
    }
    let eig = p.symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    hcat(
        n,
        idx.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect(),
    )
}

/// Rotate degenerate clusters so that `op` is diagonal; returns the diagonal.
fn diagonalize_clusters(keys: &[f64], op: &CMat, primary: &mut CMat, partner: Option<&mut CMat>) -> Vec<f64> {
    let n = primary.ncols();
    let mut diag = vec![0.0; n];
    let scale = keys.iter().copied().fold(1.0, f64::max);
    let mut q_total = CMat::identity(n, n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (keys[end] - keys[start]).abs() <= 1e-9 * scale {
            end += 1;
        }
        let block = primary.columns(start, end - start).into_owned();
        let sub = block.adjoint() * op * &block;
        let sub = (&sub + sub.adjoint()) * C::new(0.5, 0.0);
        let eig = sub.symmetric_eigen();
        let mut order: Vec<usize> = (0..end - start).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        for (k, &o) in order.iter().enumerate() {
            diag[start + k] = eig.eigenvalues[o];
            let col = eig.eigenvectors.column(o).into_owned();
            q_total.view_mut((start, start + k), (end - start, 1)).copy_from(&col);
        }
        start = end;
    }
    *primary = &*primary * &q_total;
    if let Some(p) = partner {
        let m = p.ncols().min(n);
        let q = q_total.view((0, 0), (m, m)).into_owned();
        let rest = p.columns(m, p.ncols() - m).into_owned();
        let head = p.columns(0, m) * q;
        *p = hcat(
            p.nrows(),
            head.column_iter()
                .map(|c| c.into_owned())
                .chain(rest.column_iter().map(|c| c.into_owned()))
                .collect(),
        );
    }
    diag
}

/// Eigen-systems of `V^+V` and `VV^+` with the phase-consistent pairing.
pub fn natural_basis(spec: &TransitionSpec, pol: &Polarization) -> Result<NaturalBasis> {
    let v = coupling_operator(spec.jg, spec.je, pol.vector())?;
    let (ng, ne) = (spec.n_g(), spec.n_e());
    let svd = v.clone().svd(true, true);
    let u = svd.u.ok_or(Error::Singular("SVD of V"))?;
    let vt = svd.v_t.ok_or(Error::Singular("SVD of V"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| svd.singular_values[i] > 1e-12 * smax.max(1e-300))
        .collect();
    let rank = keep.len();
    let mut lambdas: Vec<f64> = keep.iter().map(|&i| svd.singular_values[i].powi(2)).collect();
    let g_pair = hcat(ng, keep.iter().map(|&i| vt.row(i).adjoint()).collect());
    let e_pair = hcat(ne, keep.iter().map(|&i| u.column(i).into_owned()).collect());
    let g_rest = orthonormal_complement(&g_pair, ng);
    let e_rest = orthonormal_complement(&e_pair, ne);
    lambdas.extend(std::iter::repeat_n(0.0, ng - rank));

    let join = |a: &CMat, b: &CMat| {
        hcat(
            a.nrows(),
            a.column_iter()
                .map(|c| c.into_owned())
                .chain(b.column_iter().map(|c| c.into_owned()))
                .collect(),
        )
    };

    let (mut excited, mut ground) = (e_pair, g_pair);
    let mut nus = None;
    let mut normalization = Normalization::Harmonic;
    match spec.class {
        TransitionClass::NoDarkPlus => {
            let l = spec.jg.twice() as usize + 1;
            let w = v_l_scaled(spec.je, spec.jg, l, pol.vector());
            let eop = &w * w.adjoint();
            let mut d = diagonalize_clusters(&lambdas[..rank], &eop, &mut excited, Some(&mut ground));
            let mut rest = e_rest.clone();
            let keys = vec![0.0; rest.ncols()];
            d.extend(diagonalize_clusters(&keys, &eop, &mut rest, None));
            excited = join(&excited, &rest);
            ground = join(&ground, &g_rest);
            let x = pol.self_dot().abs();
            if x > 1e-300 && x.powi(l as i32) > 0.0 {
                let f = x.powi(l as i32);
                d.iter_mut().for_each(|z| *z /= f);
            } else {
                normalization = Normalization::TensorPower;
            }
            nus = Some(d);
        }
        TransitionClass::NoDarkHalfInt => {
            excited = join(&excited, &e_rest);
            ground = join(&ground, &g_rest);
            nus = Some(vec![1.0; ne]);
        }
        _ => {
            excited = join(&excited, &e_rest);
            ground = join(&ground, &g_rest);
        }
    }
    Ok(NaturalBasis {
        lambdas,
        ground,
        excited,
        rank,
        nus,
        normalization,
    })
}

/// Analytic steady state for classes b, c and d with a monochromatic field.
pub fn steady_state(spec: &TransitionSpec, pol: &Polarization, field: &FieldParams) -> Result<SteadyStateResult> {
    if field.bandwidth > 0.0 {
        return arg_err("bandwidth > 0: use broadband_steady_state");
    }
    let s = field.saturation();
    let basis = natural_basis(spec, pol)?;
    let (ng, ne) = (spec.n_g(), spec.n_e());
    let dark_dimension = spec.dark_dimension_at(pol);
    let mut normalization = Normalization::Harmonic;
    let (rho, alpha0, alpha1, beta) = match spec.class {
        TransitionClass::DarkTwoDim => return Err(Error::NonUnique),
        TransitionClass::DarkUnique => {
            let d = dark_subspace(spec, pol)?;
            (DensityMatrix::pure_ground(&d.basis[0], ne), None, None, None)
        }
        TransitionClass::NoDarkHalfInt => {
            let (vinv, vv) = crate::operators::inverse_coupling(spec, pol)?;
            let alpha0 = vv.trace().re;
            let alpha1 = ne as f64;
            let beta = 1.0 / (alpha0 + 2.0 * s * alpha1);
            let id = CMat::identity(ng, ng);
            let rho = DensityMatrix {
                rho_gg: (vv + id * C::new(s, 0.0)) * C::new(beta, 0.0),
                rho_ee: CMat::identity(ne, ne) * C::new(beta * s, 0.0),
                rho_eg: vinv.adjoint() * (field.coherence_factor() * beta),
            };
            (rho, Some(alpha0), Some(alpha1), Some(beta))
        }
        TransitionClass::NoDarkPlus => {
            let l = spec.jg.twice() as usize + 1;
            let v = coupling_operator(spec.jg, spec.je, pol.vector())?;
            let w = v_l_scaled(spec.je, spec.jg, l, pol.vector());
            let wt = v_l_scaled(spec.jg, spec.je, l, pol.vector());
            let x = solve_x(&v, &w)?;
            let a1 = w.iter().map(|z| z.norm_sqr()).sum::<f64>();
            let a0 = x.iter().map(|z| z.norm_sqr()).sum::<f64>();
            let b = 1.0 / (a0 + 2.0 * s * a1);
            let rho = DensityMatrix {
                rho_gg: (&x * x.adjoint() + &wt * wt.adjoint() * C::new(s, 0.0)) * C::new(b, 0.0),
                rho_ee: &w * w.adjoint() * C::new(b * s, 0.0),
                rho_eg: &w * x.adjoint() * (field.coherence_factor() * b),
            };
            let xf = pol.self_dot().abs().powi(l as i32);
            if xf > 0.0 && pol.self_dot().abs() > 1e-300 && !pol.is_circular() {
                (rho, Some(a0 / xf), Some(a1 / xf), Some(b * xf))
            } else {
                normalization = Normalization::TensorPower;
                (rho, Some(a0), Some(a1), Some(b))
            }
        }
    };
    let nus = basis.nus.clone();
    let pi_e = rho.excited_population();
    if spec.class == TransitionClass::NoDarkPlus {
        normalization = basis.normalization.min_by_flag(normalization);
    }
    Ok(SteadyStateResult {
        class: spec.class,
        rho,
        lambdas: basis.lambdas,
        nus,
        alpha0,
        alpha1,
        beta,
        normalization,
        pi_e,
        dark_dimension,
    })
}

trait FlagMerge {
    fn min_by_flag(self, other: Self) -> Self;
}

impl FlagMerge for Normalization {
    fn min_by_flag(self, other: Self) -> Self {
        if self == Normalization::TensorPower || other == Normalization::TensorPower {
            Normalization::TensorPower
        } else {
            Normalization::Harmonic
        }
    }
}

/// `alpha1 / alpha0` at ellipticity `eps` from the invariant scalar sums.
///
/// Every term is positive, so the ratio is accurate up to circular polarization.
pub fn alpha_ratio(spec: &TransitionSpec, epsilon: f64) -> Result<f64> {
    if !epsilon.is_finite() || epsilon.abs() > std::f64::consts::FRAC_PI_4 + 1e-12 {
        return arg_err(format!("ellipticity {epsilon} outside [-pi/4, pi/4]"));
    }
    let x = crate::polarization::cos_two_eps(epsilon).min(1.0);
    let j = spec.jg;
    let tj = j.twice() as i64;
    let q = |l: i64| scaled_legendre_real(l as usize, x);
    match spec.class {
        TransitionClass::DarkTwoDim | TransitionClass::DarkUnique => Ok(0.0),
        TransitionClass::NoDarkHalfInt => {
            let mut den = 0.0;
            for l in (1..=tj).step_by(2) {
                let c = expansion_coefficient(spec.class, j, l)?;
                den += c * c * q(l) * x.powi((tj - l) as i32);
            }
            Ok(((tj + 1) * (tj + 1)) as f64 * x.powi(tj as i32 + 1) / (3.0 * den))
        }
        TransitionClass::NoDarkPlus => {
            let mut den = 0.0;
            for l in (0..=tj).rev().step_by(2) {
                let c = expansion_coefficient(spec.class, j, l)?;
                den += c * c * q(l) * x.powi((tj - l) as i32);
            }
            Ok((tj + 3) as f64 * q(tj + 1) / (3.0 * den))
        }
    }
}

/// Total excited population `S~/(1 + 2 S~)`, `S~ = S alpha1/alpha0`.
pub fn excited_population(spec: &TransitionSpec, epsilon: f64, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return arg_err(format!("saturation {s} must be non-negative"));
    }
    if s.is_infinite() {
        return Ok(if alpha_ratio(spec, epsilon)? > 0.0 { 0.5 } else { 0.0 });
    }
    let st = s * alpha_ratio(spec, epsilon)?;
    Ok(st / (1.0 + 2.0 * st))
}

/// `I_sat / I_0 = alpha0/alpha1`, or a fully transparent atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SaturationRatio {
    Finite(f64),
    Transparent,
}

impl SaturationRatio {
    pub fn value(self) -> f64 {
        match self {
            SaturationRatio::Finite(v) => v,
            SaturationRatio::Transparent => f64::INFINITY,
        }
    }
}

pub fn saturation_intensity_ratio(spec: &TransitionSpec, epsilon: f64) -> Result<SaturationRatio> {
    let r = alpha_ratio(spec, epsilon)?;
    Ok(if r > 0.0 {
        SaturationRatio::Finite(1.0 / r)
    } else {
        SaturationRatio::Transparent
    })
}

/// Linear-absorption reference `(S/3)(2Je+1)/(2Jg+1)` of unpolarized atoms.
pub fn unpolarized_excited_population(spec: &TransitionSpec, s: f64) -> f64 {
    s / 3.0 * spec.n_e() as f64 / spec.n_g() as f64
}

/// Spontaneous branching between natural-basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchingMatrix {
    /// `W_ij = sum_q |<(e)j|D_q|(g)i>|^2`, ground rows, excited columns.
    pub matrix: DMatrix<f64>,
    pub basis: NaturalBasis,
}

impl BranchingMatrix {
    pub fn column_sums(&self) -> Vec<f64> {
        self.matrix.column_iter().map(|c| c.sum()).collect()
    }

    /// `max_i |sum_j W_ij pi_j - pi_i|` over the coupled pairs.
    pub fn stationarity_residual(&self, pi_e: &[f64]) -> f64 {
        let p = DVector::from_column_slice(pi_e);
        let fed = &self.matrix * p;
        (0..self.basis.rank)
            .map(|i| (fed[i] - pi_e[i]).abs())
            .fold(0.0, f64::max)
    }

    /// Excited populations `<(e)j|rho_ee|(e)j>`.
    pub fn excited_populations(&self, rho_ee: &CMat) -> Vec<f64> {
        self.basis
            .excited
            .column_iter()
            .map(|c| (c.adjoint() * rho_ee * c)[(0, 0)].re)
            .collect()
    }

    /// Ground populations `<(g)i|rho_gg|(g)i>`.
    pub fn ground_populations(&self, rho_gg: &CMat) -> Vec<f64> {
        self.basis
            .ground
            .column_iter()
            .map(|c| (c.adjoint() * rho_gg * c)[(0, 0)].re)
            .collect()
    }
}

pub fn branching_matrix(spec: &TransitionSpec, pol: &Polarization) -> Result<BranchingMatrix> {
    let basis = natural_basis(spec, pol)?;
    let d = dipole_components(spec.jg, spec.je)?;
    let (ng, ne) = (spec.n_g(), spec.n_e());
    let mut m = DMatrix::<f64>::zeros(ng, ne);
    for q in &d {
        let t = basis.excited.adjoint() * q * &basis.ground;
        for i in 0..ng {
            for jx in 0..ne {
                m[(i, jx)] += t[(jx, i)].norm_sqr();
            }
        }
    }
    Ok(BranchingMatrix { matrix: m, basis })
}

/// Effective monochromatic parameters of a phase-diffusing field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BroadbandMap {
    pub r: f64,
    pub l: f64,
    pub s_eff: f64,
}

pub fn broadband_map(field: &FieldParams) -> Result<BroadbandMap> {
    if !(field.bandwidth >= 0.0) {
        return arg_err("bandwidth must be non-negative");
    }
    let (r, l) = field.broadband_rl();
    Ok(BroadbandMap {
        r,
        l,
        s_eff: 2.0 * r / field.gamma,
    })
}

/// Stochastic averages for a phase-diffusing field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BroadbandResult {
    pub map: BroadbandMap,
    pub rho_gg: CMat,
    pub rho_ee: CMat,
    /// `<Omega* rho_eg>`.
    pub coherence: CMat,
    pub pi_e: f64,
}

/// `<rho_gg>`, `<rho_ee>` from the replacement `S -> 2R/gamma`, and `<Omega* rho_eg>`.
pub fn broadband_steady_state(
    spec: &TransitionSpec,
    pol: &Polarization,
    field: &FieldParams,
) -> Result<BroadbandResult> {
    let map = broadband_map(field)?;
    let mono = FieldParams::from_saturation(map.s_eff, 0.0, field.gamma)?;
    let res = steady_state(spec, pol, &mono)?;
    let v = coupling_operator(spec.jg, spec.je, pol.vector())?;
    let coherence = (&v * &res.rho.rho_gg - &res.rho.rho_ee * &v) * C::new(-map.l, map.r);
    Ok(BroadbandResult {
        map,
        pi_e: res.pi_e,
        rho_gg: res.rho.rho_gg,
        rho_ee: res.rho.rho_ee,
        coherence,
    })
}

/// One row of an ellipticity scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub epsilon: f64,
    pub alpha_ratio: f64,
    pub pi_e: f64,
    /// Low-saturation absorption relative to unpolarized atoms, `3(2Jg+1)/(2Je+1) alpha1/alpha0`.
    pub pi_e_normalized: f64,
    pub isat_ratio: f64,
}

pub fn scan_row(spec: &TransitionSpec, epsilon: f64, s: f64) -> Result<ScanRow> {
    let ratio = alpha_ratio(spec, epsilon)?;
    Ok(ScanRow {
        epsilon,
        alpha_ratio: ratio,
        pi_e: excited_population(spec, epsilon, s)?,
        pi_e_normalized: ratio * 3.0 * spec.n_g() as f64 / spec.n_e() as f64,
        isat_ratio: saturation_intensity_ratio(spec, epsilon)?.value(),
    })
}

/// Commutators `([rho_gg, E_g], [rho_ee, E_e])` with the light-shift operators, max-abs.
pub fn light_shift_commutators(v: &CMat, rho: &DensityMatrix, delta: f64, s: f64) -> Result<(f64, f64)> {
    let (eg, ee) = crate::operators::light_shifts(v, delta, s)?;
    let comm = |a: &CMat, b: &CMat| (a * b - b * a).iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok((comm(&rho.rho_gg, &eg), comm(&rho.rho_ee, &ee)))
}

/// `E = W W^+`, `G = W~ W~^+` for classes c and d (scale-free for class d).
pub fn e_g_operators(spec: &TransitionSpec, pol: &Polarization) -> Result<(CMat, CMat)> {
    match spec.class {
        TransitionClass::NoDarkPlus => {
            let l = spec.jg.twice() as usize + 1;
            let w = v_l_scaled(spec.je, spec.jg, l, pol.vector());
            let wt = v_l_scaled(spec.jg, spec.je, l, pol.vector());
            Ok((&w * w.adjoint(), &wt * wt.adjoint()))
        }
        TransitionClass::NoDarkHalfInt => Ok((
            CMat::identity(spec.n_e(), spec.n_e()),
            CMat::identity(spec.n_g(), spec.n_g()),
        )),
        other => Err(Error::NotApplicable(other)),
    }
}

/// Natural-frame check value: the class-d `W` at `eps` from the closed form.
pub fn natural_w_scaled(j: AngularMomentum, epsilon: f64) -> CMat {
    natural::w_scaled(j, epsilon)
}

/// Ket of the normalized harmonic `n_J(e)`, the class-b dark state away from circular polarization.
pub fn harmonic_dark_state(j: AngularMomentum, e: &ComplexVector3) -> Result<DVector<C>> {
    let l = j.twice() as usize / 2;
    let n = spherical_harmonic(e, l)?;
    let psi = tensor_ket(&n);
    let norm = psi.norm();
    Ok(psi / C::new(norm, 0.0))
}

/// Zyz Euler angles of the rotation taking the natural-plus form to `pol`.
pub fn natural_euler_angles(pol: &Polarization) -> (f64, f64, f64) {
    euler_zyz(&pol.natural_decomposition().rotation)
}

/// `D^J` of the natural-frame rotation of `pol`.
pub fn natural_rotation(j: AngularMomentum, pol: &Polarization) -> CMat {
    rotation_operator(j, &pol.natural_decomposition().rotation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{max_abs, max_abs_diff};
    use crate::polarization::Frame;
    use std::f64::consts::PI;

    fn am(s: &str) -> AngularMomentum {
        s.parse().unwrap()
    }

    fn spec(g: &str, e: &str) -> TransitionSpec {
        classify(am(g), am(e)).unwrap()
    }

    #[test]
    fn classification() {
        assert_eq!(spec("1", "0").class, TransitionClass::DarkTwoDim);
        assert_eq!(spec("1", "1").class, TransitionClass::DarkUnique);
        assert_eq!(spec("1/2", "1/2").class, TransitionClass::NoDarkHalfInt);
        assert_eq!(spec("0", "1").class, TransitionClass::NoDarkPlus);
        assert_eq!(spec("3/2", "1/2").class.dark_dimension(), 2);
        assert!(classify(am("0"), am("0")).is_err());
        assert!(classify(am("1"), am("3")).is_err());
        assert!(classify(am("1"), am("3/2")).is_err());
    }

    #[test]
    fn field_params() {
        let f = FieldParams::from_saturation(3.0, 0.7, 1.0).unwrap();
        assert!((f.saturation() - 3.0).abs() < 1e-14);
        let (r, l) = f.broadband_rl();
        assert!((r - 1.5).abs() < 1e-14 && (l - 2.1).abs() < 1e-14);
        assert!(FieldParams::new(C::new(1.0, 0.0), 0.0, 0.0, 0.0).is_err());
        assert!(FieldParams::new(C::new(1.0, 0.0), 0.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn half_half_linear_example() {
        let sp = spec("1/2", "1/2");
        let p = Polarization::from_ellipticity(0.0, Frame::NaturalPlus).unwrap();
        for s in [0.01, 1.0, 3.0, 1e3] {
            let f = FieldParams::from_saturation(s, 0.7, 1.0).unwrap();
            let r = steady_state(&sp, &p, &f).unwrap();
            let g = (3.0 + s) / (6.0 + 4.0 * s);
            let e = s / (6.0 + 4.0 * s);
            assert!(max_abs_diff(&r.rho.rho_gg, &(CMat::identity(2, 2) * C::new(g, 0.0))) < 1e-14);
            assert!(max_abs_diff(&r.rho.rho_ee, &(CMat::identity(2, 2) * C::new(e, 0.0))) < 1e-14);
            assert!((r.alpha0.unwrap() - 6.0).abs() < 1e-12 && (r.alpha1.unwrap() - 2.0).abs() < 1e-12);
            r.rho.validate(1e-12).unwrap();
        }
        assert!((excited_population(&sp, 0.0, 3.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(
            saturation_intensity_ratio(&sp, 0.0).unwrap(),
            SaturationRatio::Finite(3.0)
        );
        let r = natural_basis(&sp, &p).unwrap();
        assert!((r.lambdas[0] - 1.0 / 3.0).abs() < 1e-14 && (r.lambdas[1] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn two_level_limit() {
        let sp = spec("0", "1");
        for eps in [0.0, 0.3, PI / 4.0] {
            let p = Polarization::from_ellipticity(eps, Frame::Conventional).unwrap();
            for s in [0.01, 2.0, 1e3] {
                let f = FieldParams::from_saturation(s, -5.0, 1.0).unwrap();
                let r = steady_state(&sp, &p, &f).unwrap();
                assert!((r.pi_e - s / (1.0 + 2.0 * s)).abs() < 1e-12);
                assert!((excited_population(&sp, eps, s).unwrap() - s / (1.0 + 2.0 * s)).abs() < 1e-12);
            }
            assert_eq!(
                saturation_intensity_ratio(&sp, eps).unwrap(),
                SaturationRatio::Finite(1.0)
            );
        }
    }

    #[test]
    fn analytic_alpha_matches_scalar_route() {
        for (g, e) in [
            ("1/2", "1/2"),
            ("3/2", "3/2"),
            ("5/2", "5/2"),
            ("0", "1"),
            ("1", "2"),
            ("3/2", "5/2"),
            ("3", "4"),
        ] {
            let sp = spec(g, e);
            for eps in [0.0, PI / 16.0, -PI / 8.0, 3.0 * PI / 16.0, PI / 4.0 - 1e-3] {
                for frame in [Frame::Conventional, Frame::NaturalPlus, Frame::NaturalMinus] {
                    let p = Polarization::from_ellipticity(eps, frame).unwrap();
                    let f = FieldParams::from_saturation(0.3, 0.0, 1.0).unwrap();
                    let r = steady_state(&sp, &p, &f).unwrap();
                    let ratio = r.alpha1.unwrap() / r.alpha0.unwrap();
                    let scalar = alpha_ratio(&sp, eps).unwrap();
                    assert!(
                        (ratio - scalar).abs() < 1e-9 * scalar,
                        "{g}->{e} eps={eps} {ratio} {scalar}"
                    );
                    r.rho.validate(1e-10).unwrap();
                }
            }
        }
    }

    #[test]
    fn class_c_circular_rejected() {
        let sp = spec("3/2", "3/2");
        let p = Polarization::from_ellipticity(PI / 4.0, Frame::Conventional).unwrap();
        let f = FieldParams::from_saturation(1.0, 0.0, 1.0).unwrap();
        assert_eq!(steady_state(&sp, &p, &f), Err(Error::DarkException));
        assert_eq!(excited_population(&sp, PI / 4.0, 1.0).unwrap(), 0.0);
        assert_eq!(
            saturation_intensity_ratio(&sp, PI / 4.0).unwrap(),
            SaturationRatio::Transparent
        );
        let d = dark_subspace(&sp, &p).unwrap();
        let v = coupling_operator(sp.jg, sp.je, p.vector()).unwrap();
        assert!((&v * &d.basis[0]).norm() < 1e-12);
    }

    #[test]
    fn class_a_rejected() {
        let sp = spec("2", "1");
        let p = Polarization::from_ellipticity(0.2, Frame::Conventional).unwrap();
        let f = FieldParams::from_saturation(1.0, 0.0, 1.0).unwrap();
        assert_eq!(steady_state(&sp, &p, &f), Err(Error::NonUnique));
        let f = FieldParams::new(C::new(1.0, 0.0), 0.0, 1.0, 0.5).unwrap();
        assert!(matches!(steady_state(&spec("0", "1"), &p, &f), Err(Error::Argument(_))));
    }

    #[test]
    fn class_b_dark_state() {
        let sp = spec("1", "1");
        let p = Polarization::from_ellipticity(0.3, Frame::Conventional).unwrap();
        let d = dark_subspace(&sp, &p).unwrap();
        let ket = p.vector().ket();
        for i in 0..3 {
            assert!((d.basis[0][i] - ket[i]).norm() < 1e-14);
        }
        for tj in [2, 4, 6, 8, 16] {
            let j = AngularMomentum::from_twice(tj);
            let sp = classify(j, j).unwrap();
            for eps in [0.0, 0.2, PI / 4.0 - 1e-3, PI / 4.0] {
                let p = Polarization::from_ellipticity(eps, Frame::NaturalMinus).unwrap();
                let d = dark_subspace(&sp, &p).unwrap();
                let v = coupling_operator(j, j, p.vector()).unwrap();
                assert!((d.basis[0].norm() - 1.0).abs() < 1e-12);
                assert!((&v * &d.basis[0]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn class_a_dark_states() {
        for tj in [2, 3, 4, 5, 8, 16] {
            let j = AngularMomentum::from_twice(tj);
            let sp = classify(j, AngularMomentum::from_twice(tj - 2)).unwrap();
            for eps in [0.0, PI / 16.0, PI / 8.0, 3.0 * PI / 16.0, PI / 4.0 - 1e-3, PI / 4.0] {
                for frame in [Frame::Conventional, Frame::NaturalPlus] {
                    let p = Polarization::from_ellipticity(eps, frame).unwrap();
                    let d = dark_subspace(&sp, &p).unwrap();
                    let v = coupling_operator(sp.jg, sp.je, p.vector()).unwrap();
                    assert_eq!(d.dimension(), 2);
                    for b in &d.basis {
                        assert!((&v * b).norm() < 1e-12, "J={j} eps={eps}");
                        assert!((b.norm() - 1.0).abs() < 1e-12);
                    }
                    assert!(d.basis[0].dotc(&d.basis[1]).norm() < 1e-10);
                    if !p.is_circular() {
                        let want = dark_overlap_formula(j, p.self_dot());
                        assert!((d.overlap.unwrap() - want).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn class_a_linear_kernel() {
        let sp = spec("1", "0");
        let p = Polarization::from_ellipticity(0.0, Frame::NaturalPlus).unwrap();
        let d = dark_subspace(&sp, &p).unwrap();
        let proj = d.projector();
        let mut want = CMat::zeros(3, 3);
        want[(0, 0)] = C::new(1.0, 0.0);
        want[(2, 2)] = C::new(1.0, 0.0);
        assert!(max_abs_diff(&proj, &want) < 1e-12);
    }

    #[test]
    fn natural_basis_reconstructs() {
        for (g, e) in [("2", "1"), ("1", "1"), ("3/2", "3/2"), ("1", "2"), ("3/2", "5/2")] {
            let sp = spec(g, e);
            for eps in [0.0, 0.3, PI / 4.0] {
                let p = Polarization::from_ellipticity(eps, Frame::Conventional).unwrap();
                let b = natural_basis(&sp, &p).unwrap();
                let v = coupling_operator(sp.jg, sp.je, p.vector()).unwrap();
                assert!(max_abs_diff(&b.reconstruct(), &v) < 1e-12);
                let ug = b.ground.adjoint() * &b.ground;
                let ue = b.excited.adjoint() * &b.excited;
                assert!(max_abs_diff(&ug, &CMat::identity(sp.n_g(), sp.n_g())) < 1e-12);
                assert!(max_abs_diff(&ue, &CMat::identity(sp.n_e(), sp.n_e())) < 1e-12);
                for w in b.lambdas.windows(2) {
                    assert!(w[0] >= w[1]);
                }
            }
        }
        let sp = spec("2", "1");
        let p = Polarization::from_ellipticity(0.1, Frame::Conventional).unwrap();
        let b = natural_basis(&sp, &p).unwrap();
        assert_eq!(b.lambdas.iter().filter(|&&l| l < 1e-12).count(), 2);
    }

    #[test]
    fn branching_properties() {
        let sp = spec("2", "3");
        let p = Polarization::from_ellipticity(0.37, Frame::Conventional).unwrap();
        let b = branching_matrix(&sp, &p).unwrap();
        for s in b.column_sums() {
            assert!((s - 1.0).abs() < 1e-12);
        }
        for (g, e) in [("1/2", "3/2"), ("3/2", "3/2"), ("2", "3")] {
            let sp = spec(g, e);
            for eps in [0.0, 0.2, PI / 4.0 - 1e-3] {
                let p = Polarization::from_ellipticity(eps, Frame::Conventional).unwrap();
                let f = FieldParams::from_saturation(1.0, 0.7, 1.0).unwrap();
                let r = steady_state(&sp, &p, &f).unwrap();
                let b = branching_matrix(&sp, &p).unwrap();
                let pe = b.excited_populations(&r.rho.rho_ee);
                assert!(b.stationarity_residual(&pe) < 1e-10, "{g}->{e} {eps}");
            }
        }
    }

    #[test]
    fn class_d_linear_stationary_vector() {
        // J = 1/2 -> 3/2, eps = 0: excited populations ~ |C^{2 0}_{3/2 mu; 1/2 -mu}|^2
        let sp = spec("1/2", "3/2");
        let p = Polarization::from_ellipticity(0.0, Frame::NaturalPlus).unwrap();
        let f = FieldParams::from_saturation(1e-3, 0.0, 1.0).unwrap();
        let r = steady_state(&sp, &p, &f).unwrap();
        let pops: Vec<f64> = (0..4).map(|i| r.rho.rho_ee[(i, i)].re).collect();
        let want: Vec<f64> = sp
            .je
            .projections()
            .map(|mu| crate::angular::cg_twice(3, mu, 1, -mu, 4, 0).powi(2))
            .collect();
        let (sp_, sw) = (pops.iter().sum::<f64>(), want.iter().sum::<f64>());
        for i in 0..4 {
            assert!((pops[i] / sp_ - want[i] / sw).abs() < 1e-12);
        }
    }

    #[test]
    fn class_c_isotropy_and_commutation() {
        let sp = spec("5/2", "5/2");
        for eps in [0.0, 0.2, -0.7] {
            let p = Polarization::from_ellipticity(eps, Frame::Conventional).unwrap();
            let f = FieldParams::from_saturation(10.0, 5.0, 1.0).unwrap();
            let r = steady_state(&sp, &p, &f).unwrap();
            let d = r.rho.rho_ee[(0, 0)];
            assert!(max_abs_diff(&r.rho.rho_ee, &(CMat::identity(6, 6) * d)) < 1e-12);
            let v = coupling_operator(sp.jg, sp.je, p.vector()).unwrap();
            let (cg, ce) = light_shift_commutators(&v, &r.rho, 5.0, 10.0).unwrap();
            assert!(cg < 1e-10 && ce < 1e-10);
        }
    }

    #[test]
    fn detuning_enters_through_s() {
        let sp = spec("1", "2");
        let p = Polarization::from_ellipticity(0.3, Frame::Conventional).unwrap();
        let a = steady_state(&sp, &p, &FieldParams::from_saturation(2.0, 3.0, 1.0).unwrap()).unwrap();
        let b = steady_state(&sp, &p, &FieldParams::from_saturation(2.0, -3.0, 1.0).unwrap()).unwrap();
        assert!(max_abs_diff(&a.rho.rho_gg, &b.rho.rho_gg) < 1e-14);
        assert!(max_abs_diff(&a.rho.rho_ee, &b.rho.rho_ee) < 1e-14);
    }

    #[test]
    fn broadband_mapping() {
        let f = FieldParams::from_saturation(2.0, 0.7, 1.0).unwrap();
        let m = broadband_map(&f).unwrap();
        assert!((m.s_eff - 2.0).abs() < 1e-14);
        let mut g = f;
        g.bandwidth = 1.0;
        let m = broadband_map(&g).unwrap();
        let om2 = f.rabi.norm_sqr();
        let want = om2 * 1.5 / (1.5 * 1.5 + 0.49);
        assert!((m.r - want).abs() < 1e-14);
        let mut h = FieldParams::from_saturation(1.0, 0.0, 1.0).unwrap();
        h.bandwidth = 1e12;
        assert!(broadband_map(&h).unwrap().s_eff < 1e-11);
    }

    #[test]
    fn broadband_at_zero_bandwidth_matches_monochromatic_coherence() {
        let sp = spec("1", "2");
        let p = Polarization::from_ellipticity(0.3, Frame::Conventional).unwrap();
        let f = FieldParams::new(C::new(0.8, 0.3), 0.7, 1.0, 0.0).unwrap();
        let mono = steady_state(&sp, &p, &f).unwrap();
        let bb = broadband_steady_state(&sp, &p, &f).unwrap();
        assert!(max_abs_diff(&mono.rho.rho_gg, &bb.rho_gg) < 1e-13);
        let want = &mono.rho.rho_eg * f.rabi.conj();
        assert!(max_abs_diff(&bb.coherence, &want) < 1e-13 * max_abs(&want).max(1.0));
    }

    #[test]
    fn scan_rows() {
        let c = spec("1/2", "1/2");
        let r = scan_row(&c, 0.0, 0.01).unwrap();
        assert!((r.pi_e_normalized - 1.0).abs() < 1e-12);
        let r = scan_row(&c, PI / 4.0, 0.01).unwrap();
        assert!(r.pi_e_normalized.abs() < 1e-12 && r.isat_ratio.is_infinite());
        let d = spec("0", "1");
        assert!((scan_row(&d, 0.4, 0.01).unwrap().pi_e_normalized - 1.0).abs() < 1e-12);
        assert!((unpolarized_excited_population(&c, 0.3) - 0.1).abs() < 1e-15);
    }
}
