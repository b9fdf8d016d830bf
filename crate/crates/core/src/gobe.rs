//! Brute-force generalized optical Bloch equations.
//!
//! The full density matrix lives on `g (+) e` with the ground block first and
//! is vectorized column-major, `vec(A rho B) = (B^T (x) A) vec(rho)`.
//!
//! `H = -delta Pi_e - (Omega V + Omega* V^+)`, jump operators `sqrt(gamma) D_q^+`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::operators::{couple_dipoles, dipole_components, CMat};
use crate::polarization::Polarization;
use crate::steadystate::{DensityMatrix, FieldParams, TransitionClass, TransitionSpec};

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);
const I: C = C::new(0.0, 1.0);

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "OBE_STEADY_THREADS";

/// GOBE generator for one transition, polarization and field.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    pub spec: TransitionSpec,
    /// `n^2 x n^2` superoperator, `n = n_g + n_e`.
    pub generator: CMat,
    hamiltonian: CMat,
    jumps: Vec<CMat>,
    decay: CMat,
}

fn embed(n: usize, block: &CMat, row: usize, col: usize) -> CMat {
    let mut m = CMat::zeros(n, n);
    m.view_mut((row, col), (block.nrows(), block.ncols())).copy_from(block);
    m
}

fn hamiltonian(spec: &TransitionSpec, v: &CMat, rabi: C, detuning: f64) -> CMat {
    let (ng, ne) = (spec.n_g(), spec.n_e());
    let n = ng + ne;
    let vf = embed(n, v, ng, 0);
    let mut h = -(&vf * rabi + vf.adjoint() * rabi.conj());
    for i in ng..n {
        h[(i, i)] -= C::new(detuning, 0.0);
    }
    h
}

fn superoperator(h: &CMat, jumps: &[CMat]) -> CMat {
    let n = h.nrows();
    let id = CMat::identity(n, n);
    let mut gen = (id.kronecker(h) - h.transpose().kronecker(&id)) * (-I);
    for j in jumps {
        let jj = j.adjoint() * j;
        gen += j.conjugate().kronecker(j);
        gen -= (id.kronecker(&jj) + jj.transpose().kronecker(&id)) * C::new(0.5, 0.0);
    }
    gen
}

/// Builds the generator; the field must be monochromatic.
pub fn build_liouvillian(spec: &TransitionSpec, pol: &Polarization, field: &FieldParams) -> Result<Liouvillian> {
    if field.bandwidth != 0.0 {
        return arg_err("the GOBE generator needs a monochromatic field; use phase_diffusion_average");
    }
    let (ng, ne) = (spec.n_g(), spec.n_e());
    let n = ng + ne;
    let d = dipole_components(spec.jg, spec.je)?;
    let v = couple_dipoles(&d, pol.vector());
    let h = hamiltonian(spec, &v, field.rabi, field.detuning);
    let sg = C::new(field.gamma.sqrt(), 0.0);
    let jumps: Vec<CMat> = d.iter().map(|dq| embed(n, &(dq.adjoint() * sg), 0, ng)).collect();
    let mut decay = CMat::zeros(n, n);
    for j in &jumps {
        decay += j.adjoint() * j;
    }
    let generator = superoperator(&h, &jumps);
    Ok(Liouvillian {
        spec: *spec,
        generator,
        hamiltonian: h,
        jumps,
        decay,
    })
}

/// Column-major vectorization.
pub fn vectorize(rho: &CMat) -> DVector<C> {
    DVector::from_column_slice(rho.as_slice())
}

pub fn unvectorize(v: &DVector<C>, n: usize) -> CMat {
    CMat::from_column_slice(n, n, v.as_slice())
}

fn lindblad(h: &CMat, jumps: &[CMat], decay: &CMat, rho: &CMat) -> CMat {
    let hr = h * rho;
    let mut out = (&hr - hr.adjoint()) * (-I);
    for j in jumps {
        out += j * rho * j.adjoint();
    }
    let dr = decay * rho;
    out -= (&dr + dr.adjoint()) * C::new(0.5, 0.0);
    out
}

impl Liouvillian {
    pub fn dim(&self) -> usize {
        self.spec.n_g() + self.spec.n_e()
    }

    /// `L(rho)` by block products, without the superoperator.
    ///
    /// Assumes `rho` Hermitian.
    pub fn apply(&self, rho: &CMat) -> CMat {
        lindblad(&self.hamiltonian, &self.jumps, &self.decay, rho)
    }

    /// `L(rho)` through the stored superoperator.
    pub fn apply_superoperator(&self, rho: &CMat) -> CMat {
        unvectorize(&(&self.generator * vectorize(rho)), self.dim())
    }

    /// Trace functional as a row vector.
    pub fn trace_functional(&self) -> DVector<C> {
        let n = self.dim();
        let mut t = DVector::zeros(n * n);
        for i in 0..n {
            t[i + i * n] = ONE;
        }
        t
    }

    /// `max |t^T L|`, zero for a trace-preserving generator.
    pub fn trace_residual(&self) -> f64 {
        let t = self.trace_functional();
        (t.transpose() * &self.generator)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Null-space dimension from the singular values below `tol * sigma_max`.
    pub fn null_space_dimension(&self, tol: f64) -> usize {
        let sv = self.generator.singular_values();
        let smax = sv.iter().copied().fold(0.0, f64::max);
        sv.iter().filter(|&&s| s <= tol * smax).count()
    }

    /// All eigenvalues of the generator.
    pub fn eigenvalues(&self) -> Result<Vec<C>> {
        let ev = self
            .generator
            .clone()
            .schur()
            .eigenvalues()
            .ok_or(Error::Singular("Schur form of the generator"))?;
        Ok(ev.iter().copied().collect())
    }
}

/// Unique steady state: null vector with unit trace, Hermitian-symmetrized.
pub fn numeric_steady_state(l: &Liouvillian) -> Result<DensityMatrix> {
    if l.spec.class == TransitionClass::DarkTwoDim {
        return Err(Error::NonUnique);
    }
    let n = l.dim();
    let mut a = l.generator.clone();
    let t = l.trace_functional();
    a.row_mut(0).copy_from(&t.transpose());
    let mut b = DVector::zeros(n * n);
    b[0] = ONE;
    let x = a.lu().solve(&b).ok_or(Error::NonUnique)?;
    let rho = unvectorize(&x, n);
    let rho = (&rho + rho.adjoint()) * C::new(0.5, 0.0);
    let resid = l.apply(&rho).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !resid.is_finite() || resid > 1e-8 {
        return Err(Error::NonUnique);
    }
    DensityMatrix::from_full(&rho, l.spec.n_g())
}

/// Fixed-step integration settings, times in units of `1/gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    pub tolerance: f64,
}

impl IntegratorConfig {
    /// `dt = 0.002 min(1, 1/S)`, `t_end` with `gamma t >= 50` and `gamma S t >= 50`.
    pub fn for_saturation(s: f64) -> Self {
        let dt = 0.002 * (1.0f64).min(1.0 / s.max(1e-300));
        let t_end = 50.0f64.max(50.0 / s.max(1e-300));
        Self {
            dt,
            t_end,
            tolerance: 1e-9,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.t_end > 0.0) || !(self.tolerance > 0.0) {
            return arg_err("integrator dt, t_end and tolerance must be positive");
        }
        if self.t_end < 50.0 {
            return arg_err("t_end must be at least 50/gamma");
        }
        Ok(())
    }
}

/// Endpoint and run diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationResult {
    pub rho: DensityMatrix,
    pub steps: usize,
    pub trace_drift: f64,
    pub max_hermiticity_error: f64,
    /// `max |L(rho)|` at the endpoint, in units of `gamma`.
    pub residual: f64,
}

impl Liouvillian {
    fn gamma(&self) -> f64 {
        self.decay.trace().re / self.spec.n_e() as f64
    }
}

/// One RK4 step of `d vec(rho)/dt = L vec(rho)`, which for a constant
/// generator is the polynomial `1 + M + M^2/2 + M^3/6 + M^4/24`, `M = dt L`.
fn rk4_propagator(generator: &CMat, dt: f64) -> CMat {
    let n = generator.nrows();
    let id = CMat::identity(n, n);
    let m = generator * C::new(dt, 0.0);
    let mut p = &id + &m * C::new(0.25, 0.0);
    p = &id + &m * &p * C::new(1.0 / 3.0, 0.0);
    p = &id + &m * &p * C::new(0.5, 0.0);
    &id + &m * &p
}

fn matrix_power(p: &CMat, mut k: usize) -> CMat {
    let n = p.nrows();
    let mut out = CMat::identity(n, n);
    let mut base = p.clone();
    while k > 0 {
        if k & 1 == 1 {
            out = &out * &base;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    out
}

/// Fourth-order Runge-Kutta from `rho0`.
pub fn integrate(l: &Liouvillian, rho0: &DensityMatrix, cfg: &IntegratorConfig) -> Result<IntegrationResult> {
    integrate_until(l, rho0, cfg, cfg.t_end)
}

/// Like [`integrate`], but keeps going in blocks of `cfg.t_end` until the
/// residual drops below the tolerance or `max_t_end` is reached.
///
/// The fixed-step RK4 map is linear, so a block of steps is applied as a
/// power of the single-step propagator.
pub fn integrate_until(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    cfg: &IntegratorConfig,
    max_t_end: f64,
) -> Result<IntegrationResult> {
    cfg.validate()?;
    rho0.validate(1e-9)?;
    let gamma = l.gamma();
    let n = l.dim();
    let block = (cfg.t_end / cfg.dt).ceil() as usize;
    let step = rk4_propagator(&l.generator, cfg.dt / gamma);
    let chunk = 64usize.min(block);
    let prop_chunk = matrix_power(&step, chunk);
    let prop_rest = matrix_power(&prop_chunk, block / chunk) * matrix_power(&step, block % chunk);
    let mut v = vectorize(&rho0.to_full());
    let tr0 = unvectorize(&v, n).trace();
    let (mut steps, mut drift, mut herm, mut t) = (0usize, 0.0f64, 0.0f64, 0.0f64);
    let track = |v: &DVector<C>, drift: &mut f64, herm: &mut f64| {
        let rho = unvectorize(v, n);
        *drift = drift.max((rho.trace() - tr0).norm());
        *herm = herm.max((&rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max));
    };
    loop {
        if steps == 0 {
            // sample the early transient where drift and asymmetry would show first
            for _ in 0..(block / chunk).min(16) {
                v = &prop_chunk * &v;
                track(&v, &mut drift, &mut herm);
            }
            let done = (block / chunk).min(16) * chunk;
            v = matrix_power(&step, block - done) * v;
        } else {
            v = &prop_rest * &v;
        }
        track(&v, &mut drift, &mut herm);
        steps += block;
        t += cfg.t_end;
        let rho = unvectorize(&v, n);
        let residual = l.apply(&rho).iter().map(|z| z.norm()).fold(0.0, f64::max) / gamma;
        if residual <= cfg.tolerance {
            return Ok(IntegrationResult {
                rho: DensityMatrix::from_full(&rho, l.spec.n_g())?,
                steps,
                trace_drift: drift,
                max_hermiticity_error: herm,
                residual,
            });
        }
        if !residual.is_finite() || t + cfg.t_end > max_t_end * (1.0 + 1e-12) {
            return Err(Error::NotConverged {
                residual,
                tolerance: cfg.tolerance,
            });
        }
    }
}

/// Deterministic broadband steady state from the reduced `R`, `L` equations.
///
/// Returns `(<rho_gg>, <rho_ee>)`.
pub fn broadband_reduced_steady_state(
    spec: &TransitionSpec,
    pol: &Polarization,
    field: &FieldParams,
) -> Result<(CMat, CMat)> {
    if spec.class == TransitionClass::DarkTwoDim {
        return Err(Error::NonUnique);
    }
    let (r, lshift) = field.broadband_rl();
    let gamma = field.gamma;
    let (ng, ne) = (spec.n_g(), spec.n_e());
    let d = dipole_components(spec.jg, spec.je)?;
    let v = couple_dipoles(&d, pol.vector());
    let vvd = &v * v.adjoint();
    let vdv = v.adjoint() * &v;
    let (ig, ie) = (CMat::identity(ng, ng), CMat::identity(ne, ne));
    let rr = C::new(r, 0.0);
    let il = C::new(0.0, lshift);
    // vec(rho_ee) then vec(rho_gg)
    let (ne2, ng2) = (ne * ne, ng * ng);
    let mut a = CMat::zeros(ne2 + ng2, ne2 + ng2);
    let ee = -ie.kronecker(&ie) * C::new(gamma, 0.0) - (ie.kronecker(&vvd) + vvd.transpose().kronecker(&ie)) * rr
        + (ie.kronecker(&vvd) - vvd.transpose().kronecker(&ie)) * il;
    let eg = v.conjugate().kronecker(&v) * (rr * 2.0);
    let mut ge = v.transpose().kronecker(&v.adjoint()) * (rr * 2.0);
    for dq in &d {
        ge += dq.transpose().kronecker(&dq.adjoint()) * C::new(gamma, 0.0);
    }
    let gg = -(ig.kronecker(&vdv) + vdv.transpose().kronecker(&ig)) * rr
        - (ig.kronecker(&vdv) - vdv.transpose().kronecker(&ig)) * il;
    a.view_mut((0, 0), (ne2, ne2)).copy_from(&ee);
    a.view_mut((0, ne2), (ne2, ng2)).copy_from(&eg);
    a.view_mut((ne2, 0), (ng2, ne2)).copy_from(&ge);
    a.view_mut((ne2, ne2), (ng2, ng2)).copy_from(&gg);
    // replace the first ground-block row by the trace condition
    let row = ne2;
    a.row_mut(row).fill(ZERO);
    for i in 0..ne {
        a[(row, i + i * ne)] = ONE;
    }
    for i in 0..ng {
        a[(row, ne2 + i + i * ng)] = ONE;
    }
    let mut b = DVector::zeros(ne2 + ng2);
    b[row] = ONE;
    let x = a.lu().solve(&b).ok_or(Error::Singular("broadband system"))?;
    let ree = CMat::from_column_slice(ne, ne, &x.as_slice()[..ne2]);
    let rgg = CMat::from_column_slice(ng, ng, &x.as_slice()[ne2..]);
    let h = |m: CMat| (&m + m.adjoint()) * C::new(0.5, 0.0);
    Ok((h(rgg), h(ree)))
}

/// Monte-Carlo ensemble settings, times in units of `1/gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub realizations: usize,
    pub dt: f64,
    pub burn_in: f64,
    pub t_average: f64,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            realizations: 400,
            dt: 0.01,
            burn_in: 30.0,
            t_average: 200.0,
            seed: 0,
        }
    }
}

/// Ensemble means and standard errors of the time-averaged blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDiffusionAverage {
    pub rho_gg: CMat,
    pub rho_ee: CMat,
    /// Entrywise standard errors of `rho_gg` (real and imaginary parts combined).
    pub rho_gg_stderr: DMatrix<f64>,
    pub rho_ee_stderr: DMatrix<f64>,
    pub pi_e: f64,
    pub pi_e_stderr: f64,
    pub realizations: usize,
}

/// Thread pool honouring [`THREADS_ENV`].
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let n = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| Error::Argument(format!("thread pool: {e}")))
}

/// Compensated sum.
fn neumaier(values: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

/// Averages over realizations `Omega(t) = Omega exp(-i psi(t))` with `<d psi^2> = 2 mu dt`.
pub fn phase_diffusion_average(
    spec: &TransitionSpec,
    pol: &Polarization,
    field: &FieldParams,
    cfg: &EnsembleConfig,
) -> Result<PhaseDiffusionAverage> {
    if cfg.realizations < 100 {
        return arg_err(format!("ensemble of {} realizations is below 100", cfg.realizations));
    }
    if !(cfg.dt > 0.0) || !(cfg.t_average > 0.0) || !(cfg.burn_in >= 0.0) {
        return arg_err("ensemble dt and averaging window must be positive");
    }
    let gamma = field.gamma;
    let mu = field.bandwidth / gamma;
    if cfg.dt * mu > 0.1 {
        return arg_err(format!("dt * mu = {} exceeds 0.1", cfg.dt * mu));
    }
    let (ng, ne) = (spec.n_g(), spec.n_e());
    let n = ng + ne;
    let d = dipole_components(spec.jg, spec.je)?;
    let v = couple_dipoles(&d, pol.vector());
    let sg = C::new(gamma.sqrt(), 0.0);
    let jumps: Vec<CMat> = d.iter().map(|dq| embed(n, &(dq.adjoint() * sg), 0, ng)).collect();
    let mut decay = CMat::zeros(n, n);
    for j in &jumps {
        decay += j.adjoint() * j;
    }
    let dt = cfg.dt / gamma;
    let burn = (cfg.burn_in / cfg.dt).round() as usize;
    let avg = ((cfg.t_average / cfg.dt).round() as usize).max(1);
    let sigma = (2.0 * field.bandwidth * dt).sqrt();

    let run = |index: usize| -> Result<(CMat, CMat)> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(index as u64));
        let normal = Normal::new(0.0, 1.0).map_err(|e| Error::Argument(e.to_string()))?;
        let mut rho = CMat::zeros(n, n);
        for i in 0..ng {
            rho[(i, i)] = C::new(1.0 / ng as f64, 0.0);
        }
        let mut psi = 0.0f64;
        let mut acc = CMat::zeros(n, n);
        let (half, full, sixth) = (C::new(dt / 2.0, 0.0), C::new(dt, 0.0), C::new(dt / 6.0, 0.0));
        for step in 0..burn + avg {
            let rabi = field.rabi * C::from_polar(1.0, -psi);
            let h = hamiltonian(spec, &v, rabi, field.detuning);
            let f = |r: &CMat| lindblad(&h, &jumps, &decay, r);
            let k1 = f(&rho);
            let k2 = f(&(&rho + &k1 * half));
            let k3 = f(&(&rho + &k2 * half));
            let k4 = f(&(&rho + &k3 * full));
            rho += (k1 + (k2 + k3) * C::new(2.0, 0.0) + k4) * sixth;
            psi += sigma * normal.sample(&mut rng);
            if step >= burn {
                acc += &rho;
            }
        }
        acc /= C::new(avg as f64, 0.0);
        let gg = acc.view((0, 0), (ng, ng)).into_owned();
        let ee = acc.view((ng, ng), (ne, ne)).into_owned();
        Ok((gg, ee))
    };

    let pool = thread_pool()?;
    let samples: Vec<Result<(CMat, CMat)>> = pool.install(|| (0..cfg.realizations).into_par_iter().map(run).collect());
    let samples: Vec<(CMat, CMat)> = samples.into_iter().collect::<Result<_>>()?;

    let m = samples.len() as f64;
    let stats = |pick: &dyn Fn(&(CMat, CMat)) -> C| {
        let re_mean = neumaier(samples.iter().map(|s| pick(s).re)) / m;
        let im_mean = neumaier(samples.iter().map(|s| pick(s).im)) / m;
        let var = neumaier(samples.iter().map(|s| {
            let z = pick(s);
            (z.re - re_mean).powi(2) + (z.im - im_mean).powi(2)
        })) / (m - 1.0);
        (C::new(re_mean, im_mean), (var / m).sqrt())
    };
    let block = |dim: usize, ground: bool| {
        let mut mean = CMat::zeros(dim, dim);
        let mut err = DMatrix::<f64>::zeros(dim, dim);
        for r in 0..dim {
            for c in 0..dim {
                let (mu_, se) = stats(&|s: &(CMat, CMat)| if ground { s.0[(r, c)] } else { s.1[(r, c)] });
                mean[(r, c)] = mu_;
                err[(r, c)] = se;
            }
        }
        (mean, err)
    };
    let (rho_gg, rho_gg_stderr) = block(ng, true);
    let (rho_ee, rho_ee_stderr) = block(ne, false);
    let (pe, pe_err) = stats(&|s: &(CMat, CMat)| s.1.trace());
    Ok(PhaseDiffusionAverage {
        rho_gg,
        rho_ee,
        rho_gg_stderr,
        rho_ee_stderr,
        pi_e: pe.re,
        pi_e_stderr: pe_err,
        realizations: samples.len(),
    })
}

/// Estimate of `<Omega*(t) Omega(t - tau)>/|Omega|^2` at `tau = k dt` with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldCorrelation {
    pub lags: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

/// Samples independent phase paths and estimates the field correlation.
pub fn field_correlation(
    mu: f64,
    dt: f64,
    max_lag_steps: usize,
    realizations: usize,
    seed: u64,
) -> Result<FieldCorrelation> {
    if !(mu > 0.0) || !(dt > 0.0) || dt * mu > 0.1 {
        return arg_err("need mu > 0, dt > 0 and dt * mu <= 0.1");
    }
    if realizations < 100 {
        return arg_err("ensemble below 100 realizations");
    }
    let sigma = (2.0 * mu * dt).sqrt();
    let pool = thread_pool()?;
    let paths: Vec<Vec<f64>> = pool.install(|| {
        (0..realizations)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
                let normal = Normal::new(0.0, sigma).unwrap();
                // the path starts at an arbitrary reference time t - tau_max
                let mut psi = 0.0;
                let mut out = Vec::with_capacity(max_lag_steps + 1);
                for _ in 0..=max_lag_steps {
                    out.push(psi);
                    psi += normal.sample(&mut rng);
                }
                out
            })
            .collect()
    });
    let m = realizations as f64;
    let mut lags = Vec::new();
    let mut mean = Vec::new();
    let mut stderr = Vec::new();
    for k in 0..=max_lag_steps {
        // Omega*(t) Omega(t - tau) = |Omega|^2 exp(i (psi(t) - psi(t - tau)))
        let vals: Vec<f64> = paths.iter().map(|p| (p[k] - p[0]).cos()).collect();
        let mu_ = neumaier(vals.iter().copied()) / m;
        let var = neumaier(vals.iter().map(|v| (v - mu_).powi(2))) / (m - 1.0);
        lags.push(k as f64 * dt);
        mean.push(mu_);
        stderr.push((var / m).sqrt());
    }
    Ok(FieldCorrelation { lags, mean, stderr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::AngularMomentum;
    use crate::operators::max_abs_diff;
    use crate::polarization::Frame;
    use crate::steadystate::{classify, steady_state};

    fn setup(g: &str, e: &str, eps: f64, s: f64, delta: f64) -> (TransitionSpec, Polarization, FieldParams) {
        let sp = classify(g.parse::<AngularMomentum>().unwrap(), e.parse().unwrap()).unwrap();
        let p = Polarization::from_ellipticity(eps, Frame::Conventional).unwrap();
        let f = FieldParams::from_saturation(s, delta, 1.0).unwrap();
        (sp, p, f)
    }

    #[test]
    fn superoperator_matches_block_apply() {
        let (sp, p, f) = setup("3/2", "5/2", 0.3, 2.0, 0.7);
        let l = build_liouvillian(&sp, &p, &f).unwrap();
        let n = l.dim();
        let a = CMat::from_fn(n, n, |r, c| {
            C::new((r * 7 + c * 3) as f64 % 5.0 - 2.0, (r as f64 - c as f64) * 0.1)
        });
        let rho = (&a + a.adjoint()) * C::new(0.5, 0.0);
        assert!(max_abs_diff(&l.apply(&rho), &l.apply_superoperator(&rho)) < 1e-12);
        assert!(l.trace_residual() < 1e-13);
        let mixed = CMat::identity(n, n) / C::new(n as f64, 0.0);
        assert!(l.apply(&mixed).trace().norm() < 1e-14);
    }

    #[test]
    fn two_level_bloch() {
        let (sp, p, f) = setup("0", "1", 0.2, 3.0, 0.5);
        let l = build_liouvillian(&sp, &p, &f).unwrap();
        let rho = numeric_steady_state(&l).unwrap();
        assert!((rho.excited_population() - 3.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn null_space_dimensions() {
        let (sp, p, f) = setup("1", "0", 0.2, 1.0, 0.0);
        let l = build_liouvillian(&sp, &p, &f).unwrap();
        assert_eq!(l.null_space_dimension(1e-10), 4);
        assert_eq!(numeric_steady_state(&l), Err(Error::NonUnique));
        let (sp, p, f) = setup("1", "2", 0.2, 1.0, 0.0);
        let l = build_liouvillian(&sp, &p, &f).unwrap();
        assert_eq!(l.null_space_dimension(1e-10), 1);
        let ev = l.eigenvalues().unwrap();
        assert!(ev.iter().all(|z| z.re <= 1e-12));
    }

    #[test]
    fn oracle_agrees_with_analytic() {
        let (sp, p, f) = setup("1/2", "1/2", 0.0, 3.0, 0.0);
        let l = build_liouvillian(&sp, &p, &f).unwrap();
        let num = numeric_steady_state(&l).unwrap();
        let ana = steady_state(&sp, &p, &f).unwrap();
        assert!(num.max_abs_diff(&ana.rho) < 1e-10);
        let (sp, p, f) = setup("1", "2", std::f64::consts::PI / 8.0, 1.0, 0.7);
        let l = build_liouvillian(&sp, &p, &f).unwrap();
        let num = numeric_steady_state(&l).unwrap();
        let ana = steady_state(&sp, &p, &f).unwrap();
        assert!(num.max_abs_diff(&ana.rho) < 1e-10);
        let (sp, p, f) = setup("2", "2", 0.3, 1.0, 0.7);
        let l = build_liouvillian(&sp, &p, &f).unwrap();
        let num = numeric_steady_state(&l).unwrap();
        assert!(crate::operators::max_abs(&num.rho_ee) < 1e-12);
    }

    #[test]
    fn integration_reaches_null_vector() {
        let (sp, p, f) = setup("1/2", "3/2", 0.25, 1.0, 0.7);
        let l = build_liouvillian(&sp, &p, &f).unwrap();
        let rho0 = DensityMatrix::pure_ground(&DVector::from_vec(vec![ONE, ZERO]), 4);
        let cfg = IntegratorConfig {
            dt: 0.002,
            t_end: 400.0,
            tolerance: 1e-9,
        };
        let out = integrate(&l, &rho0, &cfg).unwrap();
        let num = numeric_steady_state(&l).unwrap();
        assert!(out.rho.max_abs_diff(&num) < 1e-8);
        assert!(out.trace_drift < 1e-10 && out.max_hermiticity_error < 1e-12);
    }

    #[test]
    fn reduced_broadband_matches_monochromatic_at_zero_bandwidth() {
        let (sp, p, f) = setup("3/2", "5/2", 0.3, 2.0, 0.7);
        let (gg, ee) = broadband_reduced_steady_state(&sp, &p, &f).unwrap();
        let ana = steady_state(&sp, &p, &f).unwrap();
        assert!(max_abs_diff(&gg, &ana.rho.rho_gg) < 1e-12);
        assert!(max_abs_diff(&ee, &ana.rho.rho_ee) < 1e-12);
    }

    #[test]
    fn correlation_decays() {
        let c = field_correlation(1.0, 0.01, 100, 2000, 3).unwrap();
        for (k, lag) in c.lags.iter().enumerate().step_by(25) {
            assert!((c.mean[k] - (-lag).exp()).abs() < 3.0 * c.stderr[k] + 1e-12);
        }
        assert!(field_correlation(1.0, 0.2, 10, 200, 0).is_err());
    }
}
