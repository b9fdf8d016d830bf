//! Python module `obe_steady`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use num_complex::Complex64;
use obe_steady::gobe::{self, IntegratorConfig};
use obe_steady::steadystate::{self as ss, DensityMatrix};
use obe_steady::verify::{self, VerifyConfig};
use obe_steady::{AngularMomentum, CMat, Error, FieldParams, Frame, Polarization, TransitionSpec};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

create_exception!(obe_steady, SteadyStateError, PyRuntimeError);
create_exception!(obe_steady, NonUniqueError, SteadyStateError);
create_exception!(obe_steady, DarkExceptionError, SteadyStateError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Argument(_)
        | Error::ForbiddenTransition { .. }
        | Error::NotApplicable(_)
        | Error::DegeneratePair
        | Error::SingularDirection => PyValueError::new_err(e.to_string()),
        Error::NonUnique => NonUniqueError::new_err(e.to_string()),
        Error::DarkException => DarkExceptionError::new_err(e.to_string()),
        _ => SteadyStateError::new_err(e.to_string()),
    }
}

#[derive(FromPyObject)]
enum JArg {
    Int(u32),
    Float(f64),
    Text(String),
}

fn momentum(j: JArg) -> PyResult<AngularMomentum> {
    let x = match j {
        JArg::Int(n) => return Ok(AngularMomentum::integer(n)),
        JArg::Float(x) => x,
        JArg::Text(s) => match s.trim().split_once('/') {
            Some((a, "2")) => a.trim().parse::<f64>().map(|n| n / 2.0),
            Some(_) => return Err(PyValueError::new_err(format!("bad angular momentum {s:?}"))),
            None => s.trim().parse::<f64>(),
        }
        .map_err(|_| PyValueError::new_err(format!("bad angular momentum {s:?}")))?,
    };
    let two = 2.0 * x;
    if !(two >= 0.0) || (two - two.round()).abs() > 1e-9 || two > 1e6 {
        return Err(PyValueError::new_err(format!("{x} is not a non-negative half-integer")));
    }
    Ok(AngularMomentum::from_twice(two.round() as u32))
}

fn rows(m: &CMat) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn polarization(epsilon: f64, frame: &str) -> PyResult<Polarization> {
    let frame: Frame = frame.parse().map_err(to_py)?;
    Polarization::from_ellipticity(epsilon, frame).map_err(to_py)
}

/// A `Jg -> Je` transition.
#[pyclass(frozen, skip_from_py_object, module = "obe_steady")]
#[derive(Clone)]
pub struct Transition {
    spec: TransitionSpec,
}

#[pymethods]
impl Transition {
    #[new]
    fn new(jg: JArg, je: JArg) -> PyResult<Self> {
        let spec = ss::classify(momentum(jg)?, momentum(je)?).map_err(to_py)?;
        Ok(Self { spec })
    }

    #[getter]
    fn jg(&self) -> f64 {
        self.spec.jg.value()
    }

    #[getter]
    fn je(&self) -> f64 {
        self.spec.je.value()
    }

    /// One of "a", "b", "c", "d".
    #[getter]
    fn class_name(&self) -> String {
        self.spec.class.letter().to_string()
    }

    #[getter]
    fn n_g(&self) -> usize {
        self.spec.n_g()
    }

    #[getter]
    fn n_e(&self) -> usize {
        self.spec.n_e()
    }

    #[pyo3(signature = (epsilon=0.0))]
    fn dark_dimension(&self, epsilon: f64) -> PyResult<usize> {
        Ok(self.spec.dark_dimension_at(&polarization(epsilon, "conventional")?))
    }

    fn __repr__(&self) -> String {
        format!(
            "Transition({} -> {}, class {})",
            self.spec.jg,
            self.spec.je,
            self.class_name()
        )
    }
}

/// Steady-state density matrix with its invariants.
#[pyclass(frozen, get_all, module = "obe_steady")]
pub struct SteadyState {
    pi_e: f64,
    dark_dimension: usize,
    lambdas: Vec<f64>,
    nus: Option<Vec<f64>>,
    alpha0: Option<f64>,
    alpha1: Option<f64>,
    beta: Option<f64>,
    method: String,
    rho_gg: Vec<Vec<Complex64>>,
    rho_ee: Vec<Vec<Complex64>>,
    rho_eg: Vec<Vec<Complex64>>,
}

#[pymethods]
impl SteadyState {
    fn __repr__(&self) -> String {
        format!("SteadyState(pi_e={}, method={:?})", self.pi_e, self.method)
    }
}

fn from_rho(rho: &DensityMatrix, method: &str, dark_dimension: usize) -> SteadyState {
    SteadyState {
        pi_e: rho.excited_population(),
        dark_dimension,
        lambdas: Vec::new(),
        nus: None,
        alpha0: None,
        alpha1: None,
        beta: None,
        method: method.into(),
        rho_gg: rows(&rho.rho_gg),
        rho_ee: rows(&rho.rho_ee),
        rho_eg: rows(&rho.rho_eg),
    }
}

/// Closed-form steady state. Raises `NonUniqueError` for `J -> J-1`.
#[pyfunction]
#[pyo3(signature = (transition, epsilon, saturation=1.0, detuning=0.0, gamma=1.0, frame="conventional"))]
fn steady_state(
    transition: &Transition,
    epsilon: f64,
    saturation: f64,
    detuning: f64,
    gamma: f64,
    frame: &str,
) -> PyResult<SteadyState> {
    let pol = polarization(epsilon, frame)?;
    let field = FieldParams::from_saturation(saturation, detuning, gamma).map_err(to_py)?;
    let r = ss::steady_state(&transition.spec, &pol, &field).map_err(to_py)?;
    Ok(SteadyState {
        lambdas: r.lambdas.clone(),
        nus: r.nus.clone(),
        alpha0: r.alpha0,
        alpha1: r.alpha1,
        beta: r.beta,
        ..from_rho(&r.rho, "closed-form", r.dark_dimension)
    })
}

/// Steady state from the null space of the full Liouvillian.
#[pyfunction]
#[pyo3(signature = (transition, epsilon, saturation=1.0, detuning=0.0, gamma=1.0))]
fn numeric_steady_state(
    transition: &Transition,
    epsilon: f64,
    saturation: f64,
    detuning: f64,
    gamma: f64,
) -> PyResult<SteadyState> {
    let pol = polarization(epsilon, "conventional")?;
    let field = FieldParams::from_saturation(saturation, detuning, gamma).map_err(to_py)?;
    let l = gobe::build_liouvillian(&transition.spec, &pol, &field).map_err(to_py)?;
    let rho = gobe::numeric_steady_state(&l).map_err(to_py)?;
    Ok(from_rho(&rho, "null-space", transition.spec.dark_dimension_at(&pol)))
}

/// Integrates the GOBE from the fully mixed ground state until stationary.
#[pyfunction]
#[pyo3(signature = (transition, epsilon, saturation=1.0, detuning=0.0, max_time=1e5))]
fn integrate(
    py: Python<'_>,
    transition: &Transition,
    epsilon: f64,
    saturation: f64,
    detuning: f64,
    max_time: f64,
) -> PyResult<SteadyState> {
    let spec = transition.spec;
    let pol = polarization(epsilon, "conventional")?;
    let field = FieldParams::from_saturation(saturation, detuning, 1.0).map_err(to_py)?;
    let run = py.detach(|| {
        let l = gobe::build_liouvillian(&spec, &pol, &field)?;
        let mut rho0 = DensityMatrix::zeros(spec.n_g(), spec.n_e());
        for i in 0..spec.n_g() {
            rho0.rho_gg[(i, i)] = Complex64::new(1.0 / spec.n_g() as f64, 0.0);
        }
        let cfg = IntegratorConfig::for_saturation(saturation);
        gobe::integrate_until(&l, &rho0, &cfg, max_time.max(cfg.t_end))
    });
    let run = run.map_err(to_py)?;
    Ok(from_rho(&run.rho, "integrated", spec.dark_dimension_at(&pol)))
}

/// Orthonormal dark states of the ground level, as lists of amplitudes in `m` descending.
#[pyfunction]
fn dark_states(transition: &Transition, epsilon: f64) -> PyResult<Vec<Vec<Complex64>>> {
    let pol = polarization(epsilon, "conventional")?;
    let d = ss::dark_subspace(&transition.spec, &pol).map_err(to_py)?;
    Ok(d.basis.iter().map(|v| v.iter().copied().collect()).collect())
}

/// `alpha1 / alpha0` for classes c and d.
#[pyfunction]
fn alpha_ratio(transition: &Transition, epsilon: f64) -> PyResult<f64> {
    ss::alpha_ratio(&transition.spec, epsilon).map_err(to_py)
}

/// Excited population `S alpha1 / (alpha0 + S alpha1)`.
#[pyfunction]
fn excited_population(transition: &Transition, epsilon: f64, saturation: f64) -> PyResult<f64> {
    ss::excited_population(&transition.spec, epsilon, saturation).map_err(to_py)
}

/// `(epsilon, alpha_ratio, pi_e, pi_e_normalized, isat_ratio)`.
type ScanTuple = (f64, f64, f64, f64, f64);

/// Ellipticity scan, one tuple `(epsilon, alpha_ratio, pi_e, pi_e_normalized, isat_ratio)` per point.
#[pyfunction]
#[pyo3(signature = (transition, epsilons, saturation=1e-3))]
fn scan(transition: &Transition, epsilons: Vec<f64>, saturation: f64) -> PyResult<Vec<ScanTuple>> {
    epsilons
        .into_iter()
        .map(|e| {
            let r = ss::scan_row(&transition.spec, e, saturation).map_err(to_py)?;
            Ok((r.epsilon, r.alpha_ratio, r.pi_e, r.pi_e_normalized, r.isat_ratio))
        })
        .collect()
}

/// Clebsch-Gordan coefficient `<j1 m1; j2 m2 | j m>`, arguments doubled.
#[pyfunction]
fn clebsch_gordan(two_j1: u32, two_m1: i32, two_j2: u32, two_m2: i32, two_j: u32, two_m: i32) -> f64 {
    obe_steady::angular::cg_twice(two_j1, two_m1, two_j2, two_m2, two_j, two_m)
}

/// Runs the acceptance checks; returns `(id, name, passed, worst, tolerance)` tuples.
#[pyfunction]
#[pyo3(signature = (only=Vec::new(), max_two_j=8, seed=0))]
fn run_checks(py: Python<'_>, only: Vec<u32>, max_two_j: u32, seed: u64) -> Vec<(u32, String, bool, f64, f64)> {
    let cfg = VerifyConfig {
        max_two_j,
        seed,
        ..VerifyConfig::default()
    };
    py.detach(|| verify::run_selected(&cfg, &only))
        .into_iter()
        .map(|c| (c.id, c.name, c.passed, c.worst, c.tolerance))
        .collect()
}

#[pymodule]
#[pyo3(name = "obe_steady")]
fn obe_steady_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}

/// Adds the classes, functions and exceptions to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SteadyStateError", m.py().get_type::<SteadyStateError>())?;
    m.add("NonUniqueError", m.py().get_type::<NonUniqueError>())?;
    m.add("DarkExceptionError", m.py().get_type::<DarkExceptionError>())?;
    m.add_class::<Transition>()?;
    m.add_class::<SteadyState>()?;
    m.add_function(wrap_pyfunction!(steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(numeric_steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(dark_states, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(excited_population, m)?)?;
    m.add_function(wrap_pyfunction!(scan, m)?)?;
    m.add_function(wrap_pyfunction!(clebsch_gordan, m)?)?;
    m.add_function(wrap_pyfunction!(run_checks, m)?)?;
    Ok(())
}
