//! Subcommand implementations. Each returns the text to emit.

use num_complex::Complex64;
use obe_steady::gobe::{
    build_liouvillian, integrate_until, phase_diffusion_average, thread_pool, EnsembleConfig, IntegratorConfig,
};
use obe_steady::steadystate::{broadband_steady_state, dark_overlap_formula, dark_subspace, scan_row, ScanRow};
use obe_steady::verify::{self, VerifyConfig};
use obe_steady::{
    classify, steady_state, DensityMatrix, Error, FieldParams, Frame, Normalization, Polarization, TransitionClass,
    TransitionSpec,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::args::{
    frame, grid, momentum, projection, real, single, BroadbandArgs, DarkArgs, Field, Format, ScanArgs, SteadyArgs,
    Transition, Usage, VerifyArgs,
};
use crate::output::{fmt17, matrix, matrix_rows, num, opt_num, scalar_row, to_csv, to_json, vector, SCHEMA_VERSION};

/// Why a command stopped.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core(Error),
    /// Checks ran but some failed; carries the report.
    Verify(String),
}

impl From<Usage> for Failure {
    fn from(u: Usage) -> Self {
        Failure::Usage(u.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Argument(_)
            | Error::ForbiddenTransition { .. }
            | Error::NotApplicable(_)
            | Error::DegeneratePair
            | Error::SingularDirection => Failure::Usage(e.to_string()),
            other => Failure::Core(other),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 64,
            Failure::Core(Error::NonUnique) => 2,
            Failure::Core(_) => 65,
            Failure::Verify(_) => 1,
        }
    }

    /// Machine-readable status tag.
    pub fn status(&self) -> &'static str {
        match self {
            Failure::Usage(_) => "invalid",
            Failure::Core(Error::NonUnique) => "non-unique",
            Failure::Core(Error::DarkException) => "dark-exception",
            Failure::Core(Error::NotConverged { .. }) => "not-converged",
            Failure::Core(_) => "numerical-failure",
            Failure::Verify(_) => "failed",
        }
    }

    pub fn message(&self) -> String {
        match self {
            Failure::Usage(m) => m.clone(),
            Failure::Core(Error::DarkException) => "dark-exception: circular polarization".to_string(),
            Failure::Core(Error::NonUnique) => "non-unique: steady state depends on the initial state".to_string(),
            Failure::Core(e) => e.to_string(),
            Failure::Verify(_) => "verification failed".to_string(),
        }
    }

    pub fn to_json(&self) -> String {
        to_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "status": self.status(),
            "error": self.message(),
        }))
    }
}

type Outcome = Result<String, Failure>;

/// Longest class-a integration, in units of `1/gamma`.
const MAX_T_END: f64 = 1e5;

fn spec_of(t: &Transition) -> Result<TransitionSpec, Failure> {
    Ok(classify(momentum(&t.jg)?, momentum(&t.je)?)?)
}

fn class_tag(c: TransitionClass) -> String {
    c.letter().to_string()
}

fn normalization_tag(n: Normalization) -> &'static str {
    match n {
        Normalization::Harmonic => "harmonic",
        Normalization::TensorPower => "tensor-power",
    }
}

fn frame_tag(f: Frame) -> &'static str {
    match f {
        Frame::Conventional => "conventional",
        Frame::NaturalPlus => "natural-plus",
        Frame::NaturalMinus => "natural-minus",
        Frame::Custom => "custom",
    }
}

fn transition_json(sp: &TransitionSpec) -> Value {
    json!({
        "jg": sp.jg.to_string(),
        "je": sp.je.to_string(),
        "class": class_tag(sp.class),
    })
}

struct Setup {
    pol: Polarization,
    field: FieldParams,
    epsilon: f64,
    saturation: f64,
}

fn setup(f: &Field, bandwidth: f64) -> Result<Setup, Failure> {
    let epsilon = single(&f.epsilon, "epsilon")?;
    let detuning = single(&f.detuning, "detuning")?;
    let pol = Polarization::from_ellipticity(epsilon, frame(&f.frame)?)?;
    let (field, saturation) = match &f.rabi {
        Some(r) => {
            let rabi = Complex64::from_polar(single(r, "rabi")?, real(&f.rabi_phase)?);
            let field = FieldParams::new(rabi, detuning, 1.0, bandwidth)?;
            (field, field.saturation())
        }
        None => {
            let s = single(&f.saturation, "saturation")?;
            let mono = FieldParams::from_saturation(s, detuning, 1.0)?;
            (FieldParams::new(mono.rabi, detuning, 1.0, bandwidth)?, s)
        }
    };
    Ok(Setup {
        pol,
        field,
        epsilon,
        saturation,
    })
}

fn field_json(s: &Setup) -> Value {
    json!({
        "epsilon": num(s.epsilon),
        "frame": frame_tag(s.pol.frame()),
        "saturation": num(s.saturation),
        "detuning": num(s.field.detuning),
        "bandwidth": num(s.field.bandwidth),
        "gamma": num(s.field.gamma),
        "rabi": { "re": num(s.field.rabi.re), "im": num(s.field.rabi.im) },
    })
}

fn rho_json(rho: &DensityMatrix) -> Value {
    json!({
        "rho_gg": matrix(&rho.rho_gg),
        "rho_ee": matrix(&rho.rho_ee),
        "rho_eg": matrix(&rho.rho_eg),
    })
}

fn merge(mut a: Value, b: Value) -> Value {
    if let (Value::Object(x), Value::Object(y)) = (&mut a, b) {
        x.extend(y);
    }
    a
}

fn initial_state(sp: &TransitionSpec, s: &str) -> Result<DensityMatrix, Failure> {
    let (ng, ne) = (sp.n_g(), sp.n_e());
    if s.trim().eq_ignore_ascii_case("mixed") {
        let mut rho = DensityMatrix::zeros(ng, ne);
        for i in 0..ng {
            rho.rho_gg[(i, i)] = Complex64::new(1.0 / ng as f64, 0.0);
        }
        return Ok(rho);
    }
    let two_m = projection(s)?;
    let i = sp
        .jg
        .index_of(two_m)
        .ok_or_else(|| Failure::Usage(format!("projection {s} not allowed for Jg = {}", sp.jg)))?;
    let mut rho = DensityMatrix::zeros(ng, ne);
    rho.rho_gg[(i, i)] = Complex64::new(1.0, 0.0);
    Ok(rho)
}

pub fn steady(a: &SteadyArgs) -> Outcome {
    let sp = spec_of(&a.transition)?;
    let bandwidth = real(&a.bandwidth)?;
    let st = setup(&a.field, bandwidth)?;
    let format = a.output.format.unwrap_or(Format::Json);
    if format == Format::Text {
        return Err(Failure::Usage("steady writes json or csv".into()));
    }
    if bandwidth > 0.0 {
        return broadband_output(&sp, &st, None, format);
    }
    let head = json!({
        "schema_version": SCHEMA_VERSION,
        "status": "ok",
        "command": "steady",
        "transition": transition_json(&sp),
        "field": field_json(&st),
    });
    let (body, rho) = if sp.class == TransitionClass::DarkTwoDim {
        let init = a.initial.as_deref().ok_or(Error::NonUnique)?;
        let rho0 = initial_state(&sp, init)?;
        let l = build_liouvillian(&sp, &st.pol, &st.field)?;
        let cfg = IntegratorConfig::for_saturation(st.saturation);
        let run = integrate_until(&l, &rho0, &cfg, MAX_T_END.max(cfg.t_end))?;
        let body = json!({
            "method": "integrated",
            "initial": init,
            "dark_dimension": sp.dark_dimension_at(&st.pol),
            "pi_e": num(run.rho.excited_population()),
            "lambda2": Value::Null,
            "nu2": Value::Null,
            "alpha0": Value::Null,
            "alpha1": Value::Null,
            "beta": Value::Null,
            "normalization": Value::Null,
            "residual": num(run.residual),
        });
        (body, run.rho)
    } else {
        let r = steady_state(&sp, &st.pol, &st.field)?;
        let body = json!({
            "method": "analytic",
            "dark_dimension": r.dark_dimension,
            "pi_e": num(r.pi_e),
            "lambda2": r.lambdas.iter().map(|&v| num(v)).collect::<Vec<_>>(),
            "nu2": r.nus.as_ref().map(|v| v.iter().map(|&x| num(x)).collect::<Vec<_>>()),
            "alpha0": opt_num(r.alpha0),
            "alpha1": opt_num(r.alpha1),
            "beta": opt_num(r.beta),
            "normalization": normalization_tag(r.normalization),
        });
        (body, r.rho)
    };
    match format {
        Format::Json => Ok(to_json(&merge(merge(head, body.clone()), rho_json(&rho)))),
        _ => {
            let mut rows = Vec::new();
            for key in ["pi_e", "alpha0", "alpha1", "beta"] {
                scalar_row(key, body[key].as_f64(), &mut rows);
            }
            scalar_row("dark_dimension", body["dark_dimension"].as_f64(), &mut rows);
            if let Some(l) = body["lambda2"].as_array() {
                for (i, v) in l.iter().enumerate() {
                    rows.push(vec![
                        "lambda2".into(),
                        i.to_string(),
                        String::new(),
                        fmt17(v.as_f64().unwrap_or(f64::NAN)),
                        String::new(),
                    ]);
                }
            }
            if let Some(l) = body["nu2"].as_array() {
                for (i, v) in l.iter().enumerate() {
                    rows.push(vec![
                        "nu2".into(),
                        i.to_string(),
                        String::new(),
                        fmt17(v.as_f64().unwrap_or(f64::NAN)),
                        String::new(),
                    ]);
                }
            }
            matrix_rows("rho_gg", &rho.rho_gg, &mut rows);
            matrix_rows("rho_ee", &rho.rho_ee, &mut rows);
            matrix_rows("rho_eg", &rho.rho_eg, &mut rows);
            Ok(to_csv(&["quantity", "row", "col", "re", "im"], &rows)?)
        }
    }
}

fn broadband_output(sp: &TransitionSpec, st: &Setup, ens: Option<EnsembleConfig>, format: Format) -> Outcome {
    if sp.class == TransitionClass::DarkTwoDim {
        return Err(Error::NonUnique.into());
    }
    let det = broadband_steady_state(sp, &st.pol, &st.field)?;
    let mc = match ens {
        Some(cfg) => Some(phase_diffusion_average(sp, &st.pol, &st.field, &cfg)?),
        None => None,
    };
    match format {
        Format::Json => {
            let mut v = json!({
                "schema_version": SCHEMA_VERSION,
                "status": "ok",
                "command": "broadband",
                "transition": transition_json(sp),
                "field": field_json(st),
                "r": num(det.map.r),
                "l": num(det.map.l),
                "saturation_effective": num(det.map.s_eff),
                "pi_e": num(det.pi_e),
                "rho_gg": matrix(&det.rho_gg),
                "rho_ee": matrix(&det.rho_ee),
                "coherence": matrix(&det.coherence),
                "ensemble": Value::Null,
            });
            if let (Some(m), Some(cfg)) = (&mc, ens) {
                v["ensemble"] = json!({
                    "realizations": m.realizations,
                    "seed": cfg.seed,
                    "dt": num(cfg.dt),
                    "burn_in": num(cfg.burn_in),
                    "t_average": num(cfg.t_average),
                    "pi_e": num(m.pi_e),
                    "pi_e_stderr": num(m.pi_e_stderr),
                    "rho_gg": matrix(&m.rho_gg),
                    "rho_ee": matrix(&m.rho_ee),
                });
            }
            Ok(to_json(&v))
        }
        Format::Csv => {
            let mut rows = Vec::new();
            scalar_row("r", Some(det.map.r), &mut rows);
            scalar_row("l", Some(det.map.l), &mut rows);
            scalar_row("saturation_effective", Some(det.map.s_eff), &mut rows);
            scalar_row("pi_e", Some(det.pi_e), &mut rows);
            matrix_rows("rho_gg", &det.rho_gg, &mut rows);
            matrix_rows("rho_ee", &det.rho_ee, &mut rows);
            matrix_rows("coherence", &det.coherence, &mut rows);
            if let Some(m) = &mc {
                scalar_row("ensemble_pi_e", Some(m.pi_e), &mut rows);
                scalar_row("ensemble_pi_e_stderr", Some(m.pi_e_stderr), &mut rows);
                matrix_rows("ensemble_rho_gg", &m.rho_gg, &mut rows);
                matrix_rows("ensemble_rho_ee", &m.rho_ee, &mut rows);
            }
            Ok(to_csv(&["quantity", "row", "col", "re", "im"], &rows)?)
        }
        Format::Text => Err(Failure::Usage("broadband writes json or csv".into())),
    }
}

pub fn broadband(a: &BroadbandArgs) -> Outcome {
    let sp = spec_of(&a.transition)?;
    let bandwidth = real(&a.bandwidth)?;
    let st = setup(&a.field, bandwidth)?;
    let ens = a.realizations.map(|n| EnsembleConfig {
        realizations: n,
        dt: a.dt,
        burn_in: a.burn_in,
        t_average: a.t_average,
        seed: a.seed,
    });
    broadband_output(&sp, &st, ens, a.output.format.unwrap_or(Format::Json))
}

pub const SCAN_HEADER: [&str; 7] = [
    "epsilon",
    "saturation",
    "alpha_ratio",
    "pi_e",
    "pi_e_normalized",
    "isat_ratio",
    "schema_version",
];

pub fn scan(a: &ScanArgs) -> Outcome {
    let sp = spec_of(&a.transition)?;
    if !matches!(sp.class, TransitionClass::NoDarkHalfInt | TransitionClass::NoDarkPlus) {
        return Err(Failure::Usage(format!(
            "scan needs a transition without dark states; {} -> {} is class {}",
            sp.jg,
            sp.je,
            sp.class.letter()
        )));
    }
    if real(&a.bandwidth)? != 0.0 {
        return Err(Failure::Usage("scan is monochromatic; use broadband for mu > 0".into()));
    }
    grid(&a.detuning)?;
    let eps = grid(&a.epsilon)?;
    let sats = grid(&a.saturation)?;
    let points: Vec<(f64, f64)> = sats.iter().flat_map(|&s| eps.iter().map(move |&e| (e, s))).collect();
    let pool = thread_pool()?;
    let rows: Vec<Result<(f64, ScanRow), Error>> = pool.install(|| {
        points
            .par_iter()
            .map(|&(e, s)| scan_row(&sp, e, s).map(|r| (s, r)))
            .collect()
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, Error>>()?;
    match a.output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|(s, r)| {
                    vec![
                        fmt17(r.epsilon),
                        fmt17(*s),
                        fmt17(r.alpha_ratio),
                        fmt17(r.pi_e),
                        fmt17(r.pi_e_normalized),
                        fmt17(r.isat_ratio),
                        SCHEMA_VERSION.to_string(),
                    ]
                })
                .collect();
            Ok(to_csv(&SCAN_HEADER, &body)?)
        }
        Format::Json => {
            let list: Vec<Value> = rows
                .iter()
                .map(|(s, r)| {
                    json!({
                        "epsilon": num(r.epsilon),
                        "saturation": num(*s),
                        "alpha_ratio": num(r.alpha_ratio),
                        "pi_e": num(r.pi_e),
                        "pi_e_normalized": num(r.pi_e_normalized),
                        "isat_ratio": num(r.isat_ratio),
                    })
                })
                .collect();
            Ok(to_json(&json!({
                "schema_version": SCHEMA_VERSION,
                "status": "ok",
                "command": "scan",
                "transition": transition_json(&sp),
                "rows": list,
            })))
        }
        Format::Text => Err(Failure::Usage("scan writes csv or json".into())),
    }
}

pub fn dark(a: &DarkArgs) -> Outcome {
    let sp = spec_of(&a.transition)?;
    let epsilon = single(&a.epsilon, "epsilon")?;
    let pol = Polarization::from_ellipticity(epsilon, frame(&a.frame)?)?;
    let d = match dark_subspace(&sp, &pol) {
        Ok(d) => Some(d),
        Err(Error::NoDarkState(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let basis: Vec<Vec<Complex64>> = d
        .as_ref()
        .map(|d| d.basis.iter().map(|v| v.iter().copied().collect()).collect())
        .unwrap_or_default();
    let pair = d.as_ref().and_then(|d| d.coherent_pair.clone());
    let overlap = d.as_ref().and_then(|d| d.overlap);
    let formula = (sp.class == TransitionClass::DarkTwoDim).then(|| dark_overlap_formula(sp.jg, pol.self_dot()));
    let projections: Vec<String> = sp.jg.projections().map(half).collect();
    match a.output.format.unwrap_or(Format::Json) {
        Format::Json => Ok(to_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "status": "ok",
            "command": "dark",
            "transition": transition_json(&sp),
            "epsilon": num(epsilon),
            "frame": frame_tag(pol.frame()),
            "projections": projections,
            "dimension": basis.len(),
            "states": basis.iter().map(|v| vector(v)).collect::<Vec<_>>(),
            "coherent_pair": pair.as_ref().map(|(p, q)| vec![
                vector(&p.iter().copied().collect::<Vec<_>>()),
                vector(&q.iter().copied().collect::<Vec<_>>()),
            ]),
            "overlap": opt_num(overlap),
            "overlap_formula": opt_num(formula),
        }))),
        Format::Csv => {
            let mut rows = Vec::new();
            for (k, v) in basis.iter().enumerate() {
                for (i, z) in v.iter().enumerate() {
                    rows.push(vec![k.to_string(), projections[i].clone(), fmt17(z.re), fmt17(z.im)]);
                }
            }
            Ok(to_csv(&["state", "m", "re", "im"], &rows)?)
        }
        Format::Text => Err(Failure::Usage("dark writes json or csv".into())),
    }
}

fn half(two_m: i32) -> String {
    if two_m % 2 == 0 {
        (two_m / 2).to_string()
    } else {
        format!("{two_m}/2")
    }
}

pub fn verify(a: &VerifyArgs) -> Outcome {
    let max = momentum(&a.max_j)?;
    let mut cfg = VerifyConfig {
        max_two_j: max.twice(),
        tolerance: a.tolerance,
        seed: a.seed,
        ..VerifyConfig::default()
    };
    cfg.ensemble.realizations = a.realizations;
    if a.inject_cg_sign_error {
        cfg.cg = verify::sign_flipped_cg;
    }
    if let Some(bad) = a.only.iter().find(|&&i| !(1..=10).contains(&i)) {
        return Err(Failure::Usage(format!("unknown criterion {bad}")));
    }
    let outcomes = verify::run_selected(&cfg, &a.only);
    let all = outcomes.iter().all(|o| o.passed);
    let report = match a.output.format.unwrap_or(Format::Text) {
        Format::Text => {
            let mut s = String::new();
            for o in &outcomes {
                s.push_str(&format!(
                    "{} [{}] {}: worst {:.3e} (tol {:.1e}, {} cases) {}\n",
                    if o.passed { "PASS" } else { "FAIL" },
                    o.id,
                    o.name,
                    o.worst,
                    o.tolerance,
                    o.cases,
                    o.detail
                ));
            }
            s.push_str(if all {
                "all checks passed\n"
            } else {
                "some checks FAILED\n"
            });
            s
        }
        Format::Json => to_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "status": if all { "ok" } else { "failed" },
            "command": "verify",
            "max_j": max.to_string(),
            "tolerance": num(a.tolerance),
            "seed": a.seed,
            "checks": outcomes.iter().map(|o| json!({
                "criterion": o.id,
                "name": o.name,
                "passed": o.passed,
                "worst": num(o.worst),
                "tolerance": num(o.tolerance),
                "cases": o.cases,
                "detail": o.detail,
            })).collect::<Vec<_>>(),
        })),
        Format::Csv => {
            let rows: Vec<Vec<String>> = outcomes
                .iter()
                .map(|o| {
                    vec![
                        o.id.to_string(),
                        o.name.clone(),
                        o.passed.to_string(),
                        fmt17(o.worst),
                        fmt17(o.tolerance),
                        o.cases.to_string(),
                    ]
                })
                .collect();
            to_csv(&["criterion", "name", "passed", "worst", "tolerance", "cases"], &rows)?
        }
    };
    if all {
        Ok(report)
    } else {
        Err(Failure::Verify(report))
    }
}
