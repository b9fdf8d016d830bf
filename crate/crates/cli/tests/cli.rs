use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_obe-steady"))
        .args(args)
        .env("OBE_STEADY_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn steady_half_to_half_linear() {
    let out = run(&[
        "steady",
        "--jg",
        "1/2",
        "--je",
        "1/2",
        "--epsilon",
        "0",
        "--saturation",
        "3",
    ]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["transition"]["class"], "c");
    assert!((v["pi_e"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-14);
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"pi_e\":0.3333333333333333"));
    for key in ["rho_gg", "rho_ee", "rho_eg"] {
        assert!(v[key]["re"].is_array() && v[key]["im"].is_array());
    }
    assert_eq!(v["lambda2"].as_array().unwrap().len(), 2);
    assert!(v["alpha0"].is_number() && v["alpha1"].is_number() && v["beta"].is_number());
}

#[test]
fn steady_decimal_momenta_agree_with_fractions() {
    let a = run(&[
        "steady",
        "--jg",
        "1.5",
        "--je",
        "2.5",
        "--epsilon",
        "pi/8",
        "--saturation",
        "0.4",
    ]);
    let b = run(&[
        "steady",
        "--jg",
        "3/2",
        "--je",
        "5/2",
        "--epsilon",
        "0.125pi",
        "--saturation",
        "0.4",
    ]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn steady_j_to_j_integer_is_dark() {
    let out = run(&[
        "steady",
        "--jg",
        "1",
        "--je",
        "1",
        "--epsilon",
        "0.3",
        "--saturation",
        "2",
        "--detuning",
        "1",
    ]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["dark_dimension"], 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"pi_e\":0.0"));
}

#[test]
fn circular_half_integer_j_to_j_is_a_dark_exception() {
    let out = run(&["steady", "--jg", "1/2", "--je", "1/2", "--epsilon", "0.25pi"]);
    assert_eq!(code(&out), 65);
    assert!(String::from_utf8_lossy(&out.stderr).contains("dark-exception: circular polarization"));
    assert_eq!(json(&out)["status"], "dark-exception");
}

#[test]
fn j_to_j_minus_one_needs_an_initial_state() {
    let out = run(&["steady", "--jg", "1", "--je", "0", "--epsilon", "0.2"]);
    assert_eq!(code(&out), 2);
    assert_eq!(json(&out)["status"], "non-unique");

    let out = run(&[
        "steady",
        "--jg",
        "1",
        "--je",
        "0",
        "--epsilon",
        "0.2",
        "--initial",
        "mixed",
    ]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["method"], "integrated");
    assert!(v["pi_e"].as_f64().unwrap() < 1e-8);
}

#[test]
fn usage_errors_exit_64() {
    for args in [
        vec!["steady", "--jg", "abc", "--je", "1"],
        vec!["steady", "--jg", "1", "--je", "3"],
        vec!["steady", "--jg", "1", "--je", "1", "--epsilon", "1.2"],
        vec!["steady", "--jg", "1", "--je", "1", "--bogus"],
        vec!["scan", "--jg", "1", "--je", "1"],
        vec!["steady", "--jg", "1/2", "--je", "3/2", "--epsilon", "0:1:3"],
        vec!["verify", "--only", "11"],
    ] {
        let out = run(&args);
        assert_eq!(code(&out), 64, "{args:?}");
    }
}

fn csv_rows(text: &[u8]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(text);
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|x| x.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

#[test]
fn scan_class_c_shape_and_consistency() {
    let out = run(&[
        "scan",
        "--jg",
        "3/2",
        "--je",
        "3/2",
        "--epsilon",
        "0:pi/4:9",
        "--saturation",
        "0.001",
    ]);
    assert_eq!(code(&out), 0);
    let (header, rows) = csv_rows(&out.stdout);
    assert_eq!(
        header,
        [
            "epsilon",
            "saturation",
            "alpha_ratio",
            "pi_e",
            "pi_e_normalized",
            "isat_ratio",
            "schema_version"
        ]
    );
    assert_eq!(rows.len(), 9);
    let norm: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(norm.iter().all(|&x| x <= 1.0 + 1e-12));
    assert!(norm.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(norm[8].abs() < 1e-10);
    assert_eq!(rows[8][5], "inf");

    let st = json(&run(&[
        "steady",
        "--jg",
        "3/2",
        "--je",
        "3/2",
        "--epsilon",
        "0",
        "--saturation",
        "0.001",
    ]));
    let scan_pi: f64 = rows[0][3].parse().unwrap();
    let steady_pi = st["pi_e"].as_f64().unwrap();
    assert!((scan_pi - steady_pi).abs() <= 1e-12 * steady_pi);
}

#[test]
fn scan_class_d_rises_with_ellipticity() {
    let out = run(&[
        "scan",
        "--jg",
        "1",
        "--je",
        "2",
        "--epsilon",
        "0:pi/4:9",
        "--format",
        "json",
    ]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let norm: Vec<f64> = v["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["pi_e_normalized"].as_f64().unwrap())
        .collect();
    assert!(norm.iter().all(|&x| x >= 1.0 - 1e-12));
    assert!(norm.windows(2).all(|w| w[1] >= w[0] - 1e-12));
}

#[test]
fn output_is_byte_stable() {
    let args = [
        "scan",
        "--jg",
        "5/2",
        "--je",
        "7/2",
        "--epsilon",
        "0:pi/4:33",
        "--saturation",
        "0.1,1,10",
    ];
    let a = run(&args);
    let b = Command::new(env!("CARGO_BIN_EXE_obe-steady"))
        .args(args)
        .env("OBE_STEADY_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let s1 = run(&[
        "steady",
        "--jg",
        "2",
        "--je",
        "3",
        "--epsilon",
        "0.3",
        "--saturation",
        "5",
        "--detuning",
        "-2",
    ]);
    let s2 = run(&[
        "steady",
        "--jg",
        "2",
        "--je",
        "3",
        "--epsilon",
        "0.3",
        "--saturation",
        "5",
        "--detuning",
        "-2",
    ]);
    assert_eq!(s1.stdout, s2.stdout);
}

#[test]
fn out_flag_writes_file() {
    let dir = std::env::temp_dir().join(format!("obe-steady-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("steady.csv");
    let out = run(&[
        "steady",
        "--jg",
        "0",
        "--je",
        "1",
        "--saturation",
        "2",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("quantity,row,col,re,im\r\n"));
    let pi_e: f64 = text.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("pi_e,"));
    assert!((pi_e - 0.4).abs() < 1e-14);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn dark_states_of_j_to_j_minus_one() {
    let out = run(&["dark", "--jg", "2", "--je", "1", "--epsilon", "pi/8"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["dimension"], 2);
    let (a, b) = (v["overlap"].as_f64().unwrap(), v["overlap_formula"].as_f64().unwrap());
    assert!((a - b).abs() < 1e-10);
    let out = run(&["dark", "--jg", "3/2", "--je", "5/2", "--epsilon", "0.1"]);
    assert_eq!(json(&out)["dimension"], 0);
}

#[test]
fn broadband_zero_bandwidth_matches_steady() {
    let args = [
        "--jg",
        "1",
        "--je",
        "2",
        "--epsilon",
        "0.3",
        "--saturation",
        "1.5",
        "--detuning",
        "0.7",
    ];
    let bb = json(&run(&[&["broadband", "--bandwidth", "0"], &args[..]].concat()));
    let st = json(&run(&[&["steady"], &args[..]].concat()));
    assert!((bb["pi_e"].as_f64().unwrap() - st["pi_e"].as_f64().unwrap()).abs() < 1e-12);
}

#[test]
fn broadband_ensemble_is_reported() {
    let out = run(&[
        "broadband",
        "--jg",
        "0",
        "--je",
        "1",
        "--bandwidth",
        "1",
        "--realizations",
        "100",
        "--burn-in",
        "10",
        "--t-average",
        "40",
        "--seed",
        "3",
    ]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let ens = &v["ensemble"];
    let (mc, se) = (ens["pi_e"].as_f64().unwrap(), ens["pi_e_stderr"].as_f64().unwrap());
    assert!(se > 0.0);
    assert!((mc - v["pi_e"].as_f64().unwrap()).abs() < 4.0 * se);
}

#[test]
fn verify_identities_and_negative_control() {
    let ok = run(&["verify", "--only", "9"]);
    assert_eq!(code(&ok), 0);
    let text = String::from_utf8_lossy(&ok.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 6);

    let bad = run(&["verify", "--only", "9", "--inject-cg-sign-error", "--format", "json"]);
    assert_eq!(code(&bad), 1);
    let v = json(&bad);
    assert_eq!(v["status"], "failed");
    assert!(v["checks"].as_array().unwrap().iter().any(|c| c["passed"] == false));
}

#[test]
fn verify_broadband_small() {
    let out = run(&["verify", "--only", "8", "--max-j", "1", "--realizations", "100"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
}
