mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use common::{design, max_abs_diff, newton_glm, Family};
use nalgebra::DVector;

use proxi2s::cli::{self, FitReport, SS_DEFAULT_TOML};
use proxi2s::datagen::{generate_logit_dataset, DgpParams};
use proxi2s::sim::{from_csv, Estimator, StudyConfig};

fn demo_csv() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo.csv")
}

fn fit_demo(dir: &Path, links: (&str, &str), extra: &[&str]) -> FitReport {
    let out = dir.join(format!("{}_{}.json", links.0, links.1));
    let mut args = vec![
        "proxi2s".to_string(),
        "fit".into(),
        "--input".into(),
        demo_csv().display().to_string(),
        "--y-link".into(),
        links.0.into(),
        "--w-link".into(),
        links.1.into(),
        "--out".into(),
        out.display().to_string(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    assert_eq!(cli::run(args), cli::EXIT_OK);
    FitReport::from_json(&std::fs::read_to_string(out).unwrap()).unwrap()
}

fn demo_columns() -> [Vec<f64>; 4] {
    let ds = proxi2s::data::demo_dataset();
    [ds.y().to_vec(), ds.a().to_vec(), ds.z()[0].clone(), ds.w().to_vec()]
}

#[test]
fn demo_logit_fit_reproduces_three_step_script() {
    let dir = tempfile::tempdir().unwrap();
    let report = fit_demo(dir.path(), ("logit", "logit"), &["--variance", "sandwich"]);
    let [y, a, z, w] = demo_columns();
    let alpha = newton_glm(&design(&[&a, &z, &y]), &w, Family::Binomial, None);
    let s: Vec<f64> = (0..15).map(|i| alpha[0] + alpha[1] * a[i] + alpha[2] * z[i] + alpha[3]).collect();
    let beta = newton_glm(&design(&[&a, &s, &w]), &y, Family::Binomial, None);
    let first: Vec<f64> = report.first_stage.iter().map(|c| c.estimate).collect();
    let second: Vec<f64> = report.second_stage.iter().map(|c| c.estimate).collect();
    assert!(max_abs_diff(&first, alpha.as_slice()) <= 1e-6);
    assert!(max_abs_diff(&second, beta.as_slice()) <= 1e-6);
    assert_eq!(report.procedure, "P3");
    assert_eq!(report.n, 15);
    assert_eq!(report.beta_a.estimate, second[1]);
    assert!(report.beta_a.sandwich.is_some() && report.beta_a.bootstrap.is_none());
}

#[test]
fn demo_identity_fit_matches_closed_form_2sls() {
    let dir = tempfile::tempdir().unwrap();
    let report = fit_demo(dir.path(), ("identity", "identity"), &["--variance", "sandwich"]);
    let [y, a, z, w] = demo_columns();
    let b = design(&[&a, &z]);
    let what = &b * (b.transpose() * &b).try_inverse().unwrap() * b.transpose() * DVector::from_vec(w);
    let c = design(&[&a, what.as_slice()]);
    let beta = (c.transpose() * &c).try_inverse().unwrap() * c.transpose() * DVector::from_vec(y);
    let second: Vec<f64> = report.second_stage.iter().map(|c| c.estimate).collect();
    assert!(max_abs_diff(&second, beta.as_slice()) <= 1e-8);
    assert_eq!(report.procedure, "P1");
}

#[test]
fn report_json_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate_logit_dataset(300, &DgpParams::simulation_study(), 8).unwrap().dataset;
    let mut text = String::from("y,a,z,w\n");
    for i in 0..ds.n() {
        text += &format!("{},{},{},{}\n", ds.y()[i], ds.a()[i], ds.z()[0][i], ds.w()[i]);
    }
    let csv = dir.path().join("sim.csv");
    std::fs::write(&csv, text).unwrap();
    let out = dir.path().join("report.json");
    let argv = ["proxi2s", "fit", "--variance", "both", "--boot-b", "50", "--seed", "3", "--input"]
        .iter()
        .map(|s| s.to_string())
        .chain([csv.display().to_string(), "--out".into(), out.display().to_string()]);
    assert_eq!(cli::run(argv), cli::EXIT_OK);
    let json = std::fs::read_to_string(out).unwrap();
    let report = FitReport::from_json(&json).unwrap();
    assert!(report.beta_a.bootstrap.is_some() && report.beta_a.sandwich.is_some());
    assert_eq!(FitReport::from_json(&report.to_json()).unwrap(), report);
    assert_eq!(report.to_json().trim_end(), json.trim_end());
}

#[test]
fn unstable_bootstrap_exits_with_numerical_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_proxi2s"))
        .args(["fit", "--variance", "bootstrap", "--boot-b", "50", "--input"])
        .arg(demo_csv())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bootstrap replicates failed"));
}

#[test]
fn missing_column_exits_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("no_w.csv");
    std::fs::write(&csv, "y,a,z\n1,0,3\n0,1,2\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_proxi2s")).args(["fit", "--input"]).arg(&csv).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`w`"), "stderr: {err}");
}

#[test]
fn invalid_generating_parameters_exit_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, SS_DEFAULT_TOML.replace("alpha_y = 0.5", "alpha_y = 0.1")).unwrap();
    assert!(SS_DEFAULT_TOML.contains("alpha_y = 0.5"));
    let out = Command::new(env!("CARGO_BIN_EXE_proxi2s"))
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bundled_preset_is_the_study_configuration() {
    let parsed = cli::parse_study_config(SS_DEFAULT_TOML).unwrap();
    assert_eq!(parsed, StudyConfig::ss_default());
    assert_eq!(cli::preset("ss_default").unwrap(), parsed);
    let d = &parsed.dgp;
    assert_eq!(
        (d.beta0, d.beta_a, d.beta_u, d.beta_w, d.alpha0, d.alpha_u, d.alpha_y),
        (-1.4, 1.2, -0.7, 0.5, -0.8, 0.5, 0.5)
    );
    assert_eq!(parsed.sample_sizes, vec![250, 500, 1000, 1500]);
    assert_eq!((parsed.replications, parsed.bootstrap_b), (500, 300));
}

#[test]
fn unconfounded_quick_run_is_unbiased() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "proxi2s", "simulate", "--preset", "ss_default", "--sizes", "2000", "--reps", "100", "--variance", "sandwich", "--seed", "11",
        "--dgp-beta-u", "0", "--out-dir",
    ];
    let mut argv: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    argv.push(dir.path().display().to_string());
    assert_eq!(cli::run(argv), cli::EXIT_OK);
    let report = from_csv(&std::fs::read_to_string(dir.path().join("sim_report.csv")).unwrap()).unwrap();
    for e in [Estimator::TwoStage, Estimator::Naive] {
        let row = report.row(2000, e).unwrap();
        assert!(row.bias.abs() <= 3.0 * row.mc_se(100), "{e:?}: bias {} mc se {}", row.bias, row.mc_se(100));
    }
    assert!(dir.path().join("sim_report.json").exists() && dir.path().join("study.toml").exists());
}

#[test]
fn repeated_simulations_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let argv = ["proxi2s", "simulate", "--preset", "ss_default", "--sizes", "250", "--reps", "10", "--seed", "7", "--boot-b", "20"]
            .iter()
            .map(|s| s.to_string())
            .chain(["--out-dir".to_string(), out.display().to_string()]);
        assert_eq!(cli::run(argv), cli::EXIT_OK);
        std::fs::read(out.join("sim_report.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}
