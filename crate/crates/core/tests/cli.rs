use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use robustreg::cli::RunManifest;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_robustreg"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_with_threads(args: &[&str], threads: &str) -> Output {
    bin().env("ROBUSTREG_THREADS", threads).args(args).output().expect("binary runs")
}

fn demo_dir(tmp: &Path) -> PathBuf {
    let out = tmp.join("demo");
    let o = run(&["demo", "cigarette", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn fit_json(args: &[&str]) -> serde_json::Value {
    let o = run(args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn schema() -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/fit.schema.json");
    let schema: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

#[test]
fn fit_on_demo_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = demo_dir(tmp.path()).join("cigarette.csv");
    let csv = csv.to_str().unwrap();
    let ols = fit_json(&["fit", "--method", "ols", "--input", csv, "--response", "deaths"]);
    let slope = ols["coefficients"][1].as_f64().unwrap();
    assert!((slope - 0.2284).abs() < 1e-3, "{slope}");
    assert_eq!(ols["coefficient_names"], serde_json::json!(["intercept", "consumption"]));

    // every method prints schema-valid JSON
    let v = schema();
    for m in robustreg::MethodId::names() {
        let out = fit_json(&["fit", "--method", m, "--input", csv, "--response", "deaths", "--seed", "4"]);
        let errors: Vec<String> = v.iter_errors(&out).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{m}: {errors:?}");
    }
}

#[test]
fn fit_options_are_applied() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = demo_dir(tmp.path()).join("cigarette.csv");
    let csv = csv.to_str().unwrap();
    let a = fit_json(&["fit", "--method", "mm", "--input", csv, "--response", "deaths", "--k1", "3.44"]);
    let b = fit_json(&["fit", "--method", "mm", "--input", csv, "--response", "deaths"]);
    assert_ne!(a["coefficients"], b["coefficients"]);
    let nc = fit_json(&["fit", "--method", "ols", "--input", csv, "--response", "deaths", "--no-intercept"]);
    assert_eq!(nc["coefficients"].as_array().unwrap().len(), 1);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = demo_dir(tmp.path()).join("cigarette.csv");
    let csv = csv.to_str().unwrap();

    let o = run(&["fit", "--method", "bogus", "--input", csv, "--response", "deaths"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("rewlse") && err.contains("meanshift_hard"), "{err}");

    assert_eq!(run(&["fit", "--method", "ols"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));

    let missing = tmp.path().join("nope.csv");
    let o = run(&["fit", "--method", "ols", "--input", missing.to_str().unwrap(), "--response", "y"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["fit", "--method", "ols", "--input", csv, "--response", "nope"]);
    assert_eq!(o.status.code(), Some(2));

    // a duplicated covariate is rank deficient: a fit error
    let dup = tmp.path().join("dup.csv");
    fs::write(&dup, "a,b,y\n1,1,2\n2,2,3\n3,3,5\n4,4,4\n5,5,7\n").unwrap();
    let o = run(&["fit", "--method", "ols", "--input", dup.to_str().unwrap(), "--response", "y"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));

    let o = run(&["simulate", "--example", "3", "--case", "I", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["simulate", "--example", "1", "--case", "IX", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn demo_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = demo_dir(tmp.path());
    let data = fs::read_to_string(out.join("cigarette.csv")).unwrap();
    assert!(data.lines().any(|l| l == "USA,1300,200"));
    assert_eq!(data.lines().count(), 12);

    let plot = fs::read_to_string(out.join("cigarette_plot.csv")).unwrap();
    let rows: Vec<&str> = plot.lines().skip(1).collect();
    assert_eq!(rows.iter().filter(|l| l.starts_with("point,")).count(), 11);
    assert_eq!(rows.iter().filter(|l| l.starts_with("line,")).count(), 3);

    let fits = fs::read_to_string(out.join("cigarette_fits.csv")).unwrap();
    assert_eq!(fits.lines().count(), 7);
    let ols_reduced: Vec<f64> = fits
        .lines()
        .find(|l| l.starts_with("ols,without_usa,"))
        .unwrap()
        .split(',')
        .skip(2)
        .take(2)
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((ols_reduced[0] - 9.1393).abs() < 1e-3 && (ols_reduced[1] - 0.3687).abs() < 1e-3);

    let m = RunManifest::read(&out.join("manifest.json")).unwrap();
    assert_eq!(m.command, "demo");
    assert_eq!(m.outputs.len(), 3);
}

#[test]
fn simulate_layout_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let args = |out: &Path| {
        vec![
            "simulate".to_string(),
            "--example".into(),
            "1".into(),
            "--case".into(),
            "IV".into(),
            "--n".into(),
            "40".into(),
            "--reps".into(),
            "12".into(),
            "--seed".into(),
            "99".into(),
            "--methods".into(),
            "all".into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    let av = args(&a);
    let bv = args(&b);
    let o = run_with_threads(&av.iter().map(String::as_str).collect::<Vec<_>>(), "1");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run_with_threads(&bv.iter().map(String::as_str).collect::<Vec<_>>(), "4");
    assert!(o.status.success());

    let csv_a = fs::read(a.join("mse.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.join("mse.csv")).unwrap());
    let text = String::from_utf8(csv_a).unwrap();
    assert_eq!(text.lines().next().unwrap(), "method,coefficient,mse,replicates,excluded");
    assert_eq!(text.lines().count(), 17);
    let json: serde_json::Value = serde_json::from_slice(&fs::read(a.join("mse.json")).unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 16);

    let one = tmp.path().join("one");
    let o = run(&[
        "simulate", "--example", "2", "--case", "I", "--n", "30", "--reps", "1", "--methods", "ols,mm", "--out",
        one.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(one.join("mse.csv")).unwrap();
    assert_eq!(text.lines().count(), 9);
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(3) == Some("1")));
}

#[test]
fn replay_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let o = run(&[
        "simulate", "--example", "1", "--case", "VI", "--n", "30", "--reps", "8", "--seed", "5", "--methods",
        "lts,rewlse", "--out", first.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let manifest = first.join("manifest.json");
    let m = RunManifest::read(&manifest).unwrap();
    assert_eq!(m.seed, 5);
    assert_eq!(m.version, env!("CARGO_PKG_VERSION"));
    assert_eq!(m.config["methods"], "lts,rewlse");

    let second = tmp.path().join("second");
    let o = run(&["replay", manifest.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in &m.outputs {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(second.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn bench_breakdown_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bd");
    let o = run(&["bench", "breakdown", "--method", "ols,lts", "--n", "50", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("breakdown.csv")).unwrap();
    let row = |m: &str| -> Vec<String> {
        text.lines()
            .find(|l| l.starts_with(&format!("{m},")))
            .unwrap()
            .split(',')
            .map(str::to_string)
            .collect()
    };
    assert_eq!(row("ols")[3], "0.02");
    let lts = &row("lts")[3];
    assert!(lts == ">0.5" || lts.parse::<f64>().unwrap() > 0.4, "{lts}");
    let ladder = fs::read_to_string(out.join("breakdown_ladder.csv")).unwrap();
    // 25 corruption levels times 4 magnitudes per method
    assert_eq!(ladder.lines().count(), 1 + 2 * 25 * 4);
}

#[test]
fn bench_efficiency_rewlse() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("eff");
    let o = run(&[
        "bench", "efficiency", "--method", "rewlse", "--n", "100", "--reps", "400", "--seed", "2", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("efficiency.csv")).unwrap();
    let e: f64 = text.lines().nth(1).unwrap().split(',').nth(4).unwrap().parse().unwrap();
    assert!((0.80..=1.05).contains(&e), "{e}");

    let o = run(&["bench", "efficiency", "--method", "mm", "--reps", "50", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn figures_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let one = tmp.path().join("one");
    let o = run(&[
        "figures", "--example", "1", "--n", "100", "--reps", "100", "--seed", "12", "--out",
        one.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut files: Vec<String> = fs::read_dir(&one)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|f| f.ends_with(".csv"))
        .collect();
    files.sort();
    assert_eq!(files, ["figure_example1_intercept.csv", "figure_example1_x1.csv"]);
    for f in &files {
        let text = fs::read_to_string(one.join(f)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "case,lms,lts,s,mm,rewlse");
        assert_eq!(lines.len(), 7);
        for l in &lines[1..] {
            let v: Vec<f64> = l.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
            // MM and REWLSE track each other in every case
            let (mm, rw) = (v[3], v[4]);
            assert!(mm <= 1.5 * rw && rw <= 1.5 * mm, "{f}: {l}");
        }
    }

    let two = tmp.path().join("two");
    let o = run(&["figures", "--example", "2", "--n", "30", "--reps", "3", "--out", two.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let count = fs::read_dir(&two)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".csv"))
        .count();
    assert_eq!(count, 4);
}
