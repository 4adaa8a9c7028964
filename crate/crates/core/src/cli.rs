//! Command-line front end. [`run`] is the whole program minus process exit,
//! so tests can drive it in-process.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, MethodId, RegressionFit};
use crate::demo;
use crate::error::{Error, Result};
use crate::estimators::{fit, FitOptions};
use crate::sim::{breakdown_probe, efficiency_probe, run_mse, ErrorCase, Example, MseTable, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_FIT: i32 = 3;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "robustreg", version, about = "Robust linear regression and simulation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one estimator to a CSV file and print the fit as JSON.
    Fit(FitArgs),
    /// Monte-Carlo MSE table for one scenario.
    Simulate(SimulateArgs),
    /// Breakdown or efficiency probes.
    Bench(BenchArgs),
    /// Bundled example data with reference fits and plot data.
    Demo(DemoArgs),
    /// MSE by error case for the robust methods, one CSV per coefficient.
    Figures(FiguresArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args, Serialize)]
struct FitArgs {
    #[arg(long)]
    method: String,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    response: String,
    #[arg(long)]
    no_intercept: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// MM final-stage bisquare constant.
    #[arg(long, default_value_t = 4.68)]
    k1: f64,
    /// Mean-shift threshold as a multiple of the start's scale.
    #[arg(long, default_value_t = 2.5)]
    lambda: f64,
    /// REWLSE cutoff.
    #[arg(long, default_value_t = 2.5)]
    eta: f64,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    example: String,
    #[arg(long = "case")]
    error_case: String,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated method ids, or `all` for the eight simulation methods.
    #[arg(long, default_value = "all")]
    methods: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum BenchKind {
    Breakdown,
    Efficiency,
}

#[derive(Debug, Args, Serialize)]
struct BenchArgs {
    #[arg(value_enum)]
    kind: BenchKind,
    /// Method id or `all`.
    #[arg(long, default_value = "all")]
    method: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replicates for the efficiency probe.
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum DemoName {
    Cigarette,
}

#[derive(Debug, Args, Serialize)]
struct DemoArgs {
    #[arg(value_enum)]
    name: DemoName,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct FiguresArgs {
    #[arg(long)]
    example: String,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ReplayArgs {
    manifest: PathBuf,
    /// Write outputs here instead of the recorded directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Record written next to every output directory's files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub wall_time_secs: f64,
    /// Arguments after the program name; replaying them reproduces the outputs.
    pub argv: Vec<String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("bad manifest {}: {e}", path.display())))
    }
}

/// Methods drawn in the figures.
pub const FIGURE_METHODS: [MethodId; 5] = [MethodId::Lms, MethodId::Lts, MethodId::S, MethodId::Mm, MethodId::Rewlse];

/// Runs the program on `argv` (without the program name) and returns the exit code.
pub fn run<S: AsRef<str>>(argv: &[S], stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let argv: Vec<String> = argv.iter().map(|s| s.as_ref().to_string()).collect();
    let cli = match Cli::try_parse_from(std::iter::once("robustreg".to_string()).chain(argv.iter().cloned())) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(&a, stdout),
        Command::Simulate(a) => cmd_simulate(&a, &argv),
        Command::Bench(a) => cmd_bench(&a, &argv),
        Command::Demo(a) => cmd_demo(&a, &argv),
        Command::Figures(a) => cmd_figures(&a, &argv),
        Command::Replay(a) => return cmd_replay(&a, stdout, stderr),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Exit code for an error: 1 usage, 2 data, 3 fit.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::UnknownMethod(_) | Error::InvalidConfig(_) => EXIT_USAGE,
        Error::Io { .. }
        | Error::Csv(_)
        | Error::MissingColumn { .. }
        | Error::NonNumeric { .. }
        | Error::NonFinite { .. }
        | Error::TooFewObservations { .. }
        | Error::DimensionMismatch { .. }
        | Error::Empty => EXIT_DATA,
        _ => EXIT_FIT,
    }
}

/// Fit as printed by `fit`.
#[derive(Debug, Serialize)]
struct FitReport<'a> {
    coefficient_names: Vec<String>,
    #[serde(flatten)]
    fit: &'a RegressionFit,
}

fn cmd_fit(a: &FitArgs, stdout: &mut dyn Write) -> Result<()> {
    let method: MethodId = a.method.parse()?;
    let d = Dataset::from_csv(&a.input, &a.response, !a.no_intercept)?;
    let opts = FitOptions {
        seed: a.seed,
        k1: a.k1,
        lambda: a.lambda,
        eta: a.eta,
        ..FitOptions::default()
    };
    let f = fit(&d, method, &opts)?;
    let report = FitReport {
        coefficient_names: d.coefficient_names(),
        fit: &f,
    };
    let json = serde_json::to_string_pretty(&report).expect("fit serializes");
    writeln!(stdout, "{json}").map_err(|e| io_err("<stdout>", e))
}

fn parse_methods(list: &str, all: &[MethodId]) -> Result<Vec<MethodId>> {
    if list == "all" {
        return Ok(all.to_vec());
    }
    list.split(',').map(|m| m.trim().parse()).collect()
}

fn cmd_simulate(a: &SimulateArgs, argv: &[String]) -> Result<()> {
    let start = Instant::now();
    let example: Example = a.example.parse()?;
    let case: ErrorCase = a.error_case.parse()?;
    let methods = parse_methods(&a.methods, &MethodId::SIMULATION)?;
    let s = Scenario::new(example, case, a.n, a.reps, a.seed)?;
    let table = run_mse(&s, &methods, &FitOptions::default())?;
    create_dir(&a.out)?;
    write_file(&a.out.join("mse.csv"), &table.to_csv_string()?)?;
    write_file(&a.out.join("mse.json"), &table.to_json())?;
    write_manifest(&a.out, "simulate", a, a.seed, start, argv, &["mse.csv", "mse.json"])
}

fn cmd_bench(a: &BenchArgs, argv: &[String]) -> Result<()> {
    let start = Instant::now();
    let methods = parse_methods(&a.method, &MethodId::ALL)?;
    create_dir(&a.out)?;
    let opts = FitOptions::default();
    let mut csv = csv::Writer::from_writer(Vec::new());
    let outputs: &[&str] = match a.kind {
        BenchKind::Breakdown => {
            let n = a.n.unwrap_or(50);
            let mut ladder = csv::Writer::from_writer(Vec::new());
            csv.write_record(["method", "n", "seed", "delta_star", "monotone"])?;
            ladder.write_record(["method", "m", "fraction", "magnitude", "distance", "diverged"])?;
            for m in methods {
                let r = breakdown_probe(m, n, a.seed, &opts)?;
                csv.write_record([
                    m.as_str(),
                    &n.to_string(),
                    &a.seed.to_string(),
                    &r.delta_star_label(),
                    &r.monotone.to_string(),
                ])?;
                for st in &r.steps {
                    for (mag, dist) in crate::sim::LADDER.iter().zip(&st.distances) {
                        ladder.write_record([
                            m.as_str(),
                            &st.m.to_string(),
                            &st.fraction.to_string(),
                            &mag.to_string(),
                            &dist.to_string(),
                            &st.diverged.to_string(),
                        ])?;
                    }
                }
            }
            write_file(&a.out.join("breakdown_ladder.csv"), &finish_csv(ladder))?;
            write_file(&a.out.join("breakdown.csv"), &finish_csv(csv))?;
            &["breakdown.csv", "breakdown_ladder.csv"]
        }
        BenchKind::Efficiency => {
            let n = a.n.unwrap_or(100);
            csv.write_record(["method", "n", "replicates", "seed", "efficiency"])?;
            for m in methods {
                let e = efficiency_probe(m, n, a.reps, a.seed, &opts)?;
                csv.write_record([m.as_str(), &n.to_string(), &a.reps.to_string(), &a.seed.to_string(), &e.to_string()])?;
            }
            write_file(&a.out.join("efficiency.csv"), &finish_csv(csv))?;
            &["efficiency.csv"]
        }
    };
    write_manifest(&a.out, "bench", a, a.seed, start, argv, outputs)
}

/// Fits shown in the cigarette table and plot.
pub const DEMO_METHODS: [MethodId; 3] = [MethodId::Ols, MethodId::Mm, MethodId::Rewlse];

fn cmd_demo(a: &DemoArgs, argv: &[String]) -> Result<()> {
    let start = Instant::now();
    let DemoName::Cigarette = a.name;
    create_dir(&a.out)?;
    let full = demo::cigarette();
    let reduced = full.without_rows(&[demo::USA_ROW])?;
    let opts = FitOptions::with_seed(a.seed);

    let mut table = csv::Writer::from_writer(Vec::new());
    table.write_record(["method", "data", "intercept", "slope", "scale"])?;
    let mut lines = Vec::new();
    for m in DEMO_METHODS {
        for (label, d) in [("complete", &full), ("without_usa", &reduced)] {
            let f = fit(d, m, &opts)?;
            table.write_record([
                m.as_str(),
                label,
                &f.beta()[0].to_string(),
                &f.beta()[1].to_string(),
                &f.scale.to_string(),
            ])?;
            if label == "complete" {
                lines.push((m, f.beta().to_vec()));
            }
        }
    }

    let (lo, hi) = demo::CIGARETTE
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.1), hi.max(r.1)));
    let mut plot = csv::Writer::from_writer(Vec::new());
    plot.write_record(["kind", "label", "x", "y", "x_end", "y_end"])?;
    for (country, x, y) in demo::CIGARETTE {
        plot.write_record(["point", country, &x.to_string(), &y.to_string(), "", ""])?;
    }
    for (m, b) in &lines {
        let at = |x: f64| b[0] + b[1] * x;
        plot.write_record([
            "line",
            m.as_str(),
            &lo.to_string(),
            &at(lo).to_string(),
            &hi.to_string(),
            &at(hi).to_string(),
        ])?;
    }

    write_file(&a.out.join("cigarette.csv"), &demo::cigarette_csv())?;
    write_file(&a.out.join("cigarette_fits.csv"), &finish_csv(table))?;
    write_file(&a.out.join("cigarette_plot.csv"), &finish_csv(plot))?;
    write_manifest(
        &a.out,
        "demo",
        a,
        a.seed,
        start,
        argv,
        &["cigarette.csv", "cigarette_fits.csv", "cigarette_plot.csv"],
    )
}

fn cmd_figures(a: &FiguresArgs, argv: &[String]) -> Result<()> {
    let start = Instant::now();
    let example: Example = a.example.parse()?;
    let tables = ErrorCase::ALL
        .iter()
        .map(|c| {
            let s = Scenario::new(example, *c, a.n, a.reps, a.seed)?;
            run_mse(&s, &FIGURE_METHODS, &FitOptions::default())
        })
        .collect::<Result<Vec<MseTable>>>()?;
    create_dir(&a.out)?;
    let names = crate::sim::coefficient_names(example);
    let mut outputs = Vec::new();
    for (j, coef) in names.iter().enumerate() {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["case".to_string()];
        header.extend(FIGURE_METHODS.iter().map(|m| m.as_str().to_string()));
        w.write_record(&header)?;
        for (c, t) in ErrorCase::ALL.iter().zip(&tables) {
            let mut row = vec![c.as_str().to_string()];
            row.extend(FIGURE_METHODS.iter().map(|m| t.get(*m, j).expect("row present").to_string()));
            w.write_record(&row)?;
        }
        let file = format!("figure_example{}_{coef}.csv", a.example);
        write_file(&a.out.join(&file), &finish_csv(w))?;
        outputs.push(file);
    }
    let refs: Vec<&str> = outputs.iter().map(String::as_str).collect();
    write_manifest(&a.out, "figures", a, a.seed, start, argv, &refs)
}

fn cmd_replay(a: &ReplayArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let manifest = match RunManifest::read(&a.manifest) {
        Ok(m) => m,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return exit_code(&e);
        }
    };
    let mut argv = manifest.argv.clone();
    if argv.first().map(String::as_str) == Some("replay") {
        let _ = writeln!(stderr, "error: refusing to replay a replay");
        return EXIT_USAGE;
    }
    if let Some(out) = &a.out {
        match argv.iter().position(|s| s == "--out") {
            Some(i) if i + 1 < argv.len() => argv[i + 1] = out.display().to_string(),
            _ => {
                let _ = writeln!(stderr, "error: recorded command has no --out");
                return EXIT_USAGE;
            }
        }
    }
    run(&argv, stdout, stderr)
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is UTF-8")
}

fn io_err(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
    Error::Io {
        path: path.into(),
        source,
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn write_manifest<C: Serialize>(
    dir: &Path,
    command: &str,
    config: &C,
    seed: u64,
    start: Instant,
    argv: &[String],
    outputs: &[&str],
) -> Result<()> {
    let m = RunManifest {
        command: command.to_string(),
        config: serde_json::to_value(config).expect("config serializes"),
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        argv: argv.to_vec(),
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
    };
    write_file(
        &dir.join(MANIFEST_FILE),
        &serde_json::to_string_pretty(&m).expect("manifest serializes"),
    )
}
