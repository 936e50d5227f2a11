use std::path::{Path, PathBuf};
use std::process::ExitCode;

use calibset::commands::{run, Command, Options, DEFAULT_TUNE_STEPS};
use calibset::criterion::Tolerances;
use calibset::export::Projection;
use calibset::report::{RunReport, Verdict};
use calibset::scene::parse_scene;
use calibset::surfaces::DEFAULT_QUAD_ORDER;
use calibset::{Error, Matrix};
use clap::{Args, Parser, Subcommand};

/// Checks and stress-tests calibrated singular surfaces described in a scene file.
#[derive(Parser, Debug)]
#[command(name = "calibset", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run the per-edge criterion plus calibration and comass checks.
    Check { scene: PathBuf },
    /// Random boundary-fixing deformations; fails if any decreases area.
    Perturb { scene: PathBuf },
    /// Derivative-free search for an area-decreasing deformation.
    Attack { scene: PathBuf },
    /// Comass estimates of every form in the scene.
    Comass { scene: PathBuf },
    /// Drive the worst edge residual toward zero along one builder parameter.
    Tune {
        scene: PathBuf,
        /// `[block.]key[index]`, e.g. `azimuths[2]` or `cone.height`.
        #[arg(long)]
        param: String,
        #[arg(long, allow_negative_numbers = true)]
        lo: f64,
        #[arg(long, allow_negative_numbers = true)]
        hi: f64,
        #[arg(long, default_value_t = DEFAULT_TUNE_STEPS)]
        steps: usize,
    },
    /// Triangulated OBJ mesh; written to --obj or standard output.
    Export {
        scene: PathBuf,
        /// Rows of a 3×n orthographic matrix separated by ';' (default: keep x1..x3).
        #[arg(long)]
        projection: Option<String>,
    },
}

#[derive(Args, Debug)]
struct Shared {
    #[arg(long, global = true)]
    tol_sum: Option<f64>,
    #[arg(long, global = true)]
    tol_cal: Option<f64>,
    /// Gauss–Legendre order per chart.
    #[arg(long, global = true)]
    quad: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the machine-readable report here.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(long, global = true)]
    budget: Option<usize>,
    #[arg(long, global = true)]
    restarts: Option<usize>,
    #[arg(long, global = true)]
    res: Option<usize>,
    #[arg(long, global = true)]
    obj: Option<PathBuf>,
}

fn parse_projection(text: &str) -> Result<Projection, Error> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|row| {
            row.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().map_err(|_| Error::InvalidArgument(format!("bad projection entry '{t}'"))))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let cols = rows.first().map_or(0, Vec::len);
    if rows.len() != 3 || cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Shape("projection needs three rows of equal length".into()));
    }
    Projection::orthographic(Matrix::from_fn(3, cols, |i, j| rows[i][j]))
}

fn failure(command: &str, shared: &Shared, err: Error) -> RunReport {
    let mut report = RunReport::new(
        command,
        String::new(),
        shared.seed.unwrap_or(0),
        shared.quad.unwrap_or(DEFAULT_QUAD_ORDER),
        Tolerances::default(),
    );
    report.verdict = Verdict::from_error(&err);
    report.push("error", err);
    report
}

fn execute(cli: &Cli) -> (RunReport, Option<String>) {
    let shared = &cli.shared;
    let (command, scene_path, projection) = match &cli.command {
        Cmd::Check { scene } => (Command::Check, scene, None),
        Cmd::Perturb { scene } => (Command::Perturb, scene, None),
        Cmd::Attack { scene } => (Command::Attack, scene, None),
        Cmd::Comass { scene } => (Command::Comass, scene, None),
        Cmd::Tune { scene, param, lo, hi, steps } => {
            (Command::Tune { parameter: param.clone(), lo: *lo, hi: *hi, steps: *steps }, scene, None)
        }
        Cmd::Export { scene, projection } => (Command::Export, scene, projection.as_deref()),
    };
    let name = command.name();
    let text = match std::fs::read_to_string(scene_path) {
        Ok(t) => t,
        Err(e) => return (failure(name, shared, Error::from(e)), None),
    };
    let scene = match parse_scene(&text) {
        Ok(s) => s,
        Err(e) => return (failure(name, shared, e), None),
    };
    let projection = match projection.map(parse_projection).transpose() {
        Ok(p) => p,
        Err(e) => return (failure(name, shared, e), None),
    };
    let options = Options {
        tol_sum: shared.tol_sum,
        tol_cal: shared.tol_cal,
        quad: shared.quad,
        seed: shared.seed,
        trials: shared.trials,
        budget: shared.budget,
        restarts: shared.restarts,
        res: shared.res,
        obj: shared.obj.clone(),
        projection,
    };
    let report = run(&command, &scene, &options);
    let mesh = if command == Command::Export && options.obj.is_none() && report.verdict == Verdict::Pass {
        calibset::commands::export_text(&scene, &options).ok()
    } else {
        None
    };
    (report, mesh)
}

fn write_report(path: &Path, report: &RunReport) -> std::io::Result<()> {
    std::fs::write(path, report.to_text())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mut report, mesh) = execute(&cli);
    if let Some(path) = &cli.shared.report {
        if let Err(e) = write_report(path, &report) {
            eprintln!("calibset: cannot write report {}: {e}", path.display());
            report.verdict = Verdict::IoError;
        }
    }
    match mesh {
        Some(obj) => {
            print!("{obj}");
            eprint!("{}", report.summary());
        }
        None => print!("{}", report.summary()),
    }
    ExitCode::from(report.exit_code() as u8)
}
