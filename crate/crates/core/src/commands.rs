//! Command dispatch behind the `calibset` binary.

use std::path::PathBuf;
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::criterion::{check_configuration, CriterionReport, Severity, Tolerances};
use crate::deform::{adversarial_search, random_trials, Diffeo};
use crate::export::{export_obj, Projection};
use crate::exterior::{comass_2form_r4_oracle, comass_estimate, ConstantForm};
use crate::report::{fmt_f64, RunReport, Verdict};
use crate::scene::{Block, Scene};
use crate::surfaces::DEFAULT_QUAD_ORDER;
use crate::tune::tune;
use crate::{Error, Result};

pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_BUDGET: usize = 2000;
pub const DEFAULT_RESOLUTION: usize = 32;
pub const DEFAULT_TUNE_STEPS: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Check,
    Perturb,
    Attack,
    Comass,
    Tune { parameter: String, lo: f64, hi: f64, steps: usize },
    Export,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Perturb => "perturb",
            Command::Attack => "attack",
            Command::Comass => "comass",
            Command::Tune { .. } => "tune",
            Command::Export => "export",
        }
    }
}

/// Command-line overrides; `None` falls back to the scene settings, then to
/// the library defaults.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Options {
    pub tol_sum: Option<f64>,
    pub tol_cal: Option<f64>,
    pub quad: Option<usize>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub budget: Option<usize>,
    pub restarts: Option<usize>,
    pub res: Option<usize>,
    pub obj: Option<PathBuf>,
    pub projection: Option<Projection>,
}

impl Options {
    pub fn tolerances(&self, scene: &Scene) -> Tolerances {
        let mut t = scene.settings.tolerances();
        if let Some(x) = self.tol_sum {
            t.tol_sum = x;
        }
        if let Some(x) = self.tol_cal {
            t.tol_cal = x;
        }
        if let Some(x) = self.seed {
            t.seed = x;
        }
        if let Some(x) = self.restarts {
            t.comass_restarts = x;
        }
        t
    }

    pub fn quad_order(&self, scene: &Scene) -> usize {
        self.quad.or(scene.settings.quad).unwrap_or(DEFAULT_QUAD_ORDER)
    }
}

/// Runs one command. Failures become verdicts, so the exit status is
/// always `report.exit_code()`.
pub fn run(command: &Command, scene: &Scene, options: &Options) -> RunReport {
    let start = Instant::now();
    let tolerances = options.tolerances(scene);
    let mut report = RunReport::new(
        command.name(),
        scene.digest(),
        tolerances.seed,
        options.quad_order(scene),
        tolerances,
    );
    if let Err(err) = dispatch(command, scene, options, &mut report) {
        report.verdict = Verdict::from_error(&err);
        report.push("error", err);
    }
    report.wall_time = Some(start.elapsed());
    report
}

fn dispatch(command: &Command, scene: &Scene, options: &Options, report: &mut RunReport) -> Result<()> {
    match command {
        Command::Check => check(scene, report),
        Command::Perturb => perturb(scene, options, report),
        Command::Attack => attack(scene, options, report),
        Command::Comass => comass(scene, report),
        Command::Tune { parameter, lo, hi, steps } => {
            let result = tune(scene, parameter, *lo, *hi, *steps, &report.tolerances)?;
            report.push("tune.parameter", &result.parameter);
            report.push("tune.lo", fmt_f64(*lo));
            report.push("tune.hi", fmt_f64(*hi));
            report.push("tune.steps", steps);
            for (k, (x, r)) in result.grid.iter().enumerate() {
                report.push(format!("tune.grid.{k}"), format!("{} {}", fmt_f64(*x), fmt_f64(*r)));
            }
            report.push("tune.evaluations", result.evaluations);
            report.push_f64("tune.value", result.value);
            report.push_f64("tune.residual", result.residual);
            if !(result.residual <= report.tolerances.tol_sum) {
                report.verdict = Verdict::CriterionFail;
            }
            Ok(())
        }
        Command::Export => {
            let obj = export_text(scene, options)?;
            report.push("export.resolution", options.res.unwrap_or(DEFAULT_RESOLUTION));
            report.push("export.vertices", obj.lines().filter(|l| l.starts_with("v ")).count());
            report.push("export.triangles", obj.lines().filter(|l| l.starts_with("f ")).count());
            report.push("export.sha256", hex::encode(Sha256::digest(obj.as_bytes())));
            if let Some(path) = &options.obj {
                std::fs::write(path, &obj)?;
                report.push("export.path", path.display());
            }
            Ok(())
        }
    }
}

/// OBJ text for the scene at the requested resolution and projection.
pub fn export_text(scene: &Scene, options: &Options) -> Result<String> {
    let config = scene.build()?;
    let projection = options.projection.clone().unwrap_or(Projection::DropTrailing);
    export_obj(&config, options.res.unwrap_or(DEFAULT_RESOLUTION), &projection)
}

fn check(scene: &Scene, report: &mut RunReport) -> Result<()> {
    let config = scene.build()?;
    let result = check_configuration(&config, &report.tolerances)?;
    push_criterion(report, &result);
    report.verdict = if result.has_errors() {
        Verdict::ValidationError
    } else if result.pass {
        Verdict::Pass
    } else {
        Verdict::CriterionFail
    };
    Ok(())
}

fn signs(s: &[i8]) -> String {
    s.iter().map(|x| if *x > 0 { "+" } else { "-" }).collect::<Vec<_>>().join(" ")
}

fn push_criterion(report: &mut RunReport, result: &CriterionReport) {
    for (i, f) in result.findings.iter().enumerate() {
        let severity = match f.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        report.push(format!("finding.{i}"), format!("{severity}: {}", f.message));
    }
    report.push("comass_status", CriterionReport::COMASS_STATUS);
    for face in &result.faces {
        let key = format!("face.{}", face.name);
        report.push_f64(format!("{key}.calibration_residual"), face.calibration_residual);
        report.push_f64(format!("{key}.comass_estimate"), face.comass_estimate);
        report.push(format!("{key}.pass"), face.pass);
    }
    for edge in &result.edges {
        let key = format!("edge.{}", edge.name);
        report.push(format!("{key}.faces"), edge.faces.join(" "));
        report.push(format!("{key}.induced_signs"), signs(&edge.induced_signs));
        report.push(format!("{key}.feasible"), edge.feasible.len());
        report.push_f64(format!("{key}.residual"), edge.residual);
        if let Some(w) = &edge.witness {
            report.push(format!("{key}.witness"), signs(w));
        }
        report.push(format!("{key}.status"), edge.status.label());
    }
    let meaning = if result.pass {
        "hypotheses of the calibration criterion hold up to tolerance (comass is a sampled lower bound)"
    } else {
        "criterion fails; for polyhedral configurations this is evidence of non-minimality"
    };
    report.push("meaning", meaning);
}

fn describe(phi: &Diffeo) -> String {
    let bumps: Vec<String> = phi
        .bumps()
        .iter()
        .map(|b| {
            let c: Vec<String> = b.center.iter().map(|x| fmt_f64(*x)).collect();
            let d: Vec<String> = b.direction.iter().map(|x| fmt_f64(*x)).collect();
            format!(
                "center=({}) radius={} direction=({}) amplitude={}",
                c.join(","),
                fmt_f64(b.radius),
                d.join(","),
                fmt_f64(b.amplitude)
            )
        })
        .collect();
    bumps.join("; ")
}

fn perturb(scene: &Scene, options: &Options, report: &mut RunReport) -> Result<()> {
    let config = scene.build()?;
    let trials = options.trials.unwrap_or(DEFAULT_TRIALS);
    let result = random_trials(&config, trials, report.seed, report.quad_order)?;
    report.push("perturb.trials", trials);
    report.push_f64("perturb.identity_error", result.identity_error);
    report.push_f64("perturb.noise_floor", result.noise_floor);
    for o in &result.outcomes {
        report.push(format!("perturb.trial.{}.bumps", o.index), o.diffeo.bumps().len());
        report.push_f64(format!("perturb.trial.{}.delta", o.index), o.delta);
    }
    report.push_f64("perturb.min_delta", result.min_delta);
    report.push_f64("perturb.mean_delta", result.mean_delta);
    if let Some(worst) = result.outcomes.get(result.argmin) {
        report.push("perturb.argmin", result.argmin);
        report.push("perturb.argmin.diffeo", describe(&worst.diffeo));
    }
    report.push("perturb.violations", result.violations());
    if !result.pass() {
        report.verdict = Verdict::MinimalityViolation;
    }
    Ok(())
}

fn attack(scene: &Scene, options: &Options, report: &mut RunReport) -> Result<()> {
    let config = scene.build()?;
    let budget = options.budget.unwrap_or(DEFAULT_BUDGET);
    let result = adversarial_search(&config, budget, report.seed, report.quad_order)?;
    report.push("attack.budget", budget);
    report.push("attack.starts", result.starts);
    report.push("attack.evaluations", result.evaluations);
    report.push_f64("attack.noise_floor", result.noise_floor);
    report.push_f64("attack.delta", result.delta);
    report.push_f64("attack.verified_delta", result.verified_delta);
    report.push("attack.best", describe(&result.best));
    report.push("attack.found_decrease", result.found_decrease());
    if result.found_decrease() {
        report.verdict = Verdict::MinimalityViolation;
    } else {
        report.push("meaning", "no decrease found; a failed search is not a proof of minimality");
    }
    Ok(())
}

fn comass(scene: &Scene, report: &mut RunReport) -> Result<()> {
    let config = scene.build()?;
    let mut forms: Vec<(String, ConstantForm)> =
        config.faces().iter().map(|f| (format!("face.{}", f.name), f.calibration.clone())).collect();
    for block in &scene.blocks {
        if let Block::Form(fb) = block {
            forms.push((format!("form.{}", fb.name), fb.form.clone()));
        }
    }
    if forms.is_empty() {
        return Err(Error::InvalidArgument("scene has no forms".into()));
    }
    let t = report.tolerances.clone();
    let mut pass = true;
    for (key, form) in &forms {
        let estimate = comass_estimate(form, t.comass_restarts, t.seed)?;
        report.push_f64(format!("{key}.comass"), estimate.value);
        report.push(format!("{key}.restart"), estimate.restart);
        if form.dim() == 4 && form.degree() == 2 {
            report.push_f64(format!("{key}.oracle"), comass_2form_r4_oracle(form)?);
        }
        pass &= estimate.value <= 1.0 + t.tol_comass;
    }
    report.push("comass_status", CriterionReport::COMASS_STATUS);
    if !pass {
        report.verdict = Verdict::CriterionFail;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::parse_scene;

    #[test]
    fn check_verdicts() {
        let sigma = parse_scene("[generate kind=kaehler_sigma n=3]\n").unwrap();
        let report = run(&Command::Check, &sigma, &Options::default());
        assert_eq!(report.exit_code(), 0, "{}", report.summary());
        assert_eq!(report.result("edge.E.status"), Some("pass"));

        let book = parse_scene("[generate kind=book]\nsectors = 100 130 130\n").unwrap();
        let report = run(&Command::Check, &book, &Options::default());
        assert_eq!(report.exit_code(), 4, "{}", report.summary());
    }

    #[test]
    fn comass_of_kaehler_faces() {
        let sigma = parse_scene("[generate kind=kaehler_sigma n=2]\n").unwrap();
        let options = Options { restarts: Some(8), ..Options::default() };
        let report = run(&Command::Comass, &sigma, &options);
        assert_eq!(report.exit_code(), 0, "{}", report.summary());
        let value: f64 = report.result("face.D1.comass").unwrap().parse().unwrap();
        assert!((value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn export_records_mesh_digest() {
        let sigma = parse_scene("[generate kind=kaehler_sigma n=3]\n").unwrap();
        let options = Options { res: Some(4), ..Options::default() };
        let a = run(&Command::Export, &sigma, &options);
        let b = run(&Command::Export, &sigma, &options);
        assert_eq!(a.exit_code(), 0);
        assert_eq!(a.result("export.vertices"), Some("48"));
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn errors_map_to_verdicts() {
        let sigma = parse_scene("[generate kind=kaehler_sigma n=3]\n").unwrap();
        let command = Command::Tune { parameter: "height".into(), lo: 0.0, hi: 1.0, steps: 4 };
        let report = run(&command, &sigma, &Options::default());
        assert_eq!(report.verdict, Verdict::ValidationError);
        assert!(report.result("error").is_some());
    }
}
