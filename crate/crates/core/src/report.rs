//! Run reports: a flat `key = value` text form for files and a readable
//! summary for terminals.

use std::fmt::Write as _;
use std::time::Duration;

use crate::criterion::Tolerances;

/// Overall outcome of a command. The process exit status is a function of
/// the verdict alone.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    IoError,
    ParseError,
    ValidationError,
    /// The criterion, a comass bound or a tuning target failed.
    CriterionFail,
    /// A deformation decreased area below the noise floor.
    MinimalityViolation,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::IoError => 1,
            Verdict::ParseError => 2,
            Verdict::ValidationError => 3,
            Verdict::CriterionFail => 4,
            Verdict::MinimalityViolation => 5,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::IoError => "io-error",
            Verdict::ParseError => "parse-error",
            Verdict::ValidationError => "validation-error",
            Verdict::CriterionFail => "criterion-fail",
            Verdict::MinimalityViolation => "minimality-violation",
        }
    }

    pub fn from_error(err: &crate::Error) -> Self {
        match err {
            crate::Error::Io(_) => Verdict::IoError,
            crate::Error::Parse { .. } => Verdict::ParseError,
            _ => Verdict::ValidationError,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub command: String,
    /// Hex SHA-256 of the canonical scene text; empty when no scene was parsed.
    pub scene_digest: String,
    pub seed: u64,
    pub quad_order: usize,
    pub tolerances: Tolerances,
    /// Ordered `(key, value)` pairs; keys are dotted paths.
    pub results: Vec<(String, String)>,
    pub verdict: Verdict,
    /// Shown in the summary only, so report files stay byte-identical.
    pub wall_time: Option<Duration>,
}

impl RunReport {
    pub fn new(command: &str, scene_digest: String, seed: u64, quad_order: usize, tolerances: Tolerances) -> Self {
        Self {
            command: command.to_string(),
            scene_digest,
            seed,
            quad_order,
            tolerances,
            results: Vec::new(),
            verdict: Verdict::Pass,
            wall_time: None,
        }
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.results.push((key.into(), value.to_string()));
    }

    pub fn push_f64(&mut self, key: impl Into<String>, value: f64) {
        self.results.push((key.into(), fmt_f64(value)));
    }

    pub fn result(&self, key: &str) -> Option<&str> {
        self.results.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn exit_code(&self) -> i32 {
        self.verdict.exit_code()
    }

    /// Machine-readable form, one value per line.
    pub fn to_text(&self) -> String {
        let t = &self.tolerances;
        let mut out = String::new();
        let _ = writeln!(out, "command = {}", self.command);
        let _ = writeln!(out, "scene.digest = {}", self.scene_digest);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "quad_order = {}", self.quad_order);
        let _ = writeln!(out, "tolerances.tol_sum = {}", fmt_f64(t.tol_sum));
        let _ = writeln!(out, "tolerances.tol_cal = {}", fmt_f64(t.tol_cal));
        let _ = writeln!(out, "tolerances.tol_comass = {}", fmt_f64(t.tol_comass));
        let _ = writeln!(out, "tolerances.edge_samples = {}", t.edge_samples);
        let _ = writeln!(out, "tolerances.calibration_samples = {}", t.calibration_samples);
        let _ = writeln!(out, "tolerances.comass_restarts = {}", t.comass_restarts);
        let _ = writeln!(out, "tolerances.validation_tol = {}", fmt_f64(t.validation_tol));
        for (k, v) in &self.results {
            let _ = writeln!(out, "results.{k} = {v}");
        }
        let _ = writeln!(out, "verdict = {}", self.verdict.label());
        let _ = writeln!(out, "exit_code = {}", self.exit_code());
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} (seed {}, quad order {})", self.command, self.seed, self.quad_order);
        let width = self.results.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in &self.results {
            let _ = writeln!(out, "  {k:<width$}  {v}");
        }
        let _ = write!(out, "verdict: {} (exit {})", self.verdict.label(), self.exit_code());
        if let Some(t) = self.wall_time {
            let _ = write!(out, " in {:.2} s", t.as_secs_f64());
        }
        out.push('\n');
        out
    }
}

/// Shortest round-tripping decimal form; `inf`, `-inf` and `nan` for
/// non-finite values.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}
