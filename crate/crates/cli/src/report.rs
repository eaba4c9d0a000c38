//! Output plumbing shared by all commands: provenance metadata, JSON
//! envelopes, `#`-prefixed CSV headers and the exit-code table.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use gendim::Error;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_INSUFFICIENT_DATA: u8 = 3;
pub const EXIT_ESTIMATION: u8 = 4;
pub const EXIT_PROPERTY: u8 = 5;

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub enum Failure {
    Core(Error),
    /// A property test ran to completion and at least one case failed.
    Property(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Property(_) => EXIT_PROPERTY,
            Failure::Core(e) => match e {
                Error::Config(_) | Error::MissingParameter(_) | Error::Validation(_) | Error::Domain(_) => EXIT_CONFIG,
                Error::Io(_) | Error::Json(_) => EXIT_CONFIG,
                Error::InsufficientData(_) | Error::EmptyResult(_) => EXIT_INSUFFICIENT_DATA,
                Error::EstimationFailure(_)
                | Error::ScalingRangeNotFound { .. }
                | Error::NotUnimodal { .. }
                | Error::IntegrationBlowup { .. }
                | Error::StepTooLarge { .. } => EXIT_ESTIMATION,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Property(msg) => write!(f, "property test failed: {msg}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Core(Error::Json(e))
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Provenance written into every artifact of a run.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    pub input_sha256: Option<String>,
    pub config: Value,
}

impl Provenance {
    pub fn new(command: &str, seed: u64, config: Value, config_bytes: &[u8]) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed,
            config_sha256: sha256_hex(config_bytes),
            input_sha256: None,
            config,
        }
    }

    /// `# key: value` lines for CSV artifacts.
    pub fn csv_header(&self) -> String {
        let mut s = String::new();
        s += &format!("# schema_version: {}\n", self.schema_version);
        s += &format!("# tool: {} {}\n", self.tool, self.version);
        s += &format!("# command: {}\n", self.command);
        s += &format!("# seed: {}\n", self.seed);
        s += &format!("# config_sha256: {}\n", self.config_sha256);
        if let Some(h) = &self.input_sha256 {
            s += &format!("# input_sha256: {h}\n");
        }
        s += &format!("# config: {}\n", self.config);
        s
    }
}

/// Output directory plus the provenance stamped into each file.
pub struct Outputs {
    pub dir: PathBuf,
    pub provenance: Provenance,
}

impl Outputs {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// JSON document `{provenance..., result}`.
    pub fn write_json(&self, name: &str, result: &impl Serialize) -> CmdResult<PathBuf> {
        let mut doc = serde_json::to_value(&self.provenance)?;
        doc["result"] = serde_json::to_value(result)?;
        let path = self.path(name);
        let mut w = create(&path)?;
        serde_json::to_writer_pretty(&mut w, &doc)?;
        writeln!(w)?;
        w.flush()?;
        Ok(path)
    }

    /// CSV file whose body is produced by `body` after the metadata lines.
    pub fn write_csv(
        &self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> gendim::Result<()>,
    ) -> CmdResult<PathBuf> {
        let path = self.path(name);
        let mut w = create(&path)?;
        w.write_all(self.provenance.csv_header().as_bytes())?;
        body(&mut w)?;
        w.flush()?;
        Ok(path)
    }
}

fn create(path: &Path) -> CmdResult<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// One named check with its measured value, target and margin
/// (`tolerance - |value - expected|`, negative when failing).
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub margin: f64,
    pub pass: bool,
}

impl Check {
    pub fn within(name: impl Into<String>, value: f64, expected: f64, tolerance: f64) -> Self {
        let margin = tolerance - (value - expected).abs();
        Self {
            name: name.into(),
            value,
            expected,
            tolerance,
            margin: if margin.is_nan() { f64::NEG_INFINITY } else { margin },
            pass: margin >= 0.0,
        }
    }

    /// `value ≥ bound`.
    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        let margin = value - bound;
        Self {
            name: name.into(),
            value,
            expected: bound,
            tolerance: 0.0,
            margin: if margin.is_nan() { f64::NEG_INFINITY } else { margin },
            pass: margin >= 0.0,
        }
    }

    /// `value ≤ bound`.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        let mut c = Self::at_least(name, -value, -bound);
        c.value = value;
        c.expected = bound;
        c
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Case {
    pub name: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

impl Case {
    pub fn new(name: impl Into<String>, checks: Vec<Check>, details: Value) -> Self {
        Self {
            name: name.into(),
            pass: checks.iter().all(|c| c.pass),
            checks,
            details,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub pass: bool,
    pub cases: Vec<Case>,
}

impl TestReport {
    pub fn new(cases: Vec<Case>) -> Self {
        Self {
            pass: cases.iter().all(|c| c.pass),
            cases,
        }
    }

    pub fn summary(&self) -> String {
        self.cases
            .iter()
            .map(|c| format!("{}: {}", c.name, if c.pass { "PASS" } else { "FAIL" }))
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Property failure when any case failed.
    pub fn into_result(self) -> CmdResult {
        if self.pass {
            Ok(())
        } else {
            let failed: Vec<&str> = self.cases.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
            Err(Failure::Property(failed.join(", ")))
        }
    }
}

pub fn null() -> Value {
    json!(null)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_error_class() {
        assert_eq!(Failure::from(Error::Config("x".into())).exit_code(), EXIT_CONFIG);
        assert_eq!(
            Failure::from(Error::EmptyResult("x".into())).exit_code(),
            EXIT_INSUFFICIENT_DATA
        );
        let no_range = Error::ScalingRangeNotFound {
            best_r2: 0.5,
            threshold: 0.98,
        };
        assert_eq!(Failure::from(no_range).exit_code(), EXIT_ESTIMATION);
        assert_eq!(Failure::Property("p".into()).exit_code(), EXIT_PROPERTY);
    }

    #[test]
    fn check_margins() {
        let c = Check::within("a", 1.05, 1.0, 0.1);
        assert!(c.pass && (c.margin - 0.05).abs() < 1e-12);
        assert!(!Check::within("b", f64::NAN, 1.0, 0.1).pass);
        assert!(Check::at_least("c", 2.0, 1.9).pass);
        let d = Check::at_most("d", 0.1, 0.05);
        assert!(!d.pass && d.value == 0.1 && d.expected == 0.05);
    }

    #[test]
    fn report_fails_when_any_case_fails() {
        let ok = Case::new("ok", vec![Check::at_least("x", 1.0, 0.0)], null());
        let bad = Case::new("bad", vec![Check::at_least("x", -1.0, 0.0)], null());
        assert!(TestReport::new(vec![ok.clone()]).into_result().is_ok());
        assert!(matches!(TestReport::new(vec![ok, bad]).into_result(), Err(Failure::Property(m)) if m == "bad"));
    }

    #[test]
    fn csv_header_lines_are_comments() {
        let p = Provenance::new("dq", 4, json!({"seed": 4}), b"{}");
        assert!(p.csv_header().lines().all(|l| l.starts_with("# ")));
        assert_eq!(p.config_sha256, sha256_hex(b"{}"));
    }
}
