//! The `gatekeep` command line front end.
//!
//! Exit status: 0 on success, 1 for unreadable or malformed input, 2 when a
//! spec or graph breaks a structural constraint.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Deserialize;
use thiserror::Error;

use crate::bretz::{BretzError, HypothesisGraph};
use crate::engine::{Engine, EngineError, TestReport};
use crate::graph::{GraphSpec, SpecError};
use crate::mcsim::{self, SimConfig, SimError, SimResult};

#[derive(Debug, Parser)]
#[command(name = "gatekeep", version, about = "Family-based graphical gatekeeping with overall FWER control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a strategy spec and list every violated constraint.
    Validate {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Test all families and write the report.
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        pvalues: PathBuf,
        /// Write the JSON report here; the decision table then goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the family graph in Graphviz DOT.
    Dot {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Estimate the overall FWER by Monte Carlo.
    Simulate {
        /// One simulation config or a JSON array of them.
        #[arg(long)]
        config: PathBuf,
        /// Seed for every config; overrides any seed in the file.
        #[arg(long)]
        seed: u64,
        /// Also write one CSV row per result.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Replace each config's truth with every possible truth assignment.
        #[arg(long)]
        all_truth_masks: bool,
    },
    /// Run a hypothesis-level graph for cross-checking.
    Oracle {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        pvalues: PathBuf,
    },
}

#[derive(Debug, Error)]
pub enum PValueError {
    #[error("expected header `hypothesis,p`, found `{0}`")]
    Header(String),
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: p-value {value} for {label} is outside [0, 1]")]
    OutOfRange { line: u64, label: String, value: f64 },
    #[error("line {line}: duplicate hypothesis {label}")]
    Duplicate { line: u64, label: String },
}

/// Parses a two-column `hypothesis,p` CSV with header.
pub fn parse_pvalues(text: &str) -> Result<BTreeMap<String, f64>, PValueError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| PValueError::Malformed { line: 1, message: e.to_string() })?
        .clone();
    if header.len() != 2 || &header[0] != "hypothesis" || &header[1] != "p" {
        return Err(PValueError::Header(header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut out = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| PValueError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 || record[0].is_empty() {
            return Err(PValueError::Malformed { line, message: "expected `label,p`".into() });
        }
        let label = record[0].to_string();
        let value: f64 = record[1].parse().map_err(|_| PValueError::Malformed {
            line,
            message: format!("`{}` is not a number", &record[1]),
        })?;
        if !(0.0..=1.0).contains(&value) {
            return Err(PValueError::OutOfRange { line, label, value });
        }
        if out.insert(label.clone(), value).is_some() {
            return Err(PValueError::Duplicate { line, label });
        }
    }
    Ok(out)
}

/// Failure of a command, split by exit status.
#[derive(Debug)]
enum Failure {
    Input(String),
    Constraint(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Input(_) => 1,
            Failure::Constraint(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Constraint(m) => m,
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::InvalidSpec(_) => Failure::Constraint(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Engine(inner) => inner.into(),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<BretzError> for Failure {
    fn from(e: BretzError) -> Self {
        match e {
            BretzError::Invalid(_) => Failure::Constraint(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))
}

fn load_spec(path: &Path) -> Result<GraphSpec, Failure> {
    GraphSpec::from_json(&read(path)?).map_err(|e| match e {
        SpecError::Json(e) => Failure::Input(format!("{}: {e}", path.display())),
        other => Failure::Constraint(other.to_string()),
    })
}

fn load_pvalues(path: &Path) -> Result<BTreeMap<String, f64>, Failure> {
    parse_pvalues(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// Output of one command: text for stdout and for stderr.
#[derive(Debug, Default)]
struct Output {
    stdout: String,
    stderr: String,
}

/// Human-readable decision table, four decimals.
pub fn decision_table(report: &TestReport, engine: &Engine) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<8} {:<12} {:>10} {:>10}  decision", "family", "hypothesis", "level", "e*");
    for outcome in &report.outcomes {
        let (_, fam) = engine.spec().family(&outcome.family).expect("report matches spec");
        for label in &fam.hypotheses {
            let _ = writeln!(
                out,
                "{:<8} {:<12} {:>10.4} {:>10.4}  {}",
                outcome.family, label, outcome.level, outcome.e_star, report.decisions[label]
            );
        }
    }
    out
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ConfigFile {
    Many(Vec<SimConfig>),
    One(Box<SimConfig>),
}

fn simulate(
    config: &Path,
    seed: u64,
    csv_path: Option<&Path>,
    all_masks: bool,
) -> Result<Output, Failure> {
    let text = read(config)?;
    let (configs, single) = match serde_json::from_str::<ConfigFile>(&text) {
        Ok(ConfigFile::Many(v)) => (v, false),
        Ok(ConfigFile::One(c)) => (vec![*c], true),
        Err(e) => return Err(Failure::Input(format!("{}: {e}", config.display()))),
    };
    let mut expanded = Vec::new();
    for mut c in configs {
        c.seed = seed;
        if all_masks {
            for truth in mcsim::all_truth_assignments(&c.spec) {
                expanded.push(SimConfig { truth, ..c.clone() });
            }
        } else {
            expanded.push(c);
        }
    }
    let mut rows: Vec<(String, SimResult)> = Vec::new();
    for (c, result) in expanded.iter().zip(mcsim::sweep(&expanded)) {
        rows.push((c.truth_mask(), result?));
    }
    if let Some(path) = csv_path {
        let mut buf = Vec::new();
        mcsim::write_sweep_csv(&mut buf, &rows)?;
        write(path, &String::from_utf8(buf).expect("CSV is UTF-8"))?;
    }
    let results: Vec<&SimResult> = rows.iter().map(|(_, r)| r).collect();
    let json = if single && results.len() == 1 {
        serde_json::to_string_pretty(results[0])
    } else {
        serde_json::to_string_pretty(&results)
    }
    .expect("results serialise");
    Ok(Output { stdout: json + "\n", stderr: String::new() })
}

fn execute(command: Command) -> Result<Output, Failure> {
    match command {
        Command::Validate { spec } => {
            let spec = GraphSpec::from_json(&read(&spec)?).map_err(|e| Failure::Input(e.to_string()))?;
            let outcome = spec.validate();
            if outcome.is_ok() {
                Ok(Output { stdout: "ok\n".into(), stderr: String::new() })
            } else {
                Err(Failure::Constraint(outcome.to_string()))
            }
        }
        Command::Run { spec, pvalues, out } => {
            let spec = load_spec(&spec)?;
            let engine = Engine::new(&spec)?;
            let pvalues = load_pvalues(&pvalues)?;
            let report = engine.run(&pvalues)?;
            let json = report.to_json() + "\n";
            let table = decision_table(&report, &engine);
            match out {
                Some(path) => {
                    write(&path, &json)?;
                    Ok(Output { stdout: table, stderr: String::new() })
                }
                None => Ok(Output { stdout: json, stderr: table }),
            }
        }
        Command::Dot { spec } => {
            let spec = load_spec(&spec)?;
            let dot = spec.to_dot().map_err(|e| Failure::Constraint(e.to_string()))?;
            Ok(Output { stdout: dot, stderr: String::new() })
        }
        Command::Simulate { config, seed, csv, all_truth_masks } => {
            simulate(&config, seed, csv.as_deref(), all_truth_masks)
        }
        Command::Oracle { graph, pvalues } => {
            let graph = HypothesisGraph::from_json(&read(&graph)?)?;
            let pvalues = load_pvalues(&pvalues)?;
            let rejected = graph.run(&pvalues)?;
            let decisions: BTreeMap<&str, &str> = graph
                .hypotheses
                .iter()
                .map(|h| (h.as_str(), if rejected.contains(h) { "S" } else { "NS" }))
                .collect();
            let json = serde_json::json!({ "decisions": decisions });
            Ok(Output {
                stdout: serde_json::to_string_pretty(&json).expect("serialises") + "\n",
                stderr: String::new(),
            })
        }
    }
}

/// Parses `args` (program name first), runs the command, prints its output
/// and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(out) => {
            print!("{}", out.stdout);
            eprint!("{}", out.stderr);
            0
        }
        Err(failure) => {
            eprintln!("error: {}", failure.message().trim_end());
            failure.code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_table_csv() {
        let text = "hypothesis,p\nH11,0.005\nH12,0.011\nH13,0.018\nH21,0.009\nH22,0.026\n\
                    H23,0.013\nH31,0.010\nH32,0.006\nH33,0.051\n";
        let map = parse_pvalues(text).unwrap();
        assert_eq!(map, crate::catalog::diabetes_pvalues());
    }

    #[test]
    fn header_only_is_empty() {
        assert!(parse_pvalues("hypothesis,p\n").unwrap().is_empty());
    }

    #[test]
    fn bad_rows_are_named() {
        let err = parse_pvalues("hypothesis,p\nH1,0.2\nH2,1.2\n").unwrap_err();
        assert!(matches!(&err, PValueError::OutOfRange { line: 3, label, .. } if label == "H2"));
        assert!(err.to_string().contains("line 3"));
        let err = parse_pvalues("hypothesis,p\nH1,0.2\nH1,0.3\n").unwrap_err();
        assert!(matches!(err, PValueError::Duplicate { line: 3, .. }));
        assert!(matches!(parse_pvalues("label,p\n"), Err(PValueError::Header(_))));
        assert!(matches!(parse_pvalues("hypothesis,p\nH1,abc\n"), Err(PValueError::Malformed { line: 2, .. })));
        assert!(matches!(parse_pvalues("hypothesis,p\nH1,0.1,3\n"), Err(PValueError::Malformed { .. })));
    }

    #[test]
    fn table_has_four_decimals() {
        let spec = crate::catalog::diabetes_co_secondary();
        let engine = Engine::new(&spec).unwrap();
        let report = engine.run(&crate::catalog::diabetes_pvalues()).unwrap();
        let table = decision_table(&report, &engine);
        assert!(table.contains("F2       H22              0.0250     0.0250  NS"), "{table}");
        assert_eq!(table.lines().count(), 10);
    }
}
