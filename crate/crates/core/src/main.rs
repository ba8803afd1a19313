use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use toml::{Table, Value};
use xtalfree::sim::trace::events;
use xtalfree::sim::{presets, read_trace, run_scenario, summarize, write_trace, RunSummary, ScenarioConfig};
use xtalfree::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_NO_LOCK: u8 = 3;

#[derive(Parser)]
#[command(
    name = "xtalfree",
    version,
    about = "Crystal-free 802.15.4 clock calibration simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario, write its trace as CSV and print the summary.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Trace destination; defaults to the scenario's output_path, then trace.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        duration: Option<f64>,
        /// Also write the summary to this file.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Run a scenario once per value of one parameter, in parallel.
    Sweep {
        scenario: PathBuf,
        /// Dotted field path, e.g. calibrator.window_ppm or receiver.loss_prob.
        #[arg(long)]
        param: String,
        #[arg(long, num_args = 1.., required = true)]
        values: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        duration: Option<f64>,
        /// Directory for the per-value traces.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Recompute the summary of a trace file.
    Summarize {
        trace: PathBuf,
        #[arg(long, default_value = events::SWEEP_FINISH)]
        lock_event: String,
        #[arg(long, default_value_t = 400.0)]
        window_ppm: f64,
    },
    /// Print a built-in scenario as a scenario file.
    Preset {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(presets::NAMES))]
        name: String,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::SweepFailure { .. } => EXIT_NO_LOCK,
            Error::Io(_) => 1,
            _ => EXIT_CONFIG,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = Result<u8, Failure>;

fn load(path: &Path, seed: Option<u64>, duration: Option<f64>) -> Result<ScenarioConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let tree: Table = text
        .parse()
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    configure(tree, seed, duration)
}

fn configure(tree: Table, seed: Option<u64>, duration: Option<f64>) -> Result<ScenarioConfig, Failure> {
    let mut cfg: ScenarioConfig = tree
        .try_into()
        .map_err(|e: toml::de::Error| Failure::config(e.to_string()))?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(d) = duration {
        cfg.duration_s = d;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn save_trace(path: &Path, trace: &[xtalfree::sim::TraceRecord]) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
    })?;
    write_trace(BufWriter::new(file), trace)?;
    Ok(())
}

fn render(summary: &RunSummary) -> Result<String, Failure> {
    Ok(summary.to_toml_string()?)
}

fn run(
    scenario: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
    duration: Option<f64>,
    summary_path: Option<PathBuf>,
) -> Outcome {
    let cfg = load(scenario, seed, duration)?;
    let out = out
        .or_else(|| cfg.output_path.clone())
        .unwrap_or_else(|| PathBuf::from("trace.csv"));
    let result = match run_scenario(&cfg) {
        Ok(result) => result,
        Err(failure) => {
            save_trace(&out, &failure.trace)?;
            return Err(failure.error.into());
        }
    };
    save_trace(&out, &result.trace)?;
    let text = render(&result.summary)?;
    print!("{text}");
    if let Some(path) = summary_path {
        std::fs::write(&path, &text).map_err(|e| Failure {
            code: 1,
            message: format!("{}: {e}", path.display()),
        })?;
    }
    if cfg.calibrator.enabled && result.summary.never_locked {
        eprintln!("warning: no lock within {} s", cfg.duration_s);
        return Ok(EXIT_NO_LOCK);
    }
    Ok(0)
}

/// Parses a command-line value as a TOML literal, falling back to a bare string.
fn literal(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_path(tree: &mut Table, path: &str, value: Value) -> Result<(), Failure> {
    let mut keys: Vec<&str> = path.split('.').collect();
    let last = keys
        .pop()
        .filter(|k| !k.is_empty())
        .ok_or_else(|| Failure::config("empty --param"))?;
    let mut node = tree;
    for key in keys {
        node = node
            .entry(key)
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or_else(|| Failure::config(format!("{path}: {key} is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

fn file_safe(value: &str) -> String {
    value
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-.+".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn sweep(
    scenario: &Path,
    param: &str,
    values: &[String],
    seed: Option<u64>,
    duration: Option<f64>,
    out_dir: &Path,
) -> Outcome {
    let text =
        std::fs::read_to_string(scenario).map_err(|e| Failure::config(format!("{}: {e}", scenario.display())))?;
    let base: Table = text
        .parse()
        .map_err(|e| Failure::config(format!("{}: {e}", scenario.display())))?;
    // every value must give a valid scenario before anything runs
    let configs = values
        .iter()
        .map(|raw| {
            let mut tree = base.clone();
            set_path(&mut tree, param, literal(raw))?;
            configure(tree, seed, duration).map_err(|f| Failure::config(format!("{param} = {raw}: {}", f.message)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Failure {
        code: 1,
        message: format!("{}: {e}", out_dir.display()),
    })?;
    let stem = scenario.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");

    let results: Vec<Result<Table, Failure>> = configs
        .par_iter()
        .zip(values)
        .map(|(cfg, raw)| {
            let path = out_dir.join(format!("{stem}_{}_{}.csv", file_safe(param), file_safe(raw)));
            let mut row = Table::new();
            row.insert("value".into(), literal(raw));
            row.insert("trace".into(), Value::String(path.display().to_string()));
            match run_scenario(cfg) {
                Ok(result) => {
                    save_trace(&path, &result.trace)?;
                    let locked = !(cfg.calibrator.enabled && result.summary.never_locked);
                    row.insert(
                        "status".into(),
                        Value::String(if locked { "ok" } else { "never_locked" }.into()),
                    );
                    let summary = Value::try_from(&result.summary).map_err(|e| Failure::config(e.to_string()))?;
                    row.insert("summary".into(), summary);
                }
                Err(failure) => {
                    save_trace(&path, &failure.trace)?;
                    let status = match failure.error {
                        Error::SweepFailure { .. } => "sweep_failure".to_string(),
                        e => return Err(e.into()),
                    };
                    row.insert("status".into(), Value::String(status));
                }
            }
            Ok(row)
        })
        .collect();

    let mut rows = Vec::new();
    let mut all_locked = true;
    for r in results {
        let row = r?;
        all_locked &= row.get("status").and_then(Value::as_str) == Some("ok");
        rows.push(Value::Table(row));
    }
    let mut doc = Table::new();
    doc.insert("param".into(), Value::String(param.to_string()));
    doc.insert("runs".into(), Value::Array(rows));
    print!("{}", toml::to_string(&doc).map_err(|e| Failure::config(e.to_string()))?);
    Ok(if all_locked { 0 } else { EXIT_NO_LOCK })
}

fn summarize_file(path: &Path, lock_event: &str, window_ppm: f64) -> Outcome {
    let file = File::open(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let trace = read_trace(file)?;
    let summary = summarize(&trace, lock_event, window_ppm)?;
    print!("{}", render(&summary)?);
    Ok(if summary.never_locked { EXIT_NO_LOCK } else { 0 })
}

fn preset(name: &str) -> Outcome {
    let cfg = presets::by_name(name).ok_or_else(|| Failure::config(format!("unknown preset {name}")))?;
    print!("{}", cfg.to_toml_string()?);
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            scenario,
            seed,
            out,
            duration,
            summary,
        } => run(&scenario, seed, out, duration, summary),
        Command::Sweep {
            scenario,
            param,
            values,
            seed,
            duration,
            out_dir,
        } => sweep(&scenario, &param, &values, seed, duration, &out_dir),
        Command::Summarize {
            trace,
            lock_event,
            window_ppm,
        } => summarize_file(&trace, &lock_event, window_ppm),
        Command::Preset { name } => preset(&name),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
