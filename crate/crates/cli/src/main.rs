use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

mod commands;
mod params;

use params::*;

const TOOL: &str = "schatten-lab";
const THREADS_ENV: &str = "SCHATTEN_LAB_THREADS";

#[derive(Parser)]
#[command(name = TOOL, version, about = "Entropy-number experiments for Schatten-class balls")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Master seed for every random stream (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; falls back to SCHATTEN_LAB_THREADS, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON run config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Report path; without it the report goes to stdout and the summary to stderr.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the three-regime rate formula.
    Rate(RateParams),
    /// Monte Carlo volume roots of Schatten balls.
    Volume(VolumeParams),
    /// Measures of metric balls in the Grassmann manifold.
    Grassmann(GrassmannParams),
    /// Build a product net and write it to disk.
    NetBuild(NetParams),
    /// Probe a product net with fresh samples.
    NetAudit(NetParams),
    /// Lower and upper entropy bounds against the rate formula.
    Sandwich(SandwichParams),
    /// Low-rank recovery error against the information lower bound.
    Recovery(RecoveryParams),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Rate(_) => "rate",
            Command::Volume(_) => "volume",
            Command::Grassmann(_) => "grassmann",
            Command::NetBuild(_) => "net-build",
            Command::NetAudit(_) => "net-audit",
            Command::Sandwich(_) => "sandwich",
            Command::Recovery(_) => "recovery",
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    Invalid(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Numeric(m) => m,
        }
    }
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    command: Option<String>,
    seed: Option<u64>,
    threads: Option<usize>,
    out: Option<PathBuf>,
    format: Option<Format>,
    #[serde(default)]
    params: Map<String, Value>,
}

struct Run {
    command: &'static str,
    seed: u64,
    out: Option<PathBuf>,
    format: Format,
}

fn load_config(path: &Path) -> Result<ConfigFile, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn set_threads(n: Option<usize>) -> Result<(), Failure> {
    let n = match n {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse().map_err(|_| Failure::Invalid(format!("{THREADS_ENV}={v} is not a thread count")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Failure::Invalid("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Numeric(e.to_string()))?;
    }
    Ok(())
}

/// Write through a temporary file so a reader never sees half a report.
fn write_atomic(path: &Path, body: &str) -> Result<(), Failure> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::Numeric(format!("{}: {e}", dir.display())))?;
    }
    fs::write(&tmp, body).map_err(|e| Failure::Numeric(format!("{}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| Failure::Numeric(format!("{}: {e}", path.display())))
}

fn envelope(run: &Run, status: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("tool".into(), json!(TOOL));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("command".into(), json!(run.command));
    m.insert("status".into(), json!(status));
    m.insert("seed".into(), json!(run.seed));
    m
}

fn execute(run: &Run, command: &Command, params: Map<String, Value>) -> Result<commands::Outcome, Failure> {
    match command {
        Command::Rate(f) => commands::rate(f, params),
        Command::Volume(f) => commands::volume(f, params, run.seed),
        Command::Grassmann(f) => commands::grassmann(f, params, run.seed),
        Command::NetBuild(f) => commands::net_build(f, params, run.seed),
        Command::NetAudit(f) => commands::net_audit(f, params, run.seed),
        Command::Sandwich(f) => commands::sandwich(f, params, run.seed),
        Command::Recovery(f) => commands::recovery(f, params, run.seed),
    }
}

fn deliver(run: &Run, body: &str, summary: &str) -> Result<(), Failure> {
    match &run.out {
        Some(path) => {
            write_atomic(path, body)?;
            println!("{summary}");
        }
        None => {
            print!("{body}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn report(run: &Run, outcome: commands::Outcome, wall: f64) -> Result<(), Failure> {
    let body = match run.format {
        Format::Csv => outcome.csv,
        Format::Json => {
            let mut m = envelope(run, "ok");
            m.insert("config".into(), json!({ "seed": run.seed, "format": run.format, "params": outcome.params }));
            m.insert("wall_clock_seconds".into(), json!(wall));
            m.insert("provenance".into(), outcome.provenance);
            for (k, v) in outcome.results {
                if !m.contains_key(&k) {
                    m.insert(k, v);
                }
            }
            let text = if run.out.is_some() { serde_json::to_string_pretty(&m) } else { serde_json::to_string(&m) };
            text.map_err(|e| Failure::Numeric(e.to_string()))? + "\n"
        }
    };
    deliver(run, &body, &outcome.summary)
}

fn fail(run: &Run, failure: &Failure) {
    let mut m = envelope(run, "failed");
    m.insert("exit_code".into(), json!(failure.code()));
    m.insert("error".into(), json!(failure.message()));
    let body = serde_json::to_string(&m).unwrap_or_default() + "\n";
    let summary = format!("{TOOL} {}: failed (exit {}): {}", run.command, failure.code(), failure.message());
    eprintln!("error: {}", failure.message());
    if deliver(run, &body, &summary).is_err() {
        print!("{body}");
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut run = Run { command: cli.command.name(), seed: 0, out: cli.common.out.clone(), format: cli.common.format.unwrap_or(Format::Json) };
    let file = match cli.common.config.as_deref().map(load_config).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => {
            fail(&run, &e);
            return ExitCode::from(e.code());
        }
    };
    run.seed = cli.common.seed.or(file.seed).unwrap_or(0);
    run.out = run.out.or(file.out);
    run.format = cli.common.format.or(file.format).unwrap_or(Format::Json);
    let start = Instant::now();
    let result = (|| {
        if let Some(c) = &file.command {
            if c != run.command {
                return Err(Failure::Invalid(format!("config is for '{c}', not '{}'", run.command)));
            }
        }
        set_threads(cli.common.threads.or(file.threads))?;
        let outcome = execute(&run, &cli.command, file.params)?;
        report(&run, outcome, start.elapsed().as_secs_f64())
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            fail(&run, &e);
            ExitCode::from(e.code())
        }
    }
}
