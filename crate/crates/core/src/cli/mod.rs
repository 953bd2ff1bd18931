//! Command-line front end: run elections from config files, replay the
//! built-in scenarios, benchmark ballot growth, and run the collusion
//! analyzer.
//!
//! Exit codes: 0 success, 2 configuration error, 3 protocol abort, 4 dispute.

mod bench;
mod report;

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::goedel_scheme::SplitMode;
use crate::protocol_sim::{
    brute_force_counts, collusion_experiment, run_election, Arithmetic, ConfigError, ElectionConfig, ElectionOutcome,
    SchemeKind, SimError,
};
use crate::worked_examples;

pub use bench::{bench, bench_table, parse_grid, BenchRow, DEFAULT_GRID};
pub use report::{collusion_table, RunReport, RunStatus};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "goedel-vote", version, about = "Secure-sum approval voting simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the election described by a TOML config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        #[command(flatten)]
        output: Output,
    },
    /// Run a built-in scenario.
    Demo {
        name: DemoName,
        /// Seed for the randomly generated scenario.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Ballot sizes and run times over a grid of (candidates, voters).
    Bench {
        /// Comma-separated `m:n` pairs.
        #[arg(long, value_parser = parse_grid_arg)]
        grid: Option<Grid>,
        /// Timed elections per scheme and grid point; 0 reports sizes only.
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Test whether colluders' views of honest shares depend on the ballot.
    Analyze {
        config: PathBuf,
        /// Number of colluding voters; the last `t` voters collude.
        #[arg(long, short = 't')]
        colluders: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[command(flatten)]
        overrides: Overrides,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DemoName {
    #[value(name = "sunliu-7x3")]
    SunLiu7x3,
    #[value(name = "goedel-7x3")]
    Goedel7x3,
    #[value(name = "goedel-1000x7")]
    Goedel1000x7,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Additive shares over the integers.
    Plain,
    /// Additive shares modulo q.
    Modular,
    /// Exact exponent vectors, factors scattered.
    Exact,
    /// Field residues, factors scattered.
    FieldScatter,
    /// Field residues, uniformly random shares.
    FieldUniform,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Table,
    Records,
}

#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Option<SchemeKind>,
    #[arg(long)]
    pub voters: Option<usize>,
    #[arg(long)]
    pub candidates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
}

#[derive(Debug, Default, Args)]
pub struct Output {
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Write the output here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the message transcript as line-delimited JSON.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
}

fn parse_scheme(s: &str) -> Result<SchemeKind, String> {
    match s {
        "sun-liu" | "sunliu" => Ok(SchemeKind::SunLiu),
        "goedel" | "godel" => Ok(SchemeKind::Goedel),
        _ => Err(format!("unknown scheme {s:?}; expected sun-liu or goedel")),
    }
}

/// A parsed `--grid` value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grid(pub Vec<(usize, usize)>);

fn parse_grid_arg(s: &str) -> Result<Grid, String> {
    parse_grid(s).map(Grid)
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ElectionConfig) {
        if let Some(s) = self.scheme {
            cfg.scheme = s;
        }
        if let Some(n) = self.voters {
            cfg.voters = n;
        }
        if let Some(m) = self.candidates {
            cfg.candidates = m;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        match self.mode {
            None => {}
            Some(Mode::Plain) => cfg.sun_liu.modular = false,
            Some(Mode::Modular) => cfg.sun_liu.modular = true,
            Some(Mode::Exact) => {
                cfg.goedel.arithmetic = Arithmetic::Exact;
                cfg.goedel.split = SplitMode::FactorScatter;
            }
            Some(Mode::FieldScatter) => {
                cfg.goedel.arithmetic = Arithmetic::Field;
                cfg.goedel.split = SplitMode::FactorScatter;
            }
            Some(Mode::FieldUniform) => {
                cfg.goedel.arithmetic = Arithmetic::Field;
                cfg.goedel.split = SplitMode::UniformField;
            }
        }
    }
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: format!("configuration error: {e}"),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => c.into(),
            SimError::Analysis(msg) => CliError {
                code: EXIT_CONFIG,
                message: format!("configuration error: {msg}"),
            },
            other => CliError {
                code: EXIT_INTERNAL,
                message: other.to_string(),
            },
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError {
        code: EXIT_CONFIG,
        message: format!("{}: {e}", path.display()),
    }
}

pub fn load_config(path: &Path) -> Result<ElectionConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    Ok(ElectionConfig::from_toml(&text)?)
}

/// Runs `cfg` and summarizes it. Completed runs are checked against the
/// plaintext ballots.
pub fn run_report(cfg: &ElectionConfig) -> Result<(RunReport, ElectionOutcome), SimError> {
    let start = Instant::now();
    let outcome = run_election(cfg)?;
    let elapsed = start.elapsed().as_micros() as u64;
    let mut report = RunReport::from_outcome(cfg.scheme, cfg.candidates, cfg.voters, &outcome, elapsed);
    if let ElectionOutcome::Completed(run) = &outcome {
        report.oracle_match = Some(brute_force_counts(&run.ballots, cfg.candidates) == run.result.counts);
    }
    Ok((report, outcome))
}

pub fn demo_config(name: DemoName, seed: u64) -> ElectionConfig {
    match name {
        DemoName::SunLiu7x3 => worked_examples::sun_liu_7x3(),
        DemoName::Goedel7x3 => worked_examples::goedel_7x3(),
        DemoName::Goedel1000x7 => worked_examples::goedel_1000x7(seed),
    }
}

fn emit(output: &Output, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &output.out {
        Some(path) => fs::write(path, text).map_err(|e| io_error(path, e)),
        None => stdout.write_all(text.as_bytes()).map_err(|e| CliError {
            code: EXIT_INTERNAL,
            message: e.to_string(),
        }),
    }
}

fn election(cfg: &ElectionConfig, output: &Output, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let (report, outcome) = run_report(cfg)?;
    if let Some(path) = &output.transcript {
        fs::write(path, outcome.transcript().to_jsonl()).map_err(|e| io_error(path, e))?;
    }
    let text = match output.format {
        Format::Table => report.to_table(),
        Format::Records => report.to_record() + "\n",
    };
    emit(output, &text, stdout)?;
    Ok(report.exit_code())
}

pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<i32, CliError> {
    match cli.command {
        Command::Run { config, overrides, output } => {
            let mut cfg = load_config(&config)?;
            overrides.apply(&mut cfg);
            election(&cfg, &output, stdout)
        }
        Command::Demo { name, seed, output } => election(&demo_config(name, seed), &output, stdout),
        Command::Bench { grid, reps, seed, output } => {
            let grid = grid.map_or_else(|| DEFAULT_GRID.to_vec(), |g| g.0);
            let rows = bench(&grid, reps, seed)?;
            let text = match output.format {
                Format::Table => bench_table(&rows),
                Format::Records => rows
                    .iter()
                    .map(|r| serde_json::to_string(r).expect("rows serialize") + "\n")
                    .collect(),
            };
            emit(&output, &text, stdout)?;
            Ok(EXIT_OK)
        }
        Command::Analyze {
            config,
            colluders,
            trials,
            overrides,
            output,
        } => {
            let mut cfg = load_config(&config)?;
            overrides.apply(&mut cfg);
            let n = cfg.voters;
            if colluders >= n {
                return Err(ConfigError::new("colluders", format!("{colluders} colluders leave no honest voter among {n}")).into());
            }
            let set: BTreeSet<usize> = (n - colluders..n).collect();
            let report = collusion_experiment(&cfg, &set, trials)?;
            let text = match output.format {
                Format::Table => collusion_table(&report),
                Format::Records => serde_json::to_string(&report).expect("reports serialize") + "\n",
            };
            emit(&output, &text, stdout)?;
            Ok(EXIT_OK)
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    match execute(cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}
