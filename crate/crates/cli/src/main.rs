use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fedval::data::{load_csv, write_csv, DatasetSchema, SyntheticSpec};
use fedval::harness::{preset, preset_names, run_experiment, run_sweep, ExperimentConfig, SweepFile};
use fedval::metrics::summarize;
use fedval::{Dataset, Error, Params};

#[derive(Parser)]
#[command(name = "fedval", version, about = "Federated learning simulator with validation-weighted aggregation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    Run {
        config: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Override the number of rounds.
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Run a cooperative-ratio sweep.
    Sweep {
        spec: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Override the base config's number of rounds.
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// List or print the built-in presets.
    Preset {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Generate a synthetic dataset as CSV plus a matching schema file.
    GenData { spec: PathBuf, out: PathBuf },
    /// Print accuracy, SPD and EOD of a saved model on a CSV dataset.
    Eval {
        model: PathBuf,
        data: PathBuf,
        schema: PathBuf,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Show { name: String },
}

/// Config problems exit with 2, everything else with 3.
enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

/// Errors while reading an input file are reported as config errors.
fn input<T>(r: fedval::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Config(e.to_string()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn warn(cfg: &ExperimentConfig) {
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run {
            config,
            seed,
            out_dir,
            rounds,
        } => {
            let mut cfg = input(ExperimentConfig::from_file(&config))?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(rounds) = rounds {
                cfg.rounds = rounds;
            }
            if out_dir.is_some() {
                cfg.out_dir = out_dir;
            }
            if cfg.out_dir.is_none() {
                return Err(Failure::Config("no output directory: set out_dir or pass --out-dir".into()));
            }
            cfg.validate()?;
            warn(&cfg);
            let outcome = run_experiment(&cfg)?;
            let dir = cfg.out_dir.as_deref().unwrap_or(Path::new("."));
            if let Some(m) = outcome.last().global {
                println!(
                    "rounds={} accuracy={:.6} spd={:.6} eod={:.6}",
                    cfg.rounds, m.accuracy, m.spd, m.eod
                );
            }
            println!("artifacts written to {}", dir.display());
        }
        Command::Sweep { spec, out_dir, rounds } => {
            let (spec, mut base) = input(SweepFile::from_file(&spec))?;
            if let Some(rounds) = rounds {
                base.rounds = rounds;
            }
            base.out_dir = None;
            base.validate()?;
            warn(&base);
            let summary = run_sweep(&spec, &base, out_dir.as_deref())?;
            let mut stdout = std::io::stdout().lock();
            summary
                .write_summary_csv(&mut stdout)
                .map_err(|e| Failure::Runtime(e.to_string()))?;
            let failed = summary.cells.iter().filter(|c| c.result.is_err()).count();
            if failed > 0 {
                eprintln!("{failed} of {} runs failed; see cells.csv", summary.cells.len());
            }
        }
        Command::Preset { action } => match action {
            PresetAction::List => {
                for name in preset_names() {
                    println!("{name}");
                }
            }
            PresetAction::Show { name } => {
                println!("{}", preset(&name)?.to_json_pretty()?);
            }
        },
        Command::GenData { spec, out } => {
            let spec: SyntheticSpec = read_json(&spec)?;
            let data: Dataset = spec.generate()?;
            let file = std::fs::File::create(&out)
                .map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
            write_csv(&data, std::io::BufWriter::new(file))?;
            let schema_path = out.with_extension("schema.json");
            let schema = serde_json::to_string_pretty(&DatasetSchema::synthetic(spec.dim))
                .map_err(|e| Failure::Runtime(e.to_string()))?;
            std::fs::write(&schema_path, schema + "\n")
                .map_err(|e| Failure::Runtime(format!("{}: {e}", schema_path.display())))?;
            println!("wrote {} rows to {} and schema to {}", data.len(), out.display(), schema_path.display());
        }
        Command::Eval { model, data, schema } => {
            let params: Params = read_json(&model)?;
            let schema: DatasetSchema = read_json(&schema)?;
            let data: Dataset = input(load_csv(&data, &schema))?;
            params.ensure_dim(data.dim()).map_err(|e| Failure::Config(e.to_string()))?;
            let m = summarize(&params, &data)?;
            println!("accuracy={:.6} spd={:.6} eod={:.6}", m.accuracy, m.spd, m.eod);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
