use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use melod::experiment::{
    compute, preset, preset_sweep, sweep, sweep_csv, ExperimentConfig, Preset, SweepConfig,
};
use melod::metrics::CSV_HEADER;
use melod::par;

#[derive(Parser)]
#[command(name = "melod", version, about = "Multiscale thermoelasticity experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Output directory (defaults to the config's output_dir, then ./out).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Worker threads (defaults to the available parallelism).
    #[arg(short = 'j', long)]
    workers: Option<usize>,
    /// More progress output; repeat for per-step errors.
    #[arg(short, long, action = clap::ArgAction::Count, conflicts_with = "quiet")]
    verbose: u8,
    /// Only errors on stderr.
    #[arg(short, long)]
    quiet: bool,
}

impl Common {
    fn workers(&self) -> usize {
        self.workers.unwrap_or_else(par::default_workers).max(1)
    }

    fn dir(&self, fallback: Option<&Path>) -> PathBuf {
        self.output
            .clone()
            .or_else(|| fallback.map(Path::to_path_buf))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a TOML config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run every [[experiment]] of a TOML file and write one errors.csv.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a built-in experiment family.
    Preset {
        /// test1, test2 or test3.
        name: Preset,
        /// Run the whole family (convergence, patch or contrast sweep).
        #[arg(long)]
        sweep: bool,
        /// Use the finer grids of the original study.
        #[arg(long)]
        paper_scale: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Print a preset as an editable TOML config.
    Config {
        name: Preset,
        #[arg(long)]
        sweep: bool,
        #[arg(long)]
        paper_scale: bool,
    },
}

type CliResult<T> = Result<T, String>;

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn run_one(config: &ExperimentConfig, common: &Common) -> CliResult<()> {
    let start = Instant::now();
    let dir = common.dir(config.output_dir.as_deref());
    if !common.quiet {
        eprintln!(
            "{} k={} on fine level {} / coarse level {}",
            config.method, config.k, config.grid.fine_level, config.grid.coarse_level
        );
    }
    let outcome = compute(config, common.workers()).map_err(|e| e.to_string())?;
    outcome.write_artifacts(&dir).map_err(|e| e.to_string())?;
    if common.verbose >= 2 {
        for s in &outcome.report.series {
            eprintln!("  step {:>3}: E_w {:?}", s.n, s.e_w_energy);
        }
    }
    if !common.quiet {
        eprintln!("wrote {} in {:.1}s", dir.display(), start.elapsed().as_secs_f64());
    }
    println!("{CSV_HEADER}\n{}", outcome.report.csv_row());
    Ok(())
}

fn run_many(configs: &[ExperimentConfig], common: &Common) -> CliResult<bool> {
    let start = Instant::now();
    let dir = common.dir(None);
    if !common.quiet {
        eprintln!("{} experiments on {} workers", configs.len(), common.workers());
    }
    let results = sweep(configs, common.workers());
    let mut ok = true;
    for (i, r) in results.iter().enumerate() {
        match r {
            Err(e) => {
                ok = false;
                eprintln!("experiment {}: {e}", i + 1);
            }
            Ok(r) if common.verbose >= 1 => eprintln!("experiment {}: {}", i + 1, r.csv_row()),
            Ok(_) => {}
        }
    }
    let csv = sweep_csv(&results);
    std::fs::create_dir_all(&dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let path = dir.join("errors.csv");
    std::fs::write(&path, &csv).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    if !common.quiet {
        eprintln!("wrote {} in {:.1}s", path.display(), start.elapsed().as_secs_f64());
    }
    print!("{csv}");
    Ok(ok)
}

fn dispatch(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::Run { config, common } => {
            let cfg = ExperimentConfig::from_toml(&read(&config)?, &config.display().to_string())
                .map_err(|e| e.to_string())?;
            run_one(&cfg, &common).map(|_| true)
        }
        Command::Sweep { config, common } => {
            let cfg = SweepConfig::from_toml(&read(&config)?, &config.display().to_string())
                .map_err(|e| e.to_string())?;
            run_many(&cfg.experiment, &common)
        }
        Command::Preset {
            name,
            sweep,
            paper_scale,
            common,
        } => {
            if sweep {
                run_many(&preset_sweep(name, paper_scale), &common)
            } else {
                run_one(&preset(name, paper_scale), &common).map(|_| true)
            }
        }
        Command::Config {
            name,
            sweep,
            paper_scale,
        } => {
            if sweep {
                let cfg = SweepConfig {
                    experiment: preset_sweep(name, paper_scale),
                };
                print!("{}", cfg.to_toml());
            } else {
                print!("{}", preset(name, paper_scale).to_toml());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
