use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use mmwave_sparse::channel::{ChannelParams, PowerProfile};
use mmwave_sparse::feedback::AngleCodebook;
use mmwave_sparse::harness::config::{ArraySpec, SectorSpec};
use mmwave_sparse::harness::named::{run_beampattern, BeamPatternSpec, EXPERIMENTS};
use mmwave_sparse::harness::output::Manifest;
use mmwave_sparse::harness::sweep::train_codebook;
use mmwave_sparse::harness::{run_experiment, run_named_experiment, ExperimentConfig, NamedOutput};
use mmwave_sparse::{Error, Result};

#[derive(Parser)]
#[command(name = "mmwave-sparse", version, about = "Sparse hybrid precoding simulations for mmWave MIMO")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// RNG seed (overrides the config file's seed)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo trials (overrides the experiment default)
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in experiment: fig2, fig3, fig4, fig5, fig6 or beampattern
    Run { name: String },
    /// Run an experiment from a TOML config or a previous run's manifest JSON
    RunConfig { path: PathBuf },
    /// Baseband codebook utilities
    Codebook {
        #[command(subcommand)]
        action: CodebookAction,
    },
    /// Beam patterns of the optimal, hybrid and steering precoders
    Beampattern(BeamArgs),
}

#[derive(Subcommand)]
enum CodebookAction {
    /// Train a Grassmannian baseband codebook with Lloyd iterations
    Train(TrainArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 3)]
    bits_per_angle: u32,
    #[arg(long, default_value_t = 4)]
    bb_bits: u32,
    #[arg(long, default_value_t = 1)]
    ns: usize,
    #[arg(long, default_value_t = 4)]
    n_rf: usize,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Side length of the square transmit array
    #[arg(long, default_value_t = 8)]
    tx_side: usize,
    /// Side length of the square receive array
    #[arg(long, default_value_t = 4)]
    rx_side: usize,
    #[arg(long, default_value_t = 8)]
    clusters: usize,
    #[arg(long, default_value_t = 10)]
    rays: usize,
    #[arg(long, default_value_t = 7.5)]
    spread_deg: f64,
    /// Output file name inside --out
    #[arg(long, default_value = "bb_codebook.json")]
    file: String,
}

#[derive(Args)]
struct BeamArgs {
    #[arg(long, default_value_t = 16)]
    tx_side: usize,
    #[arg(long, default_value_t = 8)]
    rx_side: usize,
    #[arg(long, default_value_t = 8)]
    clusters: usize,
    #[arg(long, default_value_t = 10)]
    rays: usize,
    #[arg(long, default_value_t = 4)]
    n_rf: usize,
    /// Grid step in degrees
    #[arg(long, default_value_t = 1.0)]
    step_deg: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let c = &cli.common;
    if c.threads == Some(0) {
        return Err(Error::InvalidArgument("--threads must be at least 1".into()));
    }
    match cli.command {
        Command::Run { name } => {
            if !EXPERIMENTS.contains(&name.as_str()) {
                return Err(Error::Unknown { kind: "experiment", name });
            }
            let seed = c.seed.unwrap_or(1);
            match run_named_experiment(&name, seed, c.trials, &c.out, c.threads)? {
                NamedOutput::Sweeps(outs) => {
                    for o in outs {
                        report(&o.csv);
                        report(&o.manifest);
                    }
                }
                NamedOutput::Patterns(paths) => paths.iter().for_each(|p| report(p)),
            }
        }
        Command::RunConfig { path } => {
            let mut cfg = load_any(&path)?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            if let Some(t) = c.trials {
                cfg.trials = t;
            }
            cfg.validate()?;
            let o = run_experiment(&cfg, &c.out, c.threads)?;
            report(&o.csv);
            report(&o.manifest);
        }
        Command::Codebook { action: CodebookAction::Train(a) } => {
            let seed = c.seed.unwrap_or(1);
            let tx = ArraySpec::square(a.tx_side).with_sector(SectorSpec::default_tx()).geometry()?;
            let rx = ArraySpec::square(a.rx_side).geometry()?;
            let sector = tx.sector.expect("sector was set");
            let params = ChannelParams {
                n_clusters: a.clusters,
                n_rays: a.rays,
                angle_spread: a.spread_deg.to_radians(),
                power_profile: PowerProfile::Equal,
                tx,
                rx,
            };
            params.validate()?;
            if a.ns == 0 || a.ns > a.n_rf {
                return Err(Error::InvalidArgument(format!(
                    "ns = {} must satisfy 1 <= ns <= n_rf = {}",
                    a.ns, a.n_rf
                )));
            }
            let angles = AngleCodebook::new(a.bits_per_angle, a.bits_per_angle, sector)?;
            run_pool(c.threads, || -> Result<()> {
                let cb = train_codebook(&params, &angles, a.n_rf, a.ns, a.bb_bits, a.samples, seed, 0)?;
                std::fs::create_dir_all(&c.out)?;
                let path = c.out.join(&a.file);
                std::fs::write(&path, cb.to_json(Some(sector))?)?;
                report(&path);
                Ok(())
            })??;
        }
        Command::Beampattern(a) => {
            let spec = BeamPatternSpec {
                seed: c.seed.unwrap_or(1),
                tx_side: a.tx_side,
                rx_side: a.rx_side,
                n_clusters: a.clusters,
                n_rays: a.rays,
                n_rf: a.n_rf,
                step_deg: a.step_deg,
            };
            run_beampattern(&spec, &c.out)?.iter().for_each(|p| report(p));
        }
    }
    Ok(())
}

/// Accepts either a TOML experiment config or a run manifest.
fn load_any(path: &Path) -> Result<ExperimentConfig> {
    if path.extension().is_some_and(|e| e == "json") {
        Ok(Manifest::load(path)?.config)
    } else {
        ExperimentConfig::load(path)
    }
}

fn run_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

fn report(p: &Path) {
    info!("wrote {}", p.display());
    println!("{}", p.display());
}
