//! Command-line front end for the two-ion vibronic simulator.
//!
//! Exit codes: 0 when every requested computation succeeded, 1 when a
//! computation failed (files for the successful parts are still written),
//! 2 for configuration and usage errors.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use vibronic::protocols::{Correction, Model};

use commands::ProtocolName;
use config::RunConfig;
use output::Sink;

#[derive(Parser, Debug)]
#[command(name = "vibronic", version, about = "Selective vibronic interaction of two trapped ions")]
struct Cli {
    /// JSON run configuration; `-` reads stdin.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the measurement sampler.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for scans and independent runs.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Integrator error budget per unit time.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Write a gnuplot script next to every CSV.
    #[arg(long, global = true)]
    gnuplot: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ModelArg {
    Full,
    Effective,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Full => Model::Full,
            ModelArg::Effective => Model::Effective,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum CorrectionArg {
    None,
    Stark,
}

impl From<CorrectionArg> for Correction {
    fn from(c: CorrectionArg) -> Self {
        match c {
            CorrectionArg::None => Correction::None,
            CorrectionArg::Stark => Correction::StarkCorrected,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sideband Rabi flopping trajectories.
    Rabi {
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
        #[arg(long, value_enum)]
        correction: Option<CorrectionArg>,
    },
    /// State-engineering protocols.
    Protocol {
        #[arg(value_enum)]
        name: ProtocolName,
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
    },
    /// Lamb-Dicke values at which a CM sideband pair is resonant without correction.
    MagicEta {
        /// Comma-separated target levels.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        n: Option<Vec<usize>>,
        /// Check uncorrected full dynamics at each root.
        #[arg(long)]
        check_dynamics: bool,
    },
    /// Grid scan over η, η_r, δ, N, N_r.
    Scan,
}

impl Command {
    fn name(&self) -> String {
        match self {
            Command::Rabi { .. } => "rabi".into(),
            Command::Protocol { name, .. } => {
                format!("protocol {}", name.to_possible_value().expect("named").get_name())
            }
            Command::MagicEta { .. } => "magic-eta".into(),
            Command::Scan => "scan".into(),
        }
    }
}

fn resolve(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => config::load(path)?,
        None => RunConfig::default(),
    };
    cfg.command = Some(cli.command.name());
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }
    if let Some(tol) = cli.tol {
        cfg.tol = tol;
    }
    cfg.gnuplot |= cli.gnuplot;
    match &cli.command {
        Command::Rabi { eta, delta, omega, samples, duration, model, correction } => {
            let r = &mut cfg.rabi;
            if let Some(v) = eta {
                r.eta = *v;
            }
            if delta.is_some() {
                r.delta = *delta;
            }
            if let Some(v) = omega {
                r.omega = *v;
            }
            if let Some(v) = samples {
                r.samples = *v;
            }
            if duration.is_some() {
                r.duration = *duration;
            }
            if let Some(m) = model {
                r.model = (*m).into();
            }
            if let Some(c) = correction {
                r.correction = (*c).into();
            }
        }
        Command::Protocol { name, model: Some(m) } => {
            let drive = match name {
                ProtocolName::Fock => &mut cfg.fock.drive,
                ProtocolName::Bell => &mut cfg.bell.drive,
                ProtocolName::Transfer => &mut cfg.transfer.drive,
            };
            drive.model = (*m).into();
        }
        Command::MagicEta { n, check_dynamics } => {
            if let Some(n) = n {
                cfg.magic_eta.n = n.clone();
            }
            cfg.magic_eta.check_dynamics |= check_dynamics;
        }
        _ => {}
    }
    // pin the worker count so the echo records it
    cfg.workers = Some(cfg.workers());
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli, cfg: &RunConfig) -> anyhow::Result<bool> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let mut sink = Sink::new(&dir, cfg)?;
    let result = match &cli.command {
        Command::Rabi { .. } => commands::rabi(cfg, &mut sink),
        Command::Protocol { name, .. } => commands::protocol(cfg, *name, &mut sink),
        Command::MagicEta { .. } => commands::magic_eta(cfg, &mut sink),
        Command::Scan => commands::scan(cfg, &mut sink),
    };
    for path in &sink.written {
        println!("{}", path.display());
    }
    result
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match resolve(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match run(&cli, &cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: some computations failed; see the output files");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
