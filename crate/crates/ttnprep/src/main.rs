use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ttnprep::commands;
use ttnprep::config::{Mode, Policy, RunConfig};
use ttnprep::{CliError, Result};

#[derive(Parser)]
#[command(
    name = "ttnprep",
    version,
    about = "Compile multivariate normal distributions into state-preparation circuits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Canonical correlations and required bonds per cut.
    Analyze(Opts),
    /// Cross-interpolate the coefficient network.
    Build(Opts),
    /// Reconnection sweeps on built networks.
    Optimize(Opts),
    /// Synthesize circuits and cost reports.
    Compile(Opts),
    /// Simulate and check the ledger against the simulation.
    Verify(Opts),
    /// Averaged metrics over the seed batch.
    Bench(Opts),
    /// Structure recovery rate on random trees.
    StructureTrial(Opts),
}

#[derive(Args)]
struct Opts {
    /// JSON run manifest; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    chi: Option<usize>,
    #[arg(long)]
    chi_prime: Option<usize>,
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, value_enum)]
    policy: Option<Policy>,
    /// Comma-separated seeds, or `start..end`.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Worker threads for the seed batch.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || CliError::Config(format!("cannot parse seeds {s:?}"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        return Ok((a..b).collect());
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
}

impl Opts {
    fn config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident => $g:ident),*) => { $(if let Some(v) = self.$f { c.$g = v; })* };
        }
        set!(dim => dim, n => n, m => m, a => a, chi => chi, chi_prime => chi_prime, sweeps => tci_sweeps,
             mode => mode, policy => policy, epsilon => epsilon);
        if let Some(s) = &self.seeds {
            c.seeds = parse_seeds(s)?;
        }
        if let Some(o) = &self.out {
            c.output_dir = o.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

fn run(cli: Cli) -> Result<()> {
    let (opts, f): (&Opts, fn(&RunConfig, usize) -> Result<()>) = match &cli.command {
        Command::Analyze(o) => (o, |c, j| commands::analyze(c, j).map(drop)),
        Command::Build(o) => (o, |c, j| commands::build(c, j).map(drop)),
        Command::Optimize(o) => (o, |c, j| commands::optimize(c, j).map(drop)),
        Command::Compile(o) => (o, |c, j| commands::compile(c, j).map(drop)),
        Command::Verify(o) => (o, |c, j| commands::verify(c, j).map(drop)),
        Command::Bench(o) => (o, |c, j| commands::bench(c, j).map(drop)),
        Command::StructureTrial(o) => (o, |c, j| commands::structure_trial_cmd(c, j).map(drop)),
    };
    let cfg = opts.config()?;
    commands::write_manifest(&cfg, &cfg.output_dir)?;
    f(&cfg, opts.jobs)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ttnprep: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
