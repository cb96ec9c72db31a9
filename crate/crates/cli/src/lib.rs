//! `kinlv` command-line front end.

pub mod commands;
pub mod config;
pub mod error;
pub mod figures;
pub mod output;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use kinlv_core::RiskMode;

pub use error::CliError;

use config::ConfigFile;
use output::{OutDir, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "kinlv", version, about = "Kinetic deposit-loan Lotka-Volterra simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Integrate the mean (Lotka-Volterra) system.
    Means,
    /// Integrate the coefficient-of-variation system.
    Cv,
    /// Run the agent Monte Carlo simulation.
    Mc,
    /// Solve the Fokker-Planck system.
    Fp,
    /// Produce the figure data, SVGs and shape checks.
    Figures,
    /// Monte Carlo epsilon-refinement sweep against the mean ODE.
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Means => "means",
            Command::Cv => "cv",
            Command::Mc => "mc",
            Command::Fp => "fp",
            Command::Figures => "figures",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct Opts {
    /// JSON config with `params`, `initial` and `run` sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long = "t-end", global = true)]
    pub t_end: Option<f64>,
    #[arg(long, global = true)]
    pub risk: Option<RiskMode>,
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    #[arg(long, global = true)]
    pub agents: Option<usize>,
    #[arg(long, global = true)]
    pub cells: Option<usize>,
    #[arg(long, global = true)]
    pub xmax: Option<f64>,
    /// Figure number, 1 to 4.
    #[arg(long, global = true)]
    pub which: Option<u8>,
    #[arg(long = "sigma-scale", global = true)]
    pub sigma_scale: Option<f64>,
}

impl Opts {
    /// Flags take precedence over the config file.
    pub fn apply(&self, cfg: &mut ConfigFile) {
        let r = &mut cfg.run;
        macro_rules! over {
            ($($flag:ident => $field:ident),*) => { $( if let Some(v) = self.$flag.clone() { r.$field = Some(v); } )* };
        }
        over!(seed => seed, t_end => t_end, risk => risk, eps => eps, agents => agents,
              cells => cells, xmax => x_max, which => which, sigma_scale => sigma_scale);
    }
}

/// Rayon worker count from `KINLV_THREADS`, if set.
pub fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var("KINLV_THREADS") {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Validation(format!("KINLV_THREADS must be a positive integer, got '{s}'"))),
        },
    }
}

fn init_threads() -> Result<(), CliError> {
    if let Some(n) = thread_cap()? {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<RunManifest, CliError> {
    init_threads()?;
    let mut cfg = match &cli.opts.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    cli.opts.apply(&mut cfg);
    let (_, warnings) = cfg.model()?;
    for w in warnings {
        eprintln!("kinlv: warning: {w}");
    }
    let out = OutDir::new(&cli.opts.out);
    match cli.command {
        Command::Means => commands::means(&cfg, out),
        Command::Cv => commands::cv(&cfg, out),
        Command::Mc => commands::mc(&cfg, out),
        Command::Fp => commands::fp(&cfg, out),
        Command::Figures => commands::figures_cmd(&cfg, out),
        Command::Sweep => commands::sweep(&cfg, out),
    }
}

/// Parse `args` (program name first), run, and return the process exit code.
pub fn run_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(m) => {
            println!("{}: wrote {} files to {}", cli.command.name(), m.files.len() + 1, cli.opts.out.display());
            0
        }
        Err(e) => {
            eprintln!("kinlv: error: {e}");
            e.exit_code()
        }
    }
}

pub fn run() -> i32 {
    run_with(std::env::args_os())
}
