//! Command-line front end. Exit codes: 0 success, 2 configuration error,
//! 3 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::config::RunConfig;
use super::report::cmd_report;
use super::run::{
    cmd_compare, cmd_fixedpoint, cmd_holder, cmd_simulate, cmd_stieltjes, load_config, RunArtifact,
};
use crate::error::{Result, SpectralError};

#[derive(Debug, Parser)]
#[command(name = "spectralflow", version, about = "Spectral flows of fBm-driven matrix processes")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "SPECTRALFLOW_WORKERS")]
    pub workers: Option<usize>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// JSON run configuration (or a manifest.json from an earlier run).
    #[arg(long)]
    pub config: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (overrides `out` in the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate an ensemble and write spectra, metrics and diagnostics.
    Simulate(ConfigArgs),
    /// Recompute metrics of a run against a law id.
    Compare {
        run_dir: PathBuf,
        #[arg(long)]
        law: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the dependent-ensemble fixed point under both sign conventions.
    Fixedpoint(ConfigArgs),
    /// Closed-form Stieltjes transforms and transport-equation residuals.
    Stieltjes(ConfigArgs),
    /// Hölder quotients of solution paths.
    Holder(ConfigArgs),
    /// SVG plots and a markdown summary of a run directory.
    Report {
        run_dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_config(args: &ConfigArgs) -> Result<(RunConfig, PathBuf)> {
    let text = fs::read_to_string(&args.config).map_err(|e| {
        SpectralError::Config(format!("cannot read {}: {e}", args.config.display()))
    })?;
    let mut config = load_config(&text)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.out.as_ref().map(PathBuf::from))
        .ok_or_else(|| SpectralError::Config("no output directory (use --out)".into()))?;
    Ok((config, out))
}

fn announce(quiet: bool, artifact: &RunArtifact) {
    if quiet {
        return;
    }
    println!("wrote {}", artifact.dir.display());
    for f in &artifact.manifest.files {
        println!("  {} ({} bytes)", f.name, f.bytes);
    }
    for (k, v) in &artifact.manifest.diagnostics {
        println!("  {k} = {v}");
    }
    if let Some(s) = &artifact.manifest.sign_outcome {
        println!("  sign convention: {}", s.chosen.as_str());
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let quiet = cli.quiet;
    let run = |f: fn(&RunConfig, &Path) -> Result<RunArtifact>, args: &ConfigArgs| -> Result<()> {
        let (config, out) = read_config(args)?;
        announce(quiet, &f(&config, &out)?);
        Ok(())
    };
    match &cli.command {
        Command::Simulate(a) => run(cmd_simulate, a),
        Command::Fixedpoint(a) => run(cmd_fixedpoint, a),
        Command::Stieltjes(a) => run(cmd_stieltjes, a),
        Command::Holder(a) => run(cmd_holder, a),
        Command::Compare { run_dir, law, out } => {
            let path = cmd_compare(run_dir, law, out.as_deref())?;
            if !quiet {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Report { run_dir, out } => {
            let files = cmd_report(run_dir, out.as_deref())?;
            if !quiet {
                for f in files {
                    println!("wrote report/{}", f.display());
                }
            }
            Ok(())
        }
    }
}

/// Parse `args`, run the command inside a pool of the requested size and
/// return the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
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
    let mut builder = rayon::ThreadPoolBuilder::new();
    match cli.workers {
        Some(0) => {
            eprintln!("error: config error: --workers must be at least 1");
            return 2;
        }
        Some(n) => builder = builder.num_threads(n),
        None => {}
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return 2;
        }
    };
    match pool.install(|| execute(&cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
