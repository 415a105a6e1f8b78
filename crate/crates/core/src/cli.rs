//! `grosslab validate` and `grosslab run`.

use std::io::Write;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{load_config, render_config};
use crate::error::{Error, Result};
use crate::experiments::{Experiment, ExperimentReport, RunOptions};
use crate::fock::binomial;
use crate::model::{build_grid, ModelConfig};
use crate::qspace::QSpace;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "grosslab", version, about = "Lattice Fock-space checks for the renormalized polaron Hamiltonian")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a config and echo the model.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run experiments and write JSON and CSV reports.
    Run(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated experiment names; all when omitted.
    #[arg(long, value_delimiter = ',')]
    exp: Vec<String>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long = "s-list", value_delimiter = ',')]
    s_list: Vec<f64>,
    #[arg(long = "t-list", value_delimiter = ',')]
    t_list: Vec<f64>,
    /// Resolvent shift as `RE,IM`.
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    z: Vec<f64>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Build the model and print its size without solving anything.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config_path: String,
    pub experiments: Vec<String>,
    pub out_dir: String,
    pub timestamp: u64,
    pub tool_version: String,
}

fn init_threads() {
    let threads = std::env::var("GROSSLAB_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()).unwrap_or(0);
    // Fails harmlessly when a pool already exists (repeated calls in one process).
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
}

/// Predicted `(L^d, Fock dimension, total)` for a config.
pub fn predicted_dimension(config: &ModelConfig) -> Result<(usize, usize, usize)> {
    let grid = build_grid(config)?;
    let modes = grid.mask(config.lambda_ref()).iter().filter(|&&m| m).count();
    let fock = binomial(modes + config.nmax, config.nmax);
    let sites = config.site_count();
    Ok((sites, fock, sites * fock))
}

fn selection(names: &[String]) -> Result<Vec<Experiment>> {
    if names.is_empty() {
        return Ok(Experiment::ALL.to_vec());
    }
    let mut out = Vec::new();
    for n in names {
        let e: Experiment = n.trim().parse()?;
        if !out.contains(&e) {
            out.push(e);
        }
    }
    Ok(out)
}

fn options(args: &RunArgs) -> Result<RunOptions> {
    let mut o = RunOptions::default();
    if !args.s_list.is_empty() {
        o.s_list = args.s_list.clone();
    }
    if !args.t_list.is_empty() {
        o.t_list = args.t_list.clone();
    }
    match args.z.as_slice() {
        [] => {}
        [re, im] => o.z = (*re, *im),
        _ => return Err(Error::InvalidArgument("--z expects RE,IM".into())),
    }
    Ok(o)
}

fn validate(config: &PathBuf, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(config)?;
    let (sites, fock, total) = predicted_dimension(&cfg)?;
    let _ = write!(out, "{}", render_config(&cfg));
    let _ = writeln!(out, "# sites = {sites}, fock = {fock}, dimension = {total}");
    Ok(())
}

fn report_line(r: &ExperimentReport) -> String {
    let failed = r.failures().count();
    format!(
        "{}: {} ({} records, {} failed)",
        r.name,
        if r.verdict { "PASS" } else { "FAIL" },
        r.records.len(),
        failed
    )
}

fn run_experiments(args: &RunArgs, out: &mut dyn Write) -> std::result::Result<bool, (i32, Error)> {
    let config_err = |e: Error| (EXIT_CONFIG, e);
    let mut config = load_config(&args.config).map_err(config_err)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let exps = selection(&args.exp).map_err(config_err)?;
    let opts = options(args).map_err(config_err)?;
    if args.dry_run {
        let (sites, fock, total) = predicted_dimension(&config).map_err(config_err)?;
        QSpace::from_config(&config).map_err(config_err)?;
        let _ = writeln!(out, "sites = {sites}\nfock = {fock}\ndimension = {total}");
        let _ = writeln!(out, "experiments = {}", exps.iter().map(|e| e.name()).collect::<Vec<_>>().join(","));
        return Ok(true);
    }
    std::fs::create_dir_all(&args.out).map_err(|e| (EXIT_CONFIG, e.into()))?;
    let manifest = RunManifest {
        config_path: args.config.display().to_string(),
        experiments: exps.iter().map(|e| e.name().to_string()).collect(),
        out_dir: args.out.display().to_string(),
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| (EXIT_FAILED, e.into()))?;
    std::fs::write(args.out.join("manifest.json"), text + "\n").map_err(|e| (EXIT_CONFIG, e.into()))?;

    let mut all_pass = true;
    for e in exps {
        match e.run(&config, &opts) {
            Ok(report) => {
                report.write(&args.out).map_err(|e| (EXIT_FAILED, e))?;
                let _ = writeln!(out, "{}", report_line(&report));
                all_pass &= report.verdict;
            }
            Err(err) => {
                eprintln!("grosslab: {}: {err}", e.name());
                all_pass = false;
            }
        }
    }
    Ok(all_pass)
}

/// Entry point; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    init_threads();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Validate { config } => match validate(&config, &mut out) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                eprintln!("grosslab: {e}");
                EXIT_CONFIG
            }
        },
        Command::Run(args) => match run_experiments(&args, &mut out) {
            Ok(true) => EXIT_OK,
            Ok(false) => EXIT_FAILED,
            Err((code, e)) => {
                eprintln!("grosslab: {e}");
                code
            }
        },
    }
}
