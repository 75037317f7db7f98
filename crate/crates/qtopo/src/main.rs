//! Command-line driver: runs the inference pipeline and the verification
//! suites from a JSON configuration and exports reports.
//!
//! Exit codes: 0 when every check in the invoked suite passed, 1 when a
//! check failed or a computation broke down, 2 for unusable configurations
//! or I/O problems.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qtopo::pipeline::{
    export_artifacts, run_appendix_suite, run_hypergraph_demo, run_inference_pipeline,
    run_nerve_demo, run_registration_scan, ExperimentConfig, PipelineReport, NERVE_COVER_RADIUS,
    SPHERE_RANKS,
};
use qtopo::Error;

/// Threshold exponent of the literal nerve rule; must stay below 1/8.
const NERVE_DEFAULT_M: f64 = 0.1;

#[derive(Parser)]
#[command(
    name = "qtopo",
    version,
    about = "Reconstructs the homology of the sphere from simulated quantum measurement statistics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration file; built-in desk defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the quantization levels, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    k: Vec<usize>,
    /// Override the random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Enforce the conservative inequalities and the literal threshold rule.
    #[arg(long, global = true)]
    strict: bool,
    /// Directory for exported artifacts (must exist).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Infer the homology of the sphere from registration statistics.
    Pipeline,
    /// Convergence scans of quantum registration statistics.
    ScanRegistration,
    /// Schatten-norm scans of the piecewise symbol calculus.
    Appendix,
    /// Classical versus quantum nerve of a four-cap cover.
    Nerve,
    /// Exact-rational registration on finite hypergraphs.
    Hypergraph,
    /// Re-export artifacts from a stored pipeline report.
    Export {
        /// Path to a report.json produced by the pipeline subcommand.
        report: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    if !cli.k.is_empty() {
        config.k = cli.k.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if cli.strict {
        config.strict_constants = true;
    }
    if let Some(out) = &cli.out {
        config.output_dir = Some(out.clone());
    }
    Ok(config)
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), Error> {
    if !dir.is_dir() {
        return Err(Error::config(format!(
            "output directory {} does not exist",
            dir.display()
        )));
    }
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(&path, text)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<bool, Error> {
    match &cli.command {
        Command::Pipeline => {
            let config = load_config(cli)?;
            let report = run_inference_pipeline(&config)?;
            print!("{}", report.render_text());
            if let Some(dir) = &config.output_dir {
                for path in export_artifacts(&report, dir)? {
                    eprintln!("wrote {}", path.display());
                }
            }
            Ok(report.all_match())
        }
        Command::ScanRegistration => {
            let config = load_config(cli)?;
            config.validate()?;
            let scan = run_registration_scan(&config)?;
            print!("{}", scan.render_text());
            if let Some(dir) = &config.output_dir {
                write_json(dir, "registration_scan.json", &scan)?;
            }
            Ok(scan.all_pass())
        }
        Command::Appendix => {
            let config = load_config(cli)?;
            config.validate()?;
            let suite = run_appendix_suite(&config)?;
            print!("{}", suite.render_text());
            if let Some(dir) = &config.output_dir {
                write_json(dir, "appendix.json", &suite)?;
            }
            Ok(suite.all_pass())
        }
        Command::Nerve => {
            let config = load_config(cli)?;
            config.validate()?;
            let k = config.k.iter().copied().max().expect("validated nonempty");
            let report = run_nerve_demo(k, NERVE_DEFAULT_M, NERVE_COVER_RADIUS)?;
            print!("{}", report.render_text());
            if let Some(dir) = &config.output_dir {
                write_json(dir, "nerve.json", &report)?;
            }
            Ok(report.classical_betti == SPHERE_RANKS.to_vec()
                && report.literal_matches
                && report.calibrated_matches)
        }
        Command::Hypergraph => {
            let report = run_hypergraph_demo()?;
            print!("{}", report.render_text());
            if let Some(out) = &cli.out {
                write_json(out, "hypergraph.json", &report)?;
            }
            Ok(report.two_set.2 == "1/4" && report.walk_differs)
        }
        Command::Export { report } => {
            let text = std::fs::read_to_string(report).map_err(|e| {
                Error::config(format!("cannot read report {}: {e}", report.display()))
            })?;
            let report: PipelineReport = serde_json::from_str(&text)
                .map_err(|e| Error::config(format!("not a pipeline report: {e}")))?;
            let dir = cli
                .out
                .clone()
                .ok_or_else(|| Error::config("export needs --out <dir>"))?;
            for path in export_artifacts(&report, &dir)? {
                eprintln!("wrote {}", path.display());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::from(0),
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_)
                | Error::InvalidArgument(_)
                | Error::Format(_)
                | Error::Io(_)
                | Error::Json(_)
                | Error::Csv(_) => ExitCode::from(2),
                Error::Numerical(_) | Error::CheckFailed(_) | Error::SizeCap(_) => {
                    ExitCode::from(1)
                }
            }
        }
    }
}
