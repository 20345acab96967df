//! `srm`: command-line front end for horizontal geometry computations.
//!
//! Exit codes: 0 success or stable, 1 input or runtime error, 2 inconclusive,
//! 3 unstable, 4 not CMC, 5 a verification check failed.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use srm_core::SrmError;

#[derive(Parser, Debug)]
#[command(name = "srm", version, about = "Horizontal geometry of hypersurfaces in sub-Riemannian manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by all commands.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Manifold definition file, or a builtin: `heisenberg[:n]`, `rototranslation`.
    #[arg(long)]
    pub manifold: Option<String>,
    /// Surface definition file.
    #[arg(long)]
    pub surface: Option<PathBuf>,
    /// Bubble size; selects the ℍ² bubble when no surface file is given.
    #[arg(long = "L", value_name = "L")]
    pub l: Option<f64>,
    /// Quadrature panels, mesh cells, mode elements or scan cells, depending on the command.
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Highest mode degree (bubble) or number of eigenvalues (other surfaces).
    #[arg(long)]
    pub modes: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Write plot-ready `(abscissa, value)` columns to this file.
    #[arg(long = "dump-csv", value_name = "PATH")]
    pub dump_csv: Option<PathBuf>,
    /// Print the JSON report on standard output.
    #[arg(long)]
    pub json: bool,
    /// Include wall-clock time in the report.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Horizontal curvature data at points of a surface.
    Curvature {
        #[command(flatten)]
        common: Common,
        /// Ambient point, comma separated (repeatable).
        #[arg(long = "at", allow_hyphen_values = true)]
        at: Vec<String>,
        /// Parameter point, comma separated (repeatable).
        #[arg(long = "param", allow_hyphen_values = true)]
        param: Vec<String>,
        /// Radius on the upper sheet of a bubble (repeatable).
        #[arg(long = "radius")]
        radius: Vec<f64>,
    },
    /// Horizontal perimeter, Riemannian area and enclosed volume.
    Perimeter {
        #[command(flatten)]
        common: Common,
    },
    /// First variation of the horizontal perimeter.
    FirstVariation {
        #[command(flatten)]
        common: Common,
        /// Variation definition file.
        #[arg(long)]
        variation: PathBuf,
        /// Also evaluate the finite-difference oracle.
        #[arg(long)]
        oracle: bool,
    },
    /// Second variation of the horizontal perimeter.
    SecondVariation {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        variation: PathBuf,
        #[arg(long)]
        oracle: bool,
    },
    /// Stability spectrum and verdict.
    Stability {
        #[command(flatten)]
        common: Common,
    },
    /// Minkowski formula residual.
    MinkowskiCheck {
        #[command(flatten)]
        common: Common,
    },
    /// Closed forms, perimeter and volume of the ℍ² bubble.
    BubbleReport {
        #[command(flatten)]
        common: Common,
    },
    /// Characteristic set scan.
    Charset {
        #[command(flatten)]
        common: Common,
        /// Refinement levels of the scan.
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Run a verification suite.
    Verify {
        /// One of: bubble, minkowski, first-variation, second-variation, divergence, fourier, charset, all.
        suite: String,
        #[command(flatten)]
        common: Common,
    },
}

fn configure_threads() {
    if let Some(n) = std::env::var("SRM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let start = Instant::now();
    let (common, result) = match cli.command {
        Command::Curvature { common, at, param, radius } => {
            let r = commands::curvature(&common, &at, &param, &radius);
            (common, r)
        }
        Command::Perimeter { common } => {
            let r = commands::perimeter(&common);
            (common, r)
        }
        Command::FirstVariation { common, variation, oracle } => {
            let r = commands::first_variation(&common, &variation, oracle);
            (common, r)
        }
        Command::SecondVariation { common, variation, oracle } => {
            let r = commands::second_variation(&common, &variation, oracle);
            (common, r)
        }
        Command::Stability { common } => {
            let r = commands::stability(&common);
            (common, r)
        }
        Command::MinkowskiCheck { common } => {
            let r = commands::minkowski(&common);
            (common, r)
        }
        Command::BubbleReport { common } => {
            let r = commands::bubble_report(&common);
            (common, r)
        }
        Command::Charset { common, levels } => {
            let r = commands::charset(&common, levels);
            (common, r)
        }
        Command::Verify { suite, common } => {
            let r = commands::verify(&common, &suite);
            (common, r)
        }
    };
    match result {
        Ok(mut out) => {
            if common.timing {
                out.envelope.timing_seconds = Some(start.elapsed().as_secs_f64());
            }
            for line in &out.summary {
                eprintln!("{line}");
            }
            if common.json {
                match out.envelope.to_json() {
                    Ok(s) => println!("{s}"),
                    Err(e) => {
                        eprintln!("error: {e:#}");
                        return ExitCode::from(1);
                    }
                }
            }
            ExitCode::from(out.exit)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<SrmError>() {
                Some(SrmError::NotCmc(_)) => ExitCode::from(4),
                _ => ExitCode::from(1),
            }
        }
    }
}
