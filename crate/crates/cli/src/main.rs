use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod demo;
mod output;

use output::Format;

/// Weak values, moment and product weak-value extraction, weak-value tomography and a
/// product-weak-value entanglement test.
#[derive(Debug, Parser)]
#[command(name = "weakval", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Agreement tolerance for --check and for witness violations.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Inputs {
    /// Pre-selected state (pure or mixed).
    #[arg(long)]
    pub pre: Option<PathBuf>,
    /// Post-selection; give twice for a product post-selection (side A, then side B).
    #[arg(long)]
    pub post: Vec<PathBuf>,
    #[arg(long)]
    pub observable: Option<PathBuf>,
    /// Observable on side B.
    #[arg(long = "observable-b")]
    pub observable_b: Option<PathBuf>,
    /// Also evaluate by dense linear algebra and compare.
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Args, Clone)]
pub struct FamilyArgs {
    /// werner2, two-bell, noisy-pure, pure-mixture, four-bell, qudit-werner, isotropic.
    #[arg(long)]
    pub family: String,
    /// Comma-separated family parameters.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub params: Vec<f64>,
    /// Qudit Werner setting: spin1_ladder, spin1_sx or spin32_ladder.
    #[arg(long)]
    pub variant: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Weak value of an observable.
    WeakValue(Inputs),
    /// n-th moment weak value from first-moment weak values.
    Moment {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value_t = 2)]
        n: u32,
    },
    /// Product weak value from local weak values.
    Product(Inputs),
    /// Reconstruct a hidden pure state.
    TomoPure {
        #[arg(long)]
        hidden: PathBuf,
        /// moments, basis-transfer or cyclic.
        #[arg(long, default_value = "moments")]
        ops: String,
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Reconstruct a hidden density operator.
    TomoMixed {
        #[arg(long)]
        hidden: PathBuf,
        /// cyclic (the default set).
        #[arg(long, default_value = "default")]
        ops: String,
    },
    /// Reconstruct a hidden bipartite state.
    TomoBipartite {
        #[arg(long)]
        hidden: PathBuf,
        /// default or cyclic.
        #[arg(long, default_value = "default")]
        ops: String,
    },
    /// Evaluate the separability inequality for one state.
    Entangle {
        /// Family name; the last parameter is the mixing weight `p`.
        #[arg(long)]
        family: Option<String>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        params: Vec<f64>,
        #[arg(long)]
        variant: Option<String>,
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Threshold of a state family by grid scan and bisection.
    Scan {
        #[command(flatten)]
        family: FamilyArgs,
        /// lo:hi:steps
        #[arg(long, default_value = "0:1:41")]
        grid: String,
    },
    /// Perturbation bound and noisy post-selection shift.
    Robust {
        #[command(flatten)]
        inputs: Inputs,
        /// Trace norm of the random observable error.
        #[arg(long, default_value_t = 0.01)]
        noise: f64,
        /// Weight of the noise in the post-selection.
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
    },
    /// Deterministic reproduction tables.
    Demo {
        /// entanglement, moments, product, tomography, robustness, spin or all.
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<weakval::Error> for Failure {
    fn from(e: weakval::Error) -> Self {
        use weakval::Error as E;
        let msg = e.to_string();
        match e {
            E::EigenstatePostSelection { .. }
            | E::OrthogonalPostSelection { .. }
            | E::ZeroPostSelectionProbability { .. }
            | E::OrthogonalIntermediatePostSelection { .. }
            | E::DegenerateObservable { .. }
            | E::SingularDesign { .. }
            | E::AllPostSelectionsFailed { .. }
            | E::NoViolationOnGrid
            | E::ZeroNormPhiPrime { .. }
            | E::RankDeficientPreSelection { .. } => Failure::Numerical(msg),
            _ => Failure::Validation(msg),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok((text, failure)) => {
            print!("{text}");
            match failure {
                None => ExitCode::SUCCESS,
                Some(f) => {
                    eprintln!("error: {}", f.message());
                    ExitCode::from(f.code())
                }
            }
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
