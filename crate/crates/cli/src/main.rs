//! `lmsss` command-line front end. Every command reads and writes files:
//! models and pairings as JSON, FRFs as CSV.
//!
//! Exit codes: 0 success, 1 failed validation or comparison, 2 usage error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "lmsss", version, about = "State-space substructuring with Lagrange multipliers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Two-component spring-mass example.
    #[command(subcommand)]
    Example(ExampleCmd),
    /// Couple component models.
    Couple(CoupleArgs),
    /// Remove a component from an assembly model.
    Decouple(DecoupleArgs),
    /// Put a model in a coupling form.
    Transform(TransformArgs),
    /// Synthesize an FRF from a model, or perturb an FRF.
    Frf(FrfArgs),
    /// Frequency-based dual assembly on FRF files.
    #[command(subcommand)]
    Lmfbs(LmfbsCmd),
    /// Dynamic stiffness from an accelerance FRF.
    Stiffness(StiffnessArgs),
    /// Largest elementwise relative difference between two FRFs.
    Compare(CompareArgs),
    /// Time the interface factorizations of LM-SSS against classical SSS.
    Bench(BenchArgs),
}

#[derive(Subcommand, Debug)]
pub enum ExampleCmd {
    /// Write component, assembly and pairing files.
    Build {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Kind::Disp)]
        kind: Kind,
        /// Write the models in modal coordinates.
        #[arg(long)]
        modal: bool,
    },
    /// FRF of one example system computed from its physical matrices.
    Oracle {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        system: System,
        #[command(flatten)]
        grid: Grid,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct CoupleArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub models: Vec<PathBuf>,
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long, value_enum, default_value_t = Kind::Accel)]
    pub variant: Kind,
    #[arg(long, value_enum, default_value_t = Form::None)]
    pub form: Form,
    /// Merge duplicated interface states (needs a coupling form).
    #[arg(long)]
    pub minimal: bool,
    /// Keep one input and output per interface pair.
    #[arg(long)]
    pub retain_unique: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DecoupleArgs {
    #[arg(long)]
    pub assembly: PathBuf,
    #[arg(long)]
    pub remove: PathBuf,
    #[arg(long)]
    pub pairs: PathBuf,
    /// Label list of the DOFs to keep.
    #[arg(long)]
    pub keep: PathBuf,
    /// Merge duplicated interface states (inputs must be in a coupling form).
    #[arg(long)]
    pub minimal: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TransformArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Label list of the interface DOFs.
    #[arg(long)]
    pub interface: PathBuf,
    #[arg(long, value_enum)]
    pub form: Form,
    /// Convert to modal coordinates first.
    #[arg(long)]
    pub modal: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Condition number and NCF residual as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(args_conflicts_with_subcommands = true, subcommand_negates_reqs = true)]
pub struct FrfArgs {
    #[command(subcommand)]
    pub action: Option<FrfCmd>,
    #[arg(long, required = true)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub grid: Option<Grid>,
    #[arg(long, required = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum FrfCmd {
    /// Add seeded complex Gaussian noise to every entry.
    Perturb {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Clone, Copy)]
pub struct Grid {
    #[arg(long, required = true)]
    pub fmin: f64,
    #[arg(long, required = true)]
    pub fmax: f64,
    #[arg(long, required = true)]
    pub df: f64,
}

#[derive(Subcommand, Debug)]
pub enum LmfbsCmd {
    /// Couple accelerance FRFs. Failed frequencies are written as NaN.
    Couple {
        #[arg(long, num_args = 1.., required = true)]
        frfs: Vec<PathBuf>,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        retain_unique: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Subtract a component FRF from an assembly FRF.
    Decouple {
        #[arg(long)]
        assembly: PathBuf,
        #[arg(long)]
        remove: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        keep: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct StiffnessArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub tol: f64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2,6,12")]
    pub njs: Vec<usize>,
    #[arg(long, default_value_t = 10000)]
    pub trials: usize,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Disp,
    Vel,
    Accel,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Form {
    None,
    Ucf,
    Sacf,
    Ncf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum System {
    A,
    B,
    Assembled,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match commands::run(cli.command) {
        Ok(commands::Outcome::Ok) => ExitCode::SUCCESS,
        Ok(commands::Outcome::Failed(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
