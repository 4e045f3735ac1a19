mod commands;
mod json;

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Compile MRFs and weighted CNF grammars to case-factor diagrams and run
/// inference on them. Results are JSON on stdout.
#[derive(Parser, Debug)]
#[command(name = "cfd", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compile the parse forest of one sentence.
    CompilePcfg {
        #[arg(long)]
        grammar: PathBuf,
        /// Whitespace-separated terminals.
        #[arg(long, conflicts_with = "sentence_file", required_unless_present = "sentence_file")]
        sentence: Option<String>,
        /// One terminal per line.
        #[arg(long)]
        sentence_file: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Energy file to write; defaults to OUT with extension `.energies`.
        #[arg(long)]
        energies: Option<PathBuf>,
        /// Keep phrases that cannot derive their span.
        #[arg(long)]
        no_prune: bool,
    },
    /// Compile a UAI-style MRF.
    CompileMrf {
        #[arg(long)]
        mrf: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        energies: Option<PathBuf>,
    },
    /// Partition function, best assignment and marginals.
    Infer {
        #[arg(long)]
        cfd: PathBuf,
        #[arg(long)]
        energies: Option<PathBuf>,
        #[arg(long = "task", value_enum, value_delimiter = ',', required = true)]
        tasks: Vec<Task>,
        /// `name=1` or `name=0`; repeatable.
        #[arg(long = "condition")]
        conditions: Vec<String>,
    },
    /// Node and variable counts of a diagram file.
    Stats {
        #[arg(long)]
        cfd: PathBuf,
    },
    /// Cross-check inference against brute force.
    Check {
        /// `random-cfd`, `random-mrf`, `random-pcfg`, or a diagram file.
        #[arg(long)]
        instance: String,
        #[arg(long)]
        energies: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Z,
    Viterbi,
    Marginals,
}

/// Failure classes and their exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Format(String),
    Infeasible(String),
    Check(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Format(_) => 2,
            Failure::Infeasible(_) => 3,
            Failure::Check(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Format(m) | Failure::Infeasible(m) | Failure::Check(m) => m,
        }
    }
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = writeln!(io::stdout().lock(), "{text}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(doc) => {
            emit(&serde_json::to_string_pretty(&doc).expect("JSON values serialize"));
            ExitCode::SUCCESS
        }
        Err(f) => {
            if let Failure::Check(report) = &f {
                emit(report);
                eprintln!("cfd: check failed");
            } else {
                eprintln!("cfd: {}", f.message());
            }
            ExitCode::from(f.code())
        }
    }
}
