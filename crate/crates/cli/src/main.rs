use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use trigcond::testcase::BehaviorClass;
use trigcond_cli::{execute, Command, Overrides, ReportFormat, WorkbenchError};

#[derive(Parser)]
#[command(name = "trigcond", version, about = "Generate and manage perception triggering conditions")]
struct Cli {
    /// Project configuration file.
    #[arg(long, global = true, env = "TRIGCOND_CONFIG", default_value = "project.toml")]
    config: PathBuf,
    /// Output directory; overrides the configured one.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(1..=3))]
    threshold: Option<u8>,
    #[arg(long, global = true)]
    bundle_limit: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Markdown,
}

#[derive(Subcommand)]
enum Cmd {
    /// Load and cross-check every input file.
    Validate,
    /// Show the stages each focal source reaches per sensor.
    Stages,
    /// Print generation matrices for bare focal sources.
    Matrix {
        #[arg(long)]
        sensor: Option<String>,
        #[arg(long)]
        source: Option<String>,
    },
    /// Generate the triggering-condition catalog.
    Generate,
    /// Apply ratings to the catalog and rank it.
    Assess {
        #[arg(long)]
        reassess: bool,
    },
    /// Compose test cases from the catalog and hazardous events.
    Compose,
    /// Render the catalog.
    Report,
    /// Record the observed behavior of a test case.
    Record {
        case: String,
        #[arg(value_parser = parse_behavior)]
        behavior: BehaviorClass,
    },
}

fn parse_behavior(s: &str) -> Result<BehaviorClass, String> {
    BehaviorClass::parse(s).ok_or_else(|| {
        let names: Vec<String> = BehaviorClass::ALL.iter().map(|b| format!("{b:?}")).collect();
        format!("expected one of {}", names.join(", "))
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides {
        threshold: cli.threshold,
        bundle_limit: cli.bundle_limit,
        out_dir: cli.out,
        format: cli.format.map(|f| match f {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
            Format::Markdown => ReportFormat::Markdown,
        }),
    };
    let command = match cli.command {
        Cmd::Validate => Command::Validate,
        Cmd::Stages => Command::Stages,
        Cmd::Matrix { sensor, source } => Command::Matrix { sensor, source },
        Cmd::Generate => Command::Generate,
        Cmd::Assess { reassess } => Command::Assess { reassess },
        Cmd::Compose => Command::Compose,
        Cmd::Report => Command::Report,
        Cmd::Record { case, behavior } => Command::Record { case, behavior },
    };
    match execute(&cli.config, &overrides, &command) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("{w}");
            }
            print!("{}", outcome.stdout);
            ExitCode::SUCCESS
        }
        Err(e) => {
            match &e {
                WorkbenchError::Data(diags) => {
                    for d in diags {
                        eprintln!("{d}");
                    }
                    eprintln!("{e}");
                }
                _ => eprintln!("error: {e}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
