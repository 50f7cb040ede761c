use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cisurvey_cli::commands::{self, AnalyzeArgs, GenerateArgs, SimulateArgs};
use cisurvey_cli::server::{self, ServeOptions};
use cisurvey_cli::{Classify, Failure};
use cisurvey_core::questionnaire::AssignmentMode;

#[derive(Parser)]
#[command(name = "cisurvey", version, about = "Generate, run and analyse contextual-integrity surveys")]
struct Cli {
    /// Log at debug level.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate flows and write one survey definition per flow set.
    Generate(GenerateArgs),
    /// Serve survey definitions and collect responses over HTTP.
    Serve(ServeArgs),
    /// Draw synthetic respondents from a norm model.
    Simulate(SimulateArgs),
    /// Turn a response file into the report bundle.
    Analyze(AnalyzeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Balanced,
    Uniform,
}

#[derive(clap::Args)]
struct ServeArgs {
    #[arg(long)]
    definitions: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: String,
    /// Append-only response log (CSV).
    #[arg(long)]
    log: PathBuf,
    /// Seed for assignment tie-breaking.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Balanced)]
    assignment: ModeArg,
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate(args) => {
            let s = commands::generate(&args)?;
            println!("{} flows, {} sets, {} survey definitions -> {}", s.flows, s.sets, s.surveys, args.out.display());
        }
        Command::Simulate(args) => {
            let n = commands::simulate(&args)?;
            println!("{n} respondents -> {}", args.out.display());
        }
        Command::Analyze(args) => {
            let s = commands::analyze(&args)?;
            println!(
                "retained {} ({} rejected at ingest, {} failed attention); m = {} / {} -> {}",
                s.retained,
                s.ingest_rejected,
                s.attention_failed,
                s.tp_m,
                s.recipient_m,
                args.out.display()
            );
        }
        Command::Serve(args) => {
            let defs = commands::load_definitions(&args.definitions)?;
            let options = ServeOptions {
                log: args.log,
                seed: args.seed,
                mode: match args.assignment {
                    ModeArg::Balanced => AssignmentMode::Balanced,
                    ModeArg::Uniform => AssignmentMode::Uniform,
                },
            };
            let rt = tokio::runtime::Runtime::new().runtime()?;
            rt.block_on(server::serve(defs.surveys, &args.bind, &options)).runtime()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(if cli.verbose { tracing::Level::DEBUG } else { tracing::Level::INFO })
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code() as u8)
        }
    }
}
