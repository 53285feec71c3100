use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use depactor::cli::{cmd_oracle, cmd_parse, cmd_sweep, cmd_validate, OutputFormat, RunConfig};
use depactor::runtime::Mode;

#[derive(Parser)]
#[command(
    name = "depactor",
    about = "Concurrent lexicalized dependency parser",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GrammarArgs {
    /// Word-class hierarchy file (JSON)
    #[arg(long)]
    classes: PathBuf,
    /// Concept system file (JSON)
    #[arg(long)]
    concepts: PathBuf,
    /// Lexicon file (JSON)
    #[arg(long)]
    lexicon: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    grammar: GrammarArgs,
    /// Scheduler mode
    #[arg(long, value_enum, default_value_t = ModeArg::Deterministic)]
    mode: ModeArg,
    /// Scheduler seed (deterministic mode)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Maximum number of readings kept alive
    #[arg(long, default_value_t = 64)]
    max_readings: usize,
    /// Delivery budget before a run is declared non-quiescent
    #[arg(long, default_value_t = 1_000_000)]
    step_bound: u64,
    /// Output format
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// Write the event trace to this file
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Deterministic,
    Concurrent,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Tree,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a pre-segmented sentence
    Parse {
        #[command(flatten)]
        run: RunArgs,
        /// Sentence tokens
        #[arg(required = true)]
        tokens: Vec<String>,
    },
    /// Validate a grammar bundle
    Validate {
        #[command(flatten)]
        grammar: GrammarArgs,
    },
    /// Enumerate all valid analyses by brute force
    Oracle {
        #[command(flatten)]
        run: RunArgs,
        #[arg(required = true)]
        tokens: Vec<String>,
    },
    /// Parse under a range of seeds and compare against the oracle
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Seed range, inclusive, as start..end
        #[arg(long, default_value = "0..199")]
        seeds: String,
        #[arg(required = true)]
        tokens: Vec<String>,
    },
}

fn config_from(run: &RunArgs) -> RunConfig {
    RunConfig {
        classes: run.grammar.classes.clone(),
        concepts: run.grammar.concepts.clone(),
        lexicon: run.grammar.lexicon.clone(),
        mode: match run.mode {
            ModeArg::Deterministic => Mode::Deterministic,
            ModeArg::Concurrent => Mode::Concurrent,
        },
        seed: run.seed,
        max_readings: run.max_readings,
        step_bound: run.step_bound,
        format: match run.format {
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Tree => OutputFormat::Tree,
        },
        trace_out: run.trace_out.clone(),
    }
}

fn parse_seed_range(spec: &str) -> Option<Vec<u64>> {
    let (start, end) = spec.split_once("..")?;
    let start: u64 = start.trim().parse().ok()?;
    let end: u64 = end.trim().parse().ok()?;
    if end < start {
        return None;
    }
    Some((start..=end).collect())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (code, output) = match &cli.command {
        Command::Parse { run, tokens } => cmd_parse(&config_from(run), tokens),
        Command::Validate { grammar } => {
            let config = RunConfig {
                classes: grammar.classes.clone(),
                concepts: grammar.concepts.clone(),
                lexicon: grammar.lexicon.clone(),
                mode: Mode::Deterministic,
                seed: 0,
                max_readings: 64,
                step_bound: 1_000_000,
                format: OutputFormat::Json,
                trace_out: None,
            };
            cmd_validate(&config)
        }
        Command::Oracle { run, tokens } => cmd_oracle(&config_from(run), tokens),
        Command::Sweep { run, seeds, tokens } => match parse_seed_range(seeds) {
            Some(seeds) => cmd_sweep(&config_from(run), tokens, &seeds),
            None => (2, "error: seed range must be start..end\n".into()),
        },
    };
    print!("{output}");
    ExitCode::from(code as u8)
}
