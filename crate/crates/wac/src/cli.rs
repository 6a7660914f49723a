//! Command-line interface.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wac_core::{build_arena, merge_lexicons, replay, Feature, Lexicon, Mode};

use crate::format::{self, FormatError};
use crate::service::{self, AppState};
use crate::simulate::{simulate, SimulationConfig};

#[derive(Debug, Parser)]
#[command(name = "wac", version, about = "Words-as-classifiers fetch-game simulator and teaching service")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scripted curriculum and write report.json, lexicon.json and ledger.jsonl.
    Simulate(SimulateArgs),
    /// Lexicon file utilities.
    #[command(subcommand)]
    Lexicon(LexiconCommand),
    /// Serve the teaching-session HTTP API.
    Serve(ServeArgs),
    /// Print the arena a config and seed produce.
    GenArena(GenArenaArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Frozen,
    Learning,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Frozen => Mode::Frozen,
            ModeArg::Learning => Mode::Learning,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulation config (JSON); defaults are used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Learning)]
    pub mode: ModeArg,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Start from this lexicon instead of an empty one.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Do not print the summary table.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum LexiconCommand {
    /// Write a lexicon file in canonical form to a file or stdout.
    Export {
        lexicon: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a lexicon document and install it at DEST.
    Import { source: PathBuf, dest: PathBuf },
    /// Pool two lexicons (the first one's seed is kept).
    Merge {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print weights, counts and the dominant feature of each word.
    Inspect {
        lexicon: PathBuf,
        #[arg(long)]
        word: Option<String>,
    },
    /// Rebuild a lexicon by replaying a ledger's feedback.
    Replay {
        ledger: PathBuf,
        /// Lexicon the ledger started from; an empty one otherwise.
        #[arg(long)]
        base: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub bind: String,
    /// Lexicon to load (if present) and save to on shutdown or request.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArenaArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Failure with the process exit status it maps to.
#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub status: u8,
    pub message: String,
}

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_OUTPUT: u8 = 3;
pub const EXIT_VERSION: u8 = 4;
pub const EXIT_BIND: u8 = 5;

impl CliError {
    fn new(status: u8, message: impl std::fmt::Display) -> Self {
        CliError { status, message: message.to_string() }
    }

    /// Errors reading inputs.
    fn input(err: FormatError) -> Self {
        let status = if matches!(err, FormatError::Version { .. }) { EXIT_VERSION } else { EXIT_INPUT };
        CliError::new(status, err)
    }

    fn output(err: impl std::fmt::Display) -> Self {
        CliError::new(EXIT_OUTPUT, err)
    }

    fn core(err: wac_core::Error) -> Self {
        use wac_core::Error::*;
        let status = match err {
            Version { .. } => EXIT_VERSION,
            Config(_) | Construction(_) | InvalidInput(_) | InvalidObject { .. } | UnknownLexeme(_) | CorruptLedger { .. } => {
                EXIT_INPUT
            }
            _ => 1,
        };
        CliError::new(status, err)
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.status)
    }
}

type CliResult = Result<(), CliError>;

fn load_config(path: Option<&Path>) -> Result<SimulationConfig, CliError> {
    let config: SimulationConfig = match path {
        Some(p) => format::load_json(p).map_err(CliError::input)?,
        None => SimulationConfig::default(),
    };
    config.validate().map_err(CliError::core)?;
    Ok(config)
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> CliResult {
    match cli.command {
        Command::Simulate(args) => run_simulate(args, stdout),
        Command::Lexicon(cmd) => run_lexicon(cmd, stdout),
        Command::Serve(args) => run_serve(args),
        Command::GenArena(args) => {
            let config = load_config(args.config.as_deref())?;
            let arena = build_arena(&config.arena, args.seed).map_err(CliError::core)?;
            let text = serde_json::to_string_pretty(&arena).expect("arena serializes");
            writeln!(stdout, "{text}").map_err(CliError::output)
        }
    }
}

fn run_simulate(args: SimulateArgs, stdout: &mut dyn Write) -> CliResult {
    if args.episodes == 0 {
        return Err(CliError::new(EXIT_INPUT, "--episodes must be at least 1"));
    }
    let config = load_config(args.config.as_deref())?;
    let lexicon = args.lexicon.as_deref().map(format::load_lexicon).transpose().map_err(CliError::input)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::output(format!("{}: {e}", args.out.display())))?;
    let sim = simulate(&config, args.episodes, args.seed, args.mode.into(), lexicon).map_err(CliError::core)?;
    format::write_json(&args.out.join("report.json"), &sim.report).map_err(CliError::output)?;
    format::save_lexicon(&sim.lexicon, &args.out.join("lexicon.json")).map_err(CliError::output)?;
    format::save_ledger(&sim.ledger, &args.out.join("ledger.jsonl")).map_err(CliError::output)?;
    if !args.quiet {
        write!(stdout, "{}", sim.report.table()).map_err(CliError::output)?;
    }
    Ok(())
}

fn run_lexicon(cmd: LexiconCommand, stdout: &mut dyn Write) -> CliResult {
    match cmd {
        LexiconCommand::Export { lexicon, out } => {
            let lex = format::load_lexicon(&lexicon).map_err(CliError::input)?;
            match out {
                Some(path) => format::save_lexicon(&lex, &path).map_err(CliError::output),
                None => write!(stdout, "{}", format::lexicon_to_string(&lex)).map_err(CliError::output),
            }
        }
        LexiconCommand::Import { source, dest } => {
            let lex = format::load_lexicon(&source).map_err(CliError::input)?;
            format::save_lexicon(&lex, &dest).map_err(CliError::output)?;
            writeln!(stdout, "imported {} words into {}", lex.len(), dest.display()).map_err(CliError::output)
        }
        LexiconCommand::Merge { a, b, out } => {
            let a = format::load_lexicon(&a).map_err(CliError::input)?;
            let b = format::load_lexicon(&b).map_err(CliError::input)?;
            let merged = merge_lexicons(&a, &b).map_err(CliError::core)?;
            format::save_lexicon(&merged, &out).map_err(CliError::output)
        }
        LexiconCommand::Inspect { lexicon, word } => {
            let lex = format::load_lexicon(&lexicon).map_err(CliError::input)?;
            write!(stdout, "{}", inspect(&lex, word.as_deref())).map_err(CliError::output)
        }
        LexiconCommand::Replay { ledger, base, seed, out } => {
            let ledger = format::load_ledger(&ledger).map_err(CliError::input)?;
            let base = match base {
                Some(p) => format::load_lexicon(&p).map_err(CliError::input)?,
                None => Lexicon::new(seed),
            };
            let lex = replay(&ledger, base).map_err(CliError::core)?;
            format::save_lexicon(&lex, &out).map_err(CliError::output)
        }
    }
}

/// Table of per-word weights, counts and the feature with the largest
/// absolute weight.
pub fn inspect(lexicon: &Lexicon, word: Option<&str>) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = write!(out, "{:<10} {:>5} {:>5}", "word", "pos", "neg");
    for f in Feature::ALL {
        let _ = write!(out, " {:>10}", f.name());
    }
    let _ = writeln!(out, " {:>8}  top", "bias");
    let words: Vec<_> = match word {
        Some(w) => vec![lexicon.lookup(w).into_owned()],
        None => lexicon.words().cloned().collect(),
    };
    for c in &words {
        let _ = write!(out, "{:<10} {:>5} {:>5}", c.token(), c.pos_count(), c.neg_count());
        for w in c.weights() {
            let _ = write!(out, " {w:>10.4}");
        }
        let top = Feature::ALL[c.dominant_feature()];
        let sign = if c.weights()[top.index()] < 0.0 { "-" } else { "+" };
        let _ = writeln!(out, " {:>8.4}  {sign}{}", c.bias(), top.name());
    }
    out
}

fn run_serve(args: ServeArgs) -> CliResult {
    let addr: SocketAddr = args.bind.parse().map_err(|e| CliError::new(EXIT_BIND, format!("{}: {e}", args.bind)))?;
    let lexicon = match &args.lexicon {
        Some(p) if p.exists() => format::load_lexicon(p).map_err(CliError::input)?,
        _ => Lexicon::new(0),
    };
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::new(1, e))?;
    runtime.block_on(async move {
        let listener =
            tokio::net::TcpListener::bind(addr).await.map_err(|e| CliError::new(EXIT_BIND, format!("{addr}: {e}")))?;
        tracing::info!(%addr, "listening");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        service::serve(listener, AppState::new(lexicon, args.lexicon), shutdown).await.map_err(CliError::output)
    })
}
