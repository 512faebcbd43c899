//! `vrtkit`: transcript normalization, annotation, corpus building and
//! the filler-particle analyses from the command line.

mod aggregate;
mod analysis;
mod annotate;
mod build;
mod config;
mod error;
mod io;
mod normalize;
mod stats;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "vrtkit", version, about = "Parallel interpreting/translation corpus toolkit")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand. Each one can also come from the
/// environment (`VRTKIT_<KEY>`) or a `--config` file.
#[derive(Args)]
struct GlobalArgs {
    /// key=value run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Translation direction, e.g. DE-EN.
    #[arg(long, global = true)]
    direction: Option<String>,
    /// SP or WR.
    #[arg(long, global = true)]
    mode: Option<String>,
    /// base or ft.
    #[arg(long, global = true)]
    variant: Option<String>,
    /// Replay file with recorded adapter exchanges (repeatable).
    #[arg(long, global = true)]
    replay: Vec<PathBuf>,
    /// Seed for the document split.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all processors).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Any configuration key, as KEY=VALUE (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl GlobalArgs {
    fn flags(&self) -> Result<BTreeMap<String, String>, CliError> {
        let mut m = BTreeMap::new();
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            m.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        put("direction", self.direction.clone());
        put("mode", self.mode.clone());
        put("variant", self.variant.clone());
        put("seed", self.seed.map(|s| s.to_string()));
        put("workers", self.workers.map(|w| w.to_string()));
        if !self.replay.is_empty() {
            let paths: Vec<String> = self.replay.iter().map(|p| p.display().to_string()).collect();
            put("replay", Some(paths.join(",")));
        }
        Ok(m)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Transcripts in the disfluency notation to clean text and counts.
    Normalize(normalize::NormalizeArgs),
    /// Parse, surprisal and alignment for segment pairs.
    Annotate(annotate::AnnotateArgs),
    /// Vertical rows to segment (long) and segment-pair (wide) tables.
    Aggregate(aggregate::AggregateArgs),
    /// Document filters and the train/test split.
    Build(build::BuildArgs),
    /// Descriptive corpus and alignment statistics.
    Stats(stats::StatsArgs),
    /// Mixed-effects models of filler particles.
    FpAnalyze(analysis::FpArgs),
    /// Spline fit of LM against MT surprisal.
    Gam(analysis::GamArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Normalize(_) => "normalize",
            Command::Annotate(_) => "annotate",
            Command::Aggregate(_) => "aggregate",
            Command::Build(_) => "build",
            Command::Stats(_) => "stats",
            Command::FpAnalyze(_) => "fp-analyze",
            Command::Gam(_) => "gam",
        }
    }
}

/// What every subcommand gets: its name and the resolved configuration.
pub struct Run {
    pub command: &'static str,
    pub config: RunConfig,
}

impl Run {
    /// Provenance lines: tool, command, config hash, resolved keys, then
    /// any subcommand-specific lines.
    pub fn provenance(&self, extra: &[String]) -> Vec<String> {
        let mut lines = vec![
            format!("vrtkit {} {}", env!("CARGO_PKG_VERSION"), self.command),
            format!("config_hash {}", self.config.hash()),
        ];
        lines.extend(self.config.lines().into_iter().map(|l| format!("config {l}")));
        lines.extend(extra.iter().cloned());
        lines
    }

    pub fn thread_pool(&self) -> Result<rayon::ThreadPool, CliError> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.config.parse::<usize>("workers")? {
            b = b.num_threads(n);
        }
        b.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let config = RunConfig::resolve(&cli.global.flags()?, cli.global.config.as_deref(), |k| {
        std::env::var(k).ok()
    })?;
    let run = Run {
        command: cli.command.name(),
        config,
    };
    match &cli.command {
        Command::Normalize(a) => normalize::run(&run, a),
        Command::Annotate(a) => annotate::run(&run, a),
        Command::Aggregate(a) => aggregate::run(&run, a),
        Command::Build(a) => build::run(&run, a),
        Command::Stats(a) => stats::run(&run, a),
        Command::FpAnalyze(a) => analysis::run_fp(&run, a),
        Command::Gam(a) => analysis::run_gam(&run, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let name = cli.command.name();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record(name));
            ExitCode::FAILURE
        }
    }
}
