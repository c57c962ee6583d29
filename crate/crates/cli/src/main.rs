use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eventflow::detect::VolatilityBaseline;
use eventflow::pipeline::{self, RunConfig, Stage, StageError, StageResult};

#[derive(Parser)]
#[command(name = "eventflow", version, about = "Order-flow dynamics around extreme intraday price changes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the raw order stream into ingest/orders.csv.
    Ingest(RunArgs),
    /// Replay ingest/orders.csv through the book and write minute bars.
    Classify(RunArgs),
    /// Detect extreme price changes in the minute bars.
    Detect(RunArgs),
    /// Deseasonalize and average event-aligned trajectories.
    Study(RunArgs),
    /// Fit power-law relaxations to the group curves.
    Fit(RunArgs),
    /// Generate a synthetic scenario into the output directory.
    Synth(RunArgs),
    /// Run every stage and write the manifest.
    Run(RunArgs),
    /// Verify a manifest and summarize its run.
    Report {
        /// Path to manifest.txt, or the output directory holding it.
        manifest: PathBuf,
    },
}

/// Flags override the config file key of the same name.
#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    orders: Option<PathBuf>,
    #[arg(long)]
    splits: Option<PathBuf>,
    #[arg(long)]
    bars: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    threshold_abs: Option<f64>,
    #[arg(long)]
    window_max: Option<usize>,
    #[arg(long)]
    volatility_multiple: Option<f64>,
    #[arg(long)]
    opening_exclusion: Option<usize>,
    #[arg(long)]
    closing_exclusion: Option<usize>,
    /// all_windows or same_clock_time.
    #[arg(long, value_parser = parse_baseline)]
    baseline: Option<VolatilityBaseline>,
    #[arg(long)]
    exclude_event_days: bool,
    /// Comma-separated quantity names.
    #[arg(long, value_delimiter = ',')]
    quantities: Option<Vec<String>>,
    #[arg(long)]
    fit_lo: Option<usize>,
    #[arg(long)]
    fit_hi: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_baseline(s: &str) -> Result<VolatilityBaseline, String> {
    match s {
        "all_windows" => Ok(VolatilityBaseline::AllWindows),
        "same_clock_time" => Ok(VolatilityBaseline::SameClockTime),
        _ => Err(format!("unknown baseline {s:?}")),
    }
}

impl RunArgs {
    fn config(&self) -> StageResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path).map_err(|source| StageError {
                stage: Stage::Config,
                source,
            })?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.output {
            cfg.output = p.clone();
        }
        let sources = [&self.orders, &self.bars, &self.scenario];
        if sources.iter().any(|s| s.is_some()) {
            cfg.input.orders = self.orders.clone();
            cfg.input.bars = self.bars.clone();
            cfg.input.scenario = self.scenario.clone();
        }
        if self.splits.is_some() {
            cfg.input.splits = self.splits.clone();
        }
        let d = &mut cfg.detect;
        d.threshold_abs = self.threshold_abs.unwrap_or(d.threshold_abs);
        d.window_max = self.window_max.unwrap_or(d.window_max);
        d.volatility_multiple = self.volatility_multiple.unwrap_or(d.volatility_multiple);
        d.opening_exclusion = self.opening_exclusion.unwrap_or(d.opening_exclusion);
        d.closing_exclusion = self.closing_exclusion.unwrap_or(d.closing_exclusion);
        d.baseline = self.baseline.unwrap_or(d.baseline);
        cfg.deseason.exclude_event_days |= self.exclude_event_days;
        if let Some(q) = &self.quantities {
            cfg.study.quantities = q.clone();
        }
        cfg.fit.lo = self.fit_lo.unwrap_or(cfg.fit.lo);
        cfg.fit.hi = self.fit_hi.unwrap_or(cfg.fit.hi);
        if self.seed.is_some() {
            cfg.synth.seed = self.seed;
        }
        Ok(cfg)
    }
}

fn stage<T>(args: &RunArgs, f: impl FnOnce(&RunConfig) -> StageResult<T>) -> StageResult<()> {
    let cfg = args.config()?;
    cfg.detect.validate().map_err(|source| StageError {
        stage: Stage::Config,
        source,
    })?;
    f(&cfg)?;
    pipeline::write_manifest(&cfg)?;
    Ok(())
}

fn execute(command: Command) -> StageResult<()> {
    match command {
        Command::Ingest(a) => stage(&a, pipeline::stage_ingest),
        Command::Classify(a) => stage(&a, pipeline::stage_classify),
        Command::Detect(a) => stage(&a, pipeline::stage_detect),
        Command::Study(a) => stage(&a, pipeline::stage_study),
        Command::Fit(a) => stage(&a, pipeline::stage_fit),
        Command::Synth(a) => stage(&a, pipeline::stage_synth),
        Command::Run(a) => {
            let cfg = a.config()?;
            let manifest = pipeline::run_pipeline(&cfg)?;
            log::info!(
                "run: {} files listed in {}",
                manifest.entries.len(),
                cfg.output.join(pipeline::MANIFEST_FILE).display()
            );
            Ok(())
        }
        Command::Report { manifest } => {
            let path = if manifest.is_dir() {
                manifest.join(pipeline::MANIFEST_FILE)
            } else {
                manifest
            };
            let text = pipeline::report(&path).map_err(|source| StageError {
                stage: Stage::Report,
                source,
            })?;
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.stage.exit_code() as u8)
        }
    }
}
