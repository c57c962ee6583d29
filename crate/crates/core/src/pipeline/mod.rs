//! File-based driver for the full analysis. Each stage reads only the files
//! the previous stage wrote under the output directory, so any stage can be
//! rerun on its own:
//!
//! | stage    | reads                         | writes                                   |
//! |----------|-------------------------------|------------------------------------------|
//! | ingest   | `input.orders`                | `ingest/orders.csv`, `ingest/rejects.csv` |
//! | classify | `ingest/orders.csv`           | `bars/<stock>.csv`, `classify/diagnostics.csv` |
//! | synth    | `input.scenario`              | `bars/<stock>.csv`, `synth/*`            |
//! | detect   | `bars/`                       | `detect/candidates.csv`, `detect/events.csv` |
//! | study    | `bars/`, `detect/events.csv`  | `study/curves/`, `study/groups.csv`, `study/peaks.csv`, `study/cumret_<sign>.csv` |
//! | fit      | `study/`                      | `fit/fits.csv`                           |
//!
//! With `input.bars` the bar tables are copied into `bars/` in place of
//! ingest and classify. Every run ends with `manifest.txt`.

mod config;
mod manifest;
mod report;
pub mod tables;

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use log::info;

use crate::classify::ReplayDiagnostics;
use crate::deseason::{deseasonalize, estimate_pattern, estimate_pattern_excluding};
use crate::detect::{deduplicate_first_per_day, detect_events, EventSign, ExtremeEvent, ReturnSeries};
use crate::error::{Error, Result};
use crate::ingest::{
    apply_split_adjustment, build_minute_bars, parse_stream, write_events as write_order_events, SchemaConfig,
    SplitTable, TradingClock,
};
use crate::relax::{excess, fit_power_law};
use crate::study::{
    aligned_cumulative_return, event_window_days, extract_trajectory, find_peak, group_average, group_id,
    peak_table, EventTrajectory, Quantity,
};
use crate::synth::{generate_bars, generate_orderflow, ScenarioSpec};
use tables::{FitRow, GroupRow};

pub use config::{DeseasonConfig, FitConfig, InputConfig, RunConfig, RunParameters, StudyConfig, SynthConfig};
pub use manifest::{Manifest, ManifestEntry, MANIFEST_FILE};
pub use report::report;

pub const PARAMETERS_FILE: &str = "parameters.toml";
pub const INGEST_ORDERS: &str = "ingest/orders.csv";
pub const INGEST_REJECTS: &str = "ingest/rejects.csv";
pub const BARS_DIR: &str = "bars";
pub const CLASSIFY_DIAGNOSTICS: &str = "classify/diagnostics.csv";
pub const SYNTH_TRUTH: &str = "synth/truth.json";
pub const SYNTH_ORDERS: &str = "synth/orders.csv";
pub const SYNTH_ORDER_TRUTH: &str = "synth/order_truth.json";
pub const DETECT_CANDIDATES: &str = "detect/candidates.csv";
pub const DETECT_EVENTS: &str = "detect/events.csv";
pub const STUDY_CURVES: &str = "study/curves";
pub const STUDY_GROUPS: &str = "study/groups.csv";
pub const STUDY_PEAKS: &str = "study/peaks.csv";
pub const FIT_TABLE: &str = "fit/fits.csv";

pub fn cumret_file(sign: EventSign) -> String {
    format!("study/cumret_{}.csv", sign.name())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Classify,
    Synth,
    Detect,
    Deseason,
    Study,
    Fit,
    Report,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Classify => "classify",
            Stage::Synth => "synth",
            Stage::Detect => "detect",
            Stage::Deseason => "deseason",
            Stage::Study => "study",
            Stage::Fit => "fit",
            Stage::Report => "report",
        }
    }

    /// Process exit status when this stage fails; 0 is success.
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config => 2,
            Stage::Ingest => 3,
            Stage::Classify => 4,
            Stage::Synth => 5,
            Stage::Detect => 6,
            Stage::Deseason => 7,
            Stage::Study => 8,
            Stage::Fit => 9,
            Stage::Report => 10,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub source: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {} failed: {}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

pub type StageResult<T> = std::result::Result<T, StageError>;

fn out_path(cfg: &RunConfig, rel: &str) -> PathBuf {
    cfg.output.join(rel)
}

fn reset_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        std::fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn schema(cfg: &RunConfig) -> SchemaConfig {
    let d = SchemaConfig::default();
    SchemaConfig {
        delimiter: cfg.input.delimiter.unwrap_or(d.delimiter),
        enforce_board_lot: cfg.input.enforce_board_lot.unwrap_or(d.enforce_board_lot),
    }
}

fn read_orders(path: &Path, schema: &SchemaConfig) -> Result<crate::ingest::ParseOutcome> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_stream(BufReader::new(file), schema, &TradingClock::default())
}

fn write_orders(path: &Path, events: &[crate::ingest::OrderEvent]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_order_events(BufWriter::new(file), events, ',').map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestSummary {
    pub accepted: usize,
    pub rejected: usize,
    pub excluded: usize,
}

/// Validates the raw order stream into its canonical form.
pub fn stage_ingest(cfg: &RunConfig) -> StageResult<IngestSummary> {
    let input = cfg
        .input
        .orders
        .as_deref()
        .ok_or_else(|| Error::Config("input.orders is not set".into()))
        .at(Stage::Ingest)?;
    let outcome = read_orders(input, &schema(cfg)).at(Stage::Ingest)?;
    reset_dir(&out_path(cfg, "ingest")).at(Stage::Ingest)?;
    write_orders(&out_path(cfg, INGEST_ORDERS), &outcome.events).at(Stage::Ingest)?;
    let rows = outcome.rejects.iter().map(|r| vec![r.line.to_string(), r.reason.clone()]);
    tables::write_table(&out_path(cfg, INGEST_REJECTS), &["line".into(), "reason".into()], rows).at(Stage::Ingest)?;
    let s = IngestSummary {
        accepted: outcome.accepted(),
        rejected: outcome.rejected(),
        excluded: outcome.excluded,
    };
    info!(
        "ingest: {} records accepted, {} rejected, {} outside the continuous session",
        s.accepted, s.rejected, s.excluded
    );
    Ok(s)
}

fn diagnostics_row(stock: &str, d: &ReplayDiagnostics, dropped: usize) -> Vec<String> {
    let flagged = d.flagged.iter().map(|(k, n)| format!("{k}={n}")).collect::<Vec<_>>().join(";");
    vec![
        stock.to_string(),
        d.stale_cancels.to_string(),
        d.execution_mismatches.to_string(),
        dropped.to_string(),
        flagged,
    ]
}

/// Replays the canonical stream through the book and writes minute bars.
pub fn stage_classify(cfg: &RunConfig) -> StageResult<usize> {
    let schema = SchemaConfig {
        delimiter: ',',
        ..schema(cfg)
    };
    let outcome = read_orders(&out_path(cfg, INGEST_ORDERS), &schema).at(Stage::Classify)?;
    let build = build_minute_bars(&outcome.events, &TradingClock::default()).at(Stage::Classify)?;
    let mut series = build.series;
    if let Some(path) = &cfg.input.splits {
        let file = File::open(path).map_err(|e| Error::io(path, e)).at(Stage::Classify)?;
        let table = SplitTable::read(BufReader::new(file)).at(Stage::Classify)?;
        apply_split_adjustment(&mut series, &table).at(Stage::Classify)?;
    }
    let bars = out_path(cfg, BARS_DIR);
    reset_dir(&bars).at(Stage::Classify)?;
    for s in &series {
        tables::write_bars(&bars, s).at(Stage::Classify)?;
    }
    let mut dropped: BTreeMap<&str, usize> = BTreeMap::new();
    for (stock, _) in &build.dropped_days {
        *dropped.entry(stock.as_str()).or_default() += 1;
    }
    let rows = build
        .diagnostics
        .iter()
        .map(|(stock, d)| diagnostics_row(stock, d, dropped.get(stock.as_str()).copied().unwrap_or(0)));
    let header = ["stock_id", "stale_cancels", "execution_mismatches", "dropped_days", "flagged"].map(String::from);
    tables::write_table(&out_path(cfg, CLASSIFY_DIAGNOSTICS), &header, rows).at(Stage::Classify)?;
    info!("classify: {} stocks, {} days dropped", series.len(), build.dropped_days.len());
    Ok(series.len())
}

/// Copies externally supplied bar tables into the run, checking each.
pub fn stage_import_bars(cfg: &RunConfig) -> StageResult<usize> {
    let src = cfg
        .input
        .bars
        .as_deref()
        .ok_or_else(|| Error::Config("input.bars is not set".into()))
        .at(Stage::Ingest)?;
    let series = tables::read_bars_dir(src).at(Stage::Ingest)?;
    let bars = out_path(cfg, BARS_DIR);
    reset_dir(&bars).at(Stage::Ingest)?;
    for s in &series {
        tables::write_bars(&bars, s).at(Stage::Ingest)?;
    }
    Ok(series.len())
}

pub fn load_scenario(cfg: &RunConfig) -> Result<ScenarioSpec> {
    let path = cfg
        .input
        .scenario
        .as_deref()
        .ok_or_else(|| Error::Config("input.scenario is not set".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut spec = ScenarioSpec::from_toml(&text)?;
    if let Some(seed) = cfg.synth.seed {
        spec.seed = seed;
    }
    Ok(spec)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value).expect("truth serializes");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Generates the scenario's bars, its order stream if it has one, and the
/// ground truth of both.
pub fn stage_synth(cfg: &RunConfig) -> StageResult<usize> {
    let spec = load_scenario(cfg).at(Stage::Synth)?;
    let (series, truth) = generate_bars(&spec).at(Stage::Synth)?;
    let bars = out_path(cfg, BARS_DIR);
    reset_dir(&bars).at(Stage::Synth)?;
    reset_dir(&out_path(cfg, "synth")).at(Stage::Synth)?;
    for s in &series {
        tables::write_bars(&bars, s).at(Stage::Synth)?;
    }
    write_json(&out_path(cfg, SYNTH_TRUTH), &truth).at(Stage::Synth)?;
    if spec.order_flow.is_some() {
        let (events, order_truth) = generate_orderflow(&spec).at(Stage::Synth)?;
        write_orders(&out_path(cfg, SYNTH_ORDERS), &events).at(Stage::Synth)?;
        write_json(&out_path(cfg, SYNTH_ORDER_TRUTH), &order_truth).at(Stage::Synth)?;
    }
    info!("synth: {} stocks, {} injected events", series.len(), truth.events.len());
    Ok(series.len())
}

fn read_bars(cfg: &RunConfig, stage: Stage) -> StageResult<Vec<crate::ingest::BarSeries>> {
    tables::read_bars_dir(&out_path(cfg, BARS_DIR)).at(stage)
}

/// Runs the filter over every stock; returns the deduplicated events.
pub fn stage_detect(cfg: &RunConfig) -> StageResult<Vec<ExtremeEvent>> {
    let f = &cfg.detect;
    f.validate().at(Stage::Detect)?;
    info!(
        "detect: threshold_abs={} window_max={} volatility_multiple={} opening_exclusion={} closing_exclusion={} baseline={}",
        f.threshold_abs,
        f.window_max,
        f.volatility_multiple,
        f.opening_exclusion,
        f.closing_exclusion,
        serde_json::to_value(f.baseline).expect("baseline serializes").as_str().unwrap_or_default()
    );
    let mut candidates = Vec::new();
    for s in read_bars(cfg, Stage::Detect)? {
        let r = ReturnSeries::from_bars(&s).at(Stage::Detect)?;
        candidates.extend(detect_events(&r, f).at(Stage::Detect)?);
    }
    let events = deduplicate_first_per_day(&candidates);
    reset_dir(&out_path(cfg, "detect")).at(Stage::Detect)?;
    tables::write_events(&out_path(cfg, DETECT_CANDIDATES), &candidates).at(Stage::Detect)?;
    tables::write_events(&out_path(cfg, DETECT_EVENTS), &events).at(Stage::Detect)?;
    let n = |sign| events.iter().filter(|e| e.sign == sign).count();
    info!(
        "detect: {} candidate minutes, events positive: {}, negative: {}",
        candidates.len(),
        n(EventSign::Positive),
        n(EventSign::Negative)
    );
    Ok(events)
}

/// Deseasonalizes every selected quantity, averages the event-aligned
/// trajectories per (sign, quantity) and writes curves, peaks and the
/// aligned cumulative return.
pub fn stage_study(cfg: &RunConfig) -> StageResult<Vec<GroupRow>> {
    let quantities = cfg.study.resolve().at(Stage::Study)?;
    let events = tables::read_events(&out_path(cfg, DETECT_EVENTS)).at(Stage::Study)?;
    let series = read_bars(cfg, Stage::Study)?;
    let mut groups: BTreeMap<(EventSign, Quantity), Vec<EventTrajectory>> = BTreeMap::new();
    let mut returns = Vec::new();
    for s in &series {
        returns.push(ReturnSeries::from_bars(s).at(Stage::Study)?);
        let mine: Vec<ExtremeEvent> = events.iter().filter(|e| e.stock_id == s.stock_id).cloned().collect();
        if mine.is_empty() {
            continue;
        }
        for q in &quantities {
            let name = q.name();
            let grid = q.grid(s).at(Stage::Deseason)?;
            let x = if q.is_raw() {
                grid
            } else {
                let label = format!("{}/{name}", s.stock_id);
                let pattern = if cfg.deseason.exclude_event_days {
                    estimate_pattern_excluding(&grid, &label, &event_window_days(&mine, &grid))
                } else {
                    estimate_pattern(&grid, &label)
                };
                deseasonalize(&grid, &pattern).at(Stage::Deseason)?
            };
            for e in &mine {
                let tr = extract_trajectory(e, &x, &name).at(Stage::Study)?;
                groups.entry((e.sign, *q)).or_default().push(tr);
            }
        }
    }

    let dir = out_path(cfg, "study");
    reset_dir(&dir).at(Stage::Study)?;
    let curves = out_path(cfg, STUDY_CURVES);
    std::fs::create_dir_all(&curves).map_err(|e| Error::io(&curves, e)).at(Stage::Study)?;
    let mut rows = Vec::new();
    let mut peak_rows = Vec::new();
    for sign in EventSign::ALL {
        let mut averages = Vec::new();
        for q in &quantities {
            let Some(trs) = groups.get(&(sign, *q)) else { continue };
            let name = q.name();
            let avg = group_average(&group_id(sign, &name), trs).at(Stage::Study)?;
            tables::write_curve(&curves, &avg).at(Stage::Study)?;
            rows.push(GroupRow {
                group: avg.group.clone(),
                sign,
                quantity: name,
                n_events: avg.n_events,
                peak: find_peak(&avg).ok(),
            });
            averages.push(avg);
        }
        if !averages.is_empty() {
            peak_rows.extend(peak_table(sign, &averages));
        }
        if events.iter().any(|e| e.sign == sign) {
            let c = aligned_cumulative_return(sign, &events, &returns).at(Stage::Study)?;
            tables::write_cumret(&out_path(cfg, &cumret_file(sign)), &c).at(Stage::Study)?;
        }
    }
    tables::write_groups(&out_path(cfg, STUDY_GROUPS), &rows).at(Stage::Study)?;
    tables::write_peaks(&out_path(cfg, STUDY_PEAKS), &peak_rows).at(Stage::Study)?;
    info!("study: {} group curves from {} events", rows.len(), events.len());
    Ok(rows)
}

/// Fits the power-law relaxation of every deseasonalized group curve.
/// Refused fits are recorded with their reason rather than failing the run.
pub fn stage_fit(cfg: &RunConfig) -> StageResult<Vec<FitRow>> {
    let groups = tables::read_groups(&out_path(cfg, STUDY_GROUPS)).at(Stage::Fit)?;
    let curves = out_path(cfg, STUDY_CURVES);
    let mut rows = Vec::new();
    let mut capped = 0;
    for g in &groups {
        let q: Quantity = g.quantity.parse().at(Stage::Fit)?;
        if q.is_raw() {
            continue;
        }
        let avg = tables::read_curve(&curves, &g.group, g.n_events).at(Stage::Fit)?;
        let requested = cfg.fit.range_for(&g.group).at(Stage::Fit)?;
        let outcome = match fit_power_law(&excess(&avg), requested) {
            Ok(fit) => {
                capped += usize::from(fit.capped());
                Ok(fit)
            }
            Err(Error::FitRefused(why)) => Err(why),
            Err(e) => return Err(e).at(Stage::Fit),
        };
        rows.push(FitRow {
            group: g.group.clone(),
            requested,
            outcome,
        });
    }
    let dir = out_path(cfg, "fit");
    reset_dir(&dir).at(Stage::Fit)?;
    tables::write_fits(&out_path(cfg, FIT_TABLE), &rows).at(Stage::Fit)?;
    info!(
        "fit: {} groups fitted, {} refused, {} ranges capped at the {}-minute horizon",
        rows.iter().filter(|r| r.outcome.is_ok()).count(),
        rows.iter().filter(|r| r.outcome.is_err()).count(),
        capped,
        crate::study::POST_EVENT
    );
    Ok(rows)
}

/// Writes `manifest.txt` over everything currently in the output directory.
pub fn write_manifest(cfg: &RunConfig) -> StageResult<Manifest> {
    let m = Manifest::build(&cfg.output).at(Stage::Report)?;
    m.write(&cfg.output).at(Stage::Report)?;
    Ok(m)
}

const RUN_OUTPUTS: [&str; 9] = [
    "ingest",
    "classify",
    BARS_DIR,
    "synth",
    "detect",
    "study",
    "fit",
    PARAMETERS_FILE,
    MANIFEST_FILE,
];

/// Checks the config, then runs every stage in order and writes the
/// manifest.
pub fn run_pipeline(cfg: &RunConfig) -> StageResult<Manifest> {
    cfg.validate().at(Stage::Config)?;
    cfg.check_paths().at(Stage::Ingest)?;
    std::fs::create_dir_all(&cfg.output)
        .map_err(|e| Error::io(&cfg.output, e))
        .at(Stage::Config)?;
    for name in RUN_OUTPUTS {
        let p = cfg.output.join(name);
        let removed = if p.is_dir() {
            std::fs::remove_dir_all(&p)
        } else if p.exists() {
            std::fs::remove_file(&p)
        } else {
            Ok(())
        };
        removed.map_err(|e| Error::io(&p, e)).at(Stage::Config)?;
    }
    let params = toml::to_string(&cfg.parameters()).expect("parameters serialize");
    let p = out_path(cfg, PARAMETERS_FILE);
    std::fs::write(&p, params).map_err(|e| Error::io(&p, e)).at(Stage::Config)?;

    if cfg.input.orders.is_some() {
        stage_ingest(cfg)?;
        stage_classify(cfg)?;
    } else if cfg.input.bars.is_some() {
        stage_import_bars(cfg)?;
    } else {
        stage_synth(cfg)?;
    }
    stage_detect(cfg)?;
    stage_study(cfg)?;
    stage_fit(cfg)?;
    write_manifest(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct_and_nonzero() {
        let all = [
            Stage::Config,
            Stage::Ingest,
            Stage::Classify,
            Stage::Synth,
            Stage::Detect,
            Stage::Deseason,
            Stage::Study,
            Stage::Fit,
            Stage::Report,
        ];
        let mut codes: Vec<i32> = all.iter().map(|s| s.exit_code()).collect();
        assert!(codes.iter().all(|c| *c > 1));
        codes.sort();
        codes.dedup();
        assert_eq!(codes.len(), all.len());
    }

    #[test]
    fn missing_input_fails_in_ingest() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig {
            output: dir.path().join("out"),
            ..RunConfig::default()
        };
        cfg.input.orders = Some(dir.path().join("absent.csv"));
        let err = run_pipeline(&cfg).unwrap_err();
        assert_eq!(err.stage, Stage::Ingest);
        cfg.detect.window_max = 0;
        assert_eq!(run_pipeline(&cfg).unwrap_err().stage, Stage::Config);
    }
}
