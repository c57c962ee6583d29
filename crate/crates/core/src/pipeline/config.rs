use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detect::FilterConfig;
use crate::error::{Error, Result};
use crate::relax::FitRange;
use crate::study::Quantity;

/// Where the run's data comes from. Exactly one of `orders`, `bars` and
/// `scenario` is set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// Tick-level order stream.
    pub orders: Option<PathBuf>,
    /// Split/dividend adjustment table applied after classification.
    pub splits: Option<PathBuf>,
    /// Directory of minute-bar tables, skipping ingest and classify.
    pub bars: Option<PathBuf>,
    /// Synthetic scenario generated into the output directory.
    pub scenario: Option<PathBuf>,
    pub delimiter: Option<char>,
    pub enforce_board_lot: Option<bool>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeseasonConfig {
    /// Leave days holding an event window out of the pattern estimate.
    pub exclude_event_days: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    /// Quantity names; empty selects all of them.
    pub quantities: Vec<String>,
}

impl StudyConfig {
    pub fn resolve(&self) -> Result<Vec<Quantity>> {
        if self.quantities.is_empty() {
            return Ok(Quantity::all());
        }
        let mut q = self
            .quantities
            .iter()
            .map(|s| s.parse::<Quantity>())
            .collect::<Result<Vec<_>>>()?;
        q.sort();
        q.dedup();
        Ok(q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub lo: usize,
    pub hi: usize,
    /// Per-group `[lo, hi]` keyed by `<sign>/<quantity>`.
    pub ranges: BTreeMap<String, [usize; 2]>,
}

impl Default for FitConfig {
    fn default() -> Self {
        let r = FitRange::default();
        FitConfig {
            lo: r.lo,
            hi: r.hi,
            ranges: BTreeMap::new(),
        }
    }
}

impl FitConfig {
    pub fn range_for(&self, group: &str) -> Result<FitRange> {
        match self.ranges.get(group) {
            Some([lo, hi]) => FitRange::new(*lo, *hi),
            None => FitRange::new(self.lo, self.hi),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Overrides the scenario's seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output: PathBuf,
    pub input: InputConfig,
    pub detect: FilterConfig,
    pub deseason: DeseasonConfig,
    pub study: StudyConfig,
    pub fit: FitConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            output: PathBuf::from("out"),
            input: InputConfig::default(),
            detect: FilterConfig::default(),
            deseason: DeseasonConfig::default(),
            study: StudyConfig::default(),
            fit: FitConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

/// The analysis parameters of a run, free of paths, echoed into the
/// output so identical runs in different directories hash identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunParameters {
    pub detect: FilterConfig,
    pub deseason: DeseasonConfig,
    pub study: StudyConfig,
    pub fit: FitConfig,
    pub synth: SynthConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Reads a config file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut cfg.output);
        for p in [
            &mut cfg.input.orders,
            &mut cfg.input.splits,
            &mut cfg.input.bars,
            &mut cfg.input.scenario,
        ]
        .into_iter()
        .flatten()
        {
            rebase(p);
        }
        Ok(cfg)
    }

    pub fn parameters(&self) -> RunParameters {
        RunParameters {
            detect: self.detect.clone(),
            deseason: self.deseason,
            study: self.study.clone(),
            fit: self.fit.clone(),
            synth: self.synth,
        }
    }

    /// Checks values and the number of input sources; paths are checked by
    /// [`RunConfig::check_paths`].
    pub fn validate(&self) -> Result<()> {
        self.detect.validate()?;
        self.study.resolve()?;
        FitRange::new(self.fit.lo, self.fit.hi)?;
        for group in self.fit.ranges.keys() {
            self.fit.range_for(group)?;
        }
        let sources = [&self.input.orders, &self.input.bars, &self.input.scenario]
            .iter()
            .filter(|p| p.is_some())
            .count();
        if sources != 1 {
            return Err(Error::Config(format!(
                "exactly one of input.orders, input.bars, input.scenario must be set, found {sources}"
            )));
        }
        if self.input.splits.is_some() && self.input.orders.is_none() {
            return Err(Error::Config("input.splits applies only to input.orders".into()));
        }
        Ok(())
    }

    pub fn check_paths(&self) -> Result<()> {
        for p in [&self.input.orders, &self.input.splits, &self.input.bars, &self.input.scenario]
            .into_iter()
            .flatten()
        {
            if !p.exists() {
                return Err(Error::io(p, std::io::Error::from(std::io::ErrorKind::NotFound)));
            }
        }
        Ok(())
    }
}
