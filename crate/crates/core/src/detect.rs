//! Extreme intraday price changes.
//!
//! A window of length `Δt` ending at intraday minute `t` covers the returns
//! `r(τ)` for `τ ∈ (t−Δt, t]`, so its cumulative return is
//! `R = ln m(t) − ln m(t−Δt)`. Windows never cross the overnight gap.
//! An end minute is an event when, for some `Δt ≤ window_max`,
//! `|R| ≥ threshold_abs` and `|R| ≥ volatility_multiple · v̄(Δt)`, with
//! `v̄(Δt)` the stock's average realized volatility over windows of that
//! length. The event is reported at the smallest such `Δt`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::bars::BarSeries;
use crate::ingest::clock::MINUTES_PER_DAY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolatilityBaseline {
    /// Mean over every window of the given length in the sample.
    #[default]
    AllWindows,
    /// Mean over windows of the given length ending at the same clock minute.
    SameClockTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub threshold_abs: f64,
    pub window_max: usize,
    pub volatility_multiple: f64,
    pub opening_exclusion: usize,
    pub closing_exclusion: usize,
    pub baseline: VolatilityBaseline,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            threshold_abs: 0.04,
            window_max: 60,
            volatility_multiple: 6.0,
            opening_exclusion: 5,
            closing_exclusion: 60,
            baseline: VolatilityBaseline::AllWindows,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_abs > 0.0 && self.threshold_abs.is_finite()) {
            return Err(Error::Config(format!("threshold_abs must be positive, got {}", self.threshold_abs)));
        }
        if self.window_max < 1 || self.window_max >= MINUTES_PER_DAY {
            return Err(Error::Config(format!(
                "window_max must lie in [1, {}], got {}",
                MINUTES_PER_DAY - 1,
                self.window_max
            )));
        }
        if !(self.volatility_multiple > 0.0 && self.volatility_multiple.is_finite()) {
            return Err(Error::Config(format!(
                "volatility_multiple must be positive, got {}",
                self.volatility_multiple
            )));
        }
        if self.opening_exclusion + self.closing_exclusion >= MINUTES_PER_DAY {
            return Err(Error::Config("exclusions leave no admissible minute".into()));
        }
        Ok(())
    }

    /// Admissible event minutes, inclusive.
    pub fn minute_range(&self) -> (usize, usize) {
        (self.opening_exclusion + 1, MINUTES_PER_DAY - self.closing_exclusion)
    }
}

/// Log mid-prices and one-minute log returns on the day × minute grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub stock_id: String,
    pub days: Vec<NaiveDate>,
    pub log_mid: Vec<f64>,
    /// `NaN` at the first minute of every day.
    pub returns: Vec<f64>,
}

impl ReturnSeries {
    pub fn from_mids(stock_id: impl Into<String>, days: Vec<NaiveDate>, mids: &[f64]) -> Result<Self> {
        if mids.len() != days.len() * MINUTES_PER_DAY {
            return Err(Error::Dimension(format!("{} mid prices for {} days", mids.len(), days.len())));
        }
        let log_mid: Vec<f64> = mids.iter().map(|m| if *m > 0.0 { m.ln() } else { f64::NAN }).collect();
        let mut returns = vec![f64::NAN; log_mid.len()];
        for (day, out) in log_mid.chunks(MINUTES_PER_DAY).zip(returns.chunks_mut(MINUTES_PER_DAY)) {
            for i in 1..MINUTES_PER_DAY {
                out[i] = day[i] - day[i - 1];
            }
        }
        Ok(ReturnSeries {
            stock_id: stock_id.into(),
            days,
            log_mid,
            returns,
        })
    }

    pub fn from_bars(series: &BarSeries) -> Result<Self> {
        let mids: Vec<f64> = series.bars.iter().map(|b| b.mid_price).collect();
        Self::from_mids(series.stock_id.clone(), series.dates(), &mids)
    }

    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    /// Returns of day `d`; index `i` holds the return of minute `i + 1`.
    pub fn day(&self, d: usize) -> &[f64] {
        &self.returns[d * MINUTES_PER_DAY..(d + 1) * MINUTES_PER_DAY]
    }
}

/// `sqrt(Σ r²)` over a window inside one day.
pub fn realized_volatility(returns: &[f64]) -> f64 {
    returns.iter().map(|r| r * r).sum::<f64>().sqrt()
}

/// Average of [`realized_volatility`] over every window of length `window`
/// in the sample; `None` when no window fits.
pub fn average_window_volatility(series: &ReturnSeries, window: usize) -> Option<f64> {
    let b = VolatilityTable::build(series, window, VolatilityBaseline::AllWindows);
    b.get(window, MINUTES_PER_DAY)
}

/// Precomputed `v̄(Δt)` for `Δt = 1..=window_max`, either pooled over all end
/// minutes or per end minute.
#[derive(Debug, Clone, PartialEq)]
pub struct VolatilityTable {
    pub mode: VolatilityBaseline,
    pub window_max: usize,
    /// AllWindows: `[Δt−1]`. SameClockTime: `[(Δt−1)·240 + t−1]`.
    values: Vec<f64>,
}

impl VolatilityTable {
    pub fn build(series: &ReturnSeries, window_max: usize, mode: VolatilityBaseline) -> Self {
        let per_minute = mode == VolatilityBaseline::SameClockTime;
        let cells = if per_minute { window_max * MINUTES_PER_DAY } else { window_max };
        let mut sums = vec![0.0f64; cells];
        let mut counts = vec![0usize; cells];
        for d in 0..series.n_days() {
            let r = series.day(d);
            for t in 2..=MINUTES_PER_DAY {
                let mut s = 0.0;
                for w in 1..=window_max.min(t - 1) {
                    let x = r[t - w];
                    if !x.is_finite() {
                        break;
                    }
                    s += x * x;
                    let cell = if per_minute { (w - 1) * MINUTES_PER_DAY + t - 1 } else { w - 1 };
                    sums[cell] += s.sqrt();
                    counts[cell] += 1;
                }
            }
        }
        let values = sums
            .iter()
            .zip(&counts)
            .map(|(s, n)| if *n > 0 { s / *n as f64 } else { f64::NAN })
            .collect();
        VolatilityTable { mode, window_max, values }
    }

    /// `v̄` for a window of length `window` ending at `minute`.
    pub fn get(&self, window: usize, minute: usize) -> Option<f64> {
        if window == 0 || window > self.window_max {
            return None;
        }
        let v = match self.mode {
            VolatilityBaseline::AllWindows => self.values[window - 1],
            VolatilityBaseline::SameClockTime => self.values[(window - 1) * MINUTES_PER_DAY + minute - 1],
        };
        v.is_finite().then_some(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventSign {
    Positive,
    Negative,
}

impl EventSign {
    pub const ALL: [EventSign; 2] = [EventSign::Positive, EventSign::Negative];

    pub fn of(r: f64) -> EventSign {
        if r > 0.0 {
            EventSign::Positive
        } else {
            EventSign::Negative
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EventSign::Positive => "positive",
            EventSign::Negative => "negative",
        }
    }
}

impl fmt::Display for EventSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventSign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive" => Ok(EventSign::Positive),
            "negative" => Ok(EventSign::Negative),
            _ => Err(Error::malformed("event sign", s)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeEvent {
    pub stock_id: String,
    pub date: NaiveDate,
    /// Position of `date` in the stock's sample.
    pub day_index: usize,
    /// Intraday index of the window end; `t = 0` of the event.
    pub minute: u16,
    pub sign: EventSign,
    pub window: u16,
    pub cumulative_return: f64,
}

/// Every admissible end minute that passes both filters, reported at its
/// smallest passing window, in (day, minute) order.
pub fn detect_events(series: &ReturnSeries, config: &FilterConfig) -> Result<Vec<ExtremeEvent>> {
    config.validate()?;
    let table = VolatilityTable::build(series, config.window_max, config.baseline);
    if config.baseline == VolatilityBaseline::AllWindows {
        let missing: Vec<usize> = (1..=config.window_max).filter(|w| table.get(*w, 1).is_none()).collect();
        if !missing.is_empty() {
            warn!(
                "{}: no admissible window of length {:?}; relative filter disabled there",
                series.stock_id, missing
            );
        }
    }
    Ok(detect_with_table(series, config, &table))
}

pub fn detect_with_table(series: &ReturnSeries, config: &FilterConfig, table: &VolatilityTable) -> Vec<ExtremeEvent> {
    let (first, last) = config.minute_range();
    let mut events = Vec::new();
    for d in 0..series.n_days() {
        let r = series.day(d);
        for t in first..=last {
            let mut cum = 0.0;
            for w in 1..=config.window_max.min(t - 1) {
                let x = r[t - w];
                if !x.is_finite() {
                    break;
                }
                cum += x;
                if passes(cum, w, t, config, table) {
                    events.push(ExtremeEvent {
                        stock_id: series.stock_id.clone(),
                        date: series.days[d],
                        day_index: d,
                        minute: t as u16,
                        sign: EventSign::of(cum),
                        window: w as u16,
                        cumulative_return: cum,
                    });
                    break;
                }
            }
        }
    }
    events
}

/// Both filters for one window. A missing baseline disables the relative one.
pub fn passes(cum: f64, window: usize, minute: usize, config: &FilterConfig, table: &VolatilityTable) -> bool {
    let a = cum.abs();
    if a < config.threshold_abs {
        return false;
    }
    match table.get(window, minute) {
        Some(v) => a >= config.volatility_multiple * v,
        None => true,
    }
}

/// Keeps the earliest event of every (stock, day); order is preserved.
pub fn deduplicate_first_per_day(events: &[ExtremeEvent]) -> Vec<ExtremeEvent> {
    let mut sorted: Vec<&ExtremeEvent> = events.iter().collect();
    sorted.sort_by(|a, b| (&a.stock_id, a.date, a.minute).cmp(&(&b.stock_id, b.date, b.minute)));
    let mut seen = HashSet::new();
    let keep: HashSet<(&str, NaiveDate, u16)> = sorted
        .into_iter()
        .filter(|e| seen.insert((e.stock_id.as_str(), e.date)))
        .map(|e| (e.stock_id.as_str(), e.date, e.minute))
        .collect();
    let mut emitted = HashSet::new();
    events
        .iter()
        .filter(|e| keep.contains(&(e.stock_id.as_str(), e.date, e.minute)) && emitted.insert((e.stock_id.as_str(), e.date)))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn days(n: usize) -> Vec<NaiveDate> {
        let start = NaiveDate::from_ymd_opt(2003, 3, 3).unwrap();
        (0..n).map(|i| start + chrono::Duration::days(i as i64)).collect()
    }

    fn from_returns(n_days: usize, mut r: impl FnMut(usize, usize) -> f64) -> ReturnSeries {
        let mut mids = Vec::new();
        for d in 0..n_days {
            let mut lm = 10f64.ln();
            for m in 1..=MINUTES_PER_DAY {
                if m > 1 {
                    lm += r(d, m);
                }
                mids.push(lm.exp());
            }
        }
        ReturnSeries::from_mids("000001", days(n_days), &mids).unwrap()
    }

    /// Exhaustive evaluation of both filters at every (t, Δt), with the
    /// baseline recomputed window by window.
    fn oracle(series: &ReturnSeries, cfg: &FilterConfig) -> Vec<(usize, usize, usize, f64)> {
        let n = series.n_days();
        let mut base = vec![None; cfg.window_max + 1];
        for (w, slot) in base.iter_mut().enumerate().skip(1) {
            let mut vs = Vec::new();
            for d in 0..n {
                for t in (w + 1)..=MINUTES_PER_DAY {
                    let win: Vec<f64> = (t - w + 1..=t).map(|tau| series.day(d)[tau - 1]).collect();
                    vs.push(realized_volatility(&win));
                }
            }
            if !vs.is_empty() {
                *slot = Some(vs.iter().sum::<f64>() / vs.len() as f64);
            }
        }
        let mut out = Vec::new();
        for d in 0..n {
            for t in cfg.opening_exclusion + 1..=MINUTES_PER_DAY - cfg.closing_exclusion {
                let passing: Vec<(usize, f64)> = (1..=cfg.window_max.min(t - 1))
                    .map(|w| {
                        let r: f64 = (t - w + 1..=t).map(|tau| series.day(d)[tau - 1]).sum();
                        (w, r)
                    })
                    .filter(|(w, r)| {
                        r.abs() >= cfg.threshold_abs && base[*w].is_none_or(|v| r.abs() >= cfg.volatility_multiple * v)
                    })
                    .collect();
                if let Some((w, r)) = passing.first() {
                    out.push((d, t, *w, *r));
                }
            }
        }
        out
    }

    fn noise(seed: u64, sigma: f64) -> impl FnMut(usize, usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, sigma).unwrap();
        move |_, _| n.sample(&mut rng)
    }

    #[test]
    fn defaults() {
        let c = FilterConfig::default();
        assert_eq!(
            (c.threshold_abs, c.window_max, c.volatility_multiple, c.opening_exclusion, c.closing_exclusion),
            (0.04, 60, 6.0, 5, 60)
        );
        assert_eq!(c.minute_range(), (6, 180));
        assert!(c.validate().is_ok());
        assert!(FilterConfig { threshold_abs: 0.0, ..c.clone() }.validate().is_err());
        assert!(FilterConfig { window_max: 0, ..c.clone() }.validate().is_err());
        assert!(FilterConfig { volatility_multiple: -1.0, ..c }.validate().is_err());
    }

    #[test]
    fn realized_volatility_examples() {
        assert_eq!(realized_volatility(&[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(realized_volatility(&[-0.013]), 0.013);
        assert!((realized_volatility(&[0.01, -0.02, 0.02]) - 0.03).abs() < 1e-15);
    }

    #[test]
    fn no_return_across_days() {
        let s = from_returns(3, |_, _| 0.001);
        for d in 0..3 {
            assert!(s.day(d)[0].is_nan());
            assert!((s.day(d)[1] - 0.001).abs() < 1e-12);
        }
    }

    #[test]
    fn average_volatility_closed_forms() {
        let r = 0.002;
        let s = from_returns(4, |_, _| r);
        for w in [1usize, 7, 60] {
            let v = average_window_volatility(&s, w).unwrap();
            assert!((v - r * (w as f64).sqrt()).abs() < 1e-12, "{w}: {v}");
        }
        let flat = from_returns(2, |_, _| 0.0);
        assert_eq!(average_window_volatility(&flat, 10), Some(0.0));
        assert_eq!(average_window_volatility(&flat, 240), None);
    }

    #[test]
    fn average_volatility_matches_exhaustive_scan() {
        let s = from_returns(5, noise(3, 0.001));
        for w in [1usize, 2, 15, 60] {
            let mut vs = Vec::new();
            for d in 0..5 {
                for t in w + 1..=MINUTES_PER_DAY {
                    vs.push(realized_volatility(&s.day(d)[t - w..t]));
                }
            }
            let brute = vs.iter().sum::<f64>() / vs.len() as f64;
            let fast = average_window_volatility(&s, w).unwrap();
            assert!((brute - fast).abs() <= 1e-12 * brute);
        }
    }

    #[test]
    fn flat_prices_have_no_events() {
        let s = from_returns(3, |_, _| 0.0);
        assert!(detect_events(&s, &FilterConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn single_jump_is_one_event_of_length_one() {
        let mut n = noise(8, 0.0005);
        let s = from_returns(10, |d, m| if d == 4 && m == 100 { 0.05 } else { n(d, m) });
        let raw = detect_events(&s, &FilterConfig::default()).unwrap();
        // Later end minutes whose windows still contain the jump also pass.
        assert!(raw.iter().all(|e| e.day_index == 4 && e.minute >= 100));
        let ev = deduplicate_first_per_day(&raw);
        assert_eq!(ev.len(), 1);
        let e = &ev[0];
        assert_eq!((e.day_index, e.minute, e.window, e.sign), (4, 100, 1, EventSign::Positive));
        let o = oracle(&s, &FilterConfig::default());
        assert_eq!(o.len(), raw.len());
        assert_eq!((o[0].0, o[0].1, o[0].2), (4, 100, 1));
    }

    #[test]
    fn slow_drift_fails_the_relative_filter() {
        // A 4.5% drift over 60 minutes against a 60-minute baseline near 1%.
        let sigma = 0.0105 / 60f64.sqrt();
        let mut n = noise(21, sigma);
        let s = from_returns(20, |d, m| match d {
            10 if (61..=120).contains(&m) => 0.045 / 60.0,
            10 => 0.0,
            _ => n(d, m),
        });
        let cfg = FilterConfig::default();
        let v60 = average_window_volatility(&s, 60).unwrap();
        assert!(v60 > 0.045 / 6.0, "baseline {v60}");
        assert!(detect_events(&s, &cfg).unwrap().is_empty());
        assert!(oracle(&s, &cfg).is_empty());
        let absolute_only = FilterConfig {
            volatility_multiple: 1e-9,
            ..cfg
        };
        assert!(!detect_events(&s, &absolute_only).unwrap().is_empty());
    }

    #[test]
    fn exclusions_are_respected() {
        let s = from_returns(3, |d, m| if d == 1 && (m == 3 || m == 200) { -0.08 } else { 0.0 });
        let ev = detect_events(&s, &FilterConfig::default()).unwrap();
        // The minute-3 drop is still inside windows ending at minutes 6..=62.
        assert!(ev.iter().all(|e| (6..=180).contains(&e.minute)));
        assert!(ev.iter().all(|e| e.minute <= 62));
        assert_eq!(ev.first().map(|e| (e.minute, e.window)), Some((6, 4)));
    }

    #[test]
    fn dedup_examples() {
        let mk = |day: u32, minute: u16| ExtremeEvent {
            stock_id: "000001".into(),
            date: NaiveDate::from_ymd_opt(2003, 3, day).unwrap(),
            day_index: day as usize,
            minute,
            sign: EventSign::Negative,
            window: 1,
            cumulative_return: -0.05,
        };
        let kept = deduplicate_first_per_day(&[mk(3, 90), mk(3, 40)]);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].minute, 40);
        assert_eq!(deduplicate_first_per_day(&[mk(3, 90), mk(4, 40)]).len(), 2);
        assert!(deduplicate_first_per_day(&[]).is_empty());
    }

    #[test]
    fn same_clock_baseline_is_per_minute() {
        let s = from_returns(4, |_, m| if m % 2 == 0 { 0.003 } else { 0.001 });
        let t = VolatilityTable::build(&s, 2, VolatilityBaseline::SameClockTime);
        assert!((t.get(1, 10).unwrap() - 0.003).abs() < 1e-12);
        assert!((t.get(1, 11).unwrap() - 0.001).abs() < 1e-12);
        assert_eq!(t.get(2, 2), None);
    }

    fn heavy_series(seed: u64, n_days: usize) -> ReturnSeries {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.002).unwrap();
        from_returns(n_days, move |_, _| {
            let x = normal.sample(&mut rng);
            if rng.random_bool(0.004) {
                x + rng.random_range(-0.05..0.05)
            } else {
                x
            }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn agrees_with_exhaustive_oracle(seed in any::<u64>(), n_days in 1usize..6, thr in 0.01f64..0.05) {
            let s = heavy_series(seed, n_days);
            let cfg = FilterConfig { threshold_abs: thr, ..FilterConfig::default() };
            let fast = detect_events(&s, &cfg).unwrap();
            let slow = oracle(&s, &cfg);
            prop_assert_eq!(fast.len(), slow.len());
            for (e, o) in fast.iter().zip(&slow) {
                prop_assert_eq!((e.day_index, e.minute as usize, e.window as usize), (o.0, o.1, o.2));
                prop_assert!((e.cumulative_return - o.3).abs() < 1e-12);
            }
        }

        #[test]
        fn minimality_sign_and_monotonicity(seed in any::<u64>(), thr in 0.01f64..0.04, bump in 0.0f64..0.03) {
            let s = heavy_series(seed, 3);
            let cfg = FilterConfig { threshold_abs: thr, ..FilterConfig::default() };
            let table = VolatilityTable::build(&s, cfg.window_max, cfg.baseline);
            let ev = detect_events(&s, &cfg).unwrap();
            for e in &ev {
                let r = s.day(e.day_index);
                let t = e.minute as usize;
                prop_assert!((6..=180).contains(&t));
                prop_assert_eq!(e.sign, EventSign::of(e.cumulative_return));
                let mut cum = 0.0;
                for w in 1..e.window as usize {
                    cum += r[t - w];
                    prop_assert!(!passes(cum, w, t, &cfg, &table));
                }
            }
            let higher = FilterConfig { threshold_abs: thr + bump, ..cfg };
            let ev_hi = detect_events(&s, &higher).unwrap();
            prop_assert!(ev_hi.len() <= ev.len());
            prop_assert!(deduplicate_first_per_day(&ev_hi).len() <= deduplicate_first_per_day(&ev).len());
        }
    }
}
