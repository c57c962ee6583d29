//! Synthetic data with known ground truth.
//!
//! [`generate_bars`] produces minute bars whose quantities are a U-shaped
//! intraday profile times mean-one log-normal noise, with deterministic
//! event overlays ([`EventShape`]) and price moves injected at chosen
//! minutes. [`generate_orderflow`] produces a tick-level order stream in the
//! ingest format together with the class label of every logical order.
//! Output depends only on the scenario, seed included.

mod bars;
mod orderflow;
mod shape;

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::detect::EventSign;
use crate::error::{Error, Result};
use crate::ingest::clock::MINUTES_PER_DAY;
use crate::types::{Aggressiveness, FlowKey, Side};

pub use bars::{generate_bars, BarTruth, TruthEvent};
pub use orderflow::{generate_orderflow, OrderFlowSpec, OrderFlowTruth, RateTarget, TruthLabel};
pub use shape::{EventShape, OVERLAY_FROM, OVERLAY_TO};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub stocks: usize,
    pub days: usize,
    /// First trading day; weekends are skipped.
    pub start_date: NaiveDate,
    pub initial_price: f64,
    /// Per-minute log-return standard deviation where the volatility profile is 1.
    pub return_sigma: f64,
    /// Log-standard deviation of the mean-one multiplicative noise.
    pub noise_sigma: f64,
    /// Shares per minute summed over all order classes where the profile is 1.
    pub base_volume: f64,
    /// Orders per minute summed over all order classes where the profile is 1.
    pub base_count: f64,
    pub base_spread: f64,
    pub profiles: Profiles,
    pub templates: BTreeMap<String, EventTemplate>,
    pub events: Vec<InjectedEvent>,
    pub event_plan: Option<EventPlan>,
    pub order_flow: Option<OrderFlowSpec>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            seed: 1,
            stocks: 1,
            days: 20,
            start_date: NaiveDate::from_ymd_opt(2003, 1, 2).expect("valid date"),
            initial_price: 10.0,
            return_sigma: 0.0005,
            noise_sigma: 0.3,
            base_volume: 20_000.0,
            base_count: 40.0,
            base_spread: 0.02,
            profiles: Profiles::default(),
            templates: BTreeMap::new(),
            events: Vec::new(),
            event_plan: None,
            order_flow: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Profiles {
    pub volatility: Profile,
    pub volume: Profile,
    pub spread: Profile,
}

impl Default for Profiles {
    fn default() -> Self {
        Profiles {
            volatility: Profile::u_shape(1.5),
            volume: Profile::u_shape(2.0),
            spread: Profile::u_shape(0.5),
        }
    }
}

/// Intraday profile: explicit 240 values, or `1 + depth·u²` with `u` running
/// from −1 at the open to 1 at the close.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Profile {
    pub depth: f64,
    pub values: Option<Vec<f64>>,
}

impl Default for Profile {
    fn default() -> Self {
        Profile::u_shape(0.0)
    }
}

impl Profile {
    pub fn u_shape(depth: f64) -> Self {
        Profile { depth, values: None }
    }

    pub fn resolve(&self) -> Vec<f64> {
        match &self.values {
            Some(v) => v.clone(),
            None => (1..=MINUTES_PER_DAY)
                .map(|m| {
                    let half = (MINUTES_PER_DAY as f64 - 1.0) / 2.0;
                    let u = (m as f64 - 1.0 - half) / half;
                    1.0 + self.depth * u * u
                })
                .collect(),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let v = self.resolve();
        if v.len() != MINUTES_PER_DAY {
            return Err(Error::Scenario(format!("profile {name} has {} values, expected 240", v.len())));
        }
        if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::Scenario(format!("profile {name} must be positive")));
        }
        Ok(())
    }
}

/// Price path and overlays of one event kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventTemplate {
    /// Log move at `t = 0` in the event's direction.
    pub jump: f64,
    /// Additional move spread evenly over the `ramp_minutes` before `t = 0`.
    pub pre_drift: f64,
    pub ramp_minutes: usize,
    /// Move against the event direction spread over `t = 1..=reversal_minutes`.
    pub reversal: f64,
    pub reversal_minutes: usize,
    pub volatility: Option<EventShape>,
    pub spread: Option<EventShape>,
    /// Applies to every order class without its own entry in `flows`.
    pub volume: Option<EventShape>,
    /// Keyed by `<side>_<aggressiveness>`, e.g. `buy_filled`; volume and count.
    pub flows: BTreeMap<String, EventShape>,
    /// Count-only overrides, same keys as `flows`.
    pub counts: BTreeMap<String, EventShape>,
}

impl Default for EventTemplate {
    fn default() -> Self {
        EventTemplate {
            jump: 0.05,
            pre_drift: 0.0,
            ramp_minutes: 0,
            reversal: 0.0,
            reversal_minutes: 0,
            volatility: None,
            spread: None,
            volume: None,
            flows: BTreeMap::new(),
            counts: BTreeMap::new(),
        }
    }
}

/// Parses `<side>_<aggressiveness>`.
pub fn parse_flow_class(s: &str) -> Result<(Side, Aggressiveness)> {
    let (side, aggr) = s
        .split_once('_')
        .ok_or_else(|| Error::Scenario(format!("flow class {s:?} is not <side>_<aggressiveness>")))?;
    let side = match side {
        "buy" => Side::Buy,
        "sell" => Side::Sell,
        _ => return Err(Error::Scenario(format!("flow class {s:?}: unknown side"))),
    };
    let aggr = aggr
        .parse::<Aggressiveness>()
        .map_err(|_| Error::Scenario(format!("flow class {s:?}: unknown aggressiveness")))?;
    Ok((side, aggr))
}

impl EventTemplate {
    fn validate(&self, name: &str) -> Result<()> {
        if !(self.jump > 0.0 && self.jump.is_finite()) {
            return Err(Error::Scenario(format!("template {name}: jump must be positive")));
        }
        if self.pre_drift < 0.0 || self.reversal < 0.0 {
            return Err(Error::Scenario(format!("template {name}: drift and reversal are magnitudes")));
        }
        if (self.pre_drift > 0.0) != (self.ramp_minutes > 0) || (self.reversal > 0.0) != (self.reversal_minutes > 0) {
            return Err(Error::Scenario(format!("template {name}: a move needs a positive duration and vice versa")));
        }
        for (layer, shape) in [("volatility", &self.volatility), ("spread", &self.spread), ("volume", &self.volume)] {
            if let Some(s) = shape {
                s.validate(&format!("{name}.{layer}"))?;
            }
        }
        for (key, s) in self.flows.iter().chain(&self.counts) {
            parse_flow_class(key)?;
            s.validate(&format!("{name}.{key}"))?;
        }
        Ok(())
    }

    /// Overlay shape of the volume (or, with `count`, the number) of one class.
    pub fn flow_shape(&self, side: Side, aggr: Aggressiveness, count: bool) -> Option<&EventShape> {
        let key = format!("{}_{}", side.name(), aggr.name());
        (if count { self.counts.get(&key) } else { None })
            .or_else(|| self.flows.get(&key))
            .or(self.volume.as_ref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectedEvent {
    /// 0-based stock index.
    pub stock: usize,
    /// 0-based trading-day index.
    pub day: usize,
    pub minute: u16,
    pub sign: EventSign,
    pub template: String,
}

/// Spreads events over stock-days, at most one per stock-day and with at
/// least `spacing_days` between events of the same stock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventPlan {
    pub positive: usize,
    pub negative: usize,
    pub positive_template: String,
    pub negative_template: String,
    pub minute_lo: u16,
    pub minute_hi: u16,
    pub spacing_days: usize,
}

impl Default for EventPlan {
    fn default() -> Self {
        EventPlan {
            positive: 0,
            negative: 0,
            positive_template: "positive".into(),
            negative_template: "negative".into(),
            minute_lo: 30,
            minute_hi: 170,
            spacing_days: 3,
        }
    }
}

/// Default split of flow across the 16 classes: equal between sides and
/// investor classes; 6/20/60/14 percent across aggressiveness.
pub fn default_flow_share(key: FlowKey) -> f64 {
    let a = match key.aggressiveness {
        Aggressiveness::PartiallyFilled => 0.06,
        Aggressiveness::Filled => 0.20,
        Aggressiveness::Limit => 0.60,
        Aggressiveness::Canceled => 0.14,
    };
    a * 0.25
}

/// `n` consecutive weekdays from `start` (or the next weekday).
pub fn trading_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    start
        .iter_days()
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .take(n)
        .collect()
}

pub fn stock_id(index: usize) -> String {
    format!("{:06}", index + 1)
}

impl ScenarioSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ScenarioSpec = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |why: String| Err(Error::Scenario(why));
        if self.stocks == 0 || self.days == 0 {
            return bad("at least one stock and one day".into());
        }
        for (name, v) in [
            ("initial_price", self.initial_price),
            ("base_volume", self.base_volume),
            ("base_count", self.base_count),
            ("base_spread", self.base_spread),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(self.return_sigma >= 0.0 && self.noise_sigma >= 0.0) {
            return bad("noise scales must be non-negative".into());
        }
        self.profiles.volatility.validate("volatility")?;
        self.profiles.volume.validate("volume")?;
        self.profiles.spread.validate("spread")?;
        for (name, t) in &self.templates {
            t.validate(name)?;
        }
        for e in &self.events {
            let t = self
                .templates
                .get(&e.template)
                .ok_or_else(|| Error::Scenario(format!("unknown template {:?}", e.template)))?;
            if e.stock >= self.stocks || e.day >= self.days {
                return bad(format!("event at stock {} day {} is outside the scenario", e.stock, e.day));
            }
            if (e.minute as usize) < t.ramp_minutes + 2 || e.minute as usize > MINUTES_PER_DAY {
                return bad(format!("event minute {} leaves no room for its ramp", e.minute));
            }
        }
        if let Some(p) = &self.event_plan {
            for (count, name) in [(p.positive, &p.positive_template), (p.negative, &p.negative_template)] {
                if count > 0 && !self.templates.contains_key(name) {
                    return bad(format!("event plan refers to unknown template {name:?}"));
                }
            }
            if p.minute_lo < 2 || p.minute_hi < p.minute_lo || p.minute_hi as usize > MINUTES_PER_DAY || p.spacing_days == 0 {
                return bad("event plan minutes or spacing out of range".into());
            }
        }
        if let Some(of) = &self.order_flow {
            of.validate()?;
        }
        Ok(())
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        trading_days(self.start_date, self.days)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weekdays_only() {
        let d = trading_days(NaiveDate::from_ymd_opt(2003, 1, 2).unwrap(), 5);
        let names: Vec<String> = d.iter().map(|d| d.format("%a %d").to_string()).collect();
        assert_eq!(names, ["Thu 02", "Fri 03", "Mon 06", "Tue 07", "Wed 08"]);
    }

    #[test]
    fn profile_shapes() {
        let p = Profile::u_shape(2.0).resolve();
        assert_eq!(p.len(), 240);
        assert!((p[0] - 3.0).abs() < 1e-12 && (p[239] - 3.0).abs() < 1e-12);
        assert!(p[119] < 1.001);
        assert!(Profile { depth: 0.0, values: Some(vec![1.0; 10]) }.validate("x").is_err());
    }

    #[test]
    fn shares_sum_to_one() {
        let s: f64 = FlowKey::all().map(default_flow_share).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn toml_round_trip_and_validation() {
        let text = r#"
            seed = 9
            stocks = 2
            days = 30
            [templates.positive]
            jump = 0.05
            [templates.positive.volume]
            peak = 12.0
            t_max = 0
            decay = 6.0
            alpha = 0.47
            [templates.positive.flows.buy_filled]
            peak = 20.0
            t_max = -1
            decay = 10.0
            alpha = 0.5
            [[events]]
            stock = 1
            day = 4
            minute = 100
            sign = "positive"
            template = "positive"
        "#;
        let spec = ScenarioSpec::from_toml(text).unwrap();
        assert_eq!(spec.seed, 9);
        let again = ScenarioSpec::from_toml(&toml::to_string(&spec).unwrap()).unwrap();
        assert_eq!(spec, again);
        let t = &spec.templates["positive"];
        assert_eq!(t.flow_shape(Side::Buy, Aggressiveness::Filled, true).unwrap().t_max, -1);
        assert_eq!(t.flow_shape(Side::Sell, Aggressiveness::Limit, false).unwrap().t_max, 0);
        assert!(ScenarioSpec::from_toml(&text.replace("day = 4", "day = 40")).is_err());
        assert!(ScenarioSpec::from_toml(&text.replace("alpha = 0.47", "alpha = -0.47")).is_err());
        assert!(ScenarioSpec::from_toml("bogus = 1").is_err());
        // Only templates the plan actually draws from must exist.
        let planned = format!("{text}\n[event_plan]\npositive = 3\n");
        assert!(ScenarioSpec::from_toml(&planned).is_ok());
        assert!(ScenarioSpec::from_toml(&planned.replace("positive = 3", "negative = 3")).is_err());
        assert!(parse_flow_class("sell_canceled").is_ok());
        assert!(parse_flow_class("buy_everything").is_err());
    }
}
