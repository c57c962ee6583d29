use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{default_flow_share, stock_id, EventShape, EventTemplate, InjectedEvent, ScenarioSpec, OVERLAY_FROM, OVERLAY_TO};
use crate::detect::EventSign;
use crate::error::{Error, Result};
use crate::ingest::bars::{BarSeries, MinuteBar};
use crate::ingest::clock::MINUTES_PER_DAY;
use crate::types::{FlowKey, FlowTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthEvent {
    pub stock_id: String,
    pub date: NaiveDate,
    pub day_index: usize,
    pub minute: u16,
    pub sign: EventSign,
    pub template: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarTruth {
    pub seed: u64,
    pub events: Vec<TruthEvent>,
    pub profiles: BTreeMap<String, Vec<f64>>,
    /// Relaxation exponent of every overlay, keyed `<template>/<layer>`.
    pub exponents: BTreeMap<String, f64>,
}

/// Explicit events followed by planned ones, sorted by (stock, day, minute).
fn resolve_events(spec: &ScenarioSpec) -> Result<Vec<InjectedEvent>> {
    let mut events = spec.events.clone();
    if let Some(plan) = &spec.event_plan {
        let wanted = plan.positive + plan.negative;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(u64::MAX);
        let mut slots: Vec<(usize, usize)> = (0..spec.stocks)
            .flat_map(|s| (1..spec.days.saturating_sub(1)).step_by(plan.spacing_days).map(move |d| (s, d)))
            .filter(|(s, d)| !events.iter().any(|e| e.stock == *s && e.day.abs_diff(*d) < plan.spacing_days))
            .collect();
        if slots.len() < wanted {
            return Err(Error::Scenario(format!(
                "event plan needs {wanted} stock-days but only {} are available",
                slots.len()
            )));
        }
        slots.shuffle(&mut rng);
        for (i, (stock, day)) in slots.into_iter().take(wanted).enumerate() {
            let (sign, template) = if i < plan.positive {
                (EventSign::Positive, plan.positive_template.clone())
            } else {
                (EventSign::Negative, plan.negative_template.clone())
            };
            let minute = rng.random_range(plan.minute_lo..=plan.minute_hi);
            events.push(InjectedEvent {
                stock,
                day,
                minute,
                sign,
                template,
            });
        }
    }
    events.sort_by_key(|e| (e.stock, e.day, e.minute));
    for e in &events {
        let t = &spec.templates[&e.template];
        if (e.minute as usize) < t.ramp_minutes + 2 {
            return Err(Error::Scenario(format!("planned event minute {} leaves no room for its ramp", e.minute)));
        }
    }
    Ok(events)
}

/// Additive event excess (`overlay − 1`) and deterministic returns.
struct Layers {
    volatility: Vec<f64>,
    spread: Vec<f64>,
    volume: Vec<Vec<f64>>,
    count: Vec<Vec<f64>>,
    drift: Vec<f64>,
}

impl Layers {
    fn new(n: usize) -> Self {
        Layers {
            volatility: vec![0.0; n],
            spread: vec![0.0; n],
            volume: vec![vec![0.0; n]; FlowKey::COUNT],
            count: vec![vec![0.0; n]; FlowKey::COUNT],
            drift: vec![0.0; n],
        }
    }

    fn overlay(layer: &mut [f64], origin: i64, shape: Option<&EventShape>) {
        let Some(shape) = shape else { return };
        for t in OVERLAY_FROM..=OVERLAY_TO {
            let g = origin + t as i64;
            if (0..layer.len() as i64).contains(&g) {
                layer[g as usize] += shape.value(t) - 1.0;
            }
        }
    }

    fn add_event(&mut self, origin: i64, sign: f64, t: &EventTemplate) {
        Self::overlay(&mut self.volatility, origin, t.volatility.as_ref());
        Self::overlay(&mut self.spread, origin, t.spread.as_ref());
        for key in FlowKey::all() {
            Self::overlay(&mut self.volume[key.index()], origin, t.flow_shape(key.side, key.aggressiveness, false));
            Self::overlay(&mut self.count[key.index()], origin, t.flow_shape(key.side, key.aggressiveness, true));
        }
        let n = self.drift.len() as i64;
        let mut add = |g: i64, x: f64| {
            if (0..n).contains(&g) {
                self.drift[g as usize] += x;
            }
        };
        add(origin, sign * t.jump);
        for k in 1..=t.ramp_minutes as i64 {
            add(origin - k, sign * t.pre_drift / t.ramp_minutes as f64);
        }
        for k in 1..=t.reversal_minutes as i64 {
            add(origin + k, -sign * t.reversal / t.reversal_minutes as f64);
        }
    }
}

/// Mean-one log-normal factor from a standard normal draw.
fn noise(sigma: f64, z: f64) -> f64 {
    (sigma * z - 0.5 * sigma * sigma).exp()
}

pub fn generate_bars(spec: &ScenarioSpec) -> Result<(Vec<BarSeries>, BarTruth)> {
    spec.validate()?;
    let dates = spec.dates();
    let events = resolve_events(spec)?;
    let p_vol = spec.profiles.volatility.resolve();
    let p_volume = spec.profiles.volume.resolve();
    let p_spread = spec.profiles.spread.resolve();
    let n = spec.days * MINUTES_PER_DAY;
    let mut out = Vec::with_capacity(spec.stocks);

    for s in 0..spec.stocks {
        let mut layers = Layers::new(n);
        for e in events.iter().filter(|e| e.stock == s) {
            let origin = (e.day * MINUTES_PER_DAY + e.minute as usize - 1) as i64;
            let sign = if e.sign == EventSign::Positive { 1.0 } else { -1.0 };
            layers.add_event(origin, sign, &spec.templates[&e.template]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(s as u64);
        let mut bars = Vec::with_capacity(n);
        let mut log_mid = spec.initial_price.ln();
        for (d, date) in dates.iter().enumerate() {
            for m in 1..=MINUTES_PER_DAY {
                let g = d * MINUTES_PER_DAY + m - 1;
                let i = m - 1;
                let z: f64 = rng.sample(StandardNormal);
                if m > 1 {
                    log_mid += spec.return_sigma * p_vol[i] * (1.0 + layers.volatility[g]) * z + layers.drift[g];
                }
                let mid = log_mid.exp();
                let zs: f64 = rng.sample(StandardNormal);
                let spread = spec.base_spread * p_spread[i] * (1.0 + layers.spread[g]) * noise(spec.noise_sigma, zs);
                let mut volume = FlowTable::default();
                let mut count = FlowTable::default();
                for key in FlowKey::all() {
                    let k = key.index();
                    let share = default_flow_share(key);
                    let zv: f64 = rng.sample(StandardNormal);
                    let zc: f64 = rng.sample(StandardNormal);
                    volume[key] =
                        spec.base_volume * share * p_volume[i] * (1.0 + layers.volume[k][g]) * noise(spec.noise_sigma, zv);
                    let c = spec.base_count * share * p_volume[i] * (1.0 + layers.count[k][g]) * noise(spec.noise_sigma, zc);
                    count[key] = c.round() as u32;
                }
                let traded = volume.market(crate::types::Side::Buy) + volume.market(crate::types::Side::Sell);
                bars.push(MinuteBar {
                    date: *date,
                    day_index: d as u32,
                    minute: m as u16,
                    mid_price: mid,
                    best_bid: mid - spread / 2.0,
                    best_ask: mid + spread / 2.0,
                    spread,
                    volume,
                    count,
                    executed: [traded, traded],
                    split_factor: 1.0,
                });
            }
        }
        out.push(BarSeries::new(stock_id(s), bars)?);
    }

    let mut exponents = BTreeMap::new();
    for (name, t) in &spec.templates {
        let mut put = |layer: &str, shape: Option<&EventShape>| {
            if let Some(sh) = shape {
                exponents.insert(format!("{name}/{layer}"), sh.alpha);
            }
        };
        put("volatility", t.volatility.as_ref());
        put("spread", t.spread.as_ref());
        put("volume", t.volume.as_ref());
        for (k, sh) in &t.flows {
            put(&format!("{k}_volume"), Some(sh));
        }
        for (k, sh) in &t.counts {
            put(&format!("{k}_count"), Some(sh));
        }
    }
    let truth = BarTruth {
        seed: spec.seed,
        events: events
            .iter()
            .map(|e| TruthEvent {
                stock_id: stock_id(e.stock),
                date: dates[e.day],
                day_index: e.day,
                minute: e.minute,
                sign: e.sign,
                template: e.template.clone(),
            })
            .collect(),
        profiles: BTreeMap::from([
            ("volatility".to_string(), p_vol),
            ("volume".to_string(), p_volume),
            ("spread".to_string(), p_spread),
        ]),
        exponents,
    };
    Ok((out, truth))
}
