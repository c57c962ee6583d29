//! Minute bars restricted to the continuous double auction.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use log::warn;
use serde::{Deserialize, Serialize};

use crate::classify::{aggregate_minute_classes, replay_stock, BookState, MinuteFlow, ReplayDiagnostics, StockReplay};
use crate::error::{Error, Result};
use crate::ingest::clock::{TradingClock, MINUTES_PER_DAY};
use crate::ingest::record::OrderEvent;
use crate::types::{FlowTable, Side};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinuteBar {
    pub date: NaiveDate,
    /// Position of the day within its stock's series.
    pub day_index: u32,
    /// Intraday index `1..=240`.
    pub minute: u16,
    pub mid_price: f64,
    pub best_bid: f64,
    pub best_ask: f64,
    pub spread: f64,
    /// Shares per (side, aggressiveness, investor) logical order class.
    pub volume: FlowTable<f64>,
    pub count: FlowTable<u32>,
    /// Executed shares reported per side (both counterparties of each trade).
    pub executed: [f64; 2],
    pub split_factor: f64,
}

impl MinuteBar {
    pub fn executed_on(&self, side: Side) -> f64 {
        self.executed[side as usize]
    }

    /// Total effective market-order volume, i.e. traded volume.
    pub fn market_volume(&self) -> f64 {
        self.volume.market(Side::Buy) + self.volume.market(Side::Sell)
    }
}

/// A stock's bars on a contiguous intraday axis: `MINUTES_PER_DAY` bars per
/// retained trading day, days in chronological order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarSeries {
    pub stock_id: String,
    pub bars: Vec<MinuteBar>,
}

impl BarSeries {
    pub fn new(stock_id: impl Into<String>, bars: Vec<MinuteBar>) -> Result<Self> {
        let series = BarSeries {
            stock_id: stock_id.into(),
            bars,
        };
        series.validate()?;
        Ok(series)
    }

    fn validate(&self) -> Result<()> {
        if self.bars.len() % MINUTES_PER_DAY != 0 {
            return Err(Error::Dimension(format!(
                "{}: {} bars is not a whole number of {MINUTES_PER_DAY}-minute days",
                self.stock_id,
                self.bars.len()
            )));
        }
        for (d, day) in self.bars.chunks(MINUTES_PER_DAY).enumerate() {
            for (i, bar) in day.iter().enumerate() {
                if bar.minute as usize != i + 1 || bar.date != day[0].date || bar.day_index as usize != d {
                    return Err(Error::Dimension(format!(
                        "{}: bar {} of day {} is out of place",
                        self.stock_id, i, d
                    )));
                }
            }
        }
        if self.dates().windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Dimension(format!("{}: days are not strictly increasing", self.stock_id)));
        }
        Ok(())
    }

    pub fn n_days(&self) -> usize {
        self.bars.len() / MINUTES_PER_DAY
    }

    pub fn day(&self, d: usize) -> &[MinuteBar] {
        &self.bars[d * MINUTES_PER_DAY..(d + 1) * MINUTES_PER_DAY]
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.bars.iter().step_by(MINUTES_PER_DAY).map(|b| b.date).collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct BarBuild {
    pub series: Vec<BarSeries>,
    pub dropped_days: Vec<(String, NaiveDate)>,
    pub diagnostics: BTreeMap<String, ReplayDiagnostics>,
}

/// Replays every stock through the matching engine and folds the result
/// into minute bars. Stocks are emitted in ascending id order.
pub fn build_minute_bars(events: &[OrderEvent], clock: &TradingClock) -> Result<BarBuild> {
    let mut by_stock: BTreeMap<&str, Vec<OrderEvent>> = BTreeMap::new();
    for ev in events {
        by_stock.entry(ev.stock_id.as_str()).or_default().push(ev.clone());
    }
    let mut build = BarBuild::default();
    for (stock, evs) in by_stock {
        let replay = replay_stock(&evs);
        let (series, dropped) = bars_from_replay(&replay, clock)?;
        build
            .dropped_days
            .extend(dropped.into_iter().map(|d| (stock.to_string(), d)));
        build.diagnostics.insert(stock.to_string(), replay.diagnostics);
        if series.n_days() > 0 {
            build.series.push(series);
        }
    }
    Ok(build)
}

/// Folds one stock's replay into bars. Returns the series and the dates
/// dropped for lack of any two-sided quote.
///
/// Each bar takes the last two-sided quote strictly before its closing
/// boundary; minutes without an update inherit the previous bar's quote
/// (across the lunch break too), and minutes before the day's first
/// two-sided quote take that first quote.
pub fn bars_from_replay(replay: &StockReplay, clock: &TradingClock) -> Result<(BarSeries, Vec<NaiveDate>)> {
    let flows = aggregate_minute_classes(&replay.orders, clock);

    let mut quotes_by_minute: BTreeMap<NaiveDate, Vec<Option<BookState>>> = BTreeMap::new();
    for q in &replay.quotes {
        let Some(minute) = clock.intraday_index(q.timestamp.time) else {
            continue;
        };
        let day = quotes_by_minute
            .entry(q.timestamp.date)
            .or_insert_with(|| vec![None; MINUTES_PER_DAY]);
        day[minute as usize - 1] = Some(q.state);
    }

    let mut executed: BTreeMap<(NaiveDate, u16), [f64; 2]> = BTreeMap::new();
    for x in &replay.executions {
        if let Some(minute) = clock.intraday_index(x.timestamp.time) {
            executed.entry((x.timestamp.date, minute)).or_default()[x.side as usize] += x.size as f64;
        }
    }

    let mut dates: Vec<NaiveDate> = quotes_by_minute.keys().copied().collect();
    dates.extend(flows.keys().map(|(d, _)| *d));
    dates.extend(executed.keys().map(|(d, _)| *d));
    dates.sort();
    dates.dedup();

    let mut bars = Vec::with_capacity(dates.len() * MINUTES_PER_DAY);
    let mut dropped = Vec::new();
    let empty_day = vec![None; MINUTES_PER_DAY];
    for date in dates {
        let updates = quotes_by_minute.get(&date).unwrap_or(&empty_day);
        // Last two-sided quote at the close of each minute, carried forward.
        let mut carried: Option<(f64, f64)> = None;
        let mut per_minute: Vec<Option<(f64, f64)>> = Vec::with_capacity(MINUTES_PER_DAY);
        for state in updates {
            if let Some((bid, ask)) = state.and_then(|s| s.quotes()) {
                carried = Some((bid.as_f64(), ask.as_f64()));
            }
            per_minute.push(carried);
        }
        let Some(first) = per_minute.iter().flatten().next().copied() else {
            warn!("{}: no two-sided quote on {date}, day dropped", replay.stock_id);
            dropped.push(date);
            continue;
        };
        let day_index = (bars.len() / MINUTES_PER_DAY) as u32;
        for (i, q) in per_minute.into_iter().enumerate() {
            let minute = i as u16 + 1;
            let (bid, ask) = q.unwrap_or(first);
            let flow: MinuteFlow = flows.get(&(date, minute)).copied().unwrap_or_default();
            bars.push(MinuteBar {
                date,
                day_index,
                minute,
                mid_price: (bid + ask) / 2.0,
                best_bid: bid,
                best_ask: ask,
                spread: ask - bid,
                volume: flow.volume.map(|v| v as f64),
                count: flow.count,
                executed: executed.get(&(date, minute)).copied().unwrap_or_default(),
                split_factor: 1.0,
            });
        }
    }
    Ok((BarSeries::new(replay.stock_id.clone(), bars)?, dropped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::record::{EventKind, Timestamp};
    use crate::types::{Aggressiveness, FlowKey, Investor, Price};
    use chrono::NaiveTime;

    fn at(h: u32, m: u32, s: u32) -> Timestamp {
        Timestamp::new(
            NaiveDate::from_ymd_opt(2003, 3, 3).unwrap(),
            NaiveTime::from_hms_opt(h, m, s).unwrap(),
        )
    }

    fn ev(kind: EventKind, id: &str, side: Side, price: i64, size: u64, ts: Timestamp) -> OrderEvent {
        OrderEvent {
            stock_id: "000002".into(),
            timestamp: ts,
            kind,
            order_id: id.into(),
            side,
            price: Price(price),
            size,
            investor: Investor::Individual,
        }
    }

    #[test]
    fn quiet_day_carries_opening_quotes() {
        let events = vec![
            ev(EventKind::Submit, "b", Side::Buy, 1000, 100, at(9, 30, 0)),
            ev(EventKind::Submit, "a", Side::Sell, 1002, 100, at(9, 30, 0)),
        ];
        let build = build_minute_bars(&events, &TradingClock::default()).unwrap();
        let s = &build.series[0];
        assert_eq!(s.bars.len(), MINUTES_PER_DAY);
        for b in &s.bars {
            assert!((b.mid_price - 10.01).abs() < 1e-12);
            assert_eq!(b.market_volume(), 0.0);
        }
        assert!(s.bars[1..].iter().all(|b| b.volume.cells().iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn spread_is_ask_minus_bid_at_minute_close() {
        let events = vec![
            ev(EventKind::Submit, "b", Side::Buy, 1000, 100, at(9, 30, 0)),
            ev(EventKind::Submit, "a", Side::Sell, 1004, 100, at(9, 30, 0)),
        ];
        let build = build_minute_bars(&events, &TradingClock::default()).unwrap();
        assert!((build.series[0].bars[0].spread - 0.04).abs() < 1e-12);
    }

    /// Brute-force replay: walk the minutes and sum executions whose
    /// timestamp falls inside `[start, start + 60s)`.
    #[test]
    fn single_execution_lands_in_its_minute() {
        let events = vec![
            ev(EventKind::Submit, "b0", Side::Buy, 1000, 100, at(9, 30, 0)),
            ev(EventKind::Submit, "a0", Side::Sell, 1002, 5000, at(9, 30, 0)),
            ev(EventKind::Submit, "b1", Side::Buy, 1002, 1000, at(10, 6, 30)),
            ev(EventKind::Execute, "b1", Side::Buy, 1002, 1000, at(10, 6, 30)),
            ev(EventKind::Execute, "a0", Side::Sell, 1002, 1000, at(10, 6, 30)),
        ];
        let clock = TradingClock::default();
        let build = build_minute_bars(&events, &clock).unwrap();
        let bars = &build.series[0].bars;
        for b in bars {
            let start = clock.minute_start(b.minute).unwrap();
            let expected: u64 = events
                .iter()
                .filter(|e| e.kind == EventKind::Execute && e.side == Side::Buy)
                .filter(|e| e.timestamp.time >= start && e.timestamp.time < start + chrono::Duration::minutes(1))
                .map(|e| e.size)
                .sum();
            assert_eq!(b.volume.market(Side::Buy), expected as f64, "minute {}", b.minute);
        }
        assert_eq!(bars[36].volume.market(Side::Buy), 1000.0);
        assert_eq!(
            bars[36].volume[FlowKey::new(Side::Buy, Aggressiveness::Filled, Investor::Individual)],
            1000.0
        );
        assert_eq!(bars[36].executed, [1000.0, 1000.0]);
        assert_eq!(bars[36].market_volume(), bars[36].executed_on(Side::Buy));
    }

    #[test]
    fn day_without_two_sided_quote_is_dropped() {
        let events = vec![ev(EventKind::Submit, "b", Side::Buy, 1000, 100, at(9, 30, 0))];
        let build = build_minute_bars(&events, &TradingClock::default()).unwrap();
        assert!(build.series.is_empty());
        assert_eq!(build.dropped_days.len(), 1);
    }

    #[test]
    fn lunch_break_inherits_morning_quote() {
        let events = vec![
            ev(EventKind::Submit, "b", Side::Buy, 1000, 100, at(9, 30, 0)),
            ev(EventKind::Submit, "a", Side::Sell, 1002, 100, at(9, 30, 0)),
            ev(EventKind::Submit, "b2", Side::Buy, 1001, 100, at(11, 29, 59)),
        ];
        let bars = &build_minute_bars(&events, &TradingClock::default()).unwrap().series[0].bars;
        assert!((bars[119].mid_price - 10.015).abs() < 1e-12);
        assert!((bars[120].mid_price - 10.015).abs() < 1e-12);
        assert!((bars[118].mid_price - 10.01).abs() < 1e-12);
    }
}
