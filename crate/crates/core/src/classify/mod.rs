//! Order aggressiveness taxonomy.
//!
//! Every submission is compared with the book immediately before it arrives.
//! A buy priced at or above the best ask (a sell at or below the best bid)
//! is an effective market order: fully executed ones are `Filled`, and a
//! partially executed one becomes two logical orders, the executed part
//! (`PartiallyFilled`) and the resting remainder (`Limit`). Everything else
//! is `Limit`. Cancellations contribute the unexecuted remainder as
//! `Canceled`.

pub mod book;
mod rates;

use std::collections::{BTreeMap, HashMap};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use book::{BookState, OrderBook};
pub use rates::{imbalance, relative_rates, relative_rates_by_side, MinuteImbalance, RelativeRates, SideRates};

use crate::ingest::clock::TradingClock;
use crate::ingest::record::{EventKind, OrderEvent, Timestamp};
use crate::types::{Aggressiveness, FlowKey, FlowTable, Investor, Side};

/// Diagnostic attached to a classification that could not be made cleanly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassFlag {
    /// The opposite side of the book was empty.
    NoOppositeQuote,
    /// Marketability and reported execution disagree.
    ExecutionMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    /// (volume, label) pairs; one entry, or two for a partial fill.
    pub parts: Vec<(u64, Aggressiveness)>,
    pub flag: Option<ClassFlag>,
}

/// Labels one submission given the book state just before it and the
/// volume it executed on arrival.
pub fn classify_submission(order: &OrderEvent, book: &BookState, executed: u64) -> Classification {
    let limit_only = |flag| Classification {
        parts: vec![(order.size, Aggressiveness::Limit)],
        flag,
    };
    let Some(opposite) = book.best(order.side.opposite()) else {
        let flag = Some(ClassFlag::NoOppositeQuote);
        return limit_only(flag);
    };
    let marketable = match order.side {
        Side::Buy => order.price >= opposite,
        Side::Sell => order.price <= opposite,
    };
    if !marketable {
        let flag = (executed > 0).then_some(ClassFlag::ExecutionMismatch);
        return limit_only(flag);
    }
    if executed == 0 || executed > order.size {
        return limit_only(Some(ClassFlag::ExecutionMismatch));
    }
    if executed == order.size {
        Classification {
            parts: vec![(order.size, Aggressiveness::Filled)],
            flag: None,
        }
    } else {
        Classification {
            parts: vec![
                (executed, Aggressiveness::PartiallyFilled),
                (order.size - executed, Aggressiveness::Limit),
            ],
            flag: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogicalOrder {
    pub timestamp: Timestamp,
    pub order_id: String,
    pub key: FlowKey,
    pub volume: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuoteUpdate {
    pub timestamp: Timestamp,
    pub state: BookState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecutionRecord {
    pub timestamp: Timestamp,
    pub side: Side,
    pub size: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplayDiagnostics {
    pub flagged: BTreeMap<String, usize>,
    /// Cancels whose order was no longer resting (already executed or expired).
    pub stale_cancels: usize,
    /// Orders whose reported executions differ from the replayed matching.
    pub execution_mismatches: usize,
}

/// Result of replaying one stock's stream through the matching engine.
#[derive(Debug, Clone, Default)]
pub struct StockReplay {
    pub stock_id: String,
    pub orders: Vec<LogicalOrder>,
    pub quotes: Vec<QuoteUpdate>,
    pub executions: Vec<ExecutionRecord>,
    pub diagnostics: ReplayDiagnostics,
}

fn reconcile_day(matched: &mut HashMap<String, u64>, reported: &mut HashMap<String, u64>, diag: &mut ReplayDiagnostics) {
    if !reported.is_empty() {
        let mut ids: Vec<&String> = matched.keys().chain(reported.keys()).collect();
        ids.sort();
        ids.dedup();
        diag.execution_mismatches += ids
            .into_iter()
            .filter(|id| matched.get(*id) != reported.get(*id))
            .count();
    }
    matched.clear();
    reported.clear();
}

/// Replays a single stock's events in order. The book is emptied whenever
/// the trading date changes (orders are day orders).
pub fn replay_stock(events: &[OrderEvent]) -> StockReplay {
    let mut replay = StockReplay {
        stock_id: events.first().map(|e| e.stock_id.clone()).unwrap_or_default(),
        ..Default::default()
    };
    let mut book = OrderBook::new();
    let mut day: Option<NaiveDate> = None;
    let mut matched: HashMap<String, u64> = HashMap::new();
    let mut reported: HashMap<String, u64> = HashMap::new();

    for ev in events {
        if day != Some(ev.timestamp.date) {
            reconcile_day(&mut matched, &mut reported, &mut replay.diagnostics);
            book.clear();
            day = Some(ev.timestamp.date);
        }
        match ev.kind {
            EventKind::Submit => {
                let before = book.state();
                let outcome = book.submit(&ev.order_id, ev.side, ev.price, ev.size, ev.investor);
                if outcome.executed > 0 {
                    *matched.entry(ev.order_id.clone()).or_default() += outcome.executed;
                    for fill in &outcome.fills {
                        *matched.entry(fill.passive_id.clone()).or_default() += fill.size;
                    }
                }
                let class = classify_submission(ev, &before, outcome.executed);
                if let Some(flag) = class.flag {
                    *replay.diagnostics.flagged.entry(format!("{flag:?}")).or_default() += 1;
                }
                for (volume, aggressiveness) in class.parts {
                    replay.orders.push(LogicalOrder {
                        timestamp: ev.timestamp,
                        order_id: ev.order_id.clone(),
                        key: FlowKey::new(ev.side, aggressiveness, ev.investor),
                        volume,
                    });
                }
            }
            EventKind::Cancel => match book.cancel(&ev.order_id) {
                Some(c) if c.remaining > 0 => replay.orders.push(LogicalOrder {
                    timestamp: ev.timestamp,
                    order_id: ev.order_id.clone(),
                    key: FlowKey::new(c.side, Aggressiveness::Canceled, c.investor),
                    volume: c.remaining,
                }),
                _ => replay.diagnostics.stale_cancels += 1,
            },
            EventKind::Execute => {
                *reported.entry(ev.order_id.clone()).or_default() += ev.size;
                replay.executions.push(ExecutionRecord {
                    timestamp: ev.timestamp,
                    side: ev.side,
                    size: ev.size,
                });
                continue;
            }
        }
        replay.quotes.push(QuoteUpdate {
            timestamp: ev.timestamp,
            state: book.state(),
        });
    }
    reconcile_day(&mut matched, &mut reported, &mut replay.diagnostics);
    replay
}

/// Per-minute share sums and order counts by flow key.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MinuteFlow {
    pub volume: FlowTable<u64>,
    pub count: FlowTable<u32>,
}

/// Buckets logical orders into (date, intraday minute). Orders outside the
/// sessions are skipped; ingestion has already removed them.
pub fn aggregate_minute_classes(orders: &[LogicalOrder], clock: &TradingClock) -> BTreeMap<(NaiveDate, u16), MinuteFlow> {
    let mut out: BTreeMap<(NaiveDate, u16), MinuteFlow> = BTreeMap::new();
    for o in orders {
        let Some(minute) = clock.intraday_index(o.timestamp.time) else {
            continue;
        };
        let cell = out.entry((o.timestamp.date, minute)).or_default();
        cell.volume[o.key] += o.volume;
        cell.count[o.key] += 1;
    }
    out
}

/// Market/limit/cancel counts for one investor class out of a count table.
pub fn kind_counts(count: &FlowTable<u32>, investor: Investor, side: Option<Side>) -> [u32; 3] {
    let mut out = [0u32; 3];
    for (k, n) in count.iter() {
        if k.investor != investor || side.is_some_and(|s| s != k.side) {
            continue;
        }
        let slot = match k.aggressiveness.kind() {
            crate::types::OrderKind::Market => 0,
            crate::types::OrderKind::Limit => 1,
            crate::types::OrderKind::Cancel => 2,
        };
        out[slot] += n;
    }
    out
}
