//! Tick-level order records and their delimited text layout.
//!
//! Layout, one record per line after a mandatory header:
//!
//! ```text
//! stock_id,date,time,event_kind,order_id,side,price,size,investor_class
//! 000001,20030102,093000,submit,17,B,10.00,500,I
//! ```
//!
//! `date` is `YYYYMMDD`, `time` is `HHMMSS` or `HHMMSS.mmm`, `event_kind` is
//! one of `submit`, `cancel`, `execute`, `side` is `B`/`S`, `price` has at
//! most two decimals and `investor_class` is `I` (individual) or `N`
//! (institution). Canonical output writes prices with exactly two decimals
//! and appends milliseconds only when they are non-zero.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use chrono::{NaiveDate, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::clock::TradingClock;
use crate::types::{Investor, Price, Side};

pub const HEADER: [&str; 9] = [
    "stock_id",
    "date",
    "time",
    "event_kind",
    "order_id",
    "side",
    "price",
    "size",
    "investor_class",
];

/// Board lot for buy submissions.
pub const BOARD_LOT: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp {
    pub date: NaiveDate,
    pub time: NaiveTime,
}

impl Timestamp {
    pub fn new(date: NaiveDate, time: NaiveTime) -> Self {
        Timestamp { date, time }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Submit,
    Cancel,
    Execute,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Submit => "submit",
            EventKind::Cancel => "cancel",
            EventKind::Execute => "execute",
        }
    }
}

impl FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "submit" => Ok(EventKind::Submit),
            "cancel" => Ok(EventKind::Cancel),
            "execute" => Ok(EventKind::Execute),
            other => Err(Error::malformed("event kind", other.to_string())),
        }
    }
}

/// One submission, cancellation or execution record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderEvent {
    pub stock_id: String,
    pub timestamp: Timestamp,
    pub kind: EventKind,
    pub order_id: String,
    pub side: Side,
    pub price: Price,
    pub size: u64,
    pub investor: Investor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaConfig {
    pub delimiter: char,
    pub enforce_board_lot: bool,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        SchemaConfig {
            delimiter: ',',
            enforce_board_lot: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    /// 1-based line number in the input, header included.
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for Reject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParseOutcome {
    pub events: Vec<OrderEvent>,
    pub rejects: Vec<Reject>,
    /// Well-formed records dropped because they fall outside the
    /// continuous double auction (or reference an order that did).
    pub excluded: usize,
}

impl ParseOutcome {
    pub fn accepted(&self) -> usize {
        self.events.len()
    }

    pub fn rejected(&self) -> usize {
        self.rejects.len()
    }
}

fn parse_date(s: &str) -> Result<NaiveDate> {
    if s.len() != 8 || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::malformed("date", s.to_string()));
    }
    NaiveDate::parse_from_str(s, "%Y%m%d").map_err(|_| Error::malformed("date", s.to_string()))
}

fn parse_time(s: &str) -> Result<NaiveTime> {
    let bad = || Error::malformed("time", s.to_string());
    let (hms, millis) = match s.split_once('.') {
        Some((hms, ms)) if ms.len() == 3 && ms.bytes().all(|b| b.is_ascii_digit()) => {
            (hms, ms.parse::<u32>().map_err(|_| bad())?)
        }
        Some(_) => return Err(bad()),
        None => (s, 0),
    };
    if hms.len() != 6 || !hms.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let h = hms[0..2].parse().map_err(|_| bad())?;
    let m = hms[2..4].parse().map_err(|_| bad())?;
    let sec = hms[4..6].parse().map_err(|_| bad())?;
    NaiveTime::from_hms_milli_opt(h, m, sec, millis).ok_or_else(bad)
}

fn format_time(t: NaiveTime) -> String {
    let millis = t.nanosecond() / 1_000_000;
    if millis == 0 {
        format!("{:02}{:02}{:02}", t.hour(), t.minute(), t.second())
    } else {
        format!("{:02}{:02}{:02}.{:03}", t.hour(), t.minute(), t.second(), millis)
    }
}

fn parse_fields(fields: &[&str]) -> Result<OrderEvent> {
    if fields.len() != HEADER.len() {
        return Err(Error::malformed(
            "record",
            format!("expected {} fields, found {}", HEADER.len(), fields.len()),
        ));
    }
    let stock_id = fields[0].trim();
    if stock_id.is_empty() {
        return Err(Error::malformed("stock_id", "empty"));
    }
    let order_id = fields[4].trim();
    if order_id.is_empty() {
        return Err(Error::malformed("order_id", "empty"));
    }
    let size = fields[7]
        .trim()
        .parse::<u64>()
        .map_err(|_| Error::malformed("size", fields[7].to_string()))?;
    Ok(OrderEvent {
        stock_id: stock_id.to_string(),
        timestamp: Timestamp::new(parse_date(fields[1].trim())?, parse_time(fields[2].trim())?),
        kind: fields[3].trim().parse()?,
        order_id: order_id.to_string(),
        side: fields[5].trim().parse()?,
        price: fields[6].trim().parse()?,
        size,
        investor: fields[8].trim().parse()?,
    })
}

/// Per-stock bookkeeping while scanning a stream.
#[derive(Default)]
struct StockState {
    last: Option<Timestamp>,
    submits: HashMap<String, Side>,
    excluded_orders: HashSet<String>,
}

enum Verdict {
    Accept,
    Exclude,
    Reject(String),
}

fn judge(ev: &OrderEvent, state: &StockState, clock: &TradingClock, schema: &SchemaConfig) -> Verdict {
    match ev.kind {
        EventKind::Submit => {
            if ev.size == 0 {
                return Verdict::Reject("submission with zero size".into());
            }
            if ev.price.ticks() <= 0 {
                return Verdict::Reject("submission with non-positive price".into());
            }
            if schema.enforce_board_lot && ev.side == Side::Buy && ev.size % BOARD_LOT != 0 {
                return Verdict::Reject(format!(
                    "buy size {} is not a multiple of the {BOARD_LOT}-share board lot",
                    ev.size
                ));
            }
            if state.submits.contains_key(&ev.order_id) || state.excluded_orders.contains(&ev.order_id) {
                return Verdict::Reject(format!("duplicate order id {}", ev.order_id));
            }
            if !clock.in_session(ev.timestamp.time) {
                return Verdict::Exclude;
            }
            Verdict::Accept
        }
        EventKind::Cancel | EventKind::Execute => {
            if ev.kind == EventKind::Execute && ev.size == 0 {
                return Verdict::Reject("execution with zero size".into());
            }
            if state.excluded_orders.contains(&ev.order_id) {
                return Verdict::Exclude;
            }
            match state.submits.get(&ev.order_id) {
                None => Verdict::Reject(format!(
                    "{} references unknown order {}",
                    ev.kind.name(),
                    ev.order_id
                )),
                Some(side) if *side != ev.side => Verdict::Reject(format!(
                    "{} side differs from the submission of order {}",
                    ev.kind.name(),
                    ev.order_id
                )),
                Some(_) if !clock.in_session(ev.timestamp.time) => Verdict::Exclude,
                Some(_) => Verdict::Accept,
            }
        }
    }
}

/// Parses a delimited order stream.
///
/// Malformed or semantically invalid records are rejected individually with
/// their line numbers; records outside the continuous double auction are
/// dropped. A timestamp going backwards within one stock aborts the parse.
pub fn parse_stream<R: BufRead>(input: R, schema: &SchemaConfig, clock: &TradingClock) -> Result<ParseOutcome> {
    let mut outcome = ParseOutcome::default();
    let mut stocks: HashMap<String, StockState> = HashMap::new();
    let mut lines = input.lines().enumerate();

    let header = loop {
        match lines.next() {
            None => return Ok(outcome),
            Some((_, line)) => {
                let line = line.map_err(|e| Error::Unreadable(e.to_string()))?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
        }
    };
    let columns: Vec<&str> = header.split(schema.delimiter).map(str::trim).collect();
    if columns != HEADER {
        return Err(Error::Unreadable(format!(
            "header must be {:?}, found {:?}",
            HEADER.join(&schema.delimiter.to_string()),
            header
        )));
    }

    for (idx, line) in lines {
        let line = line.map_err(|e| Error::Unreadable(e.to_string()))?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(schema.delimiter).collect();
        let ev = match parse_fields(&fields) {
            Ok(ev) => ev,
            Err(e) => {
                outcome.rejects.push(Reject {
                    line: lineno,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let state = stocks.entry(ev.stock_id.clone()).or_default();
        if let Some(last) = state.last {
            if ev.timestamp < last {
                return Err(Error::OutOfOrder {
                    stock: ev.stock_id,
                    line: lineno,
                });
            }
        }
        state.last = Some(ev.timestamp);

        match judge(&ev, state, clock, schema) {
            Verdict::Accept => {
                if ev.kind == EventKind::Submit {
                    state.submits.insert(ev.order_id.clone(), ev.side);
                }
                outcome.events.push(ev);
            }
            Verdict::Exclude => {
                if ev.kind == EventKind::Submit {
                    state.excluded_orders.insert(ev.order_id.clone());
                }
                outcome.excluded += 1;
            }
            Verdict::Reject(reason) => outcome.rejects.push(Reject { line: lineno, reason }),
        }
    }
    Ok(outcome)
}

pub fn format_event(ev: &OrderEvent, delimiter: char) -> String {
    let d = delimiter;
    format!(
        "{}{d}{}{d}{}{d}{}{d}{}{d}{}{d}{}{d}{}{d}{}",
        ev.stock_id,
        ev.timestamp.date.format("%Y%m%d"),
        format_time(ev.timestamp.time),
        ev.kind.name(),
        ev.order_id,
        ev.side.code(),
        ev.price,
        ev.size,
        ev.investor.code(),
    )
}

/// Writes events in the canonical input layout, header included.
pub fn write_events<W: Write>(mut out: W, events: &[OrderEvent], delimiter: char) -> std::io::Result<()> {
    writeln!(out, "{}", HEADER.join(&delimiter.to_string()))?;
    for ev in events {
        writeln!(out, "{}", format_event(ev, delimiter))?;
    }
    Ok(())
}
