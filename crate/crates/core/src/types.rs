//! Shared market vocabulary: sides, investor classes, order aggressiveness,
//! tick-aligned prices and the fixed-size flow table used by minute bars.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub const ALL: [Side; 2] = [Side::Buy, Side::Sell];

    pub fn opposite(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Side::Buy => "B",
            Side::Sell => "S",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Buy => "buy",
            Side::Sell => "sell",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "B" => Ok(Side::Buy),
            "S" => Ok(Side::Sell),
            other => Err(Error::malformed("side", format!("expected B or S, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Investor {
    Individual,
    Institution,
}

impl Investor {
    pub const ALL: [Investor; 2] = [Investor::Individual, Investor::Institution];

    pub fn code(self) -> &'static str {
        match self {
            Investor::Individual => "I",
            Investor::Institution => "N",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Investor::Individual => "individual",
            Investor::Institution => "institution",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for Investor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "I" => Ok(Investor::Individual),
            "N" => Ok(Investor::Institution),
            other => Err(Error::malformed(
                "investor class",
                format!("expected I or N, got {other:?}"),
            )),
        }
    }
}

/// Aggressiveness label of a logical order.
///
/// `PartiallyFilled` and `Filled` are the two kinds of effective market
/// orders; a partially executed submission also yields a `Limit` remainder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggressiveness {
    PartiallyFilled,
    Filled,
    Limit,
    Canceled,
}

impl Aggressiveness {
    pub const ALL: [Aggressiveness; 4] = [
        Aggressiveness::PartiallyFilled,
        Aggressiveness::Filled,
        Aggressiveness::Limit,
        Aggressiveness::Canceled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Aggressiveness::PartiallyFilled => "partially_filled",
            Aggressiveness::Filled => "filled",
            Aggressiveness::Limit => "limit",
            Aggressiveness::Canceled => "canceled",
        }
    }

    /// Short code used in peak tables (PFO, FO, LO, CO).
    pub fn short(self) -> &'static str {
        match self {
            Aggressiveness::PartiallyFilled => "PFO",
            Aggressiveness::Filled => "FO",
            Aggressiveness::Limit => "LO",
            Aggressiveness::Canceled => "CO",
        }
    }

    pub fn is_market(self) -> bool {
        matches!(self, Aggressiveness::PartiallyFilled | Aggressiveness::Filled)
    }

    pub fn kind(self) -> OrderKind {
        match self {
            Aggressiveness::PartiallyFilled | Aggressiveness::Filled => OrderKind::Market,
            Aggressiveness::Limit => OrderKind::Limit,
            Aggressiveness::Canceled => OrderKind::Cancel,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for Aggressiveness {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Aggressiveness::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::malformed("aggressiveness", s.to_string()))
    }
}

/// The three buckets used for relative order rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OrderKind {
    Market,
    Limit,
    Cancel,
}

/// Number of decimal places of a tick-aligned price (0.01 currency units).
pub const PRICE_DECIMALS: u32 = 2;
const TICKS_PER_UNIT: i64 = 10i64.pow(PRICE_DECIMALS);

/// A tick-aligned price stored as an integer number of ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Price(pub i64);

impl Price {
    pub fn from_ticks(ticks: i64) -> Self {
        Price(ticks)
    }

    pub fn ticks(self) -> i64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / TICKS_PER_UNIT as f64
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let unit = TICKS_PER_UNIT as u64;
        write!(
            f,
            "{sign}{}.{:0width$}",
            abs / unit,
            abs % unit,
            width = PRICE_DECIMALS as usize
        )
    }
}

impl FromStr for Price {
    type Err = Error;

    /// Accepts `12`, `12.3` or `12.34`; more decimals than a tick are rejected.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |why: &str| Error::malformed("price", format!("{s:?}: {why}"));
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int_part.is_empty() || !int_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad("not a non-negative decimal"));
        }
        if !frac_part.bytes().all(|b| b.is_ascii_digit()) || (s.contains('.') && frac_part.is_empty()) {
            return Err(bad("not a non-negative decimal"));
        }
        if frac_part.len() > PRICE_DECIMALS as usize {
            return Err(bad("not aligned to the price tick"));
        }
        let units: i64 = int_part.parse().map_err(|_| bad("out of range"))?;
        let mut frac: i64 = if frac_part.is_empty() { 0 } else { frac_part.parse().map_err(|_| bad("out of range"))? };
        for _ in frac_part.len()..PRICE_DECIMALS as usize {
            frac *= 10;
        }
        units
            .checked_mul(TICKS_PER_UNIT)
            .and_then(|t| t.checked_add(frac))
            .map(Price)
            .ok_or_else(|| bad("out of range"))
    }
}

/// Cell address in a [`FlowTable`]: side × aggressiveness × investor class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FlowKey {
    pub side: Side,
    pub aggressiveness: Aggressiveness,
    pub investor: Investor,
}

impl FlowKey {
    pub const COUNT: usize = 16;

    pub fn new(side: Side, aggressiveness: Aggressiveness, investor: Investor) -> Self {
        FlowKey {
            side,
            aggressiveness,
            investor,
        }
    }

    /// All keys in the stable column order used by every table writer.
    pub fn all() -> impl Iterator<Item = FlowKey> {
        Side::ALL.into_iter().flat_map(|side| {
            Aggressiveness::ALL.into_iter().flat_map(move |aggressiveness| {
                Investor::ALL
                    .into_iter()
                    .map(move |investor| FlowKey::new(side, aggressiveness, investor))
            })
        })
    }

    pub fn index(self) -> usize {
        (self.side.index() * 4 + self.aggressiveness.index()) * 2 + self.investor.index()
    }

    pub fn column_suffix(self) -> String {
        format!(
            "{}_{}_{}",
            self.side.name(),
            self.aggressiveness.name(),
            self.investor.name()
        )
    }
}

/// Dense per-[`FlowKey`] storage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowTable<T> {
    cells: [T; FlowKey::COUNT],
}

impl<T: Copy + Default> Default for FlowTable<T> {
    fn default() -> Self {
        FlowTable {
            cells: [T::default(); FlowKey::COUNT],
        }
    }
}

impl<T: Copy> FlowTable<T> {
    pub fn iter(&self) -> impl Iterator<Item = (FlowKey, T)> + '_ {
        FlowKey::all().map(move |k| (k, self.cells[k.index()]))
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> FlowTable<U> {
        FlowTable {
            cells: self.cells.map(f),
        }
    }

    pub fn cells(&self) -> &[T; FlowKey::COUNT] {
        &self.cells
    }
}

impl<T: Copy + Default + std::ops::Add<Output = T>> FlowTable<T> {
    /// Sum over cells matching the predicate.
    pub fn sum_where(&self, pred: impl Fn(FlowKey) -> bool) -> T {
        FlowKey::all()
            .filter(|k| pred(*k))
            .fold(T::default(), |acc, k| acc + self.cells[k.index()])
    }

    /// Effective market-order total (filled + partially filled) for one side.
    pub fn market(&self, side: Side) -> T {
        self.sum_where(|k| k.side == side && k.aggressiveness.is_market())
    }
}

impl<T> Index<FlowKey> for FlowTable<T> {
    type Output = T;

    fn index(&self, key: FlowKey) -> &T {
        &self.cells[key.index()]
    }
}

impl<T> IndexMut<FlowKey> for FlowTable<T> {
    fn index_mut(&mut self, key: FlowKey) -> &mut T {
        &mut self.cells[key.index()]
    }
}
