use std::fmt;
use std::str::FromStr;

use crate::classify::{imbalance, kind_counts, relative_rates, relative_rates_by_side};
use crate::deseason::MinuteGrid;
use crate::error::{Error, Result};
use crate::ingest::bars::{BarSeries, MinuteBar};
use crate::types::{Aggressiveness, FlowKey, Investor, OrderKind, Side};

/// A per-minute quantity studied around events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quantity {
    /// `|r(t)|` of the mid-price.
    AbsReturn,
    /// Executed volume of effective market orders, both sides.
    Volume,
    Spread,
    /// `V_side / (V_buy + V_sell)` of effective market-order volume.
    Imbalance(Side),
    MarketVolume(Side),
    MarketVolumeBy(Side, Investor),
    ClassVolume(Side, Aggressiveness),
    ClassCount(Side, Aggressiveness),
    /// Share of `kind` among one investor class's logical orders. With a
    /// side, the denominator covers both sides.
    Rate(Investor, Option<Side>, OrderKind),
}

const KINDS: [OrderKind; 3] = [OrderKind::Market, OrderKind::Limit, OrderKind::Cancel];

fn kind_name(k: OrderKind) -> &'static str {
    match k {
        OrderKind::Market => "market",
        OrderKind::Limit => "limit",
        OrderKind::Cancel => "cancel",
    }
}

impl Quantity {
    pub fn all() -> Vec<Quantity> {
        use Quantity::*;
        let mut q = vec![AbsReturn, Volume, Spread, Imbalance(Side::Buy), Imbalance(Side::Sell)];
        q.extend(Side::ALL.map(MarketVolume));
        for s in Side::ALL {
            for i in Investor::ALL {
                q.push(MarketVolumeBy(s, i));
            }
        }
        for s in Side::ALL {
            for a in Aggressiveness::ALL {
                q.push(ClassVolume(s, a));
                q.push(ClassCount(s, a));
            }
        }
        for i in Investor::ALL {
            for k in KINDS {
                q.push(Rate(i, None, k));
            }
            for s in Side::ALL {
                for k in KINDS {
                    q.push(Rate(i, Some(s), k));
                }
            }
        }
        q
    }

    pub fn name(&self) -> String {
        use Quantity::*;
        match *self {
            AbsReturn => "abs_return".into(),
            Volume => "volume".into(),
            Spread => "spread".into(),
            Imbalance(s) => format!("{}_imbalance", s.name()),
            MarketVolume(s) => format!("{}_market_volume", s.name()),
            MarketVolumeBy(s, i) => format!("{}_market_volume_{}", s.name(), i.name()),
            ClassVolume(s, a) => format!("{}_{}_volume", s.name(), a.name()),
            ClassCount(s, a) => format!("{}_{}_count", s.name(), a.name()),
            Rate(i, None, k) => format!("rate_{}_{}", i.name(), kind_name(k)),
            Rate(i, Some(s), k) => format!("rate_{}_{}_{}", i.name(), s.name(), kind_name(k)),
        }
    }

    /// Raw quantities are averaged as is; all others are divided by their
    /// intraday pattern first.
    pub fn is_raw(&self) -> bool {
        matches!(self, Quantity::Rate(..))
    }

    pub fn value(&self, bar: &MinuteBar, prev_mid: Option<f64>) -> f64 {
        use Quantity::*;
        match *self {
            AbsReturn => match prev_mid {
                Some(p) if p > 0.0 && bar.mid_price > 0.0 => (bar.mid_price / p).ln().abs(),
                _ => f64::NAN,
            },
            Volume => bar.market_volume(),
            Spread => bar.spread,
            Imbalance(s) => {
                imbalance(bar.volume.market(s), bar.volume.market(s.opposite())).unwrap_or(f64::NAN)
            }
            MarketVolume(s) => bar.volume.market(s),
            MarketVolumeBy(s, i) => {
                bar.volume[FlowKey::new(s, Aggressiveness::PartiallyFilled, i)]
                    + bar.volume[FlowKey::new(s, Aggressiveness::Filled, i)]
            }
            ClassVolume(s, a) => bar.volume.sum_where(|k| k.side == s && k.aggressiveness == a),
            ClassCount(s, a) => bar.count.sum_where(|k| k.side == s && k.aggressiveness == a) as f64,
            Rate(i, None, k) => {
                let c = kind_counts(&bar.count, i, None);
                relative_rates(c[0], c[1], c[2]).map_or(f64::NAN, |r| pick(k, [r.market, r.limit, r.cancel]))
            }
            Rate(i, Some(s), k) => {
                let b = kind_counts(&bar.count, i, Some(Side::Buy));
                let sl = kind_counts(&bar.count, i, Some(Side::Sell));
                relative_rates_by_side(b, sl).map_or(f64::NAN, |r| {
                    let x = if s == Side::Buy { r.buy } else { r.sell };
                    pick(k, [x.market, x.limit, x.cancel])
                })
            }
        }
    }

    /// The quantity on the stock's day × minute grid. The first minute of
    /// every day has no return.
    pub fn grid(&self, series: &BarSeries) -> Result<MinuteGrid> {
        let mut values = Vec::with_capacity(series.bars.len());
        for (i, bar) in series.bars.iter().enumerate() {
            let prev = (bar.minute > 1 && i > 0).then(|| series.bars[i - 1].mid_price);
            values.push(self.value(bar, prev));
        }
        MinuteGrid::new(series.dates(), values)
    }
}

fn pick(k: OrderKind, v: [f64; 3]) -> f64 {
    match k {
        OrderKind::Market => v[0],
        OrderKind::Limit => v[1],
        OrderKind::Cancel => v[2],
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Quantity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Quantity::all()
            .into_iter()
            .find(|q| q.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown quantity {s:?}")))
    }
}
