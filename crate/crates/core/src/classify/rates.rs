use serde::{Deserialize, Serialize};

/// Buy imbalance `V_b / (V_b + V_s)` of effective market-order volume.
/// Swap the arguments for the sell imbalance. `None` when nothing traded.
pub fn imbalance(buy_volume: f64, sell_volume: f64) -> Option<f64> {
    let total = buy_volume + sell_volume;
    (total > 0.0).then(|| buy_volume / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinuteImbalance {
    pub buy_volume: f64,
    pub sell_volume: f64,
    pub ratio: Option<f64>,
}

impl MinuteImbalance {
    pub fn new(buy_volume: f64, sell_volume: f64) -> Self {
        MinuteImbalance {
            buy_volume,
            sell_volume,
            ratio: imbalance(buy_volume, sell_volume),
        }
    }
}

/// Proportions of market, limit and cancel order numbers in one minute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeRates {
    pub market: f64,
    pub limit: f64,
    pub cancel: f64,
}

pub fn relative_rates(market: u32, limit: u32, cancel: u32) -> Option<RelativeRates> {
    let total = market as f64 + limit as f64 + cancel as f64;
    (total > 0.0).then(|| RelativeRates {
        market: market as f64 / total,
        limit: limit as f64 / total,
        cancel: cancel as f64 / total,
    })
}

/// Rates split by side; all six proportions share one denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideRates {
    pub buy: RelativeRates,
    pub sell: RelativeRates,
}

pub fn relative_rates_by_side(buy: [u32; 3], sell: [u32; 3]) -> Option<SideRates> {
    let total: f64 = buy.iter().chain(sell.iter()).map(|&n| n as f64).sum();
    if total <= 0.0 {
        return None;
    }
    let scale = |c: [u32; 3]| RelativeRates {
        market: c[0] as f64 / total,
        limit: c[1] as f64 / total,
        cancel: c[2] as f64 / total,
    };
    Some(SideRates {
        buy: scale(buy),
        sell: scale(sell),
    })
}
