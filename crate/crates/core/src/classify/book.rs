//! Price-time priority limit order book.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::types::{Investor, Price, Side};

/// Top-of-book snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BookState {
    pub best_bid: Option<Price>,
    pub best_ask: Option<Price>,
    pub bid_depth: u64,
    pub ask_depth: u64,
}

impl BookState {
    pub fn best(&self, side: Side) -> Option<Price> {
        match side {
            Side::Buy => self.best_bid,
            Side::Sell => self.best_ask,
        }
    }

    /// Both quotes, when both sides are non-empty.
    pub fn quotes(&self) -> Option<(Price, Price)> {
        Some((self.best_bid?, self.best_ask?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Resting {
    id: String,
    remaining: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fill {
    pub passive_id: String,
    pub price: Price,
    pub size: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MatchOutcome {
    pub fills: Vec<Fill>,
    pub executed: u64,
    pub resting: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Canceled {
    pub side: Side,
    pub price: Price,
    pub investor: Investor,
    pub remaining: u64,
}

#[derive(Debug, Clone)]
struct OrderMeta {
    side: Side,
    price: Price,
    investor: Investor,
}

#[derive(Debug, Clone, Default)]
pub struct OrderBook {
    bids: BTreeMap<Price, VecDeque<Resting>>,
    asks: BTreeMap<Price, VecDeque<Resting>>,
    live: HashMap<String, OrderMeta>,
}

impl OrderBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.bids.clear();
        self.asks.clear();
        self.live.clear();
    }

    pub fn best_bid(&self) -> Option<Price> {
        self.bids.keys().next_back().copied()
    }

    pub fn best_ask(&self) -> Option<Price> {
        self.asks.keys().next().copied()
    }

    pub fn state(&self) -> BookState {
        let depth = |level: Option<&VecDeque<Resting>>| level.map_or(0, |q| q.iter().map(|r| r.remaining).sum());
        BookState {
            best_bid: self.best_bid(),
            best_ask: self.best_ask(),
            bid_depth: depth(self.bids.values().next_back()),
            ask_depth: depth(self.asks.values().next()),
        }
    }

    pub fn is_live(&self, id: &str) -> bool {
        self.live.contains_key(id)
    }

    pub fn investor_of(&self, id: &str) -> Option<Investor> {
        self.live.get(id).map(|m| m.investor)
    }

    /// Matches an incoming limit order against the opposite side and rests
    /// any remainder at its limit price.
    pub fn submit(&mut self, id: &str, side: Side, price: Price, size: u64, investor: Investor) -> MatchOutcome {
        let mut out = MatchOutcome::default();
        let mut left = size;
        let opposite = match side {
            Side::Buy => &mut self.asks,
            Side::Sell => &mut self.bids,
        };
        while left > 0 {
            let level_price = match side {
                Side::Buy => opposite.keys().next().copied(),
                Side::Sell => opposite.keys().next_back().copied(),
            };
            let Some(level_price) = level_price else { break };
            let crosses = match side {
                Side::Buy => level_price <= price,
                Side::Sell => level_price >= price,
            };
            if !crosses {
                break;
            }
            let queue = opposite.get_mut(&level_price).expect("level exists");
            while left > 0 {
                let Some(front) = queue.front_mut() else { break };
                let take = left.min(front.remaining);
                front.remaining -= take;
                left -= take;
                out.fills.push(Fill {
                    passive_id: front.id.clone(),
                    price: level_price,
                    size: take,
                });
                if front.remaining == 0 {
                    let done = queue.pop_front().expect("front exists");
                    self.live.remove(&done.id);
                }
            }
            if queue.is_empty() {
                opposite.remove(&level_price);
            }
        }
        out.executed = size - left;
        out.resting = left;
        if left > 0 {
            let own = match side {
                Side::Buy => &mut self.bids,
                Side::Sell => &mut self.asks,
            };
            own.entry(price).or_default().push_back(Resting {
                id: id.to_string(),
                remaining: left,
            });
            self.live.insert(id.to_string(), OrderMeta { side, price, investor });
        }
        out
    }

    /// Removes a resting order, returning its unexecuted remainder.
    pub fn cancel(&mut self, id: &str) -> Option<Canceled> {
        let meta = self.live.remove(id)?;
        let book = match meta.side {
            Side::Buy => &mut self.bids,
            Side::Sell => &mut self.asks,
        };
        let queue = book.get_mut(&meta.price)?;
        let pos = queue.iter().position(|r| r.id == id)?;
        let removed = queue.remove(pos).expect("position is valid");
        if queue.is_empty() {
            book.remove(&meta.price);
        }
        Some(Canceled {
            side: meta.side,
            price: meta.price,
            investor: meta.investor,
            remaining: removed.remaining,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(t: i64) -> Price {
        Price(t)
    }

    #[test]
    fn price_then_time_priority() {
        let mut b = OrderBook::new();
        b.submit("a1", Side::Sell, p(1003), 100, Investor::Individual);
        b.submit("a2", Side::Sell, p(1002), 100, Investor::Individual);
        b.submit("a3", Side::Sell, p(1002), 100, Investor::Institution);
        let out = b.submit("b1", Side::Buy, p(1003), 250, Investor::Individual);
        let ids: Vec<_> = out.fills.iter().map(|f| (f.passive_id.as_str(), f.price.0, f.size)).collect();
        assert_eq!(ids, [("a2", 1002, 100), ("a3", 1002, 100), ("a1", 1003, 50)]);
        assert_eq!(out.executed, 250);
        assert_eq!(out.resting, 0);
        assert_eq!(b.best_ask(), Some(p(1003)));
        assert_eq!(b.state().ask_depth, 50);
    }

    #[test]
    fn remainder_rests_and_can_be_canceled() {
        let mut b = OrderBook::new();
        b.submit("a", Side::Sell, p(1002), 600, Investor::Individual);
        let out = b.submit("b", Side::Buy, p(1002), 1000, Investor::Institution);
        assert_eq!((out.executed, out.resting), (600, 400));
        assert_eq!(b.best_bid(), Some(p(1002)));
        assert_eq!(b.best_ask(), None);
        let c = b.cancel("b").unwrap();
        assert_eq!(c.remaining, 400);
        assert_eq!(c.investor, Investor::Institution);
        assert_eq!(b.best_bid(), None);
        assert!(b.cancel("b").is_none());
        assert!(b.cancel("a").is_none());
    }

    #[test]
    fn non_crossing_order_rests() {
        let mut b = OrderBook::new();
        b.submit("a", Side::Sell, p(1002), 100, Investor::Individual);
        let out = b.submit("b", Side::Buy, p(1000), 100, Investor::Individual);
        assert_eq!(out.executed, 0);
        let s = b.state();
        assert_eq!(s.quotes(), Some((p(1000), p(1002))));
    }
}
