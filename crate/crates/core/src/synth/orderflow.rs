use std::collections::{BTreeMap, HashMap, VecDeque};

use chrono::{Duration, NaiveTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{stock_id, ScenarioSpec};
use crate::error::{Error, Result};
use crate::ingest::record::{EventKind, OrderEvent, Timestamp, BOARD_LOT};
use crate::types::{Aggressiveness, FlowKey, Investor, Price, Side, PRICE_DECIMALS};

/// Target shares of market, limit and cancel among one investor class's
/// logical orders. All zero silences the class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateTarget {
    pub market: f64,
    pub limit: f64,
    pub cancel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrderFlowSpec {
    /// Order actions per stock-day after the opening seed orders.
    pub actions_per_day: usize,
    pub institution_share: f64,
    pub buy_share: f64,
    /// Fraction of market orders built to fill only partially.
    pub partial_share: f64,
    pub individual: RateTarget,
    pub institution: RateTarget,
    /// Price levels seeded on each side at the open.
    pub seed_levels: usize,
    pub seed_size: u64,
    /// Largest order in board lots.
    pub max_lots: u64,
}

impl Default for OrderFlowSpec {
    fn default() -> Self {
        OrderFlowSpec {
            actions_per_day: 500,
            institution_share: 0.3,
            buy_share: 0.5,
            partial_share: 0.1,
            individual: RateTarget {
                market: 0.26,
                limit: 0.60,
                cancel: 0.14,
            },
            institution: RateTarget {
                market: 0.50,
                limit: 0.40,
                cancel: 0.10,
            },
            seed_levels: 5,
            seed_size: 2000,
            max_lots: 10,
        }
    }
}

/// Per-action probabilities: filled market, partial market, limit, cancel.
///
/// A partial fill yields two logical orders (market part and resting
/// remainder), so with `q` the partial share and `m, l, c` the targets:
/// `M = m/(1 − qm)` actions are market orders, `qM` of them partial, and
/// `l(1 + qM) − qM`, `c(1 + qM)` are limit and cancel actions.
fn action_probabilities(t: &RateTarget, q: f64) -> [f64; 4] {
    let m_actions = t.market / (1.0 - q * t.market);
    let partial = q * m_actions;
    [
        m_actions - partial,
        partial,
        t.limit * (1.0 + partial) - partial,
        t.cancel * (1.0 + partial),
    ]
}

impl RateTarget {
    fn is_silent(&self) -> bool {
        self.market == 0.0 && self.limit == 0.0 && self.cancel == 0.0
    }
}

impl OrderFlowSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |why: String| Err(Error::Scenario(format!("order_flow: {why}")));
        for (name, x) in [
            ("institution_share", self.institution_share),
            ("buy_share", self.buy_share),
            ("partial_share", self.partial_share),
        ] {
            if !(0.0..=1.0).contains(&x) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        if self.partial_share >= 1.0 {
            return bad("partial_share must be below 1".into());
        }
        if self.max_lots == 0 || self.seed_size == 0 || self.seed_size % BOARD_LOT != 0 {
            return bad("max_lots and seed_size must be positive, seed_size in board lots".into());
        }
        for (name, t) in [("individual", &self.individual), ("institution", &self.institution)] {
            if [t.market, t.limit, t.cancel].iter().any(|x| !(*x >= 0.0)) {
                return bad(format!("{name} rates must be non-negative"));
            }
            if t.is_silent() {
                continue;
            }
            if ((t.market + t.limit + t.cancel) - 1.0).abs() > 1e-9 {
                return bad(format!("{name} rates must sum to 1"));
            }
            if action_probabilities(t, self.partial_share)[2] < -1e-12 {
                return bad(format!("{name}: limit rate too small for the partial-fill share"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthLabel {
    pub stock_id: String,
    pub order_id: String,
    pub key: FlowKey,
    pub volume: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderFlowTruth {
    pub seed: u64,
    /// Logical orders in stream order.
    pub labels: Vec<TruthLabel>,
    pub individual: RateTarget,
    pub institution: RateTarget,
    pub partial_fills: usize,
}

struct Resting {
    id: u64,
    remaining: u64,
    investor: Investor,
}

/// Uniform sampling from a changing set of ids.
#[derive(Default)]
struct LiveSet {
    ids: Vec<u64>,
    pos: HashMap<u64, usize>,
}

impl LiveSet {
    fn insert(&mut self, id: u64) {
        self.pos.insert(id, self.ids.len());
        self.ids.push(id);
    }

    fn remove(&mut self, id: u64) {
        if let Some(i) = self.pos.remove(&id) {
            self.ids.swap_remove(i);
            if let Some(moved) = self.ids.get(i) {
                self.pos.insert(*moved, i);
            }
        }
    }
}

/// The generator's own price-time priority book, in ticks.
#[derive(Default)]
struct GenBook {
    levels: [BTreeMap<i64, VecDeque<Resting>>; 2],
    meta: HashMap<u64, (Side, i64)>,
    live: [[LiveSet; 2]; 2],
}

struct GenFill {
    passive: u64,
    investor: Investor,
    size: u64,
}

impl GenBook {
    fn best(&self, side: Side) -> Option<i64> {
        let l = &self.levels[side as usize];
        match side {
            Side::Buy => l.keys().next_back().copied(),
            Side::Sell => l.keys().next().copied(),
        }
    }

    fn depth_at(&self, side: Side, price: i64) -> u64 {
        self.levels[side as usize]
            .get(&price)
            .map_or(0, |q| q.iter().map(|r| r.remaining).sum())
    }

    fn n_levels(&self, side: Side) -> usize {
        self.levels[side as usize].len()
    }

    fn n_orders(&self, side: Side) -> usize {
        self.levels[side as usize].values().map(VecDeque::len).sum()
    }

    fn rest(&mut self, id: u64, side: Side, price: i64, size: u64, investor: Investor) {
        self.levels[side as usize].entry(price).or_default().push_back(Resting {
            id,
            remaining: size,
            investor,
        });
        self.meta.insert(id, (side, price));
        self.live[investor as usize][side as usize].insert(id);
    }

    /// Takes `size` from the opposite queue at `price`, oldest first.
    fn take(&mut self, side: Side, price: i64, mut size: u64) -> Vec<GenFill> {
        let opp = side.opposite();
        let mut fills = Vec::new();
        let queue = self.levels[opp as usize].get_mut(&price).expect("level exists");
        while size > 0 {
            let front = queue.front_mut().expect("enough depth");
            let f = front.remaining.min(size);
            front.remaining -= f;
            size -= f;
            fills.push(GenFill {
                passive: front.id,
                investor: front.investor,
                size: f,
            });
            if front.remaining == 0 {
                let done = queue.pop_front().expect("front exists");
                self.meta.remove(&done.id);
                self.live[done.investor as usize][opp as usize].remove(done.id);
            }
        }
        if queue.is_empty() {
            self.levels[opp as usize].remove(&price);
        }
        fills
    }

    fn cancel(&mut self, id: u64) -> Option<(Side, i64, u64, Investor)> {
        let (side, price) = self.meta.remove(&id)?;
        let queue = self.levels[side as usize].get_mut(&price)?;
        let i = queue.iter().position(|r| r.id == id)?;
        let r = queue.remove(i)?;
        if queue.is_empty() {
            self.levels[side as usize].remove(&price);
        }
        self.live[r.investor as usize][side as usize].remove(id);
        Some((side, price, r.remaining, r.investor))
    }

    fn clear(&mut self) {
        *self = GenBook::default();
    }
}

/// Milliseconds into the continuous session mapped to clock time.
fn session_time(ms: u32) -> NaiveTime {
    let (base, offset) = if ms < 7_200_000 {
        (NaiveTime::from_hms_opt(9, 30, 0), ms)
    } else {
        (NaiveTime::from_hms_opt(13, 0, 0), ms - 7_200_000)
    };
    base.expect("valid time") + Duration::milliseconds(offset as i64)
}

struct Emitter<'a> {
    stock: &'a str,
    events: Vec<OrderEvent>,
    labels: Vec<TruthLabel>,
    next_id: u64,
    ts: Timestamp,
}

impl Emitter<'_> {
    fn push(&mut self, kind: EventKind, id: u64, side: Side, price: i64, size: u64, investor: Investor) {
        self.events.push(OrderEvent {
            stock_id: self.stock.to_string(),
            timestamp: self.ts,
            kind,
            order_id: id.to_string(),
            side,
            price: Price::from_ticks(price),
            size,
            investor,
        });
    }

    fn label(&mut self, id: u64, side: Side, aggr: Aggressiveness, investor: Investor, volume: u64) {
        self.labels.push(TruthLabel {
            stock_id: self.stock.to_string(),
            order_id: id.to_string(),
            key: FlowKey::new(side, aggr, investor),
            volume,
        });
    }

    fn fresh_id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    fn executions(&mut self, id: u64, side: Side, price: i64, investor: Investor, fills: &[GenFill]) {
        for f in fills {
            self.push(EventKind::Execute, f.passive, side.opposite(), price, f.size, f.investor);
            self.push(EventKind::Execute, id, side, price, f.size, investor);
        }
    }
}

#[derive(Clone, Copy)]
enum Action {
    Filled,
    Partial,
    Limit,
    Cancel,
}

/// Tries one action; `false` when the book cannot support it.
fn act(
    action: Action,
    side: Side,
    investor: Investor,
    spec: &OrderFlowSpec,
    book: &mut GenBook,
    out: &mut Emitter<'_>,
    rng: &mut ChaCha8Rng,
    reference: i64,
) -> bool {
    let opp = side.opposite();
    let lots = |rng: &mut ChaCha8Rng, max: u64| rng.random_range(1..=max) * BOARD_LOT;
    match action {
        Action::Filled => {
            let Some(price) = book.best(opp) else { return false };
            let depth = book.depth_at(opp, price);
            // Never empty the opposite side.
            let cap = if book.n_levels(opp) > 1 { depth } else { depth.saturating_sub(BOARD_LOT) };
            let max = spec.max_lots.min(cap / BOARD_LOT);
            if max == 0 {
                return false;
            }
            let size = lots(rng, max);
            let id = out.fresh_id();
            out.push(EventKind::Submit, id, side, price, size, investor);
            let fills = book.take(side, price, size);
            out.executions(id, side, price, investor, &fills);
            out.label(id, side, Aggressiveness::Filled, investor, size);
        }
        Action::Partial => {
            let Some(price) = book.best(opp) else { return false };
            if book.n_levels(opp) < 2 {
                return false;
            }
            let depth = book.depth_at(opp, price);
            let size = depth + lots(rng, spec.max_lots);
            let id = out.fresh_id();
            out.push(EventKind::Submit, id, side, price, size, investor);
            let fills = book.take(side, price, depth);
            out.executions(id, side, price, investor, &fills);
            book.rest(id, side, price, size - depth, investor);
            out.label(id, side, Aggressiveness::PartiallyFilled, investor, depth);
            out.label(id, side, Aggressiveness::Limit, investor, size - depth);
        }
        Action::Limit => {
            let sign = if side == Side::Buy { 1 } else { -1 };
            let anchor = book
                .best(side)
                .or_else(|| book.best(opp).map(|p| p - sign))
                .unwrap_or(reference - sign);
            let depth_ticks: i64 = rng.random_range(0..5);
            let mut price = anchor - sign * depth_ticks;
            if rng.random_bool(0.2) {
                price = anchor + sign;
            }
            if let Some(o) = book.best(opp) {
                if (price - o) * sign >= 0 {
                    price = o - sign;
                }
            }
            if price <= 0 {
                return false;
            }
            let size = lots(rng, spec.max_lots);
            let id = out.fresh_id();
            out.push(EventKind::Submit, id, side, price, size, investor);
            book.rest(id, side, price, size, investor);
            out.label(id, side, Aggressiveness::Limit, investor, size);
        }
        Action::Cancel => {
            let set = &book.live[investor as usize][side as usize];
            if set.ids.is_empty() || book.n_orders(side) < 2 {
                return false;
            }
            let id = set.ids[rng.random_range(0..set.ids.len())];
            let (side, price, remaining, inv) = book.cancel(id).expect("live order");
            out.push(EventKind::Cancel, id, side, price, remaining, inv);
            out.label(id, side, Aggressiveness::Canceled, inv, remaining);
        }
    }
    true
}

/// Order stream of every stock in the scenario, stock by stock, with the
/// class label of each logical order.
pub fn generate_orderflow(spec: &ScenarioSpec) -> Result<(Vec<OrderEvent>, OrderFlowTruth)> {
    spec.validate()?;
    let of = spec
        .order_flow
        .as_ref()
        .ok_or_else(|| Error::Scenario("scenario has no order_flow section".into()))?;
    let probs = [
        action_probabilities(&of.individual, of.partial_share),
        action_probabilities(&of.institution, of.partial_share),
    ];
    let silent = [of.individual.is_silent(), of.institution.is_silent()];
    let dates = spec.dates();
    let mut events = Vec::new();
    let mut labels = Vec::new();
    let mut partial_fills = 0;

    if silent.iter().all(|s| *s) {
        return Ok((
            events,
            OrderFlowTruth {
                seed: spec.seed,
                labels,
                individual: of.individual,
                institution: of.institution,
                partial_fills,
            },
        ));
    }

    for s in 0..spec.stocks {
        let sid = stock_id(s);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream((1u64 << 32) + s as u64);
        let mut out = Emitter {
            stock: &sid,
            events: Vec::new(),
            labels: Vec::new(),
            next_id: 0,
            ts: Timestamp::new(dates[0], session_time(0)),
        };
        let mut book = GenBook::default();
        let mut reference = (spec.initial_price * 10f64.powi(PRICE_DECIMALS as i32)).round() as i64;
        for date in &dates {
            book.clear();
            out.ts = Timestamp::new(*date, session_time(0));
            for level in 1..=of.seed_levels as i64 {
                for side in Side::ALL {
                    let price = if side == Side::Buy { reference - level } else { reference + level };
                    if price <= 0 {
                        continue;
                    }
                    let investor = Investor::ALL[(level as usize) % 2];
                    let id = out.fresh_id();
                    out.push(EventKind::Submit, id, side, price, of.seed_size, investor);
                    book.rest(id, side, price, of.seed_size, investor);
                    out.label(id, side, Aggressiveness::Limit, investor, of.seed_size);
                }
            }
            let mut times: Vec<u32> = (0..of.actions_per_day).map(|_| rng.random_range(0..14_400_000)).collect();
            times.sort_unstable();
            for ms in times {
                out.ts = Timestamp::new(*date, session_time(ms));
                let investor = if rng.random_bool(of.institution_share) {
                    Investor::Institution
                } else {
                    Investor::Individual
                };
                if silent[investor as usize] {
                    continue;
                }
                let p = probs[investor as usize];
                for _ in 0..20 {
                    let u: f64 = rng.random();
                    let action = if u < p[0] {
                        Action::Filled
                    } else if u < p[0] + p[1] {
                        Action::Partial
                    } else if u < p[0] + p[1] + p[2] {
                        Action::Limit
                    } else {
                        Action::Cancel
                    };
                    let side = if rng.random_bool(of.buy_share) { Side::Buy } else { Side::Sell };
                    if act(action, side, investor, of, &mut book, &mut out, &mut rng, reference) {
                        if matches!(action, Action::Partial) {
                            partial_fills += 1;
                        }
                        break;
                    }
                }
            }
            if let (Some(b), Some(a)) = (book.best(Side::Buy), book.best(Side::Sell)) {
                reference = (a + b) / 2;
            }
        }
        events.extend(out.events);
        labels.extend(out.labels);
    }
    Ok((
        events,
        OrderFlowTruth {
            seed: spec.seed,
            labels,
            individual: of.individual,
            institution: of.institution,
            partial_fills,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{replay_stock, relative_rates};
    use crate::types::OrderKind;

    fn scenario(days: usize, of: OrderFlowSpec) -> ScenarioSpec {
        ScenarioSpec {
            days,
            order_flow: Some(of),
            ..ScenarioSpec::default()
        }
    }

    fn replayed_labels(events: &[OrderEvent]) -> Vec<(String, FlowKey, u64)> {
        let r = replay_stock(events);
        assert_eq!(r.diagnostics.execution_mismatches, 0);
        assert_eq!(r.diagnostics.stale_cancels, 0);
        r.orders.into_iter().map(|o| (o.order_id, o.key, o.volume)).collect()
    }

    fn truth_labels(t: &OrderFlowTruth) -> Vec<(String, FlowKey, u64)> {
        t.labels.iter().map(|l| (l.order_id.clone(), l.key, l.volume)).collect()
    }

    #[test]
    fn action_mix_reproduces_logical_rates() {
        let t = RateTarget {
            market: 0.26,
            limit: 0.60,
            cancel: 0.14,
        };
        let p = action_probabilities(&t, 0.2);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let total = 1.0 + p[1];
        assert!(((p[0] + p[1]) / total - 0.26).abs() < 1e-12);
        assert!(((p[2] + p[1]) / total - 0.60).abs() < 1e-12);
        assert!((p[3] / total - 0.14).abs() < 1e-12);
    }

    #[test]
    fn labels_survive_replay() {
        let spec = scenario(5, OrderFlowSpec::default());
        let (events, truth) = generate_orderflow(&spec).unwrap();
        assert!(truth.partial_fills > 0);
        assert_eq!(replayed_labels(&events), truth_labels(&truth));
        let (again, _) = generate_orderflow(&spec).unwrap();
        assert_eq!(events, again);
    }

    #[test]
    fn partial_fill_splits_at_resting_depth() {
        let mut book = GenBook::default();
        let sid = "000001".to_string();
        let mut out = Emitter {
            stock: &sid,
            events: Vec::new(),
            labels: Vec::new(),
            next_id: 100,
            ts: Timestamp::new(chrono::NaiveDate::from_ymd_opt(2003, 1, 2).unwrap(), session_time(0)),
        };
        book.rest(1, Side::Sell, 1000, 600, Investor::Individual);
        book.rest(2, Side::Sell, 1001, 500, Investor::Individual);
        book.rest(3, Side::Buy, 990, 500, Investor::Individual);
        for (id, side, price, size) in [(1, Side::Sell, 1000, 600), (2, Side::Sell, 1001, 500), (3, Side::Buy, 990, 500)] {
            out.push(EventKind::Submit, id, side, price, size, Investor::Individual);
        }
        let spec = OrderFlowSpec {
            max_lots: 4,
            ..OrderFlowSpec::default()
        };
        // The remainder is drawn in lots; seek a seed giving 400 shares.
        let mut rng = (0..)
            .map(ChaCha8Rng::seed_from_u64)
            .find(|r| r.clone().random_range(1..=spec.max_lots) == 4)
            .unwrap();
        assert!(act(Action::Partial, Side::Buy, Investor::Institution, &spec, &mut book, &mut out, &mut rng, 995));
        let submitted = out.events.iter().rev().find(|e| e.kind == EventKind::Submit).unwrap();
        assert_eq!(submitted.size, 1000);
        let tail: Vec<(Aggressiveness, u64)> = out.labels.iter().map(|l| (l.key.aggressiveness, l.volume)).collect();
        assert_eq!(tail, [(Aggressiveness::PartiallyFilled, 600), (Aggressiveness::Limit, 400)]);
        let replay = replayed_labels(&out.events);
        let last: Vec<(Aggressiveness, u64)> = replay.iter().rev().take(2).rev().map(|(_, k, v)| (k.aggressiveness, *v)).collect();
        assert_eq!(last, tail);
    }

    #[test]
    fn buy_limit_only() {
        let only = RateTarget {
            market: 0.0,
            limit: 1.0,
            cancel: 0.0,
        };
        let spec = scenario(
            3,
            OrderFlowSpec {
                buy_share: 1.0,
                seed_levels: 0,
                partial_share: 0.0,
                individual: only,
                institution: only,
                ..OrderFlowSpec::default()
            },
        );
        let (events, truth) = generate_orderflow(&spec).unwrap();
        assert!(!events.is_empty());
        let got = replayed_labels(&events);
        assert!(got.iter().all(|(_, k, _)| k.side == Side::Buy && k.aggressiveness == Aggressiveness::Limit));
        assert_eq!(got, truth_labels(&truth));
    }

    #[test]
    fn silent_rates_give_an_empty_stream() {
        let zero = RateTarget {
            market: 0.0,
            limit: 0.0,
            cancel: 0.0,
        };
        let spec = scenario(
            2,
            OrderFlowSpec {
                individual: zero,
                institution: zero,
                ..OrderFlowSpec::default()
            },
        );
        let (events, truth) = generate_orderflow(&spec).unwrap();
        assert!(events.is_empty() && truth.labels.is_empty());
    }

    #[test]
    fn long_run_rates_match_targets() {
        let spec = scenario(40, OrderFlowSpec::default());
        let (events, _) = generate_orderflow(&spec).unwrap();
        let r = replay_stock(&events);
        let mut counts = [0u32; 3];
        for o in r.orders.iter().filter(|o| o.key.investor == Investor::Individual) {
            let slot = match o.key.aggressiveness.kind() {
                OrderKind::Market => 0,
                OrderKind::Limit => 1,
                OrderKind::Cancel => 2,
            };
            counts[slot] += 1;
        }
        let rates = relative_rates(counts[0], counts[1], counts[2]).unwrap();
        assert!((rates.market - 0.26).abs() < 0.02, "{rates:?}");
        assert!((rates.limit - 0.60).abs() < 0.02, "{rates:?}");
        assert!((rates.cancel - 0.14).abs() < 0.02, "{rates:?}");
    }

    #[test]
    fn invalid_flow_specs() {
        let mut of = OrderFlowSpec::default();
        of.individual.market = 0.5;
        assert!(of.validate().is_err());
        let of = OrderFlowSpec {
            partial_share: 0.9,
            individual: RateTarget {
                market: 0.9,
                limit: 0.05,
                cancel: 0.05,
            },
            ..OrderFlowSpec::default()
        };
        assert!(of.validate().is_err());
    }
}
