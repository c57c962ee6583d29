use std::collections::BTreeMap;
use std::io::BufRead;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::ingest::bars::BarSeries;
use crate::types::FlowTable;

/// Stock splits keyed by stock id: (effective date, factor). A factor of 2
/// means one old share became two new shares on the effective date.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SplitTable {
    entries: BTreeMap<String, Vec<(NaiveDate, f64)>>,
}

impl SplitTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, stock_id: impl Into<String>, effective: NaiveDate, factor: f64) -> Result<()> {
        let stock_id = stock_id.into();
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Config(format!(
                "split factor for {stock_id} on {effective} must be positive, got {factor}"
            )));
        }
        let list = self.entries.entry(stock_id).or_default();
        list.push((effective, factor));
        list.sort_by_key(|(d, _)| *d);
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Cumulative factor applying to a bar dated `date`.
    pub fn factor_for(&self, stock_id: &str, date: NaiveDate) -> f64 {
        self.entries
            .get(stock_id)
            .map(|list| list.iter().filter(|(d, _)| date < *d).map(|(_, f)| f).product())
            .unwrap_or(1.0)
    }

    /// Reads `stock_id,effective_date,factor` rows (header required).
    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut table = SplitTable::new();
        let mut lines = input.lines();
        match lines.next() {
            None => return Ok(table),
            Some(h) => {
                let h = h.map_err(|e| Error::Unreadable(e.to_string()))?;
                if h.trim() != "stock_id,effective_date,factor" {
                    return Err(Error::Config(format!("split table header is {h:?}")));
                }
            }
        }
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Unreadable(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Config(format!("split table line {}: {line:?}", i + 2));
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 3 {
                return Err(bad());
            }
            let date = NaiveDate::parse_from_str(f[1], "%Y%m%d").map_err(|_| bad())?;
            let factor: f64 = f[2].parse().map_err(|_| bad())?;
            table.insert(f[0], date, factor)?;
        }
        Ok(table)
    }
}

/// Rescales bars dated before each split: volumes are multiplied by the
/// factor and prices divided by it.
pub fn apply_split_adjustment(series: &mut [BarSeries], table: &SplitTable) -> Result<()> {
    if table.is_empty() {
        return Ok(());
    }
    for s in series.iter_mut() {
        for bar in s.bars.iter_mut() {
            let f = table.factor_for(&s.stock_id, bar.date);
            if f == 1.0 {
                continue;
            }
            bar.volume = scale(&bar.volume, f);
            bar.executed = bar.executed.map(|v| v * f);
            bar.mid_price /= f;
            bar.best_bid /= f;
            bar.best_ask /= f;
            bar.spread /= f;
            bar.split_factor *= f;
        }
    }
    Ok(())
}

fn scale(t: &FlowTable<f64>, f: f64) -> FlowTable<f64> {
    t.map(|v| v * f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::bars::MinuteBar;
    use crate::ingest::clock::MINUTES_PER_DAY;
    use crate::types::{Aggressiveness, FlowKey, Investor, Side};

    fn series(days: &[NaiveDate], volume: f64) -> BarSeries {
        let key = FlowKey::new(Side::Buy, Aggressiveness::Filled, Investor::Individual);
        let mut bars = Vec::new();
        for (d, date) in days.iter().enumerate() {
            for m in 1..=MINUTES_PER_DAY as u16 {
                let mut vol = FlowTable::default();
                vol[key] = volume;
                bars.push(MinuteBar {
                    date: *date,
                    day_index: d as u32,
                    minute: m,
                    mid_price: 10.0,
                    best_bid: 9.99,
                    best_ask: 10.01,
                    spread: 0.02,
                    volume: vol,
                    count: FlowTable::default(),
                    executed: [volume, volume],
                    split_factor: 1.0,
                });
            }
        }
        BarSeries::new("000001", bars).unwrap()
    }

    fn day(n: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2003, 1, n).unwrap()
    }

    #[test]
    fn empty_table_is_identity() {
        let mut s = vec![series(&[day(5)], 500.0)];
        let before = s.clone();
        apply_split_adjustment(&mut s, &SplitTable::new()).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn two_for_one_split() {
        let mut t = SplitTable::new();
        t.insert("000001", day(10), 2.0).unwrap();
        let mut s = vec![series(&[day(5), day(15)], 500.0)];
        apply_split_adjustment(&mut s, &t).unwrap();
        let key = FlowKey::new(Side::Buy, Aggressiveness::Filled, Investor::Individual);
        let before = &s[0].day(0)[10];
        let after = &s[0].day(1)[10];
        assert_eq!(before.volume[key], 500.0 * 2.0);
        assert_eq!(before.mid_price, 10.0 / 2.0);
        assert_eq!(before.split_factor, 2.0);
        assert_eq!(after.volume[key], 500.0);
        assert_eq!(after.mid_price, 10.0);
    }

    #[test]
    fn non_positive_factor_is_fatal() {
        let mut t = SplitTable::new();
        assert!(matches!(t.insert("x", day(3), 0.0), Err(Error::Config(_))));
        assert!(t.insert("x", day(3), -2.0).is_err());
        let text = "stock_id,effective_date,factor\n000001,20030110,0\n";
        assert!(SplitTable::read(text.as_bytes()).is_err());
    }

    #[test]
    fn reads_table() {
        let text = "stock_id,effective_date,factor\n000001,20030110,2\n000001,20030120,1.5\n";
        let t = SplitTable::read(text.as_bytes()).unwrap();
        assert_eq!(t.factor_for("000001", day(5)), 3.0);
        assert_eq!(t.factor_for("000001", day(15)), 1.5);
        assert_eq!(t.factor_for("000001", day(25)), 1.0);
        assert_eq!(t.factor_for("000002", day(5)), 1.0);
    }
}
