use serde::{Deserialize, Serialize};

use crate::detect::{EventSign, ExtremeEvent, ReturnSeries};
use crate::error::{Error, Result};
use crate::ingest::clock::MINUTES_PER_DAY;

use super::{slot_time, PRE_EVENT, SLOTS};

/// Mean cumulative log return around events of one sign, zero at `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedCumulativeReturn {
    pub sign: EventSign,
    pub n_events: usize,
    pub mean: Vec<f64>,
    pub counts: Vec<usize>,
}

impl AlignedCumulativeReturn {
    pub fn at(&self, t: i32) -> f64 {
        super::time_slot(t).map_or(f64::NAN, |i| self.mean[i])
    }
}

/// Each event's path is anchored at its own `t = 0` before averaging, so
/// the mean is exactly zero there even when some paths are cut by the
/// sample edges. Overnight gaps contribute nothing.
pub fn aligned_cumulative_return(
    sign: EventSign,
    events: &[ExtremeEvent],
    series: &[ReturnSeries],
) -> Result<AlignedCumulativeReturn> {
    let mut selected: Vec<&ExtremeEvent> = events.iter().filter(|e| e.sign == sign).collect();
    if selected.is_empty() {
        return Err(Error::EmptyGroup(format!("{sign}/cumulative_return")));
    }
    selected.sort_by(|a, b| (&a.stock_id, a.date, a.minute).cmp(&(&b.stock_id, b.date, b.minute)));
    let mut sums = vec![0.0f64; SLOTS];
    let mut counts = vec![0usize; SLOTS];
    let zero = PRE_EVENT as usize;
    for e in &selected {
        let s = series
            .iter()
            .find(|s| s.stock_id == e.stock_id)
            .ok_or_else(|| Error::malformed("event", format!("no returns for stock {}", e.stock_id)))?;
        let d = s
            .days
            .binary_search(&e.date)
            .map_err(|_| Error::malformed("event", format!("{} {} not in returns", e.stock_id, e.date)))?;
        let origin = (d * MINUTES_PER_DAY + e.minute as usize - 1) as i64;
        let len = s.returns.len() as i64;
        let r = |g: i64| {
            let x = s.returns[g as usize];
            if x.is_finite() {
                x
            } else {
                0.0
            }
        };
        counts[zero] += 1;
        let mut c = 0.0;
        for i in zero + 1..SLOTS {
            let g = origin + slot_time(i) as i64;
            if g >= len {
                break;
            }
            c += r(g);
            sums[i] += c;
            counts[i] += 1;
        }
        let mut c = 0.0;
        for i in (0..zero).rev() {
            let g = origin + slot_time(i) as i64;
            if g < 0 {
                break;
            }
            c -= r(g + 1);
            sums[i] += c;
            counts[i] += 1;
        }
    }
    let mean = sums
        .iter()
        .zip(&counts)
        .map(|(s, n)| if *n > 0 { s / *n as f64 } else { f64::NAN })
        .collect();
    Ok(AlignedCumulativeReturn {
        sign,
        n_events: selected.len(),
        mean,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::study::time_slot;
    use chrono::NaiveDate;

    fn series(n_days: usize, r: impl Fn(usize, usize) -> f64) -> ReturnSeries {
        let start = NaiveDate::from_ymd_opt(2003, 4, 1).unwrap();
        let days: Vec<NaiveDate> = (0..n_days).map(|i| start + chrono::Duration::days(i as i64)).collect();
        let mut mids = Vec::new();
        for d in 0..n_days {
            let mut lm = 0.0f64;
            for m in 1..=MINUTES_PER_DAY {
                if m > 1 {
                    lm += r(d, m);
                }
                mids.push(10.0 * lm.exp());
            }
        }
        ReturnSeries::from_mids("000001", days, &mids).unwrap()
    }

    fn event(s: &ReturnSeries, d: usize, minute: u16, sign: EventSign) -> ExtremeEvent {
        ExtremeEvent {
            stock_id: s.stock_id.clone(),
            date: s.days[d],
            day_index: d,
            minute,
            sign,
            window: 1,
            cumulative_return: 0.05,
        }
    }

    #[test]
    fn step_path() {
        let s = series(3, |d, m| if d == 1 && m == 120 { 0.05 } else { 0.0 });
        let c = aligned_cumulative_return(EventSign::Positive, &[event(&s, 1, 120, EventSign::Positive)], &[s]).unwrap();
        for i in 0..SLOTS {
            let t = slot_time(i);
            let want = if t < 0 { -0.05 } else { 0.0 };
            assert!((c.mean[i] - want).abs() < 1e-12, "t = {t}: {}", c.mean[i]);
        }
        assert_eq!(c.at(0), 0.0);
    }

    #[test]
    fn flat_after_event_and_zero_at_origin() {
        let s = series(3, |d, m| if d == 1 && (100..=110).contains(&m) { -0.004 } else { 0.0 });
        let e = event(&s, 1, 110, EventSign::Negative);
        let c = aligned_cumulative_return(EventSign::Negative, &[e], &[s]).unwrap();
        assert_eq!(c.mean[time_slot(0).unwrap()], 0.0);
        assert!(c.mean[time_slot(1).unwrap()..].iter().all(|v| *v == 0.0));
        assert!((c.at(-11) - 0.044).abs() < 1e-12);
    }

    #[test]
    fn edges_and_empty_groups() {
        let s = series(1, |_, _| 0.001);
        let e = event(&s, 0, 50, EventSign::Positive);
        let c = aligned_cumulative_return(EventSign::Positive, &[e.clone()], &[s.clone()]).unwrap();
        assert_eq!(c.counts[time_slot(-49).unwrap()], 1);
        assert_eq!(c.counts[time_slot(-50).unwrap()], 0);
        assert!(c.at(-50).is_nan());
        assert_eq!(c.counts[time_slot(190).unwrap()], 1);
        assert_eq!(c.counts[time_slot(191).unwrap()], 0);
        assert!(matches!(
            aligned_cumulative_return(EventSign::Negative, &[e], &[s]),
            Err(Error::EmptyGroup(_))
        ));
    }
}
