//! Event-aligned trajectories and their group averages.
//!
//! Event time `t` runs over `[-100, 200]`; `t = 0` is the event minute.
//! Trajectories continue into the following trading day after the close
//! and into the previous one before the open, so the 240-minute days of the
//! sample are treated as one contiguous axis.

mod cumret;
mod peaks;
mod quantity;

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::deseason::MinuteGrid;
use crate::detect::{EventSign, ExtremeEvent};
use crate::error::{Error, Result};
use crate::ingest::clock::MINUTES_PER_DAY;

pub use cumret::{aligned_cumulative_return, AlignedCumulativeReturn};
pub use peaks::{peak_table, PeakRow};
pub use quantity::Quantity;

pub const PRE_EVENT: i32 = 100;
pub const POST_EVENT: i32 = 200;
pub const SLOTS: usize = (PRE_EVENT + POST_EVENT + 1) as usize;

/// Event time of slot `i`.
pub fn slot_time(i: usize) -> i32 {
    i as i32 - PRE_EVENT
}

pub fn time_slot(t: i32) -> Option<usize> {
    (-PRE_EVENT..=POST_EVENT).contains(&t).then(|| (t + PRE_EVENT) as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventTrajectory {
    pub event: ExtremeEvent,
    pub quantity: String,
    pub values: Vec<f64>,
    /// False for slots outside the sample and for undefined values.
    pub valid: Vec<bool>,
    pub extends_previous_day: bool,
    pub extends_next_day: bool,
}

/// Global position of the event minute on the contiguous minute axis.
fn event_origin(event: &ExtremeEvent, grid: &MinuteGrid) -> Result<i64> {
    let d = grid.day_of(event.date).ok_or_else(|| {
        Error::malformed(
            "event",
            format!("{} {} is not a day of the series", event.stock_id, event.date),
        )
    })?;
    if event.minute == 0 || event.minute as usize > MINUTES_PER_DAY {
        return Err(Error::malformed("event", format!("minute {} out of range", event.minute)));
    }
    Ok((d * MINUTES_PER_DAY + event.minute as usize - 1) as i64)
}

pub fn extract_trajectory(event: &ExtremeEvent, grid: &MinuteGrid, quantity: &str) -> Result<EventTrajectory> {
    let origin = event_origin(event, grid)?;
    let len = grid.values.len() as i64;
    let mut values = vec![f64::NAN; SLOTS];
    let mut valid = vec![false; SLOTS];
    for (i, (v, ok)) in values.iter_mut().zip(valid.iter_mut()).enumerate() {
        let g = origin + slot_time(i) as i64;
        if (0..len).contains(&g) {
            let x = grid.values[g as usize];
            *v = x;
            *ok = x.is_finite();
        }
    }
    let m = event.minute as i32;
    Ok(EventTrajectory {
        event: event.clone(),
        quantity: quantity.to_string(),
        values,
        valid,
        extends_previous_day: m - PRE_EVENT < 1,
        extends_next_day: m + POST_EVENT > MINUTES_PER_DAY as i32,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAverage {
    pub group: String,
    pub n_events: usize,
    /// `NaN` where no event has data.
    pub mean: Vec<f64>,
    pub counts: Vec<usize>,
}

impl GroupAverage {
    pub fn at(&self, t: i32) -> f64 {
        time_slot(t).map_or(f64::NAN, |i| self.mean[i])
    }
}

fn event_key(e: &ExtremeEvent) -> (&str, chrono::NaiveDate, u16) {
    (e.stock_id.as_str(), e.date, e.minute)
}

/// Per-slot mean over events with valid data. Events are summed in
/// (stock, date, minute) order so the result does not depend on input order.
pub fn group_average(group: &str, trajectories: &[EventTrajectory]) -> Result<GroupAverage> {
    if trajectories.is_empty() {
        return Err(Error::EmptyGroup(group.to_string()));
    }
    let mut order: Vec<&EventTrajectory> = trajectories.iter().collect();
    order.sort_by(|a, b| event_key(&a.event).cmp(&event_key(&b.event)));
    let mut sums = vec![0.0f64; SLOTS];
    let mut counts = vec![0usize; SLOTS];
    for tr in order {
        for i in 0..SLOTS {
            if tr.valid[i] {
                sums[i] += tr.values[i];
                counts[i] += 1;
            }
        }
    }
    let mean = sums
        .iter()
        .zip(&counts)
        .map(|(s, n)| if *n > 0 { s / *n as f64 } else { f64::NAN })
        .collect();
    Ok(GroupAverage {
        group: group.to_string(),
        n_events: trajectories.len(),
        mean,
        counts,
    })
}

/// `(t_max, value)` of the largest finite value; ties go to the `t` closest
/// to 0, then to the negative one.
pub fn find_peak(avg: &GroupAverage) -> Result<(i32, f64)> {
    avg.mean
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .map(|(i, v)| (slot_time(i), *v))
        .max_by(|a, b| {
            a.1.partial_cmp(&b.1)
                .unwrap_or(Ordering::Equal)
                .then_with(|| b.0.abs().cmp(&a.0.abs()))
                .then_with(|| b.0.cmp(&a.0))
        })
        .ok_or_else(|| Error::AllMasked(avg.group.clone()))
}

/// Day indices touched by any event window of the given stock.
pub fn event_window_days(events: &[ExtremeEvent], grid: &MinuteGrid) -> HashSet<usize> {
    let n = grid.n_days() as i64;
    let mut out = HashSet::new();
    for e in events {
        let Ok(origin) = event_origin(e, grid) else { continue };
        let first = (origin - PRE_EVENT as i64).max(0) / MINUTES_PER_DAY as i64;
        let last = ((origin + POST_EVENT as i64) / MINUTES_PER_DAY as i64).min(n - 1);
        out.extend((first..=last).map(|d| d as usize));
    }
    out
}

/// Group label used in file names and reports.
pub fn group_id(sign: EventSign, quantity: &str) -> String {
    format!("{}/{}", sign.name(), quantity)
}
