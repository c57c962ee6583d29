//! Intraday pattern removal: `x(d,t') = X(d,t') / P(t')` with `P` the
//! cross-day mean of `X` at each intraday minute.

use std::collections::HashSet;

use chrono::NaiveDate;
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::clock::MINUTES_PER_DAY;

/// Values on the day × intraday-minute grid of one stock. `NaN` marks an
/// undefined value (no return at the first minute of a day, no trades for
/// an imbalance, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct MinuteGrid {
    pub days: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl MinuteGrid {
    pub fn new(days: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        if values.len() != days.len() * MINUTES_PER_DAY {
            return Err(Error::Dimension(format!(
                "{} values for {} days of {MINUTES_PER_DAY} minutes",
                values.len(),
                days.len()
            )));
        }
        Ok(MinuteGrid { days, values })
    }

    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    /// Value at day `d` (0-based) and intraday index `minute` (1-based).
    pub fn get(&self, d: usize, minute: u16) -> f64 {
        self.values[d * MINUTES_PER_DAY + minute as usize - 1]
    }

    pub fn row(&self, d: usize) -> &[f64] {
        &self.values[d * MINUTES_PER_DAY..(d + 1) * MINUTES_PER_DAY]
    }

    pub fn day_of(&self, date: NaiveDate) -> Option<usize> {
        self.days.binary_search(&date).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntradayPattern {
    pub quantity: String,
    /// `P(t')` for `t' = 1..=240`; `NaN` where masked.
    pub values: Vec<f64>,
    pub support: Vec<bool>,
}

impl IntradayPattern {
    pub fn is_fully_masked(&self) -> bool {
        !self.support.iter().any(|s| *s)
    }
}

/// Cross-day mean at every intraday minute over all days.
pub fn estimate_pattern(grid: &MinuteGrid, quantity: &str) -> IntradayPattern {
    estimate_pattern_excluding(grid, quantity, &HashSet::new())
}

/// Cross-day mean skipping the listed day indices. Minutes whose mean is
/// zero (or that have no finite value at all) are masked.
pub fn estimate_pattern_excluding(grid: &MinuteGrid, quantity: &str, excluded: &HashSet<usize>) -> IntradayPattern {
    let mut sums = vec![0.0f64; MINUTES_PER_DAY];
    let mut counts = vec![0usize; MINUTES_PER_DAY];
    for d in (0..grid.n_days()).filter(|d| !excluded.contains(d)) {
        for (i, v) in grid.row(d).iter().enumerate() {
            if v.is_finite() {
                sums[i] += v;
                counts[i] += 1;
            }
        }
    }
    let mut values = Vec::with_capacity(MINUTES_PER_DAY);
    let mut support = Vec::with_capacity(MINUTES_PER_DAY);
    for (s, n) in sums.into_iter().zip(counts) {
        let p = if n > 0 { s / n as f64 } else { f64::NAN };
        let ok = p.is_finite() && p > 0.0;
        values.push(if ok { p } else { f64::NAN });
        support.push(ok);
    }
    let pattern = IntradayPattern {
        quantity: quantity.to_string(),
        values,
        support,
    };
    if pattern.is_fully_masked() {
        warn!("intraday pattern of {quantity} is zero or undefined everywhere; fully masked");
    }
    pattern
}

/// Pointwise ratio to the pattern; masked minutes become `NaN`.
pub fn deseasonalize(grid: &MinuteGrid, pattern: &IntradayPattern) -> Result<MinuteGrid> {
    if pattern.values.len() != MINUTES_PER_DAY || pattern.support.len() != MINUTES_PER_DAY {
        return Err(Error::Dimension(format!(
            "pattern of {} has {} minutes, expected {MINUTES_PER_DAY}",
            pattern.quantity,
            pattern.values.len()
        )));
    }
    let values = grid
        .values
        .chunks(MINUTES_PER_DAY)
        .flat_map(|row| {
            row.iter()
                .zip(pattern.values.iter().zip(&pattern.support))
                .map(|(x, (p, ok))| if *ok { x / p } else { f64::NAN })
        })
        .collect();
    MinuteGrid::new(grid.days.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, LogNormal};

    fn days(n: usize) -> Vec<NaiveDate> {
        let start = NaiveDate::from_ymd_opt(2003, 1, 1).unwrap();
        (0..n).map(|i| start + chrono::Duration::days(i as i64)).collect()
    }

    fn grid_from(n_days: usize, mut f: impl FnMut(usize, usize) -> f64) -> MinuteGrid {
        let mut v = Vec::new();
        for d in 0..n_days {
            for m in 0..MINUTES_PER_DAY {
                v.push(f(d, m));
            }
        }
        MinuteGrid::new(days(n_days), v).unwrap()
    }

    fn u_shape(m: usize) -> f64 {
        let u = (m as f64 - 119.5) / 119.5;
        0.5 + 1.5 * u * u
    }

    #[test]
    fn constant_input_gives_constant_pattern() {
        let g = grid_from(7, |_, _| 3.25);
        let p = estimate_pattern(&g, "c");
        assert!(p.values.iter().all(|v| *v == 3.25));
        assert!(p.support.iter().all(|s| *s));
    }

    #[test]
    fn two_day_mean() {
        let g = grid_from(2, |d, _| if d == 0 { 2.0 } else { 4.0 });
        let p = estimate_pattern(&g, "x");
        assert!(p.values.iter().all(|v| *v == 3.0));
    }

    #[test]
    fn u_profile_recovered_within_sampling_error() {
        let n_days = 250;
        let sigma = 0.3;
        let noise = LogNormal::new(-sigma * sigma / 2.0, sigma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = grid_from(n_days, |_, m| u_shape(m) * noise.sample(&mut rng));
        let p = estimate_pattern(&g, "volume");
        // Standard deviation of a mean-one log-normal factor.
        let sd = ((sigma * sigma).exp() - 1.0).sqrt();
        for (m, v) in p.values.iter().enumerate() {
            let band = 3.0 * u_shape(m) * sd / (n_days as f64).sqrt();
            // 3σ at 240 minutes has ~50% chance of a single exceedance; 4σ does not.
            assert!((v - u_shape(m)).abs() < band * 4.0 / 3.0, "minute {m}: {v} vs {}", u_shape(m));
        }
    }

    #[test]
    fn all_zero_quantity_is_fully_masked() {
        let g = grid_from(3, |_, _| 0.0);
        let p = estimate_pattern(&g, "zero");
        assert!(p.is_fully_masked());
        let x = deseasonalize(&g, &p).unwrap();
        assert!(x.values.iter().all(|v| v.is_nan()));
    }

    #[test]
    fn identity_and_scaling() {
        let g = grid_from(3, |_, m| u_shape(m));
        let p = estimate_pattern(&g, "u");
        let x = deseasonalize(&g, &p).unwrap();
        assert!(x.values.iter().all(|v| (v - 1.0).abs() < 1e-15));

        let doubled = grid_from(1, |_, m| 2.0 * u_shape(m));
        let x = deseasonalize(&doubled, &p).unwrap();
        assert!(x.values.iter().all(|v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn deseasonalized_noise_has_flat_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = grid_from(400, |_, m| u_shape(m) * rng.random_range(0.5..1.5));
        let x = deseasonalize(&g, &estimate_pattern(&g, "v")).unwrap();
        for m in 1..=MINUTES_PER_DAY as u16 {
            let mean: f64 = (0..400).map(|d| x.get(d, m)).sum::<f64>() / 400.0;
            assert!((mean - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch_is_fatal() {
        let g = grid_from(1, |_, _| 1.0);
        let mut p = estimate_pattern(&g, "x");
        p.values.pop();
        assert!(matches!(deseasonalize(&g, &p), Err(Error::Dimension(_))));
        assert!(MinuteGrid::new(days(1), vec![1.0; 10]).is_err());
    }

    #[test]
    fn undefined_values_are_skipped_in_the_mean() {
        let g = grid_from(3, |d, m| if m == 0 || (d == 1 && m == 5) { f64::NAN } else { 1.0 + d as f64 });
        let p = estimate_pattern(&g, "r");
        assert!(!p.support[0]);
        assert_eq!(p.values[5], 2.0);
        assert_eq!(p.values[6], 2.0);
        let x = deseasonalize(&g, &p).unwrap();
        assert!((0..3).all(|d| x.get(d, 1).is_nan()));
    }

    #[test]
    fn excluded_days_do_not_enter_the_pattern() {
        let g = grid_from(3, |d, _| if d == 1 { 100.0 } else { 1.0 });
        let p = estimate_pattern_excluding(&g, "v", &HashSet::from([1]));
        assert!(p.values.iter().all(|v| *v == 1.0));
    }

    proptest! {
        #[test]
        fn normalization_and_scale_invariance(
            seed in any::<u64>(),
            n_days in 1usize..12,
            zero_minute in 0usize..MINUTES_PER_DAY,
            c in 0.01f64..1e4,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = grid_from(n_days, |_, m| if m == zero_minute { 0.0 } else { rng.random_range(0.0..1e6) });
            let p = estimate_pattern(&g, "q");
            let x = deseasonalize(&g, &p).unwrap();
            for m in 0..MINUTES_PER_DAY {
                let col: Vec<f64> = (0..n_days).map(|d| x.values[d * MINUTES_PER_DAY + m]).collect();
                if p.support[m] {
                    let mean = col.iter().sum::<f64>() / n_days as f64;
                    prop_assert!((mean - 1.0).abs() < 1e-9);
                } else {
                    prop_assert!(col.iter().all(|v| !v.is_finite()));
                }
            }
            let scaled = MinuteGrid::new(g.days.clone(), g.values.iter().map(|v| v * c).collect()).unwrap();
            let xs = deseasonalize(&scaled, &estimate_pattern(&scaled, "q")).unwrap();
            for (a, b) in x.values.iter().zip(&xs.values) {
                prop_assert!((a.is_nan() && b.is_nan()) || (a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }
        }
    }
}
