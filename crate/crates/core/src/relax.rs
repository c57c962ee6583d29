//! Power-law relaxation of excess variables: `x_ex(t) = x(t) − 1` fitted as
//! `ln x_ex = ln A − α ln t` by ordinary least squares.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::study::{GroupAverage, POST_EVENT};

/// `x_ex(t)` for `t = 1..=horizon`; index `i` holds `t = i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcessSeries {
    pub group: String,
    pub values: Vec<f64>,
}

impl ExcessSeries {
    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    pub fn at(&self, t: usize) -> f64 {
        self.values[t - 1]
    }

    /// From a closed form or an external curve.
    pub fn from_fn(group: impl Into<String>, horizon: usize, f: impl FnMut(usize) -> f64) -> Self {
        ExcessSeries {
            group: group.into(),
            values: (1..=horizon).map(f).collect(),
        }
    }
}

pub fn excess(avg: &GroupAverage) -> ExcessSeries {
    ExcessSeries::from_fn(avg.group.clone(), POST_EVENT as usize, |t| avg.at(t as i32) - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitRange {
    pub lo: usize,
    pub hi: usize,
}

impl Default for FitRange {
    fn default() -> Self {
        FitRange { lo: 1, hi: 300 }
    }
}

impl FitRange {
    pub fn new(lo: usize, hi: usize) -> Result<Self> {
        if lo < 1 || hi < lo {
            return Err(Error::Config(format!("fit range [{lo}, {hi}] is empty or starts below 1")));
        }
        Ok(FitRange { lo, hi })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationFit {
    pub group: String,
    pub alpha: f64,
    pub stderr: f64,
    /// Intercept `ln A`.
    pub log_amplitude: f64,
    pub requested: FitRange,
    /// `requested` capped at the series horizon.
    pub used: FitRange,
    pub points_used: usize,
    /// Non-positive or undefined excess values inside `used`.
    pub points_dropped: usize,
}

impl RelaxationFit {
    pub fn capped(&self) -> bool {
        self.used != self.requested
    }
}

pub fn fit_power_law(series: &ExcessSeries, range: FitRange) -> Result<RelaxationFit> {
    let range = FitRange::new(range.lo, range.hi)?;
    let hi = range.hi.min(series.horizon());
    if range.lo > hi {
        return Err(Error::FitRefused(format!(
            "{}: range [{}, {}] lies beyond the horizon {}",
            series.group,
            range.lo,
            range.hi,
            series.horizon()
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for t in range.lo..=hi {
        let v = series.at(t);
        if v > 0.0 && v.is_finite() {
            xs.push((t as f64).ln());
            ys.push(v.ln());
        }
    }
    let n = xs.len();
    let dropped = hi - range.lo + 1 - n;
    if n < 3 {
        return Err(Error::FitRefused(format!(
            "{}: {n} positive points in [{}, {hi}] ({dropped} dropped), need 3",
            series.group, range.lo
        )));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::FitRefused(format!("{}: a single abscissa", series.group)));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = (ssr / (nf - 2.0) / sxx).sqrt();
    Ok(RelaxationFit {
        group: series.group.clone(),
        alpha: -slope,
        stderr,
        log_amplitude: intercept,
        requested: range,
        used: FitRange { lo: range.lo, hi },
        points_used: n,
        points_dropped: dropped,
    })
}
