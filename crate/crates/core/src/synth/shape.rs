use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Overlays reach back to `t = -100` and forward to `t = 300`.
pub const OVERLAY_FROM: i32 = -100;
pub const OVERLAY_TO: i32 = 300;

/// Multiplicative event overlay around `t = 0`.
///
/// * `t = t_max`: `peak`
/// * `t < t_max`: `1 + (peak − 1)·(t_max − t + 1)^(−rise)`
/// * `t > t_max, t ≥ 1`: `1 + decay·t^(−alpha)`
/// * `t_max < t ≤ 0`: linear from `peak` at `t_max` to `1 + decay` at `t = 1`
///
/// With `t_max ≥ 1` the peak lies on the decay branch, so `peak` must equal
/// `1 + decay·t_max^(−alpha)`; leave it unset to have it derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventShape {
    #[serde(default)]
    pub peak: Option<f64>,
    #[serde(default)]
    pub t_max: i32,
    pub decay: f64,
    pub alpha: f64,
    #[serde(default = "default_rise")]
    pub rise: f64,
}

fn default_rise() -> f64 {
    0.5
}

impl EventShape {
    pub fn new(peak: f64, t_max: i32, decay: f64, alpha: f64, rise: f64) -> Self {
        EventShape {
            peak: Some(peak),
            t_max,
            decay,
            alpha,
            rise,
        }
    }

    fn decay_at(&self, t: i32) -> f64 {
        1.0 + self.decay * (t as f64).powf(-self.alpha)
    }

    pub fn peak_value(&self) -> f64 {
        match self.peak {
            Some(p) => p,
            None => self.decay_at(self.t_max.max(1)),
        }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        let bad = |why: String| Err(Error::Scenario(format!("shape {name}: {why}")));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.decay > 0.0 && self.decay.is_finite()) {
            return bad(format!("decay amplitude must be positive, got {}", self.decay));
        }
        if !(self.rise > 0.0 && self.rise.is_finite()) {
            return bad(format!("rise exponent must be positive, got {}", self.rise));
        }
        if !(OVERLAY_FROM..=OVERLAY_TO).contains(&self.t_max) {
            return bad(format!("t_max {} outside [{OVERLAY_FROM}, {OVERLAY_TO}]", self.t_max));
        }
        let h = self.peak_value();
        if self.t_max >= 1 {
            let want = self.decay_at(self.t_max);
            if (h - want).abs() > 1e-9 * want {
                return bad(format!("peak {h} at t_max {} must equal 1 + decay·t_max^-alpha = {want}", self.t_max));
            }
        } else if h <= 1.0 + self.decay {
            return bad(format!("peak {h} must exceed 1 + decay = {}", 1.0 + self.decay));
        }
        Ok(())
    }

    /// Overlay at event time `t`; 1 outside the overlay span.
    pub fn value(&self, t: i32) -> f64 {
        if !(OVERLAY_FROM..=OVERLAY_TO).contains(&t) {
            return 1.0;
        }
        let h = self.peak_value();
        let tm = self.t_max;
        if t == tm {
            h
        } else if t < tm {
            1.0 + (h - 1.0) * ((tm - t + 1) as f64).powf(-self.rise)
        } else if t >= 1 {
            self.decay_at(t)
        } else {
            let frac = (t - tm) as f64 / (1 - tm) as f64;
            h + (1.0 + self.decay - h) * frac
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branches() {
        let s = EventShape::new(20.0, -1, 10.0, 0.5, 0.7);
        s.validate("s").unwrap();
        assert_eq!(s.value(-1), 20.0);
        assert!((s.value(0) - 15.5).abs() < 1e-12);
        assert!((s.value(1) - 11.0).abs() < 1e-12);
        assert!((s.value(4) - 6.0).abs() < 1e-12);
        assert!((s.value(-2) - (1.0 + 19.0 * 2f64.powf(-0.7))).abs() < 1e-12);
        assert_eq!(s.value(-101), 1.0);
        assert_eq!(s.value(301), 1.0);
        for t in OVERLAY_FROM..=OVERLAY_TO {
            assert!(s.value(t) <= 20.0 && s.value(t) > 1.0);
        }
    }

    #[test]
    fn late_peak_is_derived() {
        let s = EventShape {
            peak: None,
            t_max: 2,
            decay: 10.0,
            alpha: 0.5,
            rise: 1.0,
        };
        s.validate("s").unwrap();
        let h = 1.0 + 10.0 / 2f64.sqrt();
        assert!((s.value(2) - h).abs() < 1e-12);
        assert!(s.value(1) < h && s.value(3) < h);
        assert!(EventShape { peak: Some(3.0), ..s }.validate("s").is_err());
    }

    #[test]
    fn invalid_shapes() {
        assert!(EventShape::new(5.0, 0, 10.0, 0.5, 0.5).validate("s").is_err());
        assert!(EventShape::new(20.0, 0, 10.0, 0.0, 0.5).validate("s").is_err());
        assert!(EventShape::new(20.0, 0, 10.0, 0.5, -1.0).validate("s").is_err());
        assert!(EventShape::new(20.0, -500, 10.0, 0.5, 1.0).validate("s").is_err());
    }
}
