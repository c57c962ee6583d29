use chrono::{NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minutes on the intraday axis: two 120-minute continuous-auction sessions.
pub const MINUTES_PER_DAY: usize = 240;

/// Maps clock times in the continuous double auction onto the intraday
/// index `1..=240`. Session bounds are half-open `[open, close)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TradingClock {
    pub morning: (NaiveTime, NaiveTime),
    pub afternoon: (NaiveTime, NaiveTime),
}

impl Default for TradingClock {
    fn default() -> Self {
        let hm = |h, m| NaiveTime::from_hms_opt(h, m, 0).expect("valid session time");
        TradingClock {
            morning: (hm(9, 30), hm(11, 30)),
            afternoon: (hm(13, 0), hm(15, 0)),
        }
    }
}

fn minutes_between(open: NaiveTime, close: NaiveTime) -> i64 {
    (close - open).num_minutes()
}

impl TradingClock {
    pub fn new(morning: (NaiveTime, NaiveTime), afternoon: (NaiveTime, NaiveTime)) -> Result<Self> {
        let clock = TradingClock { morning, afternoon };
        let m = minutes_between(morning.0, morning.1);
        let a = minutes_between(afternoon.0, afternoon.1);
        if m <= 0 || a <= 0 || morning.1 > afternoon.0 {
            return Err(Error::Config("sessions must be non-empty and ordered".into()));
        }
        if (m + a) as usize != MINUTES_PER_DAY {
            return Err(Error::Config(format!(
                "sessions cover {} minutes, expected {MINUTES_PER_DAY}",
                m + a
            )));
        }
        for t in [morning.0, morning.1, afternoon.0, afternoon.1] {
            if t.second() != 0 || t.nanosecond() != 0 {
                return Err(Error::Config("session bounds must fall on whole minutes".into()));
            }
        }
        Ok(clock)
    }

    pub fn minutes_per_day(&self) -> usize {
        MINUTES_PER_DAY
    }

    pub fn in_session(&self, time: NaiveTime) -> bool {
        self.intraday_index(time).is_some()
    }

    /// Intraday index of the minute bar containing `time`: bar `t'` covers
    /// `[t'-1, t')` minutes after its session's open, counting the afternoon
    /// session as a continuation of the morning one.
    pub fn intraday_index(&self, time: NaiveTime) -> Option<u16> {
        let morning_len = minutes_between(self.morning.0, self.morning.1);
        let (open, offset) = if time >= self.morning.0 && time < self.morning.1 {
            (self.morning.0, 0)
        } else if time >= self.afternoon.0 && time < self.afternoon.1 {
            (self.afternoon.0, morning_len)
        } else {
            return None;
        };
        let elapsed = (time - open).num_minutes();
        Some((offset + elapsed + 1) as u16)
    }

    /// Clock time at which bar `index` opens.
    pub fn minute_start(&self, index: u16) -> Option<NaiveTime> {
        if index == 0 || index as usize > MINUTES_PER_DAY {
            return None;
        }
        let morning_len = minutes_between(self.morning.0, self.morning.1);
        let k = index as i64 - 1;
        let t = if k < morning_len {
            self.morning.0 + chrono::Duration::minutes(k)
        } else {
            self.afternoon.0 + chrono::Duration::minutes(k - morning_len)
        };
        Some(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(h: u32, m: u32, s: u32) -> NaiveTime {
        NaiveTime::from_hms_opt(h, m, s).unwrap()
    }

    #[test]
    fn session_edges() {
        let c = TradingClock::default();
        assert_eq!(c.intraday_index(t(9, 29, 59)), None);
        assert_eq!(c.intraday_index(t(9, 30, 0)), Some(1));
        assert_eq!(c.intraday_index(t(9, 30, 59)), Some(1));
        assert_eq!(c.intraday_index(t(9, 31, 0)), Some(2));
        assert_eq!(c.intraday_index(t(11, 29, 59)), Some(120));
        assert_eq!(c.intraday_index(t(11, 30, 0)), None);
        assert_eq!(c.intraday_index(t(12, 0, 0)), None);
        assert_eq!(c.intraday_index(t(13, 0, 0)), Some(121));
        assert_eq!(c.intraday_index(t(14, 59, 59)), Some(240));
        assert_eq!(c.intraday_index(t(15, 0, 0)), None);
        assert_eq!(c.intraday_index(t(9, 20, 0)), None);
    }

    #[test]
    fn index_is_a_bijection_onto_bar_starts() {
        let c = TradingClock::default();
        for i in 1..=MINUTES_PER_DAY as u16 {
            let start = c.minute_start(i).unwrap();
            assert_eq!(c.intraday_index(start), Some(i));
        }
        assert_eq!(c.minute_start(0), None);
        assert_eq!(c.minute_start(241), None);
    }

    #[test]
    fn rejects_wrong_length_sessions() {
        assert!(TradingClock::new((t(9, 30, 0), t(11, 30, 0)), (t(13, 0, 0), t(14, 0, 0))).is_err());
        assert!(TradingClock::new((t(9, 30, 0), t(11, 30, 0)), (t(13, 0, 0), t(15, 0, 0))).is_ok());
    }
}
