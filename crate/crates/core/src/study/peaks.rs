use serde::{Deserialize, Serialize};

use crate::detect::EventSign;
use crate::types::{Aggressiveness, Side};

use super::{find_peak, group_id, GroupAverage, Quantity};

/// Peak location and height of the volume and number curves of one order
/// class: `(t_max, V_max)` and `(t'_max, N_max)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakRow {
    pub sign: EventSign,
    pub side: Side,
    pub aggressiveness: Aggressiveness,
    pub volume_peak: Option<(i32, f64)>,
    pub count_peak: Option<(i32, f64)>,
}

/// One row per (side, aggressiveness) for the given sign. Curves that are
/// missing or fully masked leave their cells empty.
pub fn peak_table(sign: EventSign, averages: &[GroupAverage]) -> Vec<PeakRow> {
    let peak_of = |q: Quantity| {
        let id = group_id(sign, &q.name());
        averages.iter().find(|a| a.group == id).and_then(|a| find_peak(a).ok())
    };
    let mut rows = Vec::new();
    for aggressiveness in Aggressiveness::ALL {
        for side in Side::ALL {
            rows.push(PeakRow {
                sign,
                side,
                aggressiveness,
                volume_peak: peak_of(Quantity::ClassVolume(side, aggressiveness)),
                count_peak: peak_of(Quantity::ClassCount(side, aggressiveness)),
            });
        }
    }
    rows
}
