//! Tick-level order streams: parsing, validation, minute bars and split
//! adjustment.

pub mod bars;
pub mod clock;
pub mod record;
pub mod split;

pub use bars::{bars_from_replay, build_minute_bars, BarBuild, BarSeries, MinuteBar};
pub use clock::{TradingClock, MINUTES_PER_DAY};
pub use record::{
    parse_stream, write_events, EventKind, OrderEvent, ParseOutcome, Reject, SchemaConfig, Timestamp,
};
pub use split::{apply_split_adjustment, SplitTable};
