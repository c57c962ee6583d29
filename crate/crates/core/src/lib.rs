//! Order-flow dynamics around extreme intraday price changes.
//!
//! The pipeline runs tick-level order records through a price-time priority
//! book ([`classify`]), aggregates them into minute bars ([`ingest`]),
//! detects extreme price changes with a combined absolute and relative
//! volatility filter ([`detect`]), removes intraday seasonality
//! ([`deseason`]), averages event-aligned trajectories ([`study`]) and fits
//! power-law relaxations ([`relax`]). [`synth`] generates data with known
//! ground truth for all of the above; [`pipeline`] drives the stages from a
//! config file and writes the result tables.

pub mod classify;
pub mod deseason;
pub mod detect;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod relax;
pub mod study;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{Aggressiveness, FlowKey, FlowTable, Investor, OrderKind, Price, Side};
