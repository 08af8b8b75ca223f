//! Scaling-law analytics for token-transfer ledgers.
//!
//! The crate ingests delimited transfer ledgers, classifies every transfer by
//! the account types of its sender and receiver, and computes four
//! statistical signatures per (category, period, role) slice:
//!
//! * trade volume versus partner diversity scaling ([`scaling`]),
//! * discrete power-law tails with a likelihood-ratio comparison against a
//!   discrete exponential ([`powerlaw`]),
//! * KPSS stationarity screening of hourly activity ([`stationarity`]),
//! * temporal Taylor's law exponents ([`taylor`]).
//!
//! [`synth`] holds seeded generators used as ground truth for all of them,
//! and [`pipeline`] wires everything into the reports the CLI writes.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod activity;
pub mod error;
pub mod ingest;
pub mod model;
pub mod ols;
pub mod pipeline;
pub mod powerlaw;
pub mod scaling;
pub mod stationarity;
pub mod synth;
pub mod taylor;
pub mod zeta;

pub use error::{Error, Result};
