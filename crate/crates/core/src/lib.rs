//! Attack detection from SNMP-MIB Interface-group counters.
//!
//! The crate covers the whole offline pipeline: loading and splitting
//! labeled feature tables ([`dataset`]), picking MIB variable groups
//! ([`features`]), three from-scratch learners ([`tree`], [`ensemble`],
//! [`mlp`]), per-class metrics ([`eval`]), a synthetic traffic generator
//! ([`synth`]), versioned model files ([`model`]) and a small SNMPv2c
//! collector for live counters ([`snmp`]).

// `!(x > 0.0)` deliberately rejects NaN; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod features;
pub mod mlp;
pub mod model;
pub mod snmp;
pub mod synth;
pub mod tree;

mod util;

pub use error::{Error, Result};
