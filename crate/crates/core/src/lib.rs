//! PV string simulation and MPPT benchmarking under partial shading.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod converter;
pub mod error;
pub mod fuzzy;
pub mod mppt;
pub mod par;
pub mod pv;
pub mod report;
pub mod roots;
pub mod shading;
pub mod sim;
pub mod svg;

pub use error::{PvError, Result};
