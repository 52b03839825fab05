//! Microsimulation of the 1986/1987 Danish income tax and quasi-experimental
//! estimation of wage, earnings and hours elasticities from the 1987
//! introduction of joint taxation in the middle bracket.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`tax`]: tax law, liabilities, bracket locations and marginal rates
//! - [`prices`]: deflators and the per-year tax calendar
//! - [`panel`]: the person-year data model and CSV ingestion
//! - [`synth`]: a synthetic panel with a known elasticity
//! - [`design`]: sample selection, treatment assignment, stratification, balance
//! - [`estimate`]: event study, TOT instrumental variables, elasticities
//! - [`diagnose`]: outcome construction and identification diagnostics
//! - [`pipeline`]: configuration and the end-to-end run

// `!(x > y)` guards are written that way on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod design;
pub mod diagnose;
pub mod error;
pub mod estimate;
pub mod panel;
pub mod pipeline;
pub mod prices;
pub mod synth;
pub mod tax;

pub use error::{Error, Result};
