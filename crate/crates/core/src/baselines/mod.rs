//! Comparison fusion methods: two-level Dempster-Shafer combination and a
//! recursive Bayesian information filter.

pub mod ddf;
pub mod dempster_shafer;

pub use ddf::{ddf_update, FilterState};
pub use dempster_shafer::{ds_classify, ds_combine, MassFunction, TwoLevelFusion};
