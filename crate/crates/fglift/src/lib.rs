//! Compresses propositional factor graphs into parametric factor graphs by
//! colour passing and runs exact inference on both representations.
//!
//! The pipeline: load a factor graph ([`io`]), group symmetric randvars and
//! factors by colour passing ([`colour`]) — including argument-order- and
//! commutativity-aware grouping ([`symmetry`]) — construct a parametric
//! factor graph from the grouping ([`construct`]), and answer marginal
//! queries on either representation ([`inference`], [`lve`]). [`bench`]
//! generates the two synthetic model families used to measure the speedup.

pub mod colour;
pub mod construct;
pub mod inference;
pub mod io;
pub mod model;
pub mod numeric;
pub mod pfg;
pub mod potential;
pub mod symmetry;
pub mod table;

pub use model::{FactorGraph, Range};
pub use pfg::ParfactorGraph;
pub use potential::Potential;
pub use table::{Histogram, Table};
