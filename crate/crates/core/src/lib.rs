//! Two-level Mamdani fuzzy scoring of Likert-scale project-success surveys.
//!
//! Fourteen items are grouped into three dimensions, each aggregated by its
//! own Mamdani stage; a top stage combines the three dimension scores into a
//! single score on the same Likert scale. The modules build on each other:
//!
//! - [`fuzzy`]: membership functions, linguistic variables, sampled sets
//! - [`rules`] and [`dsl`]: rule bases, the generator and the rule language
//! - [`inference`]: a single calibrated Mamdani stage
//! - [`construct`]: the item → dimension → overall hierarchy
//! - [`io`]: CSV ingestion, reports and plot data

pub mod construct;
pub mod dsl;
pub mod fuzzy;
pub mod inference;
pub mod io;
pub mod rules;
