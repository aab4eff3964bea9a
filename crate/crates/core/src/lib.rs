//! Benchmarking engine for pay-for-performance incentive plans.
//!
//! Given performance data for a set of comparable DMUs, the goals agreed
//! in the previous period and the incentive money at stake, the engine
//! computes attainable, Pareto-efficient targets whose incentive payments
//! stay as close as possible to the payments the goals would produce. Each
//! group of DMUs is benchmarked against a single common reference set of
//! efficient units, and the engine reports targets, deviations, reference
//! sets and payments per DMU.
//!
//! Modules:
//! - [`domain`]: data model and validation
//! - [`payments`]: achievement and payment functions
//! - [`frontier`]: attainable set, efficiency tests, extreme-efficient set
//! - [`gab`]: the per-group benchmarking MILP
//! - [`oracle`]: brute-force cross-check for small instances
//! - [`solver`]: LP/MILP backend abstraction
//! - [`report`]: dataset ingestion and report rendering

pub mod domain;
pub mod frontier;
pub mod gab;
pub mod oracle;
pub mod payments;
pub mod report;
pub mod settings;
pub mod solver;

#[doc(hidden)]
pub mod test_fixtures;
