//! Test-only oracles shared by the integration and acceptance suites.
#![allow(dead_code)]

pub mod fixtures;
pub mod gradcheck;
pub mod metric_cases;
pub mod reference;
