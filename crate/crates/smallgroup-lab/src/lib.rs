//! Scenario runner and command-line front end for `smallgroup-core`: configuration,
//! deterministic JSON reports and end-to-end pipelines.

pub mod cli;
pub mod config;
pub mod report;
pub mod run;
pub mod schema;
