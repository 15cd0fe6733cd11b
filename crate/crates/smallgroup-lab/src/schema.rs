//! The published report schema.

pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");
