//! Campaign runner around the core library: config files, landscape CSVs,
//! the (method x seed) execution grid, and result reporting.

pub mod chart;
pub mod config;
pub mod landscape;
pub mod report;
pub mod runner;
pub mod verify;
