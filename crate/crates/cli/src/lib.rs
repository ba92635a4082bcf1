//! Experiment harness, configuration, reporting and plotting around the
//! `dimkrr` core library.

pub mod config;
pub mod experiments;
pub mod plot;
pub mod report;
