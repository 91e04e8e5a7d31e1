//! Library surface of the isoflow command-line tool, exposed so that
//! integration tests can drive experiments in-process.

pub mod config;
pub mod output;
pub mod runner;
