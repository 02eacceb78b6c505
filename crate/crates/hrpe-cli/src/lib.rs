//! Command-line front end for ring-array multipath estimation.
//!
//! Thin, deterministic plumbing around `hrpe-core`: scenario files in,
//! binary snapshots and CSV tables out. The [`commands`] module holds one
//! function per subcommand; everything else is codecs and configuration.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod scenario;
