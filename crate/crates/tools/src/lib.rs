//! Desk-side companion to `sp2-core`: file formats, flow-set generation,
//! experiment orchestration, and the `sp2` command-line tool.

pub mod cli;
pub mod experiment;
pub mod format;
pub mod generate;
