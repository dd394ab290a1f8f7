//! Run orchestration behind the `rodsim` binary.

pub mod bench;
pub mod commands;
pub mod manifest;
