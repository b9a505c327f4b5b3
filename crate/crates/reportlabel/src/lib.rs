//! Files, threads and the `reportlabel` command line around
//! `reportlabel-core`.

pub mod bundled;
pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod csv_io;
pub mod parallel;
pub mod translate;

pub use reportlabel_core;
