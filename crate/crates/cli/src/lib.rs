//! Command-line front end for frequency heat plots and insertion/deletion curves.

pub mod backend;
pub mod commands;
pub mod plot;
pub mod selftest;

pub use commands::{run, Cli, Status};
