//! File formats, parallel experiments, the live session service and the
//! command-line front end for the fair toss.

pub mod cli;
pub mod error;
pub mod io;
pub mod runner;
pub mod service;

pub use error::{Error, Result};
