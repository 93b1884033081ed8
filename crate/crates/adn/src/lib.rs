//! File formats, dataset handling, the training driver and the command line
//! around `adn-core`.

pub mod array_io;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod train;

pub use error::{Error, Result};
