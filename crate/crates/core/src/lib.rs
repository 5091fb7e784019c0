pub mod annotate;
pub mod bench;
pub mod catalog;
pub mod cli;
pub mod config;
pub mod consumer;
pub mod error;
pub mod heuristics;
pub mod publish;
pub mod resolver;

pub use error::{Error, Result};
