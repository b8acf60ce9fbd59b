//! Runtime side of Synthline: dataset files, the LLM generation engine, an HTTP
//! embedder, the configurator service and the command-line front end.
//!
//! The algorithms themselves live in [`synthline_core`], re-exported here as [`core`].

pub use synthline_core as core;

pub mod cli;
pub mod embed;
pub mod engine;
pub mod ids;
pub mod service;
pub mod store;
