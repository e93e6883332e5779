//! HTTP service and command-line front end for the vizagent engine.

pub mod api;
pub mod cli;
pub mod config;
pub mod llm;
pub mod store;
