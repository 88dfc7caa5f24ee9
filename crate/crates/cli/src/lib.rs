//! Command-line entry points and the HTTP API for fragment-based case
//! models.

pub mod api;
pub mod commands;
