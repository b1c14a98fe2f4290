//! Library surface of the command-line front end: config parsing and the
//! command implementations, kept apart from the binary so integration tests
//! can exercise provenance round-trips directly.

pub mod commands;
pub mod config;
