//! Service and command-line front ends for the verification engine.

pub mod cli;
pub mod server;
