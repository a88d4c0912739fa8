//! Text formats and command-line driver for `vpmc-core`.

pub mod commands;
pub mod document;

pub use commands::run;
pub use document::{parse_diff, parse_model, print_diff, print_model, print_vpmc, DocError, DocErrorKind};
