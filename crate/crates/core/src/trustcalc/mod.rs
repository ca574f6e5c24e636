//! A small trust calculus over keys, certificates, logs and compliance.

mod closure;
mod statement;

pub use closure::{derive_closure, derived, is_authentic};
pub use statement::{parse_statements, CaSet, Interval, Key, ParseError, Statement, View};
