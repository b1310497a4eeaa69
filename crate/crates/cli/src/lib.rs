//! Command-line harness for the `van` optimizers.
//!
//! `van run` executes one configuration and writes its trace, `van compare`
//! runs several methods on one problem, and `van plot` draws traces as SVG.

pub mod commands;
pub mod plot;
pub mod problem;
pub mod spec;
