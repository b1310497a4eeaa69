//! The guide in `book/src`, one module per chapter. Building the documentation
//! of this crate runs every Rust example in the book.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/gaussian.md")]
pub mod gaussian {}

#[doc = include_str!("../../../book/src/estimators.md")]
pub mod estimators {}

#[doc = include_str!("../../../book/src/van.md")]
pub mod van_step {}

#[doc = include_str!("../../../book/src/variants.md")]
pub mod variants {}

#[doc = include_str!("../../../book/src/driver.md")]
pub mod driver {}

#[doc = include_str!("../../../book/src/problems.md")]
pub mod problems {}

#[doc = include_str!("../../../book/src/active.md")]
pub mod active {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
