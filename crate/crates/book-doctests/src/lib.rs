//! The chapters of the guide in `book/src`, one module each, so that
//! `cargo test --doc` compiles and runs every listing.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod chapter0 {}

#[doc = include_str!("../../../book/src/driver.md")]
pub mod chapter1 {}

#[doc = include_str!("../../../book/src/market.md")]
pub mod chapter2 {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod chapter3 {}

#[doc = include_str!("../../../book/src/pricing.md")]
pub mod chapter4 {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod chapter5 {}

#[doc = include_str!("../../../book/src/configuration.md")]
pub mod chapter6 {}

#[doc = include_str!("../../../book/src/verification.md")]
pub mod chapter7 {}
