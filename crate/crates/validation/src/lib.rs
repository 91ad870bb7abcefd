//! Independent oracles and the acceptance suite for the `vibronic` crate.

pub mod oracle;
pub mod report;

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod checks;

pub use report::{Criterion, Suite};
