pub mod complexity;
pub mod geo;
pub mod indicators;
pub mod learn;
pub mod matching;
pub mod network;
pub mod synth;

use crate::error::{input, Result};

pub fn required<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| input(format!("missing --{flag}")))
}
