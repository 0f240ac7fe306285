// SPDX-License-Identifier: MIT OR Apache-2.0

pub mod adapt;
pub mod changepoint;
pub mod cli;
pub mod error;
pub mod fusion;
pub mod io;
pub mod metrics;
pub mod track;

pub use error::{Error, Result};
