//! IO, file formats, and the Monte Carlo harness around the core library.

pub mod experiments;
pub mod formats;
pub mod manifest;
