pub mod cli;
pub mod config;
pub mod coupling;
pub mod diagnostics;
pub mod error;
pub mod fluid;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod plate;
pub mod presets;
pub mod pressure;
pub mod selftest;
pub mod spectral;
