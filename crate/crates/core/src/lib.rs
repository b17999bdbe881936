//! Modeling, calibration, and drive planning for thermopneumatic tactile
//! pixels: forward electro-thermo-mechanical simulation, parameter fitting
//! from measurement traces, the thermal-failure operating envelope, and
//! compilation of multi-channel patterns into safety-gated gate schedules.

pub mod calibration;
pub mod core_physics;
mod csvio;
pub mod driver_sim;
pub mod envelope;
pub mod params;
pub mod perception;
pub mod plot;
pub mod thermal_sim;
pub mod trace_analysis;

pub use csvio::CsvError;
