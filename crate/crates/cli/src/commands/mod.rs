pub mod analyze;
pub mod calibrate;
pub mod envelope;
pub mod intensity;
pub mod schedule;
pub mod simulate;
