//! Primitive actuator types and the pure algebraic relations linking
//! electrical drive, geometry, gas state, force, and displacement.
//!
//! Unit convention: SI internally (m, s, K, W, N, Pa). Lengths that describe
//! actuator geometry are stored in millimeters because the drive-intensity
//! parameter rho (W/mm) and its fitted constants are mm-based; every field
//! and accessor carries its unit in the name. Temperatures are absolute
//! kelvin unless a name says `_c` (Celsius) or `rise` (difference in K).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Offset between the Celsius and kelvin scales.
pub const CELSIUS_OFFSET_K: f64 = 273.15;

/// Convert a Celsius temperature to kelvin.
pub fn celsius_to_kelvin(t_c: f64) -> f64 {
    t_c + CELSIUS_OFFSET_K
}

/// Convert a kelvin temperature to Celsius.
pub fn kelvin_to_celsius(t_k: f64) -> f64 {
    t_k - CELSIUS_OFFSET_K
}

/// Standard ambient defaults: 20 degC, one atmosphere.
pub const DEFAULT_T0_K: f64 = 293.15;
pub const DEFAULT_P0_PA: f64 = 101325.0;

/// Cavity depth used for the derived cavity-volume report field: FPC layer
/// (0.12 mm) plus polysiloxane spacer (0.8 mm).
pub const DEFAULT_CAVITY_DEPTH_MM: f64 = 0.92;

#[derive(Debug, Error, PartialEq)]
pub enum PhysicsError {
    #[error("{name} must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("force {force_n} N is below the vacuum bound -P0*A = {bound_n} N")]
    ForceBelowVacuum { force_n: f64, bound_n: f64 },
    #[error("air temperature must be strictly positive kelvin, got {value}")]
    NonPositiveTemperature { value: f64 },
    #[error("air gain must lie in (0, 1), got {value}")]
    AirGainOutOfRange { value: f64 },
    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
}

fn require_positive(name: &'static str, value: f64) -> Result<(), PhysicsError> {
    if !value.is_finite() {
        return Err(PhysicsError::NonFinite { name, value });
    }
    if value <= 0.0 {
        return Err(PhysicsError::NonPositive { name, value });
    }
    Ok(())
}

fn require_non_negative(name: &'static str, value: f64) -> Result<(), PhysicsError> {
    if !value.is_finite() {
        return Err(PhysicsError::NonFinite { name, value });
    }
    if value < 0.0 {
        return Err(PhysicsError::Negative { name, value });
    }
    Ok(())
}

/// Cavity geometry of a single pixel.
///
/// `L` and `w` describe the rectangular cavity cutout, `D` the circular
/// membrane aperture. The heating wire runs down the cavity and back, so the
/// total wire length is `2L + 1` mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorGeometry {
    pub cavity_length_l_mm: f64,
    pub cavity_width_w_mm: f64,
    pub aperture_diameter_d_mm: f64,
}

/// Demonstrated cavity-length regime; values outside it still compute but
/// earn a range warning.
pub const CAVITY_LENGTH_REGIME_MM: (f64, f64) = (2.0, 10.0);
pub const CAVITY_WIDTH_REGIME_MM: f64 = 2.0;

impl ActuatorGeometry {
    pub fn new(
        cavity_length_l_mm: f64,
        cavity_width_w_mm: f64,
        aperture_diameter_d_mm: f64,
    ) -> Result<Self, PhysicsError> {
        require_positive("cavity_length_l_mm", cavity_length_l_mm)?;
        require_positive("cavity_width_w_mm", cavity_width_w_mm)?;
        require_positive("aperture_diameter_d_mm", aperture_diameter_d_mm)?;
        Ok(Self {
            cavity_length_l_mm,
            cavity_width_w_mm,
            aperture_diameter_d_mm,
        })
    }

    /// Total heating-wire length `L_T = 2L + 1` in mm, accounting for the
    /// run down the cavity and back to the solder holes.
    pub fn total_wire_length_mm(&self) -> f64 {
        2.0 * self.cavity_length_l_mm + 1.0
    }

    /// Pixel area `A = pi (D/2)^2` in square meters.
    pub fn pixel_area_m2(&self) -> f64 {
        let r_m = self.aperture_diameter_d_mm / 2.0 / 1e3;
        std::f64::consts::PI * (r_m * r_m)
    }

    /// Cavity volume in microliters for the given cavity depth. Report field
    /// only; no implemented equation consumes it.
    pub fn cavity_volume_ul(&self, depth_mm: f64) -> f64 {
        self.cavity_length_l_mm * self.cavity_width_w_mm * depth_mm
    }

    /// Warnings for geometry outside the demonstrated regime (L in 2..=10 mm,
    /// w = 2 mm). Empty means nothing to flag.
    pub fn range_warnings(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        let (lo, hi) = CAVITY_LENGTH_REGIME_MM;
        if self.cavity_length_l_mm < lo || self.cavity_length_l_mm > hi {
            warnings.push(format!(
                "cavity length {} mm is outside the demonstrated regime [{lo}, {hi}] mm",
                self.cavity_length_l_mm
            ));
        }
        if self.cavity_width_w_mm != CAVITY_WIDTH_REGIME_MM {
            warnings.push(format!(
                "cavity width {} mm differs from the demonstrated width {} mm",
                self.cavity_width_w_mm, CAVITY_WIDTH_REGIME_MM
            ));
        }
        warnings
    }
}

/// Voltage across the heating wire and the wire's electrical resistance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectricalDrive {
    pub voltage_v: f64,
    pub wire_resistance_ohm: f64,
}

impl ElectricalDrive {
    pub fn new(voltage_v: f64, wire_resistance_ohm: f64) -> Result<Self, PhysicsError> {
        require_non_negative("voltage_v", voltage_v)?;
        require_positive("wire_resistance_ohm", wire_resistance_ohm)?;
        Ok(Self {
            voltage_v,
            wire_resistance_ohm,
        })
    }
}

/// Initial cavity temperature and absolute pressure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmbientState {
    pub t0_k: f64,
    pub p0_pa: f64,
}

impl AmbientState {
    pub fn new(t0_k: f64, p0_pa: f64) -> Result<Self, PhysicsError> {
        require_positive("t0_k", t0_k)?;
        require_positive("p0_pa", p0_pa)?;
        Ok(Self { t0_k, p0_pa })
    }

    pub fn t0_c(&self) -> f64 {
        kelvin_to_celsius(self.t0_k)
    }
}

impl Default for AmbientState {
    fn default() -> Self {
        Self {
            t0_k: DEFAULT_T0_K,
            p0_pa: DEFAULT_P0_PA,
        }
    }
}

/// Constant gain factors tying the wire temperature rise to the rest of the
/// chain: `air_gain = dT_air / dT_wire` and membrane compliance
/// `k = z / F` in mm per newton.
///
/// The defaults come from the single-pulse calibration point (77 K air rise
/// over a 1070 K wire rise, 0.96 mm at 750 mN); both are calibration outputs
/// and are never baked into the physics relations themselves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainGains {
    pub air_gain: f64,
    pub compliance_mm_per_n: f64,
}

pub const DEFAULT_AIR_GAIN: f64 = 0.072;
pub const DEFAULT_COMPLIANCE_MM_PER_N: f64 = 1.28;

impl ChainGains {
    pub fn new(air_gain: f64, compliance_mm_per_n: f64) -> Result<Self, PhysicsError> {
        if !air_gain.is_finite() || air_gain <= 0.0 || air_gain >= 1.0 {
            return Err(PhysicsError::AirGainOutOfRange { value: air_gain });
        }
        require_positive("compliance_mm_per_n", compliance_mm_per_n)?;
        Ok(Self {
            air_gain,
            compliance_mm_per_n,
        })
    }
}

impl Default for ChainGains {
    fn default() -> Self {
        Self {
            air_gain: DEFAULT_AIR_GAIN,
            compliance_mm_per_n: DEFAULT_COMPLIANCE_MM_PER_N,
        }
    }
}

/// Electrical power dissipated in the wire, `P_el = V^2 / R`, in watts.
pub fn electrical_power(drive: &ElectricalDrive) -> f64 {
    drive.voltage_v * drive.voltage_v / drive.wire_resistance_ohm
}

/// Power per unit wire length `rho = P_el / L_T` in W/mm.
pub fn power_per_length(p_el_w: f64, geom: &ActuatorGeometry) -> Result<f64, PhysicsError> {
    require_non_negative("p_el_w", p_el_w)?;
    Ok(p_el_w / geom.total_wire_length_mm())
}

/// Cavity air temperature inferred from the membrane force through the
/// ideal gas law: `T_air = T0 (F / (P0 A) + 1)`.
///
/// `F / A` is the gauge pressure; the relation holds down to the vacuum
/// bound `F = -P0 A`, below which the input is rejected.
pub fn air_temp_from_force(
    force_n: f64,
    geom: &ActuatorGeometry,
    ambient: &AmbientState,
) -> Result<f64, PhysicsError> {
    if !force_n.is_finite() {
        return Err(PhysicsError::NonFinite {
            name: "force_n",
            value: force_n,
        });
    }
    let p0a = ambient.p0_pa * geom.pixel_area_m2();
    if force_n < -p0a {
        return Err(PhysicsError::ForceBelowVacuum {
            force_n,
            bound_n: -p0a,
        });
    }
    Ok(ambient.t0_k * (force_n / p0a + 1.0))
}

/// Exact inverse of [`air_temp_from_force`]: `F = P0 A (T_air / T0 - 1)`.
pub fn force_from_air_temp(
    t_air_k: f64,
    geom: &ActuatorGeometry,
    ambient: &AmbientState,
) -> Result<f64, PhysicsError> {
    if !t_air_k.is_finite() || t_air_k <= 0.0 {
        return Err(PhysicsError::NonPositiveTemperature { value: t_air_k });
    }
    Ok(ambient.p0_pa * geom.pixel_area_m2() * (t_air_k / ambient.t0_k - 1.0))
}

/// Free membrane displacement under the constant-compliance approximation,
/// `z = k F`, in mm.
pub fn displacement_from_force(force_n: f64, gains: &ChainGains) -> Result<f64, PhysicsError> {
    require_non_negative("force_n", force_n)?;
    Ok(gains.compliance_mm_per_n * force_n)
}
