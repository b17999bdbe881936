//! Project configuration: a single TOML document with unit-suffixed keys.
//! Every value has a built-in default mirroring the published device, so the
//! CLI runs without any file; `tpp config` prints the active document.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use tpp_core::calibration::ResistivityTable;
use tpp_core::core_physics::{ActuatorGeometry, AmbientState, ChainGains};
use tpp_core::envelope::EnvelopeFit;
use tpp_core::thermal_sim::ThermalModel;

use crate::util::{read_to_string, CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_safety_margin")]
    pub safety_margin: f64,
    /// Optional path to a `temp_C,rel_resistivity` table for shunt-derived
    /// wire temperatures.
    #[serde(default)]
    pub resistivity_table: Option<PathBuf>,
    #[serde(default)]
    pub ambient: AmbientConfig,
    #[serde(default)]
    pub thermal: ThermalConfig,
    #[serde(default)]
    pub gains: GainsConfig,
    #[serde(default)]
    pub envelope: EnvelopeConfig,
    #[serde(default = "default_geometry_presets")]
    pub geometry: BTreeMap<String, GeometryConfig>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("tpp-out")
}

fn default_safety_margin() -> f64 {
    0.10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmbientConfig {
    pub t0_k: f64,
    pub p0_pa: f64,
}

impl Default for AmbientConfig {
    fn default() -> Self {
        Self { t0_k: 293.15, p0_pa: 101325.0 }
    }
}

/// Thermal-model parameters. When the explicit fields are absent the model
/// derives from the envelope fit and the geometry (`R = a / L_T`,
/// `C = b L_T`, heating constant `a b`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalConfig {
    pub tau_cool_ms: f64,
    #[serde(default)]
    pub r_thermal_k_per_w: Option<f64>,
    #[serde(default)]
    pub heat_capacity_j_per_k: Option<f64>,
    #[serde(default)]
    pub tau_heat_ms: Option<f64>,
}

impl Default for ThermalConfig {
    fn default() -> Self {
        Self {
            tau_cool_ms: 110.0,
            r_thermal_k_per_w: None,
            heat_capacity_j_per_k: None,
            tau_heat_ms: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsConfig {
    pub air_gain: f64,
    pub compliance_mm_per_n: f64,
}

impl Default for GainsConfig {
    fn default() -> Self {
        Self { air_gain: 0.072, compliance_mm_per_n: 1.28 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeConfig {
    pub a_mm_k_per_w: f64,
    pub b_uj_per_mm_k: f64,
    pub t_fail_c: f64,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        Self { a_mm_k_per_w: 6601.0, b_uj_per_mm_k: 6.51, t_fail_c: 1400.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub cavity_length_l_mm: f64,
    pub cavity_width_w_mm: f64,
    pub aperture_diameter_d_mm: f64,
}

fn default_geometry_presets() -> BTreeMap<String, GeometryConfig> {
    let mut presets = BTreeMap::new();
    presets.insert(
        "L4D4".to_string(),
        GeometryConfig { cavity_length_l_mm: 4.0, cavity_width_w_mm: 2.0, aperture_diameter_d_mm: 4.0 },
    );
    presets.insert(
        "L8D6".to_string(),
        GeometryConfig { cavity_length_l_mm: 8.0, cavity_width_w_mm: 2.0, aperture_diameter_d_mm: 6.0 },
    );
    presets.insert(
        "L10D8".to_string(),
        GeometryConfig { cavity_length_l_mm: 10.0, cavity_width_w_mm: 2.0, aperture_diameter_d_mm: 8.0 },
    );
    presets
}

impl Default for ProjectConfig {
    fn default() -> Self {
        Self {
            output_dir: default_output_dir(),
            safety_margin: default_safety_margin(),
            resistivity_table: None,
            ambient: AmbientConfig::default(),
            thermal: ThermalConfig::default(),
            gains: GainsConfig::default(),
            envelope: EnvelopeConfig::default(),
            geometry: default_geometry_presets(),
        }
    }
}

impl ProjectConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = read_to_string(path)?;
        let config: ProjectConfig = toml::from_str(&text)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> CliResult {
        if !(0.0..1.0).contains(&self.safety_margin) {
            return Err(CliError::validation(format!(
                "safety_margin {} must lie in [0, 1)",
                self.safety_margin
            )));
        }
        self.ambient_state()?;
        self.chain_gains()?;
        self.envelope_fit()?;
        for name in self.geometry.keys() {
            self.actuator_geometry(name)?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string_pretty(self).map_err(CliError::internal)
    }

    pub fn ambient_state(&self) -> CliResult<AmbientState> {
        AmbientState::new(self.ambient.t0_k, self.ambient.p0_pa).map_err(CliError::validation)
    }

    pub fn chain_gains(&self) -> CliResult<ChainGains> {
        ChainGains::new(self.gains.air_gain, self.gains.compliance_mm_per_n)
            .map_err(CliError::validation)
    }

    pub fn envelope_fit(&self) -> CliResult<EnvelopeFit> {
        EnvelopeFit::new(
            self.envelope.a_mm_k_per_w,
            self.envelope.b_uj_per_mm_k * 1e-6,
            self.envelope.t_fail_c,
        )
        .map_err(CliError::validation)
    }

    pub fn actuator_geometry(&self, preset: &str) -> CliResult<ActuatorGeometry> {
        let geometry = self.geometry.get(preset).ok_or_else(|| {
            CliError::validation(format!(
                "unknown geometry preset `{preset}`; configured presets: {}",
                self.geometry.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        })?;
        ActuatorGeometry::new(
            geometry.cavity_length_l_mm,
            geometry.cavity_width_w_mm,
            geometry.aperture_diameter_d_mm,
        )
        .map_err(CliError::validation)
    }

    /// Resolve the thermal model for a geometry: explicit overrides win,
    /// otherwise the envelope fit supplies the heating-side parameters.
    pub fn thermal_model(&self, geometry: ActuatorGeometry) -> CliResult<ThermalModel> {
        let ambient = self.ambient_state()?;
        let gains = self.chain_gains()?;
        let fit = self.envelope_fit()?;
        let tau_cool_s = self.thermal.tau_cool_ms * 1e-3;
        match (self.thermal.r_thermal_k_per_w, self.thermal.heat_capacity_j_per_k) {
            (Some(r), Some(c)) => {
                let tau_heat_s = self.thermal.tau_heat_ms.map_or(r * c, |ms| ms * 1e-3);
                ThermalModel::new(
                    r,
                    c,
                    tau_heat_s,
                    tau_cool_s,
                    self.envelope.t_fail_c,
                    geometry,
                    ambient,
                    gains,
                )
                .map_err(CliError::validation)
            }
            (None, None) => {
                ThermalModel::from_envelope(&fit, geometry, ambient, gains, tau_cool_s)
                    .map_err(CliError::validation)
            }
            _ => Err(CliError::validation(
                "thermal.r_thermal_k_per_w and thermal.heat_capacity_j_per_k must be set together",
            )),
        }
    }

    /// Load the configured resistivity table, or the explicit override.
    pub fn resistivity_table(&self, override_path: Option<&Path>) -> CliResult<Option<ResistivityTable>> {
        let path = override_path.or(self.resistivity_table.as_deref());
        let Some(path) = path else { return Ok(None) };
        let text = read_to_string(path)?;
        ResistivityTable::read_csv(text.as_bytes())
            .map(Some)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_through_toml() {
        let config = ProjectConfig::default();
        let text = config.to_toml().unwrap();
        let back: ProjectConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.safety_margin, 0.10);
        assert_eq!(back.geometry.len(), 3);
        assert!(text.contains("tau_cool_ms"));
        assert!(text.contains("a_mm_k_per_w"));
    }

    #[test]
    fn partial_config_fills_defaults() {
        let config: ProjectConfig = toml::from_str("safety_margin = 0.2\n").unwrap();
        assert_eq!(config.safety_margin, 0.2);
        assert_eq!(config.thermal.tau_cool_ms, 110.0);
        assert!(config.geometry.contains_key("L8D6"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ProjectConfig>("tau_cool = 1\n").is_err());
    }

    #[test]
    fn thermal_model_derives_from_envelope() {
        let config = ProjectConfig::default();
        let geometry = config.actuator_geometry("L8D6").unwrap();
        let model = config.thermal_model(geometry).unwrap();
        assert!((model.r_thermal_k_per_w - 6601.0 / 17.0).abs() < 1e-9);
        assert!((model.tau_heat_s - 6601.0 * 6.51e-6).abs() < 1e-12);
        assert_eq!(model.tau_cool_s, 0.110);
    }
}
