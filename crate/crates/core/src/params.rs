//! The JSON parameter file shared by calibration and envelope outputs.
//! Every field name carries its unit; absent sections simply have not been
//! calibrated yet.

use serde::{Deserialize, Serialize};

use crate::calibration::TauFit;
use crate::core_physics::ChainGains;
use crate::envelope::EnvelopeFit;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParameterFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope: Option<EnvelopeFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<TauFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gains: Option<ChainGains>,
}

impl ParameterFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("parameter file serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
