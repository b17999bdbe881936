//! Error classification, duration parsing, and file helpers shared by the
//! subcommands.

use std::fmt::Display;
use std::path::Path;

use serde::Serialize;

/// Exit code 2: the input or configuration was rejected (including safety
/// rejections). Exit code 1: something internal went wrong.
#[derive(Debug)]
pub enum CliError {
    Validation {
        message: String,
        details: Option<serde_json::Value>,
    },
    Internal {
        message: String,
    },
}

impl CliError {
    pub fn validation(err: impl Display) -> Self {
        CliError::Validation {
            message: err.to_string(),
            details: None,
        }
    }

    pub fn validation_with<T: Serialize>(err: impl Display, details: &T) -> Self {
        CliError::Validation {
            message: err.to_string(),
            details: serde_json::to_value(details).ok(),
        }
    }

    pub fn internal(err: impl Display) -> Self {
        CliError::Internal {
            message: err.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => 2,
            CliError::Internal { .. } => 1,
        }
    }

    /// The machine-parseable stderr payload.
    pub fn to_json(&self) -> String {
        let (kind, message, details) = match self {
            CliError::Validation { message, details } => ("validation", message, details.clone()),
            CliError::Internal { message } => ("internal", message, None),
        };
        let mut error = serde_json::Map::new();
        error.insert("kind".into(), kind.into());
        error.insert("message".into(), message.as_str().into());
        if let Some(details) = details {
            error.insert("details".into(), details);
        }
        let mut root = serde_json::Map::new();
        root.insert("error".into(), serde_json::Value::Object(error));
        serde_json::to_string(&serde_json::Value::Object(root)).unwrap_or_else(|_| {
            format!("{{\"error\":{{\"kind\":\"{kind}\",\"message\":\"unserializable\"}}}}")
        })
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

/// Parse a duration with an optional unit suffix: `75ms`, `0.075s`,
/// `500us`; a bare number is seconds.
pub fn parse_duration_s(text: &str) -> CliResult<f64> {
    let trimmed = text.trim();
    let (number, scale) = if let Some(v) = trimmed.strip_suffix("us") {
        (v, 1e-6)
    } else if let Some(v) = trimmed.strip_suffix("ms") {
        (v, 1e-3)
    } else if let Some(v) = trimmed.strip_suffix('s') {
        (v, 1.0)
    } else {
        (trimmed, 1.0)
    };
    let value: f64 = number
        .trim()
        .parse()
        .map_err(|_| CliError::validation(format!("cannot parse duration `{text}`")))?;
    if !value.is_finite() {
        return Err(CliError::validation(format!("duration `{text}` is not finite")));
    }
    Ok(value * scale)
}

pub fn read_to_string(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::internal(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, bytes)
        .map_err(|e| CliError::internal(format!("cannot write {}: {e}", path.display())))
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| CliError::internal(format!("json serialization failed: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duration_suffixes() {
        assert_eq!(parse_duration_s("75ms").unwrap(), 0.075);
        assert_eq!(parse_duration_s("0.075s").unwrap(), 0.075);
        assert_eq!(parse_duration_s("500us").unwrap(), 0.0005);
        assert_eq!(parse_duration_s("0.075").unwrap(), 0.075);
        assert_eq!(parse_duration_s(" 10 ms ").unwrap(), 0.010);
        assert!(parse_duration_s("abc").is_err());
    }

    #[test]
    fn error_json_shape() {
        let err = CliError::validation("bad input");
        let json: serde_json::Value = serde_json::from_str(&err.to_json()).unwrap();
        assert_eq!(json["error"]["kind"], "validation");
        assert_eq!(json["error"]["message"], "bad input");
        assert_eq!(err.exit_code(), 2);
        assert_eq!(CliError::internal("boom").exit_code(), 1);
    }
}
