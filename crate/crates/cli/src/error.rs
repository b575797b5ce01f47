use std::fmt;

use serde_json::{json, Value};

/// Failure classes with their process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Invalid job specification. Exit 2.
    Spec(String),
    /// `|μ| + |ν| ≥ 1` or a non-positive matrix. Exit 3.
    Ellipticity { message: String, location: Value },
    /// A residual or fit exceeded its tolerance; the report was still written. Exit 4.
    Verification(String),
    /// Anything else. Exit 1.
    Internal(String),
}

impl CliError {
    pub fn spec(msg: impl Into<String>) -> Self {
        CliError::Spec(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Spec(_) => 2,
            CliError::Ellipticity { .. } => 3,
            CliError::Verification(_) => 4,
            CliError::Internal(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Spec(_) => "spec",
            CliError::Ellipticity { .. } => "ellipticity",
            CliError::Verification(_) => "verification",
            CliError::Internal(_) => "internal",
        }
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({ "error": self.kind(), "message": self.to_string() });
        if let CliError::Ellipticity { location, .. } = self {
            v["location"] = location.clone();
        }
        v
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Spec(m) | CliError::Verification(m) | CliError::Internal(m) => f.write_str(m),
            CliError::Ellipticity { message, .. } => f.write_str(message),
        }
    }
}

impl From<beltrami_core::Error> for CliError {
    fn from(e: beltrami_core::Error) -> Self {
        use beltrami_core::Error as E;
        match e {
            E::Ellipticity {
                location,
                modulus_sum,
                margin,
            } => CliError::Ellipticity {
                message: e.to_string(),
                location: json!({
                    "re": finite_or_null(location.re),
                    "im": finite_or_null(location.im),
                    "modulus_sum": modulus_sum,
                    "margin": margin,
                }),
            },
            E::NotPositiveDefinite { location, a11, det } => CliError::Ellipticity {
                message: e.to_string(),
                location: json!({
                    "re": finite_or_null(location.re),
                    "im": finite_or_null(location.im),
                    "a11": a11,
                    "det": det,
                }),
            },
            E::Domain(_) | E::InvalidGrid(_) | E::OriginOnCircle => CliError::Spec(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}
