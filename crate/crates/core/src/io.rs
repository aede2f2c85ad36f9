//! JSON file formats and CSV helpers.
//!
//! Every parser takes raw bytes, never panics, and returns validated domain
//! objects. These are the entry points exercised by the fuzz targets.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intervention::{intervention_from_value, AdaptiveIntervention, Intervention};
use crate::linalg::ComplexMatrix;
use crate::povm::{povm_from_value, Povm};
use crate::state::{validate_density, DensityMatrix, PureState};

fn parse<T: DeserializeOwned>(bytes: &[u8]) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|e| Error::Parse(e.to_string()))
}

pub fn parse_matrix(bytes: &[u8]) -> Result<ComplexMatrix> {
    parse(bytes)
}

pub fn parse_intervention(bytes: &[u8]) -> Result<Intervention> {
    intervention_from_value(parse(bytes)?)
}

pub fn parse_povm(bytes: &[u8]) -> Result<Povm> {
    povm_from_value(parse(bytes)?)
}

/// Map from prior outcome label to intervention.
pub fn parse_adaptive(bytes: &[u8]) -> Result<AdaptiveIntervention> {
    let raw: BTreeMap<String, serde_json::Value> = parse(bytes)?;
    let branches = raw
        .into_iter()
        .map(|(label, v)| Ok((label, intervention_from_value(v)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    AdaptiveIntervention::new(branches)
}

/// Anything a `--in` file of the `dilate` command may hold.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementFile {
    Povm(Povm),
    Intervention(Intervention),
}

/// Distinguishes a POVM file (`"elements"`) from an intervention file
/// (`"outcomes"`).
pub fn parse_measurement(bytes: &[u8]) -> Result<MeasurementFile> {
    let value: serde_json::Value = parse(bytes)?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Parse("expected a JSON object".into()))?;
    if obj.contains_key("elements") {
        Ok(MeasurementFile::Povm(povm_from_value(value)?))
    } else {
        Ok(MeasurementFile::Intervention(intervention_from_value(
            value,
        )?))
    }
}

/// State file: `{"amplitudes": [...]}` for a pure state, `{"density":
/// matrix}` or a bare matrix object for a density matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateFile {
    Pure(PureState),
    Density { density: DensityMatrix },
    Matrix(DensityMatrix),
}

impl StateFile {
    pub fn density(&self) -> DensityMatrix {
        match self {
            StateFile::Pure(p) => p.density(),
            StateFile::Density { density } | StateFile::Matrix(density) => density.clone(),
        }
    }

    pub fn pure(&self) -> Option<&PureState> {
        match self {
            StateFile::Pure(p) => Some(p),
            _ => None,
        }
    }
}

pub fn parse_state(bytes: &[u8]) -> Result<StateFile> {
    // untagged enums swallow inner errors, so dispatch by key instead
    let value: serde_json::Value = parse(bytes)?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Parse("expected a JSON object".into()))?;
    let de = |v: serde_json::Value| -> Result<DensityMatrix> {
        let m: ComplexMatrix =
            serde_json::from_value(v).map_err(|e| Error::Parse(e.to_string()))?;
        validate_density(m)
    };
    if obj.contains_key("amplitudes") {
        let p: PureState =
            serde_json::from_value(value).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(StateFile::Pure(p))
    } else if let Some(d) = obj.get("density") {
        Ok(StateFile::Density {
            density: de(d.clone())?,
        })
    } else {
        Ok(StateFile::Matrix(de(value)?))
    }
}

/// Pretty JSON with shortest round-trip float formatting.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// `%.6g`-style formatting: six significant digits, trailing zeros
/// trimmed.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.5e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        return format!("{m}e{exp}");
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Quotes a CSV field when needed.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
