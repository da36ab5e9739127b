//! Instance file format.
//!
//! ```json
//! {
//!   "L": 2,
//!   "V": 2,
//!   "log_transitions": [[null, 0.0], [null, null]],
//!   "log_emissions": [[-0.105, -2.302], [-1.609, -0.223]],
//!   "vocab": ["a", "b"],
//!   "meta": {}
//! }
//! ```
//!
//! `null` encodes `-inf`. Finite entries round-trip bit-exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::logspace::LOG_ZERO;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(rename = "L")]
    pub length: usize,
    #[serde(rename = "V")]
    pub vocab_size: usize,
    pub log_transitions: Vec<Vec<Option<f64>>>,
    pub log_emissions: Vec<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Value>,
}

fn decode_rows(rows: Vec<Vec<Option<f64>>>) -> Vec<Vec<f64>> {
    rows.into_iter()
        .map(|r| r.into_iter().map(|v| v.unwrap_or(LOG_ZERO)).collect())
        .collect()
}

fn encode_row(row: &[f64]) -> Vec<Option<f64>> {
    row.iter()
        .map(|&v| if v.is_finite() { Some(v) } else { None })
        .collect()
}

impl InstanceFile {
    pub fn from_instance(instance: &Instance, meta: Option<Value>) -> Self {
        let l = instance.length();
        Self {
            length: l,
            vocab_size: instance.vocab_size(),
            log_transitions: (1..=l).map(|t| encode_row(instance.transition_row(t))).collect(),
            log_emissions: (1..=l).map(|t| encode_row(instance.emission_row(t))).collect(),
            vocab: instance.vocab().map(<[String]>::to_vec),
            meta,
        }
    }

    pub fn into_instance(self, validate: bool) -> Result<Instance> {
        let mut instance = Instance::new(
            self.length,
            self.vocab_size,
            decode_rows(self.log_transitions),
            decode_rows(self.log_emissions),
        )?;
        if let Some(vocab) = self.vocab {
            instance = instance.with_vocab(vocab)?;
        }
        if validate {
            instance.ensure_valid()?;
        }
        Ok(instance)
    }
}

/// Parses a JSON instance document. Invariants are checked unless `validate` is false.
pub fn parse_instance(document: &str, validate: bool) -> Result<Instance> {
    let file: InstanceFile = serde_json::from_str(document).map_err(|e| {
        Error::Parse(format!("line {} column {}: {e}", e.line(), e.column()))
    })?;
    file.into_instance(validate)
}

pub fn serialize_instance(instance: &Instance, meta: Option<Value>) -> String {
    serde_json::to_string_pretty(&InstanceFile::from_instance(instance, meta))
        .expect("instance documents always serialize")
}

/// Hex SHA-256 of raw bytes.
pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A parsed instance with the digest of the bytes it came from.
#[derive(Debug, Clone)]
pub struct LoadedInstance {
    pub instance: Instance,
    pub sha256: String,
}

pub fn load_instance(path: &Path, validate: bool) -> Result<LoadedInstance> {
    let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let instance = parse_instance(text, validate).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    Ok(LoadedInstance {
        instance,
        sha256: digest(&bytes),
    })
}

/// Rounds to 12 significant digits for output; `-inf` becomes `None`.
pub fn round_log(x: f64) -> Option<f64> {
    if !x.is_finite() {
        return None;
    }
    format!("{x:.11e}").parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{generate_instance, GeneratorConfig};
    use crate::instance::fixtures::i2;
    use proptest::prelude::*;

    #[test]
    fn i2_round_trip() {
        let doc = serialize_instance(&i2(), None);
        assert!(doc.contains("null"));
        assert_eq!(parse_instance(&doc, true).unwrap(), i2());
    }

    #[test]
    fn vocab_and_meta() {
        let inst = i2().with_vocab(vec!["yes".into(), "no".into()]).unwrap();
        let doc = serialize_instance(&inst, Some(serde_json::json!({"source": "test"})));
        let back = parse_instance(&doc, true).unwrap();
        assert_eq!(back.vocab().unwrap(), ["yes", "no"]);
    }

    #[test]
    fn shape_mismatch() {
        let doc = r#"{"L": 4, "V": 1,
            "log_transitions": [[null, 0.0, null], [null, null, 0.0], [null, null, null]],
            "log_emissions": [[0.0], [0.0], [0.0], [0.0]]}"#;
        assert!(matches!(parse_instance(doc, true), Err(Error::Shape(_))));
    }

    #[test]
    fn positive_entry_fails_validation_unless_overridden() {
        let doc = r#"{"L": 1, "V": 2, "log_transitions": [[null]], "log_emissions": [[0.5, -3.0]]}"#;
        assert!(matches!(parse_instance(doc, true), Err(Error::Invalid(_))));
        assert!(parse_instance(doc, false).is_ok());
    }

    #[test]
    fn malformed_document_reports_location() {
        let err = parse_instance("{\"L\": 2,\n \"V\": }", true).unwrap_err();
        match err {
            Error::Parse(msg) => assert!(msg.contains("line 2"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_instance(r#"{"L": 1}"#, true), Err(Error::Parse(_))));
    }

    #[test]
    fn rounding() {
        assert_eq!(round_log(0.72f64.ln()), Some(-0.328504066972));
        assert_eq!(round_log(f64::NEG_INFINITY), None);
        assert_eq!(round_log(0.0), Some(0.0));
    }

    proptest! {
        #[test]
        fn generated_instances_round_trip_bit_exactly(
            l in 1usize..10, v in 1usize..6, seed in any::<u64>(), sparsity in 0.0f64..0.9
        ) {
            let c = GeneratorConfig { sparsity, ..GeneratorConfig::new(l, v, seed) };
            let inst = generate_instance(&c).unwrap();
            let doc = serialize_instance(&inst, None);
            let back = parse_instance(&doc, true).unwrap();
            for t in 1..=l {
                for (a, b) in inst.transition_row(t).iter().zip(back.transition_row(t)) {
                    prop_assert_eq!(a.to_bits(), b.to_bits());
                }
                for (a, b) in inst.emission_row(t).iter().zip(back.emission_row(t)) {
                    prop_assert_eq!(a.to_bits(), b.to_bits());
                }
            }
            prop_assert_eq!(serialize_instance(&back, None), doc);
        }
    }
}
