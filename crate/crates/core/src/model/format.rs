//! JSON instance files. Times, rates and costs are decimal strings.

use std::fmt;
use std::path::Path;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{DelayFunction, Instance, Request, SetSystem, WeightedSet};
use crate::error::{Error, Result};

/// A real number stored as a decimal string. Numbers are accepted on input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decimal(pub f64);

impl Serialize for Decimal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        // `Display` for f64 prints the shortest string that parses back to the same bits.
        s.serialize_str(&self.0.to_string())
    }
}

fn parse_decimal(text: &str) -> Option<f64> {
    let body = text.strip_prefix('-').unwrap_or(text);
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(p) => (&body[..p], Some(&body[p + 1..])),
        None => (body, None),
    };
    let (int, frac) = match mantissa.split_once('.') {
        Some((a, b)) => (a, Some(b)),
        None => (mantissa, None),
    };
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if !digits(int) || frac.is_some_and(|f| !digits(f)) {
        return None;
    }
    if let Some(exp) = exponent {
        if !digits(exp.strip_prefix(['+', '-']).unwrap_or(exp)) {
            return None;
        }
    }
    text.parse::<f64>().ok().filter(|v| v.is_finite())
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct DecimalVisitor;
        impl Visitor<'_> for DecimalVisitor {
            type Value = Decimal;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a decimal string such as \"1.5\"")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Decimal, E> {
                parse_decimal(v)
                    .map(Decimal)
                    .ok_or_else(|| E::custom(format!("invalid decimal {v:?}")))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Decimal, E> {
                Ok(Decimal(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Decimal, E> {
                Ok(Decimal(v as f64))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Decimal, E> {
                Ok(Decimal(v as f64))
            }
        }
        d.deserialize_any(DecimalVisitor)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetEntry {
    pub cost: Decimal,
    pub elements: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestEntry {
    pub element: usize,
    pub release: Decimal,
    pub rates: Vec<(Decimal, Decimal)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline: Option<Decimal>,
}

/// On-disk layout of an [`Instance`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub sets: Vec<SetEntry>,
    pub requests: Vec<RequestEntry>,
    pub horizon: Decimal,
}

fn prefix_location(err: Error, prefix: &str) -> Error {
    match err {
        Error::Validation { location, message } => Error::Validation {
            location: format!("{prefix}.{location}"),
            message,
        },
        other => other,
    }
}

impl InstanceFile {
    pub fn from_instance(inst: &Instance) -> Self {
        InstanceFile {
            sets: inst
                .system
                .sets()
                .iter()
                .map(|s| SetEntry {
                    cost: Decimal(s.cost),
                    elements: s.elements.clone(),
                })
                .collect(),
            requests: inst
                .requests
                .iter()
                .map(|r| RequestEntry {
                    element: r.element,
                    release: Decimal(r.release),
                    rates: r.delay.segments().map(|(t, v)| (Decimal(t), Decimal(v))).collect(),
                    deadline: r.delay.hard_deadline().map(Decimal),
                })
                .collect(),
            horizon: Decimal(inst.horizon),
        }
    }

    pub fn into_instance(self) -> Result<Instance> {
        let sets = self
            .sets
            .into_iter()
            .map(|s| WeightedSet::new(s.cost.0, s.elements))
            .collect();
        let system = SetSystem::new(sets)?;
        let mut requests = Vec::with_capacity(self.requests.len());
        for (idx, r) in self.requests.into_iter().enumerate() {
            let delay = DelayFunction::new(
                r.rates.into_iter().map(|(t, v)| (t.0, v.0)).collect(),
                r.deadline.map(|d| d.0),
            )
            .map_err(|e| prefix_location(e, &format!("requests[{idx}]")))?;
            requests.push(Request::new(idx, r.element, r.release.0, delay));
        }
        Instance::new(system, requests, self.horizon.0)
    }
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        location: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    file.into_instance()
}

pub fn instance_to_json(inst: &Instance) -> String {
    serde_json::to_string_pretty(&InstanceFile::from_instance(inst))
        .expect("instance file serialization is infallible")
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_instance(&text).map_err(|e| match e {
        Error::Parse { location, message } => Error::Parse {
            location: format!("{}: {location}", path.as_ref().display()),
            message,
        },
        other => other,
    })
}

pub fn save_instance(inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    let mut text = instance_to_json(inst);
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "sets": [{"cost": "1", "elements": [0]}],
        "requests": [{"element": 0, "release": "0", "rates": [["0", "1"]]}],
        "horizon": "5"
    }"#;

    #[test]
    fn minimal_file() {
        let inst = parse_instance(MINIMAL).unwrap();
        assert_eq!(inst.system.element_count(), 1);
        assert_eq!(inst.system.set_count(), 1);
        assert_eq!(inst.system.max_membership(), 1);
        assert_eq!(inst.requests.len(), 1);
    }

    #[test]
    fn cost_below_one() {
        let text = MINIMAL.replace("\"cost\": \"1\"", "\"cost\": \"0.5\"");
        let err = parse_instance(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("cost below 1") && msg.contains("sets[0].cost"), "{msg}");
    }

    #[test]
    fn malformed_reports_position() {
        let err = parse_instance("{\"sets\": [}").unwrap_err();
        assert!(matches!(err, Error::Parse { ref location, .. } if location.starts_with("line 1")));
    }

    #[test]
    fn bad_decimal_rejected() {
        let text = MINIMAL.replace("\"horizon\": \"5\"", "\"horizon\": \"five\"");
        assert!(matches!(parse_instance(&text), Err(Error::Parse { .. })));
        assert_eq!(parse_decimal("1e3"), Some(1000.0));
        assert_eq!(parse_decimal("inf"), None);
        assert_eq!(parse_decimal("1."), None);
        assert_eq!(parse_decimal("-0.25"), Some(-0.25));
    }

    #[test]
    fn bad_rate_location() {
        let text = MINIMAL.replace("[[\"0\", \"1\"]]", "[[\"0\", \"-1\"]]");
        let msg = parse_instance(&text).unwrap_err().to_string();
        assert!(msg.contains("requests[0].rates[0]"), "{msg}");
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let sys = SetSystem::new(vec![
            WeightedSet::new(1.0 / 3.0 + 1.0, vec![0, 2]),
            WeightedSet::new(std::f64::consts::PI, vec![1, 2]),
        ])
        .unwrap();
        let delay = DelayFunction::new(vec![(0.1, 0.7), (0.1 + 0.2, 1e-7)], Some(2.0 / 3.0)).unwrap();
        let reqs = vec![Request::new(0, 2, 0.1, delay)];
        let inst = Instance::new(sys, reqs, 10.0 / 7.0).unwrap();
        let back = parse_instance(&instance_to_json(&inst)).unwrap();
        assert_eq!(back, inst);
        assert_eq!(back.digest(), inst.digest());
    }
}
