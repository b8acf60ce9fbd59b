//! Expansion of a multi-valued configuration into atomic configurations.
//!
//! Every selected or/xor group and every selected attribute with values is an
//! axis. Axes are ordered by a pre-order walk of the model. An axis with more
//! than one value multiplies the number of atomic configurations; single-valued
//! axes are carried as constants. Atomic configurations are enumerated
//! lexicographically: the last axis varies fastest.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::config::{validate, Configuration, ValidationReport};
use crate::model::{Decomposition, FeatureModel};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<String>,
}

impl Axis {
    pub fn varies(&self) -> bool {
        self.values.len() > 1
    }
}

/// Ordered axis-name to value pairs; serialized as a JSON object in axis order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AxisValues(pub Vec<(String, String)>);

impl Serialize for AxisValues {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for AxisValues {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = AxisValues;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map of axis names to values")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<AxisValues, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = access.next_entry::<String, String>()? {
                    out.push((k, v));
                }
                Ok(AxisValues(out))
            }
        }
        deserializer.deserialize_map(V)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicConfiguration {
    pub index: usize,
    pub axes: AxisValues,
}

impl AtomicConfiguration {
    pub fn get(&self, axis: &str) -> Option<&str> {
        self.axes.0.iter().find(|(k, _)| k == axis).map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExpandError {
    #[error("configuration is invalid:\n{0}")]
    Invalid(ValidationReport),
    #[error("the number of atomic configurations overflows")]
    TooMany,
    #[error("atomic index {index} is out of range (count {count})")]
    OutOfRange { index: usize, count: usize },
}

/// The axes of a configuration, in declaration order. Assumes a valid configuration.
pub fn axes(model: &FeatureModel, config: &Configuration) -> Vec<Axis> {
    let mut out = Vec::new();
    for (f, _) in model.features() {
        if !config.is_selected(model, &f.name) {
            continue;
        }
        match f.decomposition {
            Decomposition::Or | Decomposition::Xor => {
                let values: Vec<String> = f
                    .children
                    .iter()
                    .filter(|c| config.is_selected(model, &c.name))
                    .map(|c| c.display_value().to_string())
                    .collect();
                if !values.is_empty() {
                    out.push(Axis { name: f.name.clone(), values });
                }
            }
            _ => {
                if let Some(vals) = config.values.get(&f.name).filter(|v| !v.is_empty()) {
                    out.push(Axis {
                        name: f.name.clone(),
                        values: vals.iter().map(ToString::to_string).collect(),
                    });
                }
            }
        }
    }
    out
}

fn product(axes: &[Axis]) -> Result<usize, ExpandError> {
    axes.iter()
        .try_fold(1usize, |acc, a| acc.checked_mul(a.values.len()))
        .ok_or(ExpandError::TooMany)
}

fn ensure_valid(model: &FeatureModel, config: &Configuration) -> Result<Vec<Axis>, ExpandError> {
    let report = validate(model, config);
    if !report.valid {
        return Err(ExpandError::Invalid(report));
    }
    Ok(axes(model, config))
}

/// Number of atomic configurations without materializing them.
pub fn count_atomic_configurations(model: &FeatureModel, config: &Configuration) -> Result<usize, ExpandError> {
    product(&ensure_valid(model, config)?)
}

/// The atomic configuration at `index` of the lexicographic enumeration.
pub fn atomic_at(axes: &[Axis], index: usize) -> Result<AtomicConfiguration, ExpandError> {
    let count = product(axes)?;
    if index >= count {
        return Err(ExpandError::OutOfRange { index, count });
    }
    let mut rem = index;
    let mut picked = Vec::with_capacity(axes.len());
    for axis in axes.iter().rev() {
        let n = axis.values.len();
        picked.push((axis.name.clone(), axis.values[rem % n].clone()));
        rem /= n;
    }
    picked.reverse();
    Ok(AtomicConfiguration {
        index,
        axes: AxisValues(picked),
    })
}

pub fn expand_atomic_configurations(
    model: &FeatureModel,
    config: &Configuration,
) -> Result<Vec<AtomicConfiguration>, ExpandError> {
    let axes = ensure_valid(model, config)?;
    let count = product(&axes)?;
    (0..count).map(|i| atomic_at(&axes, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AttrValue;
    use alloc::vec;

    fn model() -> FeatureModel {
        FeatureModel::parse(
            "model M 1\nRoot\n  Type\n    or:\n      F \"Functions\"\n      P \"Performance\"\n      S\n  Domain attr text multiple\n  Lang attr text multiple\n",
        )
        .unwrap()
    }

    fn cfg(types: &[&str], domains: &[&str]) -> Configuration {
        Configuration::new("M")
            .select(&["Type"])
            .select(types)
            .with_values("Domain", domains.iter().map(|d| AttrValue::from(*d)).collect())
            .with_values("Lang", vec!["English".into()])
    }

    #[test]
    fn two_domains_by_three_types() {
        let atoms = expand_atomic_configurations(&model(), &cfg(&["F", "P", "S"], &["H", "R"])).unwrap();
        // hand enumeration, Type declared before Domain so Domain varies fastest
        let expected = [
            ("Functions", "H"),
            ("Functions", "R"),
            ("Performance", "H"),
            ("Performance", "R"),
            ("S", "H"),
            ("S", "R"),
        ];
        assert_eq!(atoms.len(), 6);
        for (i, (a, (t, d))) in atoms.iter().zip(expected).enumerate() {
            assert_eq!(a.index, i);
            assert_eq!(a.get("Type"), Some(t));
            assert_eq!(a.get("Domain"), Some(d));
            assert_eq!(a.get("Lang"), Some("English"));
        }
    }

    #[test]
    fn all_single_valued_gives_one() {
        let atoms = expand_atomic_configurations(&model(), &cfg(&["P"], &["H"])).unwrap();
        assert_eq!(atoms.len(), 1);
        assert_eq!(
            atoms[0].axes.0,
            vec![
                ("Type".into(), "Performance".into()),
                ("Domain".into(), "H".into()),
                ("Lang".into(), "English".into())
            ]
        );
    }

    #[test]
    fn invalid_configuration_is_rejected_with_report() {
        let err = expand_atomic_configurations(&model(), &cfg(&[], &["H"])).unwrap_err();
        let ExpandError::Invalid(report) = err else { panic!("{err:?}") };
        assert!(!report.valid);
    }

    #[test]
    fn axes_serialize_in_order() {
        let a = atomic_at(
            &[
                Axis { name: "Z".into(), values: vec!["1".into()] },
                Axis { name: "A".into(), values: vec!["2".into()] },
            ],
            0,
        )
        .unwrap();
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(json, r#"{"index":0,"axes":{"Z":"1","A":"2"}}"#);
        assert_eq!(serde_json::from_str::<AtomicConfiguration>(&json).unwrap(), a);
    }
}
