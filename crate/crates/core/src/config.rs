//! Run configuration as a flat JSON object with dotted keys.
//!
//! ```json
//! { "seed": 7, "train.learning_rate": 0.001, "meta.inner_steps": 5 }
//! ```
//!
//! Keys not listed in [`RunConfig::keys`] are rejected. Missing keys keep
//! their defaults, and values given later through [`RunConfig::set`]
//! override earlier ones.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::meta::MetaConfig;
use crate::metrics::EvalConfig;
use crate::nn::{ModelDims, TrainConfig, Vocabulary};
use crate::sampler::{default_max_tuples, parse_repair_mode, GenerationConfig};
use crate::selfpaced::SelfPacedConfig;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("config key {key:?}: {message}")]
    BadValue { key: String, message: String },
    #[error("config file must hold a JSON object with dotted keys")]
    NotAnObject,
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelWidths {
    pub embed: usize,
    pub hidden: usize,
    pub layers: usize,
    pub head_hidden: usize,
}

impl Default for ModelWidths {
    fn default() -> Self {
        Self { embed: 128, hidden: 256, layers: 1, head_hidden: 512 }
    }
}

impl ModelWidths {
    pub fn dims(&self, v: &Vocabulary) -> ModelDims {
        ModelDims::new(v, self.embed, self.hidden, self.layers, self.head_hidden)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSettings {
    pub count: usize,
    /// `None` derives the cap from the reference data or the vocabulary
    pub max_tuples: Option<usize>,
    pub temperature: f64,
    pub repair: String,
}

impl Default for GenerateSettings {
    fn default() -> Self {
        Self { count: 512, max_tuples: None, temperature: 1.0, repair: "strict".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSettings {
    /// dataset files carry no edge labels
    pub unlabeled_edges: bool,
    /// fraction of each auxiliary dataset held out to monitor training
    pub holdout: f64,
    pub split_train: f64,
    pub split_validation: f64,
    pub split_test: f64,
}

impl Default for DataSettings {
    fn default() -> Self {
        Self { unlabeled_edges: false, holdout: 0.1, split_train: 0.8, split_validation: 0.1, split_test: 0.1 }
    }
}

/// Every tunable setting of a command-line run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelWidths,
    pub train: TrainConfig,
    pub meta: MetaConfig,
    pub selfpaced: SelfPacedConfig,
    pub generate: GenerateSettings,
    pub eval: EvalConfig,
    pub data: DataSettings,
}

fn section<T: Serialize>(out: &mut BTreeMap<String, Value>, name: &str, value: &T) {
    let Value::Object(map) = serde_json::to_value(value).expect("config sections serialize") else {
        unreachable!("config sections are structs")
    };
    for (k, v) in map {
        // section seeds all follow the top-level seed
        if k != "seed" {
            out.insert(format!("{name}.{k}"), v);
        }
    }
}

fn load_section<T: for<'de> Deserialize<'de>>(
    flat: &BTreeMap<String, Value>,
    name: &str,
    with_seed: bool,
) -> Result<T, ConfigError> {
    let prefix = format!("{name}.");
    let mut map = Map::new();
    for (k, v) in flat {
        if let Some(field) = k.strip_prefix(&prefix) {
            map.insert(field.to_string(), v.clone());
        }
    }
    if with_seed {
        map.insert("seed".into(), flat["seed"].clone());
    }
    serde_json::from_value(Value::Object(map)).map_err(|e| ConfigError::BadValue { key: name.into(), message: e.to_string() })
}

impl RunConfig {
    /// All settings as dotted keys, sorted.
    pub fn to_flat(&self) -> BTreeMap<String, Value> {
        let mut out = BTreeMap::new();
        out.insert("seed".into(), Value::from(self.seed));
        section(&mut out, "model", &self.model);
        section(&mut out, "train", &self.train);
        section(&mut out, "meta", &self.meta);
        section(&mut out, "selfpaced", &self.selfpaced);
        section(&mut out, "generate", &self.generate);
        section(&mut out, "eval", &self.eval);
        section(&mut out, "data", &self.data);
        out
    }

    pub fn keys() -> Vec<String> {
        Self::default().to_flat().into_keys().collect()
    }

    fn from_flat(flat: &BTreeMap<String, Value>) -> Result<Self, ConfigError> {
        let seed = flat["seed"]
            .as_u64()
            .ok_or_else(|| ConfigError::BadValue { key: "seed".into(), message: "expected a non-negative integer".into() })?;
        let c = Self {
            seed,
            model: load_section(flat, "model", false)?,
            train: load_section(flat, "train", true)?,
            meta: load_section(flat, "meta", true)?,
            selfpaced: load_section(flat, "selfpaced", false)?,
            generate: load_section(flat, "generate", false)?,
            eval: load_section(flat, "eval", false)?,
            data: load_section(flat, "data", false)?,
        };
        Ok(c)
    }

    /// Sets one dotted key to a JSON value.
    pub fn set(&mut self, key: &str, value: Value) -> Result<(), ConfigError> {
        let mut flat = self.to_flat();
        match flat.get_mut(key) {
            Some(slot) => *slot = value,
            None => return Err(ConfigError::UnknownKey(key.into())),
        }
        let updated = Self::from_flat(&flat).map_err(|e| match e {
            ConfigError::BadValue { message, .. } => ConfigError::BadValue { key: key.into(), message },
            e => e,
        })?;
        *self = updated;
        Ok(())
    }

    /// Parses `key=value`. The value is read as JSON when it parses, and as
    /// a plain string otherwise.
    pub fn set_assignment(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::BadValue { key: assignment.into(), message: "expected key=value".into() })?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.into()));
        self.set(key.trim(), value)
    }

    /// Applies every key of a flat JSON object on top of `self`.
    pub fn merge_json(&mut self, text: &str) -> Result<(), ConfigError> {
        let value: Value = serde_json::from_str(text).map_err(|_| ConfigError::NotAnObject)?;
        let Value::Object(map) = value else {
            return Err(ConfigError::NotAnObject);
        };
        for (k, v) in map {
            self.set(&k, v)?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        c.merge_json(text)?;
        Ok(c)
    }

    /// Pretty-printed flat object, one key per line.
    pub fn to_json(&self) -> String {
        let map: Map<String, Value> = self.to_flat().into_iter().collect();
        serde_json::to_string_pretty(&Value::Object(map)).expect("config serializes") + "\n"
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, ..self.train.clone() }
    }

    pub fn meta_config(&self) -> MetaConfig {
        MetaConfig { seed: self.seed, ..self.meta.clone() }
    }

    /// Generation settings; `max_edges` is the largest edge count of the
    /// reference data, if known.
    pub fn generation_config(&self, v: &Vocabulary, max_edges: Option<usize>) -> Result<GenerationConfig, ConfigError> {
        let n = v.max_timestamp();
        let max_tuples = self
            .generate
            .max_tuples
            .unwrap_or_else(|| max_edges.map_or(n * n.saturating_sub(1) / 2, default_max_tuples));
        let mut gc = GenerationConfig::new(max_tuples, self.generate.count, self.seed);
        gc.temperature = self.generate.temperature;
        gc.repair = parse_repair_mode(&self.generate.repair).ok_or_else(|| ConfigError::BadValue {
            key: "generate.repair".into(),
            message: format!("expected strict or lenient, got {:?}", self.generate.repair),
        })?;
        Ok(gc)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.train_config().validate().map_err(|e| inv(&e))?;
        self.meta_config().validate().map_err(|e| inv(&e))?;
        self.selfpaced.validate().map_err(|e| inv(&e))?;
        self.eval.validate().map_err(|e| inv(&e))?;
        let m = &self.model;
        if m.embed == 0 || m.hidden == 0 || m.layers == 0 || m.head_hidden == 0 {
            return Err(ConfigError::Invalid("model widths and layer count must be positive".into()));
        }
        if parse_repair_mode(&self.generate.repair).is_none() {
            return Err(ConfigError::Invalid(format!("unknown repair mode {:?}", self.generate.repair)));
        }
        if self.generate.count == 0 || self.generate.max_tuples == Some(0) {
            return Err(ConfigError::Invalid("generate.count and generate.max_tuples must be positive".into()));
        }
        if !(self.generate.temperature > 0.0 && self.generate.temperature.is_finite()) {
            return Err(ConfigError::Invalid("generate.temperature must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.data.holdout) {
            return Err(ConfigError::Invalid("data.holdout must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn round_trip_through_json() {
        let mut c = RunConfig::default();
        c.set("seed", json!(9)).unwrap();
        c.train.learning_rate = 0.01;
        c.selfpaced.lambda0 = Some(3.5);
        c.generate.max_tuples = Some(12);
        let back = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.train_config().seed, 9);
        assert_eq!(back.meta_config().seed, 9);
    }

    #[test]
    fn keys_are_flat_and_dotted() {
        let keys = RunConfig::keys();
        assert!(keys.contains(&"train.learning_rate".to_string()));
        assert!(keys.contains(&"meta.reduction".to_string()));
        assert!(keys.contains(&"selfpaced.lambda0".to_string()));
        assert!(!keys.iter().any(|k| k.ends_with(".seed")));
        assert!(keys.iter().all(|k| k == "seed" || k.split('.').count() == 2));
    }

    #[test]
    fn unknown_and_malformed_keys_are_errors() {
        assert_eq!(RunConfig::from_json(r#"{"train.lr": 1}"#), Err(ConfigError::UnknownKey("train.lr".into())));
        assert_eq!(RunConfig::from_json("[1]"), Err(ConfigError::NotAnObject));
        assert!(matches!(
            RunConfig::from_json(r#"{"train.batch_size": "big"}"#),
            Err(ConfigError::BadValue { key, .. }) if key == "train.batch_size"
        ));
    }

    #[test]
    fn later_values_override() {
        let mut c = RunConfig::from_json(r#"{"meta.inner_steps": 3, "seed": 4}"#).unwrap();
        c.set_assignment("meta.inner_steps=7").unwrap();
        c.set_assignment("meta.reduction=mean").unwrap();
        c.set("generate.repair", json!("lenient")).unwrap();
        assert_eq!(c.meta.inner_steps, 7);
        assert_eq!(c.seed, 4);
        assert_eq!(c.meta.reduction, crate::nn::Reduction::Mean);
        c.validate().unwrap();
        c.set_assignment("data.holdout=1.5").unwrap();
        assert!(c.validate().is_err());
    }
}
