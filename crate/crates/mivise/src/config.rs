//! Run configuration: a flat map of dotted keys loaded from JSON, with
//! command-line overrides taking precedence. Unknown keys are rejected, and
//! every run writes its fully-resolved configuration next to its outputs so
//! any result can be reproduced from that file alone.

use crate::data::SyntheticSpec;
use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::objective::{LossConfig, LossKind, SimilarityKind};
use crate::trainer::{GridSpec, PoolingKind, TrainConfig};
use serde_json::Value;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    UInt,
    Float,
    Str,
    UIntList,
}

/// Every recognized key with its type and default (None = must be supplied
/// before use).
const KEYS: &[(&str, Kind, Option<&str>)] = &[
    ("model.d", Kind::UInt, Some("256")),
    ("model.u", Kind::UInt, None), // defaults to model.d
    ("model.k", Kind::UInt, Some("8")),
    ("model.dropout", Kind::Float, Some("0.2")),
    ("video.input_dim", Kind::UInt, Some("2048")),
    ("video.max_len", Kind::UInt, Some("32")),
    ("sentence.input_dim", Kind::UInt, Some("200")),
    ("sentence.max_len", Kind::UInt, Some("32")),
    ("loss.rho", Kind::Float, Some("1.0")),
    ("loss.delta", Kind::Float, Some("1.0")),
    ("loss.alpha", Kind::Float, Some("1e-4")),
    ("loss.beta", Kind::Float, Some("0.5")),
    ("loss.kind", Kind::Str, Some("pseudo_huber")),
    ("loss.similarity", Kind::Str, Some("mil_max")),
    ("train.learning_rate", Kind::Float, Some("2e-4")),
    ("train.epochs", Kind::UInt, Some("500")),
    ("train.batch_size", Kind::UInt, Some("100")),
    ("train.seed", Kind::UInt, Some("0")),
    ("train.pooling", Kind::Str, Some("attention")),
    ("train.val_interval", Kind::UInt, Some("10")),
    ("grid.d", Kind::UIntList, Some("128,256,512")),
    ("grid.k", Kind::UIntList, Some("2,4,6,8,10,12")),
    ("grid.p", Kind::UIntList, Some("1,2,3,4")),
    ("data.manifest", Kind::Str, None),
    ("data.video_features", Kind::Str, None),
    ("data.sentence_features", Kind::Str, None),
    ("data.embedding_table", Kind::Str, None),
    ("synth.pairs", Kind::UInt, Some("2000")),
    ("synth.concepts", Kind::UInt, Some("8")),
    ("synth.m", Kind::UInt, Some("3")),
    ("synth.s", Kind::UInt, Some("1")),
    ("synth.video_width", Kind::UInt, Some("16")),
    ("synth.sentence_width", Kind::UInt, Some("16")),
    ("synth.len_min", Kind::UInt, Some("4")),
    ("synth.len_max", Kind::UInt, Some("8")),
    ("synth.sigma", Kind::Float, Some("0.1")),
    ("synth.seed", Kind::UInt, Some("0")),
];

fn kind_of(key: &str) -> Result<Kind> {
    KEYS.iter()
        .find(|(k, _, _)| *k == key)
        .map(|(_, kind, _)| *kind)
        .ok_or_else(|| Error::UnknownKey(key.to_string()))
}

fn parse_value(key: &str, kind: Kind, raw: &str) -> Result<Value> {
    let bad = || Error::Config(format!("key `{key}`: cannot parse `{raw}`"));
    Ok(match kind {
        Kind::UInt => Value::from(raw.parse::<u64>().map_err(|_| bad())?),
        Kind::Float => Value::from(raw.parse::<f64>().map_err(|_| bad())?),
        Kind::Str => Value::from(raw.to_string()),
        Kind::UIntList => Value::from(
            raw.split(',')
                .filter(|p| !p.trim().is_empty())
                .map(|p| p.trim().parse::<u64>().map_err(|_| bad()))
                .collect::<Result<Vec<u64>>>()?,
        ),
    })
}

fn check_value(key: &str, kind: Kind, value: &Value) -> Result<()> {
    let ok = match kind {
        Kind::UInt => value.as_u64().is_some(),
        Kind::Float => value.as_f64().is_some(),
        Kind::Str => value.is_string(),
        Kind::UIntList => value
            .as_array()
            .map(|a| a.iter().all(|v| v.as_u64().is_some()))
            .unwrap_or(false),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "key `{key}` has the wrong type: {value}"
        )))
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    values: BTreeMap<String, Value>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut values = BTreeMap::new();
        for (key, kind, default) in KEYS {
            if let Some(raw) = default {
                values.insert(
                    key.to_string(),
                    parse_value(key, *kind, raw).expect("builtin default parses"),
                );
            }
        }
        RunConfig { values }
    }
}

impl RunConfig {
    /// Defaults overlaid with a JSON config file of flat dotted keys.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            let parsed: serde_json::Map<String, Value> = serde_json::from_str(&text)?;
            for (key, value) in parsed {
                let kind = kind_of(&key)?;
                check_value(&key, kind, &value)?;
                cfg.values.insert(key, value);
            }
        }
        Ok(cfg)
    }

    /// Apply one `key=value` override (command-line flags win over the file).
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment.split_once('=').ok_or_else(|| {
            Error::Config(format!("override `{assignment}` is not key=value"))
        })?;
        let kind = kind_of(key)?;
        let value = parse_value(key, kind, raw)?;
        self.values.insert(key.to_string(), value);
        Ok(())
    }

    pub fn uint(&self, key: &str) -> Result<usize> {
        self.value(key)?
            .as_u64()
            .map(|v| v as usize)
            .ok_or_else(|| Error::Config(format!("key `{key}` is not an unsigned integer")))
    }

    pub fn float(&self, key: &str) -> Result<f64> {
        self.value(key)?
            .as_f64()
            .ok_or_else(|| Error::Config(format!("key `{key}` is not a number")))
    }

    pub fn str(&self, key: &str) -> Result<&str> {
        self.value(key)?
            .as_str()
            .ok_or_else(|| Error::Config(format!("key `{key}` is not a string")))
    }

    pub fn uint_list(&self, key: &str) -> Result<Vec<usize>> {
        let arr = self
            .value(key)?
            .as_array()
            .ok_or_else(|| Error::Config(format!("key `{key}` is not a list")))?;
        Ok(arr.iter().filter_map(|v| v.as_u64()).map(|v| v as usize).collect())
    }

    /// Optional string key (None when never set).
    pub fn opt_str(&self, key: &str) -> Result<Option<&str>> {
        kind_of(key)?;
        Ok(self.values.get(key).and_then(|v| v.as_str()))
    }

    fn value(&self, key: &str) -> Result<&Value> {
        kind_of(key)?;
        self.values
            .get(key)
            .ok_or_else(|| Error::Config(format!("missing required config key `{key}`")))
    }

    fn encoder(&self, input_key: &str, max_len_key: &str) -> Result<EncoderConfig> {
        let d = self.uint("model.d")?;
        let u = match self.values.get("model.u") {
            Some(v) => v
                .as_u64()
                .map(|v| v as usize)
                .ok_or_else(|| Error::Config("key `model.u` is not an unsigned integer".into()))?,
            None => d,
        };
        Ok(EncoderConfig {
            input_dim: self.uint(input_key)?,
            d,
            u,
            k: self.uint("model.k")?,
            dropout_rate: self.float("model.dropout")?,
            max_len: self.uint(max_len_key)?,
        })
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let loss = LossConfig {
            rho: self.float("loss.rho")?,
            delta: self.float("loss.delta")?,
            alpha: self.float("loss.alpha")?,
            beta: self.float("loss.beta")?,
            loss_kind: match self.str("loss.kind")? {
                "hinge" => LossKind::Hinge,
                "pseudo_huber" => LossKind::PseudoHuber,
                other => {
                    return Err(Error::Config(format!(
                        "key `loss.kind`: unknown loss `{other}`"
                    )))
                }
            },
            similarity_kind: match self.str("loss.similarity")? {
                "concat" => SimilarityKind::Concat,
                "mil_max" => SimilarityKind::MilMax,
                other => {
                    return Err(Error::Config(format!(
                        "key `loss.similarity`: unknown similarity `{other}`"
                    )))
                }
            },
        };
        let cfg = TrainConfig {
            video: self.encoder("video.input_dim", "video.max_len")?,
            sentence: self.encoder("sentence.input_dim", "sentence.max_len")?,
            loss,
            learning_rate: self.float("train.learning_rate")?,
            epochs: self.uint("train.epochs")?,
            batch_size: self.uint("train.batch_size")?,
            seed: self.uint("train.seed")? as u64,
            pooling: match self.str("train.pooling")? {
                "attention" => PoolingKind::Attention,
                "last_states" => PoolingKind::LastStates,
                other => {
                    return Err(Error::Config(format!(
                        "key `train.pooling`: unknown pooling `{other}`"
                    )))
                }
            },
            val_interval: self.uint("train.val_interval")?,
            grid: Some(GridSpec {
                d: self.uint_list("grid.d")?,
                k: self.uint_list("grid.k")?,
                alpha_exponents: self.uint_list("grid.p")?.iter().map(|&v| v as u32).collect(),
            }),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn synthetic_spec(&self) -> Result<SyntheticSpec> {
        let spec = SyntheticSpec {
            pairs: self.uint("synth.pairs")?,
            concepts: self.uint("synth.concepts")?,
            per_modality: self.uint("synth.m")?,
            shared: self.uint("synth.s")?,
            video_width: self.uint("synth.video_width")?,
            sentence_width: self.uint("synth.sentence_width")?,
            len_min: self.uint("synth.len_min")?,
            len_max: self.uint("synth.len_max")?,
            sigma: self.float("synth.sigma")?,
            seed: self.uint("synth.seed")? as u64,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Serialize the resolved key set into `dir/config.resolved.json`.
    pub fn write_resolved(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let path = dir.join("config.resolved.json");
        let json = serde_json::to_string_pretty(&self.values)?;
        std::fs::write(&path, json).map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(path)
    }
}
