//! Feature ingestion, dataset manifests and splits, sentence featurization,
//! and the synthetic planted-concept generator.
//!
//! A dataset is a tab-separated manifest (pair_id, video_ref,
//! sentence_ref_or_text, split) plus binary feature files per modality.
//! Sentence entries may instead be raw text featurized through a word
//! embedding table.

pub mod features;
pub mod synthetic;

pub use features::{read_features, write_features, FeatureItem};
pub use synthetic::{generate_synthetic, SyntheticData, SyntheticSpec, SyntheticTruth};

use crate::error::{Error, Result};
use crate::numerics::{mix_seed, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn tag(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split tag `{other}`"))),
        }
    }
}

/// One dataset pair: a video feature ref and a sentence (feature ref or text).
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    pub pair_id: String,
    pub video_ref: String,
    /// Feature-file item id, or raw sentence text to be featurized.
    pub sentence_ref: String,
    pub split: Split,
}

/// Seeded shuffle followed by a contiguous 80/10/10 split assignment.
pub fn split_dataset(mut records: Vec<ManifestRecord>, seed: u64) -> Result<Vec<ManifestRecord>> {
    let n = records.len();
    if n < 10 {
        return Err(Error::Config(format!(
            "need at least 10 pairs to split, got {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 0x53504c54]));
    order.shuffle(&mut rng);

    let n_train = ((n as f64) * 0.8).round() as usize;
    let n_val = ((n as f64) * 0.1).round() as usize;
    for (rank, &idx) in order.iter().enumerate() {
        records[idx].split = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }
    Ok(records)
}

pub fn write_manifest(path: &Path, records: &[ManifestRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            r.pair_id,
            r.video_ref,
            r.sentence_ref,
            r.split.tag()
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::Config(format!(
                "{}:{}: expected 4 tab-separated fields, got {}",
                path.display(),
                lineno + 1,
                fields.len()
            )));
        }
        records.push(ManifestRecord {
            pair_id: fields[0].to_string(),
            video_ref: fields[1].to_string(),
            sentence_ref: fields[2].to_string(),
            split: Split::parse(fields[3])?,
        });
    }
    Ok(records)
}

/// Lowercase, split on whitespace, strip non-alphanumeric characters from
/// each token; empty tokens vanish ("can't" becomes "cant").
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(|tok| tok.chars().filter(|c| c.is_alphanumeric()).collect::<String>())
        .filter(|tok| !tok.is_empty())
        .collect()
}

/// Word → vector table with a uniform width.
pub struct EmbeddingTable {
    pub vectors: HashMap<String, Vec<f32>>,
    pub width: usize,
}

impl EmbeddingTable {
    /// Text format, one entry per line: `word v1 v2 … vD`.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut vectors = HashMap::new();
        let mut width = None;
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts.next().unwrap().to_string();
            let vec: Vec<f32> = parts
                .map(|p| {
                    p.parse::<f32>().map_err(|_| {
                        Error::Config(format!(
                            "{}:{}: bad float `{p}`",
                            path.display(),
                            lineno + 1
                        ))
                    })
                })
                .collect::<Result<_>>()?;
            match width {
                None => width = Some(vec.len()),
                Some(w) if w != vec.len() => {
                    return Err(Error::Config(format!(
                        "{}:{}: width {} differs from {}",
                        path.display(),
                        lineno + 1,
                        vec.len(),
                        w
                    )))
                }
                _ => {}
            }
            vectors.insert(word, vec);
        }
        let width = width.ok_or_else(|| {
            Error::Config(format!("{}: empty embedding table", path.display()))
        })?;
        Ok(EmbeddingTable { vectors, width })
    }
}

/// Tokenize and map each token to its embedding; out-of-vocabulary tokens
/// become zero vectors. A sentence with no token or no in-vocabulary token
/// is an error.
pub fn featurize_sentence(text: &str, table: &EmbeddingTable) -> Result<Tensor<f32>> {
    if table.vectors.is_empty() {
        return Err(Error::Config("empty embedding table".into()));
    }
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(Error::EmptySentence(text.to_string()));
    }
    let mut any_known = false;
    let mut data = Vec::with_capacity(tokens.len() * table.width);
    for tok in &tokens {
        match table.vectors.get(tok) {
            Some(v) => {
                any_known = true;
                data.extend_from_slice(v);
            }
            None => data.extend(std::iter::repeat(0.0).take(table.width)),
        }
    }
    if !any_known {
        return Err(Error::EmptySentence(text.to_string()));
    }
    Tensor::new(vec![tokens.len(), table.width], data)
}

/// A fully loaded dataset: manifest plus per-modality feature maps.
pub struct Dataset {
    pub records: Vec<ManifestRecord>,
    pub video: HashMap<String, Tensor<f32>>,
    pub sentence: HashMap<String, Tensor<f32>>,
}

impl Dataset {
    pub fn from_synthetic(data: &SyntheticData) -> Self {
        Dataset {
            records: data.manifest.clone(),
            video: data
                .video_items
                .iter()
                .map(|i| (i.id.clone(), i.features.clone()))
                .collect(),
            sentence: data
                .sentence_items
                .iter()
                .map(|i| (i.id.clone(), i.features.clone()))
                .collect(),
        }
    }

    /// Load from a manifest and feature files. Sentence entries that are not
    /// ids in the sentence feature file are treated as raw text and require
    /// an embedding table.
    pub fn load(
        manifest_path: &Path,
        video_path: &Path,
        sentence_path: Option<&Path>,
        table: Option<&EmbeddingTable>,
    ) -> Result<Self> {
        let records = read_manifest(manifest_path)?;
        let video: HashMap<String, Tensor<f32>> = read_features(video_path)?
            .into_iter()
            .map(|i| (i.id, i.features))
            .collect();
        let sentence_items: HashMap<String, Tensor<f32>> = match sentence_path {
            Some(p) => read_features(p)?
                .into_iter()
                .map(|i| (i.id, i.features))
                .collect(),
            None => HashMap::new(),
        };
        let mut sentence = HashMap::new();
        for r in &records {
            if !video.contains_key(&r.video_ref) {
                return Err(Error::UnknownId(format!(
                    "video ref {} of pair {}",
                    r.video_ref, r.pair_id
                )));
            }
            let feat = match sentence_items.get(&r.sentence_ref) {
                Some(f) => f.clone(),
                None => match table {
                    Some(t) => featurize_sentence(&r.sentence_ref, t)?,
                    None => {
                        return Err(Error::Config(format!(
                            "sentence `{}` of pair {} is not a feature id and no embedding table was given",
                            r.sentence_ref, r.pair_id
                        )))
                    }
                },
            };
            sentence.insert(r.sentence_ref.clone(), feat);
        }
        Ok(Dataset {
            records,
            video,
            sentence,
        })
    }

    pub fn of_split(&self, split: Split) -> Vec<&ManifestRecord> {
        self.records.iter().filter(|r| r.split == split).collect()
    }

    pub fn video_features(&self, r: &ManifestRecord) -> Result<&Tensor<f32>> {
        self.video
            .get(&r.video_ref)
            .ok_or_else(|| Error::UnknownId(r.video_ref.clone()))
    }

    pub fn sentence_features(&self, r: &ManifestRecord) -> Result<&Tensor<f32>> {
        self.sentence
            .get(&r.sentence_ref)
            .ok_or_else(|| Error::UnknownId(r.sentence_ref.clone()))
    }
}
