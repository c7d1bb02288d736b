//! Synthetic planted-concept corpus.
//!
//! Each modality gets C random unit concept vectors in its own feature
//! width; a fixed random permutation pairs video concepts with sentence
//! concepts. Every pair expresses m concepts per side as contiguous noisy
//! segments, of which s are cross-modal mates. With s < m most
//! visual-textual segment combinations are unrelated (implicit
//! association); with s = m all of them are (explicit association).
//!
//! Ground truth (slots per segment, the pairing) goes into a JSON sidecar
//! so tests can score retrieval against the planted structure.

use super::features::FeatureItem;
use super::{ManifestRecord, Split};
use crate::error::{Error, Result};
use crate::numerics::{mix_seed, Tensor};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SyntheticSpec {
    /// Number of video-sentence pairs N.
    pub pairs: usize,
    /// Concept count C per modality.
    pub concepts: usize,
    /// Concepts expressed per modality per pair (m).
    pub per_modality: usize,
    /// Shared (cross-modally mated) concepts per pair (s); implicit when
    /// s < m, explicit when s = m.
    pub shared: usize,
    pub video_width: usize,
    pub sentence_width: usize,
    /// Sequence lengths are drawn uniformly from [len_min, len_max].
    pub len_min: usize,
    pub len_max: usize,
    /// Per-coordinate Gaussian noise on every step.
    pub sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.pairs == 0 {
            return bad("pairs must be positive".into());
        }
        if !(1 <= self.shared && self.shared <= self.per_modality && self.per_modality <= self.concepts)
        {
            return bad(format!(
                "need 1 <= s={} <= m={} <= C={}",
                self.shared, self.per_modality, self.concepts
            ));
        }
        // sentence-private concepts must be able to avoid the video's slots
        if self.concepts + self.shared < 2 * self.per_modality {
            return bad(format!(
                "C={} too small for disjoint private concepts (need C >= 2m - s = {})",
                self.concepts,
                2 * self.per_modality - self.shared
            ));
        }
        if self.sigma < 0.0 {
            return bad(format!("sigma {} must be non-negative", self.sigma));
        }
        if self.video_width == 0 || self.sentence_width == 0 {
            return bad("feature widths must be positive".into());
        }
        if self.len_min == 0 || self.len_min > self.len_max {
            return bad(format!(
                "invalid length range [{}, {}]",
                self.len_min, self.len_max
            ));
        }
        if self.len_min < self.per_modality {
            return bad(format!(
                "len_min {} cannot hold {} segments",
                self.len_min, self.per_modality
            ));
        }
        Ok(())
    }
}

/// One contiguous run of steps expressing a single concept slot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub len: usize,
    /// Abstract concept id in 0..C (video-slot space for both modalities).
    pub slot: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairTruth {
    pub pair_id: String,
    pub shared_slots: Vec<usize>,
    pub video_segments: Vec<Segment>,
    pub sentence_segments: Vec<Segment>,
}

/// Planted structure: concept vectors, pairing, and per-pair assignments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticTruth {
    /// video concept i is mated with sentence concept pairing[i].
    pub pairing: Vec<usize>,
    pub video_concepts: Vec<Vec<f32>>,
    pub sentence_concepts: Vec<Vec<f32>>,
    pub pairs: Vec<PairTruth>,
}

pub struct SyntheticData {
    pub manifest: Vec<ManifestRecord>,
    pub video_items: Vec<FeatureItem>,
    pub sentence_items: Vec<FeatureItem>,
    pub truth: SyntheticTruth,
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[spec.seed, 0x53594e54]));

    let video_concepts = unit_vectors(spec.concepts, spec.video_width, &mut rng);
    let sentence_concepts = unit_vectors(spec.concepts, spec.sentence_width, &mut rng);
    let mut pairing: Vec<usize> = (0..spec.concepts).collect();
    pairing.shuffle(&mut rng);

    let mut manifest = Vec::with_capacity(spec.pairs);
    let mut video_items = Vec::with_capacity(spec.pairs);
    let mut sentence_items = Vec::with_capacity(spec.pairs);
    let mut pair_truths = Vec::with_capacity(spec.pairs);

    for n in 0..spec.pairs {
        let pair_id = format!("pair{n:05}");
        let video_id = format!("v{n:05}");
        let sentence_id = format!("s{n:05}");

        // s shared slots, then per-side private slots; sentence privates
        // avoid every video slot so no accidental mates occur.
        let mut all: Vec<usize> = (0..spec.concepts).collect();
        all.shuffle(&mut rng);
        let shared_slots: Vec<usize> = all[..spec.shared].to_vec();
        let private = spec.per_modality - spec.shared;
        let video_private: Vec<usize> = all[spec.shared..spec.shared + private].to_vec();
        let sentence_private: Vec<usize> =
            all[spec.shared + private..spec.shared + 2 * private].to_vec();

        let mut video_slots = [shared_slots.clone(), video_private].concat();
        video_slots.shuffle(&mut rng);
        let mut sentence_slots = [shared_slots.clone(), sentence_private].concat();
        sentence_slots.shuffle(&mut rng);

        let (video_feat, video_segments) = sequence_for(
            &video_slots,
            |slot| &video_concepts[slot],
            spec,
            &mut rng,
        );
        let (sentence_feat, sentence_segments) = sequence_for(
            &sentence_slots,
            |slot| &sentence_concepts[pairing[slot]],
            spec,
            &mut rng,
        );

        video_items.push(FeatureItem {
            id: video_id.clone(),
            features: video_feat,
        });
        sentence_items.push(FeatureItem {
            id: sentence_id.clone(),
            features: sentence_feat,
        });
        manifest.push(ManifestRecord {
            pair_id: pair_id.clone(),
            video_ref: video_id,
            sentence_ref: sentence_id,
            split: Split::Train,
        });
        pair_truths.push(PairTruth {
            pair_id,
            shared_slots,
            video_segments,
            sentence_segments,
        });
    }

    let manifest = super::split_dataset(manifest, spec.seed)?;
    Ok(SyntheticData {
        manifest,
        video_items,
        sentence_items,
        truth: SyntheticTruth {
            pairing,
            video_concepts: video_concepts
                .iter()
                .map(|t| t.data().to_vec())
                .collect(),
            sentence_concepts: sentence_concepts
                .iter()
                .map(|t| t.data().to_vec())
                .collect(),
            pairs: pair_truths,
        },
    })
}

impl SyntheticData {
    /// Write manifest.tsv, video.mvft, sentence.mvft, and truth.json.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        super::features::write_features(&dir.join("video.mvft"), &self.video_items)?;
        super::features::write_features(&dir.join("sentence.mvft"), &self.sentence_items)?;
        super::write_manifest(&dir.join("manifest.tsv"), &self.manifest)?;
        let truth_path = dir.join("truth.json");
        let json = serde_json::to_string_pretty(&self.truth)?;
        std::fs::write(&truth_path, json)
            .map_err(|e| Error::io(truth_path.display().to_string(), e))
    }
}

fn unit_vectors(count: usize, width: usize, rng: &mut ChaCha8Rng) -> Vec<Tensor<f32>> {
    (0..count)
        .map(|_| {
            let mut v: Vec<f64> = (0..width).map(|_| gaussian(rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            for x in v.iter_mut() {
                *x /= norm;
            }
            Tensor::new(vec![1, width], v.iter().map(|&x| x as f32).collect()).expect("unit vector")
        })
        .collect()
}

fn sequence_for<'a>(
    slots: &[usize],
    concept: impl Fn(usize) -> &'a Tensor<f32>,
    spec: &SyntheticSpec,
    rng: &mut ChaCha8Rng,
) -> (Tensor<f32>, Vec<Segment>) {
    let total = rng.gen_range(spec.len_min..=spec.len_max);
    let lens = composition(total, slots.len(), rng);
    let width = concept(slots[0]).cols();
    let mut data = Vec::with_capacity(total * width);
    let mut segments = Vec::with_capacity(slots.len());
    let mut start = 0;
    for (&slot, &len) in slots.iter().zip(&lens) {
        let base = concept(slot);
        for _ in 0..len {
            for &b in base.data() {
                data.push(b + (spec.sigma * gaussian(rng)) as f32);
            }
        }
        segments.push(Segment { start, len, slot });
        start += len;
    }
    (
        Tensor::new(vec![total, width], data).expect("sequence shape"),
        segments,
    )
}

/// Split `total` steps into `parts` contiguous runs, each at least 1.
fn composition(total: usize, parts: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    debug_assert!(total >= parts && parts >= 1);
    let mut cuts: Vec<usize> = (1..total).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<usize> = cuts[..parts - 1].to_vec();
    cuts.sort_unstable();
    cuts.push(total);
    let mut lens = Vec::with_capacity(parts);
    let mut prev = 0;
    for c in cuts {
        lens.push(c - prev);
        prev = c;
    }
    lens
}


fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
