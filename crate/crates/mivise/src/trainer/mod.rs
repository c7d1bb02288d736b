//! Training orchestration: triplet construction, sequence preprocessing,
//! epochs, checkpointing, and the ablation/sweep harnesses.
//!
//! Determinism contract: (seed, config, dataset) fully determine parameter
//! initialization, negative sampling, shuffling, subsampling, dropout, and
//! therefore the loss log and checkpoint bytes. Every random choice draws
//! from its own stream derived via [`mix_seed`], and all sums run in fixed
//! index order.

pub mod ablation;
pub mod checkpoint;

pub use ablation::{run_ablation, sweep_k, AblationRow, AblationSpec};
pub use checkpoint::{load_checkpoint, save_checkpoint};

use crate::data::{Dataset, ManifestRecord, Split};
use crate::encoder::{
    self, EmbeddingSet, EncodeMode, EncoderConfig, EncoderVars, init_encoder_params,
};
use crate::error::{Error, Result};
use crate::numerics::{adam_step, mix_seed, Gradients, ParamStore, Scalar, Tape, Tensor, Var};
use crate::objective::{total_objective, LossConfig, LossKind, TripletTerm};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const ADAM_BETAS: (f64, f64) = (0.9, 0.999);
pub const ADAM_EPS: f64 = 1e-8;

const VIDEO_PREFIX: &str = "video";
const SENTENCE_PREFIX: &str = "sent";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolingKind {
    /// Concatenate the last hidden state of each direction (K = 1).
    LastStates,
    /// Self-attentive pooling into K embeddings.
    Attention,
}

/// Hyperparameter grid axes.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct GridSpec {
    #[serde(default)]
    pub d: Vec<usize>,
    #[serde(default)]
    pub k: Vec<usize>,
    /// Regularizer weight exponents p, meaning alpha = 10^-p.
    #[serde(default)]
    pub alpha_exponents: Vec<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainConfig {
    pub video: EncoderConfig,
    pub sentence: EncoderConfig,
    pub loss: LossConfig,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub pooling: PoolingKind,
    /// Validation nMR is computed every this many epochs (and at the end).
    pub val_interval: usize,
    #[serde(default)]
    pub grid: Option<GridSpec>,
}

impl TrainConfig {
    pub fn new(video_width: usize, sentence_width: usize) -> Self {
        TrainConfig {
            video: EncoderConfig::new(video_width),
            sentence: EncoderConfig::new(sentence_width),
            loss: LossConfig::default(),
            learning_rate: 2e-4,
            epochs: 500,
            batch_size: 100,
            seed: 0,
            pooling: PoolingKind::Attention,
            val_interval: 10,
            grid: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.video.validate()?;
        self.sentence.validate()?;
        self.loss.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.val_interval == 0 {
            return Err(Error::Config("val_interval must be at least 1".into()));
        }
        if self.learning_rate <= 0.0 && self.learning_rate != 0.0 {
            return Err(Error::Config("learning_rate must be non-negative".into()));
        }
        if self.video.d != self.sentence.d || self.video.k != self.sentence.k {
            return Err(Error::Config(format!(
                "both encoders must share d and k (video {}x{}, sentence {}x{})",
                self.video.d, self.video.k, self.sentence.d, self.sentence.k
            )));
        }
        if self.pooling == PoolingKind::LastStates && self.video.k != 1 {
            return Err(Error::Config(
                "last_states pooling forces k = 1".into(),
            ));
        }
        if let Some(grid) = &self.grid {
            for &p in &grid.alpha_exponents {
                if !(1..=4).contains(&p) {
                    return Err(Error::Config(format!(
                        "grid alpha exponent {p} outside {{1,2,3,4}}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One preprocessed sequence: zero-padded features plus its valid length.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceItem<S> {
    pub features: Tensor<S>,
    pub length: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsampleMode {
    Train,
    Eval,
}

/// Bring a raw sequence under `max_len` steps.
///
/// Short sequences are zero-padded (length records the valid prefix). Long
/// sequences are subsampled: training picks a random stride and start so
/// coverage accumulates over epochs; evaluation picks the deterministic
/// uniform subsequence round(i·(len−1)/(max_len−1)).
pub fn subsample_sequence<S: Scalar>(
    seq: &Tensor<S>,
    max_len: usize,
    mode: SubsampleMode,
    rng: &mut ChaCha8Rng,
) -> Result<SequenceItem<S>> {
    let len = seq.rows();
    let width = seq.cols();
    if len == 0 {
        return Err(Error::Contract("subsample of an empty sequence".into()));
    }
    if len <= max_len {
        let mut features = Tensor::zeros(vec![max_len, width]);
        features.data_mut()[..len * width].copy_from_slice(seq.data());
        return Ok(SequenceItem {
            features,
            length: len,
        });
    }
    let indices: Vec<usize> = match mode {
        SubsampleMode::Train => {
            let max_stride = len / max_len;
            let stride = rng.gen_range(1..=max_stride);
            let start = rng.gen_range(0..=len - stride * max_len);
            (0..max_len).map(|i| start + i * stride).collect()
        }
        SubsampleMode::Eval => {
            if max_len == 1 {
                vec![0]
            } else {
                (0..max_len)
                    .map(|i| {
                        ((i * (len - 1)) as f64 / (max_len - 1) as f64).round() as usize
                    })
                    .collect()
            }
        }
    };
    let mut data = Vec::with_capacity(max_len * width);
    for &i in &indices {
        data.extend_from_slice(seq.row(i));
    }
    Ok(SequenceItem {
        features: Tensor::new(vec![max_len, width], data)?,
        length: max_len,
    })
}

/// Concatenate the forward half of the last valid column with the backward
/// half of the first column: the "last states" of both directions.
///
/// Returns the 1×d embedding plus a synthetic one-hot attention record
/// (diagnostic only; it is not how the embedding was pooled).
pub fn pool_last_states<S: Scalar>(tape: &mut Tape<S>, h: Var) -> Result<(Var, Var)> {
    let (d, t) = (tape.value(h).rows(), tape.value(h).cols());
    let half = d / 2;
    let last_col = tape.slice_cols(h, t - 1, t)?;
    let fwd_half = tape.slice_rows(last_col, 0, half)?;
    let first_col = tape.slice_cols(h, 0, 1)?;
    let bwd_half = tape.slice_rows(first_col, half, d)?;
    let stacked = tape.concat_rows(&[fwd_half, bwd_half])?;
    let phi = tape.transpose(stacked);
    let mut attn = Tensor::zeros(vec![1, t]);
    attn.data_mut()[t - 1] = S::one();
    let attn = tape.constant(attn);
    Ok((phi, attn))
}

/// One training unit: a video, its paired sentence, and a sampled negative.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletRecord {
    pub video_ref: String,
    pub positive_ref: String,
    pub negative_ref: String,
    /// Manifest index of the pair that contributed the negative sentence.
    pub negative_pair: usize,
}

/// Draw one negative sentence per training pair, uniformly over the other
/// training sentences. Deterministic in (seed, epoch); resampled per epoch.
pub fn resample_negatives(
    train_pairs: &[&ManifestRecord],
    epoch: usize,
    seed: u64,
) -> Result<Vec<TripletRecord>> {
    let n = train_pairs.len();
    if n < 2 {
        return Err(Error::Config(format!(
            "need at least 2 training pairs to sample negatives, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 0x4e4547, epoch as u64]));
    Ok(train_pairs
        .iter()
        .enumerate()
        .map(|(i, pair)| {
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            TripletRecord {
                video_ref: pair.video_ref.clone(),
                positive_ref: pair.sentence_ref.clone(),
                negative_ref: train_pairs[j].sentence_ref.clone(),
                negative_pair: j,
            }
        })
        .collect())
}

/// Both encoders plus the configuration that shaped them.
pub struct Model<S> {
    pub store: ParamStore<S>,
    pub cfg: TrainConfig,
}

/// Encode an already-subsampled sequence on a tape under either pooling.
pub fn embed_pooled<S: Scalar>(
    tape: &mut Tape<S>,
    vars: &EncoderVars,
    enc_cfg: &EncoderConfig,
    pooling: PoolingKind,
    item: &SequenceItem<S>,
    mode: &mut EncodeMode,
) -> Result<(Var, Var)> {
    match pooling {
        PoolingKind::Attention => {
            encoder::encode(tape, vars, enc_cfg, &item.features, item.length, mode)
        }
        PoolingKind::LastStates => {
            let h = encoder::encode_states(tape, vars, enc_cfg, &item.features, item.length, mode)?;
            pool_last_states(tape, h)
        }
    }
}

impl<S: Scalar> Model<S> {
    /// Fresh model with seeded initialization.
    pub fn init(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[cfg.seed, 0x494e4954]));
        init_encoder_params(&mut store, VIDEO_PREFIX, &cfg.video, &mut rng)?;
        init_encoder_params(&mut store, SENTENCE_PREFIX, &cfg.sentence, &mut rng)?;
        Ok(Model { store, cfg })
    }

    pub fn cast<T: Scalar>(&self) -> Model<T> {
        Model {
            store: self.store.cast(),
            cfg: self.cfg.clone(),
        }
    }

    fn embed_raw_eval(
        &self,
        enc_cfg: &EncoderConfig,
        prefix: &str,
        features: &Tensor<S>,
    ) -> Result<EmbeddingSet<S>> {
        if features.cols() != enc_cfg.input_dim {
            return Err(Error::ShapeMismatch {
                op: "embed feature width",
                left: vec![features.rows(), features.cols()],
                right: vec![features.rows(), enc_cfg.input_dim],
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let item = subsample_sequence(features, enc_cfg.max_len, SubsampleMode::Eval, &mut rng)?;
        let mut tape = Tape::new();
        let bound = self.store.bind(&mut tape);
        let vars = EncoderVars::resolve(&bound, prefix)?;
        let (phi, attn) = embed_pooled(
            &mut tape,
            &vars,
            enc_cfg,
            self.cfg.pooling,
            &item,
            &mut EncodeMode::Eval,
        )?;
        Ok(EmbeddingSet {
            phi: tape.value(phi).clone(),
            attention: tape.value(attn).clone(),
        })
    }

    /// Eval-mode embedding of a raw video feature sequence.
    pub fn embed_video(&self, features: &Tensor<S>) -> Result<EmbeddingSet<S>> {
        let enc_cfg = self.cfg.video.clone();
        self.embed_raw_eval(&enc_cfg, VIDEO_PREFIX, features)
    }

    /// Eval-mode embedding of a raw sentence feature sequence.
    pub fn embed_sentence(&self, features: &Tensor<S>) -> Result<EmbeddingSet<S>> {
        let enc_cfg = self.cfg.sentence.clone();
        self.embed_raw_eval(&enc_cfg, SENTENCE_PREFIX, features)
    }

    /// The loss configuration actually applied during training: last-states
    /// pooling has no attention maps, so the diversity penalty is dropped.
    pub fn effective_loss(&self) -> LossConfig {
        let mut loss = self.cfg.loss.clone();
        if self.cfg.pooling == PoolingKind::LastStates {
            loss.alpha = 0.0;
        }
        loss
    }
}

/// One epoch's summary.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean of the per-triplet objective over the epoch.
    pub mean_objective: f64,
    pub val_nmr: Option<f64>,
}

pub struct TrainOutcome {
    /// Model at the best validation nMR (final parameters when the dataset
    /// has no validation split).
    pub model: Model<f32>,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_nmr: Option<f64>,
}

struct EpochItems {
    videos: Vec<SequenceItem<f32>>,
    sentences: Vec<SequenceItem<f32>>,
}

/// Fresh random subsequences for every train sequence, one per epoch.
fn subsample_epoch(
    dataset: &Dataset,
    pairs: &[&ManifestRecord],
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<EpochItems> {
    let mut videos = Vec::with_capacity(pairs.len());
    let mut sentences = Vec::with_capacity(pairs.len());
    for (i, pair) in pairs.iter().enumerate() {
        let mut vrng = ChaCha8Rng::seed_from_u64(mix_seed(&[
            cfg.seed, 0x535542, epoch as u64, i as u64, 0,
        ]));
        videos.push(subsample_sequence(
            dataset.video_features(pair)?,
            cfg.video.max_len,
            SubsampleMode::Train,
            &mut vrng,
        )?);
        let mut srng = ChaCha8Rng::seed_from_u64(mix_seed(&[
            cfg.seed, 0x535542, epoch as u64, i as u64, 1,
        ]));
        sentences.push(subsample_sequence(
            dataset.sentence_features(pair)?,
            cfg.sentence.max_len,
            SubsampleMode::Train,
            &mut srng,
        )?);
    }
    Ok(EpochItems { videos, sentences })
}

/// Minimize the triplet objective over the train split.
pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let pairs = dataset.of_split(Split::Train);
    if pairs.is_empty() {
        return Err(Error::Config("train split is empty".into()));
    }
    let mut model: Model<f32> = Model::init(cfg.clone())?;
    let loss_cfg = model.effective_loss();
    let val_pairs = dataset.of_split(Split::Val);

    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, ParamStore<f32>)> = None;

    for epoch in 0..cfg.epochs {
        let triplets = resample_negatives(&pairs, epoch, cfg.seed)?;
        let items = subsample_epoch(dataset, &pairs, cfg, epoch)?;

        let mut order: Vec<usize> = (0..triplets.len()).collect();
        let mut shuffle_rng =
            ChaCha8Rng::seed_from_u64(mix_seed(&[cfg.seed, 0x534846, epoch as u64]));
        order.shuffle(&mut shuffle_rng);

        let mut epoch_sum = 0.0f64;
        for batch in order.chunks(cfg.batch_size) {
            let value = train_step(&mut model, &loss_cfg, &triplets, &items, batch, epoch)?;
            if !value.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    value: value as f64,
                });
            }
            epoch_sum += value as f64;
        }
        let mean_objective = epoch_sum / triplets.len() as f64;
        if !mean_objective.is_finite() {
            return Err(Error::Diverged {
                epoch,
                value: mean_objective,
            });
        }

        let mut val_nmr = None;
        let last_epoch = epoch + 1 == cfg.epochs;
        if !val_pairs.is_empty() && (epoch % cfg.val_interval == 0 || last_epoch) {
            let report = crate::retrieval::evaluate(dataset, Split::Val, &model)?;
            val_nmr = Some(report.nmr);
            let better = match &best {
                None => true,
                Some((_, best_nmr, _)) => report.nmr < *best_nmr,
            };
            if better {
                best = Some((epoch, report.nmr, model.store.clone()));
            }
        }
        log.push(EpochLog {
            epoch,
            mean_objective,
            val_nmr,
        });
    }

    let (best_epoch, best_val_nmr) = match &best {
        Some((e, nmr, params)) => {
            model.store = params.clone();
            (*e, Some(*nmr))
        }
        None => (cfg.epochs - 1, None),
    };
    Ok(TrainOutcome {
        model,
        log,
        best_epoch,
        best_val_nmr,
    })
}

/// One optimizer step over a batch of triplet indices. Returns the summed
/// batch objective.
fn train_step(
    model: &mut Model<f32>,
    loss_cfg: &LossConfig,
    triplets: &[TripletRecord],
    items: &EpochItems,
    batch: &[usize],
    epoch: usize,
) -> Result<f32> {
    let cfg = model.cfg.clone();
    let mut tape: Tape<f32> = Tape::new();
    let bound = model.store.bind(&mut tape);
    let video_vars = EncoderVars::resolve(&bound, VIDEO_PREFIX)?;
    let sent_vars = EncoderVars::resolve(&bound, SENTENCE_PREFIX)?;

    let mut terms = Vec::with_capacity(batch.len());
    for &ti in batch {
        let embed = |vars: &EncoderVars,
                     enc_cfg: &EncoderConfig,
                     item: &SequenceItem<f32>,
                     role: u64,
                     tape: &mut Tape<f32>|
         -> Result<(Var, Var)> {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[
                cfg.seed, 0x44524f50, epoch as u64, ti as u64, role,
            ]));
            let mut mode = EncodeMode::Train {
                dropout_rng: &mut rng,
            };
            embed_pooled(tape, vars, enc_cfg, cfg.pooling, item, &mut mode)
        };
        let (phi_v, attn_v) = embed(&video_vars, &cfg.video, &items.videos[ti], 0, &mut tape)?;
        let (psi_p, attn_p) = embed(&sent_vars, &cfg.sentence, &items.sentences[ti], 1, &mut tape)?;
        let (psi_n, attn_n) = embed(
            &sent_vars,
            &cfg.sentence,
            &items.sentences[triplets[ti].negative_pair],
            2,
            &mut tape,
        )?;
        terms.push(TripletTerm {
            phi_v,
            attn_v,
            psi_pos: psi_p,
            attn_pos: attn_p,
            psi_neg: psi_n,
            attn_neg: attn_n,
        });
    }
    let loss = total_objective(&mut tape, &terms, loss_cfg)?;
    let value = tape.value(loss).item();
    let grads = tape.backward(loss)?;
    let grads: Gradients<f32> = bound.collect(&tape, &grads);
    adam_step(
        &mut model.store,
        &grads,
        cfg.learning_rate as f32,
        (ADAM_BETAS.0 as f32, ADAM_BETAS.1 as f32),
        ADAM_EPS as f32,
    )?;
    Ok(value)
}

/// Repeatedly fit the given fixed triplets (already subsampled, no dropout
/// randomness beyond the configured rate). Returns the objective after each
/// step; used by the overfit oracles.
pub fn fit_triplets(
    model: &mut Model<f32>,
    triplets: &[(SequenceItem<f32>, SequenceItem<f32>, SequenceItem<f32>)],
    steps: usize,
) -> Result<Vec<f32>> {
    let cfg = model.cfg.clone();
    let loss_cfg = model.effective_loss();
    let mut losses = Vec::with_capacity(steps);
    for step in 0..steps {
        let mut tape: Tape<f32> = Tape::new();
        let bound = model.store.bind(&mut tape);
        let video_vars = EncoderVars::resolve(&bound, VIDEO_PREFIX)?;
        let sent_vars = EncoderVars::resolve(&bound, SENTENCE_PREFIX)?;
        let mut terms = Vec::with_capacity(triplets.len());
        for (i, (v, p, n)) in triplets.iter().enumerate() {
            let embed = |vars: &EncoderVars,
                         enc_cfg: &EncoderConfig,
                         item: &SequenceItem<f32>,
                         role: u64,
                         tape: &mut Tape<f32>|
             -> Result<(Var, Var)> {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[
                    cfg.seed, 0x46495420, step as u64, i as u64, role,
                ]));
                let mut mode = EncodeMode::Train {
                    dropout_rng: &mut rng,
                };
                embed_pooled(tape, vars, enc_cfg, cfg.pooling, item, &mut mode)
            };
            let (phi_v, attn_v) = embed(&video_vars, &cfg.video, v, 0, &mut tape)?;
            let (psi_p, attn_p) = embed(&sent_vars, &cfg.sentence, p, 1, &mut tape)?;
            let (psi_n, attn_n) = embed(&sent_vars, &cfg.sentence, n, 2, &mut tape)?;
            terms.push(TripletTerm {
                phi_v,
                attn_v,
                psi_pos: psi_p,
                attn_pos: attn_p,
                psi_neg: psi_n,
                attn_neg: attn_n,
            });
        }
        let loss = total_objective(&mut tape, &terms, &loss_cfg)?;
        losses.push(tape.value(loss).item());
        let grads = tape.backward(loss)?;
        let grads = bound.collect(&tape, &grads);
        adam_step(
            &mut model.store,
            &grads,
            cfg.learning_rate as f32,
            (ADAM_BETAS.0 as f32, ADAM_BETAS.1 as f32),
            ADAM_EPS as f32,
        )?;
    }
    Ok(losses)
}

/// Build the full differentiable objective for a batch of raw triplets in
/// f64, for gradient checking. Returns (loss value, gradients) for `store`.
pub fn objective_for_gradcheck(
    store: &ParamStore<f64>,
    cfg: &TrainConfig,
    triplets: &[(Tensor<f64>, Tensor<f64>, Tensor<f64>)],
    loss_kind: LossKind,
    similarity: crate::objective::SimilarityKind,
) -> Result<(f64, Gradients<f64>)> {
    let mut loss_cfg = cfg.loss.clone();
    loss_cfg.loss_kind = loss_kind;
    loss_cfg.similarity_kind = similarity;
    let mut tape: Tape<f64> = Tape::new();
    let bound = store.bind(&mut tape);
    let video_vars = EncoderVars::resolve(&bound, VIDEO_PREFIX)?;
    let sent_vars = EncoderVars::resolve(&bound, SENTENCE_PREFIX)?;
    let mut terms = Vec::with_capacity(triplets.len());
    for (v, p, n) in triplets {
        let (phi_v, attn_v) = encoder::encode(
            &mut tape,
            &video_vars,
            &cfg.video,
            v,
            v.rows(),
            &mut EncodeMode::Eval,
        )?;
        let (psi_p, attn_p) = encoder::encode(
            &mut tape,
            &sent_vars,
            &cfg.sentence,
            p,
            p.rows(),
            &mut EncodeMode::Eval,
        )?;
        let (psi_n, attn_n) = encoder::encode(
            &mut tape,
            &sent_vars,
            &cfg.sentence,
            n,
            n.rows(),
            &mut EncodeMode::Eval,
        )?;
        terms.push(TripletTerm {
            phi_v,
            attn_v,
            psi_pos: psi_p,
            attn_pos: attn_p,
            psi_neg: psi_n,
            attn_neg: attn_n,
        });
    }
    let loss = total_objective(&mut tape, &terms, &loss_cfg)?;
    let value = tape.value(loss).item();
    let grads = tape.backward(loss)?;
    Ok((value, bound.collect(&tape, &grads)))
}


/// Deterministic pseudo-random f64 feature matrix for the gradcheck toy.
fn toy_features(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::new(
        vec![rows, cols],
        (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .expect("toy shape")
}

/// Gradient-check the full training objective on a small fixed instance
/// (2 triplets, T=3, d=4, K=2) for every loss and similarity combination.
///
/// Runs in 64-bit; returns one report per combination, labeled.
pub fn toy_objective_gradcheck() -> Result<Vec<(String, crate::numerics::GradReport)>> {
    use crate::numerics::check_gradients;
    use crate::objective::SimilarityKind;

    let mut cfg = TrainConfig::new(5, 4);
    for enc in [&mut cfg.video, &mut cfg.sentence] {
        enc.d = 4;
        enc.u = 4;
        enc.k = 2;
        enc.max_len = 3;
        enc.dropout_rate = 0.0;
    }
    cfg.seed = 2024;
    let model: Model<f64> = Model::init(cfg.clone())?;

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[cfg.seed, 0x544f59]));
    let triplets: Vec<(Tensor<f64>, Tensor<f64>, Tensor<f64>)> = (0..2)
        .map(|_| {
            (
                toy_features(3, 5, &mut rng),
                toy_features(3, 4, &mut rng),
                toy_features(3, 4, &mut rng),
            )
        })
        .collect();

    let mut reports = Vec::new();
    for loss_kind in [LossKind::PseudoHuber, LossKind::Hinge] {
        for similarity in [SimilarityKind::MilMax, SimilarityKind::Concat] {
            let build = |store: &ParamStore<f64>| {
                objective_for_gradcheck(store, &cfg, &triplets, loss_kind, similarity)
            };
            let report = check_gradients(build, &model.store, 1e-5, 71)?;
            reports.push((
                format!("{loss_kind:?}+{similarity:?}").to_lowercase(),
                report,
            ));
        }
    }
    Ok(reports)
}
