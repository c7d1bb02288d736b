//! Ablation matrix and the K sweep.
//!
//! Five named configurations, each adding one ingredient: a hinge
//! last-states baseline, the pseudo-Huber swap, single-map self-attention,
//! multiple embeddings under concat similarity, and the full max-of-bag
//! similarity. All rows share the base seed and data order so only the
//! named axes differ.

use super::{train, Model, PoolingKind, TrainConfig, TrainOutcome};
use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::objective::{LossKind, SimilarityKind};
use crate::retrieval::{evaluate, RetrievalReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationRow {
    /// Hinge + last-states + K=1 + concat.
    Deviseq,
    /// Pseudo-Huber + last-states + K=1 + concat.
    Base,
    /// Pseudo-Huber + attention + K=1 + concat.
    Sa,
    /// Pseudo-Huber + attention + K>1 + concat.
    SaMe,
    /// Pseudo-Huber + attention + K>1 + max-of-bag.
    Mivise,
}

pub const ALL_ROWS: [AblationRow; 5] = [
    AblationRow::Deviseq,
    AblationRow::Base,
    AblationRow::Sa,
    AblationRow::SaMe,
    AblationRow::Mivise,
];

impl AblationRow {
    pub fn name(self) -> &'static str {
        match self {
            AblationRow::Deviseq => "deviseq",
            AblationRow::Base => "base",
            AblationRow::Sa => "sa",
            AblationRow::SaMe => "sa_me",
            AblationRow::Mivise => "mivise",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        ALL_ROWS
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation row `{s}`")))
    }

    /// Derive this row's configuration from a shared base. The base supplies
    /// K for the multi-embedding rows, data dims, seed, and schedule.
    pub fn apply(self, base: &TrainConfig) -> Result<TrainConfig> {
        if base.video.k < 2 {
            return Err(Error::Config(
                "ablation base config needs k >= 2 for the multi-embedding rows".into(),
            ));
        }
        let mut cfg = base.clone();
        let (loss, pooling, k, similarity) = match self {
            AblationRow::Deviseq => (LossKind::Hinge, PoolingKind::LastStates, 1, SimilarityKind::Concat),
            AblationRow::Base => (
                LossKind::PseudoHuber,
                PoolingKind::LastStates,
                1,
                SimilarityKind::Concat,
            ),
            AblationRow::Sa => (
                LossKind::PseudoHuber,
                PoolingKind::Attention,
                1,
                SimilarityKind::Concat,
            ),
            AblationRow::SaMe => (
                LossKind::PseudoHuber,
                PoolingKind::Attention,
                base.video.k,
                SimilarityKind::Concat,
            ),
            AblationRow::Mivise => (
                LossKind::PseudoHuber,
                PoolingKind::Attention,
                base.video.k,
                SimilarityKind::MilMax,
            ),
        };
        cfg.loss.loss_kind = loss;
        cfg.loss.similarity_kind = similarity;
        cfg.pooling = pooling;
        cfg.video.k = k;
        cfg.sentence.k = k;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The rows to run (in table order) against a shared base configuration.
#[derive(Debug, Clone)]
pub struct AblationSpec {
    pub rows: Vec<AblationRow>,
    pub base: TrainConfig,
}

impl AblationSpec {
    pub fn full(base: TrainConfig) -> Self {
        AblationSpec {
            rows: ALL_ROWS.to_vec(),
            base,
        }
    }
}

pub struct AblationOutcome {
    pub row: AblationRow,
    pub config: TrainConfig,
    pub report: RetrievalReport,
}

/// Train and evaluate every named configuration on the test split.
pub fn run_ablation(dataset: &Dataset, spec: &AblationSpec) -> Result<Vec<AblationOutcome>> {
    let mut out = Vec::with_capacity(spec.rows.len());
    for &row in &spec.rows {
        let config = row.apply(&spec.base)?;
        let outcome: TrainOutcome = train(dataset, &config)?;
        let report = evaluate(dataset, Split::Test, &outcome.model)?;
        out.push(AblationOutcome {
            row,
            config,
            report,
        });
    }
    Ok(out)
}

pub struct SweepOutcome {
    pub k: usize,
    pub report: RetrievalReport,
    pub model: Model<f32>,
}

/// Train one model per K with otherwise fixed configuration.
pub fn sweep_k(dataset: &Dataset, base: &TrainConfig, ks: &[usize]) -> Result<Vec<SweepOutcome>> {
    if ks.is_empty() {
        return Err(Error::Config("sweep needs at least one K value".into()));
    }
    if let Some(&bad) = ks.iter().find(|&&k| k < 2) {
        return Err(Error::Config(format!(
            "sweep K values must be at least 2, got {bad}"
        )));
    }
    let mut out = Vec::with_capacity(ks.len());
    for &k in ks {
        let mut cfg = base.clone();
        cfg.video.k = k;
        cfg.sentence.k = k;
        cfg.pooling = PoolingKind::Attention;
        cfg.validate()?;
        let outcome = train(dataset, &cfg)?;
        let report = evaluate(dataset, Split::Test, &outcome.model)?;
        out.push(SweepOutcome {
            k,
            report,
            model: outcome.model,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> TrainConfig {
        let mut cfg = TrainConfig::new(6, 5);
        cfg.video.d = 8;
        cfg.video.u = 8;
        cfg.video.k = 2;
        cfg.video.max_len = 8;
        cfg.sentence.d = 8;
        cfg.sentence.u = 8;
        cfg.sentence.k = 2;
        cfg.sentence.max_len = 8;
        cfg.epochs = 2;
        cfg.batch_size = 4;
        cfg
    }

    #[test]
    fn exactly_five_rows_expressible() {
        assert_eq!(ALL_ROWS.len(), 5);
        for row in ALL_ROWS {
            assert_eq!(AblationRow::parse(row.name()).unwrap(), row);
        }
        assert!(AblationRow::parse("extra").is_err());
    }

    #[test]
    fn base_and_deviseq_differ_only_in_loss_kind() {
        let b = base();
        let deviseq = AblationRow::Deviseq.apply(&b).unwrap();
        let baseline = AblationRow::Base.apply(&b).unwrap();
        let mut relabelled = deviseq.clone();
        relabelled.loss.loss_kind = baseline.loss.loss_kind;
        assert_eq!(relabelled, baseline);
        assert_ne!(deviseq.loss.loss_kind, baseline.loss.loss_kind);
    }

    #[test]
    fn row_axes_match_their_names() {
        let b = base();
        let sa = AblationRow::Sa.apply(&b).unwrap();
        assert_eq!(sa.video.k, 1);
        assert_eq!(sa.pooling, PoolingKind::Attention);
        assert_eq!(sa.loss.similarity_kind, SimilarityKind::Concat);
        let mivise = AblationRow::Mivise.apply(&b).unwrap();
        assert_eq!(mivise.video.k, 2);
        assert_eq!(mivise.loss.similarity_kind, SimilarityKind::MilMax);
        let same = AblationRow::SaMe.apply(&b).unwrap();
        assert_eq!(same.video.k, 2);
        assert_eq!(same.loss.similarity_kind, SimilarityKind::Concat);
    }
}
