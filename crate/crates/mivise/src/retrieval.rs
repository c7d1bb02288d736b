//! Sentence-to-video retrieval over an embedding index, plus the evaluation
//! metrics (MR, nMR, R@k).
//!
//! Pair similarity is the maximum cosine over all K² row combinations of
//! the two K×d embedding matrices; with rows pre-normalized to unit length
//! that is a max over K² dot products, so a query costs exactly N·K²
//! row-pair products (a counter verifies the O(K²N) contract).
//!
//! Ranks are pessimistic: score ties count against the ground truth, so a
//! collapsed embedding cannot fake a good median rank.

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::trainer::Model;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Embedded video corpus with L2-normalized embedding rows.
pub struct EmbeddingIndex {
    ids: Vec<String>,
    items: Vec<Tensor<f32>>,
    pub k: usize,
    pub d: usize,
}

impl EmbeddingIndex {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn embedding(&self, i: usize) -> &Tensor<f32> {
        &self.items[i]
    }
}

/// Normalize each row to unit length; a (near-)zero row is an error.
pub fn normalize_rows(m: &Tensor<f32>) -> Result<Tensor<f32>> {
    let mut out = m.clone();
    let (rows, cols) = (m.rows(), m.cols());
    for i in 0..rows {
        let norm = m.row_norm(i);
        if (norm as f64) <= crate::numerics::COSINE_NORM_EPS {
            return Err(Error::DegenerateVector {
                what: format!("embedding row {i}"),
                norm: norm as f64,
                eps: crate::numerics::COSINE_NORM_EPS,
            });
        }
        for v in &mut out.data_mut()[i * cols..(i + 1) * cols] {
            *v /= norm;
        }
    }
    Ok(out)
}

/// Encode every video in eval mode and store its normalized embeddings.
pub fn build_index<I>(videos: I, model: &Model<f32>) -> Result<EmbeddingIndex>
where
    I: IntoIterator<Item = (String, Tensor<f32>)>,
{
    let mut ids = Vec::new();
    let mut items = Vec::new();
    let mut seen = HashSet::new();
    for (id, features) in videos {
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        let set = model.embed_video(&features)?;
        items.push(normalize_rows(&set.phi)?);
        ids.push(id);
    }
    Ok(EmbeddingIndex {
        ids,
        items,
        k: model.cfg.video.k,
        d: model.cfg.video.d,
    })
}

/// Max over the K² row-pair dot products of two row-normalized matrices.
/// Adds exactly K² to `pair_count`.
pub fn score(query: &Tensor<f32>, item: &Tensor<f32>, pair_count: &mut u64) -> f32 {
    let mut best = f32::NEG_INFINITY;
    for i in 0..query.rows() {
        let q = query.row(i);
        for j in 0..item.rows() {
            let dot: f32 = q.iter().zip(item.row(j)).map(|(a, b)| a * b).sum();
            *pair_count += 1;
            best = best.max(dot);
        }
    }
    best
}

/// Every item scored against a normalized query embedding; descending score,
/// ascending id on ties. Returns the ranking and the row-pair counter.
pub fn query_index(
    query_emb: &Tensor<f32>,
    index: &EmbeddingIndex,
    top: usize,
) -> Result<(Vec<(String, f32)>, u64)> {
    if index.is_empty() {
        return Err(Error::Contract("query against an empty index".into()));
    }
    if top == 0 {
        return Err(Error::Contract("query cutoff must be at least 1".into()));
    }
    let mut pair_count = 0u64;
    let mut scored: Vec<(usize, f32)> = index
        .items
        .iter()
        .enumerate()
        .map(|(i, item)| (i, score(query_emb, item, &mut pair_count)))
        .collect();
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| index.ids[a.0].cmp(&index.ids[b.0]))
    });
    scored.truncate(top);
    Ok((
        scored
            .into_iter()
            .map(|(i, s)| (index.ids[i].clone(), s))
            .collect(),
        pair_count,
    ))
}

/// Encode a sentence and rank the index items against it.
pub fn query(
    sentence_features: &Tensor<f32>,
    index: &EmbeddingIndex,
    model: &Model<f32>,
    top: usize,
) -> Result<(Vec<(String, f32)>, u64)> {
    let set = model.embed_sentence(sentence_features)?;
    let emb = normalize_rows(&set.phi)?;
    query_index(&emb, index, top)
}

/// Pessimistic rank of the item at `truth` within a score row: one plus the
/// number of strictly better items plus the number of equal-scored others.
pub fn pessimistic_rank(scores: &[f32], truth: usize) -> usize {
    let t = scores[truth];
    let mut rank = 1;
    for (i, &s) in scores.iter().enumerate() {
        if s > t || (s == t && i != truth) {
            rank += 1;
        }
    }
    rank
}

/// Rank of the ground-truth video for one query sentence.
pub fn rank_of(
    sentence_features: &Tensor<f32>,
    index: &EmbeddingIndex,
    model: &Model<f32>,
    truth_id: &str,
) -> Result<usize> {
    let truth = index
        .ids
        .iter()
        .position(|id| id == truth_id)
        .ok_or_else(|| Error::UnknownId(truth_id.to_string()))?;
    let set = model.embed_sentence(sentence_features)?;
    let emb = normalize_rows(&set.phi)?;
    let mut pair_count = 0u64;
    let scores: Vec<f32> = index
        .items
        .iter()
        .map(|item| score(&emb, item, &mut pair_count))
        .collect();
    Ok(pessimistic_rank(&scores, truth))
}

/// Per-query ranks with the aggregate retrieval metrics.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RetrievalReport {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "Q")]
    pub q: usize,
    #[serde(rename = "MR")]
    pub mr: usize,
    /// 100·MR/N.
    #[serde(rename = "nMR")]
    pub nmr: f64,
    #[serde(rename = "R1")]
    pub r1: f64,
    #[serde(rename = "R5")]
    pub r5: f64,
    #[serde(rename = "R10")]
    pub r10: f64,
    pub ranks: Vec<usize>,
}

/// Aggregate ranks into MR (lower median), nMR (percent), and R@k (percent).
pub fn report_from_ranks(ranks: Vec<usize>, n: usize) -> Result<RetrievalReport> {
    let q = ranks.len();
    if q == 0 {
        return Err(Error::Contract("no queries to evaluate".into()));
    }
    if let Some(&bad) = ranks.iter().find(|&&r| r < 1 || r > n) {
        return Err(Error::Contract(format!("rank {bad} outside [1, {n}]")));
    }
    let mut sorted = ranks.clone();
    sorted.sort_unstable();
    // lower median: element at 1-indexed position ceil(Q/2)
    let mr = sorted[(q - 1) / 2];
    let recall = |k: usize| 100.0 * ranks.iter().filter(|&&r| r <= k).count() as f64 / q as f64;
    Ok(RetrievalReport {
        n,
        q,
        mr,
        nmr: 100.0 * mr as f64 / n as f64,
        r1: recall(1),
        r5: recall(5),
        r10: recall(10),
        ranks,
    })
}

impl RetrievalReport {
    /// Plain-text row in the usual MR (nMR) | R@1 | R@5 | R@10 layout.
    pub fn table_row(&self, label: &str) -> String {
        format!(
            "{label:<12} {:>6} ({:>6.2}) {:>6.2} {:>6.2} {:>6.2}",
            self.mr, self.nmr, self.r1, self.r5, self.r10
        )
    }

    pub fn table_header(label: &str) -> String {
        format!(
            "{label:<12} {:>6} {:>8} {:>6} {:>6} {:>6}",
            "MR", "(nMR)", "R@1", "R@5", "R@10"
        )
    }
}

/// Index every video of `split`, rank each of its sentences' ground truth,
/// and aggregate.
pub fn evaluate(dataset: &Dataset, split: Split, model: &Model<f32>) -> Result<RetrievalReport> {
    let records = dataset.of_split(split);
    if records.is_empty() {
        return Err(Error::Contract(format!("split {} is empty", split.tag())));
    }
    let index = build_index(
        records
            .iter()
            .map(|r| Ok((r.video_ref.clone(), dataset.video_features(r)?.clone())))
            .collect::<Result<Vec<_>>>()?,
        model,
    )?;
    let mut ranks = Vec::with_capacity(records.len());
    for r in &records {
        ranks.push(rank_of(
            dataset.sentence_features(r)?,
            &index,
            model,
            &r.video_ref,
        )?);
    }
    report_from_ranks(ranks, index.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(rows: Vec<Vec<f32>>) -> Tensor<f32> {
        let k = rows.len();
        let d = rows[0].len();
        let data: Vec<f32> = rows.into_iter().flatten().collect();
        normalize_rows(&Tensor::new(vec![k, d], data).unwrap()).unwrap()
    }

    #[test]
    fn score_of_item_with_itself_is_one() {
        let q = unit(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let mut count = 0;
        assert!((score(&q, &q, &mut count) - 1.0).abs() < 1e-6);
        assert_eq!(count, 4);
    }

    #[test]
    fn score_of_orthogonal_embeddings_is_zero() {
        let q = unit(vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]]);
        let item = unit(vec![vec![0.0, 0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]]);
        let mut count = 0;
        assert_eq!(score(&q, &item, &mut count), 0.0);
    }

    #[test]
    fn score_takes_best_combination() {
        let q = unit(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        let item = unit(vec![vec![0.6, 0.8, 0.0], vec![0.0, 0.0, 1.0]]);
        let mut count = 0;
        let s = score(&q, &item, &mut count);
        assert!((s - 0.8).abs() < 1e-6, "max of {{0.6, 0.8, 0, 0}}, got {s}");
        assert_eq!(count, 4);
    }

    #[test]
    fn score_is_symmetric() {
        let a = unit(vec![vec![0.3, -0.8, 0.1], vec![0.5, 0.5, 0.5]]);
        let b = unit(vec![vec![-0.2, 0.9, 0.4], vec![1.0, 0.0, -1.0]]);
        let mut c1 = 0;
        let mut c2 = 0;
        assert_eq!(score(&a, &b, &mut c1), score(&b, &a, &mut c2));
    }

    #[test]
    fn pessimistic_rank_examples() {
        assert_eq!(pessimistic_rank(&[0.9, 0.5, 0.2], 0), 1);
        // truth tied with 3 others at the max → rank 4
        assert_eq!(pessimistic_rank(&[0.9, 0.9, 0.9, 0.9, 0.1], 2), 4);
        // scores [0.9, 0.7(truth), 0.8, 0.1] → rank 3
        assert_eq!(pessimistic_rank(&[0.9, 0.7, 0.8, 0.1], 1), 3);
    }

    #[test]
    fn report_from_ranks_definition_applied_by_hand() {
        let r = report_from_ranks(vec![1, 3, 7, 20], 30).unwrap();
        assert_eq!(r.mr, 3);
        assert_eq!(r.r1, 25.0);
        assert_eq!(r.r5, 50.0);
        assert_eq!(r.r10, 75.0);
        assert!((r.nmr - 10.0).abs() < 1e-9);
    }

    #[test]
    fn report_perfect_retrieval() {
        let r = report_from_ranks(vec![1, 1, 1], 5).unwrap();
        assert_eq!(r.mr, 1);
        assert_eq!(r.r1, 100.0);
        assert_eq!(r.r5, 100.0);
        assert_eq!(r.r10, 100.0);
        assert!((r.nmr - 20.0).abs() < 1e-9);
    }

    #[test]
    fn nmr_follows_the_times_hundred_convention() {
        let r = report_from_ranks(vec![1578], 4999).unwrap();
        assert!((r.nmr - 31.57).abs() < 0.01, "nmr {}", r.nmr);
        let r = report_from_ranks(vec![426], 11300).unwrap();
        assert!((r.nmr - 3.77).abs() < 0.01, "nmr {}", r.nmr);
    }

    #[test]
    fn report_json_field_names() {
        let r = report_from_ranks(vec![2, 1], 4).unwrap();
        let json = serde_json::to_value(&r).unwrap();
        for key in ["N", "Q", "MR", "nMR", "R1", "R5", "R10", "ranks"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn rank_rejects_out_of_range() {
        assert!(report_from_ranks(vec![0], 5).is_err());
        assert!(report_from_ranks(vec![6], 5).is_err());
        assert!(report_from_ranks(vec![], 5).is_err());
    }
}
