//! Loss-side mathematics: similarities, instance bags, triplet margins,
//! ranking losses, the attention-diversity regularizer, and their sum.
//!
//! Two similarity routes exist for a pair of embedding matrices Φ, Ψ (K×d):
//! `concat` flattens both to Kd-vectors and takes one cosine; `mil_max`
//! forms the bag of all K² row-pair cosines and takes its maximum, so a
//! single well-aligned embedding pair carries the score even when the other
//! combinations are unrelated.

use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tape, Tensor, Var};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Hinge,
    PseudoHuber,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityKind {
    Concat,
    MilMax,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LossConfig {
    /// Ranking margin ρ.
    pub rho: f64,
    /// Pseudo-Huber slope δ.
    pub delta: f64,
    /// Weight α of the attention regularizer.
    pub alpha: f64,
    /// Attention-diversity target β for the diagonal of AAᵀ.
    pub beta: f64,
    pub loss_kind: LossKind,
    pub similarity_kind: SimilarityKind,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            rho: 1.0,
            delta: 1.0,
            alpha: 1e-4,
            beta: 0.5,
            loss_kind: LossKind::PseudoHuber,
            similarity_kind: SimilarityKind::MilMax,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rho <= 0.0 {
            return Err(Error::Config(format!(
                "margin rho {} must be positive",
                self.rho
            )));
        }
        if self.delta <= 0.0 {
            return Err(Error::Config(format!(
                "slope delta {} must be positive",
                self.delta
            )));
        }
        if self.alpha < 0.0 {
            return Err(Error::Config(format!(
                "alpha {} must be non-negative",
                self.alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta {} outside [0,1]", self.beta)));
        }
        Ok(())
    }
}

/// The K² row-pair cosine scores of one (video, sentence) embedding pair.
#[derive(Debug)]
pub struct InstanceBag {
    /// Row-major K×K: entry (i, j) is cosine(Φ row i, Ψ row j).
    pub scores: Vec<Var>,
    pub k: usize,
}

/// Cosine of the two matrices flattened to Kd-vectors.
pub fn concat_similarity<S: Scalar>(tape: &mut Tape<S>, phi: Var, psi: Var) -> Result<Var> {
    tape.cosine(phi, psi)
}

/// All K² combinations of Φ rows versus Ψ rows.
pub fn instance_bag<S: Scalar>(tape: &mut Tape<S>, phi: Var, psi: Var) -> Result<InstanceBag> {
    let (pk, pd) = (tape.value(phi).rows(), tape.value(phi).cols());
    let (qk, qd) = (tape.value(psi).rows(), tape.value(psi).cols());
    if pk != qk || pd != qd {
        return Err(Error::ShapeMismatch {
            op: "instance_bag",
            left: vec![pk, pd],
            right: vec![qk, qd],
        });
    }
    for (var, side) in [(phi, "phi"), (psi, "psi")] {
        let t = tape.value(var);
        for i in 0..pk {
            let norm = t.row_norm(i).as_f64();
            if norm <= crate::numerics::COSINE_NORM_EPS {
                return Err(Error::DegenerateVector {
                    what: format!("{side} row {i}"),
                    norm,
                    eps: crate::numerics::COSINE_NORM_EPS,
                });
            }
        }
    }
    let phi_rows: Vec<Var> = (0..pk)
        .map(|i| tape.slice_rows(phi, i, i + 1))
        .collect::<Result<_>>()?;
    let psi_rows: Vec<Var> = (0..pk)
        .map(|j| tape.slice_rows(psi, j, j + 1))
        .collect::<Result<_>>()?;
    let mut scores = Vec::with_capacity(pk * pk);
    for &pi in &phi_rows {
        for &qj in &psi_rows {
            scores.push(tape.cosine(pi, qj)?);
        }
    }
    Ok(InstanceBag { scores, k: pk })
}

/// Maximum bag entry; gradient routes to the first argmax in row-major order.
pub fn bag_max<S: Scalar>(tape: &mut Tape<S>, bag: &InstanceBag) -> Result<Var> {
    tape.max_of(&bag.scores)
}

/// Similarity difference Δ = f(V, S⁺) − f(V, S⁻) under the configured route.
pub fn triplet_delta<S: Scalar>(
    tape: &mut Tape<S>,
    phi_v: Var,
    psi_pos: Var,
    psi_neg: Var,
    cfg: &LossConfig,
) -> Result<Var> {
    let (pos, neg) = match cfg.similarity_kind {
        SimilarityKind::Concat => (
            concat_similarity(tape, phi_v, psi_pos)?,
            concat_similarity(tape, phi_v, psi_neg)?,
        ),
        SimilarityKind::MilMax => {
            let bag_pos = instance_bag(tape, phi_v, psi_pos)?;
            let bag_neg = instance_bag(tape, phi_v, psi_neg)?;
            (bag_max(tape, &bag_pos)?, bag_max(tape, &bag_neg)?)
        }
    };
    tape.sub(pos, neg)
}

/// max(0, ρ − Δ) as a plain value.
pub fn hinge_value<S: Scalar>(delta: S, rho: S) -> S {
    (rho - delta).max(S::zero())
}

/// δ²(√(1 + ((ρ−Δ)/δ)²) − 1) as a plain value. Zero iff Δ = ρ; symmetric
/// in the residual, so overshooting the margin costs the same as missing it.
pub fn pseudo_huber_value<S: Scalar>(delta: S, rho: S, slope: S) -> S {
    let r = (rho - delta) / slope;
    slope * slope * ((S::one() + r * r).sqrt() - S::one())
}

/// Hinge loss on the tape.
pub fn hinge_loss<S: Scalar>(tape: &mut Tape<S>, delta: Var, rho: f64) -> Result<Var> {
    if rho <= 0.0 {
        return Err(Error::Config(format!("margin rho {rho} must be positive")));
    }
    let neg = tape.scale(delta, S::from_f64(-1.0));
    let shifted = tape.add_const(neg, S::from_f64(rho));
    Ok(tape.relu(shifted))
}

/// Pseudo-Huber loss on the tape.
pub fn pseudo_huber_loss<S: Scalar>(
    tape: &mut Tape<S>,
    delta: Var,
    rho: f64,
    slope: f64,
) -> Result<Var> {
    if slope <= 0.0 {
        return Err(Error::Config(format!(
            "slope delta {slope} must be positive"
        )));
    }
    let neg = tape.scale(delta, S::from_f64(-1.0 / slope));
    let r = tape.add_const(neg, S::from_f64(rho / slope));
    let r2 = tape.mul(r, r)?;
    let inside = tape.add_const(r2, S::one());
    let root = tape.sqrt(inside);
    let shifted = tape.add_const(root, S::from_f64(-1.0));
    Ok(tape.scale(shifted, S::from_f64(slope * slope)))
}

/// ‖AAᵀ − βI‖_F: zero iff the K attention rows are pairwise orthogonal,
/// each with squared norm β.
pub fn attention_penalty<S: Scalar>(tape: &mut Tape<S>, a: Var, beta: f64) -> Result<Var> {
    let k = tape.value(a).rows();
    let at = tape.transpose(a);
    let gram = tape.matmul(a, at)?;
    let target = tape.constant(Tensor::scaled_identity(k, S::from_f64(beta)));
    let residual = tape.sub(gram, target)?;
    tape.frobenius(residual)
}

/// One triplet's embeddings and attention maps on the tape.
pub struct TripletTerm {
    pub phi_v: Var,
    pub attn_v: Var,
    pub psi_pos: Var,
    pub attn_pos: Var,
    pub psi_neg: Var,
    pub attn_neg: Var,
}

/// Σ_n [ loss(Δ_n) + α·(R(Aᵛ) + R(A^{s⁺}) + R(A^{s⁻})) ], summed in the
/// given order for reproducibility.
pub fn total_objective<S: Scalar>(
    tape: &mut Tape<S>,
    triplets: &[TripletTerm],
    cfg: &LossConfig,
) -> Result<Var> {
    cfg.validate()?;
    if triplets.is_empty() {
        return Err(Error::Contract("total_objective on an empty batch".into()));
    }
    let mut total: Option<Var> = None;
    for term in triplets {
        let delta = triplet_delta(tape, term.phi_v, term.psi_pos, term.psi_neg, cfg)?;
        let mut loss = match cfg.loss_kind {
            LossKind::Hinge => hinge_loss(tape, delta, cfg.rho)?,
            LossKind::PseudoHuber => pseudo_huber_loss(tape, delta, cfg.rho, cfg.delta)?,
        };
        if cfg.alpha > 0.0 {
            let rv = attention_penalty(tape, term.attn_v, cfg.beta)?;
            let rp = attention_penalty(tape, term.attn_pos, cfg.beta)?;
            let rn = attention_penalty(tape, term.attn_neg, cfg.beta)?;
            let rvp = tape.add(rv, rp)?;
            let reg = tape.add(rvp, rn)?;
            let weighted = tape.scale(reg, S::from_f64(cfg.alpha));
            loss = tape.add(loss, weighted)?;
        }
        total = Some(match total {
            Some(acc) => tape.add(acc, loss)?,
            None => loss,
        });
    }
    let v = total.expect("non-empty batch");
    if !tape.value(v).item().is_finite() {
        return Err(Error::Contract(format!(
            "objective is non-finite: {}",
            tape.value(v).item()
        )));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat<S: Scalar>(tape: &mut Tape<S>, rows: usize, cols: usize, data: &[f64]) -> Var {
        let t = Tensor::new(
            vec![rows, cols],
            data.iter().map(|&v| S::from_f64(v)).collect(),
        )
        .unwrap();
        tape.constant(t)
    }

    #[test]
    fn concat_similarity_identity_and_negation() {
        let mut tape = Tape::<f64>::new();
        let phi = mat(&mut tape, 2, 2, &[0.3, -0.5, 1.0, 0.2]);
        let psi_neg = mat(&mut tape, 2, 2, &[-0.3, 0.5, -1.0, -0.2]);
        let same = concat_similarity(&mut tape, phi, phi).unwrap();
        assert!((tape.value(same).item() - 1.0).abs() < 1e-12);
        let opposite = concat_similarity(&mut tape, phi, psi_neg).unwrap();
        assert!((tape.value(opposite).item() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn concat_similarity_swapped_basis_rows_are_orthogonal() {
        let mut tape = Tape::<f64>::new();
        let phi = mat(&mut tape, 2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let psi = mat(&mut tape, 2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let s = concat_similarity(&mut tape, phi, psi).unwrap();
        assert_eq!(tape.value(s).item(), 0.0);
    }

    #[test]
    fn instance_bag_k1_reduces_to_cosine() {
        let mut tape = Tape::<f64>::new();
        let phi = mat(&mut tape, 1, 2, &[1.0, 1.0]);
        let psi = mat(&mut tape, 1, 2, &[1.0, 0.0]);
        let bag = instance_bag(&mut tape, phi, psi).unwrap();
        assert_eq!(bag.scores.len(), 1);
        let v = tape.value(bag.scores[0]).item();
        assert!((v - 1.0 / 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn instance_bag_orthonormal_rows_give_identity_scores() {
        let mut tape = Tape::<f64>::new();
        let phi = mat(&mut tape, 2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let bag = instance_bag(&mut tape, phi, phi).unwrap();
        let vals: Vec<f64> = bag.scores.iter().map(|&v| tape.value(v).item()).collect();
        assert_eq!(vals, vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn instance_bag_k8_has_64_entries() {
        let mut tape = Tape::<f64>::new();
        let data: Vec<f64> = (0..8 * 3).map(|i| 0.1 * (i as f64) + 0.05).collect();
        let phi = mat(&mut tape, 8, 3, &data);
        let bag = instance_bag(&mut tape, phi, phi).unwrap();
        assert_eq!(bag.scores.len(), 64);
    }

    #[test]
    fn instance_bag_names_degenerate_row() {
        let mut tape = Tape::<f64>::new();
        let phi = mat(&mut tape, 2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let err = instance_bag(&mut tape, phi, phi).unwrap_err().to_string();
        assert!(err.contains("row 1"), "{err}");
    }

    #[test]
    fn bag_max_examples() {
        let mut tape = Tape::<f64>::new();
        for (data, want) in [
            (vec![1.0, 0.0, 0.0, 1.0], 1.0),
            (vec![-0.3, -0.3, -0.3, -0.3], -0.3),
            (vec![0.9, 0.1, 0.2, 0.4], 0.9),
        ] {
            let scores = data
                .iter()
                .map(|&v| tape.constant(Tensor::scalar(v)))
                .collect();
            let bag = InstanceBag { scores, k: 2 };
            let m = bag_max(&mut tape, &bag).unwrap();
            assert_eq!(tape.value(m).item(), want);
        }
    }

    #[test]
    fn triplet_delta_zero_when_pos_equals_neg() {
        for kind in [SimilarityKind::Concat, SimilarityKind::MilMax] {
            let mut tape = Tape::<f64>::new();
            let phi = mat(&mut tape, 2, 2, &[0.4, 0.3, -0.2, 0.8]);
            let psi = mat(&mut tape, 2, 2, &[0.1, -0.6, 0.5, 0.5]);
            let cfg = LossConfig {
                similarity_kind: kind,
                ..LossConfig::default()
            };
            let d = triplet_delta(&mut tape, phi, psi, psi, &cfg).unwrap();
            assert_eq!(tape.value(d).item(), 0.0);
        }
    }

    #[test]
    fn triplet_delta_mil_is_difference_of_bag_maxima() {
        // bags with maxima 0.9 and 0.3 → Δ = 0.6
        let mut tape = Tape::<f64>::new();
        let phi = mat(&mut tape, 1, 2, &[1.0, 0.0]);
        let pos = mat(&mut tape, 1, 2, &[0.9, -(1.0f64 - 0.81).sqrt()]);
        let neg = mat(&mut tape, 1, 2, &[0.3, -(1.0f64 - 0.09).sqrt()]);
        let cfg = LossConfig::default();
        let d = triplet_delta(&mut tape, phi, pos, neg, &cfg).unwrap();
        assert!((tape.value(d).item() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn triplet_delta_concat_orthogonal_negative() {
        let mut tape = Tape::<f64>::new();
        let phi = mat(&mut tape, 1, 2, &[1.0, 0.0]);
        let neg = mat(&mut tape, 1, 2, &[0.0, 1.0]);
        let cfg = LossConfig {
            similarity_kind: SimilarityKind::Concat,
            ..LossConfig::default()
        };
        let d = triplet_delta(&mut tape, phi, phi, neg, &cfg).unwrap();
        assert!((tape.value(d).item() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hinge_examples() {
        assert_eq!(hinge_value(1.0f64, 1.0), 0.0);
        assert!((hinge_value(0.6f64, 1.0) - 0.4).abs() < 1e-12);
        assert_eq!(hinge_value(2.0f64, 1.0), 0.0);
        // tape route agrees
        let mut tape = Tape::<f64>::new();
        let d = tape.constant(Tensor::scalar(0.6));
        let l = hinge_loss(&mut tape, d, 1.0).unwrap();
        assert!((tape.value(l).item() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn pseudo_huber_examples() {
        assert_eq!(pseudo_huber_value(1.0f64, 1.0, 1.0), 0.0);
        let at_zero = pseudo_huber_value(0.0f64, 1.0, 1.0);
        assert!((at_zero - (2.0f64.sqrt() - 1.0)).abs() < 1e-12);
        // symmetric in ρ−Δ: overshooting to Δ=2 costs the same as Δ=0
        let at_two = pseudo_huber_value(2.0f64, 1.0, 1.0);
        assert_eq!(at_zero, at_two);
        let mut tape = Tape::<f64>::new();
        let d = tape.constant(Tensor::scalar(0.0));
        let l = pseudo_huber_loss(&mut tape, d, 1.0, 1.0).unwrap();
        assert!((tape.value(l).item() - at_zero).abs() < 1e-12);
    }

    #[test]
    fn pseudo_huber_is_differentiable_at_the_margin() {
        // the hinge kinks at Δ=ρ; the pseudo-Huber derivative exists there
        // and is 0 — central differences converge to it as the step shrinks.
        let f = |d: f64| pseudo_huber_value(d, 1.0, 1.0);
        let mut last = f64::MAX;
        for eps in [1e-2, 1e-3, 1e-4] {
            let deriv = (f(1.0 + eps) - f(1.0 - eps)) / (2.0 * eps);
            assert!(deriv.abs() <= last + 1e-12);
            last = deriv.abs();
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn attention_penalty_examples() {
        let mut tape = Tape::<f64>::new();
        // rows orthogonal, each squared norm 0.5, β = 0.5 → 0
        let s = (0.5f64).sqrt();
        let a = mat(&mut tape, 2, 2, &[s, 0.0, 0.0, s]);
        let p = attention_penalty(&mut tape, a, 0.5).unwrap();
        assert!(tape.value(p).item().abs() < 1e-12);

        let a1 = mat(&mut tape, 1, 1, &[1.0]);
        let p1 = attention_penalty(&mut tape, a1, 0.5).unwrap();
        assert!((tape.value(p1).item() - 0.5).abs() < 1e-12);

        let quarter = mat(&mut tape, 2, 4, &[0.25; 8]);
        let pq = attention_penalty(&mut tape, quarter, 0.5).unwrap();
        assert!((tape.value(pq).item() - 0.5).abs() < 1e-12);
    }

    fn toy_term<S: Scalar>(tape: &mut Tape<S>) -> TripletTerm {
        let attn = &[0.5, 0.25, 0.25, 0.1, 0.6, 0.3];
        TripletTerm {
            phi_v: mat(tape, 2, 2, &[0.8, 0.1, -0.2, 0.7]),
            attn_v: mat(tape, 2, 3, attn),
            psi_pos: mat(tape, 2, 2, &[0.7, 0.2, -0.1, 0.6]),
            attn_pos: mat(tape, 2, 3, attn),
            psi_neg: mat(tape, 2, 2, &[-0.5, 0.4, 0.3, -0.6]),
            attn_neg: mat(tape, 2, 3, attn),
        }
    }

    #[test]
    fn total_objective_zero_when_margin_met_and_alpha_zero() {
        let mut tape = Tape::<f64>::new();
        // Δ = ρ exactly: pos aligned (cos 1), neg orthogonal (cos 0)
        let term = TripletTerm {
            phi_v: mat(&mut tape, 1, 2, &[1.0, 0.0]),
            attn_v: mat(&mut tape, 1, 2, &[0.5, 0.5]),
            psi_pos: mat(&mut tape, 1, 2, &[2.0, 0.0]),
            attn_pos: mat(&mut tape, 1, 2, &[0.5, 0.5]),
            psi_neg: mat(&mut tape, 1, 2, &[0.0, 3.0]),
            attn_neg: mat(&mut tape, 1, 2, &[0.5, 0.5]),
        };
        let cfg = LossConfig {
            alpha: 0.0,
            ..LossConfig::default()
        };
        let v = total_objective(&mut tape, &[term], &cfg).unwrap();
        assert_eq!(tape.value(v).item(), 0.0);
    }

    #[test]
    fn total_objective_linear_combination_of_penalties() {
        // Δ = ρ so the ranking term is 0; each penalty is 0.5 → total 1.5e-4
        let mut tape = Tape::<f64>::new();
        let attn = &[0.25; 8];
        let term = TripletTerm {
            phi_v: mat(&mut tape, 1, 2, &[1.0, 0.0]),
            attn_v: mat(&mut tape, 2, 4, attn),
            psi_pos: mat(&mut tape, 1, 2, &[2.0, 0.0]),
            attn_pos: mat(&mut tape, 2, 4, attn),
            psi_neg: mat(&mut tape, 1, 2, &[0.0, 3.0]),
            attn_neg: mat(&mut tape, 2, 4, attn),
        };
        let cfg = LossConfig {
            similarity_kind: SimilarityKind::Concat,
            ..LossConfig::default()
        };
        let v = total_objective(&mut tape, &[term], &cfg).unwrap();
        assert!((tape.value(v).item() - 1.5e-4).abs() < 1e-12);
    }

    #[test]
    fn total_objective_doubles_with_duplicated_batch() {
        let mut tape = Tape::<f64>::new();
        let cfg = LossConfig::default();
        let one = vec![toy_term(&mut tape)];
        let v1 = total_objective(&mut tape, &one, &cfg).unwrap();
        let two = vec![toy_term(&mut tape), toy_term(&mut tape)];
        let v2 = total_objective(&mut tape, &two, &cfg).unwrap();
        let (a, b) = (tape.value(v1).item(), tape.value(v2).item());
        assert!((b - 2.0 * a).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn mil_delta_ignores_non_argmax_perturbations() {
        // perturbing any non-argmax bag entry by −0.01 leaves Δ unchanged
        let base = [0.9, 0.1, 0.2, 0.4];
        let neg = [0.3, -0.2, 0.0, 0.1];
        let delta_of = |bag_pos: &[f64], bag_neg: &[f64]| {
            let mut tape = Tape::<f64>::new();
            let pos_scores = bag_pos
                .iter()
                .map(|&v| tape.constant(Tensor::scalar(v)))
                .collect();
            let neg_scores = bag_neg
                .iter()
                .map(|&v| tape.constant(Tensor::scalar(v)))
                .collect();
            let bp = InstanceBag { scores: pos_scores, k: 2 };
            let bn = InstanceBag { scores: neg_scores, k: 2 };
            let mp = bag_max(&mut tape, &bp).unwrap();
            let mn = bag_max(&mut tape, &bn).unwrap();
            let d = tape.sub(mp, mn).unwrap();
            tape.value(d).item()
        };
        let reference = delta_of(&base, &neg);
        for i in 1..4 {
            let mut perturbed = base;
            perturbed[i] -= 0.01;
            assert_eq!(delta_of(&perturbed, &neg), reference);
        }
    }

    #[test]
    fn bag_max_coincides_with_concat_when_k1() {
        let mut tape = Tape::<f64>::new();
        let phi = mat(&mut tape, 1, 3, &[0.3, -0.8, 0.5]);
        let psi = mat(&mut tape, 1, 3, &[1.0, 0.4, -0.2]);
        let bag = instance_bag(&mut tape, phi, psi).unwrap();
        let m = bag_max(&mut tape, &bag).unwrap();
        let c = concat_similarity(&mut tape, phi, psi).unwrap();
        assert!((tape.value(m).item() - tape.value(c).item()).abs() < 1e-12);
    }

    proptest::proptest! {
        // scaling any embedding row by a positive constant leaves the bag unchanged
        #[test]
        fn bag_is_scale_invariant(scale in 0.1f64..10.0, row in 0usize..2) {
            let data = [0.6, -0.2, 0.3, 0.9];
            let mut tape = Tape::<f64>::new();
            let phi = mat(&mut tape, 2, 2, &data);
            let psi = mat(&mut tape, 2, 2, &[0.1, 0.8, -0.4, 0.5]);
            let bag = instance_bag(&mut tape, phi, psi).unwrap();
            let baseline: Vec<f64> = bag.scores.iter().map(|&v| tape.value(v).item()).collect();

            let mut scaled = data;
            scaled[row * 2] *= scale;
            scaled[row * 2 + 1] *= scale;
            let mut tape2 = Tape::<f64>::new();
            let phi2 = mat(&mut tape2, 2, 2, &scaled);
            let psi2 = mat(&mut tape2, 2, 2, &[0.1, 0.8, -0.4, 0.5]);
            let bag2 = instance_bag(&mut tape2, phi2, psi2).unwrap();
            for (a, &v) in baseline.iter().zip(&bag2.scores) {
                proptest::prop_assert!((a - tape2.value(v).item()).abs() < 1e-6);
            }
        }
    }
}
