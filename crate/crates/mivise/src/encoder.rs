//! Sequence encoders: bidirectional GRU plus self-attentive pooling.
//!
//! One encoder instance per modality. A feature sequence of valid length T
//! becomes a d×T hidden-state matrix H (forward and backward halves
//! concatenated per step), a K×T row-stochastic attention map
//! A = softmax(W₂ tanh(W₁ H)), and K pooled embeddings Φ = A Hᵀ.
//!
//! Padding never enters the recurrence or the attention: only the valid
//! prefix of a sequence is consumed, so output is invariant to how much
//! zero padding trails it.

use crate::error::{Error, Result};
use crate::numerics::{BoundParams, ParamStore, Scalar, Tape, Tensor, Var};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EncoderConfig {
    /// Feature width of the incoming sequence (2048 for ResNet video frames,
    /// 200 for GloVe words, anything for synthetic features).
    pub input_dim: usize,
    /// Total biGRU hidden width, forward+backward combined. Must be even.
    pub d: usize,
    /// Attention hidden width; defaults to d.
    pub u: usize,
    /// Number of embeddings per sequence.
    pub k: usize,
    pub dropout_rate: f64,
    pub max_len: usize,
}

impl EncoderConfig {
    pub fn new(input_dim: usize) -> Self {
        EncoderConfig {
            input_dim,
            d: 256,
            u: 256,
            k: 8,
            dropout_rate: 0.2,
            max_len: 32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("encoder input_dim must be positive".into()));
        }
        if self.d == 0 || self.d % 2 != 0 {
            return Err(Error::Config(format!(
                "hidden width d={} must be positive and even",
                self.d
            )));
        }
        if self.k == 0 || self.u == 0 {
            return Err(Error::Config("k and u must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout_rate {} outside [0,1)",
                self.dropout_rate
            )));
        }
        if self.max_len == 0 {
            return Err(Error::Config("max_len must be at least 1".into()));
        }
        Ok(())
    }

    pub fn hidden_per_dir(&self) -> usize {
        self.d / 2
    }
}

/// K pooled embeddings and the attention map that produced them,
/// both over the valid (unpadded) positions of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet<S> {
    /// K×d; rows are embeddings.
    pub phi: Tensor<S>,
    /// K×T row-stochastic attention map.
    pub attention: Tensor<S>,
}

/// How a forward pass treats dropout.
pub enum EncodeMode<'a> {
    /// Inverted dropout on the GRU input transformations, fresh mask per
    /// step and direction.
    Train { dropout_rng: &'a mut ChaCha8Rng },
    Eval,
}

const GATE_NAMES: [&str; 3] = ["z", "r", "h"];
const DIR_NAMES: [&str; 2] = ["fwd", "bwd"];

/// Register all learnable tensors of one encoder under `prefix`.
///
/// Weights are uniform in [−1/√fan_in, +1/√fan_in], biases zero; the draw
/// order is fixed so a seed fully determines the initialization.
pub fn init_encoder_params<S: Scalar>(
    store: &mut ParamStore<S>,
    prefix: &str,
    cfg: &EncoderConfig,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    cfg.validate()?;
    let h = cfg.hidden_per_dir();
    for dir in DIR_NAMES {
        for gate in GATE_NAMES {
            store.register(
                &format!("{prefix}.gru.{dir}.w_{gate}"),
                uniform_init(h, cfg.input_dim, rng),
            )?;
            store.register(
                &format!("{prefix}.gru.{dir}.u_{gate}"),
                uniform_init(h, h, rng),
            )?;
            store.register(
                &format!("{prefix}.gru.{dir}.b_{gate}"),
                Tensor::zeros(vec![h, 1]),
            )?;
        }
    }
    store.register(&format!("{prefix}.attn.w1"), uniform_init(cfg.u, cfg.d, rng))?;
    store.register(&format!("{prefix}.attn.w2"), uniform_init(cfg.k, cfg.u, rng))?;
    Ok(())
}

fn uniform_init<S: Scalar>(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor<S> {
    let bound = 1.0 / (cols as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| S::from_f64(rng.gen_range(-bound..bound)))
        .collect();
    Tensor::new(vec![rows, cols], data).expect("init shape")
}

/// Tape handles for one GRU direction.
pub type GruDirVars = crate::numerics::GruVars;

#[derive(Clone, Copy)]
pub struct EncoderVars {
    pub fwd: GruDirVars,
    pub bwd: GruDirVars,
    pub attn_w1: Var,
    pub attn_w2: Var,
}

impl EncoderVars {
    /// Resolve the tensors registered by [`init_encoder_params`] on a bound tape.
    pub fn resolve(bound: &BoundParams, prefix: &str) -> Result<Self> {
        let dir = |d: &str| -> Result<GruDirVars> {
            let v = |t: &str, g: &str| bound.var(&format!("{prefix}.gru.{d}.{t}_{g}"));
            Ok(GruDirVars {
                w_z: v("w", "z")?,
                u_z: v("u", "z")?,
                b_z: v("b", "z")?,
                w_r: v("w", "r")?,
                u_r: v("u", "r")?,
                b_r: v("b", "r")?,
                w_h: v("w", "h")?,
                u_h: v("u", "h")?,
                b_h: v("b", "h")?,
            })
        };
        Ok(EncoderVars {
            fwd: dir("fwd")?,
            bwd: dir("bwd")?,
            attn_w1: bound.var(&format!("{prefix}.attn.w1"))?,
            attn_w2: bound.var(&format!("{prefix}.attn.w2"))?,
        })
    }
}

/// One GRU step:
/// z = σ(W_z x + U_z h + b_z), r = σ(W_r x + U_r h + b_r),
/// h̃ = tanh(W_h x + U_h (r⊙h) + b_h), h' = (1−z)⊙h + z⊙h̃.
pub fn gru_cell<S: Scalar>(
    tape: &mut Tape<S>,
    p: &GruDirVars,
    x: Var,
    h_prev: Var,
) -> Result<Var> {
    let wx_z = tape.matmul(p.w_z, x)?;
    let wx_r = tape.matmul(p.w_r, x)?;
    let wx_h = tape.matmul(p.w_h, x)?;
    gru_cell_from_inputs(tape, p, wx_z, wx_r, wx_h, h_prev)
}

// The recurrent part of the cell, with the input transforms W_g·x already
// computed (they are batched over all steps in `direction_states`).
fn gru_cell_from_inputs<S: Scalar>(
    tape: &mut Tape<S>,
    p: &GruDirVars,
    wx_z: Var,
    wx_r: Var,
    wx_h: Var,
    h_prev: Var,
) -> Result<Var> {
    let gate = |tape: &mut Tape<S>, wx: Var, u: Var, b: Var, hx: Var| -> Result<Var> {
        let uh = tape.matmul(u, hx)?;
        let s = tape.add(wx, uh)?;
        tape.add(s, b)
    };
    let z_pre = gate(tape, wx_z, p.u_z, p.b_z, h_prev)?;
    let z = tape.sigmoid(z_pre);
    let r_pre = gate(tape, wx_r, p.u_r, p.b_r, h_prev)?;
    let r = tape.sigmoid(r_pre);
    let rh = tape.mul(r, h_prev)?;
    let c_pre = gate(tape, wx_h, p.u_h, p.b_h, rh)?;
    let h_new = tape.tanh(c_pre);
    // (1−z)⊙h + z⊙h̃ = h − z⊙h + z⊙h̃
    let zh = tape.mul(z, h_prev)?;
    let zn = tape.mul(z, h_new)?;
    let keep = tape.sub(h_prev, zh)?;
    tape.add(keep, zn)
}

/// Run both directions over the valid steps and concatenate per-step states
/// into H of shape d×T. `xs` must hold exactly the valid steps.
pub fn bigru_encode<S: Scalar>(
    tape: &mut Tape<S>,
    fwd: &GruDirVars,
    bwd: &GruDirVars,
    xs: &[Var],
) -> Result<Var> {
    if xs.is_empty() {
        return Err(Error::Contract(
            "bigru_encode on a zero-length sequence".into(),
        ));
    }
    let x_mat = tape.concat_cols(xs)?;
    bigru_from_inputs(tape, fwd, bwd, x_mat, x_mat)
}

// The top half of H holds the forward states, the bottom half the backward
// states; column t is then exactly [h_t→ ; h_t←].
fn bigru_from_inputs<S: Scalar>(
    tape: &mut Tape<S>,
    fwd: &GruDirVars,
    bwd: &GruDirVars,
    x_fwd: Var,
    x_bwd: Var,
) -> Result<Var> {
    let fwd_states = tape.gru_sequence(fwd, x_fwd, false)?;
    let bwd_states = tape.gru_sequence(bwd, x_bwd, true)?;
    tape.concat_rows(&[fwd_states, bwd_states])
}

/// A = row_softmax(W₂ tanh(W₁ H)) with positions ≥ `length` masked out.
pub fn self_attention<S: Scalar>(
    tape: &mut Tape<S>,
    w1: Var,
    w2: Var,
    h: Var,
    length: usize,
) -> Result<Var> {
    let t_len = tape.value(h).cols();
    if length == 0 || length > t_len {
        return Err(Error::Contract(format!(
            "attention length {length} invalid for {t_len} columns"
        )));
    }
    let proj = tape.matmul(w1, h)?;
    let act = tape.tanh(proj);
    let logits = tape.matmul(w2, act)?;
    let k = tape.value(logits).rows();
    let mask = (length < t_len).then(|| {
        let mut m = vec![true; k * t_len];
        for i in 0..k {
            for j in length..t_len {
                m[i * t_len + j] = false;
            }
        }
        m
    });
    tape.row_softmax(logits, mask)
}

/// Φ = A Hᵀ. Rejects attention rows that are not convex weights.
pub fn attend_pool<S: Scalar>(tape: &mut Tape<S>, a: Var, h: Var) -> Result<Var> {
    let at = tape.value(a);
    let ht = tape.value(h);
    if at.cols() != ht.cols() {
        return Err(Error::ShapeMismatch {
            op: "attend_pool",
            left: at.shape().to_vec(),
            right: ht.shape().to_vec(),
        });
    }
    for i in 0..at.rows() {
        let sum: f64 = at.row(i).iter().map(|v| v.as_f64()).sum();
        if (sum - 1.0).abs() > 1e-4 {
            return Err(Error::Contract(format!(
                "attention row {i} sums to {sum}, not a probability distribution"
            )));
        }
    }
    let ht_t = tape.transpose(h);
    tape.matmul(a, ht_t)
}

/// Hidden-state matrix H (d×T) for the valid prefix of a feature sequence,
/// with dropout handled per `mode`. The attention-free building block shared
/// by [`encode`] and last-states pooling.
pub fn encode_states<S: Scalar>(
    tape: &mut Tape<S>,
    vars: &EncoderVars,
    cfg: &EncoderConfig,
    features: &Tensor<S>,
    length: usize,
    mode: &mut EncodeMode,
) -> Result<Var> {
    if length == 0 || length > features.rows() {
        return Err(Error::Contract(format!(
            "sequence length {length} invalid for {} feature rows",
            features.rows()
        )));
    }
    if features.cols() != cfg.input_dim {
        return Err(Error::ShapeMismatch {
            op: "encode features",
            left: vec![features.rows(), features.cols()],
            right: vec![length, cfg.input_dim],
        });
    }

    // Valid steps as one input_dim×T constant (column per step). Dropout
    // applies to the GRU input transformations only (the recurrent path is
    // never dropped), one fresh mask per step and direction, drawn in a
    // fixed order: forward masks step by step, then backward.
    let mut x_data = vec![S::zero(); cfg.input_dim * length];
    for t in 0..length {
        for (i, &v) in features.row(t).iter().enumerate() {
            x_data[i * length + t] = v;
        }
    }
    let x = tape.constant(Tensor::new(vec![cfg.input_dim, length], x_data)?);

    let masked = |tape: &mut Tape<S>, rng: &mut ChaCha8Rng| -> Result<Var> {
        let keep = 1.0 - cfg.dropout_rate;
        let mut mask = vec![S::zero(); cfg.input_dim * length];
        for t in 0..length {
            for i in 0..cfg.input_dim {
                mask[i * length + t] = if rng.gen_range(0.0..1.0) < cfg.dropout_rate {
                    S::zero()
                } else {
                    S::from_f64(1.0 / keep)
                };
            }
        }
        let m = tape.constant(Tensor::new(vec![cfg.input_dim, length], mask)?);
        tape.mul(x, m)
    };
    let (x_fwd, x_bwd) = match mode {
        EncodeMode::Train { dropout_rng } if cfg.dropout_rate > 0.0 => {
            let f = masked(tape, dropout_rng)?;
            let b = masked(tape, dropout_rng)?;
            (f, b)
        }
        _ => (x, x),
    };
    bigru_from_inputs(tape, &vars.fwd, &vars.bwd, x_fwd, x_bwd)
}

/// Full encoder: valid steps → biGRU → self-attention → pooled embeddings.
///
/// Returns the tape handles for Φ (K×d) and A (K×T over valid positions).
pub fn encode<S: Scalar>(
    tape: &mut Tape<S>,
    vars: &EncoderVars,
    cfg: &EncoderConfig,
    features: &Tensor<S>,
    length: usize,
    mode: &mut EncodeMode,
) -> Result<(Var, Var)> {
    let h = encode_states(tape, vars, cfg, features, length, mode)?;
    let a = self_attention(tape, vars.attn_w1, vars.attn_w2, h, length)?;
    let phi = attend_pool(tape, a, h)?;
    Ok((phi, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn zero_dir(tape: &mut Tape<f64>, hidden: usize, input: usize) -> GruDirVars {
        let w = || Tensor::<f64>::zeros(vec![hidden, input]);
        let u = || Tensor::<f64>::zeros(vec![hidden, hidden]);
        let b = || Tensor::<f64>::zeros(vec![hidden, 1]);
        GruDirVars {
            w_z: tape.param(w()),
            u_z: tape.param(u()),
            b_z: tape.param(b()),
            w_r: tape.param(w()),
            u_r: tape.param(u()),
            b_r: tape.param(b()),
            w_h: tape.param(w()),
            u_h: tape.param(u()),
            b_h: tape.param(b()),
        }
    }

    #[test]
    fn gru_cell_zero_params_halves_state() {
        let mut tape = Tape::new();
        let dir = zero_dir(&mut tape, 2, 3);
        let x = tape.constant(Tensor::column(&[0.3, -0.2, 1.0]));
        let h_prev = tape.constant(Tensor::column(&[1.0, -1.0]));
        let h = gru_cell(&mut tape, &dir, x, h_prev).unwrap();
        assert_eq!(tape.value(h).data(), &[0.5, -0.5]);
    }

    #[test]
    fn gru_cell_zero_params_zero_state_stays_zero() {
        let mut tape = Tape::new();
        let dir = zero_dir(&mut tape, 2, 3);
        let x = tape.constant(Tensor::column(&[0.3, -0.2, 1.0]));
        let h_prev = tape.constant(Tensor::zeros(vec![2, 1]));
        let h = gru_cell(&mut tape, &dir, x, h_prev).unwrap();
        assert_eq!(tape.value(h).data(), &[0.0, 0.0]);
    }

    #[test]
    fn gru_cell_saturated_update_gate_follows_candidate() {
        let mut tape = Tape::new();
        let mut dir = zero_dir(&mut tape, 2, 3);
        dir.b_z = tape.param(Tensor::column(&[20.0, 20.0]));
        let x = tape.constant(Tensor::column(&[0.3, -0.2, 1.0]));
        let h_prev = tape.constant(Tensor::column(&[0.9, -0.7]));
        let h = gru_cell(&mut tape, &dir, x, h_prev).unwrap();
        for &v in tape.value(h).data() {
            assert!(v.abs() < 1e-6, "expected candidate 0, got {v}");
        }
    }

    fn seeded_encoder(cfg: &EncoderConfig, seed: u64) -> ParamStore<f64> {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        init_encoder_params(&mut store, "enc", cfg, &mut rng).unwrap();
        store
    }

    fn small_cfg() -> EncoderConfig {
        EncoderConfig {
            input_dim: 3,
            d: 4,
            u: 4,
            k: 2,
            dropout_rate: 0.0,
            max_len: 8,
        }
    }

    #[test]
    fn bigru_length_one_has_one_column() {
        let cfg = small_cfg();
        let store = seeded_encoder(&cfg, 1);
        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        let vars = EncoderVars::resolve(&bound, "enc").unwrap();
        let x = tape.constant(Tensor::column(&[1.0, 2.0, 3.0]));
        let h = bigru_encode(&mut tape, &vars.fwd, &vars.bwd, &[x]).unwrap();
        assert_eq!(tape.value(h).shape(), &[4, 1]);
    }

    #[test]
    fn bigru_zero_params_produce_zero_states() {
        let mut tape = Tape::new();
        let fwd = zero_dir(&mut tape, 2, 3);
        let bwd = zero_dir(&mut tape, 2, 3);
        let xs: Vec<Var> = (0..3)
            .map(|t| tape.constant(Tensor::column(&[t as f64, 1.0, -1.0])))
            .collect();
        let h = bigru_encode(&mut tape, &fwd, &bwd, &xs).unwrap();
        assert!(tape.value(h).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bigru_palindrome_symmetry_with_shared_direction_weights() {
        // With both directions sharing weights and a palindromic input,
        // the forward state at step t mirrors the backward state at T+1−t.
        let cfg = small_cfg();
        let store = seeded_encoder(&cfg, 5);
        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        let vars = EncoderVars::resolve(&bound, "enc").unwrap();
        let shared = vars.fwd;
        let xs: Vec<Var> = [[1.0, -0.5, 0.25], [0.0, 2.0, -1.0], [1.0, -0.5, 0.25]]
            .iter()
            .map(|v| tape.constant(Tensor::column(v)))
            .collect();
        let h = bigru_encode(&mut tape, &shared, &shared, &xs).unwrap();
        let hv = tape.value(h);
        let half = cfg.hidden_per_dir();
        for t in 0..3 {
            let mirror = 2 - t;
            for j in 0..half {
                let fwd = hv.at(j, t);
                let bwd = hv.at(half + j, mirror);
                assert!((fwd - bwd).abs() < 1e-12, "t={t} j={j}: {fwd} vs {bwd}");
            }
        }
    }

    #[test]
    fn attention_uniform_when_w2_zero() {
        let mut tape = Tape::new();
        let w1 = tape.param(Tensor::<f64>::zeros(vec![4, 4]));
        let w2 = tape.param(Tensor::<f64>::zeros(vec![2, 4]));
        let h = tape.constant(
            Tensor::new(vec![4, 3], (0..12).map(|v| v as f64 / 7.0).collect()).unwrap(),
        );
        let a = self_attention(&mut tape, w1, w2, h, 3).unwrap();
        for &v in tape.value(a).data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_one_hot_rows_from_saturated_logits() {
        // H = 20·I makes tanh(W₁H) ≈ I; W₂ = 50·I then drives row i to a
        // one-hot at position i.
        let mut tape = Tape::new();
        let w1 = tape.param(Tensor::scaled_identity(3, 1.0));
        let w2 = tape.param(Tensor::scaled_identity(3, 50.0));
        let h = tape.constant(Tensor::scaled_identity(3, 20.0));
        let a = self_attention(&mut tape, w1, w2, h, 3).unwrap();
        let av = tape.value(a);
        for i in 0..3 {
            for j in 0..3 {
                let want: f64 = if i == j { 1.0 } else { 0.0 };
                assert!((av.at(i, j) - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn attention_masks_padded_tail() {
        let mut tape = Tape::new();
        let w1 = tape.param(Tensor::<f64>::zeros(vec![4, 4]));
        let w2 = tape.param(Tensor::<f64>::zeros(vec![2, 4]));
        let h = tape.constant(Tensor::<f64>::zeros(vec![4, 4]));
        let a = self_attention(&mut tape, w1, w2, h, 2).unwrap();
        let av = tape.value(a);
        for i in 0..2 {
            assert_eq!(av.at(i, 2), 0.0);
            assert_eq!(av.at(i, 3), 0.0);
            assert!((av.at(i, 0) - 0.5).abs() < 1e-12);
            assert!((av.at(i, 1) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn attend_pool_unit_selector_picks_column() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::new(vec![1, 2], vec![0.0, 1.0]).unwrap());
        let h = tape.constant(Tensor::new(vec![2, 2], vec![1.0, 5.0, 2.0, 6.0]).unwrap());
        let phi = attend_pool(&mut tape, a, h).unwrap();
        assert_eq!(tape.value(phi).data(), &[5.0, 6.0]);
    }

    #[test]
    fn attend_pool_uniform_row_is_column_mean() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::new(vec![1, 2], vec![0.5, 0.5]).unwrap());
        let h = tape.constant(Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let phi = attend_pool(&mut tape, a, h).unwrap();
        assert_eq!(tape.value(phi).data(), &[0.5, 0.5]);
    }

    #[test]
    fn attend_pool_rejects_zero_row() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::<f64>::zeros(vec![1, 2]));
        let h = tape.constant(Tensor::<f64>::zeros(vec![2, 2]));
        assert!(matches!(
            attend_pool(&mut tape, a, h).unwrap_err(),
            Error::Contract(_)
        ));
    }

    fn encode_once(
        cfg: &EncoderConfig,
        store: &ParamStore<f64>,
        features: &Tensor<f64>,
        length: usize,
        train_seed: Option<u64>,
    ) -> EmbeddingSet<f64> {
        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        let vars = EncoderVars::resolve(&bound, "enc").unwrap();
        let (phi, a) = match train_seed {
            Some(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut mode = EncodeMode::Train {
                    dropout_rng: &mut rng,
                };
                encode(&mut tape, &vars, cfg, features, length, &mut mode).unwrap()
            }
            None => encode(
                &mut tape,
                &vars,
                cfg,
                features,
                length,
                &mut EncodeMode::Eval,
            )
            .unwrap(),
        };
        EmbeddingSet {
            phi: tape.value(phi).clone(),
            attention: tape.value(a).clone(),
        }
    }

    fn ramp(rows: usize, cols: usize) -> Tensor<f64> {
        Tensor::new(
            vec![rows, cols],
            (0..rows * cols).map(|v| (v as f64) * 0.1 - 0.7).collect(),
        )
        .unwrap()
    }

    #[test]
    fn encode_without_dropout_matches_eval() {
        let cfg = small_cfg();
        let store = seeded_encoder(&cfg, 11);
        let features = ramp(4, 3);
        let train = encode_once(&cfg, &store, &features, 4, Some(3));
        let eval = encode_once(&cfg, &store, &features, 4, None);
        assert_eq!(train, eval);
    }

    #[test]
    fn encode_dropout_is_deterministic_under_seed() {
        let mut cfg = small_cfg();
        cfg.dropout_rate = 0.5;
        let store = seeded_encoder(&cfg, 11);
        let features = ramp(4, 3);
        let a = encode_once(&cfg, &store, &features, 4, Some(9));
        let b = encode_once(&cfg, &store, &features, 4, Some(9));
        assert_eq!(a, b);
        let c = encode_once(&cfg, &store, &features, 4, Some(10));
        assert_ne!(a, c);
    }

    #[test]
    fn encode_is_invariant_to_trailing_padding() {
        let cfg = small_cfg();
        let store = seeded_encoder(&cfg, 11);
        let mut padded = Tensor::<f64>::zeros(vec![8, 3]);
        let features = ramp(3, 3);
        padded.data_mut()[..9].copy_from_slice(features.data());
        let short = encode_once(&cfg, &store, &features, 3, None);
        let long = encode_once(&cfg, &store, &padded, 3, None);
        assert_eq!(short, long);
    }

    #[test]
    fn encode_k1_is_single_attention_pooling() {
        let mut cfg = small_cfg();
        cfg.k = 1;
        let store = seeded_encoder(&cfg, 11);
        let out = encode_once(&cfg, &store, &ramp(4, 3), 4, None);
        assert_eq!(out.phi.shape(), &[1, 4]);
        assert_eq!(out.attention.shape(), &[1, 4]);
        let sum: f64 = out.attention.data().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn embeddings_lie_in_convex_hull_of_hidden_states() {
        let cfg = small_cfg();
        let store = seeded_encoder(&cfg, 13);
        let features = ramp(5, 3);
        // reconstruct H explicitly to compare hull bounds per coordinate
        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        let vars = EncoderVars::resolve(&bound, "enc").unwrap();
        let xs: Vec<Var> = (0..5)
            .map(|t| tape.constant(Tensor::column(features.row(t))))
            .collect();
        let h = bigru_encode(&mut tape, &vars.fwd, &vars.bwd, &xs).unwrap();
        let a = self_attention(&mut tape, vars.attn_w1, vars.attn_w2, h, 5).unwrap();
        let phi = attend_pool(&mut tape, a, h).unwrap();
        let (hv, pv) = (tape.value(h).clone(), tape.value(phi).clone());
        for i in 0..cfg.k {
            for j in 0..cfg.d {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for t in 0..5 {
                    lo = lo.min(hv.at(j, t));
                    hi = hi.max(hv.at(j, t));
                }
                let v = pv.at(i, j);
                assert!(v >= lo - 1e-6 && v <= hi + 1e-6);
            }
        }
    }

    #[test]
    fn encode_gradients_pass_finite_difference_check() {
        use crate::numerics::{check_gradients, Gradients};
        let cfg = small_cfg();
        let store = seeded_encoder(&cfg, 17);
        let features = ramp(3, 3);
        let build = |params: &ParamStore<f64>| -> crate::error::Result<(f64, Gradients<f64>)> {
            let mut tape = Tape::new();
            let bound = params.bind(&mut tape);
            let vars = EncoderVars::resolve(&bound, "enc")?;
            let (phi, _) = encode(&mut tape, &vars, &cfg, &features, 3, &mut EncodeMode::Eval)?;
            let loss = tape.dot(phi, phi)?;
            let grads = tape.backward(loss)?;
            Ok((tape.value(loss).item(), bound.collect(&tape, &grads)))
        };
        let report = check_gradients(build, &store, 1e-5, 23).unwrap();
        assert!(report.pass, "{}", report.summary());
    }
}
