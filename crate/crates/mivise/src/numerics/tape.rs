//! Recording tape for reverse-mode gradient evaluation.
//!
//! Forward builders push one node per operation; [`Tape::backward`] replays
//! the tape in reverse and accumulates exact gradients for every reachable
//! leaf. Tensors on the tape are immutable once produced.

use super::tensor::{Tensor, COSINE_NORM_EPS};
use super::Scalar;
use crate::error::{Error, Result};

/// Handle to a value on a tape. Only meaningful for the tape that issued it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Tape handles for the nine tensors of one GRU direction.
#[derive(Clone, Copy)]
pub struct GruVars {
    pub w_z: Var,
    pub u_z: Var,
    pub b_z: Var,
    pub w_r: Var,
    pub u_r: Var,
    pub b_r: Var,
    pub w_h: Var,
    pub u_h: Var,
    pub b_h: Var,
}

// Forward gate activations cached for the recurrence backward pass.
struct GruCache<S> {
    z: Tensor<S>,
    r: Tensor<S>,
    candidate: Tensor<S>,
}

enum Op<S> {
    Leaf { requires_grad: bool },
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Scale(usize, S),
    AddConst(usize, S),
    Tanh(usize),
    Sigmoid(usize),
    Sqrt(usize),
    Relu(usize),
    Dot(usize, usize),
    Sum(usize),
    Transpose(usize),
    RowSoftmax { input: usize, mask: Option<Vec<bool>> },
    ConcatRows(Vec<usize>),
    ConcatCols(Vec<usize>),
    SliceRows { input: usize, start: usize, end: usize },
    SliceCols { input: usize, start: usize, end: usize },
    /// Max over scalar nodes; ties route the gradient to the first argmax.
    MaxOf(Vec<usize>),
    /// One full GRU direction pass over an input_dim×T matrix, producing the
    /// hidden×T state sequence in time order. Backward is handwritten
    /// backpropagation through time over the cached gate activations.
    GruSequence {
        x: usize,
        weights: [usize; 9],
        reverse: bool,
        cache: Box<GruCache<S>>,
    },
}

struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
}

#[derive(Default)]
pub struct Tape<S> {
    nodes: Vec<Node<S>>,
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Insert a trainable leaf.
    pub fn param(&mut self, value: Tensor<S>) -> Var {
        self.push(value, Op::Leaf { requires_grad: true })
    }

    /// Insert a constant leaf (inputs, masks); receives no gradient.
    pub fn constant(&mut self, value: Tensor<S>) -> Var {
        self.push(value, Op::Leaf { requires_grad: false })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul(a.0, b.0)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.elementwise(a, b, "add", |x, y| x + y)?;
        Ok(self.push(value, Op::Add(a.0, b.0)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.elementwise(a, b, "sub", |x, y| x - y)?;
        Ok(self.push(value, Op::Sub(a.0, b.0)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.elementwise(a, b, "mul", |x, y| x * y)?;
        Ok(self.push(value, Op::Mul(a.0, b.0)))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.elementwise(a, b, "div", |x, y| x / y)?;
        Ok(self.push(value, Op::Div(a.0, b.0)))
    }

    fn elementwise(
        &self,
        a: Var,
        b: Var,
        op: &'static str,
        f: impl Fn(S, S) -> S,
    ) -> Result<Tensor<S>> {
        let (ta, tb) = (self.value(a), self.value(b));
        ta.same_shape(tb, op)?;
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    pub fn scale(&mut self, a: Var, c: S) -> Var {
        let value = self.value(a).map(|x| x * c);
        self.push(value, Op::Scale(a.0, c))
    }

    pub fn add_const(&mut self, a: Var, c: S) -> Var {
        let value = self.value(a).map(|x| x + c);
        self.push(value, Op::AddConst(a.0, c))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).tanh();
        self.push(value, Op::Tanh(a.0))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).sigmoid();
        self.push(value, Op::Sigmoid(a.0))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.sqrt());
        self.push(value, Op::Sqrt(a.0))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(S::zero()));
        self.push(value, Op::Relu(a.0))
    }

    /// Flattened dot product of two same-shaped tensors; yields a scalar node.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).dot(self.value(b))?;
        Ok(self.push(Tensor::scalar(v), Op::Dot(a.0, b.0)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = self
            .value(a)
            .data()
            .iter()
            .fold(S::zero(), |acc, &x| acc + x);
        self.push(Tensor::scalar(v), Op::Sum(a.0))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        self.push(value, Op::Transpose(a.0))
    }

    pub fn row_softmax(&mut self, a: Var, mask: Option<Vec<bool>>) -> Result<Var> {
        let value = self.value(a).row_softmax(mask.as_deref())?;
        Ok(self.push(value, Op::RowSoftmax { input: a.0, mask }))
    }

    /// Stack 2-D blocks with equal column counts on top of each other.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        debug_assert!(!parts.is_empty());
        let cols = self.value(parts[0]).cols();
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.cols() != cols {
                return Err(Error::ShapeMismatch {
                    op: "concat_rows",
                    left: self.value(parts[0]).shape().to_vec(),
                    right: t.shape().to_vec(),
                });
            }
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        let value = Tensor::new(vec![rows, cols], data)?;
        Ok(self.push(value, Op::ConcatRows(parts.iter().map(|v| v.0).collect())))
    }

    /// Stack 2-D blocks with equal row counts side by side.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        debug_assert!(!parts.is_empty());
        let rows = self.value(parts[0]).rows();
        let mut cols = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rows() != rows {
                return Err(Error::ShapeMismatch {
                    op: "concat_cols",
                    left: self.value(parts[0]).shape().to_vec(),
                    right: t.shape().to_vec(),
                });
            }
            cols += t.cols();
        }
        let mut data = vec![S::zero(); rows * cols];
        let mut offset = 0;
        for &p in parts {
            let t = self.value(p);
            let c = t.cols();
            for i in 0..rows {
                data[i * cols + offset..i * cols + offset + c].copy_from_slice(t.row(i));
            }
            offset += c;
        }
        let value = Tensor::new(vec![rows, cols], data)?;
        Ok(self.push(value, Op::ConcatCols(parts.iter().map(|v| v.0).collect())))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let t = self.value(a);
        if start >= end || end > t.rows() {
            return Err(Error::Contract(format!(
                "slice_rows {start}..{end} out of bounds for {:?}",
                t.shape()
            )));
        }
        let c = t.cols();
        let value = Tensor::new(
            vec![end - start, c],
            t.data()[start * c..end * c].to_vec(),
        )?;
        Ok(self.push(value, Op::SliceRows { input: a.0, start, end }))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let t = self.value(a);
        if start >= end || end > t.cols() {
            return Err(Error::Contract(format!(
                "slice_cols {start}..{end} out of bounds for {:?}",
                t.shape()
            )));
        }
        let (r, c) = (t.rows(), t.cols());
        let mut data = Vec::with_capacity(r * (end - start));
        for i in 0..r {
            data.extend_from_slice(&t.data()[i * c + start..i * c + end]);
        }
        let value = Tensor::new(vec![r, end - start], data)?;
        Ok(self.push(value, Op::SliceCols { input: a.0, start, end }))
    }

    /// Maximum over scalar nodes. Ties resolve by value; the gradient is
    /// routed to the first argmax in the given order.
    pub fn max_of(&mut self, candidates: &[Var]) -> Result<Var> {
        if candidates.is_empty() {
            return Err(Error::Contract("max_of on an empty set".into()));
        }
        let mut best = S::neg_infinity();
        for &c in candidates {
            let t = self.value(c);
            if !t.is_scalar() {
                return Err(Error::Contract(format!(
                    "max_of expects scalar nodes, got {:?}",
                    t.shape()
                )));
            }
            best = best.max(t.item());
        }
        Ok(self.push(
            Tensor::scalar(best),
            Op::MaxOf(candidates.iter().map(|v| v.0).collect()),
        ))
    }

    /// Run one GRU direction over all columns of `x_mat` (input_dim×T).
    ///
    /// Per step: z = σ(W_z x + U_z h + b_z), r = σ(W_r x + U_r h + b_r),
    /// h̃ = tanh(W_h x + U_h (r⊙h) + b_h), h' = (1−z)⊙h + z⊙h̃, starting
    /// from h = 0. `reverse` runs t = T…1; the output column t always holds
    /// the state produced at time t.
    pub fn gru_sequence(&mut self, p: &GruVars, x_mat: Var, reverse: bool) -> Result<Var> {
        let xv = self.value(x_mat);
        let (input_dim, t_len) = (xv.rows(), xv.cols());
        let hidden = self.value(p.b_z).rows();
        for (w, u, b) in [
            (p.w_z, p.u_z, p.b_z),
            (p.w_r, p.u_r, p.b_r),
            (p.w_h, p.u_h, p.b_h),
        ] {
            let (wt, ut, bt) = (self.value(w), self.value(u), self.value(b));
            if wt.shape() != [hidden, input_dim]
                || ut.shape() != [hidden, hidden]
                || bt.shape() != [hidden, 1]
            {
                return Err(Error::ShapeMismatch {
                    op: "gru_sequence",
                    left: wt.shape().to_vec(),
                    right: vec![hidden, input_dim],
                });
            }
        }

        let x = self.value(x_mat).clone();
        let get = |v: Var| self.value(v).clone();
        let (w_z, u_z, b_z) = (get(p.w_z), get(p.u_z), get(p.b_z));
        let (w_r, u_r, b_r) = (get(p.w_r), get(p.u_r), get(p.b_r));
        let (w_h, u_h, b_h) = (get(p.w_h), get(p.u_h), get(p.b_h));

        let mut z_all = vec![S::zero(); hidden * t_len];
        let mut r_all = vec![S::zero(); hidden * t_len];
        let mut c_all = vec![S::zero(); hidden * t_len];
        let mut states = vec![S::zero(); hidden * t_len];

        let mut h = vec![S::zero(); hidden];
        let mut x_t = vec![S::zero(); input_dim];
        let mut z = vec![S::zero(); hidden];
        let mut r = vec![S::zero(); hidden];
        let mut c = vec![S::zero(); hidden];
        let mut rh = vec![S::zero(); hidden];
        let order: Vec<usize> = if reverse {
            (0..t_len).rev().collect()
        } else {
            (0..t_len).collect()
        };
        for &t in &order {
            read_column(&x, t, &mut x_t);
            gate_pre(&w_z, &u_z, &b_z, &x_t, &h, &mut z);
            sigmoid_inplace(&mut z);
            gate_pre(&w_r, &u_r, &b_r, &x_t, &h, &mut r);
            sigmoid_inplace(&mut r);
            for j in 0..hidden {
                rh[j] = r[j] * h[j];
            }
            gate_pre(&w_h, &u_h, &b_h, &x_t, &rh, &mut c);
            for v in c.iter_mut() {
                *v = v.tanh();
            }
            for j in 0..hidden {
                h[j] = (S::one() - z[j]) * h[j] + z[j] * c[j];
            }
            write_column(&mut z_all, hidden, t_len, t, &z);
            write_column(&mut r_all, hidden, t_len, t, &r);
            write_column(&mut c_all, hidden, t_len, t, &c);
            write_column(&mut states, hidden, t_len, t, &h);
        }

        let value = Tensor::new(vec![hidden, t_len], states)?;
        let cache = Box::new(GruCache {
            z: Tensor::new(vec![hidden, t_len], z_all)?,
            r: Tensor::new(vec![hidden, t_len], r_all)?,
            candidate: Tensor::new(vec![hidden, t_len], c_all)?,
        });
        Ok(self.push(
            value,
            Op::GruSequence {
                x: x_mat.0,
                weights: [
                    p.w_z.0, p.u_z.0, p.b_z.0, p.w_r.0, p.u_r.0, p.b_r.0, p.w_h.0, p.u_h.0,
                    p.b_h.0,
                ],
                reverse,
                cache,
            },
        ))
    }

    // ── composites ──────────────────────────────────────────────────

    /// Cosine similarity of two same-shaped tensors as flat vectors.
    ///
    /// Checks the norms of both arguments at build time; a norm below the
    /// epsilon guard is a degenerate-vector error.
    pub fn cosine(&mut self, u: Var, v: Var) -> Result<Var> {
        let eps = S::from_f64(COSINE_NORM_EPS);
        for (var, name) in [(u, "left"), (v, "right")] {
            let norm = self.value(var).frobenius_norm();
            if norm <= eps {
                return Err(Error::DegenerateVector {
                    what: format!("cosine {name} argument"),
                    norm: norm.as_f64(),
                    eps: COSINE_NORM_EPS,
                });
            }
        }
        let uv = self.dot(u, v)?;
        let uu = self.dot(u, u)?;
        let vv = self.dot(v, v)?;
        let nu = self.sqrt(uu);
        let nv = self.sqrt(vv);
        let denom = self.mul(nu, nv)?;
        self.div(uv, denom)
    }

    /// Frobenius norm of a tensor as a scalar node.
    pub fn frobenius(&mut self, a: Var) -> Result<Var> {
        let sq = self.dot(a, a)?;
        Ok(self.sqrt(sq))
    }

    /// Reverse-mode gradients of a scalar node w.r.t. every tape node.
    ///
    /// Leaves that do not require gradients and nodes unreachable from `loss`
    /// end up with `None`.
    pub fn backward(&self, loss: Var) -> Result<TapeGradients<S>> {
        let t = self.value(loss);
        if !t.is_scalar() {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                t.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor<S>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(S::one()));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf { requires_grad } => {
                    if *requires_grad {
                        grads[idx] = Some(g);
                    }
                    continue;
                }
                Op::MatMul(a, b) => {
                    // dA = G Bᵀ, dB = Aᵀ G; the matrix×column case is written
                    // out directly (outer product and transposed matvec) to
                    // avoid materializing transposes in the recurrence hot path.
                    let ta = &self.nodes[*a].value;
                    let tb = &self.nodes[*b].value;
                    if tb.cols() == 1 {
                        let (m, k) = (ta.rows(), ta.cols());
                        let mut da = vec![S::zero(); m * k];
                        for i in 0..m {
                            let gi = g.data()[i];
                            let row = &mut da[i * k..(i + 1) * k];
                            for (o, &bv) in row.iter_mut().zip(tb.data()) {
                                *o = gi * bv;
                            }
                        }
                        let mut db = vec![S::zero(); k];
                        for i in 0..m {
                            let gi = g.data()[i];
                            let a_row = &ta.data()[i * k..(i + 1) * k];
                            for (o, &av) in db.iter_mut().zip(a_row) {
                                *o = *o + gi * av;
                            }
                        }
                        accumulate(&mut grads, *a, Tensor::new(vec![m, k], da)?);
                        accumulate(&mut grads, *b, Tensor::new(vec![k, 1], db)?);
                    } else {
                        let da = g.matmul(&tb.transpose())?;
                        let db = ta.transpose().matmul(&g)?;
                        accumulate(&mut grads, *a, da);
                        accumulate(&mut grads, *b, db);
                    }
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.map(|x| -x));
                }
                Op::Mul(a, b) => {
                    let da = zip_map(&g, &self.nodes[*b].value, |gi, bi| gi * bi);
                    let db = zip_map(&g, &self.nodes[*a].value, |gi, ai| gi * ai);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Div(a, b) => {
                    let tb = &self.nodes[*b].value;
                    let ta = &self.nodes[*a].value;
                    let da = zip_map(&g, tb, |gi, bi| gi / bi);
                    let db_data: Vec<S> = g
                        .data()
                        .iter()
                        .zip(ta.data())
                        .zip(tb.data())
                        .map(|((&gi, &ai), &bi)| -gi * ai / (bi * bi))
                        .collect();
                    accumulate(&mut grads, *a, da);
                    accumulate(
                        &mut grads,
                        *b,
                        Tensor::new(tb.shape().to_vec(), db_data)?,
                    );
                }
                Op::Scale(a, c) => {
                    accumulate(&mut grads, *a, g.map(|x| x * *c));
                }
                Op::AddConst(a, _) => {
                    accumulate(&mut grads, *a, g);
                }
                Op::Tanh(a) => {
                    let da = zip_map(&g, &node.value, |gi, yi| gi * (S::one() - yi * yi));
                    accumulate(&mut grads, *a, da);
                }
                Op::Sigmoid(a) => {
                    let da = zip_map(&g, &node.value, |gi, yi| gi * yi * (S::one() - yi));
                    accumulate(&mut grads, *a, da);
                }
                Op::Sqrt(a) => {
                    // Subgradient 0 where the forward value is exactly 0.
                    let two = S::from_f64(2.0);
                    let da = zip_map(&g, &node.value, |gi, yi| {
                        if yi == S::zero() {
                            S::zero()
                        } else {
                            gi / (two * yi)
                        }
                    });
                    accumulate(&mut grads, *a, da);
                }
                Op::Relu(a) => {
                    let da = zip_map(&g, &self.nodes[*a].value, |gi, xi| {
                        if xi > S::zero() {
                            gi
                        } else {
                            S::zero()
                        }
                    });
                    accumulate(&mut grads, *a, da);
                }
                Op::Dot(a, b) => {
                    let gv = g.item();
                    accumulate(&mut grads, *a, self.nodes[*b].value.map(|x| x * gv));
                    accumulate(&mut grads, *b, self.nodes[*a].value.map(|x| x * gv));
                }
                Op::Sum(a) => {
                    let gv = g.item();
                    let ta = &self.nodes[*a].value;
                    accumulate(
                        &mut grads,
                        *a,
                        Tensor::new(ta.shape().to_vec(), vec![gv; ta.len()])?,
                    );
                }
                Op::Transpose(a) => {
                    accumulate(&mut grads, *a, g.transpose());
                }
                Op::RowSoftmax { input, mask } => {
                    // Per row: dz_j = y_j (g_j − Σ_k g_k y_k) over unmasked k.
                    let y = &node.value;
                    let (r, c) = (y.rows(), y.cols());
                    let live =
                        |i: usize, j: usize| mask.as_ref().map_or(true, |m| m[i * c + j]);
                    let mut dz = vec![S::zero(); r * c];
                    for i in 0..r {
                        let mut inner = S::zero();
                        for j in 0..c {
                            if live(i, j) {
                                inner = inner + g.at(i, j) * y.at(i, j);
                            }
                        }
                        for j in 0..c {
                            if live(i, j) {
                                dz[i * c + j] = y.at(i, j) * (g.at(i, j) - inner);
                            }
                        }
                    }
                    accumulate(&mut grads, *input, Tensor::new(vec![r, c], dz)?);
                }
                Op::ConcatRows(parts) => {
                    let mut row = 0;
                    for &p in parts {
                        let t = &self.nodes[p].value;
                        let c = t.cols();
                        let part = Tensor::new(
                            t.shape().to_vec(),
                            g.data()[row * c..(row + t.rows()) * c].to_vec(),
                        )?;
                        accumulate(&mut grads, p, part);
                        row += t.rows();
                    }
                }
                Op::ConcatCols(parts) => {
                    let rows = node.value.rows();
                    let total = node.value.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let t = &self.nodes[p].value;
                        let c = t.cols();
                        let mut data = Vec::with_capacity(rows * c);
                        for i in 0..rows {
                            data.extend_from_slice(
                                &g.data()[i * total + offset..i * total + offset + c],
                            );
                        }
                        accumulate(&mut grads, p, Tensor::new(t.shape().to_vec(), data)?);
                        offset += c;
                    }
                }
                Op::SliceRows { input, start, end } => {
                    let t = &self.nodes[*input].value;
                    let c = t.cols();
                    let mut data = vec![S::zero(); t.len()];
                    data[start * c..end * c].copy_from_slice(g.data());
                    accumulate(&mut grads, *input, Tensor::new(t.shape().to_vec(), data)?);
                }
                Op::SliceCols { input, start, end } => {
                    let t = &self.nodes[*input].value;
                    let (r, c) = (t.rows(), t.cols());
                    let w = end - start;
                    let mut data = vec![S::zero(); t.len()];
                    for i in 0..r {
                        data[i * c + start..i * c + end]
                            .copy_from_slice(&g.data()[i * w..(i + 1) * w]);
                    }
                    accumulate(&mut grads, *input, Tensor::new(t.shape().to_vec(), data)?);
                }
                Op::MaxOf(parts) => {
                    let best = node.value.item();
                    let winner = parts
                        .iter()
                        .position(|&p| self.nodes[p].value.item() == best)
                        .expect("max_of winner present");
                    accumulate(&mut grads, parts[winner], g);
                }
                Op::GruSequence {
                    x,
                    weights,
                    reverse,
                    cache,
                } => {
                    let x = *x;
                    let [w_z, u_z, b_z, w_r, u_r, b_r, w_h, u_h, b_h] = *weights;
                    let xv = &self.nodes[x].value;
                    let states = &node.value;
                    let (hidden, t_len) = (states.rows(), states.cols());
                    let input_dim = xv.rows();

                    let wzv = &self.nodes[w_z].value;
                    let uzv = &self.nodes[u_z].value;
                    let wrv = &self.nodes[w_r].value;
                    let urv = &self.nodes[u_r].value;
                    let whv = &self.nodes[w_h].value;
                    let uhv = &self.nodes[u_h].value;

                    let mut d_wz = vec![S::zero(); hidden * input_dim];
                    let mut d_uz = vec![S::zero(); hidden * hidden];
                    let mut d_bz = vec![S::zero(); hidden];
                    let mut d_wr = vec![S::zero(); hidden * input_dim];
                    let mut d_ur = vec![S::zero(); hidden * hidden];
                    let mut d_br = vec![S::zero(); hidden];
                    let mut d_wh = vec![S::zero(); hidden * input_dim];
                    let mut d_uh = vec![S::zero(); hidden * hidden];
                    let mut d_bh = vec![S::zero(); hidden];
                    let mut d_x = vec![S::zero(); input_dim * t_len];

                    let order: Vec<usize> = if *reverse {
                        (0..t_len).rev().collect()
                    } else {
                        (0..t_len).collect()
                    };
                    let mut carry = vec![S::zero(); hidden];
                    let mut h_prev = vec![S::zero(); hidden];
                    let mut x_t = vec![S::zero(); input_dim];
                    let mut z = vec![S::zero(); hidden];
                    let mut r = vec![S::zero(); hidden];
                    let mut c = vec![S::zero(); hidden];
                    let mut dh = vec![S::zero(); hidden];
                    let mut dz_pre = vec![S::zero(); hidden];
                    let mut dr_pre = vec![S::zero(); hidden];
                    let mut dc_pre = vec![S::zero(); hidden];
                    let mut drh = vec![S::zero(); hidden];
                    let mut rh = vec![S::zero(); hidden];

                    for pos in (0..order.len()).rev() {
                        let t = order[pos];
                        read_column(xv, t, &mut x_t);
                        read_column(&cache.z, t, &mut z);
                        read_column(&cache.r, t, &mut r);
                        read_column(&cache.candidate, t, &mut c);
                        if pos == 0 {
                            h_prev.iter_mut().for_each(|v| *v = S::zero());
                        } else {
                            read_column(states, order[pos - 1], &mut h_prev);
                        }
                        // dh = upstream gradient at this step plus the carry
                        for j in 0..hidden {
                            dh[j] = g.at(j, t) + carry[j];
                        }
                        // candidate branch: h = (1−z)h_prev + z·c
                        for j in 0..hidden {
                            let dc = dh[j] * z[j];
                            dc_pre[j] = dc * (S::one() - c[j] * c[j]);
                            let dz = dh[j] * (c[j] - h_prev[j]);
                            dz_pre[j] = dz * z[j] * (S::one() - z[j]);
                            rh[j] = r[j] * h_prev[j];
                        }
                        // drh = U_hᵀ dc_pre, then the reset-gate branch
                        drh.iter_mut().for_each(|v| *v = S::zero());
                        matvec_t_acc(uhv, &dc_pre, &mut drh);
                        for j in 0..hidden {
                            let dr = drh[j] * h_prev[j];
                            dr_pre[j] = dr * r[j] * (S::one() - r[j]);
                        }
                        // parameter gradients
                        outer_acc(&mut d_wz, &dz_pre, &x_t);
                        outer_acc(&mut d_uz, &dz_pre, &h_prev);
                        axpy(&mut d_bz, S::one(), &dz_pre);
                        outer_acc(&mut d_wr, &dr_pre, &x_t);
                        outer_acc(&mut d_ur, &dr_pre, &h_prev);
                        axpy(&mut d_br, S::one(), &dr_pre);
                        outer_acc(&mut d_wh, &dc_pre, &x_t);
                        outer_acc(&mut d_uh, &dc_pre, &rh);
                        axpy(&mut d_bh, S::one(), &dc_pre);
                        // input gradient dx_t = W_zᵀ dz_pre + W_rᵀ dr_pre + W_hᵀ dc_pre
                        let mut dx_t = vec![S::zero(); input_dim];
                        matvec_t_acc(wzv, &dz_pre, &mut dx_t);
                        matvec_t_acc(wrv, &dr_pre, &mut dx_t);
                        matvec_t_acc(whv, &dc_pre, &mut dx_t);
                        for (j, &v) in dx_t.iter().enumerate() {
                            d_x[j * t_len + t] = d_x[j * t_len + t] + v;
                        }
                        // carry to the previous step:
                        // dh_prev = dh⊙(1−z) + drh⊙r + U_zᵀ dz_pre + U_rᵀ dr_pre
                        for j in 0..hidden {
                            carry[j] = dh[j] * (S::one() - z[j]) + drh[j] * r[j];
                        }
                        matvec_t_acc(uzv, &dz_pre, &mut carry);
                        matvec_t_acc(urv, &dr_pre, &mut carry);
                    }

                    accumulate(&mut grads, x, Tensor::new(vec![input_dim, t_len], d_x)?);
                    for (idx, data, rows, cols) in [
                        (w_z, d_wz, hidden, input_dim),
                        (u_z, d_uz, hidden, hidden),
                        (b_z, d_bz, hidden, 1),
                        (w_r, d_wr, hidden, input_dim),
                        (u_r, d_ur, hidden, hidden),
                        (b_r, d_br, hidden, 1),
                        (w_h, d_wh, hidden, input_dim),
                        (u_h, d_uh, hidden, hidden),
                        (b_h, d_bh, hidden, 1),
                    ] {
                        accumulate(&mut grads, idx, Tensor::new(vec![rows, cols], data)?);
                    }
                }
            }
        }
        Ok(TapeGradients { grads })
    }
}

/// Gradients indexed by tape node, as produced by [`Tape::backward`].
#[derive(Debug)]
pub struct TapeGradients<S> {
    grads: Vec<Option<Tensor<S>>>,
}

impl<S: Scalar> TapeGradients<S> {
    /// Gradient of the loss w.r.t. `v`, or a zero tensor if unreachable.
    pub fn of(&self, v: Var, tape: &Tape<S>) -> Tensor<S> {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(tape.value(v).shape().to_vec()),
        }
    }
}

fn accumulate<S: Scalar>(grads: &mut [Option<Tensor<S>>], idx: usize, g: Tensor<S>) {
    match &mut grads[idx] {
        Some(acc) => {
            for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                *a = *a + *b;
            }
        }
        slot => *slot = Some(g),
    }
}

fn read_column<S: Scalar>(m: &Tensor<S>, t: usize, out: &mut [S]) {
    let cols = m.cols();
    for (j, o) in out.iter_mut().enumerate() {
        *o = m.data()[j * cols + t];
    }
}

fn write_column<S: Scalar>(data: &mut [S], _rows: usize, cols: usize, t: usize, col: &[S]) {
    for (j, &v) in col.iter().enumerate() {
        data[j * cols + t] = v;
    }
}

// out = W x + U h + b, one contiguous dot per row
fn gate_pre<S: Scalar>(
    w: &Tensor<S>,
    u: &Tensor<S>,
    b: &Tensor<S>,
    x: &[S],
    h: &[S],
    out: &mut [S],
) {
    for (j, o) in out.iter_mut().enumerate() {
        *o = super::tensor::dot_slices(w.row(j), x)
            + super::tensor::dot_slices(u.row(j), h)
            + b.data()[j];
    }
}

fn sigmoid_inplace<S: Scalar>(v: &mut [S]) {
    for x in v.iter_mut() {
        *x = S::one() / (S::one() + (-*x).exp());
    }
}

// out += Aᵀ x, accumulated row-wise so every access is contiguous
fn matvec_t_acc<S: Scalar>(a: &Tensor<S>, x: &[S], out: &mut [S]) {
    let cols = a.cols();
    for (i, &xi) in x.iter().enumerate() {
        let row = &a.data()[i * cols..(i + 1) * cols];
        for (o, &av) in out.iter_mut().zip(row) {
            *o = *o + xi * av;
        }
    }
}

// out += g xᵀ for row-major out of shape (g.len() × x.len())
fn outer_acc<S: Scalar>(out: &mut [S], g: &[S], x: &[S]) {
    let cols = x.len();
    for (i, &gi) in g.iter().enumerate() {
        let row = &mut out[i * cols..(i + 1) * cols];
        for (o, &xv) in row.iter_mut().zip(x) {
            *o = *o + gi * xv;
        }
    }
}

fn axpy<S: Scalar>(out: &mut [S], a: S, x: &[S]) {
    for (o, &xv) in out.iter_mut().zip(x) {
        *o = *o + a * xv;
    }
}

fn zip_map<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>, f: impl Fn(S, S) -> S) -> Tensor<S> {
    debug_assert_eq!(a.shape(), b.shape());
    Tensor::new(
        a.shape().to_vec(),
        a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect(),
    )
    .expect("zip_map shapes verified")
}
