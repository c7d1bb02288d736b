//! Dense row-major tensor values and their pure (non-recorded) operations.

use super::Scalar;
use crate::error::{Error, Result};

/// Norm guard for cosine similarity; a vector this short indicates a
/// collapsed embedding and is reported as an error, not silently zeroed.
pub const COSINE_NORM_EPS: f64 = 1e-8;

/// Dense real-valued array with shape, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<S> {
    shape: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn new(shape: Vec<usize>, data: Vec<S>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) || n != data.len() {
            return Err(Error::Contract(format!(
                "tensor shape {:?} does not hold {} values",
                shape,
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![S::zero(); n],
        }
    }

    pub fn scalar(v: S) -> Self {
        Tensor {
            shape: vec![1, 1],
            data: vec![v],
        }
    }

    /// K-by-K identity scaled by `c`.
    pub fn scaled_identity(k: usize, c: S) -> Self {
        let mut t = Self::zeros(vec![k, k]);
        for i in 0..k {
            t.data[i * k + i] = c;
        }
        t
    }

    /// Column vector (n-by-1) from a slice.
    pub fn column(values: &[S]) -> Self {
        Tensor {
            shape: vec![values.len(), 1],
            data: values.to_vec(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// The single value of a 1-element tensor.
    pub fn item(&self) -> S {
        debug_assert!(self.is_scalar());
        self.data[0]
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        match self.shape.len() {
            1 => 1,
            _ => self.shape[1],
        }
    }

    pub fn at(&self, i: usize, j: usize) -> S {
        self.data[i * self.cols() + j]
    }

    pub fn row(&self, i: usize) -> &[S] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| T::from_f64(v.as_f64())).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Tensor<S> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn same_shape(&self, other: &Tensor<S>, op: &'static str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                op,
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        Ok(())
    }

    /// Standard matrix product; both operands must be 2-D.
    pub fn matmul(&self, other: &Tensor<S>) -> Result<Tensor<S>> {
        if self.shape.len() != 2 || other.shape.len() != 2 || self.shape[1] != other.shape[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let (m, k, n) = (self.shape[0], self.shape[1], other.shape[1]);
        let mut out = vec![S::zero(); m * n];
        if n == 1 {
            // matrix × column: one contiguous dot per output row
            for i in 0..m {
                let a_row = &self.data[i * k..(i + 1) * k];
                out[i] = dot_slices(a_row, &other.data);
            }
        } else {
            // ikj order keeps the inner loop contiguous over both b and out
            for i in 0..m {
                let a_row = &self.data[i * k..(i + 1) * k];
                let o_row = &mut out[i * n..(i + 1) * n];
                for (p, &a_ip) in a_row.iter().enumerate() {
                    let b_row = &other.data[p * n..(p + 1) * n];
                    for (o, &b) in o_row.iter_mut().zip(b_row) {
                        *o = *o + a_ip * b;
                    }
                }
            }
        }
        Tensor::new(vec![m, n], out)
    }

    pub fn transpose(&self) -> Tensor<S> {
        let (r, c) = (self.rows(), self.cols());
        let mut out = vec![S::zero(); r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Tensor {
            shape: vec![c, r],
            data: out,
        }
    }

    /// Row-wise softmax, stabilized by per-row max subtraction.
    ///
    /// Masked entries are excluded before stabilization and come out exactly
    /// zero. A row with no unmasked entry is a degenerate-row error.
    pub fn row_softmax(&self, mask: Option<&[bool]>) -> Result<Tensor<S>> {
        let (r, c) = (self.rows(), self.cols());
        if let Some(m) = mask {
            if m.len() != self.data.len() {
                return Err(Error::Contract(format!(
                    "softmax mask holds {} entries for a {:?} tensor",
                    m.len(),
                    self.shape
                )));
            }
        }
        let live = |i: usize, j: usize| mask.map_or(true, |m| m[i * c + j]);
        let mut out = vec![S::zero(); r * c];
        for i in 0..r {
            let mut row_max = None::<S>;
            for j in 0..c {
                if live(i, j) {
                    let v = self.data[i * c + j];
                    row_max = Some(row_max.map_or(v, |m| m.max(v)));
                }
            }
            let row_max = row_max.ok_or(Error::DegenerateRow { row: i })?;
            let mut denom = S::zero();
            for j in 0..c {
                if live(i, j) {
                    let e = (self.data[i * c + j] - row_max).exp();
                    out[i * c + j] = e;
                    denom = denom + e;
                }
            }
            for j in 0..c {
                if live(i, j) {
                    out[i * c + j] = out[i * c + j] / denom;
                }
            }
        }
        Tensor::new(self.shape.clone(), out)
    }

    pub fn tanh(&self) -> Tensor<S> {
        self.map(|v| v.tanh())
    }

    pub fn sigmoid(&self) -> Tensor<S> {
        self.map(|v| S::one() / (S::one() + (-v).exp()))
    }

    /// Dot product over the flattened entries of two same-shaped tensors.
    pub fn dot(&self, other: &Tensor<S>) -> Result<S> {
        self.same_shape(other, "dot")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(S::zero(), |acc, (&a, &b)| acc + a * b))
    }

    pub fn frobenius_norm(&self) -> S {
        self.data
            .iter()
            .fold(S::zero(), |acc, &v| acc + v * v)
            .sqrt()
    }

    /// L2 norm of a row of a 2-D tensor.
    pub fn row_norm(&self, i: usize) -> S {
        self.row(i)
            .iter()
            .fold(S::zero(), |acc, &v| acc + v * v)
            .sqrt()
    }
}

pub(crate) fn dot_slices<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Cosine similarity between two same-shaped tensors viewed as flat vectors.
///
/// Norms below [`COSINE_NORM_EPS`] are rejected: a collapsed embedding should
/// surface as an error rather than a silent zero.
pub fn cosine<S: Scalar>(u: &Tensor<S>, v: &Tensor<S>) -> Result<S> {
    u.same_shape(v, "cosine")?;
    let nu = u.frobenius_norm();
    let nv = v.frobenius_norm();
    let eps = S::from_f64(COSINE_NORM_EPS);
    for (norm, name) in [(nu, "left"), (nv, "right")] {
        if norm <= eps {
            return Err(Error::DegenerateVector {
                what: format!("cosine {name} argument"),
                norm: norm.as_f64(),
                eps: COSINE_NORM_EPS,
            });
        }
    }
    Ok(u.dot(v)? / (nu * nv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_identity_is_exact() {
        let i2 = Tensor::scaled_identity(2, 1.0);
        let a = t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(i2.matmul(&a).unwrap(), a);
    }

    #[test]
    fn matmul_selector_row() {
        let a = t(&[1, 2], &[1.0, 0.0]);
        let b = t(&[2, 1], &[2.0, 5.0]);
        assert_eq!(a.matmul(&b).unwrap().data(), &[2.0]);
    }

    #[test]
    fn matmul_hand_product() {
        let a = t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let b = t(&[2, 2], &[5.0, 6.0, 7.0, 8.0]);
        assert_eq!(a.matmul(&b).unwrap().data(), &[19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let a = t(&[1, 3], &[1.0; 3]);
        let b = t(&[2, 1], &[1.0; 2]);
        let err = a.matmul(&b).unwrap_err().to_string();
        assert!(err.contains("[1, 3]") && err.contains("[2, 1]"), "{err}");
    }

    #[test]
    fn softmax_symmetry() {
        let s = t(&[1, 3], &[0.0, 0.0, 0.0]).row_softmax(None).unwrap();
        for &v in s.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_direct_evaluation() {
        let s = t(&[1, 2], &[2.0f64.ln(), 0.0]).row_softmax(None).unwrap();
        assert!((s.data()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.data()[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_mask_forces_one_hot() {
        let s = t(&[1, 2], &[5.0, 5.0])
            .row_softmax(Some(&[true, false]))
            .unwrap();
        assert_eq!(s.data(), &[1.0, 0.0]);
    }

    #[test]
    fn softmax_fully_masked_row_errors() {
        let err = t(&[1, 2], &[5.0, 5.0])
            .row_softmax(Some(&[false, false]))
            .unwrap_err();
        assert!(matches!(err, Error::DegenerateRow { row: 0 }));
    }

    #[test]
    fn activations() {
        assert_eq!(t(&[1, 1], &[0.0]).tanh().item(), 0.0);
        assert_eq!(t(&[1, 1], &[0.0]).sigmoid().item(), 0.5);
        assert!((t(&[1, 1], &[1.0]).tanh().item() - 0.761_594_155_955_764_9).abs() < 1e-12);
    }

    #[test]
    fn cosine_examples() {
        let u = t(&[2, 1], &[3.0, 4.0]);
        assert!((cosine(&u, &u).unwrap() - 1.0).abs() < 1e-12);
        let e1 = t(&[2, 1], &[1.0, 0.0]);
        let e2 = t(&[2, 1], &[0.0, 1.0]);
        assert_eq!(cosine(&e1, &e2).unwrap(), 0.0);
        let d = t(&[2, 1], &[1.0, 1.0]);
        assert!((cosine(&d, &e1).unwrap() - 1.0 / 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cosine_rejects_degenerate() {
        let z = t(&[2, 1], &[0.0, 0.0]);
        let u = t(&[2, 1], &[1.0, 0.0]);
        assert!(matches!(
            cosine(&z, &u).unwrap_err(),
            Error::DegenerateVector { .. }
        ));
    }

    #[test]
    fn frobenius_examples() {
        assert_eq!(Tensor::<f64>::zeros(vec![2, 3]).frobenius_norm(), 0.0);
        assert!((Tensor::<f64>::scaled_identity(2, 1.0).frobenius_norm() - 2.0f64.sqrt()).abs() < 1e-15);
        assert_eq!(t(&[1, 2], &[3.0, 4.0]).frobenius_norm(), 5.0);
    }

    proptest! {
        // Rows sum to one and the map is invariant to a per-row shift.
        #[test]
        fn softmax_rows_sum_to_one_and_shift_invariant(
            rows in 1usize..4, cols in 1usize..5,
            seed in any::<u64>(), shift in -5.0f64..5.0,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let m = Tensor::new(vec![rows, cols], data.clone()).unwrap();
            let s = m.row_softmax(None).unwrap();
            for i in 0..rows {
                let sum: f64 = s.row(i).iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-6);
            }
            let shifted = Tensor::new(vec![rows, cols], data.iter().map(|v| v + shift).collect()).unwrap();
            let s2 = shifted.row_softmax(None).unwrap();
            for (a, b) in s.data().iter().zip(s2.data()) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }

        // cosine(u, v) = cosine(au, cv) for positive a, c.
        #[test]
        fn cosine_scale_invariant(
            n in 1usize..6, seed in any::<u64>(),
            a in 0.01f64..100.0, c in 0.01f64..100.0,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0) + 0.5).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0) + 0.5).collect();
            let tu = Tensor::column(&u);
            let tv = Tensor::column(&v);
            prop_assume!(tu.frobenius_norm() > 1e-6 && tv.frobenius_norm() > 1e-6);
            let base = cosine(&tu, &tv).unwrap();
            let su = tu.map(|x| x * a);
            let sv = tv.map(|x| x * c);
            prop_assert!((cosine(&su, &sv).unwrap() - base).abs() < 1e-6);
            prop_assert!(base >= -1.0 - 1e-6 && base <= 1.0 + 1e-6);
        }
    }
}
