//! Named parameter storage with per-parameter ADAM state.

use super::tape::{Tape, TapeGradients, Var};
use super::tensor::Tensor;
use super::Scalar;
use crate::error::{Error, Result};
use std::collections::HashMap;

/// Ordered map of name → parameter tensor plus ADAM moments.
///
/// Order is insertion order and fixes the summation/update order everywhere,
/// which is what makes training bit-reproducible.
#[derive(Clone)]
pub struct ParamStore<S> {
    names: Vec<String>,
    params: Vec<Tensor<S>>,
    first_moment: Vec<Tensor<S>>,
    second_moment: Vec<Tensor<S>>,
    step: u64,
    index: HashMap<String, usize>,
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        ParamStore {
            names: Vec::new(),
            params: Vec::new(),
            first_moment: Vec::new(),
            second_moment: Vec::new(),
            step: 0,
            index: HashMap::new(),
        }
    }

    pub fn register(&mut self, name: &str, value: Tensor<S>) -> Result<()> {
        if self.index.contains_key(name) {
            return Err(Error::DuplicateId(name.to_string()));
        }
        self.index.insert(name.to_string(), self.params.len());
        self.names.push(name.to_string());
        self.first_moment.push(Tensor::zeros(value.shape().to_vec()));
        self.second_moment.push(Tensor::zeros(value.shape().to_vec()));
        self.params.push(value);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<S>> {
        self.index
            .get(name)
            .map(|&i| &self.params[i])
            .ok_or_else(|| Error::UnknownId(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<S>> {
        match self.index.get(name) {
            Some(&i) => Ok(&mut self.params[i]),
            None => Err(Error::UnknownId(name.to_string())),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<S>)> {
        self.names
            .iter()
            .map(|n| n.as_str())
            .zip(self.params.iter())
    }

    /// Insert every parameter into `tape` as a gradient-tracked leaf.
    pub fn bind(&self, tape: &mut Tape<S>) -> BoundParams {
        let vars = self.params.iter().map(|t| tape.param(t.clone())).collect();
        BoundParams {
            vars,
            index: self.index.clone(),
        }
    }

    pub fn cast<T: Scalar>(&self) -> ParamStore<T> {
        ParamStore {
            names: self.names.clone(),
            params: self.params.iter().map(|t| t.cast()).collect(),
            first_moment: self.first_moment.iter().map(|t| t.cast()).collect(),
            second_moment: self.second_moment.iter().map(|t| t.cast()).collect(),
            step: self.step,
            index: self.index.clone(),
        }
    }
}

impl<S: Scalar> Default for ParamStore<S> {
    fn default() -> Self {
        Self::new()
    }
}

/// Tape handles for every parameter of a store, for one forward pass.
pub struct BoundParams {
    vars: Vec<Var>,
    index: HashMap<String, usize>,
}

impl BoundParams {
    pub fn var(&self, name: &str) -> Result<Var> {
        self.index
            .get(name)
            .map(|&i| self.vars[i])
            .ok_or_else(|| Error::UnknownId(name.to_string()))
    }

    /// Collect per-parameter gradients in store order; unreachable
    /// parameters get zeros.
    pub fn collect<S: Scalar>(&self, tape: &Tape<S>, grads: &TapeGradients<S>) -> Gradients<S> {
        Gradients {
            by_index: self.vars.iter().map(|&v| grads.of(v, tape)).collect(),
            index: self.index.clone(),
        }
    }
}

/// Gradients keyed like the [`ParamStore`] they were collected against.
#[derive(Clone)]
pub struct Gradients<S> {
    by_index: Vec<Tensor<S>>,
    index: HashMap<String, usize>,
}

impl<S: Scalar> Gradients<S> {
    pub fn zeros_like(store: &ParamStore<S>) -> Self {
        Gradients {
            by_index: store
                .params
                .iter()
                .map(|t| Tensor::zeros(t.shape().to_vec()))
                .collect(),
            index: store.index.clone(),
        }
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<S>> {
        self.index
            .get(name)
            .map(|&i| &self.by_index[i])
            .ok_or_else(|| Error::UnknownId(name.to_string()))
    }

    /// In-place accumulation; both sides must be keyed identically.
    pub fn add_assign(&mut self, other: &Gradients<S>) -> Result<()> {
        if self.by_index.len() != other.by_index.len() {
            return Err(Error::Contract(
                "gradient accumulation over differently-keyed stores".into(),
            ));
        }
        for (a, b) in self.by_index.iter_mut().zip(&other.by_index) {
            a.same_shape(b, "gradient accumulation")?;
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x = *x + *y;
            }
        }
        Ok(())
    }

    pub fn max_abs(&self) -> S {
        self.by_index
            .iter()
            .flat_map(|t| t.data())
            .fold(S::zero(), |m, &v| m.max(v.abs()))
    }
}

/// One ADAM update with bias correction; increments the store's step count.
pub fn adam_step<S: Scalar>(
    store: &mut ParamStore<S>,
    grads: &Gradients<S>,
    lr: S,
    betas: (S, S),
    eps: S,
) -> Result<()> {
    if grads.by_index.len() != store.params.len() || grads.index != store.index {
        return Err(Error::Contract(
            "adam_step gradients are not keyed like the parameter store".into(),
        ));
    }
    let (b1, b2) = betas;
    store.step += 1;
    let t = store.step as i32;
    let bias1 = S::one() - b1.powi(t);
    let bias2 = S::one() - b2.powi(t);
    for i in 0..store.params.len() {
        let g = &grads.by_index[i];
        store.params[i].same_shape(g, "adam_step")?;
        let m = self_zip(&mut store.first_moment[i], g, |m, g| {
            b1 * m + (S::one() - b1) * g
        });
        let v = self_zip(&mut store.second_moment[i], g, |v, g| {
            b2 * v + (S::one() - b2) * g * g
        });
        let p = store.params[i].data_mut();
        for ((p, &m), &v) in p.iter_mut().zip(m.iter()).zip(v.iter()) {
            let m_hat = m / bias1;
            let v_hat = v / bias2;
            *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

fn self_zip<'a, S: Scalar>(
    target: &'a mut Tensor<S>,
    other: &Tensor<S>,
    f: impl Fn(S, S) -> S,
) -> &'a [S] {
    for (t, &o) in target.data_mut().iter_mut().zip(other.data()) {
        *t = f(*t, o);
    }
    target.data()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(name: &str, values: &[f64]) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.register(name, Tensor::column(values)).unwrap();
        s
    }

    fn grad_of(store: &ParamStore<f64>, name: &str, values: &[f64]) -> Gradients<f64> {
        let mut g = Gradients::zeros_like(store);
        let i = g.index[name];
        g.by_index[i] = Tensor::column(values);
        g
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParamStore::<f64>::new();
        s.register("w", Tensor::scalar(1.0)).unwrap();
        assert!(s.register("w", Tensor::scalar(2.0)).is_err());
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut s = store_with("w", &[0.3, -0.7]);
        let g = grad_of(&s, "w", &[0.0, 0.0]);
        adam_step(&mut s, &g, 0.1, (0.9, 0.999), 1e-8).unwrap();
        assert_eq!(s.get("w").unwrap().data(), &[0.3, -0.7]);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // θ=0, g=1, lr=0.1: bias-corrected first step is lr / (1 + eps·…) ≈ −0.1
        let mut s = store_with("w", &[0.0]);
        let g = grad_of(&s, "w", &[1.0]);
        adam_step(&mut s, &g, 0.1, (0.9, 0.999), 1e-8).unwrap();
        let w = s.get("w").unwrap().item();
        assert!((w + 0.1).abs() < 1e-8, "got {w}");
    }

    #[test]
    fn constant_gradient_moves_monotonically() {
        let mut s = store_with("w", &[0.0]);
        let g = grad_of(&s, "w", &[1.0]);
        adam_step(&mut s, &g, 0.1, (0.9, 0.999), 1e-8).unwrap();
        let w1 = s.get("w").unwrap().item();
        adam_step(&mut s, &g, 0.1, (0.9, 0.999), 1e-8).unwrap();
        let w2 = s.get("w").unwrap().item();
        assert!(w1 < 0.0 && w2 < w1);
    }

    #[test]
    fn mismatched_gradients_are_a_contract_error() {
        let mut s = store_with("w", &[0.0]);
        let other = store_with("q", &[0.0]);
        let g = Gradients::zeros_like(&other);
        assert!(matches!(
            adam_step(&mut s, &g, 0.1, (0.9, 0.999), 1e-8).unwrap_err(),
            Error::Contract(_)
        ));
    }
}
