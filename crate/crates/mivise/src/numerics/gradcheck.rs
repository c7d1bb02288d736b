//! Analytic gradients vs central finite differences.
//!
//! Only defined for f64: at f32, finite differences drown in roundoff,
//! which is the whole reason the stack has a 64-bit mode.

use super::params::{Gradients, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Max relative error allowed between analytic and numeric gradients.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// How many randomly chosen coordinates are probed per parameter
/// (all of them when a parameter is smaller).
const COORDS_PER_PARAM: usize = 25;

/// Outcome of a gradient check.
#[derive(Debug, Clone)]
pub struct GradReport {
    /// Per-parameter maximum relative error, in store order.
    pub per_param: Vec<(String, f64)>,
    pub max_relative_error: f64,
    pub pass: bool,
    pub tolerance: f64,
}

impl GradReport {
    pub fn summary(&self) -> String {
        format!(
            "{}: max relative error {:.3e} (tolerance {:.1e})",
            if self.pass { "PASS" } else { "FAIL" },
            self.max_relative_error,
            self.tolerance
        )
    }
}

/// Compare the analytic gradients produced by `build_loss` against central
/// finite differences `(f(θ+eps) − f(θ−eps)) / 2·eps` on a seeded random
/// coordinate subset of every parameter.
///
/// `build_loss` must return the loss value and its gradients for the given
/// parameters; it is re-invoked with perturbed copies for the numeric side.
pub fn check_gradients<F>(
    build_loss: F,
    params: &ParamStore<f64>,
    eps: f64,
    seed: u64,
) -> Result<GradReport>
where
    F: Fn(&ParamStore<f64>) -> Result<(f64, Gradients<f64>)>,
{
    if eps <= 0.0 {
        return Err(Error::Contract("gradient-check eps must be positive".into()));
    }
    let (_, analytic) = build_loss(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_param = Vec::with_capacity(params.len());
    let mut overall = 0.0f64;

    for name in params.names() {
        let tensor = params.get(name)?;
        let n = tensor.len();
        let mut coords: Vec<usize> = (0..n).collect();
        if n > COORDS_PER_PARAM {
            coords.shuffle(&mut rng);
            coords.truncate(COORDS_PER_PARAM);
        }
        let grad = analytic.get(name)?;
        let mut worst = 0.0f64;
        for &c in &coords {
            let numeric = {
                let plus = eval_perturbed(&build_loss, params, name, c, eps)?;
                let minus = eval_perturbed(&build_loss, params, name, c, -eps)?;
                (plus - minus) / (2.0 * eps)
            };
            let a = grad.data()[c];
            // The 1e-6 floor absorbs finite-difference roundoff when the
            // true gradient at a coordinate is (near) zero.
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
        overall = overall.max(worst);
        per_param.push((name.clone(), worst));
    }

    Ok(GradReport {
        per_param,
        max_relative_error: overall,
        pass: overall < GRADCHECK_TOLERANCE,
        tolerance: GRADCHECK_TOLERANCE,
    })
}

fn eval_perturbed<F>(
    build_loss: &F,
    params: &ParamStore<f64>,
    name: &str,
    coord: usize,
    delta: f64,
) -> Result<f64>
where
    F: Fn(&ParamStore<f64>) -> Result<(f64, Gradients<f64>)>,
{
    let mut perturbed = ParamStore::new();
    for (n, t) in params.iter() {
        let mut copy: Tensor<f64> = t.clone();
        if n == name {
            copy.data_mut()[coord] += delta;
        }
        perturbed.register(n, copy)?;
    }
    build_loss(&perturbed).map(|(v, _)| v)
}
