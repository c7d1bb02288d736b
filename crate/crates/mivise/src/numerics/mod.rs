//! Dense tensor arithmetic with reverse-mode gradients and an ADAM update.
//!
//! Everything downstream (encoders, losses, training) is expressed through
//! the [`Tensor`] value type and the [`Tape`] recording ops for [`backward`].
//! Training runs in f32; gradient checking runs in f64 where central finite
//! differences are trustworthy.

mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{check_gradients, GradReport, GRADCHECK_TOLERANCE};
pub use params::{adam_step, BoundParams, Gradients, ParamStore};
pub use tape::{GruVars, Tape, Var};
pub use tensor::{cosine, Tensor, COSINE_NORM_EPS};

use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar the numeric stack is generic over (f32 or f64).
pub trait Scalar:
    num_traits::Float + Debug + Display + Default + Send + Sync + Sum + 'static
{
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
    /// Bit width in bytes; gradient checking requires 8.
    const BYTES: usize;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
    const BYTES: usize = 4;
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
    const BYTES: usize = 8;
}

/// Stable seed mixer (splitmix64) for deriving independent RNG streams.
///
/// Keeps determinism independent of run order: each (seed, label, index…)
/// tuple owns its stream regardless of how work is scheduled.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    for &p in parts {
        state = state.wrapping_add(p);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        state = z ^ (z >> 31);
    }
    state
}
