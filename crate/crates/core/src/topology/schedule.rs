use std::borrow::Cow;

use nalgebra::DMatrix;

use super::GossipMatrix;
use crate::{Error, Real, Result};

/// Sequence of gossip matrices indexed by the step `t`.
#[derive(Clone, Debug)]
pub enum GossipSchedule<T: Real> {
    /// The same matrix at every step.
    Static(GossipMatrix<T>),
    /// One-peer exponential scheme on `n = 2^k` workers: at step `t` every
    /// node averages (weight 1/2) with the node whose index differs in bit
    /// `t mod k`. Pairs are symmetric, so each step is a valid gossip matrix,
    /// and one period of `k` steps averages exactly.
    Exponential { n: usize },
}

impl<T: Real> GossipSchedule<T> {
    pub fn exponential(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::DimensionMismatch(format!(
                "exponential schedule needs a power of two, got {n}"
            )));
        }
        Ok(GossipSchedule::Exponential { n })
    }

    pub fn n(&self) -> usize {
        match self {
            GossipSchedule::Static(w) => w.n(),
            GossipSchedule::Exponential { n } => *n,
        }
    }

    /// Number of steps after which the sequence repeats.
    pub fn period(&self) -> usize {
        match self {
            GossipSchedule::Static(_) => 1,
            GossipSchedule::Exponential { n } => (n.trailing_zeros() as usize).max(1),
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, GossipSchedule::Static(_))
    }

    /// Peer offset bit for the exponential scheme, `None` when `n = 1`.
    fn exponential_bit(n: usize, t: usize) -> Option<usize> {
        let k = n.trailing_zeros() as usize;
        (k > 0).then(|| 1 << (t % k))
    }

    pub fn matrix_at(&self, t: usize) -> Cow<'_, GossipMatrix<T>> {
        match self {
            GossipSchedule::Static(w) => Cow::Borrowed(w),
            GossipSchedule::Exponential { n } => {
                let n = *n;
                let Some(bit) = Self::exponential_bit(n, t) else {
                    return Cow::Owned(GossipMatrix::identity(n));
                };
                let half = T::lit(0.5);
                let mut w = DMatrix::zeros(n, n);
                for i in 0..n {
                    w[(i, i)] = half;
                    w[(i, i ^ bit)] = half;
                }
                Cow::Owned(GossipMatrix::new_unchecked(w))
            }
        }
    }

    /// `out = W_t x`.
    pub fn apply_into(&self, t: usize, x: &[T], out: &mut [T]) {
        match self {
            GossipSchedule::Static(w) => w.apply_into(x, out),
            GossipSchedule::Exponential { n } => match Self::exponential_bit(*n, t) {
                Some(bit) => {
                    let half = T::lit(0.5);
                    for (i, o) in out.iter_mut().enumerate() {
                        *o = (x[i] + x[i ^ bit]) * half;
                    }
                }
                None => out.copy_from_slice(x),
            },
        }
    }

    /// `W_t X` with one row per worker.
    pub fn mix_rows(&self, t: usize, x: &DMatrix<T>) -> DMatrix<T> {
        match self {
            GossipSchedule::Static(w) => w.mix_rows(x),
            GossipSchedule::Exponential { n } => match Self::exponential_bit(*n, t) {
                Some(bit) => {
                    let half = T::lit(0.5);
                    DMatrix::from_fn(x.nrows(), x.ncols(), |i, k| {
                        (x[(i, k)] + x[(i ^ bit, k)]) * half
                    })
                }
                None => x.clone(),
            },
        }
    }
}
