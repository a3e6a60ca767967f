//! Reproducible i.i.d. kicks uniform on `[-ε, ε]`.
//!
//! Streams are ChaCha8 keystreams: the master seed fixes the key and the
//! stream id selects the nonce, so kick `k` of stream `s` is a pure function
//! of `(seed, s, k)` and tasks can be scheduled in any order.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::scalar::{wrap, Scalar};

const INV_2_53: f64 = 1.0 / 9_007_199_254_740_992.0;

/// Kick law and master seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig<T> {
    epsilon: T,
    master_seed: u64,
}

impl<T: Scalar> NoiseConfig<T> {
    /// `epsilon` must lie in `[0, 1/2]`.
    pub fn new(epsilon: T, master_seed: u64) -> Result<Self> {
        if !(epsilon >= T::zero() && epsilon <= T::lit(0.5)) {
            return Err(Error::InvalidParameter(format!(
                "kick half-width {epsilon} outside [0, 1/2]"
            )));
        }
        Ok(Self {
            epsilon,
            master_seed,
        })
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream(&self, stream_id: u64) -> KickStream<T> {
        make_stream(self, stream_id)
    }
}

/// Packs a task index and a replica index into one stream id.
///
/// The low 20 bits hold the replica, so up to 2²⁰ replicas per task and 2⁴⁴
/// tasks map to distinct keystreams.
pub fn replica_stream_id(task: u64, replica: u32) -> u64 {
    debug_assert!(replica < (1 << 20));
    (task << 20) | u64::from(replica)
}

/// Single-owner kick generator.
#[derive(Debug, Clone)]
pub struct KickStream<T> {
    rng: ChaCha8Rng,
    epsilon: T,
    stream_id: u64,
    position: u64,
}

pub fn make_stream<T: Scalar>(cfg: &NoiseConfig<T>, stream_id: u64) -> KickStream<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.master_seed);
    rng.set_stream(stream_id);
    KickStream {
        rng,
        epsilon: cfg.epsilon,
        stream_id,
        position: 0,
    }
}

impl<T: Scalar> KickStream<T> {
    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of draws consumed so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    /// Jumps to draw number `position`.
    pub fn seek(&mut self, position: u64) {
        self.rng.set_word_pos(u128::from(position) * 2);
        self.position = position;
    }

    /// Uniform on `[0, 1)` from 53 random bits, as `f64`.
    #[inline]
    fn unit_f64(&mut self) -> f64 {
        self.position += 1;
        (self.rng.next_u64() >> 11) as f64 * INV_2_53
    }

    /// A point of the circle, uniform on `[0, 1)`.
    #[inline]
    pub fn next_uniform(&mut self) -> T {
        wrap(T::lit(self.unit_f64()))
    }

    /// Next kick `ω = (2u - 1)·ε ∈ [-ε, ε]`.
    #[inline]
    pub fn next_kick(&mut self) -> T {
        let u = self.unit_f64();
        T::lit(2.0 * u - 1.0) * self.epsilon
    }
}
