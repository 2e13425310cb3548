//! Counter-keyed random streams.
//!
//! Every `(master_seed, trial, basket, stage)` address maps to its own ChaCha8
//! stream, so a draw never depends on how trials are scheduled across workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

const TRIAL_BITS: u32 = 40;

/// Position of a stream inside a simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamPath {
    pub trial: u64,
    pub basket: u16,
    pub stage: u8,
}

impl StreamPath {
    pub fn new(trial: u64, basket: usize, stage: u8) -> Self {
        assert!(trial < (1 << TRIAL_BITS), "trial index {trial} exceeds stream address space");
        assert!(basket <= u16::MAX as usize, "basket index {basket} exceeds stream address space");
        Self { trial, basket: basket as u16, stage }
    }

    fn stream_id(self) -> u64 {
        (self.trial << 24) | ((self.basket as u64) << 8) | self.stage as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub path: StreamPath,
}

impl RngStream {
    pub fn new(master_seed: u64, trial: u64, basket: usize, stage: u8) -> Self {
        Self { master_seed, path: StreamPath::new(trial, basket, stage) }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.path.stream_id());
        rng
    }

    /// First binomial draw of this stream.
    pub fn binomial(&self, n: u32, p: f64) -> u32 {
        binomial_draw(&mut self.rng(), n, p)
    }
}

/// One `Binomial(n, p)` variate. Panics if `p` is outside `[0, 1]`.
pub fn binomial_draw<R: Rng + ?Sized>(rng: &mut R, n: u32, p: f64) -> u32 {
    assert!((0.0..=1.0).contains(&p), "binomial probability {p} outside [0, 1]");
    if n == 0 || p == 0.0 {
        return 0;
    }
    if p == 1.0 {
        return n;
    }
    Binomial::new(n as u64, p).expect("validated parameters").sample(rng) as u32
}
