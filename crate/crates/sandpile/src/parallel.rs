//! Reproducible parallel trials.
//!
//! Trials are cut into fixed-size chunks; chunk `j` draws from ChaCha8
//! seeded with the user seed on stream `j`. Results therefore depend on the
//! seed and trial count only, never on the number of workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const CHUNK: u64 = 1024;

/// The generator used everywhere a seed is accepted.
pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `trials` independent evaluations of `trial` and folds them with
/// `merge`, starting from `A::default()` in every chunk.
pub fn run_trials<A, F, M>(
    trials: u64,
    seed: u64,
    workers: Option<usize>,
    trial: F,
    merge: M,
) -> Result<A>
where
    A: Default + Send,
    F: Fn(&mut Stream, &mut A) + Sync,
    M: Fn(A, A) -> A + Sync + Send,
{
    let chunks = trials.div_ceil(CHUNK);
    let work = || {
        (0..chunks)
            .into_par_iter()
            .map(|j| {
                let mut rng = stream(seed, j);
                let mut acc = A::default();
                let n = CHUNK.min(trials - j * CHUNK);
                for _ in 0..n {
                    trial(&mut rng, &mut acc);
                }
                acc
            })
            .reduce(A::default, &merge)
    };
    match workers {
        None => Ok(work()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::Capacity(format!("thread pool: {e}")))?;
            Ok(pool.install(work))
        }
    }
}
