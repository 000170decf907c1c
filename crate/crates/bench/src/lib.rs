//! Fixtures shared by the criterion benches.

use streamld::datagen::{generate, DatasetSpec, Family};
use streamld::evaluation::SampleSet;
use streamld::saga::{rebuild_cache, ChainState, GradientCache};
use streamld::{EvalCounter, ModelStream, RngStream, Vector};

/// Sparse logistic stream with `t` rows and `d` features plus intercept.
pub fn logistic_stream(t: usize, d: usize) -> ModelStream {
    let spec = DatasetSpec {
        family: Family::Logistic { t, d, sparsity: 5.min(d) },
        seed: 17,
    };
    generate(&spec).unwrap().to_stream(1.0).unwrap()
}

/// A chain at epoch `t` with a fresh cache at the origin.
pub fn saga_fixture(stream: &ModelStream) -> (ChainState, GradientCache) {
    let t = stream.len();
    let x = Vector::zeros(stream.dim());
    let mut counter = EvalCounter::default();
    let cache = rebuild_cache(stream, &x, t, t, &mut counter).unwrap();
    let chain = ChainState::new(x, 1e-4, t, RngStream::root(3)).unwrap();
    (chain, cache)
}

/// `n` standard normal draws in `d` dimensions.
pub fn normal_set(n: usize, d: usize, seed: u64) -> SampleSet {
    let mut rng = RngStream::root(seed);
    let draws = (0..n)
        .map(|_| Vector::from_fn(d, |_, _| rng.standard_normal()))
        .collect();
    SampleSet::new("bench", 0, draws).unwrap()
}
