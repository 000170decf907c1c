use proptest::prelude::*;
use streamld::datagen::{generate, DatasetSpec, Family};
use streamld::online::{checkpoint_epoch, OnlineConfig, OnlineSampler};
use streamld::saga::{rebuild_cache, run_saga, ChainState, SagaParams};
use streamld::{EvalCounter, RngStream, Vector};

fn logistic(t: usize, d: usize, seed: u64) -> streamld::ModelStream {
    let spec = DatasetSpec {
        family: Family::Logistic { t, d, sparsity: 1 },
        seed,
    };
    generate(&spec).unwrap().to_stream(1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // The cached sum tracks the cached gradients through any run.
    #[test]
    fn cache_sum_stays_consistent(seed in 0u64..1000, b in 1usize..8, steps in 1u64..60) {
        let stream = logistic(30, 3, seed);
        let x = Vector::zeros(stream.dim());
        let mut counter = EvalCounter::default();
        let mut cache = rebuild_cache(&stream, &x, 30, 1, &mut counter).unwrap();
        let mut chain = ChainState::new(x, 0.01, 30, RngStream::new(seed, 1)).unwrap();
        let params = SagaParams::new(b, 1.0).unwrap();
        let cost = run_saga(&mut chain, &mut cache, &stream, &params, steps, None).unwrap();
        prop_assert!(cache.sum_drift() < 1e-10);
        prop_assert!(cost >= 2 * steps && cost <= (b as u64 + 1) * steps);
        prop_assert_eq!(counter.gradients, 30);
        prop_assert_eq!(chain.evals.gradients, cost);
    }

    // Per-epoch evaluations decompose exactly, and entries are never older
    // than half the current epoch.
    #[test]
    fn online_budget_identity(seed in 0u64..1000, i_max in 1u64..6, reset in any::<bool>()) {
        let stream = logistic(64, 2, seed);
        let cfg = OnlineConfig {
            eta0: 0.05,
            batch_size: 2,
            i_max,
            offset: 1.0,
            acceptance_radius: 0.5,
            enable_reset: reset,
            enable_random_steps: true,
        };
        let mut s = OnlineSampler::new(Vector::zeros(stream.dim()), cfg, RngStream::new(seed, 2)).unwrap();
        for t in 1..=64 {
            let a = s.advance_epoch(&stream).unwrap();
            prop_assert_eq!(a.grad_evals, 1 + a.refreshes + a.step_evals);
            prop_assert!(a.steps >= 1 && a.steps <= i_max);
            prop_assert_eq!(a.checkpoint_epoch, checkpoint_epoch(t));
            prop_assert!(s.cache().stamps().iter().all(|&st| st > t / 2));
        }
        let total: u64 = s.audits().iter().map(|a| a.grad_evals).sum();
        prop_assert_eq!(total, s.evals().gradients);
    }
}
