//! Offline variance-reduced SGLD: anneal the inverse temperature from `1/T`
//! to `1`, doubling it per stage, with a full cache rebuild and `i_max`
//! SAGA-LD steps at each stage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{EvalCounter, ModelStream};
use crate::numerics::{RngStream, Vector};
use crate::online::{default_parameters, RegularityConstants};
use crate::saga::{rebuild_cache, run_saga, ChainState, SagaParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfflineConfig {
    pub eta: f64,
    pub batch_size: usize,
    pub i_max: u64,
}

impl OfflineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) || self.batch_size == 0 || self.i_max == 0 {
            return Err(Error::Config(
                "offline sampler: eta > 0, batch size >= 1 and i_max >= 1 required".into(),
            ));
        }
        Ok(())
    }

    /// Defaults from the online formulas with zero mode drift, `i_max`
    /// capped at `cap`.
    pub fn from_theory(
        consts: &RegularityConstants,
        eps: f64,
        horizon: usize,
        cap: u64,
    ) -> Result<Self> {
        let consts = RegularityConstants {
            drift: 0.0,
            ..consts.clone()
        };
        let p = default_parameters(&consts, eps, horizon)?;
        let cfg = p.capped_config(cap, eps, &consts);
        Ok(Self {
            eta: cfg.eta0,
            batch_size: cfg.batch_size,
            i_max: cfg.i_max,
        })
    }
}

/// Inverse temperatures `1/T, 2/T, 4/T, ..., 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSchedule {
    betas: Vec<f64>,
}

impl TemperatureSchedule {
    pub fn new(horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Empty("stream"));
        }
        let mut beta = 1.0 / horizon as f64;
        let mut betas = vec![beta];
        while beta < 1.0 {
            beta = (2.0 * beta).min(1.0);
            betas.push(beta);
        }
        Ok(Self { betas })
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageAudit {
    pub stage: usize,
    pub beta: f64,
    pub eta: f64,
    pub rebuild_evals: u64,
    pub steps: u64,
    pub step_evals: u64,
}

#[derive(Clone, Debug)]
pub struct OfflineOutput {
    pub sample: Vector,
    pub stages: Vec<StageAudit>,
    pub evals: EvalCounter,
}

/// Runs the annealed sampler over all terms of `stream`, starting at `x0`.
pub fn offline_sample(
    stream: &ModelStream,
    x0: Vector,
    config: &OfflineConfig,
    rng: RngStream,
) -> Result<OfflineOutput> {
    config.validate()?;
    let horizon = stream.len();
    let schedule = TemperatureSchedule::new(horizon)?;
    let mut chain = ChainState::new(x0, config.eta, horizon, rng)?;
    let mut stages = Vec::with_capacity(schedule.len());
    for (stage, &beta) in schedule.betas().iter().enumerate() {
        let before = chain.evals.gradients;
        let mut cache = rebuild_cache(stream, &chain.x, horizon, stage, &mut chain.evals)?;
        let rebuild_evals = chain.evals.gradients - before;
        chain.eta = config.eta / (beta * horizon as f64);
        let params = SagaParams::new(config.batch_size, beta)?;
        let step_evals = run_saga(&mut chain, &mut cache, stream, &params, config.i_max, None)?;
        stages.push(StageAudit {
            stage,
            beta,
            eta: chain.eta,
            rebuild_evals,
            steps: config.i_max,
            step_evals,
        });
    }
    Ok(OfflineOutput {
        sample: chain.x,
        stages,
        evals: chain.evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::FunctionTerm;
    use crate::saga::estimate_gradient;
    use proptest::prelude::*;

    #[test]
    fn schedules() {
        assert_eq!(TemperatureSchedule::new(8).unwrap().betas(), &[0.125, 0.25, 0.5, 1.0]);
        assert_eq!(TemperatureSchedule::new(1).unwrap().betas(), &[1.0]);
        assert_eq!(TemperatureSchedule::new(5).unwrap().betas(), &[0.2, 0.4, 0.8, 1.0]);
        assert!(TemperatureSchedule::new(0).is_err());
    }

    proptest! {
        #[test]
        fn schedule_shape(t in 1usize..100_000) {
            let s = TemperatureSchedule::new(t).unwrap();
            let b = s.betas();
            prop_assert_eq!(b.len(), (t as f64).log2().ceil() as usize + 1);
            prop_assert_eq!(b[0], 1.0 / t as f64);
            prop_assert_eq!(*b.last().unwrap(), 1.0);
            for w in b.windows(2) {
                prop_assert!(w[1] > w[0]);
                prop_assert_eq!(w[1], (2.0 * w[0]).min(1.0));
            }
        }
    }

    fn gaussian_stream(t: usize, d: usize, alpha: f64, seed: u64) -> ModelStream {
        let mut rng = RngStream::new(seed, 9);
        let mut stream = ModelStream::new(FunctionTerm::gaussian_prior(alpha, d).unwrap());
        for _ in 0..t {
            let w: Vec<f64> = (0..d).map(|_| 1.0 + rng.standard_normal()).collect();
            stream.push(FunctionTerm::gaussian_mean(Vector::from_vec(w))).unwrap();
        }
        stream
    }

    #[test]
    fn budget_matches_contract() {
        let stream = gaussian_stream(64, 2, 1.0, 1);
        let cfg = OfflineConfig {
            eta: 0.5,
            batch_size: 4,
            i_max: 30,
        };
        let out = offline_sample(&stream, Vector::zeros(2), &cfg, RngStream::new(1, 0)).unwrap();
        assert_eq!(out.stages.len(), 7);
        let rebuild: u64 = out.stages.iter().map(|s| s.rebuild_evals).sum();
        assert_eq!(rebuild, 64 * 7);
        let steps: u64 = out.stages.iter().map(|s| s.step_evals).sum();
        assert_eq!(out.evals.gradients, rebuild + steps);
        assert!(out.evals.gradients <= 64 * 7 + 7 * 30 * 5);
        for s in &out.stages {
            assert!((s.eta - 0.5 / (s.beta * 64.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn tempered_gradient_is_scaled() {
        // With a fresh cache the estimator is exact: beta * grad F.
        let stream = gaussian_stream(10, 2, 1.0, 2);
        let x = Vector::from_vec(vec![0.3, -0.2]);
        let mut counter = EvalCounter::default();
        let cache = rebuild_cache(&stream, &x, 10, 0, &mut counter).unwrap();
        let mut chain = ChainState::new(x.clone(), 0.1, 10, RngStream::new(2, 0)).unwrap();
        let (g, _) = estimate_gradient(&mut chain, &cache, &stream, &SagaParams::new(3, 0.25).unwrap()).unwrap();
        let full = stream.full_gradient(&x, 10, &mut counter).unwrap();
        assert!((g - full * 0.25).norm() < 1e-12);
    }

    #[test]
    fn final_sample_matches_gaussian_posterior() {
        let t = 256;
        let stream = gaussian_stream(t, 1, 1.0, 3);
        let wsum: f64 = stream.terms().iter().map(|f| match f {
            FunctionTerm::GaussianMean { center } => center[0],
            _ => unreachable!(),
        }).sum();
        let mean = wsum / (t as f64 + 1.0);
        let sd = (1.0 / (t as f64 + 1.0)).sqrt();
        let cfg = OfflineConfig {
            eta: 0.2,
            batch_size: 4,
            i_max: 150,
        };
        let root = RngStream::root(3);
        let draws: Vec<f64> = (0..300)
            .map(|r| {
                offline_sample(&stream, Vector::zeros(1), &cfg, root.child_indexed("rep", r))
                    .unwrap()
                    .sample[0]
            })
            .collect();
        let m = crate::numerics::mean(&draws);
        let s = crate::numerics::std_dev(&draws);
        assert!((m - mean).abs() < 4.0 * sd / (300f64).sqrt(), "{m} vs {mean}");
        assert!((s / sd - 1.0).abs() < 0.15, "{s} vs {sd}");
    }

    #[test]
    fn rejects_bad_config() {
        let stream = gaussian_stream(4, 1, 1.0, 4);
        let cfg = OfflineConfig {
            eta: 0.1,
            batch_size: 0,
            i_max: 1,
        };
        assert!(offline_sample(&stream, Vector::zeros(1), &cfg, RngStream::new(0, 0)).is_err());
    }
}
