//! Online SAGA-LD: one sample per arriving term, with a warm start from the
//! previous sample, a reset to the last power-of-two checkpoint when the
//! chain has drifted too far, refresh of stale cached gradients and a step
//! size that decays as `eta0 / (t + c)`.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{EvalCounter, ModelStream};
use crate::numerics::{distance, RngStream, Vector};
use crate::saga::{run_saga, ChainState, GradientCache, SagaParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnlineConfig {
    pub eta0: f64,
    pub batch_size: usize,
    pub i_max: u64,
    /// Offset `c` in `eta_t = eta0 / (t + c)`.
    pub offset: f64,
    /// Acceptance radius `C'`.
    pub acceptance_radius: f64,
    pub enable_reset: bool,
    pub enable_random_steps: bool,
}

impl OnlineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("online sampler: {what}")));
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return bad("eta0 must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if self.i_max == 0 {
            return bad("i_max must be at least 1");
        }
        if !(self.offset >= 0.0 && self.offset.is_finite()) {
            return bad("offset must be non-negative");
        }
        if !(self.acceptance_radius > 0.0) {
            return bad("acceptance radius must be positive");
        }
        Ok(())
    }

    pub fn step_size(&self, t: usize) -> f64 {
        self.eta0 / (t as f64 + self.offset)
    }

    /// Acceptance threshold `C' / sqrt(t + c)` on the drift from the checkpoint.
    pub fn reset_threshold(&self, t: usize) -> f64 {
        self.acceptance_radius / (t as f64 + self.offset).sqrt()
    }

    /// The simulation settings used on the logistic benchmark: step size
    /// `0.05 / (1 + 0.5 t)`, batch 64, no resets and a fixed step count.
    pub fn benchmark(i_max: u64) -> Self {
        Self {
            eta0: 0.1,
            batch_size: 64,
            i_max,
            offset: 2.0,
            acceptance_radius: 1.0,
            enable_reset: false,
            enable_random_steps: false,
        }
    }
}

/// Regularity constants of the stream: smoothness `L` (terms) and `L0`
/// (prior), exponential tail `P(|X - x*| >= s / sqrt(t + c)) <= A e^{-k s}`,
/// mode drift `D`, and the dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularityConstants {
    pub lipschitz: f64,
    pub prior_lipschitz: f64,
    pub tail_a: f64,
    pub tail_k: f64,
    pub drift: f64,
    pub dim: usize,
}

impl RegularityConstants {
    /// `C = (2 + 1/k) log(A / k^2)`.
    pub fn second_moment_constant(&self) -> f64 {
        (2.0 + 1.0 / self.tail_k) * (self.tail_a / (self.tail_k * self.tail_k)).ln()
    }
}

/// Parameters produced by [`default_parameters`]. `i_max` is kept as a real
/// number since the formulas routinely exceed any integer type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryParameters {
    pub eps1: f64,
    pub eps2: f64,
    pub c1: f64,
    pub radius: f64,
    pub eta0: f64,
    pub i_max: f64,
    pub batch_size: usize,
    pub offset: f64,
    pub acceptance_radius: f64,
}

/// Parameter schedule guaranteeing per-epoch TV error `eps` over `horizon`
/// epochs. The constants are not optimized.
pub fn default_parameters(
    consts: &RegularityConstants,
    eps: f64,
    horizon: usize,
) -> Result<TheoryParameters> {
    let positive = [
        consts.lipschitz,
        consts.prior_lipschitz,
        consts.tail_a,
        consts.tail_k,
        eps,
    ];
    if positive.iter().any(|v| !(*v > 0.0 && v.is_finite()))
        || !(consts.drift >= 0.0)
        || consts.dim == 0
        || horizon == 0
    {
        return Err(Error::Config(
            "regularity constants, eps and horizon must be positive".into(),
        ));
    }
    let l = consts.lipschitz;
    let d = consts.drift;
    let k = consts.tail_k;
    let horizon_f = horizon as f64;
    let eps1 = eps / (3.0 * horizon_f);
    let eps2 = eps / (3.0 * (horizon_f.log2() + 1.0).ceil());
    let c1 = (2.0 + 1.0 / k) * (consts.tail_a / (eps2 * k * k)).ln();
    let spread = c1 + d;
    let radius = 10_000.0 * spread * (consts.dim as f64).sqrt() / eps2
        * l.max(spread).max(1.0 / eps1).ln();
    let eta0 = eps2 * eps2 / (2.0 * l * l * (radius + d).powi(2));
    let i_max = (20.0 * spread * spread / (eta0 * eps2 * eps2)).ceil();
    Ok(TheoryParameters {
        eps1,
        eps2,
        c1,
        radius,
        eta0,
        i_max,
        batch_size: 9,
        offset: consts.prior_lipschitz / l,
        acceptance_radius: 2.5 * spread,
    })
}

impl TheoryParameters {
    /// Exact configuration; `i_max` saturates at `u64::MAX`.
    pub fn config(&self) -> OnlineConfig {
        OnlineConfig {
            eta0: self.eta0,
            batch_size: self.batch_size,
            i_max: saturating_u64(self.i_max),
            offset: self.offset,
            acceptance_radius: self.acceptance_radius,
            enable_reset: true,
            enable_random_steps: true,
        }
    }

    /// Desk-scale configuration with `i_max <= cap`. When the cap binds, the
    /// step size is raised so that `eta0 * i_max` stays as close to the
    /// formula's value as the discretization limit `eps^2 / (L d)` allows.
    pub fn capped_config(&self, cap: u64, eps: f64, consts: &RegularityConstants) -> OnlineConfig {
        let mut cfg = self.config();
        if self.i_max <= cap as f64 {
            return cfg;
        }
        let cap = cap.max(1);
        let spread = self.c1 + consts.drift;
        let matched = 20.0 * spread * spread / (cap as f64 * self.eps2 * self.eps2);
        let ceiling = eps * eps / (consts.lipschitz * consts.dim as f64);
        cfg.i_max = cap;
        cfg.eta0 = matched.min(ceiling).max(self.eta0);
        cfg
    }
}

fn saturating_u64(v: f64) -> u64 {
    if v >= u64::MAX as f64 {
        u64::MAX
    } else {
        v.max(1.0) as u64
    }
}

/// `2^floor(log2(t - 1))` for `t > 1`, and `0` for `t = 1`.
pub fn checkpoint_epoch(t: usize) -> usize {
    assert!(t >= 1, "epochs start at 1");
    if t == 1 {
        0
    } else {
        let p = t - 1;
        1 << (usize::BITS - 1 - p.leading_zeros())
    }
}

/// Recomputes at `x` every cached gradient last updated at or before epoch
/// `t / 2`, stamping them with `t`. Returns the number of refreshed entries.
pub fn refresh_stale(
    cache: &mut GradientCache,
    stream: &ModelStream,
    x: &Vector,
    t: usize,
    counter: &mut EvalCounter,
) -> usize {
    let stale = cache.take_stale(t / 2);
    let mut g = vec![0.0; cache.dim()];
    for &k in &stale {
        g.fill(0.0);
        stream.term(k).accumulate_gradient(x.as_slice(), 1.0, &mut g);
        counter.gradients += 1;
        cache.replace(k, &g, t);
    }
    stale.len()
}

/// Per-epoch audit record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochAudit {
    pub epoch: usize,
    /// Gradient evaluations charged during this epoch.
    pub grad_evals: u64,
    pub refreshes: u64,
    /// Number of SAGA-LD steps `i_t`.
    pub steps: u64,
    /// `sum over steps of (|set(S)| + 1)`.
    pub step_evals: u64,
    pub reset: bool,
    pub checkpoint_epoch: usize,
    /// `|X^{t-1} - X^{t'}|`.
    pub drift: f64,
    /// `sqrt(t + c) |X^t - x_t*|` in diagnostic mode.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scaled_mode_distance: Option<f64>,
}

/// State of one online chain across epochs.
#[derive(Clone, Debug)]
pub struct OnlineSampler {
    config: OnlineConfig,
    params: SagaParams,
    chain: ChainState,
    cache: GradientCache,
    checkpoint: Vector,
    checkpoint_epoch: usize,
    step_rng: RngStream,
    diagnostics: bool,
    mode: Option<Vector>,
    audits: Vec<EpochAudit>,
    time_limit: Option<Duration>,
}

impl OnlineSampler {
    pub fn new(x0: Vector, config: OnlineConfig, rng: RngStream) -> Result<Self> {
        config.validate()?;
        let params = SagaParams::new(config.batch_size, 1.0)?;
        let dim = x0.len();
        let chain = ChainState::new(x0.clone(), config.step_size(1), 0, rng.child("chain"))?;
        Ok(Self {
            params,
            chain,
            cache: GradientCache::new(dim),
            checkpoint: x0,
            checkpoint_epoch: 0,
            step_rng: rng.child("steps"),
            diagnostics: false,
            mode: None,
            audits: Vec::new(),
            time_limit: None,
            config,
        })
    }

    /// Records `sqrt(t + c) |X^t - x_t*|` each epoch, with `x_t*` from a
    /// deterministic optimizer whose evaluations are not charged.
    pub fn with_diagnostics(mut self) -> Self {
        self.diagnostics = true;
        self
    }

    /// Runs SAGA-LD steps until `limit` has elapsed in each epoch instead of
    /// drawing `i_t`. Output then depends on machine speed.
    pub fn with_time_limit(mut self, limit: Duration) -> Self {
        self.time_limit = Some(limit);
        self
    }

    pub fn config(&self) -> &OnlineConfig {
        &self.config
    }

    /// Last completed epoch.
    pub fn epoch(&self) -> usize {
        self.chain.epoch
    }

    /// The latest sample `X^t`.
    pub fn sample(&self) -> &Vector {
        &self.chain.x
    }

    pub fn evals(&self) -> EvalCounter {
        self.chain.evals
    }

    pub fn cache(&self) -> &GradientCache {
        &self.cache
    }

    pub fn audits(&self) -> &[EpochAudit] {
        &self.audits
    }

    /// Latest mode estimate in diagnostic mode.
    pub fn mode(&self) -> Option<&Vector> {
        self.mode.as_ref()
    }

    /// A copy of this sampler driven by fresh randomness, for re-running the
    /// next epoch many times from the same saved state.
    pub fn fork(&self, rng: RngStream) -> Self {
        let mut copy = self.clone();
        copy.chain.rng = rng.child("chain");
        copy.step_rng = rng.child("steps");
        copy.audits.clear();
        copy
    }

    /// Runs epoch `t = epoch() + 1`; the stream must hold at least `t` terms.
    pub fn advance_epoch(&mut self, stream: &ModelStream) -> Result<EpochAudit> {
        let t = self.chain.epoch + 1;
        if stream.len() < t {
            return Err(Error::EpochOrder {
                epoch: t,
                available: stream.len(),
            });
        }
        if stream.dim() != self.chain.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.chain.dim(),
                got: stream.dim(),
            });
        }
        debug_assert_eq!(self.checkpoint_epoch, checkpoint_epoch(t));

        let drift = distance(self.chain.x.as_slice(), self.checkpoint.as_slice());
        let reset = self.config.enable_reset && !(drift <= self.config.reset_threshold(t));
        if reset {
            self.chain.x.copy_from(&self.checkpoint);
        }

        let before = self.chain.evals.gradients;
        let mut g = vec![0.0; stream.dim()];
        stream.term(t).accumulate_gradient(self.chain.x.as_slice(), 1.0, &mut g);
        self.chain.evals.gradients += 1;
        self.cache.push(&g, t);

        let refreshes =
            refresh_stale(&mut self.cache, stream, &self.chain.x, t, &mut self.chain.evals) as u64;

        let started = Instant::now();
        let steps = if self.time_limit.is_some() {
            0
        } else if self.config.enable_random_steps {
            1 + self.step_rng.index(usize::try_from(self.config.i_max).unwrap_or(usize::MAX)) as u64
        } else {
            self.config.i_max
        };
        self.chain.epoch = t;
        self.chain.eta = self.config.step_size(t);
        let (steps, step_evals) = match self.time_limit {
            None => (
                steps,
                run_saga(&mut self.chain, &mut self.cache, stream, &self.params, steps, None)?,
            ),
            Some(limit) => {
                let (mut n, mut cost) = (0, 0);
                while started.elapsed() < limit {
                    cost += run_saga(&mut self.chain, &mut self.cache, stream, &self.params, 1, None)?;
                    n += 1;
                }
                (n, cost)
            }
        };
        let grad_evals = self.chain.evals.gradients - before;

        if t.is_power_of_two() {
            self.checkpoint.copy_from(&self.chain.x);
            self.checkpoint_epoch = t;
        }

        let scaled_mode_distance = if self.diagnostics {
            let start = self.mode.clone().unwrap_or_else(|| self.chain.x.clone());
            let mode = stream.mode(&start, t)?;
            let dist = distance(self.chain.x.as_slice(), mode.as_slice());
            self.mode = Some(mode);
            Some((t as f64 + self.config.offset).sqrt() * dist)
        } else {
            None
        };

        let audit = EpochAudit {
            epoch: t,
            grad_evals,
            refreshes,
            steps,
            step_evals,
            reset,
            checkpoint_epoch: checkpoint_epoch(t),
            drift,
            scaled_mode_distance,
        };
        self.audits.push(audit.clone());
        Ok(audit)
    }

    /// Runs epochs until `epoch() == upto`.
    pub fn run_until(&mut self, stream: &ModelStream, upto: usize) -> Result<()> {
        while self.chain.epoch < upto {
            self.advance_epoch(stream)?;
        }
        Ok(())
    }
}
