//! Comparison samplers: plain SGLD, MALA (and its unadjusted limit), the
//! full Laplace approximation and a diagonal online Laplace approximation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{EvalCounter, ModelStream};
use crate::numerics::{GaussianApprox, Matrix, RngStream, Vector};
use crate::saga::{ChainState, StepInfo};

/// `eta_t = eta0 / (1 + decay * t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSchedule {
    pub eta0: f64,
    pub decay: f64,
}

impl StepSchedule {
    pub fn new(eta0: f64, decay: f64) -> Result<Self> {
        if !(eta0 > 0.0 && eta0.is_finite()) || !(decay >= 0.0 && decay.is_finite()) {
            return Err(Error::Config(format!(
                "step schedule needs eta0 > 0 and decay >= 0, got {eta0}, {decay}"
            )));
        }
        Ok(Self { eta0, decay })
    }

    pub fn at(&self, t: usize) -> f64 {
        self.eta0 / (1.0 + self.decay * t as f64)
    }

    pub fn benchmark_sgld() -> Self {
        Self { eta0: 0.01, decay: 0.5 }
    }

    pub fn benchmark_mala() -> Self {
        Self { eta0: 0.1, decay: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgldConfig {
    pub schedule: StepSchedule,
    pub batch_size: usize,
    pub i_max: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MalaConfig {
    pub schedule: StepSchedule,
    /// Proposals per epoch.
    pub steps: u64,
    /// `false` accepts every proposal (unadjusted Langevin).
    #[serde(default = "yes")]
    pub adjust: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BaselineConfig {
    Sgld(SgldConfig),
    Mala(MalaConfig),
    LaplaceFull {},
    LaplaceOnline {},
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            BaselineConfig::Sgld(c) => {
                StepSchedule::new(c.schedule.eta0, c.schedule.decay)?;
                if c.batch_size == 0 {
                    return Err(Error::Config("sgld batch size must be at least 1".into()));
                }
            }
            BaselineConfig::Mala(c) => {
                StepSchedule::new(c.schedule.eta0, c.schedule.decay)?;
            }
            BaselineConfig::LaplaceFull {} | BaselineConfig::LaplaceOnline {} => {}
        }
        Ok(())
    }
}

fn check_stream(state: &ChainState, stream: &ModelStream) -> Result<usize> {
    let t = state.epoch;
    if stream.len() < t {
        return Err(Error::EpochOrder {
            epoch: t,
            available: stream.len(),
        });
    }
    if stream.dim() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: stream.dim(),
            got: state.dim(),
        });
    }
    Ok(t)
}

/// Fills the chain's gradient buffer with
/// `grad f_0(x) + (t / b) sum_{k in S} grad f_k(x)` for a fresh batch.
fn sgld_gradient_into(state: &mut ChainState, stream: &ModelStream, batch_size: usize) -> Result<usize> {
    let t = check_stream(state, stream)?;
    if t > 0 {
        state.draw_batch(t, batch_size);
    } else {
        state.draw_batch(0, 0);
    }
    let weight = t as f64 / batch_size as f64;
    let (distinct, x, grad) = state.batch_point_gradient();
    grad.clear();
    grad.resize(x.len(), 0.0);
    stream.prior().accumulate_gradient(x, 1.0, grad);
    for &(k, mult) in distinct {
        stream.term(k).accumulate_gradient(x, weight * mult as f64, grad);
    }
    let n = distinct.len();
    state.evals.gradients += n as u64 + 1;
    Ok(n)
}

/// One draw of the plain stochastic gradient at the current state.
pub fn sgld_gradient(state: &mut ChainState, stream: &ModelStream, batch_size: usize) -> Result<(Vector, usize)> {
    let n = sgld_gradient_into(state, stream, batch_size)?;
    Ok((Vector::from_column_slice(state.last_gradient()), n))
}

pub fn sgld_step(state: &mut ChainState, stream: &ModelStream, batch_size: usize) -> Result<StepInfo> {
    let distinct = sgld_gradient_into(state, stream, batch_size)?;
    state.langevin_move()?;
    Ok(StepInfo { distinct })
}

/// Advances to epoch `t + 1` and runs `i_max` SGLD steps at `eta_{t+1}`.
/// Returns the summed step cost.
pub fn sgld_epoch(state: &mut ChainState, stream: &ModelStream, config: &SgldConfig) -> Result<u64> {
    state.epoch += 1;
    state.eta = config.schedule.at(state.epoch);
    let mut cost = 0;
    for _ in 0..config.i_max {
        cost += sgld_step(state, stream, config.batch_size)?.cost();
    }
    Ok(cost)
}

/// Unadjusted Langevin step with the exact gradient of `F_t`.
pub fn ula_step(state: &mut ChainState, stream: &ModelStream) -> Result<()> {
    let t = check_stream(state, stream)?;
    state.draw_batch(0, 0);
    let (_, x, grad) = state.batch_point_gradient();
    grad.clear();
    grad.resize(x.len(), 0.0);
    stream.accumulate_full_gradient(x, t, grad);
    state.evals.gradients += t as u64 + 1;
    state.langevin_move()
}

/// A MALA chain targeting `exp(-F_t)` for `t = chain.epoch`.
#[derive(Clone, Debug)]
pub struct MalaChain {
    pub chain: ChainState,
    // potential and gradient at `chain.x` for the current epoch
    current: Option<(f64, Vector)>,
    pub proposed: u64,
    pub accepted: u64,
}

impl MalaChain {
    pub fn new(chain: ChainState) -> Self {
        Self {
            chain,
            current: None,
            proposed: 0,
            accepted: 0,
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            return f64::NAN;
        }
        self.accepted as f64 / self.proposed as f64
    }

    /// Moves the chain to `x`, dropping the cached potential.
    pub fn set_point(&mut self, x: Vector) {
        self.chain.x = x;
        self.current = None;
    }

    /// One Metropolis-adjusted Langevin proposal. Returns whether it was
    /// accepted; with `adjust == false` every proposal is taken.
    pub fn step(&mut self, stream: &ModelStream, adjust: bool) -> Result<bool> {
        let t = check_stream(&self.chain, stream)?;
        let (u, g) = match self.current.take() {
            Some(c) => c,
            None => stream.potential_and_gradient(&self.chain.x, t, &mut self.chain.evals)?,
        };
        let eta = self.chain.eta;
        let x_old = self.chain.x.clone();
        self.chain.draw_batch(0, 0);
        {
            let (_, _, grad) = self.chain.batch_point_gradient();
            grad.clear();
            grad.extend_from_slice(g.as_slice());
        }
        self.chain.langevin_move()?;
        self.proposed += 1;
        if !adjust {
            self.accepted += 1;
            return Ok(true);
        }
        let (u_new, g_new) = stream.potential_and_gradient(&self.chain.x, t, &mut self.chain.evals)?;
        let x_new = &self.chain.x;
        // log q(a | b) = -|a - b + eta grad F(b)|^2 / (4 eta)
        let forward = (x_new - &x_old + &g * eta).norm_squared();
        let backward = (&x_old - x_new + &g_new * eta).norm_squared();
        let log_ratio = u - u_new + (forward - backward) / (4.0 * eta);
        let accept = log_ratio >= 0.0 || self.chain.rng.uniform().ln() < log_ratio;
        if accept {
            self.accepted += 1;
            self.current = Some((u_new, g_new));
        } else {
            self.chain.x = x_old;
            self.current = Some((u, g));
        }
        Ok(accept)
    }

    /// Advances to epoch `t + 1` and makes `steps` proposals at `eta_{t+1}`.
    pub fn epoch(&mut self, stream: &ModelStream, config: &MalaConfig, steps: u64) -> Result<()> {
        self.chain.epoch += 1;
        self.chain.eta = config.schedule.at(self.chain.epoch);
        self.current = None;
        for _ in 0..steps {
            self.step(stream, config.adjust)?;
        }
        Ok(())
    }
}

/// Gaussian at the mode of `F_t` with covariance the inverse Hessian there.
/// The mode search starts at `start`; only the final Hessian is charged.
pub fn laplace_full(
    stream: &ModelStream,
    t: usize,
    start: &Vector,
    counter: &mut EvalCounter,
) -> Result<GaussianApprox> {
    let mode = stream.mode(start, t)?;
    let h = stream.full_hessian(&mode, t, counter)?;
    GaussianApprox::from_precision(mode, h)
}

/// Diagonal quadratic approximation updated by one diagonal Newton step per
/// arriving term.
#[derive(Clone, Debug, PartialEq)]
pub struct OnlineLaplace {
    mean: Vector,
    precision: Vector,
    epoch: usize,
}

impl OnlineLaplace {
    /// Starts at the prior's mode with its Hessian diagonal.
    pub fn new(stream: &ModelStream, counter: &mut EvalCounter) -> Result<Self> {
        let d = stream.dim();
        let mean = stream.mode(&Vector::zeros(d), 0)?;
        let precision = stream
            .prior()
            .hessian_diagonal_at(mean.as_slice())
            .ok_or(Error::HessianUnsupported)?;
        counter.hessians += 1;
        Ok(Self {
            mean,
            precision,
            epoch: 0,
        })
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    /// Per-coordinate precisions.
    pub fn precision(&self) -> &Vector {
        &self.precision
    }

    /// Absorbs `f_{t+1}`.
    pub fn update(&mut self, stream: &ModelStream, counter: &mut EvalCounter) -> Result<()> {
        let t = self.epoch + 1;
        if stream.len() < t {
            return Err(Error::EpochOrder {
                epoch: t,
                available: stream.len(),
            });
        }
        let term = stream.term(t);
        let g = term.grad(&self.mean, counter)?;
        let h = term
            .hessian_diagonal_at(self.mean.as_slice())
            .ok_or(Error::HessianUnsupported)?;
        counter.hessians += 1;
        for i in 0..self.mean.len() {
            self.mean[i] -= g[i] / (self.precision[i] + h[i]);
        }
        let h = term
            .hessian_diagonal_at(self.mean.as_slice())
            .ok_or(Error::HessianUnsupported)?;
        counter.hessians += 1;
        self.precision += h;
        self.epoch = t;
        Ok(())
    }

    pub fn approx(&self) -> Result<GaussianApprox> {
        GaussianApprox::from_precision(self.mean.clone(), Matrix::from_diagonal(&self.precision))
    }

    pub fn sample(&self, rng: &mut RngStream) -> Vector {
        Vector::from_fn(self.mean.len(), |i, _| {
            self.mean[i] + rng.standard_normal() / self.precision[i].sqrt()
        })
    }
}
