//! The SAGA-LD kernel: Langevin steps driven by a cached-gradient,
//! variance-reduced stochastic gradient.
//!
//! For terms `1..=t` the cache holds `G^k = grad f_k(u_k)` at some past point
//! `u_k` and the running sum `s = sum_k G^k`. One step draws a multiset `S`
//! of `b` indices with replacement and uses
//!
//! ```text
//! g = scale * (grad f_0(x) + s + (t / b) * sum_{k in S} (grad f_k(x) - G^k))
//! x <- x - eta * g + sqrt(2 eta) * xi,   xi ~ N(0, I)
//! ```
//!
//! after which every distinct `k` in `S` has its cache entry replaced by the
//! fresh gradient. A step costs `|set(S)| + 1` gradient evaluations.

use std::collections::BTreeMap;

use crate::error::{Divergence, Error, Result};
use crate::models::{EvalCounter, ModelStream};
use crate::numerics::{norm, RngStream, Vector};

/// Per-term cached gradients with their running sum and refresh stamps.
#[derive(Clone, Debug)]
pub struct GradientCache {
    dim: usize,
    grads: Vec<f64>,
    sum: Vec<f64>,
    stamps: Vec<usize>,
    // epoch -> indices whose stamp is that epoch
    buckets: BTreeMap<usize, Vec<usize>>,
}

impl GradientCache {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            grads: Vec::new(),
            sum: vec![0.0; dim],
            stamps: Vec::new(),
            buckets: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of cached terms `t`.
    pub fn len(&self) -> usize {
        self.stamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stamps.is_empty()
    }

    /// Appends the entry for the next index and returns that index.
    pub fn push(&mut self, grad: &[f64], epoch: usize) -> usize {
        assert_eq!(grad.len(), self.dim, "cache entry dimension");
        self.grads.extend_from_slice(grad);
        for (s, g) in self.sum.iter_mut().zip(grad) {
            *s += g;
        }
        self.stamps.push(epoch);
        let k = self.stamps.len();
        self.buckets.entry(epoch).or_default().push(k);
        k
    }

    /// `G^k` for `k` in `1..=len`.
    pub fn gradient(&self, k: usize) -> &[f64] {
        &self.grads[(k - 1) * self.dim..k * self.dim]
    }

    /// The running sum `s`.
    pub fn sum(&self) -> &[f64] {
        &self.sum
    }

    /// Epoch at which `G^k` was last recomputed.
    pub fn stamp(&self, k: usize) -> usize {
        self.stamps[k - 1]
    }

    pub fn stamps(&self) -> &[usize] {
        &self.stamps
    }

    /// Replaces `G^k`, updating `s` by the difference.
    pub fn replace(&mut self, k: usize, grad: &[f64], epoch: usize) {
        let row = &mut self.grads[(k - 1) * self.dim..k * self.dim];
        for ((s, old), new) in self.sum.iter_mut().zip(row.iter_mut()).zip(grad) {
            *s += new - *old;
            *old = *new;
        }
        if self.stamps[k - 1] != epoch {
            self.stamps[k - 1] = epoch;
            self.buckets.entry(epoch).or_default().push(k);
        }
    }

    /// `sum_k G^k` recomputed from the entries.
    pub fn recomputed_sum(&self) -> Vector {
        let mut s = Vector::zeros(self.dim);
        for row in self.grads.chunks_exact(self.dim.max(1)) {
            for (a, g) in s.iter_mut().zip(row) {
                *a += g;
            }
        }
        s
    }

    /// Relative difference between the maintained and the recomputed sum.
    pub fn sum_drift(&self) -> f64 {
        let exact = self.recomputed_sum();
        let diff: f64 = exact
            .iter()
            .zip(&self.sum)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale = exact.norm().max(self.grads.iter().map(|g| g.abs()).fold(0.0, f64::max));
        if scale == 0.0 {
            diff
        } else {
            diff / scale
        }
    }

    /// Removes and returns, in ascending stamp order, every index whose stamp
    /// is `<= upto`. The caller must give each of them a new stamp.
    pub(crate) fn take_stale(&mut self, upto: usize) -> Vec<usize> {
        let keep = self.buckets.split_off(&(upto + 1));
        let stale = std::mem::replace(&mut self.buckets, keep);
        let mut out = Vec::new();
        for (epoch, indices) in stale {
            out.extend(indices.into_iter().filter(|&k| self.stamps[k - 1] == epoch));
        }
        out
    }
}

/// Fills a fresh cache with `G^k = grad f_k(x)` for `k = 1..=upto`, charging
/// exactly `upto` gradient evaluations.
pub fn rebuild_cache(
    stream: &ModelStream,
    x: &Vector,
    upto: usize,
    epoch: usize,
    counter: &mut EvalCounter,
) -> Result<GradientCache> {
    if upto > stream.len() {
        return Err(Error::EpochOrder {
            epoch: upto,
            available: stream.len(),
        });
    }
    if x.len() != stream.dim() {
        return Err(Error::DimensionMismatch {
            expected: stream.dim(),
            got: x.len(),
        });
    }
    let d = stream.dim();
    let mut cache = GradientCache::new(d);
    let mut g = vec![0.0; d];
    for k in 1..=upto {
        g.fill(0.0);
        stream.term(k).accumulate_gradient(x.as_slice(), 1.0, &mut g);
        counter.gradients += 1;
        cache.push(&g, epoch);
    }
    Ok(cache)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SagaParams {
    pub batch_size: usize,
    /// Multiplier on the whole potential: 1 online, the inverse
    /// temperature offline.
    pub scale: f64,
}

impl SagaParams {
    pub fn new(batch_size: usize, scale: f64) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!("scale must be positive, got {scale}")));
        }
        Ok(Self { batch_size, scale })
    }
}

#[derive(Clone, Debug, Default)]
struct Workspace {
    batch: Vec<usize>,
    distinct: Vec<(usize, usize)>,
    fresh: Vec<f64>,
    grad: Vec<f64>,
    noise: Vec<f64>,
}

/// One Langevin chain: iterate, step size, epoch, randomness and budget.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub x: Vector,
    pub eta: f64,
    pub epoch: usize,
    pub rng: RngStream,
    pub evals: EvalCounter,
    pub steps: u64,
    guard: f64,
    work: Workspace,
}

/// What a single step touched.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepInfo {
    /// `|set(S)|`.
    pub distinct: usize,
}

impl StepInfo {
    /// Gradient evaluations charged for the step.
    pub fn cost(&self) -> u64 {
        self.distinct as u64 + 1
    }
}

impl ChainState {
    pub fn new(x0: Vector, eta: f64, epoch: usize, rng: RngStream) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Config(format!("step size must be positive, got {eta}")));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("initial point"));
        }
        let guard = 1e6 * (1.0 + x0.norm());
        Ok(Self {
            x: x0,
            eta,
            epoch,
            rng,
            evals: EvalCounter::default(),
            steps: 0,
            guard,
            work: Workspace::default(),
        })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Radius beyond which the chain is declared divergent.
    pub fn guard_radius(&self) -> f64 {
        self.guard
    }

    /// Draws `b` indices from `1..=t` with replacement into the workspace and
    /// groups them as `(index, multiplicity)` in ascending index order.
    pub(crate) fn draw_batch(&mut self, t: usize, b: usize) {
        let w = &mut self.work;
        w.batch.clear();
        for _ in 0..b {
            w.batch.push(self.rng.index(t) + 1);
        }
        let mut sorted = w.batch.clone();
        sorted.sort_unstable();
        w.distinct.clear();
        for k in sorted {
            match w.distinct.last_mut() {
                Some((last, m)) if *last == k => *m += 1,
                _ => w.distinct.push((k, 1)),
            }
        }
    }

    /// The multiset drawn by the latest batch, in draw order.
    pub fn last_batch(&self) -> &[usize] {
        &self.work.batch
    }

    /// Langevin move `x <- x - eta * g + sqrt(2 eta) xi` using the gradient in
    /// the workspace, followed by the divergence guard.
    pub(crate) fn langevin_move(&mut self) -> Result<()> {
        let d = self.dim();
        let w = &mut self.work;
        if w.grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                step: self.steps,
                reason: Divergence::NonFiniteGradient,
            });
        }
        w.noise.resize(d, 0.0);
        self.rng.fill_gaussian(&mut w.noise);
        let sigma = (2.0 * self.eta).sqrt();
        for ((x, g), xi) in self.x.iter_mut().zip(&w.grad).zip(&w.noise) {
            *x = *x - self.eta * g + sigma * xi;
        }
        self.steps += 1;
        let n = norm(self.x.as_slice());
        if !(n <= self.guard) {
            return Err(Error::Diverged {
                step: self.steps,
                reason: Divergence::Escaped {
                    norm: n,
                    limit: self.guard,
                },
            });
        }
        Ok(())
    }

    /// Split borrow of the latest distinct batch, the iterate and the
    /// gradient buffer.
    pub(crate) fn batch_point_gradient(&mut self) -> (&[(usize, usize)], &[f64], &mut Vec<f64>) {
        (&self.work.distinct, self.x.as_slice(), &mut self.work.grad)
    }

    /// The gradient used by the most recent step.
    pub fn last_gradient(&self) -> &[f64] {
        &self.work.grad
    }
}

fn check_shapes(state: &ChainState, cache: &GradientCache, stream: &ModelStream) -> Result<usize> {
    let t = state.epoch;
    if t >= 1 && cache.is_empty() {
        return Err(Error::EmptyCache(t));
    }
    if cache.len() != t {
        return Err(Error::CacheMismatch {
            cached: cache.len(),
            epoch: t,
        });
    }
    if stream.len() < t {
        return Err(Error::EpochOrder {
            epoch: t,
            available: stream.len(),
        });
    }
    if state.dim() != stream.dim() {
        return Err(Error::DimensionMismatch {
            expected: stream.dim(),
            got: state.dim(),
        });
    }
    Ok(t)
}

/// Computes the variance-reduced gradient at `state.x` into the workspace,
/// drawing a fresh batch. Leaves the cache untouched; fresh per-term
/// gradients stay in the workspace for the cache update.
fn compute_gradient(
    state: &mut ChainState,
    cache: &GradientCache,
    stream: &ModelStream,
    params: &SagaParams,
) -> Result<usize> {
    let t = check_shapes(state, cache, stream)?;
    let d = state.dim();
    let b = params.batch_size;
    if t > 0 {
        state.draw_batch(t, b);
    } else {
        state.work.batch.clear();
        state.work.distinct.clear();
    }

    let w = &mut state.work;
    let x = state.x.as_slice();
    w.grad.clear();
    w.grad.resize(d, 0.0);
    stream.prior().accumulate_gradient(x, 1.0, &mut w.grad);
    state.evals.gradients += 1;
    for (g, s) in w.grad.iter_mut().zip(cache.sum()) {
        *g += s;
    }

    let weight = t as f64 / b as f64;
    w.fresh.clear();
    w.fresh.resize(w.distinct.len() * d, 0.0);
    for (j, &(k, mult)) in w.distinct.iter().enumerate() {
        let fresh = &mut w.fresh[j * d..(j + 1) * d];
        stream.term(k).accumulate_gradient(x, 1.0, fresh);
        state.evals.gradients += 1;
        let c = weight * mult as f64;
        for ((g, new), old) in w.grad.iter_mut().zip(fresh.iter()).zip(cache.gradient(k)) {
            *g += c * (new - old);
        }
    }
    for g in w.grad.iter_mut() {
        *g *= params.scale;
    }
    Ok(w.distinct.len())
}

/// Draws one variance-reduced gradient at the current state without moving
/// the chain or touching the cache. Returns the gradient and `|set(S)|`.
pub fn estimate_gradient(
    state: &mut ChainState,
    cache: &GradientCache,
    stream: &ModelStream,
    params: &SagaParams,
) -> Result<(Vector, usize)> {
    let distinct = compute_gradient(state, cache, stream, params)?;
    Ok((Vector::from_column_slice(&state.work.grad), distinct))
}

/// One SAGA-LD step.
pub fn saga_step(
    state: &mut ChainState,
    cache: &mut GradientCache,
    stream: &ModelStream,
    params: &SagaParams,
) -> Result<StepInfo> {
    let distinct = compute_gradient(state, cache, stream, params)?;
    state.langevin_move()?;
    let d = state.dim();
    let epoch = state.epoch;
    for (j, &(k, _)) in state.work.distinct.iter().enumerate() {
        cache.replace(k, &state.work.fresh[j * d..(j + 1) * d], epoch);
    }
    Ok(StepInfo { distinct })
}

/// `n_steps` sequential SAGA-LD steps. Returns the summed step cost
/// `sum (|set(S)| + 1)`; when `trajectory` is given every post-step iterate
/// is appended to it.
pub fn run_saga(
    state: &mut ChainState,
    cache: &mut GradientCache,
    stream: &ModelStream,
    params: &SagaParams,
    n_steps: u64,
    mut trajectory: Option<&mut Vec<Vector>>,
) -> Result<u64> {
    let mut cost = 0;
    for _ in 0..n_steps {
        cost += saga_step(state, cache, stream, params)?.cost();
        if let Some(tr) = trajectory.as_deref_mut() {
            tr.push(state.x.clone());
        }
    }
    Ok(cost)
}
