//! Summand functions `f_k` of the potential `F_t = f_0 + ... + f_t` and their
//! value, gradient and Hessian oracles.
//!
//! Raw oracle methods on [`FunctionTerm`] are uncounted. Samplers go through
//! the counted entry points ([`FunctionTerm::grad`], [`ModelStream::full_gradient`],
//! ...) or bump an [`EvalCounter`] themselves at each oracle call, so that
//! budgets are comparable across samplers.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, solve_spd, Matrix, Vector};

/// A user-supplied summand.
pub trait CustomTerm: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    /// `out += scale * grad f(x)`.
    fn add_gradient(&self, x: &[f64], scale: f64, out: &mut [f64]);
    fn hessian(&self, _x: &[f64]) -> Option<Matrix> {
        None
    }
    fn lipschitz(&self) -> Option<f64> {
        None
    }
}

#[derive(Clone, Debug)]
pub enum FunctionTerm {
    /// `(alpha / 2) |x|^2`.
    GaussianPrior { alpha: f64, dim: usize },
    /// `-log sigmoid(y u^T x)` with `y` in `{-1, +1}`.
    Logistic { u: Vector, y: f64 },
    /// `(precision / 2) (y - z^T x)^2`.
    LinearGaussian { z: Vector, y: f64, precision: f64 },
    /// `(1 / 2) |x - center|^2`, one observation of a Gaussian mean.
    GaussianMean { center: Vector },
    Custom(Arc<dyn CustomTerm>),
}

/// Numerically stable `log(1 + e^x)`.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl FunctionTerm {
    pub fn gaussian_prior(alpha: f64, dim: usize) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) || dim == 0 {
            return Err(Error::Config(format!(
                "prior needs alpha >= 0 and dim >= 1 (alpha = {alpha}, dim = {dim})"
            )));
        }
        Ok(FunctionTerm::GaussianPrior { alpha, dim })
    }

    pub fn logistic(u: Vector, y: f64) -> Result<Self> {
        if y != 1.0 && y != -1.0 {
            return Err(Error::Data(format!("logistic label must be +1 or -1, got {y}")));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("logistic features"));
        }
        Ok(FunctionTerm::Logistic { u, y })
    }

    pub fn linear_gaussian(z: Vector, y: f64, precision: f64) -> Result<Self> {
        if !(precision > 0.0 && precision.is_finite()) {
            return Err(Error::Config(format!(
                "noise precision must be positive, got {precision}"
            )));
        }
        Ok(FunctionTerm::LinearGaussian { z, y, precision })
    }

    pub fn gaussian_mean(center: Vector) -> Self {
        FunctionTerm::GaussianMean { center }
    }

    pub fn dim(&self) -> usize {
        match self {
            FunctionTerm::GaussianPrior { dim, .. } => *dim,
            FunctionTerm::Logistic { u, .. } => u.len(),
            FunctionTerm::LinearGaussian { z, .. } => z.len(),
            FunctionTerm::GaussianMean { center } => center.len(),
            FunctionTerm::Custom(c) => c.dim(),
        }
    }

    /// Uncounted value oracle.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        match self {
            FunctionTerm::GaussianPrior { alpha, .. } => 0.5 * alpha * dot(x, x),
            FunctionTerm::Logistic { u, y } => softplus(-y * dot(u.as_slice(), x)),
            FunctionTerm::LinearGaussian { z, y, precision } => {
                let r = y - dot(z.as_slice(), x);
                0.5 * precision * r * r
            }
            FunctionTerm::GaussianMean { center } => {
                0.5 * center
                    .iter()
                    .zip(x)
                    .map(|(c, v)| (v - c) * (v - c))
                    .sum::<f64>()
            }
            FunctionTerm::Custom(c) => c.value(x),
        }
    }

    /// Uncounted gradient oracle: `out += scale * grad f(x)`.
    pub fn accumulate_gradient(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        match self {
            FunctionTerm::GaussianPrior { alpha, .. } => {
                let a = scale * alpha;
                for (o, v) in out.iter_mut().zip(x) {
                    *o += a * v;
                }
            }
            FunctionTerm::Logistic { u, y } => {
                // grad = -y * sigmoid(-y u.x) * u
                let m = y * dot(u.as_slice(), x);
                let coef = scale * (-y * sigmoid(-m));
                for (o, ui) in out.iter_mut().zip(u.iter()) {
                    *o += coef * ui;
                }
            }
            FunctionTerm::LinearGaussian { z, y, precision } => {
                let r = y - dot(z.as_slice(), x);
                let coef = scale * (-precision * r);
                for (o, zi) in out.iter_mut().zip(z.iter()) {
                    *o += coef * zi;
                }
            }
            FunctionTerm::GaussianMean { center } => {
                for ((o, v), c) in out.iter_mut().zip(x).zip(center.iter()) {
                    *o += scale * (v - c);
                }
            }
            FunctionTerm::Custom(c) => c.add_gradient(x, scale, out),
        }
    }

    /// Value plus `out += grad f(x)` in one pass; used where both are needed.
    pub fn value_and_accumulate_gradient(&self, x: &[f64], out: &mut [f64]) -> f64 {
        match self {
            FunctionTerm::Logistic { u, y } => {
                let m = y * dot(u.as_slice(), x);
                let coef = -y * sigmoid(-m);
                for (o, ui) in out.iter_mut().zip(u.iter()) {
                    *o += coef * ui;
                }
                softplus(-m)
            }
            _ => {
                self.accumulate_gradient(x, 1.0, out);
                self.value_at(x)
            }
        }
    }

    /// Uncounted Hessian oracle.
    pub fn hessian_at(&self, x: &[f64]) -> Option<Matrix> {
        let d = self.dim();
        match self {
            FunctionTerm::GaussianPrior { alpha, .. } => Some(Matrix::identity(d, d) * *alpha),
            FunctionTerm::Logistic { u, y } => {
                let m = y * dot(u.as_slice(), x);
                let w = sigmoid(m) * sigmoid(-m);
                Some(u * u.transpose() * w)
            }
            FunctionTerm::LinearGaussian { z, precision, .. } => {
                Some(z * z.transpose() * *precision)
            }
            FunctionTerm::GaussianMean { .. } => Some(Matrix::identity(d, d)),
            FunctionTerm::Custom(c) => c.hessian(x),
        }
    }

    /// Diagonal of the Hessian, when available.
    pub fn hessian_diagonal_at(&self, x: &[f64]) -> Option<Vector> {
        match self {
            FunctionTerm::GaussianPrior { alpha, dim } => Some(Vector::from_element(*dim, *alpha)),
            FunctionTerm::Logistic { u, y } => {
                let m = y * dot(u.as_slice(), x);
                let w = sigmoid(m) * sigmoid(-m);
                Some(u.map(|v| w * v * v))
            }
            FunctionTerm::LinearGaussian { z, precision, .. } => {
                Some(z.map(|v| precision * v * v))
            }
            FunctionTerm::GaussianMean { center } => Some(Vector::from_element(center.len(), 1.0)),
            FunctionTerm::Custom(c) => c.hessian(x).map(|h| h.diagonal()),
        }
    }

    /// Lipschitz constant of the gradient.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            FunctionTerm::GaussianPrior { alpha, .. } => Some(*alpha),
            FunctionTerm::Logistic { u, .. } => Some(u.norm_squared() / 4.0),
            FunctionTerm::LinearGaussian { z, precision, .. } => Some(precision * z.norm_squared()),
            FunctionTerm::GaussianMean { .. } => Some(1.0),
            FunctionTerm::Custom(c) => c.lipschitz(),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Counted gradient.
    pub fn grad(&self, x: &Vector, counter: &mut EvalCounter) -> Result<Vector> {
        self.check_dim(x.as_slice())?;
        let mut out = Vector::zeros(x.len());
        self.accumulate_gradient(x.as_slice(), 1.0, out.as_mut_slice());
        counter.gradients += 1;
        Ok(out)
    }

    /// Counted value.
    pub fn value(&self, x: &Vector, counter: &mut EvalCounter) -> Result<f64> {
        self.check_dim(x.as_slice())?;
        counter.values += 1;
        Ok(self.value_at(x.as_slice()))
    }

    /// Counted Hessian.
    pub fn hessian(&self, x: &Vector, counter: &mut EvalCounter) -> Result<Matrix> {
        self.check_dim(x.as_slice())?;
        let h = self.hessian_at(x.as_slice()).ok_or(Error::HessianUnsupported)?;
        counter.hessians += 1;
        Ok(h)
    }
}

/// Oracle-call accounting for one chain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounter {
    pub gradients: u64,
    pub values: u64,
    pub hessians: u64,
}

/// The prior `f_0` plus an append-only sequence of terms `f_1, f_2, ...`.
#[derive(Clone, Debug)]
pub struct ModelStream {
    dim: usize,
    prior: FunctionTerm,
    terms: Vec<FunctionTerm>,
}

impl ModelStream {
    pub fn new(prior: FunctionTerm) -> Self {
        Self {
            dim: prior.dim(),
            prior,
            terms: Vec::new(),
        }
    }

    pub fn with_terms(prior: FunctionTerm, terms: Vec<FunctionTerm>) -> Result<Self> {
        let mut stream = Self::new(prior);
        for t in terms {
            stream.push(t)?;
        }
        Ok(stream)
    }

    /// Appends `f_t` and returns its index `t`.
    pub fn push(&mut self, term: FunctionTerm) -> Result<usize> {
        if term.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: term.dim(),
            });
        }
        self.terms.push(term);
        Ok(self.terms.len())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of non-prior terms.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn prior(&self) -> &FunctionTerm {
        &self.prior
    }

    /// `f_k`; index 0 is the prior.
    pub fn term(&self, k: usize) -> &FunctionTerm {
        if k == 0 {
            &self.prior
        } else {
            &self.terms[k - 1]
        }
    }

    /// Terms `f_1..f_t`.
    pub fn terms(&self) -> &[FunctionTerm] {
        &self.terms
    }

    /// A stream holding only the first `upto` terms.
    pub fn truncated(&self, upto: usize) -> Self {
        Self {
            dim: self.dim,
            prior: self.prior.clone(),
            terms: self.terms[..upto.min(self.terms.len())].to_vec(),
        }
    }

    fn check(&self, x: &[f64], upto: usize) -> Result<()> {
        if upto > self.terms.len() {
            return Err(Error::EpochOrder {
                epoch: upto,
                available: self.terms.len(),
            });
        }
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `sum_{k=0}^{upto} grad f_k(x)`, counting `upto + 1` gradient calls.
    pub fn full_gradient(&self, x: &Vector, upto: usize, counter: &mut EvalCounter) -> Result<Vector> {
        self.check(x.as_slice(), upto)?;
        let mut out = Vector::zeros(self.dim);
        self.accumulate_full_gradient(x.as_slice(), upto, out.as_mut_slice());
        counter.gradients += upto as u64 + 1;
        Ok(out)
    }

    /// Uncounted `out += grad F_upto(x)`.
    pub fn accumulate_full_gradient(&self, x: &[f64], upto: usize, out: &mut [f64]) {
        self.prior.accumulate_gradient(x, 1.0, out);
        for term in &self.terms[..upto] {
            term.accumulate_gradient(x, 1.0, out);
        }
    }

    /// `F_upto(x)`, counting `upto + 1` value calls.
    pub fn potential(&self, x: &Vector, upto: usize, counter: &mut EvalCounter) -> Result<f64> {
        self.check(x.as_slice(), upto)?;
        counter.values += upto as u64 + 1;
        Ok(self.potential_at(x.as_slice(), upto))
    }

    pub(crate) fn potential_at(&self, x: &[f64], upto: usize) -> f64 {
        self.prior.value_at(x) + self.terms[..upto].iter().map(|t| t.value_at(x)).sum::<f64>()
    }

    /// Value and gradient of `F_upto` in one pass over the terms; counts one
    /// value and one gradient call per term.
    pub fn potential_and_gradient(
        &self,
        x: &Vector,
        upto: usize,
        counter: &mut EvalCounter,
    ) -> Result<(f64, Vector)> {
        self.check(x.as_slice(), upto)?;
        let mut grad = Vector::zeros(self.dim);
        let xs = x.as_slice();
        let mut value = self.prior.value_and_accumulate_gradient(xs, grad.as_mut_slice());
        for term in &self.terms[..upto] {
            value += term.value_and_accumulate_gradient(xs, grad.as_mut_slice());
        }
        counter.gradients += upto as u64 + 1;
        counter.values += upto as u64 + 1;
        Ok((value, grad))
    }

    /// `sum_{k=0}^{upto} hess f_k(x)`.
    pub fn full_hessian(&self, x: &Vector, upto: usize, counter: &mut EvalCounter) -> Result<Matrix> {
        self.check(x.as_slice(), upto)?;
        let mut h = self
            .prior
            .hessian_at(x.as_slice())
            .ok_or(Error::HessianUnsupported)?;
        for term in &self.terms[..upto] {
            h += term.hessian_at(x.as_slice()).ok_or(Error::HessianUnsupported)?;
        }
        counter.hessians += upto as u64 + 1;
        Ok(h)
    }

    /// Largest Lipschitz constant among `f_1..f_upto`.
    pub fn max_lipschitz(&self, upto: usize) -> Result<f64> {
        self.terms[..upto.min(self.terms.len())]
            .iter()
            .map(|t| t.lipschitz().ok_or(Error::LipschitzUnknown))
            .try_fold(0.0f64, |acc, l| Ok(acc.max(l?)))
    }

    /// Minimizer of `F_upto`, to `|grad F_upto| <= tol`.
    ///
    /// Newton directions with Armijo backtracking when every term has a
    /// Hessian, plain gradient descent with backtracking otherwise. This is
    /// a diagnostic oracle; its evaluations are not charged to any chain.
    pub fn find_mode(&self, start: &Vector, upto: usize, tol: f64) -> Result<Vector> {
        self.check(start.as_slice(), upto)?;
        const MAX_ITER: usize = 10_000;
        let mut scratch = EvalCounter::default();
        let mut x = start.clone();
        let mut value = self.potential_at(x.as_slice(), upto);
        let mut step_hint = 1.0;
        for _ in 0..MAX_ITER {
            let grad = self.full_gradient(&x, upto, &mut scratch)?;
            let gnorm = grad.norm();
            if gnorm <= tol {
                return Ok(x);
            }
            let newton = self
                .full_hessian(&x, upto, &mut scratch)
                .ok()
                .and_then(|h| solve_spd(&h, &grad).ok());
            let is_newton = newton.is_some();
            let (direction, mut step) = match newton {
                Some(n) => (-n, 1.0),
                None => (-grad.clone(), step_hint),
            };
            let slope = grad.dot(&direction);
            let mut accepted = false;
            for _ in 0..60 {
                let candidate = &x + &direction * step;
                let cv = self.potential_at(candidate.as_slice(), upto);
                if cv.is_finite() && cv <= value + 1e-4 * step * slope {
                    x = candidate;
                    value = cv;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                // Values can stall at rounding level before the gradient does;
                // take the step if it still shrinks the gradient.
                let candidate = &x + &direction * step.max(1e-3);
                let mut g2 = Vector::zeros(self.dim);
                self.accumulate_full_gradient(candidate.as_slice(), upto, g2.as_mut_slice());
                if g2.norm() < gnorm {
                    x = candidate;
                    value = self.potential_at(x.as_slice(), upto);
                } else {
                    return Err(Error::NoConvergence {
                        iterations: MAX_ITER,
                        grad_norm: gnorm,
                    });
                }
            } else if !is_newton {
                step_hint = (step * 2.0).min(1e6);
            }
        }
        let mut g = Vector::zeros(self.dim);
        self.accumulate_full_gradient(x.as_slice(), upto, g.as_mut_slice());
        Err(Error::NoConvergence {
            iterations: MAX_ITER,
            grad_norm: g.norm(),
        })
    }

    /// [`find_mode`](Self::find_mode) with the standard tolerance
    /// `1e-8 * (upto + 1)`.
    pub fn mode(&self, start: &Vector, upto: usize) -> Result<Vector> {
        self.find_mode(start, upto, 1e-8 * (upto as f64 + 1.0))
    }
}
