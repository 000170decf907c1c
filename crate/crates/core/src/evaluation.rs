//! Sample sets, the marginal-accuracy metric, conjugate posteriors, and
//! empirical audits of the regularity assumptions.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{FunctionTerm, ModelStream};
use crate::numerics::{histogram, mean, std_dev, GaussianApprox, Matrix, RngStream, Vector};

/// Draws from one sampler at one epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub sampler: String,
    pub epoch: usize,
    pub seeds: Vec<u64>,
    pub grad_evals: u64,
    pub draws: Vec<Vector>,
}

impl SampleSet {
    pub fn new(sampler: impl Into<String>, epoch: usize, draws: Vec<Vector>) -> Result<Self> {
        let d = draws.first().ok_or(Error::Empty("sample set"))?.len();
        if let Some(bad) = draws.iter().find(|x| x.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bad.len(),
            });
        }
        if draws.iter().any(|x| x.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("sample"));
        }
        Ok(Self {
            sampler: sampler.into(),
            epoch,
            seeds: Vec::new(),
            grad_evals: 0,
            draws,
        })
    }

    pub fn dim(&self) -> usize {
        self.draws[0].len()
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.draws.iter().map(|x| x[i]).collect()
    }

    /// Writes the draws as CSV with header `x1,...,xd`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record((1..=self.dim()).map(|i| format!("x{i}")))?;
        for x in &self.draws {
            w.write_record(x.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads draws written by [`write_csv`](Self::write_csv); metadata is left empty.
    pub fn read_csv(path: &Path, sampler: impl Into<String>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut draws = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let vals = rec?
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Data(format!("{} row {}: {e}", path.display(), i + 1)))?;
            draws.push(Vector::from_vec(vals));
        }
        Self::new(sampler, 0, draws)
    }
}

/// `sum_b |p_b - q_b|` over bins of width `0.25 sd(reference)` anchored at
/// the reference mean; in `[0, 2]`.
pub fn variation_norm(sample: &[f64], reference: &[f64], coordinate: usize) -> Result<f64> {
    let sd = std_dev(reference);
    if !(sd > 0.0) {
        return Err(Error::ZeroReferenceSpread { coordinate });
    }
    let width = 0.25 * sd;
    let anchor = mean(reference);
    let p = histogram(sample, width, anchor)?;
    let q = histogram(reference, width, anchor)?;
    let p_end = p.first_bin() + p.counts().len() as i64;
    let q_end = q.first_bin() + q.counts().len() as i64;
    let lo = p.first_bin().min(q.first_bin()) - 1;
    let hi = p_end.max(q_end) + 1;
    // Integer cross-multiplied counts keep identical and disjoint samples exact.
    let (np, nq) = (p.total() as u128, q.total() as u128);
    let diff: u128 = (lo..hi)
        .map(|b| (p.count(b) as u128 * nq).abs_diff(q.count(b) as u128 * np))
        .sum();
    Ok(diff as f64 / (np * nq) as f64)
}

/// `1 - (1 / 2d) sum_i |mu_i - pi_i|`, with bins defined by `pi`.
pub fn marginal_accuracy(mu: &SampleSet, pi: &SampleSet) -> Result<f64> {
    if mu.dim() != pi.dim() {
        return Err(Error::DimensionMismatch {
            expected: pi.dim(),
            got: mu.dim(),
        });
    }
    let d = pi.dim();
    let mut total = 0.0;
    for i in 0..d {
        total += variation_norm(&mu.coordinate(i), &pi.coordinate(i), i)?;
    }
    Ok((1.0 - total / (2.0 * d as f64)).clamp(0.0, 1.0))
}

/// Exact posterior of `F_upto` for a Gaussian prior with linear-Gaussian or
/// Gaussian-mean terms: precision `alpha I + sum tau z z^T`, mean
/// `precision^{-1} sum tau y z`.
pub fn exact_linear_posterior(stream: &ModelStream, upto: usize) -> Result<GaussianApprox> {
    if upto > stream.len() {
        return Err(Error::EpochOrder {
            epoch: upto,
            available: stream.len(),
        });
    }
    let d = stream.dim();
    let FunctionTerm::GaussianPrior { alpha, .. } = stream.prior() else {
        return Err(Error::NotConjugate);
    };
    let mut precision = Matrix::identity(d, d) * *alpha;
    let mut rhs = Vector::zeros(d);
    for term in &stream.terms()[..upto] {
        match term {
            FunctionTerm::LinearGaussian { z, y, precision: tau } => {
                precision.ger(*tau, z, z, 1.0);
                rhs.axpy(tau * y, z, 1.0);
            }
            FunctionTerm::GaussianMean { center } => {
                for i in 0..d {
                    precision[(i, i)] += 1.0;
                }
                rhs += center;
            }
            _ => return Err(Error::NotConjugate),
        }
    }
    let covariance = crate::numerics::invert_spd(&precision)?;
    let mean = &covariance * rhs;
    Ok(GaussianApprox {
        mean,
        covariance,
        precision,
    })
}

/// Modes `x_1*, ..., x_upto*`, each search warm-started at the previous one.
pub fn mode_path(stream: &ModelStream, upto: usize) -> Result<Vec<Vector>> {
    let mut out = Vec::with_capacity(upto);
    let mut x = Vector::zeros(stream.dim());
    for t in 1..=upto {
        x = stream.mode(&x, t)?;
        out.push(x.clone());
    }
    Ok(out)
}

pub struct AuditInput<'a> {
    pub stream: &'a ModelStream,
    pub offset: f64,
    /// `sqrt(t + c) |X^t - x_t*|`, indexed `[replica][t - 1]`.
    pub scaled_distances: &'a [Vec<f64>],
    /// `x_t*` for `t = 1..=T`.
    pub modes: &'a [Vector],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub replicas: usize,
    pub epochs: usize,
    /// Pooled `sqrt((t + c) E|X - x*|^2)`.
    pub c_hat: f64,
    pub c_hat_by_epoch: Vec<f64>,
    /// Largest factor by which a per-epoch value departs from `c_hat`.
    pub containment_ratio: f64,
    pub p95_scaled_distance: f64,
    pub tail_a: f64,
    pub tail_k: f64,
    /// `(2 + 1/k) log(A / k^2)`, clamped at zero; absent when the fit fails.
    pub c_from_tail: Option<f64>,
    pub d_hat: f64,
    pub lipschitz_ok: bool,
    pub warnings: Vec<String>,
}

/// Exponential tail fit `P(S >= s) ~ A e^{-k s}` by least squares on the log
/// empirical survival of the upper half of the order statistics.
pub fn fit_exponential_tail(values: &[f64]) -> Option<(f64, f64)> {
    let mut s: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if s.len() < 4 {
        return None;
    }
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let pts: Vec<(f64, f64)> = (n / 2..n)
        .map(|i| (s[i], ((n - i) as f64 / n as f64).ln()))
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let k = -slope;
    if !(k > 0.0) {
        return None;
    }
    Some(((my - slope * mx).exp(), k))
}

/// Largest `sqrt(t + c) |x_t* - x_tau*|` over `t <= tau <= 2t`.
pub fn mode_drift(modes: &[Vector], offset: f64) -> f64 {
    let n = modes.len();
    let mut best: f64 = 0.0;
    for t in 1..=n {
        let scale = (t as f64 + offset).sqrt();
        for tau in t..=(2 * t).min(n) {
            best = best.max(scale * (&modes[t - 1] - &modes[tau - 1]).norm());
        }
    }
    best
}

pub fn audit_assumptions(input: &AuditInput, rng: &mut RngStream) -> Result<AuditReport> {
    let replicas = input.scaled_distances.len();
    let epochs = input.scaled_distances.first().map_or(0, |r| r.len());
    if replicas == 0 || epochs == 0 {
        return Err(Error::Empty("audit trajectories"));
    }
    if input.scaled_distances.iter().any(|r| r.len() != epochs) {
        return Err(Error::Data("replica trajectories differ in length".into()));
    }
    let mut warnings = Vec::new();
    if replicas < 30 {
        warnings.push(format!("only {replicas} replicas; constants are poorly determined"));
    }
    let c_hat_by_epoch: Vec<f64> = (0..epochs)
        .map(|t| {
            let ms = input.scaled_distances.iter().map(|r| r[t] * r[t]).sum::<f64>() / replicas as f64;
            ms.sqrt()
        })
        .collect();
    let c_hat = (c_hat_by_epoch.iter().map(|c| c * c).sum::<f64>() / epochs as f64).sqrt();
    let containment_ratio = c_hat_by_epoch
        .iter()
        .map(|c| if *c > 0.0 { (c / c_hat).max(c_hat / c) } else { f64::INFINITY })
        .fold(1.0, f64::max);
    let mut pooled: Vec<f64> = input.scaled_distances.iter().flatten().copied().collect();
    pooled.sort_by(f64::total_cmp);
    let p95_scaled_distance = pooled[((pooled.len() as f64 * 0.95).ceil() as usize).clamp(1, pooled.len()) - 1];
    let (tail_a, tail_k, c_from_tail) = match fit_exponential_tail(&pooled) {
        Some((a, k)) => (a, k, Some(((2.0 + 1.0 / k) * (a / (k * k)).ln()).max(0.0))),
        None => {
            warnings.push("exponential tail fit failed".into());
            (0.0, 0.0, None)
        }
    };
    let d_hat = mode_drift(input.modes, input.offset);
    let lipschitz_ok = lipschitz_check(input.stream, input.modes, rng);
    if !lipschitz_ok {
        warnings.push("gradient Lipschitz bound violated or unknown".into());
    }
    Ok(AuditReport {
        replicas,
        epochs,
        c_hat,
        c_hat_by_epoch,
        containment_ratio,
        p95_scaled_distance,
        tail_a,
        tail_k,
        c_from_tail,
        d_hat,
        lipschitz_ok,
        warnings,
    })
}

/// Checks `|grad f(x) - grad f(y)| <= L |x - y|` for up to 200 terms at random
/// pairs around the mode path.
fn lipschitz_check(stream: &ModelStream, modes: &[Vector], rng: &mut RngStream) -> bool {
    let d = stream.dim();
    let center = modes.last().cloned().unwrap_or_else(|| Vector::zeros(d));
    let n = stream.len();
    let picks = n.min(200);
    (0..=picks).all(|j| {
        let k = if j == 0 { 0 } else { 1 + rng.index(n) };
        let term = stream.term(k);
        let Some(l) = term.lipschitz() else {
            return false;
        };
        let x = &center + crate::numerics::gaussian_vector(d, rng);
        let y = &center + crate::numerics::gaussian_vector(d, rng) * 3.0;
        let mut gx = vec![0.0; d];
        let mut gy = vec![0.0; d];
        term.accumulate_gradient(x.as_slice(), 1.0, &mut gx);
        term.accumulate_gradient(y.as_slice(), 1.0, &mut gy);
        let lhs = crate::numerics::distance(&gx, &gy);
        lhs <= l * (&x - &y).norm() * (1.0 + 1e-9) + 1e-12
    })
}

/// Lag-`k` autocorrelations per coordinate, `table[k - 1][i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutocorrelationTable {
    pub n: usize,
    pub lags: Vec<Vec<f64>>,
}

impl AutocorrelationTable {
    pub fn lag(&self, k: usize) -> &[f64] {
        &self.lags[k - 1]
    }
}

/// Lag 1..=5 autocorrelations of a sequence of epoch samples. With
/// `reference = Some((means, sds))` each sample is first standardized by its
/// epoch's target mean and standard deviation. A constant sequence has
/// autocorrelation 1.
pub fn independence_diagnostic(
    samples: &[Vector],
    reference: Option<(&[Vector], &[Vector])>,
) -> Result<AutocorrelationTable> {
    const MAX_LAG: usize = 5;
    let n = samples.len();
    if n < 100 {
        return Err(Error::Data(format!("need at least 100 epoch samples, got {n}")));
    }
    let d = samples[0].len();
    let z: Vec<Vector> = match reference {
        Some((means, sds)) => {
            if means.len() != n || sds.len() != n {
                return Err(Error::Data("reference moments must match the samples".into()));
            }
            samples
                .iter()
                .zip(means.iter().zip(sds))
                .map(|(x, (m, s))| (x - m).component_div(s))
                .collect()
        }
        None => samples.to_vec(),
    };
    let mut lags = vec![vec![0.0; d]; MAX_LAG];
    for i in 0..d {
        let col: Vec<f64> = z.iter().map(|v| v[i]).collect();
        let m = mean(&col);
        let denom: f64 = col.iter().map(|v| (v - m) * (v - m)).sum();
        for k in 1..=MAX_LAG {
            lags[k - 1][i] = if denom > 0.0 {
                col.windows(k + 1).map(|w| (w[0] - m) * (w[k] - m)).sum::<f64>() / denom
            } else {
                1.0
            };
        }
    }
    Ok(AutocorrelationTable { n, lags })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gaussian_vector;
    use proptest::prelude::*;

    fn set(values: &[f64]) -> SampleSet {
        SampleSet::new("t", 0, values.iter().map(|v| Vector::from_vec(vec![*v])).collect()).unwrap()
    }

    fn normal_draws(n: usize, shift: f64, seed: u64) -> Vec<f64> {
        let mut rng = RngStream::new(seed, 0);
        (0..n).map(|_| shift + rng.standard_normal()).collect()
    }

    #[test]
    fn identical_sets_score_one() {
        let s = set(&normal_draws(1000, 0.0, 1));
        assert_eq!(marginal_accuracy(&s, &s).unwrap(), 1.0);
    }

    #[test]
    fn disjoint_sets_score_zero() {
        let a = SampleSet::new("a", 0, vec![Vector::from_vec(vec![0.0, 0.0]), Vector::from_vec(vec![1.0, 1.0])]).unwrap();
        let b = SampleSet::new("b", 0, vec![Vector::from_vec(vec![50.0, -50.0]), Vector::from_vec(vec![60.0, -60.0])]).unwrap();
        assert_eq!(marginal_accuracy(&b, &a).unwrap(), 0.0);
    }

    #[test]
    fn shifted_normals_match_quadrature() {
        // Bin probabilities of N(0,1) and N(1,1) on a width-0.25 grid at 0,
        // by Simpson's rule on each bin.
        let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let bin_mass = |lo: f64, shift: f64| {
            let m = 64;
            let h = 0.25 / m as f64;
            (0..=m)
                .map(|j| {
                    let w = if j == 0 || j == m { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
                    w * pdf(lo + j as f64 * h - shift)
                })
                .sum::<f64>()
                * h
                / 3.0
        };
        let oracle = 1.0
            - 0.5 * (-60..64).map(|b| (bin_mass(b as f64 * 0.25, 0.0) - bin_mass(b as f64 * 0.25, 1.0)).abs()).sum::<f64>();
        let pi = set(&normal_draws(100_000, 0.0, 2));
        let mu = set(&normal_draws(100_000, 1.0, 3));
        let ma = marginal_accuracy(&mu, &pi).unwrap();
        assert!((ma - oracle).abs() < 0.02, "{ma} vs {oracle}");
        assert!((oracle - 0.617).abs() < 0.02);
    }

    #[test]
    fn zero_spread_reference_rejected() {
        let pi = set(&[1.0, 1.0, 1.0]);
        assert!(matches!(
            marginal_accuracy(&pi, &pi),
            Err(Error::ZeroReferenceSpread { coordinate: 0 })
        ));
        assert!(SampleSet::new("x", 0, vec![]).is_err());
    }

    proptest! {
        #[test]
        fn ma_in_unit_interval(a in prop::collection::vec(-5.0f64..5.0, 2..60),
                               b in prop::collection::vec(-5.0f64..5.0, 2..60)) {
            prop_assume!(std_dev(&b) > 0.0);
            let ma = marginal_accuracy(&set(&a), &set(&b)).unwrap();
            prop_assert!((0.0..=1.0).contains(&ma));
        }
    }

    fn linear_stream(t: usize, alpha: f64, tau: f64, seed: u64) -> ModelStream {
        let mut rng = RngStream::new(seed, 1);
        let mut s = ModelStream::new(FunctionTerm::gaussian_prior(alpha, 1).unwrap());
        for _ in 0..t {
            s.push(FunctionTerm::linear_gaussian(Vector::from_vec(vec![1.0]), 0.3 + rng.standard_normal(), tau).unwrap())
                .unwrap();
        }
        s
    }

    #[test]
    fn squared_error_terms_without_prior() {
        // f_k = (y_k - x)^2, no prior: mean ybar, variance 1/(2t).
        let s = linear_stream(10, 0.0, 2.0, 4);
        let post = exact_linear_posterior(&s, 10).unwrap();
        let ybar = s.terms().iter().map(|f| match f {
            FunctionTerm::LinearGaussian { y, .. } => *y,
            _ => unreachable!(),
        }).sum::<f64>() / 10.0;
        assert!((post.mean[0] - ybar).abs() < 1e-12);
        assert!((post.covariance[(0, 0)] - 1.0 / 20.0).abs() < 1e-12);
    }

    #[test]
    fn posterior_matches_quadrature() {
        let s = linear_stream(10, 0.7, 1.3, 5);
        let post = exact_linear_posterior(&s, 10).unwrap();
        let (lo, hi, n) = (-20.0, 20.0, 400_000);
        let h = (hi - lo) / n as f64;
        let f_min = (0..=n).map(|j| s.potential_at(&[lo + j as f64 * h], 10)).fold(f64::INFINITY, f64::min);
        let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for j in 0..=n {
            let x = lo + j as f64 * h;
            let w = (-(s.potential_at(&[x], 10) - f_min)).exp();
            z += w;
            m1 += w * x;
            m2 += w * x * x;
        }
        let mean = m1 / z;
        let var = m2 / z - mean * mean;
        assert!((post.mean[0] - mean).abs() < 1e-3);
        assert!((post.covariance[(0, 0)] - var).abs() < 1e-3);
    }

    #[test]
    fn strong_prior_shrinks_to_zero() {
        let s = linear_stream(10, 1e12, 1.0, 6);
        assert!(exact_linear_posterior(&s, 10).unwrap().mean[0].abs() < 1e-9);
    }

    #[test]
    fn singular_and_nonconjugate() {
        let mut s = ModelStream::new(FunctionTerm::gaussian_prior(0.0, 2).unwrap());
        s.push(FunctionTerm::linear_gaussian(Vector::from_vec(vec![1.0, 0.0]), 1.0, 1.0).unwrap()).unwrap();
        assert!(matches!(exact_linear_posterior(&s, 1), Err(Error::NotPositiveDefinite)));
        let mut s = ModelStream::new(FunctionTerm::gaussian_prior(1.0, 2).unwrap());
        s.push(FunctionTerm::logistic(Vector::from_vec(vec![1.0, 0.0]), 1.0).unwrap()).unwrap();
        assert!(matches!(exact_linear_posterior(&s, 1), Err(Error::NotConjugate)));
    }

    #[test]
    fn gaussian_mean_stream_conjugate() {
        let mut s = ModelStream::new(FunctionTerm::gaussian_prior(2.0, 2).unwrap());
        let mut sum = Vector::zeros(2);
        let mut rng = RngStream::new(7, 0);
        for _ in 0..5 {
            let w = gaussian_vector(2, &mut rng);
            sum += &w;
            s.push(FunctionTerm::gaussian_mean(w)).unwrap();
        }
        let post = exact_linear_posterior(&s, 5).unwrap();
        assert!((&post.mean - sum / 7.0).norm() < 1e-12);
        assert!((post.covariance[(1, 1)] - 1.0 / 7.0).abs() < 1e-12);
    }

    fn gaussian_mean_stream(t: usize, alpha: f64, seed: u64) -> ModelStream {
        let mut rng = RngStream::new(seed, 2);
        let mut s = ModelStream::new(FunctionTerm::gaussian_prior(alpha, 1).unwrap());
        for _ in 0..t {
            s.push(FunctionTerm::gaussian_mean(Vector::from_vec(vec![1.0 + rng.standard_normal()]))).unwrap();
        }
        s
    }

    #[test]
    fn c_hat_near_one_for_exact_draws() {
        let alpha = 1.0;
        let s = gaussian_mean_stream(100, alpha, 8);
        let modes = mode_path(&s, 100).unwrap();
        let mut rng = RngStream::new(8, 1);
        let scaled: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                (1..=100)
                    .map(|t| {
                        let sd = (1.0 / (t as f64 + alpha)).sqrt();
                        (t as f64 + alpha).sqrt() * (sd * rng.standard_normal()).abs()
                    })
                    .collect()
            })
            .collect();
        let report = audit_assumptions(
            &AuditInput {
                stream: &s,
                offset: alpha,
                scaled_distances: &scaled,
                modes: &modes,
            },
            &mut rng,
        )
        .unwrap();
        assert!((report.c_hat - 1.0).abs() < 0.03, "{}", report.c_hat);
        assert!(report.lipschitz_ok);
        assert!(report.warnings.is_empty());
        assert!(report.tail_k > 0.0);
        assert!(report.d_hat > 0.0);
        assert!(report.containment_ratio < 1.5);
    }

    #[test]
    fn deterministic_stream_has_no_drift() {
        let mut s = ModelStream::new(FunctionTerm::gaussian_prior(1.0, 1).unwrap());
        for _ in 0..50 {
            s.push(FunctionTerm::gaussian_mean(Vector::zeros(1))).unwrap();
        }
        let modes = mode_path(&s, 50).unwrap();
        assert_eq!(mode_drift(&modes, 1.0), 0.0);
        let report = audit_assumptions(
            &AuditInput {
                stream: &s,
                offset: 1.0,
                scaled_distances: &[vec![1.0; 50]],
                modes: &modes,
            },
            &mut RngStream::new(0, 0),
        )
        .unwrap();
        assert_eq!(report.warnings.len(), 2, "{:?}", report.warnings);
    }

    #[test]
    fn tail_fit_recovers_exponential_rate() {
        let mut rng = RngStream::new(9, 0);
        let draws: Vec<f64> = (0..50_000).map(|_| -rng.uniform().ln() / 2.0).collect();
        let (a, k) = fit_exponential_tail(&draws).unwrap();
        assert!((k - 2.0).abs() < 0.1, "{k}");
        assert!((a - 1.0).abs() < 0.2, "{a}");
    }

    #[test]
    fn autocorrelation_of_white_noise_and_constants() {
        let mut rng = RngStream::new(10, 0);
        let n = 2000;
        let iid: Vec<Vector> = (0..n).map(|_| gaussian_vector(2, &mut rng)).collect();
        let t = independence_diagnostic(&iid, None).unwrap();
        assert!(t.lag(1).iter().all(|r| r.abs() < 3.0 / (n as f64).sqrt()));
        let same = vec![Vector::from_vec(vec![0.5]); 200];
        assert_eq!(independence_diagnostic(&same, None).unwrap().lag(1), &[1.0]);
        assert!(independence_diagnostic(&iid[..50], None).is_err());
    }

    #[test]
    fn standardized_autocorrelation() {
        // A drifting mean makes raw samples look correlated; standardizing
        // by the per-epoch moments removes it.
        let mut rng = RngStream::new(11, 0);
        let n = 1000;
        let means: Vec<Vector> = (0..n).map(|t| Vector::from_vec(vec![t as f64 / 50.0])).collect();
        let sds = vec![Vector::from_vec(vec![1.0]); n];
        let xs: Vec<Vector> = means.iter().map(|m| m + gaussian_vector(1, &mut rng)).collect();
        assert!(independence_diagnostic(&xs, None).unwrap().lag(1)[0] > 0.5);
        let z = independence_diagnostic(&xs, Some((&means, &sds))).unwrap();
        assert!(z.lag(1)[0].abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn sample_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let mut rng = RngStream::new(12, 0);
        let s = SampleSet::new("x", 3, (0..10).map(|_| gaussian_vector(3, &mut rng)).collect()).unwrap();
        s.write_csv(&p).unwrap();
        let back = SampleSet::read_csv(&p, "x").unwrap();
        assert_eq!(back.draws, s.draws);
    }
}
