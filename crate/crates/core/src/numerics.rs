//! Seedable randomness, dense linear algebra helpers, Gaussian draws and
//! one-dimensional histograms.
//!
//! Every random quantity in the crate is drawn from an [`RngStream`]. A stream
//! is identified by `(seed, stream id)`; child streams are derived from a
//! purpose tag so that chain noise, batch selection and data generation can be
//! replayed independently of one another.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// A reproducible random stream keyed by `(seed, stream id)`.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    /// Root stream of an experiment.
    pub fn root(seed: u64) -> Self {
        Self::new(seed, 0)
    }

    /// Derives an independent stream for a named purpose. The result depends
    /// only on this stream's identity, never on how many draws were taken.
    pub fn child(&self, tag: &str) -> Self {
        Self::new(self.seed, splitmix64(self.stream ^ fnv1a(tag)))
    }

    /// Like [`child`](Self::child) but indexed, e.g. per replica.
    pub fn child_indexed(&self, tag: &str, index: u64) -> Self {
        Self::new(
            self.seed,
            splitmix64(splitmix64(self.stream ^ fnv1a(tag)) ^ index),
        )
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform index in `0..n`. `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn fill_gaussian(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.standard_normal();
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// `d` iid standard normal entries.
pub fn gaussian_vector(d: usize, rng: &mut RngStream) -> Vector {
    let mut v = Vector::zeros(d);
    rng.fill_gaussian(v.as_mut_slice());
    v
}

/// Counts of values in bins of fixed width. Bin `i` covers
/// `[anchor + i * width, anchor + (i + 1) * width)`; `i` may be negative.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram1D {
    bin_width: f64,
    anchor: f64,
    first_bin: i64,
    counts: Vec<u64>,
    total: u64,
}

impl Histogram1D {
    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Index of the lowest stored bin.
    pub fn first_bin(&self) -> i64 {
        self.first_bin
    }

    /// Counts of the stored bins, starting at [`first_bin`](Self::first_bin).
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, bin: i64) -> u64 {
        let offset = bin - self.first_bin;
        if offset < 0 {
            return 0;
        }
        self.counts.get(offset as usize).copied().unwrap_or(0)
    }

    /// Bins holding at least one value.
    pub fn nonzero_bins(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(move |(i, &c)| (self.first_bin + i as i64, c))
    }

    /// Fraction of mass in `bin`.
    pub fn frequency(&self, bin: i64) -> f64 {
        self.count(bin) as f64 / self.total as f64
    }
}

pub fn bin_index(value: f64, bin_width: f64, anchor: f64) -> i64 {
    ((value - anchor) / bin_width).floor() as i64
}

pub fn histogram(values: &[f64], bin_width: f64, anchor: f64) -> Result<Histogram1D> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::InvalidBinWidth(bin_width));
    }
    if values.is_empty() {
        return Err(Error::Empty("histogram input"));
    }
    if !anchor.is_finite() || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("histogram input"));
    }
    let bins: Vec<i64> = values
        .iter()
        .map(|&v| bin_index(v, bin_width, anchor))
        .collect();
    let lo = *bins.iter().min().expect("non-empty");
    let hi = *bins.iter().max().expect("non-empty");
    let mut counts = vec![0u64; (hi - lo + 1) as usize];
    for b in bins {
        counts[(b - lo) as usize] += 1;
    }
    Ok(Histogram1D {
        bin_width,
        anchor,
        first_bin: lo,
        counts,
        total: values.len() as u64,
    })
}

fn cholesky(a: &Matrix) -> Result<Cholesky<f64, Dyn>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    for i in 0..a.nrows() {
        for j in 0..i {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::NotPositiveDefinite);
            }
        }
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    Cholesky::new(a.clone()).ok_or(Error::NotPositiveDefinite)
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn solve_spd(a: &Matrix, b: &Vector) -> Result<Vector> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: b.len(),
        });
    }
    Ok(cholesky(a)?.solve(b))
}

/// Inverse of a symmetric positive definite matrix.
pub fn invert_spd(a: &Matrix) -> Result<Matrix> {
    Ok(cholesky(a)?.inverse())
}

/// Draw from `N(mean, precision^-1)`: with `precision = L L^T`, returns
/// `mean + L^-T z`.
pub fn chol_sample(mean: &Vector, precision: &Matrix, rng: &mut RngStream) -> Result<Vector> {
    if precision.nrows() != mean.len() {
        return Err(Error::DimensionMismatch {
            expected: mean.len(),
            got: precision.nrows(),
        });
    }
    let chol = cholesky(precision)?;
    let z = gaussian_vector(mean.len(), rng);
    let offset = chol
        .l()
        .tr_solve_lower_triangular(&z)
        .ok_or(Error::NotPositiveDefinite)?;
    Ok(mean + offset)
}

/// A multivariate Gaussian stored by mean, covariance and precision.
#[derive(Clone, Debug)]
pub struct GaussianApprox {
    pub mean: Vector,
    pub covariance: Matrix,
    pub precision: Matrix,
}

impl GaussianApprox {
    pub fn from_precision(mean: Vector, precision: Matrix) -> Result<Self> {
        let covariance = invert_spd(&precision)?;
        Ok(Self {
            mean,
            covariance,
            precision,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<Vector> {
        chol_sample(&self.mean, &self.precision, rng)
    }

    pub fn sample_n(&self, n: usize, rng: &mut RngStream) -> Result<Vec<Vector>> {
        let chol = cholesky(&self.precision)?;
        let l = chol.l();
        (0..n)
            .map(|_| {
                let z = gaussian_vector(self.dim(), rng);
                l.tr_solve_lower_triangular(&z)
                    .map(|off| &self.mean + off)
                    .ok_or(Error::NotPositiveDefinite)
            })
            .collect()
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (divisor `n - 1`; zero for a single value).
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_moments() {
        let n = 100_000;
        let d = 3;
        let mut rng = RngStream::new(11, 3);
        let mut sum = vec![0.0; d];
        let mut sq = vec![0.0; d];
        for _ in 0..n {
            let v = gaussian_vector(d, &mut rng);
            for i in 0..d {
                sum[i] += v[i];
                sq[i] += v[i] * v[i];
            }
        }
        for i in 0..d {
            let m = sum[i] / n as f64;
            let var = sq[i] / n as f64 - m * m;
            assert!(m.abs() < 4.0 / (n as f64).sqrt(), "mean {m}");
            assert!((var - 1.0).abs() < 0.05, "var {var}");
        }
    }

    #[test]
    fn streams_are_reproducible() {
        let mut a = RngStream::new(5, 9);
        let mut b = RngStream::new(5, 9);
        let va: Vec<f64> = (0..16).map(|_| a.standard_normal()).collect();
        let vb: Vec<f64> = (0..16).map(|_| b.standard_normal()).collect();
        assert_eq!(va, vb);

        let root = RngStream::root(5);
        let mut c1 = root.child("noise");
        let mut c2 = root.child("batch");
        assert_ne!(c1.next_u64(), c2.next_u64());
        // Children do not depend on the parent's position.
        let mut advanced = RngStream::root(5);
        advanced.next_u64();
        assert_eq!(
            advanced.child("noise").next_u64(),
            root.child("noise").next_u64()
        );
    }

    #[test]
    fn histogram_small_cases() {
        let h = histogram(&[0.1, 0.1, 0.9], 0.5, 0.0).unwrap();
        assert_eq!(h.count(0), 2);
        assert_eq!(h.count(1), 1);
        assert_eq!(h.total(), 3);

        let h = histogram(&[2.5; 7], 0.3, -1.0).unwrap();
        assert_eq!(h.nonzero_bins().count(), 1);

        let grid: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let h = histogram(&grid, 0.25, 0.0).unwrap();
        assert_eq!(h.counts(), &[25, 25, 25, 25]);
    }

    #[test]
    fn histogram_negative_bins() {
        let h = histogram(&[-0.6, -0.1, 0.2], 0.5, 0.0).unwrap();
        assert_eq!(h.first_bin(), -2);
        assert_eq!(h.count(-2), 1);
        assert_eq!(h.count(-1), 1);
        assert_eq!(h.count(0), 1);
    }

    #[test]
    fn histogram_rejects_bad_input() {
        assert!(matches!(
            histogram(&[1.0], 0.0, 0.0),
            Err(Error::InvalidBinWidth(_))
        ));
        assert!(matches!(histogram(&[], 1.0, 0.0), Err(Error::Empty(_))));
        assert!(histogram(&[f64::NAN], 1.0, 0.0).is_err());
    }

    #[test]
    fn spd_solves() {
        let b = Vector::from_vec(vec![3.0, -1.0, 2.0]);
        let x = solve_spd(&Matrix::identity(3, 3), &b).unwrap();
        assert_eq!(x, b);

        let a = Matrix::from_diagonal(&Vector::from_vec(vec![4.0, 9.0]));
        let x = solve_spd(&a, &Vector::from_vec(vec![4.0, 9.0])).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_spd_residual() {
        let mut rng = RngStream::new(2, 0);
        let n = 5;
        let m = Matrix::from_fn(n, n, |_, _| rng.standard_normal());
        let a = &m * m.transpose() + Matrix::identity(n, n) * 0.5;
        let b = gaussian_vector(n, &mut rng);
        let x = solve_spd(&a, &b).unwrap();
        assert!((&a * &x - &b).norm() <= 1e-8 * b.norm());
    }

    #[test]
    fn non_spd_is_reported() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            solve_spd(&a, &Vector::zeros(2)),
            Err(Error::NotPositiveDefinite)
        ));
        let asym = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        assert!(solve_spd(&asym, &Vector::zeros(2)).is_err());
    }

    #[test]
    fn chol_sample_covariance() {
        let precision = Matrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let cov = invert_spd(&precision).unwrap();
        let mean = Vector::from_vec(vec![1.0, -2.0]);
        let mut rng = RngStream::new(8, 1);
        let n = 200_000;
        let mut acc = Matrix::zeros(2, 2);
        let mut m = Vector::zeros(2);
        for _ in 0..n {
            let x = chol_sample(&mean, &precision, &mut rng).unwrap();
            let c = &x - &mean;
            acc += &c * c.transpose();
            m += x;
        }
        m /= n as f64;
        acc /= n as f64;
        assert!((m - &mean).amax() < 0.01);
        assert!((acc - cov).amax() < 0.02);
    }
}
