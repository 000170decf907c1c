//! Synthetic datasets: sparse-feature logistic regression, linear
//! regression with Gaussian noise, and Gaussian mean estimation. Datasets
//! round-trip through a CSV file (`f1,...,fd,label`) plus a JSON sidecar
//! holding the spec and the latent truth.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{sigmoid, FunctionTerm, ModelStream};
use crate::numerics::{gaussian_vector, RngStream, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Design {
    /// `z ~ N(0, I)`.
    Gaussian,
    /// `z = (1, ..., 1)`.
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Family {
    /// `x_i ~ Bernoulli(s / d)`, `y ~ Bernoulli(sigmoid(theta^T x + b))`.
    Logistic { t: usize, d: usize, sparsity: usize },
    /// `y = z^T theta + noise_std * e`.
    Linear {
        t: usize,
        d: usize,
        noise_std: f64,
        design: Design,
    },
    /// `w_k ~ N(true_mean, I)`.
    GaussianMean { t: usize, true_mean: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub family: Family,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("dataset spec: {m}")));
        match &self.family {
            Family::Logistic { t, d, sparsity } => {
                if *t == 0 || *d == 0 || *sparsity == 0 || sparsity > d {
                    return bad(format!("need t >= 1, d >= 1, 0 < s <= d; got t={t} d={d} s={sparsity}"));
                }
            }
            Family::Linear { t, d, noise_std, .. } => {
                if *t == 0 || *d == 0 || !(*noise_std > 0.0 && noise_std.is_finite()) {
                    return bad(format!("need t >= 1, d >= 1, noise_std > 0; got t={t} d={d} noise_std={noise_std}"));
                }
            }
            Family::GaussianMean { t, true_mean } => {
                if *t == 0 || true_mean.is_empty() || true_mean.iter().any(|v| !v.is_finite()) {
                    return bad("need t >= 1 and a finite, non-empty true mean".into());
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        match &self.family {
            Family::Logistic { t, .. } | Family::Linear { t, .. } | Family::GaussianMean { t, .. } => *t,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Dimension of the stored features.
    pub fn feature_dim(&self) -> usize {
        match &self.family {
            Family::Logistic { d, .. } | Family::Linear { d, .. } => *d,
            Family::GaussianMean { true_mean, .. } => true_mean.len(),
        }
    }
}

/// Latent parameters used to generate a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Truth {
    Logistic { theta: Vec<f64>, intercept: f64 },
    Linear { theta: Vec<f64> },
    GaussianMean { mean: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub features: Vec<Vector>,
    /// `+-1` for logistic, the response for linear, `0` for Gaussian mean.
    pub labels: Vec<f64>,
    pub truth: Truth,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    spec: DatasetSpec,
    truth: Truth,
}

pub fn generate(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let root = RngStream::root(spec.seed).child("datagen");
    let mut truth_rng = root.child("truth");
    let mut rows = root.child("rows");
    let n = spec.len();
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let truth = match &spec.family {
        Family::Logistic { d, sparsity, .. } => {
            let theta = gaussian_vector(*d, &mut truth_rng);
            let intercept = truth_rng.standard_normal();
            let p = *sparsity as f64 / *d as f64;
            for _ in 0..n {
                let x = Vector::from_fn(*d, |_, _| if rows.bernoulli(p) { 1.0 } else { 0.0 });
                let prob = sigmoid(theta.dot(&x) + intercept);
                labels.push(if rows.bernoulli(prob) { 1.0 } else { -1.0 });
                features.push(x);
            }
            Truth::Logistic {
                theta: theta.as_slice().to_vec(),
                intercept,
            }
        }
        Family::Linear { d, noise_std, design, .. } => {
            let theta = gaussian_vector(*d, &mut truth_rng);
            for _ in 0..n {
                let z = match design {
                    Design::Gaussian => gaussian_vector(*d, &mut rows),
                    Design::Constant => Vector::from_element(*d, 1.0),
                };
                labels.push(z.dot(&theta) + noise_std * rows.standard_normal());
                features.push(z);
            }
            Truth::Linear {
                theta: theta.as_slice().to_vec(),
            }
        }
        Family::GaussianMean { true_mean, .. } => {
            let m = Vector::from_column_slice(true_mean);
            for _ in 0..n {
                features.push(&m + gaussian_vector(m.len(), &mut rows));
                labels.push(0.0);
            }
            Truth::GaussianMean {
                mean: true_mean.clone(),
            }
        }
    };
    Ok(Dataset {
        spec: spec.clone(),
        features,
        labels,
        truth,
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Dimension of the model parameter (features plus intercept for
    /// logistic data).
    pub fn model_dim(&self) -> usize {
        match self.spec.family {
            Family::Logistic { d, .. } => d + 1,
            _ => self.spec.feature_dim(),
        }
    }

    /// The model parameter the data was generated from.
    pub fn true_parameter(&self) -> Vector {
        match &self.truth {
            Truth::Logistic { theta, intercept } => {
                Vector::from_iterator(theta.len() + 1, theta.iter().copied().chain([*intercept]))
            }
            Truth::Linear { theta } => Vector::from_column_slice(theta),
            Truth::GaussianMean { mean } => Vector::from_column_slice(mean),
        }
    }

    /// Term `f_k` for row `k - 1`.
    pub fn term(&self, row: usize) -> Result<FunctionTerm> {
        let x = &self.features[row];
        let y = self.labels[row];
        match &self.spec.family {
            Family::Logistic { .. } => {
                let u = Vector::from_iterator(x.len() + 1, x.iter().copied().chain([1.0]));
                FunctionTerm::logistic(u, y)
            }
            Family::Linear { noise_std, .. } => {
                FunctionTerm::linear_gaussian(x.clone(), y, 1.0 / (noise_std * noise_std))
            }
            Family::GaussianMean { .. } => Ok(FunctionTerm::gaussian_mean(x.clone())),
        }
    }

    /// Stream with prior `(alpha / 2) |x|^2` and one term per row.
    pub fn to_stream(&self, alpha: f64) -> Result<ModelStream> {
        let mut stream = ModelStream::new(FunctionTerm::gaussian_prior(alpha, self.model_dim())?);
        for row in 0..self.len() {
            stream.push(self.term(row)?)?;
        }
        Ok(stream)
    }

    /// Writes `path` (CSV) and the sidecar next to it.
    pub fn write(&self, path: &Path) -> Result<()> {
        let d = self.spec.feature_dim();
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (1..=d).map(|i| format!("f{i}")).collect();
        header.push("label".into());
        w.write_record(&header)?;
        for (x, y) in self.features.iter().zip(&self.labels) {
            let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            rec.push(y.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        let sidecar = Sidecar {
            spec: self.spec.clone(),
            truth: self.truth.clone(),
        };
        fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)? + "\n")?;
        Ok(())
    }

    /// Reads a dataset written by [`write`](Self::write). Logistic labels in
    /// `{0, 1}` are mapped to `{-1, +1}`.
    pub fn read(path: &Path) -> Result<Self> {
        let side = sidecar_path(path);
        let sidecar: Sidecar = serde_json::from_str(&fs::read_to_string(&side).map_err(|e| {
            Error::Data(format!("missing sidecar {}: {e}", side.display()))
        })?)?;
        sidecar.spec.validate()?;
        let d = sidecar.spec.feature_dim();
        let logistic = matches!(sidecar.spec.family, Family::Logistic { .. });
        let mut r = csv::Reader::from_path(path)?;
        if r.headers()?.len() != d + 1 {
            return Err(Error::Data(format!(
                "expected {} columns, found {}",
                d + 1,
                r.headers()?.len()
            )));
        }
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Data(format!("row {}: {e}", i + 1)))?;
            if vals.len() != d + 1 || vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("row {}: malformed", i + 1)));
            }
            let mut y = vals[d];
            if logistic {
                y = match y {
                    v if v == 1.0 => 1.0,
                    v if v == 0.0 || v == -1.0 => -1.0,
                    v => return Err(Error::Data(format!("row {}: label {v} not binary", i + 1))),
                };
            }
            features.push(Vector::from_column_slice(&vals[..d]));
            labels.push(y);
        }
        if features.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        let mut spec = sidecar.spec;
        set_len(&mut spec.family, features.len());
        Ok(Self {
            spec,
            features,
            labels,
            truth: sidecar.truth,
        })
    }
}

fn set_len(family: &mut Family, n: usize) {
    match family {
        Family::Logistic { t, .. } | Family::Linear { t, .. } | Family::GaussianMean { t, .. } => *t = n,
    }
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Smoothness constants of a dataset's stream under a Gaussian prior `alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionConstants {
    /// `max_k |u_k|` over the model-space feature vectors.
    pub max_norm: f64,
    pub lipschitz: f64,
    pub prior_lipschitz: f64,
}

pub fn assumption_constants(data: &Dataset, alpha: f64) -> Result<AssumptionConstants> {
    let mut max_norm: f64 = 0.0;
    let mut lipschitz: f64 = 0.0;
    for row in 0..data.len() {
        let term = data.term(row)?;
        let n = match &term {
            FunctionTerm::Logistic { u, .. } => u.norm(),
            FunctionTerm::LinearGaussian { z, .. } => z.norm(),
            _ => data.features[row].norm(),
        };
        max_norm = max_norm.max(n);
        lipschitz = lipschitz.max(term.lipschitz().ok_or(Error::LipschitzUnknown)?);
    }
    Ok(AssumptionConstants {
        max_norm,
        lipschitz,
        prior_lipschitz: alpha,
    })
}
