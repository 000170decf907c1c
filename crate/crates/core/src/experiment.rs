//! Declarative experiments: JSON configs, replicated runs with persisted
//! artifacts, evaluation against a reference sample, assumption audits and
//! the multi-sampler marginal-accuracy table.
//!
//! A run directory holds `config.json` (resolved snapshot), `seed`,
//! `audit.jsonl`, `samples.csv`, `manifest.json` and, in diagnostic mode,
//! `trajectory.csv` and `modes.csv`. Every file is a pure function of the
//! config, so re-running from the snapshot reproduces the directory bitwise.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    laplace_full, sgld_epoch, sgld_step, MalaChain, MalaConfig, OnlineLaplace, SgldConfig, StepSchedule,
};
use crate::datagen::{assumption_constants, generate, AssumptionConstants, Dataset, DatasetSpec};
use crate::error::{Error, Result};
use crate::evaluation::{
    audit_assumptions, exact_linear_posterior, marginal_accuracy, mode_path, AuditInput, AuditReport,
    SampleSet,
};
use crate::models::{EvalCounter, ModelStream};
use crate::numerics::{distance, mean, std_dev, RngStream, Vector};
use crate::offline::{offline_sample, OfflineConfig};
use crate::online::{default_parameters, EpochAudit, OnlineConfig, OnlineSampler, RegularityConstants};
use crate::saga::ChainState;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Step size and step count from the regularity constants.
    Theory,
    /// The simulation settings: decaying step `0.05 / (1 + 0.5 t)`, batch 64.
    #[default]
    #[serde(rename = "paper-sim")]
    Benchmark,
    /// Every parameter given in `overrides`.
    Explicit,
}

impl std::str::FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theory" => Ok(Profile::Theory),
            "paper-sim" => Ok(Profile::Benchmark),
            "explicit" => Ok(Profile::Explicit),
            other => Err(Error::Config(format!("unknown profile `{other}`"))),
        }
    }
}

/// Inputs to the theory profile that cannot be read off the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryInputs {
    pub eps: f64,
    pub tail_a: f64,
    pub tail_k: f64,
    pub drift: f64,
    /// Upper limit on `i_max`.
    #[serde(default = "default_cap")]
    pub cap: u64,
}

fn default_cap() -> u64 {
    2000
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnlineOverrides {
    pub eta0: Option<f64>,
    pub batch_size: Option<usize>,
    pub i_max: Option<u64>,
    pub offset: Option<f64>,
    pub acceptance_radius: Option<f64>,
    pub enable_reset: Option<bool>,
    pub enable_random_steps: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SamplerSpec {
    SagaOnline {
        #[serde(default)]
        profile: Profile,
        #[serde(default)]
        theory: Option<TheoryInputs>,
        #[serde(default)]
        overrides: OnlineOverrides,
    },
    SagaOffline {
        #[serde(default)]
        profile: Profile,
        #[serde(default)]
        theory: Option<TheoryInputs>,
        eta: Option<f64>,
        batch_size: Option<usize>,
        i_max: Option<u64>,
    },
    Sgld {
        schedule: Option<StepSchedule>,
        #[serde(default = "default_batch")]
        batch_size: usize,
        i_max: Option<u64>,
    },
    Mala {
        schedule: Option<StepSchedule>,
        /// Proposals per epoch; defaults to the budget divided by `t + 1`.
        steps: Option<u64>,
        #[serde(default = "yes")]
        adjust: bool,
    },
    LaplaceFull {},
    LaplaceOnline {},
}

fn default_batch() -> usize {
    64
}

fn yes() -> bool {
    true
}

impl SamplerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SamplerSpec::SagaOnline { .. } => "saga-online",
            SamplerSpec::SagaOffline { .. } => "saga-offline",
            SamplerSpec::Sgld { .. } => "sgld",
            SamplerSpec::Mala { .. } => "mala",
            SamplerSpec::LaplaceFull {} => "laplace-full",
            SamplerSpec::LaplaceOnline {} => "laplace-online",
        }
    }

    /// Replaces the parameter profile of the SAGA samplers.
    pub fn set_profile(&mut self, p: Profile) -> Result<()> {
        match self {
            SamplerSpec::SagaOnline { profile, .. } | SamplerSpec::SagaOffline { profile, .. } => {
                *profile = p;
                Ok(())
            }
            other => Err(Error::Config(format!("sampler `{}` has no profile", other.name()))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSource {
    Generate(DatasetSpec),
    Path(PathBuf),
}

impl DatasetSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSource::Generate(spec) => generate(spec),
            DatasetSource::Path(p) => Dataset::read(p),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    /// Gradient evaluations per epoch for iterative samplers.
    pub grad_evals_per_epoch: Option<u64>,
    /// Per-epoch time limit for saga-online, sgld and mala. Runs using it
    /// are not reproducible.
    #[serde(default)]
    pub wall_clock_ms_per_epoch: Option<f64>,
}

impl Budget {
    fn time_limit(&self) -> Result<Option<Duration>> {
        match self.wall_clock_ms_per_epoch {
            None => Ok(None),
            Some(ms) if ms > 0.0 && ms.is_finite() => Ok(Some(Duration::from_secs_f64(ms / 1000.0))),
            Some(ms) => Err(Error::Config(format!("wall_clock_ms_per_epoch must be positive, got {ms}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dataset: DatasetSource,
    #[serde(default = "unit")]
    pub prior_alpha: f64,
    pub sampler: SamplerSpec,
    #[serde(default = "one")]
    pub replicas: usize,
    /// Number of epochs to run; all rows when absent.
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default)]
    pub budget: Budget,
    /// Record per-epoch samples and mode distances.
    #[serde(default)]
    pub diagnostics: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn unit() -> f64 {
    1.0
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::Config("replicas must be at least 1".into()));
        }
        if !(self.prior_alpha >= 0.0 && self.prior_alpha.is_finite()) {
            return Err(Error::Config("prior_alpha must be non-negative".into()));
        }
        if self.epochs == Some(0) {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if let DatasetSource::Generate(spec) = &self.dataset {
            spec.validate()?;
        }
        Ok(())
    }
}

/// A prepared problem: data, stream, horizon and smoothness constants.
pub struct Problem {
    pub dataset: Dataset,
    pub stream: ModelStream,
    pub horizon: usize,
    pub constants: AssumptionConstants,
}

impl Problem {
    pub fn new(dataset: Dataset, alpha: f64, epochs: Option<usize>) -> Result<Self> {
        let stream = dataset.to_stream(alpha)?;
        let horizon = epochs.unwrap_or(stream.len());
        if horizon > stream.len() {
            return Err(Error::Config(format!(
                "{horizon} epochs requested but the dataset has {} rows",
                stream.len()
            )));
        }
        let constants = assumption_constants(&dataset, alpha)?;
        Ok(Self {
            dataset,
            stream,
            horizon,
            constants,
        })
    }

    /// `c = L0 / L`.
    pub fn natural_offset(&self) -> f64 {
        self.constants.prior_lipschitz / self.constants.lipschitz
    }

    fn regularity(&self, th: &TheoryInputs) -> RegularityConstants {
        RegularityConstants {
            lipschitz: self.constants.lipschitz,
            prior_lipschitz: self.constants.prior_lipschitz,
            tail_a: th.tail_a,
            tail_k: th.tail_k,
            drift: th.drift,
            dim: self.stream.dim(),
        }
    }
}

fn need_theory(theory: &Option<TheoryInputs>) -> Result<&TheoryInputs> {
    theory
        .as_ref()
        .ok_or_else(|| Error::Config("the theory profile needs a `theory` block".into()))
}

fn steps_from_budget(budget: &Budget, batch: usize, what: &str) -> Result<u64> {
    budget
        .grad_evals_per_epoch
        .map(|b| (b / (batch as u64 + 1)).max(1))
        .ok_or_else(|| Error::Config(format!("{what}: give i_max or a per-epoch gradient budget")))
}

/// Concrete online-sampler settings for a spec on a problem.
pub fn resolve_online(
    profile: Profile,
    theory: &Option<TheoryInputs>,
    o: &OnlineOverrides,
    problem: &Problem,
    budget: &Budget,
) -> Result<OnlineConfig> {
    let mut cfg = match profile {
        Profile::Theory => {
            let th = need_theory(theory)?;
            let consts = problem.regularity(th);
            default_parameters(&consts, th.eps, problem.horizon)?.capped_config(th.cap, th.eps, &consts)
        }
        Profile::Benchmark => {
            let b = o.batch_size.unwrap_or(64);
            let i_max = match o.i_max {
                Some(i) => i,
                None => steps_from_budget(budget, b, "saga-online")?,
            };
            OnlineConfig::benchmark(i_max)
        }
        Profile::Explicit => {
            let missing = |f: &str| Error::Config(format!("explicit profile: `{f}` is required"));
            OnlineConfig {
                eta0: o.eta0.ok_or_else(|| missing("eta0"))?,
                batch_size: o.batch_size.ok_or_else(|| missing("batch_size"))?,
                i_max: o.i_max.ok_or_else(|| missing("i_max"))?,
                offset: o.offset.ok_or_else(|| missing("offset"))?,
                acceptance_radius: o.acceptance_radius.ok_or_else(|| missing("acceptance_radius"))?,
                enable_reset: o.enable_reset.unwrap_or(true),
                enable_random_steps: o.enable_random_steps.unwrap_or(true),
            }
        }
    };
    if let Some(v) = o.eta0 {
        cfg.eta0 = v;
    }
    if let Some(v) = o.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = o.i_max {
        cfg.i_max = v;
    }
    if let Some(v) = o.offset {
        cfg.offset = v;
    }
    if let Some(v) = o.acceptance_radius {
        cfg.acceptance_radius = v;
    }
    if let Some(v) = o.enable_reset {
        cfg.enable_reset = v;
    }
    if let Some(v) = o.enable_random_steps {
        cfg.enable_random_steps = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_offline(
    profile: Profile,
    theory: &Option<TheoryInputs>,
    eta: Option<f64>,
    batch_size: Option<usize>,
    i_max: Option<u64>,
    problem: &Problem,
    budget: &Budget,
) -> Result<OfflineConfig> {
    let mut cfg = match profile {
        Profile::Theory => {
            let th = need_theory(theory)?;
            OfflineConfig::from_theory(&problem.regularity(th), th.eps, problem.horizon, th.cap)?
        }
        Profile::Benchmark | Profile::Explicit => {
            let b = batch_size.unwrap_or(64);
            OfflineConfig {
                eta: eta.ok_or_else(|| Error::Config("saga-offline: `eta` is required".into()))?,
                batch_size: b,
                i_max: match i_max {
                    Some(i) => i,
                    None => steps_from_budget(budget, b, "saga-offline")?,
                },
            }
        }
    };
    if let Some(v) = eta {
        cfg.eta = v;
    }
    if let Some(v) = batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = i_max {
        cfg.i_max = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_sgld(
    schedule: &Option<StepSchedule>,
    batch_size: usize,
    i_max: Option<u64>,
    budget: &Budget,
) -> Result<SgldConfig> {
    let schedule = schedule.unwrap_or_else(StepSchedule::benchmark_sgld);
    StepSchedule::new(schedule.eta0, schedule.decay)?;
    if batch_size == 0 {
        return Err(Error::Config("sgld batch size must be at least 1".into()));
    }
    let i_max = match i_max {
        Some(i) => i,
        None => steps_from_budget(budget, batch_size, "sgld")?,
    };
    Ok(SgldConfig {
        schedule,
        batch_size,
        i_max,
    })
}

/// MALA settings and a per-epoch proposal count rule.
#[derive(Clone, Debug)]
struct MalaPlan {
    config: MalaConfig,
    fixed: Option<u64>,
    budget: Option<u64>,
}

impl MalaPlan {
    fn new(schedule: &Option<StepSchedule>, steps: Option<u64>, adjust: bool, budget: &Budget) -> Result<Self> {
        let schedule = schedule.unwrap_or_else(StepSchedule::benchmark_mala);
        StepSchedule::new(schedule.eta0, schedule.decay)?;
        if steps.is_none() && budget.grad_evals_per_epoch.is_none() {
            return Err(Error::Config("mala: give steps or a per-epoch gradient budget".into()));
        }
        Ok(Self {
            config: MalaConfig {
                schedule,
                steps: steps.unwrap_or(0),
                adjust,
            },
            fixed: steps,
            budget: budget.grad_evals_per_epoch,
        })
    }

    /// Each proposal needs the full gradient: `t + 1` evaluations.
    fn steps_at(&self, t: usize) -> u64 {
        match (self.fixed, self.budget) {
            (Some(s), _) => s,
            (None, Some(b)) => (b / (t as u64 + 1)).max(1),
            (None, None) => 1,
        }
    }
}

/// A sampler ready to run on a problem.
#[derive(Clone, Debug)]
enum Plan {
    Online(OnlineConfig),
    Offline(OfflineConfig),
    Sgld(SgldConfig),
    Mala(MalaPlan),
    LaplaceFull,
    LaplaceOnline,
}

impl Plan {
    fn new(spec: &SamplerSpec, problem: &Problem, budget: &Budget) -> Result<Self> {
        Ok(match spec {
            SamplerSpec::SagaOnline {
                profile,
                theory,
                overrides,
            } => Plan::Online(resolve_online(*profile, theory, overrides, problem, budget)?),
            SamplerSpec::SagaOffline {
                profile,
                theory,
                eta,
                batch_size,
                i_max,
            } => Plan::Offline(resolve_offline(*profile, theory, *eta, *batch_size, *i_max, problem, budget)?),
            SamplerSpec::Sgld {
                schedule,
                batch_size,
                i_max,
            } => Plan::Sgld(resolve_sgld(schedule, *batch_size, *i_max, budget)?),
            SamplerSpec::Mala {
                schedule,
                steps,
                adjust,
            } => Plan::Mala(MalaPlan::new(schedule, *steps, *adjust, budget)?),
            SamplerSpec::LaplaceFull {} => Plan::LaplaceFull,
            SamplerSpec::LaplaceOnline {} => Plan::LaplaceOnline,
        })
    }

    fn offset(&self, problem: &Problem) -> f64 {
        match self {
            Plan::Online(c) => c.offset,
            _ => problem.natural_offset(),
        }
    }

    /// Resolved parameters, recorded in the manifest.
    fn describe(&self) -> serde_json::Value {
        match self {
            Plan::Online(c) => serde_json::to_value(c),
            Plan::Offline(c) => serde_json::to_value(c),
            Plan::Sgld(c) => serde_json::to_value(c),
            Plan::Mala(m) => serde_json::to_value(&m.config),
            Plan::LaplaceFull | Plan::LaplaceOnline => Ok(serde_json::Value::Null),
        }
        .unwrap_or(serde_json::Value::Null)
    }
}

/// One JSON line of `audit.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditLine {
    pub replica: usize,
    #[serde(flatten)]
    pub record: EpochAudit,
}

/// Output of one replica.
#[derive(Clone, Debug)]
pub struct ReplicaResult {
    pub sample: Vector,
    pub evals: EvalCounter,
    /// One record per epoch, or per temperature stage for the offline sampler.
    pub records: Vec<serde_json::Value>,
    /// Per-epoch samples in diagnostic mode.
    pub trajectory: Vec<Vector>,
}

fn plain_record(epoch: usize, grad_evals: u64, steps: u64, step_evals: u64) -> EpochAudit {
    EpochAudit {
        epoch,
        grad_evals,
        refreshes: 0,
        steps,
        step_evals,
        reset: false,
        checkpoint_epoch: 0,
        drift: 0.0,
        scaled_mode_distance: None,
    }
}

struct Diagnostics<'a> {
    modes: &'a [Vector],
    offset: f64,
}

impl Diagnostics<'_> {
    fn scaled(&self, t: usize, x: &Vector) -> f64 {
        (t as f64 + self.offset).sqrt() * distance(x.as_slice(), self.modes[t - 1].as_slice())
    }
}

fn run_replica(
    plan: &Plan,
    problem: &Problem,
    rng: RngStream,
    diag: Option<&Diagnostics>,
    limit: Option<Duration>,
) -> Result<ReplicaResult> {
    let stream = &problem.stream;
    let horizon = problem.horizon;
    let d = stream.dim();
    let x0 = Vector::zeros(d);
    let mut records = Vec::new();
    let mut trajectory = Vec::new();
    let mut finish = |mut rec: EpochAudit, x: &Vector, records: &mut Vec<serde_json::Value>| {
        if let Some(dg) = diag {
            rec.scaled_mode_distance = Some(dg.scaled(rec.epoch, x));
            trajectory.push(x.clone());
        }
        records.push(serde_json::to_value(rec).expect("audit record serializes"));
    };
    let (sample, evals) = match plan {
        Plan::Online(cfg) => {
            let mut s = OnlineSampler::new(x0, cfg.clone(), rng)?;
            if let Some(l) = limit {
                s = s.with_time_limit(l);
            }
            for _ in 0..horizon {
                let rec = s.advance_epoch(stream)?;
                finish(rec, s.sample(), &mut records);
            }
            (s.sample().clone(), s.evals())
        }
        Plan::Offline(cfg) => {
            let out = offline_sample(&stream.truncated(horizon), x0, cfg, rng)?;
            for st in &out.stages {
                records.push(serde_json::to_value(st)?);
            }
            (out.sample, out.evals)
        }
        Plan::Sgld(cfg) => {
            let mut c = ChainState::new(x0, cfg.schedule.at(1), 0, rng)?;
            for _ in 0..horizon {
                let before = c.evals.gradients;
                let (steps, cost) = match limit {
                    None => (cfg.i_max, sgld_epoch(&mut c, stream, cfg)?),
                    Some(l) => {
                        let started = Instant::now();
                        c.epoch += 1;
                        c.eta = cfg.schedule.at(c.epoch);
                        let (mut n, mut cost) = (0, 0);
                        while started.elapsed() < l {
                            cost += sgld_step(&mut c, stream, cfg.batch_size)?.cost();
                            n += 1;
                        }
                        (n, cost)
                    }
                };
                let rec = plain_record(c.epoch, c.evals.gradients - before, steps, cost);
                finish(rec, &c.x, &mut records);
            }
            (c.x.clone(), c.evals)
        }
        Plan::Mala(mp) => {
            let mut m = MalaChain::new(ChainState::new(x0, mp.config.schedule.at(1), 0, rng)?);
            for t in 1..=horizon {
                let before = m.chain.evals.gradients;
                let steps = match limit {
                    None => {
                        let steps = mp.steps_at(t);
                        m.epoch(stream, &mp.config, steps)?;
                        steps
                    }
                    Some(l) => {
                        let started = Instant::now();
                        m.epoch(stream, &mp.config, 0)?;
                        let mut n = 0;
                        while started.elapsed() < l {
                            m.step(stream, mp.config.adjust)?;
                            n += 1;
                        }
                        n
                    }
                };
                let used = m.chain.evals.gradients - before;
                let rec = plain_record(t, used, steps, used);
                finish(rec, &m.chain.x, &mut records);
            }
            (m.chain.x.clone(), m.chain.evals)
        }
        Plan::LaplaceOnline => {
            let mut rng = rng;
            let mut evals = EvalCounter::default();
            let mut ol = OnlineLaplace::new(stream, &mut evals)?;
            for t in 1..=horizon {
                let before = evals.gradients;
                ol.update(stream, &mut evals)?;
                if diag.is_some() || t == horizon {
                    let x = ol.sample(&mut rng);
                    finish(plain_record(t, evals.gradients - before, 1, 0), &x, &mut records);
                    if t == horizon {
                        return Ok(ReplicaResult {
                            sample: x,
                            evals,
                            records,
                            trajectory,
                        });
                    }
                } else {
                    records.push(serde_json::to_value(plain_record(t, evals.gradients - before, 1, 0))?);
                }
            }
            unreachable!("horizon is at least one")
        }
        Plan::LaplaceFull => {
            let mut rng = rng;
            let mut evals = EvalCounter::default();
            let approx = laplace_full(stream, horizon, &x0, &mut evals)?;
            let x = approx.sample(&mut rng)?;
            records.push(serde_json::to_value(plain_record(horizon, 0, 0, 0))?);
            (x, evals)
        }
    };
    Ok(ReplicaResult {
        sample,
        evals,
        records,
        trajectory,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub sampler: String,
    pub parameters: serde_json::Value,
    pub seed: u64,
    pub replicas: usize,
    pub epochs: usize,
    pub dim: usize,
    pub offset: f64,
    pub grad_evals_total: u64,
    pub value_evals_total: u64,
    pub hessian_evals_total: u64,
    pub grad_evals_per_replica: Vec<u64>,
    pub files: Vec<String>,
}

pub struct RunOutput {
    pub manifest: Manifest,
    pub samples: SampleSet,
    pub replicas: Vec<ReplicaResult>,
    /// Mode path `x*_1..x*_T`, diagnostic mode only.
    pub modes: Vec<Vector>,
}

/// Runs every replica of `config` in memory.
pub fn execute(config: &ExperimentConfig) -> Result<(Problem, RunOutput)> {
    config.validate()?;
    let problem = Problem::new(config.dataset.load()?, config.prior_alpha, config.epochs)?;
    let plan = Plan::new(&config.sampler, &problem, &config.budget)?;
    let offset = plan.offset(&problem);
    let modes = if config.diagnostics {
        mode_path(&problem.stream, problem.horizon)?
    } else {
        Vec::new()
    };
    let diag = Diagnostics {
        modes: &modes,
        offset,
    };
    let limit = config.budget.time_limit()?;
    let root = RngStream::root(config.seed);
    let replicas: Vec<ReplicaResult> = (0..config.replicas)
        .into_par_iter()
        .map(|r| {
            run_replica(
                &plan,
                &problem,
                root.child_indexed("replica", r as u64),
                config.diagnostics.then_some(&diag),
                limit,
            )
        })
        .collect::<Result<_>>()?;
    let mut samples = SampleSet::new(
        config.sampler.name(),
        problem.horizon,
        replicas.iter().map(|r| r.sample.clone()).collect(),
    )?;
    samples.seeds = vec![config.seed];
    samples.grad_evals = replicas.iter().map(|r| r.evals.gradients).sum();
    let mut files = vec!["config.json", "seed", "audit.jsonl", "samples.csv", "manifest.json"];
    if config.diagnostics {
        files.extend(["trajectory.csv", "modes.csv"]);
    }
    let manifest = Manifest {
        sampler: config.sampler.name().into(),
        parameters: plan.describe(),
        seed: config.seed,
        replicas: config.replicas,
        epochs: problem.horizon,
        dim: problem.stream.dim(),
        offset,
        grad_evals_total: samples.grad_evals,
        value_evals_total: replicas.iter().map(|r| r.evals.values).sum(),
        hessian_evals_total: replicas.iter().map(|r| r.evals.hessians).sum(),
        grad_evals_per_replica: replicas.iter().map(|r| r.evals.gradients).collect(),
        files: files.into_iter().map(String::from).collect(),
    };
    Ok((
        problem,
        RunOutput {
            manifest,
            samples,
            replicas,
            modes,
        },
    ))
}

fn vector_row(prefix: &[String], x: &Vector) -> Vec<String> {
    prefix.iter().cloned().chain(x.iter().map(|v| v.to_string())).collect()
}

/// Runs `config` and writes the run directory `out`.
pub fn run_to_dir(config: &ExperimentConfig, out: &Path) -> Result<Manifest> {
    let (problem, output) = execute(config)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("config.json"), serde_json::to_string_pretty(config)? + "\n")?;
    fs::write(out.join("seed"), format!("{}\n", config.seed))?;
    let mut audit = String::new();
    for (r, rep) in output.replicas.iter().enumerate() {
        for rec in &rep.records {
            let mut obj = serde_json::Map::new();
            obj.insert("replica".into(), r.into());
            if let serde_json::Value::Object(fields) = rec {
                obj.extend(fields.clone());
            }
            writeln!(audit, "{}", serde_json::Value::Object(obj)).expect("string write");
        }
    }
    fs::write(out.join("audit.jsonl"), audit)?;
    output.samples.write_csv(&out.join("samples.csv"))?;
    if config.diagnostics {
        let d = problem.stream.dim();
        let coords: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        let mut w = csv::Writer::from_path(out.join("trajectory.csv"))?;
        w.write_record(["replica".to_string(), "epoch".into()].iter().chain(&coords))?;
        for (r, rep) in output.replicas.iter().enumerate() {
            for (t, x) in rep.trajectory.iter().enumerate() {
                w.write_record(vector_row(&[r.to_string(), (t + 1).to_string()], x))?;
            }
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(out.join("modes.csv"))?;
        w.write_record(std::iter::once(&"epoch".to_string()).chain(&coords))?;
        for (t, x) in output.modes.iter().enumerate() {
            w.write_record(vector_row(&[(t + 1).to_string()], x))?;
        }
        w.flush()?;
    }
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&output.manifest)? + "\n")?;
    Ok(output.manifest)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub sampler: String,
    pub epoch: usize,
    pub samples: usize,
    pub reference: String,
    pub reference_samples: usize,
    pub marginal_accuracy: f64,
    /// `sum_b |p_b - q_b|` per coordinate.
    pub variation: Vec<f64>,
}

/// `n` exact posterior draws at the run horizon; conjugate models only.
pub fn exact_reference(config: &ExperimentConfig, n: usize) -> Result<SampleSet> {
    let problem = Problem::new(config.dataset.load()?, config.prior_alpha, config.epochs)?;
    let post = exact_linear_posterior(&problem.stream, problem.horizon)?;
    let mut rng = RngStream::root(config.seed).child("reference");
    SampleSet::new("exact", problem.horizon, post.sample_n(n, &mut rng)?)
}

pub fn evaluate_samples(mu: &SampleSet, pi: &SampleSet, reference: &str) -> Result<EvaluationReport> {
    let variation = (0..pi.dim())
        .map(|i| crate::evaluation::variation_norm(&mu.coordinate(i), &pi.coordinate(i), i))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvaluationReport {
        sampler: mu.sampler.clone(),
        epoch: mu.epoch,
        samples: mu.len(),
        reference: reference.into(),
        reference_samples: pi.len(),
        marginal_accuracy: marginal_accuracy(mu, pi)?,
        variation,
    })
}

/// Scores `samples.csv` of a run directory against `reference`, or against
/// `exact_draws` exact posterior draws when no reference file is given.
pub fn evaluate_dir(run: &Path, reference: Option<&Path>, exact_draws: usize) -> Result<EvaluationReport> {
    let config = ExperimentConfig::load(&run.join("config.json"))?;
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(run.join("manifest.json"))?)?;
    let mut mu = SampleSet::read_csv(&run.join("samples.csv"), manifest.sampler.clone())?;
    mu.epoch = manifest.epochs;
    match reference {
        Some(p) => {
            let pi = SampleSet::read_csv(p, "reference")?;
            evaluate_samples(&mu, &pi, &p.display().to_string())
        }
        None => evaluate_samples(&mu, &exact_reference(&config, exact_draws)?, "exact"),
    }
}

/// Fits the regularity constants from a diagnostic-mode run directory.
pub fn audit_dir(run: &Path) -> Result<AuditReport> {
    let config = ExperimentConfig::load(&run.join("config.json"))?;
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(run.join("manifest.json"))?)?;
    let problem = Problem::new(config.dataset.load()?, config.prior_alpha, config.epochs)?;
    let mut scaled = vec![Vec::new(); manifest.replicas];
    for line in BufReader::new(fs::File::open(run.join("audit.jsonl"))?).lines() {
        let line = line?;
        let rec: AuditLine = serde_json::from_str(&line).map_err(|_| {
            Error::Config("audit needs an epoch-wise sampler run (not saga-offline)".into())
        })?;
        let s = rec.record.scaled_mode_distance.ok_or_else(|| {
            Error::Config("audit needs a run made with \"diagnostics\": true".into())
        })?;
        scaled
            .get_mut(rec.replica)
            .ok_or_else(|| Error::Data(format!("replica {} out of range", rec.replica)))?
            .push(s);
    }
    let modes = read_modes(&run.join("modes.csv"), problem.stream.dim())?;
    let mut rng = RngStream::root(config.seed).child("audit");
    audit_assumptions(
        &AuditInput {
            stream: &problem.stream,
            offset: manifest.offset,
            scaled_distances: &scaled,
            modes: &modes,
        },
        &mut rng,
    )
}

fn read_modes(path: &Path, dim: usize) -> Result<Vec<Vector>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let vals = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|e| Error::Data(format!("modes.csv: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: vals.len(),
            });
        }
        out.push(Vector::from_vec(vals));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    #[serde(default = "thousand")]
    pub chains: usize,
    #[serde(default = "thousand_u64")]
    pub steps: u64,
    #[serde(default)]
    pub schedule: Option<StepSchedule>,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        Self {
            chains: 1000,
            steps: 1000,
            schedule: None,
        }
    }
}

fn thousand() -> usize {
    1000
}

fn thousand_u64() -> u64 {
    1000
}

fn eight() -> usize {
    8
}

/// Marginal-accuracy comparison of several samplers at the last epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FigureConfig {
    pub seed: u64,
    /// Each replica regenerates the data with a seed derived from this one.
    pub dataset: DatasetSpec,
    #[serde(default = "unit")]
    pub prior_alpha: f64,
    #[serde(default = "eight")]
    pub replicas: usize,
    pub grad_evals_per_epoch: u64,
    /// Draws per sampler, each a re-run of the last epoch from the state
    /// saved one epoch earlier.
    #[serde(default = "thousand")]
    pub samples: usize,
    #[serde(default)]
    pub reference: ReferenceSpec,
    #[serde(default = "default_samplers")]
    pub samplers: Vec<SamplerSpec>,
}

pub fn default_samplers() -> Vec<SamplerSpec> {
    vec![
        SamplerSpec::Sgld {
            schedule: None,
            batch_size: 64,
            i_max: None,
        },
        SamplerSpec::LaplaceOnline {},
        SamplerSpec::Mala {
            schedule: None,
            steps: None,
            adjust: true,
        },
        SamplerSpec::SagaOnline {
            profile: Profile::Benchmark,
            theory: None,
            overrides: OnlineOverrides::default(),
        },
        SamplerSpec::LaplaceFull {},
    ]
}

impl FigureConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        if self.replicas == 0 || self.samples < 2 || self.reference.chains < 2 || self.samplers.is_empty() {
            return Err(Error::Config(
                "figure: replicas >= 1, samples >= 2, reference chains >= 2 and one sampler required".into(),
            ));
        }
        if self.grad_evals_per_epoch == 0 {
            return Err(Error::Config("figure: grad_evals_per_epoch must be positive".into()));
        }
        Ok(())
    }

    fn dataset_for(&self, replica: usize) -> DatasetSpec {
        let mut spec = self.dataset.clone();
        spec.seed = spec.seed.wrapping_add((replica as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        spec
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FigureRow {
    pub replica: usize,
    pub sampler: String,
    pub marginal_accuracy: f64,
    /// Mean gradient evaluations spent on the last epoch per draw.
    pub last_epoch_grad_evals: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FigureSummary {
    pub sampler: String,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub replicas: usize,
}

pub struct FigureOutput {
    pub rows: Vec<FigureRow>,
    pub summary: Vec<FigureSummary>,
}

/// Long-run MALA chains at the last epoch started from Laplace draws.
pub fn mala_reference(
    stream: &ModelStream,
    spec: &ReferenceSpec,
    start: &crate::numerics::GaussianApprox,
    rng: &RngStream,
) -> Result<SampleSet> {
    let t = stream.len();
    let schedule = spec.schedule.unwrap_or_else(StepSchedule::benchmark_mala);
    let draws = (0..spec.chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng.child_indexed("chain", c as u64);
            let x0 = start.sample(&mut rng)?;
            let mut m = MalaChain::new(ChainState::new(x0, schedule.at(t), t, rng)?);
            for _ in 0..spec.steps {
                m.step(stream, true)?;
            }
            Ok(m.chain.x)
        })
        .collect::<Result<Vec<_>>>()?;
    SampleSet::new("reference", t, draws)
}

/// `n` draws at the last epoch; iterative samplers run once to `T - 1` and
/// then repeat epoch `T` from that saved state. Returns the draws and the
/// mean last-epoch gradient cost.
fn draws_at_horizon(plan: &Plan, stream: &ModelStream, n: usize, rng: &RngStream) -> Result<(Vec<Vector>, f64)> {
    let t = stream.len();
    let x0 = Vector::zeros(stream.dim());
    let forks = |f: &(dyn Fn(RngStream) -> Result<(Vector, u64)> + Sync)| -> Result<(Vec<Vector>, f64)> {
        let out = (0..n)
            .into_par_iter()
            .map(|j| f(rng.child_indexed("fork", j as u64)))
            .collect::<Result<Vec<_>>>()?;
        let cost = out.iter().map(|o| o.1 as f64).sum::<f64>() / n as f64;
        Ok((out.into_iter().map(|o| o.0).collect(), cost))
    };
    match plan {
        Plan::Online(cfg) => {
            let mut s = OnlineSampler::new(x0, cfg.clone(), rng.child("run"))?;
            s.run_until(stream, t - 1)?;
            forks(&|r| {
                let mut f = s.fork(r);
                let a = f.advance_epoch(stream)?;
                Ok((f.sample().clone(), a.grad_evals))
            })
        }
        Plan::Sgld(cfg) => {
            let mut c = ChainState::new(x0, cfg.schedule.at(1), 0, rng.child("run"))?;
            for _ in 1..t {
                sgld_epoch(&mut c, stream, cfg)?;
            }
            forks(&|r| {
                let mut f = c.clone();
                f.rng = r;
                let cost = sgld_epoch(&mut f, stream, cfg)?;
                Ok((f.x, cost))
            })
        }
        Plan::Mala(mp) => {
            let mut m = MalaChain::new(ChainState::new(x0, mp.config.schedule.at(1), 0, rng.child("run"))?);
            for e in 1..t {
                m.epoch(stream, &mp.config, mp.steps_at(e))?;
            }
            forks(&|r| {
                let mut f = m.clone();
                f.chain.rng = r;
                let before = f.chain.evals.gradients;
                f.epoch(stream, &mp.config, mp.steps_at(t))?;
                Ok((f.chain.x.clone(), f.chain.evals.gradients - before))
            })
        }
        Plan::Offline(cfg) => forks(&|r| {
            let out = offline_sample(stream, x0.clone(), cfg, r)?;
            Ok((out.sample, out.evals.gradients))
        }),
        Plan::LaplaceOnline => {
            let mut evals = EvalCounter::default();
            let mut ol = OnlineLaplace::new(stream, &mut evals)?;
            let mut last = 0;
            for _ in 0..t {
                let before = evals.gradients;
                ol.update(stream, &mut evals)?;
                last = evals.gradients - before;
            }
            let mut r = rng.child("draws");
            Ok(((0..n).map(|_| ol.sample(&mut r)).collect(), last as f64))
        }
        Plan::LaplaceFull => {
            let mut evals = EvalCounter::default();
            let approx = laplace_full(stream, t, &x0, &mut evals)?;
            let mut r = rng.child("draws");
            Ok((approx.sample_n(n, &mut r)?, evals.gradients as f64))
        }
    }
}

fn figure_replica(cfg: &FigureConfig, r: usize) -> Result<Vec<FigureRow>> {
    let problem = Problem::new(generate(&cfg.dataset_for(r))?, cfg.prior_alpha, None)?;
    let stream = &problem.stream;
    let t = stream.len();
    let root = RngStream::root(cfg.seed).child_indexed("replica", r as u64);
    let mut counter = EvalCounter::default();
    let laplace = laplace_full(stream, t, &Vector::zeros(stream.dim()), &mut counter)?;
    let pi = mala_reference(stream, &cfg.reference, &laplace, &root.child("reference"))?;
    let budget = Budget {
        grad_evals_per_epoch: Some(cfg.grad_evals_per_epoch),
        wall_clock_ms_per_epoch: None,
    };
    cfg.samplers
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let plan = Plan::new(spec, &problem, &budget)?;
            let (draws, cost) = draws_at_horizon(&plan, stream, cfg.samples, &root.child_indexed(spec.name(), k as u64))?;
            let mu = SampleSet::new(spec.name(), t, draws)?;
            Ok(FigureRow {
                replica: r,
                sampler: spec.name().into(),
                marginal_accuracy: marginal_accuracy(&mu, &pi)?,
                last_epoch_grad_evals: cost,
            })
        })
        .collect()
}

pub fn figure(cfg: &FigureConfig) -> Result<FigureOutput> {
    cfg.validate()?;
    let rows: Vec<FigureRow> = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| figure_replica(cfg, r))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut summary = Vec::new();
    for spec in &cfg.samplers {
        if summary.iter().any(|s: &FigureSummary| s.sampler == spec.name()) {
            continue;
        }
        let v: Vec<f64> = rows
            .iter()
            .filter(|row| row.sampler == spec.name())
            .map(|row| row.marginal_accuracy)
            .collect();
        summary.push(FigureSummary {
            sampler: spec.name().into(),
            mean: mean(&v),
            sd: if v.len() > 1 { std_dev(&v) } else { 0.0 },
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            replicas: v.len(),
        });
    }
    Ok(FigureOutput { rows, summary })
}

/// Writes `config.json`, `figure1.csv` (summary) and `figure1_replicas.csv`.
pub fn figure_to_dir(cfg: &FigureConfig, out: &Path) -> Result<FigureOutput> {
    let result = figure(cfg)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("config.json"), serde_json::to_string_pretty(cfg)? + "\n")?;
    let mut w = csv::Writer::from_path(out.join("figure1.csv"))?;
    for s in &result.summary {
        w.serialize(s)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(out.join("figure1_replicas.csv"))?;
    for row in &result.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::Family;

    fn gaussian_config(sampler: &str, extra: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(&format!(
            r#"{{"seed": 5,
                "dataset": {{"generate": {{"family": {{"kind": "gaussian-mean", "t": 40, "true_mean": [0.5, -1.0]}}, "seed": 2}}}},
                "sampler": {sampler},
                "replicas": 6,
                "budget": {{"grad_evals_per_epoch": 650}}{extra}}}"#
        ))
        .unwrap()
    }

    fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
        let mut out: Vec<_> = fs::read_dir(dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
            })
            .collect();
        out.sort();
        out
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = r#"{"seed": 1, "dataset": {"path": "x.csv"}, "sampler": {"kind": "laplace-full"}, "colour": 3}"#;
        assert!(matches!(ExperimentConfig::from_json(bad), Err(Error::Json(_))));
        let bad = r#"{"seed": 1, "dataset": {"path": "x.csv"}, "sampler": {"kind": "sgld", "eta": 1}}"#;
        assert!(ExperimentConfig::from_json(bad).is_err());
        let zero = r#"{"seed": 1, "dataset": {"path": "x.csv"}, "sampler": {"kind": "laplace-full"}, "replicas": 0}"#;
        assert!(ExperimentConfig::from_json(zero).unwrap_err().is_config());
    }

    #[test]
    fn budget_sets_step_counts() {
        let cfg = gaussian_config(r#"{"kind": "saga-online"}"#, "");
        let problem = Problem::new(cfg.dataset.load().unwrap(), 1.0, None).unwrap();
        match Plan::new(&cfg.sampler, &problem, &cfg.budget).unwrap() {
            Plan::Online(c) => {
                assert_eq!(c.i_max, 10);
                assert_eq!(c.batch_size, 64);
                assert!(!c.enable_reset);
            }
            _ => unreachable!(),
        }
        let sgld = SamplerSpec::Sgld {
            schedule: None,
            batch_size: 9,
            i_max: None,
        };
        match Plan::new(&sgld, &problem, &cfg.budget).unwrap() {
            Plan::Sgld(c) => assert_eq!(c.i_max, 65),
            _ => unreachable!(),
        }
        let mala = SamplerSpec::Mala {
            schedule: None,
            steps: None,
            adjust: true,
        };
        match Plan::new(&mala, &problem, &cfg.budget).unwrap() {
            Plan::Mala(m) => {
                assert_eq!(m.steps_at(9), 65);
                assert_eq!(m.steps_at(1000), 1);
            }
            _ => unreachable!(),
        }
        let none = Budget::default();
        assert!(Plan::new(&sgld, &problem, &none).unwrap_err().is_config());
        let theory = SamplerSpec::SagaOnline {
            profile: Profile::Theory,
            theory: None,
            overrides: OnlineOverrides::default(),
        };
        assert!(Plan::new(&theory, &problem, &none).unwrap_err().is_config());
    }

    #[test]
    fn run_directory_is_reproducible() {
        let cfg = gaussian_config(r#"{"kind": "saga-online"}"#, r#", "diagnostics": true"#);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let m = run_to_dir(&cfg, a.path()).unwrap();
        run_to_dir(&cfg, b.path()).unwrap();
        assert_eq!(dir_bytes(a.path()), dir_bytes(b.path()));
        for f in &m.files {
            assert!(a.path().join(f).exists(), "{f}");
        }
        let audit = fs::read_to_string(a.path().join("audit.jsonl")).unwrap();
        assert_eq!(audit.lines().count(), 6 * 40);
        let per: u64 = m.grad_evals_per_replica.iter().sum();
        assert_eq!(per, m.grad_evals_total);

        // The snapshot alone reproduces the run.
        let snap = ExperimentConfig::load(&a.path().join("config.json")).unwrap();
        let c = tempfile::tempdir().unwrap();
        run_to_dir(&snap, c.path()).unwrap();
        assert_eq!(dir_bytes(a.path()), dir_bytes(c.path()));

        let mut other = cfg.clone();
        other.seed = 6;
        let d = tempfile::tempdir().unwrap();
        run_to_dir(&other, d.path()).unwrap();
        assert_ne!(
            fs::read(a.path().join("samples.csv")).unwrap(),
            fs::read(d.path().join("samples.csv")).unwrap()
        );
    }

    #[test]
    fn evaluate_and_audit_a_run() {
        let cfg = gaussian_config(r#"{"kind": "laplace-full"}"#, "");
        let dir = tempfile::tempdir().unwrap();
        run_to_dir(&cfg, dir.path()).unwrap();
        let rep = evaluate_dir(dir.path(), None, 5000).unwrap();
        assert_eq!(rep.samples, 6);
        assert_eq!(rep.variation.len(), 2);
        assert!((0.0..=1.0).contains(&rep.marginal_accuracy));
        // no diagnostics recorded
        assert!(audit_dir(dir.path()).unwrap_err().is_config());

        let cfg = gaussian_config(r#"{"kind": "mala"}"#, r#", "diagnostics": true"#);
        let dir = tempfile::tempdir().unwrap();
        run_to_dir(&cfg, dir.path()).unwrap();
        let report = audit_dir(dir.path()).unwrap();
        assert_eq!(report.replicas, 6);
        assert_eq!(report.epochs, 40);
        assert!(report.c_hat > 0.0);
    }

    #[test]
    fn every_sampler_runs() {
        for s in [
            r#"{"kind": "saga-online", "profile": "theory", "theory": {"eps": 0.2, "tail_a": 1.1, "tail_k": 1.0, "drift": 2.0, "cap": 50}}"#,
            r#"{"kind": "saga-online", "profile": "explicit", "overrides": {"eta0": 0.1, "batch_size": 4, "i_max": 20, "offset": 1.0, "acceptance_radius": 5.0}}"#,
            r#"{"kind": "saga-offline", "eta": 0.2, "i_max": 30}"#,
            r#"{"kind": "saga-offline", "profile": "theory", "theory": {"eps": 0.2, "tail_a": 1.1, "tail_k": 1.0, "drift": 2.0, "cap": 50}}"#,
            r#"{"kind": "sgld"}"#,
            r#"{"kind": "mala", "steps": 3}"#,
            r#"{"kind": "laplace-online"}"#,
            r#"{"kind": "laplace-full"}"#,
        ] {
            let cfg = gaussian_config(s, "");
            let (_, out) = execute(&cfg).unwrap_or_else(|e| panic!("{s}: {e}"));
            assert_eq!(out.samples.len(), 6);
            assert!(out.samples.draws.iter().all(|x| x.iter().all(|v| v.is_finite())));
        }
    }

    #[test]
    fn wall_clock_budget() {
        let mut cfg = gaussian_config(r#"{"kind": "sgld", "i_max": 1}"#, r#", "epochs": 3"#);
        cfg.budget.wall_clock_ms_per_epoch = Some(2.0);
        let (_, out) = execute(&cfg).unwrap();
        for rec in &out.replicas[0].records {
            assert!(rec["steps"].as_u64().unwrap() > 1);
        }
        let mut bad = cfg.clone();
        bad.budget.wall_clock_ms_per_epoch = Some(-1.0);
        assert!(matches!(execute(&bad), Err(e) if e.is_config()));
    }

    #[test]
    fn small_figure() {
        let cfg = FigureConfig {
            seed: 3,
            dataset: DatasetSpec {
                family: Family::Logistic { t: 30, d: 2, sparsity: 1 },
                seed: 4,
            },
            prior_alpha: 1.0,
            replicas: 2,
            grad_evals_per_epoch: 200,
            samples: 40,
            reference: ReferenceSpec {
                chains: 40,
                steps: 30,
                schedule: None,
            },
            samplers: default_samplers(),
        };
        let dir = tempfile::tempdir().unwrap();
        let out = figure_to_dir(&cfg, dir.path()).unwrap();
        assert_eq!(out.rows.len(), 2 * 5);
        assert_eq!(out.summary.len(), 5);
        assert!(out.rows.iter().all(|r| (0.0..=1.0).contains(&r.marginal_accuracy)));
        let again = figure(&cfg).unwrap();
        assert_eq!(out.rows, again.rows);
        assert!(dir.path().join("figure1.csv").exists());
    }
}
