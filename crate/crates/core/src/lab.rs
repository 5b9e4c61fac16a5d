//! Randomly generated uncertain-MaxEnt programs and the KLD-vs-data harness.
//!
//! Each trial draws a program (features, true weights, a noisy channel),
//! samples `N` observations through the channel, and scores every
//! registered [`ProgramLearner`] by the KL divergence from the true model
//! to the learned one.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution as _;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Gamma;
use rayon::prelude::*;

use crate::em::{
    ml_maxent_targets, observation_distribution, run_umaxent, EmConfig, EmpiricalObservations, ObservationModel,
    ObservationSpace,
};
use crate::maxent::{model_distribution, solve_maxent, Distribution, ElementSpace, FeatureTable, Weights};
use crate::seed;
use crate::{Error, Result};

/// Inclusive integer range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeRange {
    pub min: usize,
    pub max: usize,
}

impl SizeRange {
    pub fn new(min: usize, max: usize) -> Self {
        SizeRange { min, max }
    }

    fn validate(&self, what: &str) -> Result<()> {
        if self.min == 0 || self.min > self.max {
            return Err(Error::invalid(format!(
                "{what} range must be nonempty with positive bounds"
            )));
        }
        Ok(())
    }
}

/// Recipe for random programs.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomProgramSpec {
    pub elements: SizeRange,
    /// `None` ties the observation count to the element count.
    pub observations: Option<SizeRange>,
    pub features: SizeRange,
    /// True weights are drawn uniformly from `[-weight_range, weight_range]`.
    pub weight_range: f64,
    /// Symmetric Dirichlet parameter shared by every channel entry.
    pub channel_base: f64,
    /// Extra Dirichlet mass on each row's signal column.
    pub concentration: f64,
    pub seed: u64,
}

impl Default for RandomProgramSpec {
    fn default() -> Self {
        RandomProgramSpec {
            elements: SizeRange::new(4, 12),
            observations: None,
            features: SizeRange::new(2, 6),
            weight_range: 3.0,
            channel_base: 1.0,
            concentration: 3.0,
            seed: 0,
        }
    }
}

impl RandomProgramSpec {
    pub fn validate(&self) -> Result<()> {
        self.elements.validate("element")?;
        if let Some(o) = &self.observations {
            o.validate("observation")?;
        }
        self.features.validate("feature")?;
        if !(self.weight_range > 0.0) || !(self.channel_base > 0.0) || !(self.concentration >= 0.0) {
            return Err(Error::invalid("weight range and channel parameters must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedProgram {
    pub elements: ElementSpace,
    pub observations: ObservationSpace,
    pub features: FeatureTable,
    pub true_weights: Weights,
    pub true_distribution: Distribution,
    pub channel: ObservationModel,
    pub observation_distribution: Distribution,
}

/// Aggregate over the trials of one `(N, algorithm)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub n_observations: usize,
    pub algorithm: String,
    pub mean_kld: f64,
    pub std_kld: f64,
    pub trials: usize,
    pub failures: usize,
}

/// Outcome of one learner on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub algorithm: String,
    pub n_observations: usize,
    pub trial: usize,
    /// `None` when the learner failed on this trial.
    pub kld: Option<f64>,
    pub seed: u64,
}

fn dirichlet<R: Rng>(rng: &mut R, alphas: &[f64]) -> Vec<f64> {
    let draws: Vec<f64> = alphas
        .iter()
        .map(|&a| {
            if a.is_infinite() {
                return f64::INFINITY;
            }
            Gamma::new(a, 1.0).expect("positive shape").sample(rng)
        })
        .collect();
    if draws.iter().any(|d| d.is_infinite()) {
        return draws.iter().map(|d| if d.is_infinite() { 1.0 } else { 0.0 }).collect();
    }
    // Keep rows strictly positive so no observation is impossible.
    let floored: Vec<f64> = draws.iter().map(|d| d.max(1e-300)).collect();
    let total: f64 = floored.iter().sum();
    let mut row: Vec<f64> = floored.iter().map(|d| (d / total).max(1e-12)).collect();
    let total: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= total);
    row
}

/// Draws a program. Deterministic in `spec.seed`.
///
/// Channel rows are Dirichlet with every entry at `channel_base` and the
/// row's signal column raised by `concentration`; signal columns form a
/// random injection when there are at least as many symbols as elements.
pub fn generate_program(spec: &RandomProgramSpec) -> Result<GeneratedProgram> {
    spec.validate()?;
    let mut rng = seed::rng(spec.seed);
    let n = rng.random_range(spec.elements.min..=spec.elements.max);
    let m = match &spec.observations {
        Some(r) => rng.random_range(r.min..=r.max),
        None => n,
    };
    let k = rng.random_range(spec.features.min..=spec.features.max);
    let rows: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect();
    let features = FeatureTable::from_rows(rows)?;
    let true_weights = Weights::new(
        (0..k)
            .map(|_| rng.random_range(-spec.weight_range..=spec.weight_range))
            .collect(),
    )?;
    let true_distribution = model_distribution(&true_weights, &features)?;

    let mut symbols: Vec<usize> = (0..m).collect();
    symbols.shuffle(&mut rng);
    let channel_rows: Vec<Vec<f64>> = (0..n)
        .map(|x| {
            let signal = if m >= n { symbols[x] } else { rng.random_range(0..m) };
            let mut alphas = vec![spec.channel_base; m];
            alphas[signal] += spec.concentration;
            dirichlet(&mut rng, &alphas)
        })
        .collect();
    let channel = ObservationModel::from_rows(channel_rows)?;
    let observation_distribution = observation_distribution(&true_distribution, &channel)?;

    Ok(GeneratedProgram {
        elements: ElementSpace::new(n)?,
        observations: ObservationSpace::new(m)?,
        features,
        true_weights,
        true_distribution,
        channel,
        observation_distribution,
    })
}

/// Histogram of `n` i.i.d. draws from the program's true `Pr(ω)`.
pub fn sample_observations(program: &GeneratedProgram, n: usize, seed: u64) -> Result<EmpiricalObservations> {
    if n == 0 {
        return Err(Error::invalid("need at least one observation"));
    }
    let mut rng = seed::rng(seed);
    let index = WeightedIndex::new(program.observation_distribution.probs())
        .map_err(|e| Error::invalid(format!("observation distribution: {e}")))?;
    let mut counts = vec![0.0; program.observations.size()];
    for _ in 0..n {
        counts[index.sample(&mut rng)] += 1.0;
    }
    Ok(EmpiricalObservations::new(Distribution::from_weights(&counts)?))
}

/// `KL(p ‖ q) = Σ p log(p / q)` in nats.
pub fn kld(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::dim(format!("supports of size {} and {}", p.len(), q.len())));
    }
    let mut total = 0.0;
    for (i, (&a, &b)) in p.probs().iter().zip(q.probs()).enumerate() {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Err(Error::AbsoluteContinuity { index: i });
        }
        total += a * (a / b).ln();
    }
    Ok(total.max(0.0))
}

/// One way of turning observations into a model over the elements.
pub trait ProgramLearner: Send + Sync {
    fn name(&self) -> &'static str;

    /// `false` for controls that ignore the sampled data; they are run once
    /// per trial and reported at every `N`.
    fn uses_samples(&self) -> bool {
        true
    }

    fn learn(&self, program: &GeneratedProgram, data: &EmpiricalObservations, em: &EmConfig) -> Result<Distribution>;
}

/// EM over the noisy observations.
pub struct UMaxEnt;

impl ProgramLearner for UMaxEnt {
    fn name(&self) -> &'static str {
        "uMaxEnt"
    }

    fn learn(&self, program: &GeneratedProgram, data: &EmpiricalObservations, em: &EmConfig) -> Result<Distribution> {
        let res = run_umaxent(&program.features, &program.channel, data, em, None)?;
        model_distribution(&res.weights, &program.features)
    }
}

/// Decode each observation to its most likely element, then plain MaxEnt.
pub struct MlMaxEnt;

impl ProgramLearner for MlMaxEnt {
    fn name(&self) -> &'static str {
        "MLMaxEnt"
    }

    fn learn(&self, program: &GeneratedProgram, data: &EmpiricalObservations, em: &EmConfig) -> Result<Distribution> {
        let prior = Distribution::uniform(program.elements.size());
        let targets = ml_maxent_targets(&program.channel, data, &program.features, &prior)?;
        let sol = solve_maxent(&program.features, &targets, &em.solver, None)?;
        model_distribution(&sol.weights, &program.features)
    }
}

/// uMaxEnt handed the exact observation distribution.
pub struct InfObs;

impl ProgramLearner for InfObs {
    fn name(&self) -> &'static str {
        "InfObs"
    }

    fn uses_samples(&self) -> bool {
        false
    }

    fn learn(&self, program: &GeneratedProgram, _data: &EmpiricalObservations, em: &EmConfig) -> Result<Distribution> {
        let exact = EmpiricalObservations::new(program.observation_distribution.clone());
        UMaxEnt.learn(program, &exact, em)
    }
}

/// Learners addressable by name.
pub struct LearnerRegistry {
    learners: Vec<Box<dyn ProgramLearner>>,
}

impl LearnerRegistry {
    pub fn empty() -> Self {
        LearnerRegistry { learners: Vec::new() }
    }

    pub fn standard() -> Self {
        let mut r = LearnerRegistry::empty();
        r.register(Box::new(UMaxEnt));
        r.register(Box::new(MlMaxEnt));
        r.register(Box::new(InfObs));
        r
    }

    /// Later registrations under an existing name replace the earlier one.
    pub fn register(&mut self, learner: Box<dyn ProgramLearner>) {
        self.learners.retain(|l| l.name() != learner.name());
        self.learners.push(learner);
    }

    pub fn get(&self, name: &str) -> Option<&dyn ProgramLearner> {
        self.learners
            .iter()
            .find(|l| l.name().eq_ignore_ascii_case(name))
            .map(|b| b.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.learners.iter().map(|l| l.name()).collect()
    }

    /// Keeps only the named learners, in the order given.
    pub fn select(mut self, names: &[String]) -> Result<Self> {
        let mut picked = Vec::with_capacity(names.len());
        for name in names {
            let pos = self
                .learners
                .iter()
                .position(|l| l.name().eq_ignore_ascii_case(name))
                .ok_or_else(|| Error::invalid(format!("unknown learner {name:?}; known: {:?}", self.names())))?;
            picked.push(self.learners.remove(pos));
        }
        Ok(LearnerRegistry { learners: picked })
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn ProgramLearner> {
        self.learners.iter().map(|b| b.as_ref())
    }
}

#[derive(Debug, Clone)]
pub struct Figure1Config {
    pub spec: RandomProgramSpec,
    pub grid: Vec<usize>,
    pub trials: usize,
    pub em: EmConfig,
}

impl Default for Figure1Config {
    fn default() -> Self {
        Figure1Config {
            spec: RandomProgramSpec::default(),
            grid: vec![10, 100, 1_000, 10_000, 100_000],
            trials: 100,
            em: EmConfig::default(),
        }
    }
}

fn program_seed(master: u64, trial: usize) -> u64 {
    seed::derive(master, &[1, trial as u64])
}

fn sample_seed(master: u64, trial: usize, n: usize) -> u64 {
    seed::derive(master, &[2, trial as u64, n as u64])
}

/// Runs the KLD-vs-data experiment. `sink` receives each grid point's rows
/// (sorted by learner registration order, then trial) as soon as they are done.
pub fn run_figure1<F>(config: &Figure1Config, learners: &LearnerRegistry, mut sink: F) -> Result<Vec<CurvePoint>>
where
    F: FnMut(&[TrialRecord]) -> Result<()>,
{
    config.spec.validate()?;
    if config.grid.is_empty() || config.grid.windows(2).any(|w| w[0] >= w[1]) || config.grid[0] == 0 {
        return Err(Error::invalid(
            "observation grid must be positive and strictly ascending",
        ));
    }
    if config.trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let master = config.spec.seed;
    let programs: Vec<(u64, GeneratedProgram)> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let s = program_seed(master, t);
            let spec = RandomProgramSpec {
                seed: s,
                ..config.spec.clone()
            };
            generate_program(&spec).map(|p| (s, p))
        })
        .collect::<Result<_>>()?;

    // Data-independent controls: once per trial.
    let placeholder = EmpiricalObservations::new(Distribution::uniform(1));
    let fixed: Vec<Vec<Option<f64>>> = programs
        .par_iter()
        .map(|(_, program)| {
            learners
                .iter()
                .map(|l| {
                    if l.uses_samples() {
                        return None;
                    }
                    l.learn(program, &placeholder, &config.em)
                        .ok()
                        .and_then(|q| kld(&program.true_distribution, &q).ok())
                })
                .collect()
        })
        .collect();

    let mut points = Vec::new();
    for &n in &config.grid {
        let per_trial: Vec<Vec<TrialRecord>> = (0..config.trials)
            .into_par_iter()
            .map(|t| {
                let (pseed, program) = &programs[t];
                let sseed = sample_seed(master, t, n);
                let data = sample_observations(program, n, sseed);
                learners
                    .iter()
                    .enumerate()
                    .map(|(li, l)| {
                        let (kld_value, used_seed) = if l.uses_samples() {
                            let v = data.as_ref().ok().and_then(|d| {
                                l.learn(program, d, &config.em)
                                    .ok()
                                    .and_then(|q| kld(&program.true_distribution, &q).ok())
                            });
                            (v, sseed)
                        } else {
                            (fixed[t][li], *pseed)
                        };
                        TrialRecord {
                            algorithm: l.name().to_string(),
                            n_observations: n,
                            trial: t,
                            kld: kld_value,
                            seed: used_seed,
                        }
                    })
                    .collect()
            })
            .collect();

        let mut rows = Vec::with_capacity(config.trials * learners.names().len());
        for li in 0..learners.names().len() {
            for trial_rows in &per_trial {
                rows.push(trial_rows[li].clone());
            }
        }
        sink(&rows)?;
        for name in learners.names() {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| r.algorithm == name)
                .filter_map(|r| r.kld)
                .collect();
            let failures = config.trials - values.len();
            let (mean, std) = mean_std(&values);
            points.push(CurvePoint {
                n_observations: n,
                algorithm: name.to_string(),
                mean_kld: mean,
                std_kld: std,
                trials: values.len(),
                failures,
            });
        }
    }
    Ok(points)
}

/// Mean and sample standard deviation; NaN mean for an empty slice.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
