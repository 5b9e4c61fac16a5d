//! Inverse reinforcement learning under maximum causal entropy.
//!
//! [`maxcausalent_irl`] fits reward weights to fully observed trajectories.
//! [`umaxcausalent_irl`] learns from noisy per-step observations instead:
//! its E-step smooths each observation sequence with [`forward_backward`]
//! under the current soft policy, and its M-step fits the causal model to the
//! resulting expected feature counts. The decoding baselines live in
//! [`decode`], and every learner is reachable by name through [`registry`].

pub mod decode;
pub mod posterior;
pub mod registry;

use crate::em::ObservationModel;
use crate::math::{dot, log_sum_exp, max_abs_diff};
use crate::maxent::Weights;
use crate::mdp::{occupancy, Mdp, Policy, TimedPolicy, Trajectory};
use crate::optim::{minimize, SolverConfig};
use crate::{Error, Result};

pub use decode::{ml_decode_trajectories, woerr_filter, DecodeRule, PartialTrajectory};
pub use posterior::{forward_backward, forward_backward_evidence, PosteriorMarginals, StepEvidence};
pub use registry::{Demonstrations, IrlAlgorithm, IrlProblem, IrlRegistry};

/// Per-state observation function `Pr(ω|s)`.
pub type StepChannel = ObservationModel;

/// Reward features `φ_k(s, a)`, one `|S|·|A|` row per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardFeatures {
    k: usize,
    states: usize,
    actions: usize,
    values: Vec<f64>,
}

impl RewardFeatures {
    /// `rows[k][s][a]`.
    pub fn new(rows: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::invalid("need at least one reward feature"));
        }
        let states = rows[0].len();
        let actions = rows[0].first().map_or(0, Vec::len);
        if states == 0 || actions == 0 {
            return Err(Error::invalid("reward features need states and actions"));
        }
        let mut values = Vec::with_capacity(k * states * actions);
        for row in rows {
            if row.len() != states || row.iter().any(|r| r.len() != actions) {
                return Err(Error::dim("reward feature rows differ in shape"));
            }
            values.extend(row.into_iter().flatten());
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("reward features must be finite"));
        }
        Ok(RewardFeatures {
            k,
            states,
            actions,
            values,
        })
    }

    /// `φ_s(s', a) = 1` iff `s' = s`.
    pub fn state_indicators(states: usize, actions: usize) -> Self {
        let mut values = vec![0.0; states * states * actions];
        for s in 0..states {
            for a in 0..actions {
                values[s * states * actions + s * actions + a] = 1.0;
            }
        }
        RewardFeatures {
            k: states,
            states,
            actions,
            values,
        }
    }

    pub fn num_features(&self) -> usize {
        self.k
    }

    pub fn get(&self, feature: usize, s: usize, a: usize) -> f64 {
        self.values[feature * self.states * self.actions + s * self.actions + a]
    }

    fn row(&self, feature: usize) -> &[f64] {
        let w = self.states * self.actions;
        &self.values[feature * w..(feature + 1) * w]
    }

    /// `R(s, a) = Σ_k λ_k φ_k(s, a)`, state-major.
    pub fn reward(&self, weights: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.states * self.actions];
        for (f, &l) in weights.iter().enumerate() {
            if l == 0.0 {
                continue;
            }
            for (ri, v) in r.iter_mut().zip(self.row(f)) {
                *ri += l * v;
            }
        }
        r
    }

    /// `Σ_{s,a} mass(s,a) φ(s,a)` accumulated into `out`.
    fn accumulate(&self, mass: &[f64], out: &mut [f64]) {
        for (f, o) in out.iter_mut().enumerate() {
            *o += dot(self.row(f), mass);
        }
    }

    /// Feature sum along a trajectory.
    pub fn trajectory_counts(&self, trajectory: &Trajectory) -> Vec<f64> {
        (0..self.k)
            .map(|f| trajectory.steps().iter().map(|&(s, a)| self.get(f, s, a)).sum())
            .collect()
    }

    pub(crate) fn check(&self, mdp: &Mdp) -> Result<()> {
        if self.states != mdp.num_states() || self.actions != mdp.num_actions() {
            return Err(Error::dim("reward features do not match the MDP"));
        }
        Ok(())
    }
}

/// Optimizer and EM settings shared by the IRL learners.
#[derive(Debug, Clone, PartialEq)]
pub struct IrlConfig {
    pub horizon: usize,
    pub solver: SolverConfig,
    /// EM stops once `‖λ − λ'‖∞` is at or below this.
    pub em_tolerance: f64,
    pub em_max_iterations: usize,
    /// Ridge weight `ρ` added to every causal dual as `ρ/2 ‖λ‖²`. Keeps the
    /// fit bounded when finite-sample targets are unattainable.
    pub l2: f64,
}

impl Default for IrlConfig {
    fn default() -> Self {
        IrlConfig {
            horizon: 8,
            solver: SolverConfig {
                tolerance: 1e-4,
                max_iterations: 2_000,
                ..SolverConfig::default()
            },
            em_tolerance: 1e-4,
            em_max_iterations: 200,
            l2: 1e-3,
        }
    }
}

impl IrlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::invalid("horizon must be >= 1"));
        }
        if !(self.em_tolerance > 0.0) || self.em_max_iterations == 0 {
            return Err(Error::invalid("EM tolerance and iteration cap must be positive"));
        }
        if !(self.l2 >= 0.0) || !self.l2.is_finite() {
            return Err(Error::invalid("l2 weight must be finite and nonnegative"));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone)]
pub struct IrlResult {
    pub weights: Weights,
    pub policy: TimedPolicy,
    /// Whether the outer loop (or, for direct fits, the dual solve) met its tolerance.
    pub converged: bool,
    pub iterations: usize,
    /// Final dual gradient infinity-norm of the last fit.
    pub grad_norm: f64,
    /// Observation log-likelihood at the weights entering each EM iteration.
    pub log_likelihood: Vec<f64>,
    /// Sequences left out of the E-step because the data made them impossible.
    pub dropped_sequences: usize,
}

impl IrlResult {
    /// Reward table implied by the learned weights.
    pub fn reward(&self, features: &RewardFeatures) -> Vec<f64> {
        features.reward(self.weights.as_slice())
    }
}

struct SoftSolution {
    policy: TimedPolicy,
    /// `V_0(s)`.
    values: Vec<f64>,
}

fn soft_backup(mdp: &Mdp, reward: &[f64], horizon: usize) -> SoftSolution {
    let (n, m) = (mdp.num_states(), mdp.num_actions());
    let mut next_v = vec![0.0; n];
    let mut steps = Vec::with_capacity(horizon);
    let mut q = vec![0.0; m];
    for _ in 0..horizon {
        let mut v = vec![0.0; n];
        let mut probs = vec![0.0; n * m];
        for s in 0..n {
            for (a, qa) in q.iter_mut().enumerate() {
                *qa = reward[s * m + a] + mdp.successors(s, a).iter().map(|&(s2, p)| p * next_v[s2]).sum::<f64>();
            }
            let vs = log_sum_exp(&q);
            v[s] = vs;
            let row = &mut probs[s * m..(s + 1) * m];
            for (pa, qa) in row.iter_mut().zip(&q) {
                *pa = (qa - vs).exp();
            }
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= total);
        }
        steps.push(probs);
        next_v = v;
    }
    steps.reverse();
    let policy = TimedPolicy::new(
        steps
            .into_iter()
            .map(|probs| Policy::new(probs.chunks(m).map(<[f64]>::to_vec).collect()).expect("normalized rows"))
            .collect(),
    )
    .expect("uniform shapes");
    SoftSolution { policy, values: next_v }
}

/// Finite-horizon soft Bellman backups, undiscounted:
/// `Q_t = R + Σ T V_{t+1}`, `V_t = logsumexp_a Q_t`, `π_t = exp(Q_t − V_t)`.
pub fn soft_value_iteration(
    mdp: &Mdp,
    features: &RewardFeatures,
    weights: &Weights,
    horizon: usize,
) -> Result<TimedPolicy> {
    features.check(mdp)?;
    if weights.len() != features.num_features() {
        return Err(Error::dim("weights do not match the reward features"));
    }
    if horizon == 0 {
        return Err(Error::invalid("horizon must be >= 1"));
    }
    Ok(soft_backup(mdp, &features.reward(weights.as_slice()), horizon).policy)
}

/// `Σ_t Σ_{s,a} D_t(s,a) φ(s,a)` with `D_t` propagated from the MDP's `S0`.
pub fn expected_feature_counts(mdp: &Mdp, features: &RewardFeatures, policy: &TimedPolicy) -> Result<Vec<f64>> {
    features.check(mdp)?;
    if policy.at(0).num_states() != mdp.num_states() || policy.at(0).num_actions() != mdp.num_actions() {
        return Err(Error::dim("policy does not match the MDP"));
    }
    let mut out = vec![0.0; features.num_features()];
    for d in occupancy(mdp, policy) {
        features.accumulate(&d, &mut out);
    }
    Ok(out)
}

/// Result of one causal-entropy dual solve.
pub(crate) struct CausalFit {
    pub weights: Vec<f64>,
    pub grad_norm: f64,
    pub converged: bool,
}

/// Minimizes `Σ_s S0(s) V_0(s; λ) − λ·targets + ρ/2 ‖λ‖²`, whose gradient
/// is `E_λ[feature counts] − targets + ρλ`. `mdp` supplies `S0`.
pub(crate) fn fit_causal(
    mdp: &Mdp,
    features: &RewardFeatures,
    targets: &[f64],
    config: &IrlConfig,
    warm_start: Option<&[f64]>,
) -> CausalFit {
    let (horizon, rho) = (config.horizon, config.l2);
    let start = warm_start.map_or_else(|| vec![0.0; features.num_features()], <[f64]>::to_vec);
    let res = minimize(
        |lambda| {
            let sol = soft_backup(mdp, &features.reward(lambda), horizon);
            let value = dot(mdp.initial(), &sol.values) - dot(lambda, targets) + 0.5 * rho * dot(lambda, lambda);
            let mut counts = vec![0.0; features.num_features()];
            for d in occupancy(mdp, &sol.policy) {
                features.accumulate(&d, &mut counts);
            }
            let grad = counts
                .iter()
                .zip(targets)
                .zip(lambda)
                .map(|((c, t), l)| c - t + rho * l)
                .collect();
            (value, grad)
        },
        start,
        &config.solver,
    );
    CausalFit {
        weights: res.point,
        grad_norm: res.grad_norm,
        converged: res.converged,
    }
}

/// Histogram of first states, falling back to the MDP's own `S0` when empty.
pub(crate) fn start_distribution(mdp: &Mdp, first_states: impl Iterator<Item = usize>) -> Vec<f64> {
    let mut counts = vec![0.0; mdp.num_states()];
    let mut total = 0.0;
    for s in first_states {
        counts[s] += 1.0;
        total += 1.0;
    }
    if total == 0.0 {
        return mdp.initial().to_vec();
    }
    counts.iter().map(|c| c / total).collect()
}

fn finish(
    mdp: &Mdp,
    features: &RewardFeatures,
    horizon: usize,
    fit: CausalFit,
    converged: bool,
    iterations: usize,
    log_likelihood: Vec<f64>,
    dropped_sequences: usize,
) -> Result<IrlResult> {
    let weights = Weights::new(fit.weights)?;
    let policy = soft_value_iteration(mdp, features, &weights, horizon)?;
    Ok(IrlResult {
        weights,
        policy,
        converged,
        iterations,
        grad_norm: fit.grad_norm,
        log_likelihood,
        dropped_sequences,
    })
}

/// Fits the causal model to given feature-count targets from a given start distribution.
pub fn maxcausalent_fit(
    mdp: &Mdp,
    features: &RewardFeatures,
    targets: &[f64],
    start: Vec<f64>,
    config: &IrlConfig,
) -> Result<IrlResult> {
    config.validate()?;
    features.check(mdp)?;
    if targets.len() != features.num_features() {
        return Err(Error::dim("targets do not match the reward features"));
    }
    let anchored = mdp.with_initial(start)?;
    let fit = fit_causal(&anchored, features, targets, config, None);
    let converged = fit.converged;
    finish(mdp, features, config.horizon, fit, converged, 1, Vec::new(), 0)
}

/// Maximum causal entropy IRL from fully observed trajectories.
///
/// Targets are the mean per-trajectory feature sums; expected counts are
/// propagated from the empirical distribution of first states.
pub fn maxcausalent_irl(
    mdp: &Mdp,
    features: &RewardFeatures,
    trajectories: &[Trajectory],
    config: &IrlConfig,
) -> Result<IrlResult> {
    if trajectories.is_empty() {
        return Err(Error::invalid("need at least one trajectory"));
    }
    for (i, t) in trajectories.iter().enumerate() {
        t.validate(mdp).map_err(|e| e.context(format!("trajectory {i}")))?;
        if t.len() != config.horizon {
            return Err(Error::invalid(format!(
                "trajectory {i} has length {}, horizon is {}",
                t.len(),
                config.horizon
            )));
        }
    }
    let mut targets = vec![0.0; features.num_features()];
    for t in trajectories {
        for (acc, c) in targets.iter_mut().zip(features.trajectory_counts(t)) {
            *acc += c / trajectories.len() as f64;
        }
    }
    let start = start_distribution(mdp, trajectories.iter().map(|t| t.steps()[0].0));
    maxcausalent_fit(mdp, features, &targets, start, config)
}

/// Causal fit to partially observed trajectories, ignoring unknown steps.
///
/// Targets are the mean feature vector over known steps scaled to the
/// horizon; first states come from sequences whose first step is known.
pub fn maxcausalent_partial(
    mdp: &Mdp,
    features: &RewardFeatures,
    trajectories: &[PartialTrajectory],
    config: &IrlConfig,
) -> Result<IrlResult> {
    features.check(mdp)?;
    let mut sum = vec![0.0; features.num_features()];
    let mut known = 0usize;
    for (i, t) in trajectories.iter().enumerate() {
        if t.len() != config.horizon {
            return Err(Error::invalid(format!("trajectory {i} does not match the horizon")));
        }
        for &(s, a) in t.steps().iter().flatten() {
            if s >= mdp.num_states() || a >= mdp.num_actions() {
                return Err(Error::invalid(format!("trajectory {i} leaves the MDP")));
            }
            for (f, acc) in sum.iter_mut().enumerate() {
                *acc += features.get(f, s, a);
            }
            known += 1;
        }
    }
    if known == 0 {
        return Err(Error::invalid("no observed steps to learn from"));
    }
    let scale = config.horizon as f64 / known as f64;
    let targets: Vec<f64> = sum.iter().map(|x| x * scale).collect();
    let start = start_distribution(mdp, trajectories.iter().filter_map(|t| t.steps()[0].map(|(s, _)| s)));
    maxcausalent_fit(mdp, features, &targets, start, config)
}

/// Outcome of the E-step over a batch of sequences.
pub(crate) struct EStep {
    pub targets: Vec<f64>,
    pub start: Vec<f64>,
    pub log_likelihood: f64,
    pub dropped: usize,
}

/// Averages posterior feature counts and first-state marginals over sequences.
///
/// With `skip_impossible`, zero-likelihood sequences are left out and
/// counted; otherwise the first one aborts with its index.
pub(crate) fn e_step_sequences(
    mdp: &Mdp,
    features: &RewardFeatures,
    policy: &TimedPolicy,
    evidence: &[StepEvidence],
    skip_impossible: bool,
) -> Result<EStep> {
    use rayon::prelude::*;
    let results: Vec<Result<PosteriorMarginals>> = evidence
        .par_iter()
        .map(|ev| forward_backward_evidence(ev, mdp, policy))
        .collect();
    let (n, m) = (mdp.num_states(), mdp.num_actions());
    let mut targets = vec![0.0; features.num_features()];
    let mut start = vec![0.0; n];
    let mut log_likelihood = 0.0;
    let mut used = 0usize;
    let mut dropped = 0usize;
    for (i, r) in results.into_iter().enumerate() {
        let post = match r {
            Ok(p) => p,
            Err(Error::ImpossibleSequence) if skip_impossible => {
                dropped += 1;
                continue;
            }
            Err(e) => return Err(e.context(format!("sequence {i}"))),
        };
        for t in 0..post.horizon() {
            features.accumulate(post.at(t), &mut targets);
        }
        let first = post.at(0);
        for s in 0..n {
            start[s] += first[s * m..(s + 1) * m].iter().sum::<f64>();
        }
        log_likelihood += post.log_likelihood();
        used += 1;
    }
    if used == 0 {
        return Err(Error::ImpossibleSequence.context("every sequence is impossible under the model"));
    }
    targets.iter_mut().for_each(|t| *t /= used as f64);
    start.iter_mut().for_each(|p| *p /= used as f64);
    let total: f64 = start.iter().sum();
    start.iter_mut().for_each(|p| *p /= total);
    Ok(EStep {
        targets,
        start,
        log_likelihood,
        dropped,
    })
}

/// EM over per-step evidence: E-step by smoothing, M-step by causal fit.
pub(crate) fn evidence_em(
    mdp: &Mdp,
    features: &RewardFeatures,
    evidence: &[StepEvidence],
    config: &IrlConfig,
    init: Option<&Weights>,
    skip_impossible: bool,
) -> Result<IrlResult> {
    config.validate()?;
    features.check(mdp)?;
    if evidence.is_empty() {
        return Err(Error::invalid("need at least one observation sequence"));
    }
    if let Some(bad) = evidence.iter().position(|e| e.horizon() != config.horizon) {
        return Err(Error::invalid(format!("sequence {bad} does not match the horizon")));
    }
    let mut current = init.map_or_else(|| vec![0.0; features.num_features()], |w| w.as_slice().to_vec());
    let mut log_likelihood = Vec::new();
    let mut dropped = 0;
    let mut converged = false;
    let mut iterations = 0;
    let mut last_fit = None;
    for iteration in 0..config.em_max_iterations {
        let policy = soft_backup(mdp, &features.reward(&current), config.horizon).policy;
        let e = e_step_sequences(mdp, features, &policy, evidence, skip_impossible)
            .map_err(|err| err.context(format!("E-step of EM iteration {iteration}")))?;
        log_likelihood.push(e.log_likelihood);
        dropped = e.dropped;
        let anchored = mdp.with_initial(e.start)?;
        let fit = fit_causal(&anchored, features, &e.targets, config, Some(&current));
        let delta = max_abs_diff(&fit.weights, &current);
        current.clone_from(&fit.weights);
        iterations = iteration + 1;
        last_fit = Some(fit);
        if delta <= config.em_tolerance {
            converged = true;
            break;
        }
    }
    let fit = last_fit.expect("at least one EM iteration");
    finish(
        mdp,
        features,
        config.horizon,
        fit,
        converged,
        iterations,
        log_likelihood,
        dropped,
    )
}

/// Per-step observation sequence; `None` marks a MISSING step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationSequence {
    symbols: Vec<Option<usize>>,
}

impl ObservationSequence {
    pub fn new(symbols: Vec<Option<usize>>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::invalid("observation sequence must be nonempty"));
        }
        Ok(ObservationSequence { symbols })
    }

    pub fn observed(symbols: Vec<usize>) -> Result<Self> {
        ObservationSequence::new(symbols.into_iter().map(Some).collect())
    }

    pub fn symbols(&self) -> &[Option<usize>] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Checks every symbol against an alphabet of size `symbols`.
    pub fn validate(&self, symbols: usize) -> Result<()> {
        match self.symbols.iter().flatten().find(|&&w| w >= symbols) {
            Some(w) => Err(Error::invalid(format!("symbol {w} outside alphabet of {symbols}"))),
            None => Ok(()),
        }
    }
}

/// Uncertain maximum causal entropy IRL from observation sequences.
pub fn umaxcausalent_irl(
    mdp: &Mdp,
    features: &RewardFeatures,
    channel: &StepChannel,
    sequences: &[ObservationSequence],
    config: &IrlConfig,
    init: Option<&Weights>,
) -> Result<IrlResult> {
    if channel.num_elements() != mdp.num_states() {
        return Err(Error::dim("channel rows must match the MDP states"));
    }
    let evidence = sequences
        .iter()
        .enumerate()
        .map(|(i, seq)| StepEvidence::from_channel(seq, channel).map_err(|e| e.context(format!("sequence {i}"))))
        .collect::<Result<Vec<_>>>()?;
    evidence_em(mdp, features, &evidence, config, init, false)
}

/// Hidden-data EM over decoded states with occluded (MISSING) steps.
///
/// Observed steps are clamped to their decoded state; MISSING steps are
/// completed by the model. Decoded sequences that the dynamics cannot
/// produce are left out of the E-step and counted in `dropped_sequences`.
pub fn chiddendataem_irl(
    mdp: &Mdp,
    features: &RewardFeatures,
    masked: &[PartialTrajectory],
    config: &IrlConfig,
    init: Option<&Weights>,
) -> Result<IrlResult> {
    let evidence = masked
        .iter()
        .map(|p| StepEvidence::from_states(&p.states(), mdp.num_states()))
        .collect::<Result<Vec<_>>>()?;
    evidence_em(mdp, features, &evidence, config, init, true)
}
