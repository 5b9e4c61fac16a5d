//! Maximum entropy from noisy observations via expectation-maximization.
//!
//! Observations `ω` reach us through a fixed channel `Pr(ω|x)`. The
//! constraint targets `Σ_ω Pr̃(ω) Σ_x Pr(x|ω) φ(x)` depend on the model
//! through the posterior, so they are recomputed from the previous weights
//! (E-step) and handed to the ordinary MaxEnt solver (M-step) until the
//! weights stop moving.

use crate::math::{argmax, inf_norm, max_abs_diff};
use crate::maxent::{
    expected_features, log_partition, model_distribution, solve_maxent, Distribution, FeatureTable, Weights,
    NORMALIZATION_TOLERANCE,
};
use crate::optim::SolverConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSpace {
    size: usize,
    labels: Option<Vec<String>>,
}

impl ObservationSpace {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::invalid("observation space must be nonempty"));
        }
        Ok(ObservationSpace { size, labels: None })
    }

    pub fn with_labels(labels: Vec<String>) -> Result<Self> {
        let mut s = ObservationSpace::new(labels.len())?;
        s.labels = Some(labels);
        Ok(s)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.as_ref().and_then(|l| l.get(index)).map(String::as_str)
    }
}

/// Row-stochastic channel `Pr(ω|x)`, one row per element.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationModel {
    elements: usize,
    symbols: usize,
    channel: Vec<f64>,
}

impl ObservationModel {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let elements = rows.len();
        if elements == 0 {
            return Err(Error::invalid("channel needs at least one element row"));
        }
        let symbols = rows[0].len();
        if symbols == 0 || rows.iter().any(|r| r.len() != symbols) {
            return Err(Error::dim("channel rows must share a nonzero length"));
        }
        for (x, row) in rows.iter().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::invalid(format!("channel row {x} has entries outside [0, 1]")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return Err(Error::invalid(format!("channel row {x} sums to {total}")));
            }
        }
        Ok(ObservationModel {
            elements,
            symbols,
            channel: rows.into_iter().flatten().collect(),
        })
    }

    /// `Pr(ω = x' | x) = δ(x, x')`.
    pub fn identity(n: usize) -> Self {
        let mut channel = vec![0.0; n * n];
        for x in 0..n {
            channel[x * n + x] = 1.0;
        }
        ObservationModel {
            elements: n,
            symbols: n,
            channel,
        }
    }

    /// A channel whose rows are all the same distribution: observations carry no information.
    pub fn uninformative(elements: usize, row: &Distribution) -> Self {
        ObservationModel {
            elements,
            symbols: row.len(),
            channel: (0..elements).flat_map(|_| row.probs().iter().copied()).collect(),
        }
    }

    pub fn num_elements(&self) -> usize {
        self.elements
    }

    pub fn num_symbols(&self) -> usize {
        self.symbols
    }

    pub fn prob(&self, element: usize, symbol: usize) -> f64 {
        self.channel[element * self.symbols + symbol]
    }

    pub fn row(&self, element: usize) -> &[f64] {
        &self.channel[element * self.symbols..(element + 1) * self.symbols]
    }
}

/// Empirical distribution `Pr̃(ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalObservations(Distribution);

impl EmpiricalObservations {
    pub fn new(probs: Distribution) -> Self {
        EmpiricalObservations(probs)
    }

    /// Normalized histogram of observed symbol indices.
    pub fn from_samples(symbols: usize, samples: &[usize]) -> Result<Self> {
        let mut counts = vec![0.0; symbols];
        for &s in samples {
            if s >= symbols {
                return Err(Error::invalid(format!("symbol {s} out of range {symbols}")));
            }
            counts[s] += 1.0;
        }
        Ok(EmpiricalObservations(Distribution::from_weights(&counts)?))
    }

    pub fn distribution(&self) -> &Distribution {
        &self.0
    }

    pub fn probs(&self) -> &[f64] {
        self.0.probs()
    }
}

/// Bayes posterior `Pr(x|ω)` for every symbol.
#[derive(Debug, Clone)]
pub struct PosteriorTable {
    elements: usize,
    symbols: usize,
    /// Element-major, `probs[x * symbols + ω]`.
    probs: Vec<f64>,
    evidence: Vec<f64>,
}

impl PosteriorTable {
    /// `Pr(x|ω)`; zero for unreachable symbols.
    pub fn prob(&self, element: usize, symbol: usize) -> f64 {
        self.probs[element * self.symbols + symbol]
    }

    /// `Pr(ω) = Σ_x Pr(ω|x) Pr(x)`.
    pub fn evidence(&self, symbol: usize) -> f64 {
        self.evidence[symbol]
    }

    pub fn is_reachable(&self, symbol: usize) -> bool {
        self.evidence[symbol] > 0.0
    }

    pub fn column(&self, symbol: usize) -> Vec<f64> {
        (0..self.elements).map(|x| self.prob(x, symbol)).collect()
    }

    pub fn num_symbols(&self) -> usize {
        self.symbols
    }
}

/// Stopping rule for [`run_umaxent`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    /// Converged once `‖λ − λ'‖∞` is at or below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub solver: SolverConfig,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            tolerance: 1e-5,
            max_iterations: 500,
            solver: SolverConfig::default(),
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::invalid("EM tolerance and max_iterations must be positive"));
        }
        self.solver.validate()
    }
}

/// Per-iteration record of the likelihood decomposition `L = U* + Q + H`.
///
/// Entry `i` is evaluated at the weights entering iteration `i`; `q` pairs
/// them with the weights that iteration produced.
#[derive(Debug, Clone, Default)]
pub struct EmDiagnostics {
    pub log_likelihood: Vec<f64>,
    pub q: Vec<f64>,
    pub conditional_entropy: Vec<f64>,
    pub observation_term: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct EmResult {
    pub weights: Weights,
    pub diagnostics: EmDiagnostics,
}

fn check_channel(features: &FeatureTable, obs: &ObservationModel) -> Result<()> {
    if obs.num_elements() != features.num_elements() {
        return Err(Error::dim(format!(
            "channel over {} elements, features over {}",
            obs.num_elements(),
            features.num_elements()
        )));
    }
    Ok(())
}

fn check_data(obs: &ObservationModel, data: &EmpiricalObservations) -> Result<()> {
    if data.probs().len() != obs.num_symbols() {
        return Err(Error::dim(format!(
            "data over {} symbols, channel emits {}",
            data.probs().len(),
            obs.num_symbols()
        )));
    }
    Ok(())
}

/// Bayes inversion of the channel under the prior `model`.
pub fn posterior(model: &Distribution, obs: &ObservationModel) -> Result<PosteriorTable> {
    if model.len() != obs.num_elements() {
        return Err(Error::dim(format!(
            "prior over {} elements, channel over {}",
            model.len(),
            obs.num_elements()
        )));
    }
    let (n, m) = (obs.num_elements(), obs.num_symbols());
    let mut joint = vec![0.0; n * m];
    let mut evidence = vec![0.0; m];
    for x in 0..n {
        for w in 0..m {
            let j = obs.prob(x, w) * model[x];
            joint[x * m + w] = j;
            evidence[w] += j;
        }
    }
    for x in 0..n {
        for w in 0..m {
            joint[x * m + w] = if evidence[w] > 0.0 {
                joint[x * m + w] / evidence[w]
            } else {
                0.0
            };
        }
    }
    Ok(PosteriorTable {
        elements: n,
        symbols: m,
        probs: joint,
        evidence,
    })
}

fn check_observed_reachable(post: &PosteriorTable, data: &EmpiricalObservations) -> Result<()> {
    for (w, &p) in data.probs().iter().enumerate() {
        if p > 0.0 && !post.is_reachable(w) {
            return Err(Error::ImpossibleObservation { symbol: w });
        }
    }
    Ok(())
}

/// Completed-data feature expectations `Σ_ω Pr̃(ω) Σ_x Pr_λ'(x|ω) φ(x)`.
pub fn e_step(
    weights_prev: &Weights,
    features: &FeatureTable,
    obs: &ObservationModel,
    data: &EmpiricalObservations,
) -> Result<Vec<f64>> {
    check_channel(features, obs)?;
    check_data(obs, data)?;
    let model = model_distribution(weights_prev, features)?;
    let post = posterior(&model, obs)?;
    check_observed_reachable(&post, data)?;
    Ok(targets_from_posterior(&post, features, data))
}

fn targets_from_posterior(post: &PosteriorTable, features: &FeatureTable, data: &EmpiricalObservations) -> Vec<f64> {
    let n = features.num_elements();
    let completed: Vec<f64> = (0..n)
        .map(|x| {
            data.probs()
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(w, &p)| p * post.prob(x, w))
                .sum()
        })
        .collect();
    (0..features.num_features())
        .map(|f| features.row(f).iter().zip(&completed).map(|(v, c)| v * c).sum())
        .collect()
}

/// `L(λ) = Σ_ω Pr̃(ω) log Σ_x Pr(ω|x) Pr_λ(x)`.
///
/// Returns `-inf` when some observed symbol is impossible under the model.
pub fn observation_log_likelihood(
    weights: &Weights,
    features: &FeatureTable,
    obs: &ObservationModel,
    data: &EmpiricalObservations,
) -> Result<f64> {
    check_channel(features, obs)?;
    check_data(obs, data)?;
    let model = model_distribution(weights, features)?;
    let mut total = 0.0;
    for (w, &p) in data.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let evidence: f64 = (0..obs.num_elements()).map(|x| obs.prob(x, w) * model[x]).sum();
        if evidence <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        total += p * evidence.ln();
    }
    Ok(total)
}

struct Decomposition {
    conditional_entropy: f64,
    observation_term: f64,
}

fn decompose(post: &PosteriorTable, obs: &ObservationModel, data: &EmpiricalObservations) -> Decomposition {
    let mut h = 0.0;
    let mut u = 0.0;
    for (w, &p) in data.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for x in 0..obs.num_elements() {
            let q = post.prob(x, w);
            if q > 0.0 {
                h -= p * q * q.ln();
                u += p * q * obs.prob(x, w).ln();
            }
        }
    }
    Decomposition {
        conditional_entropy: h,
        observation_term: u,
    }
}

/// Runs the uncertain-MaxEnt EM loop from `init` (zeros by default).
pub fn run_umaxent(
    features: &FeatureTable,
    obs: &ObservationModel,
    data: &EmpiricalObservations,
    config: &EmConfig,
    init: Option<&Weights>,
) -> Result<EmResult> {
    config.validate()?;
    check_channel(features, obs)?;
    check_data(obs, data)?;
    let mut current = match init {
        Some(w) => w.clone(),
        None => Weights::zeros(features.num_features()),
    };
    let mut diag = EmDiagnostics::default();

    for iteration in 0..config.max_iterations {
        let model = model_distribution(&current, features)?;
        let post = posterior(&model, obs)?;
        check_observed_reachable(&post, data).map_err(|e| e.context(format!("EM iteration {iteration}")))?;
        let targets = targets_from_posterior(&post, features, data);

        let parts = decompose(&post, obs, data);
        diag.log_likelihood.push(
            data.probs()
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(w, &p)| p * post.evidence(w).ln())
                .sum(),
        );
        diag.conditional_entropy.push(parts.conditional_entropy);
        diag.observation_term.push(parts.observation_term);

        let solved = solve_maxent(features, &targets, &config.solver, Some(&current))
            .map_err(|e| e.context(format!("M-step of EM iteration {iteration}")))?;
        let next = solved.weights;
        diag.q.push(q_value(&next, features, &targets)?);
        diag.iterations = iteration + 1;

        let delta = max_abs_diff(next.as_slice(), current.as_slice());
        current = next;
        if delta <= config.tolerance {
            diag.converged = true;
            break;
        }
    }

    Ok(EmResult {
        weights: current,
        diagnostics: diag,
    })
}

/// `Q(λ, λ') = −log Z(λ) + λ·φ̂(λ')`.
pub fn q_value(weights: &Weights, features: &FeatureTable, targets: &[f64]) -> Result<f64> {
    Ok(-log_partition(weights, features)? + crate::math::dot(weights.as_slice(), targets))
}

/// Feature targets of the maximum-likelihood decoding baseline.
///
/// Every observation's mass goes to its single most probable element under
/// `decode_prior` (ties to the lowest index), and the targets are the
/// feature expectations of that decoded histogram.
pub fn ml_maxent_targets(
    obs: &ObservationModel,
    data: &EmpiricalObservations,
    features: &FeatureTable,
    decode_prior: &Distribution,
) -> Result<Vec<f64>> {
    check_channel(features, obs)?;
    check_data(obs, data)?;
    let decoded = ml_decoded_histogram(obs, data, decode_prior)?;
    expected_features(&decoded, features)
}

/// `Pr̃(x) = Σ_ω Pr̃(ω) δ(argmax_x' Pr(x'|ω), x)`.
pub fn ml_decoded_histogram(
    obs: &ObservationModel,
    data: &EmpiricalObservations,
    decode_prior: &Distribution,
) -> Result<Distribution> {
    check_data(obs, data)?;
    let post = posterior(decode_prior, obs)?;
    check_observed_reachable(&post, data)?;
    let mut hist = vec![0.0; obs.num_elements()];
    for (w, &p) in data.probs().iter().enumerate() {
        if p > 0.0 {
            hist[argmax(&post.column(w))] += p;
        }
    }
    Distribution::from_weights(&hist)
}

/// Deterministic channel that reports which group each element belongs to.
///
/// `partition[x]` is the group of element `x`; groups are `0..groups`.
pub fn latent_reduction_channel(partition: &[usize], groups: usize) -> Result<ObservationModel> {
    if partition.is_empty() || groups == 0 {
        return Err(Error::invalid("partition must be nonempty"));
    }
    if let Some(&g) = partition.iter().find(|&&g| g >= groups) {
        return Err(Error::invalid(format!("group {g} out of range {groups}")));
    }
    let mut channel = vec![0.0; partition.len() * groups];
    for (x, &g) in partition.iter().enumerate() {
        channel[x * groups + g] = 1.0;
    }
    Ok(ObservationModel {
        elements: partition.len(),
        symbols: groups,
        channel,
    })
}

/// Exact observation distribution `Pr(ω) = Σ_x Pr(ω|x) Pr(x)`.
pub fn observation_distribution(model: &Distribution, obs: &ObservationModel) -> Result<Distribution> {
    let post = posterior(model, obs)?;
    Distribution::from_weights(&post.evidence)
}

/// Gap between the model's feature expectations and the E-step targets it induces.
pub fn fixed_point_residual(
    weights: &Weights,
    features: &FeatureTable,
    obs: &ObservationModel,
    data: &EmpiricalObservations,
) -> Result<f64> {
    let targets = e_step(weights, features, obs, data)?;
    let model = model_distribution(weights, features)?;
    let expected = expected_features(&model, features)?;
    Ok(inf_norm(
        &expected.iter().zip(&targets).map(|(a, b)| a - b).collect::<Vec<_>>(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::total_variation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_table(rng: &mut ChaCha8Rng, k: usize, n: usize) -> FeatureTable {
        FeatureTable::from_rows((0..k).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect()).unwrap()
    }

    fn random_dist(rng: &mut ChaCha8Rng, n: usize) -> Distribution {
        let masses: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.01).collect();
        Distribution::from_weights(&masses).unwrap()
    }

    fn random_channel(rng: &mut ChaCha8Rng, n: usize, m: usize) -> ObservationModel {
        ObservationModel::from_rows((0..n).map(|_| random_dist(rng, m).into_vec()).collect()).unwrap()
    }

    #[test]
    fn posterior_bayes_arithmetic() {
        let obs = ObservationModel::from_rows(vec![vec![0.9, 0.1], vec![0.3, 0.7]]).unwrap();
        let post = posterior(&Distribution::uniform(2), &obs).unwrap();
        assert!((post.prob(0, 0) - 0.75).abs() < 1e-15);
        assert!((post.prob(1, 0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn posterior_of_identity_channel_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let prior = random_dist(&mut rng, 4);
        let post = posterior(&prior, &ObservationModel::identity(4)).unwrap();
        for x in 0..4 {
            for w in 0..4 {
                assert_eq!(post.prob(x, w), if x == w { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn posterior_matches_normalized_joint() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let prior = random_dist(&mut rng, 5);
            let obs = random_channel(&mut rng, 5, 4);
            let post = posterior(&prior, &obs).unwrap();
            for w in 0..4 {
                let joint: Vec<f64> = (0..5).map(|x| prior[x] * obs.prob(x, w)).collect();
                let total: f64 = joint.iter().sum();
                let col = post.column(w);
                assert!((col.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                for x in 0..5 {
                    assert!((col[x] - joint[x] / total).abs() < 1e-12);
                    // Bayes reconstruction.
                    assert!((obs.prob(x, w) * prior[x] - col[x] * post.evidence(w)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn impossible_observation_is_named() {
        let obs = ObservationModel::from_rows(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let table = FeatureTable::from_rows(vec![vec![0.0, 1.0]]).unwrap();
        let data = EmpiricalObservations::new(Distribution::new(vec![0.5, 0.5]).unwrap());
        let err = e_step(&Weights::zeros(1), &table, &obs, &data).unwrap_err();
        assert!(matches!(err, Error::ImpossibleObservation { symbol: 1 }));
        let ll = observation_log_likelihood(&Weights::zeros(1), &table, &obs, &data).unwrap();
        assert_eq!(ll, f64::NEG_INFINITY);
        let post = posterior(&Distribution::uniform(2), &obs).unwrap();
        assert!(!post.is_reachable(1));
    }

    #[test]
    fn e_step_identity_channel_gives_empirical_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let table = random_table(&mut rng, 3, 6);
        let emp = random_dist(&mut rng, 6);
        let data = EmpiricalObservations::new(emp.clone());
        let lambda = Weights::new(vec![0.4, -1.0, 2.0]).unwrap();
        let got = e_step(&lambda, &table, &ObservationModel::identity(6), &data).unwrap();
        let want = expected_features(&emp, &table).unwrap();
        assert!(max_abs_diff(&got, &want) < 1e-12);
    }

    #[test]
    fn e_step_uninformative_channel_returns_model_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let table = random_table(&mut rng, 3, 5);
        let row = random_dist(&mut rng, 4);
        let obs = ObservationModel::uninformative(5, &row);
        let data = EmpiricalObservations::new(random_dist(&mut rng, 4));
        let lambda = Weights::new(vec![1.0, -0.5, 0.3]).unwrap();
        let got = e_step(&lambda, &table, &obs, &data).unwrap();
        let want = expected_features(&model_distribution(&lambda, &table).unwrap(), &table).unwrap();
        assert!(max_abs_diff(&got, &want) < 1e-12);

        let res = run_umaxent(&table, &obs, &data, &EmConfig::default(), Some(&lambda)).unwrap();
        assert_eq!(res.diagnostics.iterations, 1);
        assert!(max_abs_diff(res.weights.as_slice(), lambda.as_slice()) < 1e-9);
    }

    #[test]
    fn e_step_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let table = random_table(&mut rng, 3, 5);
            let obs = random_channel(&mut rng, 5, 6);
            let data = EmpiricalObservations::new(random_dist(&mut rng, 6));
            let lambda = Weights::new((0..3).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
            let got = e_step(&lambda, &table, &obs, &data).unwrap();
            let model = model_distribution(&lambda, &table).unwrap();
            let mut want = vec![0.0; 3];
            for (k, acc) in want.iter_mut().enumerate() {
                for w in 0..6 {
                    let ev: f64 = (0..5).map(|x| obs.prob(x, w) * model[x]).sum();
                    for x in 0..5 {
                        *acc += data.probs()[w] * obs.prob(x, w) * model[x] / ev * table.get(k, x);
                    }
                }
            }
            assert!(max_abs_diff(&got, &want) < 1e-12);
            for (k, t) in got.iter().enumerate() {
                let row = table.row(k);
                let lo = row.iter().cloned().fold(f64::MAX, f64::min);
                let hi = row.iter().cloned().fold(f64::MIN, f64::max);
                assert!(*t >= lo - 1e-12 && *t <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn log_likelihood_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let table = random_table(&mut rng, 2, 4);
        let lambda = Weights::new(vec![1.2, -0.7]).unwrap();
        let model = model_distribution(&lambda, &table).unwrap();
        let data = EmpiricalObservations::new(model.clone());
        let ll = observation_log_likelihood(&lambda, &table, &ObservationModel::identity(4), &data).unwrap();
        assert!((ll + crate::maxent::entropy(&model)).abs() < 1e-12);

        let obs = random_channel(&mut rng, 4, 3);
        let data = EmpiricalObservations::new(random_dist(&mut rng, 3));
        let ll = observation_log_likelihood(&lambda, &table, &obs, &data).unwrap();
        let naive: f64 = (0..3)
            .map(|w| data.probs()[w] * (0..4).map(|x| obs.prob(x, w) * model[x]).sum::<f64>().ln())
            .sum();
        assert!((ll - naive).abs() < 1e-12);
    }

    #[test]
    fn likelihood_decomposes_into_u_q_h() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let table = random_table(&mut rng, 3, 6);
        let obs = random_channel(&mut rng, 6, 6);
        let data = EmpiricalObservations::new(random_dist(&mut rng, 6));
        let cfg = EmConfig {
            max_iterations: 1,
            ..EmConfig::default()
        };
        let lambda = Weights::new(vec![0.5, 0.1, -0.3]).unwrap();
        let res = run_umaxent(&table, &obs, &data, &cfg, Some(&lambda)).unwrap();
        let d = &res.diagnostics;
        // At λ = λ' the bound is tight.
        let targets = e_step(&lambda, &table, &obs, &data).unwrap();
        let q_same = q_value(&lambda, &table, &targets).unwrap();
        let l = d.log_likelihood[0];
        assert!((l - (d.observation_term[0] + q_same + d.conditional_entropy[0])).abs() < 1e-10);
        // The M-step can only raise Q.
        assert!(d.q[0] >= q_same - 1e-12);
    }

    #[test]
    fn em_is_monotone_and_reaches_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let table = random_table(&mut rng, 3, 8);
            let obs = random_channel(&mut rng, 8, 8);
            let data = EmpiricalObservations::new(random_dist(&mut rng, 8));
            let res = run_umaxent(&table, &obs, &data, &EmConfig::default(), None).unwrap();
            for pair in res.diagnostics.log_likelihood.windows(2) {
                assert!(pair[1] >= pair[0] - 1e-8);
            }
            if res.diagnostics.converged {
                assert!(fixed_point_residual(&res.weights, &table, &obs, &data).unwrap() <= 1e-5);
            }
        }
    }

    #[test]
    fn identity_channel_reduces_to_plain_maxent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let table = random_table(&mut rng, 3, 7);
        let emp = random_dist(&mut rng, 7);
        let data = EmpiricalObservations::new(emp.clone());
        let em = run_umaxent(
            &table,
            &ObservationModel::identity(7),
            &data,
            &EmConfig::default(),
            None,
        )
        .unwrap();
        let targets = expected_features(&emp, &table).unwrap();
        let direct = solve_maxent(&table, &targets, &SolverConfig::default(), None).unwrap();
        let p = model_distribution(&em.weights, &table).unwrap();
        let q = model_distribution(&direct.weights, &table).unwrap();
        assert!(total_variation(p.probs(), q.probs()) < 1e-6);
    }

    #[test]
    fn ml_targets_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let table = random_table(&mut rng, 2, 4);
        let data = EmpiricalObservations::new(random_dist(&mut rng, 4));
        let ml = ml_maxent_targets(&ObservationModel::identity(4), &data, &table, &Distribution::uniform(4)).unwrap();
        let em = e_step(&Weights::zeros(2), &table, &ObservationModel::identity(4), &data).unwrap();
        assert!(max_abs_diff(&ml, &em) < 1e-12);

        // ω0 is most likely x0, yet only with posterior 0.6.
        let obs = ObservationModel::from_rows(vec![vec![0.6, 0.4], vec![0.4, 0.6]]).unwrap();
        let data = EmpiricalObservations::new(Distribution::new(vec![1.0, 0.0]).unwrap());
        let hist = ml_decoded_histogram(&obs, &data, &Distribution::uniform(2)).unwrap();
        assert_eq!(hist.probs(), &[1.0, 0.0]);
        let post = posterior(&Distribution::uniform(2), &obs).unwrap();
        assert!((post.prob(0, 0) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn ml_ties_go_to_lowest_index() {
        let obs = ObservationModel::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let data = EmpiricalObservations::new(Distribution::new(vec![0.3, 0.7]).unwrap());
        let hist = ml_decoded_histogram(&obs, &data, &Distribution::uniform(2)).unwrap();
        assert_eq!(hist.probs(), &[1.0, 0.0]);
    }

    #[test]
    fn latent_channel_examples() {
        let trivial = latent_reduction_channel(&[0, 1, 2], 3).unwrap();
        assert_eq!(trivial, ObservationModel::identity(3));

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let table = random_table(&mut rng, 2, 4);
        let lambda = Weights::new(vec![0.3, 1.1]).unwrap();
        let one = latent_reduction_channel(&[0, 0, 0, 0], 1).unwrap();
        let data = EmpiricalObservations::new(Distribution::uniform(1));
        let got = e_step(&lambda, &table, &one, &data).unwrap();
        let want = expected_features(&model_distribution(&lambda, &table).unwrap(), &table).unwrap();
        assert!(max_abs_diff(&got, &want) < 1e-12);
        assert!(latent_reduction_channel(&[0, 3], 2).is_err());
    }

    #[test]
    fn infinite_data_satisfies_constraints_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let table = random_table(&mut rng, 3, 6);
            let truth = Weights::new((0..3).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
            let obs = random_channel(&mut rng, 6, 5);
            let model = model_distribution(&truth, &table).unwrap();
            let data = EmpiricalObservations::new(observation_distribution(&model, &obs).unwrap());
            let rhs = e_step(&truth, &table, &obs, &data).unwrap();
            let lhs = expected_features(&model, &table).unwrap();
            assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
        }
    }
}
