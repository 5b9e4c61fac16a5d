//! Finite discrete maximum-entropy models.
//!
//! A model over a finite element space is the log-linear family
//! `Pr(x) = exp(Σ_k λ_k φ_k(x)) / Z(λ)`. Fitting it to target feature
//! expectations is done by minimizing the convex dual
//! `log Z(λ) − λ·targets`, whose gradient is `E_λ[φ] − targets`.

use crate::math::{inf_norm, log_sum_exp};
use crate::optim::{minimize, SolverConfig};
use crate::{Error, Result};

/// Tolerance used when validating that a probability vector sums to one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// The finite set of latent elements a model is defined over.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementSpace {
    size: usize,
    labels: Option<Vec<String>>,
}

impl ElementSpace {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::invalid("element space must be nonempty"));
        }
        Ok(ElementSpace { size, labels: None })
    }

    pub fn with_labels(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid("element space must be nonempty"));
        }
        let mut sorted = labels.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != labels.len() {
            return Err(Error::invalid("element labels must be unique"));
        }
        Ok(ElementSpace {
            size: labels.len(),
            labels: Some(labels),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.as_ref().and_then(|l| l.get(index)).map(String::as_str)
    }
}

/// Feature values `φ_k(x)`, stored feature-major (`k` rows by `|X|` columns).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    k: usize,
    n: usize,
    values: Vec<f64>,
}

impl FeatureTable {
    /// Builds a table from one row per feature.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::invalid("feature table needs at least one feature"));
        }
        let n = rows[0].len();
        if n == 0 {
            return Err(Error::invalid("feature table needs at least one element"));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::dim("feature rows have differing lengths"));
        }
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature values must be finite"));
        }
        Ok(FeatureTable { k, n, values })
    }

    pub fn num_features(&self) -> usize {
        self.k
    }

    pub fn num_elements(&self) -> usize {
        self.n
    }

    pub fn get(&self, feature: usize, element: usize) -> f64 {
        self.values[feature * self.n + element]
    }

    pub fn row(&self, feature: usize) -> &[f64] {
        &self.values[feature * self.n..(feature + 1) * self.n]
    }

    /// The feature vector of one element.
    pub fn column(&self, element: usize) -> Vec<f64> {
        (0..self.k).map(|f| self.get(f, element)).collect()
    }

    /// `Σ_k λ_k φ_k(x)` for every element.
    pub fn scores(&self, weights: &Weights) -> Result<Vec<f64>> {
        self.check_weights(weights)?;
        let mut scores = vec![0.0; self.n];
        for (f, &l) in weights.as_slice().iter().enumerate() {
            for (s, v) in scores.iter_mut().zip(self.row(f)) {
                *s += l * v;
            }
        }
        Ok(scores)
    }

    fn check_weights(&self, weights: &Weights) -> Result<()> {
        if weights.len() != self.k {
            return Err(Error::dim(format!("{} weights for {} features", weights.len(), self.k)));
        }
        Ok(())
    }

    fn check_targets(&self, targets: &[f64]) -> Result<()> {
        if targets.len() != self.k {
            return Err(Error::dim(format!("{} targets for {} features", targets.len(), self.k)));
        }
        Ok(())
    }
}

/// Log-linear weights `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.iter().any(|l| !l.is_finite()) {
            return Err(Error::invalid("weights must be finite"));
        }
        Ok(Weights(lambda))
    }

    pub fn zeros(k: usize) -> Self {
        Weights(vec![0.0; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// A probability vector over a finite support.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    /// Validates entries in `[0, 1]` summing to one within [`NORMALIZATION_TOLERANCE`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("distribution over an empty support"));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("probabilities must lie in [0, 1]"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Distribution(probs))
    }

    /// Normalizes nonnegative masses.
    pub fn from_weights(masses: &[f64]) -> Result<Self> {
        if masses.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::invalid("masses must be finite and nonnegative"));
        }
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("masses sum to zero"));
        }
        Ok(Distribution(masses.iter().map(|m| m / total).collect()))
    }

    pub fn uniform(n: usize) -> Self {
        Distribution(vec![1.0 / n as f64; n])
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        let mut p = vec![0.0; n];
        p[at] = 1.0;
        Distribution(p)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for Distribution {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualDiagnostics {
    pub dual_value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct MaxEntSolution {
    pub weights: Weights,
    pub diagnostics: DualDiagnostics,
}

/// `log Σ_x exp(Σ_k λ_k φ_k(x))`, max-shifted.
pub fn log_partition(weights: &Weights, features: &FeatureTable) -> Result<f64> {
    Ok(log_sum_exp(&features.scores(weights)?))
}

pub fn model_distribution(weights: &Weights, features: &FeatureTable) -> Result<Distribution> {
    let scores = features.scores(weights)?;
    let log_z = log_sum_exp(&scores);
    let mut probs: Vec<f64> = scores.iter().map(|s| (s - log_z).exp()).collect();
    // exp rounding leaves the sum a few ulps off; renormalize.
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(Distribution(probs))
}

/// `Σ_x Pr(x) φ_k(x)` for each feature.
pub fn expected_features(dist: &Distribution, features: &FeatureTable) -> Result<Vec<f64>> {
    if dist.len() != features.num_elements() {
        return Err(Error::dim(format!(
            "distribution over {} elements, features over {}",
            dist.len(),
            features.num_elements()
        )));
    }
    Ok((0..features.num_features())
        .map(|f| features.row(f).iter().zip(dist.probs()).map(|(v, p)| v * p).sum())
        .collect())
}

/// The dual `log Z(λ) − λ·targets` for fixed targets.
pub fn dual_objective(weights: &Weights, features: &FeatureTable, targets: &[f64]) -> Result<f64> {
    features.check_targets(targets)?;
    let log_z = log_partition(weights, features)?;
    Ok(log_z - crate::math::dot(weights.as_slice(), targets))
}

/// Gradient of [`dual_objective`]: `E_λ[φ] − targets`.
pub fn dual_gradient(weights: &Weights, features: &FeatureTable, targets: &[f64]) -> Result<Vec<f64>> {
    features.check_targets(targets)?;
    let model = model_distribution(weights, features)?;
    let expected = expected_features(&model, features)?;
    Ok(expected.iter().zip(targets).map(|(e, t)| e - t).collect())
}

fn dual_value_and_gradient(lambda: &[f64], features: &FeatureTable, targets: &[f64]) -> (f64, Vec<f64>) {
    let k = features.num_features();
    let n = features.num_elements();
    let mut scores = vec![0.0; n];
    for f in 0..k {
        for (s, v) in scores.iter_mut().zip(features.row(f)) {
            *s += lambda[f] * v;
        }
    }
    let log_z = log_sum_exp(&scores);
    if !log_z.is_finite() {
        return (f64::INFINITY, vec![0.0; k]);
    }
    let probs: Vec<f64> = scores.iter().map(|s| (s - log_z).exp()).collect();
    let value = log_z - crate::math::dot(lambda, targets);
    let grad = (0..k)
        .map(|f| crate::math::dot(features.row(f), &probs) - targets[f])
        .collect();
    (value, grad)
}

/// Fits the log-linear model whose feature expectations match `targets`.
///
/// Non-convergence is returned as [`Error::NotConverged`] with the best
/// weights found so far.
pub fn solve_maxent(
    features: &FeatureTable,
    targets: &[f64],
    config: &SolverConfig,
    warm_start: Option<&Weights>,
) -> Result<MaxEntSolution> {
    config.validate()?;
    features.check_targets(targets)?;
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("targets must be finite"));
    }
    let start = match warm_start {
        Some(w) => {
            features.check_weights(w)?;
            w.as_slice().to_vec()
        }
        None => vec![0.0; features.num_features()],
    };
    let res = minimize(|l| dual_value_and_gradient(l, features, targets), start, config);
    if !res.converged {
        return Err(Error::NotConverged {
            weights: res.point,
            grad_norm: res.grad_norm,
            iterations: res.iterations,
        });
    }
    Ok(MaxEntSolution {
        weights: Weights(res.point),
        diagnostics: DualDiagnostics {
            dual_value: res.value,
            grad_norm: res.grad_norm,
            iterations: res.iterations,
        },
    })
}

/// Shannon entropy in nats, with `0 log 0 = 0`.
pub fn entropy(dist: &Distribution) -> f64 {
    -dist
        .probs()
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

/// Infinity-norm gap between model feature expectations and `targets`.
pub fn constraint_violation(weights: &Weights, features: &FeatureTable, targets: &[f64]) -> Result<f64> {
    Ok(inf_norm(&dual_gradient(weights, features, targets)?))
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

    fn random_weights(rng: &mut ChaCha8Rng, k: usize, range: f64) -> Weights {
        Weights::new((0..k).map(|_| rng.random_range(-range..range)).collect()).unwrap()
    }

    fn two_point() -> FeatureTable {
        FeatureTable::from_rows(vec![vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn log_partition_of_zero_features_is_log_size() {
        let table = FeatureTable::from_rows(vec![vec![0.0; 5]; 2]).unwrap();
        let w = Weights::new(vec![3.0, -1.5]).unwrap();
        assert!((log_partition(&w, &table).unwrap() - 5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn log_partition_closed_form() {
        let w = Weights::new(vec![3f64.ln()]).unwrap();
        assert!((log_partition(&w, &two_point()).unwrap() - 4f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn log_partition_matches_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let table = random_table(&mut rng, 4, 6);
            let w = random_weights(&mut rng, 4, 2.0);
            let direct: f64 = (0..6)
                .map(|x| (0..4).map(|f| w.as_slice()[f] * table.get(f, x)).sum::<f64>().exp())
                .sum::<f64>()
                .ln();
            assert!((log_partition(&w, &table).unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn log_partition_survives_large_scores() {
        let table = FeatureTable::from_rows(vec![vec![1.0, 0.5, -1.0]]).unwrap();
        let w = Weights::new(vec![700.0]).unwrap();
        let v = log_partition(&w, &table).unwrap();
        assert!(v.is_finite());
        assert!((v - 700.0).abs() < 1e-9);
        let d = model_distribution(&w, &table).unwrap();
        assert!(d.probs().iter().all(|p| p.is_finite()));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let w = Weights::zeros(2);
        assert!(matches!(log_partition(&w, &two_point()), Err(Error::Dimension(_))));
        assert!(matches!(
            dual_objective(&Weights::zeros(1), &two_point(), &[0.1, 0.2]),
            Err(Error::Dimension(_))
        ));
        assert!(expected_features(&Distribution::uniform(3), &two_point()).is_err());
    }

    #[test]
    fn model_distribution_examples() {
        let u = model_distribution(&Weights::zeros(1), &two_point()).unwrap();
        assert_eq!(u.probs(), &[0.5, 0.5]);
        let d = model_distribution(&Weights::new(vec![3f64.ln()]).unwrap(), &two_point()).unwrap();
        assert!((d[0] - 0.25).abs() < 1e-15 && (d[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn model_argmax_follows_score_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let table = random_table(&mut rng, 3, 7);
            let w = random_weights(&mut rng, 3, 3.0);
            let d = model_distribution(&w, &table).unwrap();
            let scores = table.scores(&w).unwrap();
            assert_eq!(crate::math::argmax(d.probs()), crate::math::argmax(&scores));
            assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn expected_features_examples() {
        let e = expected_features(&Distribution::uniform(2), &two_point()).unwrap();
        assert_eq!(e, vec![0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let table = random_table(&mut rng, 3, 5);
        let pm = expected_features(&Distribution::point_mass(5, 2), &table).unwrap();
        assert_eq!(pm, table.column(2));
        let masses: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
        let d = Distribution::from_weights(&masses).unwrap();
        let got = expected_features(&d, &table).unwrap();
        let mut naive = vec![0.0; 3];
        for x in 0..5 {
            for (f, acc) in naive.iter_mut().enumerate() {
                *acc += d[x] * table.get(f, x);
            }
        }
        assert!(crate::math::max_abs_diff(&got, &naive) < 1e-12);
    }

    #[test]
    fn dual_at_zero_is_log_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let table = random_table(&mut rng, 3, 9);
        let v = dual_objective(&Weights::zeros(3), &table, &[0.3, 0.1, 0.9]).unwrap();
        assert!((v - 9f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn dual_is_convex_along_random_segments() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let table = random_table(&mut rng, 4, 8);
            let targets: Vec<f64> = (0..4).map(|_| rng.random()).collect();
            let a = random_weights(&mut rng, 4, 4.0);
            let b = random_weights(&mut rng, 4, 4.0);
            let mid = Weights::new(
                a.as_slice()
                    .iter()
                    .zip(b.as_slice())
                    .map(|(x, y)| 0.5 * (x + y))
                    .collect(),
            )
            .unwrap();
            let fa = dual_objective(&a, &table, &targets).unwrap();
            let fb = dual_objective(&b, &table, &targets).unwrap();
            let fm = dual_objective(&mid, &table, &targets).unwrap();
            assert!(fm <= 0.5 * (fa + fb) + 1e-12);
        }
    }

    #[test]
    fn gradient_vanishes_at_own_expectations() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let table = random_table(&mut rng, 3, 6);
        let w = random_weights(&mut rng, 3, 2.0);
        let targets = expected_features(&model_distribution(&w, &table).unwrap(), &table).unwrap();
        assert!(inf_norm(&dual_gradient(&w, &table, &targets).unwrap()) < 1e-14);
        let uniform_targets = expected_features(&Distribution::uniform(6), &table).unwrap();
        assert!(inf_norm(&dual_gradient(&Weights::zeros(3), &table, &uniform_targets).unwrap()) < 1e-15);
    }

    #[test]
    fn gradient_is_nonnegative_for_nonnegative_features_and_zero_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let table = random_table(&mut rng, 4, 5);
        let w = random_weights(&mut rng, 4, 3.0);
        let g = dual_gradient(&w, &table, &[0.0; 4]).unwrap();
        assert!(g.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let n = rng.random_range(2..=20);
            let k = rng.random_range(1..=8);
            let table = random_table(&mut rng, k, n);
            let w = random_weights(&mut rng, k, 2.0);
            let targets: Vec<f64> = (0..k).map(|_| rng.random()).collect();
            let g = dual_gradient(&w, &table, &targets).unwrap();
            let h = 1e-5;
            for f in 0..k {
                let mut up = w.as_slice().to_vec();
                let mut down = up.clone();
                up[f] += h;
                down[f] -= h;
                let fd = (dual_objective(&Weights::new(up).unwrap(), &table, &targets).unwrap()
                    - dual_objective(&Weights::new(down).unwrap(), &table, &targets).unwrap())
                    / (2.0 * h);
                assert!((fd - g[f]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn solve_recovers_closed_form() {
        let sol = solve_maxent(&two_point(), &[0.75], &SolverConfig::default(), None).unwrap();
        let d = model_distribution(&sol.weights, &two_point()).unwrap();
        assert!((d[0] - 0.25).abs() < 1e-6 && (d[1] - 0.75).abs() < 1e-6);
        assert!((sol.weights.as_slice()[0] - 3f64.ln()).abs() < 1e-4);
    }

    #[test]
    fn solve_uniform_targets_gives_uniform_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let table = random_table(&mut rng, 3, 7);
        let targets = expected_features(&Distribution::uniform(7), &table).unwrap();
        let sol = solve_maxent(&table, &targets, &SolverConfig::default(), None).unwrap();
        let d = model_distribution(&sol.weights, &table).unwrap();
        assert!(total_variation(d.probs(), Distribution::uniform(7).probs()) < 1e-6);
    }

    #[test]
    fn solve_inverts_forward_model_with_dependent_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let n = rng.random_range(3..=10);
            let mut rows: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect();
            // Third feature is a combination of the first two.
            rows.push(rows[0].iter().zip(&rows[1]).map(|(a, b)| a + 2.0 * b).collect());
            let table = FeatureTable::from_rows(rows).unwrap();
            let truth = random_weights(&mut rng, 4, 2.0);
            let p = model_distribution(&truth, &table).unwrap();
            let targets = expected_features(&p, &table).unwrap();
            // A 1e-6 gradient bound leaves TV of a few 1e-6 on ill-conditioned tables.
            let cfg = SolverConfig {
                tolerance: 1e-10,
                ..SolverConfig::default()
            };
            let sol = solve_maxent(&table, &targets, &cfg, None).unwrap();
            let q = model_distribution(&sol.weights, &table).unwrap();
            let tv = total_variation(p.probs(), q.probs());
            assert!(tv < 1e-6, "n={n} tv={tv:e} iters={}", sol.diagnostics.iterations);
            assert!(constraint_violation(&sol.weights, &table, &targets).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn unreachable_targets_report_non_convergence() {
        // 1.5 lies outside the hull of {0, 1}.
        let cfg = SolverConfig {
            max_iterations: 200,
            ..SolverConfig::default()
        };
        match solve_maxent(&two_point(), &[1.5], &cfg, None) {
            Err(Error::NotConverged { weights, grad_norm, .. }) => {
                assert_eq!(weights.len(), 1);
                assert!(grad_norm > 1e-6);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy(&Distribution::uniform(4)) - 4f64.ln()).abs() < 1e-15);
        assert_eq!(entropy(&Distribution::point_mass(3, 1)), 0.0);
        let d = Distribution::new(vec![0.25, 0.75]).unwrap();
        let expected = -0.25 * 0.25f64.ln() - 0.75 * 0.75f64.ln();
        assert!((entropy(&d) - expected).abs() < 1e-15);
    }

    #[test]
    fn solved_model_has_maximal_entropy_among_feasible_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let table = random_table(&mut rng, 1, 4);
        let target = [0.5
            * (table.row(0).iter().cloned().fold(f64::MAX, f64::min)
                + table.row(0).iter().cloned().fold(f64::MIN, f64::max))];
        let sol = solve_maxent(&table, &target, &SolverConfig::default(), None).unwrap();
        let h_star = entropy(&model_distribution(&sol.weights, &table).unwrap());
        let mut accepted = 0;
        while accepted < 1000 {
            let masses: Vec<f64> = (0..4).map(|_| -rng.random::<f64>().ln()).collect();
            let d = Distribution::from_weights(&masses).unwrap();
            let e = expected_features(&d, &table).unwrap();
            if (e[0] - target[0]).abs() <= 1e-3 {
                accepted += 1;
                assert!(entropy(&d) <= h_star + 1e-6);
            }
        }
    }

    #[test]
    fn shifting_a_feature_row_shifts_log_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..50 {
            let table = random_table(&mut rng, 3, 6);
            let w = random_weights(&mut rng, 3, 2.0);
            let c = rng.random_range(-5.0..5.0);
            let f = rng.random_range(0..3);
            let rows: Vec<Vec<f64>> = (0..3)
                .map(|r| table.row(r).iter().map(|v| if r == f { v + c } else { *v }).collect())
                .collect();
            let shifted = FeatureTable::from_rows(rows).unwrap();
            let delta = log_partition(&w, &shifted).unwrap() - log_partition(&w, &table).unwrap();
            assert!((delta - w.as_slice()[f] * c).abs() < 1e-12);
            let p = model_distribution(&w, &table).unwrap();
            let q = model_distribution(&w, &shifted).unwrap();
            assert!(crate::math::max_abs_diff(p.probs(), q.probs()) < 1e-12);
        }
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::new(vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(vec![-0.1, 1.1]).is_err());
        assert!(Distribution::new(vec![]).is_err());
        assert!(Distribution::from_weights(&[0.0, 0.0]).is_err());
        assert!(ElementSpace::with_labels(vec!["a".into(), "a".into()]).is_err());
        assert!(ElementSpace::new(0).is_err());
        assert!(FeatureTable::from_rows(vec![vec![1.0, f64::NAN]]).is_err());
    }
}
