//! Experiment plumbing shared by the command line: CSV rendering, ordering
//! verdicts for the two experiments, and the named property checks.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::em::{
    e_step, fixed_point_residual, latent_reduction_channel, observation_distribution, run_umaxent, EmConfig,
    EmpiricalObservations, ObservationModel,
};
use crate::fugitive::{IleCurvePoint, IleRecord};
use crate::irl::{
    e_step_sequences, expected_feature_counts, forward_backward, maxcausalent_irl, soft_value_iteration, IrlConfig,
    ObservationSequence, PartialTrajectory, RewardFeatures, StepChannel, StepEvidence,
};
use crate::lab::{CurvePoint, TrialRecord};
use crate::math::{max_abs_diff, total_variation};
use crate::maxent::{
    dual_gradient, dual_objective, expected_features, model_distribution, solve_maxent, Distribution, FeatureTable,
    Weights,
};
use crate::mdp::{ile, sample_trajectory_with, value_iteration, Mdp, TimedPolicy};
use crate::optim::SolverConfig;
use crate::{seed, Error, Result};

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail,
        }
    }

    fn from_result(name: &str, outcome: Result<(bool, String)>) -> Self {
        match outcome {
            Ok((passed, detail)) => Check::new(name, passed, detail),
            Err(e) => Check::new(name, false, format!("error: {e}")),
        }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {}", self.name, self.detail)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn render<I>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn figure1_rows_csv(rows: &[TrialRecord]) -> String {
    render(
        &["experiment", "algorithm", "n_observations", "trial", "kld", "seed"],
        rows.iter().map(|r| {
            vec![
                "figure1".into(),
                r.algorithm.clone(),
                r.n_observations.to_string(),
                r.trial.to_string(),
                opt(r.kld),
                r.seed.to_string(),
            ]
        }),
    )
}

pub fn figure1_summary_csv(points: &[CurvePoint]) -> String {
    render(
        &[
            "experiment",
            "algorithm",
            "n_observations",
            "trials",
            "failures",
            "mean_kld",
            "stddev_kld",
        ],
        points.iter().map(|p| {
            vec![
                "figure1".into(),
                p.algorithm.clone(),
                p.n_observations.to_string(),
                p.trials.to_string(),
                p.failures.to_string(),
                p.mean_kld.to_string(),
                p.std_kld.to_string(),
            ]
        }),
    )
}

pub fn fugitive_rows_csv(rows: &[IleRecord]) -> String {
    render(
        &[
            "experiment",
            "setting",
            "algorithm",
            "n_trajectories",
            "trial",
            "ile",
            "seed",
        ],
        rows.iter().map(|r| {
            vec![
                "fugitive".into(),
                r.setting.clone(),
                r.algorithm.clone(),
                r.n_trajectories.to_string(),
                r.trial.to_string(),
                opt(r.ile),
                r.seed.to_string(),
            ]
        }),
    )
}

pub fn fugitive_summary_csv(points: &[IleCurvePoint]) -> String {
    render(
        &[
            "experiment",
            "setting",
            "algorithm",
            "n_trajectories",
            "trials",
            "failures",
            "mean_ile",
            "stddev_ile",
        ],
        points.iter().map(|p| {
            vec![
                "fugitive".into(),
                p.setting.clone(),
                p.algorithm.clone(),
                p.n_trajectories.to_string(),
                p.trials.to_string(),
                p.failures.to_string(),
                p.mean_ile.to_string(),
                p.std_ile.to_string(),
            ]
        }),
    )
}

pub fn checks_csv(checks: &[Check]) -> String {
    render(
        &["check", "passed", "detail"],
        checks
            .iter()
            .map(|c| vec![c.name.clone(), c.passed.to_string(), c.detail.clone()]),
    )
}

fn curve<'a>(points: &'a [CurvePoint], algorithm: &str) -> Vec<&'a CurvePoint> {
    points.iter().filter(|p| p.algorithm == algorithm).collect()
}

/// Qualitative shape of the random-program curves at the largest `N`.
pub fn figure1_verdict(points: &[CurvePoint]) -> Vec<Check> {
    let u = curve(points, "uMaxEnt");
    let ml = curve(points, "MLMaxEnt");
    let inf = curve(points, "InfObs");
    let (Some(u_last), Some(ml_last), Some(inf_last)) = (u.last(), ml.last(), inf.last()) else {
        return vec![Check::new(
            "figure1-curves",
            false,
            "uMaxEnt, MLMaxEnt and InfObs curves are all required".into(),
        )];
    };
    let n = u_last.n_observations;
    let mut checks = vec![
        Check::new(
            "umaxent-reaches-infobs",
            u_last.mean_kld <= 1.5 * inf_last.mean_kld,
            format!(
                "N={n}: uMaxEnt {} vs 1.5 x InfObs {}",
                u_last.mean_kld,
                1.5 * inf_last.mean_kld
            ),
        ),
        Check::new(
            "ml-stays-biased",
            ml_last.mean_kld >= 3.0 * u_last.mean_kld,
            format!(
                "N={n}: MLMaxEnt {} vs 3 x uMaxEnt {}",
                ml_last.mean_kld,
                3.0 * u_last.mean_kld
            ),
        ),
    ];
    let rises: Vec<String> = u
        .windows(2)
        .filter(|w| {
            let se = w[0].std_kld / ((w[0].trials - w[0].failures).max(1) as f64).sqrt();
            w[1].mean_kld > w[0].mean_kld + se
        })
        .map(|w| format!("{}->{}", w[0].n_observations, w[1].n_observations))
        .collect();
    checks.push(Check::new(
        "umaxent-non-increasing",
        rises.is_empty(),
        if rises.is_empty() {
            format!("means {:?}", u.iter().map(|p| p.mean_kld).collect::<Vec<_>>())
        } else {
            format!("rises beyond one standard error at {}", rises.join(", "))
        },
    ));
    checks
}

/// Ordering of mean ILE at the largest trajectory count, per setting.
pub fn fugitive_verdict(points: &[IleCurvePoint]) -> Vec<Check> {
    let mut settings: Vec<&str> = Vec::new();
    for p in points {
        if !settings.contains(&p.setting.as_str()) {
            settings.push(&p.setting);
        }
    }
    let mut checks = Vec::new();
    for setting in settings {
        let at = |alg: &str| {
            points
                .iter()
                .filter(|p| p.setting == setting && p.algorithm == alg)
                .max_by_key(|p| p.n_trajectories)
        };
        let (Some(truth), Some(u), Some(ml), Some(wo), Some(hd)) = (
            at("TRUE"),
            at("uMaxCausalEntIRL"),
            at("ML"),
            at("WOERR"),
            at("cHiddenDataEM"),
        ) else {
            checks.push(Check::new(
                &format!("{setting}-ordering"),
                false,
                "all five algorithms are required".into(),
            ));
            continue;
        };
        let best_control = ml.mean_ile.min(wo.mean_ile).min(hd.mean_ile);
        checks.push(Check::new(
            &format!("{setting}-ordering"),
            truth.mean_ile <= u.mean_ile && u.mean_ile < best_control,
            format!(
                "N={}: TRUE {} <= uMaxCausalEntIRL {} < min(ML {}, WOERR {}, cHiddenDataEM {})",
                u.n_trajectories, truth.mean_ile, u.mean_ile, ml.mean_ile, wo.mean_ile, hd.mean_ile
            ),
        ));
        if setting == "low" {
            checks.push(Check::new(
                "low-hidden-data-plateau",
                u.mean_ile <= 0.5 * hd.mean_ile,
                format!(
                    "uMaxCausalEntIRL {} vs 0.5 x cHiddenDataEM {}",
                    u.mean_ile,
                    0.5 * hd.mean_ile
                ),
            ));
        }
    }
    checks
}

fn random_table(rng: &mut ChaCha8Rng, k: usize, n: usize) -> Result<FeatureTable> {
    FeatureTable::from_rows((0..k).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect())
}

fn random_weights(rng: &mut ChaCha8Rng, k: usize) -> Result<Weights> {
    Weights::new((0..k).map(|_| rng.random_range(-3.0..3.0)).collect())
}

fn random_dist(rng: &mut ChaCha8Rng, n: usize) -> Result<Distribution> {
    Distribution::from_weights(&(0..n).map(|_| rng.random::<f64>() + 0.01).collect::<Vec<_>>())
}

fn random_channel(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Result<ObservationModel> {
    ObservationModel::from_rows(
        (0..n)
            .map(|_| random_dist(rng, m).map(Distribution::into_vec))
            .collect::<Result<_>>()?,
    )
}

fn instance_rng(master: u64, check: u64, i: usize) -> ChaCha8Rng {
    seed::rng(seed::derive(master, &[10, check, i as u64]))
}

/// Analytic dual gradient against central differences (`h = 1e-5`, tolerance `1e-6`).
///
/// `perturb` is added to the analytic gradient, so a nonzero value must fail.
pub fn check_dual_gradient(instances: usize, master: u64, perturb: f64) -> Check {
    Check::from_result(
        "dual-gradient",
        (|| {
            let mut worst: f64 = 0.0;
            for i in 0..instances {
                let mut rng = instance_rng(master, 1, i);
                let (n, k) = (rng.random_range(2..=20), rng.random_range(1..=8));
                let table = random_table(&mut rng, k, n)?;
                let lambda = random_weights(&mut rng, k)?;
                let targets: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
                let mut grad = dual_gradient(&lambda, &table, &targets)?;
                grad[0] += perturb;
                let h = 1e-5;
                for j in 0..k {
                    let mut up = lambda.as_slice().to_vec();
                    let mut down = up.clone();
                    up[j] += h;
                    down[j] -= h;
                    let fd = (dual_objective(&Weights::new(up)?, &table, &targets)?
                        - dual_objective(&Weights::new(down)?, &table, &targets)?)
                        / (2.0 * h);
                    worst = worst.max((fd - grad[j]).abs());
                }
            }
            Ok((worst <= 1e-6, format!("{instances} instances, worst gap {worst:e}")))
        })(),
    )
}

/// Weights from a tight solve; a stall just above tolerance still yields its best iterate.
fn solve_or_best(table: &FeatureTable, targets: &[f64]) -> Result<Weights> {
    match solve_maxent(table, targets, &tight_solver(), None) {
        Ok(sol) => Ok(sol.weights),
        Err(Error::NotConverged { weights, .. }) => Weights::new(weights),
        Err(e) => Err(e),
    }
}

fn tight_solver() -> SolverConfig {
    SolverConfig {
        tolerance: 1e-10,
        max_iterations: 100_000,
        ..SolverConfig::default()
    }
}

/// Solving against forward-generated targets recovers the generating model (TV `1e-6`).
pub fn check_maxent_inversion(instances: usize, master: u64) -> Check {
    Check::from_result(
        "maxent-inversion",
        (|| {
            let mut worst: f64 = 0.0;
            for i in 0..instances {
                let mut rng = instance_rng(master, 2, i);
                let (n, k) = (rng.random_range(2..=20), rng.random_range(1..=8));
                let table = random_table(&mut rng, k, n)?;
                let truth = model_distribution(&random_weights(&mut rng, k)?, &table)?;
                let targets = expected_features(&truth, &table)?;
                let got = model_distribution(&solve_or_best(&table, &targets)?, &table)?;
                worst = worst.max(total_variation(truth.probs(), got.probs()));
            }
            Ok((worst <= 1e-6, format!("{instances} instances, worst TV {worst:e}")))
        })(),
    )
}

fn long_em() -> EmConfig {
    EmConfig {
        tolerance: 1e-8,
        max_iterations: 50_000,
        solver: SolverConfig {
            max_iterations: 200_000,
            ..SolverConfig::default()
        },
    }
}

fn tight_em() -> EmConfig {
    EmConfig {
        tolerance: 1e-9,
        max_iterations: 5_000,
        solver: SolverConfig {
            tolerance: 1e-8,
            ..tight_solver()
        },
    }
}

/// Identity channel makes the EM collapse onto plain MaxEnt (TV `1e-6`).
pub fn check_identity_reduction(instances: usize, master: u64) -> Check {
    Check::from_result(
        "identity-reduction",
        (|| {
            let mut worst: f64 = 0.0;
            for i in 0..instances {
                let mut rng = instance_rng(master, 3, i);
                let (n, k) = (rng.random_range(2..=12), rng.random_range(1..=6));
                let table = random_table(&mut rng, k, n)?;
                let emp = random_dist(&mut rng, n)?;
                let data = EmpiricalObservations::new(emp.clone());
                let cfg = tight_em();
                let em = run_umaxent(&table, &ObservationModel::identity(n), &data, &cfg, None)?;
                let direct = solve_maxent(&table, &expected_features(&emp, &table)?, &cfg.solver, None)?;
                let p = model_distribution(&em.weights, &table)?;
                let q = model_distribution(&direct.weights, &table)?;
                worst = worst.max(total_variation(p.probs(), q.probs()));
            }
            Ok((worst <= 1e-6, format!("{instances} instances, worst TV {worst:e}")))
        })(),
    )
}

/// Partition channel E-step equals the latent-MaxEnt completion (`1e-12`).
pub fn check_partition_reduction(instances: usize, master: u64) -> Check {
    Check::from_result(
        "partition-reduction",
        (|| {
            let mut worst: f64 = 0.0;
            for i in 0..instances {
                let mut rng = instance_rng(master, 4, i);
                let (n, k) = (rng.random_range(2..=12), rng.random_range(1..=6));
                let groups = rng.random_range(1..=n);
                let mut partition: Vec<usize> = (0..n)
                    .map(|x| if x < groups { x } else { rng.random_range(0..groups) })
                    .collect();
                // Shuffle so groups are not laid out in index order.
                for x in (1..n).rev() {
                    partition.swap(x, rng.random_range(0..=x));
                }
                let table = random_table(&mut rng, k, n)?;
                let lambda = random_weights(&mut rng, k)?;
                let emp_y = random_dist(&mut rng, groups)?;
                let channel = latent_reduction_channel(&partition, groups)?;
                let got = e_step(&lambda, &table, &channel, &EmpiricalObservations::new(emp_y.clone()))?;

                let model = model_distribution(&lambda, &table)?;
                let mut want = vec![0.0; k];
                for (y, &py) in emp_y.probs().iter().enumerate() {
                    let members: Vec<usize> = (0..n).filter(|&x| partition[x] == y).collect();
                    let mass: f64 = members.iter().map(|&x| model[x]).sum();
                    for &x in &members {
                        for (f, w) in want.iter_mut().enumerate() {
                            *w += py * model[x] / mass * table.get(f, x);
                        }
                    }
                }
                worst = worst.max(max_abs_diff(&got, &want));
            }
            Ok((worst <= 1e-12, format!("{instances} instances, worst gap {worst:e}")))
        })(),
    )
}

/// EM likelihood is monotone (slack `1e-8`) and ends on its constraints (`1e-5`).
pub fn check_em_guarantees(instances: usize, master: u64) -> Check {
    Check::from_result(
        "em-guarantees",
        (|| {
            let (mut worst_drop, mut worst_residual): (f64, f64) = (0.0, 0.0);
            let mut unconverged = 0;
            for i in 0..instances {
                let mut rng = instance_rng(master, 5, i);
                let (n, k) = (rng.random_range(2..=12), rng.random_range(1..=6));
                let m = rng.random_range(2..=n.max(2));
                let table = random_table(&mut rng, k, n)?;
                let obs = random_channel(&mut rng, n, m)?;
                let data = EmpiricalObservations::new(random_dist(&mut rng, m)?);
                let res = run_umaxent(&table, &obs, &data, &long_em(), None)?;
                for w in res.diagnostics.log_likelihood.windows(2) {
                    worst_drop = worst_drop.max(w[0] - w[1]);
                }
                if !res.diagnostics.converged {
                    unconverged += 1;
                }
                worst_residual = worst_residual.max(fixed_point_residual(&res.weights, &table, &obs, &data)?);
            }
            Ok((
                worst_drop <= 1e-8 && worst_residual <= 1e-5 && unconverged == 0,
                format!(
                    "{instances} runs, worst likelihood drop {worst_drop:e}, worst residual {worst_residual:e}, unconverged {unconverged}"
                ),
            ))
        })(),
    )
}

/// With exact `Pr(ω)`, the generating model satisfies its own constraints (`1e-12`).
pub fn check_infinite_data(instances: usize, master: u64) -> Check {
    Check::from_result(
        "infinite-data",
        (|| {
            let mut worst: f64 = 0.0;
            for i in 0..instances {
                let mut rng = instance_rng(master, 6, i);
                let (n, k) = (rng.random_range(2..=12), rng.random_range(1..=6));
                let m = rng.random_range(1..=n + 2);
                let table = random_table(&mut rng, k, n)?;
                let truth = random_weights(&mut rng, k)?;
                let obs = random_channel(&mut rng, n, m)?;
                let model = model_distribution(&truth, &table)?;
                let data = EmpiricalObservations::new(observation_distribution(&model, &obs)?);
                let rhs = e_step(&truth, &table, &obs, &data)?;
                worst = worst.max(max_abs_diff(&expected_features(&model, &table)?, &rhs));
            }
            Ok((worst <= 1e-12, format!("{instances} instances, worst gap {worst:e}")))
        })(),
    )
}

fn random_rows(rng: &mut ChaCha8Rng, rows: usize, cols: usize, zero_p: f64) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| {
            let mut r: Vec<f64> = (0..cols)
                .map(|_| {
                    if rng.random::<f64>() < zero_p {
                        0.0
                    } else {
                        rng.random::<f64>() + 0.05
                    }
                })
                .collect();
            if r.iter().all(|&x| x == 0.0) {
                r[rng.random_range(0..cols)] = 1.0;
            }
            let t: f64 = r.iter().sum();
            r.iter().map(|x| x / t).collect()
        })
        .collect()
}

fn random_mdp(rng: &mut ChaCha8Rng, n: usize, m: usize, zero_p: f64) -> Result<Mdp> {
    let t = (0..n).map(|_| random_rows(rng, m, n, zero_p)).collect();
    let initial = random_rows(rng, 1, n, 0.0).remove(0);
    Mdp::new(t, vec![vec![0.0; m]; n], 0.95, initial)
}

fn random_reward_features(rng: &mut ChaCha8Rng, k: usize, n: usize, m: usize) -> Result<RewardFeatures> {
    RewardFeatures::new(
        (0..k)
            .map(|_| {
                (0..n)
                    .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect()
            })
            .collect(),
    )
}

/// Smoothing marginals against full path enumeration (`1e-9`).
pub fn check_forward_backward(instances: usize, master: u64) -> Check {
    Check::from_result(
        "forward-backward",
        (|| {
            let mut worst: f64 = 0.0;
            let mut impossible = 0;
            for i in 0..instances {
                let mut rng = instance_rng(master, 7, i);
                let (n, m, h) = (
                    rng.random_range(1..=4),
                    rng.random_range(1..=3),
                    rng.random_range(1..=4),
                );
                let symbols = rng.random_range(1..=4);
                let mdp = random_mdp(&mut rng, n, m, 0.3)?;
                let f = random_reward_features(&mut rng, 2, n, m)?;
                let pi = soft_value_iteration(&mdp, &f, &Weights::new(vec![rng.random_range(-2.0..2.0), 1.0])?, h)?;
                let channel = StepChannel::from_rows(random_rows(&mut rng, n, symbols, 0.2))?;
                let seq = ObservationSequence::new(
                    (0..h)
                        .map(|_| (rng.random::<f64>() < 0.8).then(|| rng.random_range(0..symbols)))
                        .collect(),
                )?;
                let (joint, evidence) = enumerate_posterior(&mdp, &pi, &channel, &seq);
                match forward_backward(&seq, &channel, &mdp, &pi) {
                    Ok(post) => {
                        worst = worst.max((post.log_likelihood() - evidence.ln()).abs());
                        for (t, row) in joint.iter().enumerate() {
                            for (a, b) in post.at(t).iter().zip(row) {
                                worst = worst.max((a - b / evidence).abs());
                            }
                        }
                    }
                    Err(Error::ImpossibleSequence) if evidence == 0.0 => impossible += 1,
                    Err(e) => return Err(e),
                }
            }
            Ok((
                worst <= 1e-9,
                format!("{instances} instances ({impossible} impossible), worst gap {worst:e}"),
            ))
        })(),
    )
}

/// Unnormalized joint `Pr(s_t, a_t, ω)` by summing over every path, and `Pr(ω)`.
fn enumerate_posterior(
    mdp: &Mdp,
    policy: &TimedPolicy,
    channel: &StepChannel,
    seq: &ObservationSequence,
) -> (Vec<Vec<f64>>, f64) {
    let (n, m, h) = (mdp.num_states(), mdp.num_actions(), seq.len());
    let mut joint = vec![vec![0.0; n * m]; h];
    let mut evidence = 0.0;
    let mut path = vec![(0usize, 0usize); h];
    for code in 0..(n * m).pow(h as u32) {
        let mut c = code;
        for step in path.iter_mut() {
            *step = ((c % (n * m)) / m, c % m);
            c /= n * m;
        }
        let mut p = mdp.initial()[path[0].0];
        for (t, &(s, a)) in path.iter().enumerate() {
            p *= policy.at(t).prob(s, a);
            if let Some(w) = seq.symbols()[t] {
                p *= channel.prob(s, w);
            }
            if let Some(&(s2, _)) = path.get(t + 1) {
                p *= mdp.transition(s, a, s2);
            }
        }
        if p == 0.0 {
            continue;
        }
        evidence += p;
        for (t, &(s, a)) in path.iter().enumerate() {
            joint[t][s * m + a] += p;
        }
    }
    (joint, evidence)
}

/// The 6-state test MDP: a ring where action 0 advances, 1 stays, 2 retreats,
/// each with slip; the agent always starts in state 0.
pub fn ring_mdp() -> Result<Mdp> {
    let n = 6;
    let t = (0..n)
        .map(|s| {
            [(s + 1) % n, s, (s + n - 1) % n]
                .iter()
                .map(|&target| {
                    let mut row = vec![0.05; n];
                    row[target] += 1.0 - 0.05 * n as f64;
                    row
                })
                .collect()
        })
        .collect();
    let mut initial = vec![0.0; n];
    initial[0] = 1.0;
    Mdp::new(t, vec![vec![0.0; 3]; n], 0.95, initial)
}

/// Direct causal fit on many soft-optimal trajectories: counts match the data
/// (`1e-3`) and the learned soft policy loses at most `0.05` ILE.
pub fn check_irl_self_consistency(trajectories: usize, master: u64, config: &IrlConfig) -> Check {
    Check::from_result(
        "irl-self-consistency",
        (|| {
            let mdp = ring_mdp()?;
            let (n, m) = (mdp.num_states(), mdp.num_actions());
            let features = RewardFeatures::state_indicators(n, m);
            let truth = Weights::new(vec![0.0, 0.5, 0.0, 2.0, 0.0, -1.0])?;
            let generating = soft_value_iteration(&mdp, &features, &truth, config.horizon)?;
            let mut rng = seed::rng(seed::derive(master, &[11]));
            let data: Vec<_> = (0..trajectories)
                .map(|_| sample_trajectory_with(&mdp, &generating, &mut rng))
                .collect();
            let mut empirical = vec![0.0; n];
            for t in &data {
                for (e, c) in empirical.iter_mut().zip(features.trajectory_counts(t)) {
                    *e += c / trajectories as f64;
                }
            }
            let res = maxcausalent_irl(&mdp, &features, &data, config)?;
            let counts = expected_feature_counts(&mdp, &features, &res.policy)?;
            let gap = max_abs_diff(&counts, &empirical);
            // Scored like the fugitive runs: greedy policies on the true and learned rewards.
            let scored = mdp.with_reward(features.reward(truth.as_slice()))?;
            let (_, expert) = value_iteration(&scored, 1e-10)?;
            let (_, learned) = value_iteration(&mdp.with_reward(features.reward(res.weights.as_slice()))?, 1e-10)?;
            let loss = ile(&scored, &expert, &learned, 1e-10)?;
            Ok((
                gap <= 1e-3 && loss <= 0.05,
                format!("{trajectories} trajectories, count gap {gap:e}, ILE {loss:e}"),
            ))
        })(),
    )
}

/// Hidden-data EM targets equal identity-channel targets with MISSING steps (`1e-9`).
pub fn check_hidden_data_specialization(instances: usize, master: u64) -> Check {
    Check::from_result(
        "hidden-data-specialization",
        (|| {
            let mut worst: f64 = 0.0;
            for i in 0..instances {
                let mut rng = instance_rng(master, 8, i);
                let (n, m) = (rng.random_range(2..=5), rng.random_range(1..=3));
                let mdp = random_mdp(&mut rng, n, m, 0.0)?;
                let f = random_reward_features(&mut rng, 3, n, m)?;
                let lambda = Weights::new((0..3).map(|_| rng.random_range(-1.0..1.0)).collect())?;
                let pi = soft_value_iteration(&mdp, &f, &lambda, 4)?;
                let mut masked = Vec::new();
                for _ in 0..6 {
                    let t = sample_trajectory_with(&mdp, &pi, &mut rng);
                    masked.push(PartialTrajectory::new(
                        t.steps()
                            .iter()
                            .map(|&sa| (rng.random::<f64>() < 0.6).then_some(sa))
                            .collect(),
                    )?);
                }
                let identity = StepChannel::identity(n);
                let mut occluded = Vec::new();
                let mut channelled = Vec::new();
                for p in &masked {
                    occluded.push(StepEvidence::from_states(&p.states(), n)?);
                    channelled.push(StepEvidence::from_channel(
                        &ObservationSequence::new(p.states())?,
                        &identity,
                    )?);
                }
                let a = e_step_sequences(&mdp, &f, &pi, &occluded, true)?;
                let b = e_step_sequences(&mdp, &f, &pi, &channelled, false)?;
                worst = worst.max(max_abs_diff(&a.targets, &b.targets));
                worst = worst.max(max_abs_diff(&a.start, &b.start));
            }
            Ok((worst <= 1e-9, format!("{instances} instances, worst gap {worst:e}")))
        })(),
    )
}

/// Causal fit without the ridge, so matched counts are exact up to solver tolerance.
pub fn unregularized_irl() -> IrlConfig {
    IrlConfig {
        l2: 0.0,
        ..IrlConfig::default()
    }
}

/// Knobs for [`run_properties`].
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyConfig {
    pub seed: u64,
    /// Instances per randomized check.
    pub instances: usize,
    pub irl_trajectories: usize,
    /// Test hook: added to the analytic dual gradient.
    pub perturb_gradient: f64,
}

impl Default for PropertyConfig {
    fn default() -> Self {
        PropertyConfig {
            seed: 0,
            instances: 50,
            irl_trajectories: 10_000,
            perturb_gradient: 0.0,
        }
    }
}

/// Runs every named property check.
pub fn run_properties(config: &PropertyConfig) -> Vec<Check> {
    let (k, s) = (config.instances, config.seed);
    vec![
        check_dual_gradient(2 * k, s, config.perturb_gradient),
        check_maxent_inversion(k, s),
        check_identity_reduction(k, s),
        check_partition_reduction(k, s),
        check_em_guarantees(k, s),
        check_infinite_data(2 * k, s),
        check_forward_backward(4 * k, s),
        check_irl_self_consistency(config.irl_trajectories, s, &unregularized_irl()),
        check_hidden_data_specialization(k / 5 + 1, s),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(algorithm: &str, n: usize, mean: f64, std: f64) -> CurvePoint {
        CurvePoint {
            n_observations: n,
            algorithm: algorithm.into(),
            mean_kld: mean,
            std_kld: std,
            trials: 4,
            failures: 0,
        }
    }

    fn ile_point(setting: &str, algorithm: &str, mean: f64) -> IleCurvePoint {
        IleCurvePoint {
            setting: setting.into(),
            algorithm: algorithm.into(),
            n_trajectories: 64,
            trials: 3,
            failures: 0,
            mean_ile: mean,
            std_ile: 0.0,
        }
    }

    #[test]
    fn figure1_verdict_reads_the_last_grid_point() {
        let good = vec![
            point("uMaxEnt", 10, 0.5, 0.1),
            point("uMaxEnt", 100, 0.05, 0.01),
            point("MLMaxEnt", 10, 0.6, 0.1),
            point("MLMaxEnt", 100, 0.3, 0.1),
            point("InfObs", 10, 0.04, 0.0),
            point("InfObs", 100, 0.04, 0.0),
        ];
        assert!(figure1_verdict(&good).iter().all(|c| c.passed));

        let mut rising = good.clone();
        rising[1].mean_kld = 0.7;
        let checks = figure1_verdict(&rising);
        let failed: Vec<_> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        assert_eq!(
            failed,
            ["umaxent-reaches-infobs", "ml-stays-biased", "umaxent-non-increasing"]
        );

        assert!(!figure1_verdict(&good[..2]).iter().any(|c| c.passed));
    }

    #[test]
    fn fugitive_verdict_orderings() {
        let mut pts = Vec::new();
        for (setting, hd) in [("low", 30.0), ("high", 170.0)] {
            for (alg, v) in [
                ("TRUE", 0.1),
                ("uMaxCausalEntIRL", 0.3),
                ("ML", 170.0),
                ("WOERR", 30.0),
                ("cHiddenDataEM", hd),
            ] {
                pts.push(ile_point(setting, alg, v));
            }
        }
        let checks = fugitive_verdict(&pts);
        assert_eq!(checks.len(), 3);
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");

        pts[1].mean_ile = 20.0;
        let checks = fugitive_verdict(&pts);
        assert!(!checks[1].passed && checks[0].passed);
        pts[1].mean_ile = 40.0;
        assert!(!fugitive_verdict(&pts)[0].passed);
    }

    #[test]
    fn csv_shapes() {
        let rows = vec![TrialRecord {
            algorithm: "uMaxEnt".into(),
            n_observations: 10,
            trial: 0,
            kld: None,
            seed: 7,
        }];
        assert_eq!(
            figure1_rows_csv(&rows),
            "experiment,algorithm,n_observations,trial,kld,seed\nfigure1,uMaxEnt,10,0,,7\n"
        );
        let rows = vec![IleRecord {
            setting: "low".into(),
            algorithm: "ML".into(),
            n_trajectories: 4,
            trial: 2,
            ile: Some(0.5),
            seed: 3,
        }];
        assert_eq!(
            fugitive_rows_csv(&rows),
            "experiment,setting,algorithm,n_trajectories,trial,ile,seed\nfugitive,low,ML,4,2,0.5,3\n"
        );
        let checks = vec![Check::new("a", true, "x, \"y\"".into())];
        assert_eq!(checks_csv(&checks), "check,passed,detail\na,true,\"x, \"\"y\"\"\"\n");
    }

    #[test]
    fn perturbed_gradient_is_caught() {
        assert!(check_dual_gradient(5, 1, 0.0).passed);
        let c = check_dual_gradient(5, 1, 1e-4);
        assert!(!c.passed);
        assert!(c.to_string().starts_with("FAIL dual-gradient"));
    }

    #[test]
    fn small_suites_pass() {
        for c in [
            check_partition_reduction(5, 3),
            check_infinite_data(5, 3),
            check_forward_backward(20, 3),
            check_hidden_data_specialization(2, 3),
        ] {
            assert!(c.passed, "{c}");
        }
    }

    #[test]
    fn ring_is_a_valid_model() {
        let mdp = ring_mdp().unwrap();
        assert_eq!((mdp.num_states(), mdp.num_actions()), (6, 3));
        assert!((mdp.transition(0, 0, 1) - 0.75).abs() < 1e-12);
        assert_eq!(mdp.initial()[0], 1.0);
    }
}
