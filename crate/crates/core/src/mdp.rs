//! Finite Markov decision processes: exact solvers, simulation, and the
//! inverse learning error.

use rand::Rng;

use crate::maxent::{Distribution, NORMALIZATION_TOLERANCE};
use crate::{Error, Result};

/// Finite MDP `⟨S, A, T, R, γ, S0⟩` with stochastic transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    states: usize,
    actions: usize,
    /// `transitions[(s * A + a) * S + s'] = T(s'|s,a)`.
    transitions: Vec<f64>,
    /// Sparse view of `transitions`, one list of `(s', p)` per `(s, a)`.
    successors: Vec<Vec<(usize, f64)>>,
    reward: Vec<f64>,
    gamma: f64,
    initial: Vec<f64>,
}

impl Mdp {
    /// `transitions[s][a][s']`, `reward[s][a]`.
    pub fn new(transitions: Vec<Vec<Vec<f64>>>, reward: Vec<Vec<f64>>, gamma: f64, initial: Vec<f64>) -> Result<Self> {
        let states = transitions.len();
        if states == 0 {
            return Err(Error::invalid("MDP needs at least one state"));
        }
        let actions = transitions[0].len();
        if actions == 0 {
            return Err(Error::invalid("MDP needs at least one action"));
        }
        let mut flat = Vec::with_capacity(states * actions * states);
        for (s, row) in transitions.iter().enumerate() {
            if row.len() != actions {
                return Err(Error::dim(format!(
                    "state {s} has {} actions, expected {actions}",
                    row.len()
                )));
            }
            for (a, dist) in row.iter().enumerate() {
                if dist.len() != states {
                    return Err(Error::dim(format!("T(.|{s},{a}) has length {}", dist.len())));
                }
                flat.extend_from_slice(dist);
            }
        }
        if reward.len() != states || reward.iter().any(|r| r.len() != actions) {
            return Err(Error::dim("reward must be |S| x |A|"));
        }
        Mdp::from_flat(
            states,
            actions,
            flat,
            reward.into_iter().flatten().collect(),
            gamma,
            initial,
        )
    }

    pub(crate) fn from_flat(
        states: usize,
        actions: usize,
        transitions: Vec<f64>,
        reward: Vec<f64>,
        gamma: f64,
        initial: Vec<f64>,
    ) -> Result<Self> {
        if transitions.len() != states * actions * states || reward.len() != states * actions {
            return Err(Error::dim("transition or reward table has the wrong size"));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::invalid(format!("discount {gamma} outside [0, 1)")));
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::invalid("rewards must be finite"));
        }
        if initial.len() != states {
            return Err(Error::dim("initial distribution must cover every state"));
        }
        Distribution::new(initial.clone()).map_err(|e| e.context("initial distribution"))?;
        let mut successors = Vec::with_capacity(states * actions);
        for sa in 0..states * actions {
            let row = &transitions[sa * states..(sa + 1) * states];
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::invalid(format!("T row {sa} has entries outside [0, 1]")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return Err(Error::invalid(format!(
                    "T(.|{},{}) sums to {total}",
                    sa / actions,
                    sa % actions
                )));
            }
            successors.push(
                row.iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(s, &p)| (s, p))
                    .collect(),
            );
        }
        Ok(Mdp {
            states,
            actions,
            transitions,
            successors,
            reward,
            gamma,
            initial,
        })
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    pub fn num_actions(&self) -> usize {
        self.actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transition(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transitions[(s * self.actions + a) * self.states + next]
    }

    /// Nonzero entries of `T(.|s,a)`.
    pub fn successors(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.successors[s * self.actions + a]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.actions + a]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    /// Same dynamics with a different reward table (`|S|·|A|`, state-major).
    pub fn with_reward(&self, reward: Vec<f64>) -> Result<Self> {
        if reward.len() != self.states * self.actions {
            return Err(Error::dim("reward must be |S| x |A|"));
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::invalid("rewards must be finite"));
        }
        Ok(Mdp { reward, ..self.clone() })
    }

    /// Same dynamics and reward from a different start distribution.
    pub fn with_initial(&self, initial: Vec<f64>) -> Result<Self> {
        if initial.len() != self.states {
            return Err(Error::dim("initial distribution must cover every state"));
        }
        Distribution::new(initial.clone())?;
        Ok(Mdp {
            initial,
            ..self.clone()
        })
    }

    fn q_value(&self, s: usize, a: usize, values: &[f64]) -> f64 {
        self.reward(s, a) + self.gamma * self.successors(s, a).iter().map(|&(n, p)| p * values[n]).sum::<f64>()
    }
}

/// Stationary stochastic policy `Pr(a|s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    states: usize,
    actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let states = rows.len();
        if states == 0 {
            return Err(Error::invalid("policy needs at least one state"));
        }
        let actions = rows[0].len();
        for (s, row) in rows.iter().enumerate() {
            if row.len() != actions {
                return Err(Error::dim("policy rows differ in length"));
            }
            Distribution::new(row.clone()).map_err(|e| e.context(format!("policy row {s}")))?;
        }
        Ok(Policy {
            states,
            actions,
            probs: rows.into_iter().flatten().collect(),
        })
    }

    pub fn uniform(states: usize, actions: usize) -> Self {
        Policy {
            states,
            actions,
            probs: vec![1.0 / actions as f64; states * actions],
        }
    }

    /// Picks `choice[s]` with probability one.
    pub fn deterministic(choice: &[usize], actions: usize) -> Self {
        let mut probs = vec![0.0; choice.len() * actions];
        for (s, &a) in choice.iter().enumerate() {
            probs[s * actions + a] = 1.0;
        }
        Policy {
            states: choice.len(),
            actions,
            probs,
        }
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.actions..(s + 1) * self.actions]
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    pub fn num_actions(&self) -> usize {
        self.actions
    }

    fn check(&self, mdp: &Mdp) -> Result<()> {
        if self.states != mdp.states || self.actions != mdp.actions {
            return Err(Error::dim("policy does not match the MDP"));
        }
        Ok(())
    }
}

/// Time-indexed stochastic policy `π_t(a|s)` over a fixed horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedPolicy {
    steps: Vec<Policy>,
}

impl TimedPolicy {
    pub fn new(steps: Vec<Policy>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::invalid("timed policy needs at least one step"));
        }
        let (s, a) = (steps[0].states, steps[0].actions);
        if steps.iter().any(|p| p.states != s || p.actions != a) {
            return Err(Error::dim("timed policy steps differ in shape"));
        }
        Ok(TimedPolicy { steps })
    }

    /// The same stationary policy at every step.
    pub fn stationary(policy: Policy, horizon: usize) -> Self {
        TimedPolicy {
            steps: vec![policy; horizon.max(1)],
        }
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn at(&self, t: usize) -> &Policy {
        &self.steps[t]
    }

    pub fn steps(&self) -> &[Policy] {
        &self.steps
    }
}

/// Ordered `(state, action)` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    steps: Vec<(usize, usize)>,
}

impl Trajectory {
    pub fn new(steps: Vec<(usize, usize)>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::invalid("trajectory must be nonempty"));
        }
        Ok(Trajectory { steps })
    }

    pub fn steps(&self) -> &[(usize, usize)] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = usize> + '_ {
        self.steps.iter().map(|&(s, _)| s)
    }

    pub fn validate(&self, mdp: &Mdp) -> Result<()> {
        if self
            .steps
            .iter()
            .any(|&(s, a)| s >= mdp.num_states() || a >= mdp.num_actions())
        {
            return Err(Error::invalid("trajectory indices out of range"));
        }
        Ok(())
    }
}

pub type ValueFunction = Vec<f64>;

/// Greedy action with ties (up to rounding) resolved to the lowest index.
fn greedy(q: &[f64]) -> usize {
    let mut best = 0;
    for a in 1..q.len() {
        let tie = 1e-10 * q[best].abs().max(1.0);
        if q[a] > q[best] + tie {
            best = a;
        }
    }
    best
}

/// Optimal values and a greedy deterministic policy, iterated until the
/// Bellman residual is at most `tolerance`.
pub fn value_iteration(mdp: &Mdp, tolerance: f64) -> Result<(ValueFunction, Policy)> {
    if !(tolerance > 0.0) {
        return Err(Error::invalid("tolerance must be > 0"));
    }
    let (n, m) = (mdp.num_states(), mdp.num_actions());
    let mut v = vec![0.0; n];
    loop {
        let next: Vec<f64> = (0..n)
            .map(|s| (0..m).map(|a| mdp.q_value(s, a, &v)).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let residual = crate::math::max_abs_diff(&next, &v);
        v = next;
        if residual <= tolerance {
            break;
        }
    }
    let choice: Vec<usize> = (0..n)
        .map(|s| greedy(&(0..m).map(|a| mdp.q_value(s, a, &v)).collect::<Vec<_>>()))
        .collect();
    Ok((v, Policy::deterministic(&choice, m)))
}

/// `V^π` as the fixed point of the policy Bellman operator.
pub fn policy_evaluation(mdp: &Mdp, policy: &Policy, tolerance: f64) -> Result<ValueFunction> {
    policy.check(mdp)?;
    if !(tolerance > 0.0) {
        return Err(Error::invalid("tolerance must be > 0"));
    }
    let (n, m) = (mdp.num_states(), mdp.num_actions());
    let mut v = vec![0.0; n];
    loop {
        let next: Vec<f64> = (0..n)
            .map(|s| {
                (0..m)
                    .filter(|&a| policy.prob(s, a) > 0.0)
                    .map(|a| policy.prob(s, a) * mdp.q_value(s, a, &v))
                    .sum()
            })
            .collect();
        let residual = crate::math::max_abs_diff(&next, &v);
        v = next;
        if residual <= tolerance {
            return Ok(v);
        }
    }
}

fn sample_index<R: Rng>(rng: &mut R, probs: impl Iterator<Item = (usize, f64)>) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Rolls out one trajectory of `horizon` steps from `S0`.
pub fn sample_trajectory_with<R: Rng>(mdp: &Mdp, policy: &TimedPolicy, rng: &mut R) -> Trajectory {
    let mut s = sample_index(rng, mdp.initial().iter().copied().enumerate());
    let mut steps = Vec::with_capacity(policy.horizon());
    for t in 0..policy.horizon() {
        let pi = policy.at(t);
        let a = sample_index(rng, pi.row(s).iter().copied().enumerate());
        steps.push((s, a));
        s = sample_index(rng, mdp.successors(s, a).iter().copied());
    }
    Trajectory { steps }
}

/// Seeded single rollout of a stationary policy.
pub fn sample_trajectory(mdp: &Mdp, policy: &Policy, horizon: usize, seed: u64) -> Result<Trajectory> {
    policy.check(mdp)?;
    if horizon == 0 {
        return Err(Error::invalid("horizon must be >= 1"));
    }
    let timed = TimedPolicy::stationary(policy.clone(), horizon);
    Ok(sample_trajectory_with(mdp, &timed, &mut crate::seed::rng(seed)))
}

/// Per-timestep state-action occupancy `D_t(s, a)` propagated from `S0`.
pub fn occupancy(mdp: &Mdp, policy: &TimedPolicy) -> Vec<Vec<f64>> {
    let (n, m) = (mdp.num_states(), mdp.num_actions());
    let mut state = mdp.initial().to_vec();
    let mut out = Vec::with_capacity(policy.horizon());
    for t in 0..policy.horizon() {
        let pi = policy.at(t);
        let mut d = vec![0.0; n * m];
        let mut next = vec![0.0; n];
        for s in 0..n {
            if state[s] == 0.0 {
                continue;
            }
            for a in 0..m {
                let mass = state[s] * pi.prob(s, a);
                d[s * m + a] = mass;
                if mass > 0.0 {
                    for &(s2, p) in mdp.successors(s, a) {
                        next[s2] += mass * p;
                    }
                }
            }
        }
        out.push(d);
        state = next;
    }
    out
}

/// `‖V^{expert} − V^{learned}‖₁`, both evaluated under the MDP's own (true) reward.
pub fn ile(mdp: &Mdp, expert: &Policy, learned: &Policy, tolerance: f64) -> Result<f64> {
    let ve = policy_evaluation(mdp, expert, tolerance)?;
    let vl = policy_evaluation(mdp, learned, tolerance)?;
    Ok(ve.iter().zip(&vl).map(|(a, b)| (a - b).abs()).sum())
}
