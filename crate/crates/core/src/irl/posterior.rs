//! Forward-backward smoothing over a time-indexed policy.
//!
//! Messages are rescaled at every step; the log-likelihood is the sum of the
//! log scale factors.

use super::{ObservationSequence, StepChannel};
use crate::mdp::{Mdp, TimedPolicy};
use crate::{Error, Result};

/// Per-step likelihood `e_t(s)` of whatever was observed at step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepEvidence {
    states: usize,
    values: Vec<f64>,
}

impl StepEvidence {
    /// `e_t(s) = Pr(ω_t|s)`, or 1 where the step is MISSING.
    pub fn from_channel(seq: &ObservationSequence, channel: &StepChannel) -> Result<Self> {
        seq.validate(channel.num_symbols())?;
        let n = channel.num_elements();
        let mut values = Vec::with_capacity(seq.len() * n);
        for w in seq.symbols() {
            match *w {
                Some(w) => values.extend((0..n).map(|s| channel.prob(s, w))),
                None => values.extend(std::iter::repeat_n(1.0, n)),
            }
        }
        Ok(StepEvidence { states: n, values })
    }

    /// Indicator evidence pinning each known step to one state.
    pub fn from_states(states: &[Option<usize>], n: usize) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::invalid("evidence needs at least one step"));
        }
        let mut values = Vec::with_capacity(states.len() * n);
        for s in states {
            match *s {
                Some(s) if s >= n => return Err(Error::invalid(format!("state {s} out of range"))),
                Some(s) => values.extend((0..n).map(|x| if x == s { 1.0 } else { 0.0 })),
                None => values.extend(std::iter::repeat_n(1.0, n)),
            }
        }
        Ok(StepEvidence { states: n, values })
    }

    pub fn horizon(&self) -> usize {
        self.values.len() / self.states
    }

    pub fn at(&self, t: usize) -> &[f64] {
        &self.values[t * self.states..(t + 1) * self.states]
    }
}

/// Smoothed `Pr(s_t, a_t | ω_{0..H})` for every step, state-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMarginals {
    actions: usize,
    steps: Vec<Vec<f64>>,
    log_likelihood: f64,
}

impl PosteriorMarginals {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    /// Joint marginal over `(s, a)` at step `t`, indexed `s·|A| + a`.
    pub fn at(&self, t: usize) -> &[f64] {
        &self.steps[t]
    }

    pub fn prob(&self, t: usize, s: usize, a: usize) -> f64 {
        self.steps[t][s * self.actions + a]
    }

    /// State marginal at step `t`.
    pub fn state(&self, t: usize) -> Vec<f64> {
        self.steps[t].chunks(self.actions).map(|r| r.iter().sum()).collect()
    }

    /// `ln Pr(ω_{0..H})`.
    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }
}

/// Smooths one observation sequence through the channel.
pub fn forward_backward(
    seq: &ObservationSequence,
    channel: &StepChannel,
    mdp: &Mdp,
    policy: &TimedPolicy,
) -> Result<PosteriorMarginals> {
    if channel.num_elements() != mdp.num_states() {
        return Err(Error::dim("channel rows must match the MDP states"));
    }
    forward_backward_evidence(&StepEvidence::from_channel(seq, channel)?, mdp, policy)
}

/// Smooths arbitrary per-step evidence. Fails with
/// [`Error::ImpossibleSequence`] when the evidence has zero likelihood.
pub fn forward_backward_evidence(ev: &StepEvidence, mdp: &Mdp, policy: &TimedPolicy) -> Result<PosteriorMarginals> {
    let (n, m) = (mdp.num_states(), mdp.num_actions());
    let h = ev.horizon();
    if ev.states != n {
        return Err(Error::dim("evidence does not match the MDP states"));
    }
    if policy.horizon() < h {
        return Err(Error::dim(format!(
            "policy covers {} steps, sequence has {h}",
            policy.horizon()
        )));
    }

    let mut alpha = vec![vec![0.0; n]; h];
    let mut scale = vec![0.0; h];
    for s in 0..n {
        alpha[0][s] = mdp.initial()[s] * ev.at(0)[s];
    }
    for t in 0..h {
        if t > 0 {
            let pi = policy.at(t - 1);
            let mut next = vec![0.0; n];
            for s in 0..n {
                let a_s = alpha[t - 1][s];
                if a_s == 0.0 {
                    continue;
                }
                for a in 0..m {
                    let w = a_s * pi.prob(s, a);
                    if w == 0.0 {
                        continue;
                    }
                    for &(s2, p) in mdp.successors(s, a) {
                        next[s2] += w * p;
                    }
                }
            }
            for (x, e) in next.iter_mut().zip(ev.at(t)) {
                *x *= e;
            }
            alpha[t] = next;
        }
        let c: f64 = alpha[t].iter().sum();
        if !(c > 0.0) {
            return Err(Error::ImpossibleSequence);
        }
        alpha[t].iter_mut().for_each(|x| *x /= c);
        scale[t] = c;
    }

    // beta[t][s] = Pr(ω_{t+1..} | s_t = s) / Π_{u>t} c_u
    let mut beta = vec![vec![1.0; n]; h];
    // lookahead[t][s·m + a] = Σ_s' T(s'|s,a) e_{t+1}(s') β_{t+1}(s') / c_{t+1}
    let mut lookahead = vec![vec![1.0; n * m]; h];
    for t in (0..h.saturating_sub(1)).rev() {
        let pi = policy.at(t);
        let e = ev.at(t + 1);
        for s in 0..n {
            let mut b = 0.0;
            for a in 0..m {
                let la: f64 = mdp
                    .successors(s, a)
                    .iter()
                    .map(|&(s2, p)| p * e[s2] * beta[t + 1][s2])
                    .sum::<f64>()
                    / scale[t + 1];
                lookahead[t][s * m + a] = la;
                b += pi.prob(s, a) * la;
            }
            beta[t][s] = b;
        }
    }

    let mut steps = Vec::with_capacity(h);
    for t in 0..h {
        let pi = policy.at(t);
        let mut joint = vec![0.0; n * m];
        for s in 0..n {
            for a in 0..m {
                joint[s * m + a] = alpha[t][s] * pi.prob(s, a) * lookahead[t][s * m + a];
            }
        }
        let total: f64 = joint.iter().sum();
        joint.iter_mut().for_each(|x| *x /= total);
        steps.push(joint);
    }
    Ok(PosteriorMarginals {
        actions: m,
        steps,
        log_likelihood: scale.iter().map(|c| c.ln()).sum(),
    })
}
