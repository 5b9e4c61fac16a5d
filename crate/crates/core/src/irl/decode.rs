//! Per-step decoding baselines.

use super::{ObservationSequence, StepChannel};
use crate::math::argmax;
use crate::mdp::{Mdp, Trajectory};
use crate::{Error, Result};

/// How to turn an observation symbol into a state.
///
/// Symbols are decoded to `argmax_s Pr(ω|s)` with ties to the lowest index,
/// except for the optional `special` symbol, which is either forced to a
/// fixed state or treated as MISSING.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DecodeRule {
    pub special: Option<usize>,
    /// State for `special`; `None` means the step is MISSING.
    pub special_state: Option<usize>,
}

impl DecodeRule {
    pub fn decode(&self, channel: &StepChannel, symbol: Option<usize>) -> Option<usize> {
        let w = symbol?;
        if self.special == Some(w) {
            return self.special_state;
        }
        let column: Vec<f64> = (0..channel.num_elements()).map(|s| channel.prob(s, w)).collect();
        Some(argmax(&column))
    }
}

/// A trajectory with possibly unknown steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialTrajectory {
    steps: Vec<Option<(usize, usize)>>,
}

impl PartialTrajectory {
    pub fn new(steps: Vec<Option<(usize, usize)>>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::invalid("trajectory must be nonempty"));
        }
        Ok(PartialTrajectory { steps })
    }

    pub fn steps(&self) -> &[Option<(usize, usize)>] {
        &self.steps
    }

    pub fn states(&self) -> Vec<Option<usize>> {
        self.steps.iter().map(|s| s.map(|(s, _)| s)).collect()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The full trajectory, if no step is unknown.
    pub fn complete(&self) -> Option<Trajectory> {
        let steps: Option<Vec<_>> = self.steps.iter().copied().collect();
        Trajectory::new(steps?).ok()
    }
}

/// Action most likely to move `s` to `next`, ties to the lowest index.
fn likeliest_action(mdp: &Mdp, s: usize, next: usize) -> usize {
    let probs: Vec<f64> = (0..mdp.num_actions()).map(|a| mdp.transition(s, a, next)).collect();
    argmax(&probs)
}

/// Decodes each step independently, then fills in actions.
///
/// The action at a decoded step is the one that most likely reaches the next
/// decoded state; it is action 0 at the last step or before an unknown one.
pub fn ml_decode_trajectories(
    sequences: &[ObservationSequence],
    channel: &StepChannel,
    mdp: &Mdp,
    rule: DecodeRule,
) -> Result<Vec<PartialTrajectory>> {
    if channel.num_elements() != mdp.num_states() {
        return Err(Error::dim("channel rows must match the MDP states"));
    }
    if rule.special_state.is_some_and(|s| s >= mdp.num_states()) {
        return Err(Error::invalid("decode rule points outside the state space"));
    }
    sequences
        .iter()
        .enumerate()
        .map(|(i, seq)| {
            seq.validate(channel.num_symbols())
                .map_err(|e| e.context(format!("sequence {i}")))?;
            let states: Vec<Option<usize>> = seq.symbols().iter().map(|&w| rule.decode(channel, w)).collect();
            let steps = states
                .iter()
                .enumerate()
                .map(|(t, s)| {
                    let s = (*s)?;
                    let a = match states.get(t + 1).copied().flatten() {
                        Some(next) => likeliest_action(mdp, s, next),
                        None => 0,
                    };
                    Some((s, a))
                })
                .collect();
            PartialTrajectory::new(steps)
        })
        .collect()
}

/// Decodes with `special` dropped to MISSING.
pub fn woerr_filter(
    sequences: &[ObservationSequence],
    channel: &StepChannel,
    mdp: &Mdp,
    special: Option<usize>,
) -> Result<Vec<PartialTrajectory>> {
    ml_decode_trajectories(
        sequences,
        channel,
        mdp,
        DecodeRule {
            special,
            special_state: None,
        },
    )
}
