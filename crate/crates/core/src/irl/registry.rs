//! Named IRL learners selectable at runtime.

use super::{
    chiddendataem_irl, maxcausalent_irl, maxcausalent_partial, ml_decode_trajectories, umaxcausalent_irl, woerr_filter,
    DecodeRule, IrlConfig, IrlResult, ObservationSequence, RewardFeatures, StepChannel,
};
use crate::mdp::{Mdp, Trajectory};
use crate::{Error, Result};

/// Everything a learner may consult besides the data.
#[derive(Debug, Clone, Copy)]
pub struct IrlProblem<'a> {
    pub mdp: &'a Mdp,
    pub features: &'a RewardFeatures,
    pub channel: &'a StepChannel,
    /// Decoding of the special symbol for the ML baseline. WOERR and
    /// cHiddenDataEM drop the same symbol to MISSING instead.
    pub rule: DecodeRule,
    pub config: &'a IrlConfig,
}

/// True trajectories alongside what the observer saw of them.
#[derive(Debug, Clone, Default)]
pub struct Demonstrations {
    pub trajectories: Vec<Trajectory>,
    pub observations: Vec<ObservationSequence>,
}

impl Demonstrations {
    /// The first `n` demonstrations.
    pub fn prefix(&self, n: usize) -> Demonstrations {
        Demonstrations {
            trajectories: self.trajectories.iter().take(n).cloned().collect(),
            observations: self.observations.iter().take(n).cloned().collect(),
        }
    }
}

pub trait IrlAlgorithm: Send + Sync {
    fn name(&self) -> &'static str;
    fn learn(&self, problem: &IrlProblem<'_>, demos: &Demonstrations) -> Result<IrlResult>;
}

/// Control with access to the true trajectories.
pub struct TrueControl;

impl IrlAlgorithm for TrueControl {
    fn name(&self) -> &'static str {
        "TRUE"
    }

    fn learn(&self, p: &IrlProblem<'_>, demos: &Demonstrations) -> Result<IrlResult> {
        maxcausalent_irl(p.mdp, p.features, &demos.trajectories, p.config)
    }
}

/// Per-step maximum-likelihood decoding, then a direct causal fit.
pub struct MlControl;

impl IrlAlgorithm for MlControl {
    fn name(&self) -> &'static str {
        "ML"
    }

    fn learn(&self, p: &IrlProblem<'_>, demos: &Demonstrations) -> Result<IrlResult> {
        let decoded = ml_decode_trajectories(&demos.observations, p.channel, p.mdp, p.rule)?;
        maxcausalent_partial(p.mdp, p.features, &decoded, p.config)
    }
}

/// Decoding with the special symbol discarded.
pub struct Woerr;

impl IrlAlgorithm for Woerr {
    fn name(&self) -> &'static str {
        "WOERR"
    }

    fn learn(&self, p: &IrlProblem<'_>, demos: &Demonstrations) -> Result<IrlResult> {
        let decoded = woerr_filter(&demos.observations, p.channel, p.mdp, p.rule.special)?;
        maxcausalent_partial(p.mdp, p.features, &decoded, p.config)
    }
}

/// Hidden-data EM over the decoded, partially missing trajectories.
pub struct HiddenDataEm;

impl IrlAlgorithm for HiddenDataEm {
    fn name(&self) -> &'static str {
        "cHiddenDataEM"
    }

    fn learn(&self, p: &IrlProblem<'_>, demos: &Demonstrations) -> Result<IrlResult> {
        let decoded = woerr_filter(&demos.observations, p.channel, p.mdp, p.rule.special)?;
        chiddendataem_irl(p.mdp, p.features, &decoded, p.config, None)
    }
}

/// EM through the full observation channel.
pub struct UMaxCausalEnt;

impl IrlAlgorithm for UMaxCausalEnt {
    fn name(&self) -> &'static str {
        "uMaxCausalEntIRL"
    }

    fn learn(&self, p: &IrlProblem<'_>, demos: &Demonstrations) -> Result<IrlResult> {
        umaxcausalent_irl(p.mdp, p.features, p.channel, &demos.observations, p.config, None)
    }
}

pub struct IrlRegistry {
    algorithms: Vec<Box<dyn IrlAlgorithm>>,
}

impl IrlRegistry {
    pub fn empty() -> Self {
        IrlRegistry { algorithms: Vec::new() }
    }

    pub fn standard() -> Self {
        let mut r = IrlRegistry::empty();
        r.register(Box::new(TrueControl));
        r.register(Box::new(MlControl));
        r.register(Box::new(Woerr));
        r.register(Box::new(HiddenDataEm));
        r.register(Box::new(UMaxCausalEnt));
        r
    }

    /// Later registrations under an existing name replace the earlier one.
    pub fn register(&mut self, algorithm: Box<dyn IrlAlgorithm>) {
        self.algorithms.retain(|a| a.name() != algorithm.name());
        self.algorithms.push(algorithm);
    }

    pub fn get(&self, name: &str) -> Option<&dyn IrlAlgorithm> {
        self.algorithms
            .iter()
            .find(|a| a.name().eq_ignore_ascii_case(name))
            .map(|b| b.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.algorithms.iter().map(|a| a.name()).collect()
    }

    /// Keeps only the named algorithms, in the order given.
    pub fn select(mut self, names: &[String]) -> Result<Self> {
        let mut picked = Vec::with_capacity(names.len());
        for name in names {
            let pos = self
                .algorithms
                .iter()
                .position(|a| a.name().eq_ignore_ascii_case(name))
                .ok_or_else(|| Error::invalid(format!("unknown algorithm {name:?}; known: {:?}", self.names())))?;
            picked.push(self.algorithms.remove(pos));
        }
        Ok(IrlRegistry { algorithms: picked })
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn IrlAlgorithm> {
        self.algorithms.iter().map(|b| b.as_ref())
    }
}
