//! The radio-tower fugitive scenario.
//!
//! A fugitive moves on a small grid toward a safe house while a tower on the
//! west edge listens for pings. Pings get noisier with distance, and a
//! mountain shadows part of the map so pings from behind it are often missed.

use std::path::Path;
use std::str::FromStr;

use rand::distr::{weighted::WeightedIndex, Distribution as _};
use rayon::prelude::*;

use crate::irl::{
    soft_value_iteration, DecodeRule, Demonstrations, IrlAlgorithm, IrlConfig, IrlProblem, IrlRegistry,
    ObservationSequence, RewardFeatures, StepChannel,
};
use crate::lab::mean_std;
use crate::maxent::Weights;
use crate::mdp::{ile, sample_trajectory_with, value_iteration, Mdp, Policy, Trajectory};
use crate::{seed, Error, Result};

const DEFAULT_MAP: &str = include_str!("../data/fugitive.map");

/// Moves as `(dx, dy)`, with `y` growing southward: N, S, E, W.
pub const MOVES: [(isize, isize); 4] = [(0, -1), (0, 1), (1, 0), (-1, 0)];

/// Probability that an action has its intended effect.
pub const INTENDED: f64 = 0.9;

pub const DISCOUNT: f64 = 0.95;

/// A mountain shadows a cell when the tower's sight line passes this close to its center.
pub const SHADOW_RADIUS: f64 = 0.4;

#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    width: usize,
    height: usize,
    blocked: Vec<bool>,
    tower: (usize, usize),
    sh1: (usize, usize),
    sh2: (usize, usize),
    state_of: Vec<Option<usize>>,
    cells: Vec<(usize, usize)>,
}

impl GridMap {
    pub fn load(path: &Path) -> Result<Self> {
        std::fs::read_to_string(path)?
            .parse()
            .map_err(|e: Error| e.context(format!("reading map {}", path.display())))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_states(&self) -> usize {
        self.cells.len()
    }

    pub fn is_blocked(&self, x: usize, y: usize) -> bool {
        self.blocked[y * self.width + x]
    }

    pub fn state_at(&self, x: usize, y: usize) -> Option<usize> {
        self.state_of[y * self.width + x]
    }

    pub fn cell(&self, state: usize) -> (usize, usize) {
        self.cells[state]
    }

    pub fn tower(&self) -> (usize, usize) {
        self.tower
    }

    pub fn safe_house(&self) -> usize {
        self.state_at(self.sh1.0, self.sh1.1).expect("safe house is open")
    }

    pub fn decoy(&self) -> usize {
        self.state_at(self.sh2.0, self.sh2.1).expect("safe house is open")
    }

    /// Index of the "no ping received" symbol, after one symbol per state.
    pub fn miss_symbol(&self) -> usize {
        self.num_states()
    }

    fn step(&self, state: usize, mv: (isize, isize)) -> usize {
        let (x, y) = self.cells[state];
        let (nx, ny) = (x as isize + mv.0, y as isize + mv.1);
        if nx < 0 || ny < 0 || nx >= self.width as isize || ny >= self.height as isize {
            return state;
        }
        self.state_at(nx as usize, ny as usize).unwrap_or(state)
    }

    fn distance(a: (usize, usize), b: (usize, usize)) -> f64 {
        (a.0 as f64 - b.0 as f64).hypot(a.1 as f64 - b.1 as f64)
    }

    pub fn tower_distance(&self, state: usize) -> f64 {
        GridMap::distance(self.tower, self.cells[state])
    }

    /// Whether a mountain shadows the cell from the tower.
    pub fn is_occluded(&self, state: usize) -> bool {
        let (tx, ty) = (self.tower.0 as f64, self.tower.1 as f64);
        let (cx, cy) = (self.cells[state].0 as f64, self.cells[state].1 as f64);
        let (dx, dy) = (cx - tx, cy - ty);
        let len2 = dx * dx + dy * dy;
        (0..self.height).any(|y| {
            (0..self.width).any(|x| {
                if !self.is_blocked(x, y) {
                    return false;
                }
                let (px, py) = (x as f64 - tx, y as f64 - ty);
                let u = if len2 == 0.0 {
                    0.0
                } else {
                    ((px * dx + py * dy) / len2).clamp(0.0, 1.0)
                };
                (px - u * dx).hypot(py - u * dy) < SHADOW_RADIUS
            })
        })
    }
}

impl Default for GridMap {
    fn default() -> Self {
        DEFAULT_MAP.parse().expect("bundled map is valid")
    }
}

impl FromStr for GridMap {
    type Err = Error;

    /// Rows of `.` (open), `#` (blocked), `T` (tower), `1`/`2` (safe houses).
    /// Lines that are blank or start with `# ` are skipped.
    fn from_str(text: &str) -> Result<Self> {
        let mut rows: Vec<(usize, &str)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.is_empty() || line == "#" || line.starts_with("# ") {
                continue;
            }
            rows.push((i + 1, line));
        }
        let parse_err = |line, message: &str| Error::Parse {
            line,
            message: message.to_string(),
        };
        let Some(&(first_line, first)) = rows.first() else {
            return Err(parse_err(0, "map has no rows"));
        };
        let width = first.chars().count();
        let height = rows.len();
        let mut blocked = vec![false; width * height];
        let (mut tower, mut sh1, mut sh2) = (None, None, None);
        for (y, &(line, row)) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(parse_err(line, "rows differ in width"));
            }
            for (x, c) in row.chars().enumerate() {
                let slot = match c {
                    '.' => None,
                    '#' => {
                        blocked[y * width + x] = true;
                        None
                    }
                    'T' => Some(&mut tower),
                    '1' => Some(&mut sh1),
                    '2' => Some(&mut sh2),
                    other => return Err(parse_err(line, &format!("unknown map symbol {other:?}"))),
                };
                if let Some(slot) = slot {
                    if slot.replace((x, y)).is_some() {
                        return Err(parse_err(line, &format!("duplicate {c:?}")));
                    }
                }
            }
        }
        let missing = |what| parse_err(first_line, &format!("map has no {what}"));
        let tower = tower.ok_or_else(|| missing("tower"))?;
        let sh1 = sh1.ok_or_else(|| missing("safe house 1"))?;
        let sh2 = sh2.ok_or_else(|| missing("safe house 2"))?;

        let mut state_of = vec![None; width * height];
        let mut cells = Vec::new();
        for y in 0..height {
            for x in 0..width {
                if !blocked[y * width + x] {
                    state_of[y * width + x] = Some(cells.len());
                    cells.push((x, y));
                }
            }
        }
        Ok(GridMap {
            width,
            height,
            blocked,
            tower,
            sh1,
            sh2,
            state_of,
            cells,
        })
    }
}

/// Grid MDP with four noisy moves, uniform start, and reward 1 at safe house 1.
pub fn build_fugitive_mdp(map: &GridMap) -> Mdp {
    let n = map.num_states();
    let slip = (1.0 - INTENDED) / (MOVES.len() - 1) as f64;
    let transitions = (0..n)
        .map(|s| {
            (0..MOVES.len())
                .map(|a| {
                    let mut row = vec![0.0; n];
                    for (b, &mv) in MOVES.iter().enumerate() {
                        row[map.step(s, mv)] += if a == b { INTENDED } else { slip };
                    }
                    row
                })
                .collect()
        })
        .collect();
    let goal = map.safe_house();
    let reward = (0..n)
        .map(|s| vec![if s == goal { 1.0 } else { 0.0 }; MOVES.len()])
        .collect();
    Mdp::new(transitions, reward, DISCOUNT, vec![1.0 / n as f64; n]).expect("grid transitions are normalized")
}

/// Tower noise parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSetting {
    pub name: String,
    /// Gaussian spread at the tower, in cells.
    pub sigma: f64,
    pub base_miss: f64,
    /// Miss-probability factor behind the mountain.
    pub mountain_multiplier: f64,
    /// Relative growth of spread and miss rate per cell of tower distance.
    pub distance_growth: f64,
}

impl NoiseSetting {
    fn with_sigma(name: &str, sigma: f64) -> Self {
        NoiseSetting {
            name: name.to_string(),
            sigma,
            base_miss: 0.05,
            mountain_multiplier: 8.0,
            distance_growth: 0.25,
        }
    }

    pub fn low() -> Self {
        NoiseSetting::with_sigma("low", 0.5)
    }

    pub fn high() -> Self {
        NoiseSetting::with_sigma("high", 2.0)
    }

    pub fn named(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "low" => Ok(NoiseSetting::low()),
            "high" => Ok(NoiseSetting::high()),
            _ => Err(Error::invalid(format!(
                "unknown noise setting {name:?}; use low or high"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid("sigma must be positive"));
        }
        if !(0.0..=1.0).contains(&self.base_miss) {
            return Err(Error::invalid("base miss probability must lie in [0, 1]"));
        }
        if !(self.mountain_multiplier >= 1.0) || !(self.distance_growth >= 0.0) {
            return Err(Error::invalid(
                "mountain multiplier must be >= 1 and distance growth >= 0",
            ));
        }
        Ok(())
    }
}

/// `Pr(ω|s)` over one symbol per state plus the miss symbol, which comes last.
pub fn build_tower_channel(map: &GridMap, setting: &NoiseSetting) -> Result<StepChannel> {
    setting.validate()?;
    let n = map.num_states();
    let rows = (0..n)
        .map(|s| {
            let growth = 1.0 + setting.distance_growth * map.tower_distance(s);
            let mut miss = setting.base_miss * growth;
            if map.is_occluded(s) {
                miss *= setting.mountain_multiplier;
            }
            let miss = miss.clamp(0.0, 1.0);
            let sigma = setting.sigma * growth;
            let weights: Vec<f64> = (0..n)
                .map(|w| {
                    let d = GridMap::distance(map.cell(w), map.cell(s));
                    (-d * d / (2.0 * sigma * sigma)).exp()
                })
                .collect();
            let total: f64 = weights.iter().sum();
            let mut row: Vec<f64> = weights.iter().map(|w| (1.0 - miss) * w / total).collect();
            row.push(miss);
            row
        })
        .collect();
    StepChannel::from_rows(rows)
}

#[derive(Debug, Clone)]
pub struct FugitiveConfig {
    pub map: GridMap,
    pub settings: Vec<NoiseSetting>,
    /// Ascending trajectory counts; each trial samples the largest and uses prefixes.
    pub grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// The expert acts softly on the true reward times this factor.
    pub expert_scale: f64,
    pub irl: IrlConfig,
    /// Policy-evaluation tolerance for the ILE.
    pub ile_tolerance: f64,
}

impl Default for FugitiveConfig {
    fn default() -> Self {
        FugitiveConfig {
            map: GridMap::default(),
            settings: vec![NoiseSetting::low(), NoiseSetting::high()],
            grid: vec![1, 2, 4, 8, 16, 32, 64],
            trials: 50,
            seed: 0,
            expert_scale: 10.0,
            irl: IrlConfig::default(),
            ile_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IleRecord {
    pub setting: String,
    pub algorithm: String,
    pub n_trajectories: usize,
    pub trial: usize,
    /// `None` when the learner failed.
    pub ile: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IleCurvePoint {
    pub setting: String,
    pub algorithm: String,
    pub n_trajectories: usize,
    pub trials: usize,
    pub failures: usize,
    pub mean_ile: f64,
    pub std_ile: f64,
}

/// Everything fixed by the map: dynamics, features, and the expert.
pub struct FugitiveWorld {
    pub mdp: Mdp,
    pub features: RewardFeatures,
    pub expert_policy: Policy,
}

impl FugitiveWorld {
    pub fn new(map: &GridMap) -> Result<Self> {
        let mdp = build_fugitive_mdp(map);
        let features = RewardFeatures::state_indicators(mdp.num_states(), mdp.num_actions());
        let (_, expert_policy) = value_iteration(&mdp, 1e-12)?;
        Ok(FugitiveWorld {
            mdp,
            features,
            expert_policy,
        })
    }

    /// ILE of the greedy policy for a learned reward.
    pub fn score(&self, weights: &Weights, tolerance: f64) -> Result<f64> {
        let learned = self.mdp.with_reward(self.features.reward(weights.as_slice()))?;
        let (_, policy) = value_iteration(&learned, tolerance)?;
        ile(&self.mdp, &self.expert_policy, &policy, tolerance)
    }
}

fn trial_seed(master: u64, trial: usize) -> u64 {
    seed::derive(master, &[3, trial as u64])
}

fn noise_seed(master: u64, setting: usize, trial: usize) -> u64 {
    seed::derive(master, &[4, setting as u64, trial as u64])
}

/// Expert trajectories from the soft policy on the scaled true reward.
pub fn sample_expert(
    world: &FugitiveWorld,
    scale: f64,
    horizon: usize,
    count: usize,
    seed_: u64,
) -> Result<Vec<Trajectory>> {
    let goal: Vec<f64> = world
        .mdp
        .rewards()
        .iter()
        .step_by(world.mdp.num_actions())
        .map(|r| r * scale)
        .collect();
    let policy = soft_value_iteration(&world.mdp, &world.features, &Weights::new(goal)?, horizon)?;
    let mut rng = seed::rng(seed_);
    Ok((0..count)
        .map(|_| sample_trajectory_with(&world.mdp, &policy, &mut rng))
        .collect())
}

/// Passes each visited state through the channel.
pub fn observe(channel: &StepChannel, trajectories: &[Trajectory], seed_: u64) -> Result<Vec<ObservationSequence>> {
    let samplers = (0..channel.num_elements())
        .map(|s| WeightedIndex::new(channel.row(s)).map_err(|e| Error::invalid(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = seed::rng(seed_);
    trajectories
        .iter()
        .map(|t| ObservationSequence::observed(t.states().map(|s| samplers[s].sample(&mut rng)).collect()))
        .collect()
}

/// Runs every algorithm on prefixes of each trial's data, per noise setting.
///
/// `sink` receives each setting's rows, ordered by trajectory count,
/// algorithm, then trial.
pub fn run_fugitive_experiment<F>(
    config: &FugitiveConfig,
    registry: &IrlRegistry,
    mut sink: F,
) -> Result<Vec<IleCurvePoint>>
where
    F: FnMut(&[IleRecord]) -> Result<()>,
{
    config.irl.validate()?;
    if config.grid.is_empty() || config.grid[0] == 0 || config.grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(
            "trajectory grid must be positive and strictly ascending",
        ));
    }
    if config.trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let world = FugitiveWorld::new(&config.map)?;
    let largest = *config.grid.last().expect("nonempty grid");
    let experts: Vec<Vec<Trajectory>> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            sample_expert(
                &world,
                config.expert_scale,
                config.irl.horizon,
                largest,
                trial_seed(config.seed, t),
            )
        })
        .collect::<Result<_>>()?;
    let algorithms: Vec<&dyn IrlAlgorithm> = registry.iter().collect();

    let mut points = Vec::new();
    for (si, setting) in config.settings.iter().enumerate() {
        let channel = build_tower_channel(&config.map, setting)?;
        let rule = DecodeRule {
            special: Some(config.map.miss_symbol()),
            special_state: Some(config.map.decoy()),
        };
        let problem = IrlProblem {
            mdp: &world.mdp,
            features: &world.features,
            channel: &channel,
            rule,
            config: &config.irl,
        };
        let (grid_len, alg_len) = (config.grid.len(), algorithms.len());
        let jobs: Vec<(usize, usize, usize)> = (0..config.trials)
            .flat_map(|t| (0..grid_len).flat_map(move |g| (0..alg_len).map(move |a| (t, g, a))))
            .collect();
        let observed: Vec<Demonstrations> = (0..config.trials)
            .into_par_iter()
            .map(|t| {
                let nseed = noise_seed(config.seed, si, t);
                Ok(Demonstrations {
                    observations: observe(&channel, &experts[t], nseed)?,
                    trajectories: experts[t].clone(),
                })
            })
            .collect::<Result<_>>()?;
        let scores: Vec<Option<f64>> = jobs
            .par_iter()
            .map(|&(t, g, a)| {
                let data = observed[t].prefix(config.grid[g]);
                algorithms[a]
                    .learn(&problem, &data)
                    .and_then(|r| world.score(&r.weights, config.ile_tolerance))
                    .ok()
            })
            .collect();

        let per = algorithms.len() * config.grid.len();
        let mut rows = Vec::with_capacity(scores.len());
        for (g, &n) in config.grid.iter().enumerate() {
            for (a, alg) in algorithms.iter().enumerate() {
                let mut values = Vec::with_capacity(config.trials);
                for t in 0..config.trials {
                    let ile = scores[t * per + g * algorithms.len() + a];
                    values.extend(ile);
                    rows.push(IleRecord {
                        setting: setting.name.clone(),
                        algorithm: alg.name().to_string(),
                        n_trajectories: n,
                        trial: t,
                        ile,
                        seed: noise_seed(config.seed, si, t),
                    });
                }
                let (mean_ile, std_ile) = mean_std(&values);
                points.push(IleCurvePoint {
                    setting: setting.name.clone(),
                    algorithm: alg.name().to_string(),
                    n_trajectories: n,
                    trials: config.trials,
                    failures: config.trials - values.len(),
                    mean_ile,
                    std_ile,
                });
            }
        }
        sink(&rows)?;
    }
    Ok(points)
}
