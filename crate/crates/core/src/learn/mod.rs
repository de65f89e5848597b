//! Bayesian Strong Stackelberg Q-learning and its baselines.
//!
//! Every agent runs the same loop: sample a start state, then repeatedly
//! sample an attacker type from θ_s, draw both actions ε-greedily, call
//! `act`, and update the defender and attacker Q-tables of the cell that
//! was played. Agents differ only in how they turn the Q-tables of the
//! visited state into a defender strategy:
//!
//! | agent   | defender strategy                          | attacker            |
//! |---------|--------------------------------------------|---------------------|
//! | `bssq`  | Bayesian strong Stackelberg stage solution | stage responses     |
//! | `nashq` | Nash equilibrium of the stage bimatrix     | equilibrium mixture |
//! | `bexpq` | exponential weights on type-weighted gains | best response       |
//! | `urs`   | uniform, fixed                             | best response       |
//! | `sopt`  | one state-agnostic commitment, fixed       | best response       |
//!
//! Learners only see an [`Environment`]; none of them can read the game.

mod engine;
mod policy;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::game::{QTables, StrategyProfile, ValueFunctions};
use crate::stage::best_response;
use crate::{Error, Matrix, Result};

pub use engine::{Learner, StepRecord};
pub use policy::{evaluate_policy, sopt_policy, urs_policy, EVAL_HORIZON};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agent {
    Bssq,
    Bexpq,
    Urs,
    Nashq,
    Sopt,
}

impl Agent {
    pub const ALL: [Agent; 5] = [Agent::Bssq, Agent::Bexpq, Agent::Urs, Agent::Nashq, Agent::Sopt];

    pub fn name(self) -> &'static str {
        match self {
            Agent::Bssq => "bssq",
            Agent::Bexpq => "bexpq",
            Agent::Urs => "urs",
            Agent::Nashq => "nashq",
            Agent::Sopt => "sopt",
        }
    }
}

impl fmt::Display for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Agent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Agent::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown agent {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaSchedule {
    #[default]
    Constant,
    /// `alpha / (1 + k * n)` where `n` counts earlier updates of the same cell.
    VisitDecay { k: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub agent: Agent,
    pub episodes: usize,
    pub max_episode_len: usize,
    pub alpha: f64,
    pub alpha_schedule: AlphaSchedule,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub seed: u64,
    /// Keep a per-step record of the run.
    pub trace: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            agent: Agent::Bssq,
            episodes: 300,
            max_episode_len: 10,
            alpha: 0.06,
            alpha_schedule: AlphaSchedule::Constant,
            gamma: 0.8,
            epsilon_start: 0.1,
            epsilon_end: 0.05,
            seed: 0,
            trace: false,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail(format!("alpha out of [0,1]: {}", self.alpha));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return fail(format!("gamma out of [0,1): {}", self.gamma));
        }
        if !(0.0 <= self.epsilon_end && self.epsilon_end <= self.epsilon_start && self.epsilon_start <= 1.0) {
            return fail(format!(
                "need 0 <= epsilon_end <= epsilon_start <= 1, got {} and {}",
                self.epsilon_end, self.epsilon_start
            ));
        }
        if self.episodes == 0 || self.max_episode_len == 0 {
            return fail("episodes and max_episode_len must be at least 1".into());
        }
        if let AlphaSchedule::VisitDecay { k } = self.alpha_schedule {
            if !(k.is_finite() && k >= 0.0) {
                return fail(format!("alpha decay rate must be nonnegative, got {k}"));
            }
        }
        Ok(())
    }

    /// Exploration rate in `episode`: linear from start to end over the
    /// first half of the run, then flat.
    pub fn epsilon(&self, episode: usize) -> f64 {
        let half = (self.episodes as f64 / 2.0).max(1.0);
        let t = (episode as f64 / half).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * t
    }
}

/// What a learning run records after every episode.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LearningCurve {
    pub states: Vec<String>,
    pub terminal: Vec<bool>,
    /// `values[episode][state]`: the defender's value estimate.
    pub values: Vec<Vec<f64>>,
    /// `strategies[episode][state]`: the defender strategy.
    pub strategies: Vec<Vec<Vec<f64>>>,
    /// The first episode in which each state was acted in.
    pub first_visit: Vec<Option<usize>>,
    pub steps: usize,
    pub trace: Vec<StepRecord>,
}

impl LearningCurve {
    pub fn final_values(&self) -> Option<&[f64]> {
        self.values.last().map(Vec::as_slice)
    }
}

#[derive(Clone, Debug)]
pub struct LearnOutcome {
    pub profile: StrategyProfile,
    pub q: QTables,
    pub values: ValueFunctions,
    pub curve: LearningCurve,
}

/// The temporal-difference update of one Q cell.
pub fn q_update(q_old: f64, r: f64, v_next: f64, alpha: f64, gamma: f64) -> f64 {
    (1.0 - alpha) * q_old + alpha * (r + gamma * v_next)
}

pub(crate) fn epsilon_greedy_draw<R: Rng + ?Sized>(x: &[f64], eps: f64, rng: &mut R) -> (usize, bool) {
    let u: f64 = rng.gen();
    let v: f64 = rng.gen();
    if u < eps {
        (((v * x.len() as f64) as usize).min(x.len() - 1), true)
    } else {
        (crate::env::sample_index(x, v), false)
    }
}

/// Uniform over all actions with probability `eps`, otherwise a draw from
/// `x`. Consumes exactly two uniform variates.
pub fn epsilon_greedy_sample<R: Rng + ?Sized>(x: &[f64], eps: f64, rng: &mut R) -> usize {
    epsilon_greedy_draw(x, eps, rng).0
}

/// The attacker action with the highest expected Q-value against `x`;
/// ties go to the smallest index.
pub fn attacker_best_response(q_attacker: &Matrix, x: &[f64]) -> Result<usize> {
    best_response(q_attacker, x).map(|(a, _)| a)
}

/// Per-state action counts as advertised by the environment.
pub fn env_action_counts<E: Environment + ?Sized>(env: &E) -> Result<Vec<(usize, Vec<usize>)>> {
    (0..env.get_states().len())
        .map(|s| {
            let acts = env.get_actions(s)?;
            Ok((acts.defender.len(), acts.attacker.iter().map(Vec::len).collect()))
        })
        .collect()
}

fn run<E: Environment>(learner: Learner<E>) -> Result<LearnOutcome> {
    learner.run()
}

pub fn bssq_learn<E: Environment>(env: E, cfg: &LearnerConfig) -> Result<LearnOutcome> {
    run(Learner::new(env, &LearnerConfig { agent: Agent::Bssq, ..cfg.clone() })?)
}

pub fn bexpq_learn<E: Environment>(env: E, cfg: &LearnerConfig) -> Result<LearnOutcome> {
    run(Learner::new(env, &LearnerConfig { agent: Agent::Bexpq, ..cfg.clone() })?)
}

pub fn nashq_learn<E: Environment>(env: E, cfg: &LearnerConfig) -> Result<LearnOutcome> {
    run(Learner::new(env, &LearnerConfig { agent: Agent::Nashq, ..cfg.clone() })?)
}

pub fn urs_learn<E: Environment>(env: E, cfg: &LearnerConfig) -> Result<LearnOutcome> {
    run(Learner::new(env, &LearnerConfig { agent: Agent::Urs, ..cfg.clone() })?)
}

/// Plays a fixed S-OPT commitment (see [`sopt_policy`]) while the Q-tables
/// learn its value.
pub fn sopt_learn<E: Environment>(env: E, cfg: &LearnerConfig, x: Vec<Vec<f64>>) -> Result<LearnOutcome> {
    run(Learner::with_fixed_strategy(env, &LearnerConfig { agent: Agent::Sopt, ..cfg.clone() }, x)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn q_update_arithmetic() {
        assert!((q_update(0.0, -2.0, -1.0, 0.06, 0.8) - -0.168).abs() < 1e-15);
        assert_eq!(q_update(3.0, 7.0, 100.0, 1.0, 0.0), 7.0);
        assert!((q_update(2.5, 9.0, 9.0, 1e-12, 0.8) - 2.5).abs() < 1e-10);
    }

    #[test]
    fn greedy_without_exploration() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..1000).all(|_| epsilon_greedy_sample(&[1.0, 0.0, 0.0], 0.0, &mut rng) == 0));
    }

    #[test]
    fn exploration_mixture() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let hits = (0..n).filter(|_| epsilon_greedy_sample(&[0.7, 0.3], 0.1, &mut rng) == 0).count();
        let p = 0.1 * 0.5 + 0.9 * 0.7;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - p).abs() < 3.0 * sigma);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[epsilon_greedy_sample(&[0.0, 0.0, 1.0, 0.0], 1.0, &mut rng)] += 1;
        }
        let sigma = (0.25f64 * 0.75 / n as f64).sqrt();
        assert!(counts.iter().all(|&c| (c as f64 / n as f64 - 0.25).abs() < 3.0 * sigma));
    }

    #[test]
    fn epsilon_schedule() {
        let cfg = LearnerConfig { episodes: 100, ..LearnerConfig::default() };
        assert_eq!(cfg.epsilon(0), 0.1);
        assert!((cfg.epsilon(25) - 0.075).abs() < 1e-15);
        assert_eq!(cfg.epsilon(50), 0.05);
        assert_eq!(cfg.epsilon(99), 0.05);
    }

    #[test]
    fn config_checks() {
        assert!(LearnerConfig::default().validate().is_ok());
        assert!(LearnerConfig { alpha: 0.0, ..LearnerConfig::default() }.validate().is_ok());
        assert!(LearnerConfig { gamma: 1.0, ..LearnerConfig::default() }.validate().is_err());
        assert!(LearnerConfig { epsilon_end: 0.2, ..LearnerConfig::default() }.validate().is_err());
        assert!(LearnerConfig { episodes: 0, ..LearnerConfig::default() }.validate().is_err());
        let json = r#"{"agent":"urs","alpha_schedule":{"kind":"visit_decay","k":0.5}}"#;
        let cfg: LearnerConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.agent, Agent::Urs);
        assert_eq!(cfg.alpha_schedule, AlphaSchedule::VisitDecay { k: 0.5 });
    }

    #[test]
    fn attacker_response_ties_and_scan() {
        let q = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(attacker_best_response(&q, &[0.5, 0.5]).unwrap(), 0);
        let q = Matrix::from_rows(&[vec![0.0, 2.0, 1.0], vec![3.0, 0.0, 1.0]]).unwrap();
        assert_eq!(attacker_best_response(&q, &[1.0, 0.0]).unwrap(), 1);
        assert_eq!(attacker_best_response(&q, &[0.0, 1.0]).unwrap(), 0);
        assert!(attacker_best_response(&q, &[1.0]).is_err());
    }

    #[test]
    fn agent_names() {
        for a in Agent::ALL {
            assert_eq!(a.name().parse::<Agent>().unwrap(), a);
        }
        assert!("minimax".parse::<Agent>().is_err());
    }
}
