//! Game simulators behind a narrow, gym-style public API.
//!
//! Learners only ever see the [`Environment`] trait: the state list, a
//! start-state sampler, per-state action lists, the terminal test and
//! `act`. The transition kernel and utilities stay inside [`EnvHandle`];
//! only a handle built with [`Exposure::Privileged`] hands them out, via
//! [`spec_of`].
//!
//! States are identified by their index in [`Environment::get_states`],
//! actions by their index in the lists returned by
//! [`Environment::get_actions`].

mod ids;
mod webapp;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::game::{load_spec_with_extensions, validate, GameSpec};
use crate::{Error, Result};

pub use ids::{ids_instance, make_ids_env, IdsParams};
pub use webapp::{
    make_webapp_env, switch_success_probability, threshold_spec, webapp_instance, WebAppInstance, WebAppParams,
    CONFIGURATIONS,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub r_defender: f64,
    pub r_attacker: f64,
    pub next_state: usize,
}

/// Actions available in one state: one list per attacker type, then the
/// defender's list.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSets {
    pub attacker: Vec<Vec<String>>,
    pub defender: Vec<String>,
}

/// The public simulator interface.
///
/// The five simulator calls are `get_states`, `get_start_state`,
/// `get_actions`, `is_end` and `act`. `type_distribution` exposes the
/// defender's own prior over attacker types (an input of the learning
/// algorithm, not part of the hidden dynamics) and `reseed` restarts the
/// simulator's random stream.
pub trait Environment {
    fn get_states(&self) -> Vec<String>;

    /// A start state drawn uniformly from the current start set.
    fn get_start_state(&mut self) -> usize;

    fn get_actions(&self, s: usize) -> Result<ActionSets>;

    fn is_end(&self, s: usize) -> Result<bool>;

    /// Plays one stage: the defender's action, the action of the sampled
    /// attacker type, and that type's index.
    fn act(&mut self, s: usize, a_defender: usize, a_attacker: usize, attacker_type: usize) -> Result<StepOutcome>;

    fn type_distribution(&self, s: usize) -> Result<Vec<f64>>;

    fn reseed(&mut self, seed: u64);
}

impl<E: Environment + ?Sized> Environment for &mut E {
    fn get_states(&self) -> Vec<String> {
        (**self).get_states()
    }

    fn get_start_state(&mut self) -> usize {
        (**self).get_start_state()
    }

    fn get_actions(&self, s: usize) -> Result<ActionSets> {
        (**self).get_actions(s)
    }

    fn is_end(&self, s: usize) -> Result<bool> {
        (**self).is_end(s)
    }

    fn act(&mut self, s: usize, a_defender: usize, a_attacker: usize, attacker_type: usize) -> Result<StepOutcome> {
        (**self).act(s, a_defender, a_attacker, attacker_type)
    }

    fn type_distribution(&self, s: usize) -> Result<Vec<f64>> {
        (**self).type_distribution(s)
    }

    fn reseed(&mut self, seed: u64) {
        (**self).reseed(seed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exposure {
    /// Only the simulator API is reachable.
    Public,
    /// The backing game may be read with [`spec_of`].
    Privileged,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    #[default]
    Generic,
    Webapp,
    Ids,
}

/// Web-app switching variants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Switches always succeed; their cost is part of the defender reward.
    #[default]
    Plain,
    /// Costly switches may fail and leave the system in place; costs shape
    /// transitions instead of rewards.
    Threshold,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Variant::Plain),
            "threshold" => Ok(Variant::Threshold),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

/// The optional `env` block of an instance file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvExtensions {
    #[serde(default)]
    pub domain: Domain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_override: Option<Vec<String>>,
    /// `switching_costs[from][to]`, web-app instances only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switching_costs: Option<indexmap::IndexMap<String, indexmap::IndexMap<String, f64>>>,
}

impl EnvExtensions {
    pub fn from_value(value: Option<serde_json::Value>) -> Result<Self> {
        match value {
            None => Ok(EnvExtensions::default()),
            Some(v) => serde_json::from_value(v).map_err(|e| Error::Parse(format!("env block: {e}"))),
        }
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("extensions always serialize")
    }
}

/// A simulator over a fully specified game.
#[derive(Clone, Debug)]
pub struct EnvHandle {
    spec: GameSpec,
    start_states: Vec<usize>,
    rng: ChaCha8Rng,
    exposure: Exposure,
    domain: Domain,
    variant: Option<Variant>,
}

/// Draws an index from `probs` with a single uniform variate.
pub(crate) fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // Round-off: fall back to the last index with positive mass.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

impl EnvHandle {
    /// Wraps a validated spec. The random stream starts from seed 0.
    pub fn new(spec: GameSpec, exposure: Exposure) -> Result<Self> {
        let report = validate(&spec);
        if !report.is_empty() {
            return Err(Error::Validation(report));
        }
        Ok(EnvHandle {
            start_states: spec.start_states.clone(),
            spec,
            rng: ChaCha8Rng::seed_from_u64(0),
            exposure,
            domain: Domain::Generic,
            variant: None,
        })
    }

    pub fn exposure(&self) -> Exposure {
        self.exposure
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn variant(&self) -> Option<Variant> {
        self.variant
    }

    /// Drops privileged access. There is no way back.
    pub fn into_public(mut self) -> Self {
        self.exposure = Exposure::Public;
        self
    }

    pub(crate) fn with_domain(mut self, domain: Domain, variant: Option<Variant>) -> Self {
        self.domain = domain;
        self.variant = variant;
        self
    }

    /// Replaces the set of start states by name.
    pub fn override_start_states<S: AsRef<str>>(&mut self, names: &[S]) -> Result<()> {
        if names.is_empty() {
            return Err(Error::Config("start state override is empty".into()));
        }
        let mut idx = Vec::with_capacity(names.len());
        for name in names {
            let s = self.spec.state_index(name.as_ref())?;
            if self.spec.is_terminal(s) {
                return Err(Error::Config(format!("start state {} is terminal", name.as_ref())));
            }
            idx.push(s);
        }
        self.start_states = idx;
        Ok(())
    }

    pub fn start_states(&self) -> &[usize] {
        &self.start_states
    }

    fn check_state(&self, s: usize) -> Result<()> {
        if s < self.spec.n_states() {
            Ok(())
        } else {
            Err(Error::UnknownState(format!("#{s}")))
        }
    }
}

impl Environment for EnvHandle {
    fn get_states(&self) -> Vec<String> {
        self.spec.states.clone()
    }

    fn get_start_state(&mut self) -> usize {
        let k = self.rng.gen_range(0..self.start_states.len());
        self.start_states[k]
    }

    fn get_actions(&self, s: usize) -> Result<ActionSets> {
        self.check_state(s)?;
        Ok(ActionSets {
            attacker: self.spec.attacker_actions[s].clone(),
            defender: self.spec.defender_actions[s].clone(),
        })
    }

    fn is_end(&self, s: usize) -> Result<bool> {
        self.check_state(s)?;
        Ok(self.spec.is_terminal(s))
    }

    fn act(&mut self, s: usize, a_defender: usize, a_attacker: usize, attacker_type: usize) -> Result<StepOutcome> {
        self.check_state(s)?;
        let name = || self.spec.states[s].clone();
        if self.spec.is_terminal(s) {
            return Err(Error::TerminalState(name()));
        }
        if attacker_type >= self.spec.n_types() {
            return Err(Error::UnknownType(attacker_type));
        }
        if a_defender >= self.spec.n_defender_actions(s) {
            return Err(Error::UnknownAction { state: name(), player: "defender".into(), action: a_defender });
        }
        if a_attacker >= self.spec.n_attacker_actions(s, attacker_type) {
            return Err(Error::UnknownAction {
                state: name(),
                player: self.spec.attacker_types[attacker_type].clone(),
                action: a_attacker,
            });
        }
        let block = self.spec.block(s, attacker_type);
        let u: f64 = self.rng.gen();
        let next_state = sample_index(block.next_distribution(a_defender, a_attacker), u);
        Ok(StepOutcome {
            r_defender: block.u_defender[(a_defender, a_attacker)],
            r_attacker: block.u_attacker[(a_defender, a_attacker)],
            next_state,
        })
    }

    fn type_distribution(&self, s: usize) -> Result<Vec<f64>> {
        self.check_state(s)?;
        Ok(self.spec.theta[s].clone())
    }

    fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }
}

/// The game an environment simulates. Refused unless the handle is privileged.
pub fn spec_of(env: &EnvHandle) -> Result<&GameSpec> {
    match env.exposure {
        Exposure::Privileged => Ok(&env.spec),
        Exposure::Public => Err(Error::Exposure),
    }
}

/// Builds the environment an instance file describes, dispatching on the
/// `domain` of its `env` block. `variant` overrides the file's web-app
/// variant.
pub fn make_env(path: impl AsRef<Path>, variant: Option<Variant>, exposure: Exposure) -> Result<EnvHandle> {
    let (spec, ext) = load_spec_with_extensions(path.as_ref())?;
    let ext = EnvExtensions::from_value(ext)?;
    match ext.domain {
        Domain::Webapp => webapp::build(spec, &ext, variant, exposure),
        Domain::Ids => ids::build(spec, &ext, exposure),
        Domain::Generic => {
            let mut env = EnvHandle::new(spec, exposure)?;
            if let Some(starts) = &ext.start_override {
                env.override_start_states(starts)?;
            }
            Ok(env)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{generate_random_bsmg, RandomSpecParams, TypeBlock};

    fn two_state_stochastic() -> GameSpec {
        let mut spec = generate_random_bsmg(&RandomSpecParams::new(2, 1, 1, vec![1], (0.0, 1.0), 4)).unwrap();
        spec.blocks[0][0] = TypeBlock {
            transitions: vec![vec![0.7, 0.3]],
            ..spec.blocks[0][0].clone()
        };
        spec
    }

    #[test]
    fn deterministic_cell_lookup() {
        let spec = GameSpec::single_state(1.5, -2.0, 0.8);
        let mut env = EnvHandle::new(spec, Exposure::Public).unwrap();
        let out = env.act(0, 0, 0, 0).unwrap();
        assert_eq!(out, StepOutcome { r_defender: 1.5, r_attacker: -2.0, next_state: 0 });
    }

    #[test]
    fn stochastic_cell_frequencies() {
        let mut env = EnvHandle::new(two_state_stochastic(), Exposure::Public).unwrap();
        env.reseed(17);
        let n = 10_000;
        let hits = (0..n).filter(|_| env.act(0, 0, 0, 0).unwrap().next_state == 0).count();
        let sigma = (0.7f64 * 0.3 / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - 0.7).abs() < 3.0 * sigma);
    }

    #[test]
    fn protocol_errors() {
        let mut spec = two_state_stochastic();
        spec.terminal_states = vec![1];
        spec.start_states = vec![0];
        let mut env = EnvHandle::new(spec, Exposure::Public).unwrap();
        assert!(matches!(env.act(5, 0, 0, 0), Err(Error::UnknownState(_))));
        assert!(matches!(env.act(0, 1, 0, 0), Err(Error::UnknownAction { .. })));
        assert!(matches!(env.act(0, 0, 3, 0), Err(Error::UnknownAction { .. })));
        assert!(matches!(env.act(0, 0, 0, 2), Err(Error::UnknownType(2))));
        assert!(matches!(env.act(1, 0, 0, 0), Err(Error::TerminalState(_))));
        assert!(matches!(env.is_end(2), Err(Error::UnknownState(_))));
        assert!(env.is_end(1).unwrap());
    }

    #[test]
    fn firewall() {
        let spec = GameSpec::single_state(1.0, 0.0, 0.8);
        let privileged = EnvHandle::new(spec.clone(), Exposure::Privileged).unwrap();
        assert_eq!(spec_of(&privileged).unwrap(), &spec);
        let public = privileged.into_public();
        assert!(matches!(spec_of(&public), Err(Error::Exposure)));
    }

    #[test]
    fn same_seed_same_trajectory() {
        let spec = generate_random_bsmg(&RandomSpecParams::new(4, 2, 2, vec![2], (0.0, 1.0), 8)).unwrap();
        let run = |seed| {
            let mut env = EnvHandle::new(spec.clone(), Exposure::Public).unwrap();
            env.reseed(seed);
            let mut s = env.get_start_state();
            let mut path = vec![s];
            for k in 0..50 {
                s = env.act(s, k % 2, (k / 2) % 2, k % 2).unwrap().next_state;
                path.push(s);
            }
            path
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn sample_index_edges() {
        assert_eq!(sample_index(&[0.5, 0.5], 0.0), 0);
        assert_eq!(sample_index(&[0.5, 0.5], 0.75), 1);
        assert_eq!(sample_index(&[0.3, 0.7, 0.0], 0.9999999999999999), 1);
    }
}
