//! Moving-target defense of a web application.
//!
//! The system runs in one of four (language, database) configurations. A
//! state is the configuration currently deployed and a defender action is
//! the configuration to deploy next. Attacker types hold exploits against
//! individual technologies; an exploit hits whenever the deployed
//! configuration contains its technology.

use std::path::Path;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Domain, EnvExtensions, EnvHandle, Exposure, Variant};
use crate::game::{load_spec_with_extensions, GameSpec, TypeBlock};
use crate::Matrix;
use crate::{Error, Result};

pub const CONFIGURATIONS: [&str; 4] = ["(py, MySQL)", "(py, PostgreSQL)", "(Php, MySQL)", "(Php, PostgreSQL)"];

const TECHNOLOGIES: [&str; 4] = ["py", "Php", "MySQL", "PostgreSQL"];
const TYPE_NAMES: [&str; 3] = ["database hacker", "script kiddie", "mainstream hacker"];
const TYPE_PREFIX: [&str; 3] = ["dbh", "skd", "mnh"];

fn uses_technology(config: usize, tech: usize) -> bool {
    tech == config / 2 || tech == 2 + config % 2
}

fn default_switching_cost(from: usize, to: usize) -> f64 {
    let lang = if from / 2 != to / 2 { 2.0 } else { 0.0 };
    let db = if from % 2 != to % 2 { 1.0 } else { 0.0 };
    lang + db
}

#[derive(Clone, Debug)]
pub struct WebAppParams {
    /// Exploit count per attacker type.
    pub attacker_counts: Vec<usize>,
    pub theta: Vec<f64>,
    pub discount: f64,
    pub cost_max: f64,
    pub seed: u64,
}

impl WebAppParams {
    pub fn desk(seed: u64) -> Self {
        WebAppParams {
            attacker_counts: vec![8, 4, 5],
            theta: vec![0.3, 0.3, 0.4],
            discount: 0.8,
            cost_max: 4.0,
            seed,
        }
    }

    pub fn full(seed: u64) -> Self {
        WebAppParams { attacker_counts: vec![269, 34, 48], ..WebAppParams::desk(seed) }
    }
}

/// A generated instance together with the tables it was built from.
#[derive(Clone, Debug)]
pub struct WebAppInstance {
    pub spec: GameSpec,
    pub extensions: EnvExtensions,
    /// `impact[i][a]`: the impact score of exploit `a` of type `i`.
    pub impact: Vec<Vec<f64>>,
    /// `technology[i][a]`: index into the technology list (py, Php, MySQL, PostgreSQL).
    pub technology: Vec<Vec<usize>>,
    /// `switching_costs[from][to]`.
    pub switching_costs: Vec<Vec<f64>>,
}

impl WebAppInstance {
    pub fn hits(&self, config: usize, attacker_type: usize, a: usize) -> bool {
        uses_technology(config, self.technology[attacker_type][a])
    }
}

fn draw_exploit(rng: &mut ChaCha8Rng, attacker_type: usize) -> (usize, f64) {
    let (db_bias, lo, hi) = match attacker_type {
        0 => (0.8, 5.0, 10.0),
        1 => (0.5, 1.0, 5.0),
        _ => (0.3, 3.0, 9.0),
    };
    let tech = if rng.gen_bool(db_bias) { 2 + rng.gen_range(0..2) } else { rng.gen_range(0..2) };
    let impact: f64 = rng.gen_range(lo..hi);
    (tech, (impact * 10.0).round() / 10.0)
}

/// A synthetic web-app instance in the plain variant.
///
/// Rewards: a hit gives the attacker the exploit's impact and costs the
/// defender as much; a miss is worth nothing to either side. The defender
/// also pays the switching cost of its move, so every defender reward is
/// at most zero.
pub fn webapp_instance(params: &WebAppParams) -> Result<WebAppInstance> {
    let n_types = params.attacker_counts.len();
    if n_types == 0 || n_types > TYPE_NAMES.len() {
        return Err(Error::Config(format!("web-app instances have 1 to 3 attacker types, got {n_types}")));
    }
    if params.theta.len() != n_types {
        return Err(Error::Config("theta must have one entry per attacker type".into()));
    }
    if params.attacker_counts.contains(&0) {
        return Err(Error::Config("every attacker type needs at least one exploit".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut impact = Vec::with_capacity(n_types);
    let mut technology = Vec::with_capacity(n_types);
    let mut names = Vec::with_capacity(n_types);
    for (i, &count) in params.attacker_counts.iter().enumerate() {
        let (mut imp, mut tech, mut nm) = (Vec::new(), Vec::new(), Vec::new());
        for a in 0..count {
            let (t, v) = draw_exploit(&mut rng, i);
            imp.push(v);
            tech.push(t);
            nm.push(format!("{}-{}-{a}", TYPE_PREFIX[i], TECHNOLOGIES[t]));
        }
        impact.push(imp);
        technology.push(tech);
        names.push(nm);
    }

    let n = CONFIGURATIONS.len();
    let costs: Vec<Vec<f64>> = (0..n).map(|s| (0..n).map(|c| default_switching_cost(s, c)).collect()).collect();
    let mut blocks = Vec::with_capacity(n);
    for s in 0..n {
        let mut row = Vec::with_capacity(n_types);
        for i in 0..n_types {
            let k = params.attacker_counts[i];
            let mut block = TypeBlock::self_loop(n, k, n, s);
            block.u_defender = Matrix::from_fn(n, k, |c, a| {
                let hit = if uses_technology(c, technology[i][a]) { impact[i][a] } else { 0.0 };
                -hit - costs[s][c]
            });
            block.u_attacker =
                Matrix::from_fn(n, k, |c, a| if uses_technology(c, technology[i][a]) { impact[i][a] } else { 0.0 });
            for c in 0..n {
                for a in 0..k {
                    let next = block.next_distribution_mut(c, a);
                    next.iter_mut().for_each(|p| *p = 0.0);
                    next[c] = 1.0;
                }
            }
            row.push(block);
        }
        blocks.push(row);
    }

    let states: Vec<String> = CONFIGURATIONS.iter().map(|c| c.to_string()).collect();
    let spec = GameSpec {
        attacker_types: TYPE_NAMES[..n_types].iter().map(|t| t.to_string()).collect(),
        theta: vec![params.theta.clone(); n],
        defender_actions: vec![states.clone(); n],
        attacker_actions: vec![names; n],
        blocks,
        discount: params.discount,
        start_states: (0..n).collect(),
        terminal_states: Vec::new(),
        states,
    };
    let mut table = IndexMap::new();
    for (s, from) in CONFIGURATIONS.iter().enumerate() {
        let row: IndexMap<String, f64> = CONFIGURATIONS.iter().enumerate().map(|(c, to)| (to.to_string(), costs[s][c])).collect();
        table.insert(from.to_string(), row);
    }
    let extensions = EnvExtensions {
        domain: Domain::Webapp,
        cost_max: Some(params.cost_max),
        variant: Some(Variant::Plain),
        start_override: None,
        switching_costs: Some(table),
    };
    Ok(WebAppInstance { spec, extensions, impact, technology, switching_costs: costs })
}

/// Probability that a switch of the given cost goes through.
pub fn switch_success_probability(cost: f64, cost_max: f64) -> f64 {
    1.0 - (cost / cost_max).min(1.0)
}

fn structure_error(msg: impl Into<String>) -> Error {
    Error::Structure(msg.into())
}

/// Reads the switching-cost table into `[from][to]` order, checking the
/// configuration structure of `spec` on the way.
fn switching_table(spec: &GameSpec, ext: &EnvExtensions) -> Result<Vec<Vec<f64>>> {
    let n = spec.n_states();
    if n != CONFIGURATIONS.len() {
        return Err(structure_error(format!("web-app instances have 4 states, found {n}")));
    }
    if !spec.terminal_states.is_empty() {
        return Err(structure_error("web-app instances have no terminal state"));
    }
    for s in 0..n {
        if spec.defender_actions[s] != spec.states {
            return Err(structure_error(format!(
                "defender actions in {} must be the configurations in state order",
                spec.states[s]
            )));
        }
        for i in 0..spec.n_types() {
            let block = spec.block(s, i);
            for c in 0..n {
                for a in 0..spec.n_attacker_actions(s, i) {
                    if block.next_distribution(c, a)[c] != 1.0 {
                        return Err(structure_error(format!(
                            "switch from {} to {} is not deterministic",
                            spec.states[s], spec.states[c]
                        )));
                    }
                }
            }
        }
    }
    let table = ext.switching_costs.as_ref().ok_or_else(|| structure_error("missing switching_costs"))?;
    let mut costs = vec![vec![0.0; n]; n];
    for (s, from) in spec.states.iter().enumerate() {
        let row = table.get(from).ok_or_else(|| structure_error(format!("no switching costs from {from}")))?;
        for (c, to) in spec.states.iter().enumerate() {
            let v = *row.get(to).ok_or_else(|| structure_error(format!("no switching cost {from} -> {to}")))?;
            if !(v.is_finite() && v >= 0.0) || (s == c && v != 0.0) {
                return Err(structure_error(format!("bad switching cost {from} -> {to}: {v}")));
            }
            costs[s][c] = v;
        }
    }
    Ok(costs)
}

/// The threshold variant of a plain web-app game.
///
/// A switch from `s` to `c` succeeds with probability
/// [`switch_success_probability`] and otherwise leaves the system in `s`.
/// Rewards drop the switching cost and become the expected attack outcome
/// over where the system ends up.
pub fn threshold_spec(plain: &GameSpec, costs: &[Vec<f64>], cost_max: f64) -> Result<GameSpec> {
    if !(cost_max.is_finite() && cost_max > 0.0) {
        return Err(structure_error(format!("cost_max must be positive, got {cost_max}")));
    }
    let mut spec = plain.clone();
    for s in 0..spec.n_states() {
        for i in 0..spec.n_types() {
            let src = plain.block(s, i);
            let dst = &mut spec.blocks[s][i];
            for c in 0..spec.defender_actions[s].len() {
                let p = switch_success_probability(costs[s][c], cost_max);
                for a in 0..src.u_defender.cols() {
                    let moved_d = src.u_defender[(c, a)] + costs[s][c];
                    let stayed_d = src.u_defender[(s, a)];
                    dst.u_defender[(c, a)] = p * moved_d + (1.0 - p) * stayed_d;
                    dst.u_attacker[(c, a)] = p * src.u_attacker[(c, a)] + (1.0 - p) * src.u_attacker[(s, a)];
                    let next = dst.next_distribution_mut(c, a);
                    next.iter_mut().for_each(|q| *q = 0.0);
                    next[c] += p;
                    next[s] += 1.0 - p;
                }
            }
        }
    }
    Ok(spec)
}

pub(super) fn build(spec: GameSpec, ext: &EnvExtensions, variant: Option<Variant>, exposure: Exposure) -> Result<EnvHandle> {
    let costs = switching_table(&spec, ext)?;
    let variant = variant.or(ext.variant).unwrap_or_default();
    let spec = match variant {
        Variant::Plain => spec,
        Variant::Threshold => {
            let cost_max = ext.cost_max.ok_or_else(|| structure_error("threshold variant needs cost_max"))?;
            threshold_spec(&spec, &costs, cost_max)?
        }
    };
    let mut env = EnvHandle::new(spec, exposure)?.with_domain(Domain::Webapp, Some(variant));
    if let Some(starts) = &ext.start_override {
        env.override_start_states(starts)?;
    }
    Ok(env)
}

/// Loads a web-app instance. `variant` overrides the one in the file.
pub fn make_webapp_env(path: impl AsRef<Path>, variant: Option<Variant>, exposure: Exposure) -> Result<EnvHandle> {
    let (spec, ext) = load_spec_with_extensions(path.as_ref())?;
    let ext = EnvExtensions::from_value(ext)?;
    if ext.domain != Domain::Webapp {
        return Err(structure_error("instance is not a web-app instance"));
    }
    build(spec, &ext, variant, exposure)
}
