//! Instance files: one JSON document per game.
//!
//! Transition records that are absent default to a self-loop with
//! probability one, absent utility records to zero for both players. An
//! optional top-level `env` object carries simulator extensions and is
//! passed through untouched.

use std::collections::HashSet;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{validate, GameSpec, TypeBlock, ValidationReport, Violation};
use crate::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    states: Vec<String>,
    attacker_types: Vec<String>,
    theta: IndexMap<String, Vec<f64>>,
    defender_actions: IndexMap<String, Vec<String>>,
    attacker_actions: IndexMap<String, IndexMap<String, Vec<String>>>,
    transitions: Vec<TransitionRecord>,
    utilities: Vec<UtilityRecord>,
    discount: f64,
    start_states: Vec<String>,
    terminal_states: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    env: Option<serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionRecord {
    s: String,
    d_action: String,
    #[serde(rename = "type")]
    attacker_type: String,
    a_action: String,
    next: IndexMap<String, f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UtilityRecord {
    s: String,
    d_action: String,
    #[serde(rename = "type")]
    attacker_type: String,
    a_action: String,
    u_defender: f64,
    u_attacker: f64,
}

struct Cell {
    s: usize,
    i: usize,
    d: usize,
    a: usize,
}

fn position(list: &[String], name: &str) -> Option<usize> {
    list.iter().position(|x| x == name)
}

impl SpecFile {
    fn into_spec(self) -> Result<(GameSpec, Option<serde_json::Value>)> {
        let mut bad = Vec::new();
        let n = self.states.len();
        let t = self.attacker_types.len();

        let mut theta = Vec::with_capacity(n);
        let mut defender_actions = Vec::with_capacity(n);
        let mut attacker_actions = Vec::with_capacity(n);
        for state in &self.states {
            theta.push(self.theta.get(state).cloned().unwrap_or_else(|| {
                bad.push(Violation::UnknownReference(format!("theta has no entry for state {state}")));
                Vec::new()
            }));
            defender_actions.push(self.defender_actions.get(state).cloned().unwrap_or_default());
            let per_type = self.attacker_actions.get(state);
            attacker_actions.push(
                self.attacker_types
                    .iter()
                    .map(|ty| per_type.and_then(|m| m.get(ty)).cloned().unwrap_or_default())
                    .collect::<Vec<_>>(),
            );
        }
        for (map, what) in [
            (self.theta.keys().collect::<Vec<_>>(), "theta"),
            (self.defender_actions.keys().collect(), "defender_actions"),
            (self.attacker_actions.keys().collect(), "attacker_actions"),
        ] {
            for key in map {
                if position(&self.states, key).is_none() {
                    bad.push(Violation::UnknownReference(format!("{what} names unknown state {key}")));
                }
            }
        }
        for (state, per_type) in &self.attacker_actions {
            for ty in per_type.keys() {
                if position(&self.attacker_types, ty).is_none() {
                    bad.push(Violation::UnknownReference(format!(
                        "attacker_actions[{state}] names unknown type {ty}"
                    )));
                }
            }
        }

        let mut blocks: Vec<Vec<TypeBlock>> = (0..n)
            .map(|s| {
                (0..t)
                    .map(|i| TypeBlock::self_loop(defender_actions[s].len(), attacker_actions[s][i].len(), n, s))
                    .collect()
            })
            .collect();

        let resolve = |s: &str, d: &str, ty: &str, a: &str, bad: &mut Vec<Violation>| -> Option<Cell> {
            let describe = || format!("({s}, {d}, {ty}, {a})");
            let Some(si) = position(&self.states, s) else {
                bad.push(Violation::UnknownReference(format!("state in {}", describe())));
                return None;
            };
            let Some(i) = position(&self.attacker_types, ty) else {
                bad.push(Violation::UnknownReference(format!("type in {}", describe())));
                return None;
            };
            let Some(di) = position(&defender_actions[si], d) else {
                bad.push(Violation::UnknownReference(format!("defender action in {}", describe())));
                return None;
            };
            let Some(ai) = position(&attacker_actions[si][i], a) else {
                bad.push(Violation::UnknownReference(format!("attacker action in {}", describe())));
                return None;
            };
            Some(Cell { s: si, i, d: di, a: ai })
        };

        let mut seen = HashSet::new();
        for rec in &self.transitions {
            let Some(c) = resolve(&rec.s, &rec.d_action, &rec.attacker_type, &rec.a_action, &mut bad) else {
                continue;
            };
            if !seen.insert((c.s, c.i, c.d, c.a)) {
                bad.push(Violation::DuplicateRecord(format!(
                    "transition ({}, {}, {}, {})",
                    rec.s, rec.d_action, rec.attacker_type, rec.a_action
                )));
                continue;
            }
            let mut next = vec![0.0; n];
            for (target, &p) in &rec.next {
                match position(&self.states, target) {
                    Some(k) => next[k] += p,
                    None => bad.push(Violation::UnknownReference(format!(
                        "next state {target} in transition from {}",
                        rec.s
                    ))),
                }
            }
            *blocks[c.s][c.i].next_distribution_mut(c.d, c.a) = next;
        }

        let mut seen = HashSet::new();
        for rec in &self.utilities {
            let Some(c) = resolve(&rec.s, &rec.d_action, &rec.attacker_type, &rec.a_action, &mut bad) else {
                continue;
            };
            if !seen.insert((c.s, c.i, c.d, c.a)) {
                bad.push(Violation::DuplicateRecord(format!(
                    "utility ({}, {}, {}, {})",
                    rec.s, rec.d_action, rec.attacker_type, rec.a_action
                )));
                continue;
            }
            let block = &mut blocks[c.s][c.i];
            block.u_defender[(c.d, c.a)] = rec.u_defender;
            block.u_attacker[(c.d, c.a)] = rec.u_attacker;
        }

        let mut index_list = |names: &[String], role: &str| -> Vec<usize> {
            names
                .iter()
                .filter_map(|name| {
                    let k = position(&self.states, name);
                    if k.is_none() {
                        bad.push(Violation::UnknownReference(format!("{role} state {name}")));
                    }
                    k
                })
                .collect()
        };
        let start_states = index_list(&self.start_states, "start");
        let terminal_states = index_list(&self.terminal_states, "terminal");

        let spec = GameSpec {
            states: self.states,
            attacker_types: self.attacker_types,
            theta,
            defender_actions,
            attacker_actions,
            blocks,
            discount: self.discount,
            start_states,
            terminal_states,
        };
        bad.extend(validate(&spec).violations);
        if !bad.is_empty() {
            return Err(Error::Validation(ValidationReport { violations: bad }));
        }
        Ok((spec, self.env))
    }

    fn from_spec(spec: &GameSpec, env: Option<serde_json::Value>) -> SpecFile {
        let mut transitions = Vec::new();
        let mut utilities = Vec::new();
        for (s, state) in spec.states.iter().enumerate() {
            for (i, ty) in spec.attacker_types.iter().enumerate() {
                let block = &spec.blocks[s][i];
                for (d, d_action) in spec.defender_actions[s].iter().enumerate() {
                    for (a, a_action) in spec.attacker_actions[s][i].iter().enumerate() {
                        let next = block
                            .next_distribution(d, a)
                            .iter()
                            .enumerate()
                            .filter(|(_, &p)| p != 0.0)
                            .map(|(k, &p)| (spec.states[k].clone(), p))
                            .collect();
                        transitions.push(TransitionRecord {
                            s: state.clone(),
                            d_action: d_action.clone(),
                            attacker_type: ty.clone(),
                            a_action: a_action.clone(),
                            next,
                        });
                        utilities.push(UtilityRecord {
                            s: state.clone(),
                            d_action: d_action.clone(),
                            attacker_type: ty.clone(),
                            a_action: a_action.clone(),
                            u_defender: block.u_defender[(d, a)],
                            u_attacker: block.u_attacker[(d, a)],
                        });
                    }
                }
            }
        }
        let names = |idx: &[usize]| idx.iter().map(|&k| spec.states[k].clone()).collect();
        SpecFile {
            states: spec.states.clone(),
            attacker_types: spec.attacker_types.clone(),
            theta: spec.states.iter().cloned().zip(spec.theta.iter().cloned()).collect(),
            defender_actions: spec.states.iter().cloned().zip(spec.defender_actions.iter().cloned()).collect(),
            attacker_actions: spec
                .states
                .iter()
                .enumerate()
                .map(|(s, name)| {
                    let per_type = spec
                        .attacker_types
                        .iter()
                        .cloned()
                        .zip(spec.attacker_actions[s].iter().cloned())
                        .collect();
                    (name.clone(), per_type)
                })
                .collect(),
            transitions,
            utilities,
            discount: spec.discount,
            start_states: names(&spec.start_states),
            terminal_states: names(&spec.terminal_states),
            env,
        }
    }
}

/// Parses and validates an instance document, returning the optional `env`
/// extension block alongside the spec.
pub fn spec_from_json(text: &str) -> Result<(GameSpec, Option<serde_json::Value>)> {
    let file: SpecFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.into_spec()
}

pub fn spec_to_json(spec: &GameSpec, env: Option<&serde_json::Value>) -> String {
    let file = SpecFile::from_spec(spec, env.cloned());
    serde_json::to_string_pretty(&file).expect("instance files always serialize")
}

pub fn load_spec_with_extensions(path: impl AsRef<Path>) -> Result<(GameSpec, Option<serde_json::Value>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    spec_from_json(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Loads and validates an instance file.
pub fn load_spec(path: impl AsRef<Path>) -> Result<GameSpec> {
    load_spec_with_extensions(path).map(|(spec, _)| spec)
}

pub fn save_spec_with_extensions(
    spec: &GameSpec,
    env: Option<&serde_json::Value>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, spec_to_json(spec, env)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn save_spec(spec: &GameSpec, path: impl AsRef<Path>) -> Result<()> {
    save_spec_with_extensions(spec, None, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{generate_random_bsmg, RandomSpecParams};

    const MINIMAL: &str = r#"{
        "states": ["a", "b"],
        "attacker_types": ["t"],
        "theta": {"a": [1.0], "b": [1.0]},
        "defender_actions": {"a": ["x", "y"], "b": ["x"]},
        "attacker_actions": {"a": {"t": ["p"]}, "b": {"t": ["p"]}},
        "transitions": [{"s": "a", "d_action": "y", "type": "t", "a_action": "p", "next": {"b": 1.0}}],
        "utilities": [{"s": "a", "d_action": "x", "type": "t", "a_action": "p", "u_defender": 2.0, "u_attacker": -1.0}],
        "discount": 0.9,
        "start_states": ["a"],
        "terminal_states": ["b"]
    }"#;

    #[test]
    fn omitted_records_take_defaults() {
        let (spec, env) = spec_from_json(MINIMAL).unwrap();
        assert!(env.is_none());
        let block = spec.block(0, 0);
        assert_eq!(block.next_distribution(0, 0), &[1.0, 0.0]);
        assert_eq!(block.next_distribution(1, 0), &[0.0, 1.0]);
        assert_eq!(block.u_defender[(0, 0)], 2.0);
        assert_eq!(block.u_defender[(1, 0)], 0.0);
        assert_eq!(spec.terminal_states, vec![1]);
    }

    #[test]
    fn missing_discount_is_a_parse_error() {
        let text = MINIMAL.replace("\"discount\": 0.9,", "");
        match spec_from_json(&text) {
            Err(Error::Parse(msg)) => assert!(msg.contains("discount"), "{msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn negative_theta_is_a_validation_error() {
        let text = MINIMAL.replace("\"a\": [1.0], \"b\"", "\"a\": [-0.1], \"b\"");
        assert!(matches!(spec_from_json(&text), Err(Error::Validation(_))));
    }

    #[test]
    fn unknown_action_reference() {
        let text = MINIMAL.replace("\"d_action\": \"y\"", "\"d_action\": \"z\"");
        match spec_from_json(&text) {
            Err(Error::Validation(report)) => {
                assert!(matches!(report.violations[0], Violation::UnknownReference(_)))
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn save_then_load_file() {
        let spec = generate_random_bsmg(&RandomSpecParams::new(3, 2, 3, vec![2, 4], (-5.0, 5.0), 21)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.json");
        let env = serde_json::json!({"cost_max": 3.0});
        save_spec_with_extensions(&spec, Some(&env), &path).unwrap();
        let (back, env_back) = load_spec_with_extensions(&path).unwrap();
        assert_eq!(back, spec);
        assert_eq!(env_back, Some(env));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_spec("/nonexistent/game.json"), Err(Error::Io { .. })));
    }
}
