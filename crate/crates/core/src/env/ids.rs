//! Intrusion-detection placement on a small cloud attack graph.
//!
//! The attacker climbs from a user foothold on the directory server to
//! administrator access on the file server. In every non-terminal state
//! the defender may watch one exploit with a network or host IDS, or do
//! nothing.

use std::collections::VecDeque;
use std::path::Path;

use super::{Domain, EnvExtensions, EnvHandle, Exposure};
use crate::game::{load_spec_with_extensions, GameSpec, TypeBlock};
use crate::Matrix;
use crate::{Error, Result};

pub const NO_OP: &str = "no-op";

struct Exploit {
    name: &'static str,
    target: usize,
    exploitability: f64,
    base: f64,
}

struct Monitor {
    name: &'static str,
    watches: Option<usize>,
    cost: f64,
}

const STATES: [&str; 4] = ["ldap-user", "web-vm-root", "ftp-vm-root", "fileserver-admin"];
const TERMINAL: usize = 3;

fn exploits(s: usize) -> Vec<Exploit> {
    let e = |name, target, exploitability, base| Exploit { name, target, exploitability, base };
    match s {
        0 => vec![e("CVE-ldap-inject", 1, 3.9, 7.5), e("CVE-ftp-bof", 2, 2.8, 6.4)],
        1 => vec![e("CVE-web-privesc", 3, 3.1, 8.8), e("CVE-ssh-pivot", 2, 1.8, 5.9)],
        2 => vec![e("CVE-ftp-privesc", 3, 2.2, 9.3), e("CVE-smb-relay", 3, 1.6, 8.1)],
        _ => Vec::new(),
    }
}

fn monitors(s: usize, params: &IdsParams) -> Vec<Monitor> {
    let m = |name, watches, cost| Monitor { name, watches, cost };
    let (n, h) = (params.nids_cost, params.hids_cost);
    match s {
        0 => vec![m(NO_OP, None, 0.0), m("NIDS-ldap", Some(0), n), m("NIDS-ftp", Some(1), n)],
        1 => vec![m(NO_OP, None, 0.0), m("HIDS-web", Some(0), h), m("NIDS-ssh", Some(1), n)],
        2 => vec![m(NO_OP, None, 0.0), m("HIDS-ftp", Some(0), h), m("HIDS-smb", Some(1), h)],
        _ => vec![m(NO_OP, None, 0.0)],
    }
}

#[derive(Clone, Debug)]
pub struct IdsParams {
    pub discount: f64,
    /// Probability that an undetected exploit succeeds.
    pub success: f64,
    /// Bandwidth cost of a network IDS.
    pub nids_cost: f64,
    /// CPU and memory cost of a host IDS.
    pub hids_cost: f64,
}

impl Default for IdsParams {
    fn default() -> Self {
        IdsParams { discount: 0.8, success: 0.8, nids_cost: 0.5, hids_cost: 0.8 }
    }
}

/// The four-state IDS placement game.
///
/// A detected exploit is blocked: the attacker stays put and loses the
/// exploit's exploitability score, which the defender gains. A missed
/// exploit succeeds with probability `success`, moving the attacker along
/// the graph; both sides' expected stakes are that fraction of the base
/// score. Monitors cost the defender whatever happens.
pub fn ids_instance(params: &IdsParams) -> Result<(GameSpec, EnvExtensions)> {
    if !(0.0..=1.0).contains(&params.success) {
        return Err(Error::Config(format!("success probability out of [0,1]: {}", params.success)));
    }
    let n = STATES.len();
    let mut blocks = Vec::with_capacity(n);
    let mut defender_actions = Vec::with_capacity(n);
    let mut attacker_actions = Vec::with_capacity(n);
    for s in 0..n {
        let mons = monitors(s, params);
        let exps = exploits(s);
        defender_actions.push(mons.iter().map(|m| m.name.to_string()).collect::<Vec<_>>());
        if s == TERMINAL {
            attacker_actions.push(vec![vec!["none".to_string()]]);
            blocks.push(vec![TypeBlock::self_loop(1, 1, n, s)]);
            continue;
        }
        attacker_actions.push(vec![exps.iter().map(|e| e.name.to_string()).collect()]);
        let mut block = TypeBlock::self_loop(mons.len(), exps.len(), n, s);
        let detected = |d: usize, a: usize| mons[d].watches == Some(a);
        block.u_defender = Matrix::from_fn(mons.len(), exps.len(), |d, a| {
            let e = &exps[a];
            let stake = if detected(d, a) { e.exploitability } else { -params.success * e.base };
            stake - mons[d].cost
        });
        block.u_attacker = Matrix::from_fn(mons.len(), exps.len(), |d, a| {
            let e = &exps[a];
            if detected(d, a) {
                -e.exploitability
            } else {
                params.success * e.base
            }
        });
        for d in 0..mons.len() {
            for (a, e) in exps.iter().enumerate() {
                if !detected(d, a) {
                    let next = block.next_distribution_mut(d, a);
                    next[s] = 1.0 - params.success;
                    next[e.target] += params.success;
                }
            }
        }
        blocks.push(vec![block]);
    }
    let spec = GameSpec {
        states: STATES.iter().map(|s| s.to_string()).collect(),
        attacker_types: vec!["attacker".into()],
        theta: vec![vec![1.0]; n],
        defender_actions,
        attacker_actions,
        blocks,
        discount: params.discount,
        start_states: (0..n).filter(|&s| s != TERMINAL).collect(),
        terminal_states: vec![TERMINAL],
    };
    let ext = EnvExtensions { domain: Domain::Ids, ..EnvExtensions::default() };
    Ok((spec, ext))
}

fn check_structure(spec: &GameSpec) -> Result<()> {
    let err = |m: String| Err(Error::Structure(m));
    if spec.n_types() != 1 {
        return err(format!("IDS instances have a single attacker type, found {}", spec.n_types()));
    }
    if spec.terminal_states.len() != 1 {
        return err(format!("IDS instances have exactly one terminal state, found {}", spec.terminal_states.len()));
    }
    if let Some(s) = (0..spec.n_states()).find(|&s| !spec.defender_actions[s].iter().any(|a| a == NO_OP)) {
        return err(format!("no {NO_OP} action in state {}", spec.states[s]));
    }
    let mut seen = vec![false; spec.n_states()];
    let mut queue: VecDeque<usize> = spec.start_states.iter().copied().collect();
    for &s in &spec.start_states {
        seen[s] = true;
    }
    while let Some(s) = queue.pop_front() {
        if spec.is_terminal(s) {
            return Ok(());
        }
        for i in 0..spec.n_types() {
            for next in &spec.block(s, i).transitions {
                for (t, &p) in next.iter().enumerate() {
                    if p > 0.0 && !seen[t] {
                        seen[t] = true;
                        queue.push_back(t);
                    }
                }
            }
        }
    }
    err("terminal state unreachable from the start states".into())
}

pub(super) fn build(spec: GameSpec, ext: &EnvExtensions, exposure: Exposure) -> Result<EnvHandle> {
    check_structure(&spec)?;
    let mut env = EnvHandle::new(spec, exposure)?.with_domain(Domain::Ids, None);
    if let Some(starts) = &ext.start_override {
        env.override_start_states(starts)?;
    }
    Ok(env)
}

/// Loads an IDS instance.
pub fn make_ids_env(path: impl AsRef<Path>, exposure: Exposure) -> Result<EnvHandle> {
    let (spec, ext) = load_spec_with_extensions(path.as_ref())?;
    let ext = EnvExtensions::from_value(ext)?;
    if ext.domain != Domain::Ids {
        return Err(Error::Structure("instance is not an IDS instance".into()));
    }
    build(spec, &ext, exposure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Environment;
    use crate::game::validate;

    #[test]
    fn instance_is_valid() {
        let (spec, ext) = ids_instance(&IdsParams::default()).unwrap();
        assert!(validate(&spec).is_empty());
        let env = build(spec, &ext, Exposure::Public).unwrap();
        assert_eq!(env.get_states().len(), 4);
        assert!(env.is_end(3).unwrap());
        assert!(!env.is_end(0).unwrap());
    }

    #[test]
    fn detection_pays_the_defender() {
        let (spec, _) = ids_instance(&IdsParams::default()).unwrap();
        let b = spec.block(0, 0);
        assert!((b.u_defender[(1, 0)] - (3.9 - 0.5)).abs() < 1e-12);
        assert_eq!(b.u_attacker[(1, 0)], -3.9);
        assert_eq!(b.next_distribution(1, 0), &[1.0, 0.0, 0.0, 0.0]);
        assert!(b.u_defender[(0, 0)] < 0.0);
    }

    #[test]
    fn structure_checks() {
        let (mut spec, ext) = ids_instance(&IdsParams::default()).unwrap();
        spec.defender_actions[1][0] = "idle".into();
        assert!(matches!(build(spec, &ext, Exposure::Public), Err(Error::Structure(_))));

        let (mut spec, ext) = ids_instance(&IdsParams { success: 0.0, ..IdsParams::default() }).unwrap();
        spec.terminal_states = vec![3];
        assert!(matches!(build(spec.clone(), &ext, Exposure::Public), Err(Error::Structure(_))));
        spec.terminal_states = vec![];
        assert!(build(spec, &ext, Exposure::Public).is_err());
    }
}
