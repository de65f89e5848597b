//! Planning on a fully known game: Stackelberg value iteration.
//!
//! One backup builds, for every non-terminal state, the Bayesian stage game
//! of one-step lookahead Q-values and replaces the state's values with its
//! strong Stackelberg equilibrium values. Iterating from zero values
//! approaches the game's SSE fixed point.

use crate::game::{build_stage_game, GameSpec, QTables, StrategyProfile, ValueFunctions};
use crate::stage::solve_bsse;
use crate::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct Backup {
    pub q: QTables,
    pub values: ValueFunctions,
    pub profile: StrategyProfile,
}

/// One application of the Stackelberg Bellman operator to `v`.
pub fn bellman_backup(spec: &GameSpec, v: &ValueFunctions) -> Result<Backup> {
    let n = spec.n_states();
    let t = spec.n_types();
    if v.v_defender.len() != n || v.v_attacker.len() != n || v.v_attacker.iter().any(|r| r.len() != t) {
        return Err(Error::Dimension(format!(
            "values cover {} states; spec has {n} states and {t} types",
            v.v_defender.len()
        )));
    }
    let gamma = spec.discount;
    let mut q = QTables::zeros(spec);
    let mut values = ValueFunctions::zeros(n, t);
    let mut profile = StrategyProfile {
        leader: Vec::with_capacity(n),
        followers: Vec::with_capacity(n),
    };

    for s in 0..n {
        let nd = spec.n_defender_actions(s);
        if spec.is_terminal(s) {
            let mut x = vec![0.0; nd];
            x[0] = 1.0;
            profile.leader.push(x);
            profile.followers.push(vec![0; t]);
            continue;
        }
        for i in 0..t {
            let block = spec.block(s, i);
            let qd = &mut q.q_defender[s][i];
            let qa = &mut q.q_attacker[s][i];
            for d in 0..nd {
                for a in 0..spec.n_attacker_actions(s, i) {
                    let next = block.next_distribution(d, a);
                    let (mut cont_d, mut cont_a) = (0.0, 0.0);
                    for (s2, &p) in next.iter().enumerate() {
                        if p != 0.0 {
                            cont_d += p * v.v_defender[s2];
                            cont_a += p * v.v_attacker[s2][i];
                        }
                    }
                    qd[(d, a)] = block.u_defender[(d, a)] + gamma * cont_d;
                    qa[(d, a)] = block.u_attacker[(d, a)] + gamma * cont_a;
                }
            }
        }
        let sol = solve_bsse(&build_stage_game(spec, &q, s)?)?;
        values.v_defender[s] = sol.v_leader;
        values.v_attacker[s] = sol.v_followers;
        profile.leader.push(sol.x);
        profile.followers.push(sol.responses);
    }
    Ok(Backup { q, values, profile })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleSolution {
    pub profile: StrategyProfile,
    pub values: ValueFunctions,
    pub q: QTables,
    pub iterations: usize,
    pub converged: bool,
    /// Sup-norm change of the values at each iteration.
    pub history: Vec<f64>,
}

/// Iterates [`bellman_backup`] from zero values until the sup-norm change of
/// all values drops below `tol` or `max_iter` backups have run.
pub fn value_iteration(spec: &GameSpec, tol: f64, max_iter: usize) -> Result<OracleSolution> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::Config(format!("tol {tol} and max_iter {max_iter} must be positive")));
    }
    let mut values = ValueFunctions::zeros(spec.n_states(), spec.n_types());
    let mut history = Vec::new();
    loop {
        let backup = bellman_backup(spec, &values)?;
        let change = backup.values.sup_distance(&values);
        history.push(change);
        values = backup.values;
        let converged = change < tol;
        if converged || history.len() >= max_iter {
            return Ok(OracleSolution {
                profile: backup.profile,
                values,
                q: backup.q,
                iterations: history.len(),
                converged,
                history,
            });
        }
    }
}
