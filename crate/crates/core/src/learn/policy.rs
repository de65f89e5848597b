use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::env_action_counts;
use crate::env::{sample_index, Environment};
use crate::game::{GameSpec, StageGame, StrategyProfile};
use crate::stage::solve_bsse;
use crate::{Error, Matrix, Result};

/// Rollout length of [`evaluate_policy`].
pub const EVAL_HORIZON: usize = 100;

/// Uniform defender strategy in every state. Attacker entries start at the
/// first action; learners overwrite them with best responses.
pub fn urs_policy<E: Environment + ?Sized>(env: &E) -> Result<StrategyProfile> {
    Ok(StrategyProfile::uniform(&env_action_counts(env)?))
}

/// The state-agnostic commitment.
///
/// One Bayesian Stackelberg game is solved whose utilities for (target
/// configuration, attack) are the per-type immediate utilities averaged
/// over the current state, with θ averaged likewise. Its strategy is played
/// in every state; attacker entries are each state's best response to it.
pub fn sopt_policy(spec: &GameSpec) -> Result<StrategyProfile> {
    let n = spec.n_states();
    let actions = &spec.defender_actions[0];
    if spec.defender_actions.iter().any(|a| a != actions) {
        return Err(Error::Structure("S-OPT needs the same defender actions in every state".into()));
    }
    if (0..n).any(|s| (0..spec.n_types()).any(|i| spec.attacker_actions[s][i] != spec.attacker_actions[0][i])) {
        return Err(Error::Structure("S-OPT needs the same attacker actions in every state".into()));
    }
    let nd = actions.len();
    let mean = |f: &dyn Fn(usize) -> f64| (0..n).map(f).sum::<f64>() / n as f64;
    let mut leader = Vec::new();
    let mut follower = Vec::new();
    for i in 0..spec.n_types() {
        let na = spec.n_attacker_actions(0, i);
        leader.push(Matrix::from_fn(nd, na, |d, a| mean(&|s| spec.block(s, i).u_defender[(d, a)])));
        follower.push(Matrix::from_fn(nd, na, |d, a| mean(&|s| spec.block(s, i).u_attacker[(d, a)])));
    }
    let theta: Vec<f64> = (0..spec.n_types()).map(|i| mean(&|s| spec.theta[s][i])).collect();
    let sol = solve_bsse(&StageGame::new(leader, follower, theta)?)?;
    let followers = (0..n)
        .map(|s| {
            (0..spec.n_types())
                .map(|i| crate::learn::attacker_best_response(&spec.block(s, i).u_attacker, &sol.x))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StrategyProfile { leader: vec![sol.x; n], followers })
}

/// Monte-Carlo estimate of the defender's discounted return from every
/// state when the defender plays `profile.leader` and each attacker type
/// plays `profile.followers`. Rollouts stop at a terminal state or after
/// [`EVAL_HORIZON`] steps; terminal states score 0.
pub fn evaluate_policy<E: Environment + ?Sized>(
    env: &mut E,
    profile: &StrategyProfile,
    gamma: f64,
    episodes: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let counts = env_action_counts(env)?;
    let n = counts.len();
    if profile.leader.len() != n || profile.followers.len() != n {
        return Err(Error::Dimension("profile does not cover the environment's states".into()));
    }
    if episodes == 0 {
        return Err(Error::Config("need at least one episode".into()));
    }
    env.reseed(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = (0..n).map(|s| env.type_distribution(s)).collect::<Result<Vec<_>>>()?;
    let mut estimates = vec![0.0; n];
    for (start, estimate) in estimates.iter_mut().enumerate() {
        if env.is_end(start)? {
            continue;
        }
        let mut total = 0.0;
        for _ in 0..episodes {
            let (mut s, mut discount, mut ret) = (start, 1.0, 0.0);
            for _ in 0..EVAL_HORIZON {
                if env.is_end(s)? {
                    break;
                }
                let i = sample_index(&theta[s], rng.gen());
                let d = sample_index(&profile.leader[s], rng.gen());
                let out = env.act(s, d, profile.followers[s][i], i)?;
                ret += discount * out.r_defender;
                discount *= gamma;
                s = out.next_state;
            }
            total += ret;
        }
        *estimate = total / episodes as f64;
    }
    Ok(estimates)
}
