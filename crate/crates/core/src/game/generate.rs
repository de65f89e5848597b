use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GameSpec, Matrix, TypeBlock};
use crate::{Error, Result};

/// Shape and seed of a randomly generated game.
#[derive(Clone, Debug)]
pub struct RandomSpecParams {
    pub n_states: usize,
    pub n_types: usize,
    pub n_def_actions: usize,
    /// Attacker action count per type; a single entry applies to every type.
    pub n_att_actions: Vec<usize>,
    pub reward_range: (f64, f64),
    pub seed: u64,
    pub discount: f64,
    /// The last `n_terminal` states become terminal.
    pub n_terminal: usize,
}

impl RandomSpecParams {
    pub fn new(
        n_states: usize,
        n_types: usize,
        n_def_actions: usize,
        n_att_actions: Vec<usize>,
        reward_range: (f64, f64),
        seed: u64,
    ) -> Self {
        RandomSpecParams {
            n_states,
            n_types,
            n_def_actions,
            n_att_actions,
            reward_range,
            seed,
            discount: 0.8,
            n_terminal: 0,
        }
    }

    pub fn with_discount(mut self, discount: f64) -> Self {
        self.discount = discount;
        self
    }

    pub fn with_terminal(mut self, n_terminal: usize) -> Self {
        self.n_terminal = n_terminal;
        self
    }

    fn attacker_count(&self, i: usize) -> usize {
        if self.n_att_actions.len() == 1 {
            self.n_att_actions[0]
        } else {
            self.n_att_actions[i]
        }
    }
}

fn positive_distribution(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// A random valid game, deterministic in `params.seed`.
///
/// Transitions and type priors are normalised positive random vectors and
/// utilities are uniform over `reward_range`. Terminal states (only if
/// requested) are absorbing; every other state is a start state.
pub fn generate_random_bsmg(params: &RandomSpecParams) -> Result<GameSpec> {
    let RandomSpecParams { n_states, n_types, n_def_actions, .. } = *params;
    let (lo, hi) = params.reward_range;
    if n_states == 0 || n_types == 0 || n_def_actions == 0 {
        return Err(Error::Config("state, type and action counts must be at least 1".into()));
    }
    if params.n_att_actions.len() != 1 && params.n_att_actions.len() != n_types {
        return Err(Error::Config(format!(
            "{} attacker action counts for {n_types} types",
            params.n_att_actions.len()
        )));
    }
    if params.n_att_actions.contains(&0) {
        return Err(Error::Config("attacker action counts must be at least 1".into()));
    }
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Config(format!("empty reward range [{lo}, {hi}]")));
    }
    if params.n_terminal >= n_states {
        return Err(Error::Config("at least one state must be non-terminal".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let uniform = |rng: &mut ChaCha8Rng| if lo == hi { lo } else { rng.gen_range(lo..hi) };

    let states: Vec<String> = (0..n_states).map(|s| format!("s{s}")).collect();
    let attacker_types: Vec<String> = (0..n_types).map(|i| format!("type{i}")).collect();
    let terminal_states: Vec<usize> = (n_states - params.n_terminal..n_states).collect();
    let start_states: Vec<usize> = (0..n_states - params.n_terminal).collect();

    let mut theta = Vec::with_capacity(n_states);
    let mut defender_actions = Vec::with_capacity(n_states);
    let mut attacker_actions = Vec::with_capacity(n_states);
    let mut blocks = Vec::with_capacity(n_states);
    for s in 0..n_states {
        theta.push(positive_distribution(&mut rng, n_types));
        defender_actions.push((0..n_def_actions).map(|d| format!("d{d}")).collect::<Vec<_>>());
        let mut per_type_actions = Vec::with_capacity(n_types);
        let mut per_type_blocks = Vec::with_capacity(n_types);
        for i in 0..n_types {
            let n_att = params.attacker_count(i);
            per_type_actions.push((0..n_att).map(|a| format!("a{a}")).collect::<Vec<_>>());
            if terminal_states.contains(&s) {
                per_type_blocks.push(TypeBlock::self_loop(n_def_actions, n_att, n_states, s));
                continue;
            }
            let u_defender = Matrix::from_fn(n_def_actions, n_att, |_, _| uniform(&mut rng));
            let u_attacker = Matrix::from_fn(n_def_actions, n_att, |_, _| uniform(&mut rng));
            let transitions = (0..n_def_actions * n_att)
                .map(|_| positive_distribution(&mut rng, n_states))
                .collect();
            per_type_blocks.push(TypeBlock { u_defender, u_attacker, transitions });
        }
        attacker_actions.push(per_type_actions);
        blocks.push(per_type_blocks);
    }

    Ok(GameSpec {
        states,
        attacker_types,
        theta,
        defender_actions,
        attacker_actions,
        blocks,
        discount: params.discount,
        start_states,
        terminal_states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::validate;

    #[test]
    fn minimal_shape() {
        let spec = generate_random_bsmg(&RandomSpecParams::new(1, 1, 1, vec![1], (0.0, 1.0), 7)).unwrap();
        assert_eq!(spec.n_states(), 1);
        assert_eq!(spec.n_defender_actions(0), 1);
        assert_eq!(spec.n_attacker_actions(0, 0), 1);
        assert!(validate(&spec).is_empty());
    }

    #[test]
    fn deterministic_in_seed() {
        let p = RandomSpecParams::new(3, 2, 2, vec![3], (-1.0, 1.0), 99);
        assert_eq!(generate_random_bsmg(&p).unwrap(), generate_random_bsmg(&p).unwrap());
        let q = RandomSpecParams { seed: 100, ..p.clone() };
        assert_ne!(generate_random_bsmg(&p).unwrap(), generate_random_bsmg(&q).unwrap());
    }

    #[test]
    fn web_app_shaped_instance() {
        let spec = generate_random_bsmg(&RandomSpecParams::new(4, 3, 4, vec![8, 4, 5], (-10.0, 0.0), 1)).unwrap();
        assert!(validate(&spec).is_empty());
        assert_eq!(
            (0..3).map(|i| spec.n_attacker_actions(2, i)).collect::<Vec<_>>(),
            vec![8, 4, 5]
        );
        assert!(spec.terminal_states.is_empty());
        let all_in_range = spec
            .blocks
            .iter()
            .flatten()
            .flat_map(|b| b.u_defender.as_slice().iter().chain(b.u_attacker.as_slice()))
            .all(|&u| (-10.0..=0.0).contains(&u));
        assert!(all_in_range);
    }

    #[test]
    fn terminal_states_on_request() {
        let spec = generate_random_bsmg(
            &RandomSpecParams::new(4, 1, 2, vec![2], (0.0, 1.0), 5).with_terminal(1),
        )
        .unwrap();
        assert_eq!(spec.terminal_states, vec![3]);
        assert!(validate(&spec).is_empty());
    }

    #[test]
    fn zero_counts_rejected() {
        assert!(generate_random_bsmg(&RandomSpecParams::new(0, 1, 1, vec![1], (0.0, 1.0), 0)).is_err());
        assert!(generate_random_bsmg(&RandomSpecParams::new(1, 1, 1, vec![0], (0.0, 1.0), 0)).is_err());
    }
}
