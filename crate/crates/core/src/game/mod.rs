//! The game model: a Bayesian Stackelberg Markov game, the stage games it
//! induces, and the tables of values that planners and learners fill in.

mod generate;
mod io;
mod validate;

pub use generate::{generate_random_bsmg, RandomSpecParams};
pub use io::{load_spec, load_spec_with_extensions, save_spec, save_spec_with_extensions, spec_from_json, spec_to_json};
pub use validate::{validate, ValidationReport, Violation};

use crate::{Error, Matrix, Result};

/// Payoffs and dynamics of one (state, attacker type) pair.
///
/// Rows index defender actions, columns the type's attacker actions.
/// `transitions` is row-major over cells: the next-state distribution of
/// `(d, a)` lives at `d * cols + a`.
#[derive(Clone, Debug, PartialEq)]
pub struct TypeBlock {
    pub u_defender: Matrix,
    pub u_attacker: Matrix,
    pub transitions: Vec<Vec<f64>>,
}

impl TypeBlock {
    /// Zero utilities, every cell self-looping to `state`.
    pub fn self_loop(n_def: usize, n_att: usize, n_states: usize, state: usize) -> Self {
        let mut next = vec![0.0; n_states];
        next[state] = 1.0;
        TypeBlock {
            u_defender: Matrix::zeros(n_def, n_att),
            u_attacker: Matrix::zeros(n_def, n_att),
            transitions: vec![next; n_def * n_att],
        }
    }

    pub fn next_distribution(&self, d: usize, a: usize) -> &[f64] {
        &self.transitions[d * self.u_defender.cols() + a]
    }

    pub fn next_distribution_mut(&mut self, d: usize, a: usize) -> &mut Vec<f64> {
        let cols = self.u_defender.cols();
        &mut self.transitions[d * cols + a]
    }
}

/// A complete BSMG: states, attacker types with per-state priors, action
/// sets, transitions, utilities and the shared discount factor.
///
/// Names live alongside dense indices; every other structure in the crate
/// refers to states, types and actions by their position in these lists.
#[derive(Clone, Debug, PartialEq)]
pub struct GameSpec {
    pub states: Vec<String>,
    pub attacker_types: Vec<String>,
    /// `theta[s][i]`: probability of meeting type `i` in state `s`.
    pub theta: Vec<Vec<f64>>,
    pub defender_actions: Vec<Vec<String>>,
    /// `attacker_actions[s][i]`.
    pub attacker_actions: Vec<Vec<Vec<String>>>,
    /// `blocks[s][i]`.
    pub blocks: Vec<Vec<TypeBlock>>,
    pub discount: f64,
    pub start_states: Vec<usize>,
    pub terminal_states: Vec<usize>,
}

impl GameSpec {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_types(&self) -> usize {
        self.attacker_types.len()
    }

    pub fn n_defender_actions(&self, s: usize) -> usize {
        self.defender_actions[s].len()
    }

    pub fn n_attacker_actions(&self, s: usize, i: usize) -> usize {
        self.attacker_actions[s][i].len()
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal_states.contains(&s)
    }

    pub fn state_index(&self, name: &str) -> Result<usize> {
        self.states
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::UnknownState(name.to_string()))
    }

    pub fn block(&self, s: usize, i: usize) -> &TypeBlock {
        &self.blocks[s][i]
    }

    /// Multiplies every utility by `c`, leaving dynamics untouched.
    pub fn scale_utilities(&self, c: f64) -> GameSpec {
        let mut out = self.clone();
        for block in out.blocks.iter_mut().flatten() {
            block.u_defender = block.u_defender.map(|v| v * c);
            block.u_attacker = block.u_attacker.map(|v| v * c);
        }
        out
    }

    /// A spec with one state that loops forever on a single action pair.
    pub fn single_state(u_defender: f64, u_attacker: f64, discount: f64) -> GameSpec {
        let mut block = TypeBlock::self_loop(1, 1, 1, 0);
        block.u_defender[(0, 0)] = u_defender;
        block.u_attacker[(0, 0)] = u_attacker;
        GameSpec {
            states: vec!["s0".into()],
            attacker_types: vec!["attacker".into()],
            theta: vec![vec![1.0]],
            defender_actions: vec![vec!["d0".into()]],
            attacker_actions: vec![vec![vec!["a0".into()]]],
            blocks: vec![vec![block]],
            discount,
            start_states: vec![0],
            terminal_states: vec![],
        }
    }
}

/// A one-shot Bayesian game: one payoff-matrix pair per follower type and a
/// prior over types. All matrices share the leader's action set as rows.
#[derive(Clone, Debug, PartialEq)]
pub struct StageGame {
    pub leader: Vec<Matrix>,
    pub follower: Vec<Matrix>,
    pub theta: Vec<f64>,
}

impl StageGame {
    pub fn new(leader: Vec<Matrix>, follower: Vec<Matrix>, theta: Vec<f64>) -> Result<Self> {
        let game = StageGame {
            leader,
            follower,
            theta,
        };
        game.check()?;
        Ok(game)
    }

    /// Single-type game from a leader/follower matrix pair.
    pub fn bimatrix(leader: Matrix, follower: Matrix) -> Result<Self> {
        Self::new(vec![leader], vec![follower], vec![1.0])
    }

    pub fn check(&self) -> Result<()> {
        let t = self.theta.len();
        if t == 0 || self.leader.len() != t || self.follower.len() != t {
            return Err(Error::Dimension(format!(
                "{} leader matrices, {} follower matrices, {} type probabilities",
                self.leader.len(),
                self.follower.len(),
                t
            )));
        }
        let rows = self.leader[0].rows();
        if rows == 0 {
            return Err(Error::Dimension("leader has no actions".into()));
        }
        for (i, (l, f)) in self.leader.iter().zip(&self.follower).enumerate() {
            if l.shape() != f.shape() {
                return Err(Error::Dimension(format!(
                    "type {i}: leader matrix {:?} vs follower matrix {:?}",
                    l.shape(),
                    f.shape()
                )));
            }
            if l.rows() != rows || l.cols() == 0 {
                return Err(Error::Dimension(format!("type {i}: matrix shape {:?}", l.shape())));
            }
        }
        if !crate::on_simplex(&self.theta) {
            return Err(Error::Dimension(format!("theta {:?} is not a distribution", self.theta)));
        }
        Ok(())
    }

    pub fn n_leader_actions(&self) -> usize {
        self.leader[0].rows()
    }

    pub fn n_types(&self) -> usize {
        self.theta.len()
    }
}

/// Q-values for the defender against each type, and for each type.
/// Both are indexed `[state][type]` with the same shape as the spec's blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct QTables {
    pub q_defender: Vec<Vec<Matrix>>,
    pub q_attacker: Vec<Vec<Matrix>>,
}

impl QTables {
    /// All-zero tables over the given action counts, `counts[s] = (n_def, [n_att per type])`.
    pub fn zeros_from_counts(counts: &[(usize, Vec<usize>)]) -> Self {
        let q: Vec<Vec<Matrix>> = counts
            .iter()
            .map(|(nd, nas)| nas.iter().map(|&na| Matrix::zeros(*nd, na)).collect())
            .collect();
        QTables {
            q_defender: q.clone(),
            q_attacker: q,
        }
    }

    pub fn zeros(spec: &GameSpec) -> Self {
        Self::zeros_from_counts(&action_counts(spec))
    }

    /// True when every table has exactly the spec's action-set shape.
    pub fn matches(&self, spec: &GameSpec) -> bool {
        let counts = action_counts(spec);
        [&self.q_defender, &self.q_attacker].iter().all(|q| {
            q.len() == counts.len()
                && q.iter().zip(&counts).all(|(row, (nd, nas))| {
                    row.len() == nas.len() && row.iter().zip(nas).all(|(m, &na)| m.shape() == (*nd, na))
                })
        })
    }

    pub fn is_finite(&self) -> bool {
        self.q_defender.iter().chain(&self.q_attacker).flatten().all(Matrix::is_finite)
    }
}

/// `(n_def(s), [n_att(s, i)])` for every state.
pub fn action_counts(spec: &GameSpec) -> Vec<(usize, Vec<usize>)> {
    (0..spec.n_states())
        .map(|s| {
            (
                spec.n_defender_actions(s),
                (0..spec.n_types()).map(|i| spec.n_attacker_actions(s, i)).collect(),
            )
        })
        .collect()
}

/// State values for the defender and for each attacker type (`[state][type]`).
#[derive(Clone, Debug, PartialEq)]
pub struct ValueFunctions {
    pub v_defender: Vec<f64>,
    pub v_attacker: Vec<Vec<f64>>,
}

impl ValueFunctions {
    pub fn zeros(n_states: usize, n_types: usize) -> Self {
        ValueFunctions {
            v_defender: vec![0.0; n_states],
            v_attacker: vec![vec![0.0; n_types]; n_states],
        }
    }

    /// Sup-norm distance over every defender and attacker entry.
    pub fn sup_distance(&self, other: &ValueFunctions) -> f64 {
        let d = self
            .v_defender
            .iter()
            .zip(&other.v_defender)
            .map(|(a, b)| (a - b).abs());
        let a = self
            .v_attacker
            .iter()
            .zip(&other.v_attacker)
            .flat_map(|(x, y)| x.iter().zip(y).map(|(a, b)| (a - b).abs()));
        d.chain(a).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.v_defender.iter().chain(self.v_attacker.iter().flatten()).all(|v| v.is_finite())
    }
}

/// Leader mixed strategy per state and a pure response per state and type.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyProfile {
    pub leader: Vec<Vec<f64>>,
    pub followers: Vec<Vec<usize>>,
}

impl StrategyProfile {
    /// Uniform leader strategy, every follower on its first action.
    pub fn uniform(counts: &[(usize, Vec<usize>)]) -> Self {
        StrategyProfile {
            leader: counts.iter().map(|(nd, _)| vec![1.0 / *nd as f64; *nd]).collect(),
            followers: counts.iter().map(|(_, nas)| vec![0; nas.len()]).collect(),
        }
    }

    pub fn is_valid_for(&self, spec: &GameSpec) -> bool {
        let counts = action_counts(spec);
        self.leader.len() == counts.len()
            && self.followers.len() == counts.len()
            && counts.iter().enumerate().all(|(s, (nd, nas))| {
                self.leader[s].len() == *nd
                    && crate::on_simplex(&self.leader[s])
                    && self.followers[s].len() == nas.len()
                    && self.followers[s].iter().zip(nas).all(|(&q, &na)| q < na)
            })
    }
}

/// The Bayesian bimatrix game defined by the Q-values of state `s`.
pub fn build_stage_game(spec: &GameSpec, q: &QTables, s: usize) -> Result<StageGame> {
    if s >= spec.n_states() {
        return Err(Error::UnknownState(format!("#{s}")));
    }
    if q.q_defender.len() != spec.n_states() || q.q_attacker.len() != spec.n_states() {
        return Err(Error::Dimension("Q-tables do not cover the spec's states".into()));
    }
    let leader = q.q_defender[s].clone();
    let follower = q.q_attacker[s].clone();
    if leader.len() != spec.n_types() {
        return Err(Error::Dimension(format!(
            "state {}: {} type tables for {} types",
            spec.states[s],
            leader.len(),
            spec.n_types()
        )));
    }
    StageGame::new(leader, follower, spec.theta[s].clone())
}
