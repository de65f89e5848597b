//! Exact solvers for one-shot games.
//!
//! [`solve_bsse`] computes a Bayesian strong Stackelberg equilibrium with
//! the multiple-LP method: one LP per joint pure follower response, each
//! maximising the leader's expected payoff over the region of leader
//! strategies where that response is a best reply for every type.

mod nash;

pub use nash::{solve_nash, NashSolution, MAX_NASH_ACTIONS};

use crate::game::StageGame;
use crate::lp::{solve_lp, ConstraintOp, LinearProgram};
use crate::{Error, Matrix, Result};

/// Slack when deciding that two follower payoffs tie.
pub const TIE_TOL: f64 = 1e-9;
/// A response profile must beat the incumbent by this much to replace it.
pub const OPT_TOL: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq)]
pub struct SseSolution {
    /// Leader mixed strategy.
    pub x: Vec<f64>,
    /// Pure response of each follower type.
    pub responses: Vec<usize>,
    pub v_leader: f64,
    pub v_followers: Vec<f64>,
}

/// Best pure reply of a follower with payoffs `follower` to leader strategy
/// `x`: the smallest maximising column, plus every column within
/// [`TIE_TOL`] of the maximum.
pub fn best_response(follower: &Matrix, x: &[f64]) -> Result<(usize, Vec<usize>)> {
    if x.len() != follower.rows() || follower.cols() == 0 {
        return Err(Error::Dimension(format!(
            "strategy of length {} against a {:?} matrix",
            x.len(),
            follower.shape()
        )));
    }
    let values = follower.column_values(x);
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..values.len()).filter(|&c| values[c] >= best - TIE_TOL).collect();
    Ok((ties[0], ties))
}

/// Rows `F[:, j] - F[:, k] >= 0` for every column `k` that differs from `j`.
fn incentive_rows(follower: &Matrix, j: usize) -> Vec<Vec<f64>> {
    let m = follower.rows();
    (0..follower.cols())
        .filter(|&k| k != j)
        .map(|k| (0..m).map(|r| follower[(r, j)] - follower[(r, k)]).collect::<Vec<f64>>())
        .filter(|row| row.iter().any(|&v| v != 0.0))
        .collect()
}

fn simplex_lp(objective: Vec<f64>) -> LinearProgram {
    let m = objective.len();
    let mut lp = LinearProgram::maximize(objective);
    lp.constrain(vec![1.0; m], ConstraintOp::Eq, 1.0);
    lp
}

fn clean_strategy(mut x: Vec<f64>) -> Vec<f64> {
    x.iter_mut().for_each(|p| *p = p.max(0.0));
    let total: f64 = x.iter().sum();
    x.iter_mut().for_each(|p| *p /= total);
    x
}

/// Exact Bayesian strong Stackelberg equilibrium.
///
/// Each type's columns are first screened: a column whose best-response
/// region is empty can never be part of an equilibrium, and the LP over a
/// nonempty region yields an upper bound on what that type can contribute.
/// Joint profiles are then visited in lexicographic order, skipping any
/// whose bound cannot beat the incumbent. Ties keep the earliest profile.
pub fn solve_bsse(game: &StageGame) -> Result<SseSolution> {
    game.check()?;
    let m = game.n_leader_actions();
    let t = game.n_types();

    let rows: Vec<Vec<Vec<Vec<f64>>>> = game
        .follower
        .iter()
        .map(|f| (0..f.cols()).map(|j| incentive_rows(f, j)).collect())
        .collect();

    let mut candidates: Vec<Vec<(usize, f64)>> = Vec::with_capacity(t);
    for i in 0..t {
        let leader = &game.leader[i];
        let mut list = Vec::new();
        for j in 0..leader.cols() {
            let mut lp = simplex_lp((0..m).map(|r| leader[(r, j)]).collect());
            for row in &rows[i][j] {
                lp.constrain(row.clone(), ConstraintOp::Ge, 0.0);
            }
            let sol = solve_lp(&lp)?;
            if sol.is_optimal() {
                list.push((j, sol.value));
            }
        }
        if list.is_empty() {
            return Err(Error::Dimension(format!("type {i} has no feasible best response")));
        }
        candidates.push(list);
    }

    let mut best: Option<(f64, Vec<f64>, Vec<usize>)> = None;
    let mut cursor = vec![0usize; t];
    loop {
        let profile: Vec<usize> = (0..t).map(|i| candidates[i][cursor[i]].0).collect();
        let bound: f64 = (0..t).map(|i| game.theta[i] * candidates[i][cursor[i]].1).sum();
        let incumbent = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.0);
        if bound > incumbent + OPT_TOL {
            let objective = (0..m)
                .map(|r| (0..t).map(|i| game.theta[i] * game.leader[i][(r, profile[i])]).sum())
                .collect();
            let mut lp = simplex_lp(objective);
            for i in 0..t {
                for row in &rows[i][profile[i]] {
                    lp.constrain(row.clone(), ConstraintOp::Ge, 0.0);
                }
            }
            let sol = solve_lp(&lp)?;
            if sol.is_optimal() && sol.value > incumbent + OPT_TOL {
                best = Some((sol.value, sol.point, profile));
            }
        }

        // Lexicographic odometer, last type fastest.
        let mut k = t;
        loop {
            if k == 0 {
                let (_, x, responses) = best.expect("the joint region partition covers the simplex");
                return Ok(finish(game, clean_strategy(x), responses));
            }
            k -= 1;
            cursor[k] += 1;
            if cursor[k] < candidates[k].len() {
                break;
            }
            cursor[k] = 0;
        }
    }
}

fn finish(game: &StageGame, x: Vec<f64>, responses: Vec<usize>) -> SseSolution {
    let v_leader = responses
        .iter()
        .enumerate()
        .map(|(i, &j)| game.theta[i] * game.leader[i].column_value(&x, j))
        .sum();
    let v_followers = responses
        .iter()
        .enumerate()
        .map(|(i, &j)| game.follower[i].column_value(&x, j))
        .collect();
    SseSolution { x, responses, v_leader, v_followers }
}

/// Leader value of committing to `x` when every type best-responds and
/// breaks ties in the leader's favour.
pub fn leader_value_against_best_responses(game: &StageGame, x: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..game.n_types() {
        let (_, ties) = best_response(&game.follower[i], x)?;
        let v = ties
            .iter()
            .map(|&j| game.leader[i].column_value(x, j))
            .fold(f64::NEG_INFINITY, f64::max);
        total += game.theta[i] * v;
    }
    Ok(total)
}

/// Decodes a combined Harsanyi column into per-type actions.
pub fn harsanyi_decode(mut col: usize, counts: &[usize]) -> Vec<usize> {
    let mut out = vec![0; counts.len()];
    for i in (0..counts.len()).rev() {
        out[i] = col % counts[i];
        col /= counts[i];
    }
    out
}

/// Collapses a Bayesian game into a single-type game whose follower plays
/// tuples of per-type actions (lexicographic order, last type fastest) and
/// whose payoffs are type-weighted sums.
pub fn harsanyi_transform(game: &StageGame) -> Result<StageGame> {
    game.check()?;
    let counts: Vec<usize> = game.follower.iter().map(Matrix::cols).collect();
    let total: usize = counts.iter().product();
    let m = game.n_leader_actions();
    let tuples: Vec<Vec<usize>> = (0..total).map(|c| harsanyi_decode(c, &counts)).collect();
    let combine = |mats: &[Matrix]| {
        Matrix::from_fn(m, total, |r, c| {
            tuples[c]
                .iter()
                .enumerate()
                .map(|(i, &j)| game.theta[i] * mats[i][(r, j)])
                .sum()
        })
    };
    StageGame::new(vec![combine(&game.leader)], vec![combine(&game.follower)], vec![1.0])
}

/// Maximin strategy of the row player in a zero-sum game.
pub fn solve_maximin(matrix: &Matrix) -> Result<(Vec<f64>, f64)> {
    let (m, n) = matrix.shape();
    if m == 0 || n == 0 {
        return Err(Error::Dimension("empty payoff matrix".into()));
    }
    // Variables: x_0..x_{m-1}, v (free).
    let mut objective = vec![0.0; m + 1];
    objective[m] = 1.0;
    let mut lp = LinearProgram::maximize(objective);
    lp.free(m);
    let mut ones = vec![1.0; m + 1];
    ones[m] = 0.0;
    lp.constrain(ones, ConstraintOp::Eq, 1.0);
    for j in 0..n {
        let mut row: Vec<f64> = (0..m).map(|r| -matrix[(r, j)]).collect();
        row.push(1.0);
        lp.constrain(row, ConstraintOp::Le, 0.0);
    }
    let sol = solve_lp(&lp)?;
    let x = clean_strategy(sol.point[..m].to_vec());
    let value = matrix.column_values(&x).into_iter().fold(f64::INFINITY, f64::min);
    Ok((x, value))
}
