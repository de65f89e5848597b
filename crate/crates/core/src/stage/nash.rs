use crate::lp::{solve_lp, ConstraintOp, LinearProgram};
use crate::{Error, Matrix, Result};

/// Largest action count per player accepted by [`solve_nash`].
pub const MAX_NASH_ACTIONS: usize = 8;

const REGRET_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct NashSolution {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub v_leader: f64,
    pub v_follower: f64,
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(current.clone());
        let Some(pos) = (0..k).rev().find(|&p| current[p] < n - k + p) else {
            return out;
        };
        current[pos] += 1;
        for p in pos + 1..k {
            current[p] = current[p - 1] + 1;
        }
    }
}

/// Strategy of the opponent supported on `support` that makes every row in
/// `indifferent` a best reply for the player whose payoff to row `r` against
/// opponent action `c` is `payoff(r, c)`.
fn supported_strategy(
    payoff: impl Fn(usize, usize) -> f64,
    own_count: usize,
    other_count: usize,
    indifferent: &[usize],
    support: &[usize],
) -> Result<Option<Vec<f64>>> {
    // Variables: one probability per supported action, then the free value u.
    let k = support.len();
    let mut objective = vec![0.0; k + 1];
    objective[k] = 0.0;
    let mut lp = LinearProgram::maximize(objective);
    lp.free(k);
    let mut sum = vec![1.0; k + 1];
    sum[k] = 0.0;
    lp.constrain(sum, ConstraintOp::Eq, 1.0);
    for r in 0..own_count {
        let mut row: Vec<f64> = support.iter().map(|&c| payoff(r, c)).collect();
        row.push(-1.0);
        let op = if indifferent.contains(&r) { ConstraintOp::Eq } else { ConstraintOp::Le };
        lp.constrain(row, op, 0.0);
    }
    let sol = solve_lp(&lp)?;
    if !sol.is_optimal() {
        return Ok(None);
    }
    let mut full = vec![0.0; other_count];
    for (p, &c) in sol.point.iter().zip(support) {
        full[c] = p.max(0.0);
    }
    let total: f64 = full.iter().sum();
    full.iter_mut().for_each(|p| *p /= total);
    Ok(Some(full))
}

fn regret(payoffs: &[f64], mix: &[f64]) -> f64 {
    let best = payoffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let got: f64 = payoffs.iter().zip(mix).map(|(a, b)| a * b).sum();
    best - got
}

/// One Nash equilibrium of the bimatrix game `(leader, follower)` by support
/// enumeration.
///
/// Support pairs are tried by increasing total size, then by increasing
/// leader-support size, then lexicographically; the first pair admitting an
/// equilibrium wins, so the choice among multiple equilibria is
/// reproducible. Unequal support sizes are included so degenerate games are
/// handled.
pub fn solve_nash(leader: &Matrix, follower: &Matrix) -> Result<NashSolution> {
    if leader.shape() != follower.shape() || leader.rows() == 0 || leader.cols() == 0 {
        return Err(Error::Dimension(format!(
            "leader {:?} vs follower {:?}",
            leader.shape(),
            follower.shape()
        )));
    }
    let (m, n) = leader.shape();
    if m > MAX_NASH_ACTIONS || n > MAX_NASH_ACTIONS {
        return Err(Error::SizeLimit(format!(
            "{m}x{n} game exceeds {MAX_NASH_ACTIONS}x{MAX_NASH_ACTIONS}"
        )));
    }

    for total in 2..=m + n {
        for k in total.saturating_sub(n).max(1)..=m.min(total - 1) {
            let l = total - k;
            let row_sets = combinations(m, k);
            let col_sets = combinations(n, l);
            for rows in &row_sets {
                for cols in &col_sets {
                    let Some(y) = supported_strategy(|r, c| leader[(r, c)], m, n, rows, cols)? else {
                        continue;
                    };
                    let Some(x) = supported_strategy(|c, r| follower[(r, c)], n, m, cols, rows)? else {
                        continue;
                    };
                    let row_payoffs: Vec<f64> = (0..m)
                        .map(|r| (0..n).map(|c| leader[(r, c)] * y[c]).sum())
                        .collect();
                    let col_payoffs = follower.column_values(&x);
                    if regret(&row_payoffs, &x) <= REGRET_TOL && regret(&col_payoffs, &y) <= REGRET_TOL {
                        let v_leader = row_payoffs.iter().zip(&x).map(|(a, b)| a * b).sum();
                        let v_follower = col_payoffs.iter().zip(&y).map(|(a, b)| a * b).sum();
                        return Ok(NashSolution { x, y, v_leader, v_follower });
                    }
                }
            }
        }
    }
    unreachable!("every finite bimatrix game has a Nash equilibrium")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_pennies() {
        let a = Matrix::from_rows(&[[1.0, -1.0], [-1.0, 1.0]]).unwrap();
        let sol = solve_nash(&a, &a.map(|v| -v)).unwrap();
        assert!((sol.x[0] - 0.5).abs() < 1e-9 && (sol.y[0] - 0.5).abs() < 1e-9);
        assert!(sol.v_leader.abs() < 1e-9);
    }

    #[test]
    fn dominant_pure_profile() {
        // Prisoner's dilemma: defect (row/col 1) dominates.
        let a = Matrix::from_rows(&[[3.0, 0.0], [5.0, 1.0]]).unwrap();
        let sol = solve_nash(&a, &a.transpose()).unwrap();
        assert_eq!(sol.x, vec![0.0, 1.0]);
        assert_eq!(sol.y, vec![0.0, 1.0]);
        assert_eq!(sol.v_leader, 1.0);
    }

    #[test]
    fn coordination_game_picks_first_pure() {
        let a = Matrix::from_rows(&[[1.0, 0.0], [0.0, 2.0]]).unwrap();
        let sol = solve_nash(&a, &a).unwrap();
        assert_eq!(sol.x, vec![1.0, 0.0]);
        assert_eq!(sol.y, vec![1.0, 0.0]);
    }

    #[test]
    fn size_limit() {
        let a = Matrix::zeros(MAX_NASH_ACTIONS + 1, 2);
        assert!(matches!(solve_nash(&a, &a), Err(Error::SizeLimit(_))));
        assert!(matches!(solve_nash(&a, &Matrix::zeros(2, 2)), Err(Error::Dimension(_))));
    }

    #[test]
    fn combinations_lexicographic() {
        assert_eq!(combinations(4, 2).len(), 6);
        assert_eq!(combinations(3, 2), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
    }
}
