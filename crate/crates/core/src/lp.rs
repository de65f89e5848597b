//! Dense two-phase primal simplex with Bland's rule.
//!
//! Sized for the small programs produced by the stage-game solvers (a few
//! dozen variables, a few hundred rows). Bland's rule guarantees
//! termination on degenerate problems, which the multiple-LP Stackelberg
//! method produces constantly: every incentive constraint has a zero
//! right-hand side.

use crate::{Error, Result};

const EPS_COST: f64 = 1e-10;
const EPS_PIVOT: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintOp {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub op: ConstraintOp,
    pub rhs: f64,
}

/// `maximize objective · x` subject to the constraints and `x_j ≥ lower_bounds[j]`
/// (`None` leaves the variable free).
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower_bounds: Vec<Option<f64>>,
}

impl LinearProgram {
    /// A program over `objective.len()` nonnegative variables.
    pub fn maximize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            constraints: Vec::new(),
            lower_bounds: vec![Some(0.0); n],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn constrain(&mut self, coeffs: Vec<f64>, op: ConstraintOp, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint { coeffs, op, rhs });
        self
    }

    pub fn free(&mut self, var: usize) -> &mut Self {
        self.lower_bounds[var] = None;
        self
    }

    fn check(&self) -> Result<()> {
        let n = self.n_vars();
        if self.lower_bounds.len() != n {
            return Err(Error::Dimension(format!(
                "{} lower bounds for {n} variables",
                self.lower_bounds.len()
            )));
        }
        for (k, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(Error::Dimension(format!(
                    "constraint {k} has {} coefficients for {n} variables",
                    c.coeffs.len()
                )));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite()) {
                return Err(Error::Dimension(format!("constraint {k} has non-finite data")));
            }
        }
        if self.objective.iter().any(|v| !v.is_finite())
            || self.lower_bounds.iter().flatten().any(|v| !v.is_finite())
        {
            return Err(Error::Dimension("non-finite objective or bound".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal point; empty unless `status` is `Optimal`.
    pub point: Vec<f64>,
    /// Optimal value; `-inf` when infeasible and `+inf` when unbounded.
    pub value: f64,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

struct Tableau {
    width: usize,
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    obj: Vec<f64>,
    pivots: usize,
    max_pivots: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.rows[r][self.width]
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let p = self.rows[r][e];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        self.rows[r][e] = 1.0;
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[e];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[e] = 0.0;
            }
        }
        let f = self.obj[e];
        if f != 0.0 {
            for (v, pv) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.obj[e] = 0.0;
        }
        self.basis[r] = e;
        self.pivots += 1;
    }

    /// Installs `cost` as the objective and prices out the current basis.
    fn set_objective(&mut self, cost: &[f64]) {
        self.obj = cost.to_vec();
        self.obj.push(0.0);
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for (v, rv) in self.obj.iter_mut().zip(&self.rows[r]) {
                    *v -= cb * rv;
                }
            }
        }
    }

    fn objective_value(&self) -> f64 {
        -self.obj[self.width]
    }

    /// Maximises the installed objective over columns `< allowed`.
    fn run(&mut self, allowed: usize) -> Result<Outcome> {
        loop {
            let Some(e) = (0..allowed).find(|&j| self.obj[j] > EPS_COST) else {
                return Ok(Outcome::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows.len() {
                let a = self.rows[r][e];
                if a <= EPS_PIVOT {
                    continue;
                }
                let ratio = self.rhs(r).max(0.0) / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((best, best_ratio)) => {
                        if ratio < best_ratio - 1e-12
                            || (ratio <= best_ratio + 1e-12 && self.basis[r] < self.basis[best])
                        {
                            Some((r, ratio))
                        } else {
                            Some((best, best_ratio))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Ok(Outcome::Unbounded);
            };
            if self.pivots >= self.max_pivots {
                return Err(Error::IterationLimit(self.max_pivots));
            }
            self.pivot(r, e);
        }
    }
}

/// How an original variable maps onto nonnegative tableau columns.
enum VarMap {
    Shifted { col: usize, lower: f64 },
    Split { pos: usize, neg: usize },
}

/// Solves `lp` exactly up to floating-point round-off.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    lp.check()?;
    let n = lp.n_vars();

    let mut maps = Vec::with_capacity(n);
    let mut n_struct = 0;
    for bound in &lp.lower_bounds {
        match bound {
            Some(lower) => {
                maps.push(VarMap::Shifted { col: n_struct, lower: *lower });
                n_struct += 1;
            }
            None => {
                maps.push(VarMap::Split { pos: n_struct, neg: n_struct + 1 });
                n_struct += 2;
            }
        }
    }

    // Rewrite each constraint over the structural columns with rhs >= 0.
    struct Row {
        coeffs: Vec<f64>,
        op: ConstraintOp,
        rhs: f64,
    }
    let mut rows: Vec<Row> = Vec::with_capacity(lp.constraints.len());
    for c in &lp.constraints {
        let mut coeffs = vec![0.0; n_struct];
        let mut rhs = c.rhs;
        for (j, &a) in c.coeffs.iter().enumerate() {
            match maps[j] {
                VarMap::Shifted { col, lower } => {
                    coeffs[col] = a;
                    rhs -= a * lower;
                }
                VarMap::Split { pos, neg } => {
                    coeffs[pos] = a;
                    coeffs[neg] = -a;
                }
            }
        }
        let mut op = c.op;
        if rhs < 0.0 || (rhs == 0.0 && op == ConstraintOp::Ge) {
            rhs = -rhs;
            coeffs.iter_mut().for_each(|v| *v = -*v);
            op = match op {
                ConstraintOp::Le => ConstraintOp::Ge,
                ConstraintOp::Ge => ConstraintOp::Le,
                ConstraintOp::Eq => ConstraintOp::Eq,
            };
        }
        rows.push(Row { coeffs, op, rhs });
    }

    let n_slack = rows.iter().filter(|r| r.op != ConstraintOp::Eq).count();
    let n_art = rows.iter().filter(|r| r.op != ConstraintOp::Le).count();
    let width = n_struct + n_slack + n_art;
    let art_start = n_struct + n_slack;

    let mut tab_rows = Vec::with_capacity(rows.len());
    let mut basis = Vec::with_capacity(rows.len());
    let (mut slack, mut art) = (n_struct, art_start);
    for row in &rows {
        let mut t = vec![0.0; width + 1];
        t[..n_struct].copy_from_slice(&row.coeffs);
        t[width] = row.rhs;
        match row.op {
            ConstraintOp::Le => {
                t[slack] = 1.0;
                basis.push(slack);
                slack += 1;
            }
            ConstraintOp::Ge => {
                t[slack] = -1.0;
                slack += 1;
                t[art] = 1.0;
                basis.push(art);
                art += 1;
            }
            ConstraintOp::Eq => {
                t[art] = 1.0;
                basis.push(art);
                art += 1;
            }
        }
        tab_rows.push(t);
    }

    let mut tab = Tableau {
        width,
        rows: tab_rows,
        basis,
        obj: Vec::new(),
        pivots: 0,
        max_pivots: 20_000 + 50 * (width + rows.len()),
    };

    if n_art > 0 {
        let mut cost = vec![0.0; width];
        cost[art_start..].iter_mut().for_each(|c| *c = -1.0);
        tab.set_objective(&cost);
        tab.run(width)?;
        let scale = rows.iter().fold(1.0f64, |m, r| m.max(r.rhs.abs()));
        if tab.objective_value() < -FEAS_TOL * scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                point: Vec::new(),
                value: f64::NEG_INFINITY,
            });
        }
        // Drive zero-level artificials out of the basis; rows where that is
        // impossible are linearly dependent and dropped.
        let mut r = 0;
        while r < tab.rows.len() {
            if tab.basis[r] >= art_start {
                let col = (0..art_start)
                    .filter(|&j| tab.rows[r][j].abs() > EPS_PIVOT)
                    .max_by(|&a, &b| tab.rows[r][a].abs().total_cmp(&tab.rows[r][b].abs()));
                match col {
                    Some(j) => tab.pivot(r, j),
                    None => {
                        tab.rows.remove(r);
                        tab.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
    }

    let mut cost = vec![0.0; width];
    for (j, &c) in lp.objective.iter().enumerate() {
        match maps[j] {
            VarMap::Shifted { col, .. } => cost[col] = c,
            VarMap::Split { pos, neg } => {
                cost[pos] = c;
                cost[neg] = -c;
            }
        }
    }
    tab.set_objective(&cost);
    if let Outcome::Unbounded = tab.run(art_start)? {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            point: Vec::new(),
            value: f64::INFINITY,
        });
    }

    let mut y = vec![0.0; width];
    for (r, &b) in tab.basis.iter().enumerate() {
        y[b] = tab.rhs(r).max(0.0);
    }
    let point: Vec<f64> = maps
        .iter()
        .map(|m| match *m {
            VarMap::Shifted { col, lower } => y[col] + lower,
            VarMap::Split { pos, neg } => y[pos] - y[neg],
        })
        .collect();
    let value = lp.objective.iter().zip(&point).map(|(c, x)| c * x).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        point,
        value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ConstraintOp::*;

    #[test]
    fn one_variable_bounded() {
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.constrain(vec![1.0], Le, 3.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn one_variable_unbounded() {
        let lp = LinearProgram::maximize(vec![1.0]);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn infeasible_detected() {
        let mut lp = LinearProgram::maximize(vec![1.0, 1.0]);
        lp.constrain(vec![1.0, 1.0], Le, 1.0).constrain(vec![1.0, 1.0], Ge, 2.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn equality_and_free_variable() {
        // max v s.t. v <= x1, v <= 1 - x1 ... written with x2 = 1 - x1.
        let mut lp = LinearProgram::maximize(vec![0.0, 0.0, 1.0]);
        lp.free(2)
            .constrain(vec![1.0, 1.0, 0.0], Eq, 1.0)
            .constrain(vec![-1.0, 0.0, 1.0], Le, 0.0)
            .constrain(vec![0.0, -1.0, 1.0], Le, 0.0);
        let sol = solve_lp(&lp).unwrap();
        assert!((sol.value - 0.5).abs() < 1e-12);
        assert!((sol.point[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn negative_free_optimum() {
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.free(0).constrain(vec![1.0], Le, -4.0);
        let sol = solve_lp(&lp).unwrap();
        assert!((sol.point[0] + 4.0).abs() < 1e-12);
    }

    #[test]
    fn shifted_lower_bound() {
        let mut lp = LinearProgram::maximize(vec![-1.0, -1.0]);
        lp.lower_bounds = vec![Some(2.0), Some(-3.0)];
        let sol = solve_lp(&lp).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::maximize(vec![1.0, 2.0]);
        lp.constrain(vec![1.0, 1.0], Eq, 1.0).constrain(vec![2.0, 2.0], Eq, 2.0);
        let sol = solve_lp(&lp).unwrap();
        assert!((sol.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example: cycles under the textbook largest-coefficient rule.
        let mut lp = LinearProgram::maximize(vec![0.75, -150.0, 0.02, -6.0]);
        lp.constrain(vec![0.25, -60.0, -0.04, 9.0], Le, 0.0)
            .constrain(vec![0.5, -90.0, -0.02, 3.0], Le, 0.0)
            .constrain(vec![0.0, 0.0, 1.0, 0.0], Le, 1.0);
        let sol = solve_lp(&lp).unwrap();
        assert!((sol.value - 0.05).abs() < 1e-9, "{}", sol.value);
    }

    #[test]
    fn dimension_mismatch() {
        let mut lp = LinearProgram::maximize(vec![1.0, 1.0]);
        lp.constrain(vec![1.0], Le, 1.0);
        assert!(matches!(solve_lp(&lp), Err(Error::Dimension(_))));
    }
}
