//! Dense two-phase simplex solver for small linear programs.
//!
//! Minimizes `c^T x` over free variables `x` subject to linear constraints
//! (`<=`, `=`, `>=`). Internally each free variable is split into a
//! difference of nonnegatives, rows are sign-normalized, slack and surplus
//! columns are appended, and a phase-1 problem over artificial columns
//! produces a starting basis (or a certificate of infeasibility). Bland's
//! rule picks both the entering and the leaving index, which rules out
//! cycling on the degenerate programs that polytope separation produces.

use crate::error::{Error, Result};

/// Pivot magnitudes below this are treated as zero.
const PIVOT_EPS: f64 = 1e-11;
/// Phase-1 optimum above `FEAS_TOL * (1 + |b|_inf)` means infeasible.
const FEAS_TOL: f64 = 1e-8;
/// Per-phase iteration cap.
const ITER_CAP: usize = 10_000;

/// Constraint sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
struct ConstraintRow {
    coeffs: Vec<f64>,
    relation: Relation,
    rhs: f64,
}

/// A linear program `min c^T x` over free variables.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    objective: Vec<f64>,
    rows: Vec<ConstraintRow>,
}

/// Solver outcome.
#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, point: Vec<f64> },
    Infeasible,
    Unbounded,
}

impl LinearProgram {
    /// Start a minimization of `objective . x`.
    pub fn minimize(objective: Vec<f64>) -> Self {
        Self {
            objective,
            rows: Vec::new(),
        }
    }

    /// Number of variables.
    pub fn n(&self) -> usize {
        self.objective.len()
    }

    /// Add `coeffs . x  <relation>  rhs`.
    pub fn constrain(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.rows.push(ConstraintRow {
            coeffs,
            relation,
            rhs,
        });
        self
    }

    fn validate(&self) -> Result<()> {
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("objective must be finite".into()));
        }
        for (k, row) in self.rows.iter().enumerate() {
            if row.coeffs.len() != self.n() {
                return Err(Error::Dimension(format!(
                    "constraint {k} has {} coefficients, expected {}",
                    row.coeffs.len(),
                    self.n()
                )));
            }
            if row.coeffs.iter().any(|v| !v.is_finite()) || !row.rhs.is_finite() {
                return Err(Error::Parameter(format!(
                    "constraint {k} contains a non-finite value"
                )));
            }
        }
        Ok(())
    }

    /// Solve with the two-phase simplex method.
    pub fn solve(&self) -> Result<LpOutcome> {
        self.validate()?;
        Tableau::build(self).solve()
    }
}

// ---------------------------------------------------------------------------
// Tableau machinery
// ---------------------------------------------------------------------------

struct Tableau {
    /// `rows x (ncols + 1)`; the last entry of each row is the rhs.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    ncols: usize,
    nvars: usize,
    /// Column is an artificial (banned outside phase 1).
    artificial: Vec<bool>,
    /// Phase-2 cost of every column (split variables; slacks are free).
    phase2_cost: Vec<f64>,
    rhs_scale: f64,
}

enum SimplexEnd {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.n();
        let m = lp.rows.len();
        // Column layout: y+ (n) | y- (n) | one slack or surplus per
        // inequality | one artificial per Ge/Eq row.
        let mut slack_count = 0usize;
        let mut artificial_count = 0usize;
        let mut normalized: Vec<(Vec<f64>, Relation, f64)> = Vec::with_capacity(m);
        for row in &lp.rows {
            let flip = row.rhs < 0.0;
            let coeffs: Vec<f64> = row
                .coeffs
                .iter()
                .map(|&c| if flip { -c } else { c })
                .collect();
            let rhs = if flip { -row.rhs } else { row.rhs };
            let relation = match (row.relation, flip) {
                (Relation::Le, true) => Relation::Ge,
                (Relation::Ge, true) => Relation::Le,
                (rel, _) => rel,
            };
            match relation {
                Relation::Le | Relation::Ge => slack_count += 1,
                Relation::Eq => {}
            }
            if !matches!(relation, Relation::Le) {
                artificial_count += 1;
            }
            normalized.push((coeffs, relation, rhs));
        }
        let ncols = 2 * n + slack_count + artificial_count;
        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut artificial = vec![false; ncols];
        let mut next_slack = 2 * n;
        let mut next_artificial = 2 * n + slack_count;
        let mut rhs_scale: f64 = 1.0;
        for (coeffs, relation, rhs) in &normalized {
            let mut row = vec![0.0; ncols + 1];
            for j in 0..n {
                row[j] = coeffs[j];
                row[n + j] = -coeffs[j];
            }
            row[ncols] = *rhs;
            rhs_scale = rhs_scale.max(rhs.abs());
            match relation {
                Relation::Le => {
                    row[next_slack] = 1.0;
                    basis.push(next_slack);
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -1.0;
                    next_slack += 1;
                    row[next_artificial] = 1.0;
                    artificial[next_artificial] = true;
                    basis.push(next_artificial);
                    next_artificial += 1;
                }
                Relation::Eq => {
                    row[next_artificial] = 1.0;
                    artificial[next_artificial] = true;
                    basis.push(next_artificial);
                    next_artificial += 1;
                }
            }
            rows.push(row);
        }
        let mut phase2_cost = vec![0.0; ncols];
        for j in 0..n {
            phase2_cost[j] = lp.objective[j];
            phase2_cost[n + j] = -lp.objective[j];
        }
        Tableau {
            rows,
            basis,
            ncols,
            nvars: n,
            artificial,
            phase2_cost,
            rhs_scale,
        }
    }

    fn pivot(&mut self, cost: &mut [f64], r: usize, c: usize) {
        let factor = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= factor;
        }
        let pivot_row = self.rows[r].clone();
        for (k, row) in self.rows.iter_mut().enumerate() {
            if k == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (dst, src) in row.iter_mut().zip(pivot_row.iter()) {
                    *dst -= f * src;
                }
            }
        }
        let f = cost[c];
        if f != 0.0 {
            for (dst, src) in cost.iter_mut().zip(pivot_row.iter()) {
                *dst -= f * src;
            }
        }
        self.basis[r] = c;
    }

    /// Bland's rule in both choices: entering column is the lowest index
    /// with a negative reduced cost, leaving row breaks ratio ties by the
    /// lowest basis index.
    fn run(&mut self, cost: &mut [f64], allow_artificial: bool) -> Result<SimplexEnd> {
        for _ in 0..ITER_CAP {
            let entering = (0..self.ncols).find(|&j| {
                (allow_artificial || !self.artificial[j]) && cost[j] < -PIVOT_EPS
            });
            let Some(c) = entering else {
                return Ok(SimplexEnd::Optimal);
            };
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.rows.len() {
                let coef = self.rows[r][c];
                if coef > PIVOT_EPS {
                    let ratio = self.rows[r][self.ncols] / coef;
                    best = match best {
                        None => Some((r, ratio)),
                        Some((br, bratio)) => {
                            let tol = PIVOT_EPS * (1.0 + bratio.abs());
                            if ratio < bratio - tol
                                || (ratio <= bratio + tol && self.basis[r] < self.basis[br])
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, bratio))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = best else {
                return Ok(SimplexEnd::Unbounded);
            };
            self.pivot(cost, r, c);
        }
        Err(Error::Numerical(
            "simplex iteration cap reached; the program is numerically degenerate".into(),
        ))
    }

    fn solve(mut self) -> Result<LpOutcome> {
        // Phase 1: minimize the sum of artificials.
        let mut cost = vec![0.0; self.ncols + 1];
        for j in 0..self.ncols {
            if self.artificial[j] {
                cost[j] = 1.0;
            }
        }
        let cost_snapshot: Vec<usize> = (0..self.rows.len())
            .filter(|&r| self.artificial[self.basis[r]])
            .collect();
        for r in cost_snapshot {
            let row = self.rows[r].clone();
            for (dst, src) in cost.iter_mut().zip(row.iter()) {
                *dst -= src;
            }
        }
        match self.run(&mut cost, true)? {
            SimplexEnd::Unbounded => {
                return Err(Error::Numerical(
                    "phase-1 objective cannot be unbounded".into(),
                ))
            }
            SimplexEnd::Optimal => {}
        }
        let phase1_value = -cost[self.ncols];
        if phase1_value > FEAS_TOL * (1.0 + self.rhs_scale) {
            return Ok(LpOutcome::Infeasible);
        }

        // Drive remaining artificials out of the basis; rows that offer no
        // pivot are redundant and dropped.
        let mut r = 0;
        while r < self.rows.len() {
            if self.artificial[self.basis[r]] {
                let pivot_col = (0..self.ncols)
                    .find(|&j| !self.artificial[j] && self.rows[r][j].abs() > PIVOT_EPS);
                match pivot_col {
                    Some(c) => {
                        self.pivot(&mut cost, r, c);
                        r += 1;
                    }
                    None => {
                        self.rows.remove(r);
                        self.basis.remove(r);
                    }
                }
            } else {
                r += 1;
            }
        }

        // Phase 2: the original objective, artificial columns banned.
        let mut cost = vec![0.0; self.ncols + 1];
        cost[..self.ncols].copy_from_slice(&self.phase2_cost);
        for r in 0..self.rows.len() {
            let cb = self.phase2_cost[self.basis[r]];
            if cb != 0.0 {
                let row = self.rows[r].clone();
                for (dst, src) in cost.iter_mut().zip(row.iter()) {
                    *dst -= cb * src;
                }
            }
        }
        match self.run(&mut cost, false)? {
            SimplexEnd::Unbounded => Ok(LpOutcome::Unbounded),
            SimplexEnd::Optimal => {
                let mut split = vec![0.0; self.ncols];
                for r in 0..self.rows.len() {
                    split[self.basis[r]] = self.rows[r][self.ncols];
                }
                let point: Vec<f64> = (0..self.nvars)
                    .map(|k| split[k] - split[self.nvars + k])
                    .collect();
                Ok(LpOutcome::Optimal {
                    value: -cost[self.ncols],
                    point,
                })
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn optimal(lp: &LinearProgram) -> (f64, Vec<f64>) {
        match lp.solve().unwrap() {
            LpOutcome::Optimal { value, point } => (value, point),
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn bounded_box_problem() {
        // min -(x + y), x + y <= 1, 0 <= x, 0 <= y: optimum -1.
        let mut lp = LinearProgram::minimize(vec![-1.0, -1.0]);
        lp.constrain(vec![1.0, 1.0], Relation::Le, 1.0)
            .constrain(vec![1.0, 0.0], Relation::Ge, 0.0)
            .constrain(vec![0.0, 1.0], Relation::Ge, 0.0);
        let (value, point) = optimal(&lp);
        assert_abs_diff_eq!(value, -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(point[0] + point[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn unique_vertex_problem() {
        // min -2x - 3y, x + y <= 4, x + 3y <= 6, x, y >= 0:
        // vertices (0,0), (4,0), (3,1), (0,2); optimum -9 at (3,1).
        let mut lp = LinearProgram::minimize(vec![-2.0, -3.0]);
        lp.constrain(vec![1.0, 1.0], Relation::Le, 4.0)
            .constrain(vec![1.0, 3.0], Relation::Le, 6.0)
            .constrain(vec![1.0, 0.0], Relation::Ge, 0.0)
            .constrain(vec![0.0, 1.0], Relation::Ge, 0.0);
        let (value, point) = optimal(&lp);
        assert_abs_diff_eq!(value, -9.0, epsilon = 1e-9);
        assert_abs_diff_eq!(point[0], 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(point[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn detects_infeasibility() {
        let mut lp = LinearProgram::minimize(vec![1.0]);
        lp.constrain(vec![1.0], Relation::Ge, 1.0)
            .constrain(vec![1.0], Relation::Le, 0.0);
        assert_eq!(lp.solve().unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn detects_unboundedness() {
        let mut lp = LinearProgram::minimize(vec![-1.0]);
        lp.constrain(vec![1.0], Relation::Ge, 0.0);
        assert_eq!(lp.solve().unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn absolute_value_reformulation() {
        // min |w| + |w - 1| over free w: value 1 on the whole segment [0, 1].
        // Variables (w, t1, t2): t1 >= +-w, t2 >= +-(w - 1).
        let mut lp = LinearProgram::minimize(vec![0.0, 1.0, 1.0]);
        lp.constrain(vec![-1.0, 1.0, 0.0], Relation::Ge, 0.0)
            .constrain(vec![1.0, 1.0, 0.0], Relation::Ge, 0.0)
            .constrain(vec![-1.0, 0.0, 1.0], Relation::Ge, -1.0)
            .constrain(vec![1.0, 0.0, 1.0], Relation::Ge, 1.0);
        let (value, point) = optimal(&lp);
        assert_abs_diff_eq!(value, 1.0, epsilon = 1e-9);
        assert!(point[0] >= -1e-9 && point[0] <= 1.0 + 1e-9);
    }

    #[test]
    fn equalities_with_free_variables() {
        // min x + y, x + y = 2, x - y = 0 -> unique point (1, 1).
        let mut lp = LinearProgram::minimize(vec![1.0, 1.0]);
        lp.constrain(vec![1.0, 1.0], Relation::Eq, 2.0)
            .constrain(vec![1.0, -1.0], Relation::Eq, 0.0);
        let (value, point) = optimal(&lp);
        assert_abs_diff_eq!(value, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(point[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(point[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        // Duplicate equality rows exercise the artificial drive-out path.
        let mut lp = LinearProgram::minimize(vec![1.0, 0.0]);
        lp.constrain(vec![1.0, 1.0], Relation::Eq, 2.0)
            .constrain(vec![1.0, 1.0], Relation::Eq, 2.0)
            .constrain(vec![0.0, 1.0], Relation::Le, 1.5);
        let (value, point) = optimal(&lp);
        assert_abs_diff_eq!(value, 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(point[1], 1.5, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // A classic construction that cycles under naive pivoting; Bland's
        // rule must terminate at the optimum value -1/20.
        let mut lp = LinearProgram::minimize(vec![-0.75, 150.0, -0.02, 6.0]);
        lp.constrain(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0)
            .constrain(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0)
            .constrain(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0)
            .constrain(vec![1.0, 0.0, 0.0, 0.0], Relation::Ge, 0.0)
            .constrain(vec![0.0, 1.0, 0.0, 0.0], Relation::Ge, 0.0)
            .constrain(vec![0.0, 0.0, 1.0, 0.0], Relation::Ge, 0.0)
            .constrain(vec![0.0, 0.0, 0.0, 1.0], Relation::Ge, 0.0);
        let (value, point) = optimal(&lp);
        assert_abs_diff_eq!(value, -0.05, epsilon = 1e-9);
        assert_abs_diff_eq!(point[2], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let mut lp = LinearProgram::minimize(vec![1.0, 2.0]);
        lp.constrain(vec![1.0], Relation::Le, 1.0);
        assert!(lp.solve().is_err());
    }

    #[test]
    fn negative_rhs_rows_are_normalized() {
        // min x subject to -x <= -3  (i.e. x >= 3).
        let mut lp = LinearProgram::minimize(vec![1.0]);
        lp.constrain(vec![-1.0], Relation::Le, -3.0);
        let (value, point) = optimal(&lp);
        assert_abs_diff_eq!(value, 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(point[0], 3.0, epsilon = 1e-9);
    }
}
