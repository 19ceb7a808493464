//! Dense two-phase simplex over equality-constrained standard form.
//!
//! Solves min/max cᵀx subject to A x = b, x ≥ 0, and answers pure
//! feasibility questions. Problems in this crate are tiny (hundreds of
//! variables, dozens of constraints), so a dense tableau with Bland's rule
//! is plenty.

use thiserror::Error;

/// Pivot tolerance: entries below this count as zero.
const EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("constraint rows have inconsistent lengths")]
    RaggedRows,
    #[error("simplex iteration limit exceeded")]
    IterationLimit,
    #[error("problem is unbounded")]
    Unbounded,
}

/// Equality-constrained linear program: A x = b, x ≥ 0.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    n_vars: usize,
}

/// Outcome of a feasibility search.
#[derive(Debug, Clone)]
pub struct Feasibility {
    pub feasible: bool,
    /// Residual infeasibility mass left by phase 1 (≈ 0 when feasible).
    pub gap: f64,
    /// A feasible point when one exists.
    pub witness: Option<Vec<f64>>,
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        Self { rows: Vec::new(), rhs: Vec::new(), n_vars }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_constraints(&self) -> usize {
        self.rows.len()
    }

    /// Adds the equality Σ coeffs·x = rhs.
    pub fn add_equality(&mut self, coeffs: Vec<f64>, rhs: f64) -> Result<(), LpError> {
        if coeffs.len() != self.n_vars {
            return Err(LpError::RaggedRows);
        }
        self.rows.push(coeffs);
        self.rhs.push(rhs);
        Ok(())
    }

    /// Adds a sparse equality from (index, coefficient) pairs.
    pub fn add_sparse_equality(&mut self, terms: &[(usize, f64)], rhs: f64) -> Result<(), LpError> {
        let mut coeffs = vec![0.0; self.n_vars];
        for &(i, v) in terms {
            coeffs[i] += v;
        }
        self.add_equality(coeffs, rhs)
    }

    /// Phase-1 feasibility: is there x ≥ 0 with A x = b?
    pub fn feasibility(&self) -> Result<Feasibility, LpError> {
        let mut t = Tableau::phase1(self);
        t.run()?;
        let gap = t.objective_value().max(0.0);
        if gap <= EPS {
            Ok(Feasibility { feasible: true, gap, witness: Some(t.extract(self.n_vars)) })
        } else {
            Ok(Feasibility { feasible: false, gap, witness: None })
        }
    }

    /// Maximizes cᵀx over the feasible region. Returns `None` when the
    /// region is empty.
    pub fn maximize(&self, objective: &[f64]) -> Result<Option<(Vec<f64>, f64)>, LpError> {
        assert_eq!(objective.len(), self.n_vars);
        let mut t = Tableau::phase1(self);
        t.run()?;
        if t.objective_value() > EPS {
            return Ok(None);
        }
        t.to_phase2(objective)?;
        t.run()?;
        let x = t.extract(self.n_vars);
        let value = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(Some((x, value)))
    }
}

/// Simplex tableau in the classic layout: one row per constraint plus an
/// objective row; artificial variables occupy the last `m` columns during
/// phase 1.
struct Tableau {
    /// rows[m] is the objective row; columns: vars, artificials, rhs.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_total: usize,
    n_structural: usize,
    phase1: bool,
}

impl Tableau {
    fn phase1(lp: &LinearProgram) -> Self {
        let m = lp.rows.len();
        let n = lp.n_vars;
        let n_total = n + m;
        let mut rows = Vec::with_capacity(m + 1);
        for (r, row) in lp.rows.iter().enumerate() {
            let sign = if lp.rhs[r] < 0.0 { -1.0 } else { 1.0 };
            let mut t = vec![0.0; n_total + 1];
            for (j, &v) in row.iter().enumerate() {
                t[j] = sign * v;
            }
            t[n + r] = 1.0;
            t[n_total] = sign * lp.rhs[r];
            rows.push(t);
        }
        // Objective: minimize Σ artificials, expressed as max −Σ artificials.
        // Reduced costs start as the negative sum of constraint rows so the
        // artificial basis prices to zero.
        let mut obj = vec![0.0; n_total + 1];
        for r in 0..m {
            for j in 0..=n_total {
                obj[j] -= rows[r][j];
            }
        }
        for r in 0..m {
            obj[n + r] = 0.0;
        }
        let basis = (n..n_total).collect();
        let mut t = Tableau { rows, basis, n_total, n_structural: n, phase1: true };
        t.rows.push(obj);
        t
    }

    fn objective_value(&self) -> f64 {
        -self.rows[self.rows.len() - 1][self.n_total]
    }

    fn to_phase2(&mut self, objective: &[f64]) -> Result<(), LpError> {
        let m = self.rows.len() - 1;
        let n = self.n_structural;
        // Drive any artificial still in the basis out of it (degenerate rows).
        for r in 0..m {
            if self.basis[r] >= n {
                let pivot_col = (0..n).find(|&j| self.rows[r][j].abs() > EPS);
                match pivot_col {
                    Some(j) => self.pivot(r, j),
                    // Row is all zeros over structural vars: redundant
                    // constraint, safe to leave (artificial stays at 0).
                    None => {}
                }
            }
        }
        // New objective row (maximize): reduced costs = −c, then price out
        // the current basis.
        let obj_idx = self.rows.len() - 1;
        for j in 0..=self.n_total {
            self.rows[obj_idx][j] = 0.0;
        }
        for (j, &cj) in objective.iter().enumerate() {
            self.rows[obj_idx][j] = -cj;
        }
        for r in 0..m {
            let b = self.basis[r];
            let coef = self.rows[obj_idx][b];
            if coef.abs() > 0.0 {
                for j in 0..=self.n_total {
                    self.rows[obj_idx][j] -= coef * self.rows[r][j];
                }
            }
        }
        self.phase1 = false;
        Ok(())
    }

    /// Runs simplex to optimality with Bland's rule.
    fn run(&mut self) -> Result<(), LpError> {
        let m = self.rows.len() - 1;
        let obj_idx = m;
        let max_iters = 50_000;
        for _ in 0..max_iters {
            // Entering column: first with negative reduced cost (Bland).
            // During phase 2, artificial columns are not eligible.
            let limit = if self.phase1 { self.n_total } else { self.n_structural };
            let entering = (0..limit).find(|&j| self.rows[obj_idx][j] < -EPS);
            let Some(col) = entering else {
                return Ok(());
            };
            // Leaving row: min ratio, ties by smallest basis index (Bland).
            let mut best: Option<(usize, f64)> = None;
            for r in 0..m {
                let a = self.rows[r][col];
                if a > EPS {
                    let ratio = self.rows[r][self.n_total] / a;
                    match best {
                        None => best = Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio - 1e-12
                                || (ratio < bratio + 1e-12 && self.basis[r] < self.basis[br])
                            {
                                best = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            let Some((row, _)) = best else {
                return Err(LpError::Unbounded);
            };
            self.pivot(row, col);
        }
        Err(LpError::IterationLimit)
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let pivot = self.rows[row][col];
        for v in &mut self.rows[row] {
            *v /= pivot;
        }
        for r in 0..self.rows.len() {
            if r == row {
                continue;
            }
            let factor = self.rows[r][col];
            if factor.abs() > 0.0 {
                for j in 0..=self.n_total {
                    self.rows[r][j] -= factor * self.rows[row][j];
                }
            }
        }
        self.basis[row] = col;
    }

    fn extract(&self, n: usize) -> Vec<f64> {
        let mut x = vec![0.0; n];
        for (r, &b) in self.basis.iter().enumerate() {
            if b < n {
                x[b] = self.rows[r][self.n_total].max(0.0);
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplest_feasible_system() {
        let mut lp = LinearProgram::new(2);
        lp.add_equality(vec![1.0, 1.0], 1.0).unwrap();
        let f = lp.feasibility().unwrap();
        assert!(f.feasible);
        let x = f.witness.unwrap();
        assert!((x[0] + x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_system_is_infeasible() {
        let mut lp = LinearProgram::new(2);
        lp.add_equality(vec![1.0, 1.0], 1.0).unwrap();
        lp.add_equality(vec![1.0, 1.0], 2.0).unwrap();
        let f = lp.feasibility().unwrap();
        assert!(!f.feasible);
        assert!(f.gap > 0.5);
    }

    #[test]
    fn negative_requirement_with_nonnegative_vars_is_infeasible() {
        let mut lp = LinearProgram::new(2);
        lp.add_equality(vec![1.0, 2.0], -1.0).unwrap();
        assert!(!lp.feasibility().unwrap().feasible);
    }

    #[test]
    fn maximize_on_a_segment() {
        let mut lp = LinearProgram::new(2);
        lp.add_equality(vec![1.0, 1.0], 1.0).unwrap();
        let (x, v) = lp.maximize(&[3.0, 1.0]).unwrap().unwrap();
        assert!((v - 3.0).abs() < 1e-9);
        assert!((x[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn maximize_with_slack_structure() {
        // max x + y s.t. x + y + s1 = 1, x + 2y + s2 = 1.5 → optimum 1.
        let mut lp = LinearProgram::new(4);
        lp.add_equality(vec![1.0, 1.0, 1.0, 0.0], 1.0).unwrap();
        lp.add_equality(vec![1.0, 2.0, 0.0, 1.0], 1.5).unwrap();
        let (_, v) = lp.maximize(&[1.0, 1.0, 0.0, 0.0]).unwrap().unwrap();
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn redundant_constraints_are_tolerated() {
        let mut lp = LinearProgram::new(2);
        lp.add_equality(vec![1.0, 1.0], 1.0).unwrap();
        lp.add_equality(vec![2.0, 2.0], 2.0).unwrap();
        let f = lp.feasibility().unwrap();
        assert!(f.feasible);
    }

    #[test]
    fn sparse_rows_accumulate_duplicates() {
        let mut lp = LinearProgram::new(3);
        lp.add_sparse_equality(&[(0, 1.0), (0, 1.0), (2, 1.0)], 2.0).unwrap();
        let f = lp.feasibility().unwrap();
        assert!(f.feasible);
        let x = f.witness.unwrap();
        assert!((2.0 * x[0] + x[2] - 2.0).abs() < 1e-9);
    }
}
