//! Exact rational simplex for the small dense linear programs produced by
//! the trade optimizers.
//!
//! Two-phase tableau simplex with Bland's anti-cycling rule over arbitrary-
//! precision rationals: deterministic, exact, and entirely adequate for
//! programs with a few dozen variables and constraints.

use num::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::money::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// maximize `objective · x` subject to the row constraints and per-variable
/// bounds `lo ≤ x_i ≤ hi` (`hi = None` meaning unbounded above).
#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub objective: Vec<Rational>,
    pub constraints: Vec<(Vec<Rational>, Relation, Rational)>,
    pub bounds: Vec<(Rational, Option<Rational>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpSolution {
    Optimal {
        values: Vec<Rational>,
        objective: Rational,
    },
    Infeasible,
    Unbounded,
}

struct Tableau {
    /// rows × (columns + 1); last entry of each row is the RHS (kept ≥ 0).
    rows: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    n_columns: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> &Rational {
        &self.rows[i][self.n_columns]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.rows[row][col].clone();
        for x in self.rows[row].iter_mut() {
            *x = &*x / &p;
        }
        for i in 0..self.rows.len() {
            if i != row && !self.rows[i][col].is_zero() {
                let factor = self.rows[i][col].clone();
                for j in 0..=self.n_columns {
                    let delta = &factor * &self.rows[row][j];
                    self.rows[i][j] -= delta;
                }
            }
        }
        self.basis[row] = col;
    }

    /// One phase of primal simplex with Bland's rule, maximizing `cost`.
    /// Entering candidates are restricted to columns `< allowed`.
    /// Returns false on unboundedness.
    fn run(&mut self, cost: &[Rational], allowed: usize) -> bool {
        loop {
            // Reduced costs: cost_j − Σ_i cost_{basis_i} · tab[i][j].
            let mut entering = None;
            for j in 0..allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut rc = cost[j].clone();
                for (i, &b) in self.basis.iter().enumerate() {
                    if !cost[b].is_zero() {
                        rc -= &cost[b] * &self.rows[i][j];
                    }
                }
                if rc.is_positive() {
                    entering = Some(j);
                    break; // Bland: smallest improving index
                }
            }
            let Some(col) = entering else {
                return true;
            };
            // Ratio test; ties broken by smallest basis index (Bland).
            let mut leaving: Option<(usize, Rational)> = None;
            for i in 0..self.rows.len() {
                if self.rows[i][col].is_positive() {
                    let ratio = self.rhs(i) / &self.rows[i][col];
                    let better = match &leaving {
                        None => true,
                        Some((li, lr)) => {
                            ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li])
                        }
                    };
                    if better {
                        leaving = Some((i, ratio));
                    }
                }
            }
            let Some((row, _)) = leaving else {
                return false;
            };
            self.pivot(row, col);
        }
    }
}

/// Solves the linear program exactly.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    let n = lp.objective.len();
    if lp.bounds.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} objective terms, {} bounds",
            n,
            lp.bounds.len()
        )));
    }
    for (row, _, _) in &lp.constraints {
        if row.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "constraint row with {} terms, expected {}",
                row.len(),
                n
            )));
        }
    }
    for (lo, hi) in &lp.bounds {
        if let Some(h) = hi {
            if h < lo {
                return Ok(LpSolution::Infeasible);
            }
        }
    }

    // Shift to y = x − lo ≥ 0; finite upper bounds become extra rows.
    let lows: Vec<&Rational> = lp.bounds.iter().map(|(lo, _)| lo).collect();
    let mut rows: Vec<(Vec<Rational>, Relation, Rational)> = Vec::new();
    for (coeffs, rel, bound) in &lp.constraints {
        let shift: Rational = coeffs.iter().zip(&lows).map(|(c, lo)| c * *lo).sum();
        rows.push((coeffs.clone(), *rel, bound - shift));
    }
    for (i, (lo, hi)) in lp.bounds.iter().enumerate() {
        if let Some(h) = hi {
            let mut coeffs = vec![Rational::zero(); n];
            coeffs[i] = Rational::one();
            rows.push((coeffs, Relation::Le, h - lo));
        }
    }
    // Normalize RHS ≥ 0.
    for (coeffs, rel, bound) in rows.iter_mut() {
        if bound.is_negative() {
            for c in coeffs.iter_mut() {
                *c = -c.clone();
            }
            *bound = -bound.clone();
            *rel = match *rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let m = rows.len();
    let n_slack = rows
        .iter()
        .filter(|(_, rel, _)| !matches!(rel, Relation::Eq))
        .count();
    let n_art = rows
        .iter()
        .filter(|(_, rel, _)| !matches!(rel, Relation::Le))
        .count();
    let n_columns = n + n_slack + n_art;
    let mut tab = Tableau {
        rows: vec![vec![Rational::zero(); n_columns + 1]; m],
        basis: vec![0; m],
        n_columns,
    };
    let mut slack_at = n;
    let mut art_at = n + n_slack;
    for (i, (coeffs, rel, bound)) in rows.iter().enumerate() {
        for (j, c) in coeffs.iter().enumerate() {
            tab.rows[i][j] = c.clone();
        }
        tab.rows[i][n_columns] = bound.clone();
        match rel {
            Relation::Le => {
                tab.rows[i][slack_at] = Rational::one();
                tab.basis[i] = slack_at;
                slack_at += 1;
            }
            Relation::Ge => {
                tab.rows[i][slack_at] = -Rational::one();
                slack_at += 1;
                tab.rows[i][art_at] = Rational::one();
                tab.basis[i] = art_at;
                art_at += 1;
            }
            Relation::Eq => {
                tab.rows[i][art_at] = Rational::one();
                tab.basis[i] = art_at;
                art_at += 1;
            }
        }
    }

    // Phase 1: drive the artificials to zero.
    if n_art > 0 {
        let mut cost = vec![Rational::zero(); n_columns];
        for j in (n + n_slack)..n_columns {
            cost[j] = -Rational::one();
        }
        if !tab.run(&cost, n_columns) {
            // Phase-1 objective is bounded by 0; cannot be unbounded.
            return Err(Error::LpInfeasible("phase-1 unbounded".into()));
        }
        let attained: Rational = tab
            .basis
            .iter()
            .enumerate()
            .map(|(i, &b)| &cost[b] * tab.rhs(i))
            .sum();
        if !attained.is_zero() {
            return Ok(LpSolution::Infeasible);
        }
        // Pivot remaining basic artificials (at value 0) out, or drop their
        // rows when redundant.
        let mut i = 0;
        while i < tab.rows.len() {
            if tab.basis[i] >= n + n_slack {
                let col = (0..n + n_slack).find(|&j| !tab.rows[i][j].is_zero());
                match col {
                    Some(j) => tab.pivot(i, j),
                    None => {
                        tab.rows.remove(i);
                        tab.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }

    // Phase 2: the real objective on the shifted variables; artificial
    // columns are excluded from entering.
    let mut cost = vec![Rational::zero(); n_columns];
    for j in 0..n {
        cost[j] = lp.objective[j].clone();
    }
    if !tab.run(&cost, n + n_slack) {
        return Ok(LpSolution::Unbounded);
    }

    let mut y = vec![Rational::zero(); n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            y[b] = tab.rhs(i).clone();
        }
    }
    let values: Vec<Rational> = y.iter().zip(&lows).map(|(yv, lo)| yv + *lo).collect();
    let objective: Rational = values
        .iter()
        .zip(&lp.objective)
        .map(|(v, c)| v * c)
        .sum();
    Ok(LpSolution::Optimal { values, objective })
}
