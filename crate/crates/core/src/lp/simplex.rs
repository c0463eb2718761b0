//! Dense two-phase primal simplex with Bland's anti-cycling rule.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::{Error, Result};

/// Phase-1 optimum above this (scaled by `1 + ||b||`) means infeasible.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Constraint residual allowed in a reported optimum (scaled by `1 + ||b||`).
pub const REPORTING_TOL: f64 = 1e-8;
/// Pivot elements at or below this magnitude are never used.
pub const PIVOT_TOL: f64 = 1e-11;
/// Pivots below this fraction of the largest positive column entry are skipped.
const RELATIVE_PIVOT_TOL: f64 = 1e-9;
/// Reduced costs must exceed this to enter the basis.
const REDUCED_COST_TOL: f64 = 1e-10;
/// Entries this small are treated as exact zeros in the ratio test.
const ZERO_TOL: f64 = 1e-14;
const MAX_TINY_PIVOTS: usize = 8;
const MAX_PIVOTS: usize = 200_000;

/// `maximize c.x  s.t.  A_eq x = b_eq,  A_le x <= b_le,  x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    eq_constraints: Vec<(Vec<f64>, f64)>,
    ineq_constraints: Vec<(Vec<f64>, f64)>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        Self { objective, eq_constraints: Vec::new(), ineq_constraints: Vec::new() }
    }

    /// Adds `coeffs . x = rhs`.
    pub fn add_eq(&mut self, coeffs: Vec<f64>, rhs: f64) -> &mut Self {
        self.eq_constraints.push((coeffs, rhs));
        self
    }

    /// Adds `coeffs . x <= rhs`.
    pub fn add_le(&mut self, coeffs: Vec<f64>, rhs: f64) -> &mut Self {
        self.ineq_constraints.push((coeffs, rhs));
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn eq_constraints(&self) -> &[(Vec<f64>, f64)] {
        &self.eq_constraints
    }

    pub fn ineq_constraints(&self) -> &[(Vec<f64>, f64)] {
        &self.ineq_constraints
    }

    /// Plain-text listing, one line per row: `max c..`, `eq a.. = b`, `le a.. <= b`.
    pub fn debug_listing(&self) -> String {
        let mut out = String::new();
        let join = |v: &[f64]| v.iter().map(|c| format!("{c}")).collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "max {}", join(&self.objective));
        for (a, b) in &self.eq_constraints {
            let _ = writeln!(out, "eq {} = {b}", join(a));
        }
        for (a, b) in &self.ineq_constraints {
            let _ = writeln!(out, "le {} <= {b}", join(a));
        }
        out
    }

    fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidModel("objective has non-finite coefficients".into()));
        }
        for (a, b) in self.eq_constraints.iter().chain(&self.ineq_constraints) {
            if a.len() != n {
                return Err(Error::InvalidModel(format!("constraint has {} coefficients, expected {n}", a.len())));
            }
            if a.iter().any(|c| !c.is_finite()) || b.is_nan() {
                return Err(Error::InvalidModel("constraint has non-finite coefficients".into()));
            }
        }
        if self.eq_constraints.iter().any(|(_, b)| !b.is_finite()) {
            return Err(Error::InvalidModel("equality with infinite right-hand side".into()));
        }
        Ok(())
    }

    /// Max constraint violation of `x` (equalities in absolute value).
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        let dot = |a: &[f64]| a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>();
        let eq = self.eq_constraints.iter().map(|(a, b)| (dot(a) - b).abs());
        let le = self.ineq_constraints.iter().map(|(a, b)| (dot(a) - b).max(0.0));
        let bounds = x.iter().map(|&v| (-v).max(0.0));
        eq.chain(le).chain(bounds).fold(0.0, f64::max)
    }

    fn rhs_scale(&self) -> f64 {
        1.0 + self
            .eq_constraints
            .iter()
            .chain(&self.ineq_constraints)
            .map(|(_, b)| b.abs())
            .filter(|b| b.is_finite())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    /// Primal point; all zeros unless `status` is `Optimal`.
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub status: LpStatus,
}

impl LpSolution {
    fn without_point(n: usize, status: LpStatus) -> Self {
        let objective_value = match status {
            LpStatus::Unbounded => f64::INFINITY,
            _ => f64::NAN,
        };
        Self { x: vec![0.0; n], objective_value, status }
    }
}

/// Solves `lp` with the two-phase primal simplex method.
///
/// Inequalities with right-hand side `+inf` are vacuous and dropped; one with
/// `-inf` makes the program infeasible.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.num_vars();
    if lp.ineq_constraints.iter().any(|(_, b)| *b == f64::NEG_INFINITY) {
        return Ok(LpSolution::without_point(n, LpStatus::Infeasible));
    }
    let mut tableau = Tableau::build(lp);

    let scale = lp.rhs_scale();
    if tableau.num_artificial > 0 {
        let phase_one: Vec<f64> = (0..tableau.cols)
            .map(|j| if tableau.is_artificial(j) { -1.0 } else { 0.0 })
            .collect();
        match tableau.optimize(&phase_one)? {
            Outcome::Optimal => {}
            // The phase-1 objective is bounded above by zero.
            Outcome::Unbounded => return Err(Error::NumericalBreakdown),
        }
        let infeasibility: f64 = (0..tableau.rows())
            .filter(|&i| tableau.is_artificial(tableau.basis[i]))
            .map(|i| tableau.rhs(i))
            .sum();
        if infeasibility > FEASIBILITY_TOL * scale {
            return Ok(LpSolution::without_point(n, LpStatus::Infeasible));
        }
        tableau.drive_out_artificials();
    }
    tableau.forbid_artificials();

    let mut phase_two = vec![0.0; tableau.cols];
    phase_two[..n].copy_from_slice(&lp.objective);
    if let Outcome::Unbounded = tableau.optimize(&phase_two)? {
        return Ok(LpSolution::without_point(n, LpStatus::Unbounded));
    }

    let mut x = vec![0.0; n];
    for i in 0..tableau.rows() {
        let j = tableau.basis[i];
        if j < n {
            x[j] = tableau.rhs(i).max(0.0);
        }
    }
    if lp.max_residual(&x) > REPORTING_TOL * scale {
        return Err(Error::NumericalBreakdown);
    }
    let objective_value = lp.objective.iter().zip(&x).map(|(c, x)| c * x).sum();
    Ok(LpSolution { x, objective_value, status: LpStatus::Optimal })
}

enum Outcome {
    Optimal,
    Unbounded,
}

/// Row-major tableau `[A | b]` with columns `[x | slack | artificial]`.
struct Tableau {
    data: Vec<f64>,
    cols: usize,
    width: usize,
    basis: Vec<usize>,
    first_artificial: usize,
    num_artificial: usize,
    allowed: Vec<bool>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let ineq: Vec<&(Vec<f64>, f64)> =
            lp.ineq_constraints.iter().filter(|(_, b)| *b != f64::INFINITY).collect();
        let num_slack = ineq.len();
        // Equalities always get an artificial; inequalities only when rhs < 0.
        let num_artificial = lp.eq_constraints.len() + ineq.iter().filter(|(_, b)| *b < 0.0).count();
        let rows = lp.eq_constraints.len() + ineq.len();
        let cols = n + num_slack + num_artificial;
        let width = cols + 1;
        let first_artificial = n + num_slack;

        let mut data = vec![0.0; rows * width];
        let mut basis = Vec::with_capacity(rows);
        let mut next_artificial = first_artificial;
        let mut row = 0;
        for (a, b) in &lp.eq_constraints {
            let sign = if *b < 0.0 { -1.0 } else { 1.0 };
            let r = &mut data[row * width..(row + 1) * width];
            for (dst, src) in r[..n].iter_mut().zip(a) {
                *dst = sign * src;
            }
            r[next_artificial] = 1.0;
            r[cols] = sign * b;
            basis.push(next_artificial);
            next_artificial += 1;
            row += 1;
        }
        for (k, (a, b)) in ineq.iter().enumerate() {
            let sign = if *b < 0.0 { -1.0 } else { 1.0 };
            let r = &mut data[row * width..(row + 1) * width];
            for (dst, src) in r[..n].iter_mut().zip(a) {
                *dst = sign * src;
            }
            r[n + k] = sign;
            r[cols] = sign * b;
            if sign < 0.0 {
                r[next_artificial] = 1.0;
                basis.push(next_artificial);
                next_artificial += 1;
            } else {
                basis.push(n + k);
            }
            row += 1;
        }
        Self {
            data,
            cols,
            width,
            basis,
            first_artificial,
            num_artificial,
            allowed: vec![true; cols],
        }
    }

    fn rows(&self) -> usize {
        self.basis.len()
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.first_artificial
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.cols)
    }

    fn forbid_artificials(&mut self) {
        for j in self.first_artificial..self.cols {
            self.allowed[j] = false;
        }
    }

    fn reduced_costs(&self, costs: &[f64]) -> Vec<f64> {
        let mut reduced = costs.to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = costs[b];
            if cb == 0.0 {
                continue;
            }
            for (j, r) in reduced.iter_mut().enumerate() {
                *r -= cb * self.at(i, j);
            }
        }
        reduced
    }

    /// Primal simplex iterations maximizing `costs . z` from the current basis.
    fn optimize(&mut self, costs: &[f64]) -> Result<Outcome> {
        let mut reduced = self.reduced_costs(costs);
        let mut tiny_pivots = 0;
        for _ in 0..MAX_PIVOTS {
            let mut pivot = None;
            let mut unbounded = false;
            // Bland: lowest-index improving column.
            for j in 0..self.cols {
                if !self.allowed[j] || reduced[j] <= REDUCED_COST_TOL {
                    continue;
                }
                match self.ratio_test(j) {
                    Ratio::Row(i) => {
                        pivot = Some((i, j));
                        break;
                    }
                    Ratio::Unbounded => {
                        unbounded = true;
                        break;
                    }
                    Ratio::TinyPivot => {
                        tiny_pivots += 1;
                        if tiny_pivots > MAX_TINY_PIVOTS {
                            return Err(Error::NumericalBreakdown);
                        }
                    }
                }
            }
            if unbounded {
                return Ok(Outcome::Unbounded);
            }
            let Some((i, j)) = pivot else {
                return Ok(Outcome::Optimal);
            };
            self.pivot(i, j);
            let factor = reduced[j];
            for (k, r) in reduced.iter_mut().enumerate() {
                *r -= factor * self.at(i, k);
            }
            reduced[j] = 0.0;
        }
        Err(Error::NumericalBreakdown)
    }

    /// Minimum-ratio row for entering column `j`.
    ///
    /// Entries small relative to the column are skipped; ties go to the lowest
    /// basic index.
    fn ratio_test(&self, j: usize) -> Ratio {
        let col_max = (0..self.rows()).map(|i| self.at(i, j)).fold(0.0, f64::max);
        let threshold = PIVOT_TOL.max(RELATIVE_PIVOT_TOL * col_max);
        let mut best: Option<(usize, f64)> = None;
        let mut saw_tiny = false;
        for i in 0..self.rows() {
            let a = self.at(i, j);
            if a <= ZERO_TOL {
                continue;
            }
            if a <= threshold {
                saw_tiny = true;
                continue;
            }
            let ratio = self.rhs(i).max(0.0) / a;
            let better = match best {
                None => true,
                Some((bi, br)) => {
                    let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                    if tie {
                        self.basis[i] < self.basis[bi]
                    } else {
                        ratio < br
                    }
                }
            };
            if better {
                best = Some((i, ratio));
            }
        }
        match best {
            Some((i, _)) => Ratio::Row(i),
            None if saw_tiny => Ratio::TinyPivot,
            None => Ratio::Unbounded,
        }
    }

    fn pivot(&mut self, i: usize, j: usize) {
        let w = self.width;
        let p = self.at(i, j);
        for k in 0..w {
            self.data[i * w + k] /= p;
        }
        self.data[i * w + j] = 1.0;
        let (before, rest) = self.data.split_at_mut(i * w);
        let (pivot_row, after) = rest.split_at_mut(w);
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let factor = row[j];
            if factor == 0.0 {
                continue;
            }
            for (dst, src) in row.iter_mut().zip(pivot_row.iter()) {
                *dst -= factor * src;
            }
            row[j] = 0.0;
        }
        self.basis[i] = j;
    }

    /// After a feasible phase 1, pivot zero-level artificials out of the basis;
    /// rows where that is impossible are redundant and removed.
    fn drive_out_artificials(&mut self) {
        let mut i = 0;
        while i < self.rows() {
            if !self.is_artificial(self.basis[i]) {
                i += 1;
                continue;
            }
            let entering = (0..self.first_artificial)
                .filter(|&j| self.at(i, j).abs() > PIVOT_TOL)
                .max_by(|&a, &b| self.at(i, a).abs().total_cmp(&self.at(i, b).abs()));
            match entering {
                Some(j) => {
                    self.pivot(i, j);
                    i += 1;
                }
                None => {
                    self.data.drain(i * self.width..(i + 1) * self.width);
                    self.basis.remove(i);
                }
            }
        }
    }
}

enum Ratio {
    Row(usize),
    Unbounded,
    TinyPivot,
}
