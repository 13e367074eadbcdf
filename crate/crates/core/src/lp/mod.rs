//! Dense linear programming and linear-system solving.
//!
//! [`solve_lp`] is a two-phase tableau simplex using Bland's rule for both
//! the entering and the leaving variable, so the pivot sequence (and the
//! returned vertex) is a deterministic function of the input.
//! [`solve_lp_lexicographic`] continues from the optimal tableau of each
//! objective, freezing every nonbasic column whose reduced cost is strictly
//! positive, which restricts later objectives to the optimal face of the
//! earlier ones.

mod linsys;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

pub use linsys::{solve_linear_system, SystemSolution};

use crate::num::abs;

/// Feasibility tolerance for constraint satisfaction and phase-one optimum.
pub const FEAS_TOL: f64 = 1e-7;
/// Pivots smaller than this are a numerical breakdown.
pub const PIVOT_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub sense: Sense,
    pub constraints: Vec<Constraint>,
    /// Per-variable `[lo, hi]`; infinite ends allowed.
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    /// A program over `num_vars` variables with default bounds `[0, +inf)`.
    pub fn new(num_vars: usize, sense: Sense) -> Self {
        Self {
            objective: vec![0.0; num_vars],
            sense,
            constraints: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    /// Largest constraint or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            let v = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => abs(lhs - c.rhs),
            };
            worst = worst.max(v);
        }
        for (&(lo, hi), &v) in self.bounds.iter().zip(x) {
            worst = worst.max(lo - v).max(v - hi);
        }
        worst
    }

    /// Like [`LinearProgram::max_violation`] but each row's violation is
    /// divided by its largest coefficient (when above one).
    fn max_relative_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            let v = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => abs(lhs - c.rhs),
            };
            let scale = c.coeffs.iter().fold(1.0f64, |m, a| m.max(abs(*a)));
            worst = worst.max(v / scale);
        }
        for (&(lo, hi), &v) in self.bounds.iter().zip(x) {
            worst = worst.max(lo - v).max(v - hi);
        }
        worst
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(LpError::Malformed(format!("{} bounds for {n} variables", self.bounds.len())));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(LpError::Malformed(format!(
                    "row {i} has {} coefficients, expected {n}",
                    c.coeffs.len()
                )));
            }
            if c.coeffs.iter().any(|a| !a.is_finite()) || !c.rhs.is_finite() {
                return Err(LpError::Malformed(format!("row {i} has a non-finite entry")));
            }
        }
        if self.objective.iter().any(|a| !a.is_finite()) {
            return Err(LpError::Malformed("non-finite objective coefficient".into()));
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(LpError::Malformed(format!("variable {j} has bounds [{lo}, {hi}]")));
            }
        }
        Ok(())
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
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective_value: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("numerical breakdown in simplex pivot (value {0:e})")]
    DegeneratePivot(f64),
    #[error("simplex exceeded {0} pivots")]
    PivotLimit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub feas_tol: f64,
    pub pivot_tol: f64,
    /// Reduced costs below `-cost_tol` are improving.
    pub cost_tol: f64,
    /// Smallest column entry eligible in the ratio test.
    pub ratio_tol: f64,
    /// Leaving rows need a pivot at least this fraction of the largest
    /// eligible one.
    pub pivot_floor: f64,
    pub max_pivots: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            feas_tol: FEAS_TOL,
            pivot_tol: PIVOT_TOL,
            cost_tol: 1e-9,
            ratio_tol: 1e-9,
            pivot_floor: 1e-3,
            max_pivots: 200_000,
        }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_lp_lexicographic_with(lp, &[], &SolverConfig::default())
}

pub fn solve_lp_with(lp: &LinearProgram, config: &SolverConfig) -> Result<LpSolution, LpError> {
    solve_lp_lexicographic_with(lp, &[], config)
}

/// Optimises `lp.objective`, then each of `secondary` in order (with the
/// same sense), each restricted to the optimal face of its predecessors.
pub fn solve_lp_lexicographic(lp: &LinearProgram, secondary: &[Vec<f64>]) -> Result<LpSolution, LpError> {
    solve_lp_lexicographic_with(lp, secondary, &SolverConfig::default())
}

/// On a numerical breakdown the solve is repeated with a stronger
/// preference for large pivots and then with plain Bland leaving rows.
pub fn solve_lp_lexicographic_with(
    lp: &LinearProgram,
    secondary: &[Vec<f64>],
    config: &SolverConfig,
) -> Result<LpSolution, LpError> {
    let mut result = solve_once(lp, secondary, config);
    for floor in [0.1, 0.0] {
        match result {
            Err(LpError::DegeneratePivot(_) | LpError::PivotLimit(_)) if config.pivot_floor != floor => {
                let retry = SolverConfig {
                    pivot_floor: floor,
                    ..*config
                };
                result = solve_once(lp, secondary, &retry);
            }
            _ => break,
        }
    }
    result
}

fn solve_once(lp: &LinearProgram, secondary: &[Vec<f64>], config: &SolverConfig) -> Result<LpSolution, LpError> {
    lp.validate()?;
    if let Some(obj) = secondary.iter().find(|o| o.len() != lp.num_vars()) {
        return Err(LpError::Malformed(format!(
            "secondary objective of length {}, expected {}",
            obj.len(),
            lp.num_vars()
        )));
    }
    let std = StandardForm::build(lp);
    let mut tab = Tableau::new(&std, config);

    let phase_one = tab.phase_one()?;
    if phase_one > config.feas_tol {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: vec![0.0; lp.num_vars()],
            objective_value: f64::NAN,
        });
    }
    tab.drive_out_artificials()?;

    let mut fixed = vec![false; tab.width];
    for (level, objective) in core::iter::once(&lp.objective).chain(secondary).enumerate() {
        let costs = std.costs(objective, lp.sense);
        match tab.optimise(&costs, &fixed)? {
            Outcome::Optimal => {}
            Outcome::Unbounded => {
                if level == 0 {
                    return Ok(LpSolution {
                        status: LpStatus::Unbounded,
                        x: vec![0.0; lp.num_vars()],
                        objective_value: f64::NAN,
                    });
                }
                // bounded on the optimal face of the earlier levels up to
                // rounding; keep the current vertex
                break;
            }
        }
        let reduced = tab.reduced_costs(&costs);
        for (j, d) in reduced.iter().enumerate() {
            if *d > config.cost_tol && !tab.is_basic(j) {
                fixed[j] = true;
            }
        }
    }

    let x = std.recover(&tab.primal());
    let violation = lp.max_relative_violation(&x);
    if violation > config.feas_tol {
        return Err(LpError::DegeneratePivot(violation));
    }
    let objective_value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective_value,
    })
}

/// How an original variable is expressed in the nonnegative columns.
#[derive(Debug, Clone)]
enum VarMap {
    /// `x = offset + y`
    Shifted { col: usize, offset: f64 },
    /// `x = offset - y`
    Flipped { col: usize, offset: f64 },
    /// `x = y+ - y-`
    Split { pos: usize, neg: usize },
}

/// `Σ a_k y_k (≤|=) b` with `b ≥ 0` and `y ≥ 0`.
struct StandardForm {
    num_cols: usize,
    rows: Vec<(Vec<f64>, Relation, f64)>,
    vars: Vec<VarMap>,
}

impl StandardForm {
    fn build(lp: &LinearProgram) -> Self {
        let mut vars = Vec::with_capacity(lp.num_vars());
        let mut num_cols = 0;
        let mut extra_rows = Vec::new();
        for &(lo, hi) in &lp.bounds {
            if lo.is_finite() {
                vars.push(VarMap::Shifted { col: num_cols, offset: lo });
                if hi.is_finite() {
                    extra_rows.push((num_cols, hi - lo));
                }
                num_cols += 1;
            } else if hi.is_finite() {
                vars.push(VarMap::Flipped { col: num_cols, offset: hi });
                num_cols += 1;
            } else {
                vars.push(VarMap::Split {
                    pos: num_cols,
                    neg: num_cols + 1,
                });
                num_cols += 2;
            }
        }

        let mut rows = Vec::with_capacity(lp.constraints.len() + extra_rows.len());
        for c in &lp.constraints {
            let mut coeffs = vec![0.0; num_cols];
            let mut rhs = c.rhs;
            for (a, map) in c.coeffs.iter().zip(&vars) {
                if *a == 0.0 {
                    continue;
                }
                match *map {
                    VarMap::Shifted { col, offset } => {
                        coeffs[col] += a;
                        rhs -= a * offset;
                    }
                    VarMap::Flipped { col, offset } => {
                        coeffs[col] -= a;
                        rhs -= a * offset;
                    }
                    VarMap::Split { pos, neg } => {
                        coeffs[pos] += a;
                        coeffs[neg] -= a;
                    }
                }
            }
            rows.push((coeffs, c.relation, rhs));
        }
        for (col, ub) in extra_rows {
            let mut coeffs = vec![0.0; num_cols];
            coeffs[col] = 1.0;
            rows.push((coeffs, Relation::Le, ub));
        }

        for (coeffs, relation, rhs) in rows.iter_mut() {
            // equilibrate
            let scale = coeffs.iter().fold(0.0f64, |m, a| m.max(abs(*a)));
            if scale > 0.0 {
                coeffs.iter_mut().for_each(|a| *a /= scale);
                *rhs /= scale;
            }
            if *rhs < 0.0 || (*rhs == 0.0 && *relation == Relation::Ge) {
                coeffs.iter_mut().for_each(|a| *a = -*a);
                *rhs = -*rhs;
                *relation = match *relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
        }
        Self { num_cols, rows, vars }
    }

    /// Minimisation costs over structural columns.
    fn costs(&self, objective: &[f64], sense: Sense) -> Vec<f64> {
        let sign = match sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut costs = vec![0.0; self.num_cols];
        for (c, map) in objective.iter().zip(&self.vars) {
            match *map {
                VarMap::Shifted { col, .. } => costs[col] += sign * c,
                VarMap::Flipped { col, .. } => costs[col] -= sign * c,
                VarMap::Split { pos, neg } => {
                    costs[pos] += sign * c;
                    costs[neg] -= sign * c;
                }
            }
        }
        costs
    }

    fn recover(&self, y: &[f64]) -> Vec<f64> {
        self.vars
            .iter()
            .map(|map| match *map {
                VarMap::Shifted { col, offset } => offset + y[col],
                VarMap::Flipped { col, offset } => offset - y[col],
                VarMap::Split { pos, neg } => y[pos] - y[neg],
            })
            .collect()
    }
}

enum Outcome {
    Optimal,
    Unbounded,
}

struct Tableau {
    /// rows × (width + 1); the last column is the right-hand side
    data: Vec<f64>,
    rows: usize,
    width: usize,
    structural: usize,
    first_artificial: usize,
    basis: Vec<usize>,
    config: SolverConfig,
    pivots: usize,
    /// The initial tableau, for reinversion.
    original: Vec<f64>,
}

/// Pivots between rebuilds of the tableau from the original rows.
const REINVERT_EVERY: usize = 32;

impl Tableau {
    fn new(std: &StandardForm, config: &SolverConfig) -> Self {
        let rows = std.rows.len();
        let slacks = std.rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let artificials = std.rows.iter().filter(|r| r.1 != Relation::Le).count();
        let structural = std.num_cols;
        let first_artificial = structural + slacks;
        let width = first_artificial + artificials;
        let stride = width + 1;
        let mut data = vec![0.0; rows * stride];
        let mut basis = Vec::with_capacity(rows);
        let (mut next_slack, mut next_art) = (structural, first_artificial);
        for (i, (coeffs, relation, rhs)) in std.rows.iter().enumerate() {
            let row = &mut data[i * stride..(i + 1) * stride];
            row[..structural].copy_from_slice(coeffs);
            row[width] = *rhs;
            match relation {
                Relation::Le => {
                    row[next_slack] = 1.0;
                    basis.push(next_slack);
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -1.0;
                    next_slack += 1;
                    row[next_art] = 1.0;
                    basis.push(next_art);
                    next_art += 1;
                }
                Relation::Eq => {
                    row[next_art] = 1.0;
                    basis.push(next_art);
                    next_art += 1;
                }
            }
        }
        Self {
            original: data.clone(),
            data,
            rows,
            width,
            structural,
            first_artificial,
            basis,
            config: *config,
            pivots: 0,
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.width + 1) + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.width)
    }

    fn is_basic(&self, j: usize) -> bool {
        self.basis.contains(&j)
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.first_artificial
    }

    /// `d_j = c_j - c_B^T T_j` for a cost vector over (a prefix of) the columns.
    fn reduced_costs(&self, costs: &[f64]) -> Vec<f64> {
        let cost = |j: usize| costs.get(j).copied().unwrap_or(0.0);
        let mut d: Vec<f64> = (0..self.width).map(cost).collect();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost(b);
            if cb != 0.0 {
                let row = &self.data[i * (self.width + 1)..i * (self.width + 1) + self.width];
                for (dj, a) in d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        d
    }

    fn objective_value(&self, costs: &[f64]) -> f64 {
        self.basis
            .iter()
            .enumerate()
            .map(|(i, &b)| costs.get(b).copied().unwrap_or(0.0) * self.rhs(i))
            .sum()
    }

    fn pivot(&mut self, r: usize, c: usize) -> Result<(), LpError> {
        let stride = self.width + 1;
        let p = self.at(r, c);
        if abs(p) < self.config.pivot_tol {
            return Err(LpError::DegeneratePivot(p));
        }
        self.pivots += 1;
        if self.pivots > self.config.max_pivots {
            return Err(LpError::PivotLimit(self.config.max_pivots));
        }
        let (before, rest) = self.data.split_at_mut(r * stride);
        let (pivot_row, after) = rest.split_at_mut(stride);
        pivot_row.iter_mut().for_each(|v| *v /= p);
        pivot_row[c] = 1.0;
        for row in before.chunks_exact_mut(stride).chain(after.chunks_exact_mut(stride)) {
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(pivot_row.iter()) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        // clamp rounding noise in the right-hand side
        for i in 0..self.rows {
            let v = &mut self.data[i * stride + self.width];
            if *v < 0.0 {
                if *v < -self.config.feas_tol {
                    return Err(LpError::DegeneratePivot(*v));
                }
                *v = 0.0;
            }
        }
        self.basis[r] = c;
        Ok(())
    }

    /// Recomputes `B⁻¹ [A | b]` for the current basis from the original
    /// rows by Gauss-Jordan elimination with partial pivoting, discarding
    /// the round-off accumulated by the pivots so far.
    fn reinvert(&mut self) -> Result<(), LpError> {
        let stride = self.width + 1;
        let mut m = self.original.clone();
        for k in 0..self.rows {
            let col = self.basis[k];
            let p = (k..self.rows)
                .max_by(|&a, &b| abs(m[a * stride + col]).total_cmp(&abs(m[b * stride + col])).then(b.cmp(&a)))
                .expect("non-empty range");
            let pv = m[p * stride + col];
            if abs(pv) < self.config.pivot_tol {
                return Err(LpError::DegeneratePivot(pv));
            }
            if p != k {
                for j in 0..stride {
                    m.swap(k * stride + j, p * stride + j);
                }
            }
            for j in 0..stride {
                m[k * stride + j] /= pv;
            }
            m[k * stride + col] = 1.0;
            for i in (0..self.rows).filter(|&i| i != k) {
                let f = m[i * stride + col];
                if f != 0.0 {
                    for j in 0..stride {
                        m[i * stride + j] -= f * m[k * stride + j];
                    }
                    m[i * stride + col] = 0.0;
                }
            }
        }
        for i in 0..self.rows {
            let v = &mut m[i * stride + self.width];
            if *v < 0.0 {
                if *v < -self.config.feas_tol {
                    return Err(LpError::DegeneratePivot(*v));
                }
                *v = 0.0;
            }
        }
        self.data = m;
        Ok(())
    }

    /// Two-pass ratio test. The step length is bounded by the ratios with
    /// right-hand sides relaxed by `ratio_tol`; rows within that bound whose
    /// pivot is at least `1e-3` of the largest one are eligible, and the
    /// lowest-index basic variable among them leaves (Bland). Skipping tiny
    /// pivots keeps round-off from compounding through near-zero entries.
    fn leaving_row(&self, c: usize) -> Option<usize> {
        let tol = self.config.ratio_tol;
        let candidates: Vec<usize> = (0..self.rows).filter(|&i| self.at(i, c) > self.config.ratio_tol).collect();
        let bound = candidates
            .iter()
            .map(|&i| (self.rhs(i) + tol) / self.at(i, c))
            .fold(f64::INFINITY, f64::min);
        let within: Vec<usize> = candidates
            .into_iter()
            .filter(|&i| self.rhs(i) / self.at(i, c) <= bound)
            .collect();
        // past this many pivots favour Bland's anti-cycling guarantee
        let floor = if self.pivots > 50 * (self.rows + self.width) { 0.0 } else { self.config.pivot_floor };
        let largest = within.iter().map(|&i| self.at(i, c)).fold(0.0, f64::max);
        within
            .into_iter()
            .filter(|&i| self.at(i, c) >= floor * largest)
            .min_by_key(|&i| self.basis[i])
    }

    /// Lowest-index improving column enters (Bland); see
    /// [`Tableau::leaving_row`] for the leaving row.
    fn optimise(&mut self, costs: &[f64], fixed: &[bool]) -> Result<Outcome, LpError> {
        let mut d = self.reduced_costs(costs);
        let mut fresh = true;
        loop {
            let entering = (0..self.width).find(|&j| {
                d[j] < -self.config.cost_tol && !fixed[j] && !self.is_artificial(j) && !self.is_basic(j)
            });
            let Some(c) = entering else {
                if fresh {
                    return Ok(Outcome::Optimal);
                }
                // confirm on a freshly inverted tableau
                self.reinvert()?;
                d = self.reduced_costs(costs);
                fresh = true;
                continue;
            };
            fresh = false;
            let Some(r) = self.leaving_row(c) else {
                return Ok(Outcome::Unbounded);
            };
            self.pivot(r, c)?;
            if self.pivots % REINVERT_EVERY == 0 {
                self.reinvert()?;
                d = self.reduced_costs(costs);
                continue;
            }
            // update reduced costs from the new pivot row
            let f = d[c];
            let stride = self.width + 1;
            let row = &self.data[r * stride..r * stride + self.width];
            for (dj, a) in d.iter_mut().zip(row) {
                *dj -= f * a;
            }
            d[c] = 0.0;
        }
    }

    /// Minimises the sum of artificial variables; returns the optimum.
    fn phase_one(&mut self) -> Result<f64, LpError> {
        if self.first_artificial == self.width {
            return Ok(0.0);
        }
        let mut costs = vec![0.0; self.width];
        costs[self.first_artificial..].iter_mut().for_each(|c| *c = 1.0);
        // artificial columns may not re-enter, which is harmless in phase one
        let fixed = vec![false; self.width];
        self.optimise(&costs, &fixed)?;
        Ok(self.objective_value(&costs))
    }

    fn drive_out_artificials(&mut self) -> Result<(), LpError> {
        for r in 0..self.rows {
            if !self.is_artificial(self.basis[r]) {
                continue;
            }
            let candidate = (0..self.first_artificial)
                .filter(|&j| !self.is_basic(j))
                .find(|&j| abs(self.at(r, j)) > self.config.ratio_tol);
            if let Some(c) = candidate {
                self.pivot(r, c)?;
            }
            // otherwise the row is redundant and the artificial stays at zero
        }
        Ok(())
    }

    fn primal(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.structural];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.structural {
                y[b] = self.rhs(i);
            }
        }
        y
    }
}
