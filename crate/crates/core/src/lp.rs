//! Dense two-phase primal simplex for small box-bounded linear programs.
//!
//! Every variable carries a finite `[lo, hi]` box, so problems are never
//! unbounded. Variables are shifted to `[0, hi - lo]` and nonbasic variables
//! sit at either end of their range (bounded-variable simplex), which keeps
//! the upper bounds out of the constraint matrix. Each `<=`/`>=` row gets a
//! slack; rows whose slack cannot start basic get an artificial variable that
//! phase one drives to zero.
//!
//! Entering and leaving variables follow Bland's rule (lowest index among the
//! eligible candidates), so the pivot sequence is fully determined by the
//! input and the method cannot cycle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum constraint violation accepted in a returned optimum, per unit of
/// the row's largest coefficient.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Tableau entries smaller than this are never pivoted on.
const PIVOT_TOL: f64 = 1e-11;
/// Nor are entries this far below the largest entry of their column.
const RELATIVE_PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-11;
/// Phase-one residual accepted on a row, relative to the row's right-hand
/// side (rows scaled to unit max coefficient).
const PHASE1_TOL: f64 = 1e-10;
/// Artificials at or below this value are pivoted out after phase one.
const ZERO_ARTIFICIAL: f64 = 1e-15;
const REFACTOR_EVERY: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    /// `coeffs . x <= rhs`
    Le,
    /// `coeffs . x >= rhs`
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        Self { coeffs, relation, rhs }
    }

    pub fn le(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self::new(coeffs, Relation::Le, rhs)
    }

    pub fn ge(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self::new(coeffs, Relation::Ge, rhs)
    }

    /// Amount by which `x` violates the constraint (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs: f64 = self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
        }
    }

    fn scale(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, a| m.max(a.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub direction: Direction,
    pub constraints: Vec<Constraint>,
    pub var_bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    /// New program with every variable boxed in `[0, 1]`.
    pub fn new(objective: Vec<f64>, direction: Direction) -> Self {
        let n_vars = objective.len();
        Self {
            n_vars,
            objective,
            direction,
            constraints: Vec::new(),
            var_bounds: vec![(0.0, 1.0); n_vars],
        }
    }

    pub fn minimize(objective: Vec<f64>) -> Self {
        Self::new(objective, Direction::Minimize)
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        Self::new(objective, Direction::Maximize)
    }

    pub fn with_constraint(mut self, c: Constraint) -> Self {
        self.constraints.push(c);
        self
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.var_bounds = bounds;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(format!("malformed LP: {msg}")));
        if self.objective.len() != self.n_vars {
            return bad(format!("objective has {} entries, expected {}", self.objective.len(), self.n_vars));
        }
        if self.var_bounds.len() != self.n_vars {
            return bad(format!("{} bounds given for {} variables", self.var_bounds.len(), self.n_vars));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return bad("non-finite objective coefficient".into());
        }
        for (j, &(lo, hi)) in self.var_bounds.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return bad(format!("variable {j} has invalid bounds [{lo}, {hi}]"));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != self.n_vars {
                return bad(format!("constraint {i} has {} coefficients, expected {}", c.coeffs.len(), self.n_vars));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|a| !a.is_finite()) {
                return bad(format!("constraint {i} has non-finite data"));
            }
        }
        Ok(())
    }

    /// Largest scaled violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| c.violation(x) / c.scale().max(1.0));
        let boxes = self
            .var_bounds
            .iter()
            .zip(x)
            .map(|(&(lo, hi), &v)| (lo - v).max(v - hi).max(0.0));
        rows.chain(boxes).fold(0.0, f64::max)
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// `None` when infeasible.
    pub objective_value: Option<f64>,
    /// Optimal vertex; empty when infeasible.
    pub assignment: Vec<f64>,
    /// Simplex pivots and bound flips performed across both phases.
    pub iterations: usize,
}

impl LpSolution {
    fn infeasible(iterations: usize) -> Self {
        Self { status: LpStatus::Infeasible, objective_value: None, assignment: Vec::new(), iterations }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Solve `lp`, returning an optimal vertex or an infeasibility verdict.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;

    let mut rows = Vec::with_capacity(lp.constraints.len());
    for c in &lp.constraints {
        if c.coeffs.iter().all(|&a| a == 0.0) {
            let ok = match c.relation {
                Relation::Le => c.rhs >= 0.0,
                Relation::Ge => c.rhs <= 0.0,
            };
            if !ok {
                return Ok(LpSolution::infeasible(0));
            }
        } else {
            rows.push(c);
        }
    }

    let n = lp.n_vars;
    let lower: Vec<f64> = lp.var_bounds.iter().map(|b| b.0).collect();
    let range: Vec<f64> = lp.var_bounds.iter().map(|b| b.1 - b.0).collect();
    let mut tab = Tableau::build(n, &rows, &lower, &range);
    let cap = 10_000 * n.max(1);

    // Phase one: minimise the sum of artificials.
    let phase1_cost: Vec<f64> = (0..tab.ncols).map(|j| if tab.is_artificial(j) { 1.0 } else { 0.0 }).collect();
    tab.run(&phase1_cost, |_| true, cap)?;
    if !tab.phase_one_feasible() {
        return Ok(LpSolution::infeasible(tab.iterations));
    }
    tab.retire_artificials();

    // Phase two: the real objective, as a minimisation over shifted variables.
    let sign = match lp.direction {
        Direction::Minimize => 1.0,
        Direction::Maximize => -1.0,
    };
    let mut cost = vec![0.0; tab.ncols];
    for ((c, &o), s) in cost.iter_mut().zip(&lp.objective).zip(&tab.col_scale) {
        *c = sign * o / s;
    }
    let first_artificial = tab.first_artificial;
    tab.run(&cost, |j| j < first_artificial, cap)?;

    let shifted = tab.structural_values();
    let assignment: Vec<f64> = shifted
        .iter()
        .zip(&lp.var_bounds)
        .map(|(&v, &(lo, hi))| (lo + v).clamp(lo, hi))
        .collect();

    let worst = lp.max_violation(&assignment);
    if worst > FEASIBILITY_TOL {
        return Err(Error::SolverDefect(format!(
            "optimal vertex violates a constraint by {worst:e} after {} iterations",
            tab.iterations
        )));
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective_value: Some(lp.objective_at(&assignment)),
        assignment,
        iterations: tab.iterations,
    })
}

/// Standard-form data plus the current dense tableau `B^-1 S`.
struct Tableau {
    m: usize,
    ncols: usize,
    n_structural: usize,
    first_artificial: usize,
    /// Row each artificial column was created for.
    art_row: Vec<usize>,
    col_scale: Vec<f64>,
    /// Original standard-form matrix, row-major `m x ncols`.
    source: Vec<f64>,
    rhs: Vec<f64>,
    /// Current tableau, row-major `m x ncols`.
    t: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    upper: Vec<f64>,
    at_upper: Vec<bool>,
    in_basis: Vec<bool>,
    iterations: usize,
    since_refactor: usize,
}

impl Tableau {
    fn build(n: usize, rows: &[&Constraint], lower: &[f64], range: &[f64]) -> Self {
        let m = rows.len();
        // Columns: structural, one slack per row, then artificials as needed.
        let mut needs_artificial = Vec::with_capacity(m);
        let mut scaled_rows = Vec::with_capacity(m);
        for c in rows {
            let scale = 1.0 / c.scale();
            let shift: f64 = c.coeffs.iter().zip(lower).map(|(a, l)| a * l).sum();
            let mut b = (c.rhs - shift) * scale;
            let mut coeffs: Vec<f64> = c.coeffs.iter().map(|a| a * scale).collect();
            let mut slack = match c.relation {
                Relation::Le => 1.0,
                Relation::Ge => -1.0,
            };
            if b < 0.0 {
                b = -b;
                slack = -slack;
                coeffs.iter_mut().for_each(|a| *a = -*a);
            }
            needs_artificial.push(slack < 0.0);
            scaled_rows.push((coeffs, slack, b));
        }
        // Column equilibration: variable j is replaced by `col_scale[j] * v_j`
        // so that every structural column has unit max coefficient. Yields of
        // high photon numbers enter with weights near 1e-18; unscaled, they
        // drive tableau entries past 1e17.
        let mut col_scale = vec![1.0; n];
        for (j, s) in col_scale.iter_mut().enumerate() {
            let big = scaled_rows.iter().fold(0.0f64, |m, (c, _, _)| m.max(c[j].abs()));
            if big > 0.0 {
                *s = big;
            }
        }
        for (coeffs, _, _) in &mut scaled_rows {
            for (a, s) in coeffs.iter_mut().zip(&col_scale) {
                *a /= s;
            }
        }
        let n_art = needs_artificial.iter().filter(|&&x| x).count();
        let first_artificial = n + m;
        let ncols = n + m + n_art;

        let mut source = vec![0.0; m * ncols];
        let mut rhs = vec![0.0; m];
        let mut basis = vec![0; m];
        let mut next_art = first_artificial;
        let mut art_row = Vec::with_capacity(n_art);
        for (i, (coeffs, slack, b)) in scaled_rows.into_iter().enumerate() {
            let row = &mut source[i * ncols..(i + 1) * ncols];
            row[..n].copy_from_slice(&coeffs);
            row[n + i] = slack;
            rhs[i] = b;
            if needs_artificial[i] {
                row[next_art] = 1.0;
                art_row.push(i);
                basis[i] = next_art;
                next_art += 1;
            } else {
                basis[i] = n + i;
            }
        }

        let mut upper = vec![f64::INFINITY; ncols];
        for j in 0..n {
            upper[j] = range[j] * col_scale[j];
        }
        let mut in_basis = vec![false; ncols];
        for &b in &basis {
            in_basis[b] = true;
        }
        Self {
            m,
            ncols,
            n_structural: n,
            first_artificial,
            art_row,
            col_scale,
            t: source.clone(),
            source,
            beta: rhs.clone(),
            rhs,
            basis,
            upper,
            at_upper: vec![false; ncols],
            in_basis,
            iterations: 0,
            since_refactor: 0,
        }
    }

    /// Every artificial left in the basis carries at most a rounding-level
    /// residual of the row it stands in for.
    fn phase_one_feasible(&self) -> bool {
        let rhs_max = self.rhs.iter().fold(0.0f64, |m, b| m.max(b.abs()));
        (0..self.m).all(|r| {
            let a = self.basis[r];
            if !self.is_artificial(a) {
                return true;
            }
            let row = self.art_row[a - self.first_artificial];
            self.beta[r] <= PHASE1_TOL * self.rhs[row].abs() + f64::EPSILON * rhs_max
        })
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.first_artificial
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.ncols + j]
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        if self.at_upper[j] {
            self.upper[j]
        } else {
            0.0
        }
    }

    fn run(&mut self, cost: &[f64], may_enter: impl Fn(usize) -> bool, cap: usize) -> Result<()> {
        loop {
            if self.iterations >= cap {
                return Err(Error::SolverDefect(format!("iteration cap {cap} reached")));
            }
            let Some((j, dir)) = self.entering(cost, &may_enter) else {
                self.refactor();
                return Ok(());
            };
            self.step(j, dir)?;
            self.iterations += 1;
            self.since_refactor += 1;
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }
        }
    }

    /// Lowest-index nonbasic column whose move improves the objective.
    fn entering(&self, cost: &[f64], may_enter: &impl Fn(usize) -> bool) -> Option<(usize, f64)> {
        for j in 0..self.ncols {
            if self.in_basis[j] || !may_enter(j) {
                continue;
            }
            let mut d = cost[j];
            for i in 0..self.m {
                d -= cost[self.basis[i]] * self.at(i, j);
            }
            if !self.at_upper[j] && d < -COST_TOL && self.upper[j] > 0.0 {
                return Some((j, 1.0));
            }
            if self.at_upper[j] && d > COST_TOL {
                return Some((j, -1.0));
            }
        }
        None
    }

    fn step(&mut self, j: usize, dir: f64) -> Result<()> {
        // Ratio test; ties go to the lowest basic variable index.
        let mut best = self.upper[j];
        let mut leave: Option<(usize, bool)> = None;
        let col_max = (0..self.m).fold(0.0f64, |m, i| m.max(self.at(i, j).abs()));
        let tiny = PIVOT_TOL.max(RELATIVE_PIVOT_TOL * col_max);
        for i in 0..self.m {
            let alpha = self.at(i, j);
            if alpha.abs() < tiny {
                continue;
            }
            let rate = -dir * alpha;
            let bv = self.basis[i];
            let (limit, to_upper) = if rate < 0.0 {
                (self.beta[i].max(0.0) / -rate, false)
            } else {
                let ub = self.upper[bv];
                if ub.is_infinite() {
                    continue;
                }
                ((ub - self.beta[i]).max(0.0) / rate, true)
            };
            let better = match leave {
                _ if limit < best => true,
                Some((r, _)) => limit == best && bv < self.basis[r],
                None => false,
            };
            if better {
                best = limit;
                leave = Some((i, to_upper));
            }
        }
        if best.is_infinite() {
            return Err(Error::SolverDefect("unbounded direction in a boxed program".into()));
        }

        for i in 0..self.m {
            self.beta[i] -= dir * self.at(i, j) * best;
        }
        let Some((r, to_upper)) = leave else {
            self.at_upper[j] = !self.at_upper[j];
            return Ok(());
        };
        let entering_value = if dir > 0.0 { best } else { self.upper[j] - best };
        let leaving = self.basis[r];
        self.in_basis[leaving] = false;
        self.at_upper[leaving] = to_upper;
        self.in_basis[j] = true;
        self.at_upper[j] = false;
        self.basis[r] = j;
        self.beta[r] = entering_value;
        self.pivot(r, j);
        Ok(())
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let nc = self.ncols;
        let p = self.t[r * nc + j];
        for v in &mut self.t[r * nc..(r + 1) * nc] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.t[r * nc..(r + 1) * nc].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * nc + j];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * nc..(i + 1) * nc];
            for (v, pr) in row.iter_mut().zip(&pivot_row) {
                *v -= f * pr;
            }
            row[j] = 0.0;
        }
    }

    /// Pivot zero-valued artificials out of the basis where possible and pin
    /// every artificial to zero for phase two. An artificial still carrying a
    /// residual within the phase-one tolerance stays basic: pivoting it out
    /// would push the residual into a structural variable scaled by the
    /// inverse pivot. Phase two can then only drive it down.
    fn retire_artificials(&mut self) {
        for r in 0..self.m {
            let a = self.basis[r];
            if !self.is_artificial(a) || self.beta[r].abs() > ZERO_ARTIFICIAL {
                continue;
            }
            let mut candidate: Option<usize> = None;
            for j in 0..self.first_artificial {
                let alpha = self.at(r, j).abs();
                if self.in_basis[j] || alpha <= PIVOT_TOL {
                    continue;
                }
                if candidate.is_none_or(|c| alpha > self.at(r, c).abs()) {
                    candidate = Some(j);
                }
            }
            if let Some(j) = candidate {
                self.in_basis[a] = false;
                self.at_upper[a] = false;
                self.in_basis[j] = true;
                self.beta[r] = self.nonbasic_value(j);
                self.at_upper[j] = false;
                self.basis[r] = j;
                self.pivot(r, j);
            }
        }
        for j in self.first_artificial..self.ncols {
            self.upper[j] = 0.0;
        }
        self.refactor();
    }

    /// Rebuild `B^-1 S` and the basic values from the original data by
    /// Gaussian elimination with partial pivoting. Skipped if `B` looks
    /// singular, in which case the updated tableau is kept.
    fn refactor(&mut self) {
        self.since_refactor = 0;
        let (m, nc) = (self.m, self.ncols);
        if m == 0 {
            return;
        }
        let mut rhs = self.rhs.clone();
        for j in 0..nc {
            if !self.in_basis[j] && self.at_upper[j] {
                let u = self.upper[j];
                for (i, r) in rhs.iter_mut().enumerate() {
                    *r -= self.source[i * nc + j] * u;
                }
            }
        }
        // Augmented system [B | S | rhs].
        let w = m + nc + 1;
        let mut aug = vec![0.0; m * w];
        for i in 0..m {
            for (k, &b) in self.basis.iter().enumerate() {
                aug[i * w + k] = self.source[i * nc + b];
            }
            aug[i * w + m..i * w + m + nc].copy_from_slice(&self.source[i * nc..(i + 1) * nc]);
            aug[i * w + m + nc] = rhs[i];
        }
        for k in 0..m {
            let piv = (k..m)
                .max_by(|&a, &b| aug[a * w + k].abs().total_cmp(&aug[b * w + k].abs()))
                .unwrap_or(k);
            if aug[piv * w + k].abs() < 1e-14 {
                return;
            }
            if piv != k {
                for c in 0..w {
                    aug.swap(k * w + c, piv * w + c);
                }
            }
            let p = aug[k * w + k];
            for c in k..w {
                aug[k * w + c] /= p;
            }
            for i in 0..m {
                if i == k {
                    continue;
                }
                let f = aug[i * w + k];
                if f == 0.0 {
                    continue;
                }
                for c in k..w {
                    aug[i * w + c] -= f * aug[k * w + c];
                }
            }
        }
        for i in 0..m {
            self.t[i * nc..(i + 1) * nc].copy_from_slice(&aug[i * w + m..i * w + m + nc]);
            self.beta[i] = aug[i * w + m + nc];
            let b = self.basis[i];
            self.t[i * nc + b] = 1.0;
        }
    }

    fn structural_values(&self) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.n_structural).map(|j| self.nonbasic_value(j)).collect();
        for (r, &b) in self.basis.iter().enumerate() {
            if b < self.n_structural {
                x[b] = self.beta[r];
            }
        }
        x.iter_mut().zip(&self.col_scale).for_each(|(v, s)| *v /= s);
        x
    }
}
