//! Two-phase simplex with Bland's rule.
//!
//! A program `max c·x s.t. Gx ≤ h` over free `x ∈ ℝᵈ` is solved through its
//! dual `min h·y s.t. Gᵀy = c, y ≥ 0`, which is already in standard form with
//! only `d` rows. The primal optimizer is read back from the simplex
//! multipliers. Every primal constraint is a dual column, so appending a
//! constraint to a solved program keeps the current basis feasible and phase
//! two simply resumes; [`IncrementalLp`] exposes that for cutting-plane
//! methods.

use super::matrix::{Matrix, MatrixError};
use crate::numeric::{FEAS_TOL, OPT_TOL, PIVOT_TOL};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    MalformedProgram(String),
    #[error("simplex pivot limit reached after {0} pivots")]
    IterationLimit(usize),
}

impl From<MatrixError> for LpError {
    fn from(e: MatrixError) -> Self {
        LpError::MalformedProgram(e.to_string())
    }
}

/// `max c·x` subject to `Gx ≤ h`, with rows optionally flagged as equalities.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    constraints: Matrix,
    rhs: Vec<f64>,
    equality: Vec<bool>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, constraints: Matrix, rhs: Vec<f64>) -> Result<Self, LpError> {
        let rows = constraints.rows();
        let lp = Self {
            objective,
            constraints,
            rhs,
            equality: vec![false; rows],
        };
        lp.validate()?;
        Ok(lp)
    }

    /// Marks which rows are equalities `G_i x = h_i`.
    pub fn with_equalities(mut self, equality: Vec<bool>) -> Result<Self, LpError> {
        self.equality = equality;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), LpError> {
        let g = &self.constraints;
        if g.rows() != self.rhs.len() {
            return Err(LpError::MalformedProgram(format!(
                "{} constraint rows but {} right-hand sides",
                g.rows(),
                self.rhs.len()
            )));
        }
        if g.rows() > 0 && g.cols() != self.objective.len() {
            return Err(LpError::MalformedProgram(format!(
                "objective has length {} but constraints have {} columns",
                self.objective.len(),
                g.cols()
            )));
        }
        if self.equality.len() != g.rows() {
            return Err(LpError::MalformedProgram(
                "equality flags do not match the row count".into(),
            ));
        }
        if self
            .objective
            .iter()
            .chain(&self.rhs)
            .chain(g.as_slice())
            .any(|v| !v.is_finite())
        {
            return Err(LpError::MalformedProgram("non-finite entry".into()));
        }
        Ok(())
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &Matrix {
        &self.constraints
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn equality(&self) -> &[bool] {
        &self.equality
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }
}

/// Solves a linear program from scratch.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome, LpError> {
    let mut inc = IncrementalLp::new(lp.objective.clone());
    for i in 0..lp.constraints.rows() {
        let row = lp.constraints.row(i).to_vec();
        if lp.equality[i] {
            inc.add_equality(row, lp.rhs[i]);
        } else {
            inc.add_constraint(row, lp.rhs[i]);
        }
    }
    inc.solve()
}

/// Stable handle for a constraint added to an [`IncrementalLp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(usize);

#[derive(Debug, Clone)]
struct PrimalRow {
    normal: Vec<f64>,
    offset: f64,
    equality: bool,
    alive: bool,
}

#[derive(Debug, Clone)]
struct Column {
    row: usize,
    /// `+1` for an inequality or the positive part of an equality, `-1` for
    /// the negative part.
    part: f64,
    /// Original column in the row-sign-adjusted system.
    orig: Vec<f64>,
    cost: f64,
    t: Vec<f64>,
    rc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Var {
    Col(usize),
    Art(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    One,
    Two,
}

enum Step {
    Optimal,
    Unbounded,
}

/// A linear program that can grow and shrink between solves.
///
/// After an optimal solve, [`add_constraint`](Self::add_constraint) keeps the
/// basis and the next [`solve`](Self::solve) resumes phase two from it.
/// Any other outcome makes the next solve start cold.
#[derive(Debug, Clone)]
pub struct IncrementalLp {
    d: usize,
    objective: Vec<f64>,
    sign: Vec<f64>,
    rows: Vec<PrimalRow>,
    cols: Vec<Column>,
    art: Vec<Vec<f64>>,
    art_rc: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<Var>,
    warm: bool,
    pivots_since_refactor: usize,
}

const REFACTOR_EVERY: usize = 64;

impl IncrementalLp {
    pub fn new(objective: Vec<f64>) -> Self {
        let d = objective.len();
        let sign = objective
            .iter()
            .map(|&c| if c < 0.0 { -1.0 } else { 1.0 })
            .collect();
        Self {
            d,
            objective,
            sign,
            rows: Vec::new(),
            cols: Vec::new(),
            art: Vec::new(),
            art_rc: Vec::new(),
            rhs: Vec::new(),
            basis: Vec::new(),
            warm: false,
            pivots_since_refactor: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Adds `a·x ≤ b`.
    pub fn add_constraint(&mut self, normal: Vec<f64>, offset: f64) -> RowId {
        self.push_row(normal, offset, false)
    }

    /// Adds `a·x = b`.
    pub fn add_equality(&mut self, normal: Vec<f64>, offset: f64) -> RowId {
        self.push_row(normal, offset, true)
    }

    fn push_row(&mut self, normal: Vec<f64>, offset: f64, equality: bool) -> RowId {
        assert_eq!(normal.len(), self.d, "constraint dimension mismatch");
        let id = self.rows.len();
        self.rows.push(PrimalRow {
            normal,
            offset,
            equality,
            alive: true,
        });
        if self.warm {
            self.append_columns(id);
        }
        RowId(id)
    }

    /// Number of live constraints.
    pub fn len(&self) -> usize {
        self.rows.iter().filter(|r| r.alive).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True when the constraint carries a basic dual variable in the current
    /// basis, i.e. it may be binding at the last optimum.
    pub fn is_basic(&self, id: RowId) -> bool {
        self.basis
            .iter()
            .any(|v| matches!(v, Var::Col(j) if self.cols[*j].row == id.0))
    }

    /// Removes a constraint whose dual variables are nonbasic. Returns false
    /// (and keeps the constraint) when it is part of the basis.
    pub fn remove_constraint(&mut self, id: RowId) -> bool {
        if !self.rows.get(id.0).is_some_and(|r| r.alive) {
            return false;
        }
        if self.warm && self.is_basic(id) {
            return false;
        }
        self.rows[id.0].alive = false;
        if self.warm {
            while let Some(pos) = self.cols.iter().position(|c| c.row == id.0) {
                self.cols.remove(pos);
                for v in &mut self.basis {
                    if let Var::Col(j) = v {
                        if *j > pos {
                            *j -= 1;
                        }
                    }
                }
            }
        }
        true
    }

    fn column_parts(&self, row: usize) -> Vec<(f64, Vec<f64>, f64)> {
        let r = &self.rows[row];
        let orig: Vec<f64> = r
            .normal
            .iter()
            .zip(&self.sign)
            .map(|(a, s)| a * s)
            .collect();
        let mut parts = vec![(1.0, orig.clone(), r.offset)];
        if r.equality {
            parts.push((-1.0, orig.iter().map(|v| -v).collect(), -r.offset));
        }
        parts
    }

    /// Appends the dual columns of a new row to a warm tableau.
    fn append_columns(&mut self, row: usize) {
        for (part, orig, cost) in self.column_parts(row) {
            let mut t = vec![0.0; self.d];
            for (j, aj) in self.art.iter().enumerate() {
                let o = orig[j];
                if o != 0.0 {
                    for (ti, a) in t.iter_mut().zip(aj) {
                        *ti += a * o;
                    }
                }
            }
            let rc = cost - self.basic_cost_dot(&t, Phase::Two);
            self.cols.push(Column {
                row,
                part,
                orig,
                cost,
                t,
                rc,
            });
        }
    }

    fn cost_of(&self, v: Var, phase: Phase) -> f64 {
        match (v, phase) {
            (Var::Col(j), Phase::Two) => self.cols[j].cost,
            (Var::Col(_), Phase::One) => 0.0,
            (Var::Art(_), Phase::One) => 1.0,
            (Var::Art(_), Phase::Two) => 0.0,
        }
    }

    fn basic_cost_dot(&self, t: &[f64], phase: Phase) -> f64 {
        self.basis
            .iter()
            .zip(t)
            .map(|(&v, &x)| self.cost_of(v, phase) * x)
            .sum()
    }

    fn recompute_reduced_costs(&mut self, phase: Phase) {
        let cb: Vec<f64> = self.basis.iter().map(|&v| self.cost_of(v, phase)).collect();
        for c in &mut self.cols {
            let own = if phase == Phase::Two { c.cost } else { 0.0 };
            c.rc = own - cb.iter().zip(&c.t).map(|(a, b)| a * b).sum::<f64>();
        }
        for (j, a) in self.art.iter().enumerate() {
            let own = if phase == Phase::One { 1.0 } else { 0.0 };
            self.art_rc[j] = own - cb.iter().zip(a).map(|(x, y)| x * y).sum::<f64>();
        }
    }

    fn reset_tableau(&mut self) {
        let d = self.d;
        self.cols.clear();
        for row in 0..self.rows.len() {
            if !self.rows[row].alive {
                continue;
            }
            for (part, orig, cost) in self.column_parts(row) {
                self.cols.push(Column {
                    row,
                    part,
                    t: orig.clone(),
                    orig,
                    cost,
                    rc: 0.0,
                });
            }
        }
        self.art = (0..d)
            .map(|j| {
                let mut e = vec![0.0; d];
                e[j] = 1.0;
                e
            })
            .collect();
        self.art_rc = vec![0.0; d];
        self.rhs = self.objective.iter().map(|c| c.abs()).collect();
        self.basis = (0..d).map(Var::Art).collect();
        self.pivots_since_refactor = 0;
    }

    fn pivot(&mut self, r: usize, entering: Var) {
        let (col_e, rc_e) = match entering {
            Var::Col(j) => (self.cols[j].t.clone(), self.cols[j].rc),
            Var::Art(j) => (self.art[j].clone(), self.art_rc[j]),
        };
        let piv = col_e[r];
        let update = |t: &mut [f64], rc: &mut f64| {
            let v = t[r];
            if v == 0.0 {
                return;
            }
            let v = v / piv;
            for (ti, ei) in t.iter_mut().zip(&col_e) {
                *ti -= ei * v;
            }
            t[r] = v;
            *rc -= rc_e * v;
        };
        for c in &mut self.cols {
            update(&mut c.t, &mut c.rc);
        }
        for (a, rc) in self.art.iter_mut().zip(self.art_rc.iter_mut()) {
            update(a, rc);
        }
        let mut dummy = 0.0;
        update(&mut self.rhs, &mut dummy);
        // entering column becomes an exact unit vector
        match entering {
            Var::Col(j) => {
                let c = &mut self.cols[j];
                c.t.iter_mut().for_each(|v| *v = 0.0);
                c.t[r] = 1.0;
                c.rc = 0.0;
            }
            Var::Art(j) => {
                self.art[j].iter_mut().for_each(|v| *v = 0.0);
                self.art[j][r] = 1.0;
                self.art_rc[j] = 0.0;
            }
        }
        self.basis[r] = entering;
        self.pivots_since_refactor += 1;
    }

    fn order(&self, v: Var) -> usize {
        match v {
            Var::Col(j) => j,
            Var::Art(j) => self.cols.len() + j,
        }
    }

    /// Runs simplex iterations with Bland's rule until optimality or
    /// unboundedness. Artificial columns never enter.
    fn iterate(&mut self, phase: Phase, budget: &mut usize) -> Result<Step, LpError> {
        loop {
            if phase == Phase::Two && self.pivots_since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }
            let entering = self.cols.iter().position(|c| c.rc < -OPT_TOL);
            let Some(e) = entering else {
                return Ok(Step::Optimal);
            };
            let col = &self.cols[e].t;
            let mut leave: Option<(usize, f64)> = None;
            for (r, &a) in col.iter().enumerate() {
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs[r].max(0.0) / a;
                match leave {
                    None => leave = Some((r, ratio)),
                    Some((br, best)) => {
                        let tie = 1e-12 * (1.0 + best.abs());
                        if ratio < best - tie
                            || (ratio <= best + tie
                                && self.order(self.basis[r]) < self.order(self.basis[br]))
                        {
                            leave = Some((r, ratio));
                        }
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Ok(Step::Unbounded);
            };
            if *budget == 0 {
                return Err(LpError::IterationLimit(self.pivots_since_refactor));
            }
            *budget -= 1;
            self.pivot(r, Var::Col(e));
        }
    }

    /// Rebuilds the tableau from the original columns for the current set of
    /// basic structural columns, then recomputes phase-two reduced costs.
    fn refactor(&mut self) {
        let basics: Vec<usize> = self
            .basis
            .iter()
            .filter_map(|v| match v {
                Var::Col(j) => Some(*j),
                Var::Art(_) => None,
            })
            .collect();
        let d = self.d;
        for c in &mut self.cols {
            c.t.clone_from(&c.orig);
        }
        self.art = (0..d)
            .map(|j| {
                let mut e = vec![0.0; d];
                e[j] = 1.0;
                e
            })
            .collect();
        self.rhs = self.objective.iter().map(|c| c.abs()).collect();
        self.basis = (0..d).map(Var::Art).collect();
        let mut assigned = vec![false; d];
        for j in basics {
            let t = &self.cols[j].t;
            let best = (0..d)
                .filter(|&r| !assigned[r])
                .max_by(|&a, &b| t[a].abs().total_cmp(&t[b].abs()).then(b.cmp(&a)));
            if let Some(r) = best {
                if self.cols[j].t[r].abs() > PIVOT_TOL {
                    self.pivot(r, Var::Col(j));
                    assigned[r] = true;
                }
            }
        }
        self.recompute_reduced_costs(Phase::Two);
        self.pivots_since_refactor = 0;
    }

    fn drive_out_artificials(&mut self) {
        for r in 0..self.d {
            if !matches!(self.basis[r], Var::Art(_)) {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for (j, c) in self.cols.iter().enumerate() {
                let v = c.t[r].abs();
                if v > PIVOT_TOL && best.map_or(true, |(_, b)| v > b) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                self.rhs[r] = 0.0;
                self.pivot(r, Var::Col(j));
            }
        }
    }

    fn read_primal(&self) -> Vec<f64> {
        (0..self.d)
            .map(|j| -self.sign[j] * self.art_rc[j])
            .collect()
    }

    fn max_violation(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.alive)
            .map(|r| {
                let lhs: f64 = r.normal.iter().zip(x).map(|(a, b)| a * b).sum();
                let viol = lhs - r.offset;
                let scale = 1.0 + r.offset.abs();
                if r.equality {
                    viol.abs() / scale
                } else {
                    viol / scale
                }
            })
            .fold(0.0, f64::max)
    }

    fn pivot_budget(&self) -> usize {
        50 * (self.cols.len() + self.d) + 1000
    }

    /// Solves the current program, warm-starting from the previous optimal
    /// basis when one is available.
    pub fn solve(&mut self) -> Result<LpOutcome, LpError> {
        if self.d == 0 {
            let ok = self.rows.iter().filter(|r| r.alive).all(|r| {
                if r.equality {
                    r.offset.abs() <= FEAS_TOL
                } else {
                    r.offset >= -FEAS_TOL
                }
            });
            return Ok(if ok {
                LpOutcome::Optimal {
                    x: Vec::new(),
                    value: 0.0,
                }
            } else {
                LpOutcome::Infeasible
            });
        }
        let mut budget = self.pivot_budget();
        if !self.warm {
            self.reset_tableau();
            self.recompute_reduced_costs(Phase::One);
            self.iterate(Phase::One, &mut budget)?;
            let residual: f64 = self
                .basis
                .iter()
                .zip(&self.rhs)
                .filter(|(v, _)| matches!(v, Var::Art(_)))
                .map(|(_, r)| r)
                .sum();
            let scale = self.objective.iter().fold(1.0f64, |m, c| m.max(c.abs()));
            if residual > FEAS_TOL * scale {
                // dual infeasible: the primal is either infeasible or unbounded
                return self.classify_dual_infeasible();
            }
            self.drive_out_artificials();
            self.recompute_reduced_costs(Phase::Two);
            self.warm = true;
        }
        let mut retried = false;
        loop {
            match self.iterate(Phase::Two, &mut budget) {
                Ok(Step::Optimal) => {}
                Ok(Step::Unbounded) => {
                    self.warm = false;
                    return Ok(LpOutcome::Infeasible);
                }
                Err(e) => {
                    self.warm = false;
                    return Err(e);
                }
            }
            let x = self.read_primal();
            if self.max_violation(&x) > FEAS_TOL && !retried {
                retried = true;
                self.refactor();
                continue;
            }
            let value = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
            return Ok(LpOutcome::Optimal { x, value });
        }
    }

    fn classify_dual_infeasible(&mut self) -> Result<LpOutcome, LpError> {
        self.warm = false;
        let mut feas = IncrementalLp::new(vec![0.0; self.d]);
        for r in self.rows.iter().filter(|r| r.alive) {
            feas.push_row(r.normal.clone(), r.offset, r.equality);
        }
        Ok(match feas.solve()? {
            LpOutcome::Optimal { .. } => LpOutcome::Unbounded,
            _ => LpOutcome::Infeasible,
        })
    }

    /// Dual multiplier of a constraint at the last optimum (zero when
    /// nonbasic). Useful for sensitivity checks.
    pub fn multiplier(&self, id: RowId) -> f64 {
        self.basis
            .iter()
            .zip(&self.rhs)
            .filter_map(|(v, &val)| match v {
                Var::Col(j) if self.cols[*j].row == id.0 => Some(self.cols[*j].part * val),
                _ => None,
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(c: &[f64], g: &[Vec<f64>], h: &[f64]) -> LinearProgram {
        LinearProgram::new(c.to_vec(), Matrix::from_rows(g).unwrap(), h.to_vec()).unwrap()
    }

    #[test]
    fn unit_box_corner() {
        let p = lp(
            &[1.0, 1.0],
            &[
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![-1.0, 0.0],
                vec![0.0, -1.0],
            ],
            &[1.0, 1.0, 0.0, 0.0],
        );
        match solve_lp(&p).unwrap() {
            LpOutcome::Optimal { x, value } => {
                assert!((value - 2.0).abs() < 1e-12);
                assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
            }
            o => panic!("unexpected {o:?}"),
        }
    }

    #[test]
    fn unbounded_ray() {
        let p = lp(&[1.0], &[vec![-1.0]], &[0.0]);
        assert_eq!(solve_lp(&p).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn empty_intersection() {
        let p = lp(&[1.0], &[vec![1.0], vec![-1.0]], &[0.0, -1.0]);
        assert_eq!(solve_lp(&p).unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn infeasible_and_unbounded_objective() {
        // infeasible constraints with an objective that would also be unbounded
        let p = lp(
            &[1.0, 0.0],
            &[vec![0.0, 1.0], vec![0.0, -1.0]],
            &[0.0, -1.0],
        );
        assert_eq!(solve_lp(&p).unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn negative_objective_and_lower_bound() {
        let p = lp(&[-1.0], &[vec![-1.0]], &[-1.0]);
        match solve_lp(&p).unwrap() {
            LpOutcome::Optimal { x, value } => {
                assert!((x[0] - 1.0).abs() < 1e-12);
                assert!((value + 1.0).abs() < 1e-12);
            }
            o => panic!("unexpected {o:?}"),
        }
    }

    #[test]
    fn equality_rows() {
        // max x + y s.t. x + y ≤ 4, x - y = 1, x ≤ 2
        let p = lp(
            &[1.0, 1.0],
            &[vec![1.0, 1.0], vec![1.0, -1.0], vec![1.0, 0.0]],
            &[4.0, 1.0, 2.0],
        )
        .with_equalities(vec![false, true, false])
        .unwrap();
        match solve_lp(&p).unwrap() {
            LpOutcome::Optimal { x, value } => {
                assert!((value - 3.0).abs() < 1e-10, "{value}");
                assert!((x[0] - 2.0).abs() < 1e-10 && (x[1] - 1.0).abs() < 1e-10);
            }
            o => panic!("unexpected {o:?}"),
        }
    }

    #[test]
    fn zero_objective_feasibility() {
        let p = lp(&[0.0, 0.0], &[vec![1.0, 1.0], vec![-1.0, -1.0]], &[1.0, 0.0]);
        assert!(matches!(solve_lp(&p).unwrap(), LpOutcome::Optimal { .. }));
    }

    #[test]
    fn free_variable_not_in_constraints() {
        // x2 appears nowhere but has zero objective weight
        let p = lp(&[1.0, 0.0], &[vec![1.0, 0.0]], &[3.0]);
        assert_eq!(solve_lp(&p).unwrap().value(), Some(3.0));
        let q = lp(&[1.0, 1.0], &[vec![1.0, 0.0]], &[3.0]);
        assert_eq!(solve_lp(&q).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn malformed_programs_are_rejected() {
        let g = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            LinearProgram::new(vec![1.0], g.clone(), vec![1.0]),
            Err(LpError::MalformedProgram(_))
        ));
        assert!(matches!(
            LinearProgram::new(vec![1.0, 0.0], g.clone(), vec![]),
            Err(LpError::MalformedProgram(_))
        ));
        assert!(matches!(
            LinearProgram::new(vec![f64::INFINITY, 0.0], g, vec![1.0]),
            Err(LpError::MalformedProgram(_))
        ));
    }

    #[test]
    fn warm_start_matches_cold_solve() {
        let mut inc = IncrementalLp::new(vec![1.0, 1.0]);
        for (a, b) in [
            (vec![1.0, 0.0], 2.0),
            (vec![0.0, 1.0], 2.0),
            (vec![-1.0, 0.0], 0.0),
            (vec![0.0, -1.0], 0.0),
        ] {
            inc.add_constraint(a, b);
        }
        assert_eq!(inc.solve().unwrap().value(), Some(4.0));
        let cut = inc.add_constraint(vec![1.0, 2.0], 3.0);
        let warm = inc.solve().unwrap();
        let cold = solve_lp(&lp(
            &[1.0, 1.0],
            &[
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![-1.0, 0.0],
                vec![0.0, -1.0],
                vec![1.0, 2.0],
            ],
            &[2.0, 2.0, 0.0, 0.0, 3.0],
        ))
        .unwrap();
        assert!((warm.value().unwrap() - cold.value().unwrap()).abs() < 1e-12);
        assert!((warm.value().unwrap() - 2.5).abs() < 1e-12);
        assert!(inc.is_basic(cut));
        assert!(inc.multiplier(cut) > 0.0);
        assert!(!inc.remove_constraint(cut));
    }

    #[test]
    fn removing_nonbasic_rows_keeps_optimum() {
        let mut inc = IncrementalLp::new(vec![1.0]);
        inc.add_constraint(vec![1.0], 1.0);
        let loose = inc.add_constraint(vec![1.0], 5.0);
        assert_eq!(inc.solve().unwrap().value(), Some(1.0));
        assert!(inc.remove_constraint(loose));
        assert_eq!(inc.len(), 1);
        assert_eq!(inc.solve().unwrap().value(), Some(1.0));
    }

    #[test]
    fn solve_is_deterministic() {
        let p = lp(
            &[0.3, -0.7, 0.1],
            &[
                vec![1.0, 2.0, -1.0],
                vec![-0.5, 1.0, 0.25],
                vec![0.0, -1.0, 1.0],
                vec![1.0, 0.0, 0.0],
                vec![-1.0, -1.0, -1.0],
                vec![0.0, 0.0, 1.0],
            ],
            &[4.0, 2.0, 1.0, 3.0, 5.0, 2.0],
        );
        let a = solve_lp(&p).unwrap();
        let b = solve_lp(&p).unwrap();
        match (a, b) {
            (LpOutcome::Optimal { x: xa, value: va }, LpOutcome::Optimal { x: xb, value: vb }) => {
                assert_eq!(va.to_bits(), vb.to_bits());
                assert!(xa.iter().zip(&xb).all(|(p, q)| p.to_bits() == q.to_bits()));
            }
            o => panic!("unexpected {o:?}"),
        }
    }
}
