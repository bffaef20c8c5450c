//! Uncertain aggregative-cost programs.
//!
//! With `N` agents of dimension `n`, the decision `x ∈ ℝ^{nN}` is stored
//! agent-major (`x[i·n + t]`) and enters the costs only through the aggregate
//! `σ(x) = Σᵢ xᵢ`. The deterministic cost is `f(x) = σᵀ(A₀σ + b₀)` and each
//! sample contributes `g(x, θ) = σᵀ(A(θ)σ + b(θ))`. The scenario program
//! `min f(x) + γ  s.t. g(x, θ_m) ≤ γ, x ∈ X` is solved by Kelley's cutting-plane
//! method with an LP master over `(x, γ, t)`.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::Polytope;
use crate::linalg_lp::{chebyshev_center, numeric_rank, ChebyshevError, IncrementalLp, LpError, LpOutcome, Matrix, MatrixError, RowId};
use crate::numeric::FEAS_TOL;
use crate::sampling::SeededStream;

/// Relative drop of the optimal value that marks a support constraint.
pub const DELTA_SUP: f64 = 1e-5;
/// Solver tolerance used for leave-one-out re-solves.
pub const SUPPORT_SOLVE_TOL: f64 = 1e-9;
/// Pivot threshold (relative) for support-rank checks.
pub const RANK_TOL: f64 = 1e-9;

const SYM_TOL: f64 = 1e-12;
const PSD_FLOOR: f64 = -1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AggregativeError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid cost data: {0}")]
    InvalidCost(String),
    #[error("domain X is empty")]
    InfeasibleDomain,
    #[error("domain X is unbounded")]
    UnboundedDomain,
    #[error("cutting-plane iteration limit reached after {iterations} iterations (gap {gap:e})")]
    IterationLimit { iterations: usize, gap: f64 },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// One realization `(A(θ), b(θ))` of the uncertain price map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSample {
    #[serde(rename = "A")]
    pub a: Matrix,
    pub b: Vec<f64>,
}

impl CostSample {
    pub fn new(a: Matrix, b: Vec<f64>) -> Result<Self, AggregativeError> {
        let s = Self { a, b };
        s.validate(s.b.len())?;
        Ok(s)
    }

    fn validate(&self, n: usize) -> Result<(), AggregativeError> {
        if self.a.rows() != n || self.a.cols() != n || self.b.len() != n {
            return Err(AggregativeError::DimensionMismatch {
                expected: n,
                got: self.a.rows().max(self.b.len()),
            });
        }
        if self.b.iter().any(|v| !v.is_finite()) {
            return Err(AggregativeError::InvalidCost("non-finite b".into()));
        }
        if !self.a.is_symmetric(SYM_TOL) {
            return Err(AggregativeError::InvalidCost("A is not symmetric".into()));
        }
        if n > 0 && self.a.min_symmetric_eigenvalue() < PSD_FLOOR {
            return Err(AggregativeError::InvalidCost("A is not positive semidefinite".into()));
        }
        Ok(())
    }

    /// `σᵀAσ + bᵀσ`.
    pub fn value(&self, sigma: &[f64]) -> f64 {
        self.a.quad_form(sigma) + dot(&self.b, sigma)
    }

    /// `2Aσ + b`, the gradient of [`value`](Self::value) in σ (A symmetric).
    pub fn sigma_gradient(&self, sigma: &[f64]) -> Vec<f64> {
        let mut g = self.a.mul_vec(sigma);
        for (gi, bi) in g.iter_mut().zip(&self.b) {
            *gi = 2.0 * *gi + bi;
        }
        g
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `min f(x) + max_m g(x, θ_m)` over `x ∈ X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProgramDoc", into = "ProgramDoc")]
pub struct AggregativeProgram {
    agents: usize,
    n: usize,
    deterministic: CostSample,
    domain: Polytope,
    samples: Vec<CostSample>,
}

#[derive(Serialize, Deserialize)]
struct ProgramDoc {
    #[serde(rename = "N")]
    agents: usize,
    n: usize,
    #[serde(rename = "A0")]
    a0: Matrix,
    b0: Vec<f64>,
    #[serde(rename = "X")]
    domain: Polytope,
    samples: Vec<CostSample>,
}

impl TryFrom<ProgramDoc> for AggregativeProgram {
    type Error = AggregativeError;
    fn try_from(d: ProgramDoc) -> Result<Self, Self::Error> {
        AggregativeProgram::new(d.agents, d.n, CostSample { a: d.a0, b: d.b0 }, d.domain, d.samples)
    }
}

impl From<AggregativeProgram> for ProgramDoc {
    fn from(p: AggregativeProgram) -> Self {
        ProgramDoc {
            agents: p.agents,
            n: p.n,
            a0: p.deterministic.a,
            b0: p.deterministic.b,
            domain: p.domain,
            samples: p.samples,
        }
    }
}

impl AggregativeProgram {
    pub fn new(
        agents: usize,
        n: usize,
        deterministic: CostSample,
        domain: Polytope,
        samples: Vec<CostSample>,
    ) -> Result<Self, AggregativeError> {
        deterministic.validate(n)?;
        for s in &samples {
            s.validate(n)?;
        }
        if domain.dim() != agents * n {
            return Err(AggregativeError::DimensionMismatch {
                expected: agents * n,
                got: domain.dim(),
            });
        }
        Ok(Self {
            agents,
            n,
            deterministic,
            domain,
            samples,
        })
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.agents * self.n
    }

    pub fn deterministic(&self) -> &CostSample {
        &self.deterministic
    }

    pub fn domain(&self) -> &Polytope {
        &self.domain
    }

    pub fn samples(&self) -> &[CostSample] {
        &self.samples
    }

    /// Same program with a different sample list.
    pub fn with_samples(&self, samples: Vec<CostSample>) -> Result<Self, AggregativeError> {
        Self::new(self.agents, self.n, self.deterministic.clone(), self.domain.clone(), samples)
    }

    fn check_x(&self, x: &[f64]) -> Result<(), AggregativeError> {
        if x.len() != self.dim() {
            return Err(AggregativeError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `σ(x) = Σᵢ xᵢ`.
    pub fn sigma(&self, x: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.n];
        for agent in x.chunks(self.n.max(1)).take(self.agents) {
            for (si, v) in s.iter_mut().zip(agent) {
                *si += v;
            }
        }
        s
    }

    /// `∇ₓ` of a σ-dependent cost: the σ-gradient repeated for every agent.
    fn replicate(&self, g: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for _ in 0..self.agents {
            out.extend_from_slice(g);
        }
        out
    }

    pub fn eval_f(&self, x: &[f64]) -> Result<f64, AggregativeError> {
        self.check_x(x)?;
        Ok(self.deterministic.value(&self.sigma(x)))
    }

    pub fn grad_f(&self, x: &[f64]) -> Result<Vec<f64>, AggregativeError> {
        self.check_x(x)?;
        Ok(self.replicate(&self.deterministic.sigma_gradient(&self.sigma(x))))
    }

    pub fn eval_g(&self, x: &[f64], s: &CostSample) -> Result<f64, AggregativeError> {
        self.check_x(x)?;
        if s.b.len() != self.n {
            return Err(AggregativeError::DimensionMismatch {
                expected: self.n,
                got: s.b.len(),
            });
        }
        Ok(s.value(&self.sigma(x)))
    }

    pub fn grad_g(&self, x: &[f64], s: &CostSample) -> Result<Vec<f64>, AggregativeError> {
        self.check_x(x)?;
        Ok(self.replicate(&s.sigma_gradient(&self.sigma(x))))
    }

    /// `max_m g(x, θ_m)`, zero when there are no samples.
    pub fn max_g(&self, x: &[f64]) -> Result<f64, AggregativeError> {
        self.check_x(x)?;
        let sigma = self.sigma(x);
        Ok(self
            .samples
            .iter()
            .map(|s| s.value(&sigma))
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
            .unwrap_or(0.0))
    }
}

/// Output of [`solve_epigraph`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpigraphSolution {
    pub x_star: Vec<f64>,
    /// `max_m g(x_star, θ_m)`, evaluated exactly at the returned point.
    pub gamma_star: f64,
    /// `f(x_star) + gamma_star`.
    pub value: f64,
    /// Final upper minus lower bound.
    pub gap: f64,
    pub iterations: usize,
    /// Best lower bound after each iteration.
    pub lower_bounds: Vec<f64>,
    /// Incumbent value after each iteration.
    pub upper_bounds: Vec<f64>,
}

/// Kelley settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KelleyOptions {
    /// Stop once `UB − LB ≤ tol·max(1, |UB|)`.
    pub tol: f64,
    /// Cuts kept in the master; the oldest nonbasic ones go first.
    pub max_cuts: usize,
    pub max_iterations: usize,
}

impl KelleyOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            max_cuts: 2000,
            max_iterations: 20_000,
        }
    }
}

/// Solves the epigraphic scenario program to relative gap `tol`.
pub fn solve_epigraph(prog: &AggregativeProgram, tol: f64) -> Result<EpigraphSolution, AggregativeError> {
    solve_epigraph_with(prog, &KelleyOptions::with_tol(tol))
}

pub fn solve_epigraph_with(
    prog: &AggregativeProgram,
    opts: &KelleyOptions,
) -> Result<EpigraphSolution, AggregativeError> {
    let x0 = interior_point(prog)?;
    let active: Vec<usize> = (0..prog.samples.len()).collect();
    kelley(prog, &active, &x0, opts)
}

fn interior_point(prog: &AggregativeProgram) -> Result<Vec<f64>, AggregativeError> {
    match chebyshev_center(&prog.domain) {
        Ok(b) => Ok(b.center),
        Err(ChebyshevError::Infeasible) => Err(AggregativeError::InfeasibleDomain),
        Err(ChebyshevError::Unbounded | ChebyshevError::NoConstraints) => Err(AggregativeError::UnboundedDomain),
        Err(ChebyshevError::Lp(e)) => Err(e.into()),
    }
}

/// Linearization `grad·x − val_at ≤ epi − val` as an LP row over `(x, γ, t)`.
fn cut_row(grad: &[f64], x: &[f64], val: f64, epi: usize, nv: usize) -> (Vec<f64>, f64) {
    let mut row = Vec::with_capacity(nv);
    row.extend_from_slice(grad);
    row.resize(nv, 0.0);
    row[epi] = -1.0;
    (row, dot(grad, x) - val)
}

fn kelley(
    prog: &AggregativeProgram,
    active: &[usize],
    x0: &[f64],
    opts: &KelleyOptions,
) -> Result<EpigraphSolution, AggregativeError> {
    let dn = prog.dim();
    let (gi, ti, nv) = (dn, dn + 1, dn + 2);
    let mut c = vec![0.0; nv];
    c[gi] = -1.0;
    c[ti] = -1.0;
    let mut lp = IncrementalLp::new(c);
    for h in prog.domain.constraints() {
        let mut row = h.normal.to_vec();
        row.resize(nv, 0.0);
        lp.add_constraint(row, h.offset);
    }
    if active.is_empty() {
        // the max over an empty sample set is taken as zero
        let mut e = vec![0.0; nv];
        e[gi] = 1.0;
        lp.add_equality(e, 0.0);
    }
    let mut cuts: VecDeque<RowId> = VecDeque::new();

    // evaluates f, the most violated sample and adds the corresponding cuts
    let evaluate = |x: &[f64]| -> (f64, f64, Option<usize>) {
        let sigma = prog.sigma(x);
        let fx = prog.deterministic.value(&sigma);
        let mut best: Option<(usize, f64)> = None;
        for &m in active {
            let v = prog.samples[m].value(&sigma);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((m, v));
            }
        }
        match best {
            Some((m, v)) => (fx, v, Some(m)),
            None => (fx, 0.0, None),
        }
    };
    let add_cuts = |lp: &mut IncrementalLp, cuts: &mut VecDeque<RowId>, x: &[f64], fx: f64, gx: f64, m: Option<usize>, t_k: f64, g_k: f64| {
        let sigma = prog.sigma(x);
        if fx > t_k {
            let grad = prog.replicate(&prog.deterministic.sigma_gradient(&sigma));
            let (row, rhs) = cut_row(&grad, x, fx, ti, nv);
            cuts.push_back(lp.add_constraint(row, rhs));
        }
        if let Some(m) = m {
            if gx > g_k {
                let grad = prog.replicate(&prog.samples[m].sigma_gradient(&sigma));
                let (row, rhs) = cut_row(&grad, x, gx, gi, nv);
                cuts.push_back(lp.add_constraint(row, rhs));
            }
        }
    };

    let (f0, g0, m0) = evaluate(x0);
    add_cuts(&mut lp, &mut cuts, x0, f0, g0, m0, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut incumbent = x0.to_vec();
    let mut ub = f0 + g0;
    let mut lb = f64::NEG_INFINITY;
    let mut lower_bounds = Vec::new();
    let mut upper_bounds = Vec::new();

    for iter in 1..=opts.max_iterations {
        let z = match lp.solve()? {
            LpOutcome::Optimal { x, .. } => x,
            LpOutcome::Infeasible => return Err(AggregativeError::InfeasibleDomain),
            LpOutcome::Unbounded => return Err(AggregativeError::UnboundedDomain),
        };
        let (t_k, g_k) = (z[ti], z[gi]);
        lb = lb.max(t_k + g_k);
        let xk = &z[..dn];
        let (fx, gx, m) = evaluate(xk);
        if fx + gx < ub {
            ub = fx + gx;
            incumbent = xk.to_vec();
        }
        lower_bounds.push(lb);
        upper_bounds.push(ub);
        let gap = ub - lb;
        if gap <= opts.tol * ub.abs().max(1.0) {
            return Ok(finish(prog, active, incumbent, gap, iter, lower_bounds, upper_bounds));
        }
        let before = cuts.len();
        add_cuts(&mut lp, &mut cuts, xk, fx, gx, m, t_k, g_k);
        if cuts.len() == before {
            // the model is exact at x_k, so x_k is optimal up to LP rounding
            return Ok(finish(prog, active, incumbent, gap.max(0.0), iter, lower_bounds, upper_bounds));
        }
        let mut scan = 0;
        while cuts.len() > opts.max_cuts && scan < cuts.len() {
            let id = cuts[scan];
            if lp.remove_constraint(id) {
                cuts.remove(scan);
            } else {
                scan += 1;
            }
        }
    }
    Err(AggregativeError::IterationLimit {
        iterations: opts.max_iterations,
        gap: ub - lb,
    })
}

fn finish(
    prog: &AggregativeProgram,
    active: &[usize],
    x: Vec<f64>,
    gap: f64,
    iterations: usize,
    lower_bounds: Vec<f64>,
    upper_bounds: Vec<f64>,
) -> EpigraphSolution {
    let sigma = prog.sigma(&x);
    let gamma = active
        .iter()
        .map(|&m| prog.samples[m].value(&sigma))
        .fold(None, |a: Option<f64>, v| Some(a.map_or(v, |a| a.max(v))))
        .unwrap_or(0.0);
    let value = prog.deterministic.value(&sigma) + gamma;
    EpigraphSolution {
        x_star: x,
        gamma_star: gamma,
        value,
        gap,
        iterations,
        lower_bounds,
        upper_bounds,
    }
}

/// Leave-one-out analysis behind [`count_support_constraints`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    pub value: f64,
    /// Optimal value with sample `m` removed, per sample.
    pub without: Vec<f64>,
    /// Samples whose removal lowers the optimal value by more than
    /// `DELTA_SUP·max(1, |value|)`.
    pub support: Vec<usize>,
}

/// Leave-one-out support analysis.
///
/// Removing a constraint from a convex program changes its (unique) optimizer
/// exactly when it strictly lowers the optimal value, and the value is stable
/// under the non-uniqueness of `x*` in directions that keep `σ(x*)`. The test
/// therefore compares values instead of optimizers.
pub fn support_report(prog: &AggregativeProgram, tol: f64) -> Result<SupportReport, AggregativeError> {
    let opts = KelleyOptions::with_tol(tol);
    let x0 = interior_point(prog)?;
    let m = prog.samples.len();
    let all: Vec<usize> = (0..m).collect();
    let full = kelley(prog, &all, &x0, &opts)?;
    let without: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|s| {
            let active: Vec<usize> = (0..m).filter(|&j| j != s).collect();
            kelley(prog, &active, &x0, &opts).map(|sol| sol.value)
        })
        .collect::<Result<_, _>>()?;
    let thresh = DELTA_SUP * full.value.abs().max(1.0);
    let support = (0..m).filter(|&s| full.value - without[s] > thresh).collect();
    Ok(SupportReport {
        value: full.value,
        without,
        support,
    })
}

/// Number of support constraints, by leave-one-out re-solves at `tol`.
pub fn count_support_constraints(prog: &AggregativeProgram, tol: f64) -> Result<usize, AggregativeError> {
    Ok(support_report(prog, tol)?.support.len())
}

/// `P`, `V` and `Q = [P; V]` of the support-rank argument at `(x, θ)`.
///
/// `P = [[1_{N×N} ⊗ A, 0], [0, 0]]` and `V = (1_{1×N} ⊗ (2σᵀA + bᵀ), −1)`.
pub fn support_rank_matrices(
    prog: &AggregativeProgram,
    x: &[f64],
    s: &CostSample,
) -> Result<(Matrix, Matrix, Matrix), AggregativeError> {
    prog.check_x(x)?;
    if s.b.len() != prog.n {
        return Err(AggregativeError::DimensionMismatch {
            expected: prog.n,
            got: s.b.len(),
        });
    }
    let dn = prog.dim();
    let ones = Matrix::new(prog.agents, prog.agents, vec![1.0; prog.agents * prog.agents])?;
    let a_tilde = ones.kron(&s.a);
    let mut p = Matrix::zeros(dn + 1, dn + 1);
    for i in 0..dn {
        for j in 0..dn {
            p[(i, j)] = a_tilde[(i, j)];
        }
    }
    let c = prog.replicate(&s.sigma_gradient(&prog.sigma(x)));
    let mut v = Matrix::zeros(1, dn + 1);
    for (j, cj) in c.iter().enumerate() {
        v[(0, j)] = *cj;
    }
    v[(0, dn)] = -1.0;
    let q = p.vstack(&v);
    Ok((p, v, q))
}

/// Outcome of [`check_support_rank_bound`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankCheck {
    pub holds: bool,
    pub max_rank: usize,
    /// Probes whose sample matrix was numerically nonsingular.
    pub nonsingular_probes: usize,
}

/// Probes `rank(Q) ≤ n + 1` at random points for the program's samples,
/// requiring equality whenever `A(θ)` is numerically nonsingular.
///
/// Probe `j` uses sample `j mod M` and a point drawn uniformly from
/// `[−1, 1]^{nN}`. Programs without samples hold vacuously.
pub fn check_support_rank_bound(
    prog: &AggregativeProgram,
    trials: usize,
    seed: u64,
) -> Result<RankCheck, AggregativeError> {
    let mut out = RankCheck {
        holds: true,
        max_rank: 0,
        nonsingular_probes: 0,
    };
    if prog.samples.is_empty() {
        return Ok(out);
    }
    let bound = prog.n + 1;
    for j in 0..trials {
        let mut stream = SeededStream::new(seed, "rank-probe", j as u64);
        let x: Vec<f64> = (0..prog.dim())
            .map(|_| 2.0 * stream.standard_uniform() - 1.0)
            .collect();
        let s = &prog.samples[j % prog.samples.len()];
        let (_, _, q) = support_rank_matrices(prog, &x, s)?;
        let r = numeric_rank(&q, RANK_TOL);
        out.max_rank = out.max_rank.max(r);
        let nonsingular = numeric_rank(&s.a, RANK_TOL) == prog.n;
        if nonsingular {
            out.nonsingular_probes += 1;
        }
        if r > bound || (nonsingular && r != bound) {
            out.holds = false;
        }
    }
    Ok(out)
}

/// `g(x*, θ) > γ* + FEAS_TOL`: the sample raises the worst-case cost at the
/// computed optimizer.
pub fn cost_deterioration_event(
    prog: &AggregativeProgram,
    sol: &EpigraphSolution,
    s: &CostSample,
) -> Result<bool, AggregativeError> {
    Ok(prog.eval_g(&sol.x_star, s)? > sol.gamma_star + FEAS_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Halfspace;
    use proptest::prelude::*;

    fn scalar(a: f64, b: f64) -> CostSample {
        CostSample::new(Matrix::from_diag(&[a]), vec![b]).unwrap()
    }

    fn zero_cost(n: usize) -> CostSample {
        CostSample::new(Matrix::zeros(n, n), vec![0.0; n]).unwrap()
    }

    fn two_agent_program() -> AggregativeProgram {
        // boxes [0,2] with x_i ≥ 1, which makes the lower box bound redundant
        let mut x = Polytope::from_box(&[0.0, 0.0], &[2.0, 2.0]).unwrap();
        x.push(Halfspace::new(vec![-1.0, 0.0], -1.0)).unwrap();
        x.push(Halfspace::new(vec![0.0, -1.0], -1.0)).unwrap();
        AggregativeProgram::new(2, 1, zero_cost(1), x, vec![scalar(1.0, 0.0), scalar(2.0, -1.0)]).unwrap()
    }

    #[test]
    fn eval_g_examples() {
        let dom = Polytope::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let p = AggregativeProgram::new(2, 1, zero_cost(1), dom, vec![]).unwrap();
        assert_eq!(p.eval_g(&[1.0, 1.0], &scalar(1.0, 0.0)).unwrap(), 4.0);
        assert_eq!(p.eval_g(&[0.0, 0.0], &scalar(3.0, 2.0)).unwrap(), 0.0);
        let dom = Polytope::from_box(&[0.0; 4], &[1.0; 4]).unwrap();
        let p = AggregativeProgram::new(2, 2, zero_cost(2), dom, vec![]).unwrap();
        let s = CostSample::new(Matrix::identity(2), vec![1.0, 1.0]).unwrap();
        assert_eq!(p.eval_g(&[1.0, 0.0, 0.0, 1.0], &s).unwrap(), 4.0);
        assert!(p.eval_g(&[1.0], &s).is_err());
    }

    #[test]
    fn rejects_non_psd_and_asymmetric() {
        assert!(CostSample::new(Matrix::from_diag(&[-1.0]), vec![0.0]).is_err());
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(CostSample::new(m, vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn one_dimensional_minimax() {
        let mut x = Polytope::from_box(&[0.0], &[4.0]).unwrap();
        x.push(Halfspace::new(vec![-1.0], -1.0)).unwrap();
        let p = AggregativeProgram::new(1, 1, zero_cost(1), x, vec![scalar(1.0, 0.0)]).unwrap();
        let sol = solve_epigraph(&p, 1e-9).unwrap();
        assert!((sol.x_star[0] - 1.0).abs() < 1e-6);
        assert!((sol.gamma_star - 1.0).abs() < 1e-8);
        assert!((sol.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn no_samples_quadratic_interior_minimum() {
        let n = 3;
        let x = Polytope::from_box(&[-1.0; 3], &[1.0; 3]).unwrap();
        let f = CostSample::new(Matrix::identity(n), vec![0.0; n]).unwrap();
        let p = AggregativeProgram::new(1, n, f, x, vec![]).unwrap();
        let sol = solve_epigraph(&p, 1e-9).unwrap();
        assert_eq!(sol.gamma_star, 0.0);
        assert!(sol.value.abs() < 1e-8);
        assert!(sol.x_star.iter().all(|v| v.abs() < 1e-3));
    }

    #[test]
    fn two_agent_minimax_value() {
        // on σ ∈ [2,4] the second sample dominates and is minimized at σ = 2
        let sol = solve_epigraph(&two_agent_program(), 1e-10).unwrap();
        assert!((sol.value - 6.0).abs() < 1e-7);
        assert!((sol.x_star[0] - 1.0).abs() < 1e-5 && (sol.x_star[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn bounds_are_monotone_and_ordered() {
        let sol = solve_epigraph(&two_agent_program(), 1e-10).unwrap();
        for w in sol.lower_bounds.windows(2) {
            assert!(w[1] >= w[0]);
        }
        for w in sol.upper_bounds.windows(2) {
            assert!(w[1] <= w[0]);
        }
        for (l, u) in sol.lower_bounds.iter().zip(&sol.upper_bounds) {
            assert!(l <= &(u + 1e-9));
        }
    }

    #[test]
    fn single_binding_sample_is_support() {
        let mut x = Polytope::from_box(&[0.0], &[4.0]).unwrap();
        x.push(Halfspace::new(vec![-1.0], -1.0)).unwrap();
        let p = AggregativeProgram::new(1, 1, zero_cost(1), x, vec![scalar(1.0, 0.0)]).unwrap();
        assert_eq!(count_support_constraints(&p, SUPPORT_SOLVE_TOL).unwrap(), 1);
    }

    #[test]
    fn duplicated_samples_are_not_support() {
        let p = two_agent_program();
        let p = p.with_samples(vec![scalar(2.0, -1.0), scalar(2.0, -1.0), scalar(1.0, 0.0)]).unwrap();
        assert_eq!(count_support_constraints(&p, SUPPORT_SOLVE_TOL).unwrap(), 0);
    }

    #[test]
    fn rank_matrices_scalar_case() {
        let x = Polytope::from_box(&[0.0], &[1.0]).unwrap();
        let p = AggregativeProgram::new(1, 1, zero_cost(1), x, vec![]).unwrap();
        let (a, b0, xi) = (3.0, 0.5, 0.25);
        let (pm, v, q) = support_rank_matrices(&p, &[xi], &scalar(a, b0)).unwrap();
        // P keeps its zero γ-row, so Q is (nN+2)×(nN+1); its nonzero rows are
        // [a, 0] and [2aξ + b, −1]
        let rows = Vec::<Vec<f64>>::from(q);
        assert_eq!(rows, vec![vec![a, 0.0], vec![0.0, 0.0], vec![2.0 * a * xi + b0, -1.0]]);
        assert_eq!((pm.rows(), pm.cols(), v.rows(), v.cols()), (2, 2, 1, 2));
    }

    #[test]
    fn rank_of_zero_data_is_one() {
        let x = Polytope::from_box(&[0.0; 4], &[1.0; 4]).unwrap();
        let p = AggregativeProgram::new(2, 2, zero_cost(2), x, vec![]).unwrap();
        let (_, _, q) = support_rank_matrices(&p, &[0.0; 4], &zero_cost(2)).unwrap();
        assert_eq!((q.rows(), q.cols()), (6, 5));
        assert_eq!(numeric_rank(&q, RANK_TOL), 1);
    }

    #[test]
    fn identity_cost_has_rank_n_plus_one() {
        for agents in [2, 4, 8, 16] {
            let n = 3;
            let x = Polytope::from_box(&vec![0.0; agents * n], &vec![1.0; agents * n]).unwrap();
            let s = CostSample::new(Matrix::identity(n), vec![0.3, -0.2, 1.0]).unwrap();
            let p = AggregativeProgram::new(agents, n, zero_cost(n), x, vec![s]).unwrap();
            let r = check_support_rank_bound(&p, 10, 4).unwrap();
            assert!(r.holds);
            assert_eq!(r.max_rank, n + 1);
            assert_eq!(r.nonsingular_probes, 10);
        }
    }

    #[test]
    fn deterioration_examples() {
        let p = two_agent_program();
        let sol = solve_epigraph(&p, 1e-10).unwrap();
        assert!(!cost_deterioration_event(&p, &sol, &p.samples()[1]).unwrap());
        assert!(cost_deterioration_event(&p, &sol, &scalar(20.0, -10.0)).unwrap());
    }

    #[test]
    fn program_json_round_trip() {
        let p = two_agent_program();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.starts_with(r#"{"N":2,"n":1,"A0":[[0.0]],"b0":[0.0],"X":{"d":2,"#));
        let back: AggregativeProgram = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }

    fn psd(n: usize, entries: &[f64]) -> Matrix {
        // B Bᵀ for a square B
        let b = Matrix::new(n, n, entries.to_vec()).unwrap();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = (0..n).map(|k| b[(i, k)] * b[(j, k)]).sum();
            }
        }
        m
    }

    proptest! {
        #[test]
        fn gradient_matches_central_differences(
            entries in proptest::collection::vec(-1.0f64..1.0, 4),
            b in proptest::collection::vec(-1.0f64..1.0, 2),
            x in proptest::collection::vec(-2.0f64..2.0, 6),
        ) {
            let dom = Polytope::from_box(&[0.0; 6], &[1.0; 6]).unwrap();
            let p = AggregativeProgram::new(3, 2, zero_cost(2), dom, vec![]).unwrap();
            let s = CostSample::new(psd(2, &entries), b).unwrap();
            let g = p.grad_g(&x, &s).unwrap();
            let h = 1e-6;
            for j in 0..6 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let fd = (p.eval_g(&xp, &s).unwrap() - p.eval_g(&xm, &s).unwrap()) / (2.0 * h);
                prop_assert!((fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1.0));
            }
        }

        #[test]
        fn g_is_midpoint_convex(
            entries in proptest::collection::vec(-1.0f64..1.0, 9),
            b in proptest::collection::vec(-1.0f64..1.0, 3),
            x in proptest::collection::vec(-2.0f64..2.0, 6),
            y in proptest::collection::vec(-2.0f64..2.0, 6),
        ) {
            let dom = Polytope::from_box(&[0.0; 6], &[1.0; 6]).unwrap();
            let p = AggregativeProgram::new(2, 3, zero_cost(3), dom, vec![]).unwrap();
            let s = CostSample::new(psd(3, &entries), b).unwrap();
            let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
            let lhs = p.eval_g(&mid, &s).unwrap();
            let rhs = 0.5 * (p.eval_g(&x, &s).unwrap() + p.eval_g(&y, &s).unwrap());
            prop_assert!(lhs <= rhs + 1e-10);
        }
    }
}
