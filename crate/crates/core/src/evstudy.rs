//! Electric-vehicle charging studies.
//!
//! Two experiment families share one fleet layout: `N` vehicles, `n` time
//! slots, charging rates `x[i·n + t]` in kW.
//!
//! * Feasibility: per-slot rate bounds and per-vehicle energy demands are
//!   uncertain; the scenario feasible set is certified a posteriori and
//!   checked against fresh samples.
//! * Cost: bounds and demands are fixed, the price map `A(θ)σ + b(θ)` is
//!   uncertain; the minimax schedule is certified a priori.
//!
//! The base price profile [`SYNTHETIC_PROFILE`] is a made-up evening-peak
//! curve, not measured data.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregative::{
    cost_deterioration_event, solve_epigraph, AggregativeError, AggregativeProgram, CostSample, EpigraphSolution,
};
use crate::certificates::{epsilon_explicit, epsilon_posteriori, CertificateError};
use crate::geometry::{Halfspace, Polytope};
use crate::linalg_lp::Matrix;
use crate::sampling::{derive_seed, SeededStream, TEST, TRAIN};
use crate::scenario::{assemble, certify_set, estimate_set_violation_blocks, ConstraintSampler, SamplerError, ScenarioError, TrialBlock};

/// Synthetic 12-slot evening-peak price profile (per kW). Version 1.
pub const SYNTHETIC_PROFILE: [f64; 12] = [0.60, 0.55, 0.50, 0.50, 0.55, 0.70, 0.90, 1.00, 1.10, 1.20, 1.00, 0.80];

/// Kelley tolerance used by the cost experiments.
pub const COST_SOLVE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvError {
    #[error("infeasible sample configuration: {0}")]
    InfeasibleSampleConfig(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Aggregative(#[from] AggregativeError),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
}

fn uniform(s: &mut SeededStream, lo: f64, hi: f64) -> Result<f64, EvError> {
    s.uniform(lo, hi).map_err(|e| EvError::Domain(e.to_string()))
}

/// Uncertain bounds and demands: `x̄ = x̄ⁿᵒᵐ + θ_u`, `x̲ = x̲ⁿᵒᵐ + θ_l`,
/// `E = Eⁿᵒᵐ + θ_e`, with truncated Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FeasibilityDoc")]
pub struct EVFeasibilityConfig {
    #[serde(rename = "N")]
    pub agents: usize,
    pub n: usize,
    pub seed: u64,
    /// `N` rows of `n` nominal upper rates.
    pub x_upper_nom: Vec<Vec<f64>>,
    pub x_lower_nom: f64,
    pub energy_nom: Vec<f64>,
    pub sigma_bounds: f64,
    pub sigma_energy: f64,
    /// Noise is truncated at `± truncation · σ`.
    pub truncation: f64,
}

/// Config document; nominal arrays are optional and drawn from the seed when
/// absent.
#[derive(Deserialize)]
struct FeasibilityDoc {
    #[serde(rename = "N")]
    agents: usize,
    n: usize,
    seed: u64,
    x_upper_nom: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_lower")]
    x_lower_nom: f64,
    energy_nom: Option<Vec<f64>>,
    #[serde(default = "default_sigma_bounds")]
    sigma_bounds: f64,
    #[serde(default = "default_sigma_energy")]
    sigma_energy: f64,
    #[serde(default = "default_truncation")]
    truncation: f64,
}

fn default_lower() -> f64 {
    2.0
}
fn default_sigma_bounds() -> f64 {
    0.5
}
fn default_sigma_energy() -> f64 {
    1.0
}
fn default_truncation() -> f64 {
    3.0
}

impl TryFrom<FeasibilityDoc> for EVFeasibilityConfig {
    type Error = EvError;
    fn try_from(d: FeasibilityDoc) -> Result<Self, EvError> {
        let mut cfg = EVFeasibilityConfig::synthetic(d.agents, d.n, d.seed)?;
        if let Some(u) = d.x_upper_nom {
            cfg.x_upper_nom = u;
            cfg.energy_nom = half_energy(&cfg.x_upper_nom);
        }
        if let Some(e) = d.energy_nom {
            cfg.energy_nom = e;
        }
        cfg.x_lower_nom = d.x_lower_nom;
        cfg.sigma_bounds = d.sigma_bounds;
        cfg.sigma_energy = d.sigma_energy;
        cfg.truncation = d.truncation;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn half_energy(upper: &[Vec<f64>]) -> Vec<f64> {
    upper.iter().map(|row| 0.5 * row.iter().sum::<f64>()).collect()
}

impl EVFeasibilityConfig {
    /// Nominal upper rates `U[10, 20)` kW per slot (vehicle `i` drawn from
    /// stream `(seed, "agents", i)`), lower rate 2 kW, demand half the
    /// nominal deliverable energy, `σ = 0.5 / 1`, truncation at 3σ.
    pub fn synthetic(agents: usize, n: usize, seed: u64) -> Result<Self, EvError> {
        let mut x_upper_nom = Vec::with_capacity(agents);
        for i in 0..agents {
            let mut s = SeededStream::new(seed, "agents", i as u64);
            x_upper_nom.push((0..n).map(|_| uniform(&mut s, 10.0, 20.0)).collect::<Result<Vec<_>, _>>()?);
        }
        let cfg = Self {
            agents,
            n,
            seed,
            energy_nom: half_energy(&x_upper_nom),
            x_upper_nom,
            x_lower_nom: 2.0,
            sigma_bounds: 0.5,
            sigma_energy: 1.0,
            truncation: 3.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dim(&self) -> usize {
        self.agents * self.n
    }

    /// Checks shapes and that every admissible noise realization leaves each
    /// vehicle with a non-empty interior.
    pub fn validate(&self) -> Result<(), EvError> {
        let bad = |m: String| Err(EvError::InfeasibleSampleConfig(m));
        if self.agents == 0 || self.n == 0 {
            return bad("N and n must be positive".into());
        }
        if self.x_upper_nom.len() != self.agents || self.x_upper_nom.iter().any(|r| r.len() != self.n) {
            return bad("x_upper_nom must be N rows of n values".into());
        }
        if self.energy_nom.len() != self.agents {
            return bad("energy_nom must have N values".into());
        }
        if !(self.truncation > 0.0) || self.sigma_bounds < 0.0 || self.sigma_energy < 0.0 {
            return bad("truncation must be positive and noise levels non-negative".into());
        }
        let db = self.truncation * self.sigma_bounds;
        let de = self.truncation * self.sigma_energy;
        for (i, row) in self.x_upper_nom.iter().enumerate() {
            let min_up = row.iter().copied().fold(f64::INFINITY, f64::min) - db;
            if !(self.x_lower_nom + db < min_up) {
                return bad(format!("vehicle {i}: lower bound can exceed upper bound"));
            }
            let max_energy = row.iter().sum::<f64>() - self.n as f64 * db;
            if !(self.energy_nom[i] + de < max_energy) {
                return bad(format!("vehicle {i}: demand can exceed deliverable energy"));
            }
        }
        Ok(())
    }

    /// The redundant box `0 ≤ x ≤ max x̄ⁿᵒᵐ + cut·σ + 1` used as deterministic set.
    pub fn base_box(&self) -> Result<Polytope, EvError> {
        let top = self
            .x_upper_nom
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
            + self.truncation * self.sigma_bounds
            + 1.0;
        let d = self.dim();
        Polytope::from_box(&vec![0.0; d], &vec![top; d]).map_err(|e| EvError::Scenario(e.into()))
    }
}

/// Constraint sampler for [`EVFeasibilityConfig`]; normals are shared.
#[derive(Debug, Clone)]
pub struct EVFeasibilitySampler {
    cfg: EVFeasibilityConfig,
    up: Vec<Arc<[f64]>>,
    down: Vec<Arc<[f64]>>,
    energy: Vec<Arc<[f64]>>,
}

impl EVFeasibilitySampler {
    pub fn new(cfg: EVFeasibilityConfig) -> Result<Self, EvError> {
        cfg.validate()?;
        let d = cfg.dim();
        let unit = |j: usize, v: f64| -> Arc<[f64]> {
            let mut e = vec![0.0; d];
            e[j] = v;
            e.into()
        };
        let up = (0..d).map(|j| unit(j, 1.0)).collect();
        let down = (0..d).map(|j| unit(j, -1.0)).collect();
        let energy = (0..cfg.agents)
            .map(|i| {
                let mut e = vec![0.0; d];
                e[i * cfg.n..(i + 1) * cfg.n].fill(-1.0);
                e.into()
            })
            .collect();
        Ok(Self { cfg, up, down, energy })
    }

    pub fn config(&self) -> &EVFeasibilityConfig {
        &self.cfg
    }
}

impl ConstraintSampler for EVFeasibilitySampler {
    fn dim(&self) -> usize {
        self.cfg.dim()
    }

    /// Noise is drawn as all `θ_u`, then all `θ_l`, then all `θ_e`; each
    /// vehicle then emits `n` upper, `n` lower and one energy halfspace.
    fn draw(&self, s: &mut SeededStream) -> Result<Vec<Halfspace>, SamplerError> {
        let c = &self.cfg;
        let d = c.dim();
        let tg = |s: &mut SeededStream, sigma: f64| {
            if sigma == 0.0 {
                // keep stream consumption independent of the noise level
                s.gaussian(0.0, 0.0)
            } else {
                s.truncated_gaussian(0.0, sigma, c.truncation)
            }
            .map_err(|e| SamplerError(e.to_string()))
        };
        let theta_u: Vec<f64> = (0..d).map(|_| tg(s, c.sigma_bounds)).collect::<Result<_, _>>()?;
        let theta_l: Vec<f64> = (0..d).map(|_| tg(s, c.sigma_bounds)).collect::<Result<_, _>>()?;
        let theta_e: Vec<f64> = (0..c.agents).map(|_| tg(s, c.sigma_energy)).collect::<Result<_, _>>()?;
        let mut out = Vec::with_capacity(c.agents * (2 * c.n + 1));
        for i in 0..c.agents {
            for t in 0..c.n {
                let j = i * c.n + t;
                out.push(Halfspace::new(self.up[j].clone(), c.x_upper_nom[i][t] + theta_u[j]));
            }
            for t in 0..c.n {
                let j = i * c.n + t;
                out.push(Halfspace::new(self.down[j].clone(), -(c.x_lower_nom + theta_l[j])));
            }
            out.push(Halfspace::new(self.energy[i].clone(), -(c.energy_nom[i] + theta_e[i])));
        }
        Ok(out)
    }
}

/// Structural facet bound `2nN + N`.
pub fn structural_k(agents: usize, n: usize) -> usize {
    2 * n * agents + agents
}

/// One row of the feasibility experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityRow {
    #[serde(rename = "M")]
    pub m: usize,
    pub k_used: usize,
    pub epsilon_theory: f64,
    pub epsilon_empirical: f64,
    /// Facet-contributing samples found by Clarkson's algorithm.
    pub k_facets: usize,
    pub epsilon_facets: f64,
    pub hits: u64,
    pub trials: u64,
    pub beta: f64,
    pub seed: u64,
}

/// Full output of [`run_feasibility_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityRun {
    pub rows: Vec<FeasibilityRow>,
    /// Monte Carlo blocks per M, in M order.
    pub blocks: Vec<(usize, Vec<TrialBlock>)>,
}

/// For each M: assemble, certify with `k = k_override` (default `2nN + N`),
/// also count facets, and estimate the set violation on `m_test` fresh samples.
pub fn run_feasibility_experiment(
    cfg: &EVFeasibilityConfig,
    m_list: &[usize],
    m_test: usize,
    beta: f64,
    k_override: Option<usize>,
) -> Result<FeasibilityRun, EvError> {
    let sampler = EVFeasibilitySampler::new(cfg.clone())?;
    let base = cfg.base_box()?;
    let k_used = k_override.unwrap_or_else(|| structural_k(cfg.agents, cfg.n));
    let mut rows = Vec::with_capacity(m_list.len());
    let mut blocks = Vec::with_capacity(m_list.len());
    for &m in m_list {
        let sfs = assemble(&base, &sampler, m, cfg.seed)?;
        let cert = certify_set(&sfs, beta, Some(k_used))?;
        let k_facets = sfs.support_subsample()?.cardinality();
        let run = estimate_set_violation_blocks(&sfs, &sampler, m_test, cfg.seed)?;
        rows.push(FeasibilityRow {
            m,
            k_used,
            epsilon_theory: cert.epsilon,
            epsilon_empirical: run.estimate.frequency,
            k_facets,
            epsilon_facets: epsilon_posteriori(m as u64, k_facets as u64, beta)?,
            hits: run.estimate.hits,
            trials: run.estimate.trials,
            beta,
            seed: cfg.seed,
        });
        blocks.push((m, run.blocks));
    }
    Ok(FeasibilityRun { rows, blocks })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSweepRow {
    #[serde(rename = "N")]
    pub agents: usize,
    pub k: usize,
    pub epsilon: f64,
}

/// `ε(2Nn + N)` for each N at fixed `(n, M, β)`.
pub fn agent_sweep_epsilon(n: usize, m: usize, beta: f64, n_list: &[usize]) -> Result<Vec<AgentSweepRow>, EvError> {
    n_list
        .iter()
        .map(|&agents| {
            let k = structural_k(agents, n);
            if k >= m {
                return Err(EvError::Domain(format!("k = {k} is not below M = {m} for N = {agents}")));
            }
            Ok(AgentSweepRow {
                agents,
                k,
                epsilon: epsilon_posteriori(m as u64, k as u64, beta)?,
            })
        })
        .collect()
}

/// Fixed bounds and demands, uncertain prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CostDoc")]
pub struct EVCostConfig {
    #[serde(rename = "N")]
    pub agents: usize,
    pub n: usize,
    pub seed: u64,
    pub x_lower: Vec<f64>,
    pub x_upper: Vec<f64>,
    pub energy: Vec<f64>,
    pub a0_diag: f64,
    pub b0: Vec<f64>,
    /// Support of each diagonal entry of `A(θ)`.
    pub a_diag_range: [f64; 2],
    /// `b(θ)_t = u_t · b0_t` with `u_t` uniform on this range.
    pub b_scale_range: [f64; 2],
}

#[derive(Deserialize)]
struct CostDoc {
    #[serde(rename = "N")]
    agents: usize,
    n: usize,
    seed: u64,
    x_lower: Option<Vec<f64>>,
    x_upper: Option<Vec<f64>>,
    energy: Option<Vec<f64>>,
    a0_diag: Option<f64>,
    b0: Option<Vec<f64>>,
    a_diag_range: Option<[f64; 2]>,
    b_scale_range: Option<[f64; 2]>,
}

impl TryFrom<CostDoc> for EVCostConfig {
    type Error = EvError;
    fn try_from(d: CostDoc) -> Result<Self, EvError> {
        let mut c = EVCostConfig::synthetic(d.agents, d.n, d.seed)?;
        if let Some(v) = d.x_lower {
            c.x_lower = v;
        }
        if let Some(v) = d.x_upper {
            c.x_upper = v;
        }
        c.energy = match d.energy {
            Some(v) => v,
            None => midpoint_energy(&c.x_lower, &c.x_upper, c.n),
        };
        if let Some(v) = d.a0_diag {
            c.a0_diag = v;
        }
        if let Some(v) = d.b0 {
            c.b0 = v;
        }
        if let Some(v) = d.a_diag_range {
            c.a_diag_range = v;
        }
        if let Some(v) = d.b_scale_range {
            c.b_scale_range = v;
        }
        c.validate()?;
        Ok(c)
    }
}

fn midpoint_energy(lo: &[f64], hi: &[f64], n: usize) -> Vec<f64> {
    lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h) * n as f64).collect()
}

/// [`SYNTHETIC_PROFILE`] resampled to `n` slots by nearest-left lookup.
pub fn base_price_profile(n: usize) -> Vec<f64> {
    (0..n).map(|t| SYNTHETIC_PROFILE[t * 12 / n]).collect()
}

impl EVCostConfig {
    /// `x̄ᵢ ~ U[6, 15)` kW from stream `(seed, "agents", i)`, `x̲ᵢ = 2` kW,
    /// `Eᵢ = n·(x̲ᵢ + x̄ᵢ)/2`, `A₀ = 0.01·I`, `b₀` the synthetic profile,
    /// `diag A(θ) ~ U[0, 0.02)`, `b(θ) ~ U[0.8, 1.2)·b₀`.
    pub fn synthetic(agents: usize, n: usize, seed: u64) -> Result<Self, EvError> {
        let x_upper = (0..agents)
            .map(|i| uniform(&mut SeededStream::new(seed, "agents", i as u64), 6.0, 15.0))
            .collect::<Result<Vec<_>, _>>()?;
        let x_lower = vec![2.0; agents];
        let c = Self {
            agents,
            n,
            seed,
            energy: midpoint_energy(&x_lower, &x_upper, n),
            x_lower,
            x_upper,
            a0_diag: 0.01,
            b0: base_price_profile(n),
            a_diag_range: [0.0, 0.02],
            b_scale_range: [0.8, 1.2],
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), EvError> {
        let bad = |m: &str| Err(EvError::InfeasibleSampleConfig(m.to_owned()));
        if self.agents == 0 || self.n == 0 {
            return bad("N and n must be positive");
        }
        if self.x_lower.len() != self.agents || self.x_upper.len() != self.agents || self.energy.len() != self.agents {
            return bad("per-agent vectors must have N entries");
        }
        if self.b0.len() != self.n {
            return bad("b0 must have n entries");
        }
        if self.a0_diag < 0.0 || self.a_diag_range[0] < 0.0 || self.a_diag_range[0] > self.a_diag_range[1] {
            return bad("A0 and A(θ) diagonals must be non-negative with lo ≤ hi");
        }
        if self.b_scale_range[0] > self.b_scale_range[1] {
            return bad("b scale range must have lo ≤ hi");
        }
        for i in 0..self.agents {
            if !(self.x_lower[i] < self.x_upper[i]) {
                return bad("each agent needs x_lower < x_upper");
            }
            if !(self.energy[i] < self.n as f64 * self.x_upper[i]) {
                return bad("energy demand must be below n·x_upper");
            }
        }
        Ok(())
    }

    /// Box-plus-energy domain: per agent `x̲ᵢ ≤ xᵢ ≤ x̄ᵢ`, `Σₜ xᵢ⁽ᵗ⁾ ≥ Eᵢ`.
    pub fn domain(&self) -> Result<Polytope, EvError> {
        let d = self.agents * self.n;
        let mut lo = Vec::with_capacity(d);
        let mut hi = Vec::with_capacity(d);
        for i in 0..self.agents {
            lo.extend(std::iter::repeat_n(self.x_lower[i], self.n));
            hi.extend(std::iter::repeat_n(self.x_upper[i], self.n));
        }
        let geo = |e: crate::geometry::GeometryError| EvError::Scenario(e.into());
        let mut poly = Polytope::from_box(&lo, &hi).map_err(geo)?;
        for i in 0..self.agents {
            let mut a = vec![0.0; d];
            a[i * self.n..(i + 1) * self.n].fill(-1.0);
            poly.push(Halfspace::new(a, -self.energy[i])).map_err(geo)?;
        }
        Ok(poly)
    }

    /// One price realization from `stream`: `n` diagonal entries, then `n`
    /// scale factors.
    pub fn draw_cost_sample(&self, s: &mut SeededStream) -> Result<CostSample, EvError> {
        let diag = (0..self.n)
            .map(|_| uniform(s, self.a_diag_range[0], self.a_diag_range[1]))
            .collect::<Result<Vec<_>, _>>()?;
        let b = self
            .b0
            .iter()
            .map(|&b0| uniform(s, self.b_scale_range[0], self.b_scale_range[1]).map(|u| u * b0))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CostSample::new(Matrix::from_diag(&diag), b)?)
    }

    /// `m` training samples from `(seed, "train", 1..=m)`.
    pub fn draw_training(&self, m: usize, seed: u64) -> Result<Vec<CostSample>, EvError> {
        (1..=m as u64)
            .map(|j| self.draw_cost_sample(&mut SeededStream::new(seed, TRAIN, j)))
            .collect()
    }

    pub fn test_sample(&self, seed: u64, t: u64) -> Result<CostSample, EvError> {
        self.draw_cost_sample(&mut SeededStream::new(seed, TEST, t))
    }
}

/// The aggregative program of `cfg` with `m` cost samples drawn from `cfg.seed`.
pub fn build_cost_program(cfg: &EVCostConfig, m: usize) -> Result<AggregativeProgram, EvError> {
    build_cost_program_seeded(cfg, m, cfg.seed)
}

pub fn build_cost_program_seeded(cfg: &EVCostConfig, m: usize, seed: u64) -> Result<AggregativeProgram, EvError> {
    cfg.validate()?;
    let a0 = CostSample::new(Matrix::from_diag(&vec![cfg.a0_diag; cfg.n]), cfg.b0.clone())?;
    Ok(AggregativeProgram::new(
        cfg.agents,
        cfg.n,
        a0,
        cfg.domain()?,
        cfg.draw_training(m, seed)?,
    )?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    #[serde(rename = "N")]
    pub agents: usize,
    pub repeat: usize,
    pub empirical_violation: f64,
    pub epsilon_theory: f64,
    pub hits: u64,
    pub trials: u64,
    pub value: f64,
    pub gap: f64,
    pub seed: u64,
}

/// Per-cell seed for `(N, repeat)`.
pub fn cell_seed(seed: u64, agents: usize, repeat: usize) -> u64 {
    derive_seed(seed, "cost-cell", &[agents as u64, repeat as u64])
}

/// Solves one `(N, repeat)` cell and counts deteriorating test samples.
pub fn run_cost_cell(
    base: &EVCostConfig,
    agents: usize,
    repeat: usize,
    m: usize,
    m_test: usize,
    beta: f64,
) -> Result<(CostRow, EpigraphSolution), EvError> {
    let cfg = EVCostConfig::synthetic(agents, base.n, base.seed).map(|mut c| {
        c.a0_diag = base.a0_diag;
        c.b0 = base.b0.clone();
        c.a_diag_range = base.a_diag_range;
        c.b_scale_range = base.b_scale_range;
        c
    })?;
    let seed = cell_seed(base.seed, agents, repeat);
    let prog = build_cost_program_seeded(&cfg, m, seed)?;
    let sol = solve_epigraph(&prog, COST_SOLVE_TOL)?;
    let mut hits = 0u64;
    for t in 0..m_test as u64 {
        if cost_deterioration_event(&prog, &sol, &cfg.test_sample(seed, t)?)? {
            hits += 1;
        }
    }
    let row = CostRow {
        agents,
        repeat,
        empirical_violation: if m_test == 0 { 0.0 } else { hits as f64 / m_test as f64 },
        epsilon_theory: epsilon_explicit(m as u64, beta, cfg.n as u64),
        hits,
        trials: m_test as u64,
        value: sol.value,
        gap: sol.gap,
        seed,
    };
    Ok((row, sol))
}

/// One row per `(N, repeat)`, in `N_list` order then repeat order.
///
/// Agent bounds come from `cfg.seed` (so fleets nest across N); cost and
/// test samples come from a per-cell derived seed.
pub fn run_cost_experiment(
    cfg: &EVCostConfig,
    n_list: &[usize],
    m: usize,
    m_test: usize,
    beta: f64,
    repeats: usize,
) -> Result<Vec<CostRow>, EvError> {
    let cells: Vec<(usize, usize)> = n_list
        .iter()
        .flat_map(|&a| (0..repeats).map(move |r| (a, r)))
        .collect();
    cells
        .par_iter()
        .map(|&(a, r)| run_cost_cell(cfg, a, r, m, m_test, beta).map(|x| x.0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::set_violates;

    #[test]
    fn constraint_count_per_sample() {
        for (agents, n) in [(1, 1), (5, 12), (3, 6)] {
            let cfg = EVFeasibilityConfig::synthetic(agents, n, 1).unwrap();
            let s = EVFeasibilitySampler::new(cfg).unwrap();
            for m in 0..5 {
                assert_eq!(s.draw_at(9, TRAIN, m).unwrap().len(), agents * (2 * n + 1));
            }
        }
    }

    #[test]
    fn zero_noise_gives_nominal_constraints() {
        let mut cfg = EVFeasibilityConfig::synthetic(2, 3, 4).unwrap();
        cfg.sigma_bounds = 0.0;
        cfg.sigma_energy = 0.0;
        let s = EVFeasibilitySampler::new(cfg.clone()).unwrap();
        let a = s.draw_at(1, TRAIN, 1).unwrap();
        let b = s.draw_at(1, TRAIN, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].offset, cfg.x_upper_nom[0][0]);
        assert_eq!(a[3].offset, -2.0);
        assert_eq!(a[6].offset, -cfg.energy_nom[0]);
    }

    #[test]
    fn noise_respects_truncation() {
        let cfg = EVFeasibilityConfig::synthetic(2, 4, 8).unwrap();
        let s = EVFeasibilitySampler::new(cfg.clone()).unwrap();
        let mut sum = 0.0;
        let trials = 2000;
        for m in 0..trials {
            let hs = s.draw_at(3, TEST, m).unwrap();
            for i in 0..2 {
                for t in 0..4 {
                    let u = hs[i * 9 + t].offset - cfg.x_upper_nom[i][t];
                    assert!(u.abs() <= 1.5 + 1e-12);
                    sum += u;
                }
                let e = -hs[i * 9 + 8].offset - cfg.energy_nom[i];
                assert!(e.abs() <= 3.0 + 1e-12);
            }
        }
        let n = (trials * 8) as f64;
        assert!((sum / n).abs() < 5.0 * 0.5 / n.sqrt());
    }

    #[test]
    fn assembled_count_and_nonempty() {
        let cfg = EVFeasibilityConfig::synthetic(1, 2, 5).unwrap();
        let s = EVFeasibilitySampler::new(cfg.clone()).unwrap();
        let base = cfg.base_box().unwrap();
        let sfs = assemble(&base, &s, 10, 5).unwrap();
        assert_eq!(sfs.assembled.len(), base.len() + 10 * 5);
        assert!(sfs.interior.radius > 0.0);
        let k = sfs.support_subsample().unwrap().cardinality();
        assert!(k <= structural_k(1, 2));
    }

    #[test]
    fn per_agent_decomposition() {
        let cfg = EVFeasibilityConfig::synthetic(3, 2, 12).unwrap();
        let s = EVFeasibilitySampler::new(cfg.clone()).unwrap();
        let sfs = assemble(&cfg.base_box().unwrap(), &s, 20, 12).unwrap();
        // per-agent polytopes in ℝ² from the agent's own constraint blocks
        let per_agent: Vec<Polytope> = (0..3)
            .map(|i| {
                let hs = sfs
                    .assembled
                    .constraints()
                    .iter()
                    .filter(|h| {
                        h.normal.iter().enumerate().all(|(j, v)| *v == 0.0 || j / 2 == i)
                    })
                    .map(|h| Halfspace::new(h.normal[i * 2..i * 2 + 2].to_vec(), h.offset))
                    .collect();
                Polytope::new(2, hs).unwrap()
            })
            .collect();
        for t in 0..50 {
            let test = s.draw_at(12, TEST, t).unwrap();
            for h in &test {
                let full = set_violates(&sfs.reduced.poly, h).unwrap();
                let i = h.normal.iter().position(|v| *v != 0.0).unwrap() / 2;
                let local = Halfspace::new(h.normal[i * 2..i * 2 + 2].to_vec(), h.offset);
                assert_eq!(full, set_violates(&per_agent[i], &local).unwrap());
            }
        }
    }

    #[test]
    fn zero_noise_experiment_has_no_violations() {
        let mut cfg = EVFeasibilityConfig::synthetic(2, 2, 3).unwrap();
        cfg.sigma_bounds = 0.0;
        cfg.sigma_energy = 0.0;
        let run = run_feasibility_experiment(&cfg, &[50, 100], 2000, 1e-6, None).unwrap();
        assert!(run.rows.iter().all(|r| r.epsilon_empirical == 0.0));
        assert!(run.rows[1].epsilon_theory < run.rows[0].epsilon_theory);
        assert_eq!(run.rows[0].k_used, 10);
    }

    #[test]
    fn agent_sweep() {
        let rows = agent_sweep_epsilon(3, 1000, 1e-6, &[1]).unwrap();
        assert_eq!(rows[0].k, 7);
        assert!(agent_sweep_epsilon(12, 100, 1e-6, &[5]).is_err());
        let rows = agent_sweep_epsilon(12, 10_000, 1e-6, &[5, 10, 20, 40]).unwrap();
        assert!(rows.windows(2).all(|w| w[1].epsilon > w[0].epsilon));
        assert_eq!(rows[0].k, 125);
    }

    #[test]
    fn cost_config_defaults() {
        let c = EVCostConfig::synthetic(4, 12, 2).unwrap();
        assert!(c.x_upper.iter().all(|&u| (6.0..15.0).contains(&u)));
        assert!(c.x_lower.iter().all(|&l| l == 2.0));
        assert_eq!(c.b0, SYNTHETIC_PROFILE.to_vec());
        let p = build_cost_program(&c, 0).unwrap();
        assert!(p.samples().is_empty());
        assert_eq!(p.deterministic().a, Matrix::from_diag(&[0.01; 12]));
        // the first agents coincide across fleet sizes
        let c8 = EVCostConfig::synthetic(8, 12, 2).unwrap();
        assert_eq!(&c8.x_upper[..4], &c.x_upper[..]);
    }

    #[test]
    fn cost_samples_are_nonnegative_diagonal() {
        let c = EVCostConfig::synthetic(2, 4, 1).unwrap();
        for s in c.draw_training(20, 6).unwrap() {
            for i in 0..4 {
                assert!(s.a[(i, i)] >= 0.0 && s.a[(i, i)] < 0.02);
                assert!(s.b[i] >= 0.8 * c.b0[i] && s.b[i] < 1.2 * c.b0[i]);
            }
        }
    }

    #[test]
    fn small_cost_cell_respects_bound() {
        let c = EVCostConfig::synthetic(2, 3, 10).unwrap();
        let rows = run_cost_experiment(&c, &[2], 60, 3000, 1e-6, 1).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].empirical_violation <= rows[0].epsilon_theory);
    }

    #[test]
    fn paper_scale_theory_line() {
        assert!((epsilon_explicit(500, 1e-6, 12) - 0.0885).abs() < 1e-4);
    }
}
