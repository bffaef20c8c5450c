//! Scenario feasible sets: assembly from a constraint sampler, set
//! certification and Monte Carlo violation estimates.
//!
//! Sample `m` (1-based) of a training run is drawn from the stream
//! `(seed, "train", m)`; test trial `t` from `(seed, "test", t)`. The two
//! namespaces never overlap, so test samples are fresh by construction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificates::{Certificate, CertificateError};
use crate::geometry::{clarkson_support_subsample, GeometryError, Halfspace, Polytope, Reduction, SupportFunction, SupportSubsample};
use crate::linalg_lp::{chebyshev_center, ChebyshevBall};
use crate::numeric::FEAS_TOL;
use crate::sampling::{SeededStream, TEST, TRAIN};

/// Monte Carlo trials are grouped into blocks of this size for reporting and
/// parallel evaluation.
pub const TRIAL_BLOCK: usize = 1000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("sampler error: {0}")]
pub struct SamplerError(pub String);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("base set is not bounded along every coordinate axis")]
    UnboundedBase,
    #[error("scenario feasible set has empty interior (Chebyshev radius {0:e})")]
    EmptyFeasibleSet(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// Deterministic map from a random stream to the halfspaces of one sample.
pub trait ConstraintSampler: Sync {
    fn dim(&self) -> usize;

    /// Halfspaces of one uncertainty realization. The `sample` field of the
    /// returned halfspaces is ignored and overwritten by the caller.
    fn draw(&self, stream: &mut SeededStream) -> Result<Vec<Halfspace>, SamplerError>;

    fn draw_at(&self, seed: u64, namespace: &str, index: u64) -> Result<Vec<Halfspace>, SamplerError> {
        self.draw(&mut SeededStream::new(seed, namespace, index))
    }
}

/// Constraints `a_j · x ≤ U_j` with fixed normals and uniform offsets
/// `U_j ~ U[lo_j, hi_j)`, one draw per constraint per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSampler {
    pub d: usize,
    pub constraints: Vec<ThresholdConstraint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConstraint {
    pub a: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

impl ConstraintSampler for ThresholdSampler {
    fn dim(&self) -> usize {
        self.d
    }

    fn draw(&self, stream: &mut SeededStream) -> Result<Vec<Halfspace>, SamplerError> {
        self.constraints
            .iter()
            .map(|c| {
                if c.a.len() != self.d {
                    return Err(SamplerError(format!("normal of length {} in dimension {}", c.a.len(), self.d)));
                }
                let b = stream
                    .uniform(c.lo, c.hi)
                    .map_err(|e| SamplerError(e.to_string()))?;
                Ok(Halfspace::new(c.a.clone(), b))
            })
            .collect()
    }
}

/// `X ∩ ⋂_m X_{θ_m}` together with its provenance.
#[derive(Debug, Clone)]
pub struct ScenarioFeasibleSet {
    pub base: Polytope,
    pub m: usize,
    pub seed: u64,
    /// Base constraints first, then every sampled halfspace in sample order.
    pub assembled: Polytope,
    /// Same set with duplicates merged; used for every LP query.
    pub reduced: Reduction,
    pub interior: ChebyshevBall,
}

impl ScenarioFeasibleSet {
    /// Sampled halfspaces only, in emission order.
    pub fn sampled(&self) -> &[Halfspace] {
        &self.assembled.constraints()[self.base.len()..]
    }

    /// Support subsample of the sampled constraints by Clarkson's algorithm.
    pub fn support_subsample(&self) -> Result<SupportSubsample, ScenarioError> {
        Ok(clarkson_support_subsample(&self.reduced.poly)?)
    }
}

/// Intersects `base` with the halfspaces of `m` training samples.
pub fn assemble(
    base: &Polytope,
    sampler: &dyn ConstraintSampler,
    m: usize,
    seed: u64,
) -> Result<ScenarioFeasibleSet, ScenarioError> {
    let d = base.dim();
    if sampler.dim() != d {
        return Err(ScenarioError::DimensionMismatch {
            expected: d,
            got: sampler.dim(),
        });
    }
    if !base.is_feasible()? || !base.is_bounded()? {
        return Err(ScenarioError::UnboundedBase);
    }
    let drawn: Vec<Vec<Halfspace>> = (1..=m as u64)
        .into_par_iter()
        .map(|i| sampler.draw_at(seed, TRAIN, i))
        .collect::<Result<_, _>>()?;
    let mut assembled = base.clone();
    for (i, hs) in drawn.into_iter().enumerate() {
        for mut h in hs {
            h.sample = Some(i + 1);
            assembled.push(h)?;
        }
    }
    let reduced = match assembled.reduce() {
        Ok(r) => r,
        Err(GeometryError::InfeasibleSet) => return Err(ScenarioError::EmptyFeasibleSet(f64::NEG_INFINITY)),
        Err(e) => return Err(e.into()),
    };
    let interior = match chebyshev_center(&reduced.poly) {
        Ok(b) => b,
        Err(crate::linalg_lp::ChebyshevError::Infeasible) => {
            return Err(ScenarioError::EmptyFeasibleSet(f64::NEG_INFINITY))
        }
        Err(e) => return Err(GeometryError::from(e).into()),
    };
    if interior.radius <= FEAS_TOL {
        return Err(ScenarioError::EmptyFeasibleSet(interior.radius));
    }
    Ok(ScenarioFeasibleSet {
        base: base.clone(),
        m,
        seed,
        assembled,
        reduced,
        interior,
    })
}

/// A posteriori certificate for the whole set.
///
/// `k` is `k_override` when given, else the number of samples contributing
/// a facet.
pub fn certify_set(
    sfs: &ScenarioFeasibleSet,
    beta: f64,
    k_override: Option<usize>,
) -> Result<Certificate, ScenarioError> {
    let k = match k_override {
        Some(k) => k,
        None => sfs.support_subsample()?.cardinality(),
    };
    Ok(Certificate::posteriori(sfs.m as u64, k as u64, beta)?)
}

/// Empirical violation frequency with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationEstimate {
    pub hits: u64,
    pub trials: u64,
    pub frequency: f64,
    pub seed: u64,
    pub namespace: String,
}

/// One reporting block of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialBlock {
    pub trial_block: usize,
    pub hits: u64,
    pub trials: u64,
    pub frequency: f64,
    pub seed: u64,
    pub namespace: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationRun {
    pub estimate: ViolationEstimate,
    pub blocks: Vec<TrialBlock>,
}

fn run_blocks<F>(trials: usize, seed: u64, hit: F) -> Result<ViolationRun, ScenarioError>
where
    F: Fn(std::ops::Range<usize>) -> Result<u64, ScenarioError> + Sync,
{
    let nblocks = trials.div_ceil(TRIAL_BLOCK);
    let counts: Vec<(u64, u64)> = (0..nblocks)
        .into_par_iter()
        .map(|b| {
            let r = b * TRIAL_BLOCK..((b + 1) * TRIAL_BLOCK).min(trials);
            let n = r.len() as u64;
            hit(r).map(|h| (h, n))
        })
        .collect::<Result<_, _>>()?;
    let blocks: Vec<TrialBlock> = counts
        .iter()
        .enumerate()
        .map(|(b, &(h, n))| TrialBlock {
            trial_block: b,
            hits: h,
            trials: n,
            frequency: h as f64 / n as f64,
            seed,
            namespace: TEST.to_owned(),
        })
        .collect();
    let hits: u64 = counts.iter().map(|c| c.0).sum();
    Ok(ViolationRun {
        estimate: ViolationEstimate {
            hits,
            trials: trials as u64,
            frequency: if trials == 0 { 0.0 } else { hits as f64 / trials as f64 },
            seed,
            namespace: TEST.to_owned(),
        },
        blocks,
    })
}

/// Frequency of test samples with at least one halfspace cutting the set.
pub fn estimate_set_violation_blocks(
    sfs: &ScenarioFeasibleSet,
    sampler: &dyn ConstraintSampler,
    trials: usize,
    seed: u64,
) -> Result<ViolationRun, ScenarioError> {
    run_blocks(trials, seed, |range| {
        let mut sup = SupportFunction::new(&sfs.reduced.poly);
        let mut hits = 0;
        for t in range {
            let hs = sampler.draw_at(seed, TEST, t as u64)?;
            for h in &hs {
                if sup.violates(h)? {
                    hits += 1;
                    break;
                }
            }
        }
        Ok(hits)
    })
}

pub fn estimate_set_violation(
    sfs: &ScenarioFeasibleSet,
    sampler: &dyn ConstraintSampler,
    trials: usize,
    seed: u64,
) -> Result<ViolationEstimate, ScenarioError> {
    Ok(estimate_set_violation_blocks(sfs, sampler, trials, seed)?.estimate)
}

/// Frequency of test samples that `x` violates by more than the feasibility
/// tolerance.
pub fn estimate_point_violation(
    x: &[f64],
    sampler: &dyn ConstraintSampler,
    trials: usize,
    seed: u64,
) -> Result<ViolationEstimate, ScenarioError> {
    if x.len() != sampler.dim() {
        return Err(ScenarioError::DimensionMismatch {
            expected: sampler.dim(),
            got: x.len(),
        });
    }
    Ok(run_blocks(trials, seed, |range| {
        let mut hits = 0;
        for t in range {
            let hs = sampler.draw_at(seed, TEST, t as u64)?;
            if hs.iter().any(|h| h.excess(x) > FEAS_TOL) {
                hits += 1;
            }
        }
        Ok(hits)
    })?
    .estimate)
}
