//! H-representation polytopes, redundancy detection and containment queries.
//!
//! Constraint provenance is carried on each [`Halfspace`] as an optional
//! 1-based sample index; deterministic constraints carry `None`. The support
//! subsample of a polytope is the set of sample indices owning at least one
//! facet, after duplicate constraints have been merged.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::linalg_lp::{chebyshev_center, dot, norm2, ChebyshevError, IncrementalLp, LpError, LpOutcome};
use crate::numeric::{FEAS_TOL, PIVOT_TOL};

/// Angular tolerance under which two unit normals are treated as parallel.
pub const ANGLE_TOL: f64 = 1e-9;
/// Offset tolerance under which two parallel constraints are duplicates.
pub const OFFSET_TOL: f64 = 1e-9;
/// Ray-shooting hits closer than this (relative) are ties.
pub const RAY_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("feasible set is empty")]
    InfeasibleSet,
    #[error("feasible set is unbounded in the queried direction")]
    UnboundedSet,
    #[error("polytope interior is degenerate (Chebyshev radius {0:e})")]
    DegenerateInterior(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("constraint index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("constraint {0} has a zero normal and a negative offset")]
    ZeroNormal(usize),
    #[error("non-finite constraint data")]
    NonFinite,
    #[error(transparent)]
    Lp(#[from] LpError),
}

impl From<ChebyshevError> for GeometryError {
    fn from(e: ChebyshevError) -> Self {
        match e {
            ChebyshevError::Infeasible => GeometryError::InfeasibleSet,
            ChebyshevError::Unbounded => GeometryError::UnboundedSet,
            ChebyshevError::NoConstraints => GeometryError::UnboundedSet,
            ChebyshevError::Lp(e) => GeometryError::Lp(e),
        }
    }
}

/// The constraint `normal · x ≤ offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    #[serde(rename = "a")]
    pub normal: Arc<[f64]>,
    #[serde(rename = "b")]
    pub offset: f64,
    /// 1-based index of the sample that produced the constraint.
    #[serde(default)]
    pub sample: Option<usize>,
}

impl Halfspace {
    pub fn new(normal: impl Into<Arc<[f64]>>, offset: f64) -> Self {
        Self {
            normal: normal.into(),
            offset,
            sample: None,
        }
    }

    pub fn sampled(normal: impl Into<Arc<[f64]>>, offset: f64, sample: usize) -> Self {
        Self {
            normal: normal.into(),
            offset,
            sample: Some(sample),
        }
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    /// `normal · x − offset`; positive means violated.
    pub fn excess(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) - self.offset
    }
}

/// Intersection of halfspaces in ℝᵈ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolytopeDoc", into = "PolytopeDoc")]
pub struct Polytope {
    dim: usize,
    constraints: Vec<Halfspace>,
}

#[derive(Serialize, Deserialize)]
struct PolytopeDoc {
    d: usize,
    constraints: Vec<Halfspace>,
}

impl TryFrom<PolytopeDoc> for Polytope {
    type Error = GeometryError;
    fn try_from(doc: PolytopeDoc) -> Result<Self, Self::Error> {
        Polytope::new(doc.d, doc.constraints)
    }
}

impl From<Polytope> for PolytopeDoc {
    fn from(p: Polytope) -> Self {
        PolytopeDoc {
            d: p.dim,
            constraints: p.constraints,
        }
    }
}

impl Polytope {
    pub fn new(dim: usize, constraints: Vec<Halfspace>) -> Result<Self, GeometryError> {
        for (i, h) in constraints.iter().enumerate() {
            Self::check(dim, i, h)?;
        }
        Ok(Self { dim, constraints })
    }

    /// The explicitly empty set `{x : 0·x ≤ −1}`.
    pub fn infeasible(dim: usize) -> Self {
        Self {
            dim,
            constraints: vec![Halfspace::new(vec![0.0; dim], -1.0)],
        }
    }

    /// Axis-aligned box `lo ≤ x ≤ hi`, upper bounds first for each axis.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self, GeometryError> {
        if lo.len() != hi.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        let d = lo.len();
        let mut hs = Vec::with_capacity(2 * d);
        for i in 0..d {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            hs.push(Halfspace::new(e.clone(), hi[i]));
            e[i] = -1.0;
            hs.push(Halfspace::new(e, -lo[i]));
        }
        Self::new(d, hs)
    }

    fn check(dim: usize, i: usize, h: &Halfspace) -> Result<(), GeometryError> {
        if h.dim() != dim {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                got: h.dim(),
            });
        }
        if !h.offset.is_finite() || h.normal.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if h.offset < 0.0 && h.normal.iter().all(|&v| v == 0.0) {
            return Err(GeometryError::ZeroNormal(i));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn constraints(&self) -> &[Halfspace] {
        &self.constraints
    }

    pub fn push(&mut self, h: Halfspace) -> Result<(), GeometryError> {
        Self::check(self.dim, self.constraints.len(), &h)?;
        self.constraints.push(h);
        Ok(())
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.constraints.iter().all(|h| h.excess(x) <= tol)
    }

    /// `max direction·x` over the polytope.
    pub fn support_value(&self, direction: &[f64]) -> Result<f64, GeometryError> {
        if direction.len() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                got: direction.len(),
            });
        }
        let mut lp = IncrementalLp::new(direction.to_vec());
        for h in &self.constraints {
            lp.add_constraint(h.normal.to_vec(), h.offset);
        }
        match lp.solve()? {
            LpOutcome::Optimal { value, .. } => Ok(value),
            LpOutcome::Unbounded => Err(GeometryError::UnboundedSet),
            LpOutcome::Infeasible => Err(GeometryError::InfeasibleSet),
        }
    }

    pub fn is_feasible(&self) -> Result<bool, GeometryError> {
        match self.support_value(&vec![0.0; self.dim]) {
            Ok(_) => Ok(true),
            Err(GeometryError::InfeasibleSet) => Ok(false),
            Err(e) => Err(e),
        }
    }

    /// True when the polytope is bounded along every coordinate axis (both
    /// signs), which for a polyhedron is equivalent to compactness.
    pub fn is_bounded(&self) -> Result<bool, GeometryError> {
        for i in 0..self.dim {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; self.dim];
                e[i] = s;
                match self.support_value(&e) {
                    Ok(_) => {}
                    Err(GeometryError::UnboundedSet) => return Ok(false),
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(true)
    }

    /// Merges duplicate and dominated parallel constraints.
    ///
    /// Constraints are scaled to unit normals. Normals within [`ANGLE_TOL`]
    /// (bitwise-equal first, then neighbours in lexicographic order) form a
    /// group; each group keeps its smallest offset, and offsets within
    /// [`OFFSET_TOL`] of each other keep the lower original index. Dropped
    /// constraints are all redundant, so the reduced polytope is the same set.
    pub fn reduce(&self) -> Result<Reduction, GeometryError> {
        let mut unit: Vec<(usize, Vec<f64>, f64)> = Vec::with_capacity(self.len());
        for (i, h) in self.constraints.iter().enumerate() {
            let n = norm2(&h.normal);
            if n <= PIVOT_TOL {
                if h.offset < -FEAS_TOL {
                    return Err(GeometryError::InfeasibleSet);
                }
                continue;
            }
            unit.push((i, h.normal.iter().map(|v| v / n).collect(), h.offset / n));
        }
        let mut exact: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut groups: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
        for (k, (_, n, _)) in unit.iter().enumerate() {
            let key: Vec<u64> = n.iter().map(|v| v.to_bits()).collect();
            match exact.get(&key) {
                Some(&g) => groups[g].1.push(k),
                None => {
                    exact.insert(key, groups.len());
                    groups.push((n.clone(), vec![k]));
                }
            }
        }
        let mut order: Vec<usize> = (0..groups.len()).collect();
        order.sort_by(|&a, &b| {
            groups[a]
                .0
                .iter()
                .zip(&groups[b].0)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut merged: Vec<Vec<usize>> = Vec::new();
        let mut prev: Option<&Vec<f64>> = None;
        for &g in &order {
            let n = &groups[g].0;
            let close = prev.is_some_and(|p| {
                p.iter().zip(n).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() <= ANGLE_TOL
            });
            if close {
                merged.last_mut().unwrap().extend(&groups[g].1);
            } else {
                merged.push(groups[g].1.clone());
            }
            prev = Some(n);
        }
        let mut kept: Vec<usize> = merged
            .into_iter()
            .map(|mut members| {
                members.sort_by_key(|&k| unit[k].0);
                let mut rep = members[0];
                for &k in &members[1..] {
                    if unit[k].2 < unit[rep].2 - OFFSET_TOL {
                        rep = k;
                    }
                }
                rep
            })
            .collect();
        kept.sort_by_key(|&k| unit[k].0);
        let mut constraints = Vec::with_capacity(kept.len());
        let mut origin = Vec::with_capacity(kept.len());
        for k in kept {
            let (i, n, b) = &unit[k];
            constraints.push(Halfspace {
                normal: n.clone().into(),
                offset: *b,
                sample: self.constraints[*i].sample,
            });
            origin.push(*i);
        }
        Ok(Reduction {
            poly: Polytope {
                dim: self.dim,
                constraints,
            },
            origin,
        })
    }
}

/// A polytope with duplicates merged, plus the original index of every kept
/// constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub poly: Polytope,
    pub origin: Vec<usize>,
}

/// Sample indices whose constraints are needed to reproduce a polytope.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportSubsample {
    pub indices: Vec<usize>,
}

impl SupportSubsample {
    fn from_facets(poly: &Polytope, facets: &[usize]) -> Self {
        let mut indices: Vec<usize> = facets
            .iter()
            .filter_map(|&i| poly.constraints[i].sample)
            .collect();
        indices.sort_unstable();
        indices.dedup();
        Self { indices }
    }

    pub fn cardinality(&self) -> usize {
        self.indices.len()
    }
}

/// `max a_idx · x` over all constraints except `idx`; `None` when unbounded.
fn value_without(poly: &Polytope, idx: usize) -> Result<Option<f64>, GeometryError> {
    let target = &poly.constraints[idx];
    let mut lp = IncrementalLp::new(target.normal.to_vec());
    for (i, h) in poly.constraints.iter().enumerate() {
        if i != idx {
            lp.add_constraint(h.normal.to_vec(), h.offset);
        }
    }
    match lp.solve()? {
        LpOutcome::Optimal { value, .. } => Ok(Some(value)),
        LpOutcome::Unbounded => Ok(None),
        LpOutcome::Infeasible => Err(GeometryError::InfeasibleSet),
    }
}

fn redundant_unchecked(poly: &Polytope, idx: usize) -> Result<bool, GeometryError> {
    let b = poly.constraints[idx].offset;
    Ok(matches!(value_without(poly, idx)?, Some(v) if v <= b + FEAS_TOL))
}

/// True when dropping constraint `idx` does not enlarge the feasible set.
pub fn is_redundant(poly: &Polytope, idx: usize) -> Result<bool, GeometryError> {
    if idx >= poly.len() {
        return Err(GeometryError::IndexOutOfRange(idx));
    }
    if !poly.is_feasible()? {
        return Err(GeometryError::InfeasibleSet);
    }
    redundant_unchecked(poly, idx)
}

/// Facets of an already reduced polytope by one redundancy LP per
/// constraint. Returns indices into `reduced`.
pub fn naive_facets(reduced: &Polytope) -> Result<Vec<usize>, GeometryError> {
    if !reduced.is_feasible()? {
        return Err(GeometryError::InfeasibleSet);
    }
    let mut facets = Vec::new();
    for i in 0..reduced.len() {
        if !redundant_unchecked(reduced, i)? {
            facets.push(i);
        }
    }
    Ok(facets)
}

/// Facets of an already reduced polytope by Clarkson's essential-set scheme.
///
/// Each candidate is tested by an LP over the essential constraints found so
/// far (plus its own constraint relaxed by one unit). If the LP optimizer
/// violates the candidate, a ray from the Chebyshev center toward it exits the
/// polytope through a facet, which becomes essential; ties promote the lower
/// index. Returns indices into `reduced`, ascending.
pub fn clarkson_facets(reduced: &Polytope) -> Result<Vec<usize>, GeometryError> {
    let ball = chebyshev_center(reduced)?;
    if ball.radius <= FEAS_TOL {
        return Err(GeometryError::DegenerateInterior(ball.radius));
    }
    let z = ball.center;
    let m = reduced.len();
    let slack: Vec<f64> = reduced.constraints.iter().map(|h| -h.excess(&z)).collect();
    let mut essential = vec![false; m];
    let mut ess_list: Vec<usize> = Vec::new();
    for j in 0..m {
        while !essential[j] {
            let target = &reduced.constraints[j];
            let mut lp = IncrementalLp::new(target.normal.to_vec());
            for &k in &ess_list {
                let h = &reduced.constraints[k];
                lp.add_constraint(h.normal.to_vec(), h.offset);
            }
            lp.add_constraint(target.normal.to_vec(), target.offset + 1.0);
            let x = match lp.solve()? {
                LpOutcome::Optimal { x, value } => {
                    if value <= target.offset + FEAS_TOL {
                        break;
                    }
                    x
                }
                LpOutcome::Infeasible => return Err(GeometryError::InfeasibleSet),
                LpOutcome::Unbounded => return Err(GeometryError::UnboundedSet),
            };
            let dir: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a - b).collect();
            let mut hit: Option<(usize, f64)> = None;
            for (i, h) in reduced.constraints.iter().enumerate() {
                let rate = dot(&h.normal, &dir);
                if rate <= PIVOT_TOL {
                    continue;
                }
                let t = slack[i] / rate;
                match hit {
                    Some((_, best)) if t >= best - RAY_TIE_TOL * best.abs().max(1.0) => {}
                    _ => hit = Some((i, t)),
                }
            }
            let Some((k, _)) = hit else {
                // the optimizer violates j, so the ray must leave through j at the latest
                return Err(GeometryError::DegenerateInterior(ball.radius));
            };
            if essential[k] {
                // numerical corner case: the ray re-hit a known facet; accept j
                // as essential rather than loop forever
                essential[j] = true;
                ess_list.push(j);
            } else {
                essential[k] = true;
                ess_list.push(k);
            }
        }
    }
    let mut out: Vec<usize> = (0..m).filter(|&i| essential[i]).collect();
    out.sort_unstable();
    Ok(out)
}

/// Support subsample by exhaustive redundancy LPs.
pub fn naive_support_subsample(poly: &Polytope) -> Result<SupportSubsample, GeometryError> {
    let red = poly.reduce()?;
    let facets = naive_facets(&red.poly)?;
    Ok(SupportSubsample::from_facets(&red.poly, &facets))
}

/// Support subsample by Clarkson's algorithm; requires a non-empty interior.
pub fn clarkson_support_subsample(poly: &Polytope) -> Result<SupportSubsample, GeometryError> {
    let red = poly.reduce()?;
    let facets = clarkson_facets(&red.poly)?;
    Ok(SupportSubsample::from_facets(&red.poly, &facets))
}

/// True when some point of `poly` violates `test`, i.e. `poly ⊄ test`.
pub fn set_violates(poly: &Polytope, test: &Halfspace) -> Result<bool, GeometryError> {
    let sup = poly.support_value(&test.normal)?;
    Ok(sup > test.offset + FEAS_TOL)
}

/// Support function of a fixed polytope with a per-direction memo.
///
/// Directions are keyed by their exact bit pattern, so repeated queries with
/// the same normal (the common case for structured samplers) cost one LP.
#[derive(Debug, Clone)]
pub struct SupportFunction<'a> {
    poly: &'a Polytope,
    cache: HashMap<Vec<u64>, f64>,
}

impl<'a> SupportFunction<'a> {
    pub fn new(poly: &'a Polytope) -> Self {
        Self {
            poly,
            cache: HashMap::new(),
        }
    }

    pub fn value(&mut self, direction: &[f64]) -> Result<f64, GeometryError> {
        let key: Vec<u64> = direction.iter().map(|v| v.to_bits()).collect();
        if let Some(&v) = self.cache.get(&key) {
            return Ok(v);
        }
        let v = self.poly.support_value(direction)?;
        self.cache.insert(key, v);
        Ok(v)
    }

    /// Same decision as [`set_violates`].
    pub fn violates(&mut self, test: &Halfspace) -> Result<bool, GeometryError> {
        Ok(self.value(&test.normal)? > test.offset + FEAS_TOL)
    }

    pub fn lp_count(&self) -> usize {
        self.cache.len()
    }
}
