//! Dense linear algebra and linear programming kernel.
//!
//! Everything here is a pure function of its inputs: no global state, no
//! randomness, so identical inputs give bitwise-identical outputs.

mod matrix;
mod simplex;

pub use matrix::{numeric_rank, Matrix, MatrixError};
pub use simplex::{solve_lp, IncrementalLp, LinearProgram, LpError, LpOutcome, RowId};

use crate::geometry::Polytope;
use crate::numeric::FEAS_TOL;

/// Largest ball inscribed in a polytope.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChebyshevError {
    #[error("polytope is empty")]
    Infeasible,
    #[error("polytope is unbounded; inscribed radius is infinite")]
    Unbounded,
    #[error("polytope has no constraints")]
    NoConstraints,
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Chebyshev center via the auxiliary LP `max r s.t. a_i·x + ‖a_i‖ r ≤ b_i`.
///
/// The radius is left free in the LP so that an empty polytope shows up as a
/// negative optimum rather than as LP infeasibility.
pub fn chebyshev_center(poly: &Polytope) -> Result<ChebyshevBall, ChebyshevError> {
    if poly.is_empty() {
        return Err(ChebyshevError::NoConstraints);
    }
    let d = poly.dim();
    let mut rows = Vec::with_capacity(poly.len());
    let mut rhs = Vec::with_capacity(poly.len());
    for h in poly.constraints() {
        let mut row = h.normal.to_vec();
        row.push(norm2(&h.normal));
        rows.push(row);
        rhs.push(h.offset);
    }
    let mut objective = vec![0.0; d + 1];
    objective[d] = 1.0;
    let lp = LinearProgram::new(objective, Matrix::from_rows(&rows)?, rhs)?;
    match solve_lp(&lp)? {
        LpOutcome::Optimal { x, value } => {
            if value < -FEAS_TOL {
                return Err(ChebyshevError::Infeasible);
            }
            let mut center = x;
            center.truncate(d);
            Ok(ChebyshevBall {
                center,
                radius: value.max(0.0),
            })
        }
        LpOutcome::Unbounded => Err(ChebyshevError::Unbounded),
        // The radius is free, so the LP is always feasible unless the data
        // itself is degenerate (zero normals with negative offsets).
        LpOutcome::Infeasible => Err(ChebyshevError::Infeasible),
    }
}

impl From<MatrixError> for ChebyshevError {
    fn from(e: MatrixError) -> Self {
        ChebyshevError::Lp(LpError::from(e))
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
