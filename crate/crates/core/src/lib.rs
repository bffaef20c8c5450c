//! Scenario-approach feasibility certificates for multi-agent optimization.
//!
//! The crate builds scenario feasible sets from sampled constraints, computes
//! distribution-free violation certificates for them (a posteriori, from the
//! number of facets contributed by samples) and for optimizers of
//! aggregative-cost programs (a priori, from an agent-independent support-rank
//! bound), and checks every certificate empirically by Monte Carlo.
//!
//! Module map:
//!
//! * [`linalg_lp`]: dense matrices, numeric rank, a two-phase simplex and the
//!   Chebyshev-center LP.
//! * [`geometry`]: H-representation polytopes, redundancy detection (naive and
//!   Clarkson) and set-containment queries.
//! * [`certificates`]: a posteriori and a priori violation-level arithmetic.
//! * [`scenario`]: assembly of scenario feasible sets and violation estimates.
//! * [`aggregative`]: the uncertain aggregative-cost program, its Kelley
//!   cutting-plane solver and support-rank checks.
//! * [`evstudy`]: electric-vehicle charging generators and experiment drivers.
//! * [`sampling`]: counter-based seeded random streams.
//! * [`cli`]: the `scenario-cert` command-line front end.

pub mod aggregative;
pub mod certificates;
pub mod cli;
pub mod evstudy;
pub mod geometry;
pub mod linalg_lp;
pub mod sampling;
pub mod scenario;

/// Global numeric policy shared by every LP-backed decision in the crate.
pub mod numeric {
    /// Absolute tolerance for feasibility and violation decisions.
    pub const FEAS_TOL: f64 = 1e-8;
    /// Smallest pivot magnitude accepted by the simplex ratio test.
    pub const PIVOT_TOL: f64 = 1e-10;
    /// Reduced-cost threshold below which a column may enter the basis.
    pub const OPT_TOL: f64 = 1e-9;
}
