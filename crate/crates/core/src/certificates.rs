//! Violation-level arithmetic for scenario certificates.
//!
//! Two families are covered. A posteriori (wait-and-judge) levels ε(k) depend
//! on the observed support cardinality k and split the confidence budget β
//! uniformly over the M possible outcomes. A priori levels come from the
//! binomial lower tail with a dimension bound known before sampling.
//!
//! Everything is evaluated in the natural-log domain; binomial coefficients
//! go through `ln Γ`, so M in the millions is safe.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CertificateError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no epsilon in (0,1) attains beta = {beta} for M = {m}, dim = {dim}")]
    NoSolution { m: u64, beta: f64, dim: u64 },
}

fn domain(msg: impl Into<String>) -> CertificateError {
    CertificateError::Domain(msg.into())
}

fn check_beta(beta: f64) -> Result<(), CertificateError> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("beta must lie in (0,1), got {beta}")))
    }
}

/// What a certificate speaks about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertificateKind {
    /// The whole scenario feasible set, via its support cardinality.
    APosterioriSet,
    /// A single optimizer, via an a priori support-rank bound.
    APrioriPoint,
}

/// `P^M{violation > epsilon} ≤ beta` for the object named by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    #[serde(rename = "M")]
    pub m: u64,
    pub k: u64,
    pub epsilon: f64,
    pub beta: f64,
}

impl Certificate {
    pub fn posteriori(m: u64, k: u64, beta: f64) -> Result<Self, CertificateError> {
        Ok(Self {
            kind: CertificateKind::APosterioriSet,
            m,
            k,
            epsilon: epsilon_posteriori(m, k, beta)?,
            beta,
        })
    }

    pub fn apriori(m: u64, dim: u64, beta: f64) -> Result<Self, CertificateError> {
        Ok(Self {
            kind: CertificateKind::APrioriPoint,
            m,
            k: dim,
            epsilon: epsilon_apriori(m, beta, dim)?,
            beta,
        })
    }
}

/// `ln C(m, k)` via log-gamma.
pub fn ln_binomial(m: u64, k: u64) -> f64 {
    debug_assert!(k <= m);
    if k == 0 || k == m {
        return 0.0;
    }
    let (m, k) = (m as f64, k as f64);
    ln_gamma(m + 1.0) - ln_gamma(k + 1.0) - ln_gamma(m - k + 1.0)
}

/// `ln(1 − ε(k))` for the uniform-split wait-and-judge family; `−∞` at `k = m`.
pub fn ln_one_minus_epsilon_posteriori(m: u64, k: u64, beta: f64) -> Result<f64, CertificateError> {
    check_beta(beta)?;
    if k > m {
        return Err(domain(format!("k = {k} exceeds M = {m}")));
    }
    if k == m {
        return Ok(f64::NEG_INFINITY);
    }
    let num = beta.ln() - (m as f64).ln() - ln_binomial(m, k);
    Ok(num / (m - k) as f64)
}

/// Wait-and-judge level `ε(k) = 1 − (β / (M·C(M,k)))^{1/(M−k)}`, with `ε(M) = 1`.
///
/// Each of the M terms of `Σ_{k<M} C(M,k)(1−ε(k))^{M−k}` equals `β/M`, so
/// the family meets the confidence budget with equality.
pub fn epsilon_posteriori(m: u64, k: u64, beta: f64) -> Result<f64, CertificateError> {
    let l = ln_one_minus_epsilon_posteriori(m, k, beta)?;
    if l == f64::NEG_INFINITY {
        return Ok(1.0);
    }
    Ok((-l.exp_m1()).clamp(0.0, 1.0))
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `ln Σ exp(terms)` with max-shift and compensated accumulation.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + compensated_sum(terms.iter().map(|t| (t - max).exp())).ln()
}

/// `ln P(Bin(m, eps) ≤ dim)`.
fn ln_binomial_lower_tail(m: u64, eps: f64, dim: u64) -> f64 {
    let (le, l1e) = (eps.ln(), (-eps).ln_1p());
    let terms: Vec<f64> = (0..=dim.min(m))
        .map(|j| ln_binomial(m, j) + j as f64 * le + (m - j) as f64 * l1e)
        .collect();
    log_sum_exp(&terms).min(0.0)
}

/// Binomial lower tail `Σ_{j=0}^{dim} C(M,j) ε^j (1−ε)^{M−j}`.
pub fn beta_apriori(m: u64, eps: f64, dim: u64) -> Result<f64, CertificateError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(domain(format!("epsilon must lie in (0,1), got {eps}")));
    }
    if dim >= m {
        return Err(domain(format!("dim = {dim} must be below M = {m}")));
    }
    Ok(ln_binomial_lower_tail(m, eps, dim).exp())
}

const BISECT_LO: f64 = 1e-15;
const BISECT_HI: f64 = 1.0 - 1e-15;
const BISECT_MAX_ITER: usize = 200;

/// The unique `ε` with `beta_apriori(M, ε, dim) = β`, by bisection.
///
/// The tail is strictly decreasing in ε, so bisection on `[1e-15, 1 − 1e-15]`
/// converges; iteration stops once the bracket no longer shrinks in `f64`.
pub fn epsilon_apriori(m: u64, beta: f64, dim: u64) -> Result<f64, CertificateError> {
    check_beta(beta)?;
    if dim >= m {
        return Err(domain(format!("dim = {dim} must be below M = {m}")));
    }
    let target = beta.ln();
    let f = |e: f64| ln_binomial_lower_tail(m, e, dim) - target;
    let (mut lo, mut hi) = (BISECT_LO, BISECT_HI);
    if f(lo) < 0.0 || f(hi) > 0.0 {
        return Err(CertificateError::NoSolution { m, beta, dim });
    }
    for _ in 0..BISECT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // the endpoint whose tail lies closer to beta
    Ok(if f(lo).abs() <= f(hi).abs() { lo } else { hi })
}

/// Sufficient closed-form level `(2/M)(ln(1/β) + dim·ln 2)`.
pub fn epsilon_explicit(m: u64, beta: f64, dim: u64) -> f64 {
    2.0 / m as f64 * ((1.0 / beta).ln() + dim as f64 * std::f64::consts::LN_2)
}

/// Smallest `M > dim` with `beta_apriori(M, eps, dim) ≤ beta`.
pub fn sample_size(eps: f64, beta: f64, dim: u64) -> Result<u64, CertificateError> {
    check_beta(beta)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(domain(format!("epsilon must lie in (0,1), got {eps}")));
    }
    let target = beta.ln();
    let ok = |m: u64| ln_binomial_lower_tail(m, eps, dim) <= target;
    let mut lo = dim;
    let mut hi = dim + 1;
    while !ok(hi) {
        lo = hi;
        hi = hi
            .checked_mul(2)
            .ok_or_else(|| domain("sample size overflows u64"))?;
    }
    // invariant: lo fails (or equals dim), hi succeeds
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// `ln C(m,k)` as an explicit sum of logs, independent of log-gamma.
    fn ln_binom_direct(m: u64, k: u64) -> f64 {
        (1..=k).map(|j| ((m - k + j) as f64).ln() - (j as f64).ln()).sum()
    }

    #[test]
    fn full_support_gives_one() {
        for m in [1, 7, 1000] {
            assert_eq!(epsilon_posteriori(m, m, 0.3).unwrap(), 1.0);
        }
    }

    #[test]
    fn posteriori_small_case() {
        let e = epsilon_posteriori(10, 0, 0.1).unwrap();
        assert!((e - (1.0 - 0.01f64.powf(0.1))).abs() < 1e-14);
        assert!((e - 0.369043).abs() < 1e-6);
    }

    #[test]
    fn posteriori_domain_errors() {
        assert!(epsilon_posteriori(10, 11, 0.1).is_err());
        assert!(epsilon_posteriori(10, 1, 0.0).is_err());
        assert!(epsilon_posteriori(10, 1, 1.0).is_err());
    }

    #[test]
    fn lgamma_binomial_matches_direct_sum() {
        for (m, k) in [(10, 3), (1000, 500), (10_000, 17), (1_000_000, 123_456)] {
            let a = ln_binomial(m, k);
            let b = ln_binom_direct(m, k);
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{m} {k}: {a} vs {b}");
        }
    }

    #[test]
    fn posteriori_finite_at_a_million() {
        for k in [0, 10, 500_000, 999_999] {
            let e = epsilon_posteriori(1_000_000, k, 1e-6).unwrap();
            assert!(e.is_finite() && (0.0..=1.0).contains(&e));
        }
    }

    #[test]
    fn apriori_dim_zero_closed_form() {
        let b = beta_apriori(100, 0.05, 0).unwrap();
        assert!((b - 0.95f64.powi(100)).abs() < 1e-15);
        assert!((b - 0.0059205).abs() < 1e-7);
        let e = epsilon_apriori(100, 0.01, 0).unwrap();
        assert!((e - (1.0 - 0.01f64.powf(0.01))).abs() < 1e-12);
        assert!((e - 0.045007).abs() < 1e-6);
    }

    #[test]
    fn apriori_matches_statrs_cdf() {
        use statrs::distribution::{Binomial, DiscreteCDF};
        for (m, e, d) in [(50u64, 0.1, 3u64), (500, 0.0885, 12), (200, 0.3, 40)] {
            let oracle = Binomial::new(e, m).unwrap().cdf(d);
            let ours = beta_apriori(m, e, d).unwrap();
            assert!((ours - oracle).abs() <= 1e-10 * oracle.max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn small_epsilon_tail_is_near_one() {
        for (m, d) in [(10, 0), (1000, 5), (100_000, 3)] {
            assert!(beta_apriori(m, 1e-14, d).unwrap() > 1.0 - 1e-8);
        }
    }

    #[test]
    fn paper_scale_explicit_bound() {
        let ex = epsilon_explicit(500, 1e-6, 12);
        assert!((ex - 0.0885).abs() < 1e-4);
        assert!(beta_apriori(500, 0.0885, 12).unwrap() <= 1e-6);
        assert!(epsilon_apriori(500, 1e-6, 12).unwrap() < 0.0885);
    }

    #[test]
    fn explicit_bound_identities() {
        assert_eq!(epsilon_explicit(10, 1.0, 0), 0.0);
        let a = epsilon_explicit(300, 1e-3, 5);
        let b = epsilon_explicit(600, 1e-3, 5);
        assert_eq!(a, 2.0 * b);
    }

    #[test]
    fn sample_size_dim_zero() {
        assert_eq!(sample_size(0.1, 0.01, 0).unwrap(), 44);
        let direct = (0.01f64.ln() / 0.9f64.ln()).ceil() as u64;
        assert_eq!(direct, 44);
        assert!(sample_size(1.0, 0.01, 0).is_err());
    }

    #[test]
    fn sample_size_red_vs_blue() {
        let red: Vec<u64> = (10..=50)
            .step_by(10)
            .map(|_| sample_size(0.0885, 1e-6, 12).unwrap())
            .collect();
        assert!(red.windows(2).all(|w| w[0] == w[1]));
        assert!(red[0] <= 500);
        let blue: Vec<u64> = (10..=50)
            .step_by(10)
            .map(|n| sample_size(0.0885, 1e-6, 12 * n).unwrap())
            .collect();
        assert!(blue.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn certificate_json_shape() {
        let c = Certificate::posteriori(10, 10, 0.5).unwrap();
        assert_eq!(
            serde_json::to_string(&c).unwrap(),
            r#"{"kind":"APosterioriSet","M":10,"k":10,"epsilon":1.0,"beta":0.5}"#
        );
    }

    proptest! {
        #[test]
        fn posteriori_monotone_in_k(m in 2u64..3000, beta in 1e-9f64..0.5, frac in 0.0f64..1.0) {
            let k = ((m - 1) as f64 * frac) as u64;
            let a = epsilon_posteriori(m, k, beta).unwrap();
            let b = epsilon_posteriori(m, k + 1, beta).unwrap();
            prop_assert!(b >= a);
        }

        #[test]
        fn posteriori_nonincreasing_in_m(m in 2u64..3000, beta in 1e-9f64..0.5, k in 0u64..50) {
            prop_assume!(k <= m);
            let a = epsilon_posteriori(m, k, beta).unwrap();
            let b = epsilon_posteriori(m + 1, k, beta).unwrap();
            prop_assert!(b <= a + 1e-15);
        }

        #[test]
        fn apriori_round_trip(m in 20u64..5000, lb in -12.0f64..-0.5, frac in 0.0f64..0.5) {
            let beta = 10f64.powf(lb);
            let d = ((m as f64) * frac * 0.2) as u64;
            let e = epsilon_apriori(m, beta, d).unwrap();
            let back = beta_apriori(m, e, d).unwrap();
            prop_assert!((back - beta).abs() <= 1e-10, "{back} vs {beta}");
        }

        #[test]
        fn explicit_dominates_apriori(m in 50u64..5000, lb in -9.0f64..-1.0, d in 0u64..20) {
            let beta = 10f64.powf(lb);
            prop_assume!(d < m);
            let ex = epsilon_explicit(m, beta, d);
            prop_assume!(ex > 0.0 && ex < 1.0);
            prop_assert!(ex >= epsilon_apriori(m, beta, d).unwrap());
        }

        #[test]
        fn sample_size_monotone_in_dim(lg in -3.0f64..-0.3, lb in -8.0f64..-1.0, d in 0u64..30) {
            let eps = 10f64.powf(lg);
            let beta = 10f64.powf(lb);
            prop_assert!(sample_size(eps, beta, d + 1).unwrap() >= sample_size(eps, beta, d).unwrap());
        }
    }
}
