//! Quadrature oracle for Gaussian triple moments of Wick polynomials.
//!
//! `triple_expectation` computes E[zeta_a zeta_b zeta_c] for independent
//! standard normal coordinates by Gauss-Hermite quadrature alone. It shares
//! no code path with the completeness test or the Phi weights in
//! [`crate::coupling`], so agreement between the two is a genuine check.

use crate::hermite::hermite;
use crate::multi_index::MultiIndex;
use crate::quadrature::gauss_hermite_prob;

/// Ceiling on |alpha| + |beta| + |gamma| for the oracle.
pub const ORACLE_ORDER_CAP: u64 = 48;

/// E[zeta_alpha zeta_beta zeta_gamma] by tensorized Gauss-Hermite quadrature.
///
/// The integrand factorizes over slots, so each axis is integrated by a 1-D
/// rule with more than (a + b + c) / 2 nodes, enough for exactness.
pub fn triple_expectation(alpha: &MultiIndex, beta: &MultiIndex, gamma: &MultiIndex) -> f64 {
    let total = alpha.order() + beta.order() + gamma.order();
    assert!(
        total <= ORACLE_ORDER_CAP,
        "oracle order {total} above cap {ORACLE_ORDER_CAP}"
    );
    let mut acc = 1.0;
    for (i, k) in MultiIndex::union_support(&[alpha, beta, gamma]) {
        let (a, b, c) = (alpha.get(i, k), beta.get(i, k), gamma.get(i, k));
        let degree = (a + b + c) as usize;
        let nodes = degree / 2 + 1;
        let (x, w) = gauss_hermite_prob(nodes);
        let slot: f64 = x
            .iter()
            .zip(&w)
            .map(|(&xi, &wi)| wi * hermite(a, xi) * hermite(b, xi) * hermite(c, xi))
            .sum();
        acc *= slot;
    }
    acc
}

/// E[zeta_alpha zeta_beta], the pair moment, as the triple with an empty
/// third argument.
pub fn pair_expectation(alpha: &MultiIndex, beta: &MultiIndex) -> f64 {
    triple_expectation(alpha, beta, &MultiIndex::empty())
}
