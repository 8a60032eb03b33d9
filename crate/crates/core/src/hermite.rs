//! Probabilists' Hermite polynomials and Wick polynomial evaluation.

use crate::error::{Error, Result};
use crate::multi_index::MultiIndex;

/// He_n(x) by the three-term recurrence
/// He_{n+1}(x) = x He_n(x) - n He_{n-1}(x), He_0 = 1, He_1 = x.
pub fn hermite(n: u32, x: f64) -> f64 {
    match n {
        0 => 1.0,
        1 => x,
        _ => {
            let mut prev = 1.0;
            let mut cur = x;
            for m in 1..n {
                let next = x * cur - m as f64 * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// The unnormalized Wick polynomial zeta_alpha evaluated at coordinates xi:
/// the product of He_{alpha_i^k}(xi_i^k) over the support of alpha.
///
/// `xi` maps a slot (i, k) to its Gaussian coordinate; a missing slot in the
/// support is an error.
pub fn wick_eval<F>(alpha: &MultiIndex, xi: F) -> Result<f64>
where
    F: Fn(u32, u32) -> Option<f64>,
{
    let mut acc = 1.0;
    for ((i, k), order) in alpha.iter() {
        let coord = xi(i, k).ok_or(Error::MissingCoordinate {
            time_mode: i,
            noise_mode: k,
        })?;
        acc *= hermite(order, coord);
    }
    Ok(acc)
}
