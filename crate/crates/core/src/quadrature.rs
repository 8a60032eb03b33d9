//! Small fixed-order Gaussian quadrature rules.
//!
//! Gauss-Hermite here is the probabilists' flavor: nodes are the roots of
//! He_m and the weights are normalized so they sum to one, i.e. the rule
//! integrates against the standard normal density exactly for polynomials
//! of degree <= 2m - 1.

use crate::hermite::hermite;

/// Probabilists' Gauss-Hermite rule with `m` nodes.
///
/// Returns `(nodes, weights)` with probability-normalized weights.
pub fn gauss_hermite_prob(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let nodes = hermite_roots(m);
    let mut fact = 1.0_f64;
    for j in 2..=m {
        fact *= j as f64;
    }
    let weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let h = hermite((m - 1) as u32, x);
            fact / ((m as f64).powi(2) * h * h)
        })
        .collect();
    (nodes, weights)
}

/// Roots of He_m by interlacing bisection plus a Newton polish.
///
/// The roots of He_m strictly interlace those of He_{m-1}, so bracketing
/// intervals come from the previous level; |root| < sqrt(4m + 2) bounds the
/// outermost brackets.
fn hermite_roots(m: usize) -> Vec<f64> {
    let mut roots = vec![0.0_f64];
    for level in 2..=m {
        let bound = (4.0 * level as f64 + 2.0).sqrt();
        let mut brackets = Vec::with_capacity(level + 1);
        brackets.push(-bound);
        brackets.extend_from_slice(&roots);
        brackets.push(bound);
        let mut next = Vec::with_capacity(level);
        for w in brackets.windows(2) {
            next.push(refine_root(level as u32, w[0], w[1]));
        }
        // The rule is symmetric; enforce it exactly so that odd integrands
        // cancel pairwise.
        let len = next.len();
        for i in 0..len / 2 {
            let v = 0.5 * (next[i] - next[len - 1 - i]);
            next[i] = v;
            next[len - 1 - i] = -v;
        }
        if len % 2 == 1 {
            next[len / 2] = 0.0;
        }
        roots = next;
    }
    if m == 1 {
        roots = vec![0.0];
    }
    roots
}

fn refine_root(n: u32, mut lo: f64, mut hi: f64) -> f64 {
    let flo = hermite(n, lo);
    debug_assert!(flo * hermite(n, hi) <= 0.0, "bracket must contain a root");
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let fm = hermite(n, mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    // He_n' = n He_{n-1}
    for _ in 0..3 {
        let d = n as f64 * hermite(n - 1, x);
        if d != 0.0 {
            x -= hermite(n, x) / d;
        }
    }
    x
}

/// Gauss-Legendre rule with `m` nodes on [-1, 1].
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(m, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(m, x);
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=m {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}
