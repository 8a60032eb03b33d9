//! Complete triples, the Phi weights, and the precomputed coupling table
//! that drives the propagator's nonlinear term.
//!
//! Weights are carried as exact rationals through table construction and
//! converted to floating point once, at solver assembly.

use num::{BigInt, BigRational, One, ToPrimitive};

use crate::error::{Error, Result};
use crate::multi_index::{IndexSet, MultiIndex};
use crate::par::{maybe_par_map, ExecStrategy};

/// A triple (alpha, beta, gamma) is complete when every entry of
/// alpha + beta + gamma is even and |alpha - beta| <= gamma <= alpha + beta
/// componentwise.
pub fn is_complete(alpha: &MultiIndex, beta: &MultiIndex, gamma: &MultiIndex) -> bool {
    for (i, k) in MultiIndex::union_support(&[alpha, beta, gamma]) {
        let a = alpha.get(i, k) as i64;
        let b = beta.get(i, k) as i64;
        let c = gamma.get(i, k) as i64;
        if (a + b + c) % 2 != 0 || c < (a - b).abs() || c > a + b {
            return false;
        }
    }
    true
}

fn big_factorial_u32(n: u32) -> BigInt {
    let mut acc = BigInt::one();
    for j in 2..=n as u64 {
        acc *= j;
    }
    acc
}

/// Exact factorial of a multi-index as a big integer (no order cap).
fn big_factorial(index: &MultiIndex) -> BigInt {
    let mut acc = BigInt::one();
    for (_, order) in index.iter() {
        acc *= big_factorial_u32(order);
    }
    acc
}

/// Phi(alpha, beta, gamma) =
/// 1 / [((a-b+c)/2)! ((b-a+c)/2)! ((a+b-c)/2)!], exact.
///
/// Errors with [`Error::NotComplete`] when the triple is not complete.
pub fn phi(alpha: &MultiIndex, beta: &MultiIndex, gamma: &MultiIndex) -> Result<BigRational> {
    if !is_complete(alpha, beta, gamma) {
        return Err(Error::NotComplete);
    }
    let mut den = BigInt::one();
    for (i, k) in MultiIndex::union_support(&[alpha, beta, gamma]) {
        let a = alpha.get(i, k) as i64;
        let b = beta.get(i, k) as i64;
        let c = gamma.get(i, k) as i64;
        den *= big_factorial_u32(((a - b + c) / 2) as u32);
        den *= big_factorial_u32(((b - a + c) / 2) as u32);
        den *= big_factorial_u32(((a + b - c) / 2) as u32);
    }
    Ok(BigRational::new(BigInt::one(), den))
}

/// Phi as a float, for diagnostics and oracle comparisons.
pub fn phi_f64(alpha: &MultiIndex, beta: &MultiIndex, gamma: &MultiIndex) -> Result<f64> {
    Ok(phi(alpha, beta, gamma)?.to_f64().expect("phi fits in f64"))
}

/// One nonlinear interaction: positions of beta and gamma in the index set
/// and the exact weight alpha! * Phi(alpha, beta, gamma).
#[derive(Clone, Debug)]
pub struct CouplingEntry {
    pub beta: usize,
    pub gamma: usize,
    pub weight: BigRational,
}

/// For each alpha in an index set, every (beta, gamma) pair inside the set
/// that forms a complete triple with it.
#[derive(Clone, Debug)]
pub struct CouplingTable {
    rows: Vec<Vec<CouplingEntry>>,
}

impl CouplingTable {
    pub fn row(&self, alpha_pos: usize) -> &[CouplingEntry] {
        &self.rows[alpha_pos]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn entry_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Weights as floats, in table order, for solver assembly.
    pub fn to_f64_rows(&self) -> Vec<Vec<(usize, usize, f64)>> {
        self.rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| {
                        let w = e.weight.to_f64().expect("weight fits in f64");
                        (e.beta, e.gamma, w)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Build the coupling table for an index set.
///
/// For fixed alpha and beta, the complete gammas are exactly
/// gamma = alpha + beta - 2p with 0 <= p <= alpha wedge beta, and the weight
/// simplifies to alpha! / ((alpha - p)! (beta - p)! p!). Construction is
/// schedule-independent: each row depends only on (alpha, set).
pub fn build_coupling_table(set: &IndexSet) -> CouplingTable {
    build_coupling_table_with(set, ExecStrategy::default())
}

pub fn build_coupling_table_with(set: &IndexSet, strategy: ExecStrategy) -> CouplingTable {
    let rows = maybe_par_map(strategy, set.len(), |apos| {
        let alpha = set.get(apos);
        let alpha_fact = big_factorial(alpha);
        let mut row = Vec::new();
        for (bpos, beta) in set.indices().iter().enumerate() {
            let cap = alpha.min(beta);
            for p in sub_indices(&cap) {
                let gamma = subtract_twice(&alpha.add(beta), &p);
                let Some(gpos) = set.position(&gamma) else {
                    continue;
                };
                let mut den = BigInt::one();
                den *= big_factorial(&subtract(alpha, &p));
                den *= big_factorial(&subtract(beta, &p));
                den *= big_factorial(&p);
                row.push(CouplingEntry {
                    beta: bpos,
                    gamma: gpos,
                    weight: BigRational::new(alpha_fact.clone(), den),
                });
            }
        }
        row
    });
    CouplingTable { rows }
}

/// All sub-multi-indices 0 <= p <= cap, componentwise.
fn sub_indices(cap: &MultiIndex) -> Vec<MultiIndex> {
    let slots: Vec<_> = cap.iter().collect();
    let mut out = Vec::new();
    let mut exps = vec![0u32; slots.len()];
    fill_sub(&slots, 0, &mut exps, &mut out);
    out
}

fn fill_sub(
    slots: &[((u32, u32), u32)],
    at: usize,
    exps: &mut [u32],
    out: &mut Vec<MultiIndex>,
) {
    if at == slots.len() {
        out.push(MultiIndex::from_entries(
            slots.iter().map(|&(s, _)| s).zip(exps.iter().copied()),
        ));
        return;
    }
    for e in 0..=slots[at].1 {
        exps[at] = e;
        fill_sub(slots, at + 1, exps, out);
    }
}

fn subtract(a: &MultiIndex, p: &MultiIndex) -> MultiIndex {
    MultiIndex::from_entries(a.iter().map(|((i, k), o)| ((i, k), o - p.get(i, k))))
}

fn subtract_twice(sum: &MultiIndex, p: &MultiIndex) -> MultiIndex {
    MultiIndex::from_entries(
        sum.iter()
            .map(|((i, k), o)| ((i, k), o - 2 * p.get(i, k))),
    )
}
