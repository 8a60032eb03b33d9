//! Multi-indices over (time-mode, noise-mode) slots and their truncated sets.
//!
//! A multi-index stores finitely many strictly positive orders keyed by a
//! slot `(i, k)` with time mode `i >= 1` and noise mode `k >= 1`. Zero orders
//! are never stored, so structural equality is canonical.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Factorials of multi-indices are computed exactly in `u64`; a total order
/// of 20 keeps every partition-factorial product in range.
pub const ORDER_CAP: u64 = 20;

/// Default ceiling on the cardinality of an enumerated index set.
pub const SIZE_CAP: u128 = 100_000;

/// Slot identifier: (time mode `i >= 1`, noise mode `k >= 1`).
pub type Slot = (u32, u32);

/// Sparse multi-index over (time-mode, noise-mode) slots.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MultiIndex {
    entries: BTreeMap<Slot, u32>,
}

impl MultiIndex {
    /// The empty multi-index (order zero).
    pub fn empty() -> Self {
        Self::default()
    }

    /// Build from (slot, order) pairs; zero orders are dropped.
    pub fn from_entries<I: IntoIterator<Item = (Slot, u32)>>(entries: I) -> Self {
        let mut map = BTreeMap::new();
        for (slot, order) in entries {
            if order > 0 {
                *map.entry(slot).or_insert(0) += order;
            }
        }
        Self { entries: map }
    }

    /// Unit index with a single 1 at `(i, k)`.
    pub fn unit(i: u32, k: u32) -> Self {
        Self::from_entries([((i, k), 1)])
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Order stored at a slot, zero when absent.
    pub fn get(&self, i: u32, k: u32) -> u32 {
        self.entries.get(&(i, k)).copied().unwrap_or(0)
    }

    /// Iterate over the stored (slot, order) pairs in slot order.
    pub fn iter(&self) -> impl Iterator<Item = (Slot, u32)> + '_ {
        self.entries.iter().map(|(&s, &o)| (s, o))
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    /// Total order |alpha|: sum of all stored orders.
    pub fn order(&self) -> u64 {
        self.entries.values().map(|&o| o as u64).sum()
    }

    /// Exact factorial alpha! = prod of entrywise factorials.
    ///
    /// Errors with [`Error::OrderCapExceeded`] when |alpha| > [`ORDER_CAP`],
    /// which guards `u64` overflow.
    pub fn factorial(&self) -> Result<u64> {
        let order = self.order();
        if order > ORDER_CAP {
            return Err(Error::OrderCapExceeded {
                order,
                cap: ORDER_CAP,
            });
        }
        let mut acc: u64 = 1;
        for &o in self.entries.values() {
            for m in 2..=o as u64 {
                acc *= m;
            }
        }
        Ok(acc)
    }

    /// The decremented index alpha(i, k): entry (i, k) replaced by
    /// (order - 1) with zero clamping; all other slots unchanged.
    pub fn decrement(&self, i: u32, k: u32) -> Self {
        let mut entries = self.entries.clone();
        match entries.get_mut(&(i, k)) {
            Some(o) if *o > 1 => *o -= 1,
            Some(_) => {
                entries.remove(&(i, k));
            }
            None => {}
        }
        Self { entries }
    }

    /// Componentwise sum.
    pub fn add(&self, other: &Self) -> Self {
        let mut entries = self.entries.clone();
        for (&slot, &o) in &other.entries {
            *entries.entry(slot).or_insert(0) += o;
        }
        Self { entries }
    }

    /// Componentwise minimum (alpha wedge beta).
    pub fn min(&self, other: &Self) -> Self {
        let mut entries = BTreeMap::new();
        for (&slot, &o) in &self.entries {
            let m = o.min(other.get(slot.0, slot.1));
            if m > 0 {
                entries.insert(slot, m);
            }
        }
        Self { entries }
    }

    /// All slots appearing in any of the given indices, in slot order.
    pub fn union_support(indices: &[&MultiIndex]) -> Vec<Slot> {
        let mut slots: Vec<Slot> = indices
            .iter()
            .flat_map(|m| m.entries.keys().copied())
            .collect();
        slots.sort_unstable();
        slots.dedup();
        slots
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (n, ((i, k), o)) in self.entries.iter().enumerate() {
            if n > 0 {
                write!(f, ", ")?;
            }
            write!(f, "({i},{k}):{o}")?;
        }
        write!(f, "}}")
    }
}

/// Truncation parameters of an index set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Truncation {
    /// Maximal total order P.
    pub max_order: u32,
    /// Time modes 1..=n_t.
    pub time_modes: u32,
    /// Noise modes 1..=n_w.
    pub noise_modes: u32,
}

/// All multi-indices with |alpha| <= P supported on i <= n_t, k <= n_w,
/// in graded-lexicographic order (the empty index first).
#[derive(Clone, Debug)]
pub struct IndexSet {
    indices: Vec<MultiIndex>,
    positions: std::collections::HashMap<MultiIndex, usize>,
    truncation: Truncation,
}

impl IndexSet {
    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn get(&self, pos: usize) -> &MultiIndex {
        &self.indices[pos]
    }

    pub fn position(&self, index: &MultiIndex) -> Option<usize> {
        self.positions.get(index).copied()
    }

    /// Position of alpha(i, k) for every alpha and every slot in its support.
    /// The decrement of an in-set index is always in the set.
    pub fn decrement_positions(&self) -> Vec<Vec<(Slot, u32, usize)>> {
        self.indices
            .iter()
            .map(|alpha| {
                alpha
                    .iter()
                    .map(|((i, k), order)| {
                        let pos = self
                            .position(&alpha.decrement(i, k))
                            .expect("decrement stays within a downward-closed set");
                        ((i, k), order, pos)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Binomial coefficient in u128 with early saturation.
fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc.saturating_mul(n - j) / (j + 1);
    }
    acc
}

/// Enumerate the truncated index set J(P, n_t, n_w).
///
/// Cardinality is C(n_t * n_w + P, P); enumeration is refused above
/// [`SIZE_CAP`] entries.
pub fn enumerate_indices(max_order: u32, time_modes: u32, noise_modes: u32) -> Result<IndexSet> {
    assert!(time_modes >= 1 && noise_modes >= 1, "mode counts start at 1");
    let slots: Vec<Slot> = (1..=time_modes)
        .flat_map(|i| (1..=noise_modes).map(move |k| (i, k)))
        .collect();
    let cardinality = binomial(
        slots.len() as u128 + max_order as u128,
        max_order as u128,
    );
    if cardinality > SIZE_CAP {
        return Err(Error::SizeCapExceeded {
            cardinality,
            cap: SIZE_CAP,
        });
    }

    let mut indices = Vec::with_capacity(cardinality as usize);
    let mut exps = vec![0u32; slots.len()];
    for degree in 0..=max_order {
        push_degree(&slots, degree, 0, &mut exps, &mut indices);
    }

    let positions = indices
        .iter()
        .cloned()
        .enumerate()
        .map(|(p, m)| (m, p))
        .collect();
    Ok(IndexSet {
        indices,
        positions,
        truncation: Truncation {
            max_order,
            time_modes,
            noise_modes,
        },
    })
}

/// Exponent vectors of total `degree`, first slot's exponent descending:
/// the graded-lex order within one grade.
fn push_degree(
    slots: &[Slot],
    degree: u32,
    at: usize,
    exps: &mut Vec<u32>,
    out: &mut Vec<MultiIndex>,
) {
    if at + 1 == slots.len() {
        exps[at] = degree;
        out.push(MultiIndex::from_entries(
            slots.iter().copied().zip(exps.iter().copied()),
        ));
        return;
    }
    for e in (0..=degree).rev() {
        exps[at] = e;
        push_degree(slots, degree - e, at + 1, exps, out);
    }
}
