//! Budgeted, oracle-respecting set enumerators.
//!
//! An enumerator answers "which strings have been emitted under oracle
//! prefix `tau` within `steps` computation steps?". The trait contract
//! captures how any effective enumeration behaves; the concrete
//! implementations here are a table-driven form (loadable from JSON) and a
//! seeded random generator for property harnesses.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::bitseq::BitString;
use crate::dyadic::Dyadic;
use crate::stats::SplitMix64;

use super::CoverError;

/// Longest string an enumerator may emit. Keeps every enumerated set
/// inside the span limit of the exact brute-force measure.
pub const MAX_EMIT_BITS: usize = 24;

/// A monotone, budgeted enumeration relative to an oracle prefix.
///
/// Implementations must satisfy, for all `tau ⊑ tau'` and `steps ≤ steps'`:
///
/// 1. `enumerate(tau, 0)` is empty;
/// 2. step-monotone: `enumerate(tau, steps) ⊆ enumerate(tau, steps')`;
/// 3. extension-consistent: `enumerate(tau, steps) ⊆ enumerate(tau', steps)`;
/// 4. use-bounded: for `steps ≤ |tau|`, `enumerate(tau, steps) =
///    enumerate(tau↾steps, steps)` — a budget-`steps` computation cannot
///    have read oracle bits beyond the first `steps`;
///
/// and every emitted string has at most [`MAX_EMIT_BITS`] bits. The cover
/// constructions report detectable violations as errors; the 2^-i bounds
/// they check are only guaranteed for conforming enumerators.
pub trait TestEnumerator {
    fn enumerate(&self, tau: &BitString, steps: usize) -> BTreeSet<BitString>;
}

/// One table entry: emit `emit` at every `(tau, budget)` with
/// `tau_prefix ⊑ tau` and `budget ≥ step`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRecord {
    pub tau_prefix: BitString,
    pub step: usize,
    pub emit: Vec<BitString>,
}

/// A finite, table-driven [`TestEnumerator`].
///
/// The constructor enforces the trait contract: `step ≥ 1` keeps budget 0
/// empty, `step ≥ |tau_prefix|` keeps the enumeration use-bounded (a record
/// may not consult more oracle bits than its step budget allows), and
/// emitted strings respect [`MAX_EMIT_BITS`]. The other contract clauses
/// hold for any table by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableEnumerator {
    records: Vec<TableRecord>,
}

impl TableEnumerator {
    pub fn new(records: Vec<TableRecord>) -> Result<Self, CoverError> {
        for (index, record) in records.iter().enumerate() {
            if record.step == 0 {
                return Err(CoverError::BadTable(format!(
                    "record {index}: step 0 would emit at budget 0"
                )));
            }
            if record.step < record.tau_prefix.len() {
                return Err(CoverError::BadTable(format!(
                    "record {index}: step {} is below the {} oracle bits the record reads",
                    record.step,
                    record.tau_prefix.len()
                )));
            }
            if let Some(long) = record.emit.iter().find(|e| e.len() > MAX_EMIT_BITS) {
                return Err(CoverError::BadTable(format!(
                    "record {index}: emitted string of {} bits exceeds the {MAX_EMIT_BITS}-bit cap",
                    long.len()
                )));
            }
        }
        Ok(TableEnumerator { records })
    }

    pub fn from_json(text: &str) -> Result<Self, CoverError> {
        let records: Vec<TableRecord> =
            serde_json::from_str(text).map_err(|e| CoverError::BadTable(e.to_string()))?;
        TableEnumerator::new(records)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.records).expect("table records serialize")
    }

    pub fn records(&self) -> &[TableRecord] {
        &self.records
    }
}

impl TestEnumerator for TableEnumerator {
    fn enumerate(&self, tau: &BitString, steps: usize) -> BTreeSet<BitString> {
        self.records
            .iter()
            .filter(|r| r.step <= steps && r.tau_prefix.is_prefix_of(tau))
            .flat_map(|r| r.emit.iter().cloned())
            .collect()
    }
}

/// A seeded, contract-valid random table.
///
/// Records get uniformly random oracle prefixes up to `max_tau_len`, step
/// budgets drawn from the range the contract allows, and one or two emitted
/// strings of 1..=`max_emit_len` bits. With `mass_cap` set, records are
/// dropped greedily so that the naive emitted mass (the sum of `2^-|w|`
/// over all emitted strings, an upper bound on every enumerated set's
/// measure) stays within the cap — handy for producing enumerators whose
/// budgets always qualify under a `2^-i` guard.
pub fn random_enumerator(
    seed: u64,
    max_tau_len: usize,
    max_emit_len: usize,
    record_count: usize,
    mass_cap: Option<&Dyadic>,
) -> TableEnumerator {
    fn random_bits(rng: &mut SplitMix64, len: usize) -> BitString {
        (0..len).map(|_| rng.next_u64() & 1 == 1).collect()
    }
    assert!((1..=MAX_EMIT_BITS).contains(&max_emit_len));
    let mut rng = SplitMix64::new(seed);
    let mut records = Vec::new();
    let mut mass = Dyadic::zero();
    for _ in 0..record_count {
        let tau_len = (rng.next_u64() % (max_tau_len as u64 + 1)) as usize;
        let tau_prefix = random_bits(&mut rng, tau_len);
        let lo = tau_len.max(1);
        let hi = max_tau_len.max(lo);
        let step = lo + (rng.next_u64() % (hi - lo + 1) as u64) as usize;
        let emit: Vec<BitString> = (0..=rng.next_u64() % 2)
            .map(|_| {
                let len = 1 + (rng.next_u64() % max_emit_len as u64) as usize;
                random_bits(&mut rng, len)
            })
            .collect();
        let record_mass: Dyadic =
            emit.iter().map(|w| Dyadic::pow2_neg(w.len() as u64)).sum();
        if let Some(cap) = mass_cap {
            let next = mass.clone() + record_mass.clone();
            if next > *cap {
                continue;
            }
            mass = next;
        }
        records.push(TableRecord { tau_prefix, step, emit });
    }
    TableEnumerator::new(records).expect("generated records respect the loader contract")
}
