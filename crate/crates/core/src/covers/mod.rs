//! Exact measure arithmetic over string sets and three cover
//! constructions, each carrying a machine-checked `2^-i` bound.
//!
//! Everything here computes with [`Dyadic`] values — no floating point —
//! and the one brute-force oracle, [`measure_union_exact`], double-checks
//! every bound by enumerating cylinder points directly. The constructions:
//!
//! * [`transfer_cover_subseq`] turns a cover of a rule's kept subsequence
//!   into a cover of the full sequence by simulating the rule and splitting
//!   on every examined-but-not-kept bit; each source string's emissions
//!   carry at most the source's own measure.
//! * [`build_cover_pair`] covers interleaved pairs `sigma ⊕ tau` whose
//!   halves are linked by a budgeted enumeration under a `2^-i` measure
//!   guard.
//! * [`build_cover_main`] covers sequences directly: it reconstructs
//!   partial strings from enumerated non-kept prefixes via
//!   [`reconstruct`](crate::reconstruct::reconstruct), keeps only initial
//!   strings, and checks the prefix-freeness and mass bounds that make the
//!   whole thing measure at most `2^-i`.

mod enumerator;

pub use enumerator::{
    random_enumerator, TableEnumerator, TableRecord, TestEnumerator, MAX_EMIT_BITS,
};

use std::collections::{BTreeMap, BTreeSet};

use crate::bitseq::{strings_up_to_length, BitString, PartialString};
use crate::dyadic::Dyadic;
use crate::reconstruct::{default_stage_limit, reconstruct};
use crate::rules::{RuleCursor, RuleKind, SelectionRule};
use crate::stats::SplitMix64;

/// Largest span [`measure_union_exact`] will enumerate (2^24 points).
pub const MAX_SPAN: usize = 24;

/// Work cap for [`build_cover_main`]: the estimate `s · 2^s ·
/// 2^sigma_bound` must stay below this.
pub const MAIN_COVER_WORK_LIMIT: u128 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CoverError {
    #[error("span {span} exceeds the exact-measure limit of {MAX_SPAN}")]
    SpanTooLarge { span: usize },
    #[error("a string defines bit {position}, outside span {span}")]
    BitOutsideSpan { position: usize, span: usize },
    #[error("strings {a} and {b} are compatible; the set is not disjoint")]
    NotDisjoint { a: String, b: String },
    #[error("the set was not constructed with disjointness asserted")]
    DisjointnessNotAsserted,
    #[error("branch function has no value for {0}")]
    MissingBranchValue(String),
    #[error("enumerator table rejected: {0}")]
    BadTable(String),
    #[error("enumerator contract violated: {0}")]
    ContractViolation(String),
    #[error("cover guarantee failed: {0}")]
    GuaranteeViolated(String),
    #[error("work estimate {estimate} exceeds the limit {limit}")]
    BudgetOverflow { estimate: u128, limit: u128 },
    #[error("rule {0} has no threshold; this construction needs a bounded rule")]
    RuleNotBounded(String),
}

/// A finite set of partial strings, optionally carrying a verified
/// pairwise-incompatibility assertion (under which measure is a plain sum).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixSet {
    members: BTreeSet<PartialString>,
    disjoint: bool,
}

impl PrefixSet {
    /// A set with no disjointness claim.
    pub fn new(members: impl IntoIterator<Item = PartialString>) -> Self {
        PrefixSet { members: members.into_iter().collect(), disjoint: false }
    }

    /// A set verified pairwise incompatible (duplicates collapse first).
    pub fn disjoint(
        members: impl IntoIterator<Item = PartialString>,
    ) -> Result<Self, CoverError> {
        let members: BTreeSet<PartialString> = members.into_iter().collect();
        let list: Vec<&PartialString> = members.iter().collect();
        for (n, a) in list.iter().enumerate() {
            for b in &list[n + 1..] {
                if a.compatible_with(b) {
                    return Err(CoverError::NotDisjoint {
                        a: a.to_string(),
                        b: b.to_string(),
                    });
                }
            }
        }
        Ok(PrefixSet { members, disjoint: true })
    }

    pub fn members(&self) -> &BTreeSet<PartialString> {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_disjoint_asserted(&self) -> bool {
        self.disjoint
    }

    /// Smallest span containing every defined bit.
    pub fn span(&self) -> usize {
        self.members.iter().map(|m| m.span()).max().unwrap_or(0)
    }
}

/// Measure of a disjointness-asserted set: the exact sum of the member
/// measures.
pub fn measure_disjoint(set: &PrefixSet) -> Result<Dyadic, CoverError> {
    if !set.disjoint {
        return Err(CoverError::DisjointnessNotAsserted);
    }
    Ok(set.members.iter().map(|m| m.measure()).sum())
}

/// Measure of the union of cylinders, brute-forced over all `2^span`
/// points. The independent oracle for every other measure computation:
/// it needs no disjointness and costs `2^span · Σ measure` bit-fills.
pub fn measure_union_exact<'a, I>(strings: I, span: usize) -> Result<Dyadic, CoverError>
where
    I: IntoIterator<Item = &'a PartialString>,
{
    if span > MAX_SPAN {
        return Err(CoverError::SpanTooLarge { span });
    }
    let points = 1usize << span;
    let mut filled = vec![0u64; points.div_ceil(64)];
    for member in strings {
        if member.span() > span {
            return Err(CoverError::BitOutsideSpan {
                position: member.span() - 1,
                span,
            });
        }
        let mut base = 0usize;
        let mut defined = 0usize;
        for (j, symbol) in member.symbols().iter().enumerate() {
            if let Some(bit) = symbol {
                defined |= 1 << j;
                if *bit {
                    base |= 1 << j;
                }
            }
        }
        let free = !defined & (points - 1);
        let mut sub = free;
        loop {
            let point = base | sub;
            filled[point / 64] |= 1 << (point % 64);
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & free;
        }
    }
    let count: u64 = filled.iter().map(|w| w.count_ones() as u64).sum();
    Ok(Dyadic::new(count, span as u64))
}

/// Outcome of [`check_counting`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountingCheck {
    /// Whether every depth-`s` branch sum stays within `c`.
    pub holds: bool,
    /// The level-weighted total `Σ_j Σ_{|tau|=j} 2^-j · f(tau)`, exact.
    pub lhs: Dyadic,
}

/// The branch-counting inequality: if `f` sums to at most `c` along every
/// root-to-leaf path of the depth-`s` binary tree, then the level-weighted
/// total `lhs` is also at most `c` (each level's weighted sum averages the
/// branch contributions). Verifies the hypothesis on all `2^s` branches and
/// evaluates `lhs` exactly; `f` must be total on strings of length ≤ `s`.
pub fn check_counting(
    f: &BTreeMap<BitString, Dyadic>,
    c: &Dyadic,
    s: usize,
) -> Result<CountingCheck, CoverError> {
    let mut holds = true;
    let mut lhs = Dyadic::zero();
    // strings_up_to_length yields length-then-value order, which is exactly
    // rank order, so branch sums can be accumulated by indexing.
    let mut branch_sums: Vec<Dyadic> = Vec::new();
    for tau in strings_up_to_length(s) {
        let value = f
            .get(&tau)
            .ok_or_else(|| CoverError::MissingBranchValue(tau.to_string()))?;
        let sum = if tau.is_empty() {
            value.clone()
        } else {
            branch_sums[tau.prefix(tau.len() - 1).rank() as usize].clone() + value.clone()
        };
        lhs += value.scaled_down(tau.len() as u64);
        if tau.len() == s && sum > *c {
            holds = false;
        }
        branch_sums.push(sum);
    }
    Ok(CountingCheck { holds, lhs })
}

/// A seeded branch function satisfying the [`check_counting`] hypothesis by
/// construction: each node spends a random dyadic share of its remaining
/// path budget (starting from `c`) and passes the rest to both children.
/// Used by the property harnesses.
pub fn random_branch_function(
    seed: u64,
    s: usize,
    c: &Dyadic,
) -> BTreeMap<BitString, Dyadic> {
    let mut rng = SplitMix64::new(seed);
    let mut f = BTreeMap::new();
    let mut remaining: Vec<Dyadic> = Vec::new();
    for tau in strings_up_to_length(s) {
        let budget = if tau.is_empty() {
            c.clone()
        } else {
            remaining[tau.prefix(tau.len() - 1).rank() as usize].clone()
        };
        // Spend m/2^k of the budget, k ≤ 3.
        let k = rng.next_u64() % 4;
        let m = rng.next_u64() % (1 << k) + 1;
        let spent = budget.scaled_down(k) * Dyadic::new(m, 0);
        let rest = budget
            .checked_sub(&spent)
            .expect("a share of the budget fits in the budget");
        f.insert(tau, spent);
        remaining.push(rest);
    }
    f
}

/// Emissions of [`transfer_cover_subseq`] for one source string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceTransfer {
    pub source: BitString,
    /// Pairwise incompatible: branches differ at their first split.
    pub emitted: BTreeSet<PartialString>,
    /// Branches dropped before the source was fully placed.
    pub incomplete: usize,
    pub warnings: Vec<String>,
}

impl SourceTransfer {
    /// Exact total measure of the emitted strings; at most `2^-|source|`,
    /// with equality when no branch was dropped.
    pub fn emitted_measure(&self) -> Dyadic {
        self.emitted.iter().map(|m| m.measure()).sum()
    }

    pub fn meets_source_bound(&self) -> bool {
        self.emitted_measure() <= Dyadic::pow2_neg(self.source.len() as u64)
    }
}

/// Result of [`transfer_cover_subseq`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferCover {
    pub sources: Vec<SourceTransfer>,
}

impl TransferCover {
    /// All emissions pooled, without a disjointness claim (different
    /// sources may overlap).
    pub fn prefix_set(&self) -> PrefixSet {
        PrefixSet::new(self.sources.iter().flat_map(|s| s.emitted.iter().cloned()))
    }

    pub fn incomplete(&self) -> usize {
        self.sources.iter().map(|s| s.incomplete).sum()
    }
}

/// Transfers a cover of the kept subsequence to a cover of the full
/// sequence. Each source string is fed to the rule as the kept bits; every
/// examined-but-not-kept position splits the simulation into both bit
/// values. A branch emits its partial string once the source is exhausted;
/// branches that exceed `depth` steps, revisit a position, or hit rule
/// divergence are dropped with a warning (weakening, never breaking, the
/// per-source measure bound).
pub fn transfer_cover_subseq(
    rule: &SelectionRule,
    cover: &BTreeSet<BitString>,
    depth: usize,
) -> TransferCover {
    let sources = cover
        .iter()
        .map(|source| {
            let mut out = SourceTransfer {
                source: source.clone(),
                emitted: BTreeSet::new(),
                incomplete: 0,
                warnings: Vec::new(),
            };
            let mut alpha: Vec<Option<bool>> = Vec::new();
            explore(rule.cursor(), &mut alpha, 0, depth, &mut out);
            out
        })
        .collect();
    TransferCover { sources }
}

fn explore(
    cursor: RuleCursor<'_>,
    alpha: &mut Vec<Option<bool>>,
    consumed: usize,
    steps_left: usize,
    out: &mut SourceTransfer,
) {
    if consumed == out.source.len() {
        out.emitted.insert(PartialString::from_symbols(alpha.clone()));
        return;
    }
    let unplaced = out.source.len() - consumed;
    if steps_left == 0 {
        out.incomplete += 1;
        out.warnings.push(format!(
            "source {}: branch dropped at the depth limit with {unplaced} bits unplaced",
            out.source
        ));
        return;
    }
    let (Some(position), Some(keep)) = (cursor.next_position(), cursor.select_flag()) else {
        out.incomplete += 1;
        out.warnings.push(format!(
            "source {}: branch dropped on rule divergence with {unplaced} bits unplaced",
            out.source
        ));
        return;
    };
    if alpha.get(position).copied().flatten().is_some() {
        out.incomplete += 1;
        out.warnings.push(format!(
            "source {}: branch dropped after re-examining position {position}",
            out.source
        ));
        return;
    }
    if alpha.len() <= position {
        alpha.resize(position + 1, None);
    }
    let bits: &[bool] = if keep {
        &[out.source.bit(consumed)]
    } else {
        &[false, true]
    };
    for &bit in bits {
        alpha[position] = Some(bit);
        let mut next = cursor.clone();
        next.advance(bit);
        explore(
            next,
            alpha,
            consumed + usize::from(keep),
            steps_left - 1,
            out,
        );
    }
    alpha[position] = None;
}

/// The interleaved pair cover: all `sigma ⊕ tau` with `|sigma| = |tau| = s`
/// such that some prefix `sigma'` of `sigma` is enumerated under some
/// prefix `tau'` of `tau` at budget `|tau'|`, with that enumerated set
/// measuring at most `2^-i`. The result's own measure is then at most
/// `2^-i` as well.
pub fn build_cover_pair<E: TestEnumerator + ?Sized>(
    enumerator: &E,
    i: usize,
    s: usize,
) -> Result<BTreeSet<BitString>, CoverError> {
    if !enumerator.enumerate(&BitString::new(), 0).is_empty() {
        return Err(CoverError::ContractViolation(
            "budget 0 must enumerate nothing".into(),
        ));
    }
    let bound = Dyadic::pow2_neg(i as u64);
    let mut cover = BTreeSet::new();
    // Per-node accumulators along the tau tree, indexed by rank.
    let mut enumerated: Vec<BTreeSet<BitString>> = Vec::new();
    let mut qualified: Vec<BTreeSet<BitString>> = Vec::new();
    for tau in strings_up_to_length(s) {
        let parent = (!tau.is_empty()).then(|| tau.prefix(tau.len() - 1).rank() as usize);
        let w = enumerator.enumerate(&tau, tau.len());
        if let Some(p) = parent {
            // Contract consequence: what the parent enumerated within its
            // budget must persist under one more oracle bit and step.
            if let Some(lost) = enumerated[p].iter().find(|x| !w.contains(*x)) {
                return Err(CoverError::ContractViolation(format!(
                    "{lost} enumerated under {} but not under {tau}",
                    tau.prefix(tau.len() - 1)
                )));
            }
        }
        let members: Vec<PartialString> = w.iter().map(PartialString::from).collect();
        let span = w.iter().map(|x| x.len()).max().unwrap_or(0);
        let measure = measure_union_exact(&members, span)?;
        let mut acc = parent.map(|p| qualified[p].clone()).unwrap_or_default();
        if measure <= bound {
            acc.extend(w.iter().filter(|x| x.len() <= s).cloned());
        }
        if tau.len() == s {
            for witness in &acc {
                for extension in extensions_to_length(witness, s) {
                    let pair = BitString::interleave(&extension, &tau)
                        .expect("extension and tau share length s");
                    cover.insert(pair);
                }
            }
        }
        enumerated.push(w);
        qualified.push(acc);
    }
    Ok(cover)
}

/// All length-`s` extensions of `witness` (itself included when already of
/// length `s`).
fn extensions_to_length(witness: &BitString, s: usize) -> Vec<BitString> {
    let missing = s - witness.len();
    let mut out = Vec::with_capacity(1 << missing);
    for word in 0u64..(1 << missing) {
        let mut extended = witness.clone();
        for b in (0..missing).rev() {
            extended.push(word >> b & 1 == 1);
        }
        out.push(extended);
    }
    out
}

/// The largest budget `r ≤ |tau|` at which the enumerated set still
/// measures at most `2^-i`; `r = 0` always qualifies.
pub fn t_of_tau<E: TestEnumerator + ?Sized>(
    enumerator: &E,
    tau: &BitString,
    i: usize,
) -> usize {
    let bound = Dyadic::pow2_neg(i as u64);
    (0..=tau.len())
        .rev()
        .find(|&r| {
            let w = enumerator.enumerate(tau, r);
            let members: Vec<PartialString> = w.iter().map(PartialString::from).collect();
            let span = w.iter().map(|x| x.len()).max().unwrap_or(0);
            let measure = measure_union_exact(&members, span)
                .expect("enumerated strings fit the brute-force span");
            measure <= bound
        })
        // Budget 0 enumerates nothing under the contract; a non-conforming
        // enumerator still gets a well-defined answer.
        .unwrap_or(0)
}

/// Per-`tau` provenance of [`build_cover_main`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TauRecord {
    pub tau: BitString,
    /// The qualifying budget `t(tau)`.
    pub t_budget: usize,
    /// Sources that reconstruct: `sigma` of length ≤ `sigma_bound` with an
    /// enumerated prefix under budget `t(tau)` and convergent
    /// reconstruction.
    pub b_tau: Vec<BitString>,
    /// The newly initial strings among the sources: those with no proper
    /// prefix in any `b_tau'` for `tau' ⊑ tau`, and not themselves present
    /// in an earlier `b_tau'`. Each source contributes to exactly one
    /// record along any chain.
    pub b_star_tau: Vec<BitString>,
}

/// Result of [`build_cover_main`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MainCover {
    /// Reconstructions from the initial strings, pooled over all `tau`.
    pub members: PrefixSet,
    /// One record per `tau` of length ≤ `s`, in length-then-value order.
    pub per_tau: Vec<TauRecord>,
    pub i: usize,
    pub s: usize,
    pub sigma_bound: usize,
}

/// Builds the direct cover: for every oracle prefix `tau` of length ≤ `s`,
/// reconstructs from every `sigma` (≤ `sigma_bound` bits) that extends an
/// enumerated string under the qualifying budget `t(tau)`, thins each batch
/// to the newly initial strings, and pools the reconstructions.
///
/// Checked guarantees, violations reported as errors: along every `tau`
/// chain the initial strings form a prefix-free family whose total measure
/// stays within `2^-i`; the enumeration behaves contract-consistently
/// (budgets `t` nondecreasing, enumerated sets nested along the chain).
pub fn build_cover_main<E: TestEnumerator + ?Sized>(
    enumerator: &E,
    rule: &SelectionRule,
    i: usize,
    s: usize,
    sigma_bound: usize,
) -> Result<MainCover, CoverError> {
    if rule.kind() != RuleKind::Bounded {
        return Err(CoverError::RuleNotBounded(rule.name()));
    }
    let estimate = (s as u128) * (1u128 << s) * (1u128 << sigma_bound);
    if estimate > MAIN_COVER_WORK_LIMIT {
        return Err(CoverError::BudgetOverflow {
            estimate,
            limit: MAIN_COVER_WORK_LIMIT,
        });
    }
    if !enumerator.enumerate(&BitString::new(), 0).is_empty() {
        return Err(CoverError::ContractViolation(
            "budget 0 must enumerate nothing".into(),
        ));
    }

    let bound = Dyadic::pow2_neg(i as u64);
    let mut members = BTreeSet::new();
    let mut per_tau = Vec::new();
    // Per-node accumulators along the tau tree, indexed by rank.
    let mut budgets: Vec<usize> = Vec::new();
    let mut enumerated: Vec<BTreeSet<BitString>> = Vec::new();
    let mut all_sources: Vec<BTreeSet<BitString>> = Vec::new();
    let mut initial_sources: Vec<BTreeSet<BitString>> = Vec::new();
    let mut initial_mass: Vec<Dyadic> = Vec::new();

    for tau in strings_up_to_length(s) {
        let parent = (!tau.is_empty()).then(|| tau.prefix(tau.len() - 1).rank() as usize);
        let t_budget = t_of_tau(enumerator, &tau, i);
        if let Some(p) = parent {
            if budgets[p] > t_budget {
                return Err(CoverError::ContractViolation(format!(
                    "qualifying budget dropped from {} at {} to {t_budget} at {tau}",
                    budgets[p],
                    tau.prefix(tau.len() - 1)
                )));
            }
        }
        let w = enumerator.enumerate(&tau, t_budget);
        if let Some(p) = parent {
            if let Some(lost) = enumerated[p].iter().find(|x| !w.contains(*x)) {
                return Err(CoverError::ContractViolation(format!(
                    "{lost} enumerated under {} but not under {tau}",
                    tau.prefix(tau.len() - 1)
                )));
            }
        }

        // B(tau): witnessed, convergent sources; cache their
        // reconstructions for the member pool.
        let mut b_tau: BTreeSet<BitString> = BTreeSet::new();
        let mut alphas: BTreeMap<BitString, PartialString> = BTreeMap::new();
        for sigma in strings_up_to_length(sigma_bound) {
            let witnessed = (0..=sigma.len()).any(|j| w.contains(&sigma.prefix(j)));
            if !witnessed {
                continue;
            }
            let run = reconstruct(rule, &sigma, &tau, default_stage_limit(&sigma, &tau));
            if let Some(alpha) = run.result() {
                alphas.insert(sigma.clone(), alpha.clone());
                b_tau.insert(sigma);
            }
        }

        let inherited: BTreeSet<BitString> =
            parent.map(|p| all_sources[p].clone()).unwrap_or_default();
        let mut acc_sources = inherited.clone();
        acc_sources.extend(b_tau.iter().cloned());
        // Initial strings that appear here for the first time: no proper
        // prefix anywhere along the chain (today's batch included), and not
        // already a source at a shorter tau. A re-converging source would
        // otherwise be charged twice against the mass bound.
        let b_star: BTreeSet<BitString> = b_tau
            .iter()
            .filter(|sigma| {
                !inherited.contains(*sigma)
                    && !(0..sigma.len()).any(|j| acc_sources.contains(&sigma.prefix(j)))
            })
            .cloned()
            .collect();

        // Prefix-freeness along the chain: a fresh initial string may not
        // extend, nor be extended by, an inherited one. The "extends"
        // direction is already ruled out by the initial-string filter.
        let mut acc_initial: BTreeSet<BitString> =
            parent.map(|p| initial_sources[p].clone()).unwrap_or_default();
        for sigma in &b_star {
            if let Some(ext) = acc_initial
                .range(sigma.clone()..)
                .take_while(|x| sigma.is_prefix_of(x))
                .find(|x| *x != sigma)
            {
                return Err(CoverError::GuaranteeViolated(format!(
                    "initial strings not prefix-free: {sigma} at {tau} is a prefix of {ext}"
                )));
            }
        }
        acc_initial.extend(b_star.iter().cloned());
        let mass = parent
            .map(|p| initial_mass[p].clone())
            .unwrap_or_else(Dyadic::zero)
            + b_star
                .iter()
                .map(|sigma| Dyadic::pow2_neg(sigma.len() as u64))
                .sum();
        if mass > bound {
            return Err(CoverError::GuaranteeViolated(format!(
                "initial-string mass {mass} along {tau} exceeds {bound}"
            )));
        }

        for sigma in &b_star {
            members.insert(alphas[sigma].clone());
        }
        per_tau.push(TauRecord {
            tau: tau.clone(),
            t_budget,
            b_tau: b_tau.iter().cloned().collect(),
            b_star_tau: b_star.iter().cloned().collect(),
        });
        budgets.push(t_budget);
        enumerated.push(w);
        all_sources.push(acc_sources);
        initial_sources.push(acc_initial);
        initial_mass.push(mass);
    }

    Ok(MainCover {
        members: PrefixSet::new(members),
        per_tau,
        i,
        s,
        sigma_bound,
    })
}

/// Exact check that the cover's union measures at most `2^-i` within
/// `span`.
pub fn verify_cover_bound(
    cover: &PrefixSet,
    i: usize,
    span: usize,
) -> Result<bool, CoverError> {
    let measure = measure_union_exact(cover.members(), span)?;
    Ok(measure <= Dyadic::pow2_neg(i as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::RuleSpec;

    fn rule(text: &str) -> SelectionRule {
        text.parse::<RuleSpec>().unwrap().build().unwrap()
    }

    fn bits(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn partial(s: &str) -> PartialString {
        s.parse().unwrap()
    }

    fn partials(texts: &[&str]) -> Vec<PartialString> {
        texts.iter().map(|t| partial(t)).collect()
    }

    fn table(json: &str) -> TableEnumerator {
        TableEnumerator::from_json(json).unwrap()
    }

    fn dy(num: u64, exp: u64) -> Dyadic {
        Dyadic::new(num, exp)
    }

    #[test]
    fn disjoint_measures_are_plain_sums() {
        let halves = PrefixSet::disjoint(partials(&["0", "1"])).unwrap();
        assert_eq!(measure_disjoint(&halves).unwrap(), Dyadic::one());

        let mixed = PrefixSet::disjoint(partials(&["00", "01", "1"])).unwrap();
        assert_eq!(measure_disjoint(&mixed).unwrap(), Dyadic::one());

        // Gappy strings: "1_0" and "0__1" clash at bit 0, so they are
        // incompatible, and each defines two bits.
        let gappy = PrefixSet::disjoint(partials(&["1_0", "0__1"])).unwrap();
        assert_eq!(measure_disjoint(&gappy).unwrap(), dy(1, 1));
        assert_eq!(
            measure_union_exact(gappy.members(), 4).unwrap(),
            dy(1, 1),
            "the brute-force union agrees on a disjoint set"
        );
    }

    #[test]
    fn compatible_members_are_rejected() {
        let err = PrefixSet::disjoint(partials(&["1", "10"])).unwrap_err();
        assert_eq!(err, CoverError::NotDisjoint { a: "1".into(), b: "10".into() });

        let unasserted = PrefixSet::new(partials(&["0", "1"]));
        assert_eq!(
            measure_disjoint(&unasserted),
            Err(CoverError::DisjointnessNotAsserted)
        );
    }

    #[test]
    fn union_measure_examples() {
        assert_eq!(
            measure_union_exact(std::iter::empty::<&PartialString>(), 3).unwrap(),
            Dyadic::zero()
        );
        let everything = partial("");
        assert_eq!(
            measure_union_exact([&everything], 0).unwrap(),
            Dyadic::one()
        );

        // "_1" covers {01,11} and "1_" covers {10,11}: three points of four.
        let overlapping = partials(&["_1", "1_"]);
        assert_eq!(measure_union_exact(&overlapping, 2).unwrap(), dy(3, 2));
        let crossed = partials(&["0_", "_0"]);
        assert_eq!(measure_union_exact(&crossed, 2).unwrap(), dy(3, 2));

        // Duplicates cost nothing.
        let one = partial("1");
        assert_eq!(measure_union_exact([&one, &one], 1).unwrap(), dy(1, 1));
        // Padding the span leaves the measure alone.
        assert_eq!(measure_union_exact([&one, &one], 5).unwrap(), dy(1, 1));
    }

    #[test]
    fn union_measure_rejects_bad_spans() {
        let any = partial("1");
        assert_eq!(
            measure_union_exact([&any], 25),
            Err(CoverError::SpanTooLarge { span: 25 })
        );
        let wide = partial("001");
        assert_eq!(
            measure_union_exact([&wide], 2),
            Err(CoverError::BitOutsideSpan { position: 2, span: 2 })
        );
    }

    #[test]
    fn union_agrees_with_inclusion_exclusion_on_pairs() {
        let mut rng = SplitMix64::new(0xc07e_7a11);
        for _ in 0..200 {
            let mut draw = |max_len: usize| -> PartialString {
                let len = (rng.next_u64() % (max_len as u64 + 1)) as usize;
                PartialString::from_symbols(
                    (0..len)
                        .map(|_| match rng.next_u64() % 3 {
                            0 => None,
                            1 => Some(false),
                            _ => Some(true),
                        })
                        .collect(),
                )
            };
            let a = draw(8);
            let b = draw(8);
            let span = a.span().max(b.span());
            let both = if a.compatible_with(&b) {
                // The joint cylinder constrains every position defined in
                // either string.
                let shared = (0..span)
                    .filter(|&x| a.get(x).is_some() && b.get(x).is_some())
                    .count();
                Dyadic::pow2_neg((a.defined_count() + b.defined_count() - shared) as u64)
            } else {
                Dyadic::zero()
            };
            let expected = (a.measure() + b.measure())
                .checked_sub(&both)
                .expect("inclusion-exclusion never goes negative");
            assert_eq!(measure_union_exact([&a, &b], span).unwrap(), expected);
        }
    }

    #[test]
    fn counting_worked_example() {
        let f = BTreeMap::from([
            (bits(""), dy(1, 1)),
            (bits("0"), dy(1, 1)),
            (bits("1"), dy(1, 2)),
        ]);
        let check = check_counting(&f, &Dyadic::one(), 1).unwrap();
        assert!(check.holds);
        // 1/2 + (1/2)(1/2) + (1/2)(1/4) = 7/8.
        assert_eq!(check.lhs, dy(7, 3));
    }

    #[test]
    fn counting_zero_and_equality_cases() {
        let zero: BTreeMap<BitString, Dyadic> =
            strings_up_to_length(3).map(|t| (t, Dyadic::zero())).collect();
        let check = check_counting(&zero, &Dyadic::zero(), 3).unwrap();
        assert!(check.holds);
        assert_eq!(check.lhs, Dyadic::zero());

        // Constant f = 1/4 on depth 2: every branch sums to exactly c = 3/4,
        // and the weighted total also lands exactly on c.
        let quarter: BTreeMap<BitString, Dyadic> =
            strings_up_to_length(2).map(|t| (t, dy(1, 2))).collect();
        let c = dy(3, 2);
        let check = check_counting(&quarter, &c, 2).unwrap();
        assert!(check.holds);
        assert_eq!(check.lhs, c);

        // Same shape at depth 8: f = 1/256, c = 9/256.
        let fine: BTreeMap<BitString, Dyadic> =
            strings_up_to_length(8).map(|t| (t, dy(1, 8))).collect();
        let c = dy(9, 8);
        let check = check_counting(&fine, &c, 8).unwrap();
        assert!(check.holds);
        assert_eq!(check.lhs, c);
    }

    #[test]
    fn counting_flags_violations_and_gaps() {
        let c = dy(1, 2);
        let f = BTreeMap::from([
            (bits(""), dy(1, 2)),
            (bits("0"), dy(1, 2)),
            (bits("1"), Dyadic::zero()),
        ]);
        let check = check_counting(&f, &c, 1).unwrap();
        assert!(!check.holds, "the 0-branch sums to 1 > 1/4");
        assert_eq!(check.lhs, dy(3, 3));

        let mut gappy = f.clone();
        gappy.remove(&bits("1"));
        assert_eq!(
            check_counting(&gappy, &c, 1),
            Err(CoverError::MissingBranchValue("1".into()))
        );
    }

    #[test]
    fn random_branch_functions_satisfy_the_hypothesis() {
        let c = dy(3, 3);
        for seed in 0..25 {
            let f = random_branch_function(seed, 5, &c);
            let check = check_counting(&f, &c, 5).unwrap();
            assert!(check.holds, "seed {seed} broke the branch bound");
            assert!(check.lhs <= c, "seed {seed} broke the weighted bound");
        }
        // A zero budget forces the all-zero function.
        let f = random_branch_function(9, 3, &Dyadic::zero());
        assert!(f.values().all(|v| *v == Dyadic::zero()));
    }

    #[test]
    fn transfer_keeps_source_bits_in_place() {
        // skip-on-one keeps every examined bit: the source lands verbatim.
        let out = transfer_cover_subseq(&rule("skip-on-one"), &[bits("1")].into(), 8);
        assert_eq!(out.sources[0].emitted, partials(&["1"]).into_iter().collect());
        assert_eq!(out.sources[0].emitted_measure(), dy(1, 1));
        assert_eq!(out.incomplete(), 0);

        // pair-swap reads position 1 first and keeps it.
        let out = transfer_cover_subseq(&rule("pair-swap"), &[bits("1")].into(), 8);
        assert_eq!(out.sources[0].emitted, partials(&["_1"]).into_iter().collect());
        assert_eq!(out.sources[0].emitted_measure(), dy(1, 1));

        // mc-mask:1 keeps everything in order.
        let out = transfer_cover_subseq(&rule("mc-mask:1"), &[bits("10")].into(), 8);
        assert_eq!(out.sources[0].emitted, partials(&["10"]).into_iter().collect());
        assert_eq!(out.sources[0].emitted_measure(), dy(1, 2));
    }

    #[test]
    fn transfer_splits_on_unkept_positions() {
        // pair-swap on source 11: position 1 takes the first source bit,
        // position 0 is examined but not kept (both values branch), and
        // position 3 takes the second source bit.
        let out = transfer_cover_subseq(&rule("pair-swap"), &[bits("11")].into(), 8);
        let st = &out.sources[0];
        assert_eq!(st.emitted, partials(&["01_1", "11_1"]).into_iter().collect());
        assert_eq!(st.emitted_measure(), dy(1, 2));
        assert_eq!(st.incomplete, 0);
        assert!(st.meets_source_bound());
        assert!(PrefixSet::disjoint(st.emitted.iter().cloned()).is_ok());
    }

    #[test]
    fn transfer_depth_limit_drops_branches() {
        let out = transfer_cover_subseq(&rule("pair-swap"), &[bits("11")].into(), 1);
        let st = &out.sources[0];
        assert!(st.emitted.is_empty());
        assert_eq!(st.incomplete, 1);
        assert!(st.warnings[0].contains("depth limit"));
        // The bound is a one-sided guarantee: dropping branches only
        // shrinks the emitted measure.
        assert!(st.meets_source_bound());
    }

    #[test]
    fn transfer_handles_general_and_diverging_rules() {
        // A general rule without thresholds: keep on even history lengths.
        let every_other = SelectionRule::general(
            "every-other",
            |xi: &BitString| Some(xi.len()),
            |xi: &BitString| Some(xi.len().is_multiple_of(2)),
        );
        let out = transfer_cover_subseq(&every_other, &[bits("00")].into(), 8);
        let st = &out.sources[0];
        assert_eq!(st.emitted, partials(&["000", "010"]).into_iter().collect());
        assert_eq!(st.emitted_measure(), dy(1, 2));
        assert_eq!(st.incomplete, 0);

        let one_step = SelectionRule::general(
            "one-step",
            |xi: &BitString| xi.is_empty().then_some(0),
            |_: &BitString| Some(false),
        );
        let out = transfer_cover_subseq(&one_step, &[bits("1")].into(), 8);
        let st = &out.sources[0];
        assert!(st.emitted.is_empty());
        assert_eq!(st.incomplete, 2);
        assert!(st.warnings.iter().all(|w| w.contains("rule divergence")));

        let stuck = SelectionRule::general(
            "stuck-at-zero",
            |_: &BitString| Some(0),
            |_: &BitString| Some(false),
        );
        let out = transfer_cover_subseq(&stuck, &[bits("1")].into(), 8);
        let st = &out.sources[0];
        assert_eq!(st.incomplete, 2);
        assert!(st.warnings.iter().all(|w| w.contains("re-examining position 0")));
    }

    #[test]
    fn transfer_respects_the_per_source_bound() {
        let rules = [
            rule("pair-swap"),
            rule("mc-mask:10110"),
            rule("skip-on-one"),
            rule("threshold-ones:2"),
        ];
        let mut rng = SplitMix64::new(0x7a45);
        for trial in 0..30 {
            let cover: BTreeSet<BitString> = (0..=rng.next_u64() % 4)
                .map(|_| {
                    let len = (rng.next_u64() % 6) as usize;
                    (0..len).map(|_| rng.next_u64() % 2 == 1).collect()
                })
                .collect();
            for r in &rules {
                let out = transfer_cover_subseq(r, &cover, 10);
                for st in &out.sources {
                    assert!(
                        st.meets_source_bound(),
                        "{r} trial {trial}: source {} exceeded its bound",
                        st.source
                    );
                    if st.incomplete == 0 {
                        assert_eq!(
                            st.emitted_measure(),
                            Dyadic::pow2_neg(st.source.len() as u64),
                            "{r} trial {trial}: complete transfer must hit the bound"
                        );
                    }
                    if st.emitted.len() <= 128 {
                        assert!(
                            PrefixSet::disjoint(st.emitted.iter().cloned()).is_ok(),
                            "{r} trial {trial}: branches must be incompatible"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn empty_enumerator_yields_empty_pair_cover() {
        let cover = build_cover_pair(&table("[]"), 0, 3).unwrap();
        assert!(cover.is_empty());
    }

    #[test]
    fn pair_cover_worked_example() {
        // One witness "0" available under every nonempty tau at budget ≥ 1.
        // Its measure 1/2 passes the i = 1 guard, so every pair whose first
        // half starts with 0 enters: exactly the even-position-0 cylinder.
        let t = table(r#"[{"tau_prefix":"","step":1,"emit":["0"]}]"#);
        let cover = build_cover_pair(&t, 1, 2).unwrap();
        let expected: BTreeSet<BitString> = [
            "0000", "0001", "0010", "0011", "0100", "0101", "0110", "0111",
        ]
        .iter()
        .map(|s| bits(s))
        .collect();
        assert_eq!(cover, expected);
        let members: Vec<PartialString> = cover.iter().map(PartialString::from).collect();
        assert_eq!(measure_union_exact(&members, 4).unwrap(), dy(1, 1));
    }

    #[test]
    fn pair_cover_obeys_the_measure_guard() {
        let t = table(r#"[{"tau_prefix":"","step":1,"emit":["0","1"]}]"#);
        // {"0","1"} measures 1 > 1/2: nothing qualifies at i = 1.
        assert!(build_cover_pair(&t, 1, 2).unwrap().is_empty());
        // At i = 0 the guard is vacuous and every pair enters.
        let cover = build_cover_pair(&t, 0, 2).unwrap();
        assert_eq!(cover.len(), 16);
    }

    struct EmitsAtZero;

    impl TestEnumerator for EmitsAtZero {
        fn enumerate(&self, _tau: &BitString, _steps: usize) -> BTreeSet<BitString> {
            [bits("0")].into()
        }
    }

    struct ForgetsBelowTwo;

    impl TestEnumerator for ForgetsBelowTwo {
        fn enumerate(&self, tau: &BitString, steps: usize) -> BTreeSet<BitString> {
            if tau.len() == 1 && steps >= 1 {
                [bits("1")].into()
            } else {
                BTreeSet::new()
            }
        }
    }

    #[test]
    fn pair_cover_rejects_contract_violations() {
        assert!(matches!(
            build_cover_pair(&EmitsAtZero, 1, 2),
            Err(CoverError::ContractViolation(_))
        ));
        assert!(matches!(
            build_cover_pair(&ForgetsBelowTwo, 1, 2),
            Err(CoverError::ContractViolation(_))
        ));
    }

    #[test]
    fn pair_cover_measure_bound_property() {
        for seed in 0..40 {
            let t = random_enumerator(seed, 4, 4, 3, None);
            for i in 1..=4 {
                let cover = build_cover_pair(&t, i, 4).unwrap();
                let members: Vec<PartialString> =
                    cover.iter().map(PartialString::from).collect();
                let measure = measure_union_exact(&members, 8).unwrap();
                assert!(
                    measure <= Dyadic::pow2_neg(i as u64),
                    "seed {seed}, i = {i}: cover measures {measure}"
                );
            }
        }
    }

    #[test]
    fn qualifying_budget_examples() {
        let empty = table("[]");
        assert_eq!(t_of_tau(&empty, &bits("1011"), 3), 4);
        assert_eq!(t_of_tau(&empty, &bits(""), 3), 0);

        // "0" appears from step 1 and measures 1/2 > 1/4: only budget 0
        // stays under the bound.
        let half = table(r#"[{"tau_prefix":"","step":1,"emit":["0"]}]"#);
        assert_eq!(t_of_tau(&half, &bits("101"), 2), 0);

        // "000" measures 1/8 ≤ 1/8, so the full budget qualifies.
        let eighth = table(r#"[{"tau_prefix":"","step":2,"emit":["000"]}]"#);
        assert_eq!(t_of_tau(&eighth, &bits("0110"), 3), 4);
    }

    #[test]
    fn empty_enumerator_yields_empty_main_cover() {
        let cover = build_cover_main(&table("[]"), &rule("pair-swap"), 2, 3, 3).unwrap();
        assert!(cover.members.is_empty());
        assert_eq!(cover.per_tau.len(), 15);
        for record in &cover.per_tau {
            assert_eq!(record.t_budget, record.tau.len());
            assert!(record.b_tau.is_empty());
            assert!(record.b_star_tau.is_empty());
        }
        assert!(verify_cover_bound(&cover.members, 2, 0).unwrap());
    }

    #[test]
    fn main_cover_worked_example() {
        // Witness "1" under every nonempty tau. Under pair-swap, the kept
        // bits sit at odd positions and the unkept odd-stage reads pull
        // source bits for the even positions:
        //   sigma = "1",  tau = "0"  reconstructs "10"
        //   sigma = "10", tau = "00" reconstructs "1000", and so on.
        // Only sigma = "1" converges at depth 1; its extensions take over
        // at depth 2 but are no longer initial, so the member pool is the
        // two depth-1 reconstructions.
        let t = table(r#"[{"tau_prefix":"","step":1,"emit":["1"]}]"#);
        let cover = build_cover_main(&t, &rule("pair-swap"), 1, 2, 3).unwrap();

        let expected: BTreeSet<PartialString> =
            partials(&["10", "11"]).into_iter().collect();
        assert_eq!(cover.members.members(), &expected);

        for record in &cover.per_tau {
            assert_eq!(record.t_budget, record.tau.len());
            match record.tau.len() {
                0 => {
                    assert!(record.b_tau.is_empty());
                }
                1 => {
                    assert_eq!(record.b_tau, vec![bits("1")]);
                    assert_eq!(record.b_star_tau, vec![bits("1")]);
                }
                _ => {
                    assert_eq!(record.b_tau, vec![bits("10"), bits("11")]);
                    assert!(record.b_star_tau.is_empty());
                }
            }
        }
        assert_eq!(
            measure_union_exact(cover.members.members(), 2).unwrap(),
            dy(1, 1)
        );
        assert!(verify_cover_bound(&cover.members, 1, cover.members.span()).unwrap());
    }

    #[test]
    fn keep_everything_rule_reconverges_without_double_charge() {
        // mc-mask:1 keeps every bit, so the empty source reconstructs under
        // every tau. It must be charged against the mass bound only at its
        // first appearance, or a two-level chain would already cost 2 > 2^0.
        let t = table(r#"[{"tau_prefix":"","step":1,"emit":[""]}]"#);
        let cover = build_cover_main(&t, &rule("mc-mask:1"), 0, 2, 2).unwrap();
        let expected: BTreeSet<PartialString> = partials(&["0", "1"]).into_iter().collect();
        assert_eq!(cover.members.members(), &expected);
        for record in &cover.per_tau {
            match record.tau.len() {
                0 => assert!(record.b_tau.is_empty()),
                1 => {
                    assert_eq!(record.b_star_tau, vec![bits("")]);
                }
                _ => {
                    assert!(record.b_tau.contains(&bits("")));
                    assert!(record.b_star_tau.is_empty());
                }
            }
        }
        assert!(verify_cover_bound(&cover.members, 0, cover.members.span()).unwrap());
    }

    #[test]
    fn main_cover_rejects_oversized_work_and_general_rules() {
        let t = table("[]");
        assert!(matches!(
            build_cover_main(&t, &rule("pair-swap"), 1, 12, 12),
            Err(CoverError::BudgetOverflow { .. })
        ));
        let general = SelectionRule::general(
            "free",
            |xi: &BitString| Some(xi.len()),
            |_: &BitString| Some(true),
        );
        assert_eq!(
            build_cover_main(&t, &general, 1, 2, 2),
            Err(CoverError::RuleNotBounded("free".into()))
        );
    }

    #[test]
    fn main_cover_members_cover_every_source_reconstruction() {
        // Random conforming enumerators: the pooled initial reconstructions
        // must have the same union as the reconstructions of all sources,
        // and stay within the 2^-i bound.
        let rules = [rule("pair-swap"), rule("mc-mask:10"), rule("skip-on-one")];
        for seed in 0..12 {
            let t = random_enumerator(seed, 3, 3, 4, None);
            for r in &rules {
                let cover = build_cover_main(&t, r, 2, 3, 3)
                    .unwrap_or_else(|e| panic!("seed {seed}, {r}: {e}"));
                let mut all_alphas: BTreeSet<PartialString> = BTreeSet::new();
                for record in &cover.per_tau {
                    for sigma in &record.b_tau {
                        let run = reconstruct(
                            r,
                            sigma,
                            &record.tau,
                            default_stage_limit(sigma, &record.tau),
                        );
                        let alpha = run
                            .result()
                            .expect("sources are convergent by construction");
                        all_alphas.insert(alpha.clone());
                    }
                    let stars: BTreeSet<&BitString> = record.b_star_tau.iter().collect();
                    assert!(
                        record.b_tau.iter().collect::<BTreeSet<_>>().is_superset(&stars)
                    );
                }
                let span = cover
                    .members
                    .span()
                    .max(all_alphas.iter().map(|a| a.span()).max().unwrap_or(0));
                let pooled = measure_union_exact(cover.members.members(), span).unwrap();
                let full = measure_union_exact(&all_alphas, span).unwrap();
                assert_eq!(
                    pooled, full,
                    "seed {seed}, {r}: dropping non-initial sources changed the union"
                );
                assert!(verify_cover_bound(&cover.members, 2, span).unwrap());
            }
        }
    }

    #[test]
    fn trivial_cover_bounds() {
        let empty = PrefixSet::new(std::iter::empty());
        assert!(verify_cover_bound(&empty, 5, 0).unwrap());
        let everything = PrefixSet::new([partial("")]);
        assert!(verify_cover_bound(&everything, 0, 0).unwrap());
        assert!(!verify_cover_bound(&everything, 1, 0).unwrap());
        assert_eq!(PrefixSet::new([partial("1_0")]).span(), 3);
    }
}
