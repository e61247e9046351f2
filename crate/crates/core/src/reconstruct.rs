//! Rebuilding an input prefix from the two halves a selection run leaves
//! behind.
//!
//! A bounded rule examining a stream splits the window below its final
//! threshold into the kept bits (in examination order) and everything else
//! (in position order). [`reconstruct`] runs the rule "in reverse": given a
//! non-kept prefix `sigma` and a kept prefix `tau` it replays the rule,
//! deciding at every stage whether the next examined position lands below
//! the current threshold (its value is already pinned down, possibly by a
//! `sigma` bit) or at/above it (it consumes the next `tau` bit). When the
//! bookkeeping comes out exact the result is a partial string that matches
//! the original input on `|sigma| + |tau|` positions.
//!
//! [`audit_reconstruction`] checks the properties that make this useful:
//! reconstruction from genuine checkpoint pairs always converges, lands
//! inside the input, defines exactly as many positions as bits were
//! supplied, grows monotonically along checkpoints, and fails for every
//! shortened-`sigma`/extended-`tau` perturbation — the exclusivity that
//! makes reconstructed sets prefix-free.

use crate::bitseq::{BitString, PartialString};
use crate::engine::{self, StopReason};
use crate::rules::{RuleKind, SelectionRule};

/// Why a reconstruction attempt failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceReason {
    /// `sigma` has fewer bits than there are undefined positions below the
    /// threshold.
    SigmaShort,
    /// The rule wanted another kept bit but `tau` was spent.
    TauExhausted,
    /// The rule's position or threshold function diverged.
    RuleDivergence,
    /// The stage limit ran out before termination.
    StageLimit,
}

impl std::fmt::Display for DivergenceReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DivergenceReason::SigmaShort => "sigma-short",
            DivergenceReason::TauExhausted => "tau-exhausted",
            DivergenceReason::RuleDivergence => "rule-divergence",
            DivergenceReason::StageLimit => "stage-limit",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReconstructionOutcome {
    Converged(PartialString),
    Diverged(DivergenceReason),
}

/// Result of [`reconstruct`], including how much of each input string the
/// stages actually read. Both strings are consumed strictly left to right,
/// so truncating past the `*_used` marks cannot change the stages that ran.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reconstruction {
    pub outcome: ReconstructionOutcome,
    pub stages_used: usize,
    pub sigma_used: usize,
    pub tau_used: usize,
}

impl Reconstruction {
    pub fn converged(&self) -> bool {
        matches!(self.outcome, ReconstructionOutcome::Converged(_))
    }

    pub fn result(&self) -> Option<&PartialString> {
        match &self.outcome {
            ReconstructionOutcome::Converged(alpha) => Some(alpha),
            ReconstructionOutcome::Diverged(_) => None,
        }
    }

    pub fn divergence(&self) -> Option<DivergenceReason> {
        match &self.outcome {
            ReconstructionOutcome::Converged(_) => None,
            ReconstructionOutcome::Diverged(reason) => Some(*reason),
        }
    }
}

/// What one dispatched stage did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageAction {
    /// The next position fell below the threshold; its value was read back
    /// from the partial reconstruction (or the `sigma` bit destined for it).
    ReadBack { position: usize, bit: bool },
    /// The next position was at or above the threshold; the next `tau` bit
    /// was placed there.
    PlaceKept { position: usize, bit: bool },
}

/// Stage log entry: the threshold, the count of undefined positions below
/// it, and the action taken. The terminating or diverging stage produces no
/// entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageRecord {
    pub threshold: usize,
    pub undefined_below: usize,
    pub action: StageAction,
}

/// Default stage budget. Each stage either consumes a `tau` bit or reads a
/// position the rule has not revisited, so a linear allowance is generous
/// for every built-in rule; callers with exotic custom rules can raise it.
pub fn default_stage_limit(sigma: &BitString, tau: &BitString) -> usize {
    4 * (sigma.len() + tau.len()) + 8
}

/// Runs the reconstruction stages for a bounded rule.
///
/// Stage anatomy: evaluate the threshold `h`, count the undefined positions
/// `u` below `h`, and stop with `sigma` exactly filling those positions once
/// `tau` is fully placed (`|sigma| = u` and `|tau| = t`). Otherwise evaluate
/// the next position `F`: below `h` the examined value is read back, at or
/// above `h` the next `tau` bit is placed at `F`.
///
/// # Panics
///
/// If `rule` is not of bounded kind — without a threshold there is nothing
/// to reconstruct against.
pub fn reconstruct(
    rule: &SelectionRule,
    sigma: &BitString,
    tau: &BitString,
    max_stages: usize,
) -> Reconstruction {
    run_stages(rule, sigma, tau, max_stages, None)
}

/// Like [`reconstruct`], also returning the stage log.
pub fn reconstruct_traced(
    rule: &SelectionRule,
    sigma: &BitString,
    tau: &BitString,
    max_stages: usize,
) -> (Reconstruction, Vec<StageRecord>) {
    let mut log = Vec::new();
    let outcome = run_stages(rule, sigma, tau, max_stages, Some(&mut log));
    (outcome, log)
}

fn run_stages(
    rule: &SelectionRule,
    sigma: &BitString,
    tau: &BitString,
    max_stages: usize,
    mut log: Option<&mut Vec<StageRecord>>,
) -> Reconstruction {
    assert_eq!(
        rule.kind(),
        RuleKind::Bounded,
        "reconstruction is defined only for bounded rules"
    );
    let mut cursor = rule.cursor();
    let mut alpha: Vec<Option<bool>> = Vec::new();
    // Undefined positions ever seen below the threshold, in increasing
    // order. Kept bits are only ever placed at or above the current
    // threshold, so entries never need to be removed, and the first `u` of
    // them are exactly the undefined positions below the current threshold.
    let mut undefined: Vec<usize> = Vec::new();
    let mut scanned = 0usize; // prefix of positions already classified
    let mut t = 0usize; // tau bits placed
    let mut sigma_used = 0usize;
    let mut stages = 0usize;

    let diverged = |reason, stages, sigma_used, t| Reconstruction {
        outcome: ReconstructionOutcome::Diverged(reason),
        stages_used: stages,
        sigma_used,
        tau_used: t,
    };

    loop {
        if stages == max_stages {
            return diverged(DivergenceReason::StageLimit, stages, sigma_used, t);
        }
        stages += 1;

        let Some(h) = cursor.threshold() else {
            return diverged(DivergenceReason::RuleDivergence, stages, sigma_used, t);
        };
        if h > scanned {
            undefined.extend(
                (scanned..h).filter(|&j| alpha.get(j).copied().flatten().is_none()),
            );
            scanned = h;
        }
        let u = undefined.partition_point(|&j| j < h);
        sigma_used = sigma_used.max(u.min(sigma.len()));

        if sigma.len() < u {
            return diverged(DivergenceReason::SigmaShort, stages, sigma_used, t);
        }
        if sigma.len() == u && tau.len() == t {
            let alpha = PartialString::from_symbols(alpha).insert(sigma);
            debug_assert_eq!(alpha.defined_count(), sigma.len() + tau.len());
            return Reconstruction {
                outcome: ReconstructionOutcome::Converged(alpha),
                stages_used: stages,
                sigma_used,
                tau_used: t,
            };
        }

        let Some(position) = cursor.next_position() else {
            return diverged(DivergenceReason::RuleDivergence, stages, sigma_used, t);
        };
        let bit;
        if position < h {
            bit = match alpha.get(position).copied().flatten() {
                Some(b) => b,
                // The position is one of the undefined slots below h; its
                // rank among them picks the sigma bit that fills it.
                None => sigma.bit(undefined.partition_point(|&j| j < position)),
            };
            if let Some(log) = log.as_deref_mut() {
                log.push(StageRecord {
                    threshold: h,
                    undefined_below: u,
                    action: StageAction::ReadBack { position, bit },
                });
            }
        } else {
            if t == tau.len() {
                return diverged(DivergenceReason::TauExhausted, stages, sigma_used, t);
            }
            bit = tau.bit(t);
            t += 1;
            if alpha.len() <= position {
                alpha.resize(position + 1, None);
            }
            alpha[position] = Some(bit);
            if let Some(log) = log.as_deref_mut() {
                log.push(StageRecord {
                    threshold: h,
                    undefined_below: u,
                    action: StageAction::PlaceKept { position, bit },
                });
            }
        }
        cursor.advance(bit);
    }
}

/// Extensions of `tau` examined by the exclusivity check carry at most this
/// many extra bits; it exceeds the lookahead of every built-in rule.
pub const EXTENSION_SEARCH_BITS: usize = 8;

/// Tally for one audited property.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CheckOutcome {
    pub checked: usize,
    pub failures: Vec<String>,
}

impl CheckOutcome {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }

    fn note(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failures.push(describe());
        }
    }
}

/// Outcome of [`audit_reconstruction`]: five properties of reconstruction
/// from checkpoint pairs, each with its own tally.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReconstructionAudit {
    pub checkpoint_count: usize,
    /// Every checkpoint pair reconstructs successfully.
    pub total: CheckOutcome,
    /// Every reconstruction result is a partial prefix of the input.
    pub faithful: CheckOutcome,
    /// Every result defines exactly `|sigma| + |tau|` positions.
    pub counting: CheckOutcome,
    /// Results at later checkpoints extend results at earlier ones.
    /// Checked on consecutive pairs; prefix order is transitive, so this
    /// covers all pairs.
    pub monotone: CheckOutcome,
    /// No proper prefix of `sigma` together with a proper extension of
    /// `tau` (up to [`EXTENSION_SEARCH_BITS`] extra bits) reconstructs.
    /// Bounded by the caller's search budget.
    pub exclusive: CheckOutcome,
}

impl ReconstructionAudit {
    pub fn all_pass(&self) -> bool {
        self.total.ok()
            && self.faithful.ok()
            && self.counting.ok()
            && self.monotone.ok()
            && self.exclusive.ok()
    }
}

/// Runs `rule` over `input`, reconstructs from every checkpoint, and checks
/// the five properties above. `search_budget` caps the number of
/// reconstruction calls spent on the exclusivity search (0 skips it).
pub fn audit_reconstruction(
    rule: &SelectionRule,
    input: &BitString,
    search_budget: usize,
) -> ReconstructionAudit {
    let trace = engine::run(rule, input, usize::MAX);
    debug_assert_ne!(trace.stop_reason, StopReason::StepLimit);
    let mut audit = ReconstructionAudit {
        checkpoint_count: trace.checkpoint_stages.len(),
        ..ReconstructionAudit::default()
    };

    let mut results: Vec<(BitString, BitString, Option<PartialString>)> = Vec::new();
    for &k in &trace.checkpoint_stages {
        let cp = engine::checkpoint(&trace, k, input)
            .expect("stage listed by the trace is a checkpoint");
        let limit = default_stage_limit(&cp.sigma, &cp.tau);
        let run = reconstruct(rule, &cp.sigma, &cp.tau, limit);
        audit.total.note(run.converged(), || {
            format!(
                "stage {k}: sigma={} tau={} diverged: {}",
                cp.sigma,
                cp.tau,
                run.divergence().expect("diverged")
            )
        });
        if let Some(alpha) = run.result() {
            audit.faithful.note(alpha.is_prefix_of_bits(input), || {
                format!("stage {k}: result {alpha} is not a prefix of the input")
            });
            audit.counting.note(
                alpha.defined_count() == cp.sigma.len() + cp.tau.len(),
                || {
                    format!(
                        "stage {k}: result defines {} positions, supplied {}",
                        alpha.defined_count(),
                        cp.sigma.len() + cp.tau.len()
                    )
                },
            );
        }
        results.push((cp.sigma, cp.tau, run.result().cloned()));
    }

    for window in results.windows(2) {
        let [(s0, t0, a0), (s1, t1, a1)] = window else { unreachable!() };
        if let (Some(a0), Some(a1)) = (a0, a1) {
            audit.monotone.note(
                s0.is_prefix_of(s1) && t0.is_prefix_of(t1) && a0.is_prefix_of(a1),
                || format!("checkpoint result {a0} does not extend to {a1}"),
            );
        }
    }

    let mut budget = search_budget;
    'search: for (sigma, tau, alpha) in &results {
        if alpha.is_none() {
            continue;
        }
        for cut in (0..sigma.len()).rev() {
            let short = sigma.prefix(cut);
            for extra in 1..=EXTENSION_SEARCH_BITS {
                for word in 0..(1u32 << extra) {
                    if budget == 0 {
                        break 'search;
                    }
                    budget -= 1;
                    let mut extended = tau.clone();
                    for b in (0..extra).rev() {
                        extended.push(word >> b & 1 == 1);
                    }
                    let limit = default_stage_limit(&short, &extended);
                    let run = reconstruct(rule, &short, &extended, limit);
                    audit.exclusive.note(!run.converged(), || {
                        format!(
                            "sigma={short} tau={extended} reconstructed despite \
                             shortening sigma ({sigma}) and extending tau ({tau})"
                        )
                    });
                }
            }
        }
    }
    audit
}
