//! Running a selection rule against a concrete input string.
//!
//! [`run`] plays a rule against a finite input until it asks for a position
//! outside the input, repeats a position, diverges, or hits the step limit.
//! The resulting [`SelectionTrace`] records everything the run revealed: the
//! examined positions in order, the examined bits ξ, the keep flags ρ, the
//! kept subsequence `Q* = ξ/ρ`, and — for bounded rules — the settled
//! non-kept window `N = input/B̄` below the final threshold.
//!
//! Bounded rules admit *checkpoints*: stages where the rule examines at or
//! above its own threshold. At such a stage every position below the
//! threshold is settled (the threshold never decreases, and kept positions
//! always sit at or above it), so the pair (σ, τ) of non-kept window and
//! kept prefix extracted there is a faithful fragment of the full run.

use serde::{Deserialize, Serialize};

use crate::bitseq::BitString;
use crate::rules::{RuleKind, SelectionRule};

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// The rule asked for a position at or past the end of the input.
    InputExhausted,
    /// The rule asked for a position it had already examined.
    PositionRepeat,
    /// `F`, `H`, or `G` diverged.
    RuleDivergence,
    /// `max_steps` examinations were made.
    StepLimit,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::InputExhausted => "input-exhausted",
            StopReason::PositionRepeat => "position-repeat",
            StopReason::RuleDivergence => "rule-divergence",
            StopReason::StepLimit => "step-limit",
        })
    }
}

/// Everything a run revealed. Equality is exact, which is what
/// [`replay_verify`] relies on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionTrace {
    /// Examined positions, in examination order.
    pub positions: Vec<usize>,
    /// The examined bits, in examination order.
    pub xi: BitString,
    /// The keep flags, one per step.
    pub rho: BitString,
    /// Mask over the whole input: 1 where a bit was kept.
    pub mask_b: BitString,
    /// The kept subsequence `ξ/ρ`.
    pub q_star: BitString,
    /// `input[0..h_final-1] / B̄`: the non-kept bits below the final
    /// threshold, in position order. Bounded rules only.
    pub n_prefix: Option<BitString>,
    /// Final threshold, clamped to the input length. Bounded rules only.
    pub h_final: Option<usize>,
    pub stop_reason: StopReason,
    /// Stages `k` with `F(ξ_k) ≥ H(ξ_k)`, ascending. Bounded rules only
    /// (always empty otherwise).
    pub checkpoint_stages: Vec<usize>,
    /// `H(ξ_k)` for each committed stage. Bounded rules only.
    pub thresholds: Option<Vec<usize>>,
}

/// Failure when extracting a checkpoint pair from a trace.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("stage {0} is not a checkpoint stage of this trace")]
    NotACheckpoint(usize),
    #[error("checkpoint window [0, {h}) exceeds the input span {input_len}")]
    WindowExceedsInput { h: usize, input_len: usize },
    #[error("trace carries no thresholds (general rule); checkpoints need a bounded rule")]
    NotBounded,
}

/// Plays `rule` against `input` for at most `max_steps` examinations.
///
/// Divergence of any rule function stops the run with
/// [`StopReason::RuleDivergence`]. A fresh, in-range position is always
/// committed, so a run makes at most `|input|` steps regardless of
/// `max_steps`.
pub fn run(rule: &SelectionRule, input: &BitString, max_steps: usize) -> SelectionTrace {
    let bounded = rule.kind() == RuleKind::Bounded;
    let mut cursor = rule.cursor();
    let mut positions = Vec::new();
    let mut xi = BitString::new();
    let mut rho = BitString::new();
    let mut examined = vec![false; input.len()];
    let mut selected = vec![false; input.len()];
    let mut thresholds = bounded.then(Vec::new);
    let mut checkpoint_stages = Vec::new();

    let stop_reason = loop {
        if positions.len() == max_steps {
            break StopReason::StepLimit;
        }
        // For bounded rules the threshold is consulted first: the keep flag
        // is derived from it and the stage value is recorded for checkpoint
        // extraction.
        let h = if bounded {
            match cursor.threshold() {
                Some(h) => Some(h),
                None => break StopReason::RuleDivergence,
            }
        } else {
            None
        };
        let Some(position) = cursor.next_position() else {
            break StopReason::RuleDivergence;
        };
        let flag = match h {
            Some(h) => position >= h,
            None => match cursor.select_flag() {
                Some(flag) => flag,
                None => break StopReason::RuleDivergence,
            },
        };
        if position >= input.len() {
            break StopReason::InputExhausted;
        }
        if examined[position] {
            break StopReason::PositionRepeat;
        }
        if let Some(h) = h {
            thresholds.as_mut().expect("bounded").push(h);
            if position >= h {
                checkpoint_stages.push(positions.len());
            }
        }
        examined[position] = true;
        selected[position] = flag;
        positions.push(position);
        let bit = input.bit(position);
        xi.push(bit);
        rho.push(flag);
        cursor.advance(bit);
    };

    let mask_b: BitString = selected.into_iter().collect();
    let q_star = xi.select_by(&rho).expect("ξ and ρ grow in lockstep");
    // End-of-run threshold. If the threshold function diverged on the final
    // history, fall back to the last committed stage value: the threshold
    // never decreases, so that is still a sound settled bound.
    let h_final = thresholds.as_ref().map(|recorded| {
        cursor
            .threshold()
            .or_else(|| recorded.last().copied())
            .unwrap_or(0)
            .min(input.len())
    });
    let n_prefix = h_final.map(|h| {
        input
            .prefix(h)
            .select_by(&mask_b.prefix(h).complement())
            .expect("windows of equal length")
    });

    SelectionTrace {
        positions,
        xi,
        rho,
        mask_b,
        q_star,
        n_prefix,
        h_final,
        stop_reason,
        checkpoint_stages,
        thresholds,
    }
}

/// A checkpoint pair: the settled window below the threshold and the kept
/// prefix, as they stood at one checkpoint stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Checkpoint {
    /// `input[0..h-1] / B̄` with the keep mask as of this stage.
    pub sigma: BitString,
    /// `ξ_k / ρ_k`: the bits kept so far.
    pub tau: BitString,
    /// The stage threshold `H(ξ_k)`.
    pub h: usize,
}

/// Extracts the (σ, τ) pair at checkpoint stage `k` of a bounded-rule trace
/// over `input`.
pub fn checkpoint(
    trace: &SelectionTrace,
    k: usize,
    input: &BitString,
) -> Result<Checkpoint, EngineError> {
    let thresholds = trace.thresholds.as_ref().ok_or(EngineError::NotBounded)?;
    if trace.checkpoint_stages.binary_search(&k).is_err() {
        return Err(EngineError::NotACheckpoint(k));
    }
    let h = thresholds[k];
    if h > input.len() {
        return Err(EngineError::WindowExceedsInput { h, input_len: input.len() });
    }
    let xi_k = trace.xi.prefix(k);
    let rho_k = trace.rho.prefix(k);
    let tau = xi_k.select_by(&rho_k).expect("equal lengths");
    // Keep mask as of stage k, restricted below h. Because the threshold
    // never decreases and keeps happen at or above it, later stages never
    // touch positions below h — this equals the full-run mask there.
    let mut kept_below_h = vec![false; h];
    for (j, position) in trace.positions.iter().copied().enumerate().take(k) {
        if trace.rho.bit(j) && position < h {
            kept_below_h[position] = true;
        }
    }
    debug_assert_eq!(
        kept_below_h,
        (0..h).map(|z| trace.mask_b.bit(z)).collect::<Vec<_>>(),
        "stage mask must agree with the full-run mask below h",
    );
    let stage_mask: BitString = kept_below_h.into_iter().collect();
    let sigma = input
        .prefix(h)
        .select_by(&stage_mask.complement())
        .expect("windows of equal length");
    Ok(Checkpoint { sigma, tau, h })
}

/// Re-runs the rule and compares the whole trace. `max_steps` is taken from
/// the trace itself: a step-limited trace is replayed with exactly its step
/// count, anything else with no limit.
pub fn replay_verify(trace: &SelectionTrace, rule: &SelectionRule, input: &BitString) -> bool {
    let max_steps = if trace.stop_reason == StopReason::StepLimit {
        trace.positions.len()
    } else {
        usize::MAX
    };
    run(rule, input, max_steps) == *trace
}

/// The wire form of a bounded-rule trace, with a fixed key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceJson {
    pub positions: Vec<usize>,
    pub xi: BitString,
    pub rho: BitString,
    pub q_star: BitString,
    pub n_prefix: BitString,
    pub h_final: usize,
    pub stop_reason: StopReason,
    pub checkpoints: Vec<usize>,
}

impl TryFrom<&SelectionTrace> for TraceJson {
    type Error = EngineError;

    fn try_from(trace: &SelectionTrace) -> Result<Self, EngineError> {
        Ok(TraceJson {
            positions: trace.positions.clone(),
            xi: trace.xi.clone(),
            rho: trace.rho.clone(),
            q_star: trace.q_star.clone(),
            n_prefix: trace.n_prefix.clone().ok_or(EngineError::NotBounded)?,
            h_final: trace.h_final.ok_or(EngineError::NotBounded)?,
            stop_reason: trace.stop_reason,
            checkpoints: trace.checkpoint_stages.clone(),
        })
    }
}
