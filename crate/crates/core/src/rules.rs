//! Selection rules: strategies for examining a hidden bit sequence.
//!
//! A rule works against a history ξ of previously examined bits. From ξ it
//! produces the next position to examine, `F(ξ)`, and a keep decision for
//! the bit found there. Two kinds exist:
//!
//! * **Bounded** rules carry a threshold `H(ξ)` and derive the keep flag as
//!   `G(ξ) = [F(ξ) ≥ H(ξ)]`. `H` must never decrease as the history grows;
//!   positions below the current threshold are thereby settled for good,
//!   which is what makes trace checkpoints and reconstruction work.
//! * **General** rules carry a free-standing flag `G(ξ)`.
//!
//! Crucially, the decision depends only on the history — never on the bit
//! being decided about. Rules are immutable values; stepping through a
//! history happens on a separate [`RuleCursor`], so a single rule can serve
//! many runs, including concurrently.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::bitseq::BitString;

/// `F`-style functions of the history; `None` signals divergence.
pub type PositionFn = Arc<dyn Fn(&BitString) -> Option<usize> + Send + Sync>;
/// `G`-style functions of the history; `None` signals divergence.
pub type FlagFn = Arc<dyn Fn(&BitString) -> Option<bool> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    Bounded,
    General,
}

/// Construction or parse failure for a rule description.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuleError {
    #[error("unknown rule family {0:?}")]
    UnknownFamily(String),
    #[error("rule family {family}: {problem}")]
    InvalidParameter { family: &'static str, problem: String },
}

/// A parsed description of a built-in rule, e.g. `mc-mask:10110`.
///
/// The four families:
///
/// | syntax             | behavior                                                         |
/// |--------------------|------------------------------------------------------------------|
/// | `mc-mask:PATTERN`  | scan left to right, keep positions where the cyclic pattern is 1 |
/// | `pair-swap`        | examine each adjacent pair right-first, keep the right bit       |
/// | `skip-on-one`      | keep every examined bit, skip one position after each 1          |
/// | `threshold-ones:C` | scan left to right, keep once the position reaches C·(ones+1)    |
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleSpec {
    McMask { pattern: BitString },
    PairSwap,
    SkipOnOne,
    ThresholdOnes { c: usize },
}

impl RuleSpec {
    fn family(&self) -> &'static str {
        match self {
            RuleSpec::McMask { .. } => "mc-mask",
            RuleSpec::PairSwap => "pair-swap",
            RuleSpec::SkipOnOne => "skip-on-one",
            RuleSpec::ThresholdOnes { .. } => "threshold-ones",
        }
    }

    /// Checks parameters; `Ok` carries non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>, RuleError> {
        match self {
            RuleSpec::McMask { pattern } => {
                if pattern.is_empty() {
                    return Err(RuleError::InvalidParameter {
                        family: self.family(),
                        problem: "pattern must be nonempty".into(),
                    });
                }
                if pattern.ones() == 0 {
                    return Ok(vec![
                        "mc-mask pattern has no 1s: the rule never keeps a bit".into()
                    ]);
                }
                Ok(Vec::new())
            }
            RuleSpec::ThresholdOnes { c } => {
                if *c == 0 {
                    return Err(RuleError::InvalidParameter {
                        family: self.family(),
                        problem: "parameter must be positive".into(),
                    });
                }
                Ok(Vec::new())
            }
            RuleSpec::PairSwap | RuleSpec::SkipOnOne => Ok(Vec::new()),
        }
    }

    /// Builds the executable rule, rejecting invalid parameters.
    pub fn build(&self) -> Result<SelectionRule, RuleError> {
        self.validate()?;
        Ok(SelectionRule::Builtin(self.clone()))
    }
}

impl fmt::Display for RuleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleSpec::McMask { pattern } => write!(f, "mc-mask:{pattern}"),
            RuleSpec::PairSwap => f.write_str("pair-swap"),
            RuleSpec::SkipOnOne => f.write_str("skip-on-one"),
            RuleSpec::ThresholdOnes { c } => write!(f, "threshold-ones:{c}"),
        }
    }
}

impl FromStr for RuleSpec {
    type Err = RuleError;

    fn from_str(s: &str) -> Result<Self, RuleError> {
        let (family, param) = match s.split_once(':') {
            Some((family, param)) => (family, Some(param)),
            None => (s, None),
        };
        let no_param = |family: &'static str| RuleError::InvalidParameter {
            family,
            problem: "family takes no parameter".into(),
        };
        match family {
            "mc-mask" => {
                let text = param.ok_or_else(|| RuleError::InvalidParameter {
                    family: "mc-mask",
                    problem: "missing pattern, e.g. mc-mask:10110".into(),
                })?;
                let pattern = text.parse().map_err(|e| RuleError::InvalidParameter {
                    family: "mc-mask",
                    problem: format!("bad pattern: {e}"),
                })?;
                Ok(RuleSpec::McMask { pattern })
            }
            "pair-swap" => param.map_or(Ok(RuleSpec::PairSwap), |_| Err(no_param("pair-swap"))),
            "skip-on-one" => {
                param.map_or(Ok(RuleSpec::SkipOnOne), |_| Err(no_param("skip-on-one")))
            }
            "threshold-ones" => {
                let text = param.ok_or_else(|| RuleError::InvalidParameter {
                    family: "threshold-ones",
                    problem: "missing count, e.g. threshold-ones:3".into(),
                })?;
                let c = text.parse().map_err(|_| RuleError::InvalidParameter {
                    family: "threshold-ones",
                    problem: format!("bad count {text:?}"),
                })?;
                Ok(RuleSpec::ThresholdOnes { c })
            }
            other => Err(RuleError::UnknownFamily(other.to_string())),
        }
    }
}

/// An executable selection rule.
#[derive(Clone)]
pub enum SelectionRule {
    Builtin(RuleSpec),
    /// A bounded rule given by arbitrary `F` and `H` functions.
    CustomBounded { name: String, position: PositionFn, threshold: PositionFn },
    /// A general rule given by arbitrary `F` and `G` functions.
    General { name: String, position: PositionFn, flag: FlagFn },
}

impl SelectionRule {
    pub fn custom_bounded(
        name: impl Into<String>,
        position: impl Fn(&BitString) -> Option<usize> + Send + Sync + 'static,
        threshold: impl Fn(&BitString) -> Option<usize> + Send + Sync + 'static,
    ) -> Self {
        SelectionRule::CustomBounded {
            name: name.into(),
            position: Arc::new(position),
            threshold: Arc::new(threshold),
        }
    }

    pub fn general(
        name: impl Into<String>,
        position: impl Fn(&BitString) -> Option<usize> + Send + Sync + 'static,
        flag: impl Fn(&BitString) -> Option<bool> + Send + Sync + 'static,
    ) -> Self {
        SelectionRule::General {
            name: name.into(),
            position: Arc::new(position),
            flag: Arc::new(flag),
        }
    }

    pub fn kind(&self) -> RuleKind {
        match self {
            SelectionRule::Builtin(_) | SelectionRule::CustomBounded { .. } => RuleKind::Bounded,
            SelectionRule::General { .. } => RuleKind::General,
        }
    }

    pub fn name(&self) -> String {
        match self {
            SelectionRule::Builtin(spec) => spec.to_string(),
            SelectionRule::CustomBounded { name, .. } | SelectionRule::General { name, .. } => {
                name.clone()
            }
        }
    }

    /// Starts a cursor at the empty history.
    pub fn cursor(&self) -> RuleCursor<'_> {
        let history = match self {
            SelectionRule::Builtin(_) => None,
            _ => Some(BitString::new()),
        };
        RuleCursor { rule: self, len: 0, ones: 0, pointer: 0, history }
    }

    /// `F` evaluated on an explicit history.
    pub fn f_of(&self, xi: &BitString) -> Option<usize> {
        self.replay(xi).next_position()
    }

    /// `H` evaluated on an explicit history (bounded rules only).
    pub fn h_of(&self, xi: &BitString) -> Option<usize> {
        self.replay(xi).threshold()
    }

    /// `G` evaluated on an explicit history.
    pub fn g_of(&self, xi: &BitString) -> Option<bool> {
        self.replay(xi).select_flag()
    }

    fn replay(&self, xi: &BitString) -> RuleCursor<'_> {
        let mut cursor = self.cursor();
        for bit in xi.iter() {
            cursor.advance(bit);
        }
        cursor
    }
}

impl fmt::Display for SelectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl fmt::Debug for SelectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SelectionRule({})", self.name())
    }
}

/// A rule positioned after some history of examined bits.
///
/// The cursor is a fold over the history: advancing by the examined bit
/// updates O(1) state for the built-in families (length, ones count, skip
/// pointer), so long runs cost linear total time. Custom rules keep the
/// whole history and hand it to their closures.
#[derive(Clone)]
pub struct RuleCursor<'a> {
    rule: &'a SelectionRule,
    len: usize,
    ones: usize,
    pointer: usize,
    history: Option<BitString>,
}

impl RuleCursor<'_> {
    /// Length of the history consumed so far.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `F(ξ)`: the next position to examine.
    pub fn next_position(&self) -> Option<usize> {
        match self.rule {
            SelectionRule::Builtin(spec) => Some(match spec {
                RuleSpec::McMask { .. } | RuleSpec::ThresholdOnes { .. } => self.len,
                RuleSpec::PairSwap => {
                    if self.len.is_multiple_of(2) {
                        self.len + 1
                    } else {
                        self.len - 1
                    }
                }
                RuleSpec::SkipOnOne => self.pointer,
            }),
            SelectionRule::CustomBounded { position, .. }
            | SelectionRule::General { position, .. } => {
                position(self.history.as_ref().expect("custom rules keep their history"))
            }
        }
    }

    /// `H(ξ)`: the keep threshold. `None` for general rules, or when a
    /// custom threshold diverges.
    pub fn threshold(&self) -> Option<usize> {
        match self.rule {
            SelectionRule::Builtin(spec) => Some(match spec {
                RuleSpec::McMask { pattern } => {
                    if pattern.bit(self.len % pattern.len()) {
                        self.len
                    } else {
                        self.len + 1
                    }
                }
                RuleSpec::PairSwap => self.len.div_ceil(2) * 2,
                RuleSpec::SkipOnOne => self.pointer,
                RuleSpec::ThresholdOnes { c } => c.saturating_mul(self.ones + 1),
            }),
            SelectionRule::CustomBounded { threshold, .. } => {
                threshold(self.history.as_ref().expect("custom rules keep their history"))
            }
            SelectionRule::General { .. } => None,
        }
    }

    /// `G(ξ)`: whether the examined bit is kept. For bounded rules this is
    /// always the derived flag `F(ξ) ≥ H(ξ)`.
    pub fn select_flag(&self) -> Option<bool> {
        match self.rule {
            SelectionRule::General { flag, .. } => {
                flag(self.history.as_ref().expect("custom rules keep their history"))
            }
            _ => Some(self.next_position()? >= self.threshold()?),
        }
    }

    /// Appends the examined bit to the history.
    pub fn advance(&mut self, bit: bool) {
        self.len += 1;
        self.ones += usize::from(bit);
        self.pointer += 1 + usize::from(bit);
        if let Some(history) = &mut self.history {
            history.push(bit);
        }
    }
}

/// One observed hard fault: the threshold moved down as the history grew.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThresholdDecrease {
    pub input: usize,
    pub step: usize,
    pub before: usize,
    pub after: usize,
}

/// One observed hard fault: the rule asked for a position a second time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepeatedPosition {
    pub input: usize,
    pub step: usize,
    pub position: usize,
}

/// Heuristic evidence that the threshold stalls: the trailing run of equal
/// `H` values covers at least half of a trace of 16+ steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThresholdPlateau {
    pub input: usize,
    pub steps: usize,
    pub plateau_len: usize,
}

/// Outcome of tracing a rule over a sample of inputs.
#[derive(Debug, Clone, Default)]
pub struct ValidityReport {
    pub traces: usize,
    pub threshold_decreases: Vec<ThresholdDecrease>,
    pub repeated_positions: Vec<RepeatedPosition>,
    pub plateau_warnings: Vec<ThresholdPlateau>,
    pub max_threshold: usize,
}

impl ValidityReport {
    /// No hard faults observed. Plateau warnings do not count: they are
    /// evidence about growth, not violations.
    pub fn is_valid(&self) -> bool {
        self.threshold_decreases.is_empty() && self.repeated_positions.is_empty()
    }
}

/// Traces `rule` over each input and records threshold decreases, repeated
/// positions, and trailing threshold plateaus. Thresholds are only checked
/// for bounded rules.
pub fn validate_rule(rule: &SelectionRule, inputs: &[BitString]) -> ValidityReport {
    let mut report = ValidityReport { traces: inputs.len(), ..ValidityReport::default() };
    for (input_idx, input) in inputs.iter().enumerate() {
        let mut cursor = rule.cursor();
        let mut examined = vec![false; input.len()];
        let mut last_h: Option<usize> = None;
        let mut plateau = 0usize;
        let mut steps = 0usize;
        loop {
            if rule.kind() == RuleKind::Bounded {
                let Some(h) = cursor.threshold() else { break };
                report.max_threshold = report.max_threshold.max(h);
                match last_h {
                    Some(prev) if h < prev => {
                        report.threshold_decreases.push(ThresholdDecrease {
                            input: input_idx,
                            step: steps,
                            before: prev,
                            after: h,
                        });
                    }
                    Some(prev) if h == prev => plateau += 1,
                    _ => plateau = 0,
                }
                last_h = Some(h);
            }
            let Some(position) = cursor.next_position() else { break };
            if position >= input.len() {
                break;
            }
            if examined[position] {
                report.repeated_positions.push(RepeatedPosition {
                    input: input_idx,
                    step: steps,
                    position,
                });
                break;
            }
            examined[position] = true;
            cursor.advance(input.bit(position));
            steps += 1;
        }
        if steps >= 16 && plateau * 2 >= steps {
            report.plateau_warnings.push(ThresholdPlateau {
                input: input_idx,
                steps,
                plateau_len: plateau,
            });
        }
    }
    report
}
