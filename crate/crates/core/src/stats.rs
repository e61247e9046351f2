//! Seeded bit streams and the empirical independence battery.
//!
//! This is the one corner of the crate that works in floating point: test
//! statistics are ordinary doubles compared against fixed acceptance
//! cutoffs. Everything is deterministic — streams come from an explicit
//! 64-bit seed and identical inputs produce byte-identical reports.
//!
//! The battery checks what selection is supposed to guarantee in practice:
//! the kept subsequence `Q*` and the settled non-kept window `N` of a run
//! over a random stream should each look unbiased (monobit, runs) and look
//! independent of each other (block chi-square). A stream rigged with
//! internal correlations makes the chi-square explode, which is exactly the
//! failure the battery exists to surface.

use serde::Serialize;

use crate::bitseq::BitString;
use crate::engine::{self, StopReason};
use crate::rules::SelectionRule;

/// splitmix64: Steele–Lea–Vigna mixing generator. Small, seed-stable, and
/// more than strong enough for test streams; the battery itself is the
/// judge of that.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// `n` seeded bits, taken most-significant-first from successive 64-bit
/// outputs.
pub fn prng_stream(seed: u64, n: usize) -> BitString {
    let mut rng = SplitMix64::new(seed);
    let mut word = 0u64;
    (0..n)
        .map(|i| {
            if i % 64 == 0 {
                word = rng.next_u64();
            }
            (word >> (63 - (i % 64))) & 1 == 1
        })
        .collect()
}

/// A seeded stream with every odd position copying its even neighbor:
/// `stream[2k+1] = stream[2k]`. A deliberately rigged negative control.
pub fn duplicated_bit_stream(seed: u64, n: usize) -> BitString {
    let base = prng_stream(seed, n.div_ceil(2));
    (0..n).map(|i| base.bit(i / 2)).collect()
}

/// Why a statistic could not be computed. These are reported, not thrown:
/// the battery folds them into skipped entries.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("stream too short: {len} bits, need {min}")]
    TooShort { len: usize, min: usize },
    #[error("ones fraction {fraction:.4} outside (0.4, 0.6): runs statistic unstable")]
    FrequencyPrecondition { fraction: f64 },
    #[error("a block value never occurs on one side: margin degenerate")]
    DegenerateMargin,
    #[error("block length {0} out of range 1..=4")]
    BadBlockLen(usize),
}

/// Absolute z-score bound for monobit and runs: under the null, exceeding 4
/// has probability about 6·10^-5 per test.
pub const Z_BOUND: f64 = 4.0;

/// Two-sided chi-square acceptance intervals at total tail mass 10^-6
/// (5·10^-7 per side) for the dof values arising from block lengths 1..=4,
/// i.e. dof = (2^len - 1)^2. Inverse-CDF values from scipy.stats.chi2.ppf.
pub const CHI2_CUTOFFS: [(usize, f64, f64); 4] = [
    (1, 3.9269908169877694e-13, 25.263820726066864),
    (9, 0.19519342928962174, 46.43483672222628),
    (49, 14.721918461369073, 113.47302983807639),
    (225, 136.04109034432332, 344.44771188617517),
];

/// The acceptance interval for a supported dof.
pub fn chi2_acceptance_interval(dof: usize) -> Option<(f64, f64)> {
    CHI2_CUTOFFS.iter().find(|(d, _, _)| *d == dof).map(|&(_, lo, hi)| (lo, hi))
}

const MIN_STREAM: usize = 100;

/// Monobit z-score `(2·ones - n) / √n`. Needs at least 100 bits.
pub fn monobit_z(bits: &BitString) -> Result<f64, StatsError> {
    let n = bits.len();
    if n < MIN_STREAM {
        return Err(StatsError::TooShort { len: n, min: MIN_STREAM });
    }
    Ok((2.0 * bits.ones() as f64 - n as f64) / (n as f64).sqrt())
}

/// Wald–Wolfowitz runs z-score, conditioned on the observed ones count:
/// with `n1` ones, `n0` zeros and `R` runs,
///
/// ```text
/// E[R]   = 1 + 2·n1·n0/n
/// Var[R] = 2·n1·n0·(2·n1·n0 - n) / (n²·(n-1))
/// z      = (R - E[R]) / √Var[R]
/// ```
///
/// Only applied when the ones fraction lies strictly inside (0.4, 0.6);
/// outside that band the monobit test is the meaningful one anyway.
pub fn runs_z(bits: &BitString) -> Result<f64, StatsError> {
    let n = bits.len();
    if n < MIN_STREAM {
        return Err(StatsError::TooShort { len: n, min: MIN_STREAM });
    }
    let n1 = bits.ones() as f64;
    let n0 = n as f64 - n1;
    let fraction = n1 / n as f64;
    if !(fraction > 0.4 && fraction < 0.6) {
        return Err(StatsError::FrequencyPrecondition { fraction });
    }
    let runs = 1 + bits.iter().zip(bits.iter().skip(1)).filter(|(a, b)| a != b).count();
    let mean = 1.0 + 2.0 * n1 * n0 / n as f64;
    let var = 2.0 * n1 * n0 * (2.0 * n1 * n0 - n as f64) / (n as f64 * n as f64 * (n as f64 - 1.0));
    Ok((runs as f64 - mean) / var.sqrt())
}

/// Pearson chi-square for independence of aligned `block_len`-bit blocks of
/// `x` and `y` (truncated to the shorter stream), with expected counts from
/// the observed margins. Returns `(chi2, dof)` with `dof = (2^len - 1)^2`.
///
/// Requires `min(|x|, |y|) ≥ 100·4^len` so expected cell counts are large,
/// and non-degenerate margins on both sides.
pub fn block_independence_chi2(
    x: &BitString,
    y: &BitString,
    block_len: usize,
) -> Result<(f64, usize), StatsError> {
    if !(1..=4).contains(&block_len) {
        return Err(StatsError::BadBlockLen(block_len));
    }
    let n = x.len().min(y.len());
    let min = 100 * 4usize.pow(block_len as u32);
    if n < min {
        return Err(StatsError::TooShort { len: n, min });
    }
    let k = 1usize << block_len;
    let n_blocks = n / block_len;
    let block = |s: &BitString, b: usize| -> usize {
        (0..block_len).fold(0, |v, j| (v << 1) | usize::from(s.bit(b * block_len + j)))
    };
    let mut counts = vec![vec![0u64; k]; k];
    for b in 0..n_blocks {
        counts[block(x, b)][block(y, b)] += 1;
    }
    let rows: Vec<u64> = counts.iter().map(|row| row.iter().sum()).collect();
    let cols: Vec<u64> = (0..k).map(|c| counts.iter().map(|row| row[c]).sum()).collect();
    if rows.contains(&0) || cols.contains(&0) {
        return Err(StatsError::DegenerateMargin);
    }
    let total = n_blocks as f64;
    let mut chi2 = 0.0;
    for (r, row) in counts.iter().enumerate() {
        for (c, &observed) in row.iter().enumerate() {
            let expected = rows[r] as f64 * cols[c] as f64 / total;
            let diff = observed as f64 - expected;
            chi2 += diff * diff / expected;
        }
    }
    Ok((chi2, (k - 1) * (k - 1)))
}

/// One line of a battery report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsEntry {
    pub test_name: String,
    /// `None` when the test was skipped.
    pub statistic: Option<f64>,
    pub threshold_description: String,
    pub pass: bool,
    /// Reason the test could not run; such entries do not count against
    /// [`StatsReport::all_pass`].
    pub skipped: Option<String>,
}

impl StatsEntry {
    fn passed(name: &str, statistic: f64, threshold: String, pass: bool) -> Self {
        StatsEntry {
            test_name: name.into(),
            statistic: Some(statistic),
            threshold_description: threshold,
            pass,
            skipped: None,
        }
    }

    fn skipped(name: &str, threshold: String, reason: &StatsError) -> Self {
        StatsEntry {
            test_name: name.into(),
            statistic: None,
            threshold_description: threshold,
            pass: false,
            skipped: Some(reason.to_string()),
        }
    }
}

/// Outcome of [`independence_battery`]; serializes deterministically.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub rule: String,
    pub seed: u64,
    pub stream_length: usize,
    pub entries: Vec<StatsEntry>,
}

impl StatsReport {
    /// Every entry that actually ran passed.
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass || e.skipped.is_some())
    }
}

/// Battery block length: 2-bit blocks, dof (2^2-1)^2 = 9.
pub const BATTERY_BLOCK_LEN: usize = 2;

/// Minimum subsequence length for the battery.
pub const BATTERY_MIN_BITS: usize = 1 << 14;

/// Runs `rule` over `input`, splits the trace into `Q*` and `N`, and applies
/// monobit and runs to each plus the block chi-square across them. `seed` is
/// recorded in the report so it can be reproduced.
pub fn independence_battery(rule: &SelectionRule, input: &BitString, seed: u64) -> StatsReport {
    let mut report = StatsReport {
        rule: rule.name(),
        seed,
        stream_length: input.len(),
        entries: Vec::new(),
    };
    let trace = engine::run(rule, input, usize::MAX);
    debug_assert!(matches!(
        trace.stop_reason,
        StopReason::InputExhausted | StopReason::PositionRepeat
    ));
    let q_star = trace.q_star;
    let n_prefix = trace.n_prefix.unwrap_or_default();

    let z_threshold = format!("|z| <= {Z_BOUND}");
    let length_threshold = format!("both subsequences >= {BATTERY_MIN_BITS} bits");
    let lengths_ok = q_star.len() >= BATTERY_MIN_BITS && n_prefix.len() >= BATTERY_MIN_BITS;
    report.entries.push(StatsEntry {
        test_name: "subsequence-lengths".into(),
        statistic: Some(q_star.len().min(n_prefix.len()) as f64),
        threshold_description: length_threshold,
        pass: lengths_ok,
        skipped: None,
    });

    let too_short = StatsError::TooShort {
        len: q_star.len().min(n_prefix.len()),
        min: BATTERY_MIN_BITS,
    };
    for (name, stream) in [("q_star", &q_star), ("n_prefix", &n_prefix)] {
        for (test, f) in [
            ("monobit", monobit_z as fn(&BitString) -> Result<f64, StatsError>),
            ("runs", runs_z),
        ] {
            let entry_name = format!("{test}({name})");
            let entry = if !lengths_ok {
                StatsEntry::skipped(&entry_name, z_threshold.clone(), &too_short)
            } else {
                match f(stream) {
                    Ok(z) => StatsEntry::passed(
                        &entry_name,
                        z,
                        z_threshold.clone(),
                        z.abs() <= Z_BOUND,
                    ),
                    Err(err) => StatsEntry::skipped(&entry_name, z_threshold.clone(), &err),
                }
            };
            report.entries.push(entry);
        }
    }

    let dof = ((1usize << BATTERY_BLOCK_LEN) - 1).pow(2);
    let (lo, hi) = chi2_acceptance_interval(dof).expect("battery dof is a supported cutoff");
    let chi_threshold = format!("chi2 in [{lo}, {hi}] (dof {dof}, two-sided 1e-6)");
    let chi_name = format!("chi2-block{BATTERY_BLOCK_LEN}(q_star,n_prefix)");
    let entry = if !lengths_ok {
        StatsEntry::skipped(&chi_name, chi_threshold.clone(), &too_short)
    } else {
        match block_independence_chi2(&q_star, &n_prefix, BATTERY_BLOCK_LEN) {
            Ok((chi2, _dof)) => {
                StatsEntry::passed(&chi_name, chi2, chi_threshold, chi2 >= lo && chi2 <= hi)
            }
            Err(err) => StatsEntry::skipped(&chi_name, chi_threshold, &err),
        }
    };
    report.entries.push(entry);
    report
}
