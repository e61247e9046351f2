//! Finite bit strings and partial bit strings.
//!
//! A [`BitString`] is a finite word over `{0, 1}`. A [`PartialString`] is a
//! word over `{0, 1, ⊥}` regarded as a finite approximation of an infinite
//! sequence: positions holding `⊥` (written `_` in text form) are undefined,
//! and every position past the end is implicitly undefined too. Partial
//! strings are kept canonical — no trailing undefined symbols — so structural
//! equality matches extensional equality.
//!
//! Text form for both types: `0`/`1` (plus `_` for partial strings),
//! whitespace ignored, `#` starts a comment running to end of line.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dyadic::Dyadic;

/// Parse failure for the bit text format.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseBitsError {
    #[error("invalid character {ch:?} at byte {pos}")]
    InvalidChar { ch: char, pos: usize },
}

/// Length precondition failure for mask and interleaving operations.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BitSeqError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

/// A finite string over `{0, 1}`.
#[derive(Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    /// The empty string (λ).
    pub fn new() -> Self {
        BitString::default()
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        BitString { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// The bit at `i`; panics when out of range.
    pub fn bit(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        self.bits.get(i).copied()
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().copied()
    }

    /// Number of 1 bits.
    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// The first `n` bits; panics when `n > len`.
    #[must_use]
    pub fn prefix(&self, n: usize) -> Self {
        BitString { bits: self.bits[..n].to_vec() }
    }

    /// Initial-segment test on fully defined strings.
    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        self.len() <= other.len() && self.bits == other.bits[..self.len()]
    }

    /// The selection `self / mask`: keep the bits at the 1-positions of
    /// `mask`, in order. Requires `|self| = |mask|`.
    pub fn select_by(&self, mask: &BitString) -> Result<BitString, BitSeqError> {
        if self.len() != mask.len() {
            return Err(BitSeqError::LengthMismatch { left: self.len(), right: mask.len() });
        }
        Ok(self
            .iter()
            .zip(mask.iter())
            .filter_map(|(bit, keep)| keep.then_some(bit))
            .collect())
    }

    /// Bitwise complement, for turning a selection mask into its co-mask.
    #[must_use]
    pub fn complement(&self) -> BitString {
        self.iter().map(|b| !b).collect()
    }

    /// The alternation `a ⊕ b = a[0] b[0] a[1] b[1] …`. Requires
    /// `|a| - |b| ∈ {0, 1}` so the result decomposes uniquely.
    pub fn interleave(a: &BitString, b: &BitString) -> Result<BitString, BitSeqError> {
        if a.len() != b.len() && a.len() != b.len() + 1 {
            return Err(BitSeqError::LengthMismatch { left: a.len(), right: b.len() });
        }
        let mut out = Vec::with_capacity(a.len() + b.len());
        for i in 0..a.len() {
            out.push(a.bit(i));
            if i < b.len() {
                out.push(b.bit(i));
            }
        }
        Ok(BitString::from_bits(out))
    }

    /// Splits an alternation back into its two components; inverse of
    /// [`BitString::interleave`].
    pub fn deinterleave(&self) -> (BitString, BitString) {
        let mut a = Vec::with_capacity(self.len().div_ceil(2));
        let mut b = Vec::with_capacity(self.len() / 2);
        for (i, bit) in self.iter().enumerate() {
            if i % 2 == 0 {
                a.push(bit);
            } else {
                b.push(bit);
            }
        }
        (BitString::from_bits(a), BitString::from_bits(b))
    }

    /// Position in the length-then-lexicographic enumeration of all strings:
    /// λ ↦ 0, `0` ↦ 1, `1` ↦ 2, `00` ↦ 3, `01` ↦ 4, …
    ///
    /// Panics for strings of 64 or more bits (the rank would overflow).
    pub fn rank(&self) -> u64 {
        assert!(self.len() < 64, "rank overflows u64 for strings of 64+ bits");
        let value = self.iter().fold(0u64, |v, b| (v << 1) | u64::from(b));
        (1u64 << self.len()) - 1 + value
    }

    /// Inverse of [`BitString::rank`].
    pub fn unrank(n: u64) -> BitString {
        assert!(n < u64::MAX, "unrank argument out of range");
        let len = (63 - (n + 1).leading_zeros()) as usize;
        let value = n + 1 - (1u64 << len);
        (0..len).map(|i| (value >> (len - 1 - i)) & 1 == 1).collect()
    }

    /// The measure `2^-|self|` of the cylinder of extensions.
    pub fn measure(&self) -> Dyadic {
        Dyadic::pow2_neg(self.len() as u64)
    }
}

/// All `2^len` strings of the given length, in lexicographic order.
/// Intended for small search spaces; panics for `len ≥ 32`.
pub fn strings_of_length(len: usize) -> impl Iterator<Item = BitString> {
    assert!(len < 32, "strings_of_length is for small exhaustive searches");
    (0u64..1 << len).map(move |v| (0..len).map(|i| (v >> (len - 1 - i)) & 1 == 1).collect())
}

/// All strings of length at most `max_len`, shortest first.
pub fn strings_up_to_length(max_len: usize) -> impl Iterator<Item = BitString> {
    (0..=max_len).flat_map(strings_of_length)
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        BitString { bits: iter.into_iter().collect() }
    }
}

impl Extend<bool> for BitString {
    fn extend<I: IntoIterator<Item = bool>>(&mut self, iter: I) {
        self.bits.extend(iter);
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for bit in self.iter() {
            f.write_str(if bit { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

impl FromStr for BitString {
    type Err = ParseBitsError;

    fn from_str(s: &str) -> Result<Self, ParseBitsError> {
        let mut bits = Vec::new();
        scan_bit_text(s, |pos, ch| match ch {
            '0' => {
                bits.push(false);
                Ok(())
            }
            '1' => {
                bits.push(true);
                Ok(())
            }
            ch => Err(ParseBitsError::InvalidChar { ch, pos }),
        })?;
        Ok(BitString { bits })
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Drives a scanner over the bit text format, handling whitespace and `#`
/// comments; `visit` sees every remaining character with its byte offset.
fn scan_bit_text(
    s: &str,
    mut visit: impl FnMut(usize, char) -> Result<(), ParseBitsError>,
) -> Result<(), ParseBitsError> {
    let mut in_comment = false;
    for (pos, ch) in s.char_indices() {
        if in_comment {
            in_comment = ch != '\n';
        } else if ch == '#' {
            in_comment = true;
        } else if !ch.is_whitespace() {
            visit(pos, ch)?;
        }
    }
    Ok(())
}

/// A finite approximation of an infinite binary sequence: each position is
/// `0`, `1`, or undefined, and all positions past [`PartialString::span`]
/// are undefined.
///
/// Canonical form: the last stored symbol, if any, is defined.
#[derive(Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct PartialString {
    symbols: Vec<Option<bool>>,
}

impl PartialString {
    /// The totally undefined string (measure 1).
    pub fn empty() -> Self {
        PartialString::default()
    }

    /// Builds from raw symbols, stripping trailing undefined positions.
    pub fn from_symbols(mut symbols: Vec<Option<bool>>) -> Self {
        while symbols.last() == Some(&None) {
            symbols.pop();
        }
        PartialString { symbols }
    }

    /// One past the last defined position (0 when nothing is defined).
    pub fn span(&self) -> usize {
        self.symbols.len()
    }

    /// Number of defined positions, written `⟨σ⟩`.
    pub fn defined_count(&self) -> usize {
        self.symbols.iter().filter(|s| s.is_some()).count()
    }

    /// The symbol at `x`; `None` both for explicit `⊥` and past the span.
    pub fn get(&self, x: usize) -> Option<bool> {
        self.symbols.get(x).copied().flatten()
    }

    pub fn symbols(&self) -> &[Option<bool>] {
        &self.symbols
    }

    /// Mask of length [`PartialString::span`] with 1 at defined positions.
    pub fn defined_mask(&self) -> BitString {
        self.symbols.iter().map(|s| s.is_some()).collect()
    }

    /// The partial order `self ⊑ other`: every defined position of `self`
    /// is defined in `other` with the same bit.
    pub fn is_prefix_of(&self, other: &PartialString) -> bool {
        self.symbols
            .iter()
            .enumerate()
            .all(|(x, s)| s.is_none() || *s == other.get(x))
    }

    /// `self ⊑ A` for a fully defined finite string `A`; positions past
    /// `|A|` count as undefined in `A`.
    pub fn is_prefix_of_bits(&self, bits: &BitString) -> bool {
        self.is_prefix_of(&PartialString::from(bits))
    }

    /// Whether a common extension exists: no position is defined in both
    /// with different bits.
    pub fn compatible_with(&self, other: &PartialString) -> bool {
        self.symbols.iter().enumerate().all(|(x, s)| match (s, other.get(x)) {
            (Some(a), Some(b)) => *a == b,
            _ => true,
        })
    }

    /// The insertion `self ↓ tau`: fill the undefined positions, in
    /// increasing order, with the bits of `tau`. Positions past the span are
    /// undefined, so any bits of `tau` left over land right after it.
    #[must_use]
    pub fn insert(&self, tau: &BitString) -> PartialString {
        let mut symbols = self.symbols.clone();
        let mut fill = tau.iter();
        for slot in symbols.iter_mut() {
            if slot.is_none() {
                match fill.next() {
                    Some(bit) => *slot = Some(bit),
                    None => break,
                }
            }
        }
        symbols.extend(fill.map(Some));
        PartialString::from_symbols(symbols)
    }

    /// The measure `2^-⟨self⟩` of the set of sequences extending `self`.
    pub fn measure(&self) -> Dyadic {
        Dyadic::pow2_neg(self.defined_count() as u64)
    }
}

impl From<&BitString> for PartialString {
    fn from(bits: &BitString) -> Self {
        PartialString { symbols: bits.iter().map(Some).collect() }
    }
}

impl From<BitString> for PartialString {
    fn from(bits: BitString) -> Self {
        PartialString::from(&bits)
    }
}

impl fmt::Display for PartialString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for symbol in &self.symbols {
            f.write_str(match symbol {
                Some(true) => "1",
                Some(false) => "0",
                None => "_",
            })?;
        }
        Ok(())
    }
}

impl fmt::Debug for PartialString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

impl FromStr for PartialString {
    type Err = ParseBitsError;

    fn from_str(s: &str) -> Result<Self, ParseBitsError> {
        let mut symbols = Vec::new();
        scan_bit_text(s, |pos, ch| match ch {
            '0' => {
                symbols.push(Some(false));
                Ok(())
            }
            '1' => {
                symbols.push(Some(true));
                Ok(())
            }
            '_' => {
                symbols.push(None);
                Ok(())
            }
            ch => Err(ParseBitsError::InvalidChar { ch, pos }),
        })?;
        Ok(PartialString::from_symbols(symbols))
    }
}

impl Serialize for PartialString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PartialString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn partial(s: &str) -> PartialString {
        s.parse().unwrap()
    }

    #[test]
    fn parsing_handles_whitespace_and_comments() {
        assert_eq!(bits("1010"), bits(" 10\n1 0 # trailing note\n"));
        assert_eq!(bits("# only a comment\n"), BitString::new());
        assert_eq!(
            "12".parse::<BitString>(),
            Err(ParseBitsError::InvalidChar { ch: '2', pos: 1 })
        );
        // '_' is only meaningful in partial strings.
        assert!("1_0".parse::<BitString>().is_err());
        assert_eq!(partial("1_0").to_string(), "1_0");
    }

    #[test]
    fn partial_strings_canonicalize() {
        assert_eq!(partial("__"), PartialString::empty());
        assert_eq!(partial("10__"), partial("10"));
        assert_eq!(partial("1_0_").span(), 3);
        assert_eq!(partial("1_0_").defined_count(), 2);
    }

    #[test]
    fn prefix_order_examples() {
        assert!(PartialString::empty().is_prefix_of_bits(&bits("0110")));
        assert!(partial("1_0").is_prefix_of_bits(&bits("110")));
        assert!(partial("1_0").is_prefix_of_bits(&bits("100")));
        assert!(!partial("1_1").is_prefix_of_bits(&bits("100")));
        // Defined bits past the end of the finite string cannot be verified.
        assert!(!partial("10_1").is_prefix_of_bits(&bits("10")));
    }

    #[test]
    fn prefix_order_is_a_partial_order() {
        // Exhaustive over canonical partial strings of span ≤ 4.
        let mut all = vec![PartialString::empty()];
        for span in 1..=4usize {
            for code in 0..3u32.pow(span as u32) {
                let mut c = code;
                let symbols: Vec<Option<bool>> = (0..span)
                    .map(|_| {
                        let s = match c % 3 {
                            0 => None,
                            1 => Some(false),
                            _ => Some(true),
                        };
                        c /= 3;
                        s
                    })
                    .collect();
                let p = PartialString::from_symbols(symbols);
                if p.span() == span {
                    all.push(p);
                }
            }
        }
        for a in &all {
            assert!(a.is_prefix_of(a));
            assert!(PartialString::empty().is_prefix_of(a));
            for b in &all {
                if a.is_prefix_of(b) && b.is_prefix_of(a) {
                    assert_eq!(a, b);
                }
                assert_eq!(a.compatible_with(b), b.compatible_with(a));
                for c in &all {
                    if a.is_prefix_of(b) && b.is_prefix_of(c) {
                        assert!(a.is_prefix_of(c));
                    }
                }
            }
        }
    }

    #[test]
    fn insertion_examples() {
        assert_eq!(partial("1_0_").insert(&bits("01")), partial("1001"));
        assert_eq!(PartialString::empty().insert(&bits("101")), partial("101"));
        // "__" canonicalizes to λ, so the single bit lands at position 0.
        assert_eq!(partial("__").insert(&bits("1")), partial("1"));
        // Leftover bits continue past the span.
        assert_eq!(partial("_1").insert(&bits("001")), partial("0101"));
        // Too few bits leave holes.
        assert_eq!(partial("_1_1").insert(&bits("0")), partial("01_1"));
    }

    #[test]
    fn insertion_defines_exactly_the_inserted_bits() {
        let alpha = partial("1__0_");
        let tau = bits("011");
        let filled = alpha.insert(&tau);
        assert_eq!(filled.defined_count(), alpha.defined_count() + tau.len());
        assert_eq!(filled.measure(), alpha.measure() * tau.measure());
    }

    #[test]
    fn selection_examples() {
        assert_eq!(bits("10110").select_by(&bits("01010")).unwrap(), bits("01"));
        assert_eq!(bits("1111").select_by(&bits("0000")).unwrap(), BitString::new());
        assert_eq!(bits("110100").select_by(&bits("101101")).unwrap(), bits("1010"));
        assert!(bits("10").select_by(&bits("1")).is_err());
        assert_eq!(bits("0110").complement(), bits("1001"));
    }

    #[test]
    fn selection_matches_position_walk() {
        // Independent route: walk the mask's 1-positions explicitly.
        let a = bits("0100111010001101");
        let m = bits("1010101010101010");
        let by_walk: BitString = (0..a.len()).filter(|&i| m.bit(i)).map(|i| a.bit(i)).collect();
        assert_eq!(a.select_by(&m).unwrap(), by_walk);
    }

    #[test]
    fn interleaving() {
        assert_eq!(BitString::interleave(&bits("101"), &bits("01")).unwrap(), bits("10011"));
        assert_eq!(BitString::interleave(&bits("10"), &bits("01")).unwrap(), bits("1001"));
        assert!(BitString::interleave(&bits("1"), &bits("01")).is_err());
        assert!(BitString::interleave(&bits("111"), &bits("0")).is_err());
        assert_eq!(bits("10011").deinterleave(), (bits("101"), bits("01")));
        // Exhaustive inverse check on short strings.
        for len in 0..=8 {
            for c in strings_of_length(len) {
                let (a, b) = c.deinterleave();
                assert_eq!(BitString::interleave(&a, &b).unwrap(), c);
            }
        }
    }

    #[test]
    fn rank_examples() {
        assert_eq!(BitString::new().rank(), 0);
        assert_eq!(bits("0").rank(), 1);
        assert_eq!(bits("1").rank(), 2);
        assert_eq!(bits("00").rank(), 3);
        assert_eq!(bits("01").rank(), 4);
        assert_eq!(BitString::unrank(4), bits("01"));
    }

    #[test]
    fn rank_enumerates_by_length_then_value() {
        // Independent oracle: generate all strings of length ≤ 3 and sort
        // by (length, numeric value).
        let mut expected: Vec<BitString> = (0..=3).flat_map(strings_of_length).collect();
        expected.sort_by_key(|s| (s.len(), s.iter().fold(0u64, |v, b| (v << 1) | u64::from(b))));
        for (n, s) in expected.iter().enumerate() {
            assert_eq!(BitString::unrank(n as u64), *s);
            assert_eq!(s.rank(), n as u64);
        }
    }

    #[test]
    fn rank_unrank_inverse_on_initial_segment() {
        for n in 0..4096u64 {
            assert_eq!(BitString::unrank(n).rank(), n);
        }
    }

    #[test]
    fn measures() {
        assert_eq!(BitString::new().measure(), Dyadic::one());
        assert_eq!(bits("101").measure(), Dyadic::pow2_neg(3));
        assert_eq!(partial("1_1").measure(), Dyadic::pow2_neg(2));
        assert_eq!(PartialString::empty().measure(), Dyadic::one());
    }

    #[test]
    fn serde_round_trips_as_text() {
        let b = bits("0101");
        assert_eq!(serde_json::to_string(&b).unwrap(), "\"0101\"");
        assert_eq!(serde_json::from_str::<BitString>("\"0101\"").unwrap(), b);
        let p = partial("1_0");
        assert_eq!(serde_json::to_string(&p).unwrap(), "\"1_0\"");
        assert_eq!(serde_json::from_str::<PartialString>("\"1_0\"").unwrap(), p);
        assert!(serde_json::from_str::<BitString>("\"1_0\"").is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn bitstrings(max_len: usize) -> impl Strategy<Value = BitString> {
            prop::collection::vec(any::<bool>(), 0..max_len).prop_map(BitString::from_bits)
        }

        fn partials(max_span: usize) -> impl Strategy<Value = PartialString> {
            prop::collection::vec(prop::option::of(any::<bool>()), 0..max_span)
                .prop_map(PartialString::from_symbols)
        }

        proptest! {
            #[test]
            fn display_parses_back(s in bitstrings(64)) {
                prop_assert_eq!(s.to_string().parse::<BitString>().unwrap(), s);
            }

            #[test]
            fn partial_display_parses_back(p in partials(64)) {
                prop_assert_eq!(p.to_string().parse::<PartialString>().unwrap(), p);
            }

            #[test]
            fn rank_then_unrank_is_identity(s in bitstrings(48)) {
                prop_assert_eq!(BitString::unrank(s.rank()), s);
            }

            #[test]
            fn deinterleave_then_interleave_is_identity(c in bitstrings(128)) {
                let (a, b) = c.deinterleave();
                prop_assert!(a.len() == b.len() || a.len() == b.len() + 1);
                prop_assert_eq!(BitString::interleave(&a, &b).unwrap(), c);
            }

            #[test]
            fn interleave_then_deinterleave_is_identity(
                pairs in prop::collection::vec(any::<(bool, bool)>(), 0..48),
                extra in prop::option::of(any::<bool>()),
            ) {
                let mut a: BitString = pairs.iter().map(|&(x, _)| x).collect();
                let b: BitString = pairs.iter().map(|&(_, y)| y).collect();
                if let Some(bit) = extra {
                    a.push(bit);
                }
                let c = BitString::interleave(&a, &b).unwrap();
                prop_assert_eq!(c.deinterleave(), (a, b));
            }

            #[test]
            fn selection_splits_and_reassembles(
                pairs in prop::collection::vec(any::<(bool, bool)>(), 0..96),
            ) {
                let a: BitString = pairs.iter().map(|&(x, _)| x).collect();
                let mask: BitString = pairs.iter().map(|&(_, m)| m).collect();
                let kept = a.select_by(&mask).unwrap();
                let skipped = a.select_by(&mask.complement()).unwrap();
                prop_assert_eq!(kept.len(), mask.ones());
                prop_assert_eq!(kept.len() + skipped.len(), a.len());
                let mut kept_iter = kept.iter();
                let mut skipped_iter = skipped.iter();
                let merged: BitString = mask
                    .iter()
                    .map(|m| {
                        if m { kept_iter.next().unwrap() } else { skipped_iter.next().unwrap() }
                    })
                    .collect();
                prop_assert_eq!(merged, a);
            }

            #[test]
            fn insertion_extends_and_scales_measure(p in partials(48), tau in bitstrings(16)) {
                let filled = p.insert(&tau);
                prop_assert!(p.is_prefix_of(&filled));
                prop_assert_eq!(filled.defined_count(), p.defined_count() + tau.len());
                prop_assert_eq!(filled.measure(), p.measure() * tau.measure());
            }
        }
    }
}
