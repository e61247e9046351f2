//! Place selections on bit strings.
//!
//! A *selection rule* watches a hidden bit string through a peephole: it
//! names a position, sees the bit there, decides whether to keep it, and
//! moves on. This crate implements the bounded flavor of such rules — the
//! keep decision compares the examined position against a nondecreasing
//! threshold — plus the machinery that makes them worth studying:
//!
//! * [`rules`] — the rule families, cursors over examination histories,
//!   and validity checks.
//! * [`engine`] — playing a rule against a concrete input, producing a
//!   [`SelectionTrace`] with the kept subsequence `Q*`, the settled
//!   non-kept window `N`, and checkpoint pairs.
//! * [`reconstruct`] — rebuilding an initial segment of the input from a
//!   (non-kept, kept) string pair alone, with an audit of the properties
//!   that make the rebuild trustworthy.
//! * [`covers`] — constructions of small string sets whose union measure
//!   is verified exactly against a `2^-i` bound, in [`dyadic`] arithmetic.
//! * [`stats`] — an empirical independence battery comparing the kept and
//!   non-kept streams of a rule on generated inputs.
//!
//! The `placesel` binary exposes all of it on the command line; see the
//! crate README for usage.

pub mod bitseq;
pub mod cli;
pub mod covers;
pub mod dyadic;
pub mod engine;
pub mod reconstruct;
pub mod rules;
pub mod stats;

pub use bitseq::{BitString, PartialString};
pub use dyadic::Dyadic;
pub use engine::{run, SelectionTrace};
pub use reconstruct::{reconstruct, Reconstruction};
pub use rules::{RuleSpec, SelectionRule};
