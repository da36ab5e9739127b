//! Decoding engine for directed acyclic decoder lattices.
//!
//! A lattice of `L` positions carries a transition distribution from every
//! position to strictly later ones and an emission distribution over tokens
//! at every position. A decoding path visits positions `1 = a_1 < ... <
//! a_M = L` and emits one token per visited position.
//!
//! The crate provides exact scoring ([`scoring`]), four decoders
//! ([`decoders`]), a brute-force enumerator used as ground truth
//! ([`oracle`]), strategy comparisons and timings ([`analysis`]), and the
//! instance file format and synthetic generator ([`io`], [`generator`]).

pub mod analysis;
pub mod cli;
pub mod decoders;
pub mod error;
pub mod generator;
pub mod instance;
pub mod io;
pub mod logspace;
pub mod oracle;
pub mod scoring;

pub use decoders::{
    backtrace, build_viterbi_table, decode_all_lengths, greedy_decode, joint_viterbi_decode,
    lookahead_decode, select_length, viterbi_decode, Decoded, LengthScore, LengthSelection, Mode,
    Strategy, ViterbiTable,
};
pub use error::{Error, Result};
pub use instance::{DecodingPath, Hypothesis, Instance, Translation, Violation, ViolationKind};
pub use oracle::{EnumerationResult, Oracle};
pub use scoring::EntropyStats;
