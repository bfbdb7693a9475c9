//! Textual DRAT parsing and forward checking.
//!
//! Deletions of clauses that are absent, or that justify a top-level
//! assignment, are ignored with a warning rather than failing the proof.

mod check;
pub mod fuzz;
mod parse;
mod propagate;

pub use check::{check_proof, CheckStats, InvalidReason, ProofCheck, ProofVerdict};
pub use fuzz::{fuzz_refutation, fuzz_with, FuzzStrategy};
pub use parse::{parse_drat, parse_drat_file, DratParseError, DratProof, LemmaKind, ProofLemma};
pub use propagate::{ClauseId, DeleteOutcome, Propagation, PropagationState};
