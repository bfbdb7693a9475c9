use serde::{Deserialize, Serialize};

use super::parse::{DratProof, LemmaKind};
use super::propagate::{DeleteOutcome, PropagationState};
use crate::formula::CnfFormula;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InvalidReason {
    /// The added clause is neither RUP nor RAT on its first literal.
    NotRedundant { empty_clause: bool },
    /// All lemmas were accepted but no refutation was reached.
    NoEmptyClause,
}

impl std::fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InvalidReason::NotRedundant { empty_clause: true } => f.write_str("empty clause not RUP"),
            InvalidReason::NotRedundant { empty_clause: false } => f.write_str("lemma is neither RUP nor RAT"),
            InvalidReason::NoEmptyClause => f.write_str("proof exhausted without deriving the empty clause"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProofVerdict {
    Valid,
    /// `lemma` is the 1-based position in the proof (0 for an empty proof).
    Invalid { lemma: usize, reason: InvalidReason },
}

impl ProofVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, ProofVerdict::Valid)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckStats {
    pub rup_lemmas: usize,
    pub rat_lemmas: usize,
    pub deletions: usize,
    /// Lemmas read before the verdict was reached.
    pub lemmas_used: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofCheck {
    pub verdict: ProofVerdict,
    pub stats: CheckStats,
    pub warnings: Vec<String>,
}

/// Forward DRAT check. Each added lemma must be RUP, or failing that RAT on
/// its first literal, against the clauses active at that point. The proof is
/// valid once the empty clause is added or top-level propagation conflicts.
pub fn check_proof(formula: &CnfFormula, proof: &DratProof) -> ProofCheck {
    let mut state = PropagationState::new(formula.num_vars());
    for c in formula.clauses() {
        state.add_clause(c);
    }
    let mut stats = CheckStats::default();
    let mut warnings = Vec::new();
    let done = |verdict, stats, warnings| ProofCheck {
        verdict,
        stats,
        warnings,
    };

    if state.is_conflicting() {
        return done(ProofVerdict::Valid, stats, warnings);
    }

    for (i, lemma) in proof.lemmas.iter().enumerate() {
        let index = i + 1;
        stats.lemmas_used = index;
        match lemma.kind {
            LemmaKind::Delete => {
                stats.deletions += 1;
                match state.delete_clause(&lemma.clause) {
                    DeleteOutcome::Removed => {}
                    DeleteOutcome::NotFound => {
                        warnings.push(format!("lemma {index}: deleted clause not in database, ignored"))
                    }
                    DeleteOutcome::KeptAsReason => {
                        warnings.push(format!("lemma {index}: deletion of a top-level reason clause ignored"))
                    }
                }
            }
            LemmaKind::Add => {
                if state.check_rup(&lemma.clause) {
                    stats.rup_lemmas += 1;
                } else if !lemma.clause.is_empty() && state.check_rat(&lemma.clause, lemma.clause[0]) {
                    stats.rat_lemmas += 1;
                } else {
                    let reason = InvalidReason::NotRedundant {
                        empty_clause: lemma.clause.is_empty(),
                    };
                    return done(ProofVerdict::Invalid { lemma: index, reason }, stats, warnings);
                }
                if lemma.clause.is_empty() {
                    return done(ProofVerdict::Valid, stats, warnings);
                }
                state.add_clause(&lemma.clause);
                if state.is_conflicting() {
                    return done(ProofVerdict::Valid, stats, warnings);
                }
            }
        }
    }
    done(
        ProofVerdict::Invalid {
            lemma: proof.lemmas.len(),
            reason: InvalidReason::NoEmptyClause,
        },
        stats,
        warnings,
    )
}
