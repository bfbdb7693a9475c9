//! Adversarial refutation attempts for soundness testing.
//!
//! Every attempt ends with the empty clause, so a checker that skips a
//! redundancy test on any lemma would accept it. On a satisfiable formula a
//! sound checker must reject all of them.

use rand::seq::SliceRandom;
use rand::Rng;

use super::parse::{DratProof, ProofLemma};
use crate::formula::{CnfFormula, Lit};
use crate::reference::{solve_with_proof, ReferenceResult};

/// Attempt families, chosen uniformly by [`fuzz_refutation`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FuzzStrategy {
    /// Only the empty clause.
    BareEmpty,
    /// Random clauses over the formula's variables.
    RandomLemmas,
    /// Resolvents of formula clauses, which are all genuinely implied.
    Resolvents,
    /// Units in random polarity, some contradicting every model.
    Units,
    /// Deletions of formula clauses interleaved with random lemmas.
    DeleteThenClaim,
    /// A valid refutation of the formula strengthened by extra units,
    /// replayed against the original.
    StrengthenedProof,
}

const STRATEGIES: [FuzzStrategy; 6] = [
    FuzzStrategy::BareEmpty,
    FuzzStrategy::RandomLemmas,
    FuzzStrategy::Resolvents,
    FuzzStrategy::Units,
    FuzzStrategy::DeleteThenClaim,
    FuzzStrategy::StrengthenedProof,
];

fn random_clause<R: Rng>(rng: &mut R, num_vars: u32) -> Vec<Lit> {
    let k = rng.gen_range(1..=3.min(num_vars as usize));
    let vars: Vec<u32> = (1..=num_vars).collect();
    vars.choose_multiple(rng, k).map(|&v| Lit::from_var(v, rng.gen())).collect()
}

fn resolvent(a: &[Lit], b: &[Lit]) -> Option<Vec<Lit>> {
    let pivot = a.iter().find(|l| b.contains(&-**l))?;
    let mut out: Vec<Lit> = a.iter().chain(b).copied().filter(|l| l.var() != pivot.var()).collect();
    out.sort();
    out.dedup();
    // tautological resolvents carry no information
    (!out.iter().any(|l| out.contains(&-*l))).then_some(out)
}

/// One attempt using `strategy`. Requires at least one variable.
pub fn fuzz_with<R: Rng>(rng: &mut R, formula: &CnfFormula, strategy: FuzzStrategy) -> DratProof {
    let n = formula.num_vars().max(1);
    let clauses = formula.clauses();
    let mut lemmas = Vec::new();
    match strategy {
        FuzzStrategy::BareEmpty => {}
        FuzzStrategy::RandomLemmas => {
            for _ in 0..rng.gen_range(1..=8) {
                lemmas.push(ProofLemma::add(random_clause(rng, n)));
            }
        }
        FuzzStrategy::Resolvents => {
            for _ in 0..rng.gen_range(1..=12) {
                if let (Some(a), Some(b)) = (clauses.choose(rng), clauses.choose(rng)) {
                    if let Some(r) = resolvent(a, b) {
                        lemmas.push(ProofLemma::add(r));
                    }
                }
            }
        }
        FuzzStrategy::Units => {
            for v in 1..=n {
                if rng.gen_bool(0.5) {
                    lemmas.push(ProofLemma::add(vec![Lit::from_var(v, rng.gen())]));
                }
            }
        }
        FuzzStrategy::DeleteThenClaim => {
            for c in clauses {
                if rng.gen_bool(0.4) {
                    lemmas.push(ProofLemma::delete(c.clone()));
                }
            }
            for _ in 0..rng.gen_range(1..=4) {
                lemmas.push(ProofLemma::add(random_clause(rng, n)));
            }
        }
        FuzzStrategy::StrengthenedProof => {
            let mut strong = clauses.to_vec();
            let mut extra = Vec::new();
            for _ in 0..64 {
                let unit = vec![Lit::from_var(rng.gen_range(1..=n), rng.gen())];
                strong.push(unit.clone());
                extra.push(unit);
                let f = CnfFormula::new(n, strong.clone(), "strengthened").expect("literals in range");
                if let ReferenceResult::Unsat(proof) = solve_with_proof(&f) {
                    // claim the added units as lemmas, then the real proof
                    lemmas.extend(extra.into_iter().map(ProofLemma::add));
                    lemmas.extend(proof.lemmas);
                    return DratProof { lemmas, source: None };
                }
            }
        }
    }
    lemmas.push(ProofLemma::add(Vec::new()));
    DratProof { lemmas, source: None }
}

/// One attempt with a uniformly chosen strategy.
pub fn fuzz_refutation<R: Rng>(rng: &mut R, formula: &CnfFormula) -> (FuzzStrategy, DratProof) {
    let s = *STRATEGIES.choose(rng).expect("non-empty");
    (s, fuzz_with(rng, formula, s))
}
