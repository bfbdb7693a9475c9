//! CNF formulas, assignments and the solver-output convention.
//!
//! Everything here is immutable after construction and safe to share across
//! worker threads.

mod brute;
mod dimacs;
mod model;
mod output;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use brute::{brute_force_solve, BruteForceError, BruteForceResult, DEFAULT_VAR_CAP};
pub use dimacs::{parse_dimacs, parse_dimacs_file, serialize_dimacs, DimacsError, ParseOptions, Parsed};
pub use model::{check_model, Assignment, ModelError, ModelMode, ModelVerdict};
pub use output::{parse_solver_output, ClaimKind, OutputError, SolverClaim};

/// A DIMACS literal: the sign is the polarity, the magnitude the 1-based variable.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub struct Lit(i32);

impl Lit {
    /// Returns `None` for zero, which is the clause terminator and never a literal.
    pub fn new(value: i32) -> Option<Lit> {
        if value == 0 || value == i32::MIN {
            None
        } else {
            Some(Lit(value))
        }
    }

    pub fn from_var(var: u32, positive: bool) -> Lit {
        let v = var as i32;
        assert!(v > 0, "variable index must be positive");
        Lit(if positive { v } else { -v })
    }

    #[inline]
    pub fn value(self) -> i32 {
        self.0
    }

    #[inline]
    pub fn var(self) -> u32 {
        self.0.unsigned_abs()
    }

    #[inline]
    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    /// Dense index usable for watch lists: `2 * var + (negative as usize)`.
    #[inline]
    pub fn code(self) -> usize {
        2 * self.var() as usize + usize::from(self.0 < 0)
    }
}

impl std::ops::Neg for Lit {
    type Output = Lit;

    #[inline]
    fn neg(self) -> Lit {
        Lit(-self.0)
    }
}

impl TryFrom<i32> for Lit {
    type Error = String;

    fn try_from(value: i32) -> Result<Self, Self::Error> {
        Lit::new(value).ok_or_else(|| format!("invalid literal {value}"))
    }
}

impl From<Lit> for i32 {
    fn from(lit: Lit) -> i32 {
        lit.0
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub type Clause = Vec<Lit>;

/// Convenience for tests and generators: builds a clause from raw DIMACS integers.
///
/// Panics on zero.
pub fn clause(lits: &[i32]) -> Clause {
    lits.iter()
        .map(|&l| Lit::new(l).expect("zero is not a literal"))
        .collect()
}

/// A clause set over variables `1..=num_vars`, in input order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnfFormula {
    num_vars: u32,
    clauses: Vec<Clause>,
    origin: String,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("literal {lit} in clause {clause} exceeds declared variable count {num_vars}")]
pub struct OutOfRange {
    pub lit: i32,
    pub clause: usize,
    pub num_vars: u32,
}

impl CnfFormula {
    pub fn new(num_vars: u32, clauses: Vec<Clause>, origin: impl Into<String>) -> Result<Self, OutOfRange> {
        for (i, c) in clauses.iter().enumerate() {
            if let Some(l) = c.iter().find(|l| l.var() > num_vars) {
                return Err(OutOfRange {
                    lit: l.value(),
                    clause: i + 1,
                    num_vars,
                });
            }
        }
        Ok(CnfFormula {
            num_vars,
            clauses,
            origin: origin.into(),
        })
    }

    /// Builds a formula from raw integer clauses, sizing `num_vars` to fit.
    pub fn from_ints(clauses: &[&[i32]]) -> Self {
        let clauses: Vec<Clause> = clauses.iter().map(|c| clause(c)).collect();
        let num_vars = clauses
            .iter()
            .flat_map(|c| c.iter().map(|l| l.var()))
            .max()
            .unwrap_or(0);
        CnfFormula {
            num_vars,
            clauses,
            origin: String::from("<inline>"),
        }
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn origin(&self) -> &str {
        &self.origin
    }

    pub fn with_origin(mut self, origin: impl Into<String>) -> Self {
        self.origin = origin.into();
        self
    }

    /// 1-based indices of clauses that contain both a literal and its negation.
    pub fn tautologies(&self) -> Vec<usize> {
        self.clauses
            .iter()
            .enumerate()
            .filter(|(_, c)| c.iter().any(|l| c.contains(&-*l)))
            .map(|(i, _)| i + 1)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_basics() {
        let l = Lit::new(-3).unwrap();
        assert_eq!(l.var(), 3);
        assert!(!l.is_positive());
        assert_eq!((-l).value(), 3);
        assert_eq!(l.code(), 7);
        assert_eq!((-l).code(), 6);
        assert!(Lit::new(0).is_none());
    }

    #[test]
    fn out_of_range_rejected() {
        let err = CnfFormula::new(1, vec![clause(&[1]), clause(&[2])], "x").unwrap_err();
        assert_eq!(err.clause, 2);
        assert_eq!(err.lit, 2);
    }

    #[test]
    fn tautology_flagged() {
        let f = CnfFormula::from_ints(&[&[1, 2], &[3, -3, 1]]);
        assert_eq!(f.tautologies(), vec![2]);
    }
}
