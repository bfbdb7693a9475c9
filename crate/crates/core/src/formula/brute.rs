use super::{Assignment, CnfFormula};

/// Exhaustive search above this many variables is refused by default.
pub const DEFAULT_VAR_CAP: u32 = 24;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BruteForceResult {
    Sat(Assignment),
    Unsat,
}

impl BruteForceResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, BruteForceResult::Sat(_))
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("formula has {num_vars} variables, brute force capped at {cap}")]
pub struct BruteForceError {
    pub num_vars: u32,
    pub cap: u32,
}

/// Enumerates assignments in increasing binary order (bit `i` = variable `i + 1`)
/// and returns the first model found.
pub fn brute_force_solve(formula: &CnfFormula, cap: u32) -> Result<BruteForceResult, BruteForceError> {
    let n = formula.num_vars();
    if n > cap.min(63) {
        return Err(BruteForceError { num_vars: n, cap });
    }
    // (positive mask, negative mask) per clause; a clause is satisfied when
    // some positive var is set or some negative var is clear
    let masks: Vec<(u64, u64)> = formula
        .clauses()
        .iter()
        .map(|c| {
            c.iter().fold((0u64, 0u64), |(p, q), l| {
                let bit = 1u64 << (l.var() - 1);
                if l.is_positive() {
                    (p | bit, q)
                } else {
                    (p, q | bit)
                }
            })
        })
        .collect();
    for bits in 0..(1u64 << n) {
        if masks.iter().all(|&(p, q)| bits & p != 0 || !bits & q != 0) {
            return Ok(BruteForceResult::Sat(Assignment::from_bits(n, bits)));
        }
    }
    Ok(BruteForceResult::Unsat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{check_model, clause, ModelMode};

    #[test]
    fn contradiction_is_unsat() {
        let f = CnfFormula::from_ints(&[&[1], &[-1]]);
        assert_eq!(brute_force_solve(&f, DEFAULT_VAR_CAP), Ok(BruteForceResult::Unsat));
    }

    #[test]
    fn simple_sat_model_checks() {
        let f = CnfFormula::from_ints(&[&[1, 2]]);
        let BruteForceResult::Sat(m) = brute_force_solve(&f, DEFAULT_VAR_CAP).unwrap() else {
            panic!("expected sat");
        };
        assert!(check_model(&f, &m, ModelMode::Strict).unwrap().is_satisfied());
    }

    #[test]
    fn cap_enforced() {
        let f = CnfFormula::new(30, vec![clause(&[30])], "").unwrap();
        assert_eq!(
            brute_force_solve(&f, DEFAULT_VAR_CAP),
            Err(BruteForceError { num_vars: 30, cap: 24 })
        );
    }

    #[test]
    fn empty_formula_is_sat() {
        let f = CnfFormula::new(0, vec![], "").unwrap();
        assert!(brute_force_solve(&f, DEFAULT_VAR_CAP).unwrap().is_sat());
    }

    /// Every formula over 2 variables with at most 4 clauses, against a
    /// truth-table sweep that evaluates clauses by direct substitution.
    #[test]
    fn all_two_var_formulas_agree_with_truth_table() {
        // all 8 non-empty clauses over {x1, x2} without tautologies or repeats
        let pool: Vec<Vec<i32>> = vec![
            vec![1], vec![-1], vec![2], vec![-2],
            vec![1, 2], vec![1, -2], vec![-1, 2], vec![-1, -2],
        ];
        let mut checked = 0;
        fn rec(pool: &[Vec<i32>], start: usize, cur: &mut Vec<Vec<i32>>, checked: &mut usize) {
            let refs: Vec<&[i32]> = cur.iter().map(Vec::as_slice).collect();
            let f = CnfFormula::new(2, refs.iter().map(|c| clause(c)).collect(), "").unwrap();
            let table_sat = [(false, false), (false, true), (true, false), (true, true)]
                .iter()
                .any(|&(a, b)| {
                    cur.iter().all(|c| {
                        c.iter().any(|&l| match l {
                            1 => a,
                            -1 => !a,
                            2 => b,
                            _ => !b,
                        })
                    })
                });
            let res = brute_force_solve(&f, DEFAULT_VAR_CAP).unwrap();
            assert_eq!(res.is_sat(), table_sat, "{cur:?}");
            if let BruteForceResult::Sat(m) = res {
                assert!(check_model(&f, &m, ModelMode::Strict).unwrap().is_satisfied());
            }
            *checked += 1;
            if cur.len() == 4 {
                return;
            }
            for i in start..pool.len() {
                cur.push(pool[i].clone());
                rec(pool, i + 1, cur, checked);
                cur.pop();
            }
        }
        rec(&pool, 0, &mut Vec::new(), &mut checked);
        // C(8,0..=4) = 1 + 8 + 28 + 56 + 70
        assert_eq!(checked, 163);
    }
}
