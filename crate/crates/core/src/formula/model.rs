use serde::{Deserialize, Serialize};

use super::{CnfFormula, Lit};

/// Truth values for variables `1..=n`; index 0 is unused.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    values: Vec<Option<bool>>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("model assigns variable {var} both polarities")]
    Contradictory { var: u32 },
    #[error("model leaves {missing} variable(s) unassigned, first is {first}")]
    IncompleteModel { first: u32, missing: usize },
    #[error("model mentions variable {var} beyond the formula's {num_vars}")]
    OutOfRange { var: u32, num_vars: u32 },
}

impl Assignment {
    pub fn new() -> Self {
        Assignment::default()
    }

    /// Builds an assignment from literals; a literal and its negation is an error.
    pub fn from_lits(lits: impl IntoIterator<Item = Lit>) -> Result<Self, ModelError> {
        let mut a = Assignment::new();
        for l in lits {
            if a.get(l.var()) == Some(!l.is_positive()) {
                return Err(ModelError::Contradictory { var: l.var() });
            }
            a.set(l.var(), l.is_positive());
        }
        Ok(a)
    }

    /// Total assignment from the low `num_vars` bits of `bits` (bit `i` is variable `i + 1`).
    pub fn from_bits(num_vars: u32, bits: u64) -> Self {
        let mut values = vec![None; num_vars as usize + 1];
        for v in 1..=num_vars {
            values[v as usize] = Some(bits >> (v - 1) & 1 == 1);
        }
        Assignment { values }
    }

    pub fn set(&mut self, var: u32, value: bool) {
        let idx = var as usize;
        if self.values.len() <= idx {
            self.values.resize(idx + 1, None);
        }
        self.values[idx] = Some(value);
    }

    pub fn get(&self, var: u32) -> Option<bool> {
        self.values.get(var as usize).copied().flatten()
    }

    /// Largest variable index with a value.
    pub fn max_var(&self) -> u32 {
        self.values.iter().rposition(Option::is_some).unwrap_or(0) as u32
    }

    pub fn is_total(&self, num_vars: u32) -> bool {
        (1..=num_vars).all(|v| self.get(v).is_some())
    }

    pub fn lit_value(&self, lit: Lit) -> Option<bool> {
        self.get(lit.var()).map(|v| v == lit.is_positive())
    }

    /// Assigned literals in variable order.
    pub fn lits(&self) -> Vec<Lit> {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(v, val)| val.map(|b| Lit::from_var(v as u32, b)))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelMode {
    /// Unassigned variables read as false.
    #[default]
    Lenient,
    /// Unassigned variables and out-of-range entries are errors.
    Strict,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelVerdict {
    /// `defaulted` counts variables that were read as false in lenient mode.
    Satisfied { defaulted: usize },
    /// 1-based index of the first clause with no true literal.
    Violated { clause: usize },
}

impl ModelVerdict {
    pub fn is_satisfied(&self) -> bool {
        matches!(self, ModelVerdict::Satisfied { .. })
    }
}

pub fn check_model(formula: &CnfFormula, model: &Assignment, mode: ModelMode) -> Result<ModelVerdict, ModelError> {
    let num_vars = formula.num_vars();
    let missing: Vec<u32> = (1..=num_vars).filter(|&v| model.get(v).is_none()).collect();
    if mode == ModelMode::Strict {
        if let Some(&first) = missing.first() {
            return Err(ModelError::IncompleteModel {
                first,
                missing: missing.len(),
            });
        }
        if model.max_var() > num_vars {
            return Err(ModelError::OutOfRange {
                var: model.max_var(),
                num_vars,
            });
        }
    } else if !missing.is_empty() {
        log::warn!(
            "{}: {} unassigned variable(s) treated as false",
            formula.origin(),
            missing.len()
        );
    }

    for (i, c) in formula.clauses().iter().enumerate() {
        let sat = c
            .iter()
            .any(|&l| model.lit_value(l).unwrap_or(!l.is_positive()));
        if !sat {
            return Ok(ModelVerdict::Violated { clause: i + 1 });
        }
    }
    Ok(ModelVerdict::Satisfied {
        defaulted: missing.len(),
    })
}
