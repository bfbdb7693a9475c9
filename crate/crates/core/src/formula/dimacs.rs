use std::fmt::Write as _;
use std::path::Path;

use super::{Clause, CnfFormula, Lit};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DimacsError {
    #[error("line {line}: clause data before `p cnf` header")]
    MissingHeader { line: usize },
    #[error("no `p cnf` header found")]
    EmptyInput,
    #[error("line {line}: malformed header `{text}`")]
    MalformedHeader { line: usize, text: String },
    #[error("header declares {declared_vars} vars / {declared_clauses} clauses, found max var {actual_vars} / {actual_clauses} clauses")]
    HeaderMismatch {
        declared_vars: u32,
        declared_clauses: usize,
        actual_vars: u32,
        actual_clauses: usize,
    },
    #[error("line {line}: literal {lit} exceeds declared variable count {num_vars}")]
    LiteralOutOfRange { line: usize, lit: i64, num_vars: u32 },
    #[error("line {line}: invalid token `{token}`")]
    InvalidToken { line: usize, token: String },
    #[error("last clause is not terminated by 0")]
    UnterminatedClause,
    #[error("reading {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ParseOptions {
    /// Header count mismatches become errors instead of warnings.
    pub strict: bool,
}

#[derive(Clone, Debug)]
pub struct Parsed {
    pub formula: CnfFormula,
    pub warnings: Vec<String>,
}

/// Parses DIMACS CNF. Clauses may span lines; `c` lines are comments and a
/// line starting with `%` ends the clause section (a common SATLIB quirk).
pub fn parse_dimacs(text: &[u8], opts: ParseOptions) -> Result<Parsed, DimacsError> {
    let text = String::from_utf8_lossy(text);
    let mut header: Option<(u32, usize)> = None;
    let mut clauses: Vec<Clause> = Vec::new();
    let mut current: Clause = Vec::new();
    let mut open = false;
    let mut warnings = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parsed = match parts.as_slice() {
                ["p", "cnf", v, c] => v.parse::<u32>().ok().zip(c.parse::<usize>().ok()),
                _ => None,
            };
            match parsed {
                Some(h) if header.is_none() => header = Some(h),
                Some(_) => warnings.push(format!("line {line_no}: duplicate header ignored")),
                None => {
                    return Err(DimacsError::MalformedHeader {
                        line: line_no,
                        text: line.to_string(),
                    })
                }
            }
            continue;
        }
        let Some((num_vars, _)) = header else {
            return Err(DimacsError::MissingHeader { line: line_no });
        };
        for tok in line.split_whitespace() {
            let value: i64 = tok.parse().map_err(|_| DimacsError::InvalidToken {
                line: line_no,
                token: tok.to_string(),
            })?;
            if value == 0 {
                clauses.push(std::mem::take(&mut current));
                open = false;
                continue;
            }
            if value.unsigned_abs() > u64::from(num_vars) {
                return Err(DimacsError::LiteralOutOfRange {
                    line: line_no,
                    lit: value,
                    num_vars,
                });
            }
            // bounded by num_vars: u32 range checked above, and i32 by Lit::new
            let lit = i32::try_from(value)
                .ok()
                .and_then(Lit::new)
                .ok_or_else(|| DimacsError::InvalidToken {
                    line: line_no,
                    token: tok.to_string(),
                })?;
            current.push(lit);
            open = true;
        }
    }

    let Some((num_vars, declared_clauses)) = header else {
        return Err(DimacsError::EmptyInput);
    };
    if open {
        return Err(DimacsError::UnterminatedClause);
    }
    if clauses.len() != declared_clauses {
        let max_var = clauses
            .iter()
            .flat_map(|c| c.iter().map(|l| l.var()))
            .max()
            .unwrap_or(0);
        let err = DimacsError::HeaderMismatch {
            declared_vars: num_vars,
            declared_clauses,
            actual_vars: max_var,
            actual_clauses: clauses.len(),
        };
        if opts.strict {
            return Err(err);
        }
        warnings.push(err.to_string());
    }

    let formula = CnfFormula {
        num_vars,
        clauses,
        origin: String::new(),
    };
    let tautologies = formula.tautologies();
    if !tautologies.is_empty() {
        warnings.push(format!("{} tautological clause(s), first at {}", tautologies.len(), tautologies[0]));
    }
    Ok(Parsed { formula, warnings })
}

pub fn parse_dimacs_file(path: &Path, opts: ParseOptions) -> Result<Parsed, DimacsError> {
    let bytes = std::fs::read(path).map_err(|e| DimacsError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut parsed = parse_dimacs(&bytes, opts)?;
    parsed.formula.origin = path.display().to_string();
    Ok(parsed)
}

pub fn serialize_dimacs(formula: &CnfFormula) -> String {
    let mut out = String::new();
    writeln!(out, "p cnf {} {}", formula.num_vars, formula.clauses.len()).unwrap();
    for c in &formula.clauses {
        for l in c {
            write!(out, "{} ", l.value()).unwrap();
        }
        out.push_str("0\n");
    }
    out
}
