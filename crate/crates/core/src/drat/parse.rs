use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::formula::Lit;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LemmaKind {
    Add,
    Delete,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofLemma {
    pub kind: LemmaKind,
    /// Literals in file order; the first one is the RAT pivot.
    pub clause: Vec<Lit>,
}

impl ProofLemma {
    pub fn add(clause: Vec<Lit>) -> Self {
        ProofLemma {
            kind: LemmaKind::Add,
            clause,
        }
    }

    pub fn delete(clause: Vec<Lit>) -> Self {
        ProofLemma {
            kind: LemmaKind::Delete,
            clause,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DratProof {
    pub lemmas: Vec<ProofLemma>,
    pub source: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DratParseError {
    #[error("line {line}: malformed lemma: {detail}")]
    MalformedLemma { line: usize, detail: String },
    #[error("proof ends inside a lemma (missing terminating 0)")]
    UnterminatedLemma,
    #[error("binary DRAT is not supported")]
    BinaryFormat,
    #[error("reading {path}: {message}")]
    Io { path: String, message: String },
}

/// Parses textual DRAT: whitespace-separated literals, each lemma terminated
/// by `0`, deletions prefixed by `d`. Lines starting with `c` are comments.
pub fn parse_drat(text: &[u8]) -> Result<DratProof, DratParseError> {
    if looks_binary(text) {
        return Err(DratParseError::BinaryFormat);
    }
    let text = String::from_utf8_lossy(text);
    let mut lemmas = Vec::new();
    let mut current: Option<ProofLemma> = None;

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim_start();
        if trimmed.starts_with('c') {
            continue;
        }
        for tok in trimmed.split_whitespace() {
            if tok == "d" {
                if current.is_some() {
                    return Err(DratParseError::MalformedLemma {
                        line: line_no,
                        detail: "`d` inside a lemma".into(),
                    });
                }
                current = Some(ProofLemma::delete(Vec::new()));
                continue;
            }
            let value: i32 = tok.parse().map_err(|_| DratParseError::MalformedLemma {
                line: line_no,
                detail: format!("bad token `{tok}`"),
            })?;
            let lemma = current.get_or_insert_with(|| ProofLemma::add(Vec::new()));
            match Lit::new(value) {
                Some(l) => lemma.clause.push(l),
                None if value == 0 => {
                    let done = current.take().unwrap();
                    if done.kind == LemmaKind::Delete && done.clause.is_empty() {
                        return Err(DratParseError::MalformedLemma {
                            line: line_no,
                            detail: "deletion of the empty clause".into(),
                        });
                    }
                    lemmas.push(done);
                }
                None => {
                    return Err(DratParseError::MalformedLemma {
                        line: line_no,
                        detail: format!("literal out of range `{tok}`"),
                    })
                }
            }
        }
    }
    if current.is_some() {
        return Err(DratParseError::UnterminatedLemma);
    }
    Ok(DratProof { lemmas, source: None })
}

pub fn parse_drat_file(path: &Path) -> Result<DratProof, DratParseError> {
    let bytes = std::fs::read(path).map_err(|e| DratParseError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut proof = parse_drat(&bytes)?;
    proof.source = Some(path.to_path_buf());
    Ok(proof)
}

fn looks_binary(text: &[u8]) -> bool {
    // binary DRAT starts with 'a' (0x61) or 'd' followed by a varint byte,
    // and contains bytes outside printable ASCII
    text.iter()
        .take(64)
        .any(|&b| !(b.is_ascii_graphic() || b.is_ascii_whitespace()))
}
