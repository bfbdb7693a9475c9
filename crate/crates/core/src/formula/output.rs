use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{Assignment, Lit, ModelError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClaimKind {
    Sat,
    Unsat,
    Unknown,
}

/// What a solver said about one instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverClaim {
    pub kind: ClaimKind,
    pub model: Option<Assignment>,
    pub proof_path: Option<PathBuf>,
    pub raw_exit: i32,
}

impl SolverClaim {
    pub fn unknown(raw_exit: i32) -> Self {
        SolverClaim {
            kind: ClaimKind::Unknown,
            model: None,
            proof_path: None,
            raw_exit,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum OutputError {
    #[error("status line says {status:?} but exit code is {exit}")]
    ConflictingStatus { status: ClaimKind, exit: i32 },
    #[error("multiple conflicting status lines")]
    DuplicateStatus,
    #[error("malformed value line: {0}")]
    MalformedValueLine(String),
}

/// Reads the competition output convention: `s SATISFIABLE` with `v` lines
/// (0-terminated), `s UNSATISFIABLE`, anything else is Unknown. Exit codes 10
/// and 20 must agree with the status line.
pub fn parse_solver_output(stdout: &[u8], exit: i32) -> Result<SolverClaim, OutputError> {
    let text = String::from_utf8_lossy(stdout);
    let mut status: Option<ClaimKind> = None;
    let mut lits: Vec<Lit> = Vec::new();
    let mut terminated = false;
    let mut saw_values = false;

    for line in text.lines() {
        let line = line.trim_end();
        if let Some(rest) = line.strip_prefix("s ") {
            let kind = match rest.trim() {
                "SATISFIABLE" => ClaimKind::Sat,
                "UNSATISFIABLE" => ClaimKind::Unsat,
                _ => ClaimKind::Unknown,
            };
            if status.is_some_and(|s| s != kind) {
                return Err(OutputError::DuplicateStatus);
            }
            status = Some(kind);
        } else if line == "v" || line.starts_with("v ") {
            saw_values = true;
            for tok in line[1..].split_whitespace() {
                if terminated {
                    return Err(OutputError::MalformedValueLine(format!("literal `{tok}` after terminating 0")));
                }
                let v: i32 = tok
                    .parse()
                    .map_err(|_| OutputError::MalformedValueLine(format!("bad token `{tok}`")))?;
                match Lit::new(v) {
                    Some(l) => lits.push(l),
                    None if v == 0 => terminated = true,
                    None => return Err(OutputError::MalformedValueLine(format!("bad literal `{tok}`"))),
                }
            }
        }
    }

    let kind = status.unwrap_or(ClaimKind::Unknown);
    match (exit, kind) {
        (10, ClaimKind::Sat) | (20, ClaimKind::Unsat) => {}
        (10, _) | (20, _) => return Err(OutputError::ConflictingStatus { status: kind, exit }),
        (_, ClaimKind::Sat) | (_, ClaimKind::Unsat) if exit != 0 => {
            return Err(OutputError::ConflictingStatus { status: kind, exit })
        }
        _ => {}
    }

    let model = if kind == ClaimKind::Sat {
        if saw_values && !terminated {
            return Err(OutputError::MalformedValueLine("value lines not terminated by 0".into()));
        }
        Some(Assignment::from_lits(lits).map_err(|e: ModelError| OutputError::MalformedValueLine(e.to_string()))?)
    } else {
        None
    };
    Ok(SolverClaim {
        kind,
        model,
        proof_path: None,
        raw_exit: exit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sat_with_model() {
        let c = parse_solver_output(b"s SATISFIABLE\nv 1 -2 0\n", 10).unwrap();
        assert_eq!(c.kind, ClaimKind::Sat);
        let m = c.model.unwrap();
        assert_eq!(m.get(1), Some(true));
        assert_eq!(m.get(2), Some(false));
    }

    #[test]
    fn model_across_lines() {
        let c = parse_solver_output(b"c hi\ns SATISFIABLE\nv 1 2\nv -3 0\n", 10).unwrap();
        assert_eq!(c.model.unwrap().lits().len(), 3);
    }

    #[test]
    fn unsat_and_unknown() {
        assert_eq!(parse_solver_output(b"s UNSATISFIABLE\n", 20).unwrap().kind, ClaimKind::Unsat);
        assert_eq!(parse_solver_output(b"c timeout\n", 0).unwrap().kind, ClaimKind::Unknown);
        assert_eq!(parse_solver_output(b"s UNKNOWN\n", 0).unwrap().kind, ClaimKind::Unknown);
    }

    #[test]
    fn exit_code_conflicts() {
        assert!(matches!(
            parse_solver_output(b"s SATISFIABLE\nv 0\n", 20),
            Err(OutputError::ConflictingStatus { exit: 20, .. })
        ));
        assert!(matches!(
            parse_solver_output(b"c nothing\n", 10),
            Err(OutputError::ConflictingStatus { status: ClaimKind::Unknown, .. })
        ));
        assert!(matches!(
            parse_solver_output(b"s UNSATISFIABLE\n", 139),
            Err(OutputError::ConflictingStatus { .. })
        ));
        // exit 0 with a status line is tolerated
        assert_eq!(parse_solver_output(b"s UNSATISFIABLE\n", 0).unwrap().kind, ClaimKind::Unsat);
    }

    #[test]
    fn malformed_values() {
        assert!(matches!(
            parse_solver_output(b"s SATISFIABLE\nv 1 x 0\n", 10),
            Err(OutputError::MalformedValueLine(_))
        ));
        assert!(matches!(
            parse_solver_output(b"s SATISFIABLE\nv 1 2\n", 10),
            Err(OutputError::MalformedValueLine(_))
        ));
        assert!(matches!(
            parse_solver_output(b"s SATISFIABLE\nv 1 -1 0\n", 10),
            Err(OutputError::MalformedValueLine(_))
        ));
    }
}
