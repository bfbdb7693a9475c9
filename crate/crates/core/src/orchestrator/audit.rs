//! Append-only log of pipeline steps and the ordering checks over it.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Plan,
    Code,
    Layout,
    Compliance,
    Build,
    Stage1,
    Stage2,
    Benchmark,
    Decision,
    RuleEvolution,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEvent {
    pub cycle: u32,
    pub variant: String,
    pub step: Step,
    pub ok: bool,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("cycle {cycle}: {step:?} on {variant} without a passed {missing:?}")]
pub struct AuditViolation {
    pub cycle: u32,
    pub variant: String,
    pub step: Step,
    pub missing: Step,
}

/// Steps that must have passed for a variant before `step` may run on it.
fn prerequisites(step: Step) -> &'static [Step] {
    match step {
        Step::Compliance => &[Step::Layout],
        Step::Build => &[Step::Layout, Step::Compliance],
        Step::Stage1 => &[Step::Layout, Step::Compliance, Step::Build],
        Step::Stage2 => &[Step::Layout, Step::Compliance, Step::Build, Step::Stage1],
        Step::Benchmark => &[Step::Layout, Step::Compliance, Step::Build, Step::Stage1, Step::Stage2],
        _ => &[],
    }
}

/// Checks, in log order, that no step ran on a variant before its
/// prerequisites passed on that variant.
pub fn check_audit(events: &[AuditEvent]) -> Result<(), AuditViolation> {
    let mut passed: BTreeMap<&str, BTreeSet<Step>> = BTreeMap::new();
    for e in events {
        let done = passed.entry(e.variant.as_str()).or_default();
        if let Some(&missing) = prerequisites(e.step).iter().find(|s| !done.contains(s)) {
            return Err(AuditViolation {
                cycle: e.cycle,
                variant: e.variant.clone(),
                step: e.step,
                missing,
            });
        }
        if e.ok {
            done.insert(e.step);
        }
    }
    Ok(())
}

pub fn append_events(path: &Path, events: &[AuditEvent]) -> std::io::Result<()> {
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
    for e in events {
        serde_json::to_writer(&mut f, e)?;
        f.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_events(path: &Path) -> std::io::Result<Vec<AuditEvent>> {
    if !path.is_file() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for line in std::io::BufReader::new(fs::File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
