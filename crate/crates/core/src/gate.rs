//! Two-stage correctness gate.
//!
//! Stage 1 runs a small suite with known answers under a short limit and
//! flags crashes, timeouts, malformed output and wrong answers. Stage 2 runs
//! a validation suite with proof emission on, re-checks every SAT model
//! against the formula and every UNSAT claim's DRAT proof, and compares
//! claims with the recorded ground truth.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::drat::{check_proof, parse_drat_file};
use crate::formula::{check_model, parse_dimacs_file, ModelMode, ModelVerdict, ParseOptions};
use crate::metrics::{Truth, VbsTable};
use crate::pool::WorkerPool;
use crate::runner::{run_benchmark, Executor, Outcome, ResourceLimits, RunRecord, SweepOptions, SweepTarget};
use crate::workspace::{BuildResult, SolverVariant};

/// Name of the ground-truth table inside a suite directory.
pub const TRUTH_FILE: &str = "truth.txt";
pub const STAGE1_TIMEOUT: f64 = 30.0;
pub const STAGE2_TIMEOUT: f64 = 300.0;
pub const STAGE2_COUNT: usize = 50;
pub const MAX_SMOKE_INSTANCES: usize = 200;

#[derive(Debug, thiserror::Error)]
pub enum GateError {
    #[error("suite {0} missing or has no {TRUTH_FILE}")]
    SuiteMissing(PathBuf),
    #[error("suite instance {0} listed in {TRUTH_FILE} but not found")]
    InstanceMissing(PathBuf),
    #[error(transparent)]
    Truth(#[from] crate::metrics::MetricsError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteInstance {
    pub name: String,
    pub path: PathBuf,
    pub truth: Truth,
}

/// Instances with known outcomes, ordered by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmokeSuite {
    pub label: String,
    pub instances: Vec<SuiteInstance>,
}

impl SmokeSuite {
    /// Loads `dir`, whose `truth.txt` names each instance file relative to
    /// `dir`.
    pub fn load(dir: &Path, label: impl Into<String>) -> Result<Self, GateError> {
        let truth_path = dir.join(TRUTH_FILE);
        if !truth_path.is_file() {
            return Err(GateError::SuiteMissing(dir.to_path_buf()));
        }
        let table = VbsTable::load(&truth_path)?;
        let mut instances = Vec::with_capacity(table.len());
        for (name, entry) in &table.entries {
            let path = dir.join(name);
            if !path.is_file() {
                return Err(GateError::InstanceMissing(path));
            }
            instances.push(SuiteInstance {
                name: name.clone(),
                path,
                truth: entry.truth,
            });
        }
        Ok(SmokeSuite {
            label: label.into(),
            instances,
        })
    }

    /// The first `n` instances by name.
    pub fn take(&self, n: usize) -> SmokeSuite {
        SmokeSuite {
            label: self.label.clone(),
            instances: self.instances.iter().take(n).cloned().collect(),
        }
    }

    pub fn paths(&self) -> Vec<PathBuf> {
        self.instances.iter().map(|i| i.path.clone()).collect()
    }

    pub fn truth_table(&self) -> VbsTable {
        VbsTable::from_truths(self.instances.iter().map(|i| (i.name.clone(), i.truth)))
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    Stage1,
    Stage2,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Stage1 => "stage 1",
            Stage::Stage2 => "stage 2",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureKind {
    Crash { signal: Option<i32>, exit_code: Option<i32> },
    WrongAnswer { claimed: Truth, truth: Truth },
    /// `clause` is the 1-based first violated clause, if the model parsed.
    InvalidModel { clause: Option<usize> },
    InvalidProof,
    Timeout,
    OutputMalformed,
}

impl FailureKind {
    pub fn label(&self) -> &'static str {
        match self {
            FailureKind::Crash { .. } => "Crash",
            FailureKind::WrongAnswer { .. } => "WrongAnswer",
            FailureKind::InvalidModel { .. } => "InvalidModel",
            FailureKind::InvalidProof => "InvalidProof",
            FailureKind::Timeout => "Timeout",
            FailureKind::OutputMalformed => "OutputMalformed",
        }
    }
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureKind::Crash { signal: Some(s), .. } => write!(f, "Crash(signal {s})"),
            FailureKind::Crash { exit_code: Some(c), .. } => write!(f, "Crash(exit {c})"),
            FailureKind::WrongAnswer { claimed, truth } => write!(f, "WrongAnswer(claimed {claimed}, expected {truth})"),
            FailureKind::InvalidModel { clause: Some(c) } => write!(f, "InvalidModel(clause {c})"),
            other => f.write_str(other.label()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateFailure {
    pub instance: String,
    pub kind: FailureKind,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateVerdict {
    pub stage: Stage,
    pub passed: bool,
    /// Sorted by instance name.
    pub failures: Vec<GateFailure>,
    /// Set when a failure is a timeout and could vary between runs.
    pub nondeterministic: bool,
}

impl GateVerdict {
    fn from_failures(stage: Stage, mut failures: Vec<GateFailure>) -> Self {
        failures.sort_by(|a, b| a.instance.cmp(&b.instance).then_with(|| a.kind.label().cmp(b.kind.label())));
        GateVerdict {
            stage,
            passed: failures.is_empty(),
            nondeterministic: failures.iter().any(|f| f.kind == FailureKind::Timeout),
            failures,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    /// seconds per instance
    pub stage1_timeout: f64,
    pub stage2_timeout: f64,
    pub mem_limit: Option<u64>,
    /// Check at most this many UNSAT proofs per Stage-2 run (by instance
    /// name); all when `None`.
    pub proof_sample: Option<usize>,
    pub scratch: PathBuf,
}

impl GateConfig {
    pub fn new(scratch: impl Into<PathBuf>) -> Self {
        GateConfig {
            stage1_timeout: STAGE1_TIMEOUT,
            stage2_timeout: STAGE2_TIMEOUT,
            mem_limit: None,
            proof_sample: None,
            scratch: scratch.into(),
        }
    }
}

fn sweep(
    variant: &SolverVariant,
    suite: &SmokeSuite,
    timeout: f64,
    cfg: &GateConfig,
    stage: &str,
    emit_proof: bool,
    executor: &dyn Executor,
) -> Vec<RunRecord> {
    let opts = SweepOptions {
        limits: ResourceLimits {
            wall_timeout: timeout,
            mem_limit: cfg.mem_limit,
            time_resolution: None,
        },
        scratch_root: cfg.scratch.join(stage),
        emit_proof,
    };
    let target = SweepTarget {
        label: variant.id.clone(),
        run_script: variant.run_script(),
    };
    run_benchmark(&target, &suite.paths(), &opts, executor, None)
}

/// Failures visible without re-checking certificates. Unknown answers are
/// not failures.
fn runtime_failure(record: &RunRecord, truth: Truth) -> Option<GateFailure> {
    let detail = record.detail.clone().unwrap_or_default();
    let kind = match &record.outcome {
        Outcome::Crashed { signal, exit_code } => FailureKind::Crash {
            signal: *signal,
            exit_code: *exit_code,
        },
        Outcome::MemOut => {
            return Some(GateFailure {
                instance: record.instance.clone(),
                kind: FailureKind::Crash {
                    signal: Some(libc::SIGKILL),
                    exit_code: None,
                },
                detail: "killed at the memory limit".into(),
            })
        }
        Outcome::Timeout => FailureKind::Timeout,
        Outcome::Malformed => FailureKind::OutputMalformed,
        Outcome::Unknown => return None,
        Outcome::SolvedSat | Outcome::SolvedUnsat => {
            let claimed = Truth::claimed_by(&record.outcome).unwrap();
            if claimed == truth {
                return None;
            }
            FailureKind::WrongAnswer { claimed, truth }
        }
    };
    let detail = match &kind {
        FailureKind::Timeout => format!("no answer within {} s", record.wall_time),
        FailureKind::Crash { signal: Some(s), .. } => format!("killed by signal {s} ({}) {detail}", signal_name(*s)),
        _ => detail,
    };
    Some(GateFailure {
        instance: record.instance.clone(),
        kind,
        detail: detail.trim().to_string(),
    })
}

fn signal_name(sig: i32) -> &'static str {
    match sig {
        libc::SIGSEGV => "segmentation fault",
        libc::SIGABRT => "abort",
        libc::SIGFPE => "floating point exception",
        libc::SIGBUS => "bus error",
        libc::SIGKILL => "killed",
        libc::SIGILL => "illegal instruction",
        _ => "signal",
    }
}

fn truth_of<'a>(suite: &'a SmokeSuite) -> impl Fn(&str) -> Truth + 'a {
    move |name| {
        suite
            .instances
            .iter()
            .find(|i| i.name == name)
            .map(|i| i.truth)
            .expect("record for a suite instance")
    }
}

/// Stage 1: crashes, timeouts, malformed output and wrong answers.
pub fn stage1_smoke(variant: &SolverVariant, suite: &SmokeSuite, cfg: &GateConfig, executor: &dyn Executor) -> GateVerdict {
    let records = sweep(variant, suite, cfg.stage1_timeout, cfg, "stage1", false, executor);
    let truth = truth_of(suite);
    let failures = records.iter().filter_map(|r| runtime_failure(r, truth(&r.instance))).collect();
    GateVerdict::from_failures(Stage::Stage1, failures)
}

fn certificate_failure(record: &RunRecord, path: &Path) -> Option<GateFailure> {
    let fail = |kind, detail: String| {
        Some(GateFailure {
            instance: record.instance.clone(),
            kind,
            detail,
        })
    };
    let formula = match parse_dimacs_file(path, ParseOptions::default()) {
        Ok(p) => p.formula,
        Err(e) => return fail(FailureKind::OutputMalformed, format!("instance does not parse: {e}")),
    };
    match record.outcome {
        Outcome::SolvedSat => {
            let Some(model) = record.claim.as_ref().and_then(|c| c.model.as_ref()) else {
                return fail(FailureKind::InvalidModel { clause: None }, "no model printed".into());
            };
            match check_model(&formula, model, ModelMode::Lenient) {
                Ok(ModelVerdict::Satisfied { .. }) => None,
                Ok(ModelVerdict::Violated { clause }) => fail(
                    FailureKind::InvalidModel { clause: Some(clause) },
                    format!("model falsifies clause {clause}"),
                ),
                Err(e) => fail(FailureKind::InvalidModel { clause: None }, e.to_string()),
            }
        }
        Outcome::SolvedUnsat => {
            let Some(proof_path) = record.proof_path.as_ref().filter(|p| p.is_file()) else {
                return fail(FailureKind::InvalidProof, "proof file missing".into());
            };
            let proof = match parse_drat_file(proof_path) {
                Ok(p) => p,
                Err(e) => return fail(FailureKind::InvalidProof, format!("proof does not parse: {e}")),
            };
            let check = check_proof(&formula, &proof);
            match check.verdict {
                crate::drat::ProofVerdict::Valid => None,
                crate::drat::ProofVerdict::Invalid { lemma, reason } => {
                    fail(FailureKind::InvalidProof, format!("lemma {lemma}: {reason}"))
                }
            }
        }
        _ => None,
    }
}

/// Stage 2: Stage-1 checks plus model and proof re-validation against
/// ground truth. Certificate checks run on `pool`.
pub fn stage2_validate(
    variant: &SolverVariant,
    suite: &SmokeSuite,
    cfg: &GateConfig,
    executor: &dyn Executor,
    pool: &WorkerPool,
) -> GateVerdict {
    let records = sweep(variant, suite, cfg.stage2_timeout, cfg, "stage2", true, executor);
    let truth = truth_of(suite);
    let mut failures = Vec::new();
    let mut to_certify: Vec<(&RunRecord, PathBuf)> = Vec::new();
    let mut proofs = 0usize;
    for (r, inst) in records.iter().zip(&suite.instances) {
        debug_assert_eq!(r.instance, inst.name);
        if let Some(f) = runtime_failure(r, truth(&r.instance)) {
            failures.push(f);
            continue;
        }
        match r.outcome {
            Outcome::SolvedSat => to_certify.push((r, inst.path.clone())),
            Outcome::SolvedUnsat if cfg.proof_sample.is_none_or(|k| proofs < k) => {
                proofs += 1;
                to_certify.push((r, inst.path.clone()));
            }
            _ => {}
        }
    }
    failures.extend(pool.map(&to_certify, |(r, p)| certificate_failure(r, p)).into_iter().flatten());
    GateVerdict::from_failures(Stage::Stage2, failures)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackEntry {
    /// "build", "stage 1" or "stage 2"
    pub stage: String,
    pub instance: Option<String>,
    pub kind: String,
    pub detail: String,
}

/// What the agent is told after the gates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackDocument {
    pub eligible: bool,
    pub entries: Vec<FeedbackEntry>,
    pub markdown: String,
}

/// Fixed guidance attached to each Stage-2 failure class.
fn stage2_template(kind: &FailureKind) -> &'static str {
    match kind {
        FailureKind::InvalidModel { .. } => {
            "The printed assignment does not satisfy the formula. Check that every variable is printed with its final \
             value and that the value lines end with 0."
        }
        FailureKind::InvalidProof => {
            "The UNSAT claim is not backed by a valid DRAT refutation. Every added lemma must be RUP or RAT with \
             respect to the clauses alive at that point, deletions must not remove clauses still needed, and the proof \
             must derive the empty clause. The proof file must be written to the path given as the second argument."
        }
        FailureKind::WrongAnswer { .. } => {
            "The answer contradicts the recorded ground truth. Revert to the last known-good logic for the affected \
             code path before attempting further optimizations."
        }
        FailureKind::Crash { .. } => "The solver crashed on a validation instance; see the captured stderr.",
        FailureKind::Timeout => "The solver did not answer within the validation time limit.",
        FailureKind::OutputMalformed => {
            "The output violates the status-line / exit-code convention (s SATISFIABLE with exit 10, s UNSATISFIABLE \
             with exit 20)."
        }
    }
}

/// Builds the feedback document. Entries are ordered build, Stage 1,
/// Stage 2, and by instance within a stage.
pub fn craft_feedback(build: Option<&BuildResult>, verdicts: &[GateVerdict]) -> FeedbackDocument {
    let mut entries = Vec::new();
    let mut md = String::from("# Gate feedback\n\n");
    let build_failed = build.is_some_and(|b| !b.success);
    if let Some(b) = build.filter(|b| !b.success) {
        let kind = if b.timed_out { "BuildTimeout" } else { "CompileError" };
        entries.push(FeedbackEntry {
            stage: "build".into(),
            instance: None,
            kind: kind.into(),
            detail: b.diagnostics.clone(),
        });
        writeln!(md, "## Build failed ({kind})\n\n```\n{}\n```\n", b.diagnostics.trim_end()).unwrap();
    }
    let mut sorted: Vec<&GateVerdict> = verdicts.iter().collect();
    sorted.sort_by_key(|v| v.stage);
    for v in sorted {
        if v.passed {
            writeln!(md, "## {}: passed\n", v.stage).unwrap();
            continue;
        }
        writeln!(md, "## {}: {} failure(s)\n", v.stage, v.failures.len()).unwrap();
        for f in &v.failures {
            entries.push(FeedbackEntry {
                stage: v.stage.to_string(),
                instance: Some(f.instance.clone()),
                kind: f.kind.to_string(),
                detail: f.detail.clone(),
            });
            writeln!(md, "- `{}`: {} {}", f.instance, f.kind, f.detail).unwrap();
            if v.stage == Stage::Stage2 {
                writeln!(md, "  - {}", stage2_template(&f.kind)).unwrap();
            }
        }
        if v.nondeterministic {
            writeln!(md, "\nTimeouts above may not reproduce on a rerun.").unwrap();
        }
        md.push('\n');
    }
    let stages_passed = verdicts.iter().filter(|v| v.passed).map(|v| v.stage).collect::<Vec<_>>();
    let eligible = !build_failed
        && entries.is_empty()
        && stages_passed.contains(&Stage::Stage1)
        && stages_passed.contains(&Stage::Stage2);
    if eligible {
        md.push_str("All gates passed; the variant is eligible for performance evaluation.\n");
    }
    FeedbackDocument {
        eligible,
        entries,
        markdown: md,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn failure(instance: &str, kind: FailureKind) -> GateFailure {
        GateFailure {
            instance: instance.into(),
            kind,
            detail: "d".into(),
        }
    }

    #[test]
    fn verdict_sorted_and_flagged() {
        let v = GateVerdict::from_failures(
            Stage::Stage1,
            vec![failure("b", FailureKind::Timeout), failure("a", FailureKind::OutputMalformed)],
        );
        assert!(!v.passed && v.nondeterministic);
        assert_eq!(v.failures[0].instance, "a");
        assert!(GateVerdict::from_failures(Stage::Stage2, vec![]).passed);
    }

    #[test]
    fn feedback_orders_stages_and_reports_eligibility() {
        let s2 = GateVerdict::from_failures(Stage::Stage2, vec![failure("x", FailureKind::InvalidProof)]);
        let s1 = GateVerdict::from_failures(
            Stage::Stage1,
            vec![failure(
                "y",
                FailureKind::Crash {
                    signal: Some(11),
                    exit_code: None,
                },
            )],
        );
        let doc = craft_feedback(None, &[s2, s1]);
        assert!(!doc.eligible);
        assert_eq!(doc.entries.len(), 2);
        assert_eq!(doc.entries[0].stage, "stage 1");
        assert_eq!(doc.entries[1].stage, "stage 2");
        assert!(doc.markdown.contains("DRAT"));

        let ok = [
            GateVerdict::from_failures(Stage::Stage1, vec![]),
            GateVerdict::from_failures(Stage::Stage2, vec![]),
        ];
        assert!(craft_feedback(None, &ok).markdown.contains("eligible"));
        assert!(craft_feedback(None, &ok).eligible);
    }

    #[test]
    fn build_diagnostics_verbatim() {
        let b = BuildResult {
            success: false,
            timed_out: false,
            diagnostics: "src/solver.c:3:1: error: expected ';'".into(),
            duration: 0.1,
            binary_hash: None,
        };
        let doc = craft_feedback(Some(&b), &[]);
        assert_eq!(doc.entries[0].detail, b.diagnostics);
        assert!(doc.markdown.contains("error: expected ';'"));
    }

    #[test]
    fn missing_suite() {
        let d = tempfile::tempdir().unwrap();
        assert!(matches!(SmokeSuite::load(d.path(), "x"), Err(GateError::SuiteMissing(_))));
    }
}
