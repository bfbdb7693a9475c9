//! Champion/challenger loop: plan, code, layout, compliance, build, Stage 1,
//! Stage 2, benchmark, decision, then rule evolution from the post-mortem.
//!
//! Store layout:
//!
//! ```text
//! <store>/cycle_<k>/variant_<k>/   the challenger (cycle 0 holds the seed)
//! <store>/cycle_<k>/cycle.json     the CycleRecord
//! <store>/cycle_<k>/feedback.md    feedback handed to the next cycle
//! <store>/cycle_<k>/report.json    evaluation report, when benchmarked
//! <store>/rules/                   live rule set, snapshots in .snapshots/
//! <store>/audit.jsonl              pipeline steps in order
//! <store>/trajectory.csv           one row per cycle, deterministic fields
//! <store>/state.json               resume point
//! <store>/PAUSE                    present: stop before the next cycle
//! ```

pub mod agent;
pub mod audit;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use agent::{
    apply_patch_set, AgentBackend, AgentContext, AgentError, AgentPatchSet, EditChange, FileEdit, HttpBackend, Plan, Script,
    ScriptStep, ScriptedBackend, ScriptedFault,
};
pub use audit::{check_audit, AuditEvent, AuditViolation, Step};

use crate::gate::{craft_feedback, stage1_smoke, stage2_validate, GateConfig, GateVerdict, SmokeSuite, STAGE2_COUNT};
use crate::metrics::{build_report, EvaluationReport, MetricsError, VbsTable};
use crate::pool::WorkerPool;
use crate::rules::{
    analyze_failures, compliance_check, evolve_rules, load_rules, ComplianceReport, RuleError, RuleSet, SnapshotStore,
};
use crate::runner::{pair_run, run_benchmark, write_records, Executor, ResourceLimits, RunRecord, SweepOptions, SweepTarget};
use crate::workspace::{
    build_variant, copy_variant, record_lineage, timestamp, validate_layout, BuildResult, LineageEntry, SolverVariant,
    WorkspaceError,
};

pub const DEFAULT_SWITCH_CYCLE: u32 = 33;
pub const PAUSE_FILE: &str = "PAUSE";
const STATE_FILE: &str = "state.json";
const AUDIT_FILE: &str = "audit.jsonl";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
const HISTORY_LINES: usize = 10;
const LINEAGE_TAIL: usize = 4000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// more is better
    SolvedCount,
    /// less is better
    Par2,
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObjectiveKind::SolvedCount => "solved",
            ObjectiveKind::Par2 => "par2",
        })
    }
}

/// `kind` until `switch_cycle`, PAR-2 from that cycle on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub kind: ObjectiveKind,
    pub switch_cycle: u32,
    /// Required strict margin of improvement.
    pub epsilon: f64,
}

impl Default for Objective {
    fn default() -> Self {
        Objective {
            kind: ObjectiveKind::SolvedCount,
            switch_cycle: DEFAULT_SWITCH_CYCLE,
            epsilon: 0.0,
        }
    }
}

impl Objective {
    pub fn active(&self, cycle: u32) -> ObjectiveKind {
        if cycle >= self.switch_cycle {
            ObjectiveKind::Par2
        } else {
            self.kind
        }
    }

    pub fn value(kind: ObjectiveKind, s: &EvalSummary) -> f64 {
        match kind {
            ObjectiveKind::SolvedCount => s.solved as f64,
            ObjectiveKind::Par2 => s.par2,
        }
    }

    /// Strict improvement; ties keep the incumbent.
    pub fn improves(&self, kind: ObjectiveKind, challenger: &EvalSummary, champion: &EvalSummary) -> bool {
        let (c, i) = (Self::value(kind, challenger), Self::value(kind, champion));
        match kind {
            ObjectiveKind::SolvedCount => c > i + self.epsilon,
            ObjectiveKind::Par2 => c < i - self.epsilon,
        }
    }
}

/// Deterministic part of an [`EvaluationReport`]: memory figures are left
/// out so that replays compare equal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub solved: usize,
    pub solved_sat: usize,
    pub solved_unsat: usize,
    pub par2: f64,
    pub par2_sat: Option<f64>,
    pub par2_unsat: Option<f64>,
    pub vbs_mismatches: usize,
    pub additionally_solved: usize,
    pub outcome_counts: BTreeMap<String, usize>,
}

impl From<&EvaluationReport> for EvalSummary {
    fn from(r: &EvaluationReport) -> Self {
        EvalSummary {
            solved: r.solved(),
            solved_sat: r.solved_sat,
            solved_unsat: r.solved_unsat,
            par2: r.par2_overall,
            par2_sat: r.par2_sat,
            par2_unsat: r.par2_unsat,
            vbs_mismatches: r.vbs_mismatches.len(),
            additionally_solved: r.additionally_solved.len(),
            outcome_counts: r.outcome_counts.clone(),
        }
    }
}

/// [`BuildResult`] without the wall-clock duration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildSummary {
    pub success: bool,
    pub timed_out: bool,
    pub diagnostics: String,
    pub binary_hash: Option<String>,
}

impl From<&BuildResult> for BuildSummary {
    fn from(b: &BuildResult) -> Self {
        BuildSummary {
            success: b.success,
            timed_out: b.timed_out,
            diagnostics: b.diagnostics.clone(),
            binary_hash: b.binary_hash.clone(),
        }
    }
}

impl BuildSummary {
    fn as_result(&self) -> BuildResult {
        BuildResult {
            success: self.success,
            timed_out: self.timed_out,
            diagnostics: self.diagnostics.clone(),
            duration: 0.0,
            binary_hash: self.binary_hash.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Accepted,
    RejectedGate,
    RejectedCompliance,
    RejectedRegression,
    /// The agent proposed no edits.
    RejectedNoOp,
    /// The agent backend failed; the champion is untouched.
    Failed,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Invariant: `Accepted` implies a compliant report, passed gates and an
/// objective strictly better than the previous champion's.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: u32,
    pub variant: String,
    pub plan: String,
    pub hypothesis: String,
    pub intent: String,
    pub patch_digest: Option<String>,
    pub edited_files: Vec<String>,
    pub added_lines: Vec<String>,
    pub layout_violations: Vec<String>,
    pub compliance: Option<ComplianceReport>,
    pub build: Option<BuildSummary>,
    pub gates: Vec<GateVerdict>,
    pub evaluation: Option<EvalSummary>,
    /// The champion measured in the same paired sweep.
    pub champion_remeasured: Option<EvalSummary>,
    pub decision: Decision,
    /// Pipeline step that ended the cycle, for rejections.
    pub rejected_at: Option<String>,
    pub rejection: Option<String>,
    pub objective_kind: ObjectiveKind,
    pub objective: Option<f64>,
    /// Champion after the decision.
    pub champion: String,
    pub champion_objective: f64,
    pub champion_par2: f64,
    pub rule_versions: BTreeMap<String, u32>,
    pub rule_patches: usize,
    pub rule_snapshot: Option<String>,
}

impl CycleRecord {
    pub fn new(cycle: u32, variant: impl Into<String>) -> Self {
        CycleRecord {
            cycle,
            variant: variant.into(),
            plan: String::new(),
            hypothesis: String::new(),
            intent: String::new(),
            patch_digest: None,
            edited_files: Vec::new(),
            added_lines: Vec::new(),
            layout_violations: Vec::new(),
            compliance: None,
            build: None,
            gates: Vec::new(),
            evaluation: None,
            champion_remeasured: None,
            decision: Decision::Failed,
            rejected_at: None,
            rejection: None,
            objective_kind: ObjectiveKind::SolvedCount,
            objective: None,
            champion: String::new(),
            champion_objective: 0.0,
            champion_par2: 0.0,
            rule_versions: BTreeMap::new(),
            rule_patches: 0,
            rule_snapshot: None,
        }
    }

    fn reject(&mut self, decision: Decision, at: &str, why: impl Into<String>) {
        self.decision = decision;
        self.rejected_at = Some(at.to_string());
        self.rejection = Some(why.into());
    }

    fn summary_line(&self) -> String {
        match (&self.rejected_at, &self.rejection) {
            (Some(at), Some(why)) => format!("cycle {}: {} at {at}: {}", self.cycle, self.decision, one_line(why, 200)),
            _ => format!("cycle {}: {}", self.cycle, self.decision),
        }
    }
}

fn one_line(s: &str, max: usize) -> String {
    let s = s.split_whitespace().collect::<Vec<_>>().join(" ");
    match s.char_indices().nth(max) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s,
    }
}

/// Fully resolved run settings.
#[derive(Clone, Debug)]
pub struct EvolutionSettings {
    pub store: PathBuf,
    pub seed: PathBuf,
    /// Initial rule set; the bundled seed when `None`.
    pub rules_dir: Option<PathBuf>,
    pub gate_suite: SmokeSuite,
    pub bench_suite: SmokeSuite,
    pub vbs: VbsTable,
    /// Benchmark limits.
    pub limits: ResourceLimits,
    pub stage1_timeout: f64,
    pub stage2_timeout: f64,
    pub stage2_count: usize,
    pub proof_sample: Option<usize>,
    pub build_timeout: Duration,
    pub objective: Objective,
    pub par_factor: f64,
    pub parallelism: usize,
    pub seed_note: String,
}

impl EvolutionSettings {
    pub fn new(store: PathBuf, seed: PathBuf, gate_suite: SmokeSuite, bench_suite: SmokeSuite, limits: ResourceLimits) -> Self {
        EvolutionSettings {
            store,
            seed,
            rules_dir: None,
            vbs: bench_suite.truth_table(),
            gate_suite,
            bench_suite,
            limits,
            stage1_timeout: crate::gate::STAGE1_TIMEOUT,
            stage2_timeout: crate::gate::STAGE2_TIMEOUT,
            stage2_count: STAGE2_COUNT,
            proof_sample: None,
            build_timeout: crate::workspace::DEFAULT_BUILD_TIMEOUT,
            objective: Objective::default(),
            par_factor: crate::metrics::DEFAULT_PAR_FACTOR,
            parallelism: 1,
            seed_note: DEFAULT_SEED_NOTE.into(),
        }
    }
}

pub const DEFAULT_SEED_NOTE: &str =
    "Seed: the bundled toy DPLL solver. Each accepted challenger becomes the starting point of the next cycle.";

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error("seed variant rejected at {step}: {detail}")]
    SeedRejected { step: String, detail: String },
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Audit(#[from] AuditViolation),
    #[error("state: {0}")]
    State(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct EvolutionState {
    next_cycle: u32,
    champion: String,
    champion_root: PathBuf,
    champion_report: EvalSummary,
    seed_report: EvalSummary,
    last_feedback: String,
    seen_signatures: BTreeSet<String>,
    records: Vec<CycleRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionOutcome {
    pub records: Vec<CycleRecord>,
    pub champion: String,
    pub champion_report: EvalSummary,
    pub seed_report: EvalSummary,
    /// Stopped by the pause flag.
    pub paused: bool,
    /// The backend had no further plans.
    pub exhausted: bool,
    pub trajectory: PathBuf,
}

struct Evaluated {
    report: EvaluationReport,
    records: Vec<RunRecord>,
}

struct Orchestrator<'a> {
    settings: &'a EvolutionSettings,
    backend: &'a dyn AgentBackend,
    executor: &'a dyn Executor,
    pool: WorkerPool,
    rules: RuleSet,
    snapshots: SnapshotStore,
    audit: Vec<AuditEvent>,
}

impl Orchestrator<'_> {
    fn rules_dir(&self) -> PathBuf {
        self.settings.store.join("rules")
    }

    fn cycle_dir(&self, cycle: u32) -> PathBuf {
        self.settings.store.join(format!("cycle_{cycle}"))
    }

    fn log(&mut self, cycle: u32, variant: &str, step: Step, ok: bool) {
        log::debug!("cycle {cycle} {variant}: {step:?} {}", if ok { "ok" } else { "failed" });
        self.audit.push(AuditEvent {
            cycle,
            variant: variant.to_string(),
            step,
            ok,
        });
    }

    fn gate_config(&self, cycle: u32) -> GateConfig {
        let mut cfg = GateConfig::new(self.cycle_dir(cycle).join("scratch"));
        cfg.stage1_timeout = self.settings.stage1_timeout;
        cfg.stage2_timeout = self.settings.stage2_timeout;
        cfg.mem_limit = self.settings.limits.mem_limit;
        cfg.proof_sample = self.settings.proof_sample;
        cfg
    }

    fn sweep_options(&self, cycle: u32) -> SweepOptions {
        SweepOptions {
            limits: self.settings.limits.clone(),
            scratch_root: self.cycle_dir(cycle).join("scratch").join("bench"),
            emit_proof: false,
        }
    }

    fn report(&self, records: &[RunRecord]) -> Result<EvaluationReport, MetricsError> {
        build_report(records, &self.settings.vbs, &self.settings.limits, self.settings.par_factor)
    }

    /// Layout, compliance, build and both gate stages. On rejection the
    /// record carries the decision and the function returns false.
    fn pipeline(&mut self, rec: &mut CycleRecord, variant: &SolverVariant) -> Result<bool, OrchestratorError> {
        let (cycle, id) = (rec.cycle, variant.id.clone());
        match validate_layout(&variant.root, &id)? {
            Ok(_) => self.log(cycle, &id, Step::Layout, true),
            Err(violations) => {
                self.log(cycle, &id, Step::Layout, false);
                rec.layout_violations = violations.iter().map(|v| v.to_string()).collect();
                rec.reject(Decision::RejectedGate, "layout", rec.layout_violations.join("; "));
                return Ok(false);
            }
        }
        let compliance = compliance_check(variant, &self.rules);
        self.log(cycle, &id, Step::Compliance, compliance.compliant);
        let compliant = compliance.compliant;
        let findings = compliance.findings.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("; ");
        rec.compliance = Some(compliance);
        if !compliant {
            rec.reject(Decision::RejectedCompliance, "compliance", findings);
            return Ok(false);
        }
        let scratch = self.cycle_dir(cycle).join("scratch");
        let build = build_variant(variant, self.settings.build_timeout, &scratch.join("build"))?;
        self.log(cycle, &id, Step::Build, build.success);
        rec.build = Some(BuildSummary::from(&build));
        if !build.success {
            rec.reject(Decision::RejectedGate, "build", one_line(&build.diagnostics, 400));
            return Ok(false);
        }
        let cfg = self.gate_config(cycle);
        let v1 = stage1_smoke(variant, &self.settings.gate_suite, &cfg, self.executor);
        self.log(cycle, &id, Step::Stage1, v1.passed);
        let passed = v1.passed;
        rec.gates.push(v1);
        if !passed {
            rec.reject(Decision::RejectedGate, "stage1", gate_summary(rec.gates.last().unwrap()));
            return Ok(false);
        }
        let suite2 = self.settings.gate_suite.take(self.settings.stage2_count);
        let v2 = stage2_validate(variant, &suite2, &cfg, self.executor, &self.pool);
        self.log(cycle, &id, Step::Stage2, v2.passed);
        let passed = v2.passed;
        rec.gates.push(v2);
        if !passed {
            rec.reject(Decision::RejectedGate, "stage2", gate_summary(rec.gates.last().unwrap()));
            return Ok(false);
        }
        Ok(true)
    }

    fn target(variant: &SolverVariant) -> SweepTarget {
        SweepTarget {
            label: variant.id.clone(),
            run_script: variant.run_script(),
        }
    }

    fn evaluate_seed(&mut self) -> Result<EvolutionState, OrchestratorError> {
        let dir = self.cycle_dir(0);
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        let id = "variant_0";
        let seed = SolverVariant::new("seed", &self.settings.seed);
        let variant = copy_variant(&seed, &dir.join(id), id)?;
        let mut rec = CycleRecord::new(0, id);
        if !self.pipeline(&mut rec, &variant)? {
            self.flush_audit()?;
            return Err(OrchestratorError::SeedRejected {
                step: rec.rejected_at.unwrap_or_default(),
                detail: rec.rejection.unwrap_or_default(),
            });
        }
        let records = run_benchmark(
            &Self::target(&variant),
            &self.settings.bench_suite.paths(),
            &self.sweep_options(0),
            self.executor,
            None,
        );
        self.log(0, id, Step::Benchmark, true);
        let ev = Evaluated {
            report: self.report(&records)?,
            records,
        };
        self.save_evaluation(0, &ev)?;
        let summary = EvalSummary::from(&ev.report);
        self.log(0, id, Step::Decision, true);
        let _ = fs::remove_dir_all(dir.join("scratch"));
        self.flush_audit()?;
        Ok(EvolutionState {
            next_cycle: 1,
            champion: id.into(),
            champion_root: variant.root,
            champion_report: summary.clone(),
            seed_report: summary,
            last_feedback: String::new(),
            seen_signatures: BTreeSet::new(),
            records: Vec::new(),
        })
    }

    fn save_evaluation(&self, cycle: u32, ev: &Evaluated) -> Result<(), OrchestratorError> {
        let dir = self.cycle_dir(cycle);
        fs::write(dir.join("report.json"), ev.report.to_json())?;
        let mut buf = Vec::new();
        write_records(&mut buf, &ev.records)?;
        fs::write(dir.join("records.jsonl"), buf)?;
        Ok(())
    }

    fn flush_audit(&mut self) -> Result<(), OrchestratorError> {
        check_audit(&self.audit)?;
        let path = self.settings.store.join(AUDIT_FILE);
        let already = audit::read_events(&path)?.len();
        audit::append_events(&path, &self.audit[already.min(self.audit.len())..])?;
        Ok(())
    }

    fn context(&self, state: &EvolutionState, cycle: u32) -> AgentContext {
        let changelog = fs::read_to_string(state.champion_root.join("CHANGELOG.md")).unwrap_or_default();
        let start = changelog.len().saturating_sub(LINEAGE_TAIL);
        let start = (start..changelog.len()).find(|&i| changelog.is_char_boundary(i)).unwrap_or(changelog.len());
        let kind = self.settings.objective.active(cycle);
        AgentContext {
            cycle,
            rule_versions: self.rules.versions(),
            rules: self.rules.render(),
            champion: state.champion.clone(),
            champion_report: Some(state.champion_report.clone()),
            last_feedback: state.last_feedback.clone(),
            lineage: changelog[start..].to_string(),
            objective: match kind {
                ObjectiveKind::SolvedCount => "maximize solved instances; ties keep the champion".into(),
                ObjectiveKind::Par2 => format!("minimize PAR-{} score; ties keep the champion", self.settings.par_factor),
            },
            seed_note: self.settings.seed_note.clone(),
            history: state
                .records
                .iter()
                .rev()
                .filter(|r| r.decision != Decision::Accepted)
                .take(HISTORY_LINES)
                .map(CycleRecord::summary_line)
                .collect(),
        }
    }

    /// One cycle; `None` when the backend has no further plan.
    fn run_cycle(&mut self, state: &mut EvolutionState) -> Result<Option<CycleRecord>, OrchestratorError> {
        let cycle = state.next_cycle;
        let id = format!("variant_{cycle}");
        let kind = self.settings.objective.active(cycle);
        let mut rec = CycleRecord::new(cycle, &id);
        rec.rule_versions = self.rules.versions();
        rec.objective_kind = kind;
        let ctx = self.context(state, cycle);
        let plan = match self.backend.plan(&ctx) {
            Ok(None) => return Ok(None),
            Ok(Some(p)) => p,
            Err(e) => {
                self.log(cycle, &id, Step::Plan, false);
                rec.reject(Decision::Failed, "plan", e.to_string());
                return self.finish(state, rec, None).map(Some);
            }
        };
        self.log(cycle, &id, Step::Plan, true);
        rec.plan = plan.text.clone();

        let dir = self.cycle_dir(cycle);
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        let champion = SolverVariant::new(&state.champion, &state.champion_root);
        let variant = copy_variant(&champion, &dir.join(&id), &id)?;
        let set = match self.backend.code(&ctx, &plan, &variant.root) {
            Ok(s) => s,
            Err(e) => {
                self.log(cycle, &id, Step::Code, false);
                rec.reject(Decision::Failed, "code", e.to_string());
                return self.finish(state, rec, Some(&variant)).map(Some);
            }
        };
        rec.hypothesis = set.hypothesis.clone();
        rec.intent = set.intent.clone();
        if set.edits.is_empty() {
            self.log(cycle, &id, Step::Code, false);
            rec.reject(Decision::RejectedNoOp, "code", "empty patch set");
            return self.finish(state, rec, Some(&variant)).map(Some);
        }
        if set.hypothesis.trim().is_empty() {
            self.log(cycle, &id, Step::Code, false);
            rec.reject(Decision::Failed, "code", "patch set without a hypothesis");
            return self.finish(state, rec, Some(&variant)).map(Some);
        }
        match apply_patch_set(&variant.root, &set) {
            Ok(applied) => {
                rec.patch_digest = Some(applied.digest);
                rec.edited_files = applied.files;
                rec.added_lines = applied.added_lines;
            }
            Err(e) => {
                self.log(cycle, &id, Step::Code, false);
                rec.reject(Decision::Failed, "code", e.to_string());
                return self.finish(state, rec, Some(&variant)).map(Some);
            }
        }
        self.log(cycle, &id, Step::Code, true);
        fs::write(
            variant.doc("HYPOTHESIS.md"),
            format!("# Hypothesis, cycle {cycle}\n\n{}\n", set.hypothesis.trim()),
        )?;

        if !self.pipeline(&mut rec, &variant)? {
            return self.finish(state, rec, Some(&variant)).map(Some);
        }

        let (champ_records, chal_records) = pair_run(
            &Self::target(&champion),
            &Self::target(&variant),
            &self.settings.bench_suite.paths(),
            &self.sweep_options(cycle),
            self.executor,
            None,
        );
        self.log(cycle, &state.champion, Step::Benchmark, true);
        self.log(cycle, &id, Step::Benchmark, true);
        let chal = Evaluated {
            report: self.report(&chal_records)?,
            records: chal_records,
        };
        let champ_now = EvalSummary::from(&self.report(&champ_records)?);
        self.save_evaluation(cycle, &chal)?;
        let summary = EvalSummary::from(&chal.report);
        rec.objective = Some(Objective::value(kind, &summary));
        rec.evaluation = Some(summary.clone());
        rec.champion_remeasured = Some(champ_now);

        if summary.vbs_mismatches > 0 {
            rec.reject(
                Decision::RejectedGate,
                "benchmark",
                format!("{} answers contradict the reference table", summary.vbs_mismatches),
            );
        } else if self.settings.objective.improves(kind, &summary, &state.champion_report) {
            rec.decision = Decision::Accepted;
        } else {
            let why = format!(
                "{kind} {} does not improve on champion {}",
                Objective::value(kind, &summary),
                Objective::value(kind, &state.champion_report)
            );
            rec.reject(Decision::RejectedRegression, "decision", why);
        }
        if rec.decision == Decision::Accepted {
            fs::OpenOptions::new()
                .append(true)
                .open(variant.doc("RESULTS.md"))
                .and_then(|mut f| {
                    use std::io::Write;
                    f.write_all(chal.report.to_markdown(&format!("Evaluation, cycle {cycle}")).as_bytes())
                })
                .map_err(WorkspaceError::DocsWriteFailure)?;
        }
        self.finish(state, rec, Some(&variant)).map(Some)
    }

    /// Decision bookkeeping shared by every exit path.
    fn finish(&mut self, state: &mut EvolutionState, mut rec: CycleRecord, variant: Option<&SolverVariant>) -> Result<CycleRecord, OrchestratorError> {
        let cycle = rec.cycle;
        self.log(cycle, &rec.variant, Step::Decision, rec.decision == Decision::Accepted);
        if rec.decision == Decision::Accepted {
            let v = variant.expect("accepted cycles have a variant");
            state.champion = v.id.clone();
            state.champion_root = v.root.clone();
            state.champion_report = rec.evaluation.clone().expect("accepted cycles are evaluated");
        }
        rec.champion = state.champion.clone();
        rec.champion_objective = Objective::value(rec.objective_kind, &state.champion_report);
        rec.champion_par2 = state.champion_report.par2;

        let dir = self.cycle_dir(cycle);
        fs::create_dir_all(&dir)?;
        let mut feedback = craft_feedback(rec.build.as_ref().map(BuildSummary::as_result).as_ref(), &rec.gates).markdown;
        if let Some(c) = rec.compliance.as_ref().filter(|c| !c.compliant) {
            feedback.push_str(&c.to_markdown());
        }
        writeln!(feedback, "\n## Decision\n\n{}", rec.summary_line()).unwrap();
        fs::write(dir.join("feedback.md"), &feedback)?;
        state.last_feedback = feedback;

        if let Some(v) = variant {
            let changes = format!(
                "{}\n\nFiles: {}",
                if rec.intent.is_empty() { &rec.plan } else { &rec.intent },
                rec.edited_files.join(", ")
            );
            let entry = LineageEntry {
                cycle,
                variant: v.id.clone(),
                timestamp: timestamp(),
                changes,
                results: rec.summary_line(),
            };
            record_lineage(v, &entry)?;
        }

        state.records.push(rec);
        let fresh: Vec<_> = analyze_failures(&state.records)
            .into_iter()
            .filter(|s| !state.seen_signatures.contains(&s.key()))
            .collect();
        let champion = SolverVariant::new(&state.champion, &state.champion_root);
        let evolution = evolve_rules(&self.rules, &fresh, &self.snapshots, Some(&champion))?;
        state.seen_signatures.extend(fresh.iter().map(|s| s.key()));
        let rec = state.records.last_mut().unwrap();
        rec.rule_patches = evolution.patches.len();
        rec.rule_snapshot = evolution.snapshot.clone();
        if !evolution.patches.is_empty() {
            self.rules = evolution.rules;
            self.rules.write(&self.rules_dir())?;
        }
        let rec = rec.clone();
        self.log(cycle, &rec.variant, Step::RuleEvolution, true);

        let _ = fs::remove_dir_all(dir.join("scratch"));
        let json = serde_json::to_string_pretty(&rec).map_err(|e| OrchestratorError::State(e.to_string()))?;
        fs::write(dir.join("cycle.json"), json)?;
        state.next_cycle = cycle + 1;
        self.save_state(state)?;
        self.flush_audit()?;
        Ok(rec)
    }

    fn save_state(&self, state: &EvolutionState) -> Result<(), OrchestratorError> {
        let json = serde_json::to_string_pretty(state).map_err(|e| OrchestratorError::State(e.to_string()))?;
        fs::write(self.settings.store.join(STATE_FILE), json)?;
        fs::write(
            self.settings.store.join(TRAJECTORY_FILE),
            trajectory_csv(&state.seed_report, &self.settings.objective, &state.records),
        )?;
        Ok(())
    }
}

fn gate_summary(v: &GateVerdict) -> String {
    let mut s = format!("{} failed on {} instance(s)", v.stage, v.failures.len());
    for f in v.failures.iter().take(3) {
        write!(s, "; {} {}", f.instance, f.kind).unwrap();
    }
    s
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// `cycle,variant,decision,objective,challenger_solved,challenger_par2,
/// champion,champion_solved,champion_par2`; row 0 is the seed.
pub fn trajectory_csv(seed: &EvalSummary, objective: &Objective, records: &[CycleRecord]) -> String {
    let mut s =
        String::from("cycle,variant,decision,objective,challenger_solved,challenger_par2,champion,champion_solved,champion_par2\n");
    writeln!(
        s,
        "0,variant_0,Seed,{},{},{},variant_0,{},{}",
        objective.active(0),
        seed.solved,
        seed.par2,
        seed.solved,
        seed.par2
    )
    .unwrap();
    let mut champion_solved = seed.solved;
    for r in records {
        if r.decision == Decision::Accepted {
            champion_solved = r.evaluation.as_ref().map_or(champion_solved, |e| e.solved);
        }
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.cycle,
            r.variant,
            r.decision,
            r.objective_kind,
            r.evaluation.as_ref().map(|e| e.solved.to_string()).unwrap_or_default(),
            opt(r.evaluation.as_ref().map(|e| e.par2)),
            r.champion,
            champion_solved,
            r.champion_par2
        )
        .unwrap();
    }
    s
}

/// Runs cycles until `n_cycles` cycle ids are used, the backend runs dry or
/// the pause file appears. An existing store is resumed from its state.
pub fn run_evolution(
    settings: &EvolutionSettings,
    backend: &dyn AgentBackend,
    executor: &dyn Executor,
    n_cycles: u32,
) -> Result<EvolutionOutcome, OrchestratorError> {
    fs::create_dir_all(&settings.store)?;
    let rules_dir = settings.store.join("rules");
    let state_path = settings.store.join(STATE_FILE);
    let resumed = state_path.is_file();
    let rules = if resumed {
        load_rules(&rules_dir)?
    } else {
        let _ = fs::remove_file(settings.store.join(AUDIT_FILE));
        let r = match &settings.rules_dir {
            Some(d) => load_rules(d)?,
            None => RuleSet::seed(),
        };
        if rules_dir.exists() {
            fs::remove_dir_all(&rules_dir)?;
        }
        r.write(&rules_dir)?;
        r
    };
    let mut orch = Orchestrator {
        settings,
        backend,
        executor,
        pool: WorkerPool::new(settings.parallelism),
        snapshots: SnapshotStore::for_rules(&rules_dir),
        rules,
        audit: audit::read_events(&settings.store.join(AUDIT_FILE))?,
    };
    let mut state = if resumed {
        let text = fs::read_to_string(&state_path)?;
        serde_json::from_str(&text).map_err(|e| OrchestratorError::State(e.to_string()))?
    } else {
        let s = orch.evaluate_seed()?;
        orch.save_state(&s)?;
        s
    };
    let mut paused = false;
    let mut exhausted = false;
    while state.next_cycle <= n_cycles {
        if settings.store.join(PAUSE_FILE).exists() {
            paused = true;
            break;
        }
        match orch.run_cycle(&mut state)? {
            Some(rec) => log::info!("{}", rec.summary_line()),
            None => {
                exhausted = true;
                break;
            }
        }
    }
    check_audit(&orch.audit)?;
    Ok(EvolutionOutcome {
        records: state.records,
        champion: state.champion,
        champion_report: state.champion_report,
        seed_report: state.seed_report,
        paused,
        exhausted,
        trajectory: settings.store.join(TRAJECTORY_FILE),
    })
}

/// Records of a finished or paused run, read from its store.
pub fn load_records(store: &Path) -> Result<Vec<CycleRecord>, OrchestratorError> {
    let text = fs::read_to_string(store.join(STATE_FILE))?;
    let state: EvolutionState = serde_json::from_str(&text).map_err(|e| OrchestratorError::State(e.to_string()))?;
    Ok(state.records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(solved: usize, par2: f64) -> EvalSummary {
        EvalSummary {
            solved,
            solved_sat: solved,
            solved_unsat: 0,
            par2,
            par2_sat: None,
            par2_unsat: None,
            vbs_mismatches: 0,
            additionally_solved: 0,
            outcome_counts: BTreeMap::new(),
        }
    }

    #[test]
    fn objective_switch_and_ties() {
        let o = Objective::default();
        assert_eq!(o.active(32), ObjectiveKind::SolvedCount);
        assert_eq!(o.active(33), ObjectiveKind::Par2);
        let (a, b) = (summary(5, 10.0), summary(5, 8.0));
        assert!(!o.improves(ObjectiveKind::SolvedCount, &b, &a));
        assert!(o.improves(ObjectiveKind::Par2, &b, &a));
        assert!(!o.improves(ObjectiveKind::Par2, &a, &a));
        let strict = Objective { epsilon: 3.0, ..o };
        assert!(!strict.improves(ObjectiveKind::Par2, &b, &a));
    }

    #[test]
    fn trajectory_rows() {
        let mut r = CycleRecord::new(1, "variant_1");
        r.decision = Decision::Accepted;
        r.objective_kind = ObjectiveKind::Par2;
        r.evaluation = Some(summary(6, 7.5));
        r.champion = "variant_1".into();
        r.champion_par2 = 7.5;
        let mut f = CycleRecord::new(2, "variant_2");
        f.champion = "variant_1".into();
        f.champion_par2 = 7.5;
        let csv = trajectory_csv(&summary(5, 9.0), &Objective::default(), &[r, f]);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[1], "0,variant_0,Seed,solved,5,9,variant_0,5,9");
        assert_eq!(lines[2], "1,variant_1,Accepted,par2,6,7.5,variant_1,6,7.5");
        assert_eq!(lines[3], "2,variant_2,Failed,solved,,,variant_1,6,7.5");
    }
}
