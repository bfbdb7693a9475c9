//! Versioned markdown rulebase (files 00 to 05), compliance scanning, and
//! rule evolution from failure post-mortems.
//!
//! Each rule file starts with `<!-- rule-version: N -->`. Rule 04 declares
//! forbidden source patterns in fenced blocks:
//!
//! ````text
//! ```FORBIDDEN
//! pattern: \bmmap\s*\(
//! rationale: memory comes from the standard allocator only
//! example: mmap(NULL, n, PROT_READ, MAP_PRIVATE, fd, 0);
//! ```
//! ````
//!
//! `literal:` may replace `pattern:` for a plain substring match.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::fs;
use std::io::{BufRead, Write as _};
use std::path::{Path, PathBuf};

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::gate::{FailureKind, Stage};
use crate::orchestrator::{CycleRecord, Decision};
use crate::workspace::{SolverVariant, RUN_SCRIPT};

pub const RULE_FILES: [&str; 6] = [
    "00_rule_compliance_verification.md",
    "01_pre_evaluation_testing.md",
    "02_critical_correctness.md",
    "03_mandatory_logging.md",
    "04_forbidden_patterns.md",
    "05_automatic_rule_evolution.md",
];

const SEED: [&str; 6] = [
    include_str!("../rules/00_rule_compliance_verification.md"),
    include_str!("../rules/01_pre_evaluation_testing.md"),
    include_str!("../rules/02_critical_correctness.md"),
    include_str!("../rules/03_mandatory_logging.md"),
    include_str!("../rules/04_forbidden_patterns.md"),
    include_str!("../rules/05_automatic_rule_evolution.md"),
];

pub const FORBIDDEN_RULE: u8 = 4;
const VERSION_PREFIX: &str = "<!-- rule-version: ";
const SOURCE_EXTENSIONS: [&str; 8] = ["c", "h", "cc", "cpp", "cxx", "hh", "hpp", "hxx"];
pub const SNAPSHOT_DIR: &str = ".snapshots";
const PATCH_LOG: &str = "patches.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum RuleError {
    #[error("rule file {0} missing")]
    MissingRuleFile(String),
    #[error("{file}: malformed FORBIDDEN block at line {line}: {detail}")]
    MalformedForbiddenBlock { file: String, line: usize, detail: String },
    #[error("{0}: missing or malformed rule-version header")]
    MissingVersion(String),
    #[error("snapshot {0} not found")]
    UnknownSnapshot(String),
    #[error("patch log: {0}")]
    PatchLog(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    Regex(String),
    Literal(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForbiddenPattern {
    pub matcher: Matcher,
    pub rationale: String,
    pub example: String,
}

impl ForbiddenPattern {
    pub fn describe(&self) -> &str {
        match &self.matcher {
            Matcher::Regex(p) | Matcher::Literal(p) => p,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleFile {
    pub id: u8,
    pub name: String,
    /// Full file text including the version header.
    pub text: String,
    pub version: u32,
    pub forbidden: Vec<ForbiddenPattern>,
}

fn parse_version(name: &str, text: &str) -> Result<u32, RuleError> {
    let first = text.lines().next().unwrap_or("");
    first
        .strip_prefix(VERSION_PREFIX)
        .and_then(|r| r.strip_suffix(" -->"))
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| RuleError::MissingVersion(name.to_string()))
}

fn parse_forbidden(name: &str, text: &str) -> Result<Vec<ForbiddenPattern>, RuleError> {
    let mut out = Vec::new();
    let mut lines = text.lines().enumerate();
    while let Some((i, line)) = lines.next() {
        if line.trim() != "```FORBIDDEN" {
            continue;
        }
        let err = |detail: &str| RuleError::MalformedForbiddenBlock {
            file: name.to_string(),
            line: i + 1,
            detail: detail.to_string(),
        };
        let mut fields: BTreeMap<&str, String> = BTreeMap::new();
        let mut closed = false;
        for (_, l) in lines.by_ref() {
            if l.trim() == "```" {
                closed = true;
                break;
            }
            if l.trim().is_empty() {
                continue;
            }
            let Some((key, value)) = l.split_once(':') else {
                return Err(err("expected `key: value`"));
            };
            let key = key.trim();
            if !["pattern", "literal", "rationale", "example"].contains(&key) {
                return Err(err(&format!("unknown key `{key}`")));
            }
            fields.insert(key, value.trim().to_string());
        }
        if !closed {
            return Err(err("unterminated block"));
        }
        let matcher = match (fields.remove("pattern"), fields.remove("literal")) {
            (Some(p), None) => {
                Regex::new(&p).map_err(|e| err(&format!("bad pattern: {e}")))?;
                Matcher::Regex(p)
            }
            (None, Some(l)) if !l.is_empty() => Matcher::Literal(l),
            _ => return Err(err("exactly one of `pattern` or `literal` required")),
        };
        out.push(ForbiddenPattern {
            matcher,
            rationale: fields.remove("rationale").unwrap_or_default(),
            example: fields.remove("example").unwrap_or_default(),
        });
    }
    Ok(out)
}

impl RuleFile {
    pub fn parse(id: u8, name: &str, text: String) -> Result<Self, RuleError> {
        let version = parse_version(name, &text)?;
        let forbidden = if id == FORBIDDEN_RULE {
            parse_forbidden(name, &text)?
        } else {
            Vec::new()
        };
        Ok(RuleFile {
            id,
            name: name.to_string(),
            text,
            version,
            forbidden,
        })
    }

    /// Appends `payload` and bumps the version header.
    fn apply(&mut self, payload: &str) -> Result<(), RuleError> {
        let next = self.version + 1;
        let rest = self.text.split_once('\n').map_or("", |(_, r)| r);
        let mut text = format!("{VERSION_PREFIX}{next} -->\n{rest}");
        if !text.ends_with('\n') {
            text.push('\n');
        }
        text.push_str(payload);
        *self = RuleFile::parse(self.id, &self.name, text)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    pub files: Vec<RuleFile>,
}

impl RuleSet {
    pub fn seed() -> Self {
        let files = RULE_FILES
            .iter()
            .zip(SEED)
            .enumerate()
            .map(|(i, (name, text))| RuleFile::parse(i as u8, name, text.to_string()).expect("seed rules parse"))
            .collect();
        RuleSet { files }
    }

    pub fn file(&self, id: u8) -> &RuleFile {
        &self.files[id as usize]
    }

    pub fn forbidden(&self) -> &[ForbiddenPattern] {
        &self.file(FORBIDDEN_RULE).forbidden
    }

    pub fn versions(&self) -> BTreeMap<String, u32> {
        self.files.iter().map(|f| (f.name.clone(), f.version)).collect()
    }

    pub fn write(&self, dir: &Path) -> Result<(), RuleError> {
        fs::create_dir_all(dir)?;
        for f in &self.files {
            fs::write(dir.join(&f.name), &f.text)?;
        }
        Ok(())
    }

    /// Content digest over all six files, used as the snapshot id.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for f in &self.files {
            h.update(f.name.as_bytes());
            h.update([0]);
            h.update((f.text.len() as u64).to_le_bytes());
            h.update(f.text.as_bytes());
        }
        hex::encode(h.finalize())[..16].to_string()
    }

    /// The rule text handed to agents, each file under its name.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for f in &self.files {
            writeln!(s, "=== {} (version {}) ===\n{}", f.name, f.version, f.text).unwrap();
        }
        s
    }
}

pub fn load_rules(dir: &Path) -> Result<RuleSet, RuleError> {
    let mut files = Vec::with_capacity(6);
    for (i, name) in RULE_FILES.iter().enumerate() {
        let path = dir.join(name);
        let text = fs::read_to_string(&path).map_err(|_| RuleError::MissingRuleFile(name.to_string()))?;
        files.push(RuleFile::parse(i as u8, name, text)?);
    }
    Ok(RuleSet { files })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Finding {
    MissingDocs { doc: String },
    Packaging { detail: String },
    ForbiddenPattern { file: String, line: usize, pattern: String, rationale: String },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::MissingDocs { doc } => write!(f, "MissingDocs: {doc} absent or empty"),
            Finding::Packaging { detail } => write!(f, "Packaging: {detail}"),
            Finding::ForbiddenPattern {
                file,
                line,
                pattern,
                rationale,
            } => write!(f, "ForbiddenPattern: {file}:{line} matches `{pattern}` ({rationale})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub compliant: bool,
    pub findings: Vec<Finding>,
    pub rule_versions: BTreeMap<String, u32>,
}

impl ComplianceReport {
    /// Number of findings; the only compliance metric exposed.
    pub fn score(&self) -> usize {
        self.findings.len()
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("## Compliance\n\n");
        if self.compliant {
            s.push_str("Compliant.\n");
        }
        for f in &self.findings {
            writeln!(s, "- {f}").unwrap();
        }
        s
    }
}

fn is_source(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| SOURCE_EXTENSIONS.contains(&e))
}

/// Source files under `root`, skipping `build/` and dot-directories.
fn source_files(root: &Path) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = walkdir::WalkDir::new(root)
        .into_iter()
        .filter_entry(|e| {
            let name = e.file_name().to_string_lossy();
            e.depth() == 0 || !(name.starts_with('.') || (e.depth() == 1 && name == "build"))
        })
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file() && is_source(e.path()))
        .map(|e| e.into_path())
        .collect();
    out.sort();
    out
}

struct CompiledPattern<'a> {
    rule: &'a ForbiddenPattern,
    regex: Option<Regex>,
}

impl CompiledPattern<'_> {
    fn matches(&self, line: &str) -> bool {
        match (&self.regex, &self.rule.matcher) {
            (Some(r), _) => r.is_match(line),
            (None, Matcher::Literal(l)) => line.contains(l.as_str()),
            (None, Matcher::Regex(_)) => false,
        }
    }
}

/// Mandatory docs, packaging, and a Rule-04 scan over C/C++ sources.
pub fn compliance_check(variant: &SolverVariant, rules: &RuleSet) -> ComplianceReport {
    let mut findings = Vec::new();
    for (doc, present) in variant.docs_present() {
        if !present {
            findings.push(Finding::MissingDocs { doc: doc.to_string() });
        }
    }
    let run = variant.run_script();
    let runnable = fs::metadata(&run).is_ok_and(|m| {
        use std::os::unix::fs::PermissionsExt;
        m.is_file() && m.permissions().mode() & 0o111 != 0
    });
    if !runnable {
        findings.push(Finding::Packaging {
            detail: format!("{RUN_SCRIPT} missing or not executable"),
        });
    }
    let patterns: Vec<CompiledPattern> = rules
        .forbidden()
        .iter()
        .map(|p| CompiledPattern {
            rule: p,
            regex: match &p.matcher {
                Matcher::Regex(r) => Regex::new(r).ok(),
                Matcher::Literal(_) => None,
            },
        })
        .collect();
    for path in source_files(&variant.root) {
        let Ok(bytes) = fs::read(&path) else { continue };
        let text = String::from_utf8_lossy(&bytes);
        let rel = path.strip_prefix(&variant.root).unwrap_or(&path).display().to_string();
        for (i, line) in text.lines().enumerate() {
            for p in &patterns {
                if p.matches(line) {
                    findings.push(Finding::ForbiddenPattern {
                        file: rel.clone(),
                        line: i + 1,
                        pattern: p.rule.describe().to_string(),
                        rationale: p.rule.rationale.clone(),
                    });
                }
            }
        }
    }
    ComplianceReport {
        compliant: findings.is_empty(),
        findings,
        rule_versions: rules.versions(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SignatureKind {
    CompileError,
    VerifierMismatch,
    MissingDocs,
    PredictiveTermination,
    CrashPattern,
    Regression,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureSignature {
    pub kind: SignatureKind,
    /// Captured text: a source line, a diagnostic, or a failure summary.
    pub evidence: String,
    /// What was observed, for the patch rationale.
    pub context: String,
    pub cycle: u32,
    pub instance: Option<String>,
}

impl FailureSignature {
    /// Kind plus normalized evidence: whitespace collapsed, digit runs
    /// replaced, lowercased.
    pub fn key(&self) -> String {
        let mut norm = String::with_capacity(self.evidence.len());
        let mut in_digits = false;
        for ch in self.evidence.split_whitespace().collect::<Vec<_>>().join(" ").chars() {
            if ch.is_ascii_digit() {
                if !in_digits {
                    norm.push('#');
                }
                in_digits = true;
            } else {
                in_digits = false;
                norm.extend(ch.to_lowercase());
            }
        }
        format!("{:?}:{norm}", self.kind)
    }
}

/// First added source line that carries code: not blank, not a comment, not
/// just braces.
fn substantive_line(lines: &[String]) -> Option<&str> {
    lines.iter().map(|l| l.trim()).find(|l| {
        !l.is_empty()
            && !l.starts_with("//")
            && !l.starts_with("/*")
            && !(*l == "*" || l.starts_with("* ") || l.starts_with("*/"))
            && !l.chars().all(|c| matches!(c, '{' | '}' | ';' | '(' | ')'))
    })
}

fn status_line(lines: &[String]) -> Option<&str> {
    lines
        .iter()
        .map(|l| l.trim())
        .find(|l| l.contains("s SATISFIABLE") || l.contains("s UNSATISFIABLE") || l.contains("RESULT_SAT") || l.contains("RESULT_UNSAT"))
}

fn first_error_line(diagnostics: &str) -> String {
    let strip = Regex::new(r"^[^\s:]+:\d+(:\d+)?:\s*").unwrap();
    diagnostics
        .lines()
        .find(|l| l.contains("error"))
        .or_else(|| diagnostics.lines().find(|l| !l.trim().is_empty()))
        .map(|l| strip.replace(l.trim(), "").into_owned())
        .unwrap_or_else(|| "build failed without diagnostics".into())
}

/// Classifies every failure in `history` into signatures, dropping
/// duplicates by [`FailureSignature::key`]. Deterministic in the history.
pub fn analyze_failures(history: &[CycleRecord]) -> Vec<FailureSignature> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut push = |sig: FailureSignature| {
        if !sig.evidence.trim().is_empty() && seen.insert(sig.key()) {
            out.push(sig);
        }
    };
    for rec in history {
        let sig = |kind, evidence: String, context: String, instance: Option<String>| FailureSignature {
            kind,
            evidence,
            context,
            cycle: rec.cycle,
            instance,
        };
        if let Some(c) = &rec.compliance {
            for f in &c.findings {
                match f {
                    Finding::MissingDocs { doc } => {
                        push(sig(SignatureKind::MissingDocs, format!("{doc} absent or empty"), f.to_string(), None))
                    }
                    Finding::Packaging { detail } => push(sig(SignatureKind::CompileError, detail.clone(), f.to_string(), None)),
                    Finding::ForbiddenPattern { .. } => {}
                }
            }
        }
        if let Some(b) = rec.build.as_ref().filter(|b| !b.success) {
            push(sig(
                SignatureKind::CompileError,
                first_error_line(&b.diagnostics),
                "build failed".into(),
                None,
            ));
        }
        for v in &rec.gates {
            // one signature per failure kind and stage; the first instance
            // stands for the rest
            let mut kinds_seen = BTreeSet::new();
            for f in &v.failures {
                if !kinds_seen.insert(f.kind.label()) {
                    continue;
                }
                let context = format!("{} {} on {}: {}", v.stage, f.kind, f.instance, f.detail);
                let instance = Some(f.instance.clone());
                match &f.kind {
                    FailureKind::Crash { .. } => {
                        let evidence = substantive_line(&rec.added_lines)
                            .map(str::to_string)
                            .unwrap_or_else(|| format!("{} on {}", f.kind, f.instance));
                        push(sig(SignatureKind::CrashPattern, evidence, context, instance));
                    }
                    FailureKind::WrongAnswer { .. } if status_line(&rec.added_lines).is_some() => {
                        let evidence = status_line(&rec.added_lines).unwrap().to_string();
                        push(sig(SignatureKind::PredictiveTermination, evidence, context, instance));
                    }
                    FailureKind::Timeout => {
                        push(sig(SignatureKind::Regression, format!("{} timeout on {}", v.stage, f.instance), context, instance))
                    }
                    other => {
                        let stage = if v.stage == Stage::Stage1 { "stage 1" } else { "stage 2" };
                        push(sig(
                            SignatureKind::VerifierMismatch,
                            format!("{stage} {} on {}", other.label(), f.instance),
                            context,
                            instance,
                        ));
                    }
                }
            }
        }
        if rec.decision == Decision::RejectedRegression {
            push(sig(
                SignatureKind::Regression,
                format!("objective did not improve: {}", rec.intent.trim()),
                rec.rejection.clone().unwrap_or_default(),
                None,
            ));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PatchOp {
    AppendForbidden,
    TightenPreEval,
    StrengthenLogging,
    FreeformAppend,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RulePatch {
    pub target: u8,
    pub op: PatchOp,
    /// Markdown appended to the target file.
    pub payload: String,
    pub provenance: FailureSignature,
}

/// The fixed signature-kind to patch table.
pub fn patch_target(kind: SignatureKind) -> (u8, PatchOp) {
    match kind {
        SignatureKind::CrashPattern | SignatureKind::PredictiveTermination => (FORBIDDEN_RULE, PatchOp::AppendForbidden),
        SignatureKind::VerifierMismatch | SignatureKind::CompileError => (1, PatchOp::TightenPreEval),
        SignatureKind::MissingDocs => (3, PatchOp::StrengthenLogging),
        SignatureKind::Regression => (5, PatchOp::FreeformAppend),
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn make_patch(sig: &FailureSignature) -> RulePatch {
    let (target, op) = patch_target(sig.kind);
    render_patch(sig, target, op)
}

fn render_patch(sig: &FailureSignature, target: u8, op: PatchOp) -> RulePatch {
    let evidence = one_line(&sig.evidence);
    let context = one_line(&sig.context);
    let payload = match op {
        PatchOp::AppendForbidden => format!(
            "\n```FORBIDDEN\nliteral: {evidence}\nrationale: {:?} in cycle {}: {context}\nexample: {evidence}\n```\n",
            sig.kind, sig.cycle
        ),
        PatchOp::TightenPreEval => format!(
            "\n- (cycle {}, {:?}) Before submitting, reproduce and fix: {evidence}. Observed: {context}\n",
            sig.cycle, sig.kind
        ),
        PatchOp::StrengthenLogging => format!(
            "\n- (cycle {}) Lineage documents are checked before every build: {evidence}.\n",
            sig.cycle
        ),
        PatchOp::FreeformAppend => format!("\n- (cycle {}) {evidence}. {context}\n", sig.cycle),
    };
    RulePatch {
        target,
        op,
        payload,
        provenance: sig.clone(),
    }
}

pub fn apply_patch(rules: &mut RuleSet, patch: &RulePatch) -> Result<(), RuleError> {
    rules.files[patch.target as usize].apply(&patch.payload)
}

/// Content-addressed rule snapshots plus the log of patches applied on top
/// of each.
#[derive(Clone, Debug)]
pub struct SnapshotStore {
    pub dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchLogEntry {
    /// Snapshot of the rule set the patch was applied to.
    pub base: String,
    pub patch: RulePatch,
}

impl SnapshotStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        SnapshotStore { dir: dir.into() }
    }

    /// Snapshots beside a rules directory live in `<rules>/.snapshots`.
    pub fn for_rules(rules_dir: &Path) -> Self {
        SnapshotStore::new(rules_dir.join(SNAPSHOT_DIR))
    }

    pub fn snapshot(&self, rules: &RuleSet) -> Result<String, RuleError> {
        let id = rules.digest();
        let dir = self.dir.join(&id);
        if !dir.is_dir() {
            rules.write(&dir)?;
        }
        Ok(id)
    }

    pub fn restore(&self, id: &str) -> Result<RuleSet, RuleError> {
        let dir = self.dir.join(id);
        if !dir.is_dir() {
            return Err(RuleError::UnknownSnapshot(id.to_string()));
        }
        load_rules(&dir)
    }

    fn log_path(&self) -> PathBuf {
        self.dir.join(PATCH_LOG)
    }

    fn log(&self, entries: &[PatchLogEntry]) -> Result<(), RuleError> {
        fs::create_dir_all(&self.dir)?;
        let mut f = fs::OpenOptions::new().create(true).append(true).open(self.log_path())?;
        for e in entries {
            let line = serde_json::to_string(e).map_err(|e| RuleError::PatchLog(e.to_string()))?;
            writeln!(f, "{line}")?;
        }
        Ok(())
    }

    pub fn patch_log(&self) -> Result<Vec<PatchLogEntry>, RuleError> {
        let path = self.log_path();
        if !path.is_file() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for line in std::io::BufReader::new(fs::File::open(path)?).lines() {
            let line = line?;
            if !line.trim().is_empty() {
                out.push(serde_json::from_str(&line).map_err(|e| RuleError::PatchLog(e.to_string()))?);
            }
        }
        Ok(out)
    }

    /// Restores snapshot `id` and re-applies every logged patch from the
    /// first one based on `id` onwards.
    pub fn replay_from(&self, id: &str) -> Result<RuleSet, RuleError> {
        let mut rules = self.restore(id)?;
        let log = self.patch_log()?;
        let Some(start) = log.iter().position(|e| e.base == id) else {
            return Ok(rules);
        };
        for e in &log[start..] {
            apply_patch(&mut rules, &e.patch)?;
        }
        Ok(rules)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evolution {
    pub patches: Vec<RulePatch>,
    pub rules: RuleSet,
    /// Snapshot of the rule set before the patches; `None` when nothing
    /// changed.
    pub snapshot: Option<String>,
}

fn forbidden_hits(variant: &SolverVariant, rules: &RuleSet) -> usize {
    compliance_check(variant, rules)
        .findings
        .iter()
        .filter(|f| matches!(f, Finding::ForbiddenPattern { .. }))
        .count()
}

/// Maps each signature to its patch, snapshots the current set and applies
/// the patches in order. A forbidden pattern that would flag `protected`
/// (the accepted champion) is demoted to a pre-evaluation note, so the rules
/// never forbid code that already passed every gate.
pub fn evolve_rules(
    rules: &RuleSet,
    signatures: &[FailureSignature],
    store: &SnapshotStore,
    protected: Option<&SolverVariant>,
) -> Result<Evolution, RuleError> {
    if signatures.is_empty() {
        return Ok(Evolution {
            patches: Vec::new(),
            rules: rules.clone(),
            snapshot: None,
        });
    }
    let snapshot = store.snapshot(rules)?;
    let mut next = rules.clone();
    let mut patches = Vec::with_capacity(signatures.len());
    let mut log = Vec::with_capacity(signatures.len());
    for sig in signatures {
        let mut patch = make_patch(sig);
        if let Some(v) = protected.filter(|_| patch.op == PatchOp::AppendForbidden) {
            let mut trial = next.clone();
            apply_patch(&mut trial, &patch)?;
            if forbidden_hits(v, &trial) > forbidden_hits(v, &next) {
                let (target, op) = patch_target(SignatureKind::VerifierMismatch);
                patch = render_patch(sig, target, op);
            }
        }
        log.push(PatchLogEntry {
            base: if log.is_empty() { snapshot.clone() } else { next.digest() },
            patch: patch.clone(),
        });
        apply_patch(&mut next, &patch)?;
        patches.push(patch);
    }
    store.log(&log)?;
    Ok(Evolution {
        patches,
        rules: next,
        snapshot: Some(snapshot),
    })
}

/// A git pre-commit hook that runs the compliance scan on the variant at the
/// repository root.
pub fn precommit_hook(binary: &str, rules_dir: &Path) -> String {
    format!(
        "#!/bin/sh\n# generated: rulebase compliance check before every commit\nexec {binary} rules check --rules '{}' --variant \"$(git rev-parse --show-toplevel)\"\n",
        rules_dir.display()
    )
}
