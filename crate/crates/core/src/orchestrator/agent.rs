//! Agent backends: a scripted replay for tests and reproducible runs, and a
//! minimal JSON-over-HTTP exchange for a remote coding agent.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Component, Path};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EvalSummary;

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("agent backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("agent backend timed out after {0:?}")]
    BackendTimeout(Duration),
    #[error("edit outside the variant workspace: {0}")]
    EditOutsideWorkspace(String),
    #[error("agent protocol: {0}")]
    Protocol(String),
}

/// Everything an agent sees when planning a cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentContext {
    pub cycle: u32,
    pub rule_versions: BTreeMap<String, u32>,
    pub rules: String,
    pub champion: String,
    pub champion_report: Option<EvalSummary>,
    pub last_feedback: String,
    /// Tail of CHANGELOG.md of the champion.
    pub lineage: String,
    pub objective: String,
    pub seed_note: String,
    /// One line per recent rejected or failed cycle.
    pub history: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub text: String,
    #[serde(default)]
    pub tasks: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EditChange {
    Content { content: String },
    Replace { find: String, replace: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEdit {
    /// Relative to the variant root.
    pub path: String,
    #[serde(flatten)]
    pub change: EditChange,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentPatchSet {
    pub edits: Vec<FileEdit>,
    pub hypothesis: String,
    #[serde(default)]
    pub intent: String,
}

pub trait AgentBackend {
    /// `None` ends the run: the backend has nothing more to propose.
    fn plan(&self, ctx: &AgentContext) -> Result<Option<Plan>, AgentError>;
    fn code(&self, ctx: &AgentContext, plan: &Plan, workspace: &Path) -> Result<AgentPatchSet, AgentError>;
}

/// Injected backend failure for a scripted step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptedFault {
    Timeout,
    Unavailable,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptStep {
    pub plan: String,
    #[serde(default)]
    pub tasks: Vec<String>,
    #[serde(default)]
    pub hypothesis: String,
    #[serde(default)]
    pub intent: String,
    #[serde(default)]
    pub edits: Vec<FileEdit>,
    #[serde(default)]
    pub fault: Option<ScriptedFault>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Script {
    pub steps: Vec<ScriptStep>,
}

/// Replays step `cycle - 1` for every cycle, so a resumed run sees the same
/// steps as an uninterrupted one.
#[derive(Clone, Debug)]
pub struct ScriptedBackend {
    pub script: Script,
}

impl ScriptedBackend {
    pub fn new(steps: Vec<ScriptStep>) -> Self {
        ScriptedBackend {
            script: Script { steps },
        }
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let text = fs::read_to_string(path).map_err(|e| AgentError::BackendUnavailable(format!("{}: {e}", path.display())))?;
        let script = serde_json::from_str(&text).map_err(|e| AgentError::Protocol(format!("{}: {e}", path.display())))?;
        Ok(ScriptedBackend { script })
    }

    fn step(&self, cycle: u32) -> Option<&ScriptStep> {
        self.script.steps.get((cycle as usize).checked_sub(1)?)
    }

    fn fault(step: &ScriptStep) -> Result<(), AgentError> {
        match step.fault {
            Some(ScriptedFault::Timeout) => Err(AgentError::BackendTimeout(Duration::ZERO)),
            Some(ScriptedFault::Unavailable) => Err(AgentError::BackendUnavailable("scripted fault".into())),
            None => Ok(()),
        }
    }
}

impl AgentBackend for ScriptedBackend {
    fn plan(&self, ctx: &AgentContext) -> Result<Option<Plan>, AgentError> {
        let Some(step) = self.step(ctx.cycle) else { return Ok(None) };
        Self::fault(step)?;
        Ok(Some(Plan {
            text: step.plan.clone(),
            tasks: step.tasks.clone(),
        }))
    }

    fn code(&self, ctx: &AgentContext, _plan: &Plan, _workspace: &Path) -> Result<AgentPatchSet, AgentError> {
        let step = self
            .step(ctx.cycle)
            .ok_or_else(|| AgentError::Protocol(format!("no scripted step for cycle {}", ctx.cycle)))?;
        Ok(AgentPatchSet {
            edits: step.edits.clone(),
            hypothesis: step.hypothesis.clone(),
            intent: step.intent.clone(),
        })
    }
}

/// `POST {endpoint}/plan` with the context, answered by a [`Plan`] or
/// `{"done": true}`; `POST {endpoint}/code` with plan and manifest, answered
/// by an [`AgentPatchSet`].
pub struct HttpBackend {
    endpoint: String,
    timeout: Duration,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PlanReply {
    Done { done: bool },
    Plan(Plan),
}

#[derive(Serialize)]
struct CodeRequest<'a> {
    context: &'a AgentContext,
    plan: &'a Plan,
    /// Variant files: relative path to content, text files only.
    manifest: BTreeMap<String, String>,
}

impl HttpBackend {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder().timeout_global(Some(timeout)).build();
        HttpBackend {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            timeout,
            agent: ureq::Agent::new_with_config(config),
        }
    }

    fn post<B: Serialize, R: serde::de::DeserializeOwned>(&self, route: &str, body: &B) -> Result<R, AgentError> {
        let url = format!("{}/{route}", self.endpoint);
        let mut resp = self.agent.post(&url).send_json(body).map_err(|e| self.map_err(e))?;
        resp.body_mut().read_json().map_err(|e| match e {
            ureq::Error::Json(e) => AgentError::Protocol(e.to_string()),
            other => self.map_err(other),
        })
    }

    fn map_err(&self, e: ureq::Error) -> AgentError {
        match e {
            ureq::Error::Timeout(_) => AgentError::BackendTimeout(self.timeout),
            ureq::Error::Io(io) if matches!(io.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock) => {
                AgentError::BackendTimeout(self.timeout)
            }
            other => AgentError::BackendUnavailable(other.to_string()),
        }
    }
}

fn manifest(root: &Path) -> BTreeMap<String, String> {
    walkdir::WalkDir::new(root)
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || !e.file_name().to_string_lossy().starts_with('.'))
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .filter_map(|e| {
            let rel = e.path().strip_prefix(root).ok()?.to_string_lossy().into_owned();
            if rel.starts_with("build/") || rel == crate::workspace::SOLVER_BINARY {
                return None;
            }
            Some((rel, fs::read_to_string(e.path()).ok()?))
        })
        .collect()
}

impl AgentBackend for HttpBackend {
    fn plan(&self, ctx: &AgentContext) -> Result<Option<Plan>, AgentError> {
        match self.post("plan", ctx)? {
            PlanReply::Done { done: true } => Ok(None),
            PlanReply::Done { done: false } => Err(AgentError::Protocol("plan reply without a plan".into())),
            PlanReply::Plan(p) => Ok(Some(p)),
        }
    }

    fn code(&self, ctx: &AgentContext, plan: &Plan, workspace: &Path) -> Result<AgentPatchSet, AgentError> {
        let req = CodeRequest {
            context: ctx,
            plan,
            manifest: manifest(workspace),
        };
        self.post("code", &req)
    }
}

/// Result of applying a patch set to a variant directory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AppliedPatch {
    /// sha256 over the edits in order.
    pub digest: String,
    pub files: Vec<String>,
    /// Lines present after an edit that were absent before, per file order.
    pub added_lines: Vec<String>,
}

const MAX_ADDED_LINES: usize = 200;

/// Rejects absolute paths, parent components and paths that resolve
/// outside `root` through a symlink.
pub fn confine(root: &Path, rel: &str) -> Result<std::path::PathBuf, AgentError> {
    let p = Path::new(rel);
    let outside = || AgentError::EditOutsideWorkspace(rel.to_string());
    if rel.is_empty() || !p.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir)) {
        return Err(outside());
    }
    let target = root.join(p);
    let canon_root = fs::canonicalize(root).map_err(|_| outside())?;
    let mut probe = target.parent().map(Path::to_path_buf);
    while let Some(dir) = probe {
        if dir.exists() {
            let canon = fs::canonicalize(&dir).map_err(|_| outside())?;
            if !canon.starts_with(&canon_root) {
                return Err(outside());
            }
            break;
        }
        probe = dir.parent().map(Path::to_path_buf);
    }
    Ok(target)
}

/// Validates every path before writing anything; a failed check leaves the
/// workspace untouched.
pub fn apply_patch_set(root: &Path, set: &AgentPatchSet) -> Result<AppliedPatch, AgentError> {
    let mut planned = Vec::with_capacity(set.edits.len());
    for e in &set.edits {
        let path = confine(root, &e.path)?;
        let old = fs::read_to_string(&path).ok();
        let new = match &e.change {
            EditChange::Content { content } => content.clone(),
            EditChange::Replace { find, replace } => {
                let old = old
                    .as_deref()
                    .ok_or_else(|| AgentError::Protocol(format!("{}: replace on a missing file", e.path)))?;
                let n = old.matches(find.as_str()).count();
                if n != 1 || find.is_empty() {
                    return Err(AgentError::Protocol(format!("{}: anchor occurs {n} times", e.path)));
                }
                old.replacen(find.as_str(), replace, 1)
            }
        };
        planned.push((e.path.clone(), path, old, new));
    }
    let mut hasher = Sha256::new();
    let mut added_lines = Vec::new();
    let mut files = Vec::new();
    for (rel, path, old, new) in planned {
        hasher.update(rel.as_bytes());
        hasher.update([0]);
        hasher.update((new.len() as u64).to_le_bytes());
        hasher.update(new.as_bytes());
        let before: std::collections::HashSet<&str> = old.as_deref().unwrap_or("").lines().collect();
        for l in new.lines().filter(|l| !before.contains(l)) {
            if added_lines.len() < MAX_ADDED_LINES {
                added_lines.push(l.to_string());
            }
        }
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| AgentError::Protocol(e.to_string()))?;
        }
        fs::write(&path, &new).map_err(|e| AgentError::Protocol(format!("{rel}: {e}")))?;
        files.push(rel);
    }
    Ok(AppliedPatch {
        digest: hex::encode(hasher.finalize()),
        files,
        added_lines,
    })
}
