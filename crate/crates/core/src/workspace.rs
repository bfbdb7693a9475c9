//! Solver variant directories: mandatory layout, building, copying and
//! lineage documents.
//!
//! A variant root holds exactly `bin/`, `src/`, `build/`, `CHANGELOG.md`,
//! `HYPOTHESIS.md`, `RESULTS.md` and `starexec_build`. Dot-files are ignored.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::runner::sandbox::{self, ExecRequest, Termination};

pub const BUILD_SCRIPT: &str = "starexec_build";
pub const RUN_SCRIPT: &str = "bin/starexec_run_default";
/// Executable produced by the build script.
pub const SOLVER_BINARY: &str = "bin/solver_binary";
pub const DOCS: [&str; 3] = ["CHANGELOG.md", "HYPOTHESIS.md", "RESULTS.md"];
const DIRS: [&str; 3] = ["bin", "src", "build"];
pub const DEFAULT_BUILD_TIMEOUT: Duration = Duration::from_secs(600);

/// Mandatory top-level elements in canonical order.
pub fn mandatory_elements() -> Vec<&'static str> {
    DIRS.iter().chain(DOCS.iter()).copied().chain([BUILD_SCRIPT]).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverVariant {
    pub id: String,
    pub root: PathBuf,
}

impl SolverVariant {
    pub fn new(id: impl Into<String>, root: impl Into<PathBuf>) -> Self {
        SolverVariant {
            id: id.into(),
            root: root.into(),
        }
    }

    pub fn binary(&self) -> PathBuf {
        self.root.join(SOLVER_BINARY)
    }

    pub fn run_script(&self) -> PathBuf {
        self.root.join(RUN_SCRIPT)
    }

    pub fn build_script(&self) -> PathBuf {
        self.root.join(BUILD_SCRIPT)
    }

    pub fn doc(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Which lineage documents exist and are non-empty.
    pub fn docs_present(&self) -> Vec<(&'static str, bool)> {
        DOCS.iter()
            .map(|d| (*d, fs::metadata(self.doc(d)).map(|m| m.is_file() && m.len() > 0).unwrap_or(false)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayoutViolation {
    Missing(String),
    WrongKind { name: String, expected_dir: bool },
    Unexpected(String),
    RunScriptMissing,
}

impl fmt::Display for LayoutViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayoutViolation::Missing(n) => write!(f, "{n} absent"),
            LayoutViolation::WrongKind { name, expected_dir: true } => write!(f, "{name} is not a directory"),
            LayoutViolation::WrongKind { name, .. } => write!(f, "{name} is not a file"),
            LayoutViolation::Unexpected(n) => write!(f, "{n} is not part of the layout"),
            LayoutViolation::RunScriptMissing => write!(f, "{RUN_SCRIPT} absent"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum WorkspaceError {
    #[error("{0} is not a directory")]
    NotADirectory(PathBuf),
    #[error("layout violations: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Layout(Vec<LayoutViolation>),
    #[error("build script {0} missing")]
    ScriptMissing(PathBuf),
    #[error("writing lineage docs: {0}")]
    DocsWriteFailure(std::io::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Checks the mandatory layout. Every missing or extra top-level element is
/// reported by name.
pub fn validate_layout(root: &Path, id: &str) -> Result<Result<SolverVariant, Vec<LayoutViolation>>, WorkspaceError> {
    if !root.is_dir() {
        return Err(WorkspaceError::NotADirectory(root.to_path_buf()));
    }
    let mut violations = Vec::new();
    for name in mandatory_elements() {
        let p = root.join(name);
        let want_dir = DIRS.contains(&name);
        match fs::metadata(&p) {
            Err(_) => violations.push(LayoutViolation::Missing(name.to_string())),
            Ok(m) if m.is_dir() != want_dir => violations.push(LayoutViolation::WrongKind {
                name: name.to_string(),
                expected_dir: want_dir,
            }),
            Ok(_) => {}
        }
    }
    if root.join("bin").is_dir() && !root.join(RUN_SCRIPT).is_file() {
        violations.push(LayoutViolation::RunScriptMissing);
    }
    let allowed = mandatory_elements();
    let mut extras: Vec<String> = fs::read_dir(root)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| !n.starts_with('.') && !allowed.contains(&n.as_str()))
        .collect();
    extras.sort();
    violations.extend(extras.into_iter().map(LayoutViolation::Unexpected));
    Ok(if violations.is_empty() {
        Ok(SolverVariant::new(id, root))
    } else {
        Err(violations)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildResult {
    pub success: bool,
    pub timed_out: bool,
    /// Build stdout followed by stderr, verbatim.
    pub diagnostics: String,
    /// seconds
    pub duration: f64,
    /// sha256 of the produced binary
    pub binary_hash: Option<String>,
}

pub fn hash_file(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Runs `bash starexec_build` in the variant root. A build that exceeds
/// `timeout` is reported with `timed_out` set.
pub fn build_variant(variant: &SolverVariant, timeout: Duration, scratch: &Path) -> Result<BuildResult, WorkspaceError> {
    let script = variant.build_script();
    if !script.is_file() {
        return Err(WorkspaceError::ScriptMissing(script));
    }
    let _ = fs::remove_file(variant.binary());
    let out = sandbox::execute(&ExecRequest {
        program: "bash".into(),
        args: vec![std::path::absolute(&script)?.into()],
        cwd: variant.root.clone(),
        timeout,
        mem_limit: None,
        capture_dir: scratch.to_path_buf(),
    })
    .map_err(|e| WorkspaceError::Io(e.source))?;
    let mut diagnostics = String::from_utf8_lossy(&out.stdout).into_owned();
    diagnostics.push_str(&String::from_utf8_lossy(&out.stderr));
    let timed_out = out.termination == Termination::TimedOut;
    let binary = variant.binary();
    let executable = fs::metadata(&binary).is_ok_and(|m| {
        use std::os::unix::fs::PermissionsExt;
        m.is_file() && m.permissions().mode() & 0o111 != 0
    });
    let success = out.termination == Termination::Exited(0) && executable;
    if out.termination == Termination::Exited(0) && !executable {
        diagnostics.push_str(&format!("\nbuild script succeeded but {SOLVER_BINARY} is missing or not executable\n"));
    }
    if timed_out {
        diagnostics.push_str(&format!("\nbuild exceeded {} s and was killed\n", timeout.as_secs_f64()));
    }
    Ok(BuildResult {
        success,
        timed_out,
        diagnostics,
        duration: out.wall.as_secs_f64(),
        binary_hash: if success { Some(hash_file(&binary)?) } else { None },
    })
}

/// Digest over the files that determine a build: everything under `root`
/// except build outputs, dot-files and the append-only lineage documents.
/// Identical sources give identical digests.
pub fn source_digest(root: &Path) -> std::io::Result<String> {
    let mut hasher = Sha256::new();
    let mut files: Vec<PathBuf> = walkdir::WalkDir::new(root)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.path().strip_prefix(root).unwrap().to_path_buf())
        .filter(|p| !is_build_output(p) && !p.starts_with("CHANGELOG.md") && !p.starts_with("RESULTS.md"))
        .filter(|p| !p.components().any(|c| c.as_os_str().to_string_lossy().starts_with('.')))
        .collect();
    files.sort();
    for rel in files {
        hasher.update(rel.to_string_lossy().as_bytes());
        hasher.update([0]);
        let data = fs::read(root.join(&rel))?;
        hasher.update((data.len() as u64).to_le_bytes());
        hasher.update(&data);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn is_build_output(rel: &Path) -> bool {
    rel == Path::new(SOLVER_BINARY) || rel.starts_with("build")
}

/// Copies a variant tree without build outputs. `build/` is recreated empty.
pub fn copy_variant(src: &SolverVariant, dest: &Path, id: &str) -> Result<SolverVariant, WorkspaceError> {
    if dest.exists() {
        fs::remove_dir_all(dest)?;
    }
    fs::create_dir_all(dest)?;
    for entry in walkdir::WalkDir::new(&src.root).min_depth(1) {
        let entry = entry.map_err(|e| WorkspaceError::Io(e.into()))?;
        let rel = entry.path().strip_prefix(&src.root).unwrap();
        if is_build_output(rel) && rel != Path::new("build") {
            continue;
        }
        let target = dest.join(rel);
        if entry.file_type().is_dir() {
            fs::create_dir_all(&target)?;
        } else if entry.file_type().is_file() {
            fs::copy(entry.path(), &target)?;
        }
    }
    fs::create_dir_all(dest.join("build"))?;
    Ok(SolverVariant::new(id, dest))
}

/// Seconds since the Unix epoch, as a lineage timestamp.
pub fn timestamp() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// A lineage entry for one cycle.
#[derive(Clone, Debug, PartialEq)]
pub struct LineageEntry {
    pub cycle: u32,
    pub variant: String,
    pub timestamp: u64,
    /// Implemented changes, for CHANGELOG.md.
    pub changes: String,
    /// Evaluation conclusions, for RESULTS.md.
    pub results: String,
}

fn append(path: &Path, text: &str) -> Result<(), WorkspaceError> {
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(WorkspaceError::DocsWriteFailure)?;
    f.write_all(text.as_bytes()).map_err(WorkspaceError::DocsWriteFailure)
}

/// Appends the entry to CHANGELOG.md and RESULTS.md. Existing content is
/// never rewritten.
pub fn record_lineage(variant: &SolverVariant, entry: &LineageEntry) -> Result<(), WorkspaceError> {
    let head = format!("\n## cycle {} ({}) at {}\n\n", entry.cycle, entry.variant, entry.timestamp);
    append(&variant.doc("CHANGELOG.md"), &format!("{head}{}\n", entry.changes.trim_end()))?;
    append(&variant.doc("RESULTS.md"), &format!("{head}{}\n", entry.results.trim_end()))
}
