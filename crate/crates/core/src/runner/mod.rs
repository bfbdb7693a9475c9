//! Benchmark execution: one solver run per (variant, instance) job, swept
//! over a suite on a worker pool.
//!
//! The run script is invoked as `<run_script> <instance> [<proof>]` from a
//! per-job scratch directory, so emitted proof files never collide.

pub mod sandbox;

use std::ffi::OsString;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::formula::{parse_solver_output, ClaimKind, SolverClaim};
use crate::pool::WorkerPool;
use sandbox::{ExecRequest, Termination};

pub use sandbox::SpawnError;

/// Competition-standard timeout in seconds.
pub const COMPETITION_TIMEOUT: f64 = 5000.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceLimits {
    /// seconds
    pub wall_timeout: f64,
    /// bytes
    pub mem_limit: Option<u64>,
    /// When set, measured wall times are rounded up to a multiple of this
    /// many seconds. Sub-resolution runs then score identically across
    /// repeated sweeps.
    #[serde(default)]
    pub time_resolution: Option<f64>,
}

impl Default for ResourceLimits {
    fn default() -> Self {
        ResourceLimits {
            wall_timeout: COMPETITION_TIMEOUT,
            mem_limit: None,
            time_resolution: None,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("wall timeout must be positive, got {0}")]
pub struct InvalidLimits(pub f64);

impl ResourceLimits {
    pub fn with_timeout(seconds: f64) -> Self {
        ResourceLimits {
            wall_timeout: seconds,
            ..ResourceLimits::default()
        }
    }

    pub fn validate(&self) -> Result<(), InvalidLimits> {
        if self.wall_timeout.is_finite() && self.wall_timeout > 0.0 {
            Ok(())
        } else {
            Err(InvalidLimits(self.wall_timeout))
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.wall_timeout)
    }

    fn quantize(&self, seconds: f64) -> f64 {
        match self.time_resolution {
            Some(r) if r > 0.0 => ((seconds / r).ceil().max(1.0) * r).min(self.wall_timeout),
            _ => seconds,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    SolvedSat,
    SolvedUnsat,
    /// Clean exit without a definitive answer.
    Unknown,
    Timeout,
    /// Killed by `signal`, or a non-zero exit without a status line.
    Crashed { signal: Option<i32>, exit_code: Option<i32> },
    MemOut,
    /// Output violated the status/exit-code convention, or the job never started.
    Malformed,
}

impl Outcome {
    pub fn is_solved(&self) -> bool {
        matches!(self, Outcome::SolvedSat | Outcome::SolvedUnsat)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::SolvedSat => f.write_str("SAT"),
            Outcome::SolvedUnsat => f.write_str("UNSAT"),
            Outcome::Unknown => f.write_str("UNKNOWN"),
            Outcome::Timeout => f.write_str("TIMEOUT"),
            Outcome::Crashed { signal: Some(s), .. } => write!(f, "CRASH(signal {s})"),
            Outcome::Crashed { exit_code: Some(c), .. } => write!(f, "CRASH(exit {c})"),
            Outcome::Crashed { .. } => f.write_str("CRASH"),
            Outcome::MemOut => f.write_str("MEMOUT"),
            Outcome::Malformed => f.write_str("MALFORMED"),
        }
    }
}

/// One (solver, instance) execution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Instance file name; the key used by ground-truth tables.
    pub instance: String,
    pub path: PathBuf,
    pub outcome: Outcome,
    /// seconds; equals the timeout for `Timeout`
    pub wall_time: f64,
    /// bytes; absent when no sample could be taken
    pub peak_mem: Option<u64>,
    #[serde(default)]
    pub peak_threads: Option<u32>,
    pub claim: Option<SolverClaim>,
    pub proof_path: Option<PathBuf>,
    /// Parse errors, spawn failures, or the tail of stderr for crashes.
    #[serde(default)]
    pub detail: Option<String>,
}

impl RunRecord {
    fn failed_to_start(instance: &Path, err: &SpawnError) -> Self {
        RunRecord {
            instance: instance_key(instance),
            path: instance.to_path_buf(),
            outcome: Outcome::Malformed,
            wall_time: 0.0,
            peak_mem: None,
            peak_threads: None,
            claim: None,
            proof_path: None,
            detail: Some(err.to_string()),
        }
    }
}

pub fn instance_key(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn tail(bytes: &[u8], max: usize) -> String {
    let text = String::from_utf8_lossy(bytes);
    let text = text.trim_end();
    let start = text.len().saturating_sub(max);
    let start = (start..=text.len()).find(|&i| text.is_char_boundary(i)).unwrap_or(text.len());
    text[start..].to_string()
}

/// One job: which script to run on which instance, and where.
#[derive(Clone, Debug)]
pub struct Job {
    pub run_script: PathBuf,
    pub instance: PathBuf,
    pub scratch: PathBuf,
    pub emit_proof: bool,
}

/// Runs one job. A process that cannot be spawned is an error here; sweeps
/// convert it into a `Malformed` record.
pub fn run_instance(job: &Job, limits: &ResourceLimits) -> Result<RunRecord, SpawnError> {
    let io_err = |source| SpawnError {
        program: job.run_script.display().to_string(),
        source,
    };
    std::fs::create_dir_all(&job.scratch).map_err(io_err)?;
    let instance = std::path::absolute(&job.instance).map_err(io_err)?;
    let proof_path = job.emit_proof.then(|| {
        let stem = job.instance.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        job.scratch.join(format!("{stem}.drat"))
    });
    let mut args: Vec<OsString> = vec![instance.clone().into()];
    if let Some(p) = &proof_path {
        args.push(std::path::absolute(p).map_err(io_err)?.into());
    }
    let program = std::path::absolute(&job.run_script).map_err(io_err)?;
    let out = sandbox::execute(&ExecRequest {
        program,
        args,
        cwd: job.scratch.clone(),
        timeout: limits.timeout(),
        mem_limit: limits.mem_limit,
        capture_dir: job.scratch.clone(),
    })?;

    let measured = out.wall.as_secs_f64();
    let mut record = RunRecord {
        instance: instance_key(&job.instance),
        path: job.instance.clone(),
        outcome: Outcome::Malformed,
        wall_time: limits.quantize(measured),
        peak_mem: out.peak_mem,
        peak_threads: out.peak_threads,
        claim: None,
        proof_path: None,
        detail: None,
    };
    match out.termination {
        Termination::TimedOut => {
            record.outcome = Outcome::Timeout;
            record.wall_time = limits.wall_timeout;
        }
        Termination::MemOut => record.outcome = Outcome::MemOut,
        Termination::Signaled(sig) => {
            record.outcome = Outcome::Crashed {
                signal: Some(sig),
                exit_code: None,
            };
            record.detail = Some(tail(&out.stderr, 2048));
        }
        Termination::Exited(code) => match parse_solver_output(&out.stdout, code) {
            // shells report a killed child as 128 + signal
            _ if (129..=192).contains(&code) => {
                record.outcome = Outcome::Crashed {
                    signal: Some(code - 128),
                    exit_code: Some(code),
                };
                record.detail = Some(tail(&out.stderr, 2048));
            }
            Ok(mut claim) => {
                record.outcome = match claim.kind {
                    ClaimKind::Sat => Outcome::SolvedSat,
                    ClaimKind::Unsat => Outcome::SolvedUnsat,
                    ClaimKind::Unknown if code == 0 => Outcome::Unknown,
                    ClaimKind::Unknown => {
                        record.detail = Some(tail(&out.stderr, 2048));
                        Outcome::Crashed {
                            signal: None,
                            exit_code: Some(code),
                        }
                    }
                };
                if claim.kind == ClaimKind::Unsat {
                    claim.proof_path = proof_path.clone();
                    record.proof_path = proof_path;
                }
                if record.outcome.is_solved() && measured > limits.wall_timeout {
                    record.outcome = Outcome::Timeout;
                    record.wall_time = limits.wall_timeout;
                }
                record.claim = Some(claim);
            }
            Err(e) => {
                record.outcome = Outcome::Malformed;
                record.detail = Some(e.to_string());
            }
        },
    }
    Ok(record)
}

/// Which solver a sweep runs and where its scratch space lives.
#[derive(Clone, Debug)]
pub struct SweepTarget {
    pub label: String,
    pub run_script: PathBuf,
}

#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub limits: ResourceLimits,
    pub scratch_root: PathBuf,
    pub emit_proof: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProgressEvent<'a> {
    pub label: &'a str,
    pub done: usize,
    pub total: usize,
    pub record: &'a RunRecord,
}

pub type ProgressFn<'a> = &'a (dyn Fn(&ProgressEvent<'_>) + Sync);

/// Runs jobs somewhere. The local pool is the only implementation; a
/// cluster-backed executor would plug in here.
pub trait Executor: Sync {
    fn run_jobs(&self, jobs: &[(String, Job)], limits: &ResourceLimits, progress: Option<ProgressFn<'_>>) -> Vec<RunRecord>;
}

#[derive(Clone, Debug, Default)]
pub struct LocalExecutor {
    pool: WorkerPool,
}

impl LocalExecutor {
    pub fn new(parallelism: usize) -> Self {
        LocalExecutor {
            pool: WorkerPool::new(parallelism),
        }
    }

    pub fn parallelism(&self) -> usize {
        self.pool.parallelism()
    }
}

impl Executor for LocalExecutor {
    fn run_jobs(&self, jobs: &[(String, Job)], limits: &ResourceLimits, progress: Option<ProgressFn<'_>>) -> Vec<RunRecord> {
        let done = std::sync::atomic::AtomicUsize::new(0);
        let total = jobs.len();
        self.pool.map(jobs, |(label, job)| {
            let record = run_instance(job, limits).unwrap_or_else(|e| RunRecord::failed_to_start(&job.instance, &e));
            if let Some(cb) = progress {
                let n = done.fetch_add(1, std::sync::atomic::Ordering::SeqCst) + 1;
                cb(&ProgressEvent {
                    label,
                    done: n,
                    total,
                    record: &record,
                });
            }
            record
        })
    }
}

fn scratch_for(opts: &SweepOptions, label: &str, instance: &Path) -> PathBuf {
    let stem = instance.file_stem().unwrap_or_default().to_string_lossy();
    opts.scratch_root.join(label).join(stem.as_ref())
}

fn sort_records(records: &mut [RunRecord]) {
    records.sort_by(|a, b| a.instance.cmp(&b.instance).then_with(|| a.path.cmp(&b.path)));
}

/// Sweeps one solver over `suite`. Exactly one record per instance, ordered
/// by instance name whatever the completion order.
pub fn run_benchmark(
    target: &SweepTarget,
    suite: &[PathBuf],
    opts: &SweepOptions,
    executor: &dyn Executor,
    progress: Option<ProgressFn<'_>>,
) -> Vec<RunRecord> {
    let jobs: Vec<(String, Job)> = suite
        .iter()
        .map(|inst| {
            (
                target.label.clone(),
                Job {
                    run_script: target.run_script.clone(),
                    instance: inst.clone(),
                    scratch: scratch_for(opts, &target.label, inst),
                    emit_proof: opts.emit_proof,
                },
            )
        })
        .collect();
    let mut records = executor.run_jobs(&jobs, &opts.limits, progress);
    sort_records(&mut records);
    records
}

/// Runs two solvers over the same suite with their jobs interleaved on one
/// pool, so both see the same machine conditions.
pub fn pair_run(
    a: &SweepTarget,
    b: &SweepTarget,
    suite: &[PathBuf],
    opts: &SweepOptions,
    executor: &dyn Executor,
    progress: Option<ProgressFn<'_>>,
) -> (Vec<RunRecord>, Vec<RunRecord>) {
    let mut jobs = Vec::with_capacity(2 * suite.len());
    for inst in suite {
        for t in [a, b] {
            jobs.push((
                t.label.clone(),
                Job {
                    run_script: t.run_script.clone(),
                    instance: inst.clone(),
                    scratch: scratch_for(opts, &t.label, inst),
                    emit_proof: opts.emit_proof,
                },
            ));
        }
    }
    let records = executor.run_jobs(&jobs, &opts.limits, progress);
    let (mut ra, mut rb) = (Vec::new(), Vec::new());
    for (rec, (label, _)) in records.into_iter().zip(&jobs) {
        if *label == a.label {
            ra.push(rec);
        } else {
            rb.push(rec);
        }
    }
    sort_records(&mut ra);
    sort_records(&mut rb);
    (ra, rb)
}

/// Writes records as JSON lines.
pub fn write_records<W: Write>(mut w: W, records: &[RunRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records<R: BufRead>(r: R) -> Result<Vec<RunRecord>, serde_json::Error> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line.map_err(serde_json::Error::io)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// `.cnf` files in `dir`, sorted by name.
pub fn list_instances(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "cnf"))
        .collect();
    out.sort();
    Ok(out)
}
