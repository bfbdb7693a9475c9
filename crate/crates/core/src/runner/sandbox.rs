//! Child-process execution under a wall-clock limit with process-group kill
//! and peak-memory sampling. This is the only place that spawns processes.

use std::ffi::OsString;
use std::fs::{self, File};
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

/// Interval between memory samples of the child's process group.
pub const SAMPLE_INTERVAL: Duration = Duration::from_millis(100);
const MAX_POLL: Duration = Duration::from_millis(10);

#[derive(Clone, Debug)]
pub struct ExecRequest {
    pub program: PathBuf,
    pub args: Vec<OsString>,
    pub cwd: PathBuf,
    pub timeout: Duration,
    pub mem_limit: Option<u64>,
    /// stdout/stderr are redirected into files here
    pub capture_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Exited(i32),
    Signaled(i32),
    TimedOut,
    MemOut,
}

#[derive(Clone, Debug)]
pub struct ExecOutcome {
    pub termination: Termination,
    pub wall: Duration,
    /// Peak resident set of the process group in bytes, if measurable.
    pub peak_mem: Option<u64>,
    pub peak_threads: Option<u32>,
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
}

#[derive(Debug, thiserror::Error)]
#[error("failed to spawn {program}: {source}")]
pub struct SpawnError {
    pub program: String,
    #[source]
    pub source: std::io::Error,
}

struct GroupSample {
    rss_bytes: u64,
    threads: u32,
}

fn page_size() -> u64 {
    // SAFETY: sysconf has no preconditions
    let p = unsafe { libc::sysconf(libc::_SC_PAGESIZE) };
    if p > 0 {
        p as u64
    } else {
        4096
    }
}

/// Sums RSS and thread counts over every process whose group id is `pgid`.
fn sample_group(pgid: i32, page: u64) -> Option<GroupSample> {
    let mut found = false;
    let mut sample = GroupSample {
        rss_bytes: 0,
        threads: 0,
    };
    for entry in fs::read_dir("/proc").ok()?.flatten() {
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if !name.bytes().all(|b| b.is_ascii_digit()) {
            continue;
        }
        let Ok(stat) = fs::read_to_string(entry.path().join("stat")) else {
            continue;
        };
        // fields after the parenthesised command name
        let Some(close) = stat.rfind(')') else { continue };
        let fields: Vec<&str> = stat[close + 1..].split_whitespace().collect();
        if fields.len() < 22 {
            continue;
        }
        if fields[2].parse::<i32>().ok() != Some(pgid) {
            continue;
        }
        found = true;
        sample.threads += fields[17].parse::<u32>().unwrap_or(0);
        sample.rss_bytes += fields[21].parse::<u64>().unwrap_or(0) * page;
    }
    found.then_some(sample)
}

fn kill_group(pgid: i32) {
    // SAFETY: plain syscall; ESRCH when the group is already gone is fine
    unsafe {
        libc::kill(-pgid, libc::SIGKILL);
    }
}

fn read_capture(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_default()
}

/// Runs the request to completion, timeout, or memory-limit kill.
pub fn execute(req: &ExecRequest) -> Result<ExecOutcome, SpawnError> {
    let spawn_err = |source| SpawnError {
        program: req.program.display().to_string(),
        source,
    };
    fs::create_dir_all(&req.capture_dir).map_err(spawn_err)?;
    let out_path = req.capture_dir.join("stdout.txt");
    let err_path = req.capture_dir.join("stderr.txt");
    let stdout = File::create(&out_path).map_err(spawn_err)?;
    let stderr = File::create(&err_path).map_err(spawn_err)?;

    let start = Instant::now();
    let child = Command::new(&req.program)
        .args(&req.args)
        .current_dir(&req.cwd)
        .stdin(Stdio::null())
        .stdout(stdout)
        .stderr(stderr)
        .process_group(0)
        .spawn()
        .map_err(spawn_err)?;
    let pid = child.id() as i32;
    let page = page_size();

    let mut peak_mem: u64 = 0;
    let mut peak_threads: u32 = 0;
    let mut sampled = false;
    let mut next_sample = start;
    let mut poll = Duration::from_millis(1);
    let mut forced: Option<Termination> = None;

    let (status, rusage) = loop {
        let mut status: libc::c_int = 0;
        // SAFETY: zeroed rusage is a valid out-parameter
        let mut rusage: libc::rusage = unsafe { std::mem::zeroed() };
        // SAFETY: pid is our own child; WNOHANG never blocks
        let ret = unsafe { libc::wait4(pid, &mut status, libc::WNOHANG, &mut rusage) };
        if ret == pid {
            break (status, rusage);
        }
        if ret < 0 {
            let err = std::io::Error::last_os_error();
            if err.raw_os_error() != Some(libc::EINTR) {
                kill_group(pid);
                return Err(spawn_err(err));
            }
        }

        let now = Instant::now();
        if forced.is_none() && now >= next_sample {
            if let Some(s) = sample_group(pid, page) {
                sampled = true;
                peak_mem = peak_mem.max(s.rss_bytes);
                peak_threads = peak_threads.max(s.threads);
                if req.mem_limit.is_some_and(|limit| s.rss_bytes > limit) {
                    forced = Some(Termination::MemOut);
                    kill_group(pid);
                }
            }
            next_sample = now + SAMPLE_INTERVAL;
        }
        if forced.is_none() && now.duration_since(start) >= req.timeout {
            forced = Some(Termination::TimedOut);
            kill_group(pid);
        }
        let remaining = req.timeout.saturating_sub(now.duration_since(start));
        std::thread::sleep(poll.min(remaining).max(Duration::from_micros(200)));
        poll = (poll * 2).min(MAX_POLL);
    };
    let wall = start.elapsed();
    // reap stragglers that outlived the group leader
    kill_group(pid);
    drop(child);

    let max_rss = rusage.ru_maxrss.max(0) as u64 * 1024;
    if max_rss > 0 {
        sampled = true;
        peak_mem = peak_mem.max(max_rss);
    }
    let termination = forced.unwrap_or(if libc::WIFSIGNALED(status) {
        Termination::Signaled(libc::WTERMSIG(status))
    } else {
        Termination::Exited(libc::WEXITSTATUS(status))
    });
    Ok(ExecOutcome {
        termination,
        wall,
        peak_mem: sampled.then_some(peak_mem),
        peak_threads: (peak_threads > 0).then_some(peak_threads),
        stdout: read_capture(&out_path),
        stderr: read_capture(&err_path),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sh(script: &str, timeout: Duration) -> ExecOutcome {
        let dir = tempfile::tempdir().unwrap();
        execute(&ExecRequest {
            program: "/bin/sh".into(),
            args: vec!["-c".into(), script.into()],
            cwd: dir.path().to_path_buf(),
            timeout,
            mem_limit: None,
            capture_dir: dir.path().join("cap"),
        })
        .unwrap()
    }

    #[test]
    fn captures_output_and_exit() {
        let o = sh("echo hello; echo oops >&2; exit 3", Duration::from_secs(5));
        assert_eq!(o.termination, Termination::Exited(3));
        assert_eq!(o.stdout, b"hello\n");
        assert_eq!(o.stderr, b"oops\n");
        assert!(o.peak_mem.is_some());
    }

    #[test]
    fn timeout_kills_whole_group() {
        let o = sh("sleep 30 & sleep 30; wait", Duration::from_millis(300));
        assert_eq!(o.termination, Termination::TimedOut);
        assert!(o.wall < Duration::from_secs(2));
    }

    #[test]
    fn signal_reported() {
        let o = sh("kill -SEGV $$", Duration::from_secs(5));
        assert_eq!(o.termination, Termination::Signaled(libc::SIGSEGV));
    }

    #[test]
    fn spawn_failure() {
        let dir = tempfile::tempdir().unwrap();
        let err = execute(&ExecRequest {
            program: dir.path().join("missing"),
            args: vec![],
            cwd: dir.path().to_path_buf(),
            timeout: Duration::from_secs(1),
            mem_limit: None,
            capture_dir: dir.path().join("cap"),
        });
        assert!(err.is_err());
    }
}
