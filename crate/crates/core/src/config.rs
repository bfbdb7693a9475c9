//! TOML run configuration with `SATEVO_*` environment overrides.
//!
//! ```toml
//! store = "runs/demo"            # cycle store, created on demand
//! seed = "seed_solver"           # seed variant directory
//! rules = "rules"                # optional; bundled seed rules otherwise
//! gate_suite = "suites/gate"     # instances plus truth.txt
//! bench_suite = "suites/bench"
//! vbs = "vbs.txt"                # optional; bench truth table otherwise
//! cycles = 10
//! parallelism = 8
//!
//! [limits]
//! timeout = 5000.0               # seconds per benchmark run
//! mem_limit_mb = 8192
//! time_resolution = 0.5          # round measured times up to this step
//! build_timeout = 600
//!
//! [gates]
//! stage1_timeout = 30.0
//! stage2_timeout = 300.0
//! stage2_count = 50
//! proof_sample = 20              # check at most this many UNSAT proofs
//!
//! [objective]
//! initial = "solved_count"       # or "par2"
//! switch_cycle = 33
//! epsilon = 0.0
//! par_factor = 2.0
//!
//! [agent]
//! backend = "scripted"           # or "http"
//! script = "script.json"
//! endpoint = "http://127.0.0.1:8080"
//! timeout = 120
//! ```
//!
//! Relative paths resolve against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::gate::{GateError, SmokeSuite, STAGE1_TIMEOUT, STAGE2_COUNT, STAGE2_TIMEOUT};
use crate::metrics::{MetricsError, VbsTable, DEFAULT_PAR_FACTOR};
use crate::orchestrator::{
    AgentBackend, AgentError, EvolutionSettings, HttpBackend, Objective, ObjectiveKind, ScriptedBackend, DEFAULT_SEED_NOTE,
    DEFAULT_SWITCH_CYCLE,
};
use crate::runner::{ResourceLimits, COMPETITION_TIMEOUT};

pub const ENV_PREFIX: &str = "SATEVO_";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{key} = {path} does not exist")]
    MissingPath { key: &'static str, path: PathBuf },
    #[error("{key} must be positive, got {value}")]
    NotPositive { key: &'static str, value: f64 },
    #[error("environment {key}={value}: {message}")]
    Env { key: String, value: String, message: String },
    #[error("agent backend `{0}` needs `{1}`")]
    Agent(String, &'static str),
    #[error(transparent)]
    Suite(#[from] GateError),
    #[error(transparent)]
    Vbs(#[from] MetricsError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitsSection {
    pub timeout: f64,
    pub mem_limit_mb: Option<u64>,
    pub time_resolution: Option<f64>,
    pub build_timeout: f64,
}

impl Default for LimitsSection {
    fn default() -> Self {
        LimitsSection {
            timeout: COMPETITION_TIMEOUT,
            mem_limit_mb: None,
            time_resolution: None,
            build_timeout: crate::workspace::DEFAULT_BUILD_TIMEOUT.as_secs_f64(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatesSection {
    pub stage1_timeout: f64,
    pub stage2_timeout: f64,
    pub stage2_count: usize,
    pub proof_sample: Option<usize>,
}

impl Default for GatesSection {
    fn default() -> Self {
        GatesSection {
            stage1_timeout: STAGE1_TIMEOUT,
            stage2_timeout: STAGE2_TIMEOUT,
            stage2_count: STAGE2_COUNT,
            proof_sample: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveSection {
    pub initial: ObjectiveKind,
    pub switch_cycle: u32,
    pub epsilon: f64,
    pub par_factor: f64,
}

impl Default for ObjectiveSection {
    fn default() -> Self {
        ObjectiveSection {
            initial: ObjectiveKind::SolvedCount,
            switch_cycle: DEFAULT_SWITCH_CYCLE,
            epsilon: 0.0,
            par_factor: DEFAULT_PAR_FACTOR,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Scripted,
    Http,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSection {
    pub backend: BackendKind,
    pub script: Option<PathBuf>,
    pub endpoint: Option<String>,
    /// seconds
    pub timeout: f64,
}

impl Default for AgentSection {
    fn default() -> Self {
        AgentSection {
            backend: BackendKind::Scripted,
            script: None,
            endpoint: None,
            timeout: 120.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub store: PathBuf,
    pub seed: PathBuf,
    #[serde(default)]
    pub rules: Option<PathBuf>,
    pub gate_suite: PathBuf,
    pub bench_suite: PathBuf,
    #[serde(default)]
    pub vbs: Option<PathBuf>,
    #[serde(default = "default_cycles")]
    pub cycles: u32,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub seed_note: Option<String>,
    #[serde(default)]
    pub limits: LimitsSection,
    #[serde(default)]
    pub gates: GatesSection,
    #[serde(default)]
    pub objective: ObjectiveSection,
    #[serde(default)]
    pub agent: AgentSection,
}

fn default_cycles() -> u32 {
    10
}

fn default_parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn env_parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Env {
        key: key.to_string(),
        value: value.to_string(),
        message: e.to_string(),
    })
}

impl Config {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Reads, applies the process environment, resolves paths and validates.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Config::parse(&text, path)?;
        cfg.apply_env(std::env::vars())?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Recognized keys: STORE, SEED, RULES, GATE_SUITE, BENCH_SUITE, VBS,
    /// CYCLES, PARALLELISM, TIMEOUT, TIME_RESOLUTION, SWITCH_CYCLE,
    /// PAR_FACTOR, AGENT_BACKEND, AGENT_SCRIPT, AGENT_ENDPOINT, each with the
    /// `SATEVO_` prefix. Other variables are ignored.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), ConfigError> {
        for (k, v) in vars {
            let Some(key) = k.strip_prefix(ENV_PREFIX) else { continue };
            match key {
                "STORE" => self.store = v.into(),
                "SEED" => self.seed = v.into(),
                "RULES" => self.rules = Some(v.into()),
                "GATE_SUITE" => self.gate_suite = v.into(),
                "BENCH_SUITE" => self.bench_suite = v.into(),
                "VBS" => self.vbs = Some(v.into()),
                "CYCLES" => self.cycles = env_parse(&k, &v)?,
                "PARALLELISM" => self.parallelism = env_parse(&k, &v)?,
                "TIMEOUT" => self.limits.timeout = env_parse(&k, &v)?,
                "TIME_RESOLUTION" => self.limits.time_resolution = Some(env_parse(&k, &v)?),
                "SWITCH_CYCLE" => self.objective.switch_cycle = env_parse(&k, &v)?,
                "PAR_FACTOR" => self.objective.par_factor = env_parse(&k, &v)?,
                "AGENT_BACKEND" => {
                    self.agent.backend = match v.as_str() {
                        "scripted" => BackendKind::Scripted,
                        "http" => BackendKind::Http,
                        _ => {
                            return Err(ConfigError::Env {
                                key: k.clone(),
                                value: v.clone(),
                                message: "expected scripted or http".into(),
                            })
                        }
                    }
                }
                "AGENT_SCRIPT" => self.agent.script = Some(v.into()),
                "AGENT_ENDPOINT" => self.agent.endpoint = Some(v),
                _ => {}
            }
        }
        Ok(())
    }

    fn resolve(&mut self, base: &Path) {
        let abs = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        abs(&mut self.store);
        abs(&mut self.seed);
        abs(&mut self.gate_suite);
        abs(&mut self.bench_suite);
        for p in [&mut self.rules, &mut self.vbs, &mut self.agent.script].into_iter().flatten() {
            abs(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let exists = |key, p: &Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(ConfigError::MissingPath { key, path: p.to_path_buf() })
            }
        };
        exists("seed", &self.seed)?;
        exists("gate_suite", &self.gate_suite)?;
        exists("bench_suite", &self.bench_suite)?;
        if let Some(r) = &self.rules {
            exists("rules", r)?;
        }
        if let Some(v) = &self.vbs {
            exists("vbs", v)?;
        }
        let positive = |key, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::NotPositive { key, value })
            }
        };
        positive("limits.timeout", self.limits.timeout)?;
        positive("limits.build_timeout", self.limits.build_timeout)?;
        if let Some(r) = self.limits.time_resolution {
            positive("limits.time_resolution", r)?;
        }
        positive("gates.stage1_timeout", self.gates.stage1_timeout)?;
        positive("gates.stage2_timeout", self.gates.stage2_timeout)?;
        positive("gates.stage2_count", self.gates.stage2_count as f64)?;
        positive("parallelism", self.parallelism as f64)?;
        positive("objective.par_factor", self.objective.par_factor)?;
        positive("agent.timeout", self.agent.timeout)?;
        if self.objective.epsilon < 0.0 {
            return Err(ConfigError::NotPositive {
                key: "objective.epsilon",
                value: self.objective.epsilon,
            });
        }
        match self.agent.backend {
            BackendKind::Scripted => exists("agent.script", self.agent.script.as_deref().ok_or(ConfigError::Agent("scripted".into(), "script"))?),
            BackendKind::Http if self.agent.endpoint.is_none() => Err(ConfigError::Agent("http".into(), "endpoint")),
            BackendKind::Http => Ok(()),
        }
    }

    pub fn limits(&self) -> ResourceLimits {
        ResourceLimits {
            wall_timeout: self.limits.timeout,
            mem_limit: self.limits.mem_limit_mb.map(|mb| mb * 1024 * 1024),
            time_resolution: self.limits.time_resolution,
        }
    }

    /// Loads both suites and the reference table.
    pub fn settings(&self) -> Result<EvolutionSettings, ConfigError> {
        let gate = SmokeSuite::load(&self.gate_suite, "gate")?;
        let bench = SmokeSuite::load(&self.bench_suite, "bench")?;
        let mut s = EvolutionSettings::new(self.store.clone(), self.seed.clone(), gate, bench, self.limits());
        if let Some(v) = &self.vbs {
            s.vbs = VbsTable::load(v)?;
        }
        s.rules_dir = self.rules.clone();
        s.stage1_timeout = self.gates.stage1_timeout;
        s.stage2_timeout = self.gates.stage2_timeout;
        s.stage2_count = self.gates.stage2_count;
        s.proof_sample = self.gates.proof_sample;
        s.build_timeout = Duration::from_secs_f64(self.limits.build_timeout);
        s.objective = Objective {
            kind: self.objective.initial,
            switch_cycle: self.objective.switch_cycle,
            epsilon: self.objective.epsilon,
        };
        s.par_factor = self.objective.par_factor;
        s.parallelism = self.parallelism;
        s.seed_note = self.seed_note.clone().unwrap_or_else(|| DEFAULT_SEED_NOTE.into());
        Ok(s)
    }

    pub fn backend(&self) -> Result<Box<dyn AgentBackend>, AgentError> {
        Ok(match self.agent.backend {
            BackendKind::Scripted => Box::new(ScriptedBackend::load(self.agent.script.as_deref().unwrap_or(Path::new("")))?),
            BackendKind::Http => Box::new(HttpBackend::new(
                self.agent.endpoint.clone().unwrap_or_default(),
                Duration::from_secs_f64(self.agent.timeout),
            )),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "store = \"s\"\nseed = \"seed\"\ngate_suite = \"g\"\nbench_suite = \"b\"\n[agent]\nscript = \"x.json\"\n";

    fn layout(dir: &Path) {
        for d in ["seed", "g", "b"] {
            fs::create_dir_all(dir.join(d)).unwrap();
        }
        fs::write(dir.join("x.json"), "{\"steps\": []}").unwrap();
    }

    #[test]
    fn defaults_and_resolution() {
        let d = tempfile::tempdir().unwrap();
        layout(d.path());
        let p = d.path().join("c.toml");
        fs::write(&p, MINIMAL).unwrap();
        let c = Config::load(&p).unwrap();
        assert_eq!(c.store, d.path().join("s"));
        assert_eq!(c.limits.timeout, COMPETITION_TIMEOUT);
        assert_eq!(c.objective.switch_cycle, 33);
        assert_eq!(c.objective.par_factor, 2.0);
        assert_eq!(c.gates.stage2_count, 50);
        assert_eq!(c.cycles, 10);
    }

    #[test]
    fn env_overrides() {
        let mut c = Config::parse(MINIMAL, Path::new("c.toml")).unwrap();
        let vars = [("SATEVO_CYCLES", "3"), ("SATEVO_TIMEOUT", "60"), ("OTHER", "x"), ("SATEVO_AGENT_BACKEND", "http")];
        c.apply_env(vars.iter().map(|(k, v)| (k.to_string(), v.to_string()))).unwrap();
        assert_eq!((c.cycles, c.limits.timeout, c.agent.backend), (3, 60.0, BackendKind::Http));
        let bad = [("SATEVO_CYCLES".to_string(), "many".to_string())];
        assert!(matches!(c.apply_env(bad), Err(ConfigError::Env { .. })));
    }

    #[test]
    fn validation_rejects_bad_values() {
        let d = tempfile::tempdir().unwrap();
        layout(d.path());
        let p = d.path().join("c.toml");
        fs::write(&p, format!("{MINIMAL}[limits]\ntimeout = -1.0\n")).unwrap();
        assert!(matches!(Config::load(&p), Err(ConfigError::NotPositive { key: "limits.timeout", .. })));
        fs::write(&p, MINIMAL.replace("seed = \"seed\"", "seed = \"nope\"")).unwrap();
        assert!(matches!(Config::load(&p), Err(ConfigError::MissingPath { key: "seed", .. })));
        fs::write(&p, format!("{MINIMAL}bogus = 1\n")).unwrap();
        assert!(matches!(Config::load(&p), Err(ConfigError::Parse { .. })));
    }
}
