//! `satevo`: every harness stage as a subcommand, plus the evolution loop.
//!
//! Exit status: 0 on success, valid or compliant; 1 on findings, invalid
//! certificates or failed gates; 2 on usage or input errors. Results go to
//! stdout, diagnostics to stderr.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use satevo_core::config::Config;
use satevo_core::drat::{check_proof, parse_drat_file, ProofCheck};
use satevo_core::fixture::{write_toy_variant, ToyParams};
use satevo_core::formula::{check_model, parse_dimacs_file, Assignment, Lit, ModelMode, ModelVerdict, ParseOptions};
use satevo_core::gate::{craft_feedback, stage1_smoke, stage2_validate, GateConfig, GateVerdict, SmokeSuite, STAGE2_COUNT};
use satevo_core::generate::{generate_suite, SuiteSpec};
use satevo_core::metrics::{build_report, cactus_csv, par2, EvaluationReport, ScoreParams, VbsTable, DEFAULT_PAR_FACTOR};
use satevo_core::orchestrator::{load_records, run_evolution, CycleRecord, OrchestratorError, TRAJECTORY_FILE};
use satevo_core::pool::WorkerPool;
use satevo_core::rules::{
    analyze_failures, compliance_check, evolve_rules, load_rules, precommit_hook, ComplianceReport, RulePatch, RuleSet,
    SnapshotStore,
};
use satevo_core::runner::{
    list_instances, pair_run, read_records, run_benchmark, write_records, LocalExecutor, ProgressEvent, ResourceLimits, RunRecord,
    SweepOptions, SweepTarget, COMPETITION_TIMEOUT,
};
use satevo_core::workspace::{build_variant, validate_layout, BuildResult, SolverVariant, DEFAULT_BUILD_TIMEOUT};

#[derive(Parser, Debug)]
#[command(name = "satevo", version, about = "Verification gates, benchmarking and evolution for SAT solver variants")]
struct Cli {
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads for sweeps and proof checks.
    #[arg(short = 'j', long, global = true, env = "SATEVO_PARALLELISM")]
    parallelism: Option<usize>,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a model (v-lines or a literal list) against a CNF.
    CheckModel {
        cnf: PathBuf,
        model: PathBuf,
        /// Unassigned variables are an error instead of false.
        #[arg(long)]
        strict: bool,
    },
    /// Check a DRAT refutation of a CNF.
    CheckProof { cnf: PathBuf, proof: PathBuf },
    /// Check the directory layout of a solver variant.
    Layout { variant: PathBuf },
    /// Run the variant's build script.
    Build {
        variant: PathBuf,
        /// seconds
        #[arg(long, default_value_t = DEFAULT_BUILD_TIMEOUT.as_secs_f64())]
        timeout: f64,
    },
    /// Stage 1: crashes, timeouts and wrong answers on a smoke suite.
    Smoke(GateArgs),
    /// Stage 1 then Stage 2: model and proof certificates.
    Validate(GateArgs),
    /// Run a variant over a suite and write run records.
    Bench(BenchArgs),
    /// PAR-k score of a records file.
    Score {
        records: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PAR_FACTOR)]
        par_factor: f64,
        /// seconds; the timeout the records were produced with
        #[arg(long, default_value_t = COMPETITION_TIMEOUT)]
        timeout: f64,
        /// Reference table for a full report.
        #[arg(long)]
        vbs: Option<PathBuf>,
    },
    /// Reports over records files, a cactus CSV, or an evolution store.
    Report(ReportArgs),
    /// Rule compliance and evolution.
    #[command(subcommand)]
    Rules(RulesCommand),
    /// The champion/challenger loop.
    #[command(subcommand)]
    Evolve(EvolveCommand),
    /// Instance suites.
    #[command(subcommand)]
    Suite(SuiteCommand),
    /// Write the bundled toy solver as a variant directory.
    Toy {
        dir: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        budget: u64,
        #[arg(long, default_value_t = 0)]
        heuristic: u8,
    },
}

#[derive(Args, Debug)]
struct GateArgs {
    variant: PathBuf,
    /// Directory of .cnf files with truth.txt.
    #[arg(long)]
    suite: PathBuf,
    /// seconds per instance
    #[arg(long, default_value_t = satevo_core::gate::STAGE1_TIMEOUT)]
    stage1_timeout: f64,
    #[arg(long, default_value_t = satevo_core::gate::STAGE2_TIMEOUT)]
    stage2_timeout: f64,
    /// Stage-2 instances, taken in name order.
    #[arg(long, default_value_t = STAGE2_COUNT)]
    count: usize,
    /// Check at most this many UNSAT proofs.
    #[arg(long)]
    proof_sample: Option<usize>,
    /// Use the existing binary.
    #[arg(long)]
    no_build: bool,
    /// Scratch directory for outputs and proofs.
    #[arg(long)]
    scratch: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    variant: PathBuf,
    suite: PathBuf,
    #[arg(long, default_value_t = COMPETITION_TIMEOUT)]
    timeout: f64,
    /// Round measured times up to this many seconds.
    #[arg(long)]
    resolution: Option<f64>,
    #[arg(long)]
    mem_limit_mb: Option<u64>,
    /// A second variant run interleaved with the first.
    #[arg(long)]
    against: Option<PathBuf>,
    /// Records output (JSON lines); the challenger's with --against.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Reference table; the suite's truth.txt when present.
    #[arg(long)]
    vbs: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_PAR_FACTOR)]
    par_factor: f64,
    #[arg(long)]
    scratch: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    records: Vec<PathBuf>,
    #[arg(long)]
    vbs: Option<PathBuf>,
    /// Sorted solve times per records file, for cactus plots.
    #[arg(long)]
    cactus: bool,
    #[arg(long, default_value_t = COMPETITION_TIMEOUT)]
    timeout: f64,
    #[arg(long, default_value_t = DEFAULT_PAR_FACTOR)]
    par_factor: f64,
    /// An evolution store: prints its trajectory.
    #[arg(long, conflicts_with_all = ["records", "cactus"])]
    store: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum RulesCommand {
    /// Scan a variant against the rule set; exit 1 on findings.
    Check {
        #[arg(long)]
        variant: PathBuf,
        /// Rule directory; the bundled seed when omitted.
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Patch a rule directory from the failures recorded in a store.
    Evolve {
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        store: PathBuf,
        /// Accepted variant that new forbidden patterns must not flag.
        #[arg(long)]
        protect: Option<PathBuf>,
    },
    /// Write the bundled seed rules.
    Seed { dir: PathBuf },
    /// Print a git pre-commit hook running `rules check`.
    Hook {
        #[arg(long)]
        rules: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum EvolveCommand {
    /// Run or resume the loop described by a TOML config.
    Run {
        config: PathBuf,
        /// Overrides `cycles` from the config.
        #[arg(long)]
        cycles: Option<u32>,
    },
}

#[derive(Subcommand, Debug)]
enum SuiteCommand {
    /// Generate random and crafted instances with truth.txt.
    Gen {
        dir: PathBuf,
        #[arg(long, default_value_t = SuiteSpec::default().random)]
        random: usize,
        #[arg(long, default_value_t = SuiteSpec::default().min_vars)]
        min_vars: u32,
        #[arg(long, default_value_t = SuiteSpec::default().max_vars)]
        max_vars: u32,
        #[arg(long, default_value_t = SuiteSpec::default().ratio)]
        ratio: f64,
        #[arg(long, default_value_t = SuiteSpec::default().seed)]
        seed: u64,
        #[arg(long)]
        no_crafted: bool,
    },
}

/// Exit status of a completed command.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Ok,
    Findings,
}

/// `--json` output of `check-model`.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ModelOutput {
    pub valid: bool,
    pub verdict: Option<ModelVerdict>,
    pub error: Option<String>,
}

/// `--json` output of `smoke` and `validate`.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct GateOutput {
    pub passed: bool,
    pub build: Option<BuildResult>,
    pub verdicts: Vec<GateVerdict>,
    pub feedback: String,
}

/// `--json` output of `score`.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ScoreOutput {
    pub score: f64,
    pub factor: f64,
    pub timeout: f64,
    pub records: usize,
    pub report: Option<EvaluationReport>,
}

/// `--json` output of `bench`.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct BenchOutput {
    pub records: usize,
    pub score: f64,
    pub report: Option<EvaluationReport>,
    pub against: Option<EvaluationReport>,
}

/// `--json` output of `rules evolve`.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct EvolveRulesOutput {
    pub patches: Vec<RulePatch>,
    pub snapshot: Option<String>,
    pub versions: std::collections::BTreeMap<String, u32>,
}

/// `--json` output of `evolve run`.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct EvolveOutput {
    pub champion: String,
    pub paused: bool,
    pub exhausted: bool,
    pub trajectory: PathBuf,
    pub records: Vec<CycleRecord>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Findings) => ExitCode::from(1),
        Err(e) => {
            eprintln!("satevo: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn status(ok: bool) -> Status {
    if ok {
        Status::Ok
    } else {
        Status::Findings
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn parallelism(cli: &Cli) -> usize {
    cli.parallelism
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

fn variant_at(dir: &Path) -> SolverVariant {
    let id = dir.file_name().map_or_else(|| "variant".into(), |n| n.to_string_lossy().into_owned());
    SolverVariant::new(id, dir)
}

/// The given directory, or a temporary one removed when the guard drops.
fn scratch_dir(given: &Option<PathBuf>) -> Result<(PathBuf, Option<tempfile::TempDir>)> {
    match given {
        Some(p) => {
            fs::create_dir_all(p)?;
            Ok((p.clone(), None))
        }
        None => {
            let g = tempfile::Builder::new().prefix("satevo-").tempdir()?;
            Ok((g.path().to_path_buf(), Some(g)))
        }
    }
}

fn run(cli: &Cli) -> Result<Status> {
    match &cli.command {
        Command::CheckModel { cnf, model, strict } => cmd_check_model(cli, cnf, model, *strict),
        Command::CheckProof { cnf, proof } => cmd_check_proof(cli, cnf, proof),
        Command::Layout { variant } => cmd_layout(cli, variant),
        Command::Build { variant, timeout } => {
            let (scratch, _guard) = scratch_dir(&None)?;
            let b = build_variant(&variant_at(variant), Duration::from_secs_f64(*timeout), &scratch)?;
            if cli.json {
                print_json(&b)?;
            } else {
                print!("{}", b.diagnostics);
                println!("{}", if b.success { "BUILD OK" } else { "BUILD FAILED" });
                if let Some(h) = &b.binary_hash {
                    println!("binary sha256 {h}");
                }
            }
            Ok(status(b.success))
        }
        Command::Smoke(args) => cmd_gates(cli, args, false),
        Command::Validate(args) => cmd_gates(cli, args, true),
        Command::Bench(args) => cmd_bench(cli, args),
        Command::Score {
            records,
            par_factor,
            timeout,
            vbs,
        } => cmd_score(cli, records, *par_factor, *timeout, vbs.as_deref()),
        Command::Report(args) => cmd_report(cli, args),
        Command::Rules(r) => cmd_rules(cli, r),
        Command::Evolve(EvolveCommand::Run { config, cycles }) => cmd_evolve(cli, config, *cycles),
        Command::Suite(SuiteCommand::Gen {
            dir,
            random,
            min_vars,
            max_vars,
            ratio,
            seed,
            no_crafted,
        }) => {
            let spec = SuiteSpec {
                random: *random,
                include_crafted: !no_crafted,
                min_vars: *min_vars,
                max_vars: *max_vars,
                ratio: *ratio,
                seed: *seed,
            };
            let paths = generate_suite(dir, &spec)?;
            if cli.json {
                print_json(&paths)?;
            } else {
                println!("{} instances written to {}", paths.len(), dir.display());
            }
            Ok(Status::Ok)
        }
        Command::Toy { dir, budget, heuristic } => {
            let params = ToyParams {
                decision_budget: *budget,
                branch_heuristic: *heuristic,
            };
            write_toy_variant(dir, "toy", params)?;
            if !cli.json {
                println!("toy solver written to {}", dir.display());
            }
            Ok(Status::Ok)
        }
    }
}

/// Literals from `v` lines, or from a bare list; `s` and `c` lines are
/// skipped and reading stops at the first 0.
fn read_model(path: &Path) -> Result<Assignment> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lits = Vec::new();
    'lines: for line in text.lines() {
        let line = line.trim();
        let body = match line.split_once(char::is_whitespace) {
            _ if line.is_empty() || line.starts_with('c') || line.starts_with('s') => continue,
            Some(("v", rest)) => rest,
            _ if line == "v" => continue,
            _ => line,
        };
        for tok in body.split_whitespace() {
            let n: i32 = tok.parse().with_context(|| format!("bad literal `{tok}` in {}", path.display()))?;
            match Lit::new(n) {
                Some(l) => lits.push(l),
                None => break 'lines,
            }
        }
    }
    Assignment::from_lits(lits).map_err(Into::into)
}

fn cmd_check_model(cli: &Cli, cnf: &Path, model: &Path, strict: bool) -> Result<Status> {
    let formula = parse_dimacs_file(cnf, ParseOptions::default())?.formula;
    let mode = if strict { ModelMode::Strict } else { ModelMode::Lenient };
    let out = match read_model(model).map(|m| check_model(&formula, &m, mode)) {
        Ok(Ok(v)) => ModelOutput {
            valid: v.is_satisfied(),
            verdict: Some(v),
            error: None,
        },
        Ok(Err(e)) => ModelOutput {
            valid: false,
            verdict: None,
            error: Some(e.to_string()),
        },
        Err(e) => ModelOutput {
            valid: false,
            verdict: None,
            error: Some(format!("{e:#}")),
        },
    };
    if cli.json {
        print_json(&out)?;
    } else {
        match (&out.verdict, &out.error) {
            (Some(ModelVerdict::Satisfied { defaulted }), _) => {
                println!("SATISFIED");
                if *defaulted > 0 {
                    eprintln!("{defaulted} unassigned variable(s) read as false");
                }
            }
            (Some(ModelVerdict::Violated { clause }), _) => println!("VIOLATED clause {clause}"),
            (None, Some(e)) => println!("INVALID {e}"),
            (None, None) => unreachable!(),
        }
    }
    Ok(status(out.valid))
}

fn cmd_check_proof(cli: &Cli, cnf: &Path, proof: &Path) -> Result<Status> {
    let formula = parse_dimacs_file(cnf, ParseOptions::default())?.formula;
    let proof = parse_drat_file(proof)?;
    let check: ProofCheck = check_proof(&formula, &proof);
    if cli.json {
        print_json(&check)?;
    } else {
        match &check.verdict {
            satevo_core::drat::ProofVerdict::Valid => println!("VALID"),
            satevo_core::drat::ProofVerdict::Invalid { lemma, reason } => println!("INVALID lemma {lemma}: {reason}"),
        }
        for w in &check.warnings {
            eprintln!("warning: {w}");
        }
    }
    Ok(status(check.verdict.is_valid()))
}

fn cmd_layout(cli: &Cli, dir: &Path) -> Result<Status> {
    let v = variant_at(dir);
    let violations = match validate_layout(dir, &v.id)? {
        Ok(_) => Vec::new(),
        Err(v) => v,
    };
    if cli.json {
        print_json(&violations)?;
    } else if violations.is_empty() {
        println!("LAYOUT OK");
    } else {
        for x in &violations {
            println!("{x}");
        }
    }
    Ok(status(violations.is_empty()))
}

fn cmd_gates(cli: &Cli, args: &GateArgs, stage2: bool) -> Result<Status> {
    let variant = variant_at(&args.variant);
    let suite = SmokeSuite::load(&args.suite, "smoke")?;
    let (scratch, _guard) = scratch_dir(&args.scratch)?;
    let mut build = None;
    let mut verdicts = Vec::new();
    if !args.no_build {
        let b = build_variant(&variant, DEFAULT_BUILD_TIMEOUT, &scratch.join("build"))?;
        build = Some(b);
    }
    if build.as_ref().is_none_or(|b| b.success) {
        let mut cfg = GateConfig::new(&scratch);
        cfg.stage1_timeout = args.stage1_timeout;
        cfg.stage2_timeout = args.stage2_timeout;
        cfg.proof_sample = args.proof_sample;
        let n = parallelism(cli);
        let exec = LocalExecutor::new(n);
        let v1 = stage1_smoke(&variant, &suite, &cfg, &exec);
        let go_on = v1.passed && stage2;
        verdicts.push(v1);
        if go_on {
            verdicts.push(stage2_validate(&variant, &suite.take(args.count), &cfg, &exec, &WorkerPool::new(n)));
        }
    }
    let feedback = craft_feedback(build.as_ref(), &verdicts);
    let passed = build.as_ref().is_none_or(|b| b.success) && verdicts.iter().all(|v| v.passed) && !verdicts.is_empty();
    let out = GateOutput {
        passed,
        build,
        verdicts,
        feedback: feedback.markdown,
    };
    if cli.json {
        print_json(&out)?;
    } else {
        for v in &out.verdicts {
            println!("{}: {}", v.stage, if v.passed { "PASS" } else { "FAIL" });
        }
        if !out.passed {
            print!("{}", out.feedback);
        }
    }
    Ok(status(passed))
}

fn table_for(vbs: Option<&Path>, suite: &Path) -> Result<Option<VbsTable>> {
    if let Some(v) = vbs {
        return Ok(Some(VbsTable::load(v)?));
    }
    let truth = suite.join(satevo_core::gate::TRUTH_FILE);
    Ok(if truth.is_file() { Some(VbsTable::load(&truth)?) } else { None })
}

fn cmd_bench(cli: &Cli, args: &BenchArgs) -> Result<Status> {
    let limits = ResourceLimits {
        wall_timeout: args.timeout,
        mem_limit: args.mem_limit_mb.map(|m| m * 1024 * 1024),
        time_resolution: args.resolution,
    };
    limits.validate()?;
    let suite = list_instances(&args.suite).with_context(|| format!("listing {}", args.suite.display()))?;
    if suite.is_empty() {
        bail!("no .cnf instances in {}", args.suite.display());
    }
    let (scratch, _guard) = scratch_dir(&args.scratch)?;
    let opts = SweepOptions {
        limits: limits.clone(),
        scratch_root: scratch,
        emit_proof: false,
    };
    let exec = LocalExecutor::new(parallelism(cli));
    let progress = |e: &ProgressEvent| log::info!("[{}/{}] {} {} {}", e.done, e.total, e.label, e.record.instance, e.record.outcome);
    let target = |dir: &Path| {
        let v = variant_at(dir);
        SweepTarget {
            label: v.id.clone(),
            run_script: v.run_script(),
        }
    };
    let (main, other) = match &args.against {
        None => (run_benchmark(&target(&args.variant), &suite, &opts, &exec, Some(&progress)), None),
        Some(b) => {
            let (champ, chal) = pair_run(&target(b), &target(&args.variant), &suite, &opts, &exec, Some(&progress));
            (chal, Some(champ))
        }
    };
    if let Some(out) = &args.output {
        write_records(fs::File::create(out)?, &main)?;
    }
    let table = table_for(args.vbs.as_deref(), &args.suite)?;
    let report_of = |r: &[RunRecord]| -> Result<Option<EvaluationReport>> {
        table.as_ref().map(|t| build_report(r, t, &limits, args.par_factor)).transpose().map_err(Into::into)
    };
    let out = BenchOutput {
        records: main.len(),
        score: par2(&main, &ScoreParams::new(limits.wall_timeout).with_factor(args.par_factor))?,
        report: report_of(&main)?,
        against: other.as_deref().map(report_of).transpose()?.flatten(),
    };
    if cli.json {
        print_json(&out)?;
    } else {
        match &out.report {
            Some(r) => print!("{}", r.to_markdown(&args.variant.display().to_string())),
            None => println!("PAR-{} {:?}", args.par_factor, out.score),
        }
        if let Some(r) = &out.against {
            print!("{}", r.to_markdown(&format!("{} (baseline)", args.against.as_ref().unwrap().display())));
        }
    }
    Ok(Status::Ok)
}

fn read_records_file(path: &Path) -> Result<Vec<RunRecord>> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_records(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_score(cli: &Cli, path: &Path, factor: f64, timeout: f64, vbs: Option<&Path>) -> Result<Status> {
    let records = read_records_file(path)?;
    let limits = ResourceLimits::with_timeout(timeout);
    limits.validate()?;
    let score = par2(&records, &ScoreParams::new(timeout).with_factor(factor))?;
    let report = vbs
        .map(|v| -> Result<EvaluationReport> { Ok(build_report(&records, &VbsTable::load(v)?, &limits, factor)?) })
        .transpose()?;
    let out = ScoreOutput {
        score,
        factor,
        timeout,
        records: records.len(),
        report,
    };
    if cli.json {
        print_json(&out)?;
    } else {
        println!("{:?}", out.score);
        if let Some(r) = &out.report {
            print!("{}", r.to_markdown(&path.display().to_string()));
        }
    }
    Ok(Status::Ok)
}

fn cmd_report(cli: &Cli, args: &ReportArgs) -> Result<Status> {
    if let Some(store) = &args.store {
        let records = load_records(store)?;
        let csv = fs::read_to_string(store.join(TRAJECTORY_FILE))?;
        if cli.json {
            print_json(&records)?;
        } else {
            print!("{csv}");
        }
        return Ok(Status::Ok);
    }
    if args.records.is_empty() {
        bail!("report needs records files or --store");
    }
    let sets: Vec<(String, Vec<RunRecord>)> = args
        .records
        .iter()
        .map(|p| Ok((p.file_stem().unwrap_or_default().to_string_lossy().into_owned(), read_records_file(p)?)))
        .collect::<Result<_>>()?;
    if args.cactus {
        let series: Vec<(&str, &[RunRecord])> = sets.iter().map(|(l, r)| (l.as_str(), r.as_slice())).collect();
        print!("{}", cactus_csv(&series));
        return Ok(Status::Ok);
    }
    let Some(vbs) = &args.vbs else { bail!("report needs --vbs (or --cactus)") };
    let table = VbsTable::load(vbs)?;
    let limits = ResourceLimits::with_timeout(args.timeout);
    let reports: Vec<(String, EvaluationReport)> = sets
        .iter()
        .map(|(l, r)| Ok((l.clone(), build_report(r, &table, &limits, args.par_factor)?)))
        .collect::<Result<_>>()?;
    if cli.json {
        print_json(&reports)?;
    } else {
        for (l, r) in &reports {
            print!("{}", r.to_markdown(l));
        }
    }
    Ok(Status::Ok)
}

fn rules_or_seed(dir: Option<&Path>) -> Result<RuleSet> {
    Ok(match dir {
        Some(d) => load_rules(d)?,
        None => RuleSet::seed(),
    })
}

fn cmd_rules(cli: &Cli, cmd: &RulesCommand) -> Result<Status> {
    match cmd {
        RulesCommand::Check { variant, rules } => {
            let rules = rules_or_seed(rules.as_deref())?;
            let report: ComplianceReport = compliance_check(&variant_at(variant), &rules);
            if cli.json {
                print_json(&report)?;
            } else if report.compliant {
                println!("COMPLIANT");
            } else {
                for f in &report.findings {
                    println!("{f}");
                }
            }
            Ok(status(report.compliant))
        }
        RulesCommand::Evolve { rules, store, protect } => {
            let set = load_rules(rules)?;
            let history = load_records(store)?;
            let signatures = analyze_failures(&history);
            let evolution = evolve_rules(&set, &signatures, &SnapshotStore::for_rules(rules), protect.as_deref().map(variant_at).as_ref())?;
            evolution.rules.write(rules)?;
            let out = EvolveRulesOutput {
                versions: evolution.rules.versions(),
                patches: evolution.patches,
                snapshot: evolution.snapshot,
            };
            if cli.json {
                print_json(&out)?;
            } else {
                for p in &out.patches {
                    println!("rule {:02} {:?}: {}", p.target, p.op, p.provenance.evidence);
                }
                println!("{} patch(es); snapshot {}", out.patches.len(), out.snapshot.as_deref().unwrap_or("none"));
            }
            Ok(Status::Ok)
        }
        RulesCommand::Seed { dir } => {
            RuleSet::seed().write(dir)?;
            if !cli.json {
                println!("seed rules written to {}", dir.display());
            }
            Ok(Status::Ok)
        }
        RulesCommand::Hook { rules } => {
            let exe = std::env::current_exe().map_or_else(|_| "satevo".into(), |p| p.display().to_string());
            print!("{}", precommit_hook(&exe, rules));
            Ok(Status::Ok)
        }
    }
}

fn cmd_evolve(cli: &Cli, config: &Path, cycles: Option<u32>) -> Result<Status> {
    let mut cfg = Config::load(config)?;
    if let Some(p) = cli.parallelism {
        cfg.parallelism = p;
    }
    let settings = cfg.settings()?;
    let backend = cfg.backend()?;
    let exec = LocalExecutor::new(cfg.parallelism);
    let outcome = match run_evolution(&settings, backend.as_ref(), &exec, cycles.unwrap_or(cfg.cycles)) {
        Ok(o) => o,
        Err(e @ OrchestratorError::SeedRejected { .. }) => {
            eprintln!("satevo: {e}");
            return Ok(Status::Findings);
        }
        Err(e) => return Err(e.into()),
    };
    if cli.json {
        print_json(&EvolveOutput {
            champion: outcome.champion,
            paused: outcome.paused,
            exhausted: outcome.exhausted,
            trajectory: outcome.trajectory,
            records: outcome.records,
        })?;
    } else {
        for r in &outcome.records {
            println!("cycle {:>3} {:<12} {:<20} champion {} par2 {:?}", r.cycle, r.variant, r.decision.to_string(), r.champion, r.champion_par2);
        }
        println!("champion {} ({} solved, PAR-2 {:?})", outcome.champion, outcome.champion_report.solved, outcome.champion_report.par2);
        println!("trajectory {}", outcome.trajectory.display());
        if outcome.paused {
            println!("paused");
        }
    }
    Ok(Status::Ok)
}
