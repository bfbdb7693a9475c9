//! Acceptance suite. Runs every criterion in order and prints one
//! `PASS`/`FAIL` line per criterion; exits non-zero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::os::unix::fs::PermissionsExt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num::{BigRational, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use satevo_core::drat::{check_proof, fuzz_refutation, FuzzStrategy};
use satevo_core::fixture::{
    demo_bench_spec, demo_gate_spec, demo_script, seeded_mutants, write_toy_variant, BugClass, ToyParams, DEMO_SEED,
    SOLVER_SOURCE,
};
use satevo_core::formula::{brute_force_solve, check_model, Assignment, BruteForceResult, CnfFormula, Lit, ModelMode, ModelVerdict};
use satevo_core::gate::SmokeSuite;
use satevo_core::generate::{generate_suite, random_ksat, SuiteSpec};
use satevo_core::metrics::{category_scores, par2_exact, ScoreParams, Truth, VbsTable};
use satevo_core::orchestrator::{
    run_evolution, Decision, EditChange, EvolutionOutcome, EvolutionSettings, FileEdit, Objective, ObjectiveKind, ScriptStep,
    ScriptedBackend,
};
use satevo_core::pool::WorkerPool;
use satevo_core::reference::{solve_with_proof, ReferenceResult};
use satevo_core::rules::{compliance_check, load_rules, Finding, RuleSet, SnapshotStore, FORBIDDEN_RULE};
use satevo_core::runner::{
    list_instances, run_benchmark, run_instance, Job, LocalExecutor, Outcome, ResourceLimits, RunRecord, SweepOptions, SweepTarget,
};
use satevo_core::workspace::{build_variant, SolverVariant};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn(&Path) -> Verdict);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let held: bool = $cond;
        if !held {
            return Err(format!($($fmt)+));
        }
    };
}

// ---------------------------------------------------------------- criterion 1

/// 1-based index of the first clause with no true literal under `bits`.
fn truth_table_eval(clauses: &[Vec<i32>], bits: u64) -> Option<usize> {
    let lit_true = |l: i32| {
        let on = bits >> (l.unsigned_abs() - 1) & 1 == 1;
        if l > 0 {
            on
        } else {
            !on
        }
    };
    clauses.iter().position(|c| !c.iter().any(|&l| lit_true(l))).map(|i| i + 1)
}

fn random_int_formula(rng: &mut ChaCha8Rng, max_vars: u32, max_clauses: usize) -> (u32, Vec<Vec<i32>>) {
    let n = rng.gen_range(1..=max_vars);
    let m = rng.gen_range(0..=max_clauses);
    let clauses = (0..m)
        .map(|_| {
            let k = rng.gen_range(0..=5);
            (0..k)
                .map(|_| {
                    let v = rng.gen_range(1..=n) as i32;
                    if rng.gen() {
                        v
                    } else {
                        -v
                    }
                })
                .collect()
        })
        .collect();
    (n, clauses)
}

fn to_formula(n: u32, clauses: &[Vec<i32>]) -> CnfFormula {
    let cs = clauses.iter().map(|c| c.iter().map(|&l| Lit::new(l).unwrap()).collect()).collect();
    CnfFormula::new(n, cs, "acceptance").unwrap()
}

fn c1_model_check_oracle(_: &Path) -> Verdict {
    const PAIRS: usize = 10_000;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut disagreements = 0;
    let mut satisfied = 0;
    let mut brute_checked = 0;
    for i in 0..PAIRS {
        let (n, clauses) = random_int_formula(&mut rng, 12, 40);
        let f = to_formula(n, &clauses);
        let bits: u64 = rng.gen::<u64>() & ((1 << n) - 1);
        // half the models are partial; lenient mode reads the gaps as false
        let model = if i % 2 == 0 {
            Assignment::from_bits(n, bits)
        } else {
            let lits: Vec<Lit> = (1..=n).filter(|_| rng.gen_bool(0.7)).map(|v| Lit::from_var(v, bits >> (v - 1) & 1 == 1)).collect();
            Assignment::from_lits(lits).unwrap()
        };
        let effective: u64 = (1..=n).filter(|&v| model.get(v) == Some(true)).map(|v| 1u64 << (v - 1)).sum();
        let expected = truth_table_eval(&clauses, effective);
        let got = check_model(&f, &model, ModelMode::Lenient).map_err(|e| e.to_string())?;
        let agree = match (expected, &got) {
            (None, ModelVerdict::Satisfied { .. }) => true,
            (Some(k), ModelVerdict::Violated { clause }) => k == *clause,
            _ => false,
        };
        disagreements += usize::from(!agree);
        satisfied += usize::from(expected.is_none());
        // the exhaustive solver agrees with the table on a sample
        if i % 20 == 0 {
            brute_checked += 1;
            let table_sat = (0..1u64 << n).any(|b| truth_table_eval(&clauses, b).is_none());
            let bf = brute_force_solve(&f, 24).map_err(|e| e.to_string())?;
            if bf.is_sat() != table_sat {
                disagreements += 1;
            }
            if let BruteForceResult::Sat(m) = bf {
                disagreements += usize::from(!check_model(&f, &m, ModelMode::Strict).map_err(|e| e.to_string())?.is_satisfied());
            }
        }
    }
    let elapsed = start.elapsed();
    ensure!(disagreements == 0, "{disagreements} disagreements over {PAIRS} pairs");
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!(
        "{PAIRS} pairs ({satisfied} satisfied), {brute_checked} brute-force cross-checks, 0 disagreements in {:.1}s",
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------- criterion 2

fn c2_drat_soundness(_: &Path) -> Verdict {
    const FORMULAS: usize = 1000;
    const ATTEMPTS: usize = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut formulas = Vec::with_capacity(FORMULAS);
    while formulas.len() < FORMULAS {
        let n = rng.gen_range(2..=12);
        let ratio = rng.gen_range(0.5..4.5);
        let k = rng.gen_range(2..=3);
        let f = random_ksat(&mut rng, n, (n as f64 * ratio) as usize, k);
        if brute_force_solve(&f, 24).map_err(|e| e.to_string())?.is_sat() {
            formulas.push(f);
        }
    }
    let mut by_strategy: BTreeMap<String, usize> = BTreeMap::new();
    let mut false_valid = Vec::new();
    for (i, f) in formulas.iter().enumerate() {
        for _ in 0..ATTEMPTS {
            let (s, proof) = fuzz_refutation(&mut rng, f);
            *by_strategy.entry(format!("{s:?}")).or_default() += 1;
            if check_proof(f, &proof).verdict.is_valid() {
                false_valid.push((i, s));
            }
        }
    }
    ensure!(false_valid.is_empty(), "false Valid verdicts: {false_valid:?}");
    ensure!(
        by_strategy.contains_key(&format!("{:?}", FuzzStrategy::StrengthenedProof)) && by_strategy.len() == 6,
        "not every attempt family ran: {by_strategy:?}"
    );
    Ok(format!("{} attempts on {FORMULAS} satisfiable formulas, 0 false Valid {by_strategy:?}", FORMULAS * ATTEMPTS))
}

// ---------------------------------------------------------------- criterion 3

fn c3_reference_proofs(_: &Path) -> Verdict {
    const INSTANCES: usize = 500;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut formulas = Vec::with_capacity(INSTANCES);
    while formulas.len() < INSTANCES {
        let n = rng.gen_range(4..=16);
        let ratio = rng.gen_range(5.0..9.0);
        let f = random_ksat(&mut rng, n, (n as f64 * ratio) as usize, 3);
        if !brute_force_solve(&f, 24).map_err(|e| e.to_string())?.is_sat() {
            formulas.push(f);
        }
    }
    let max_vars = formulas.iter().map(|f| f.num_vars()).max().unwrap_or(0);
    let pool = WorkerPool::new(8);
    let results = pool.map(&formulas, |f| match solve_with_proof(f) {
        ReferenceResult::Unsat(proof) => {
            let check = check_proof(f, &proof);
            (check.verdict.is_valid(), proof.lemmas.len())
        }
        ReferenceResult::Sat(_) => (false, 0),
    });
    let elapsed = start.elapsed();
    let invalid = results.iter().filter(|(ok, _)| !ok).count();
    let lemmas: usize = results.iter().map(|(_, n)| n).sum();
    ensure!(invalid == 0, "{invalid} of {INSTANCES} reference proofs rejected");
    ensure!(max_vars <= 16, "instance with {max_vars} variables");
    ensure!(elapsed < Duration::from_secs(300), "took {elapsed:?}");
    Ok(format!(
        "{INSTANCES}/{INSTANCES} proofs valid ({lemmas} lemmas, <= {max_vars} vars) in {:.1}s",
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------- criterion 4

fn record(name: String, outcome: Outcome, wall_time: f64) -> RunRecord {
    RunRecord {
        instance: name.clone(),
        path: name.into(),
        outcome,
        wall_time,
        peak_mem: None,
        peak_threads: None,
        claim: None,
        proof_path: None,
        detail: None,
    }
}

fn q(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap()
}

fn c4_par2_arithmetic(_: &Path) -> Verdict {
    let p = ScoreParams::new(5000.0);
    let fixture = [record("a".into(), Outcome::SolvedSat, 100.0), record("b".into(), Outcome::Timeout, 5000.0)];
    let s = par2_exact(&fixture, &p).map_err(|e| e.to_string())?;
    ensure!(s == q(5050.0), "fixture scored {s}");

    for (t, n) in [(5000.0, 1), (5000.0, 17), (1.5, 3), (0.1, 7)] {
        let recs: Vec<_> = (0..n).map(|i| record(format!("i{i}"), Outcome::Timeout, t)).collect();
        let s = par2_exact(&recs, &ScoreParams::new(t)).map_err(|e| e.to_string())?;
        ensure!(s == q(t) * BigRational::from_integer(2.into()), "all-timeout at {t}: {s}");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let outcomes = [
        Outcome::SolvedSat,
        Outcome::SolvedUnsat,
        Outcome::Unknown,
        Outcome::Timeout,
        Outcome::Crashed { signal: Some(11), exit_code: None },
        Outcome::MemOut,
        Outcome::Malformed,
    ];
    const SETS: usize = 1000;
    for set in 0..SETS {
        let timeout = rng.gen_range(1.0..5000.0);
        let params = ScoreParams::new(timeout);
        let n = rng.gen_range(1..=60);
        let mut recs = Vec::with_capacity(n);
        let mut truths = Vec::with_capacity(n);
        for i in 0..n {
            let name = format!("s{set}_{i}");
            let outcome = outcomes.choose(&mut rng).unwrap().clone();
            let wall = if outcome == Outcome::Timeout { timeout } else { rng.gen_range(0.0..timeout) };
            truths.push((name.clone(), if rng.gen() { Truth::Sat } else { Truth::Unsat }));
            recs.push(record(name, outcome, wall));
        }
        let vbs = VbsTable::from_truths(truths);
        let c = category_scores(&recs, &vbs, &params).map_err(|e| e.to_string())?;
        let big = |k: usize| BigRational::from_integer(k.into());
        let lhs = &c.overall * big(c.n);
        let rhs = c.sat.clone().unwrap_or_else(BigRational::zero) * big(c.n_sat) + c.unsat.clone().unwrap_or_else(BigRational::zero) * big(c.n_unsat);
        ensure!(lhs == rhs, "set {set}: {lhs} != {rhs}");

        // independent oracle for the claim-only score
        let penalty = q(timeout) * big(2);
        let sum = recs
            .iter()
            .map(|r| if r.outcome.is_solved() { q(r.wall_time) } else { penalty.clone() })
            .fold(BigRational::zero(), |a, b| a + b);
        let got = par2_exact(&recs, &params).map_err(|e| e.to_string())?;
        ensure!(got == sum / big(n), "set {set}: par2_exact disagrees with the oracle");
    }
    Ok(format!("5050.0 fixture exact, all-timeout = 2T exact, identity holds on {SETS} random sets"))
}

// ---------------------------------------------------------------- shared evolution setup

fn limits() -> ResourceLimits {
    ResourceLimits {
        wall_timeout: 5.0,
        mem_limit: None,
        time_resolution: Some(0.5),
    }
}

fn evolution_settings(store: &Path, seed: &Path, gate: &Path, bench: &Path) -> EvolutionSettings {
    let mut s = EvolutionSettings::new(
        store.to_path_buf(),
        seed.to_path_buf(),
        SmokeSuite::load(gate, "gate").unwrap(),
        SmokeSuite::load(bench, "bench").unwrap(),
        limits(),
    );
    s.stage1_timeout = 5.0;
    s.stage2_timeout = 10.0;
    s.build_timeout = Duration::from_secs(120);
    s.parallelism = 8;
    s
}

fn bench_suite(root: &Path) -> PathBuf {
    let dir = root.join("suites/bench");
    if !dir.is_dir() {
        generate_suite(&dir, &demo_bench_spec()).unwrap();
    }
    dir
}

// ---------------------------------------------------------------- criterion 5

fn c5_gate_pruning(root: &Path) -> Verdict {
    let gate = root.join("suites/gate_full");
    generate_suite(&gate, &SuiteSpec::default()).map_err(|e| e.to_string())?;
    let bench = bench_suite(root);
    let seed = root.join("c5/seed");
    write_toy_variant(&seed, "seed", ToyParams::default()).map_err(|e| e.to_string())?;

    let mutants = seeded_mutants();
    let mut steps: Vec<ScriptStep> = mutants
        .iter()
        .map(|m| ScriptStep {
            plan: format!("mutant {}", m.name),
            hypothesis: format!("{:?} bug should be caught by a gate", m.class),
            intent: format!("inject {}", m.name),
            edits: vec![FileEdit {
                path: SOLVER_SOURCE.into(),
                change: EditChange::Replace {
                    find: m.find.into(),
                    replace: m.replace.into(),
                },
            }],
            ..ScriptStep::default()
        })
        .collect();
    // a behavior-neutral control edit must reach the benchmark
    steps.push(ScriptStep {
        plan: "control".into(),
        hypothesis: "a comment changes nothing".into(),
        intent: "control edit".into(),
        edits: vec![FileEdit {
            path: SOLVER_SOURCE.into(),
            change: EditChange::Replace {
                find: "    int result = dpll();".into(),
                replace: "    /* control edit */\n    int result = dpll();".into(),
            },
        }],
        ..ScriptStep::default()
    });
    let mut s = evolution_settings(&root.join("c5/store"), &seed, &gate, &bench);
    s.stage1_timeout = 3.0;
    s.stage2_count = 50;
    let n = steps.len() as u32;
    let out = run_evolution(&s, &ScriptedBackend::new(steps), &LocalExecutor::new(8), n).map_err(|e| format!("seed rejected: {e}"))?;

    let pre_benchmark = ["layout", "compliance", "build", "stage1", "stage2"];
    let mut by_step: BTreeMap<String, usize> = BTreeMap::new();
    let mut false_accepts = Vec::new();
    for (m, r) in mutants.iter().zip(&out.records) {
        let at = r.rejected_at.clone().unwrap_or_default();
        if r.evaluation.is_some() || !pre_benchmark.contains(&at.as_str()) {
            false_accepts.push(format!("{} ({:?} at {at:?}: {:?})", m.name, r.decision, r.rejection));
        }
        *by_step.entry(at).or_default() += 1;
    }
    let classes: std::collections::HashSet<BugClass> = mutants.iter().map(|m| m.class).collect();
    let control = out.records.last().unwrap();
    ensure!(mutants.len() >= 10, "only {} mutants", mutants.len());
    for c in [BugClass::Crash, BugClass::WrongAnswer, BugClass::BadModel, BugClass::BadProof] {
        ensure!(classes.contains(&c), "no {c:?} mutant");
    }
    ensure!(false_accepts.is_empty(), "reached benchmark: {false_accepts:?}");
    ensure!(
        control.evaluation.is_some() && control.gates.iter().all(|g| g.passed),
        "clean control rejected at {:?}: {:?}",
        control.rejected_at,
        control.rejection
    );
    Ok(format!(
        "{}/{} mutants rejected before benchmark {by_step:?}; seed and clean control passed every gate",
        mutants.len(),
        mutants.len()
    ))
}

// ---------------------------------------------------------------- criterion 6

fn demo_run(root: &Path, store: &str) -> Result<(EvolutionOutcome, Duration), String> {
    let bench = bench_suite(root);
    let gate = root.join("suites/gate_demo");
    let seed = root.join("c6/seed");
    if !gate.is_dir() {
        generate_suite(&gate, &demo_gate_spec()).map_err(|e| e.to_string())?;
        write_toy_variant(&seed, "seed", DEMO_SEED).map_err(|e| e.to_string())?;
    }
    let mut s = evolution_settings(&root.join("c6").join(store), &seed, &gate, &bench);
    s.objective = Objective {
        kind: ObjectiveKind::SolvedCount,
        switch_cycle: 6,
        epsilon: 0.0,
    };
    let start = Instant::now();
    let out = run_evolution(&s, &ScriptedBackend::new(demo_script()), &LocalExecutor::new(8), 10).map_err(|e| e.to_string())?;
    Ok((out, start.elapsed()))
}

fn champion_par2_column(csv: &str) -> Result<Vec<f64>, String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().ok_or("empty trajectory")?.split(',').collect();
    let col = header.iter().position(|h| *h == "champion_par2").ok_or("no champion_par2 column")?;
    lines.map(|l| l.split(',').nth(col).and_then(|x| x.parse().ok()).ok_or_else(|| format!("bad row {l}"))).collect()
}

fn c6_scaled_evolution(root: &Path) -> Verdict {
    let (a, elapsed) = demo_run(root, "run_a")?;
    let suite_len = list_instances(&bench_suite(root)).map_err(|e| e.to_string())?.len();
    let csv_a = fs::read(&a.trajectory).map_err(|e| e.to_string())?;
    let par2 = champion_par2_column(&String::from_utf8_lossy(&csv_a))?;
    ensure!(suite_len == 30, "suite has {suite_len} instances");
    ensure!(a.records.len() == 10, "{} cycles recorded", a.records.len());
    ensure!(elapsed < Duration::from_secs(600), "took {elapsed:?}");
    ensure!(par2.len() == 11, "{} trajectory rows", par2.len());
    ensure!(par2.windows(2).all(|w| w[1] <= w[0]), "champion PAR-2 increased: {par2:?}");
    let (b, _) = demo_run(root, "run_b")?;
    let csv_b = fs::read(&b.trajectory).map_err(|e| e.to_string())?;
    ensure!(csv_a == csv_b, "replay trajectory differs");
    let accepted = a.records.iter().filter(|r| r.decision == Decision::Accepted).count();
    Ok(format!(
        "10 cycles on {suite_len} instances at parallelism 8 in {:.1}s, {accepted} accepted, champion PAR-2 {:.3} -> {:.3}, replay byte-identical",
        elapsed.as_secs_f64(),
        par2[0],
        par2[par2.len() - 1]
    ))
}

// ---------------------------------------------------------------- criterion 7

fn c7_rule_closure(root: &Path) -> Verdict {
    let store = root.join("c6/run_a");
    let records: Vec<_> = satevo_core::orchestrator::load_records(&store).map_err(|e| e.to_string())?;
    ensure!(records.len() >= 6, "demo run missing");
    let (crash, next) = (&records[4], &records[5]);
    ensure!(crash.decision == Decision::RejectedGate, "cycle 5 was {:?}", crash.decision);
    let crash_line = crash.added_lines.first().ok_or("cycle 5 added nothing")?.trim().to_string();
    let rule04 = |r: &satevo_core::orchestrator::CycleRecord| {
        r.rule_versions.iter().find(|(k, _)| k.starts_with("04_")).map(|(_, v)| *v).unwrap_or(0)
    };
    // versions are recorded at compliance time, before that cycle's evolution
    ensure!(rule04(next) > rule04(crash), "Rule 04 not evolved after the crash");
    ensure!(next.decision == Decision::RejectedCompliance, "cycle 6 was {:?}", next.decision);
    let flagged = next.compliance.as_ref().is_some_and(|c| {
        c.findings
            .iter()
            .any(|f| matches!(f, Finding::ForbiddenPattern { pattern, .. } if crash_line.contains(pattern.as_str()) || pattern.contains(&crash_line)))
    });
    ensure!(flagged, "cycle 6 compliance did not flag {crash_line:?}");

    // the finding comes from evolution: seed rules stay silent on the same source
    let probe = write_toy_variant(&root.join("c7/probe"), "probe", DEMO_SEED).map_err(|e| e.to_string())?;
    let src = probe.root.join(SOLVER_SOURCE);
    let text = fs::read_to_string(&src).map_err(|e| e.to_string())?;
    fs::write(&src, text.replacen("    int result = dpll();", &format!("    {crash_line}\n    int result = dpll();"), 1)).map_err(|e| e.to_string())?;
    let live = load_rules(&store.join("rules")).map_err(|e| e.to_string())?;
    let forbidden = |rules: &RuleSet| compliance_check(&probe, rules).findings.iter().filter(|f| matches!(f, Finding::ForbiddenPattern { .. })).count();
    ensure!(forbidden(&live) > 0 && forbidden(&RuleSet::seed()) == 0, "closure not attributable to the evolved rule");
    ensure!(live.file(FORBIDDEN_RULE).forbidden.len() > RuleSet::seed().file(FORBIDDEN_RULE).forbidden.len(), "Rule 04 gained no pattern");

    // restore the first snapshot and replay the patch log
    let snaps = SnapshotStore::for_rules(&store.join("rules"));
    let log = snaps.patch_log().map_err(|e| e.to_string())?;
    let first = &log.first().ok_or("empty patch log")?.base;
    ensure!(snaps.restore(first).map_err(|e| e.to_string())? == RuleSet::seed(), "first snapshot is not the seed rule set");
    let replayed = snaps.replay_from(first).map_err(|e| e.to_string())?;
    let out = root.join("c7/replayed");
    replayed.write(&out).map_err(|e| e.to_string())?;
    for f in &live.files {
        let a = fs::read(store.join("rules").join(&f.name)).map_err(|e| e.to_string())?;
        let b = fs::read(out.join(&f.name)).map_err(|e| e.to_string())?;
        ensure!(a == b, "{} differs after replay", f.name);
    }
    Ok(format!(
        "crash line {crash_line:?} flagged on re-injection, {} patches replayed byte-for-byte from {first}",
        log.len()
    ))
}

// ---------------------------------------------------------------- criterion 8

fn stub(dir: &Path, name: &str, body: &str) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    let p = dir.join(name);
    fs::write(&p, format!("#!/bin/sh\n{body}\n")).unwrap();
    fs::set_permissions(&p, fs::Permissions::from_mode(0o755)).unwrap();
    p
}

fn multiset(records: &[RunRecord]) -> BTreeMap<(String, Outcome), usize> {
    let mut m = BTreeMap::new();
    for r in records {
        *m.entry((r.instance.clone(), r.outcome.clone())).or_default() += 1;
    }
    m
}

fn c8_runner_discipline(root: &Path) -> Verdict {
    let dir = root.join("c8");
    let suite = list_instances(&bench_suite(root)).map_err(|e| e.to_string())?;

    // timeout overshoot, with a background child holding the pipes open
    let sleeper = stub(&dir, "sleep.sh", "sleep 30 &\nsleep 30");
    let mut worst = 0.0f64;
    for t in [0.5, 1.0, 2.0] {
        let job = Job {
            run_script: sleeper.clone(),
            instance: suite[0].clone(),
            scratch: dir.join(format!("sleep_{t}")),
            emit_proof: false,
        };
        let start = Instant::now();
        let r = run_instance(&job, &ResourceLimits::with_timeout(t)).map_err(|e| e.to_string())?;
        let overshoot = start.elapsed().as_secs_f64() - t;
        ensure!(r.outcome == Outcome::Timeout, "sleep stub ended as {:?}", r.outcome);
        worst = worst.max(overshoot);
    }
    ensure!(worst <= 1.0, "overshoot {worst:.3}s");

    // same outcome multiset at parallelism 1 and 8
    let toy = write_toy_variant(&dir.join("toy"), "toy", DEMO_SEED).map_err(|e| e.to_string())?;
    let b = build_variant(&toy, Duration::from_secs(120), &dir.join("toy/.build")).map_err(|e| e.to_string())?;
    ensure!(b.success, "toy build failed: {}", b.diagnostics);
    let sweep = |target: &SolverVariant, p: usize, tag: &str| {
        let t = SweepTarget {
            label: format!("{}_{tag}", target.id),
            run_script: target.run_script(),
        };
        let opts = SweepOptions {
            limits: ResourceLimits::with_timeout(10.0),
            scratch_root: dir.join("scratch"),
            emit_proof: false,
        };
        run_benchmark(&t, &suite, &opts, &LocalExecutor::new(p), None)
    };
    let p1 = sweep(&toy, 1, "p1");
    let p8 = sweep(&toy, 8, "p8");
    ensure!(multiset(&p1) == multiset(&p8), "parallelism changed outcomes");

    // one record per instance whatever the stub does
    let mut counts = vec![p1.len(), p8.len()];
    let stubs = [
        ("segv.sh", "kill -SEGV $$"),
        ("exit.sh", "exit 3"),
        ("garbage.sh", "echo 's MAYBE'\nexit 10"),
        ("abort.sh", "kill -ABRT $$"),
    ];
    for (name, body) in stubs {
        let script = stub(&dir, name, body);
        let v = SolverVariant::new(name.trim_end_matches(".sh"), &dir);
        let t = SweepTarget {
            label: v.id.clone(),
            run_script: script,
        };
        let opts = SweepOptions {
            limits: ResourceLimits::with_timeout(5.0),
            scratch_root: dir.join("scratch"),
            emit_proof: false,
        };
        let recs = run_benchmark(&t, &suite, &opts, &LocalExecutor::new(8), None);
        ensure!(recs.iter().all(|r| !r.outcome.is_solved()), "{name} produced a solve");
        counts.push(recs.len());
    }
    let missing = SweepTarget {
        label: "missing".into(),
        run_script: dir.join("does_not_exist.sh"),
    };
    let opts = SweepOptions {
        limits: ResourceLimits::with_timeout(5.0),
        scratch_root: dir.join("scratch"),
        emit_proof: false,
    };
    let recs = run_benchmark(&missing, &suite, &opts, &LocalExecutor::new(8), None);
    ensure!(recs.iter().all(|r| r.outcome == Outcome::Malformed), "unspawnable script not Malformed");
    counts.push(recs.len());
    ensure!(counts.iter().all(|&c| c == suite.len()), "record counts {counts:?} vs suite {}", suite.len());
    Ok(format!(
        "worst overshoot {:.3}s, p1 == p8 over {} instances, |records| = |suite| on {} sweeps",
        worst,
        suite.len(),
        counts.len()
    ))
}

// ---------------------------------------------------------------- driver

fn main() {
    let root = tempfile::tempdir().expect("scratch directory");
    let criteria: [Criterion; 8] = [
        ("model-check oracle equivalence", c1_model_check_oracle),
        ("DRAT soundness", c2_drat_soundness),
        ("DRAT completeness on reference proofs", c3_reference_proofs),
        ("PAR-2 arithmetic", c4_par2_arithmetic),
        ("gate pruning", c5_gate_pruning),
        ("end-to-end scaled evolution", c6_scaled_evolution),
        ("rule evolution closure", c7_rule_closure),
        ("runner discipline", c8_runner_discipline),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(|| run(root.path()))).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("acceptance {}: PASS {name} ({secs:.1}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("acceptance {}: FAIL {name} ({secs:.1}s): {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
