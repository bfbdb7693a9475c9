use std::fs;
use std::path::Path;
use std::time::Duration;

use satevo_core::fixture::{demo_bench_spec, demo_gate_spec, demo_script, seeded_mutants, write_toy_variant, DEMO_SEED};
use satevo_core::gate::SmokeSuite;
use satevo_core::generate::generate_suite;
use satevo_core::orchestrator::{
    audit::read_events, check_audit, run_evolution, Decision, EvolutionSettings, Objective, ObjectiveKind, OrchestratorError,
    ScriptStep, ScriptedBackend, ScriptedFault, Step, PAUSE_FILE,
};
use satevo_core::rules::{load_rules, FORBIDDEN_RULE};
use satevo_core::runner::{LocalExecutor, ResourceLimits};

fn settings(root: &Path, store: &str) -> EvolutionSettings {
    let suites = root.join("suites");
    if !suites.join("bench").is_dir() {
        generate_suite(&suites.join("bench"), &demo_bench_spec()).unwrap();
        generate_suite(&suites.join("gate"), &demo_gate_spec()).unwrap();
        write_toy_variant(&root.join("seed"), "seed", DEMO_SEED).unwrap();
    }
    let limits = ResourceLimits {
        wall_timeout: 5.0,
        mem_limit: None,
        time_resolution: Some(0.5),
    };
    let mut s = EvolutionSettings::new(
        root.join(store),
        root.join("seed"),
        SmokeSuite::load(&suites.join("gate"), "gate").unwrap(),
        SmokeSuite::load(&suites.join("bench"), "bench").unwrap(),
        limits,
    );
    s.stage1_timeout = 5.0;
    s.stage2_timeout = 10.0;
    s.build_timeout = Duration::from_secs(120);
    s.objective = Objective {
        kind: ObjectiveKind::SolvedCount,
        switch_cycle: 6,
        epsilon: 0.0,
    };
    s.parallelism = 4;
    s
}

#[test]
fn scripted_run_reaches_known_decisions() {
    use Decision::*;
    let d = tempfile::tempdir().unwrap();
    let s = settings(d.path(), "store");
    let out = run_evolution(&s, &ScriptedBackend::new(demo_script()), &LocalExecutor::new(4), 10).unwrap();
    let decisions: Vec<_> = out.records.iter().map(|r| r.decision).collect();
    assert_eq!(
        decisions,
        [
            Accepted,
            RejectedGate,
            Accepted,
            RejectedRegression,
            RejectedGate,
            RejectedCompliance,
            RejectedNoOp,
            Accepted,
            Failed,
            RejectedRegression
        ],
        "{:#?}",
        out.records.iter().map(|r| (&r.rejected_at, &r.rejection)).collect::<Vec<_>>()
    );
    assert_eq!(out.records[1].rejected_at.as_deref(), Some("stage1"));
    assert_eq!(out.records[4].rejected_at.as_deref(), Some("stage1"));
    assert_eq!(out.champion, "variant_8");
    assert_eq!(out.champion_report.solved, 30);
    assert!(!out.exhausted && !out.paused);

    // champion PAR-2 never increases
    let par2: Vec<f64> = out.records.iter().map(|r| r.champion_par2).collect();
    assert!(par2.windows(2).all(|w| w[1] <= w[0]), "{par2:?}");
    assert!(par2[0] <= out.seed_report.par2);

    // the crash of cycle 5 became a Rule-04 entry that caught cycle 6
    let rules = load_rules(&s.store.join("rules")).unwrap();
    assert!(rules.file(FORBIDDEN_RULE).version > 1);
    assert!(out.records[5]
        .compliance
        .as_ref()
        .unwrap()
        .findings
        .iter()
        .any(|f| f.to_string().contains("volatile")));
    assert!(out.records[5].rule_versions[rules.file(FORBIDDEN_RULE).name.as_str()] > 1);

    // no variant reached the benchmark without passing both gates
    let events = read_events(&s.store.join("audit.jsonl")).unwrap();
    check_audit(&events).unwrap();
    for r in out.records.iter().filter(|r| r.decision != Accepted && r.decision != RejectedRegression) {
        assert!(!events.iter().any(|e| e.variant == r.variant && e.step == Step::Benchmark), "{}", r.variant);
        assert!(r.evaluation.is_none());
    }
    for k in 0..=10 {
        assert!(s.store.join(format!("cycle_{k}")).is_dir());
    }
    assert!(s.store.join("cycle_3/cycle.json").is_file());
    assert!(fs::read_to_string(s.store.join("cycle_2/feedback.md")).unwrap().contains("WrongAnswer"));
    assert_eq!(fs::read_to_string(&out.trajectory).unwrap().lines().count(), 12);
}

#[test]
fn zero_cycles_keep_the_seed() {
    let d = tempfile::tempdir().unwrap();
    let s = settings(d.path(), "store");
    let out = run_evolution(&s, &ScriptedBackend::new(demo_script()), &LocalExecutor::new(2), 0).unwrap();
    assert!(out.records.is_empty());
    assert_eq!(out.champion, "variant_0");
    assert_eq!(out.champion_report, out.seed_report);
}

#[test]
fn broken_seed_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    let mut s = settings(d.path(), "store");
    let bad = d.path().join("bad_seed");
    let v = write_toy_variant(&bad, "bad", DEMO_SEED).unwrap();
    seeded_mutants().iter().find(|m| m.name == "null_deref").unwrap().apply(&v).unwrap();
    s.seed = bad;
    let err = run_evolution(&s, &ScriptedBackend::new(demo_script()), &LocalExecutor::new(2), 3).unwrap_err();
    assert!(matches!(err, OrchestratorError::SeedRejected { ref step, .. } if step == "stage1"), "{err}");
}

#[test]
fn pause_resume_and_exhaustion_match_an_uninterrupted_run() {
    let d = tempfile::tempdir().unwrap();
    let script: Vec<ScriptStep> = demo_script().into_iter().take(3).collect();
    let backend = ScriptedBackend::new(script);
    let exec = LocalExecutor::new(4);

    let full = settings(d.path(), "full");
    let straight = run_evolution(&full, &backend, &exec, 5).unwrap();
    assert_eq!(straight.records.len(), 3);
    assert!(straight.exhausted);

    let split = settings(d.path(), "split");
    let first = run_evolution(&split, &backend, &exec, 1).unwrap();
    assert_eq!(first.records.len(), 1);
    fs::write(split.store.join(PAUSE_FILE), "").unwrap();
    let paused = run_evolution(&split, &backend, &exec, 5).unwrap();
    assert!(paused.paused);
    assert_eq!(paused.records.len(), 1);
    fs::remove_file(split.store.join(PAUSE_FILE)).unwrap();
    let resumed = run_evolution(&split, &backend, &exec, 5).unwrap();
    assert_eq!(resumed.records, straight.records);
    assert_eq!(
        fs::read(&resumed.trajectory).unwrap(),
        fs::read(&straight.trajectory).unwrap()
    );
}

#[test]
fn backend_fault_leaves_the_champion() {
    let d = tempfile::tempdir().unwrap();
    let s = settings(d.path(), "store");
    let mut script = demo_script();
    script[0].fault = Some(ScriptedFault::Timeout);
    let out = run_evolution(&s, &ScriptedBackend::new(script), &LocalExecutor::new(2), 1).unwrap();
    assert_eq!(out.records[0].decision, Decision::Failed);
    assert_eq!(out.records[0].rejected_at.as_deref(), Some("plan"));
    assert_eq!(out.champion, "variant_0");
}
