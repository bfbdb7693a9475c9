//! The bundled toy DPLL solver and a corpus of deliberately broken mutants
//! used to exercise the gates.

use std::fs;
use std::os::unix::fs::PermissionsExt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::generate::SuiteSpec;
use crate::orchestrator::{EditChange, FileEdit, ScriptStep};
use crate::workspace::{SolverVariant, WorkspaceError, BUILD_SCRIPT, RUN_SCRIPT};

pub const SOLVER_SOURCE: &str = "src/solver.c";

const FILES: [(&str, &str, bool); 6] = [
    (SOLVER_SOURCE, include_str!("../fixtures/toy_solver/src/solver.c"), false),
    (BUILD_SCRIPT, include_str!("../fixtures/toy_solver/starexec_build"), true),
    (RUN_SCRIPT, include_str!("../fixtures/toy_solver/bin/starexec_run_default"), true),
    ("CHANGELOG.md", include_str!("../fixtures/toy_solver/CHANGELOG.md"), false),
    ("HYPOTHESIS.md", include_str!("../fixtures/toy_solver/HYPOTHESIS.md"), false),
    ("RESULTS.md", include_str!("../fixtures/toy_solver/RESULTS.md"), false),
];

const BUDGET_LINE: &str = "#define DECISION_BUDGET 1000000L";
const HEURISTIC_LINE: &str = "#define BRANCH_HEURISTIC 0";

/// Tunables of the toy solver that scripted agents flip.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ToyParams {
    pub decision_budget: u64,
    /// 0 = lowest index first, 1 = most occurrences first
    pub branch_heuristic: u8,
}

impl Default for ToyParams {
    fn default() -> Self {
        ToyParams {
            decision_budget: 1_000_000,
            branch_heuristic: 0,
        }
    }
}

pub fn budget_line(budget: u64) -> String {
    format!("#define DECISION_BUDGET {budget}L")
}

pub fn heuristic_line(h: u8) -> String {
    format!("#define BRANCH_HEURISTIC {h}")
}

pub fn toy_source(params: ToyParams) -> String {
    FILES[0]
        .1
        .replace(BUDGET_LINE, &budget_line(params.decision_budget))
        .replace(HEURISTIC_LINE, &heuristic_line(params.branch_heuristic))
}

/// Writes an unbuilt toy-solver variant into `dir`.
pub fn write_toy_variant(dir: &Path, id: &str, params: ToyParams) -> Result<SolverVariant, WorkspaceError> {
    for sub in ["bin", "src", "build"] {
        fs::create_dir_all(dir.join(sub))?;
    }
    for (rel, content, exec) in FILES {
        let path = dir.join(rel);
        if rel == SOLVER_SOURCE {
            fs::write(&path, toy_source(params))?;
        } else {
            fs::write(&path, content)?;
        }
        if exec {
            fs::set_permissions(&path, fs::Permissions::from_mode(0o755))?;
        }
    }
    Ok(SolverVariant::new(id, dir))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BugClass {
    Crash,
    WrongAnswer,
    BadModel,
    BadProof,
    Hang,
    Build,
}

/// A source-level bug: `find` must occur exactly once in the solver source.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mutant {
    pub name: &'static str,
    pub class: BugClass,
    pub find: &'static str,
    pub replace: &'static str,
}

#[derive(Debug, thiserror::Error)]
pub enum MutantError {
    #[error("mutant {name}: anchor occurs {count} times")]
    Anchor { name: &'static str, count: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Mutant {
    pub fn apply_to(&self, source: &str) -> Result<String, MutantError> {
        let count = source.matches(self.find).count();
        if count != 1 {
            return Err(MutantError::Anchor { name: self.name, count });
        }
        Ok(source.replacen(self.find, self.replace, 1))
    }

    pub fn apply(&self, variant: &SolverVariant) -> Result<(), MutantError> {
        let path = variant.root.join(SOLVER_SOURCE);
        let patched = self.apply_to(&fs::read_to_string(&path)?)?;
        fs::write(path, patched)?;
        Ok(())
    }
}

pub fn seeded_mutants() -> Vec<Mutant> {
    vec![
        Mutant {
            name: "always_sat",
            class: BugClass::WrongAnswer,
            find: "    if (result == RESULT_SAT) {",
            replace: "    if (1) {",
        },
        Mutant {
            name: "always_unsat",
            class: BugClass::WrongAnswer,
            find: "    int result = dpll();",
            replace: "    int result = dpll();\n    if (result == RESULT_SAT)\n        result = RESULT_UNSAT;",
        },
        Mutant {
            name: "null_deref",
            class: BugClass::Crash,
            find: "    int result = dpll();",
            replace: "    *(volatile int *)0 = 0;\n    int result = dpll();",
        },
        Mutant {
            name: "partial_segfault",
            class: BugClass::Crash,
            find: "    int result = dpll();",
            replace: "    if (num_vars > 10)\n        *(volatile int *)0 = num_vars;\n    int result = dpll();",
        },
        Mutant {
            name: "abort_on_unsat",
            class: BugClass::Crash,
            find: "        printf(\"s UNSATISFIABLE\\n\");",
            replace: "        abort();",
        },
        Mutant {
            name: "flipped_model",
            class: BugClass::BadModel,
            find: "        printf(\" %d\", val[v] > 0 ? v : -v);",
            replace: "        printf(\" %d\", val[v] > 0 ? -v : v);",
        },
        Mutant {
            name: "unterminated_model",
            class: BugClass::BadModel,
            find: "    printf(\" 0\\n\");",
            replace: "    printf(\"\\n\");",
        },
        Mutant {
            name: "dropped_last_clause",
            class: BugClass::WrongAnswer,
            find: "    num_vars = declared_vars;",
            replace: "    if (num_clauses > 0)\n        num_clauses--;\n    num_vars = declared_vars;",
        },
        Mutant {
            name: "missing_proof",
            class: BugClass::BadProof,
            find: "        proof = fopen(argv[2], \"w\");",
            replace: "        proof = NULL;",
        },
        Mutant {
            name: "truncated_proof",
            class: BugClass::BadProof,
            find: "    if (!proof)\n        return;",
            replace: "    static long lemma_count;\n    if (!proof || ++lemma_count > 1)\n        return;",
        },
        Mutant {
            name: "garbage_lemmas",
            class: BugClass::BadProof,
            find: "        if (!proof)\n            die(\"cannot open proof file\");",
            replace: "        if (!proof)\n            die(\"cannot open proof file\");\n        fprintf(proof, \"1 0\\n-1 0\\n\");",
        },
        Mutant {
            name: "exit_code_mismatch",
            class: BugClass::WrongAnswer,
            find: "        return 20;",
            replace: "        return 10;",
        },
        Mutant {
            name: "hang_on_large",
            class: BugClass::Hang,
            find: "    int result = dpll();",
            replace: "    while (num_vars > 12)\n        fflush(stdout);\n    int result = dpll();",
        },
        Mutant {
            name: "syntax_error",
            class: BugClass::Build,
            find: "static int lit_value(int lit)",
            replace: "static int lit_value(int lit) oops",
        },
    ]
}

/// Benchmark suite of the scripted scenario: 19 random instances of 10 to 22
/// variables plus the 11 crafted ones.
pub fn demo_bench_spec() -> SuiteSpec {
    SuiteSpec {
        random: 19,
        include_crafted: true,
        min_vars: 10,
        max_vars: 22,
        ..SuiteSpec::default()
    }
}

/// Gate suite of the scripted scenario: 30 small random instances plus the
/// crafted ones.
pub fn demo_gate_spec() -> SuiteSpec {
    SuiteSpec {
        random: 30,
        seed: 7,
        ..SuiteSpec::default()
    }
}

/// Seed of the scripted scenario: a budget low enough that most of the
/// benchmark ends in `s UNKNOWN`.
pub const DEMO_SEED: ToyParams = ToyParams {
    decision_budget: 4,
    branch_heuristic: 0,
};

fn replace(find: impl Into<String>, with: impl Into<String>) -> FileEdit {
    FileEdit {
        path: SOLVER_SOURCE.into(),
        change: EditChange::Replace {
            find: find.into(),
            replace: with.into(),
        },
    }
}

fn step(plan: &str, hypothesis: &str, edits: Vec<FileEdit>) -> ScriptStep {
    ScriptStep {
        plan: plan.into(),
        tasks: Vec::new(),
        hypothesis: hypothesis.into(),
        intent: plan.into(),
        edits,
        fault: None,
    }
}

/// Ten scripted cycles over [`DEMO_SEED`] with known decisions: accepted
/// (1, 3, 8), gate rejections (2, 5), regression (4), compliance rejection
/// after rule evolution (6), no-op (7), edit outside the workspace (9) and
/// a tie (10).
pub fn demo_script() -> Vec<ScriptStep> {
    let crash = "    *(volatile int *)0 = 0;\n";
    vec![
        step(
            "branch on the most frequent variable",
            "occurrence counts pick variables that close more clauses per decision",
            vec![replace(heuristic_line(0), heuristic_line(1))],
        ),
        step(
            "report satisfiable whenever search stops",
            "printing a model early saves time on satisfiable instances",
            vec![replace("    if (result == RESULT_SAT) {", "    if (1) {")],
        ),
        step(
            "quadruple the decision budget",
            "more instances finish before the budget runs out",
            vec![replace(budget_line(4), budget_line(16))],
        ),
        step(
            "halve the decision budget",
            "a tighter budget gives up sooner on hopeless instances",
            vec![replace(budget_line(16), budget_line(8))],
        ),
        step(
            "touch the zero page before search",
            "prefaulting memory speeds up the first propagation",
            vec![replace("    int result = dpll();", format!("{crash}    int result = dpll();"))],
        ),
        step(
            "prefault only on large inputs",
            "the crash came from small inputs, so restrict the prefault",
            vec![replace(
                "    int result = dpll();",
                format!("    if (num_vars > 100000)\n    {crash}    int result = dpll();"),
            )],
        ),
        step("keep the solver as is", "no change is needed", Vec::new()),
        step(
            "raise the budget again",
            "the remaining unknowns need up to 64 decisions",
            vec![replace(budget_line(16), budget_line(64))],
        ),
        step(
            "edit the harness configuration",
            "a longer timeout would help",
            vec![FileEdit {
                path: "../../harness.toml".into(),
                change: EditChange::Content {
                    content: "timeout = 1e9\n".into(),
                },
            }],
        ),
        step(
            "document the budget",
            "a comment does not change the binary, so the score must tie",
            vec![replace(budget_line(64), format!("{}\n/* budget tuned by evolution */", budget_line(64)))],
        ),
    ]
}
