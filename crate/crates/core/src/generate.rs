//! Instance generators for smoke, validation and benchmark suites.
//!
//! Ground truth always comes from exhaustive search, so generated suites are
//! limited to the brute-force variable cap.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::formula::{brute_force_solve, clause, serialize_dimacs, BruteForceError, Clause, CnfFormula, Lit};
use crate::metrics::Truth;

/// Uniform random k-SAT with distinct variables per clause.
pub fn random_ksat<R: Rng>(rng: &mut R, num_vars: u32, num_clauses: usize, k: usize) -> CnfFormula {
    let k = k.min(num_vars as usize);
    let vars: Vec<u32> = (1..=num_vars).collect();
    let clauses: Vec<Clause> = (0..num_clauses)
        .map(|_| {
            vars.choose_multiple(rng, k)
                .map(|&v| Lit::from_var(v, rng.gen()))
                .collect()
        })
        .collect();
    CnfFormula::new(num_vars, clauses, "random").expect("variables drawn in range")
}

/// Pigeonhole principle: `holes + 1` pigeons into `holes` holes (unsatisfiable).
pub fn pigeonhole(holes: u32) -> CnfFormula {
    let pigeons = holes + 1;
    let var = |p: u32, h: u32| (p * holes + h + 1) as i32;
    let mut clauses = Vec::new();
    for p in 0..pigeons {
        clauses.push((0..holes).map(|h| var(p, h)).collect::<Vec<i32>>());
    }
    for h in 0..holes {
        for p in 0..pigeons {
            for q in p + 1..pigeons {
                clauses.push(vec![-var(p, h), -var(q, h)]);
            }
        }
    }
    CnfFormula::new(pigeons * holes, clauses.iter().map(|c| clause(c)).collect(), "pigeonhole").unwrap()
}

/// Small hand-shaped instances exercising unit propagation, pure literals,
/// contradictions and empty inputs.
pub fn crafted_instances() -> Vec<(String, CnfFormula)> {
    let unit_chain: Vec<Vec<i32>> = std::iter::once(vec![1])
        .chain((1..12).map(|i| vec![-i, i + 1]))
        .collect();
    let mut unit_chain_unsat = unit_chain.clone();
    unit_chain_unsat.push(vec![-12]);
    let refs = |v: &Vec<Vec<i32>>| -> CnfFormula {
        let n = v.iter().flatten().map(|l| l.unsigned_abs()).max().unwrap_or(0);
        CnfFormula::new(n, v.iter().map(|c| clause(c)).collect(), "crafted").unwrap()
    };
    vec![
        ("empty_formula".into(), CnfFormula::new(0, vec![], "crafted").unwrap()),
        ("empty_clause".into(), CnfFormula::new(1, vec![vec![]], "crafted").unwrap()),
        ("single_unit".into(), CnfFormula::from_ints(&[&[1]])),
        ("contradiction".into(), CnfFormula::from_ints(&[&[1], &[-1]])),
        ("unit_chain_sat".into(), refs(&unit_chain)),
        ("unit_chain_unsat".into(), refs(&unit_chain_unsat)),
        (
            "pure_literal".into(),
            CnfFormula::from_ints(&[&[1, 2], &[1, -3], &[1, 3, -2], &[2, 3]]),
        ),
        (
            "two_var_full".into(),
            CnfFormula::from_ints(&[&[1, 2], &[-1, 2], &[1, -2], &[-1, -2]]),
        ),
        (
            "tautology_only".into(),
            CnfFormula::from_ints(&[&[1, -1], &[2, -2, 3]]),
        ),
        ("pigeonhole_3".into(), pigeonhole(3)),
        ("pigeonhole_4".into(), pigeonhole(4)),
    ]
}

#[derive(Clone, Debug)]
pub struct SuiteSpec {
    /// Random instances to add on top of the crafted ones.
    pub random: usize,
    pub include_crafted: bool,
    pub min_vars: u32,
    pub max_vars: u32,
    /// clause/variable ratio; 4.26 is the 3-SAT phase transition
    pub ratio: f64,
    pub seed: u64,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        SuiteSpec {
            random: 104,
            include_crafted: true,
            min_vars: 5,
            max_vars: 16,
            ratio: 4.26,
            seed: 2024,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GenerateError {
    #[error(transparent)]
    Oracle(#[from] BruteForceError),
    #[error("writing suite: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug)]
pub struct GeneratedInstance {
    pub name: String,
    pub formula: CnfFormula,
    pub truth: Truth,
}

/// Builds the instance list with exhaustive-search ground truth.
pub fn generate_instances(spec: &SuiteSpec) -> Result<Vec<GeneratedInstance>, GenerateError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::new();
    if spec.include_crafted {
        for (name, f) in crafted_instances() {
            out.push((name, f));
        }
    }
    for i in 0..spec.random {
        let n = rng.gen_range(spec.min_vars..=spec.max_vars.max(spec.min_vars));
        let m = ((n as f64) * spec.ratio).round().max(1.0) as usize;
        out.push((format!("rand_{i:04}_v{n}"), random_ksat(&mut rng, n, m, 3)));
    }
    out.into_iter()
        .map(|(name, formula)| {
            let truth = if brute_force_solve(&formula, crate::formula::DEFAULT_VAR_CAP)?.is_sat() {
                Truth::Sat
            } else {
                Truth::Unsat
            };
            Ok(GeneratedInstance {
                formula: formula.with_origin(name.clone()),
                name,
                truth,
            })
        })
        .collect()
}

/// Writes `<name>.cnf` files plus a `truth.txt` table into `dir`.
pub fn write_suite(dir: &Path, instances: &[GeneratedInstance]) -> Result<Vec<PathBuf>, GenerateError> {
    fs::create_dir_all(dir)?;
    let mut table = String::new();
    let mut paths = Vec::new();
    for inst in instances {
        let file = format!("{}.cnf", inst.name);
        let path = dir.join(&file);
        let mut text = format!("c generated instance {}\n", inst.name);
        text.push_str(&serialize_dimacs(&inst.formula));
        fs::write(&path, text)?;
        writeln!(table, "{file} {}", inst.truth).unwrap();
        paths.push(path);
    }
    fs::write(dir.join(crate::gate::TRUTH_FILE), table)?;
    Ok(paths)
}

pub fn generate_suite(dir: &Path, spec: &SuiteSpec) -> Result<Vec<PathBuf>, GenerateError> {
    write_suite(dir, &generate_instances(spec)?)
}
