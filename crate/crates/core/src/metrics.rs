//! Feedback metrics over a sweep: PAR-2 (overall and per ground-truth
//! category), solved-within-threshold counts, virtual-best-solver agreement
//! and memory statistics.
//!
//! PAR-2 is accumulated in exact rational arithmetic and only converted to
//! `f64` at the end, so the overall score decomposes exactly into the SAT and
//! UNSAT partition scores.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use num::{BigRational, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::runner::{Outcome, ResourceLimits, RunRecord};

/// Cumulative solved-by thresholds in seconds.
pub const THRESHOLDS: [u32; 6] = [300, 600, 1000, 2000, 3000, 4500];
pub const DEFAULT_PAR_FACTOR: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Truth {
    Sat,
    Unsat,
}

impl fmt::Display for Truth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Truth::Sat => "SAT",
            Truth::Unsat => "UNSAT",
        })
    }
}

impl FromStr for Truth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "SAT" | "SATISFIABLE" => Ok(Truth::Sat),
            "UNSAT" | "UNSATISFIABLE" => Ok(Truth::Unsat),
            other => Err(format!("unknown truth value {other:?}")),
        }
    }
}

impl Truth {
    /// The answer a solved outcome claims, if any.
    pub fn claimed_by(outcome: &Outcome) -> Option<Truth> {
        match outcome {
            Outcome::SolvedSat => Some(Truth::Sat),
            Outcome::SolvedUnsat => Some(Truth::Unsat),
            _ => None,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("empty record set")]
    EmptyRecordSet,
    #[error("instance {0} has no ground-truth entry")]
    MissingVbsEntry(String),
    #[error("ground-truth table line {line}: {detail}")]
    MalformedVbs { line: usize, detail: String },
    #[error("timeout and penalty factor must be positive and finite")]
    InvalidParameters,
    #[error("reading ground-truth table: {0}")]
    Io(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VbsEntry {
    pub truth: Truth,
    /// Best known time in seconds among baselines.
    pub best_time: Option<f64>,
    pub solved_by_any: bool,
}

/// Ground truth plus the virtual best solver's record per instance.
///
/// Text form: `<instance> <SAT|UNSAT> [<best_time>|-]`, one per line. A
/// missing third column means some baseline solved it with unknown time;
/// `-` means no baseline solved it. Lines starting with `#` are comments.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VbsTable {
    pub entries: BTreeMap<String, VbsEntry>,
}

impl VbsTable {
    pub fn parse(text: &str) -> Result<Self, MetricsError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |detail: String| MetricsError::MalformedVbs { line: i + 1, detail };
            let cols: Vec<&str> = line.split_whitespace().collect();
            if !(2..=3).contains(&cols.len()) {
                return Err(err(format!("expected 2 or 3 columns, found {}", cols.len())));
            }
            let truth = cols[1].parse::<Truth>().map_err(err)?;
            let (best_time, solved_by_any) = match cols.get(2) {
                None => (None, true),
                Some(&"-") => (None, false),
                Some(t) => {
                    let t: f64 = t.parse().map_err(|_| err(format!("bad time {t:?}")))?;
                    if !(t.is_finite() && t >= 0.0) {
                        return Err(err(format!("bad time {t}")));
                    }
                    (Some(t), true)
                }
            };
            entries.insert(
                cols[0].to_string(),
                VbsEntry {
                    truth,
                    best_time,
                    solved_by_any,
                },
            );
        }
        Ok(VbsTable { entries })
    }

    pub fn load(path: &Path) -> Result<Self, MetricsError> {
        let text = std::fs::read_to_string(path).map_err(|e| MetricsError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn from_truths<I: IntoIterator<Item = (String, Truth)>>(items: I) -> Self {
        VbsTable {
            entries: items
                .into_iter()
                .map(|(name, truth)| {
                    (
                        name,
                        VbsEntry {
                            truth,
                            best_time: None,
                            solved_by_any: true,
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn get(&self, instance: &str) -> Option<&VbsEntry> {
        self.entries.get(instance)
    }

    pub fn truth(&self, instance: &str) -> Option<Truth> {
        self.get(instance).map(|e| e.truth)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, e) in &self.entries {
            match (e.best_time, e.solved_by_any) {
                (Some(t), _) => writeln!(out, "{name} {} {t}", e.truth),
                (None, true) => writeln!(out, "{name} {}", e.truth),
                (None, false) => writeln!(out, "{name} {} -", e.truth),
            }
            .unwrap();
        }
        out
    }
}

/// Timeout and penalty factor for PAR-k scoring.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreParams {
    pub timeout: f64,
    pub factor: f64,
}

impl ScoreParams {
    pub fn new(timeout: f64) -> Self {
        ScoreParams {
            timeout,
            factor: DEFAULT_PAR_FACTOR,
        }
    }

    pub fn with_factor(self, factor: f64) -> Self {
        ScoreParams { factor, ..self }
    }

    fn penalty(&self) -> Result<BigRational, MetricsError> {
        if !(self.timeout.is_finite() && self.timeout > 0.0 && self.factor.is_finite() && self.factor > 0.0) {
            return Err(MetricsError::InvalidParameters);
        }
        Ok(exact(self.timeout) * exact(self.factor))
    }
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite value")
}

fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().expect("representable score")
}

/// Solve time counted toward PAR scores, or `None` when the record is
/// penalized. A solve whose claim contradicts `truth` is penalized.
fn credited_time(record: &RunRecord, truth: Option<Truth>) -> Option<f64> {
    let claim = Truth::claimed_by(&record.outcome)?;
    match truth {
        Some(t) if t != claim => None,
        _ => Some(record.wall_time),
    }
}

fn par_exact_over<I>(items: I, params: &ScoreParams) -> Result<Option<BigRational>, MetricsError>
where
    I: IntoIterator<Item = Option<f64>>,
{
    let penalty = params.penalty()?;
    let mut sum = BigRational::zero();
    let mut n: u64 = 0;
    for time in items {
        n += 1;
        sum += match time {
            Some(t) => exact(t),
            None => penalty.clone(),
        };
    }
    Ok((n > 0).then(|| sum / BigRational::from_integer(n.into())))
}

/// Exact PAR-k: (Σ solved times + factor·timeout·#unsolved) / N. Outcomes
/// other than SolvedSat/SolvedUnsat are unsolved.
pub fn par2_exact(records: &[RunRecord], params: &ScoreParams) -> Result<BigRational, MetricsError> {
    par_exact_over(records.iter().map(|r| credited_time(r, None)), params)?.ok_or(MetricsError::EmptyRecordSet)
}

pub fn par2(records: &[RunRecord], params: &ScoreParams) -> Result<f64, MetricsError> {
    par2_exact(records, params).map(|x| to_f64(&x))
}

/// Exact PAR-k scores of the whole suite and of its SAT / UNSAT partitions.
/// Partitions follow ground truth, not the solver's claim, and a claim that
/// contradicts ground truth is penalized. Empty partitions are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct CategoryScores {
    pub overall: BigRational,
    pub sat: Option<BigRational>,
    pub unsat: Option<BigRational>,
    pub n: usize,
    pub n_sat: usize,
    pub n_unsat: usize,
}

pub fn category_scores(records: &[RunRecord], vbs: &VbsTable, params: &ScoreParams) -> Result<CategoryScores, MetricsError> {
    let mut truths = Vec::with_capacity(records.len());
    for r in records {
        truths.push(vbs.truth(&r.instance).ok_or_else(|| MetricsError::MissingVbsEntry(r.instance.clone()))?);
    }
    let timed = |want: Option<Truth>| {
        records
            .iter()
            .zip(&truths)
            .filter(move |(_, &t)| want.is_none_or(|w| w == t))
            .map(|(r, &t)| credited_time(r, Some(t)))
    };
    let overall = par_exact_over(timed(None), params)?.ok_or(MetricsError::EmptyRecordSet)?;
    let n_sat = truths.iter().filter(|&&t| t == Truth::Sat).count();
    Ok(CategoryScores {
        overall,
        sat: par_exact_over(timed(Some(Truth::Sat)), params)?,
        unsat: par_exact_over(timed(Some(Truth::Unsat)), params)?,
        n: records.len(),
        n_sat,
        n_unsat: records.len() - n_sat,
    })
}

/// `(par2_sat, par2_unsat)`; an empty partition is `None`.
pub fn category_par2(records: &[RunRecord], vbs: &VbsTable, params: &ScoreParams) -> Result<(Option<f64>, Option<f64>), MetricsError> {
    let s = category_scores(records, vbs, params)?;
    Ok((s.sat.as_ref().map(to_f64), s.unsat.as_ref().map(to_f64)))
}

/// Cumulative counts of solved records at each threshold.
pub fn threshold_histogram(records: &[RunRecord]) -> BTreeMap<u32, usize> {
    histogram_over(records.iter().filter_map(|r| credited_time(r, None)))
}

fn histogram_over(times: impl Iterator<Item = f64>) -> BTreeMap<u32, usize> {
    let times: Vec<f64> = times.collect();
    THRESHOLDS
        .iter()
        .map(|&t| (t, times.iter().filter(|&&x| x <= t as f64).count()))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub instance: String,
    pub claimed: Truth,
    pub truth: Truth,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VbsComparison {
    pub matches: usize,
    pub mismatches: Vec<Mismatch>,
    pub additionally_solved: Vec<String>,
}

impl VbsComparison {
    /// Any mismatch is an incorrect result and should feed failure-rule
    /// generation.
    pub fn triggers_failure_rule(&self) -> bool {
        !self.mismatches.is_empty()
    }
}

pub fn vbs_compare(records: &[RunRecord], vbs: &VbsTable) -> Result<VbsComparison, MetricsError> {
    let mut out = VbsComparison::default();
    for r in records {
        let entry = vbs.get(&r.instance).ok_or_else(|| MetricsError::MissingVbsEntry(r.instance.clone()))?;
        let Some(claimed) = Truth::claimed_by(&r.outcome) else {
            continue;
        };
        if claimed == entry.truth {
            out.matches += 1;
            if !entry.solved_by_any {
                out.additionally_solved.push(r.instance.clone());
            }
        } else {
            out.mismatches.push(Mismatch {
                instance: r.instance.clone(),
                claimed,
                truth: entry.truth,
            });
        }
    }
    out.mismatches.sort_by(|a, b| a.instance.cmp(&b.instance));
    out.additionally_solved.sort();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemStats {
    /// bytes
    pub mean: Option<f64>,
    pub max: Option<u64>,
    /// percentage of records with a memory sample
    pub coverage: f64,
}

pub fn mem_stats(records: &[RunRecord]) -> MemStats {
    let samples: Vec<u64> = records.iter().filter_map(|r| r.peak_mem).collect();
    let coverage = if records.is_empty() {
        0.0
    } else {
        100.0 * samples.len() as f64 / records.len() as f64
    };
    MemStats {
        mean: (!samples.is_empty()).then(|| samples.iter().map(|&m| m as f64).sum::<f64>() / samples.len() as f64),
        max: samples.iter().copied().max(),
        coverage,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub suite_size: usize,
    /// solves whose claim matches ground truth
    pub solved_sat: usize,
    pub solved_unsat: usize,
    pub threshold_counts: BTreeMap<u32, usize>,
    pub par2_overall: f64,
    pub par2_sat: Option<f64>,
    pub par2_unsat: Option<f64>,
    pub mem_mean: Option<f64>,
    pub mem_max: Option<u64>,
    pub mem_coverage: f64,
    pub vbs_matches: usize,
    pub vbs_mismatches: Vec<Mismatch>,
    pub additionally_solved: Vec<String>,
    pub failure_rule_trigger: bool,
    pub timeout_used: f64,
    pub par_factor: f64,
    pub outcome_counts: BTreeMap<String, usize>,
}

impl EvaluationReport {
    pub fn solved(&self) -> usize {
        self.solved_sat + self.solved_unsat
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// A section for RESULTS.md.
    pub fn to_markdown(&self, title: &str) -> String {
        let opt = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"));
        let mut s = format!("## {title}\n\n");
        writeln!(s, "| metric | value |\n|---|---|").unwrap();
        writeln!(s, "| instances | {} |", self.suite_size).unwrap();
        writeln!(s, "| solved SAT | {} |", self.solved_sat).unwrap();
        writeln!(s, "| solved UNSAT | {} |", self.solved_unsat).unwrap();
        for (t, c) in &self.threshold_counts {
            writeln!(s, "| solved <= {t}s | {c} |").unwrap();
        }
        writeln!(s, "| PAR-{} overall | {:.2} |", self.par_factor, self.par2_overall).unwrap();
        writeln!(s, "| PAR-{} SAT | {} |", self.par_factor, opt(self.par2_sat)).unwrap();
        writeln!(s, "| PAR-{} UNSAT | {} |", self.par_factor, opt(self.par2_unsat)).unwrap();
        writeln!(s, "| mean memory (MB) | {} |", opt(self.mem_mean.map(|m| m / 1048576.0))).unwrap();
        writeln!(s, "| max memory (MB) | {} |", opt(self.mem_max.map(|m| m as f64 / 1048576.0))).unwrap();
        writeln!(s, "| memory coverage | {:.1}% |", self.mem_coverage).unwrap();
        writeln!(s, "| VBS matches | {} |", self.vbs_matches).unwrap();
        writeln!(s, "| VBS mismatches | {} |", self.vbs_mismatches.len()).unwrap();
        writeln!(s, "| additionally solved | {} |", self.additionally_solved.len()).unwrap();
        writeln!(s, "| timeout (s) | {} |", self.timeout_used).unwrap();
        for m in &self.vbs_mismatches {
            writeln!(s, "\n- mismatch: {} claimed {} but is {}", m.instance, m.claimed, m.truth).unwrap();
        }
        s
    }
}

fn outcome_label(o: &Outcome) -> &'static str {
    match o {
        Outcome::SolvedSat => "solved_sat",
        Outcome::SolvedUnsat => "solved_unsat",
        Outcome::Unknown => "unknown",
        Outcome::Timeout => "timeout",
        Outcome::Crashed { .. } => "crashed",
        Outcome::MemOut => "memout",
        Outcome::Malformed => "malformed",
    }
}

pub fn build_report(records: &[RunRecord], vbs: &VbsTable, limits: &ResourceLimits, factor: f64) -> Result<EvaluationReport, MetricsError> {
    let params = ScoreParams::new(limits.wall_timeout).with_factor(factor);
    let scores = category_scores(records, vbs, &params)?;
    let cmp = vbs_compare(records, vbs)?;
    let correct: Vec<&RunRecord> = records
        .iter()
        .filter(|r| credited_time(r, vbs.truth(&r.instance)).is_some())
        .collect();
    let mem = mem_stats(records);
    let mut outcome_counts = BTreeMap::new();
    for r in records {
        *outcome_counts.entry(outcome_label(&r.outcome).to_string()).or_insert(0) += 1;
    }
    Ok(EvaluationReport {
        suite_size: records.len(),
        solved_sat: correct.iter().filter(|r| r.outcome == Outcome::SolvedSat).count(),
        solved_unsat: correct.iter().filter(|r| r.outcome == Outcome::SolvedUnsat).count(),
        threshold_counts: histogram_over(correct.iter().map(|r| r.wall_time)),
        par2_overall: to_f64(&scores.overall),
        par2_sat: scores.sat.as_ref().map(to_f64),
        par2_unsat: scores.unsat.as_ref().map(to_f64),
        mem_mean: mem.mean,
        mem_max: mem.max,
        mem_coverage: mem.coverage,
        vbs_matches: cmp.matches,
        failure_rule_trigger: cmp.triggers_failure_rule(),
        vbs_mismatches: cmp.mismatches,
        additionally_solved: cmp.additionally_solved,
        timeout_used: limits.wall_timeout,
        par_factor: factor,
        outcome_counts,
    })
}

/// Cactus-plot data: solved runtimes in ascending order, one row per solve.
pub fn cactus_csv(series: &[(&str, &[RunRecord])]) -> String {
    let mut out = String::from("solver,rank,time\n");
    for (label, records) in series {
        let mut times: Vec<f64> = records.iter().filter_map(|r| credited_time(r, None)).collect();
        times.sort_by(f64::total_cmp);
        for (i, t) in times.iter().enumerate() {
            writeln!(out, "{label},{},{t}", i + 1).unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(instance: &str, outcome: Outcome, wall_time: f64) -> RunRecord {
        RunRecord {
            instance: instance.into(),
            path: instance.into(),
            outcome,
            wall_time,
            peak_mem: Some(1000),
            peak_threads: None,
            claim: None,
            proof_path: None,
            detail: None,
        }
    }

    #[test]
    fn par2_fixtures() {
        let p = ScoreParams::new(5000.0);
        let rs = [rec("a", Outcome::SolvedSat, 100.0), rec("b", Outcome::Timeout, 5000.0)];
        assert_eq!(par2(&rs, &p).unwrap(), 5050.0);
        let ones: Vec<_> = (0..3).map(|i| rec(&i.to_string(), Outcome::SolvedUnsat, 1.0)).collect();
        assert_eq!(par2(&ones, &p).unwrap(), 1.0);
        let tos: Vec<_> = (0..7).map(|i| rec(&i.to_string(), Outcome::Timeout, 5000.0)).collect();
        assert_eq!(par2(&tos, &p).unwrap(), 10000.0);
        assert_eq!(par2(&[], &p), Err(MetricsError::EmptyRecordSet));
        // the flat-cost reading of the penalty
        assert_eq!(par2(&rs, &p.with_factor(1.0)).unwrap(), 2550.0);
    }

    #[test]
    fn categories_follow_truth() {
        let vbs = VbsTable::parse("a SAT\nb UNSAT\nc SAT -\n").unwrap();
        let p = ScoreParams::new(5000.0);
        let rs = [rec("a", Outcome::SolvedSat, 10.0), rec("b", Outcome::SolvedUnsat, 10.0)];
        assert_eq!(category_par2(&rs, &vbs, &p).unwrap(), (Some(10.0), Some(10.0)));

        let rs = [rec("a", Outcome::SolvedUnsat, 10.0), rec("c", Outcome::SolvedSat, 4.0)];
        let (sat, unsat) = category_par2(&rs, &vbs, &p).unwrap();
        assert_eq!(sat, Some(5002.0));
        assert_eq!(unsat, None);
        let cmp = vbs_compare(&rs, &vbs).unwrap();
        assert_eq!(cmp.mismatches.len(), 1);
        assert!(cmp.triggers_failure_rule());
        assert_eq!(cmp.additionally_solved, vec!["c".to_string()]);

        assert_eq!(
            category_par2(&[rec("zz", Outcome::Timeout, 1.0)], &vbs, &p),
            Err(MetricsError::MissingVbsEntry("zz".into()))
        );
    }

    #[test]
    fn histogram_examples() {
        let rs = [
            rec("a", Outcome::SolvedSat, 250.0),
            rec("b", Outcome::SolvedSat, 650.0),
            rec("c", Outcome::SolvedUnsat, 4000.0),
            rec("d", Outcome::Timeout, 5000.0),
        ];
        let h: Vec<usize> = threshold_histogram(&rs).into_values().collect();
        assert_eq!(h, [1, 1, 2, 2, 2, 3]);
        assert!(threshold_histogram(&rs[3..]).values().all(|&c| c == 0));
    }

    #[test]
    fn vbs_text_round_trip() {
        let text = "a.cnf SAT 12.5\nb.cnf UNSAT\nc.cnf SAT -\n";
        let t = VbsTable::parse(&format!("# header\n{text}")).unwrap();
        assert_eq!(t.to_text(), text);
        assert!(matches!(VbsTable::parse("a MAYBE"), Err(MetricsError::MalformedVbs { line: 1, .. })));
    }

    #[test]
    fn report_is_deterministic_and_consistent() {
        let vbs = VbsTable::parse("a SAT\nb UNSAT\nc SAT\n").unwrap();
        let mut rs = vec![
            rec("a", Outcome::SolvedSat, 1.0),
            rec("b", Outcome::SolvedSat, 2.0),
            rec("c", Outcome::Crashed { signal: Some(11), exit_code: None }, 0.1),
        ];
        rs[2].peak_mem = None;
        let limits = ResourceLimits::with_timeout(10.0);
        let r1 = build_report(&rs, &vbs, &limits, 2.0).unwrap();
        let r2 = build_report(&rs, &vbs, &limits, 2.0).unwrap();
        assert_eq!(r1.to_json(), r2.to_json());
        assert_eq!(r1.solved(), 1);
        assert_eq!(r1.vbs_mismatches.len(), 1);
        assert!((r1.par2_overall - 41.0 / 3.0).abs() < 1e-12);
        assert!((r1.mem_coverage - 200.0 / 3.0).abs() < 1e-9);
        let back: EvaluationReport = serde_json::from_str(&r1.to_json()).unwrap();
        assert_eq!(back, r1);
        assert!(r1.to_markdown("cycle 1").contains("PAR-2 overall"));
    }

    fn arb_record() -> impl Strategy<Value = (RunRecord, Truth)> {
        (0u8..6, 0.0f64..5000.0, any::<bool>(), 0u32..1000).prop_map(|(kind, t, sat, id)| {
            let outcome = match kind {
                0 | 1 => Outcome::SolvedSat,
                2 | 3 => Outcome::SolvedUnsat,
                4 => Outcome::Timeout,
                _ => Outcome::Crashed { signal: Some(6), exit_code: None },
            };
            let truth = if sat { Truth::Sat } else { Truth::Unsat };
            (rec(&format!("i{id}"), outcome, t), truth)
        })
    }

    proptest! {
        #[test]
        fn par2_bounds_and_monotonicity(rs in prop::collection::vec(arb_record(), 1..40), k in 0usize..40) {
            let rs: Vec<RunRecord> = rs.into_iter().map(|(r, _)| r).collect();
            let p = ScoreParams::new(5000.0);
            let before = par2_exact(&rs, &p).unwrap();
            let v = to_f64(&before);
            prop_assert!(v > 0.0 || rs.iter().all(|r| r.outcome.is_solved() && r.wall_time == 0.0));
            prop_assert!(v <= 10000.0);
            let mut worse = rs.clone();
            let k = k % worse.len();
            worse[k].outcome = Outcome::Timeout;
            prop_assert!(par2_exact(&worse, &p).unwrap() >= before);
            let h = threshold_histogram(&rs);
            prop_assert!(h.values().zip(h.values().skip(1)).all(|(a, b)| a <= b));
            prop_assert_eq!(h[&4500], rs.iter().filter(|r| r.outcome.is_solved() && r.wall_time <= 4500.0).count());
        }

        #[test]
        fn partition_reconstruction_exact(rs in prop::collection::vec(arb_record(), 1..40)) {
            let mut vbs = VbsTable::default();
            let mut records = Vec::new();
            for (i, (mut r, t)) in rs.into_iter().enumerate() {
                r.instance = format!("i{i}");
                vbs.entries.insert(r.instance.clone(), VbsEntry { truth: t, best_time: None, solved_by_any: true });
                records.push(r);
            }
            let s = category_scores(&records, &vbs, &ScoreParams::new(5000.0)).unwrap();
            let n = |k: usize| BigRational::from_integer(k.into());
            let lhs = s.overall.clone() * n(s.n);
            let rhs = s.sat.clone().unwrap_or_default() * n(s.n_sat) + s.unsat.clone().unwrap_or_default() * n(s.n_unsat);
            prop_assert_eq!(lhs, rhs);
        }
    }
}
