//! A small CDCL solver that logs a DRAT refutation.
//!
//! It exists to produce reference proofs for exercising the checker and to
//! double-check generated ground truth. It does not share code with the
//! checker's propagation engine.

use crate::drat::{DratProof, ProofLemma};
use crate::formula::{Assignment, CnfFormula, Lit};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReferenceResult {
    Sat(Assignment),
    Unsat(DratProof),
}

struct Solver {
    num_vars: usize,
    clauses: Vec<Vec<Lit>>,
    learnt: Vec<bool>,
    deleted: Vec<bool>,
    watches: Vec<Vec<usize>>,
    /// per variable: 0 unassigned, 1 true, -1 false
    value: Vec<i8>,
    level: Vec<usize>,
    reason: Vec<Option<usize>>,
    activity: Vec<f64>,
    bump: f64,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    proof: Vec<ProofLemma>,
    conflicts: u64,
}

impl Solver {
    fn lit_value(&self, l: Lit) -> i8 {
        let v = self.value[l.var() as usize];
        if l.is_positive() {
            v
        } else {
            -v
        }
    }

    fn decision_level(&self) -> usize {
        self.trail_lim.len()
    }

    fn enqueue(&mut self, l: Lit, reason: Option<usize>) {
        let v = l.var() as usize;
        self.value[v] = if l.is_positive() { 1 } else { -1 };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    /// Attaches a clause of length ≥ 2 watching its first two literals.
    fn attach(&mut self, lits: Vec<Lit>, learnt: bool) -> usize {
        let id = self.clauses.len();
        self.watches[lits[0].code()].push(id);
        self.watches[lits[1].code()].push(id);
        self.clauses.push(lits);
        self.learnt.push(learnt);
        self.deleted.push(false);
        id
    }

    fn propagate(&mut self) -> Option<usize> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let neg = -p;
            let ws = std::mem::take(&mut self.watches[neg.code()]);
            let mut kept = Vec::with_capacity(ws.len());
            let mut conflict = None;
            for (idx, &cid) in ws.iter().enumerate() {
                if self.deleted[cid] {
                    continue;
                }
                if conflict.is_some() {
                    kept.push(cid);
                    continue;
                }
                if self.clauses[cid][0] == neg {
                    self.clauses[cid].swap(0, 1);
                }
                let first = self.clauses[cid][0];
                if self.lit_value(first) == 1 {
                    kept.push(cid);
                    continue;
                }
                let len = self.clauses[cid].len();
                let replacement = (2..len).find(|&k| self.lit_value(self.clauses[cid][k]) != -1);
                if let Some(k) = replacement {
                    self.clauses[cid].swap(1, k);
                    let w = self.clauses[cid][1].code();
                    self.watches[w].push(cid);
                    continue;
                }
                kept.push(cid);
                if self.lit_value(first) == -1 {
                    conflict = Some(cid);
                    kept.extend(ws[idx + 1..].iter().copied().filter(|&c| !self.deleted[c]));
                    break;
                }
                self.enqueue(first, Some(cid));
            }
            self.watches[neg.code()] = kept;
            if conflict.is_some() {
                return conflict;
            }
        }
        None
    }

    /// First-UIP conflict analysis. Returns the learnt clause (asserting
    /// literal first) and the backjump level.
    fn analyze(&mut self, mut confl: usize) -> (Vec<Lit>, usize) {
        let mut seen = vec![false; self.num_vars + 1];
        let mut learnt: Vec<Lit> = vec![Lit::from_var(1, true)];
        let mut pending = 0usize;
        let mut idx = self.trail.len();
        let mut pivot: Option<Lit> = None;
        let level = self.decision_level();
        loop {
            let lits: Vec<Lit> = self.clauses[confl].clone();
            for &q in &lits {
                if Some(q) == pivot {
                    continue;
                }
                let v = q.var() as usize;
                if seen[v] || self.level[v] == 0 {
                    continue;
                }
                seen[v] = true;
                self.activity[v] += self.bump;
                if self.level[v] == level {
                    pending += 1;
                } else {
                    learnt.push(q);
                }
            }
            loop {
                idx -= 1;
                if seen[self.trail[idx].var() as usize] {
                    break;
                }
            }
            let p = self.trail[idx];
            pending -= 1;
            if pending == 0 {
                learnt[0] = -p;
                break;
            }
            pivot = Some(p);
            confl = self.reason[p.var() as usize].expect("implied literal has a reason");
        }
        self.bump *= 1.05;
        let back = if learnt.len() == 1 {
            0
        } else {
            let (max_i, max_level) = learnt[1..]
                .iter()
                .enumerate()
                .map(|(i, l)| (i + 1, self.level[l.var() as usize]))
                .max_by_key(|&(_, lv)| lv)
                .unwrap();
            learnt.swap(1, max_i);
            max_level
        };
        (learnt, back)
    }

    fn backtrack(&mut self, level: usize) {
        if self.decision_level() <= level {
            return;
        }
        let start = self.trail_lim[level];
        for l in self.trail.drain(start..) {
            self.value[l.var() as usize] = 0;
            self.reason[l.var() as usize] = None;
        }
        self.trail_lim.truncate(level);
        self.qhead = start;
    }

    fn pick_branch(&self) -> Option<Lit> {
        (1..=self.num_vars)
            .filter(|&v| self.value[v] == 0)
            .max_by(|&a, &b| self.activity[a].total_cmp(&self.activity[b]).then(b.cmp(&a)))
            .map(|v| Lit::from_var(v as u32, false))
    }

    fn is_locked(&self, cid: usize) -> bool {
        let c = &self.clauses[cid];
        let v = c[0].var() as usize;
        self.reason[v] == Some(cid) && self.lit_value(c[0]) == 1
    }

    /// Drops half of the long learnt clauses and logs the deletions.
    fn reduce(&mut self) {
        let candidates: Vec<usize> = (0..self.clauses.len())
            .filter(|&c| self.learnt[c] && !self.deleted[c] && self.clauses[c].len() > 3 && !self.is_locked(c))
            .collect();
        for &cid in candidates.iter().take(candidates.len() / 2) {
            self.deleted[cid] = true;
            self.proof.push(ProofLemma::delete(self.clauses[cid].clone()));
        }
    }

    fn unsat(mut self) -> ReferenceResult {
        self.proof.push(ProofLemma::add(Vec::new()));
        ReferenceResult::Unsat(DratProof {
            lemmas: self.proof,
            source: None,
        })
    }
}

/// Solves `formula`, returning a model or a DRAT refutation whose lemmas are
/// all RUP with respect to the clauses active when they are added.
pub fn solve_with_proof(formula: &CnfFormula) -> ReferenceResult {
    let n = formula.num_vars() as usize;
    let mut s = Solver {
        num_vars: n,
        clauses: Vec::new(),
        learnt: Vec::new(),
        deleted: Vec::new(),
        watches: vec![Vec::new(); 2 * n + 2],
        value: vec![0; n + 1],
        level: vec![0; n + 1],
        reason: vec![None; n + 1],
        activity: vec![0.0; n + 1],
        bump: 1.0,
        trail: Vec::new(),
        trail_lim: Vec::new(),
        qhead: 0,
        proof: Vec::new(),
        conflicts: 0,
    };

    for c in formula.clauses() {
        let mut lits: Vec<Lit> = Vec::with_capacity(c.len());
        for &l in c {
            if !lits.contains(&l) {
                lits.push(l);
            }
        }
        if lits.iter().any(|&l| lits.contains(&-l)) {
            continue;
        }
        match lits.len() {
            0 => return s.unsat(),
            1 => match s.lit_value(lits[0]) {
                0 => s.enqueue(lits[0], None),
                -1 => return s.unsat(),
                _ => {}
            },
            _ => {
                s.attach(lits, false);
            }
        }
    }
    loop {
        if let Some(confl) = s.propagate() {
            if s.decision_level() == 0 {
                return s.unsat();
            }
            s.conflicts += 1;
            let (learnt, back) = s.analyze(confl);
            s.proof.push(ProofLemma::add(learnt.clone()));
            s.backtrack(back);
            if learnt.len() == 1 {
                s.enqueue(learnt[0], None);
            } else {
                let asserting = learnt[0];
                let cid = s.attach(learnt, true);
                s.enqueue(asserting, Some(cid));
            }
            if s.conflicts.is_multiple_of(32) {
                s.reduce();
            }
        } else {
            match s.pick_branch() {
                None => {
                    let mut model = Assignment::new();
                    for v in 1..=n {
                        model.set(v as u32, s.value[v] == 1);
                    }
                    return ReferenceResult::Sat(model);
                }
                Some(l) => {
                    s.trail_lim.push(s.trail.len());
                    s.enqueue(l, None);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drat::check_proof;
    use crate::formula::{brute_force_solve, check_model, ModelMode};
    use crate::generate::random_ksat;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn agrees_with_brute_force_and_proofs_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut unsat = 0;
        for i in 0..300 {
            let n = 4 + i % 9;
            let m = (n as f64 * 4.6) as usize;
            let f = random_ksat(&mut rng, n as u32, m, 3);
            let truth = brute_force_solve(&f, 24).unwrap();
            match solve_with_proof(&f) {
                ReferenceResult::Sat(model) => {
                    assert!(truth.is_sat());
                    assert!(check_model(&f, &model, ModelMode::Strict).unwrap().is_satisfied());
                }
                ReferenceResult::Unsat(proof) => {
                    assert!(!truth.is_sat());
                    unsat += 1;
                    let c = check_proof(&f, &proof);
                    assert!(c.verdict.is_valid(), "{:?}", c.verdict);
                }
            }
        }
        assert!(unsat > 50);
    }

    #[test]
    fn trivial_cases() {
        let f = CnfFormula::from_ints(&[&[1], &[-1]]);
        assert!(matches!(solve_with_proof(&f), ReferenceResult::Unsat(_)));
        let f = CnfFormula::from_ints(&[&[1, -1]]);
        assert!(matches!(solve_with_proof(&f), ReferenceResult::Sat(_)));
        let f = CnfFormula::new(0, vec![vec![]], "").unwrap();
        assert!(matches!(solve_with_proof(&f), ReferenceResult::Unsat(_)));
    }
}
