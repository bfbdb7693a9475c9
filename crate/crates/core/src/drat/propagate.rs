use std::collections::HashMap;

use crate::formula::Lit;

pub type ClauseId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Propagation {
    Conflict,
    Fixpoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeleteOutcome {
    Removed,
    /// No active clause with these literals.
    NotFound,
    /// The clause is the reason for a top-level assignment and was kept.
    KeptAsReason,
}

const UNASSIGNED: i8 = 0;
const TRUE: i8 = 1;
const FALSE: i8 = -1;

/// Clause database with two-watched-literal unit propagation.
///
/// Everything assigned while no temporary assumptions are active is the
/// top level and is never undone. Temporary assumptions (RUP checks) are
/// rolled back to the top-level trail length.
///
/// Watch invariant: for an active clause of length ≥ 2, `lits[0]` and
/// `lits[1]` are watched; a watched literal is false only if the other watch
/// is true or the clause is unit/conflicting under the current trail.
#[derive(Clone, Debug, Default)]
pub struct PropagationState {
    clauses: Vec<Vec<Lit>>,
    active: Vec<bool>,
    watches: Vec<Vec<ClauseId>>,
    /// indexed by literal code
    values: Vec<i8>,
    /// indexed by variable
    reasons: Vec<Option<ClauseId>>,
    trail: Vec<Lit>,
    qhead: usize,
    /// trail length of the top level; `None` while at top level
    mark: Option<usize>,
    conflict: bool,
    lookup: HashMap<Vec<i32>, Vec<ClauseId>>,
}

fn key(lits: &[Lit]) -> Vec<i32> {
    let mut k: Vec<i32> = lits.iter().map(|l| l.value()).collect();
    k.sort_unstable();
    k.dedup();
    k
}

impl PropagationState {
    pub fn new(num_vars: u32) -> Self {
        let mut s = PropagationState::default();
        s.ensure_var(num_vars);
        s
    }

    fn ensure_var(&mut self, var: u32) {
        let needed = 2 * var as usize + 2;
        if self.values.len() < needed {
            self.values.resize(needed, UNASSIGNED);
            self.watches.resize_with(needed, Vec::new);
            self.reasons.resize(var as usize + 1, None);
        }
    }

    #[inline]
    pub fn value(&self, lit: Lit) -> Option<bool> {
        match self.values.get(lit.code()).copied().unwrap_or(UNASSIGNED) {
            TRUE => Some(true),
            FALSE => Some(false),
            _ => None,
        }
    }

    #[inline]
    fn raw(&self, lit: Lit) -> i8 {
        self.values[lit.code()]
    }

    fn assign(&mut self, lit: Lit, reason: Option<ClauseId>) {
        self.values[lit.code()] = TRUE;
        self.values[(-lit).code()] = FALSE;
        self.reasons[lit.var() as usize] = reason;
        self.trail.push(lit);
    }

    /// Whether the top-level database is already contradictory.
    pub fn is_conflicting(&self) -> bool {
        self.conflict
    }

    pub fn trail(&self) -> &[Lit] {
        &self.trail
    }

    pub fn num_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn active_clauses(&self) -> impl Iterator<Item = &[Lit]> {
        self.clauses
            .iter()
            .zip(&self.active)
            .filter(|(_, &a)| a)
            .map(|(c, _)| c.as_slice())
    }

    /// Adds a clause at the top level and propagates to fixpoint.
    pub fn add_clause(&mut self, lits: &[Lit]) -> ClauseId {
        debug_assert!(self.mark.is_none(), "clauses are added at the top level only");
        let mut lits: Vec<Lit> = lits.to_vec();
        // dedup while keeping first-occurrence order
        let mut seen = Vec::with_capacity(lits.len());
        lits.retain(|l| {
            if seen.contains(l) {
                false
            } else {
                seen.push(*l);
                true
            }
        });
        if let Some(max) = lits.iter().map(|l| l.var()).max() {
            self.ensure_var(max);
        }
        let id = self.clauses.len();
        self.lookup.entry(key(&lits)).or_default().push(id);

        if self.conflict {
            self.clauses.push(lits);
            self.active.push(true);
            return id;
        }
        // non-false literals first, true before unassigned
        lits.sort_by_key(|&l| match self.raw(l) {
            TRUE => 0,
            UNASSIGNED => 1,
            _ => 2,
        });
        match lits.len() {
            0 => self.conflict = true,
            1 => match self.raw(lits[0]) {
                UNASSIGNED => self.assign(lits[0], Some(id)),
                FALSE => self.conflict = true,
                _ => {}
            },
            _ => {
                self.watches[lits[0].code()].push(id);
                self.watches[lits[1].code()].push(id);
                match (self.raw(lits[0]), self.raw(lits[1])) {
                    (FALSE, _) => self.conflict = true,
                    (UNASSIGNED, FALSE) => self.assign(lits[0], Some(id)),
                    _ => {}
                }
            }
        }
        self.clauses.push(lits);
        self.active.push(true);
        if !self.conflict && self.propagate() == Propagation::Conflict {
            self.conflict = true;
        }
        id
    }

    /// Removes one active copy of the clause. Reasons of top-level
    /// assignments are kept, so the top-level trail stays justified.
    pub fn delete_clause(&mut self, lits: &[Lit]) -> DeleteOutcome {
        let k = key(lits);
        let Some(ids) = self.lookup.get(&k) else {
            return DeleteOutcome::NotFound;
        };
        let Some(pos) = ids.iter().rposition(|&id| !self.is_reason(id)) else {
            return DeleteOutcome::KeptAsReason;
        };
        let ids = self.lookup.get_mut(&k).unwrap();
        let id = ids.swap_remove(pos);
        if ids.is_empty() {
            self.lookup.remove(&k);
        }
        self.active[id] = false;
        DeleteOutcome::Removed
    }

    fn is_reason(&self, id: ClauseId) -> bool {
        self.clauses[id]
            .iter()
            .any(|l| self.values[l.code()] == TRUE && self.reasons[l.var() as usize] == Some(id))
    }

    /// Unit propagation from the current queue head to fixpoint or conflict.
    pub fn propagate(&mut self) -> Propagation {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = -p;
            let mut ws = std::mem::take(&mut self.watches[false_lit.code()]);
            let mut i = 0;
            let mut j = 0;
            let mut conflict = false;
            while i < ws.len() {
                let cid = ws[i];
                i += 1;
                if !self.active[cid] {
                    continue;
                }
                let clause = &mut self.clauses[cid];
                if clause[0] == false_lit {
                    clause.swap(0, 1);
                }
                let first = clause[0];
                if self.values[first.code()] == TRUE {
                    ws[j] = cid;
                    j += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..clause.len() {
                    if self.values[clause[k].code()] != FALSE {
                        clause.swap(1, k);
                        let w = clause[1].code();
                        self.watches[w].push(cid);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = cid;
                j += 1;
                if self.values[first.code()] == FALSE {
                    conflict = true;
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.assign(first, Some(cid));
                }
            }
            ws.truncate(j);
            self.watches[false_lit.code()] = ws;
            if conflict {
                return Propagation::Conflict;
            }
        }
        Propagation::Fixpoint
    }

    fn begin_temporary(&mut self) {
        debug_assert!(self.mark.is_none());
        self.mark = Some(self.trail.len());
    }

    fn rollback(&mut self) {
        let mark = self.mark.take().expect("no temporary assignments active");
        for l in self.trail.drain(mark..) {
            self.values[l.code()] = UNASSIGNED;
            self.values[(-l).code()] = UNASSIGNED;
        }
        self.qhead = mark;
    }

    /// Assumes every literal in `assumptions`, propagates, reports the result
    /// and the literals implied beyond the top level, then restores the state.
    pub fn propagate_under(&mut self, assumptions: &[Lit]) -> (Propagation, Vec<Lit>) {
        if self.conflict {
            return (Propagation::Conflict, Vec::new());
        }
        if let Some(max) = assumptions.iter().map(|l| l.var()).max() {
            self.ensure_var(max);
        }
        self.begin_temporary();
        let start = self.trail.len();
        let mut result = Propagation::Fixpoint;
        for &a in assumptions {
            match self.raw(a) {
                FALSE => {
                    result = Propagation::Conflict;
                    break;
                }
                TRUE => {}
                _ => self.assign(a, None),
            }
        }
        if result == Propagation::Fixpoint {
            result = self.propagate();
        }
        let implied = self.trail[start..].to_vec();
        self.rollback();
        (result, implied)
    }

    /// Reverse unit propagation: does assuming the negation of every literal
    /// of `clause` propagate to a conflict? The state is unchanged afterwards.
    pub fn check_rup(&mut self, clause: &[Lit]) -> bool {
        let negated: Vec<Lit> = clause.iter().map(|&l| -l).collect();
        self.propagate_under(&negated).0 == Propagation::Conflict
    }

    /// Resolution asymmetric tautology on `pivot`: every resolvent with an
    /// active clause containing `-pivot` must be RUP.
    pub fn check_rat(&mut self, clause: &[Lit], pivot: Lit) -> bool {
        let partners: Vec<ClauseId> = (0..self.clauses.len())
            .filter(|&id| self.active[id] && self.clauses[id].contains(&-pivot))
            .collect();
        partners.into_iter().all(|id| {
            let mut resolvent: Vec<Lit> = clause.to_vec();
            resolvent.extend(self.clauses[id].iter().copied().filter(|&l| l != -pivot));
            self.check_rup(&resolvent)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::clause;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn state(clauses: &[&[i32]]) -> PropagationState {
        let mut s = PropagationState::new(0);
        for c in clauses {
            s.add_clause(&clause(c));
        }
        s
    }

    #[test]
    fn unit_clause_propagates() {
        let s = state(&[&[1]]);
        assert!(!s.is_conflicting());
        assert_eq!(s.trail(), &clause(&[1])[..]);
    }

    #[test]
    fn contradiction_conflicts() {
        let s = state(&[&[1], &[-1]]);
        assert!(s.is_conflicting());
    }

    #[test]
    fn rup_examples() {
        let mut s = state(&[&[1, 2], &[-1, 2], &[1, -2]]);
        assert!(s.check_rup(&clause(&[2])));
        let mut s = state(&[&[1, 2]]);
        assert!(!s.check_rup(&clause(&[1])));
        assert!(s.trail().is_empty(), "state restored");
        let mut s = state(&[&[1], &[-1]]);
        assert!(s.check_rup(&clause(&[3, 4])));
    }

    #[test]
    fn rat_vacuous_and_nontrivial() {
        let mut s = state(&[&[2, 3]]);
        assert!(s.check_rat(&clause(&[1]), Lit::new(1).unwrap()));
        let mut s = state(&[&[-1, 2], &[-2]]);
        assert!(!s.check_rat(&clause(&[1]), Lit::new(1).unwrap()));
        // blocked clause: (1, -2) with only partner (-1, 2) resolves to a tautology
        let mut s = state(&[&[-1, 2], &[3, 4]]);
        assert!(!s.check_rup(&clause(&[1, -2])));
        assert!(s.check_rat(&clause(&[1, -2]), Lit::new(1).unwrap()));
    }

    #[test]
    fn deletion_keeps_reasons() {
        let mut s = state(&[&[1], &[-1, 2], &[3, 4]]);
        assert_eq!(s.delete_clause(&clause(&[1])), DeleteOutcome::KeptAsReason);
        assert_eq!(s.delete_clause(&clause(&[4, 3])), DeleteOutcome::Removed);
        assert_eq!(s.delete_clause(&clause(&[4, 3])), DeleteOutcome::NotFound);
        assert_eq!(s.num_active(), 2);
    }

    #[test]
    fn deleted_clause_stops_propagating() {
        let mut s = state(&[&[1, 2], &[3, 4]]);
        assert!(s.check_rup(&clause(&[1, 2])));
        s.delete_clause(&clause(&[1, 2]));
        assert!(!s.check_rup(&clause(&[1, 2])));
    }

    /// Watch-free reference: scan all clauses until nothing changes.
    fn saturate(clauses: &[Vec<i32>], assumptions: &[i32]) -> Option<Vec<i32>> {
        let mut val: std::collections::HashMap<i32, bool> = Default::default();
        for &a in assumptions {
            if val.get(&a.abs()) == Some(&(a < 0)) {
                return None;
            }
            val.insert(a.abs(), a > 0);
        }
        loop {
            let mut changed = false;
            for c in clauses {
                let lit_val = |l: &i32| val.get(&l.abs()).map(|&v| v == (*l > 0));
                if c.iter().any(|l| lit_val(l) == Some(true)) {
                    continue;
                }
                let mut open: Vec<i32> = c.iter().copied().filter(|l| lit_val(l).is_none()).collect();
                open.sort_unstable();
                open.dedup();
                match open.len() {
                    0 => return None,
                    1 => {
                        val.insert(open[0].abs(), open[0] > 0);
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                let mut lits: Vec<i32> = val.iter().map(|(&v, &b)| if b { v } else { -v }).collect();
                lits.sort_unstable();
                return Some(lits);
            }
        }
    }

    #[test]
    fn matches_saturation_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let n_clauses = rng.gen_range(1..=25);
            let clauses: Vec<Vec<i32>> = (0..n_clauses)
                .map(|_| {
                    (0..rng.gen_range(1..=3))
                        .map(|_| {
                            let v = rng.gen_range(1..=10);
                            if rng.gen() { v } else { -v }
                        })
                        .collect()
                })
                .collect();
            let assumptions: Vec<i32> = (0..rng.gen_range(0..=3))
                .map(|_| {
                    let v = rng.gen_range(1..=10);
                    if rng.gen() { v } else { -v }
                })
                .collect();

            let mut s = PropagationState::new(10);
            for c in &clauses {
                s.add_clause(&clause(c));
            }
            let expected = saturate(&clauses, &assumptions);
            let assume: Vec<Lit> = clause(&assumptions);
            let (res, _) = s.propagate_under(&assume);
            match expected {
                None => assert_eq!(res, Propagation::Conflict, "{clauses:?} under {assumptions:?}"),
                Some(lits) => {
                    assert_eq!(res, Propagation::Fixpoint, "{clauses:?} under {assumptions:?}");
                    let (_, implied) = s.propagate_under(&assume);
                    let mut got: Vec<i32> = s.trail().iter().chain(&implied).map(|l| l.value()).collect();
                    got.sort_unstable();
                    got.dedup();
                    assert_eq!(got, lits);
                }
            }
        }
    }
}
