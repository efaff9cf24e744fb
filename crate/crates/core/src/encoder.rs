//! Sequential SAT encoding of bounded plan existence whose models are in
//! one-to-one correspondence with the plans of length at most `ℓ`.
//!
//! Variables are laid out as state layers `0..=ℓ`, then operator steps
//! `0..ℓ`, then (optionally) one occurrence indicator per operator and per
//! atom. Clause groups:
//!
//! * initial state and goal units,
//! * at most one operator per step (pairwise),
//! * preconditions and effects of the chosen operator,
//! * explanatory frame axioms in both directions,
//! * padding: an empty step is followed only by empty steps,
//! * indicator biconditionals `OpInd(o) ↔ ∨ᵢ OpAt(o,i)` and
//!   `AtomInd(a) ↔ ∨ᵢ AtomAt(a,i)`.
//!
//! The indicators are defined by their biconditionals, so switching them on
//! does not change the model count.

use std::fmt;
use std::io::{self, Write};

use thiserror::Error;

use crate::cnf::{Assignment, Clause, Cnf, Lit};
use crate::query::{Query, QueryError, QueryVar};
use crate::task::{LengthBound, Plan, PlanningTask};

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("query uses occurrence literals but the encoding has no indicator variables")]
    MissingIndicators,
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("model is not a plan schedule: {0}")]
    Corrupt(String),
}

/// Meaning of an encoding variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarTag {
    AtomAt { atom: usize, layer: usize },
    OpAt { op: usize, step: usize },
    OpInd(usize),
    AtomInd(usize),
}

/// Bijection between encoding variables and their tags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarMap {
    atoms: usize,
    ops: usize,
    bound: usize,
    indicators: bool,
}

impl VarMap {
    fn new(task: &PlanningTask, bound: usize, indicators: bool) -> Self {
        Self {
            atoms: task.num_atoms(),
            ops: task.num_operators(),
            bound,
            indicators,
        }
    }

    fn op_base(&self) -> usize {
        self.atoms * (self.bound + 1)
    }

    fn ind_base(&self) -> usize {
        self.op_base() + self.ops * self.bound
    }

    pub fn has_indicators(&self) -> bool {
        self.indicators
    }

    pub fn num_vars(&self) -> u32 {
        let n = self.ind_base() + if self.indicators { self.ops + self.atoms } else { 0 };
        n as u32
    }

    pub fn atom_at(&self, atom: usize, layer: usize) -> u32 {
        debug_assert!(atom < self.atoms && layer <= self.bound);
        (1 + layer * self.atoms + atom) as u32
    }

    pub fn op_at(&self, op: usize, step: usize) -> u32 {
        debug_assert!(op < self.ops && step < self.bound);
        (1 + self.op_base() + step * self.ops + op) as u32
    }

    pub fn op_ind(&self, op: usize) -> Option<u32> {
        (self.indicators && op < self.ops).then(|| (1 + self.ind_base() + op) as u32)
    }

    pub fn atom_ind(&self, atom: usize) -> Option<u32> {
        (self.indicators && atom < self.atoms).then(|| (1 + self.ind_base() + self.ops + atom) as u32)
    }

    pub fn var(&self, tag: VarTag) -> Option<u32> {
        match tag {
            VarTag::AtomAt { atom, layer } => {
                (atom < self.atoms && layer <= self.bound).then(|| self.atom_at(atom, layer))
            }
            VarTag::OpAt { op, step } => (op < self.ops && step < self.bound).then(|| self.op_at(op, step)),
            VarTag::OpInd(op) => self.op_ind(op),
            VarTag::AtomInd(atom) => self.atom_ind(atom),
        }
    }

    pub fn tag(&self, var: u32) -> Option<VarTag> {
        let v = (var as usize).checked_sub(1)?;
        if v < self.op_base() {
            return Some(VarTag::AtomAt {
                atom: v % self.atoms,
                layer: v / self.atoms,
            });
        }
        if v < self.ind_base() {
            let w = v - self.op_base();
            return Some(VarTag::OpAt {
                op: w % self.ops,
                step: w / self.ops,
            });
        }
        let w = v - self.ind_base();
        match (self.indicators, w) {
            (true, w) if w < self.ops => Some(VarTag::OpInd(w)),
            (true, w) if w < self.ops + self.atoms => Some(VarTag::AtomInd(w - self.ops)),
            _ => None,
        }
    }

    /// Operator variables step by step. Deciding them in this order lets
    /// unit propagation fix each successive state layer, so residual
    /// formulas of prefixes that reach the same state coincide and share
    /// one cache entry in the compiler.
    pub fn time_order(&self) -> Vec<u32> {
        (0..self.bound)
            .flat_map(|step| (0..self.ops).map(move |op| self.op_at(op, step)))
            .collect()
    }

    pub fn op_indicators(&self) -> Vec<u32> {
        (0..self.ops).filter_map(|o| self.op_ind(o)).collect()
    }

    /// Writes the sidecar map, one `v <id> <tag>` line per variable. Tags use
    /// the query literal syntax (`atom:NAME@i`, `op:NAME@i`, `op:NAME`,
    /// `atom:NAME`).
    pub fn write_sidecar<W: Write>(&self, task: &PlanningTask, mut out: W) -> io::Result<()> {
        for var in 1..=self.num_vars() {
            let tag = self.tag(var).expect("every variable is tagged");
            writeln!(out, "v {var} {}", TagDisplay { tag, task })?;
        }
        Ok(())
    }
}

struct TagDisplay<'a> {
    tag: VarTag,
    task: &'a PlanningTask,
}

impl fmt::Display for TagDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tag {
            VarTag::AtomAt { atom, layer } => write!(f, "atom:{}@{layer}", self.task.atom_name(atom)),
            VarTag::OpAt { op, step } => write!(f, "op:{}@{step}", self.task.op_name(op)),
            VarTag::OpInd(op) => write!(f, "op:{}", self.task.op_name(op)),
            VarTag::AtomInd(atom) => write!(f, "atom:{}", self.task.atom_name(atom)),
        }
    }
}

/// The CNF of a bounded plan space together with its variable map.
#[derive(Debug, Clone)]
pub struct Encoding {
    pub cnf: Cnf,
    pub varmap: VarMap,
    pub bound: LengthBound,
    pub task_hash: String,
}

struct Builder {
    clauses: Vec<Clause>,
}

impl Builder {
    fn push(&mut self, lits: Vec<Lit>) {
        // duplicates and tautologies cannot arise from well-formed groups;
        // a tautology would be trivially satisfied, so it is skipped
        if let Ok(c) = Clause::new(lits) {
            self.clauses.push(c);
        }
    }
}

/// Builds the sequential encoding of `task` under `bound`.
pub fn encode(task: &PlanningTask, bound: LengthBound, with_indicators: bool) -> Encoding {
    let l = bound.get();
    let vm = VarMap::new(task, l, with_indicators);
    let mut b = Builder { clauses: Vec::new() };
    let lit = |var: u32, value: bool| Lit::new(var, value);

    for atom in 0..task.num_atoms() {
        b.push(vec![lit(vm.atom_at(atom, 0), task.init().get(atom))]);
    }
    for (atom, value) in task.goal().iter() {
        b.push(vec![lit(vm.atom_at(atom, l), value)]);
    }
    let ops = task.operators();
    for step in 0..l {
        for (i, o1) in ops.iter().enumerate() {
            for o2 in &ops[i + 1..] {
                b.push(vec![Lit::neg(vm.op_at(o1.id, step)), Lit::neg(vm.op_at(o2.id, step))]);
            }
        }
        for op in ops {
            let chosen = Lit::neg(vm.op_at(op.id, step));
            for (atom, value) in op.pre.iter() {
                b.push(vec![chosen, lit(vm.atom_at(atom, step), value)]);
            }
            for (atom, value) in op.eff.iter() {
                b.push(vec![chosen, lit(vm.atom_at(atom, step + 1), value)]);
            }
        }
        for atom in 0..task.num_atoms() {
            let now = vm.atom_at(atom, step);
            let next = vm.atom_at(atom, step + 1);
            for value in [true, false] {
                // atom changes to `value` only if some operator sets it so
                let mut clause = vec![lit(now, value), lit(next, !value)];
                clause.extend(
                    ops.iter()
                        .filter(|o| o.eff.get(atom) == Some(value))
                        .map(|o| Lit::pos(vm.op_at(o.id, step))),
                );
                b.push(clause);
            }
        }
    }
    for step in 0..l.saturating_sub(1) {
        for later in ops {
            let mut clause: Vec<Lit> = ops.iter().map(|o| Lit::pos(vm.op_at(o.id, step))).collect();
            clause.push(Lit::neg(vm.op_at(later.id, step + 1)));
            b.push(clause);
        }
    }
    if with_indicators {
        for op in ops {
            let ind = vm.op_ind(op.id).expect("indicators on");
            let mut any = vec![Lit::neg(ind)];
            for step in 0..l {
                any.push(Lit::pos(vm.op_at(op.id, step)));
                b.push(vec![Lit::pos(ind), Lit::neg(vm.op_at(op.id, step))]);
            }
            b.push(any);
        }
        for atom in 0..task.num_atoms() {
            let ind = vm.atom_ind(atom).expect("indicators on");
            let mut any = vec![Lit::neg(ind)];
            for layer in 0..=l {
                any.push(Lit::pos(vm.atom_at(atom, layer)));
                b.push(vec![Lit::pos(ind), Lit::neg(vm.atom_at(atom, layer))]);
            }
            b.push(any);
        }
    }
    let cnf = Cnf::with_clauses(vm.num_vars(), b.clauses).expect("variables within range");
    Encoding {
        cnf,
        varmap: vm,
        bound,
        task_hash: task.digest(),
    }
}

impl Encoding {
    /// Reads the operator schedule of `model` up to the first empty step.
    pub fn decode_model(&self, model: &Assignment) -> Result<Plan, EncodeError> {
        let vm = &self.varmap;
        let mut steps = Vec::new();
        let mut ended_at = None;
        for step in 0..self.bound.get() {
            let chosen: Vec<usize> = (0..vm.ops).filter(|&o| model.value(vm.op_at(o, step))).collect();
            match (chosen.as_slice(), ended_at) {
                ([], None) => ended_at = Some(step),
                ([], Some(_)) => {}
                ([op], None) => steps.push(*op),
                ([_], Some(empty)) => {
                    return Err(EncodeError::Corrupt(format!(
                        "operator at step {step} after empty step {empty}"
                    )))
                }
                (many, _) => {
                    return Err(EncodeError::Corrupt(format!(
                        "{} operators chosen at step {step}",
                        many.len()
                    )))
                }
            }
        }
        Ok(Plan::new(steps))
    }

    /// Translates a query into clauses over the encoding variables.
    /// Tautological query clauses are dropped.
    pub fn encode_query(&self, query: &Query, task: &PlanningTask) -> Result<Vec<Clause>, EncodeError> {
        query.check(task, self.bound)?;
        if query.uses_ever() && !self.varmap.has_indicators() {
            return Err(EncodeError::MissingIndicators);
        }
        let vm = &self.varmap;
        let mut out = Vec::with_capacity(query.clauses.len());
        for clause in &query.clauses {
            let lits: Vec<Lit> = clause
                .iter()
                .map(|ql| {
                    let var = match ql.var {
                        QueryVar::AtomEver(a) => vm.atom_ind(a).expect("checked"),
                        QueryVar::OpEver(o) => vm.op_ind(o).expect("checked"),
                        QueryVar::AtomAt(a, i) => vm.atom_at(a, i),
                        QueryVar::OpAt(o, i) => vm.op_at(o, i),
                    };
                    Lit::new(var, ql.positive)
                })
                .collect();
            if let Ok(c) = Clause::new(lits) {
                out.push(c);
            }
        }
        Ok(out)
    }

    pub fn write_varmap<W: Write>(&self, task: &PlanningTask, out: W) -> io::Result<()> {
        self.varmap.write_sidecar(task, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::{brute_force_count, unit_propagate, PropagationStatus};
    use crate::fixtures::running_example;
    use crate::task::{PartialState, State};
    use num_bigint::BigUint;

    fn models(cnf: &Cnf) -> Vec<Assignment> {
        // exhaustive over operator schedules is enough: everything else is
        // determined, so enumerate via DPLL-style search on all variables
        let mut out = Vec::new();
        let values = vec![None; cnf.num_vars() as usize + 1];
        collect(cnf, &values, &mut out);
        out
    }

    fn collect(cnf: &Cnf, values: &[Option<bool>], out: &mut Vec<Assignment>) {
        let assumptions: Vec<Lit> = values
            .iter()
            .enumerate()
            .filter_map(|(v, x)| x.map(|b| Lit::new(v as u32, b)))
            .collect();
        let p = unit_propagate(cnf, &assumptions);
        if p.status == PropagationStatus::Conflict {
            return;
        }
        let mut vals = values.to_vec();
        for l in &p.implied {
            vals[l.var() as usize] = Some(l.is_positive());
        }
        match (1..vals.len()).find(|&v| vals[v].is_none()) {
            None => out.push(Assignment::new(vals[1..].iter().map(|v| v.unwrap()).collect())),
            Some(v) => {
                for b in [true, false] {
                    let mut next = vals.clone();
                    next[v] = Some(b);
                    collect(cnf, &next, out);
                }
            }
        }
    }

    #[test]
    fn varmap_is_bijective() {
        let t = running_example();
        let enc = encode(&t, LengthBound::new(&t, 3).unwrap(), true);
        let vm = &enc.varmap;
        assert_eq!(vm.num_vars(), 5 * 4 + 5 * 3 + 5 + 5);
        for var in 1..=vm.num_vars() {
            assert_eq!(vm.var(vm.tag(var).unwrap()), Some(var));
        }
        assert_eq!(vm.tag(0), None);
        assert_eq!(vm.tag(vm.num_vars() + 1), None);
        let mut sidecar = Vec::new();
        enc.write_varmap(&t, &mut sidecar).unwrap();
        let text = String::from_utf8(sidecar).unwrap();
        assert!(text.starts_with("v 1 atom:awake@0\n"));
        assert!(text.contains("v 21 op:wake-up@0\n"));
        assert!(text.ends_with("atom:done\n"));
    }

    #[test]
    fn running_example_counts() {
        let t = running_example();
        for (l, expected) in [(2, 0u32), (3, 1), (4, 2)] {
            let b = LengthBound::new(&t, l).unwrap();
            for ind in [false, true] {
                let enc = encode(&t, b, ind);
                assert_eq!(brute_force_count(&enc.cnf).unwrap(), BigUint::from(expected));
            }
        }
    }

    #[test]
    fn zero_bound() {
        let mk = |goal: bool| {
            PlanningTask::new(
                vec!["a".into()],
                vec![("o".into(), PartialState::new(), PartialState::new().with(0, true))],
                State::new(vec![true]),
                PartialState::new().with(0, goal),
            )
            .unwrap()
        };
        let t = mk(true);
        let enc = encode(&t, LengthBound::new(&t, 0).unwrap(), true);
        assert_eq!(brute_force_count(&enc.cnf).unwrap(), BigUint::from(1u32));
        let m = models(&enc.cnf);
        assert_eq!(enc.decode_model(&m[0]).unwrap(), Plan::default());
        let t = mk(false);
        let enc = encode(&t, LengthBound::new(&t, 0).unwrap(), true);
        assert_eq!(brute_force_count(&enc.cnf).unwrap(), BigUint::from(0u32));
    }

    #[test]
    fn decode_running_example_models() {
        let t = running_example();
        let enc = encode(&t, LengthBound::new(&t, 4).unwrap(), true);
        let mut plans: Vec<Vec<String>> = models(&enc.cnf)
            .iter()
            .map(|m| t.plan_names(&enc.decode_model(m).unwrap()))
            .collect();
        plans.sort();
        assert_eq!(
            plans,
            vec![
                vec!["wake-up", "get-ready", "go-to-AAAI", "give-talk"],
                vec!["wake-up", "go-to-AAAI", "give-talk"],
            ]
        );
        let enc3 = encode(&t, LengthBound::new(&t, 3).unwrap(), false);
        let ms = models(&enc3.cnf);
        assert_eq!(ms.len(), 1);
        assert_eq!(
            t.plan_names(&enc3.decode_model(&ms[0]).unwrap()),
            ["wake-up", "go-to-AAAI", "give-talk"]
        );
    }

    #[test]
    fn decode_rejects_corrupt_schedules() {
        let t = running_example();
        let enc = encode(&t, LengthBound::new(&t, 3).unwrap(), false);
        let vm = &enc.varmap;
        let mut m = Assignment::all_false(vm.num_vars());
        m.set(vm.op_at(0, 0), true);
        m.set(vm.op_at(1, 0), true);
        assert!(matches!(enc.decode_model(&m), Err(EncodeError::Corrupt(_))));
        let mut m = Assignment::all_false(vm.num_vars());
        m.set(vm.op_at(0, 1), true);
        assert!(matches!(enc.decode_model(&m), Err(EncodeError::Corrupt(_))));
    }

    #[test]
    fn sleep_indicator_is_unsatisfiable() {
        let t = running_example();
        let enc = encode(&t, LengthBound::new(&t, 4).unwrap(), true);
        let sleep = enc.varmap.op_ind(t.op_id("sleep").unwrap()).unwrap();
        let c = enc.cnf.conjoin([Clause::unit(Lit::pos(sleep))]).unwrap();
        assert_eq!(brute_force_count(&c).unwrap(), BigUint::from(0u32));
        // unit resolution alone cannot refute it: sleep is excluded only
        // once the goal is chased back through the choice at step 0
        let p = unit_propagate(&enc.cnf, &[Lit::pos(sleep)]);
        assert_eq!(p.status, PropagationStatus::Ok);
        let p = unit_propagate(
            &enc.cnf,
            &[
                Lit::pos(sleep),
                Lit::pos(enc.varmap.op_at(t.op_id("sleep").unwrap(), 0)),
            ],
        );
        assert_eq!(p.status, PropagationStatus::Conflict);
    }

    #[test]
    fn query_encoding() {
        let t = running_example();
        let enc = encode(&t, LengthBound::new(&t, 4).unwrap(), true);
        let vm = &enc.varmap;
        let id = |n| t.op_id(n).unwrap();
        let q = Query::parse("op:get-ready", &t).unwrap();
        assert_eq!(
            enc.encode_query(&q, &t).unwrap(),
            vec![Clause::unit(Lit::pos(vm.op_ind(id("get-ready")).unwrap()))]
        );
        let q = Query::parse("op:wake-up | op:sleep", &t).unwrap();
        assert_eq!(
            enc.encode_query(&q, &t).unwrap(),
            vec![Clause::new(vec![
                Lit::pos(vm.op_ind(id("wake-up")).unwrap()),
                Lit::pos(vm.op_ind(id("sleep")).unwrap())
            ])
            .unwrap()]
        );
        let q = Query::parse("op:give-talk@2", &t).unwrap();
        assert_eq!(
            enc.encode_query(&q, &t).unwrap(),
            vec![Clause::unit(Lit::pos(vm.op_at(id("give-talk"), 2)))]
        );
        let q = Query::parse("op:give-talk@4", &t).unwrap();
        assert!(matches!(enc.encode_query(&q, &t), Err(EncodeError::Query(_))));
        let plain = encode(&t, LengthBound::new(&t, 4).unwrap(), false);
        let q = Query::parse("op:sleep", &t).unwrap();
        assert!(matches!(
            plain.encode_query(&q, &t),
            Err(EncodeError::MissingIndicators)
        ));
        let q = Query::parse("op:sleep@0 | !op:sleep@0", &t).unwrap();
        assert!(plain.encode_query(&q, &t).unwrap().is_empty());
    }
}
