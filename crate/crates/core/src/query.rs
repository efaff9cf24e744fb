//! CNF queries over plans and their textual syntax.
//!
//! The text form separates clauses with `;` and literals with `|`. A literal
//! is `op:NAME`, `atom:NAME`, `op:NAME@i` or `atom:NAME@i`, optionally
//! negated with a leading `!`:
//!
//! ```text
//! op:wake-up | op:sleep ; !op:get-ready
//! ```

use std::fmt;

use thiserror::Error;

use crate::task::{LengthBound, Plan, PlanningTask, TaskError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("query literal `{0}`: expected `op:NAME` or `atom:NAME`, optionally suffixed by `@STEP`")]
    Syntax(String),
    #[error("query literal `{literal}`: unknown {kind} `{name}`")]
    UnknownName {
        literal: String,
        kind: &'static str,
        name: String,
    },
    #[error("time index {index} of {what} is out of range for bound {bound}")]
    IndexOutOfRange { what: String, index: usize, bound: usize },
    #[error("unknown atom id {0}")]
    UnknownAtom(usize),
    #[error("unknown operator id {0}")]
    UnknownOperator(usize),
    #[error(transparent)]
    Task(#[from] TaskError),
}

/// What a query literal talks about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QueryVar {
    /// The atom holds in some generated state.
    AtomEver(usize),
    /// The operator occurs somewhere in the plan.
    OpEver(usize),
    /// The atom holds at state layer `i` (`0 ≤ i ≤ ℓ`).
    AtomAt(usize, usize),
    /// The operator is applied at step `i` (`0 ≤ i < ℓ`).
    OpAt(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QueryLit {
    pub var: QueryVar,
    pub positive: bool,
}

impl QueryLit {
    pub fn pos(var: QueryVar) -> Self {
        Self { var, positive: true }
    }

    pub fn neg(var: QueryVar) -> Self {
        Self { var, positive: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryKind {
    /// Every clause is a single literal; answered by conditioning.
    Term,
    /// Needs recompilation of the conjoined formula.
    GeneralCnf,
}

/// A query in conjunctive normal form.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Query {
    pub clauses: Vec<Vec<QueryLit>>,
}

impl Query {
    pub fn new(clauses: Vec<Vec<QueryLit>>) -> Self {
        Self { clauses }
    }

    /// Query consisting of one unit clause per literal.
    pub fn term(lits: impl IntoIterator<Item = QueryLit>) -> Self {
        Self {
            clauses: lits.into_iter().map(|l| vec![l]).collect(),
        }
    }

    pub fn and(mut self, other: &Query) -> Self {
        self.clauses.extend(other.clauses.iter().cloned());
        self
    }

    pub fn classify(&self) -> QueryKind {
        if self.clauses.iter().all(|c| c.len() == 1) {
            QueryKind::Term
        } else {
            QueryKind::GeneralCnf
        }
    }

    pub fn uses_ever(&self) -> bool {
        self.lits()
            .any(|l| matches!(l.var, QueryVar::AtomEver(_) | QueryVar::OpEver(_)))
    }

    pub fn lits(&self) -> impl Iterator<Item = &QueryLit> {
        self.clauses.iter().flatten()
    }

    /// Checks that ids exist and time indices are within `bound`.
    pub fn check(&self, task: &PlanningTask, bound: LengthBound) -> Result<(), QueryError> {
        let l = bound.get();
        for lit in self.lits() {
            match lit.var {
                QueryVar::AtomEver(a) => check_atom(task, a)?,
                QueryVar::OpEver(o) => check_op(task, o)?,
                QueryVar::AtomAt(a, i) => {
                    check_atom(task, a)?;
                    if i > l {
                        return Err(QueryError::IndexOutOfRange {
                            what: format!("atom `{}`", task.atom_name(a)),
                            index: i,
                            bound: l,
                        });
                    }
                }
                QueryVar::OpAt(o, i) => {
                    check_op(task, o)?;
                    if i >= l {
                        return Err(QueryError::IndexOutOfRange {
                            what: format!("operator `{}`", task.op_name(o)),
                            index: i,
                            bound: l,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn parse(text: &str, task: &PlanningTask) -> Result<Self, QueryError> {
        let mut clauses = Vec::new();
        for clause_text in text.split(';') {
            if clause_text.trim().is_empty() {
                continue;
            }
            let clause = clause_text
                .split('|')
                .map(|lit| parse_lit(lit.trim(), task))
                .collect::<Result<Vec<_>, _>>()?;
            clauses.push(clause);
        }
        Ok(Self { clauses })
    }

    pub fn display<'a>(&'a self, task: &'a PlanningTask) -> QueryDisplay<'a> {
        QueryDisplay { query: self, task }
    }
}

fn check_atom(task: &PlanningTask, a: usize) -> Result<(), QueryError> {
    if a < task.num_atoms() {
        Ok(())
    } else {
        Err(QueryError::UnknownAtom(a))
    }
}

fn check_op(task: &PlanningTask, o: usize) -> Result<(), QueryError> {
    if o < task.num_operators() {
        Ok(())
    } else {
        Err(QueryError::UnknownOperator(o))
    }
}

fn parse_lit(text: &str, task: &PlanningTask) -> Result<QueryLit, QueryError> {
    let syntax = || QueryError::Syntax(text.to_string());
    let (positive, body) = match text.strip_prefix('!') {
        Some(rest) => (false, rest.trim_start()),
        None => (true, text),
    };
    let (kind, rest) = body.split_once(':').ok_or_else(syntax)?;
    let (name, step) = match rest.rsplit_once('@') {
        Some((name, idx)) if !idx.is_empty() && idx.bytes().all(|b| b.is_ascii_digit()) => {
            (name, Some(idx.parse::<usize>().map_err(|_| syntax())?))
        }
        _ => (rest, None),
    };
    if name.is_empty() {
        return Err(syntax());
    }
    let unknown = |kind: &'static str| QueryError::UnknownName {
        literal: text.to_string(),
        kind,
        name: name.to_string(),
    };
    let var = match kind.trim() {
        "op" => {
            let o = task.op_id(name).ok_or_else(|| unknown("operator"))?;
            step.map_or(QueryVar::OpEver(o), |i| QueryVar::OpAt(o, i))
        }
        "atom" => {
            let a = task.atom_id(name).ok_or_else(|| unknown("atom"))?;
            step.map_or(QueryVar::AtomEver(a), |i| QueryVar::AtomAt(a, i))
        }
        _ => return Err(syntax()),
    };
    Ok(QueryLit { var, positive })
}

pub struct QueryDisplay<'a> {
    query: &'a Query,
    task: &'a PlanningTask,
}

impl fmt::Display for QueryDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (ci, clause) in self.query.clauses.iter().enumerate() {
            if ci > 0 {
                f.write_str(" ; ")?;
            }
            for (li, lit) in clause.iter().enumerate() {
                if li > 0 {
                    f.write_str(" | ")?;
                }
                if !lit.positive {
                    f.write_str("!")?;
                }
                match lit.var {
                    QueryVar::AtomEver(a) => write!(f, "atom:{}", self.task.atom_name(a))?,
                    QueryVar::OpEver(o) => write!(f, "op:{}", self.task.op_name(o))?,
                    QueryVar::AtomAt(a, i) => write!(f, "atom:{}@{i}", self.task.atom_name(a))?,
                    QueryVar::OpAt(o, i) => write!(f, "op:{}@{i}", self.task.op_name(o))?,
                }
            }
        }
        Ok(())
    }
}

/// Evaluates `query` on a plan.
///
/// States past the end of the plan repeat the final state, matching the
/// padded steps of the sequential encoding; operators are absent there.
pub fn plan_satisfies_query(
    task: &PlanningTask,
    plan: &Plan,
    query: &Query,
    bound: LengthBound,
) -> Result<bool, QueryError> {
    query.check(task, bound)?;
    let states = task
        .trace(plan)?
        .ok_or_else(|| TaskError::NotApplicable(format!("plan step in {:?}", plan.steps)))?;
    let holds = |var: QueryVar| match var {
        QueryVar::AtomEver(a) => states.iter().any(|s| s.get(a)),
        QueryVar::OpEver(o) => plan.contains(o),
        QueryVar::AtomAt(a, i) => states[i.min(states.len() - 1)].get(a),
        QueryVar::OpAt(o, i) => plan.steps.get(i) == Some(&o),
    };
    Ok(query
        .clauses
        .iter()
        .all(|c| c.iter().any(|l| holds(l.var) == l.positive)))
}
