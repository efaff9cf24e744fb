//! Propositional CNF: literals, canonical clauses, DIMACS I/O, unit
//! propagation and a reference model counter.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{self, BufRead, Write};

use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CnfError {
    #[error("variable 0 is not a valid literal")]
    ZeroVariable,
    #[error("tautological clause: contains both {0} and its negation")]
    Tautology(u32),
    #[error("literal {lit} exceeds the declared {num_vars} variables")]
    VarOutOfRange { lit: i64, num_vars: u32 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("refusing brute-force count over {num_vars} variables (cap {cap})")]
    TooManyVars { num_vars: u32, cap: u32 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A literal: a variable (≥ 1) with a polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit {
    var: u32,
    positive: bool,
}

impl Lit {
    pub fn new(var: u32, positive: bool) -> Self {
        assert!(var >= 1, "literal variable must be at least 1");
        Self { var, positive }
    }

    pub fn pos(var: u32) -> Self {
        Self::new(var, true)
    }

    pub fn neg(var: u32) -> Self {
        Self::new(var, false)
    }

    pub fn from_dimacs(value: i64) -> Result<Self, CnfError> {
        if value == 0 {
            return Err(CnfError::ZeroVariable);
        }
        let var = u32::try_from(value.unsigned_abs()).map_err(|_| CnfError::VarOutOfRange {
            lit: value,
            num_vars: u32::MAX,
        })?;
        Ok(Self::new(var, value > 0))
    }

    pub fn to_dimacs(self) -> i64 {
        if self.positive {
            self.var as i64
        } else {
            -(self.var as i64)
        }
    }

    pub fn var(self) -> u32 {
        self.var
    }

    pub fn is_positive(self) -> bool {
        self.positive
    }

    /// True under `value` assigned to this literal's variable.
    pub fn holds(self, value: bool) -> bool {
        value == self.positive
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;

    fn not(self) -> Lit {
        Lit {
            var: self.var,
            positive: !self.positive,
        }
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// A disjunction of literals, kept sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Clause(Vec<Lit>);

impl Clause {
    /// Canonicalizes `lits`; rejects clauses containing `v` and `¬v`.
    pub fn new(mut lits: Vec<Lit>) -> Result<Self, CnfError> {
        lits.sort_unstable();
        lits.dedup();
        if let Some(w) = lits.windows(2).find(|w| w[0].var == w[1].var) {
            return Err(CnfError::Tautology(w[0].var));
        }
        Ok(Self(lits))
    }

    pub fn unit(lit: Lit) -> Self {
        Self(vec![lit])
    }

    pub fn lits(&self) -> &[Lit] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_var(&self) -> u32 {
        self.0.iter().map(|l| l.var).max().unwrap_or(0)
    }
}

/// A total assignment over variables `1..=len`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment(Vec<bool>);

impl Assignment {
    pub fn new(values: Vec<bool>) -> Self {
        Self(values)
    }

    pub fn all_false(num_vars: u32) -> Self {
        Self(vec![false; num_vars as usize])
    }

    pub fn value(&self, var: u32) -> bool {
        self.0[var as usize - 1]
    }

    pub fn set(&mut self, var: u32, value: bool) {
        self.0[var as usize - 1] = value;
    }

    pub fn satisfies(&self, lit: Lit) -> bool {
        lit.holds(self.value(lit.var))
    }

    pub fn num_vars(&self) -> u32 {
        self.0.len() as u32
    }

    pub fn values(&self) -> &[bool] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cnf {
    num_vars: u32,
    clauses: Vec<Clause>,
}

impl Cnf {
    pub fn new(num_vars: u32) -> Self {
        Self {
            num_vars,
            clauses: Vec::new(),
        }
    }

    pub fn with_clauses(num_vars: u32, clauses: Vec<Clause>) -> Result<Self, CnfError> {
        let mut cnf = Self::new(num_vars);
        for c in clauses {
            cnf.add_clause(c)?;
        }
        Ok(cnf)
    }

    /// Builds from DIMACS-style integer clauses.
    pub fn from_ints(num_vars: u32, clauses: &[&[i64]]) -> Result<Self, CnfError> {
        let clauses = clauses
            .iter()
            .map(|c| Clause::new(c.iter().map(|&l| Lit::from_dimacs(l)).collect::<Result<_, _>>()?))
            .collect::<Result<Vec<_>, _>>()?;
        Self::with_clauses(num_vars, clauses)
    }

    pub fn add_clause(&mut self, clause: Clause) -> Result<(), CnfError> {
        if clause.max_var() > self.num_vars {
            let lit = clause
                .lits()
                .iter()
                .find(|l| l.var > self.num_vars)
                .expect("max var out of range");
            return Err(CnfError::VarOutOfRange {
                lit: lit.to_dimacs(),
                num_vars: self.num_vars,
            });
        }
        self.clauses.push(clause);
        Ok(())
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn is_satisfied_by(&self, assignment: &Assignment) -> bool {
        self.clauses
            .iter()
            .all(|c| c.lits().iter().any(|&l| assignment.satisfies(l)))
    }

    /// Conjunction of `self` and `clauses` over the same variables.
    pub fn conjoin(&self, clauses: impl IntoIterator<Item = Clause>) -> Result<Cnf, CnfError> {
        let mut out = self.clone();
        for c in clauses {
            out.add_clause(c)?;
        }
        Ok(out)
    }

    pub fn write_dimacs<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "p cnf {} {}", self.num_vars, self.clauses.len())?;
        for c in &self.clauses {
            for l in c.lits() {
                write!(out, "{} ", l.to_dimacs())?;
            }
            writeln!(out, "0")?;
        }
        Ok(())
    }

    pub fn to_dimacs_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_dimacs(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    /// Reads DIMACS CNF. Comment lines (`c`) are skipped, clauses may span
    /// lines, and every literal must lie within the declared variables.
    pub fn read_dimacs<R: BufRead>(input: R) -> Result<Self, CnfError> {
        let mut header: Option<(u32, usize)> = None;
        let mut cnf = Cnf::new(0);
        let mut pending: Vec<Lit> = Vec::new();
        let mut last_line = 0;
        for (idx, line) in input.lines().enumerate() {
            let line_no = idx + 1;
            last_line = line_no;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('c') || trimmed.starts_with('%') {
                continue;
            }
            let err = |message: String| CnfError::Parse { line: line_no, message };
            if trimmed.starts_with('p') {
                if header.is_some() {
                    return Err(err("duplicate problem line".into()));
                }
                let fields: Vec<&str> = trimmed.split_whitespace().collect();
                if fields.len() != 4 || fields[0] != "p" || fields[1] != "cnf" {
                    return Err(err(format!("malformed header `{trimmed}`")));
                }
                let vars = fields[2]
                    .parse::<u32>()
                    .map_err(|_| err(format!("bad variable count `{}`", fields[2])))?;
                let count = fields[3]
                    .parse::<usize>()
                    .map_err(|_| err(format!("bad clause count `{}`", fields[3])))?;
                header = Some((vars, count));
                cnf.num_vars = vars;
                continue;
            }
            let Some((vars, _)) = header else {
                return Err(err("clause before the `p cnf` header".into()));
            };
            for token in trimmed.split_whitespace() {
                let value = token
                    .parse::<i64>()
                    .map_err(|_| err(format!("bad literal `{token}`")))?;
                if value == 0 {
                    let clause = Clause::new(std::mem::take(&mut pending)).map_err(|e| err(e.to_string()))?;
                    cnf.clauses.push(clause);
                } else {
                    if value.unsigned_abs() > vars as u64 {
                        return Err(err(format!("literal {value} exceeds the declared {vars} variables")));
                    }
                    pending.push(Lit::from_dimacs(value).map_err(|e| err(e.to_string()))?);
                }
            }
        }
        let Some((_, count)) = header else {
            return Err(CnfError::Parse {
                line: last_line,
                message: "missing `p cnf` header".into(),
            });
        };
        if !pending.is_empty() {
            return Err(CnfError::Parse {
                line: last_line,
                message: "last clause is not terminated by 0".into(),
            });
        }
        if cnf.clauses.len() != count {
            return Err(CnfError::Parse {
                line: last_line,
                message: format!("header declares {count} clauses, found {}", cnf.clauses.len()),
            });
        }
        Ok(cnf)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagationStatus {
    Ok,
    Conflict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Propagation {
    pub status: PropagationStatus,
    /// Assumptions plus every literal derived by unit resolution.
    pub implied: BTreeSet<Lit>,
    /// Clauses neither satisfied nor empty, with falsified literals removed.
    pub residual: Cnf,
}

/// Unit resolution to a fixpoint under `assumptions`. Contradictory
/// assumptions yield a conflict rather than an error.
pub fn unit_propagate(cnf: &Cnf, assumptions: &[Lit]) -> Propagation {
    let n = cnf.num_vars as usize;
    let mut value: Vec<Option<bool>> = vec![None; n + 1];
    let mut implied = BTreeSet::new();
    let conflict = |implied| Propagation {
        status: PropagationStatus::Conflict,
        implied,
        residual: Cnf::new(cnf.num_vars),
    };
    for &a in assumptions {
        match value.get(a.var as usize).copied().flatten() {
            Some(v) if v != a.positive => return conflict(implied),
            _ => {
                if (a.var as usize) < value.len() {
                    value[a.var as usize] = Some(a.positive);
                }
                implied.insert(a);
            }
        }
    }
    loop {
        let mut changed = false;
        for clause in &cnf.clauses {
            let mut unassigned = None;
            let mut open = 0;
            let mut satisfied = false;
            for &l in clause.lits() {
                match value[l.var as usize] {
                    Some(v) if l.holds(v) => {
                        satisfied = true;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        open += 1;
                        unassigned = Some(l);
                    }
                }
            }
            if satisfied {
                continue;
            }
            match (open, unassigned) {
                (0, _) => return conflict(implied),
                (1, Some(l)) => {
                    value[l.var as usize] = Some(l.positive);
                    implied.insert(l);
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }
    let mut residual = Cnf::new(cnf.num_vars);
    for clause in &cnf.clauses {
        let lits = clause.lits();
        if lits.iter().any(|l| value[l.var as usize].is_some_and(|v| l.holds(v))) {
            continue;
        }
        let rest: Vec<Lit> = lits
            .iter()
            .copied()
            .filter(|l| value[l.var as usize].is_none())
            .collect();
        residual.clauses.push(Clause(rest));
    }
    Propagation {
        status: PropagationStatus::Ok,
        implied,
        residual,
    }
}

/// Largest formula accepted by [`truth_table_count`].
pub const TRUTH_TABLE_MAX_VARS: u32 = 30;
/// Largest formula accepted by [`brute_force_count`].
pub const BRUTE_FORCE_MAX_VARS: u32 = 64;

/// Model count by evaluating every one of the `2^n` assignments.
pub fn truth_table_count(cnf: &Cnf) -> Result<BigUint, CnfError> {
    if cnf.num_vars > TRUTH_TABLE_MAX_VARS {
        return Err(CnfError::TooManyVars {
            num_vars: cnf.num_vars,
            cap: TRUTH_TABLE_MAX_VARS,
        });
    }
    let n = cnf.num_vars;
    let mut count = 0u64;
    for bits in 0u64..(1u64 << n) {
        let ok = cnf
            .clauses
            .iter()
            .all(|c| c.lits().iter().any(|l| l.holds(bits >> (l.var - 1) & 1 == 1)));
        count += ok as u64;
    }
    Ok(BigUint::from(count))
}

/// Exact model count by plain DPLL with unit propagation, without component
/// decomposition or caching.
pub fn brute_force_count(cnf: &Cnf) -> Result<BigUint, CnfError> {
    if cnf.num_vars > BRUTE_FORCE_MAX_VARS {
        return Err(CnfError::TooManyVars {
            num_vars: cnf.num_vars,
            cap: BRUTE_FORCE_MAX_VARS,
        });
    }
    let mut values = vec![None; cnf.num_vars as usize + 1];
    Ok(dpll_count(cnf, &mut values))
}

fn dpll_count(cnf: &Cnf, values: &mut Vec<Option<bool>>) -> BigUint {
    let mut trail = Vec::new();
    let result = loop {
        let mut unit = None;
        let mut branch_var = None;
        let mut all_satisfied = true;
        let mut conflict = false;
        for clause in cnf.clauses() {
            let mut open = 0;
            let mut last = None;
            let mut satisfied = false;
            for &l in clause.lits() {
                match values[l.var as usize] {
                    Some(v) if l.holds(v) => {
                        satisfied = true;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        open += 1;
                        last = Some(l);
                    }
                }
            }
            if satisfied {
                continue;
            }
            all_satisfied = false;
            match open {
                0 => {
                    conflict = true;
                    break;
                }
                1 => {
                    unit = last;
                    break;
                }
                _ => {
                    branch_var.get_or_insert(last.expect("open literal").var);
                }
            }
        }
        if conflict {
            break BigUint::zero();
        }
        if let Some(l) = unit {
            values[l.var as usize] = Some(l.positive);
            trail.push(l.var);
            continue;
        }
        let free = values[1..].iter().filter(|v| v.is_none()).count();
        if all_satisfied {
            break BigUint::one() << free;
        }
        let var = branch_var.expect("unsatisfied clause has an open literal") as usize;
        let mut total = BigUint::zero();
        for v in [true, false] {
            values[var] = Some(v);
            total += dpll_count(cnf, values);
        }
        values[var] = None;
        break total;
    };
    for v in trail {
        values[v as usize] = None;
    }
    result
}
