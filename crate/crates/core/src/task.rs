//! Grounded STRIPS tasks: data model, execution semantics and plan validation.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Errors raised while building or executing a planning task.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaskError {
    #[error("unknown atom id {0}")]
    UnknownAtom(usize),
    #[error("unknown operator id {0}")]
    UnknownOperator(usize),
    #[error("operator `{0}` is not applicable in the given state")]
    NotApplicable(String),
    #[error("state has {found} values but the task has {expected} atoms")]
    StateSize { expected: usize, found: usize },
    #[error("length bound {bound} exceeds the cap {cap}")]
    BoundOverCap { bound: usize, cap: usize },
    #[error("{0}")]
    Load(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub id: usize,
    pub name: String,
}

/// Partial assignment of atoms, ordered by atom id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct PartialState(BTreeMap<usize, bool>);

impl PartialState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, atom: usize, value: bool) -> Self {
        self.0.insert(atom, value);
        self
    }

    pub fn insert(&mut self, atom: usize, value: bool) {
        self.0.insert(atom, value);
    }

    pub fn get(&self, atom: usize) -> Option<bool> {
        self.0.get(&atom).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, bool)> + '_ {
        self.0.iter().map(|(&a, &v)| (a, v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(usize, bool)> for PartialState {
    fn from_iter<I: IntoIterator<Item = (usize, bool)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Total assignment of atoms, indexed by atom id.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct State(Vec<bool>);

impl State {
    pub fn new(values: Vec<bool>) -> Self {
        Self(values)
    }

    pub fn get(&self, atom: usize) -> bool {
        self.0[atom]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[bool] {
        &self.0
    }

    /// `s ⊨ p`: every atom assigned by `p` has the same value in `s`.
    pub fn satisfies(&self, partial: &PartialState) -> bool {
        partial.iter().all(|(a, v)| self.0.get(a).is_some_and(|&s| s == v))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Operator {
    pub id: usize,
    pub name: String,
    pub pre: PartialState,
    pub eff: PartialState,
}

/// A sequence of operator ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Plan {
    pub steps: Vec<usize>,
}

impl Plan {
    pub fn new(steps: Vec<usize>) -> Self {
        Self { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn contains(&self, op: usize) -> bool {
        self.steps.contains(&op)
    }
}

/// Upper bound on plan length.
///
/// Bounds are capped polynomially in the task size (`10 · (|A| + |O|)` unless
/// another cap is given) so that counting stays in the polynomially bounded
/// regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LengthBound(usize);

impl LengthBound {
    pub const DEFAULT_CAP_FACTOR: usize = 10;

    pub fn new(task: &PlanningTask, bound: usize) -> Result<Self, TaskError> {
        Self::with_cap(bound, task.default_length_cap())
    }

    pub fn with_cap(bound: usize, cap: usize) -> Result<Self, TaskError> {
        if bound > cap {
            return Err(TaskError::BoundOverCap { bound, cap });
        }
        Ok(Self(bound))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl fmt::Display for LengthBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A grounded planning task `⟨A, O, I, G⟩`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanningTask {
    atoms: Vec<Atom>,
    operators: Vec<Operator>,
    init: State,
    goal: PartialState,
    atom_index: HashMap<String, usize>,
    op_index: HashMap<String, usize>,
}

impl PlanningTask {
    /// Builds a task from names and id-based partial states.
    pub fn new(
        atoms: Vec<String>,
        operators: Vec<(String, PartialState, PartialState)>,
        init: State,
        goal: PartialState,
    ) -> Result<Self, TaskError> {
        let mut atom_index = HashMap::new();
        let atoms: Vec<Atom> = atoms
            .into_iter()
            .enumerate()
            .map(|(id, name)| Atom { id, name })
            .collect();
        for a in &atoms {
            if atom_index.insert(a.name.clone(), a.id).is_some() {
                return Err(TaskError::Load(format!(
                    "atoms[{}]: duplicate atom name `{}`",
                    a.id, a.name
                )));
            }
        }
        let n = atoms.len();
        let check = |p: &PartialState| p.iter().find(|&(a, _)| a >= n).map(|(a, _)| a);
        let mut op_index = HashMap::new();
        let mut ops = Vec::with_capacity(operators.len());
        for (id, (name, pre, eff)) in operators.into_iter().enumerate() {
            if let Some(a) = check(&pre).or_else(|| check(&eff)) {
                return Err(TaskError::UnknownAtom(a));
            }
            if op_index.insert(name.clone(), id).is_some() {
                return Err(TaskError::Load(format!(
                    "operators[{id}]: duplicate operator name `{name}`"
                )));
            }
            ops.push(Operator { id, name, pre, eff });
        }
        if init.len() != n {
            return Err(TaskError::StateSize {
                expected: n,
                found: init.len(),
            });
        }
        if let Some(a) = check(&goal) {
            return Err(TaskError::UnknownAtom(a));
        }
        Ok(Self {
            atoms,
            operators: ops,
            init,
            goal,
            atom_index,
            op_index,
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn operators(&self) -> &[Operator] {
        &self.operators
    }

    pub fn init(&self) -> &State {
        &self.init
    }

    pub fn goal(&self) -> &PartialState {
        &self.goal
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn num_operators(&self) -> usize {
        self.operators.len()
    }

    pub fn atom_id(&self, name: &str) -> Option<usize> {
        self.atom_index.get(name).copied()
    }

    pub fn op_id(&self, name: &str) -> Option<usize> {
        self.op_index.get(name).copied()
    }

    pub fn operator(&self, id: usize) -> Result<&Operator, TaskError> {
        self.operators.get(id).ok_or(TaskError::UnknownOperator(id))
    }

    pub fn op_name(&self, id: usize) -> &str {
        &self.operators[id].name
    }

    pub fn atom_name(&self, id: usize) -> &str {
        &self.atoms[id].name
    }

    pub fn default_length_cap(&self) -> usize {
        LengthBound::DEFAULT_CAP_FACTOR * (self.atoms.len() + self.operators.len())
    }

    pub fn is_goal(&self, state: &State) -> bool {
        state.satisfies(&self.goal)
    }

    /// Names of the plan's operators, in order.
    pub fn plan_names(&self, plan: &Plan) -> Vec<String> {
        plan.steps.iter().map(|&o| self.operators[o].name.clone()).collect()
    }

    fn check_state(&self, s: &State) -> Result<(), TaskError> {
        if s.len() != self.atoms.len() {
            return Err(TaskError::StateSize {
                expected: self.atoms.len(),
                found: s.len(),
            });
        }
        Ok(())
    }

    pub fn applicable(&self, s: &State, op: usize) -> Result<bool, TaskError> {
        self.check_state(s)?;
        Ok(s.satisfies(&self.operator(op)?.pre))
    }

    pub fn apply(&self, s: &State, op: usize) -> Result<State, TaskError> {
        if !self.applicable(s, op)? {
            return Err(TaskError::NotApplicable(self.operators[op].name.clone()));
        }
        let mut values = s.0.clone();
        for (a, v) in self.operators[op].eff.iter() {
            values[a] = v;
        }
        Ok(State(values))
    }

    /// The states `s_0, …, s_n` generated by `plan`, or `None` as soon as a
    /// step is not applicable.
    pub fn trace(&self, plan: &Plan) -> Result<Option<Vec<State>>, TaskError> {
        let mut states = vec![self.init.clone()];
        for &op in &plan.steps {
            let current = states.last().expect("non-empty trace");
            if !self.applicable(current, op)? {
                return Ok(None);
            }
            let next = self.apply(current, op)?;
            states.push(next);
        }
        Ok(Some(states))
    }

    pub fn validate_plan(&self, plan: &Plan, bound: LengthBound) -> Result<bool, TaskError> {
        for &op in &plan.steps {
            self.operator(op)?;
        }
        if plan.len() > bound.get() {
            return Ok(false);
        }
        Ok(match self.trace(plan)? {
            Some(states) => self.is_goal(states.last().expect("non-empty trace")),
            None => false,
        })
    }

    /// Stable digest of the canonical JSON serialization.
    pub fn digest(&self) -> String {
        let json = self.to_json();
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("task serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("task serializes")
    }

    fn to_file(&self) -> TaskFile {
        let named = |p: &PartialState| -> BTreeMap<String, bool> {
            p.iter().map(|(a, v)| (self.atoms[a].name.clone(), v)).collect()
        };
        TaskFile {
            atoms: self.atoms.iter().map(|a| a.name.clone()).collect(),
            operators: self
                .operators
                .iter()
                .map(|o| OperatorFile {
                    name: o.name.clone(),
                    pre: named(&o.pre),
                    eff: named(&o.eff),
                })
                .collect(),
            init: self
                .atoms
                .iter()
                .map(|a| (a.name.clone(), self.init.get(a.id)))
                .collect(),
            goal: named(&self.goal),
        }
    }

    /// Parses the canonical JSON task format.
    pub fn from_json(text: &str) -> Result<Self, TaskError> {
        let file: TaskFile =
            serde_json::from_str(text).map_err(|e| TaskError::Load(format!("invalid task JSON: {e}")))?;
        file.into_task()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorFile {
    name: String,
    #[serde(default)]
    pre: BTreeMap<String, bool>,
    #[serde(default)]
    eff: BTreeMap<String, bool>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskFile {
    atoms: Vec<String>,
    operators: Vec<OperatorFile>,
    init: BTreeMap<String, bool>,
    goal: BTreeMap<String, bool>,
}

impl TaskFile {
    fn into_task(self) -> Result<PlanningTask, TaskError> {
        let mut index = HashMap::new();
        for (i, name) in self.atoms.iter().enumerate() {
            if let Some(prev) = index.insert(name.as_str(), i) {
                return Err(TaskError::Load(format!(
                    "atoms[{i}]: duplicate atom name `{name}` (first at atoms[{prev}])"
                )));
            }
        }
        let resolve = |map: &BTreeMap<String, bool>, at: &str| -> Result<PartialState, TaskError> {
            map.iter()
                .map(|(name, &v)| {
                    index
                        .get(name.as_str())
                        .map(|&a| (a, v))
                        .ok_or_else(|| TaskError::Load(format!("{at}: unknown atom `{name}`")))
                })
                .collect()
        };
        let mut seen = HashMap::new();
        let mut operators = Vec::with_capacity(self.operators.len());
        for (i, op) in self.operators.iter().enumerate() {
            if let Some(prev) = seen.insert(op.name.as_str(), i) {
                return Err(TaskError::Load(format!(
                    "operators[{i}]: duplicate operator name `{}` (first at operators[{prev}])",
                    op.name
                )));
            }
            let pre = resolve(&op.pre, &format!("operators[{i}] `{}`.pre", op.name))?;
            let eff = resolve(&op.eff, &format!("operators[{i}] `{}`.eff", op.name))?;
            operators.push((op.name.clone(), pre, eff));
        }
        let init = resolve(&self.init, "init")?;
        if let Some(missing) = self.atoms.iter().find(|a| !self.init.contains_key(*a)) {
            return Err(TaskError::Load(format!(
                "init: not total, atom `{missing}` (atoms[{}]) has no value",
                index[missing.as_str()]
            )));
        }
        let init = State((0..self.atoms.len()).map(|a| init.get(a).unwrap_or(false)).collect());
        let goal = resolve(&self.goal, "goal")?;
        PlanningTask::new(self.atoms, operators, init, goal)
    }
}
