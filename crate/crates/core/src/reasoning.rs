//! Queries over a compiled plan space: counting, existence, brave and
//! cautious operators, probabilities, facets and significance.
//!
//! A [`PlanSpace`] compiles the encoding once. A [`View`] restricts it by a
//! list of [`Commitment`]s, which become literals the compiled form is
//! conditioned on, so views are cheap and share the DAG.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::cnf::{Clause, Lit};
use crate::ddnnf::{compile, CompileOptions, Ddnnf, DdnnfError};
use crate::encoder::{encode, EncodeError, Encoding};
use crate::query::{Query, QueryError, QueryKind};
use crate::task::{LengthBound, Plan, PlanningTask};

#[derive(Debug, Error)]
pub enum ReasoningError {
    #[error(transparent)]
    Compile(#[from] DdnnfError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("significance is undefined: the plan space has no facets")]
    NoFacets,
    #[error("the plan space contains no plans")]
    NoPlans,
    #[error("inconsistent commitment: {0}")]
    Inconsistent(String),
}

impl ReasoningError {
    /// True when compilation ran out of its node or time budget.
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            ReasoningError::Compile(DdnnfError::NodeBudget { .. } | DdnnfError::TimeBudget { .. })
        )
    }
}

/// An exact probability `num/den` in lowest terms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Probability(Ratio<BigUint>);

impl Probability {
    pub fn new(num: BigUint, den: BigUint) -> Self {
        Self(Ratio::new(num, den))
    }

    pub fn zero() -> Self {
        Self(Ratio::zero())
    }

    pub fn num(&self) -> &BigUint {
        self.0.numer()
    }

    pub fn den(&self) -> &BigUint {
        self.0.denom()
    }

    /// Exact comparison with `n/d` by cross-multiplication.
    pub fn equals(&self, n: &BigUint, d: &BigUint) -> bool {
        !d.is_zero() && self.num() * d == n * self.den()
    }

    /// Rounded value for display only.
    pub fn to_f64(&self) -> f64 {
        let n = self.num().to_f64().unwrap_or(f64::NAN);
        let d = self.den().to_f64().unwrap_or(f64::NAN);
        n / d
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num(), self.den())
    }
}

impl Serialize for Probability {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Probability", 2)?;
        st.serialize_field("num", &self.num().to_string())?;
        st.serialize_field("den", &self.den().to_string())?;
        st.end()
    }
}

/// Serializes a big integer as a decimal string.
pub fn serialize_biguint<S: Serializer>(n: &BigUint, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&n.to_string())
}

/// A restriction of the plan space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Commitment {
    /// The operator occurs somewhere in the plan.
    EnforceOp(usize),
    /// The operator does not occur in the plan.
    ForbidOp(usize),
    /// The operator is applied at the given step.
    PrefixStep { step: usize, op: usize },
}

impl Commitment {
    pub fn op(self) -> usize {
        match self {
            Commitment::EnforceOp(o) | Commitment::ForbidOp(o) | Commitment::PrefixStep { op: o, .. } => o,
        }
    }

    pub fn named(self, task: &PlanningTask) -> NamedCommitment {
        let (kind, step) = match self {
            Commitment::EnforceOp(_) => (CommitmentKind::Enforce, None),
            Commitment::ForbidOp(_) => (CommitmentKind::Forbid, None),
            Commitment::PrefixStep { step, .. } => (CommitmentKind::Prefix, Some(step)),
        };
        NamedCommitment {
            kind,
            op: task.op_name(self.op()).to_string(),
            step,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommitmentKind {
    Enforce,
    Forbid,
    Prefix,
}

/// A commitment with the operator given by name, as exchanged with users.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NamedCommitment {
    pub kind: CommitmentKind,
    pub op: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
}

impl NamedCommitment {
    pub fn resolve(&self, task: &PlanningTask) -> Result<Commitment, ReasoningError> {
        let op = task
            .op_id(&self.op)
            .ok_or_else(|| ReasoningError::Inconsistent(format!("unknown operator `{}`", self.op)))?;
        match (self.kind, self.step) {
            (CommitmentKind::Enforce, None) => Ok(Commitment::EnforceOp(op)),
            (CommitmentKind::Forbid, None) => Ok(Commitment::ForbidOp(op)),
            (CommitmentKind::Prefix, Some(step)) => Ok(Commitment::PrefixStep { step, op }),
            (CommitmentKind::Prefix, None) => {
                Err(ReasoningError::Inconsistent("a prefix commitment needs a step".into()))
            }
            (_, Some(_)) => Err(ReasoningError::Inconsistent(
                "only prefix commitments take a step".into(),
            )),
        }
    }
}

impl fmt::Display for NamedCommitment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, self.step) {
            (CommitmentKind::Enforce, _) => write!(f, "enforce {}", self.op),
            (CommitmentKind::Forbid, _) => write!(f, "forbid {}", self.op),
            (CommitmentKind::Prefix, step) => write!(f, "prefix {}@{}", self.op, step.unwrap_or(0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FacetSign {
    /// Restricts to plans containing the operator.
    Inclusive,
    /// Restricts to plans without the operator.
    Excluding,
}

/// A facet `o` or `¬o` of the plan space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Facet {
    pub op: usize,
    pub sign: FacetSign,
}

impl Facet {
    pub fn commitment(self) -> Commitment {
        match self.sign {
            FacetSign::Inclusive => Commitment::EnforceOp(self.op),
            FacetSign::Excluding => Commitment::ForbidOp(self.op),
        }
    }
}

/// A task compiled at a fixed length bound.
#[derive(Debug)]
pub struct PlanSpace {
    task: Arc<PlanningTask>,
    encoding: Encoding,
    ddnnf: Ddnnf,
    count: BigUint,
    compile_options: CompileOptions,
}

impl PlanSpace {
    /// Encodes (with occurrence indicators) and compiles the plan space.
    /// Unless `options` already carries a branching priority, operator
    /// variables are decided step by step.
    pub fn build(
        task: Arc<PlanningTask>,
        bound: LengthBound,
        options: &CompileOptions,
    ) -> Result<Self, ReasoningError> {
        let encoding = encode(&task, bound, true);
        let mut options = options.clone();
        if options.priority.is_none() {
            options.priority = Some(encoding.varmap.time_order());
        }
        let ddnnf = compile(&encoding.cnf, &options)?;
        let count = ddnnf.count();
        Ok(Self {
            task,
            encoding,
            ddnnf,
            count,
            compile_options: options,
        })
    }

    pub fn task(&self) -> &PlanningTask {
        &self.task
    }

    pub fn task_arc(&self) -> &Arc<PlanningTask> {
        &self.task
    }

    pub fn bound(&self) -> LengthBound {
        self.encoding.bound
    }

    pub fn encoding(&self) -> &Encoding {
        &self.encoding
    }

    pub fn ddnnf(&self) -> &Ddnnf {
        &self.ddnnf
    }

    pub fn count(&self) -> &BigUint {
        &self.count
    }

    /// The unrestricted view.
    pub fn root(&self) -> View<'_> {
        View {
            space: self,
            commitments: Vec::new(),
            lits: Vec::new(),
            count: self.count.clone(),
        }
    }

    /// The view under `commitments`, which must be pairwise consistent and
    /// give prefix steps contiguously from step 0.
    pub fn view(&self, commitments: &[Commitment]) -> Result<View<'_>, ReasoningError> {
        let mut view = self.root();
        for &c in commitments {
            view = view.with(c)?;
        }
        Ok(view)
    }

    fn lit(&self, c: Commitment) -> Lit {
        let vm = &self.encoding.varmap;
        match c {
            Commitment::EnforceOp(o) => Lit::pos(vm.op_ind(o).expect("plan spaces carry indicators")),
            Commitment::ForbidOp(o) => Lit::neg(vm.op_ind(o).expect("plan spaces carry indicators")),
            Commitment::PrefixStep { step, op } => Lit::pos(vm.op_at(op, step)),
        }
    }

    fn conditioned(&self, lits: &[Lit]) -> Result<BigUint, ReasoningError> {
        match self.ddnnf.conditioned_count(lits) {
            Ok(n) => Ok(n),
            Err(DdnnfError::Contradictory(_)) => Ok(BigUint::zero()),
            Err(e) => Err(e.into()),
        }
    }
}

/// Brave and cautious operators of a view.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OperatorSets {
    pub brave: BTreeSet<usize>,
    /// Empty when there are no plans.
    pub cautious: BTreeSet<usize>,
}

impl OperatorSets {
    /// Inclusive facets: brave but not cautious.
    pub fn facets(&self) -> BTreeSet<usize> {
        self.brave.difference(&self.cautious).copied().collect()
    }
}

/// A plan space restricted by commitments.
#[derive(Debug, Clone)]
pub struct View<'a> {
    space: &'a PlanSpace,
    commitments: Vec<Commitment>,
    lits: Vec<Lit>,
    count: BigUint,
}

impl<'a> View<'a> {
    pub fn space(&self) -> &'a PlanSpace {
        self.space
    }

    pub fn commitments(&self) -> &[Commitment] {
        &self.commitments
    }

    /// Checks `c` against the commitments so far.
    pub fn check(&self, c: Commitment) -> Result<(), ReasoningError> {
        let task = self.space.task();
        if c.op() >= task.num_operators() {
            return Err(QueryError::UnknownOperator(c.op()).into());
        }
        let name = task.op_name(c.op());
        if self.commitments.contains(&c) {
            return Err(ReasoningError::Inconsistent(format!(
                "`{}` is already committed",
                c.named(task)
            )));
        }
        match c {
            Commitment::EnforceOp(o) if self.commitments.contains(&Commitment::ForbidOp(o)) => {
                Err(ReasoningError::Inconsistent(format!("`{name}` is already forbidden")))
            }
            Commitment::ForbidOp(o) if self.commitments.contains(&Commitment::EnforceOp(o)) => {
                Err(ReasoningError::Inconsistent(format!("`{name}` is already enforced")))
            }
            Commitment::PrefixStep { step, .. } => {
                let next = self
                    .commitments
                    .iter()
                    .filter(|c| matches!(c, Commitment::PrefixStep { .. }))
                    .count();
                let bound = self.space.bound().get();
                if step >= bound {
                    Err(ReasoningError::Inconsistent(format!(
                        "step {step} is beyond the last step {} of bound {bound}",
                        bound.saturating_sub(1)
                    )))
                } else if step != next {
                    Err(ReasoningError::Inconsistent(format!(
                        "prefix steps must be given in order; the next one is step {next}"
                    )))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// The view with one more commitment. An empty result is not an error;
    /// see [`View::is_empty`].
    pub fn with(&self, c: Commitment) -> Result<View<'a>, ReasoningError> {
        self.check(c)?;
        let mut lits = self.lits.clone();
        lits.push(self.space.lit(c));
        let count = self.space.conditioned(&lits)?;
        let mut commitments = self.commitments.clone();
        commitments.push(c);
        Ok(View {
            space: self.space,
            commitments,
            lits,
            count,
        })
    }

    pub fn count(&self) -> &BigUint {
        &self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count.is_zero()
    }

    pub fn exists(&self) -> bool {
        !self.is_empty()
    }

    /// Whether at least `k` plans exist.
    pub fn top_k_exists(&self, k: &BigUint) -> bool {
        &self.count >= k
    }

    pub fn operator_sets(&self) -> Result<OperatorSets, ReasoningError> {
        if self.is_empty() {
            return Ok(OperatorSets::default());
        }
        let vm = &self.space.encoding.varmap;
        let inds = vm.op_indicators();
        let bb = self.space.ddnnf.backbone(&inds, &self.lits)?;
        let op_of = |v: u32| inds.iter().position(|&x| x == v).expect("indicator variable");
        let dead: BTreeSet<usize> = bb.dead.iter().map(|&v| op_of(v)).collect();
        Ok(OperatorSets {
            brave: (0..inds.len()).filter(|o| !dead.contains(o)).collect(),
            cautious: bb.core.iter().map(|&v| op_of(v)).collect(),
        })
    }

    pub fn brave(&self) -> Result<BTreeSet<usize>, ReasoningError> {
        Ok(self.operator_sets()?.brave)
    }

    pub fn cautious(&self) -> Result<BTreeSet<usize>, ReasoningError> {
        Ok(self.operator_sets()?.cautious)
    }

    /// Inclusive facets; each has a matching excluding facet.
    pub fn facets(&self) -> Result<BTreeSet<usize>, ReasoningError> {
        Ok(self.operator_sets()?.facets())
    }

    /// Number of facets of both signs.
    pub fn facet_count(&self) -> Result<usize, ReasoningError> {
        Ok(2 * self.facets()?.len())
    }

    /// Whether `facet` is a facet of the view.
    pub fn facet_reason(&self, facet: Facet) -> Result<bool, ReasoningError> {
        Ok(self.facets()?.contains(&facet.op))
    }

    pub fn at_least_k_facets(&self, k: usize) -> Result<bool, ReasoningError> {
        Ok(self.facet_count()? >= k)
    }

    pub fn at_most_k_facets(&self, k: usize) -> Result<bool, ReasoningError> {
        Ok(self.facet_count()? <= k)
    }

    pub fn exact_k_facets(&self, k: usize) -> Result<bool, ReasoningError> {
        Ok(self.facet_count()? == k)
    }

    /// Number of plans of the view satisfying `query`. Conjunctions of
    /// literals are answered by conditioning; other queries recompile the
    /// encoding together with the query clauses.
    pub fn query_count(&self, query: &Query) -> Result<BigUint, ReasoningError> {
        let enc = &self.space.encoding;
        let clauses = enc.encode_query(query, self.space.task())?;
        if query.classify() == QueryKind::Term {
            let mut lits = self.lits.clone();
            lits.extend(clauses.iter().map(|c| c.lits()[0]));
            return self.space.conditioned(&lits);
        }
        let units = self.lits.iter().map(|&l| Clause::unit(l));
        let cnf = enc
            .cnf
            .conjoin(clauses.into_iter().chain(units))
            .expect("query variables come from the encoding");
        Ok(compile(&cnf, &self.space.compile_options)?.count())
    }

    /// Fraction of the view's plans satisfying `query`; `0` when the view
    /// is empty.
    pub fn probability(&self, query: &Query) -> Result<Probability, ReasoningError> {
        let num = self.query_count(query)?;
        let den = self.count.clone().max(BigUint::one());
        Ok(Probability::new(num, den))
    }

    /// Whether the probability of `query` is exactly `n/d` (`d ≥ 1`).
    pub fn prob_equals(&self, query: &Query, n: &BigUint, d: &BigUint) -> Result<bool, ReasoningError> {
        Ok(self.probability(query)?.equals(n, d))
    }

    /// `(|FA| − |FA'|) / |FA|` where `FA'` are the facets after committing
    /// to `facet`. Defined for any operator, facet or not.
    pub fn significance(&self, facet: Facet) -> Result<Probability, ReasoningError> {
        let before = self.facet_count()?;
        self.significance_given(facet, before)
    }

    fn significance_given(&self, facet: Facet, before: usize) -> Result<Probability, ReasoningError> {
        if before == 0 {
            return Err(ReasoningError::NoFacets);
        }
        let after = self.with(facet.commitment())?.facet_count()?;
        Ok(Probability::new(
            BigUint::from(before.saturating_sub(after)),
            BigUint::from(before),
        ))
    }

    /// Significance of every facet of the view, inclusive before excluding,
    /// by operator id.
    pub fn significance_table(&self) -> Result<Vec<(Facet, Probability)>, ReasoningError> {
        let facets = self.facets()?;
        let before = 2 * facets.len();
        let mut rows = Vec::with_capacity(before);
        for &op in &facets {
            for sign in [FacetSign::Inclusive, FacetSign::Excluding] {
                let f = Facet { op, sign };
                rows.push((f, self.significance_given(f, before)?));
            }
        }
        Ok(rows)
    }

    /// Plans of the view in a fixed order, at most `limit`; the flag tells
    /// whether more exist.
    pub fn enumerate_plans(&self, limit: usize) -> Result<(Vec<Plan>, bool), ReasoningError> {
        let (models, truncated) = self.space.ddnnf.enumerate(limit, &self.lits)?;
        let plans = models
            .iter()
            .map(|m| self.space.encoding.decode_model(m))
            .collect::<Result<_, _>>()?;
        Ok((plans, truncated))
    }

    /// `n` independent uniform draws from the plans of the view.
    pub fn sample_plans(&self, n: usize, seed: u64) -> Result<Vec<Plan>, ReasoningError> {
        if self.is_empty() {
            return Err(ReasoningError::NoPlans);
        }
        let models = self.space.ddnnf.sample(n, seed, &self.lits)?;
        Ok(models
            .iter()
            .map(|m| self.space.encoding.decode_model(m))
            .collect::<Result<_, _>>()?)
    }
}
