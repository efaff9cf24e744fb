//! Brute-force plan enumeration, the ground truth for everything compiled.
//!
//! Plans are operator sequences: revisiting a state yields a distinct plan,
//! so there is no duplicate detection. Only meant for desk-scale tasks.

use std::collections::BTreeSet;
use std::ops::ControlFlow;

use num_bigint::BigUint;

use crate::reasoning::Commitment;
use crate::task::{LengthBound, Plan, PlanningTask, State};

/// Result of a (possibly truncated) enumeration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleEnumeration {
    pub plans: Vec<Plan>,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleStats {
    pub count: BigUint,
    pub brave: BTreeSet<usize>,
    /// Empty when there are no plans; see `no_plans`.
    pub cautious: BTreeSet<usize>,
    pub no_plans: bool,
}

/// Depth-first walk over applicable sequences, calling `visit` on every plan
/// in lexicographic order of operator ids (a plan precedes its extensions).
pub fn for_each_plan<F>(task: &PlanningTask, bound: LengthBound, mut visit: F) -> bool
where
    F: FnMut(&[usize]) -> ControlFlow<()>,
{
    let mut prefix = Vec::with_capacity(bound.get());
    dfs(task, bound.get(), task.init().clone(), &mut prefix, &mut visit).is_break()
}

fn dfs<F>(task: &PlanningTask, bound: usize, state: State, prefix: &mut Vec<usize>, visit: &mut F) -> ControlFlow<()>
where
    F: FnMut(&[usize]) -> ControlFlow<()>,
{
    if task.is_goal(&state) {
        visit(prefix)?;
    }
    if prefix.len() == bound {
        return ControlFlow::Continue(());
    }
    for op in task.operators() {
        if state.satisfies(&op.pre) {
            let next = task.apply(&state, op.id).expect("applicable");
            prefix.push(op.id);
            let flow = dfs(task, bound, next, prefix, visit);
            prefix.pop();
            flow?;
        }
    }
    ControlFlow::Continue(())
}

/// All plans of length at most `bound`, truncated at `limit` if given.
pub fn enumerate_plans_oracle(task: &PlanningTask, bound: LengthBound, limit: Option<usize>) -> OracleEnumeration {
    let mut plans = Vec::new();
    let mut truncated = false;
    for_each_plan(task, bound, |steps| {
        if limit.is_some_and(|l| plans.len() >= l) {
            truncated = true;
            return ControlFlow::Break(());
        }
        plans.push(Plan::new(steps.to_vec()));
        ControlFlow::Continue(())
    });
    OracleEnumeration { plans, truncated }
}

/// Whether `plan` meets every commitment.
pub fn plan_meets(plan: &Plan, commitments: &[Commitment]) -> bool {
    commitments.iter().all(|&c| match c {
        Commitment::EnforceOp(o) => plan.contains(o),
        Commitment::ForbidOp(o) => !plan.contains(o),
        Commitment::PrefixStep { step, op } => plan.steps.get(step) == Some(&op),
    })
}

/// Plan count together with brave and cautious operator sets.
pub fn oracle_stats(task: &PlanningTask, bound: LengthBound) -> OracleStats {
    let mut count = BigUint::default();
    let mut brave = BTreeSet::new();
    let mut cautious: Option<BTreeSet<usize>> = None;
    for_each_plan(task, bound, |steps| {
        count += 1u32;
        let ops: BTreeSet<usize> = steps.iter().copied().collect();
        brave.extend(ops.iter().copied());
        cautious = Some(match cautious.take() {
            None => ops,
            Some(c) => c.intersection(&ops).copied().collect(),
        });
        ControlFlow::Continue(())
    });
    OracleStats {
        no_plans: cautious.is_none(),
        cautious: cautious.unwrap_or_default(),
        count,
        brave,
    }
}
