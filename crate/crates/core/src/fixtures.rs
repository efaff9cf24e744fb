//! Bundled tasks: the running example, a transport generator with a known
//! plan count, and random small tasks for property tests.

use num_bigint::BigUint;
use rand::Rng;

use crate::query::{Query, QueryLit, QueryVar};
use crate::reasoning::Commitment;
use crate::task::{LengthBound, PartialState, PlanningTask, State};

/// The researcher who has to wake up and give a talk.
///
/// Two plans exist within bound 4 (`wake-up; get-ready; go-to-AAAI;
/// give-talk` and `wake-up; go-to-AAAI; give-talk`); `sleep` leads to a dead
/// end.
pub fn running_example() -> PlanningTask {
    PlanningTask::from_json(RUNNING_EXAMPLE_JSON).expect("bundled fixture is valid")
}

pub const RUNNING_EXAMPLE_JSON: &str = include_str!("../fixtures/pi1.json");

/// Transport of `n` packages from room A to room B with unlimited grippers.
///
/// Every package is picked and dropped exactly once and nothing can be
/// undone, so every plan has length `2n` and the plans are the interleavings
/// of the `n` ordered pairs: `(2n)! / 2^n` of them.
pub fn transport(n: usize) -> PlanningTask {
    let mut atoms = Vec::with_capacity(3 * n);
    for k in 0..n {
        atoms.push(format!("in-a-{k}"));
        atoms.push(format!("held-{k}"));
        atoms.push(format!("in-b-{k}"));
    }
    let in_a = |k: usize| 3 * k;
    let held = |k: usize| 3 * k + 1;
    let in_b = |k: usize| 3 * k + 2;
    let mut ops = Vec::with_capacity(2 * n);
    for k in 0..n {
        ops.push((
            format!("pick-{k}"),
            PartialState::new().with(in_a(k), true),
            PartialState::new().with(in_a(k), false).with(held(k), true),
        ));
        ops.push((
            format!("drop-{k}"),
            PartialState::new().with(held(k), true),
            PartialState::new().with(held(k), false).with(in_b(k), true),
        ));
    }
    let init = State::new((0..3 * n).map(|a| a % 3 == 0).collect());
    let goal = (0..n).map(|k| (in_b(k), true)).collect();
    PlanningTask::new(atoms, ops, init, goal).expect("generated task is valid")
}

/// Closed-form plan count of [`transport`] under `bound`.
pub fn transport_plan_count(n: usize, bound: usize) -> BigUint {
    if bound < 2 * n {
        return BigUint::default();
    }
    let factorial: BigUint = (1..=2 * n as u64).product();
    factorial >> n
}

/// Shape limits for [`random_task`].
#[derive(Debug, Clone, Copy)]
pub struct RandomTaskShape {
    pub max_atoms: usize,
    pub max_operators: usize,
}

impl Default for RandomTaskShape {
    fn default() -> Self {
        Self {
            max_atoms: 5,
            max_operators: 5,
        }
    }
}

fn random_partial<R: Rng>(rng: &mut R, atoms: usize, density: f64) -> PartialState {
    let mut partial = PartialState::new();
    for a in 0..atoms {
        if rng.gen_bool(density) {
            partial.insert(a, rng.gen_bool(0.5));
        }
    }
    partial
}

/// A random STRIPS task with between 1 and `shape.max_*` atoms and operators.
pub fn random_task<R: Rng>(rng: &mut R, shape: RandomTaskShape) -> PlanningTask {
    let atoms = rng.gen_range(1..=shape.max_atoms);
    let ops = rng.gen_range(1..=shape.max_operators);
    let operators = (0..ops)
        .map(|o| {
            (
                format!("o{o}"),
                random_partial(rng, atoms, 0.3),
                random_partial(rng, atoms, 0.4),
            )
        })
        .collect();
    let init = State::new((0..atoms).map(|_| rng.gen_bool(0.5)).collect());
    let goal = random_partial(rng, atoms, 0.4);
    PlanningTask::new((0..atoms).map(|a| format!("a{a}")).collect(), operators, init, goal)
        .expect("generated task is valid")
}

fn random_query_var<R: Rng>(rng: &mut R, task: &PlanningTask, bound: LengthBound) -> QueryVar {
    let l = bound.get();
    let atom = rng.gen_range(0..task.num_atoms());
    let op = rng.gen_range(0..task.num_operators());
    match rng.gen_range(0..4) {
        0 => QueryVar::AtomEver(atom),
        1 => QueryVar::OpEver(op),
        2 => QueryVar::AtomAt(atom, rng.gen_range(0..=l)),
        _ if l > 0 => QueryVar::OpAt(op, rng.gen_range(0..l)),
        _ => QueryVar::OpEver(op),
    }
}

/// A random query of up to three clauses with up to two literals each,
/// valid for `bound`. About half of them are plain conjunctions.
pub fn random_query<R: Rng>(rng: &mut R, task: &PlanningTask, bound: LengthBound) -> Query {
    let term = rng.gen_bool(0.5);
    let clauses = (0..rng.gen_range(1..=3))
        .map(|_| {
            let width = if term { 1 } else { rng.gen_range(1..=2) };
            (0..width)
                .map(|_| QueryLit {
                    var: random_query_var(rng, task, bound),
                    positive: rng.gen_bool(0.5),
                })
                .collect()
        })
        .collect();
    Query::new(clauses)
}

/// Up to three random commitments that are consistent with each other
/// (they may still leave no plan).
pub fn random_commitments<R: Rng>(rng: &mut R, task: &PlanningTask, bound: LengthBound) -> Vec<Commitment> {
    let mut out: Vec<Commitment> = Vec::new();
    let mut prefix = 0;
    for _ in 0..rng.gen_range(0..=3) {
        let op = rng.gen_range(0..task.num_operators());
        let c = match rng.gen_range(0..3) {
            0 => Commitment::EnforceOp(op),
            1 => Commitment::ForbidOp(op),
            _ if prefix < bound.get() => {
                prefix += 1;
                Commitment::PrefixStep { step: prefix - 1, op }
            }
            _ => continue,
        };
        let clash = out.iter().any(|&d| {
            d == c
                || matches!((c, d), (Commitment::EnforceOp(a), Commitment::ForbidOp(b)) | (Commitment::ForbidOp(a), Commitment::EnforceOp(b)) if a == b)
        });
        if !clash {
            out.push(c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::oracle_stats;
    use crate::task::LengthBound;

    #[test]
    fn transport_closed_form_matches_oracle() {
        for n in 1..=3 {
            let t = transport(n);
            for bound in 0..=2 * n + 1 {
                let b = LengthBound::new(&t, bound).unwrap();
                assert_eq!(
                    oracle_stats(&t, b).count,
                    transport_plan_count(n, bound),
                    "n={n} ℓ={bound}"
                );
            }
        }
        assert_eq!(transport_plan_count(6, 12), BigUint::from(7_484_400u32));
    }
}
