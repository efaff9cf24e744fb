//! Top-down walks over the counting graph: uniform sampling and ordered
//! model enumeration.

use num_bigint::{BigUint, RandBigInt};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CountingGraph, Ddnnf, DdnnfError, Node, NodeId};
use crate::cnf::{Assignment, Lit};

impl Ddnnf {
    /// Branches of decision node `id` that still have models, with their
    /// weights (model counts over the node's support).
    fn live_branches(&self, graph: &CountingGraph, id: NodeId) -> Vec<(bool, NodeId, BigUint)> {
        let Node::Decision { var, hi, lo } = self.nodes[id.index()] else {
            return Vec::new();
        };
        let mut out = Vec::with_capacity(2);
        for (branch, child) in [(true, hi), (false, lo)] {
            if graph.cond.value(var) == Some(!branch) || graph.val[child.index()].is_zero() {
                continue;
            }
            let gap = self.free_gap(id.index(), var, child, &graph.cond, &graph.assumed_in);
            out.push((branch, child, &graph.val[child.index()] << gap));
        }
        out
    }

    /// Unconditioned variables decided by `id` but absent from `child`.
    fn gap_vars<'a>(&'a self, graph: &'a CountingGraph, id: NodeId, child: NodeId) -> impl Iterator<Item = u32> + 'a {
        let var = match self.nodes[id.index()] {
            Node::Decision { var, .. } => var,
            _ => 0,
        };
        self.supports[id.index()]
            .difference(&self.supports[child.index()])
            .map(|v| v as u32)
            .filter(move |&v| v != var && graph.cond.value(v).is_none())
    }

    /// Unconditioned variables outside the root support.
    fn outside_root<'a>(&'a self, graph: &'a CountingGraph) -> impl Iterator<Item = u32> + 'a {
        let root = &self.supports[self.root.index()];
        (1..=self.num_vars).filter(move |&v| !root.contains(v as usize) && graph.cond.value(v).is_none())
    }

    fn conditioned_base(&self, graph: &CountingGraph) -> Assignment {
        let mut asg = Assignment::all_false(self.num_vars);
        for v in 1..=self.num_vars {
            if let Some(b) = graph.cond.value(v) {
                asg.set(v, b);
            }
        }
        asg
    }
}

pub(super) fn sample(d: &Ddnnf, n: usize, seed: u64, assumptions: &[Lit]) -> Result<Vec<Assignment>, DdnnfError> {
    let graph = d.counting_graph(assumptions)?;
    if d.root_count(&graph).is_zero() {
        return Err(DdnnfError::NoModels);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = d.conditioned_base(&graph);
    let mut draws = Vec::with_capacity(n);
    let mut stack = Vec::new();
    for _ in 0..n {
        let mut asg = base.clone();
        stack.push(d.root);
        while let Some(id) = stack.pop() {
            match &d.nodes[id.index()] {
                Node::True | Node::False => {}
                Node::Lit(l) => asg.set(l.var(), l.is_positive()),
                Node::And(cs) => stack.extend(cs.iter().rev()),
                Node::Decision { var, .. } => {
                    let live = d.live_branches(&graph, id);
                    let total: BigUint = live.iter().map(|(_, _, w)| w).sum();
                    let mut pick = rng.gen_biguint_below(&total);
                    let mut chosen = live.len() - 1;
                    for (i, (_, _, w)) in live.iter().enumerate() {
                        if pick < *w {
                            chosen = i;
                            break;
                        }
                        pick -= w;
                    }
                    let (branch, child, _) = live[chosen];
                    asg.set(*var, branch);
                    for v in d.gap_vars(&graph, id, child) {
                        asg.set(v, rng.gen_bool(0.5));
                    }
                    stack.push(child);
                }
            }
        }
        for v in d.outside_root(&graph) {
            asg.set(v, rng.gen_bool(0.5));
        }
        draws.push(asg);
    }
    Ok(draws)
}

#[derive(Debug, Clone, Copy)]
enum Item {
    Node(NodeId),
    Free(u32),
}

struct Enumerator<'a> {
    d: &'a Ddnnf,
    graph: &'a CountingGraph,
    limit: usize,
    out: Vec<Assignment>,
}

impl Enumerator<'_> {
    /// Extends `asg` by every model of the pending items; returns true once
    /// the limit is reached.
    fn run(&mut self, pending: &mut Vec<Item>, asg: &mut Assignment) -> bool {
        let Some(item) = pending.pop() else {
            self.out.push(asg.clone());
            return self.out.len() >= self.limit;
        };
        let height = pending.len();
        let mut stop = false;
        match item {
            Item::Free(v) => {
                for b in [true, false] {
                    asg.set(v, b);
                    if self.run(pending, asg) {
                        stop = true;
                        break;
                    }
                }
            }
            Item::Node(id) => match &self.d.nodes[id.index()] {
                Node::True | Node::False => stop = self.run(pending, asg),
                Node::Lit(l) => {
                    asg.set(l.var(), l.is_positive());
                    stop = self.run(pending, asg);
                }
                Node::And(cs) => {
                    pending.extend(cs.iter().rev().map(|&c| Item::Node(c)));
                    stop = self.run(pending, asg);
                }
                Node::Decision { var, .. } => {
                    for (branch, child, _) in self.d.live_branches(self.graph, id) {
                        asg.set(*var, branch);
                        pending.extend(self.d.gap_vars(self.graph, id, child).map(Item::Free));
                        pending.push(Item::Node(child));
                        let done = self.run(pending, asg);
                        pending.truncate(height);
                        if done {
                            stop = true;
                            break;
                        }
                    }
                }
            },
        }
        pending.truncate(height);
        pending.push(item);
        stop
    }
}

pub(super) fn enumerate(d: &Ddnnf, limit: usize, assumptions: &[Lit]) -> Result<(Vec<Assignment>, bool), DdnnfError> {
    let graph = d.counting_graph(assumptions)?;
    let total = d.root_count(&graph);
    if total.is_zero() || limit == 0 {
        return Ok((Vec::new(), !total.is_zero()));
    }
    let mut pending: Vec<Item> = d.outside_root(&graph).map(Item::Free).collect();
    pending.reverse();
    pending.push(Item::Node(d.root));
    let mut e = Enumerator {
        d,
        graph: &graph,
        limit,
        out: Vec::new(),
    };
    let mut asg = d.conditioned_base(&graph);
    e.run(&mut pending, &mut asg);
    let truncated = BigUint::from(e.out.len()) < total;
    Ok((e.out, truncated))
}
