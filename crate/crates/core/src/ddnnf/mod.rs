//! Decision-DNNF: a DAG of literal leaves, decomposable conjunctions and
//! decision nodes `(x ∧ hi) ∨ (¬x ∧ lo)`.
//!
//! Smoothness is not materialized. Every node stores its variable support,
//! and counting multiplies each decision branch by `2^gap` for the variables
//! the branch does not mention.

mod compile;
mod nnf;
mod traverse;
mod validate;

use std::collections::{BTreeSet, HashMap};

use fixedbitset::FixedBitSet;
use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::cnf::{Assignment, Lit};

pub use compile::{compile, CompileOptions};
pub use validate::{ValidationReport, Violation, ViolationKind};

#[derive(Debug, Error)]
pub enum DdnnfError {
    #[error("compilation exceeded the node budget of {limit} nodes")]
    NodeBudget { limit: usize },
    #[error("compilation exceeded the time budget of {limit_secs} s")]
    TimeBudget { limit_secs: u64 },
    #[error("contradictory assumptions on variable {0}")]
    Contradictory(u32),
    #[error("variable {var} is outside the counting universe")]
    OutsideUniverse { var: u32 },
    #[error("the formula has no models")]
    NoModels,
    #[error("node {node}: {message}")]
    Malformed { node: usize, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u32);

impl NodeId {
    pub const TRUE: NodeId = NodeId(0);
    pub const FALSE: NodeId = NodeId(1);

    pub fn new(index: usize) -> Self {
        Self(index as u32)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    True,
    False,
    Lit(Lit),
    And(Vec<NodeId>),
    Decision { var: u32, hi: NodeId, lo: NodeId },
}

impl Node {
    pub fn children(&self) -> &[NodeId] {
        match self {
            Node::And(cs) => cs,
            _ => &[],
        }
    }
}

/// A compiled formula over variables `1..=num_vars`.
#[derive(Debug, Clone)]
pub struct Ddnnf {
    nodes: Vec<Node>,
    supports: Vec<FixedBitSet>,
    support_len: Vec<u32>,
    root: NodeId,
    num_vars: u32,
}

/// Hash-consing node store; children always precede their parents.
#[derive(Debug)]
pub(crate) struct Builder {
    nodes: Vec<Node>,
    supports: Vec<FixedBitSet>,
    unique: HashMap<Node, NodeId>,
    num_vars: u32,
}

impl Builder {
    pub(crate) fn new(num_vars: u32) -> Self {
        let mut b = Self {
            nodes: Vec::new(),
            supports: Vec::new(),
            unique: HashMap::new(),
            num_vars,
        };
        b.intern(Node::True);
        b.intern(Node::False);
        b
    }

    pub(crate) fn len(&self) -> usize {
        self.nodes.len()
    }

    fn intern(&mut self, node: Node) -> NodeId {
        if let Some(&id) = self.unique.get(&node) {
            return id;
        }
        let mut support = FixedBitSet::with_capacity(self.num_vars as usize + 1);
        match &node {
            Node::True | Node::False => {}
            Node::Lit(l) => support.insert(l.var() as usize),
            Node::And(cs) => {
                for c in cs {
                    support.union_with(&self.supports[c.index()]);
                }
            }
            Node::Decision { var, hi, lo } => {
                support.insert(*var as usize);
                support.union_with(&self.supports[hi.index()]);
                support.union_with(&self.supports[lo.index()]);
            }
        }
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(node.clone());
        self.supports.push(support);
        self.unique.insert(node, id);
        id
    }

    pub(crate) fn lit(&mut self, lit: Lit) -> NodeId {
        self.intern(Node::Lit(lit))
    }

    /// Conjunction with constant folding, flattening of nested
    /// conjunctions and canonical child order.
    pub(crate) fn and(&mut self, children: impl IntoIterator<Item = NodeId>) -> NodeId {
        let mut flat = Vec::new();
        for c in children {
            match &self.nodes[c.index()] {
                Node::False => return NodeId::FALSE,
                Node::True => {}
                Node::And(grand) => flat.extend_from_slice(grand),
                _ => flat.push(c),
            }
        }
        flat.sort_unstable();
        flat.dedup();
        match flat.len() {
            0 => NodeId::TRUE,
            1 => flat[0],
            _ => self.intern(Node::And(flat)),
        }
    }

    pub(crate) fn decision(&mut self, var: u32, hi: NodeId, lo: NodeId) -> NodeId {
        if hi == NodeId::FALSE && lo == NodeId::FALSE {
            return NodeId::FALSE;
        }
        self.intern(Node::Decision { var, hi, lo })
    }

    pub(crate) fn finish(self, root: NodeId) -> Ddnnf {
        Ddnnf::assemble(self.nodes, self.supports, root, self.num_vars)
    }
}

/// Fixed literals a query is conditioned on.
#[derive(Debug, Clone)]
pub(crate) struct Conditioning {
    value: Vec<Option<bool>>,
    vars: FixedBitSet,
    len: usize,
}

impl Conditioning {
    fn new(num_vars: u32, assumptions: &[Lit]) -> Result<Self, DdnnfError> {
        let mut value = vec![None; num_vars as usize + 1];
        let mut vars = FixedBitSet::with_capacity(num_vars as usize + 1);
        for &l in assumptions {
            let v = l.var();
            if v > num_vars {
                return Err(DdnnfError::OutsideUniverse { var: v });
            }
            match value[v as usize] {
                Some(b) if b != l.is_positive() => return Err(DdnnfError::Contradictory(v)),
                _ => value[v as usize] = Some(l.is_positive()),
            }
            vars.insert(v as usize);
        }
        let len = vars.count_ones(..);
        Ok(Self { value, vars, len })
    }

    pub(crate) fn value(&self, var: u32) -> Option<bool> {
        self.value[var as usize]
    }

    fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Per-node model counts of the counting graph under a conditioning.
#[derive(Debug, Clone)]
pub(crate) struct CountingGraph {
    pub(crate) val: Vec<BigUint>,
    /// Number of conditioned variables in each node's support.
    assumed_in: Vec<u32>,
    pub(crate) cond: Conditioning,
}

/// Core (always true) and dead (always false) variables.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Backbone {
    pub core: BTreeSet<u32>,
    pub dead: BTreeSet<u32>,
}

impl Ddnnf {
    fn assemble(nodes: Vec<Node>, supports: Vec<FixedBitSet>, root: NodeId, num_vars: u32) -> Self {
        let support_len = supports.iter().map(|s| s.count_ones(..) as u32).collect();
        Self {
            nodes,
            supports,
            support_len,
            root,
            num_vars,
        }
    }

    /// Assembles a DAG from raw nodes without checking decomposability or
    /// determinism (see [`Ddnnf::validate`]). Children must precede parents.
    pub fn from_nodes(nodes: Vec<Node>, root: usize, num_vars: u32) -> Result<Self, DdnnfError> {
        let mut supports: Vec<FixedBitSet> = Vec::with_capacity(nodes.len());
        for (id, node) in nodes.iter().enumerate() {
            let malformed = |message: String| DdnnfError::Malformed { node: id, message };
            let mut support = FixedBitSet::with_capacity(num_vars as usize + 1);
            let add_child = |c: NodeId, support: &mut FixedBitSet| {
                if c.index() >= id {
                    return Err(malformed(format!("child {} does not precede its parent", c.0)));
                }
                support.union_with(&supports[c.index()]);
                Ok(())
            };
            let var = lit_var(node);
            if var > num_vars || (var == 0 && matches!(node, Node::Decision { .. })) {
                return Err(malformed(format!("variable {var} outside 1..={num_vars}")));
            }
            match node {
                Node::True | Node::False => {}
                Node::Lit(l) => support.insert(l.var() as usize),
                Node::And(cs) => {
                    for &c in cs {
                        add_child(c, &mut support)?;
                    }
                }
                Node::Decision { var, hi, lo } => {
                    support.insert(*var as usize);
                    add_child(*hi, &mut support)?;
                    add_child(*lo, &mut support)?;
                }
            }
            supports.push(support);
        }
        if root >= nodes.len() {
            return Err(DdnnfError::Malformed {
                node: root,
                message: "root does not exist".into(),
            });
        }
        Ok(Self::assemble(nodes, supports, NodeId(root as u32), num_vars))
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn support(&self, id: NodeId) -> impl Iterator<Item = u32> + '_ {
        self.supports[id.index()].ones().map(|v| v as u32)
    }

    /// Number of edges (decision nodes count their two branches).
    pub fn num_edges(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| match n {
                Node::And(cs) => cs.len(),
                Node::Decision { .. } => 2,
                _ => 0,
            })
            .sum()
    }

    pub(crate) fn counting_graph(&self, assumptions: &[Lit]) -> Result<CountingGraph, DdnnfError> {
        let cond = Conditioning::new(self.num_vars, assumptions)?;
        let assumed_in: Vec<u32> = if cond.is_empty() {
            vec![0; self.nodes.len()]
        } else {
            self.supports
                .iter()
                .map(|s| s.intersection_count(&cond.vars) as u32)
                .collect()
        };
        let mut val: Vec<BigUint> = Vec::with_capacity(self.nodes.len());
        for (id, node) in self.nodes.iter().enumerate() {
            let v = match node {
                Node::True => BigUint::one(),
                Node::False => BigUint::zero(),
                Node::Lit(l) => match cond.value(l.var()) {
                    Some(b) if b != l.is_positive() => BigUint::zero(),
                    _ => BigUint::one(),
                },
                Node::And(cs) => {
                    let mut p = BigUint::one();
                    for c in cs {
                        if val[c.index()].is_zero() {
                            p.set_zero();
                            break;
                        }
                        p *= &val[c.index()];
                    }
                    p
                }
                Node::Decision { var, hi, lo } => {
                    let mut total = BigUint::zero();
                    for (branch, child) in [(true, *hi), (false, *lo)] {
                        if cond.value(*var) == Some(!branch) || val[child.index()].is_zero() {
                            continue;
                        }
                        let gap = self.free_gap(id, *var, child, &cond, &assumed_in);
                        total += &val[child.index()] << gap;
                    }
                    total
                }
            };
            val.push(v);
        }
        Ok(CountingGraph { val, assumed_in, cond })
    }

    /// Unconditioned support variables of decision node `id` missing from
    /// its branch `child`.
    fn free_gap(&self, id: usize, var: u32, child: NodeId, cond: &Conditioning, assumed_in: &[u32]) -> usize {
        // saturating: only hand-built, non-decomposable DAGs can underflow
        let total_gap = self.support_len[id]
            .saturating_sub(1)
            .saturating_sub(self.support_len[child.index()]);
        let assumed_var = cond.value(var).is_some() as u32;
        let assumed_gap = assumed_in[id]
            .saturating_sub(assumed_var)
            .saturating_sub(assumed_in[child.index()]);
        total_gap.saturating_sub(assumed_gap) as usize
    }

    /// Variables of the universe outside the root support that are not
    /// conditioned.
    fn root_free(&self, graph: &CountingGraph) -> usize {
        let outside = self.num_vars - self.support_len[self.root.index()];
        let assumed_outside = graph.cond.len as u32 - graph.assumed_in[self.root.index()];
        (outside - assumed_outside) as usize
    }

    /// Model count over variables `1..=num_vars`.
    pub fn count(&self) -> BigUint {
        self.conditioned_count(&[]).expect("no assumptions")
    }

    /// Model count over an explicit universe, which must cover the support.
    pub fn count_over(&self, over: &BTreeSet<u32>) -> Result<BigUint, DdnnfError> {
        if let Some(v) = self.support(self.root).find(|v| !over.contains(v)) {
            return Err(DdnnfError::OutsideUniverse { var: v });
        }
        let graph = self.counting_graph(&[])?;
        let free = over.len() - self.support_len[self.root.index()] as usize;
        Ok(&graph.val[self.root.index()] << free)
    }

    /// Models of `self ∧ assumptions` over `1..=num_vars`.
    pub fn conditioned_count(&self, assumptions: &[Lit]) -> Result<BigUint, DdnnfError> {
        let graph = self.counting_graph(assumptions)?;
        Ok(self.root_count(&graph))
    }

    pub(crate) fn root_count(&self, graph: &CountingGraph) -> BigUint {
        &graph.val[self.root.index()] << self.root_free(graph)
    }

    /// Variables of `vars` fixed across all models under `assumptions`.
    pub fn backbone(&self, vars: &[u32], assumptions: &[Lit]) -> Result<Backbone, DdnnfError> {
        if self.conditioned_count(assumptions)?.is_zero() {
            return Err(DdnnfError::NoModels);
        }
        let mut out = Backbone::default();
        let mut extended = assumptions.to_vec();
        for &v in vars {
            if v == 0 || v > self.num_vars {
                return Err(DdnnfError::OutsideUniverse { var: v });
            }
            for positive in [true, false] {
                extended.push(Lit::new(v, positive));
                let zero = match self.conditioned_count(&extended) {
                    Ok(c) => c.is_zero(),
                    Err(DdnnfError::Contradictory(_)) => true,
                    Err(e) => return Err(e),
                };
                extended.pop();
                if zero {
                    if positive {
                        out.dead.insert(v);
                    } else {
                        out.core.insert(v);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Enumerates models in a fixed order, stopping after `limit`.
    pub fn enumerate(&self, limit: usize, assumptions: &[Lit]) -> Result<(Vec<Assignment>, bool), DdnnfError> {
        traverse::enumerate(self, limit, assumptions)
    }

    /// `n` independent uniform draws from the models, deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64, assumptions: &[Lit]) -> Result<Vec<Assignment>, DdnnfError> {
        traverse::sample(self, n, seed, assumptions)
    }

    pub fn validate(&self) -> ValidationReport {
        validate::validate(self)
    }

    pub fn write_nnf<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        nnf::write_nnf(self, out)
    }

    pub fn to_nnf_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_nnf(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn read_nnf<R: std::io::BufRead>(input: R) -> Result<Self, DdnnfError> {
        nnf::read_nnf(input)
    }
}

fn lit_var(node: &Node) -> u32 {
    match node {
        Node::Lit(l) => l.var(),
        Node::Decision { var, .. } => *var,
        _ => 0,
    }
}
