//! Top-down compilation: exhaustive DPLL with unit propagation, connected
//! component decomposition and a component cache.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use fixedbitset::FixedBitSet;
use tracing::debug;

use super::{Builder, Ddnnf, DdnnfError, NodeId};
use crate::cnf::{Cnf, Lit};

#[derive(Debug, Clone)]
pub struct CompileOptions {
    pub max_nodes: usize,
    pub timeout: Duration,
    /// Component caching; off only for cross-checking.
    pub cache: bool,
    /// Optional branching priority: variables listed earlier are decided
    /// first. Variables not listed fall back to the occurrence heuristic.
    pub priority: Option<Vec<u32>>,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self {
            max_nodes: 10_000_000,
            timeout: Duration::from_secs(300),
            cache: true,
            priority: None,
        }
    }
}

/// Compiles `cnf` into a decision-DNNF equivalent over `1..=num_vars`.
pub fn compile(cnf: &Cnf, options: &CompileOptions) -> Result<Ddnnf, DdnnfError> {
    let mut c = Compiler::new(cnf, options);
    let root = c.run()?;
    debug!(
        nodes = c.builder.len(),
        cache_entries = c.cache.len(),
        "compiled formula"
    );
    Ok(c.builder.finish(root))
}

struct Component {
    clauses: Vec<u32>,
    vars: Vec<u32>,
}

type CacheKey = (FixedBitSet, FixedBitSet);

struct Compiler<'a> {
    options: &'a CompileOptions,
    clauses: Vec<Vec<Lit>>,
    /// Clause ids per literal code (`2·var + polarity`).
    occurs: Vec<Vec<u32>>,
    value: Vec<Option<bool>>,
    trail: Vec<Lit>,
    rank: Vec<u32>,
    builder: Builder,
    cache: HashMap<CacheKey, NodeId>,
    started: Instant,
    steps: u64,
}

fn code(l: Lit) -> usize {
    2 * l.var() as usize + l.is_positive() as usize
}

impl<'a> Compiler<'a> {
    fn new(cnf: &Cnf, options: &'a CompileOptions) -> Self {
        let n = cnf.num_vars() as usize;
        let clauses: Vec<Vec<Lit>> = cnf.clauses().iter().map(|c| c.lits().to_vec()).collect();
        let mut occurs = vec![Vec::new(); 2 * n + 2];
        for (id, c) in clauses.iter().enumerate() {
            for &l in c {
                occurs[code(l)].push(id as u32);
            }
        }
        let mut rank = vec![u32::MAX; n + 1];
        if let Some(order) = &options.priority {
            for (i, &v) in order.iter().enumerate() {
                if (v as usize) <= n && rank[v as usize] == u32::MAX {
                    rank[v as usize] = i as u32;
                }
            }
        }
        Self {
            options,
            clauses,
            occurs,
            value: vec![None; n + 1],
            trail: Vec::new(),
            rank,
            builder: Builder::new(cnf.num_vars()),
            cache: HashMap::new(),
            started: Instant::now(),
            steps: 0,
        }
    }

    fn run(&mut self) -> Result<NodeId, DdnnfError> {
        if self.clauses.iter().any(|c| c.is_empty()) {
            return Ok(NodeId::FALSE);
        }
        for id in 0..self.clauses.len() {
            if let [l] = self.clauses[id][..] {
                match self.value[l.var() as usize] {
                    Some(v) if v != l.is_positive() => return Ok(NodeId::FALSE),
                    Some(_) => {}
                    None => self.assign(l),
                }
            }
        }
        if !self.propagate(0) {
            return Ok(NodeId::FALSE);
        }
        let all: Vec<u32> = (0..self.clauses.len() as u32).collect();
        self.branch(&all, 0)
    }

    fn assign(&mut self, l: Lit) {
        self.value[l.var() as usize] = Some(l.is_positive());
        self.trail.push(l);
    }

    fn undo(&mut self, mark: usize) {
        for l in self.trail.drain(mark..) {
            self.value[l.var() as usize] = None;
        }
    }

    fn lit_value(&self, l: Lit) -> Option<bool> {
        self.value[l.var() as usize].map(|v| v == l.is_positive())
    }

    /// Unit propagation of `trail[from..]`; false on conflict.
    fn propagate(&mut self, from: usize) -> bool {
        let mut head = from;
        while head < self.trail.len() {
            let falsified = !self.trail[head];
            head += 1;
            for i in 0..self.occurs[code(falsified)].len() {
                let cid = self.occurs[code(falsified)][i] as usize;
                let mut open = None;
                let mut open_count = 0;
                let mut satisfied = false;
                for &l in &self.clauses[cid] {
                    match self.lit_value(l) {
                        Some(true) => {
                            satisfied = true;
                            break;
                        }
                        Some(false) => {}
                        None => {
                            open_count += 1;
                            open = Some(l);
                        }
                    }
                }
                if satisfied {
                    continue;
                }
                match open_count {
                    0 => return false,
                    1 => self.assign(open.expect("one open literal")),
                    _ => {}
                }
            }
        }
        true
    }

    fn check_budget(&mut self) -> Result<(), DdnnfError> {
        if self.builder.len() > self.options.max_nodes {
            return Err(DdnnfError::NodeBudget {
                limit: self.options.max_nodes,
            });
        }
        self.steps += 1;
        if self.steps.is_multiple_of(256) && self.started.elapsed() > self.options.timeout {
            return Err(DdnnfError::TimeBudget {
                limit_secs: self.options.timeout.as_secs(),
            });
        }
        Ok(())
    }

    /// Conjunction of the literals implied since `mark` and the compiled
    /// components of the still-open clauses among `clause_ids`.
    fn branch(&mut self, clause_ids: &[u32], mark: usize) -> Result<NodeId, DdnnfError> {
        let lits: Vec<Lit> = self.trail[mark..].to_vec();
        let mut children: Vec<NodeId> = lits.into_iter().map(|l| self.builder.lit(l)).collect();
        for comp in self.components(clause_ids) {
            let node = self.compile_component(comp)?;
            if node == NodeId::FALSE {
                return Ok(NodeId::FALSE);
            }
            children.push(node);
        }
        Ok(self.builder.and(children))
    }

    /// Splits the open clauses into variable-disjoint components, ordered by
    /// their first clause.
    fn components(&self, clause_ids: &[u32]) -> Vec<Component> {
        let open: Vec<u32> = clause_ids
            .iter()
            .copied()
            .filter(|&c| {
                !self.clauses[c as usize]
                    .iter()
                    .any(|&l| self.lit_value(l) == Some(true))
            })
            .collect();
        if open.is_empty() {
            return Vec::new();
        }
        let mut parent: HashMap<u32, u32> = HashMap::new();
        fn find(parent: &mut HashMap<u32, u32>, v: u32) -> u32 {
            let mut root = v;
            while let Some(&p) = parent.get(&root) {
                if p == root {
                    break;
                }
                root = p;
            }
            let mut cur = v;
            while cur != root {
                let next = parent[&cur];
                parent.insert(cur, root);
                cur = next;
            }
            root
        }
        for &c in &open {
            let mut first = None;
            for &l in &self.clauses[c as usize] {
                if self.value[l.var() as usize].is_some() {
                    continue;
                }
                let v = l.var();
                parent.entry(v).or_insert(v);
                match first {
                    None => first = Some(v),
                    Some(f) => {
                        let (a, b) = (find(&mut parent, f), find(&mut parent, v));
                        if a != b {
                            parent.insert(a.max(b), a.min(b));
                        }
                    }
                }
            }
        }
        let mut index: HashMap<u32, usize> = HashMap::new();
        let mut comps: Vec<Component> = Vec::new();
        for &c in &open {
            let v = self.clauses[c as usize]
                .iter()
                .find(|l| self.value[l.var() as usize].is_none())
                .expect("open clause has an unassigned literal")
                .var();
            let root = find(&mut parent, v);
            let slot = *index.entry(root).or_insert_with(|| {
                comps.push(Component {
                    clauses: Vec::new(),
                    vars: Vec::new(),
                });
                comps.len() - 1
            });
            comps[slot].clauses.push(c);
        }
        let mut roots: Vec<(u32, u32)> = parent.keys().map(|&v| (v, 0)).collect();
        for (v, r) in roots.iter_mut() {
            *r = find(&mut parent, *v);
        }
        for (v, r) in roots {
            comps[index[&r]].vars.push(v);
        }
        for comp in &mut comps {
            comp.vars.sort_unstable();
        }
        comps
    }

    fn cache_key(&self, comp: &Component) -> CacheKey {
        let mut clauses = FixedBitSet::with_capacity(self.clauses.len());
        for &c in &comp.clauses {
            clauses.insert(c as usize);
        }
        let mut vars = FixedBitSet::with_capacity(self.value.len());
        for &v in &comp.vars {
            vars.insert(v as usize);
        }
        (clauses, vars)
    }

    /// Most occurrences in the shortest open clauses, ties by lowest index;
    /// an explicit priority takes precedence.
    fn choose(&self, comp: &Component) -> u32 {
        if let Some(&v) = comp
            .vars
            .iter()
            .filter(|&&v| self.rank[v as usize] != u32::MAX)
            .min_by_key(|&&v| self.rank[v as usize])
        {
            return v;
        }
        let open_len = |c: u32| {
            self.clauses[c as usize]
                .iter()
                .filter(|l| self.value[l.var() as usize].is_none())
                .count()
        };
        let shortest = comp.clauses.iter().map(|&c| open_len(c)).min().unwrap_or(0);
        let mut score: HashMap<u32, u32> = HashMap::new();
        for &c in &comp.clauses {
            if open_len(c) != shortest {
                continue;
            }
            for l in &self.clauses[c as usize] {
                if self.value[l.var() as usize].is_none() {
                    *score.entry(l.var()).or_default() += 1;
                }
            }
        }
        score
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(v, _)| v)
            .unwrap_or(comp.vars[0])
    }

    fn compile_component(&mut self, comp: Component) -> Result<NodeId, DdnnfError> {
        self.check_budget()?;
        let key = self.options.cache.then(|| self.cache_key(&comp));
        if let Some(&hit) = key.as_ref().and_then(|k| self.cache.get(k)) {
            return Ok(hit);
        }
        let var = self.choose(&comp);
        let mut branches = [NodeId::FALSE; 2];
        for (slot, positive) in [(0, true), (1, false)] {
            let mark = self.trail.len();
            self.assign(Lit::new(var, positive));
            if self.propagate(mark) {
                branches[slot] = self.branch(&comp.clauses, mark + 1)?;
            }
            self.undo(mark);
        }
        let node = self.builder.decision(var, branches[0], branches[1]);
        if let Some(k) = key {
            self.cache.insert(k, node);
        }
        Ok(node)
    }
}
