//! c2d-style NNF text format.
//!
//! ```text
//! nnf <nodes> <edges> <vars>
//! L <lit>
//! A <k> <child ids...>
//! O <var> 2 <child> <child>
//! ```
//!
//! Lines are numbered from 0 and children refer to earlier lines. `A 0` is
//! true and `O 0 0` is false. As in c2d output, each child of a decision
//! line `O x 2` is a conjunction containing `x` or `-x` (or that literal
//! alone), so the files are readable by other d-DNNF tools. Only reachable
//! nodes are written.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::{Builder, Ddnnf, DdnnfError, Node, NodeId};
use crate::cnf::Lit;

#[derive(Default)]
struct Writer {
    lines: Vec<String>,
    edges: usize,
    lits: HashMap<i64, usize>,
    false_line: Option<usize>,
}

impl Writer {
    fn push(&mut self, line: String, edges: usize) -> usize {
        self.lines.push(line);
        self.edges += edges;
        self.lines.len() - 1
    }

    fn lit(&mut self, lit: i64) -> usize {
        if let Some(&id) = self.lits.get(&lit) {
            return id;
        }
        let id = self.push(format!("L {lit}"), 0);
        self.lits.insert(lit, id);
        id
    }

    fn falsum(&mut self) -> usize {
        if let Some(id) = self.false_line {
            return id;
        }
        let id = self.push("O 0 0".into(), 0);
        self.false_line = Some(id);
        id
    }

    /// `lit ∧ branch` as a line id.
    fn guarded(&mut self, lit: i64, branch: NodeId, line_of: &[usize]) -> usize {
        match branch {
            NodeId::TRUE => self.lit(lit),
            NodeId::FALSE => self.falsum(),
            _ => {
                let l = self.lit(lit);
                self.push(format!("A 2 {l} {}", line_of[branch.index()]), 2)
            }
        }
    }
}

fn reachable(d: &Ddnnf) -> Vec<bool> {
    let mut seen = vec![false; d.nodes.len()];
    let mut stack = vec![d.root];
    while let Some(id) = stack.pop() {
        if std::mem::replace(&mut seen[id.index()], true) {
            continue;
        }
        match &d.nodes[id.index()] {
            Node::And(cs) => stack.extend(cs),
            Node::Decision { hi, lo, .. } => stack.extend([*hi, *lo]),
            _ => {}
        }
    }
    seen
}

pub(super) fn write_nnf<W: Write>(d: &Ddnnf, mut out: W) -> std::io::Result<()> {
    let seen = reachable(d);
    let mut w = Writer::default();
    let mut line_of = vec![usize::MAX; d.nodes.len()];
    for (id, node) in d.nodes.iter().enumerate() {
        if !seen[id] {
            continue;
        }
        line_of[id] = match node {
            Node::True => w.push("A 0".into(), 0),
            Node::False => w.falsum(),
            Node::Lit(l) => w.lit(l.to_dimacs()),
            Node::And(cs) => {
                let ids: Vec<String> = cs.iter().map(|c| line_of[c.index()].to_string()).collect();
                w.push(format!("A {} {}", cs.len(), ids.join(" ")), cs.len())
            }
            Node::Decision { var, hi, lo } => {
                let x = i64::from(*var);
                let a = w.guarded(x, *hi, &line_of);
                let b = w.guarded(-x, *lo, &line_of);
                w.push(format!("O {var} 2 {a} {b}"), 2)
            }
        };
    }
    writeln!(out, "nnf {} {} {}", w.lines.len(), w.edges, d.num_vars)?;
    for line in &w.lines {
        writeln!(out, "{line}")?;
    }
    Ok(())
}

struct Reader {
    builder: Builder,
    /// Node id per line, plus the conjuncts of conjunction lines so decision
    /// children can be unwrapped.
    ids: Vec<NodeId>,
    conjuncts: Vec<Option<Vec<NodeId>>>,
}

fn parse_err(line: usize, message: impl Into<String>) -> DdnnfError {
    DdnnfError::Parse {
        line,
        message: message.into(),
    }
}

impl Reader {
    fn child(&self, lineno: usize, token: &str) -> Result<usize, DdnnfError> {
        let c: usize = token
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad child id `{token}`")))?;
        if c >= self.ids.len() {
            return Err(parse_err(lineno, format!("child {c} is not an earlier node")));
        }
        Ok(c)
    }

    /// Splits a decision child into the polarity of `var` it asserts and
    /// the remaining branch.
    fn unwrap_branch(&mut self, lineno: usize, child: usize, var: u32) -> Result<Option<(bool, NodeId)>, DdnnfError> {
        let id = self.ids[child];
        if id == NodeId::FALSE {
            return Ok(None);
        }
        let parts = match &self.conjuncts[child] {
            Some(parts) => parts.clone(),
            None => vec![id],
        };
        for (i, &p) in parts.iter().enumerate() {
            if let Node::Lit(l) = self.builder.nodes[p.index()] {
                if l.var() == var {
                    let rest: Vec<NodeId> = parts
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .map(|(_, &n)| n)
                        .collect();
                    return Ok(Some((l.is_positive(), self.builder.and(rest))));
                }
            }
        }
        Err(parse_err(
            lineno,
            format!("decision child {child} does not assert variable {var}"),
        ))
    }
}

pub(super) fn read_nnf<R: BufRead>(input: R) -> Result<Ddnnf, DdnnfError> {
    let mut header: Option<(usize, usize, u32)> = None;
    let mut reader: Option<Reader> = None;
    let mut edges = 0usize;
    for (idx, line) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() || tokens[0] == "c" {
            continue;
        }
        let Some((nodes, _, num_vars)) = header else {
            if tokens.len() != 4 || tokens[0] != "nnf" {
                return Err(parse_err(lineno, "expected header `nnf <nodes> <edges> <vars>`"));
            }
            let num = |t: &str| {
                t.parse::<usize>()
                    .map_err(|_| parse_err(lineno, format!("bad header number `{t}`")))
            };
            let parsed = (num(tokens[1])?, num(tokens[2])?, num(tokens[3])? as u32);
            header = Some(parsed);
            reader = Some(Reader {
                builder: Builder::new(parsed.2),
                ids: Vec::with_capacity(parsed.0),
                conjuncts: Vec::with_capacity(parsed.0),
            });
            continue;
        };
        let r = reader.as_mut().expect("reader exists after header");
        if r.ids.len() == nodes {
            return Err(parse_err(lineno, format!("more than the declared {nodes} nodes")));
        }
        let int = |t: &str| {
            t.parse::<i64>()
                .map_err(|_| parse_err(lineno, format!("bad number `{t}`")))
        };
        let arity = |k: i64, expected: usize| {
            if k < 0 || k as usize != expected {
                Err(parse_err(lineno, format!("declared {k} children, found {expected}")))
            } else {
                Ok(())
            }
        };
        let (id, conj) = match tokens[0] {
            "L" if tokens.len() == 2 => {
                let lit = int(tokens[1])?;
                let var = lit.unsigned_abs();
                if lit == 0 || var > u64::from(num_vars) {
                    return Err(parse_err(lineno, format!("literal {lit} outside 1..={num_vars}")));
                }
                (r.builder.lit(Lit::new(var as u32, lit > 0)), None)
            }
            "A" if tokens.len() >= 2 => {
                arity(int(tokens[1])?, tokens.len() - 2)?;
                let mut parts = Vec::with_capacity(tokens.len() - 2);
                for t in &tokens[2..] {
                    parts.push(r.ids[r.child(lineno, t)?]);
                }
                edges += parts.len();
                (r.builder.and(parts.iter().copied()), Some(parts))
            }
            "O" if tokens.len() >= 3 => {
                let var = int(tokens[1])?;
                arity(int(tokens[2])?, tokens.len() - 3)?;
                let children = tokens.len() - 3;
                edges += children;
                if children == 0 {
                    (NodeId::FALSE, None)
                } else if var <= 0 || var > i64::from(num_vars) || children != 2 {
                    return Err(parse_err(
                        lineno,
                        "only decision disjunctions `O <var> 2 <a> <b>` are supported",
                    ));
                } else {
                    let var = var as u32;
                    let a = r.child(lineno, tokens[3])?;
                    let b = r.child(lineno, tokens[4])?;
                    let (mut hi, mut lo) = (NodeId::FALSE, NodeId::FALSE);
                    let mut seen = [false; 2];
                    for c in [a, b] {
                        if let Some((positive, rest)) = r.unwrap_branch(lineno, c, var)? {
                            if std::mem::replace(&mut seen[positive as usize], true) {
                                return Err(parse_err(lineno, "both decision children have the same polarity"));
                            }
                            if positive {
                                hi = rest;
                            } else {
                                lo = rest;
                            }
                        }
                    }
                    (r.builder.decision(var, hi, lo), None)
                }
            }
            other => return Err(parse_err(lineno, format!("unrecognized node line `{other}`"))),
        };
        r.ids.push(id);
        r.conjuncts.push(conj);
    }
    let Some((nodes, declared_edges, _)) = header else {
        return Err(parse_err(0, "missing header"));
    };
    let r = reader.expect("reader exists after header");
    if r.ids.len() != nodes {
        return Err(parse_err(0, format!("declared {nodes} nodes, found {}", r.ids.len())));
    }
    if edges != declared_edges {
        return Err(parse_err(0, format!("declared {declared_edges} edges, found {edges}")));
    }
    let root = *r.ids.last().ok_or_else(|| parse_err(0, "no nodes"))?;
    Ok(r.builder.finish(root))
}
