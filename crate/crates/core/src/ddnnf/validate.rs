//! Structural checks: acyclicity, decomposability and decision determinism.

use std::fmt;

use serde::Serialize;

use super::{Ddnnf, Node};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    /// A child does not precede its parent, so the DAG may contain a cycle.
    Order { child: usize },
    /// Two conjuncts share a variable.
    SharedVariable { left: usize, right: usize, var: u32 },
    /// A decision branch mentions the decision variable.
    DecisionVarInBranch { branch: usize, var: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub node: usize,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::Order { child } => {
                write!(f, "node {}: child {child} does not precede it", self.node)
            }
            ViolationKind::SharedVariable { left, right, var } => write!(
                f,
                "node {}: conjuncts {left} and {right} share variable {var}",
                self.node
            ),
            ViolationKind::DecisionVarInBranch { branch, var } => write!(
                f,
                "node {}: branch {branch} mentions decision variable {var}",
                self.node
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub(super) fn validate(d: &Ddnnf) -> ValidationReport {
    let mut violations = Vec::new();
    for (id, node) in d.nodes.iter().enumerate() {
        let children: Vec<usize> = match node {
            Node::And(cs) => cs.iter().map(|c| c.index()).collect(),
            Node::Decision { hi, lo, .. } => vec![hi.index(), lo.index()],
            _ => Vec::new(),
        };
        for &child in &children {
            if child >= id {
                violations.push(Violation {
                    node: id,
                    kind: ViolationKind::Order { child },
                });
            }
        }
        match node {
            Node::And(_) => {
                for (i, &left) in children.iter().enumerate() {
                    for &right in &children[i + 1..] {
                        let shared = d.supports[left].intersection(&d.supports[right]).next();
                        if let Some(var) = shared {
                            violations.push(Violation {
                                node: id,
                                kind: ViolationKind::SharedVariable {
                                    left,
                                    right,
                                    var: var as u32,
                                },
                            });
                        }
                    }
                }
            }
            Node::Decision { var, .. } => {
                for &branch in &children {
                    if d.supports[branch].contains(*var as usize) {
                        violations.push(Violation {
                            node: id,
                            kind: ViolationKind::DecisionVarInBranch { branch, var: *var },
                        });
                    }
                }
            }
            _ => {}
        }
    }
    ValidationReport { violations }
}
