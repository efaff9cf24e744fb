//! Command results and their two renderings: one JSON object per line, or
//! plain text for people.

use std::collections::BTreeSet;
use std::io::{self, Write};

use num_bigint::BigUint;
use planspace_core::ddnnf::Violation;
use planspace_core::oracle::OracleStats;
use planspace_core::reasoning::serialize_biguint;
use planspace_core::{Facet, FacetRow, FacetSign, LengthBound, Plan, PlanSpace, PlanningTask, Probability};
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

pub trait Emit: Serialize {
    fn human(&self, out: &mut dyn Write) -> io::Result<()>;
}

fn names(task: &PlanningTask, ops: impl IntoIterator<Item = usize>) -> Vec<String> {
    ops.into_iter().map(|o| task.op_name(o).to_string()).collect()
}

fn plan_line(plan: &[String]) -> String {
    if plan.is_empty() {
        "(empty plan)".to_string()
    } else {
        plan.join(" ")
    }
}

fn list_line(ops: &[String]) -> String {
    if ops.is_empty() {
        "(none)".to_string()
    } else {
        ops.join(", ")
    }
}

#[derive(Serialize)]
pub struct Count {
    #[serde(serialize_with = "serialize_biguint")]
    pub count: BigUint,
    pub length: usize,
}

impl Count {
    pub fn new(ps: &PlanSpace) -> Self {
        Self {
            count: ps.count().clone(),
            length: ps.bound().get(),
        }
    }
}

impl Emit for Count {
    fn human(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "{} plans of length at most {}", self.count, self.length)
    }
}

#[derive(Serialize)]
pub struct Exists {
    pub exists: bool,
    pub length: usize,
}

impl Emit for Exists {
    fn human(&self, out: &mut dyn Write) -> io::Result<()> {
        let verdict = if self.exists { "a plan exists" } else { "no plan exists" };
        writeln!(out, "{verdict} within length {}", self.length)
    }
}

#[derive(Serialize)]
pub struct TopK {
    #[serde(serialize_with = "serialize_biguint")]
    pub k: BigUint,
    pub holds: bool,
    #[serde(serialize_with = "serialize_biguint")]
    pub count: BigUint,
    pub length: usize,
}

impl Emit for TopK {
    fn human(&self, out: &mut dyn Write) -> io::Result<()> {
        let verdict = if self.holds { "at least" } else { "fewer than" };
        writeln!(
            out,
            "{verdict} {} plans within length {} ({} in total)",
            self.k, self.length, self.count
        )
    }
}

/// Brave or cautious operators, keyed by which of the two they are.
pub struct OpSet {
    key: &'static str,
    ops: Vec<String>,
    length: usize,
}

impl OpSet {
    pub fn brave(ps: &PlanSpace, ops: BTreeSet<usize>) -> Self {
        Self {
            key: "brave",
            ops: names(ps.task(), ops),
            length: ps.bound().get(),
        }
    }

    pub fn cautious(ps: &PlanSpace, ops: BTreeSet<usize>) -> Self {
        Self {
            key: "cautious",
            ops: names(ps.task(), ops),
            length: ps.bound().get(),
        }
    }
}

impl Serialize for OpSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(2))?;
        map.serialize_entry(self.key, &self.ops)?;
        map.serialize_entry("length", &self.length)?;
        map.end()
    }
}

impl Emit for OpSet {
    fn human(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "{}: {}", self.key, list_line(&self.ops))
    }
}

#[derive(Serialize)]
pub struct FacetList {
    /// Operators with both an inclusive and an excluding facet.
    pub facets: Vec<String>,
    pub facet_count: usize,
    pub length: usize,
}

impl FacetList {
    pub fn new(ps: &PlanSpace, ops: BTreeSet<usize>) -> Self {
        Self {
            facet_count: 2 * ops.len(),
            facets: names(ps.task(), ops),
            length: ps.bound().get(),
        }
    }
}

impl Emit for FacetList {
    fn human(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "{} facets: {}", self.facet_count, list_line(&self.facets))
    }
}

#[derive(Serialize)]
pub struct SignificanceReport {
    pub facets: Vec<FacetRow>,
    pub facet_count: usize,
    pub length: usize,
}

impl SignificanceReport {
    pub fn new(ps: &PlanSpace, table: Vec<(Facet, Probability)>) -> Self {
        let facets: Vec<FacetRow> = table
            .into_iter()
            .map(|(f, significance)| FacetRow {
                op: ps.task().op_name(f.op).to_string(),
                sign: f.sign,
                significance,
            })
            .collect();
        Self {
            facet_count: facets.len(),
            facets,
            length: ps.bound().get(),
        }
    }
}

pub fn facet_row_line(row: &FacetRow) -> String {
    let sign = match row.sign {
        FacetSign::Inclusive => '+',
        FacetSign::Excluding => '-',
    };
    format!(
        "{sign}{}  {}  ({:.1}%)",
        row.op,
        row.significance,
        100.0 * row.significance.to_f64()
    )
}

impl Emit for SignificanceReport {
    fn human(&self, out: &mut dyn Write) -> io::Result<()> {
        if self.facets.is_empty() {
            return writeln!(out, "no facets: the plan space is fully determined");
        }
        for row in &self.facets {
            writeln!(out, "{}", facet_row_line(row))?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
#[serde(transparent)]
pub struct ProbabilityReport(pub Probability);

impl Emit for ProbabilityReport {
    fn human(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "{} ({})", self.0, self.0.to_f64())
    }
}

#[derive(Serialize)]
pub struct Enumerated {
    pub plans: Vec<Vec<String>>,
    pub truncated: bool,
    #[serde(serialize_with = "serialize_biguint")]
    pub count: BigUint,
    pub length: usize,
}

impl Enumerated {
    pub fn new(ps: &PlanSpace, plans: &[Plan], truncated: bool) -> Self {
        Self {
            plans: plans.iter().map(|p| ps.task().plan_names(p)).collect(),
            truncated,
            count: ps.count().clone(),
            length: ps.bound().get(),
        }
    }
}

impl Emit for Enumerated {
    fn human(&self, out: &mut dyn Write) -> io::Result<()> {
        for plan in &self.plans {
            writeln!(out, "{}", plan_line(plan))?;
        }
        if self.truncated {
            writeln!(out, "... {} of {} plans shown", self.plans.len(), self.count)?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
pub struct Sampled {
    pub plans: Vec<Vec<String>>,
    pub seed: u64,
    pub length: usize,
}

impl Sampled {
    pub fn new(ps: &PlanSpace, plans: &[Plan], seed: u64) -> Self {
        Self {
            plans: plans.iter().map(|p| ps.task().plan_names(p)).collect(),
            seed,
            length: ps.bound().get(),
        }
    }
}

impl Emit for Sampled {
    fn human(&self, out: &mut dyn Write) -> io::Result<()> {
        for plan in &self.plans {
            writeln!(out, "{}", plan_line(plan))?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
pub struct OracleReport {
    #[serde(serialize_with = "serialize_biguint")]
    pub count: BigUint,
    pub brave: Vec<String>,
    pub cautious: Vec<String>,
    pub facets: Vec<String>,
    pub length: usize,
}

impl OracleReport {
    pub fn new(task: &PlanningTask, bound: LengthBound, stats: OracleStats) -> Self {
        let facets = stats.brave.difference(&stats.cautious).copied().collect::<Vec<_>>();
        Self {
            count: stats.count,
            brave: names(task, stats.brave),
            cautious: names(task, stats.cautious),
            facets: names(task, facets),
            length: bound.get(),
        }
    }
}

impl Emit for OracleReport {
    fn human(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "{} plans of length at most {}", self.count, self.length)?;
        writeln!(out, "brave: {}", list_line(&self.brave))?;
        writeln!(out, "cautious: {}", list_line(&self.cautious))?;
        writeln!(out, "facets: {}", list_line(&self.facets))
    }
}

#[derive(Serialize)]
pub struct Validation {
    pub valid: bool,
    pub nodes: usize,
    pub edges: usize,
    pub violations: Vec<Violation>,
    pub length: usize,
}

impl Validation {
    pub fn new(ps: &PlanSpace) -> Self {
        let d = ps.ddnnf();
        let report = d.validate();
        Self {
            valid: report.is_valid(),
            nodes: d.nodes().len(),
            edges: d.num_edges(),
            violations: report.violations,
            length: ps.bound().get(),
        }
    }
}

impl Emit for Validation {
    fn human(&self, out: &mut dyn Write) -> io::Result<()> {
        if self.valid {
            writeln!(
                out,
                "valid: {} nodes, {} edges, decomposable and deterministic",
                self.nodes, self.edges
            )
        } else {
            writeln!(out, "{} violations in {} nodes:", self.violations.len(), self.nodes)?;
            for v in &self.violations {
                writeln!(out, "  {v}")?;
            }
            Ok(())
        }
    }
}
