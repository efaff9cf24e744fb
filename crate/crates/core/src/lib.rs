//! Counting and reasoning over the bounded-length plans of grounded STRIPS
//! tasks.
//!
//! A task and a length bound are encoded into CNF whose models are exactly
//! the plans ([`encoder`]), the CNF is compiled into a decision-DNNF
//! ([`ddnnf`]), and counting, probability, brave/cautious, facet and
//! sampling queries run on the compiled form ([`reasoning`], [`session`]).
//! [`oracle`] enumerates plans directly and is the reference the compiled
//! answers are tested against.

pub mod cnf;
pub mod ddnnf;
pub mod encoder;
pub mod fixtures;
pub mod oracle;
pub mod query;
pub mod reasoning;
pub mod session;
pub mod task;

pub use cnf::{Assignment, Clause, Cnf, Lit};
pub use ddnnf::{compile, CompileOptions, Ddnnf, DdnnfError};
pub use encoder::{encode, Encoding, VarMap, VarTag};
pub use query::{plan_satisfies_query, Query, QueryKind, QueryLit, QueryVar};
pub use reasoning::{
    Commitment, CommitmentKind, Facet, FacetSign, NamedCommitment, OperatorSets, PlanSpace, Probability,
    ReasoningError, View,
};
pub use session::{FacetRow, NavSession, SessionError, SessionOptions, Snapshot};
pub use task::{LengthBound, PartialState, Plan, PlanningTask, State};
