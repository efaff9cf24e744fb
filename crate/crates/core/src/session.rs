//! Interactive navigation: a user narrows a plan space by committing to
//! facets or prefix steps, and can take commitments back.

use std::sync::Arc;

use num_bigint::BigUint;
use serde::Serialize;
use thiserror::Error;
use uuid::Uuid;

use crate::reasoning::{
    serialize_biguint, Commitment, FacetSign, NamedCommitment, PlanSpace, Probability, ReasoningError, View,
};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("`{0}` would eliminate all plans")]
    WouldEliminateAllPlans(NamedCommitment),
    #[error("nothing to undo")]
    NothingToUndo,
    #[error(transparent)]
    Reasoning(#[from] ReasoningError),
}

#[derive(Debug, Clone, Copy)]
pub struct SessionOptions {
    /// Plans sampled into every snapshot.
    pub sample_k: usize,
    pub seed: u64,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self { sample_k: 3, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FacetRow {
    pub op: String,
    pub sign: FacetSign,
    pub significance: Probability,
}

/// The state of a session after some sequence of commitments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Snapshot {
    #[serde(serialize_with = "serialize_biguint")]
    pub count: BigUint,
    /// Number of facets of both signs.
    pub facet_count: usize,
    /// Inclusive before excluding, by operator id.
    pub facets: Vec<FacetRow>,
    pub commitments: Vec<NamedCommitment>,
    /// Uniformly sampled plans as operator names.
    pub samples: Vec<Vec<String>>,
}

impl Snapshot {
    pub fn of(view: &View<'_>, options: SessionOptions) -> Result<Self, ReasoningError> {
        let task = view.space().task();
        let facets = view
            .significance_table()?
            .into_iter()
            .map(|(f, significance)| FacetRow {
                op: task.op_name(f.op).to_string(),
                sign: f.sign,
                significance,
            })
            .collect::<Vec<_>>();
        let samples = if view.is_empty() || options.sample_k == 0 {
            Vec::new()
        } else {
            view.sample_plans(options.sample_k, options.seed)?
                .iter()
                .map(|p| task.plan_names(p))
                .collect()
        };
        Ok(Self {
            count: view.count().clone(),
            facet_count: facets.len(),
            facets,
            commitments: view.commitments().iter().map(|c| c.named(task)).collect(),
            samples,
        })
    }
}

/// A navigation session over a shared plan space.
#[derive(Debug)]
pub struct NavSession {
    id: Uuid,
    space: Arc<PlanSpace>,
    options: SessionOptions,
    commitments: Vec<Commitment>,
    /// Snapshots after each prefix of `commitments`; never empty.
    history: Vec<Snapshot>,
}

impl NavSession {
    pub fn open(space: Arc<PlanSpace>, options: SessionOptions) -> Result<Self, ReasoningError> {
        let first = Snapshot::of(&space.root(), options)?;
        Ok(Self {
            id: Uuid::new_v4(),
            space,
            options,
            commitments: Vec::new(),
            history: vec![first],
        })
    }

    pub fn id(&self) -> Uuid {
        self.id
    }

    pub fn space(&self) -> &Arc<PlanSpace> {
        &self.space
    }

    pub fn commitments(&self) -> &[Commitment] {
        &self.commitments
    }

    pub fn snapshot(&self) -> &Snapshot {
        self.history.last().expect("history is never empty")
    }

    /// The current view of the plan space.
    pub fn view(&self) -> Result<View<'_>, ReasoningError> {
        self.space.view(&self.commitments)
    }

    /// Adds a commitment unless it is inconsistent with the earlier ones or
    /// leaves no plan.
    pub fn commit(&mut self, c: Commitment) -> Result<&Snapshot, SessionError> {
        let next = self.view()?.with(c)?;
        if next.is_empty() {
            return Err(SessionError::WouldEliminateAllPlans(c.named(self.space.task())));
        }
        let snapshot = Snapshot::of(&next, self.options)?;
        self.commitments.push(c);
        self.history.push(snapshot);
        Ok(self.snapshot())
    }

    /// Takes back the latest commitment, restoring the previous snapshot.
    pub fn undo(&mut self) -> Result<&Snapshot, SessionError> {
        if self.commitments.pop().is_none() {
            return Err(SessionError::NothingToUndo);
        }
        self.history.pop();
        Ok(self.snapshot())
    }
}
