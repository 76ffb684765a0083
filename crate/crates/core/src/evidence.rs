//! Nonspecific evidence, partitions into subsets, and the metaconflict
//! criterion.
//!
//! A piece of [`Evidence`] pairs an action bpa with a crisp event part: the
//! set of events the proposition may refer to. Inside one subset two pieces
//! conflict when their action parts are disjoint or their event parts are
//! disjoint, so every non-Θ focal element lives in the product frame
//! `events × actions` and the residual Θ mass carries no event restriction.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{raw_conflict, BeliefError, FocalSet, Frame, MassFunction, Meet};

/// Tolerance for a prior over event counts summing to one.
pub const PRIOR_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error("evidence `{0}` has an empty event part")]
    EmptyEventPart(String),
    #[error("evidence pieces are defined over different action frames")]
    FrameMismatch,
    #[error("duplicate evidence id `{0}`")]
    DuplicateId(String),
    #[error("no evidence supplied")]
    NoEvidence,
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
}

/// Focal element of the joint `events × actions` frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum JointFocal {
    /// Θ of the joint frame.
    Whole,
    Part {
        events: FocalSet,
        action: FocalSet,
    },
}

impl Meet for JointFocal {
    fn meet(self, other: Self) -> Option<Self> {
        match (self, other) {
            (JointFocal::Whole, x) | (x, JointFocal::Whole) => Some(x),
            (JointFocal::Part { events: e1, action: a1 }, JointFocal::Part { events: e2, action: a2 }) => {
                let events = e1.intersect(e2);
                let action = a1.intersect(a2);
                (!events.is_empty() && !action.is_empty()).then_some(JointFocal::Part { events, action })
            }
        }
    }
}

/// A weakly specified proposition: what happened (action part) and which
/// events it might concern (event part).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    id: String,
    action: MassFunction,
    events: FocalSet,
}

impl Evidence {
    pub fn new(id: impl Into<String>, action: MassFunction, events: FocalSet) -> Result<Self, ModelError> {
        let id = id.into();
        if events.is_empty() {
            return Err(ModelError::EmptyEventPart(id));
        }
        Ok(Self { id, action, events })
    }

    /// One focal element with `mass`, the rest on Θ.
    pub fn simple(
        id: impl Into<String>,
        frame: Arc<Frame>,
        action: FocalSet,
        mass: f64,
        events: FocalSet,
    ) -> Result<Self, ModelError> {
        Self::new(id, MassFunction::simple_support(frame, action, mass)?, events)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn action(&self) -> &MassFunction {
        &self.action
    }

    pub fn events(&self) -> FocalSet {
        self.events
    }

    /// Focal elements lifted to the joint frame.
    pub fn joint_focals(&self) -> Vec<(JointFocal, f64)> {
        let full = self.action.frame().full();
        self.action
            .focal_elements()
            .map(|(set, m)| {
                let focal =
                    if set == full { JointFocal::Whole } else { JointFocal::Part { events: self.events, action: set } };
                (focal, m)
            })
            .collect()
    }
}

/// Prior probability over the number of events, `m(E_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<usize, f64>", into = "BTreeMap<usize, f64>")]
pub struct PriorCounts {
    masses: BTreeMap<usize, f64>,
}

impl PriorCounts {
    pub fn new<I: IntoIterator<Item = (usize, f64)>>(entries: I) -> Result<Self, ModelError> {
        let mut masses = BTreeMap::new();
        for (count, p) in entries {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(ModelError::InvalidPrior(format!("m(E_{count}) = {p} is not a probability")));
            }
            *masses.entry(count).or_insert(0.0) += p;
        }
        let total: f64 = masses.values().sum();
        if (total - 1.0).abs() > PRIOR_TOLERANCE {
            return Err(ModelError::InvalidPrior(format!("probabilities sum to {total}, expected 1")));
        }
        Ok(Self { masses })
    }

    pub fn mass(&self, count: usize) -> f64 {
        self.masses.get(&count).copied().unwrap_or(0.0)
    }

    /// Counts with nonzero probability, ascending.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.masses.iter().filter(|(_, &p)| p > 0.0).map(|(&c, _)| c)
    }

    pub fn max_count(&self) -> usize {
        self.support().last().unwrap_or(0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.masses.iter().map(|(&c, &p)| (c, p))
    }
}

impl TryFrom<BTreeMap<usize, f64>> for PriorCounts {
    type Error = ModelError;

    fn try_from(map: BTreeMap<usize, f64>) -> Result<Self, Self::Error> {
        PriorCounts::new(map)
    }
}

impl From<PriorCounts> for BTreeMap<usize, f64> {
    fn from(prior: PriorCounts) -> Self {
        prior.masses
    }
}

/// Assignment of evidence indices `0..n` to disjoint, non-empty subsets.
///
/// Members of each subset are kept sorted; the order of subsets is the
/// labelling `χ_1..χ_r` and is preserved as given.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    subsets: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(mut subsets: Vec<Vec<usize>>, n: usize) -> Result<Self, ModelError> {
        if subsets.is_empty() {
            return Err(ModelError::InvalidPartition("no subsets".into()));
        }
        let mut seen = vec![false; n];
        for subset in &mut subsets {
            if subset.is_empty() {
                return Err(ModelError::InvalidPartition("empty subset".into()));
            }
            subset.sort_unstable();
            for &q in subset.iter() {
                match seen.get_mut(q) {
                    None => return Err(ModelError::InvalidPartition(format!("evidence index {q} out of range"))),
                    Some(true) => {
                        return Err(ModelError::InvalidPartition(format!("evidence index {q} assigned twice")))
                    }
                    Some(s) => *s = true,
                }
            }
        }
        if let Some(q) = seen.iter().position(|s| !s) {
            return Err(ModelError::InvalidPartition(format!("evidence index {q} not assigned")));
        }
        Ok(Self { subsets })
    }

    /// Everything in one subset.
    pub fn single(n: usize) -> Self {
        Self { subsets: vec![(0..n).collect()] }
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn count(&self) -> usize {
        self.subsets.len()
    }

    pub fn len(&self) -> usize {
        self.subsets.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    /// Index of the subset holding evidence `q`.
    pub fn subset_of(&self, q: usize) -> Option<usize> {
        self.subsets.iter().position(|s| s.binary_search(&q).is_ok())
    }

    /// Subsets ordered by smallest member; independent of labelling.
    pub fn canonical(&self) -> Vec<Vec<usize>> {
        let mut blocks = self.subsets.clone();
        blocks.sort_unstable_by_key(|b| b[0]);
        blocks
    }

    /// Same grouping, possibly different labelling.
    pub fn same_grouping(&self, other: &Partition) -> bool {
        self.canonical() == other.canonical()
    }

    pub fn as_sets(&self) -> BTreeSet<Vec<usize>> {
        self.subsets.iter().cloned().collect()
    }
}

/// Conflict terms and metaconflict of a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaconflictAssessment {
    /// Domain conflict between the subset count and the prior.
    pub c0: f64,
    /// Within-subset conflicts in subset order.
    pub subset_conflicts: Vec<f64>,
    pub mcf: f64,
    /// Plausibility that the partition is adequate, `1 - mcf`.
    pub pls_adp: f64,
}

/// Conflict within one subset of evidence.
pub fn subset_conflict(subset: &[&Evidence]) -> Result<f64, ModelError> {
    if let Some(first) = subset.first() {
        if subset.iter().any(|e| !e.action().same_frame(first.action())) {
            return Err(ModelError::FrameMismatch);
        }
    }
    let parts: Vec<_> = subset.iter().map(|e| e.joint_focals()).collect();
    Ok(raw_conflict(&parts))
}

/// Conflict between `r` subsets and the prior: `1 - m(E_r)`.
pub fn domain_conflict(r: usize, prior: &PriorCounts) -> f64 {
    (1.0 - prior.mass(r)).clamp(0.0, 1.0)
}

/// `1 - (1 - c0) Π (1 - c_i)`.
///
/// The product runs over `conflicts` in the given order, so callers wanting
/// labelling-independent rounding pass them in canonical order.
pub fn combine_metaconflict(c0: f64, conflicts: impl IntoIterator<Item = f64>) -> f64 {
    let pls = conflicts.into_iter().fold(1.0 - c0, |acc, c| acc * (1.0 - c));
    (1.0 - pls).clamp(0.0, 1.0)
}

/// Validated evidence collection with its prior over event counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    action_frame: Arc<Frame>,
    evidence: Vec<Evidence>,
    prior: PriorCounts,
}

impl Problem {
    pub fn new(evidence: Vec<Evidence>, prior: PriorCounts) -> Result<Self, ModelError> {
        let first = evidence.first().ok_or(ModelError::NoEvidence)?;
        let action_frame = first.action().frame().clone();
        let mut ids = BTreeSet::new();
        for e in &evidence {
            if !e.action().same_frame(first.action()) {
                return Err(ModelError::FrameMismatch);
            }
            if !ids.insert(e.id()) {
                return Err(ModelError::DuplicateId(e.id().to_string()));
            }
        }
        Ok(Self { action_frame, evidence, prior })
    }

    pub fn action_frame(&self) -> &Arc<Frame> {
        &self.action_frame
    }

    pub fn evidence(&self) -> &[Evidence] {
        &self.evidence
    }

    pub fn len(&self) -> usize {
        self.evidence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.evidence.is_empty()
    }

    pub fn prior(&self) -> &PriorCounts {
        &self.prior
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.evidence.iter().position(|e| e.id() == id)
    }

    /// Conflict of the evidence at `members` (indices into this problem).
    pub fn conflict(&self, members: &[usize]) -> f64 {
        let parts: Vec<_> = members.iter().map(|&q| self.evidence[q].joint_focals()).collect();
        raw_conflict(&parts)
    }

    pub fn domain_conflict(&self, r: usize) -> f64 {
        domain_conflict(r, &self.prior)
    }

    /// Full metaconflict assessment of `partition`.
    ///
    /// Members are evaluated in sorted order and the product is taken over
    /// subsets ordered by smallest member, so two labellings of the same
    /// grouping yield bit-identical `mcf`.
    pub fn metaconflict(&self, partition: &Partition) -> MetaconflictAssessment {
        let c0 = self.domain_conflict(partition.count());
        let subset_conflicts: Vec<f64> = partition.subsets().iter().map(|s| self.conflict(s)).collect();
        let mut order: Vec<usize> = (0..partition.count()).collect();
        order.sort_unstable_by_key(|&i| partition.subsets()[i][0]);
        let mcf = combine_metaconflict(c0, order.iter().map(|&i| subset_conflicts[i]));
        MetaconflictAssessment { c0, subset_conflicts, mcf, pls_adp: 1.0 - mcf }
    }
}
