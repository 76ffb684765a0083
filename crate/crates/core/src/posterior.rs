//! From specified evidence to a posterior over the number of events.
//!
//! Every piece of evidence, discounted for a subset, supports that subset's
//! existence to the degree it supports anything at all. That support is
//! discounted by how strongly all evidence points away from the subset,
//! the per-subset supports are combined, regrouped into statements
//! `|χ| ≥ r`, and finally fused with the prior over counts.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{combine, conflict_of, BeliefError, FocalSet, Frame, MassFunction, MAX_FRAME, TOTAL_CONFLICT_EPS};
use crate::evidence::PriorCounts;
use crate::specify::{MembershipMasses, SpecificationAssessment};

/// Largest number of subsets expanded term by term.
pub const MAX_EXISTENCE_SUBSETS: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PosteriorError {
    #[error("no evidence supports subset {0}")]
    NoEvidence(usize),
    #[error("evidence discounted for subset {0} is totally contradictory")]
    ContradictoryExistence(usize),
    #[error("{0} subsets exceed the expansion limit of {MAX_EXISTENCE_SUBSETS}")]
    TooManySubsets(usize),
    #[error("the prior and the count evidence totally contradict each other")]
    TotalConflict,
    #[error("counts up to {0} do not fit a belief frame")]
    CountFrameTooLarge(usize),
    #[error(transparent)]
    Belief(#[from] BeliefError),
}

/// Support that one subset exists, before and after emptiness discounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetExistence {
    pub subset: usize,
    pub mass_exists: f64,
    pub mass_theta: f64,
    /// Conflict among the discounted action bpas.
    pub conflict_k: f64,
    pub emptiness_alpha: f64,
    pub discounted_exists: f64,
    pub discounted_theta: f64,
}

/// `(mass_exists, mass_theta, k)` from bpas discounted for one subset.
pub fn subset_existence(discounted: &[MassFunction]) -> Result<(f64, f64, f64), PosteriorError> {
    if discounted.is_empty() {
        return Err(PosteriorError::NoEvidence(0));
    }
    let k = conflict_of(discounted)?;
    if k >= 1.0 - TOTAL_CONFLICT_EPS {
        return Err(PosteriorError::Belief(BeliefError::TotalConflict));
    }
    let theta = (discounted.iter().map(MassFunction::theta).product::<f64>() / (1.0 - k)).clamp(0.0, 1.0);
    Ok((1.0 - theta, theta, k))
}

/// Credibility that subset `i` is non-empty: one minus the product, over
/// all evidence, of the support against that evidence being in `i`.
///
/// Exactly one when `i` is a singleton whose member is anchored there.
pub fn emptiness_alpha(i: usize, memberships: &[MembershipMasses]) -> f64 {
    if memberships.iter().any(|m| m.home == i && m.is_anchored()) {
        return 1.0;
    }
    let empty: f64 = memberships
        .iter()
        .map(|m| match m.in_own {
            Some(own) if m.home != i => 1.0 - (1.0 - m.against(i)) * (1.0 - own),
            _ => m.against(i),
        })
        .product();
    (1.0 - empty).clamp(0.0, 1.0)
}

/// Existence evidence for subset `i` from all specified evidence.
pub fn existence_for(i: usize, assessments: &[SpecificationAssessment]) -> Result<SubsetExistence, PosteriorError> {
    let discounted: Vec<MassFunction> = assessments
        .iter()
        .map(|a| a.discounted_per_subset.get(i).cloned().ok_or(PosteriorError::NoEvidence(i)))
        .collect::<Result<_, _>>()?;
    let (mass_exists, mass_theta, conflict_k) = subset_existence(&discounted).map_err(|e| match e {
        PosteriorError::Belief(BeliefError::TotalConflict) => PosteriorError::ContradictoryExistence(i),
        PosteriorError::NoEvidence(_) => PosteriorError::NoEvidence(i),
        other => other,
    })?;
    let memberships: Vec<MembershipMasses> = assessments.iter().map(|a| a.membership.clone()).collect();
    let alpha = emptiness_alpha(i, &memberships);
    Ok(SubsetExistence {
        subset: i,
        mass_exists,
        mass_theta,
        conflict_k,
        emptiness_alpha: alpha,
        discounted_exists: alpha * mass_exists,
        discounted_theta: 1.0 - alpha + alpha * mass_theta,
    })
}

/// Existence evidence for subsets `0..r`.
pub fn existence_all(
    r: usize,
    assessments: &[SpecificationAssessment],
) -> Result<Vec<SubsetExistence>, PosteriorError> {
    (0..r).map(|i| existence_for(i, assessments)).collect()
}

/// Mass on the conjunction "every subset in `subsets` exists"; the empty
/// conjunction is Θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExistenceTerm {
    pub subsets: Vec<usize>,
    pub mass: f64,
}

/// Product expansion over all `2^r` conjunctions of subset existence.
pub fn combine_existence(existence: &[SubsetExistence]) -> Result<Vec<ExistenceTerm>, PosteriorError> {
    let r = existence.len();
    if r > MAX_EXISTENCE_SUBSETS {
        return Err(PosteriorError::TooManySubsets(r));
    }
    Ok((0u32..1 << r)
        .map(|mask| {
            let mass = existence
                .iter()
                .enumerate()
                .map(|(i, s)| if mask & (1 << i) != 0 { s.discounted_exists } else { s.discounted_theta })
                .product();
            let subsets = (0..r).filter(|i| mask & (1 << i) != 0).collect();
            ExistenceTerm { subsets, mass }
        })
        .collect())
}

/// Masses on `|χ| ≥ r` for `r = 1..=n` and on Θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountBpa {
    pub at_least: BTreeMap<usize, f64>,
    pub theta: f64,
}

impl CountBpa {
    pub fn total(&self) -> f64 {
        self.theta + self.at_least.values().sum::<f64>()
    }

    pub fn at_least(&self, r: usize) -> f64 {
        self.at_least.get(&r).copied().unwrap_or(0.0)
    }

    fn max_count(&self) -> usize {
        self.at_least.iter().rev().find(|(_, &m)| m > 0.0).map_or(0, |(&r, _)| r)
    }
}

/// Group conjunction masses by conjunction length.
pub fn count_bpa(terms: &[ExistenceTerm]) -> CountBpa {
    let mut at_least = BTreeMap::new();
    let mut theta = 0.0;
    for term in terms {
        if term.subsets.is_empty() {
            theta += term.mass;
        } else {
            *at_least.entry(term.subsets.len()).or_insert(0.0) += term.mass;
        }
    }
    CountBpa { at_least, theta }
}

/// Count bpa straight from per-subset existence, without expanding the
/// conjunctions (Poisson-binomial recursion). Works for any number of
/// subsets.
pub fn count_bpa_direct(existence: &[SubsetExistence]) -> CountBpa {
    let mut dist = vec![1.0];
    for s in existence {
        let mut next = vec![0.0; dist.len() + 1];
        for (r, &p) in dist.iter().enumerate() {
            next[r] += p * s.discounted_theta;
            next[r + 1] += p * s.discounted_exists;
        }
        dist = next;
    }
    let theta = dist[0];
    let at_least = dist.into_iter().enumerate().skip(1).collect();
    CountBpa { at_least, theta }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDistribution {
    /// Posterior probability per event count, over the prior's support.
    pub masses: BTreeMap<usize, f64>,
    pub conflict_k: f64,
}

impl PosteriorDistribution {
    pub fn mass(&self, count: usize) -> f64 {
        self.masses.get(&count).copied().unwrap_or(0.0)
    }
}

/// Dempster combination of the prior with the count bpa, in closed form.
pub fn posterior(prior: &PriorCounts, cb: &CountBpa) -> Result<PosteriorDistribution, PosteriorError> {
    let conflict_k: f64 = prior
        .entries()
        .map(|(i, p)| p * cb.at_least.range(i + 1..).fold(0.0, |acc, (_, m)| acc + m))
        .fold(0.0, |acc, x| acc + x);
    if conflict_k >= 1.0 - TOTAL_CONFLICT_EPS {
        return Err(PosteriorError::TotalConflict);
    }
    let masses = prior
        .support()
        .map(|i| {
            let compatible = cb.at_least.range(..=i).fold(cb.theta, |acc, (_, m)| acc + m);
            (i, prior.mass(i) * compatible / (1.0 - conflict_k))
        })
        .collect();
    Ok(PosteriorDistribution { masses, conflict_k })
}

/// The same combination done generically over the frame of counts
/// `{0, .., r_max}`.
pub fn posterior_by_combination(prior: &PriorCounts, cb: &CountBpa) -> Result<PosteriorDistribution, PosteriorError> {
    let r_max = prior.max_count().max(cb.max_count());
    if r_max + 1 > MAX_FRAME {
        return Err(PosteriorError::CountFrameTooLarge(r_max));
    }
    let frame = Arc::new(Frame::new((0..=r_max).map(|i| i.to_string()))?);
    let full = frame.full();
    let prior_bpa = MassFunction::new(frame.clone(), prior.support().map(|i| (FocalSet::singleton(i), prior.mass(i))))?;
    let mut entries: Vec<(FocalSet, f64)> = cb
        .at_least
        .iter()
        .filter(|(&r, _)| r <= r_max)
        .map(|(&r, &m)| (FocalSet::from_indices(r..=r_max), m))
        .collect();
    entries.push((full, cb.theta));
    let count_evidence = MassFunction::new(frame, entries)?;
    let (combined, conflict_k) = combine(&prior_bpa, &count_evidence).map_err(|e| match e {
        BeliefError::TotalConflict => PosteriorError::TotalConflict,
        other => PosteriorError::Belief(other),
    })?;
    let masses = prior.support().map(|i| (i, combined.mass(FocalSet::singleton(i)))).collect();
    Ok(PosteriorDistribution { masses, conflict_k })
}
