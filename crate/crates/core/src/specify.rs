//! Specifying nonspecific evidence from conflict variations.
//!
//! For every piece of evidence we observe how conflicts change when it is
//! moved out of its subset, into each other subset, or into a new subset of
//! its own. Each variation becomes a simple support function on the
//! "membership frame" whose hypotheses are the subsets (plus the candidate
//! new subset). Combining them yields plausibilities of membership, a
//! falsity degree (the combination conflict) and per-subset credibilities
//! used to discount the original action bpa.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{BeliefError, FocalSet, Frame, MassFunction, MAX_FRAME, TOTAL_CONFLICT_EPS};
use crate::evidence::{Evidence, Partition, Problem};

/// Denominators at or below this use the limit convention.
pub const DENOMINATOR_EPS: f64 = 1e-12;

/// Largest number of non-trivial factors expanded into an explicit bpa.
pub const MAX_EXPANSION_FACTORS: usize = 20;

const RANGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecifyError {
    #[error("evidence index {0} is not in the partition")]
    NotInPartition(usize),
    #[error("membership mass {value} for {what} is outside [0, 1]")]
    MassOutOfRange { what: String, value: f64 },
    #[error("{0} subsets are too many for an explicit membership bpa")]
    TooManySubsets(usize),
    #[error(transparent)]
    Belief(#[from] BeliefError),
}

/// Metalevel evidence about where one piece of evidence belongs.
///
/// `subsets[j]` is `m(e ∉ χ_j)`; it is `None` only for the home subset when
/// the evidence is alone there and removing it would raise the domain
/// conflict, in which case `in_own` carries `m(e ∈ χ_home)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipMasses {
    pub evidence_id: String,
    pub home: usize,
    pub subsets: Vec<Option<f64>>,
    /// `m(e ∉ χ_new)`, present when the home subset has other members.
    pub new_subset: Option<f64>,
    pub in_own: Option<f64>,
    pub diagnostics: Vec<String>,
}

impl MembershipMasses {
    /// Mass against membership in `j`, zero when absent.
    pub fn against(&self, j: usize) -> f64 {
        self.subsets.get(j).copied().flatten().unwrap_or(0.0)
    }

    /// Evidence alone in its subset with support for staying there.
    pub fn is_anchored(&self) -> bool {
        self.in_own.is_some()
    }

    fn all_against(&self) -> impl Iterator<Item = f64> + '_ {
        self.subsets.iter().flatten().copied().chain(self.new_subset)
    }
}

/// `numerator / denominator`, with a zero denominator resolved to 1 for a
/// positive numerator and 0 otherwise.
fn variation(numerator: f64, denominator: f64, what: &str, diagnostics: &mut Vec<String>) -> Result<f64, SpecifyError> {
    let value = if denominator <= DENOMINATOR_EPS {
        let v = if numerator > DENOMINATOR_EPS { 1.0 } else { 0.0 };
        diagnostics.push(format!("{what}: zero denominator, limit value {v} used"));
        v
    } else {
        numerator / denominator
    };
    if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&value) {
        return Err(SpecifyError::MassOutOfRange { what: what.to_string(), value });
    }
    Ok(value.clamp(0.0, 1.0))
}

/// Membership masses of evidence `q` under `partition`.
pub fn membership_masses(problem: &Problem, partition: &Partition, q: usize) -> Result<MembershipMasses, SpecifyError> {
    let home = partition.subset_of(q).ok_or(SpecifyError::NotInPartition(q))?;
    let subsets = partition.subsets();
    let r = subsets.len();
    let id = problem.evidence()[q].id().to_string();
    let mut diagnostics = Vec::new();
    let mut against = vec![None; r];

    for (j, members) in subsets.iter().enumerate().filter(|&(j, _)| j != home) {
        let before = problem.conflict(members);
        let mut joined = members.clone();
        joined.push(q);
        joined.sort_unstable();
        let after = problem.conflict(&joined);
        let what = format!("{id} into subset {}", j + 1);
        against[j] = Some(variation(after - before, 1.0 - before, &what, &mut diagnostics)?);
    }

    let c0 = problem.domain_conflict(r);
    let mut new_subset = None;
    let mut in_own = None;
    let members = &subsets[home];
    if members.len() > 1 {
        let before = problem.conflict(members);
        let rest: Vec<usize> = members.iter().copied().filter(|&x| x != q).collect();
        let after = problem.conflict(&rest);
        let what = format!("{id} out of subset {}", home + 1);
        against[home] = Some(variation(before - after, 1.0 - after, &what, &mut diagnostics)?);

        let opened = problem.domain_conflict(r + 1);
        let mass = if opened > c0 {
            variation(opened - c0, 1.0 - c0, &format!("{id} into a new subset"), &mut diagnostics)?
        } else {
            0.0
        };
        new_subset = Some(mass);
    } else if r == 1 {
        // nowhere else to go: no variation is observable
        against[home] = Some(0.0);
    } else {
        let merged = problem.domain_conflict(r - 1);
        if c0 < merged {
            in_own = Some(c0 / merged);
        } else {
            let what = format!("{id} out of singleton subset {}", home + 1);
            against[home] = Some(variation(c0 - merged, 1.0 - merged, &what, &mut diagnostics)?);
        }
    }

    Ok(MembershipMasses { evidence_id: id, home, subsets: against, new_subset, in_own, diagnostics })
}

/// Falsity degree: conflict of combining all membership masses.
pub fn falsity(m: &MembershipMasses) -> f64 {
    if m.is_anchored() {
        0.0
    } else {
        m.all_against().product()
    }
}

/// Frame of subset hypotheses `chi_1..chi_r` and, when present, `chi_new`.
pub fn membership_frame(m: &MembershipMasses) -> Result<Arc<Frame>, SpecifyError> {
    let size = m.subsets.len() + usize::from(m.new_subset.is_some());
    if size > MAX_FRAME {
        return Err(SpecifyError::TooManySubsets(m.subsets.len()));
    }
    let mut labels: Vec<String> = (1..=m.subsets.len()).map(|j| format!("chi_{j}")).collect();
    if m.new_subset.is_some() {
        labels.push("chi_new".into());
    }
    Ok(Arc::new(Frame::new(labels)?))
}

/// Product expansion of all membership masses into one bpa over the
/// membership frame, with the falsity degree `k`.
///
/// A totally conflicting item (`k = 1`) yields the vacuous bpa.
pub fn combine_membership(m: &MembershipMasses) -> Result<(MassFunction, f64), SpecifyError> {
    let frame = membership_frame(m)?;
    let full = frame.full();
    let mut factors: Vec<(FocalSet, f64)> = m
        .subsets
        .iter()
        .enumerate()
        .filter_map(|(j, mass)| mass.map(|v| (full.minus(FocalSet::singleton(j)), v)))
        .collect();
    if let Some(v) = m.new_subset {
        factors.push((full.minus(FocalSet::singleton(m.subsets.len())), v));
    }
    if let Some(v) = m.in_own {
        factors.push((FocalSet::singleton(m.home), v));
    }
    let open = factors.iter().filter(|(_, v)| *v > 0.0 && *v < 1.0).count();
    if open > MAX_EXPANSION_FACTORS {
        return Err(SpecifyError::TooManySubsets(m.subsets.len()));
    }

    let mut terms: Vec<(FocalSet, f64)> = vec![(full, 1.0)];
    for &(focal, mass) in &factors {
        let mut next = Vec::with_capacity(terms.len() * 2);
        for &(set, weight) in &terms {
            if mass > 0.0 {
                next.push((set.intersect(focal), weight * mass));
            }
            if mass < 1.0 {
                next.push((set, weight * (1.0 - mass)));
            }
        }
        terms = next;
    }
    let k = terms.iter().filter(|(s, _)| s.is_empty()).fold(0.0, |acc, (_, w)| acc + w);
    if k >= 1.0 - TOTAL_CONFLICT_EPS {
        return Ok((MassFunction::vacuous(frame), 1.0));
    }
    let kept = terms.into_iter().filter(|(s, _)| !s.is_empty()).map(|(s, w)| (s, w / (1.0 - k)));
    Ok((MassFunction::new(frame, kept)?, k))
}

/// Belief and plausibility that the evidence belongs to each subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipBeliefs {
    pub bel: Vec<f64>,
    pub pls: Vec<f64>,
    pub pls_new: Option<f64>,
}

pub fn membership_beliefs(m: &MembershipMasses) -> MembershipBeliefs {
    let r = m.subsets.len();
    let mut bel = vec![0.0; r];
    if let Some(own) = m.in_own {
        let others: f64 = (0..r).filter(|&j| j != m.home).map(|j| m.against(j)).product();
        bel[m.home] = own + (1.0 - own) * others;
        let pls = (0..r).map(|j| if j == m.home { 1.0 } else { (1.0 - own) * (1.0 - m.against(j)) }).collect();
        return MembershipBeliefs { bel, pls, pls_new: None };
    }
    let k = falsity(m);
    let norm = 1.0 - k;
    let scale = |v: f64| if norm <= TOTAL_CONFLICT_EPS { 0.0 } else { (1.0 - v) / norm };
    MembershipBeliefs { bel, pls: (0..r).map(|j| scale(m.against(j))).collect(), pls_new: m.new_subset.map(scale) }
}

/// Per-subset credibility `α_j`, and the candidate new subset's when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Credibilities {
    pub subsets: Vec<f64>,
    pub new_subset: Option<f64>,
}

impl Credibilities {
    pub fn total(&self) -> f64 {
        self.subsets.iter().sum::<f64>() + self.new_subset.unwrap_or(0.0)
    }
}

/// `α_j = (1 - Bel_home) Pls_j² / Σ_k Pls_k`, plus `Bel_home` for the home subset.
pub fn credibilities(beliefs: &MembershipBeliefs, home: usize) -> Credibilities {
    let anchor = beliefs.bel.get(home).copied().unwrap_or(0.0);
    let sum: f64 = beliefs.pls.iter().sum::<f64>() + beliefs.pls_new.unwrap_or(0.0);
    let share = |p: f64| if sum > 0.0 { (1.0 - anchor) * p * p / sum } else { 0.0 };
    let subsets = beliefs
        .pls
        .iter()
        .enumerate()
        .map(|(j, &p)| share(p) + if j == home { anchor } else { 0.0 })
        .map(|a| a.clamp(0.0, 1.0))
        .collect();
    Credibilities { subsets, new_subset: beliefs.pls_new.map(share) }
}

/// Discount the action bpa by its credibility `1 - k`.
pub fn falsity_discount(e: &Evidence, falsity_k: f64) -> Result<MassFunction, SpecifyError> {
    Ok(e.action().discount((1.0 - falsity_k).clamp(0.0, 1.0))?)
}

/// Discount `m` once more for each subset's credibility.
pub fn subset_specific_discount(
    m: &MassFunction,
    credibility: &Credibilities,
) -> Result<Vec<MassFunction>, SpecifyError> {
    credibility.subsets.iter().map(|&a| Ok(m.discount(a)?)).collect()
}

/// Everything derived about one piece of evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecificationAssessment {
    pub evidence_id: String,
    pub membership: MembershipMasses,
    pub falsity_k: f64,
    /// Combined membership bpa; absent when too many subsets to expand.
    pub combined: Option<MassFunction>,
    pub beliefs: MembershipBeliefs,
    pub credibility: Credibilities,
    pub discounted_for_falsity: MassFunction,
    pub discounted_per_subset: Vec<MassFunction>,
}

impl SpecificationAssessment {
    pub fn diagnostics(&self) -> &[String] {
        &self.membership.diagnostics
    }
}

/// Specify evidence `q` under `partition`.
pub fn specify(problem: &Problem, partition: &Partition, q: usize) -> Result<SpecificationAssessment, SpecifyError> {
    let mut membership = membership_masses(problem, partition, q)?;
    let falsity_k = falsity(&membership);
    let combined = match combine_membership(&membership) {
        Ok((m, _)) => Some(m),
        Err(SpecifyError::TooManySubsets(r)) => {
            membership.diagnostics.push(format!("{r} subsets: combined membership bpa not expanded"));
            None
        }
        Err(e) => return Err(e),
    };
    if falsity_k >= 1.0 - TOTAL_CONFLICT_EPS {
        membership
            .diagnostics
            .push(format!("{} is certainly false: membership evidence totally conflicts", membership.evidence_id));
    }
    let beliefs = membership_beliefs(&membership);
    let credibility = credibilities(&beliefs, membership.home);
    let discounted_for_falsity = falsity_discount(&problem.evidence()[q], falsity_k)?;
    let discounted_per_subset = subset_specific_discount(&discounted_for_falsity, &credibility)?;
    Ok(SpecificationAssessment {
        evidence_id: membership.evidence_id.clone(),
        membership,
        falsity_k,
        combined,
        beliefs,
        credibility,
        discounted_for_falsity,
        discounted_per_subset,
    })
}

/// Specify every piece of evidence, in evidence order.
pub fn specify_all(problem: &Problem, partition: &Partition) -> Result<Vec<SpecificationAssessment>, SpecifyError> {
    (0..problem.len()).map(|q| specify(problem, partition, q)).collect()
}
