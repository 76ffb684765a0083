//! Finite-frame belief functions.
//!
//! A [`Frame`] holds at most 64 hypotheses so a [`FocalSet`] is a plain
//! bitmask. [`MassFunction`] is a normalized basic probability assignment
//! over such a frame; combination, discounting, belief and plausibility all
//! operate on it.
//!
//! Raw conflicts over arbitrary collections are computed by
//! [`conflict_of`], which is also exposed generically through the [`Meet`]
//! trait so that product frames (used for evidence with event parts) can
//! share the same enumeration code.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported frame.
pub const MAX_FRAME: usize = 64;

/// Absolute tolerance used for normalization checks.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Cross-products larger than this are folded pairwise instead of enumerated.
pub const ENUMERATION_LIMIT: f64 = 1e6;

/// Conflicts at or above `1 - TOTAL_CONFLICT_EPS` count as total contradiction.
pub const TOTAL_CONFLICT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BeliefError {
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("unknown hypothesis label `{0}`")]
    UnknownLabel(String),
    #[error("focal set {set:#x} is outside a frame of {size} hypotheses")]
    OutOfFrame { set: u64, size: usize },
    #[error("mass functions are defined over different frames")]
    FrameMismatch,
    #[error("mass {0} is outside [0, 1]")]
    InvalidMass(f64),
    #[error("mass assigned to the empty set")]
    EmptyFocalSet,
    #[error("masses sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("total conflict: the combined evidence is contradictory")]
    TotalConflict,
    #[error("discount factor {0} is outside [0, 1]")]
    InvalidDiscount(f64),
}

/// Ordered, fixed list of mutually exclusive hypotheses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Frame {
    labels: Vec<String>,
}

impl Frame {
    pub fn new<I, S>(labels: I) -> Result<Self, BeliefError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(BeliefError::InvalidFrame("a frame needs at least one hypothesis".into()));
        }
        if labels.len() > MAX_FRAME {
            return Err(BeliefError::InvalidFrame(format!(
                "{} hypotheses exceed the limit of {MAX_FRAME}",
                labels.len()
            )));
        }
        for (i, label) in labels.iter().enumerate() {
            if label.is_empty() {
                return Err(BeliefError::InvalidFrame("empty hypothesis label".into()));
            }
            if labels[..i].contains(label) {
                return Err(BeliefError::InvalidFrame(format!("duplicate label `{label}`")));
            }
        }
        Ok(Self { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// The whole frame, Θ.
    pub fn full(&self) -> FocalSet {
        FocalSet::full(self.len())
    }

    /// Resolve a list of labels to a focal set.
    pub fn set_of<S: AsRef<str>>(&self, labels: &[S]) -> Result<FocalSet, BeliefError> {
        labels.iter().try_fold(FocalSet::EMPTY, |acc, l| {
            let l = l.as_ref();
            self.index_of(l)
                .map(|i| acc.union(FocalSet::singleton(i)))
                .ok_or_else(|| BeliefError::UnknownLabel(l.to_string()))
        })
    }

    pub fn labels_of(&self, set: FocalSet) -> Vec<String> {
        set.iter().map(|i| self.labels[i].clone()).collect()
    }

    pub fn contains(&self, set: FocalSet) -> bool {
        set.is_subset_of(self.full())
    }
}

impl TryFrom<Vec<String>> for Frame {
    type Error = BeliefError;

    fn try_from(labels: Vec<String>) -> Result<Self, Self::Error> {
        Frame::new(labels)
    }
}

impl From<Frame> for Vec<String> {
    fn from(frame: Frame) -> Self {
        frame.labels
    }
}

/// Subset of a frame, stored as a bitmask over hypothesis indices.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct FocalSet(u64);

impl FocalSet {
    pub const EMPTY: FocalSet = FocalSet(0);

    pub fn from_bits(bits: u64) -> Self {
        FocalSet(bits)
    }

    pub fn full(size: usize) -> Self {
        if size >= 64 {
            FocalSet(u64::MAX)
        } else {
            FocalSet((1u64 << size) - 1)
        }
    }

    pub fn singleton(index: usize) -> Self {
        assert!(index < MAX_FRAME, "hypothesis index {index} out of range");
        FocalSet(1u64 << index)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        indices.into_iter().fold(FocalSet::EMPTY, |acc, i| acc.union(FocalSet::singleton(i)))
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, index: usize) -> bool {
        index < 64 && self.0 & (1u64 << index) != 0
    }

    pub fn intersect(self, other: FocalSet) -> FocalSet {
        FocalSet(self.0 & other.0)
    }

    pub fn union(self, other: FocalSet) -> FocalSet {
        FocalSet(self.0 | other.0)
    }

    pub fn minus(self, other: FocalSet) -> FocalSet {
        FocalSet(self.0 & !other.0)
    }

    pub fn is_subset_of(self, other: FocalSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn intersects(self, other: FocalSet) -> bool {
        self.0 & other.0 != 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |&i| self.0 & (1u64 << i) != 0)
    }
}

impl fmt::Debug for FocalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Intersection over focal elements of some frame. `None` means empty.
pub trait Meet: Copy + Ord {
    fn meet(self, other: Self) -> Option<Self>;
}

impl Meet for FocalSet {
    fn meet(self, other: Self) -> Option<Self> {
        let both = self.intersect(other);
        (!both.is_empty()).then_some(both)
    }
}

/// Conflict of a collection of focal-element lists: the total product mass of
/// selections (one focal element per list) whose intersection is empty.
///
/// Small cross-products are enumerated; large ones are folded pairwise
/// without normalization. Empty and singleton collections have no conflict.
pub fn raw_conflict<F: Meet>(parts: &[Vec<(F, f64)>]) -> f64 {
    let size: f64 = parts.iter().map(|p| p.len() as f64).product();
    if size <= ENUMERATION_LIMIT {
        enumerated_conflict(parts)
    } else {
        folded_conflict(parts)
    }
}

/// Conflict by walking the full cross-product of focal selections.
pub fn enumerated_conflict<F: Meet>(parts: &[Vec<(F, f64)>]) -> f64 {
    fn compatible<F: Meet>(rest: &[Vec<(F, f64)>], acc: F, weight: f64) -> f64 {
        match rest.split_first() {
            None => weight,
            Some((head, tail)) => head
                .iter()
                .filter(|(_, m)| *m > 0.0)
                .map(|&(f, m)| match acc.meet(f) {
                    Some(joint) => compatible(tail, joint, weight * m),
                    None => 0.0,
                })
                .sum(),
        }
    }

    if parts.len() < 2 {
        return 0.0;
    }
    let (head, tail) = parts.split_first().expect("non-empty");
    let kept: f64 = head.iter().filter(|(_, m)| *m > 0.0).map(|&(f, m)| compatible(tail, f, m)).sum();
    (1.0 - kept).clamp(0.0, 1.0)
}

/// Conflict by unnormalized sequential combination. Equal to
/// [`enumerated_conflict`] up to rounding.
pub fn folded_conflict<F: Meet>(parts: &[Vec<(F, f64)>]) -> f64 {
    if parts.len() < 2 {
        return 0.0;
    }
    let mut acc: BTreeMap<F, f64> = BTreeMap::new();
    for &(f, m) in &parts[0] {
        if m > 0.0 {
            *acc.entry(f).or_insert(0.0) += m;
        }
    }
    for part in &parts[1..] {
        let mut next = BTreeMap::new();
        for (&a, &ma) in &acc {
            for &(b, mb) in part {
                if mb <= 0.0 {
                    continue;
                }
                if let Some(joint) = a.meet(b) {
                    *next.entry(joint).or_insert(0.0) += ma * mb;
                }
            }
        }
        acc = next;
    }
    (1.0 - acc.values().sum::<f64>()).clamp(0.0, 1.0)
}

/// Normalized basic probability assignment over a [`Frame`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MassFunctionRepr", into = "MassFunctionRepr")]
pub struct MassFunction {
    frame: Arc<Frame>,
    masses: BTreeMap<FocalSet, f64>,
}

impl MassFunction {
    /// Build from focal assignments. Duplicate sets are merged and zero
    /// masses dropped; the result must sum to one.
    pub fn new<I>(frame: Arc<Frame>, entries: I) -> Result<Self, BeliefError>
    where
        I: IntoIterator<Item = (FocalSet, f64)>,
    {
        let mut masses = BTreeMap::new();
        for (set, mass) in entries {
            if !mass.is_finite() || !(0.0..=1.0 + MASS_TOLERANCE).contains(&mass) {
                return Err(BeliefError::InvalidMass(mass));
            }
            if !frame.contains(set) {
                return Err(BeliefError::OutOfFrame { set: set.bits(), size: frame.len() });
            }
            if mass == 0.0 {
                continue;
            }
            if set.is_empty() {
                return Err(BeliefError::EmptyFocalSet);
            }
            *masses.entry(set).or_insert(0.0) += mass;
        }
        for v in masses.values_mut() {
            *v = v.min(1.0);
        }
        let total: f64 = masses.values().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(BeliefError::NotNormalized(total));
        }
        Ok(Self { frame, masses })
    }

    /// All mass on Θ.
    pub fn vacuous(frame: Arc<Frame>) -> Self {
        let full = frame.full();
        Self { frame, masses: BTreeMap::from([(full, 1.0)]) }
    }

    /// `mass` on `set`, the remainder on Θ.
    pub fn simple_support(frame: Arc<Frame>, set: FocalSet, mass: f64) -> Result<Self, BeliefError> {
        if !(0.0..=1.0).contains(&mass) {
            return Err(BeliefError::InvalidMass(mass));
        }
        let full = frame.full();
        Self::new(frame, [(set, mass), (full, 1.0 - mass)])
    }

    pub fn frame(&self) -> &Arc<Frame> {
        &self.frame
    }

    pub fn mass(&self, set: FocalSet) -> f64 {
        self.masses.get(&set).copied().unwrap_or(0.0)
    }

    pub fn theta(&self) -> f64 {
        self.mass(self.frame.full())
    }

    pub fn focal_elements(&self) -> impl Iterator<Item = (FocalSet, f64)> + '_ {
        self.masses.iter().map(|(&s, &m)| (s, m))
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.masses.values().sum()
    }

    pub fn same_frame(&self, other: &MassFunction) -> bool {
        Arc::ptr_eq(&self.frame, &other.frame) || self.frame == other.frame
    }

    pub fn focal_list(&self) -> Vec<(FocalSet, f64)> {
        self.focal_elements().collect()
    }

    fn check_set(&self, set: FocalSet) -> Result<(), BeliefError> {
        if self.frame.contains(set) {
            Ok(())
        } else {
            Err(BeliefError::OutOfFrame { set: set.bits(), size: self.frame.len() })
        }
    }

    /// Sum of masses of focal sets contained in `set`.
    pub fn belief(&self, set: FocalSet) -> Result<f64, BeliefError> {
        self.check_set(set)?;
        Ok(self.focal_elements().filter(|(f, _)| f.is_subset_of(set)).fold(0.0, |acc, (_, m)| acc + m))
    }

    /// Sum of masses of focal sets intersecting `set`.
    pub fn plausibility(&self, set: FocalSet) -> Result<f64, BeliefError> {
        self.check_set(set)?;
        Ok(self.focal_elements().filter(|(f, _)| f.intersects(set)).fold(0.0, |acc, (_, m)| acc + m))
    }

    /// Scale every non-Θ mass by `alpha` and move the remainder to Θ.
    pub fn discount(&self, alpha: f64) -> Result<MassFunction, BeliefError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(BeliefError::InvalidDiscount(alpha));
        }
        let full = self.frame.full();
        let mut masses: BTreeMap<FocalSet, f64> = self
            .focal_elements()
            .filter(|&(s, _)| s != full)
            .map(|(s, m)| (s, alpha * m))
            .filter(|&(_, m)| m > 0.0)
            .collect();
        masses.insert(full, 1.0 - alpha + alpha * self.theta());
        Ok(Self { frame: self.frame.clone(), masses })
    }
}

/// Dempster's rule. Returns the normalized combination and the conflict.
pub fn combine(a: &MassFunction, b: &MassFunction) -> Result<(MassFunction, f64), BeliefError> {
    if !a.same_frame(b) {
        return Err(BeliefError::FrameMismatch);
    }
    let mut joint: BTreeMap<FocalSet, f64> = BTreeMap::new();
    let mut conflict = 0.0;
    for (x, mx) in a.focal_elements() {
        for (y, my) in b.focal_elements() {
            let z = x.intersect(y);
            if z.is_empty() {
                conflict += mx * my;
            } else {
                *joint.entry(z).or_insert(0.0) += mx * my;
            }
        }
    }
    let kept: f64 = joint.values().sum();
    if kept <= TOTAL_CONFLICT_EPS {
        return Err(BeliefError::TotalConflict);
    }
    for m in joint.values_mut() {
        *m /= kept;
    }
    let conflict = conflict.clamp(0.0, 1.0);
    Ok((MassFunction { frame: a.frame.clone(), masses: joint }, conflict))
}

/// Conflict of combining every mass function in `set` at once.
///
/// Unlike [`combine`], total contradiction is a legal result here.
pub fn conflict_of(set: &[MassFunction]) -> Result<f64, BeliefError> {
    if let Some(first) = set.first() {
        if set.iter().any(|m| !m.same_frame(first)) {
            return Err(BeliefError::FrameMismatch);
        }
    }
    let parts: Vec<Vec<(FocalSet, f64)>> = set.iter().map(MassFunction::focal_list).collect();
    Ok(raw_conflict(&parts))
}

#[derive(Serialize, Deserialize)]
struct MassFunctionRepr {
    frame: Vec<String>,
    focal: Vec<FocalRepr>,
}

#[derive(Serialize, Deserialize)]
struct FocalRepr {
    set: Vec<String>,
    mass: f64,
}

impl From<MassFunction> for MassFunctionRepr {
    fn from(m: MassFunction) -> Self {
        let focal = m.focal_elements().map(|(s, mass)| FocalRepr { set: m.frame.labels_of(s), mass }).collect();
        MassFunctionRepr { frame: m.frame.labels().to_vec(), focal }
    }
}

impl TryFrom<MassFunctionRepr> for MassFunction {
    type Error = BeliefError;

    fn try_from(repr: MassFunctionRepr) -> Result<Self, Self::Error> {
        let frame = Arc::new(Frame::new(repr.frame)?);
        let entries =
            repr.focal.iter().map(|f| Ok((frame.set_of(&f.set)?, f.mass))).collect::<Result<Vec<_>, BeliefError>>()?;
        MassFunction::new(frame, entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame() -> Arc<Frame> {
        Arc::new(Frame::new(["brown_employee", "brown_nonemployee", "red"]).unwrap())
    }

    fn support(f: &Arc<Frame>, labels: &[&str], mass: f64) -> MassFunction {
        MassFunction::simple_support(f.clone(), f.set_of(labels).unwrap(), mass).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn frame_rejects_bad_labels() {
        assert!(Frame::new(Vec::<String>::new()).is_err());
        assert!(Frame::new(["a", "a"]).is_err());
        assert!(Frame::new(["a", ""]).is_err());
        assert!(Frame::new((0..65).map(|i| i.to_string())).is_err());
        assert_eq!(Frame::new((0..64).map(|i| i.to_string())).unwrap().full().len(), 64);
    }

    #[test]
    fn mass_function_validation() {
        let f = frame();
        let bi = f.set_of(&["brown_employee"]).unwrap();
        assert_eq!(MassFunction::new(f.clone(), [(bi, 0.5)]), Err(BeliefError::NotNormalized(0.5)));
        assert_eq!(
            MassFunction::new(f.clone(), [(FocalSet::EMPTY, 0.5), (f.full(), 0.5)]),
            Err(BeliefError::EmptyFocalSet)
        );
        assert!(matches!(
            MassFunction::new(f.clone(), [(bi, -0.1), (f.full(), 1.1)]),
            Err(BeliefError::InvalidMass(_))
        ));
        assert!(matches!(
            MassFunction::new(f.clone(), [(FocalSet::singleton(5), 1.0)]),
            Err(BeliefError::OutOfFrame { .. })
        ));
        assert_eq!(f.set_of(&["blond"]), Err(BeliefError::UnknownLabel("blond".into())));
    }

    #[test]
    fn combine_disjoint_simple_supports() {
        let f = frame();
        let a = support(&f, &["brown_employee"], 0.7);
        let b = support(&f, &["red"], 0.6);
        let (m, k) = combine(&a, &b).unwrap();
        assert!(close(k, 0.42, 1e-12));
        assert!(close(m.mass(f.set_of(&["brown_employee"]).unwrap()), 0.28 / 0.58, 1e-12));
        assert!(close(m.mass(f.set_of(&["red"]).unwrap()), 0.18 / 0.58, 1e-12));
        assert!(close(m.theta(), 0.12 / 0.58, 1e-12));
        assert!(close(m.mass(f.set_of(&["brown_employee"]).unwrap()), 0.4828, 5e-5));
        assert!(close(m.mass(f.set_of(&["red"]).unwrap()), 0.3103, 5e-5));
        assert!(close(m.theta(), 0.2069, 5e-5));
    }

    #[test]
    fn combine_with_vacuous_is_identity() {
        let f = frame();
        let a = support(&f, &["brown_employee", "red"], 0.35);
        let (m, k) = combine(&a, &MassFunction::vacuous(f.clone())).unwrap();
        assert_eq!(k, 0.0);
        assert_eq!(m, a);
    }

    #[test]
    fn combine_errors() {
        let f = frame();
        let g = Arc::new(Frame::new(["x", "y"]).unwrap());
        let a = support(&f, &["red"], 0.5);
        let b = MassFunction::vacuous(g);
        assert_eq!(combine(&a, &b).unwrap_err(), BeliefError::FrameMismatch);
        let c = MassFunction::new(f.clone(), [(f.set_of(&["red"]).unwrap(), 1.0)]).unwrap();
        let d = MassFunction::new(f.clone(), [(f.set_of(&["brown_employee"]).unwrap(), 1.0)]).unwrap();
        assert_eq!(combine(&c, &d).unwrap_err(), BeliefError::TotalConflict);
        assert_eq!(conflict_of(&[c, d]).unwrap(), 1.0);
    }

    #[test]
    fn conflict_of_examples() {
        let f = frame();
        let bo = support(&f, &["brown_nonemployee"], 0.8);
        let bi = support(&f, &["brown_employee"], 0.7);
        let r = support(&f, &["red"], 0.6);
        let b = support(&f, &["brown_employee", "brown_nonemployee"], 0.5);
        assert!(close(conflict_of(&[bo.clone(), bi.clone(), r.clone()]).unwrap(), 0.788, 1e-12));
        assert!(close(conflict_of(&[bo.clone(), b.clone()]).unwrap(), 0.0, 1e-12));
        assert!(close(conflict_of(&[bi.clone(), r.clone(), b.clone()]).unwrap(), 0.51, 1e-12));
        assert_eq!(conflict_of(&[]).unwrap(), 0.0);
        assert_eq!(conflict_of(&[bo]).unwrap(), 0.0);
    }

    #[test]
    fn fold_and_enumeration_agree() {
        let f = frame();
        let set = [
            support(&f, &["brown_nonemployee"], 0.8),
            support(&f, &["brown_employee"], 0.7),
            support(&f, &["red"], 0.6),
            support(&f, &["brown_employee", "brown_nonemployee"], 0.5),
        ];
        let parts: Vec<_> = set.iter().map(MassFunction::focal_list).collect();
        assert!(close(enumerated_conflict(&parts), folded_conflict(&parts), 1e-12));
    }

    #[test]
    fn discount_examples() {
        let f = frame();
        let bi = f.set_of(&["brown_employee"]).unwrap();
        let m = support(&f, &["brown_employee"], 0.7);
        let d = m.discount(0.7648).unwrap();
        assert!(close(d.mass(bi), 0.5354, 5e-5));
        assert!(close(d.theta(), 0.4646, 5e-5));
        assert_eq!(m.discount(1.0).unwrap(), m);
        assert_eq!(m.discount(0.0).unwrap(), MassFunction::vacuous(f.clone()));
        assert_eq!(m.discount(1.5).unwrap_err(), BeliefError::InvalidDiscount(1.5));
        assert!(m.discount(-0.1).is_err());
    }

    #[test]
    fn belief_and_plausibility() {
        let f = frame();
        let bi = f.set_of(&["brown_employee"]).unwrap();
        let r = f.set_of(&["red"]).unwrap();
        let vac = MassFunction::vacuous(f.clone());
        assert_eq!(vac.belief(bi).unwrap(), 0.0);
        assert_eq!(vac.plausibility(bi).unwrap(), 1.0);
        assert_eq!(vac.belief(f.full()).unwrap(), 1.0);
        let m = support(&f, &["brown_employee"], 0.7);
        assert!(close(m.belief(bi).unwrap(), 0.7, 1e-12));
        assert!(close(m.plausibility(bi).unwrap(), 1.0, 1e-12));
        assert!(close(m.plausibility(r).unwrap(), 0.3, 1e-12));
        assert!(m.belief(FocalSet::singleton(9)).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let f = frame();
        let m = support(&f, &["brown_employee", "red"], 0.25);
        let json = serde_json::to_string(&m).unwrap();
        let back: MassFunction = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        let bad = r#"{"frame":["a","b"],"focal":[{"set":["a"],"mass":0.4}]}"#;
        assert!(serde_json::from_str::<MassFunction>(bad).is_err());
    }
}
