//! Minimizing the metaconflict over partitions of the evidence.
//!
//! [`exhaustive_minimize`] enumerates every set partition (restricted growth
//! strings) and serves as the oracle for small inputs. [`local_minimize`] is
//! a steepest-descent single-move hill climber with seeded restarts; between
//! restarts, counts that provably cannot beat the current best are pruned by
//! [`count_verdicts`].

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evidence::{combine_metaconflict, MetaconflictAssessment, Partition, PriorCounts, Problem};

/// Largest input the exhaustive search accepts regardless of configuration.
pub const EXHAUSTIVE_HARD_LIMIT: usize = 16;

/// Two metaconflict values closer than this are treated as tied.
pub const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("{n} evidence items exceed the exhaustive search limit of {max}")]
    TooLarge { n: usize, max: usize },
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub max_exhaustive_n: usize,
    pub restarts: usize,
    pub rng_seed: u64,
    /// Restrict random restarts to these subset counts.
    pub candidate_counts: Option<Vec<usize>>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { max_exhaustive_n: 10, restarts: 32, rng_seed: 0, candidate_counts: None }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if !(1..=EXHAUSTIVE_HARD_LIMIT).contains(&self.max_exhaustive_n) {
            return Err(SearchError::InvalidConfig(format!(
                "max_exhaustive_n must be in 1..={EXHAUSTIVE_HARD_LIMIT}, got {}",
                self.max_exhaustive_n
            )));
        }
        if self.restarts == 0 {
            return Err(SearchError::InvalidConfig("restarts must be at least 1".into()));
        }
        if let Some(counts) = &self.candidate_counts {
            if counts.is_empty() || counts.contains(&0) {
                return Err(SearchError::InvalidConfig(
                    "candidate_counts must be a non-empty list of positive counts".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Why a subset count is or is not still worth searching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountVerdict {
    /// Holds the current best partition.
    Best,
    Candidate,
    /// Fewer subsets than the best count and less prior mass.
    PrunedFewerLessLikely,
    /// Its domain conflict alone already exceeds the best metaconflict.
    PrunedDomainBound,
}

impl CountVerdict {
    pub fn is_pruned(self) -> bool {
        matches!(self, CountVerdict::PrunedFewerLessLikely | CountVerdict::PrunedDomainBound)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountStatus {
    pub count: usize,
    pub verdict: CountVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: Partition,
    pub assessment: MetaconflictAssessment,
    pub explored_counts: Vec<CountStatus>,
    /// Metaconflict after each accepted move of the winning run.
    pub trace: Vec<f64>,
}

/// Verdict for every count in `1..=max_count` given an achieved minimum
/// `best_mcf` at `r_current` subsets.
pub fn count_verdicts(prior: &PriorCounts, best_mcf: f64, r_current: usize, max_count: usize) -> Vec<CountStatus> {
    let top = max_count.max(r_current);
    (1..=top)
        .map(|j| {
            let verdict = if j == r_current {
                CountVerdict::Best
            } else if best_mcf < 1.0 - prior.mass(j) {
                CountVerdict::PrunedDomainBound
            } else if j < r_current && prior.mass(j) < prior.mass(r_current) {
                CountVerdict::PrunedFewerLessLikely
            } else {
                CountVerdict::Candidate
            };
            CountStatus { count: j, verdict }
        })
        .collect()
}

/// Counts in `1..=max_count` not provably dominated by the current best.
pub fn prune_counts(prior: &PriorCounts, best_mcf: f64, r_current: usize, max_count: usize) -> BTreeSet<usize> {
    count_verdicts(prior, best_mcf, r_current, max_count)
        .into_iter()
        .filter(|s| !s.verdict.is_pruned())
        .map(|s| s.count)
        .collect()
}

/// Is `(mcf, partition)` preferred over `(best_mcf, best)`?
///
/// Lower metaconflict wins; within [`TIE_EPS`] fewer subsets win, then the
/// lexicographically smallest canonical grouping.
fn preferred(mcf: f64, partition: &Partition, best_mcf: f64, best: &Partition) -> bool {
    if mcf < best_mcf - TIE_EPS {
        return true;
    }
    if mcf > best_mcf + TIE_EPS {
        return false;
    }
    match partition.count().cmp(&best.count()) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => partition.canonical() < best.canonical(),
    }
}

/// Calls `visit` with every restricted growth string of length `n`.
fn for_each_rgs(n: usize, mut visit: impl FnMut(&[usize], usize)) {
    fn go(pos: usize, blocks: usize, rgs: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize], usize)) {
        if pos == rgs.len() {
            visit(rgs, blocks);
            return;
        }
        for b in 0..=blocks {
            rgs[pos] = b;
            go(pos + 1, blocks.max(b + 1), rgs, visit);
        }
    }
    if n == 0 {
        return;
    }
    let mut rgs = vec![0; n];
    go(1, 1, &mut rgs, &mut visit);
}

/// Memoized subset conflicts keyed by member bitmask (n ≤ 16).
struct MaskConflicts<'a> {
    problem: &'a Problem,
    table: Vec<f64>,
}

impl<'a> MaskConflicts<'a> {
    fn new(problem: &'a Problem) -> Self {
        Self { problem, table: vec![f64::NAN; 1usize << problem.len()] }
    }

    fn get(&mut self, mask: usize) -> f64 {
        if self.table[mask].is_nan() {
            let members: Vec<usize> = (0..self.problem.len()).filter(|q| mask & (1 << q) != 0).collect();
            self.table[mask] = self.problem.conflict(&members);
        }
        self.table[mask]
    }
}

fn visit_partitions(
    problem: &Problem,
    max_n: usize,
    mut visit: impl FnMut(&[usize], &[usize], f64),
) -> Result<(), SearchError> {
    let n = problem.len();
    let limit = max_n.min(EXHAUSTIVE_HARD_LIMIT);
    if n > limit {
        return Err(SearchError::TooLarge { n, max: limit });
    }
    let mut conflicts = MaskConflicts::new(problem);
    let mut masks = vec![0usize; n];
    for_each_rgs(n, |rgs, blocks| {
        masks[..blocks].iter_mut().for_each(|m| *m = 0);
        for (q, &b) in rgs.iter().enumerate() {
            masks[b] |= 1 << q;
        }
        let c0 = problem.domain_conflict(blocks);
        let mcf = combine_metaconflict(c0, masks[..blocks].iter().map(|&m| conflicts.get(m)));
        visit(rgs, &masks[..blocks], mcf);
    });
    Ok(())
}

fn partition_from_masks(masks: &[usize], n: usize) -> Partition {
    let subsets = masks.iter().map(|&m| (0..n).filter(|q| m & (1 << q) != 0).collect()).collect();
    Partition::new(subsets, n).expect("enumerated partitions are valid")
}

/// Global minimum of the metaconflict by enumerating all set partitions.
///
/// The returned partition lists subsets by smallest member.
pub fn exhaustive_minimize(problem: &Problem, max_n: usize) -> Result<SearchResult, SearchError> {
    let n = problem.len();
    let mut best: Option<(f64, Partition)> = None;
    let mut trace = Vec::new();
    visit_partitions(problem, max_n, |_, masks, mcf| {
        let replace = match &best {
            None => true,
            // cheap reject before building the partition
            Some((best_mcf, _)) if mcf > best_mcf + TIE_EPS => false,
            Some((best_mcf, current)) => preferred(mcf, &partition_from_masks(masks, n), *best_mcf, current),
        };
        if replace {
            trace.push(mcf);
            best = Some((mcf, partition_from_masks(masks, n)));
        }
    })?;
    let (_, best) = best.expect("at least one partition");
    let assessment = problem.metaconflict(&best);
    let explored_counts = count_verdicts(problem.prior(), assessment.mcf, best.count(), n);
    Ok(SearchResult { best, assessment, explored_counts, trace })
}

/// Minimum metaconflict for every subset count `1..=n`, by enumeration.
pub fn exhaustive_count_minima(problem: &Problem, max_n: usize) -> Result<Vec<f64>, SearchError> {
    let mut minima = vec![f64::INFINITY; problem.len()];
    visit_partitions(problem, max_n, |_, masks, mcf| {
        let slot = &mut minima[masks.len() - 1];
        if mcf < *slot {
            *slot = mcf;
        }
    })?;
    Ok(minima)
}

struct Climber<'a> {
    problem: &'a Problem,
    memo: HashMap<Vec<usize>, f64>,
}

impl<'a> Climber<'a> {
    fn new(problem: &'a Problem) -> Self {
        Self { problem, memo: HashMap::new() }
    }

    fn conflict(&mut self, members: &[usize]) -> f64 {
        if members.len() < 2 {
            return 0.0;
        }
        if let Some(&c) = self.memo.get(members) {
            return c;
        }
        let c = self.problem.conflict(members);
        self.memo.insert(members.to_vec(), c);
        c
    }

    /// Steepest descent from `start`; returns the local minimum and the
    /// metaconflict after every accepted move (starting value first).
    fn descend(&mut self, start: &Partition) -> (Vec<Vec<usize>>, Vec<f64>) {
        let mut blocks: Vec<Vec<usize>> = start.subsets().to_vec();
        let mut conflicts: Vec<f64> = blocks.iter().map(|b| self.conflict(b)).collect();
        let mut current = combine_metaconflict(self.problem.domain_conflict(blocks.len()), conflicts.iter().copied());
        let mut trace = vec![current];

        while let Some((mcf, mv)) = self.best_move(&blocks, &conflicts) {
            if mcf >= current - TIE_EPS {
                break;
            }
            apply_move(&mut blocks, mv);
            conflicts = blocks.iter().map(|b| self.conflict(b)).collect();
            current = mcf;
            trace.push(current);
        }
        (blocks, trace)
    }

    fn best_move(&mut self, blocks: &[Vec<usize>], conflicts: &[f64]) -> Option<(f64, Move)> {
        let r = blocks.len();
        let mut best: Option<(f64, Move)> = None;
        let consider = |mcf: f64, mv: Move, best: &mut Option<(f64, Move)>| {
            if best.as_ref().is_none_or(|(b, _)| mcf < *b) {
                *best = Some((mcf, mv));
            }
        };
        for (from, block) in blocks.iter().enumerate() {
            for (pos, &q) in block.iter().enumerate() {
                let mut rest = block.clone();
                rest.remove(pos);
                let rest_conflict = self.conflict(&rest);
                for to in (0..r).filter(|&to| to != from) {
                    let joined = insert_sorted(&blocks[to], q);
                    let joined_conflict = self.conflict(&joined);
                    let count = if rest.is_empty() { r - 1 } else { r };
                    let others = (0..r).filter(|&i| i != from && i != to).map(|i| conflicts[i]);
                    let mut terms: Vec<f64> = others.collect();
                    terms.push(joined_conflict);
                    if !rest.is_empty() {
                        terms.push(rest_conflict);
                    }
                    let mcf = combine_metaconflict(self.problem.domain_conflict(count), terms);
                    consider(mcf, Move { q, from, to: Some(to) }, &mut best);
                }
                if !rest.is_empty() {
                    let others = (0..r).filter(|&i| i != from).map(|i| conflicts[i]);
                    let terms: Vec<f64> = others.chain(std::iter::once(rest_conflict)).collect();
                    let mcf = combine_metaconflict(self.problem.domain_conflict(r + 1), terms);
                    consider(mcf, Move { q, from, to: None }, &mut best);
                }
            }
        }
        best
    }
}

/// Move evidence `q` out of subset `from` into `to`, or into a new subset.
#[derive(Debug, Clone, Copy)]
struct Move {
    q: usize,
    from: usize,
    to: Option<usize>,
}

fn insert_sorted(block: &[usize], q: usize) -> Vec<usize> {
    let mut out = block.to_vec();
    let at = out.binary_search(&q).unwrap_or_else(|i| i);
    out.insert(at, q);
    out
}

fn apply_move(blocks: &mut Vec<Vec<usize>>, mv: Move) {
    blocks[mv.from].retain(|&x| x != mv.q);
    match mv.to {
        Some(to) => blocks[to] = insert_sorted(&blocks[to], mv.q),
        None => blocks.push(vec![mv.q]),
    }
    if blocks[mv.from].is_empty() {
        blocks.remove(mv.from);
    }
}

/// Steepest-descent single-move hill climbing from `start`.
///
/// Subsets keep their labels across moves; new subsets are appended and an
/// emptied subset is removed.
pub fn descend(problem: &Problem, start: &Partition) -> (Partition, Vec<f64>) {
    let (blocks, trace) = Climber::new(problem).descend(start);
    (Partition::new(blocks, problem.len()).expect("moves keep the partition valid"), trace)
}

fn random_start(n: usize, r: usize, rng: &mut ChaCha8Rng) -> Partition {
    let r = r.clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut blocks: Vec<Vec<usize>> = order[..r].iter().map(|&q| vec![q]).collect();
    for &q in &order[r..] {
        blocks[rng.gen_range(0..r)].push(q);
    }
    Partition::new(blocks, n).expect("random start is valid")
}

/// Hill climbing with restarts. The first run starts from all evidence in
/// one subset; later runs start from seeded random partitions whose subset
/// count is drawn from the counts not yet pruned.
pub fn local_minimize(problem: &Problem, cfg: &SearchConfig) -> Result<SearchResult, SearchError> {
    cfg.validate()?;
    let n = problem.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let initial: BTreeSet<usize> = match &cfg.candidate_counts {
        Some(counts) => counts.iter().copied().filter(|&c| c <= n).collect(),
        None => problem.prior().support().filter(|&c| (1..=n).contains(&c)).collect(),
    };
    let mut candidates: Vec<usize> = if initial.is_empty() { vec![1] } else { initial.iter().copied().collect() };

    let mut climber = Climber::new(problem);
    let mut best: Option<(f64, Partition, Vec<f64>)> = None;
    for restart in 0..cfg.restarts {
        let start = if restart == 0 {
            Partition::single(n)
        } else {
            let r = *candidates.choose(&mut rng).expect("non-empty candidates");
            random_start(n, r, &mut rng)
        };
        let (blocks, trace) = climber.descend(&start);
        let found = Partition::new(blocks, n).expect("moves keep the partition valid");
        let mcf = problem.metaconflict(&found).mcf;
        let replace = match &best {
            None => true,
            Some((best_mcf, current, _)) => preferred(mcf, &found, *best_mcf, current),
        };
        if replace {
            best = Some((mcf, found, trace));
        }
        let (best_mcf, current, _) = best.as_ref().expect("set above");
        let alive = prune_counts(problem.prior(), *best_mcf, current.count(), n);
        let narrowed: Vec<usize> = candidates.iter().copied().filter(|c| alive.contains(c)).collect();
        candidates = if narrowed.is_empty() { vec![current.count()] } else { narrowed };
    }

    let (_, best, trace) = best.expect("restarts >= 1");
    let assessment = problem.metaconflict(&best);
    let explored_counts = count_verdicts(problem.prior(), assessment.mcf, best.count(), n);
    Ok(SearchResult { best, assessment, explored_counts, trace })
}
