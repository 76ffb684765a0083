//! Shared test helpers: seeded scenario generation and property checks.
//!
//! Each check takes a seed, builds its inputs from a ChaCha stream and
//! returns `Err(description)` on a violation, so the same checks can run
//! under proptest and inside the acceptance suite.

#![allow(dead_code)]

use std::sync::Arc;

use metaconflict::belief::{combine, conflict_of, FocalSet, Frame, MassFunction, MASS_TOLERANCE};
use metaconflict::evidence::{Evidence, PriorCounts, Problem};
use metaconflict::posterior::{
    count_bpa, count_bpa_direct, posterior, posterior_by_combination, CountBpa, PosteriorError,
};
use metaconflict::search::SearchConfig;
use metaconflict::{run_pipeline, Scenario};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FRAME_SIZE: usize = 4;
pub const EVENT_COUNT: usize = 3;
pub const TOL: f64 = 1e-9;

pub type Check = Result<(), String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn frame() -> Arc<Frame> {
    Arc::new(Frame::new(["a", "b", "c", "d"]).unwrap())
}

/// A non-empty subset of `0..size`.
pub fn random_set(rng: &mut ChaCha8Rng, size: usize) -> FocalSet {
    FocalSet::from_bits(rng.gen_range(1..(1u64 << size)))
}

/// A proper non-empty subset of `0..size`.
pub fn random_proper_set(rng: &mut ChaCha8Rng, size: usize) -> FocalSet {
    FocalSet::from_bits(rng.gen_range(1..(1u64 << size) - 1))
}

/// Up to three focal elements plus possibly Θ.
pub fn random_bpa(rng: &mut ChaCha8Rng, frame: &Arc<Frame>) -> MassFunction {
    let focal = rng.gen_range(1..=3);
    let mut weights: Vec<(FocalSet, f64)> =
        (0..focal).map(|_| (random_set(rng, frame.len()), rng.gen_range(0.05..1.0))).collect();
    if rng.gen_bool(0.5) {
        weights.push((frame.full(), rng.gen_range(0.05..1.0)));
    }
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    MassFunction::new(frame.clone(), weights.into_iter().map(|(s, w)| (s, w / total))).unwrap()
}

/// Probabilities over a random non-empty subset of `{1, 2, 3}`.
pub fn random_prior(rng: &mut ChaCha8Rng) -> PriorCounts {
    let mut counts: Vec<usize> = (1..=EVENT_COUNT).collect();
    counts.shuffle(rng);
    counts.truncate(rng.gen_range(1..=EVENT_COUNT));
    let weights: Vec<f64> = counts.iter().map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    PriorCounts::new(counts.into_iter().zip(weights.into_iter().map(|w| w / total))).unwrap()
}

/// A random problem with `n` simple-support items over a 4-label frame
/// and 3 events.
pub fn random_problem(rng: &mut ChaCha8Rng, n: usize) -> Problem {
    let frame = frame();
    let evidence = (0..n)
        .map(|q| {
            let action = random_proper_set(rng, FRAME_SIZE);
            let events = random_set(rng, EVENT_COUNT);
            let mass = rng.gen_range(0.1..0.95);
            Evidence::simple(format!("e{}", q + 1), frame.clone(), action, mass, events).unwrap()
        })
        .collect();
    Problem::new(evidence, random_prior(rng)).unwrap()
}

pub fn random_scenario(seed: u64, n: usize, config: SearchConfig) -> Scenario {
    let mut r = rng(seed);
    let problem = random_problem(&mut r, n);
    Scenario::new(problem, (1..=EVENT_COUNT).map(|i| i.to_string()).collect(), config)
}

fn close(a: f64, b: f64, tol: f64, what: &str) -> Check {
    if (a - b).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{what}: {a} vs {b}"))
    }
}

fn normalized(m: &MassFunction, what: &str) -> Check {
    close(m.total(), 1.0, MASS_TOLERANCE, what)?;
    if m.focal_elements().any(|(s, v)| s.is_empty() || !(0.0..=1.0).contains(&v)) {
        return Err(format!("{what}: invalid assignment"));
    }
    Ok(())
}

/// Combination and discounting keep every bpa normalized.
pub fn check_normalization(seed: u64) -> Check {
    let mut r = rng(seed);
    let f = frame();
    let a = random_bpa(&mut r, &f);
    let b = random_bpa(&mut r, &f);
    normalized(&a, "input")?;
    if let Ok((c, _)) = combine(&a, &b) {
        normalized(&c, "combined")?;
    }
    normalized(&a.discount(r.gen_range(0.0..=1.0)).unwrap(), "discounted")
}

/// Adding a bpa never lowers the conflict of a collection.
pub fn check_conflict_monotone(seed: u64) -> Check {
    let mut r = rng(seed);
    let f = frame();
    let n = r.gen_range(1..=5);
    let set: Vec<MassFunction> = (0..n).map(|_| random_bpa(&mut r, &f)).collect();
    let before = conflict_of(&set[..n - 1]).unwrap();
    let after = conflict_of(&set).unwrap();
    if after + TOL < before {
        return Err(format!("conflict dropped from {before} to {after}"));
    }
    let problem = random_problem(&mut r, 5);
    let k = r.gen_range(1..5);
    let members: Vec<usize> = (0..=k).collect();
    let (small, large) = (problem.conflict(&members[..k]), problem.conflict(&members));
    if large + TOL < small {
        return Err(format!("joint conflict dropped from {small} to {large}"));
    }
    Ok(())
}

/// One-shot conflict equals the conflict accumulated by sequential
/// combination, `1 - Π (1 - k_step)`.
pub fn check_batch_vs_sequential(seed: u64) -> Check {
    let mut r = rng(seed);
    let f = frame();
    let n = r.gen_range(2..=5);
    let set: Vec<MassFunction> = (0..n).map(|_| random_bpa(&mut r, &f)).collect();
    let batch = conflict_of(&set).unwrap();
    let mut acc = set[0].clone();
    let mut kept = 1.0;
    for m in &set[1..] {
        match combine(&acc, m) {
            Ok((next, k)) => {
                kept *= 1.0 - k;
                acc = next;
            }
            Err(_) => return close(batch, 1.0, TOL, "total conflict"),
        }
    }
    close(batch, 1.0 - kept, TOL, "batch vs sequential")
}

/// `Bel <= Pls` and `Pls(A) = 1 - Bel(not A)` for every subset.
pub fn check_bel_pls(seed: u64) -> Check {
    let mut r = rng(seed);
    let f = frame();
    let m = random_bpa(&mut r, &f);
    let full = f.full();
    for bits in 1..(1u64 << FRAME_SIZE) {
        let a = FocalSet::from_bits(bits);
        let (bel, pls) = (m.belief(a).unwrap(), m.plausibility(a).unwrap());
        if bel > pls + TOL {
            return Err(format!("Bel {bel} > Pls {pls}"));
        }
        let complement = full.minus(a);
        let bel_c = if complement.is_empty() { 0.0 } else { m.belief(complement).unwrap() };
        close(pls, 1.0 - bel_c, TOL, "Pls = 1 - Bel(complement)")?;
    }
    Ok(())
}

fn same_bpa(a: &MassFunction, b: &MassFunction, what: &str) -> Check {
    for bits in 1..(1u64 << FRAME_SIZE) {
        let s = FocalSet::from_bits(bits);
        close(a.mass(s), b.mass(s), TOL, what)?;
    }
    Ok(())
}

/// Dempster's rule is commutative and associative.
pub fn check_combination_algebra(seed: u64) -> Check {
    let mut r = rng(seed);
    let f = frame();
    let (a, b, c) = (random_bpa(&mut r, &f), random_bpa(&mut r, &f), random_bpa(&mut r, &f));
    if let (Ok((ab, k1)), Ok((ba, k2))) = (combine(&a, &b), combine(&b, &a)) {
        same_bpa(&ab, &ba, "commutativity")?;
        close(k1, k2, TOL, "commutative conflict")?;
        let bc = combine(&b, &c).map(|x| x.0);
        if let (Ok((left, _)), Ok(bc)) = (combine(&ab, &c), bc) {
            if let Ok((right, _)) = combine(&a, &bc) {
                same_bpa(&left, &right, "associativity")?;
            }
        }
    }
    Ok(())
}

/// Discounting by `a` then `b` equals discounting by `a * b`.
pub fn check_discount_composition(seed: u64) -> Check {
    let mut r = rng(seed);
    let m = random_bpa(&mut r, &frame());
    let (a, b) = (r.gen_range(0.0..=1.0), r.gen_range(0.0..=1.0));
    same_bpa(&m.discount(a).unwrap().discount(b).unwrap(), &m.discount(a * b).unwrap(), "discount composition")
}

/// Posterior from an arbitrary count bpa: total 1, support within the
/// prior's, and the closed form agrees with the generic combination.
pub fn check_posterior_forms(seed: u64) -> Check {
    let mut r = rng(seed);
    let prior = random_prior(&mut r);
    let top = r.gen_range(1..=5);
    let mut weights: Vec<f64> = (0..=top).map(|_| r.gen_range(0.0..1.0)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let cb = CountBpa { at_least: (1..=top).map(|i| (i, weights[i])).collect(), theta: weights[0] };
    close(cb.total(), 1.0, TOL, "count bpa total")?;
    let closed = match posterior(&prior, &cb) {
        Ok(p) => p,
        Err(PosteriorError::TotalConflict) => {
            return match posterior_by_combination(&prior, &cb) {
                Err(PosteriorError::TotalConflict) => Ok(()),
                other => Err(format!("only the closed form reports total conflict: {other:?}")),
            }
        }
        Err(e) => return Err(e.to_string()),
    };
    let generic = posterior_by_combination(&prior, &cb).map_err(|e| e.to_string())?;
    close(closed.conflict_k, generic.conflict_k, TOL, "posterior conflict")?;
    for i in 0..=top.max(EVENT_COUNT) {
        close(closed.mass(i), generic.mass(i), TOL, &format!("m*(E_{i})"))?;
        if prior.mass(i) == 0.0 && closed.mass(i) != 0.0 {
            return Err(format!("posterior mass on count {i} outside the prior"));
        }
    }
    close(closed.masses.values().sum(), 1.0, TOL, "posterior total")
}

/// Whole-pipeline invariants on a random scenario.
pub fn check_pipeline_invariants(seed: u64) -> Check {
    let mut r = rng(seed);
    let n = r.gen_range(1..=6);
    let cfg = SearchConfig { max_exhaustive_n: 1, restarts: 2, rng_seed: seed, candidate_counts: None };
    let scenario = random_scenario(seed, n, cfg);
    let report = run_pipeline(&scenario).map_err(|e| format!("pipeline failed: {e}"))?;
    let mc = &report.metaconflict;
    let floor = mc.subset_conflicts.iter().copied().fold(mc.c0, f64::max);
    if mc.mcf + TOL < floor {
        return Err(format!("mcf {} below a component conflict {floor}", mc.mcf));
    }
    for a in report.specification.as_ref().unwrap() {
        if !(0.0..=1.0).contains(&a.falsity_k) {
            return Err(format!("falsity {} out of range", a.falsity_k));
        }
        let c = &a.credibility;
        if c.total() > 1.0 + TOL {
            return Err(format!("{}: credibilities sum to {}", a.evidence_id, c.total()));
        }
        for (bel, pls) in a.beliefs.bel.iter().zip(&a.beliefs.pls) {
            if bel > &(pls + TOL) || !(0.0..=1.0 + TOL).contains(pls) {
                return Err(format!("{}: Bel {bel} / Pls {pls}", a.evidence_id));
            }
        }
        normalized(&a.discounted_for_falsity, "m^%")?;
        for d in &a.discounted_per_subset {
            normalized(d, "m^%%j")?;
        }
        if let Some(c) = &a.combined {
            normalized(c, "membership combination")?;
        }
    }
    let existence = report.existence.as_ref().unwrap();
    for s in existence {
        close(s.mass_exists + s.mass_theta, 1.0, TOL, "existence total")?;
        close(s.discounted_exists + s.discounted_theta, 1.0, TOL, "discounted existence total")?;
    }
    let cb = report.count_bpa.as_ref().unwrap();
    close(cb.total(), 1.0, TOL, "count bpa total")?;
    let direct = count_bpa_direct(existence);
    let expanded = count_bpa(report.combined_existence.as_ref().unwrap());
    close(direct.theta, expanded.theta, TOL, "direct count bpa")?;
    for i in 1..=existence.len() {
        close(direct.at_least(i), expanded.at_least(i), TOL, "direct count bpa")?;
    }
    let post = report.posterior.as_ref().unwrap();
    close(post.masses.values().sum(), 1.0, TOL, "posterior total")?;
    for (&i, &m) in &post.masses {
        if m > 0.0 && scenario.problem.prior().mass(i) == 0.0 {
            return Err(format!("posterior mass on count {i} outside the prior"));
        }
    }
    let generic = posterior_by_combination(scenario.problem.prior(), cb).map_err(|e| e.to_string())?;
    for (&i, &m) in &post.masses {
        close(m, generic.mass(i), TOL, "closed vs generic posterior")?;
    }
    Ok(())
}

pub type Property = (&'static str, fn(u64) -> Check);

/// Every property check by name.
pub const PROPERTIES: &[Property] = &[
    ("mass normalization", check_normalization),
    ("conflict monotonicity", check_conflict_monotone),
    ("batch vs sequential conflict", check_batch_vs_sequential),
    ("Bel <= Pls and duality", check_bel_pls),
    ("combination commutative and associative", check_combination_algebra),
    ("discount composition", check_discount_composition),
    ("posterior closed form vs generic combination", check_posterior_forms),
    ("pipeline invariants", check_pipeline_invariants),
];
