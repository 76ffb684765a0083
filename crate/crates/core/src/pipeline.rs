//! Orchestration: partition search, specification, posterior.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::MassFunction;
use crate::evidence::MetaconflictAssessment;
use crate::posterior::{
    combine_existence, count_bpa, count_bpa_direct, existence_all, posterior, CountBpa, ExistenceTerm,
    PosteriorDistribution, PosteriorError, SubsetExistence, MAX_EXISTENCE_SUBSETS,
};
use crate::scenario::{Scenario, SCHEMA_VERSION};
use crate::search::{exhaustive_minimize, local_minimize, CountStatus, CountVerdict, SearchError, TIE_EPS};
use crate::specify::{specify_all, SpecificationAssessment, SpecifyError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("partition search failed: {0}")]
    Search(#[from] SearchError),
    #[error("specification failed: {0}")]
    Specify(#[from] SpecifyError),
    #[error("posterior derivation failed: {0}")]
    Posterior(#[from] PosteriorError),
}

/// How far to run the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Partition,
    Specify,
    Posterior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    /// `local` or `exhaustive`, whichever produced the reported partition.
    pub method: String,
    pub explored_counts: Vec<CountStatus>,
    pub trace: Vec<f64>,
    /// Global minimum, when the input was small enough to enumerate.
    pub exhaustive_mcf: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub rng_seed: u64,
    pub evidence_ids: Vec<String>,
    /// Evidence ids per subset, `χ_1..χ_r`.
    pub subsets: Vec<Vec<String>>,
    pub metaconflict: MetaconflictAssessment,
    pub search: SearchSummary,
    pub specification: Option<Vec<SpecificationAssessment>>,
    pub existence: Option<Vec<SubsetExistence>>,
    pub combined_existence: Option<Vec<ExistenceTerm>>,
    pub count_bpa: Option<CountBpa>,
    pub posterior: Option<PosteriorDistribution>,
    pub diagnostics: Vec<String>,
}

impl Report {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Run every stage.
pub fn run_pipeline(scenario: &Scenario) -> Result<Report, PipelineError> {
    run_until(scenario, Stage::Posterior)
}

pub fn run_until(scenario: &Scenario, last: Stage) -> Result<Report, PipelineError> {
    let problem = &scenario.problem;
    let cfg = &scenario.config;
    let mut diagnostics = Vec::new();

    let mut found = local_minimize(problem, cfg)?;
    let mut method = "local";
    let mut exhaustive_mcf = None;
    if problem.len() <= cfg.max_exhaustive_n {
        let exact = exhaustive_minimize(problem, cfg.max_exhaustive_n)?;
        exhaustive_mcf = Some(exact.assessment.mcf);
        if exact.assessment.mcf < found.assessment.mcf - TIE_EPS {
            diagnostics.push(format!(
                "local search stopped at metaconflict {:.6}; exhaustive minimum {:.6} used instead",
                found.assessment.mcf, exact.assessment.mcf
            ));
            found = exact;
            method = "exhaustive";
        }
    }
    let partition = found.best.clone();
    if found.assessment.c0 >= 1.0 {
        diagnostics.push(format!(
            "{} subsets have zero prior probability: every partition here has metaconflict 1",
            partition.count()
        ));
    }

    let ids: Vec<String> = problem.evidence().iter().map(|e| e.id().to_string()).collect();
    let mut report = Report {
        schema_version: SCHEMA_VERSION,
        rng_seed: cfg.rng_seed,
        evidence_ids: ids.clone(),
        subsets: partition.subsets().iter().map(|s| s.iter().map(|&q| ids[q].clone()).collect()).collect(),
        metaconflict: found.assessment,
        search: SearchSummary {
            method: method.to_string(),
            explored_counts: found.explored_counts,
            trace: found.trace,
            exhaustive_mcf,
        },
        specification: None,
        existence: None,
        combined_existence: None,
        count_bpa: None,
        posterior: None,
        diagnostics,
    };
    if last == Stage::Partition {
        return Ok(report);
    }

    let specification = specify_all(problem, &partition)?;
    report.diagnostics.extend(specification.iter().flat_map(|a| a.diagnostics().iter().cloned()));
    if last == Stage::Specify {
        report.specification = Some(specification);
        return Ok(report);
    }

    let existence = existence_all(partition.count(), &specification)?;
    let (combined, counts) = if existence.len() <= MAX_EXISTENCE_SUBSETS {
        let terms = combine_existence(&existence)?;
        let counts = count_bpa(&terms);
        (Some(terms), counts)
    } else {
        report.diagnostics.push(format!(
            "{} subsets: existence conjunctions not expanded, count bpa computed directly",
            existence.len()
        ));
        (None, count_bpa_direct(&existence))
    };
    let post = posterior(problem.prior(), &counts)?;

    report.specification = Some(specification);
    report.existence = Some(existence);
    report.combined_existence = combined;
    report.count_bpa = Some(counts);
    report.posterior = Some(post);
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Human,
    Structured,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown format `{0}` (expected `human` or `structured`)")]
pub struct UnknownFormat(pub String);

impl FromStr for Format {
    type Err = UnknownFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "human" => Ok(Format::Human),
            "structured" | "json" => Ok(Format::Structured),
            other => Err(UnknownFormat(other.to_string())),
        }
    }
}

pub fn render_report(report: &Report, format: Format) -> String {
    match format {
        Format::Structured => {
            let mut text = serde_json::to_string_pretty(report).expect("reports serialize");
            text.push('\n');
            text
        }
        Format::Human => render_human(report),
    }
}

fn describe_bpa(m: &MassFunction) -> String {
    let full = m.frame().full();
    m.focal_elements()
        .map(|(set, mass)| {
            let name =
                if set == full { "Θ".to_string() } else { format!("{{{}}}", m.frame().labels_of(set).join(", ")) };
            format!("{name} {mass:.4}")
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn verdict_name(v: CountVerdict) -> &'static str {
    match v {
        CountVerdict::Best => "best",
        CountVerdict::Candidate => "candidate",
        CountVerdict::PrunedFewerLessLikely => "pruned (fewer subsets, less prior mass)",
        CountVerdict::PrunedDomainBound => "pruned (domain conflict exceeds best)",
    }
}

fn render_human(r: &Report) -> String {
    let mut out = String::new();
    let mc = &r.metaconflict;
    let _ = writeln!(out, "Partition ({} subsets, {} search)", r.subsets.len(), r.search.method);
    for (i, (members, c)) in r.subsets.iter().zip(&mc.subset_conflicts).enumerate() {
        let _ = writeln!(out, "  chi_{} = {{{}}}  c_{} = {c:.4}", i + 1, members.join(", "), i + 1);
    }
    let _ = writeln!(out, "  c_0 = {:.4}", mc.c0);
    let _ = writeln!(out, "  Mcf = {:.4}  Pls(AdP) = {:.4}", mc.mcf, mc.pls_adp);
    if let Some(best) = r.search.exhaustive_mcf {
        let _ = writeln!(out, "  exhaustive minimum = {best:.4}");
    }
    let _ = writeln!(out, "Subset counts");
    for s in &r.search.explored_counts {
        let _ = writeln!(out, "  r = {}: {}", s.count, verdict_name(s.verdict));
    }

    if let Some(spec) = &r.specification {
        let _ = writeln!(out, "Specification");
        for a in spec {
            let m = &a.membership;
            let _ = writeln!(out, "  {} (in chi_{})", a.evidence_id, m.home + 1);
            for (j, v) in m.subsets.iter().enumerate() {
                if let Some(v) = v {
                    let _ = writeln!(out, "    m({} not in chi_{}) = {v:.4}", a.evidence_id, j + 1);
                }
            }
            if let Some(v) = m.new_subset {
                let _ = writeln!(out, "    m({} not in chi_new) = {v:.4}", a.evidence_id);
            }
            if let Some(v) = m.in_own {
                let _ = writeln!(out, "    m({} in chi_{}) = {v:.4}", a.evidence_id, m.home + 1);
            }
            let _ = writeln!(out, "    k = {:.4}", a.falsity_k);
            for (j, (bel, pls)) in a.beliefs.bel.iter().zip(&a.beliefs.pls).enumerate() {
                let alpha = a.credibility.subsets[j];
                let _ = writeln!(out, "    chi_{}: Bel = {bel:.4}  Pls = {pls:.4}  alpha = {alpha:.4}", j + 1);
            }
            let _ = writeln!(out, "    m^%: {}", describe_bpa(&a.discounted_for_falsity));
            for (j, d) in a.discounted_per_subset.iter().enumerate() {
                let _ = writeln!(out, "    m^%%{}: {}", j + 1, describe_bpa(d));
            }
        }
    }

    if let Some(existence) = &r.existence {
        let _ = writeln!(out, "Subset existence");
        for s in existence {
            let _ = writeln!(
                out,
                "  chi_{}: m(exists) = {:.4}  m(Θ) = {:.4}  alpha = {:.4}  discounted = {:.4} / {:.4}",
                s.subset + 1,
                s.mass_exists,
                s.mass_theta,
                s.emptiness_alpha,
                s.discounted_exists,
                s.discounted_theta
            );
        }
    }
    if let Some(terms) = &r.combined_existence {
        let _ = writeln!(out, "Combined existence");
        for t in terms.iter().rev() {
            let name = if t.subsets.is_empty() {
                "Θ".to_string()
            } else {
                t.subsets.iter().map(|i| format!("chi_{}", i + 1)).collect::<Vec<_>>().join(" & ")
            };
            let _ = writeln!(out, "  {name} = {:.4}", t.mass);
        }
    }
    if let Some(cb) = &r.count_bpa {
        let _ = writeln!(out, "Count bpa");
        for (n, m) in cb.at_least.iter().rev() {
            let _ = writeln!(out, "  m(|chi| >= {n}) = {m:.4}");
        }
        let _ = writeln!(out, "  m(Θ) = {:.4}", cb.theta);
    }
    if let Some(post) = &r.posterior {
        let _ = writeln!(out, "Posterior (k = {:.4})", post.conflict_k);
        for (i, m) in &post.masses {
            let _ = writeln!(out, "  m*(E_{i}) = {m:.4}");
        }
    }
    if !r.diagnostics.is_empty() {
        let _ = writeln!(out, "Warnings");
        for d in &r.diagnostics {
            let _ = writeln!(out, "  - {d}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const BURGLARY: &str = include_str!("../fixtures/burglary.scenario");

    fn burglary() -> Scenario {
        Scenario::from_toml_str(BURGLARY).unwrap()
    }

    #[test]
    fn bundled_fixture_loads() {
        let s = burglary();
        assert_eq!(s.problem.len(), 4);
        assert_eq!(s.problem.prior().entries().collect::<Vec<_>>(), vec![(1, 0.6), (2, 0.4)]);
    }

    #[test]
    fn burglary_posterior() {
        let report = run_pipeline(&burglary()).unwrap();
        let post = report.posterior.as_ref().unwrap();
        assert!((post.mass(1) - 0.4939).abs() < 5e-4);
        assert!((post.mass(2) - 0.5061).abs() < 5e-4);
        assert!(report.diagnostics.is_empty());
        let human = render_report(&report, Format::Human);
        assert!(human.contains("c_1 = 0.4200"));
        assert!(human.contains("m*(E_2) = 0.5061"));
        assert!(!human.contains("Warnings"));
    }

    #[test]
    fn stages_fill_only_what_they_compute() {
        let s = burglary();
        let partition = run_until(&s, Stage::Partition).unwrap();
        assert!(partition.specification.is_none() && partition.posterior.is_none());
        let specify = run_until(&s, Stage::Specify).unwrap();
        assert!(specify.specification.is_some() && specify.existence.is_none());
    }

    #[test]
    fn single_evidence_with_certain_prior() {
        let text = BURGLARY.split("[[evidence]]").take(2).collect::<Vec<_>>().join("[[evidence]]");
        let text = text.replace("2 = 0.4", "").replace("1 = 0.6", "1 = 1.0");
        let report = run_pipeline(&Scenario::from_toml_str(&text).unwrap()).unwrap();
        assert_eq!(report.subsets, vec![vec!["e1"]]);
        let post = report.posterior.unwrap();
        assert_eq!(post.masses.len(), 1);
        assert!((post.mass(1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_prior_count_produces_warnings() {
        // Four items cannot form five subsets, so every partition has c_0 = 1.
        let text = BURGLARY.replace("1 = 0.6\n2 = 0.4", "5 = 1.0");
        let report = run_pipeline(&Scenario::from_toml_str(&text).unwrap()).unwrap();
        assert_eq!(report.metaconflict.c0, 1.0);
        assert!(!report.diagnostics.is_empty());
        assert!(render_report(&report, Format::Human).contains("Warnings"));
    }

    #[test]
    fn structured_report_round_trips() {
        let report = run_pipeline(&burglary()).unwrap();
        let text = render_report(&report, Format::Structured);
        assert_eq!(Report::from_json(&text).unwrap(), report);
    }

    #[test]
    fn format_parsing() {
        assert_eq!("human".parse::<Format>(), Ok(Format::Human));
        assert_eq!("structured".parse::<Format>(), Ok(Format::Structured));
        assert_eq!("xml".parse::<Format>(), Err(UnknownFormat("xml".into())));
    }
}
