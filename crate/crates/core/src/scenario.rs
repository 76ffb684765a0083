//! Scenario files.
//!
//! Scenarios are TOML documents:
//!
//! ```toml
//! schema_version = 1
//! action_frame = ["brown_employee", "brown_nonemployee", "red"]
//! events = ["one_baker_street", "two_baker_street"]   # or a count, e.g. 2
//!
//! [prior]
//! 1 = 0.6
//! 2 = 0.4
//!
//! [search]
//! rng_seed = 0
//!
//! [[evidence]]
//! id = "e1"
//! events = ["one_baker_street"]                        # labels or 1-based numbers
//! action = [{ set = ["brown_nonemployee"], mass = 0.8 }]
//! ```
//!
//! Action masses not listed go to the whole action frame.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{FocalSet, Frame, MassFunction, MASS_TOLERANCE, MAX_FRAME};
use crate::evidence::{Evidence, PriorCounts, Problem, PRIOR_TOLERANCE};
use crate::search::SearchConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    SchemaVersion(u32),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Invalid { field: field.into(), message: message.to_string() }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum EventsDecl {
    Count(usize),
    Labels(Vec<String>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum EventRef {
    Number(usize),
    Label(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FocalDecl {
    set: Vec<String>,
    mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvidenceDecl {
    id: String,
    events: Vec<EventRef>,
    action: Vec<FocalDecl>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    schema_version: u32,
    action_frame: Vec<String>,
    events: EventsDecl,
    prior: BTreeMap<String, f64>,
    #[serde(default)]
    search: SearchConfig,
    evidence: Vec<EvidenceDecl>,
}

/// A validated scenario ready for the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub event_labels: Vec<String>,
    pub problem: Problem,
    pub config: SearchConfig,
}

impl Scenario {
    pub fn new(problem: Problem, event_labels: Vec<String>, config: SearchConfig) -> Self {
        Self { event_labels, problem, config }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let doc: ScenarioDoc = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        doc.validate()
    }

    /// Serialize back to the scenario format.
    pub fn to_toml_string(&self) -> String {
        let frame = self.problem.action_frame();
        let evidence = self
            .problem
            .evidence()
            .iter()
            .map(|e| EvidenceDecl {
                id: e.id().to_string(),
                events: e.events().iter().map(|i| EventRef::Label(self.event_labels[i].clone())).collect(),
                action: e
                    .action()
                    .focal_elements()
                    .filter(|&(s, _)| s != frame.full())
                    .map(|(s, mass)| FocalDecl { set: frame.labels_of(s), mass })
                    .collect(),
            })
            .collect();
        let doc = ScenarioDoc {
            schema_version: SCHEMA_VERSION,
            action_frame: frame.labels().to_vec(),
            events: EventsDecl::Labels(self.event_labels.clone()),
            prior: self.problem.prior().entries().map(|(c, p)| (c.to_string(), p)).collect(),
            search: self.config.clone(),
            evidence,
        };
        toml::to_string(&doc).expect("scenario documents serialize")
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    Scenario::from_toml_str(&text)
}

impl ScenarioDoc {
    fn validate(self) -> Result<Scenario, ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::SchemaVersion(self.schema_version));
        }
        let frame = Arc::new(Frame::new(self.action_frame).map_err(|e| invalid("action_frame", e))?);

        let event_labels: Vec<String> = match self.events {
            EventsDecl::Count(n) => (1..=n).map(|i| i.to_string()).collect(),
            EventsDecl::Labels(labels) => labels,
        };
        Frame::new(event_labels.clone()).map_err(|e| invalid("events", e))?;
        if event_labels.len() > MAX_FRAME {
            return Err(invalid("events", format!("at most {MAX_FRAME} events are supported")));
        }

        let mut prior = Vec::new();
        for (key, p) in &self.prior {
            let count: usize =
                key.parse().map_err(|_| invalid(format!("prior.{key}"), "keys must be non-negative integers"))?;
            prior.push((count, *p));
        }
        let total: f64 = prior.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > PRIOR_TOLERANCE {
            return Err(invalid("prior", format!("probabilities sum to {total}, expected 1")));
        }
        let prior = PriorCounts::new(prior).map_err(|e| invalid("prior", e))?;

        self.search.validate().map_err(|e| invalid("search", e))?;

        if self.evidence.is_empty() {
            return Err(invalid("evidence", "at least one piece of evidence is required"));
        }
        let mut ids = BTreeSet::new();
        let mut evidence = Vec::with_capacity(self.evidence.len());
        for (idx, decl) in self.evidence.into_iter().enumerate() {
            let field = format!("evidence[{idx}]");
            if decl.id.is_empty() {
                return Err(invalid(format!("{field}.id"), "must not be empty"));
            }
            if !ids.insert(decl.id.clone()) {
                return Err(invalid(format!("{field}.id"), format!("duplicate id `{}`", decl.id)));
            }
            let mut events = FocalSet::EMPTY;
            for (k, r) in decl.events.iter().enumerate() {
                let index = match r {
                    EventRef::Number(n) if (1..=event_labels.len()).contains(n) => n - 1,
                    EventRef::Number(n) => {
                        return Err(invalid(format!("{field}.events[{k}]"), format!("event {n} is not declared")))
                    }
                    EventRef::Label(l) => event_labels
                        .iter()
                        .position(|x| x == l)
                        .ok_or_else(|| invalid(format!("{field}.events[{k}]"), format!("unknown event `{l}`")))?,
                };
                events = events.union(FocalSet::singleton(index));
            }
            if events.is_empty() {
                return Err(invalid(format!("{field}.events"), "must name at least one event"));
            }
            let mut entries = Vec::new();
            for (k, f) in decl.action.iter().enumerate() {
                let set = frame.set_of(&f.set).map_err(|e| invalid(format!("{field}.action[{k}].set"), e))?;
                if set.is_empty() {
                    return Err(invalid(format!("{field}.action[{k}].set"), "must not be empty"));
                }
                if !(0.0..=1.0).contains(&f.mass) {
                    return Err(invalid(format!("{field}.action[{k}].mass"), format!("{} is outside [0, 1]", f.mass)));
                }
                entries.push((set, f.mass));
            }
            let listed: f64 = entries.iter().map(|(_, m)| m).sum();
            if listed > 1.0 + MASS_TOLERANCE {
                return Err(invalid(format!("{field}.action"), format!("masses sum to {listed} > 1")));
            }
            entries.push((frame.full(), (1.0 - listed).max(0.0)));
            let action =
                MassFunction::new(frame.clone(), entries).map_err(|e| invalid(format!("{field}.action"), e))?;
            evidence.push(Evidence::new(decl.id, action, events).map_err(|e| invalid(&field, e))?);
        }

        let problem = Problem::new(evidence, prior).map_err(|e| invalid("evidence", e))?;
        Ok(Scenario { event_labels, problem, config: self.search })
    }
}
