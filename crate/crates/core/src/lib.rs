//! Clustering of nonspecific evidence with belief functions.
//!
//! Pieces of evidence that may refer to one of several events are grouped
//! into subsets by minimizing the metaconflict, each piece is then specified
//! against every subset from conflict variations, and the result is turned
//! into a posterior distribution over the number of events.
//!
//! - [`belief`]: frames, mass functions, Dempster's rule, discounting.
//! - [`evidence`]: evidence with event parts, partitions, metaconflict.
//! - [`search`]: exhaustive and hill-climbing metaconflict minimization.
//! - [`specify`]: membership masses, falsity, credibilities.
//! - [`posterior`]: subset existence, count bpa, posterior over counts.
//! - [`scenario`] and [`pipeline`]: file input, orchestration, reports.

pub mod belief;
pub mod evidence;
pub mod pipeline;
pub mod posterior;
pub mod scenario;
pub mod search;
pub mod specify;

pub use belief::{combine, conflict_of, BeliefError, FocalSet, Frame, MassFunction};
pub use evidence::{Evidence, MetaconflictAssessment, ModelError, Partition, PriorCounts, Problem};
pub use pipeline::{render_report, run_pipeline, run_until, Format, PipelineError, Report, Stage};
pub use scenario::{load_scenario, Scenario, ScenarioError};
pub use search::{exhaustive_minimize, local_minimize, SearchConfig, SearchResult};
