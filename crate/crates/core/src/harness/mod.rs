//! Config-driven experiment runs, the bundled synthetic corpus, and the
//! tables and summaries a run emits.

pub mod config;
pub mod pipeline;
pub mod report;
pub mod synthetic;

pub use config::{AttackMode, CorpusSource, ExperimentConfig};
pub use pipeline::{run, RunLayout, RunManifest};
pub use synthetic::{generate_synthetic_corpus, LengthLaw, SkewProfile, SyntheticParams};
