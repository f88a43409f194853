//! Removal-based explanation faithfulness metrics over bag-of-words text
//! classifiers, and the adversarial wrappers and encoders that inflate them.
//!
//! The crate is organised bottom-up:
//!
//! - [`corpus`]: tokenization, corpora, splits and the three masking constructions.
//! - [`models`]: multinomial naive Bayes and softmax regression behind one confidence interface.
//! - [`saliency`]: LIME, gradient, integrated gradients, occlusion and random attributions.
//! - [`eraser`]: sufficiency, comprehensiveness and macro-F1.
//! - [`meta_attack`]: the case detector and the wrapper that games sufficiency/comprehensiveness.
//! - [`evalx`]: the masked-input evaluator, its metrics, and the two label-encoding attacks.
//! - [`harness`]: config-driven experiment runs, the synthetic corpus and report tables.

pub mod corpus;
pub mod eraser;
pub mod error;
pub mod evalx;
pub mod harness;
pub mod meta_attack;
pub mod models;
pub mod saliency;
pub mod seed;

pub use corpus::{Document, LabeledCorpus, MaskKind};
pub use error::{Error, Result};
pub use models::{Classifier, ProbDistribution};
pub use saliency::{Attribution, Explanation, SaliencyMethod};
