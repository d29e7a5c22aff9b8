//! Active-learning experiments for a linear SVM under data poisoning.
//!
//! The crate trains a two-class linear SVM incrementally: each round a
//! selection strategy picks one unlabeled sample, an oracle labels it, and
//! the model retrains. An optional attacker injects adversarial points —
//! projections of known samples onto the current decision boundary — to
//! slow the learner down. The experiment harness runs repeated trials and
//! writes averaged test-error curves as CSV and SVG.

pub mod attack;
pub mod calibration;
pub mod data;
pub mod error;
pub mod harness;
pub mod oracle;
pub mod plot;
pub mod rng;
pub mod selection;
pub mod svm;

pub use error::{Error, Result};
