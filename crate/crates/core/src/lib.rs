//! Ensemble classification toolkit for cached per-voter predictions.
//!
//! The crate operates purely on prediction files: every voter is a frozen
//! classifier whose per-sample hard labels have already been written to disk.
//! On top of that pool it provides
//!
//! - two-stage gatekeeper voting with a defence-score override rule,
//! - evaluation (per-class precision/recall/F1, macro-F1, confusion matrices),
//! - inter-voter agreement (Krippendorff's alpha) and fold-profile correlation,
//! - fold selection, augmentation budgeting, and dialogue-stratified splits,
//! - exhaustive search over ensemble configurations,
//! - flip analysis between a base ensemble and an extended one, and
//! - a correlated-voter simulator for ablating diversity.
//!
//! Labels live on a fixed nine-class scale where class 0 means "no defence
//! present" and classes 1..=8 are defence levels. Gatekeeper voters see all
//! nine classes; specialist voters are trained without class 0 and never emit
//! it. The ensemble outputs 0 only when enough gatekeepers agree on it.
//!
//! ```
//! use gatevote_core::domain::ClassLabel;
//! use gatevote_core::voting::gatekeeper_vote;
//!
//! let l = |v: u8| ClassLabel::new(v).unwrap();
//! let gatekeepers = [l(0), l(0), l(7)];
//! let specialists = [l(6), l(6), l(6), l(5), l(5), l(3)];
//! let out = gatekeeper_vote(&gatekeepers, &specialists, 2, l(7)).unwrap();
//! assert_eq!(out, l(0));
//! ```

pub mod analysis;
pub mod domain;
pub mod io;
pub mod metrics;
pub mod search;
pub mod selection;
pub mod simulator;
pub mod voting;
