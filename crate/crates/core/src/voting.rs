//! Hard-label voting: plain majority, the two-stage gatekeeper rule, and
//! ensemble prediction over a pool of cached voters.
//!
//! The gatekeeper rule has an override stage and a tally stage. If at least
//! `threshold_t` gatekeepers vote 0, the ensemble outputs 0. Otherwise all
//! votes, gatekeeper and specialist alike, enter a majority tally from which
//! 0 votes are excluded, so a minority of 0 votes can never leak into the
//! defence decision. Ties go to the tie-break class when it is among the tied
//! labels and to the smallest tied label otherwise.
//!
//! A corollary used by the flip analysis: when the override does not fire and
//! strictly more than half of all votes name one defence label, that label
//! wins no matter how the remaining votes are distributed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ClassLabel, DomainError, EnsembleConfig, VoterPredictions};

#[derive(Debug, Error, PartialEq)]
pub enum VotingError {
    #[error("cannot vote on an empty ballot")]
    EmptyVotes,
    #[error("threshold {t} not in 1..={g}")]
    ThresholdOutOfRange { t: usize, g: usize },
    #[error("voter {voter_id:?} has no prediction for sample {sample_id:?}")]
    MissingPrediction { voter_id: String, sample_id: String },
    #[error(transparent)]
    Config(#[from] DomainError),
}

/// Per-label vote counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteTally {
    pub counts: BTreeMap<ClassLabel, usize>,
    pub total: usize,
}

impl VoteTally {
    pub fn from_votes<I>(votes: I) -> Self
    where
        I: IntoIterator<Item = ClassLabel>,
    {
        let mut tally = VoteTally::default();
        for vote in votes {
            *tally.counts.entry(vote).or_insert(0) += 1;
            tally.total += 1;
        }
        tally
    }

    /// Winning label under the tie-break rule, or `None` for an empty tally.
    pub fn winner(&self, tie_break: ClassLabel) -> Option<ClassLabel> {
        let best = self.counts.values().copied().max()?;
        let mut tied = self
            .counts
            .iter()
            .filter(|(_, n)| **n == best)
            .map(|(label, _)| *label);
        let smallest = tied.next()?;
        if self.counts.get(&tie_break) == Some(&best) {
            Some(tie_break)
        } else {
            Some(smallest)
        }
    }
}

/// Majority vote over a non-empty ballot. Ties resolve to `tie_break` when it
/// is among the tied labels, otherwise to the smallest tied label.
pub fn majority_vote(
    votes: &[ClassLabel],
    tie_break: ClassLabel,
) -> Result<ClassLabel, VotingError> {
    VoteTally::from_votes(votes.iter().copied())
        .winner(tie_break)
        .ok_or(VotingError::EmptyVotes)
}

/// Two-stage gatekeeper vote with the default tally policy (0 votes excluded
/// from the defence tally).
pub fn gatekeeper_vote(
    gatekeeper_votes: &[ClassLabel],
    specialist_votes: &[ClassLabel],
    threshold_t: usize,
    tie_break: ClassLabel,
) -> Result<ClassLabel, VotingError> {
    gatekeeper_vote_with(
        gatekeeper_votes,
        specialist_votes,
        threshold_t,
        tie_break,
        false,
    )
}

/// Two-stage gatekeeper vote. `count_zero_votes` keeps 0 votes in the defence
/// tally; it exists for sensitivity analysis and is off in normal operation.
pub fn gatekeeper_vote_with(
    gatekeeper_votes: &[ClassLabel],
    specialist_votes: &[ClassLabel],
    threshold_t: usize,
    tie_break: ClassLabel,
    count_zero_votes: bool,
) -> Result<ClassLabel, VotingError> {
    let (label, _) = gatekeeper_vote_traced(
        gatekeeper_votes,
        specialist_votes,
        threshold_t,
        tie_break,
        count_zero_votes,
    )?;
    Ok(label)
}

fn gatekeeper_vote_traced(
    gatekeeper_votes: &[ClassLabel],
    specialist_votes: &[ClassLabel],
    threshold_t: usize,
    tie_break: ClassLabel,
    count_zero_votes: bool,
) -> Result<(ClassLabel, TraceParts), VotingError> {
    let g = gatekeeper_votes.len();
    if g == 0 {
        return Err(VotingError::EmptyVotes);
    }
    if threshold_t < 1 || threshold_t > g {
        return Err(VotingError::ThresholdOutOfRange { t: threshold_t, g });
    }
    let zero_count = gatekeeper_votes
        .iter()
        .filter(|v| **v == ClassLabel::NO_DEFENCE)
        .count();
    let tally = VoteTally::from_votes(
        gatekeeper_votes
            .iter()
            .chain(specialist_votes.iter())
            .copied()
            .filter(|v| count_zero_votes || *v != ClassLabel::NO_DEFENCE),
    );
    let override_fired = zero_count >= threshold_t;
    let label = if override_fired {
        ClassLabel::NO_DEFENCE
    } else {
        // Every vote being 0 without the override firing is only reachable
        // with t > 1 and no specialists; fall back to the tie break.
        tally.winner(tie_break).unwrap_or(tie_break)
    };
    let parts = TraceParts {
        gatekeeper_zero_count: zero_count,
        override_fired,
        tally,
    };
    Ok((label, parts))
}

struct TraceParts {
    gatekeeper_zero_count: usize,
    override_fired: bool,
    tally: VoteTally,
}

/// Per-sample voting record. `tally` is the defence tally the second stage
/// saw (with the zero-vote policy already applied); `winning_label` is the
/// final ensemble output, which is 0 whenever `override_fired` is set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteTrace {
    pub sample_id: String,
    pub gatekeeper_zero_count: usize,
    pub override_fired: bool,
    pub winning_label: ClassLabel,
    pub tally: VoteTally,
}

/// Builds a voter-id lookup for a prediction pool.
pub fn pool_index(
    pool: &[VoterPredictions],
) -> BTreeMap<&str, &VoterPredictions> {
    pool.iter().map(|p| (p.meta.voter_id.as_str(), p)).collect()
}

/// Runs the ensemble over the given samples and returns one prediction per
/// sample id.
pub fn ensemble_predict(
    config: &EnsembleConfig,
    pool: &[VoterPredictions],
    samples: &[String],
) -> Result<BTreeMap<String, ClassLabel>, VotingError> {
    let traces = ensemble_predict_traced(config, pool, samples)?;
    Ok(traces
        .into_iter()
        .map(|t| (t.sample_id, t.winning_label))
        .collect())
}

/// Runs the ensemble and keeps the full voting trace, one record per sample
/// in input order.
pub fn ensemble_predict_traced(
    config: &EnsembleConfig,
    pool: &[VoterPredictions],
    samples: &[String],
) -> Result<Vec<VoteTrace>, VotingError> {
    let index = pool_index(pool);
    config.check_against_pool(&index)?;
    let fetch = |ids: &[String]| -> Vec<&VoterPredictions> {
        ids.iter().map(|id| index[id.as_str()]).collect()
    };
    let gatekeepers = fetch(&config.gatekeeper_voters);
    let specialists = fetch(&config.specialist_voters);
    let votes_for = |voters: &[&VoterPredictions],
                     sample_id: &str|
     -> Result<Vec<ClassLabel>, VotingError> {
        voters
            .iter()
            .map(|v| {
                v.get(sample_id).ok_or_else(|| VotingError::MissingPrediction {
                    voter_id: v.meta.voter_id.clone(),
                    sample_id: sample_id.to_string(),
                })
            })
            .collect()
    };
    let mut traces = Vec::with_capacity(samples.len());
    for sample_id in samples {
        let g_votes = votes_for(&gatekeepers, sample_id)?;
        let s_votes = votes_for(&specialists, sample_id)?;
        let (label, parts) = gatekeeper_vote_traced(
            &g_votes,
            &s_votes,
            config.threshold_t,
            config.tie_break,
            config.count_zero_votes,
        )?;
        traces.push(VoteTrace {
            sample_id: sample_id.clone(),
            gatekeeper_zero_count: parts.gatekeeper_zero_count,
            override_fired: parts.override_fired,
            winning_label: label,
            tally: parts.tally,
        });
    }
    Ok(traces)
}
