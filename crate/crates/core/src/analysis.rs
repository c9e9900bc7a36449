//! Flip diagnostics: agreement bands over a base voter pool, flip tracing
//! when a probe branch joins the ensemble, boundary-touch statistics, and
//! the override rate of the gatekeeper stage.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Branch, ClassLabel, DomainError, EnsembleConfig, VoterPredictions};
use crate::voting::{ensemble_predict, ensemble_predict_traced, pool_index, VotingError};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("no voters")]
    NoVoters,
    #[error("no samples")]
    NoSamples,
    #[error("voter {voter_id} has no prediction for sample {sample_id}")]
    CoverageMismatch {
        voter_id: String,
        sample_id: String,
    },
    #[error("full configuration does not extend the base: {0}")]
    ConfigMismatch(&'static str),
    #[error(transparent)]
    Voting(#[from] VotingError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Groups samples by agreement band: the maximal per-label vote count among
/// the base voters. Six identical votes put a sample in band 6; a 4-2 split
/// puts it in band 4.
pub fn agreement_bands(
    base_voters: &[&VoterPredictions],
    samples: &[String],
) -> Result<BTreeMap<usize, BTreeSet<String>>, AnalysisError> {
    if base_voters.is_empty() {
        return Err(AnalysisError::NoVoters);
    }
    let mut bands: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
    for sample_id in samples {
        let mut counts = [0usize; crate::domain::NUM_CLASSES];
        for voter in base_voters {
            let label =
                voter
                    .get(sample_id)
                    .ok_or_else(|| AnalysisError::CoverageMismatch {
                        voter_id: voter.meta.voter_id.clone(),
                        sample_id: sample_id.clone(),
                    })?;
            counts[label.index()] += 1;
        }
        let band = counts.iter().copied().max().expect("nine counts");
        bands.entry(band).or_default().insert(sample_id.clone());
    }
    Ok(bands)
}

/// Sample and flip counts of one agreement band.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandStat {
    pub samples: usize,
    pub flips: usize,
}

/// One flip direction with its count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipDirection {
    pub from: ClassLabel,
    pub to: ClassLabel,
    pub count: usize,
}

/// What adding a probe branch changed: per-band sample and flip counts, flip
/// directions, and how many flips touch the boundary classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipReport {
    pub base_voter_count: usize,
    pub probe_voter_count: usize,
    /// Every band from 1 to the base voter count, zero-count bands included.
    pub band_histogram: BTreeMap<usize, BandStat>,
    /// Flip directions sorted by descending count, then by label pair.
    pub flip_directions: Vec<FlipDirection>,
    pub boundary_touch_count: usize,
    pub boundary_classes: BTreeSet<ClassLabel>,
    /// Samples in bands where the probe voters could arithmetically change
    /// the outcome (band b with 2b <= base + probe voters).
    pub contested_total: usize,
    pub flips_total: usize,
    pub samples_total: usize,
}

/// The class pair whose boundary the flip analysis watches by default.
pub fn default_boundary() -> BTreeSet<ClassLabel> {
    [6, 7]
        .into_iter()
        .map(|v| ClassLabel::new(v).expect("class labels 6 and 7 exist"))
        .collect()
}

fn check_extension(
    base: &EnsembleConfig,
    full: &EnsembleConfig,
    probe: &Branch,
) -> Result<(), AnalysisError> {
    if base.gatekeeper_voters != full.gatekeeper_voters {
        return Err(AnalysisError::ConfigMismatch("gatekeepers differ"));
    }
    if base.threshold_t != full.threshold_t {
        return Err(AnalysisError::ConfigMismatch("thresholds differ"));
    }
    if base.tie_break != full.tie_break {
        return Err(AnalysisError::ConfigMismatch("tie-break classes differ"));
    }
    if base.count_zero_votes != full.count_zero_votes {
        return Err(AnalysisError::ConfigMismatch("zero-vote policies differ"));
    }
    let mut expected: BTreeSet<&str> = base
        .specialist_voters
        .iter()
        .map(String::as_str)
        .collect();
    for id in &probe.voter_ids {
        expected.insert(id);
    }
    let actual: BTreeSet<&str> = full
        .specialist_voters
        .iter()
        .map(String::as_str)
        .collect();
    let expected_len = base.specialist_voters.len() + probe.voter_ids.len();
    if expected != actual || full.specialist_voters.len() != expected_len {
        return Err(AnalysisError::ConfigMismatch(
            "full specialists are not base specialists plus the probe branch",
        ));
    }
    Ok(())
}

/// Compares the base ensemble against the base-plus-probe ensemble sample by
/// sample. A flip is a sample where the two outputs differ. Bands come from
/// the base configuration's voters only.
pub fn flip_analysis(
    base_config: &EnsembleConfig,
    full_config: &EnsembleConfig,
    pool: &[VoterPredictions],
    probe_branch: &Branch,
    samples: &[String],
    boundary_classes: &BTreeSet<ClassLabel>,
) -> Result<FlipReport, AnalysisError> {
    check_extension(base_config, full_config, probe_branch)?;
    let base_out = ensemble_predict(base_config, pool, samples)?;
    let full_out = ensemble_predict(full_config, pool, samples)?;
    let index = pool_index(pool);
    let base_voters: Vec<&VoterPredictions> = base_config
        .gatekeeper_voters
        .iter()
        .chain(base_config.specialist_voters.iter())
        .map(|id| {
            index
                .get(id.as_str())
                .copied()
                .ok_or_else(|| DomainError::UnknownVoter(id.clone()))
        })
        .collect::<Result<_, _>>()?;
    let b = base_voters.len();
    let p = probe_branch.voter_ids.len();
    let bands = agreement_bands(&base_voters, samples)?;
    let mut band_histogram: BTreeMap<usize, BandStat> =
        (1..=b).map(|band| (band, BandStat::default())).collect();
    let mut directions: BTreeMap<(ClassLabel, ClassLabel), usize> = BTreeMap::new();
    let mut boundary_touch_count = 0;
    let mut contested_total = 0;
    let mut flips_total = 0;
    for (&band, members) in &bands {
        let stat = band_histogram.entry(band).or_default();
        stat.samples += members.len();
        if 2 * band <= b + p {
            contested_total += members.len();
        }
        for sample_id in members {
            let from = base_out[sample_id];
            let to = full_out[sample_id];
            if from == to {
                continue;
            }
            stat.flips += 1;
            flips_total += 1;
            *directions.entry((from, to)).or_insert(0) += 1;
            if boundary_classes.contains(&from) || boundary_classes.contains(&to) {
                boundary_touch_count += 1;
            }
        }
    }
    let mut flip_directions: Vec<FlipDirection> = directions
        .into_iter()
        .map(|((from, to), count)| FlipDirection { from, to, count })
        .collect();
    flip_directions.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then(a.from.cmp(&b.from))
            .then(a.to.cmp(&b.to))
    });
    Ok(FlipReport {
        base_voter_count: b,
        probe_voter_count: p,
        band_histogram,
        flip_directions,
        boundary_touch_count,
        boundary_classes: boundary_classes.clone(),
        contested_total,
        flips_total,
        samples_total: samples.len(),
    })
}

/// Fraction of samples where the gatekeeper stage fired and forced output 0.
pub fn override_rate(
    config: &EnsembleConfig,
    pool: &[VoterPredictions],
    samples: &[String],
) -> Result<f64, AnalysisError> {
    if samples.is_empty() {
        return Err(AnalysisError::NoSamples);
    }
    let traces = ensemble_predict_traced(config, pool, samples)?;
    let fired = traces.iter().filter(|t| t.override_fired).count();
    Ok(fired as f64 / samples.len() as f64)
}
