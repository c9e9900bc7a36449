//! Evaluation and agreement metrics: per-class precision/recall/F1, macro-F1
//! over a class subset, confusion matrices, Krippendorff's alpha for nominal
//! data, and Pearson correlation between fold profiles.
//!
//! Alpha uses the coincidence-matrix formulation. With `n_c` the label
//! totals, `o_ck` the coincidences, and `n` the grand total,
//!
//! ```text
//! alpha = 1 - (n - 1) * sum_{c != k} o_ck / sum_{c != k} n_c * n_k
//! ```
//!
//! which equals `1 - D_o / D_e` for the nominal disagreement weights. Only
//! complete rectangular data is accepted: every voter must cover the same
//! sample set. When expected disagreement is zero (every vote in the whole
//! pool carries one single label) alpha is 1 by convention.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ClassLabel, GoldLabels, VoterPredictions, NUM_CLASSES};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("prediction and gold sample sets differ: {missing} missing, {extra} extra")]
    SampleSetMismatch { missing: usize, extra: usize },
    #[error("empty class subset")]
    EmptyClassSubset,
    #[error("agreement needs at least two voters, got {0}")]
    NotEnoughVoters(usize),
    #[error("agreement needs at least one sample")]
    NoSamples,
    #[error("voter {voter_id:?} breaks rectangularity: {missing} missing, {extra} extra")]
    IncompleteData {
        voter_id: String,
        missing: usize,
        extra: usize,
    },
    #[error("profiles have different lengths: {0} vs {1}")]
    ProfileLengthMismatch(usize, usize),
    #[error("correlation needs at least two points, got {0}")]
    ProfileTooShort(usize),
    #[error("profile contains a non-finite value")]
    NonFiniteProfile,
}

/// Precision, recall, and F1 for one class. Zero-denominator cases come back
/// as 0; `degenerate` marks a class absent from both gold and predictions
/// (no true positives, false positives, or false negatives).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrfScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold occurrences of the class.
    pub support: usize,
    pub degenerate: bool,
}

/// Presentation mode for a confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    None,
    Row,
}

/// A 9x9 confusion matrix with gold labels on rows and predictions on
/// columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; NUM_CLASSES]; NUM_CLASSES],
    pub normalization: Normalization,
}

impl ConfusionMatrix {
    /// Matrix values under the chosen normalization. With row normalization
    /// every row divides by its support; zero-support rows stay all zero.
    pub fn values(&self) -> [[f64; NUM_CLASSES]; NUM_CLASSES] {
        let mut out = [[0.0; NUM_CLASSES]; NUM_CLASSES];
        for (g, row) in self.counts.iter().enumerate() {
            let denom: usize = row.iter().sum();
            for (p, &n) in row.iter().enumerate() {
                out[g][p] = match self.normalization {
                    Normalization::None => n as f64,
                    Normalization::Row if denom == 0 => 0.0,
                    Normalization::Row => n as f64 / denom as f64,
                };
            }
        }
        out
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }
}

fn confusion_counts(
    pred: &BTreeMap<String, ClassLabel>,
    gold: &GoldLabels,
) -> Result<[[usize; NUM_CLASSES]; NUM_CLASSES], MetricsError> {
    let missing = gold.ids().filter(|id| !pred.contains_key(*id)).count();
    let extra = pred.keys().filter(|id| gold.get(id).is_none()).count();
    if missing > 0 || extra > 0 {
        return Err(MetricsError::SampleSetMismatch { missing, extra });
    }
    let mut counts = [[0usize; NUM_CLASSES]; NUM_CLASSES];
    for (id, gold_label) in gold.iter() {
        let pred_label = pred[id];
        counts[gold_label.index()][pred_label.index()] += 1;
    }
    Ok(counts)
}

/// Confusion matrix of predictions against gold.
pub fn confusion(
    pred: &BTreeMap<String, ClassLabel>,
    gold: &GoldLabels,
    normalization: Normalization,
) -> Result<ConfusionMatrix, MetricsError> {
    Ok(ConfusionMatrix {
        counts: confusion_counts(pred, gold)?,
        normalization,
    })
}

/// Per-class score computed from raw confusion counts.
pub fn prf_from_counts(
    counts: &[[usize; NUM_CLASSES]; NUM_CLASSES],
    class: ClassLabel,
) -> PrfScore {
    let c = class.index();
    let tp = counts[c][c];
    let support: usize = counts[c].iter().sum();
    let predicted: usize = counts.iter().map(|row| row[c]).sum();
    let fp = predicted - tp;
    let fn_ = support - tp;
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    PrfScore {
        precision,
        recall,
        f1,
        support,
        degenerate: tp == 0 && fp == 0 && fn_ == 0,
    }
}

/// Precision, recall, and F1 of one class.
pub fn per_class_prf(
    pred: &BTreeMap<String, ClassLabel>,
    gold: &GoldLabels,
    class: ClassLabel,
) -> Result<PrfScore, MetricsError> {
    Ok(prf_from_counts(&confusion_counts(pred, gold)?, class))
}

/// Macro-F1 over a class subset computed from confusion counts. With
/// `skip_absent` set, classes absent from both gold and predictions drop out
/// of the mean; if every subset class is absent the result is 0.
pub fn macro_f1_from_counts(
    counts: &[[usize; NUM_CLASSES]; NUM_CLASSES],
    class_subset: &BTreeSet<ClassLabel>,
    skip_absent: bool,
) -> Result<f64, MetricsError> {
    if class_subset.is_empty() {
        return Err(MetricsError::EmptyClassSubset);
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for &class in class_subset {
        let score = prf_from_counts(counts, class);
        if skip_absent && score.degenerate {
            continue;
        }
        sum += score.f1;
        n += 1;
    }
    if n == 0 {
        Ok(0.0)
    } else {
        Ok(sum / n as f64)
    }
}

/// Macro-F1 over a class subset. Every class in the subset contributes,
/// absent classes as 0.
pub fn macro_f1(
    pred: &BTreeMap<String, ClassLabel>,
    gold: &GoldLabels,
    class_subset: &BTreeSet<ClassLabel>,
) -> Result<f64, MetricsError> {
    macro_f1_from_counts(&confusion_counts(pred, gold)?, class_subset, false)
}

/// Full evaluation: per-class scores for all nine classes, macro-F1 over the
/// subset, and the confusion matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub class_subset: BTreeSet<ClassLabel>,
    pub skip_absent: bool,
    pub macro_f1: f64,
    pub per_class: BTreeMap<ClassLabel, PrfScore>,
    pub confusion: ConfusionMatrix,
}

pub fn evaluate(
    pred: &BTreeMap<String, ClassLabel>,
    gold: &GoldLabels,
    class_subset: &BTreeSet<ClassLabel>,
    skip_absent: bool,
) -> Result<EvalReport, MetricsError> {
    let counts = confusion_counts(pred, gold)?;
    let macro_f1 = macro_f1_from_counts(&counts, class_subset, skip_absent)?;
    let per_class = ClassLabel::all()
        .map(|c| (c, prf_from_counts(&counts, c)))
        .collect();
    Ok(EvalReport {
        class_subset: class_subset.clone(),
        skip_absent,
        macro_f1,
        per_class,
        confusion: ConfusionMatrix {
            counts,
            normalization: Normalization::None,
        },
    })
}

/// Krippendorff's alpha for nominal data over complete rectangular label
/// sets. Every voter must cover exactly the same samples.
pub fn krippendorff_alpha(
    voters: &[&BTreeMap<String, ClassLabel>],
) -> Result<f64, MetricsError> {
    let m = voters.len();
    if m < 2 {
        return Err(MetricsError::NotEnoughVoters(m));
    }
    let reference = voters[0];
    if reference.is_empty() {
        return Err(MetricsError::NoSamples);
    }
    for (i, voter) in voters.iter().enumerate().skip(1) {
        let missing = reference.keys().filter(|id| !voter.contains_key(*id)).count();
        let extra = voter.keys().filter(|id| !reference.contains_key(*id)).count();
        if missing > 0 || extra > 0 {
            return Err(MetricsError::IncompleteData {
                voter_id: format!("voter #{i}"),
                missing,
                extra,
            });
        }
    }
    let mut coincidence = [[0.0f64; NUM_CLASSES]; NUM_CLASSES];
    let pair_weight = 1.0 / (m as f64 - 1.0);
    for sample_id in reference.keys() {
        let labels: Vec<usize> = voters.iter().map(|v| v[sample_id].index()).collect();
        for (i, &a) in labels.iter().enumerate() {
            for (j, &b) in labels.iter().enumerate() {
                if i != j {
                    coincidence[a][b] += pair_weight;
                }
            }
        }
    }
    let label_totals: Vec<f64> = coincidence.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = label_totals.iter().sum();
    let mut observed_off = 0.0;
    let mut expected_off = 0.0;
    for c in 0..NUM_CLASSES {
        for k in 0..NUM_CLASSES {
            if c != k {
                observed_off += coincidence[c][k];
                expected_off += label_totals[c] * label_totals[k];
            }
        }
    }
    if expected_off == 0.0 {
        // one single label everywhere: no expected disagreement
        return Ok(1.0);
    }
    Ok(1.0 - (n - 1.0) * observed_off / expected_off)
}

/// Alpha over a slice of voters' prediction sets.
pub fn alpha_of_predictions(voters: &[&VoterPredictions]) -> Result<f64, MetricsError> {
    let maps: Vec<&BTreeMap<String, ClassLabel>> =
        voters.iter().map(|v| &v.entries).collect();
    krippendorff_alpha(&maps)
}

/// Alpha for the union of two branches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossPairAlpha {
    pub branch_a: String,
    pub branch_b: String,
    pub alpha: f64,
}

/// Pool-level agreement decomposed into within-branch and cross-branch-pair
/// alphas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaDecomposition {
    /// Alpha over every voter in the pool.
    pub pool_alpha: f64,
    /// Alpha within each branch that has at least two voters.
    pub within: BTreeMap<String, f64>,
    /// Alpha over the union of each branch pair, in lexicographic pair order.
    pub cross: Vec<CrossPairAlpha>,
    /// The least agreeing branch pair.
    pub min_cross: Option<CrossPairAlpha>,
    /// Branches skipped by the within decomposition for having one voter.
    pub skipped: Vec<String>,
}

pub fn pairwise_alpha_decomposition(
    pool: &[VoterPredictions],
) -> Result<AlphaDecomposition, MetricsError> {
    let all: Vec<&VoterPredictions> = pool.iter().collect();
    let pool_alpha = alpha_of_predictions(&all)?;
    let mut branches: BTreeMap<&str, Vec<&VoterPredictions>> = BTreeMap::new();
    for voter in pool {
        branches
            .entry(voter.meta.branch_id.as_str())
            .or_default()
            .push(voter);
    }
    let mut within = BTreeMap::new();
    let mut skipped = Vec::new();
    for (branch_id, members) in &branches {
        if members.len() < 2 {
            skipped.push(branch_id.to_string());
        } else {
            within.insert(branch_id.to_string(), alpha_of_predictions(members)?);
        }
    }
    let ids: Vec<&str> = branches.keys().copied().collect();
    let mut cross = Vec::new();
    for (i, &a) in ids.iter().enumerate() {
        for &b in &ids[i + 1..] {
            let mut union: Vec<&VoterPredictions> = branches[a].clone();
            union.extend(branches[b].iter().copied());
            cross.push(CrossPairAlpha {
                branch_a: a.to_string(),
                branch_b: b.to_string(),
                alpha: alpha_of_predictions(&union)?,
            });
        }
    }
    let min_cross = cross
        .iter()
        .min_by(|x, y| x.alpha.partial_cmp(&y.alpha).expect("finite alpha"))
        .cloned();
    Ok(AlphaDecomposition {
        pool_alpha,
        within,
        cross,
        min_cross,
        skipped,
    })
}

/// Pearson correlation, or an explicit marker when either input has zero
/// variance and the coefficient is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Correlation {
    Coefficient(f64),
    Degenerate,
}

impl Correlation {
    pub fn coefficient(self) -> Option<f64> {
        match self {
            Correlation::Coefficient(r) => Some(r),
            Correlation::Degenerate => None,
        }
    }

    pub fn is_degenerate(self) -> bool {
        matches!(self, Correlation::Degenerate)
    }
}

/// Pearson correlation between two equal-length series of at least two
/// points. A constant series yields [`Correlation::Degenerate`] rather than
/// a number.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<Correlation, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::ProfileLengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(MetricsError::ProfileTooShort(a.len()));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFiniteProfile);
    }
    // A constant series has zero variance by definition; test structurally so
    // rounding in the mean cannot leave a phantom nonzero variance.
    if a.windows(2).all(|w| w[0] == w[1]) || b.windows(2).all(|w| w[0] == w[1]) {
        return Ok(Correlation::Degenerate);
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&x, &y) in a.iter().zip(b.iter()) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Ok(Correlation::Degenerate);
    }
    Ok(Correlation::Coefficient(cov / (var_a * var_b).sqrt()))
}
