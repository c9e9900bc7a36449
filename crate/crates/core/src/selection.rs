//! Selection procedures around the voter pool: augmentation budgets,
//! inverse-frequency class weights, top-k fold selection, anti-correlation
//! ranking of specialist candidates, and dialogue-stratified k-fold splits.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ClassLabel, VoterMeta, NUM_CLASSES};
use crate::metrics::{pearson, Correlation, MetricsError};

#[derive(Debug, Error, PartialEq)]
pub enum SelectionError {
    #[error("branch has no voters")]
    EmptyBranch,
    #[error("k must be at least 1")]
    KZero,
    #[error("k = {k} exceeds the branch size {size}")]
    KTooLarge { k: usize, size: usize },
    #[error("voters from multiple branches: {0:?} and {1:?}")]
    MixedBranches(String, String),
    #[error("class {0} has a zero count, weight undefined")]
    ZeroClassCount(ClassLabel),
    #[error("profile value {0} is not a finite number in [0,1]")]
    BadProfileValue(f64),
    #[error("empty fold profile")]
    EmptyProfile,
    #[error("branch folds are not contiguous from 0: missing fold {0}")]
    MissingFold(u32),
    #[error("reference profile is constant, ranking undefined")]
    DegenerateReference,
    #[error("split needs k >= 2, got {0}")]
    KTooSmall(usize),
    #[error("split needs at least {k} dialogues, got {dialogues}")]
    TooFewDialogues { k: usize, dialogues: usize },
    #[error("no samples to split")]
    NoSamples,
    #[error("duplicate sample id {0:?}")]
    DuplicateSample(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Per-class augmentation numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassBudget {
    pub orig_count: usize,
    pub budget: usize,
    pub excluded: bool,
}

/// Synthetic-sample budget per class. For a non-excluded class with `n_c`
/// original samples the budget is `max(0, min(target - n_c, cap * n_c))`;
/// excluded classes get 0. Counts are unsigned, so negative inputs are
/// unrepresentable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentationBudget {
    pub target: usize,
    pub cap_multiplier: usize,
    pub excluded: BTreeSet<ClassLabel>,
    pub per_class: BTreeMap<ClassLabel, ClassBudget>,
    pub total_orig: usize,
    pub total_budget: usize,
    pub total_after: usize,
}

/// Default augmentation target per class.
pub const DEFAULT_TARGET: usize = 200;
/// Default cap multiplier on synthetic samples.
pub const DEFAULT_CAP: usize = 3;

/// The classes excluded from augmentation by default: the majority classes
/// 0 and 7.
pub fn default_excluded() -> BTreeSet<ClassLabel> {
    [ClassLabel::NO_DEFENCE, ClassLabel::HIGH_ADAPTIVE]
        .into_iter()
        .collect()
}

pub fn augmentation_budget(
    counts: &BTreeMap<ClassLabel, usize>,
    target: usize,
    cap_multiplier: usize,
    excluded: &BTreeSet<ClassLabel>,
) -> AugmentationBudget {
    let mut per_class = BTreeMap::new();
    let mut total_orig = 0;
    let mut total_budget = 0;
    for (&class, &n) in counts {
        let is_excluded = excluded.contains(&class);
        let budget = if is_excluded {
            0
        } else {
            let shortfall = target as i64 - n as i64;
            let cap = (cap_multiplier * n) as i64;
            shortfall.min(cap).max(0) as usize
        };
        per_class.insert(
            class,
            ClassBudget {
                orig_count: n,
                budget,
                excluded: is_excluded,
            },
        );
        total_orig += n;
        total_budget += budget;
    }
    AugmentationBudget {
        target,
        cap_multiplier,
        excluded: excluded.clone(),
        per_class,
        total_orig,
        total_budget,
        total_after: total_orig + total_budget,
    }
}

/// Inverse-frequency class weights `w_c = N / (K * n_c)` with `K` the number
/// of classes in the map and `N` the total count. The weighted count sum
/// `sum_c n_c * w_c` equals `N`.
pub fn inverse_freq_weights(
    counts: &BTreeMap<ClassLabel, usize>,
) -> Result<BTreeMap<ClassLabel, f64>, SelectionError> {
    let k = counts.len() as f64;
    let n: usize = counts.values().sum();
    counts
        .iter()
        .map(|(&class, &count)| {
            if count == 0 {
                Err(SelectionError::ZeroClassCount(class))
            } else {
                Ok((class, n as f64 / (k * count as f64)))
            }
        })
        .collect()
}

/// Outcome of per-branch fold selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSelection {
    pub branch_id: String,
    /// Kept voters, best `f1_cv` first.
    pub selected: Vec<VoterMeta>,
    /// Dropped voters, in the same ranking order.
    pub dropped: Vec<VoterMeta>,
}

/// Keeps the k voters of one branch with the highest `f1_cv`. Ties break
/// toward the lower fold index.
pub fn top_k_folds(
    branch_voters: &[&VoterMeta],
    k: usize,
) -> Result<FoldSelection, SelectionError> {
    let first = branch_voters.first().ok_or(SelectionError::EmptyBranch)?;
    if k == 0 {
        return Err(SelectionError::KZero);
    }
    if k > branch_voters.len() {
        return Err(SelectionError::KTooLarge {
            k,
            size: branch_voters.len(),
        });
    }
    for voter in branch_voters {
        if voter.branch_id != first.branch_id {
            return Err(SelectionError::MixedBranches(
                first.branch_id.clone(),
                voter.branch_id.clone(),
            ));
        }
    }
    let mut ranked: Vec<&VoterMeta> = branch_voters.to_vec();
    ranked.sort_by(|a, b| {
        b.f1_cv
            .partial_cmp(&a.f1_cv)
            .expect("f1_cv validated finite")
            .then(a.fold.cmp(&b.fold))
    });
    Ok(FoldSelection {
        branch_id: first.branch_id.clone(),
        selected: ranked[..k].iter().map(|m| (*m).clone()).collect(),
        dropped: ranked[k..].iter().map(|m| (*m).clone()).collect(),
    })
}

/// A branch's per-fold `f1_cv` vector, ordered by fold index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FoldProfile(Vec<f64>);

impl FoldProfile {
    pub fn new(values: Vec<f64>) -> Result<Self, SelectionError> {
        if values.is_empty() {
            return Err(SelectionError::EmptyProfile);
        }
        for &v in &values {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(SelectionError::BadProfileValue(v));
            }
        }
        Ok(FoldProfile(values))
    }

    /// Profile of a branch from its registry entries. Folds must run
    /// contiguously from 0.
    pub fn of_branch(branch_voters: &[&VoterMeta]) -> Result<Self, SelectionError> {
        let first = branch_voters.first().ok_or(SelectionError::EmptyBranch)?;
        for voter in branch_voters {
            if voter.branch_id != first.branch_id {
                return Err(SelectionError::MixedBranches(
                    first.branch_id.clone(),
                    voter.branch_id.clone(),
                ));
            }
        }
        let by_fold: BTreeMap<u32, f64> =
            branch_voters.iter().map(|m| (m.fold, m.f1_cv)).collect();
        let mut values = Vec::with_capacity(by_fold.len());
        for fold in 0..branch_voters.len() as u32 {
            match by_fold.get(&fold) {
                Some(&f1) => values.push(f1),
                None => return Err(SelectionError::MissingFold(fold)),
            }
        }
        FoldProfile::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for FoldProfile {
    type Error = SelectionError;
    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        FoldProfile::new(values)
    }
}

impl From<FoldProfile> for Vec<f64> {
    fn from(profile: FoldProfile) -> Vec<f64> {
        profile.0
    }
}

/// One ranked specialist candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialistRank {
    pub name: String,
    pub correlation: Correlation,
}

/// Ranks candidates by ascending Pearson correlation of their fold profile
/// against the reference profile, most anti-aligned first. Candidates with a
/// constant profile carry the degenerate marker and sort last.
pub fn rank_specialists(
    candidates: &[(String, FoldProfile)],
    reference: &FoldProfile,
) -> Result<Vec<SpecialistRank>, SelectionError> {
    if pearson(reference.values(), reference.values())?.is_degenerate() {
        return Err(SelectionError::DegenerateReference);
    }
    let mut rows = Vec::with_capacity(candidates.len());
    for (name, profile) in candidates {
        rows.push(SpecialistRank {
            name: name.clone(),
            correlation: pearson(profile.values(), reference.values())?,
        });
    }
    rows.sort_by(|a, b| match (a.correlation, b.correlation) {
        (Correlation::Coefficient(x), Correlation::Coefficient(y)) => x
            .partial_cmp(&y)
            .expect("finite correlation")
            .then_with(|| a.name.cmp(&b.name)),
        (Correlation::Coefficient(_), Correlation::Degenerate) => std::cmp::Ordering::Less,
        (Correlation::Degenerate, Correlation::Coefficient(_)) => std::cmp::Ordering::Greater,
        (Correlation::Degenerate, Correlation::Degenerate) => a.name.cmp(&b.name),
    });
    Ok(rows)
}

/// One sample for the splitter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSample {
    pub sample_id: String,
    pub dialogue_id: String,
    pub label: ClassLabel,
}

/// Dialogue-to-fold assignment. Samples inherit the fold of their dialogue,
/// so no dialogue ever spans folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub k: usize,
    pub fold_of: BTreeMap<String, usize>,
}

/// Assignment plus the per-fold composition report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub assignment: SplitAssignment,
    pub seed: u64,
    pub fold_class_counts: Vec<[usize; NUM_CLASSES]>,
    pub fold_sample_counts: Vec<usize>,
    pub fold_dialogue_counts: Vec<usize>,
    pub global_class_counts: [usize; NUM_CLASSES],
    /// Largest absolute gap between a fold's class proportion and the global
    /// proportion, over non-empty folds.
    pub max_proportion_deviation: f64,
    /// Sum over folds and classes of the squared gap between the fold's
    /// class count and the balanced target, the quantity the greedy step
    /// minimizes.
    pub objective: f64,
}

/// Assigns whole dialogues to `k` folds with a seeded greedy pass: dialogues
/// are visited in descending sample-count order (seeded shuffle breaking
/// size ties) and each goes to the fold where it least increases the squared
/// deviation between fold class counts and the balanced per-fold target.
/// Equal-cost folds are chosen among uniformly at random from the seeded
/// stream, so the whole split is deterministic given the seed.
pub fn stratified_kfold(
    samples: &[SplitSample],
    k: usize,
    seed: u64,
) -> Result<SplitReport, SelectionError> {
    if k < 2 {
        return Err(SelectionError::KTooSmall(k));
    }
    if samples.is_empty() {
        return Err(SelectionError::NoSamples);
    }
    let mut seen = BTreeSet::new();
    for sample in samples {
        if !seen.insert(sample.sample_id.as_str()) {
            return Err(SelectionError::DuplicateSample(sample.sample_id.clone()));
        }
    }
    let mut dialogues: BTreeMap<&str, ([usize; NUM_CLASSES], usize)> = BTreeMap::new();
    let mut global = [0usize; NUM_CLASSES];
    for sample in samples {
        let entry = dialogues
            .entry(sample.dialogue_id.as_str())
            .or_insert(([0; NUM_CLASSES], 0));
        entry.0[sample.label.index()] += 1;
        entry.1 += 1;
        global[sample.label.index()] += 1;
    }
    if dialogues.len() < k {
        return Err(SelectionError::TooFewDialogues {
            k,
            dialogues: dialogues.len(),
        });
    }
    let target: Vec<f64> = global.iter().map(|&n| n as f64 / k as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<&str> = dialogues.keys().copied().collect();
    order.shuffle(&mut rng);
    order.sort_by_key(|d| std::cmp::Reverse(dialogues[d].1));
    let mut fold_counts = vec![[0usize; NUM_CLASSES]; k];
    let mut fold_of = BTreeMap::new();
    for dialogue_id in order {
        let hist = dialogues[dialogue_id].0;
        let deltas: Vec<f64> = (0..k)
            .map(|f| {
                (0..NUM_CLASSES)
                    .map(|c| {
                        let cur = fold_counts[f][c] as f64 - target[c];
                        let new = (fold_counts[f][c] + hist[c]) as f64 - target[c];
                        new * new - cur * cur
                    })
                    .sum()
            })
            .collect();
        let best = deltas.iter().cloned().fold(f64::INFINITY, f64::min);
        let tied: Vec<usize> = (0..k).filter(|&f| deltas[f] - best <= 1e-9).collect();
        let fold = *tied.choose(&mut rng).expect("at least one fold");
        for c in 0..NUM_CLASSES {
            fold_counts[fold][c] += hist[c];
        }
        fold_of.insert(dialogue_id.to_string(), fold);
    }
    let fold_sample_counts: Vec<usize> =
        fold_counts.iter().map(|h| h.iter().sum()).collect();
    let mut fold_dialogue_counts = vec![0usize; k];
    for &fold in fold_of.values() {
        fold_dialogue_counts[fold] += 1;
    }
    let total: usize = global.iter().sum();
    let mut max_dev: f64 = 0.0;
    for (hist, &fold_total) in fold_counts.iter().zip(&fold_sample_counts) {
        if fold_total == 0 {
            continue;
        }
        for c in 0..NUM_CLASSES {
            let fold_prop = hist[c] as f64 / fold_total as f64;
            let global_prop = global[c] as f64 / total as f64;
            max_dev = max_dev.max((fold_prop - global_prop).abs());
        }
    }
    let objective = fold_counts
        .iter()
        .map(|hist| {
            hist.iter()
                .zip(&target)
                .map(|(&n, &t)| (n as f64 - t) * (n as f64 - t))
                .sum::<f64>()
        })
        .sum();
    Ok(SplitReport {
        assignment: SplitAssignment { k, fold_of },
        seed,
        fold_class_counts: fold_counts,
        fold_sample_counts,
        fold_dialogue_counts,
        global_class_counts: global,
        max_proportion_deviation: max_dev,
        objective,
    })
}
