//! Core vocabulary: class labels, gold labels, voter metadata, branches, and
//! ensemble configurations, plus structural validation of a prediction pool.
//!
//! Validation problems are data, not panics. [`validate_registry`] returns a
//! list of [`Violation`]s so callers can report all of them at once.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of classes on the label scale.
pub const NUM_CLASSES: usize = 9;

#[derive(Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("label {0} out of range 0..={}", NUM_CLASSES - 1)]
    LabelOutOfRange(u8),
    #[error("gold labels must not be empty")]
    EmptyGold,
    #[error("duplicate sample id {0:?}")]
    DuplicateSample(String),
    #[error("voter {voter_id:?}: fold {fold} not below fold count {fold_count}")]
    FoldOutOfRange {
        voter_id: String,
        fold: u32,
        fold_count: u32,
    },
    #[error("voter {voter_id:?}: f1_cv {f1_cv} not a finite value in [0,1]")]
    BadF1Cv { voter_id: String, f1_cv: f64 },
    #[error("voter {voter_id:?}: gatekeeper role requires the nine-class mode")]
    GatekeeperNotNineClass { voter_id: String },
    #[error("branch {branch_id:?}: voters disagree on {field}")]
    MixedBranch { branch_id: String, field: &'static str },
    #[error("branch {branch_id:?}: duplicate fold {fold}")]
    DuplicateFold { branch_id: String, fold: u32 },
    #[error("ensemble config: no gatekeeper voters")]
    NoGatekeepers,
    #[error("ensemble config: threshold {t} not in 1..={g}")]
    ThresholdOutOfRange { t: usize, g: usize },
    #[error("ensemble config: voter {0:?} listed twice")]
    DuplicateVoter(String),
    #[error("ensemble config: voter {0:?} not present in the pool")]
    UnknownVoter(String),
    #[error("ensemble config: gatekeeper {0:?} is not a nine-class voter")]
    GatekeeperWrongMode(String),
    #[error(
        "ensemble config: specialist {0:?} is a nine-class voter \
         (pass allow_nine_class_specialists to permit this)"
    )]
    SpecialistWrongMode(String),
    #[error("threshold undefined for zero gatekeepers")]
    ZeroGatekeepers,
}

/// A class label on the 0..=8 scale. 0 is "no defence present", 1..=8 are
/// defence levels ordered from least to most adaptive, 8 meaning the rater
/// needs more information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ClassLabel(u8);

impl ClassLabel {
    /// The "no defence present" class.
    pub const NO_DEFENCE: ClassLabel = ClassLabel(0);
    /// The high-adaptive class, which also serves as the default tie break.
    pub const HIGH_ADAPTIVE: ClassLabel = ClassLabel(7);

    pub fn new(value: u8) -> Result<Self, DomainError> {
        if (value as usize) < NUM_CLASSES {
            Ok(ClassLabel(value))
        } else {
            Err(DomainError::LabelOutOfRange(value))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Human-readable level name.
    pub fn name(self) -> &'static str {
        match self.0 {
            0 => "No Defence",
            1 => "Action",
            2 => "Major Image-Dist.",
            3 => "Disavowal",
            4 => "Minor Image-Dist.",
            5 => "Neurotic",
            6 => "Obsessional",
            7 => "High-Adaptive",
            _ => "Needs More Info",
        }
    }

    /// All nine classes in ascending order.
    pub fn all() -> impl Iterator<Item = ClassLabel> {
        (0..NUM_CLASSES as u8).map(ClassLabel)
    }

    /// The defence classes 1..=8, the default evaluation subset.
    pub fn defence_classes() -> BTreeSet<ClassLabel> {
        (1..NUM_CLASSES as u8).map(ClassLabel).collect()
    }
}

impl TryFrom<u8> for ClassLabel {
    type Error = DomainError;
    fn try_from(value: u8) -> Result<Self, Self::Error> {
        ClassLabel::new(value)
    }
}

impl From<ClassLabel> for u8 {
    fn from(label: ClassLabel) -> u8 {
        label.0
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Gold labels keyed by sample id. Construction rejects empty sets and
/// duplicate ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLabels {
    entries: BTreeMap<String, ClassLabel>,
}

impl GoldLabels {
    pub fn new<I>(pairs: I) -> Result<Self, DomainError>
    where
        I: IntoIterator<Item = (String, ClassLabel)>,
    {
        let mut entries = BTreeMap::new();
        for (id, label) in pairs {
            if entries.insert(id.clone(), label).is_some() {
                return Err(DomainError::DuplicateSample(id));
            }
        }
        if entries.is_empty() {
            return Err(DomainError::EmptyGold);
        }
        Ok(GoldLabels { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, sample_id: &str) -> Option<ClassLabel> {
        self.entries.get(sample_id).copied()
    }

    /// Sample ids in lexicographic order.
    pub fn ids(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, ClassLabel)> {
        self.entries.iter().map(|(id, l)| (id, *l))
    }

    pub fn entries(&self) -> &BTreeMap<String, ClassLabel> {
        &self.entries
    }

    /// Per-class sample counts.
    pub fn class_counts(&self) -> BTreeMap<ClassLabel, usize> {
        let mut counts: BTreeMap<ClassLabel, usize> =
            ClassLabel::all().map(|c| (c, 0)).collect();
        for label in self.entries.values() {
            *counts.get_mut(label).expect("label in range") += 1;
        }
        counts
    }

    /// Restriction to the given sample ids. Ids missing from the gold set are
    /// reported as an error by callers that need exact coverage; here they are
    /// simply absent from the result.
    pub fn restrict<'a, I>(&self, ids: I) -> Result<GoldLabels, DomainError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        GoldLabels::new(
            ids.into_iter()
                .filter_map(|id| self.get(id).map(|l| (id.to_string(), l))),
        )
    }
}

/// Whether a voter takes part in the override stage or only in the defence
/// tally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Gatekeeper,
    Specialist,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Gatekeeper => "gatekeeper",
            Role::Specialist => "specialist",
        })
    }
}

/// Training method behind a voter's cached predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "SFT")]
    Sft,
    #[serde(rename = "ClsHead")]
    ClsHead,
    #[serde(rename = "LR")]
    Lr,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Sft => "SFT",
            Method::ClsHead => "ClsHead",
            Method::Lr => "LR",
        })
    }
}

/// Label alphabet a voter was trained on. Nine-class voters may emit class 0,
/// eight-class voters never do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassMode {
    #[serde(rename = "9c")]
    NineClass,
    #[serde(rename = "8c")]
    EightClass,
}

impl fmt::Display for ClassMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassMode::NineClass => "9c",
            ClassMode::EightClass => "8c",
        })
    }
}

/// Whether the voter was trained on the augmented corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Aug {
    #[serde(rename = "aug")]
    Aug,
    #[serde(rename = "no-aug")]
    NoAug,
}

impl fmt::Display for Aug {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aug::Aug => "aug",
            Aug::NoAug => "no-aug",
        })
    }
}

/// Metadata for one voter: one trained model on one cross-validation fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoterMeta {
    pub voter_id: String,
    /// Branch the voter belongs to; a branch is the set of sibling folds of
    /// one training setup.
    pub branch_id: String,
    pub role: Role,
    pub method: Method,
    pub class_mode: ClassMode,
    pub base_model: String,
    pub aug: Aug,
    /// Fold index within the branch, 0-based.
    pub fold: u32,
    /// Cross-validation macro-F1 of this fold, used for fold selection.
    pub f1_cv: f64,
}

impl VoterMeta {
    /// Checks the per-voter invariants: gatekeepers are nine-class voters and
    /// `f1_cv` is a finite value in [0,1].
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.role == Role::Gatekeeper && self.class_mode != ClassMode::NineClass {
            return Err(DomainError::GatekeeperNotNineClass {
                voter_id: self.voter_id.clone(),
            });
        }
        if !self.f1_cv.is_finite() || !(0.0..=1.0).contains(&self.f1_cv) {
            return Err(DomainError::BadF1Cv {
                voter_id: self.voter_id.clone(),
                f1_cv: self.f1_cv,
            });
        }
        Ok(())
    }
}

/// Cached hard-label predictions of one voter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoterPredictions {
    pub meta: VoterMeta,
    pub entries: BTreeMap<String, ClassLabel>,
}

impl VoterPredictions {
    pub fn get(&self, sample_id: &str) -> Option<ClassLabel> {
        self.entries.get(sample_id).copied()
    }

    /// Sample ids this voter covers.
    pub fn ids(&self) -> BTreeSet<&str> {
        self.entries.keys().map(String::as_str).collect()
    }
}

/// A branch groups the fold voters of one training setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub branch_id: String,
    pub role: Role,
    pub method: Method,
    pub class_mode: ClassMode,
    pub base_model: String,
    pub aug: Aug,
    /// Voter ids ordered by fold index.
    pub voter_ids: Vec<String>,
}

/// Groups registry entries into branches, checking that every branch is
/// homogeneous in role, method, class mode, base model, and augmentation,
/// and that no fold index repeats.
pub fn branches_of_registry(registry: &[VoterMeta]) -> Result<Vec<Branch>, DomainError> {
    let mut groups: BTreeMap<&str, Vec<&VoterMeta>> = BTreeMap::new();
    for meta in registry {
        groups.entry(&meta.branch_id).or_default().push(meta);
    }
    let mut branches = Vec::with_capacity(groups.len());
    for (branch_id, mut members) in groups {
        members.sort_by_key(|m| m.fold);
        let first = members[0];
        let mut seen_folds = BTreeSet::new();
        for m in &members {
            let field = if m.role != first.role {
                Some("role")
            } else if m.method != first.method {
                Some("method")
            } else if m.class_mode != first.class_mode {
                Some("class_mode")
            } else if m.base_model != first.base_model {
                Some("base_model")
            } else if m.aug != first.aug {
                Some("aug")
            } else {
                None
            };
            if let Some(field) = field {
                return Err(DomainError::MixedBranch {
                    branch_id: branch_id.to_string(),
                    field,
                });
            }
            if !seen_folds.insert(m.fold) {
                return Err(DomainError::DuplicateFold {
                    branch_id: branch_id.to_string(),
                    fold: m.fold,
                });
            }
        }
        branches.push(Branch {
            branch_id: branch_id.to_string(),
            role: first.role,
            method: first.method,
            class_mode: first.class_mode,
            base_model: first.base_model.clone(),
            aug: first.aug,
            voter_ids: members.iter().map(|m| m.voter_id.clone()).collect(),
        });
    }
    Ok(branches)
}

/// An ensemble configuration: which voters gate, which voters tally, the
/// override threshold, and the tie-break class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub gatekeeper_voters: Vec<String>,
    pub specialist_voters: Vec<String>,
    /// Override fires when at least this many gatekeepers vote 0.
    pub threshold_t: usize,
    pub tie_break: ClassLabel,
    /// Permits nine-class voters in specialist slots. Off by default; their
    /// 0 votes are excluded from the tally either way.
    #[serde(default)]
    pub allow_nine_class_specialists: bool,
    /// Counts 0 votes in the defence tally instead of excluding them. Off by
    /// default; exists for sensitivity analysis only.
    #[serde(default)]
    pub count_zero_votes: bool,
}

impl EnsembleConfig {
    pub fn new(
        gatekeeper_voters: Vec<String>,
        specialist_voters: Vec<String>,
        threshold_t: usize,
        tie_break: ClassLabel,
    ) -> Result<Self, DomainError> {
        let config = EnsembleConfig {
            gatekeeper_voters,
            specialist_voters,
            threshold_t,
            tie_break,
            allow_nine_class_specialists: false,
            count_zero_votes: false,
        };
        config.check_shape()?;
        Ok(config)
    }

    /// Structural checks that need no pool: non-empty gatekeeper list,
    /// threshold in range, no duplicate voter ids.
    pub fn check_shape(&self) -> Result<(), DomainError> {
        let g = self.gatekeeper_voters.len();
        if g == 0 {
            return Err(DomainError::NoGatekeepers);
        }
        if self.threshold_t < 1 || self.threshold_t > g {
            return Err(DomainError::ThresholdOutOfRange {
                t: self.threshold_t,
                g,
            });
        }
        let mut seen = BTreeSet::new();
        for id in self
            .gatekeeper_voters
            .iter()
            .chain(self.specialist_voters.iter())
        {
            if !seen.insert(id) {
                return Err(DomainError::DuplicateVoter(id.clone()));
            }
        }
        Ok(())
    }

    /// Checks the configuration against a pool: every voter exists,
    /// gatekeepers are nine-class, specialists are eight-class unless
    /// `allow_nine_class_specialists` is set.
    pub fn check_against_pool(
        &self,
        pool: &BTreeMap<&str, &VoterPredictions>,
    ) -> Result<(), DomainError> {
        self.check_shape()?;
        for id in &self.gatekeeper_voters {
            let voter = pool
                .get(id.as_str())
                .ok_or_else(|| DomainError::UnknownVoter(id.clone()))?;
            if voter.meta.class_mode != ClassMode::NineClass {
                return Err(DomainError::GatekeeperWrongMode(id.clone()));
            }
        }
        for id in &self.specialist_voters {
            let voter = pool
                .get(id.as_str())
                .ok_or_else(|| DomainError::UnknownVoter(id.clone()))?;
            if voter.meta.class_mode != ClassMode::EightClass
                && !self.allow_nine_class_specialists
            {
                return Err(DomainError::SpecialistWrongMode(id.clone()));
            }
        }
        Ok(())
    }
}

/// Smallest integer strictly greater than half the gatekeeper count, the
/// default override threshold.
pub fn default_threshold(gatekeepers: usize) -> Result<usize, DomainError> {
    if gatekeepers == 0 {
        return Err(DomainError::ZeroGatekeepers);
    }
    Ok(gatekeepers / 2 + 1)
}

/// One structural problem found in a pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    /// Registry entry without a prediction set.
    MissingPredictions { voter_id: String },
    /// Prediction set whose voter id is absent from the registry.
    UnknownVoter { voter_id: String },
    /// Voter id appearing more than once in the registry.
    DuplicateVoterId { voter_id: String },
    /// Per-voter invariant failure (role/class-mode or f1_cv range).
    BadMeta { voter_id: String, detail: String },
    /// Eight-class voter with a class-0 prediction.
    EightClassZero { voter_id: String, samples: usize },
    /// Prediction sample ids differ from the gold sample ids.
    CoverageMismatch {
        voter_id: String,
        missing: usize,
        extra: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingPredictions { voter_id } => {
                write!(f, "voter {voter_id:?}: no predictions loaded")
            }
            Violation::UnknownVoter { voter_id } => {
                write!(f, "predictions for {voter_id:?} have no registry entry")
            }
            Violation::DuplicateVoterId { voter_id } => {
                write!(f, "voter id {voter_id:?} registered twice")
            }
            Violation::BadMeta { voter_id, detail } => {
                write!(f, "voter {voter_id:?}: {detail}")
            }
            Violation::EightClassZero { voter_id, samples } => write!(
                f,
                "eight-class voter {voter_id:?} predicts class 0 on {samples} sample(s)"
            ),
            Violation::CoverageMismatch {
                voter_id,
                missing,
                extra,
            } => write!(
                f,
                "voter {voter_id:?}: coverage mismatch, {missing} missing, {extra} extra"
            ),
        }
    }
}

/// Checks a whole pool and returns every violation found. An empty result
/// means the pool is structurally sound.
pub fn validate_registry(
    registry: &[VoterMeta],
    predictions: &[VoterPredictions],
    gold: &GoldLabels,
) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut by_id: BTreeMap<&str, &VoterMeta> = BTreeMap::new();
    for meta in registry {
        if by_id.insert(&meta.voter_id, meta).is_some() {
            violations.push(Violation::DuplicateVoterId {
                voter_id: meta.voter_id.clone(),
            });
        }
        if let Err(err) = meta.validate() {
            violations.push(Violation::BadMeta {
                voter_id: meta.voter_id.clone(),
                detail: err.to_string(),
            });
        }
    }
    let pred_ids: BTreeSet<&str> = predictions
        .iter()
        .map(|p| p.meta.voter_id.as_str())
        .collect();
    for meta in registry {
        if !pred_ids.contains(meta.voter_id.as_str()) {
            violations.push(Violation::MissingPredictions {
                voter_id: meta.voter_id.clone(),
            });
        }
    }
    let gold_ids: BTreeSet<&str> = gold.ids().map(String::as_str).collect();
    for pred in predictions {
        let voter_id = pred.meta.voter_id.as_str();
        if !by_id.contains_key(voter_id) {
            violations.push(Violation::UnknownVoter {
                voter_id: voter_id.to_string(),
            });
        }
        if pred.meta.class_mode == ClassMode::EightClass {
            let zeros = pred
                .entries
                .values()
                .filter(|l| **l == ClassLabel::NO_DEFENCE)
                .count();
            if zeros > 0 {
                violations.push(Violation::EightClassZero {
                    voter_id: voter_id.to_string(),
                    samples: zeros,
                });
            }
        }
        let ids = pred.ids();
        let missing = gold_ids.difference(&ids).count();
        let extra = ids.difference(&gold_ids).count();
        if missing > 0 || extra > 0 {
            violations.push(Violation::CoverageMismatch {
                voter_id: voter_id.to_string(),
                missing,
                extra,
            });
        }
    }
    violations
}
