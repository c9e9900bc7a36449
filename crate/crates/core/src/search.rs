//! Exhaustive re-voting search: enumerates ensemble configurations over a
//! branch pool of cached predictions and ranks them by macro-F1 against a
//! gold set. Every configuration uses exactly one gatekeeper branch; the
//! remaining slots are filled by specialist-branch subsets.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    branches_of_registry, Aug, Branch, ClassLabel, ClassMode, DomainError, EnsembleConfig,
    GoldLabels, Role, VoterMeta, VoterPredictions, NUM_CLASSES,
};
use crate::metrics::{macro_f1, macro_f1_from_counts, MetricsError};
use crate::selection::{top_k_folds, SelectionError};
use crate::voting::{ensemble_predict, VotingError};

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Voting(#[from] VotingError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("branch {branch_id} has {have} folds, the space needs {need} per branch")]
    BranchTooSmall {
        branch_id: String,
        have: usize,
        need: usize,
    },
    #[error("folds per branch must be at least 1")]
    ZeroFolds,
    #[error("no ensemble sizes requested")]
    NoSizes,
    #[error("no thresholds requested")]
    NoThresholds,
    #[error("threshold {t} outside 1..={folds_per_branch}")]
    BadThreshold { t: usize, folds_per_branch: usize },
    #[error("ensemble size {size} is not a positive multiple of {folds_per_branch} voters per branch")]
    BadSize { size: usize, folds_per_branch: usize },
    #[error("no gatekeeper branches in the search space")]
    NoGatekeeperBranches,
    #[error("eight-class branch {0} cannot act as gatekeeper")]
    EightClassGatekeeper(String),
    #[error("role override names unknown branch {0}")]
    UnknownBranch(String),
    #[error("search space contains no configurations")]
    EmptySpace,
    #[error("configuration count overflows")]
    CountOverflow,
    #[error("top_n must be at least 1")]
    TopNZero,
}

/// Knobs for building a search space from a registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Voters each branch contributes; the branch's best folds by `f1_cv`.
    pub folds_per_branch: usize,
    pub ensemble_sizes: BTreeSet<usize>,
    pub thresholds: BTreeSet<usize>,
    pub tie_break: ClassLabel,
    /// Forces a branch into the given candidate role, overriding the registry
    /// role. Moving a branch into the gatekeeper pool requires a nine-class
    /// branch; a nine-class branch moved into the specialist pool makes the
    /// configurations that pick it run with nine-class specialists allowed.
    pub role_overrides: BTreeMap<String, Role>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            folds_per_branch: 3,
            ensemble_sizes: [6, 9, 12].into_iter().collect(),
            thresholds: [1, 2, 3].into_iter().collect(),
            tie_break: ClassLabel::HIGH_ADAPTIVE,
            role_overrides: BTreeMap::new(),
        }
    }
}

/// The enumerable space: candidate branches with their pre-selected folds,
/// the ensemble sizes, and the override thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub gatekeeper_branches: Vec<Branch>,
    pub specialist_branches: Vec<Branch>,
    pub folds_per_branch: usize,
    pub ensemble_sizes: BTreeSet<usize>,
    pub thresholds: BTreeSet<usize>,
    pub tie_break: ClassLabel,
    /// Pre-selected voter ids per branch, ordered by fold index.
    selected: BTreeMap<String, Vec<String>>,
}

impl SearchSpace {
    /// Groups the registry into branches, keeps each branch's best folds, and
    /// sorts candidates into gatekeeper and specialist pools by their
    /// registry role (or an explicit override).
    pub fn from_registry(
        registry: &[VoterMeta],
        options: SearchOptions,
    ) -> Result<Self, SearchError> {
        if options.folds_per_branch == 0 {
            return Err(SearchError::ZeroFolds);
        }
        if options.ensemble_sizes.is_empty() {
            return Err(SearchError::NoSizes);
        }
        if options.thresholds.is_empty() {
            return Err(SearchError::NoThresholds);
        }
        for &t in &options.thresholds {
            if t < 1 || t > options.folds_per_branch {
                return Err(SearchError::BadThreshold {
                    t,
                    folds_per_branch: options.folds_per_branch,
                });
            }
        }
        for meta in registry {
            meta.validate()?;
        }
        let branches = branches_of_registry(registry)?;
        let known: BTreeSet<&str> = branches.iter().map(|b| b.branch_id.as_str()).collect();
        for id in options.role_overrides.keys() {
            if !known.contains(id.as_str()) {
                return Err(SearchError::UnknownBranch(id.clone()));
            }
        }
        let by_id: BTreeMap<&str, Vec<&VoterMeta>> = {
            let mut map: BTreeMap<&str, Vec<&VoterMeta>> = BTreeMap::new();
            for meta in registry {
                map.entry(meta.branch_id.as_str()).or_default().push(meta);
            }
            map
        };
        let mut gatekeeper_branches = Vec::new();
        let mut specialist_branches = Vec::new();
        let mut selected = BTreeMap::new();
        for branch in branches {
            let members = &by_id[branch.branch_id.as_str()];
            if members.len() < options.folds_per_branch {
                return Err(SearchError::BranchTooSmall {
                    branch_id: branch.branch_id.clone(),
                    have: members.len(),
                    need: options.folds_per_branch,
                });
            }
            let mut kept = top_k_folds(members, options.folds_per_branch)?.selected;
            kept.sort_by_key(|m| m.fold);
            selected.insert(
                branch.branch_id.clone(),
                kept.into_iter().map(|m| m.voter_id).collect(),
            );
            let role = options
                .role_overrides
                .get(&branch.branch_id)
                .copied()
                .unwrap_or(branch.role);
            match role {
                Role::Gatekeeper => {
                    if branch.class_mode != ClassMode::NineClass {
                        return Err(SearchError::EightClassGatekeeper(branch.branch_id));
                    }
                    gatekeeper_branches.push(branch);
                }
                Role::Specialist => specialist_branches.push(branch),
            }
        }
        if gatekeeper_branches.is_empty() {
            return Err(SearchError::NoGatekeeperBranches);
        }
        Ok(SearchSpace {
            gatekeeper_branches,
            specialist_branches,
            folds_per_branch: options.folds_per_branch,
            ensemble_sizes: options.ensemble_sizes,
            thresholds: options.thresholds,
            tie_break: options.tie_break,
            selected,
        })
    }

    /// Pre-selected voter ids of a candidate branch, in fold order.
    pub fn selected_voters(&self, branch_id: &str) -> Option<&[String]> {
        self.selected.get(branch_id).map(Vec::as_slice)
    }

    fn branches_for_size(&self, size: usize) -> Result<usize, SearchError> {
        if size == 0 || !size.is_multiple_of(self.folds_per_branch) {
            return Err(SearchError::BadSize {
                size,
                folds_per_branch: self.folds_per_branch,
            });
        }
        Ok(size / self.folds_per_branch)
    }

    /// Closed-form number of configurations for one ensemble size:
    /// gatekeeper choices times specialist subsets times thresholds.
    pub fn config_count_for_size(&self, size: usize) -> Result<usize, SearchError> {
        let branches = self.branches_for_size(size)?;
        binomial(self.specialist_branches.len(), branches - 1)
            .and_then(|subsets| subsets.checked_mul(self.gatekeeper_branches.len()))
            .and_then(|n| n.checked_mul(self.thresholds.len()))
            .ok_or(SearchError::CountOverflow)
    }

    /// Closed-form number of configurations over all ensemble sizes.
    pub fn config_count(&self) -> Result<usize, SearchError> {
        let mut total = 0usize;
        for &size in &self.ensemble_sizes {
            total = total
                .checked_add(self.config_count_for_size(size)?)
                .ok_or(SearchError::CountOverflow)?;
        }
        Ok(total)
    }

    /// Every configuration of the space exactly once, in canonical order:
    /// sizes ascending, gatekeeper branches by id, specialist subsets in
    /// lexicographic order, thresholds ascending.
    pub fn enumerate_configs(&self) -> Result<Vec<EnsembleConfig>, SearchError> {
        let mut configs = Vec::new();
        self.visit_configs(|config, _| {
            configs.push(config);
            Ok(())
        })?;
        Ok(configs)
    }

    /// Canonical-order walk of the space; hands each configuration and its
    /// combinatorial coordinates to the visitor.
    fn visit_configs<F>(&self, mut visit: F) -> Result<(), SearchError>
    where
        F: FnMut(EnsembleConfig, ConfigCoords) -> Result<(), SearchError>,
    {
        for &size in &self.ensemble_sizes {
            let branches = self.branches_for_size(size)?;
            let specialists_wanted = branches - 1;
            for (gk_idx, gk) in self.gatekeeper_branches.iter().enumerate() {
                for subset in Combinations::new(self.specialist_branches.len(), specialists_wanted)
                {
                    for &t in &self.thresholds {
                        let config = self.build_config(gk, &subset, t);
                        visit(
                            config,
                            ConfigCoords {
                                size,
                                gk_idx,
                                sp_idxs: &subset,
                                threshold_t: t,
                            },
                        )?;
                    }
                }
            }
        }
        Ok(())
    }

    fn build_config(&self, gatekeeper: &Branch, sp_idxs: &[usize], t: usize) -> EnsembleConfig {
        let mut specialist_voters = Vec::with_capacity(sp_idxs.len() * self.folds_per_branch);
        let mut any_nine_class = false;
        for &idx in sp_idxs {
            let branch = &self.specialist_branches[idx];
            any_nine_class |= branch.class_mode == ClassMode::NineClass;
            specialist_voters.extend(self.selected[&branch.branch_id].iter().cloned());
        }
        EnsembleConfig {
            gatekeeper_voters: self.selected[&gatekeeper.branch_id].clone(),
            specialist_voters,
            threshold_t: t,
            tie_break: self.tie_break,
            allow_nine_class_specialists: any_nine_class,
            count_zero_votes: false,
        }
    }
}

struct ConfigCoords<'a> {
    size: usize,
    gk_idx: usize,
    sp_idxs: &'a [usize],
    threshold_t: usize,
}

/// Lexicographic k-subsets of 0..n as index vectors.
struct Combinations {
    n: usize,
    k: usize,
    next: Option<Vec<usize>>,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        let next = if k <= n { Some((0..k).collect()) } else { None };
        Combinations { n, k, next }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.clone()?;
        self.next = {
            let mut indices = current.clone();
            // Find the rightmost index that can still move up.
            let mut i = self.k;
            loop {
                if i == 0 {
                    break None;
                }
                i -= 1;
                if indices[i] < self.n - (self.k - i) {
                    indices[i] += 1;
                    for j in i + 1..self.k {
                        indices[j] = indices[j - 1] + 1;
                    }
                    break Some(indices);
                }
            }
        };
        Some(current)
    }
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut result = 1u128;
    for i in 0..k {
        result = result.checked_mul((n - i) as u128)?;
        result /= (i + 1) as u128;
    }
    usize::try_from(result).ok()
}

/// Scores one configuration: ensemble predictions over the gold samples,
/// then macro-F1 over the class subset. Read-only with respect to the pool.
pub fn score_config(
    config: &EnsembleConfig,
    pool: &[VoterPredictions],
    gold: &GoldLabels,
    class_subset: &BTreeSet<ClassLabel>,
) -> Result<f64, SearchError> {
    let ids: Vec<String> = gold.ids().cloned().collect();
    let pred = ensemble_predict(config, pool, &ids)?;
    Ok(macro_f1(&pred, gold, class_subset)?)
}

/// One ranked configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRow {
    pub f1: f64,
    pub threshold_t: usize,
    pub gatekeeper_branch: String,
    pub specialist_branches: Vec<String>,
    /// Augmentation flag per branch, gatekeeper first.
    pub aug_flags: Vec<Aug>,
    pub config: EnsembleConfig,
}

impl SearchRow {
    /// Branch list in display form, no-aug branches marked with "(n)".
    pub fn config_string(&self) -> String {
        std::iter::once(&self.gatekeeper_branch)
            .chain(self.specialist_branches.iter())
            .zip(self.aug_flags.iter())
            .map(|(branch, aug)| match aug {
                Aug::Aug => branch.clone(),
                Aug::NoAug => format!("{branch}(n)"),
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

/// Ranked rows for one ensemble size plus aggregate figures over all of the
/// size's configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeResult {
    pub ensemble_size: usize,
    pub total_configs: usize,
    pub rows: Vec<SearchRow>,
    /// Mean f1 of configurations mixing aug and no-aug branches.
    pub mean_f1_mixed: Option<f64>,
    /// Mean f1 of configurations whose branches share one aug flag.
    pub mean_f1_pure: Option<f64>,
}

/// Full search outcome across ensemble sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub sizes: Vec<SizeResult>,
    pub total_configs: usize,
}

/// Exhaustively scores the space and keeps the `top_n` configurations per
/// ensemble size, ranked by descending f1 with ties broken by smaller
/// threshold, then lexicographic branch ids. Per-voter predictions are
/// memoized into dense arrays once, so scoring never re-reads the pool.
pub fn search_top(
    space: &SearchSpace,
    pool: &[VoterPredictions],
    gold: &GoldLabels,
    top_n: usize,
) -> Result<SearchResult, SearchError> {
    if top_n == 0 {
        return Err(SearchError::TopNZero);
    }
    if space.config_count()? == 0 {
        return Err(SearchError::EmptySpace);
    }
    let dense = DensePool::build(space, pool, gold)?;
    let class_subset = ClassLabel::defence_classes();
    let mut by_size: BTreeMap<usize, Vec<SearchRow>> = BTreeMap::new();
    space.visit_configs(|config, coords| {
        let counts = dense.confusion_counts(&config, coords.threshold_t);
        let f1 = macro_f1_from_counts(&counts, &class_subset, false)?;
        let gk = &space.gatekeeper_branches[coords.gk_idx];
        let mut aug_flags = vec![gk.aug];
        let mut specialist_branches = Vec::with_capacity(coords.sp_idxs.len());
        for &idx in coords.sp_idxs {
            let branch = &space.specialist_branches[idx];
            specialist_branches.push(branch.branch_id.clone());
            aug_flags.push(branch.aug);
        }
        by_size.entry(coords.size).or_default().push(SearchRow {
            f1,
            threshold_t: coords.threshold_t,
            gatekeeper_branch: gk.branch_id.clone(),
            specialist_branches,
            aug_flags,
            config,
        });
        Ok(())
    })?;
    let mut sizes = Vec::with_capacity(by_size.len());
    let mut total_configs = 0;
    for (ensemble_size, mut rows) in by_size {
        rows.sort_by(|a, b| {
            b.f1
                .partial_cmp(&a.f1)
                .expect("macro-F1 is finite")
                .then(a.threshold_t.cmp(&b.threshold_t))
                .then_with(|| a.gatekeeper_branch.cmp(&b.gatekeeper_branch))
                .then_with(|| a.specialist_branches.cmp(&b.specialist_branches))
        });
        let total = rows.len();
        total_configs += total;
        let (mut mixed_sum, mut mixed_n) = (0.0, 0usize);
        let (mut pure_sum, mut pure_n) = (0.0, 0usize);
        for row in &rows {
            let first = row.aug_flags[0];
            if row.aug_flags.iter().all(|&a| a == first) {
                pure_sum += row.f1;
                pure_n += 1;
            } else {
                mixed_sum += row.f1;
                mixed_n += 1;
            }
        }
        rows.truncate(top_n);
        sizes.push(SizeResult {
            ensemble_size,
            total_configs: total,
            rows,
            mean_f1_mixed: (mixed_n > 0).then(|| mixed_sum / mixed_n as f64),
            mean_f1_pure: (pure_n > 0).then(|| pure_sum / pure_n as f64),
        });
    }
    Ok(SearchResult {
        sizes,
        total_configs,
    })
}

/// Gold labels and per-voter predictions flattened to dense arrays indexed
/// by sample position.
struct DensePool {
    gold: Vec<u8>,
    votes: BTreeMap<String, Vec<u8>>,
    tie_break: usize,
}

impl DensePool {
    fn build(
        space: &SearchSpace,
        pool: &[VoterPredictions],
        gold: &GoldLabels,
    ) -> Result<DensePool, SearchError> {
        let by_id: BTreeMap<&str, &VoterPredictions> =
            pool.iter().map(|p| (p.meta.voter_id.as_str(), p)).collect();
        let mut votes = BTreeMap::new();
        for voter_ids in space.selected.values() {
            for voter_id in voter_ids {
                let voter = by_id
                    .get(voter_id.as_str())
                    .ok_or_else(|| VotingError::MissingPrediction {
                        voter_id: voter_id.clone(),
                        sample_id: "<any>".to_string(),
                    })?;
                let mut array = Vec::with_capacity(gold.len());
                for (sample_id, _) in gold.iter() {
                    let label =
                        voter
                            .get(sample_id)
                            .ok_or_else(|| VotingError::MissingPrediction {
                                voter_id: voter_id.clone(),
                                sample_id: sample_id.clone(),
                            })?;
                    array.push(label.value());
                }
                votes.insert(voter_id.clone(), array);
            }
        }
        Ok(DensePool {
            gold: gold.iter().map(|(_, label)| label.value()).collect(),
            votes,
            tie_break: space.tie_break.index(),
        })
    }

    /// Confusion counts of one configuration, replicating the two-stage vote
    /// exactly: 0 output when at least `t` gatekeepers vote 0, otherwise the
    /// majority over all votes with 0 votes excluded, ties to the tie-break
    /// class when it is among the leaders, else the smallest tied label.
    fn confusion_counts(
        &self,
        config: &EnsembleConfig,
        t: usize,
    ) -> [[usize; NUM_CLASSES]; NUM_CLASSES] {
        let fetch = |ids: &[String]| -> Vec<&[u8]> {
            ids.iter().map(|id| self.votes[id].as_slice()).collect()
        };
        let gatekeepers = fetch(&config.gatekeeper_voters);
        let specialists = fetch(&config.specialist_voters);
        let mut counts = [[0usize; NUM_CLASSES]; NUM_CLASSES];
        for (i, &gold) in self.gold.iter().enumerate() {
            let zero_votes = gatekeepers.iter().filter(|v| v[i] == 0).count();
            let pred = if zero_votes >= t {
                0
            } else {
                let mut tally = [0usize; NUM_CLASSES];
                let mut total = 0usize;
                for votes in gatekeepers.iter().chain(specialists.iter()) {
                    let label = votes[i] as usize;
                    if label != 0 {
                        tally[label] += 1;
                        total += 1;
                    }
                }
                if total == 0 {
                    self.tie_break
                } else {
                    let best = tally.iter().copied().max().expect("nine counts");
                    if tally[self.tie_break] == best {
                        self.tie_break
                    } else {
                        tally.iter().position(|&n| n == best).expect("max exists")
                    }
                }
            };
            counts[gold as usize][pred] += 1;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Method;

    fn l(v: u8) -> ClassLabel {
        ClassLabel::new(v).unwrap()
    }

    fn meta(branch: &str, role: Role, mode: ClassMode, aug: Aug, fold: u32) -> VoterMeta {
        VoterMeta {
            voter_id: format!("{branch}-f{fold}"),
            branch_id: branch.to_string(),
            role,
            method: Method::Sft,
            class_mode: mode,
            base_model: "m".to_string(),
            aug,
            fold,
            f1_cv: 0.5,
        }
    }

    fn registry(gatekeepers: &[&str], specialists: &[&str], folds: u32) -> Vec<VoterMeta> {
        let mut out = Vec::new();
        for id in gatekeepers {
            for fold in 0..folds {
                out.push(meta(id, Role::Gatekeeper, ClassMode::NineClass, Aug::Aug, fold));
            }
        }
        for id in specialists {
            for fold in 0..folds {
                out.push(meta(id, Role::Specialist, ClassMode::EightClass, Aug::Aug, fold));
            }
        }
        out
    }

    fn space_of(
        registry: &[VoterMeta],
        sizes: &[usize],
        thresholds: &[usize],
    ) -> Result<SearchSpace, SearchError> {
        SearchSpace::from_registry(
            registry,
            SearchOptions {
                ensemble_sizes: sizes.iter().copied().collect(),
                thresholds: thresholds.iter().copied().collect(),
                ..SearchOptions::default()
            },
        )
    }

    #[test]
    fn counts_match_closed_form() {
        let space = space_of(&registry(&["g1"], &["s1", "s2"], 3), &[9], &[1, 2, 3]).unwrap();
        assert_eq!(space.config_count().unwrap(), 3); // 1 * C(2,2) * 3

        let space = space_of(&registry(&["g1"], &["s1", "s2", "s3"], 3), &[6], &[2]).unwrap();
        assert_eq!(space.config_count().unwrap(), 3); // 1 * C(3,1) * 1

        let space = space_of(
            &registry(&["g1", "g2", "g3", "g4"], &["s1", "s2", "s3", "s4"], 3),
            &[12],
            &[3],
        )
        .unwrap();
        assert_eq!(space.config_count().unwrap(), 16); // 4 * C(4,3) * 1
    }

    #[test]
    fn enumeration_is_exhaustive_duplicate_free_and_canonical() {
        let space = space_of(
            &registry(&["g1", "g2"], &["s1", "s2", "s3"], 3),
            &[6, 9],
            &[1, 2],
        )
        .unwrap();
        let configs = space.enumerate_configs().unwrap();
        assert_eq!(configs.len(), space.config_count().unwrap());
        // 2 gatekeepers * (C(3,1) + C(3,2)) subsets * 2 thresholds
        assert_eq!(configs.len(), 2 * (3 + 3) * 2);
        let unique: BTreeSet<String> = configs
            .iter()
            .map(|c| format!("{:?}|{:?}|{}", c.gatekeeper_voters, c.specialist_voters, c.threshold_t))
            .collect();
        assert_eq!(unique.len(), configs.len());
        // canonical order: sizes ascending, so the first config is size 6
        assert_eq!(configs[0].gatekeeper_voters.len() + configs[0].specialist_voters.len(), 6);
        assert_eq!(configs[0].threshold_t, 1);
        assert_eq!(configs[1].threshold_t, 2);
        let last = configs.last().unwrap();
        assert_eq!(last.gatekeeper_voters.len() + last.specialist_voters.len(), 9);
    }

    #[test]
    fn combinations_cover_all_lex_subsets() {
        let subsets: Vec<Vec<usize>> = Combinations::new(4, 2).collect();
        assert_eq!(
            subsets,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3],
            ]
        );
        assert_eq!(Combinations::new(3, 0).count(), 1);
        assert_eq!(Combinations::new(2, 3).count(), 0);
    }

    #[test]
    fn binomial_small_table() {
        assert_eq!(binomial(4, 3), Some(4));
        assert_eq!(binomial(14, 3), Some(364));
        assert_eq!(binomial(3, 5), Some(0));
        assert_eq!(binomial(0, 0), Some(1));
    }

    #[test]
    fn size_must_be_a_branch_multiple() {
        let space = space_of(&registry(&["g1"], &["s1"], 3), &[7], &[1]).unwrap();
        assert_eq!(
            space.config_count().unwrap_err(),
            SearchError::BadSize {
                size: 7,
                folds_per_branch: 3
            }
        );
        assert!(space.enumerate_configs().is_err());
    }

    #[test]
    fn thresholds_above_fold_count_are_rejected() {
        let err = space_of(&registry(&["g1"], &["s1"], 3), &[6], &[4]).unwrap_err();
        assert_eq!(
            err,
            SearchError::BadThreshold {
                t: 4,
                folds_per_branch: 3
            }
        );
    }

    #[test]
    fn eight_class_branches_cannot_be_forced_into_the_gatekeeper_pool() {
        let reg = registry(&["g1"], &["s1"], 3);
        let err = SearchSpace::from_registry(
            &reg,
            SearchOptions {
                ensemble_sizes: [6].into_iter().collect(),
                thresholds: [1].into_iter().collect(),
                role_overrides: [("s1".to_string(), Role::Gatekeeper)].into_iter().collect(),
                ..SearchOptions::default()
            },
        )
        .unwrap_err();
        assert_eq!(err, SearchError::EightClassGatekeeper("s1".to_string()));
    }

    #[test]
    fn nine_class_branch_overridden_to_specialist_sets_the_flag() {
        let mut reg = registry(&["g1", "g2"], &["s1"], 3);
        for m in reg.iter_mut().filter(|m| m.branch_id == "g2") {
            m.role = Role::Gatekeeper;
        }
        let space = SearchSpace::from_registry(
            &reg,
            SearchOptions {
                ensemble_sizes: [9].into_iter().collect(),
                thresholds: [2].into_iter().collect(),
                role_overrides: [("g2".to_string(), Role::Specialist)].into_iter().collect(),
                ..SearchOptions::default()
            },
        )
        .unwrap();
        assert_eq!(space.gatekeeper_branches.len(), 1);
        assert_eq!(space.specialist_branches.len(), 2);
        let configs = space.enumerate_configs().unwrap();
        assert_eq!(configs.len(), 1); // 1 * C(2,2) * 1
        assert!(configs[0].allow_nine_class_specialists);
    }

    fn voter_predictions(
        meta: VoterMeta,
        labels: &BTreeMap<String, u8>,
    ) -> VoterPredictions {
        VoterPredictions {
            meta,
            entries: labels
                .iter()
                .map(|(id, &v)| (id.clone(), l(v)))
                .collect(),
        }
    }

    /// Tiny pool: gold has one sample per class 0..=8; branches g1 and s1
    /// are perfect, s2 and s3 both call the class-2 sample a 1, so any
    /// ensemble where they jointly outnumber or tie the correct votes errs.
    fn mini_pool() -> (Vec<VoterMeta>, Vec<VoterPredictions>, GoldLabels) {
        let gold_pairs: Vec<(String, ClassLabel)> = (0..9u8)
            .map(|c| (format!("x{c}"), l(c)))
            .collect();
        let gold = GoldLabels::new(gold_pairs).unwrap();
        let perfect: BTreeMap<String, u8> =
            (0..9u8).map(|c| (format!("x{c}"), c)).collect();
        let mut reg = Vec::new();
        let mut pool = Vec::new();
        for branch in ["g1", "s1", "s2", "s3"] {
            let (role, mode) = if branch == "g1" {
                (Role::Gatekeeper, ClassMode::NineClass)
            } else {
                (Role::Specialist, ClassMode::EightClass)
            };
            for fold in 0..3 {
                let m = meta(branch, role, mode, Aug::Aug, fold);
                let mut labels = perfect.clone();
                if mode == ClassMode::EightClass {
                    labels.insert("x0".to_string(), 7); // 8c voters never emit 0
                }
                if branch == "s2" || branch == "s3" {
                    labels.insert("x2".to_string(), 1);
                }
                reg.push(m.clone());
                pool.push(voter_predictions(m, &labels));
            }
        }
        (reg, pool, gold)
    }

    #[test]
    fn perfect_config_scores_one() {
        let (reg, pool, gold) = mini_pool();
        let space = space_of(&reg, &[6], &[2]).unwrap();
        let config = space
            .enumerate_configs()
            .unwrap()
            .into_iter()
            .find(|c| c.specialist_voters[0].starts_with("s1"))
            .unwrap();
        let f1 = score_config(&config, &pool, &gold, &ClassLabel::defence_classes()).unwrap();
        assert_eq!(f1, 1.0);
    }

    #[test]
    fn search_ranks_the_error_free_branch_first() {
        let (reg, pool, gold) = mini_pool();
        let space = space_of(&reg, &[6], &[1, 2]).unwrap();
        let result = search_top(&space, &pool, &gold, 3).unwrap();
        assert_eq!(result.sizes.len(), 1);
        let size6 = &result.sizes[0];
        assert_eq!(size6.total_configs, 6); // 1 * C(3,1) * 2
        let top = &size6.rows[0];
        assert_eq!(top.specialist_branches, vec!["s1".to_string()]);
        assert_eq!(top.f1, 1.0);
        assert_eq!(top.threshold_t, 1); // f1 tie between t=1 and t=2 breaks low
        // independent slow-path re-scoring is bit-identical
        let rescored =
            score_config(&top.config, &pool, &gold, &ClassLabel::defence_classes()).unwrap();
        assert_eq!(rescored.to_bits(), top.f1.to_bits());
    }

    #[test]
    fn ranking_equals_full_enumerate_and_score_table() {
        let (reg, pool, gold) = mini_pool();
        let space = space_of(&reg, &[6, 9], &[1, 3]).unwrap();
        let result = search_top(&space, &pool, &gold, usize::MAX).unwrap();
        for size_result in &result.sizes {
            // re-enumerate independently and score through the slow path
            let mut expected: Vec<(f64, usize, Vec<String>)> = space
                .enumerate_configs()
                .unwrap()
                .into_iter()
                .filter(|c| {
                    c.gatekeeper_voters.len() + c.specialist_voters.len()
                        == size_result.ensemble_size
                })
                .map(|c| {
                    let f1 =
                        score_config(&c, &pool, &gold, &ClassLabel::defence_classes()).unwrap();
                    let branches =
                        vec![c.gatekeeper_voters[0].split("-f").next().unwrap().to_string()];
                    (f1, c.threshold_t, branches)
                })
                .collect();
            expected.sort_by(|a, b| {
                b.0.partial_cmp(&a.0)
                    .unwrap()
                    .then(a.1.cmp(&b.1))
                    .then_with(|| a.2.cmp(&b.2))
            });
            assert_eq!(size_result.rows.len(), expected.len());
            for (row, (f1, _, _)) in size_result.rows.iter().zip(&expected) {
                assert_eq!(row.f1.to_bits(), f1.to_bits());
            }
        }
    }

    #[test]
    fn single_config_space_ranks_it_first() {
        let (reg, pool, gold) = mini_pool();
        let mut reg: Vec<VoterMeta> = reg
            .into_iter()
            .filter(|m| m.branch_id == "g1" || m.branch_id == "s1")
            .collect();
        reg.sort_by(|a, b| a.voter_id.cmp(&b.voter_id));
        let space = space_of(&reg, &[6], &[2]).unwrap();
        let result = search_top(&space, &pool, &gold, 3).unwrap();
        assert_eq!(result.total_configs, 1);
        assert_eq!(result.sizes[0].rows.len(), 1);
    }

    #[test]
    fn rows_carry_aug_flags_and_aggregates_split_mixed_from_pure() {
        let (mut reg, pool, gold) = mini_pool();
        for m in reg.iter_mut().filter(|m| m.branch_id == "s2") {
            m.aug = Aug::NoAug;
        }
        // pool metas do not matter for scoring; the space reads the registry
        let space = space_of(&reg, &[9], &[1]).unwrap();
        let result = search_top(&space, &pool, &gold, 10).unwrap();
        let size9 = &result.sizes[0];
        assert_eq!(size9.total_configs, 3); // C(3,2)
        for row in &size9.rows {
            assert_eq!(row.aug_flags.len(), 3);
        }
        // subsets {s1,s2} and {s2,s3} are mixed, {s1,s3} is pure
        assert!(size9.mean_f1_mixed.is_some());
        assert!(size9.mean_f1_pure.is_some());
        let mixed_rows: Vec<&SearchRow> = size9
            .rows
            .iter()
            .filter(|r| r.specialist_branches.contains(&"s2".to_string()))
            .collect();
        let mean = mixed_rows.iter().map(|r| r.f1).sum::<f64>() / mixed_rows.len() as f64;
        assert!((size9.mean_f1_mixed.unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn config_string_marks_no_aug_branches() {
        let row = SearchRow {
            f1: 0.5,
            threshold_t: 2,
            gatekeeper_branch: "Min-2".to_string(),
            specialist_branches: vec!["Flan".to_string(), "Lr".to_string()],
            aug_flags: vec![Aug::Aug, Aug::NoAug, Aug::Aug],
            config: EnsembleConfig::new(vec!["g".to_string()], vec![], 1, l(7)).unwrap(),
        };
        assert_eq!(row.config_string(), "Min-2 + Flan(n) + Lr");
    }

    #[test]
    fn empty_specialist_pool_yields_empty_space_error() {
        let reg = registry(&["g1"], &[], 3);
        let space = space_of(&reg, &[6], &[1]).unwrap();
        assert_eq!(space.config_count().unwrap(), 0);
        let gold = GoldLabels::new(vec![("x".to_string(), l(1))]).unwrap();
        assert_eq!(
            search_top(&space, &[], &gold, 3).unwrap_err(),
            SearchError::EmptySpace
        );
    }
}
