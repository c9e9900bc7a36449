//! Seeded generator of synthetic gold labels and voter pools. Voter errors
//! are correlated through a prototype-copy mixture: a hidden prototype label
//! is drawn per sample from the first voter's confusion row, and every voter
//! copies it with probability `rho` or draws from its own confusion row
//! otherwise. `rho = 0` gives independent voters, `rho = 1` identical ones.

use std::collections::{BTreeMap, BTreeSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    ClassLabel, ClassMode, DomainError, GoldLabels, VoterMeta, VoterPredictions, NUM_CLASSES,
};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("n_samples must be positive")]
    NoSamples,
    #[error("class prior sums to {0}, expected 1")]
    BadPriorSum(f64),
    #[error("class prior entry {0} is negative or not finite")]
    BadPriorEntry(f64),
    #[error("no voters configured")]
    NoVoters,
    #[error("duplicate voter id {0}")]
    DuplicateVoterId(String),
    #[error("confusion row {row} of voter {voter_id} sums to {sum}, expected 1")]
    BadRowSum {
        voter_id: String,
        row: usize,
        sum: f64,
    },
    #[error("confusion row {row} of voter {voter_id} has a negative or non-finite entry")]
    BadRowEntry { voter_id: String, row: usize },
    #[error("eight-class voter {voter_id} has probability mass on predicted label 0 in row {row}")]
    EightClassZeroMass { voter_id: String, row: usize },
    #[error("rho is {0}, expected a value in [0,1]")]
    BadRho(f64),
    #[error(
        "prototype voter {voter_id} can emit label 0 (row {row}), which would leak into \
         eight-class voters at rho > 0"
    )]
    PrototypeLeaksZero { voter_id: String, row: usize },
    #[error("all class counts are zero")]
    AllZeroCounts,
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// One simulated voter: its registry metadata and a row-stochastic confusion
/// matrix, `confusion_rows[gold][predicted]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimVoter {
    pub meta: VoterMeta,
    pub confusion_rows: [[f64; NUM_CLASSES]; NUM_CLASSES],
}

/// Full simulation setup; serializable, so runs can be driven from a config
/// file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_samples: usize,
    pub class_prior: [f64; NUM_CLASSES],
    pub voters: Vec<SimVoter>,
    /// Error-correlation parameter in [0,1]: the probability that a voter
    /// copies the hidden prototype draw instead of drawing independently.
    pub rho: f64,
    pub seed: u64,
}

const SUM_TOLERANCE: f64 = 1e-9;

fn check_stochastic_row(
    voter_id: &str,
    row: usize,
    values: &[f64; NUM_CLASSES],
) -> Result<(), SimError> {
    for &v in values {
        if !v.is_finite() || v < 0.0 {
            return Err(SimError::BadRowEntry {
                voter_id: voter_id.to_string(),
                row,
            });
        }
    }
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(SimError::BadRowSum {
            voter_id: voter_id.to_string(),
            row,
            sum,
        });
    }
    Ok(())
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_samples == 0 {
            return Err(SimError::NoSamples);
        }
        for &p in &self.class_prior {
            if !p.is_finite() || p < 0.0 {
                return Err(SimError::BadPriorEntry(p));
            }
        }
        let prior_sum: f64 = self.class_prior.iter().sum();
        if (prior_sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(SimError::BadPriorSum(prior_sum));
        }
        if !self.rho.is_finite() || !(0.0..=1.0).contains(&self.rho) {
            return Err(SimError::BadRho(self.rho));
        }
        if self.voters.is_empty() {
            return Err(SimError::NoVoters);
        }
        let mut seen = BTreeSet::new();
        for voter in &self.voters {
            voter.meta.validate()?;
            if !seen.insert(voter.meta.voter_id.as_str()) {
                return Err(SimError::DuplicateVoterId(voter.meta.voter_id.clone()));
            }
            for (row, values) in voter.confusion_rows.iter().enumerate() {
                check_stochastic_row(&voter.meta.voter_id, row, values)?;
                if voter.meta.class_mode == ClassMode::EightClass && values[0] > 0.0 {
                    return Err(SimError::EightClassZeroMass {
                        voter_id: voter.meta.voter_id.clone(),
                        row,
                    });
                }
            }
        }
        // The prototype is drawn from the first voter's rows. If it can land
        // on 0 and any eight-class voter might copy it, the copy would break
        // the eight-class guarantee.
        let any_eight_class = self
            .voters
            .iter()
            .any(|v| v.meta.class_mode == ClassMode::EightClass);
        if self.rho > 0.0 && any_eight_class {
            let prototype = &self.voters[0];
            for (row, values) in prototype.confusion_rows.iter().enumerate() {
                if values[0] > 0.0 {
                    return Err(SimError::PrototypeLeaksZero {
                        voter_id: prototype.meta.voter_id.clone(),
                        row,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Normalizes class counts into a prior vector. Classes missing from the map
/// get zero mass.
pub fn prior_from_counts(
    counts: &BTreeMap<ClassLabel, usize>,
) -> Result<[f64; NUM_CLASSES], SimError> {
    let total: usize = counts.values().sum();
    if total == 0 {
        return Err(SimError::AllZeroCounts);
    }
    let mut prior = [0.0; NUM_CLASSES];
    for (&class, &count) in counts {
        prior[class.index()] = count as f64 / total as f64;
    }
    Ok(prior)
}

/// One independent substream per purpose, derived by hashing the base seed
/// with a tag (FNV-1a). Adding a voter therefore never perturbs the draws of
/// existing voters, the gold labels, or the prototype sequence.
fn substream(seed: u64, tag: &str) -> ChaCha8Rng {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET;
    for byte in seed.to_le_bytes().iter().chain(tag.as_bytes()) {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(PRIME);
    }
    ChaCha8Rng::seed_from_u64(hash)
}

fn sample_id(i: usize) -> String {
    format!("s{i:06}")
}

/// Runs the generator: gold labels i.i.d. from the prior, one hidden
/// prototype draw per sample from the first voter's confusion row, and one
/// label per voter and sample (prototype copy with probability `rho`, own
/// confusion draw otherwise). Each voter consumes a fixed two draws per
/// sample, so per-voter output depends only on the seed, the voter id, and
/// its own rows.
pub fn simulate(config: &SimConfig) -> Result<(GoldLabels, Vec<VoterPredictions>), SimError> {
    config.validate()?;
    let distributions = |rows: &[[f64; NUM_CLASSES]; NUM_CLASSES]| -> Vec<WeightedIndex<f64>> {
        rows.iter()
            .map(|row| WeightedIndex::new(row).expect("validated stochastic row"))
            .collect()
    };

    let mut gold_rng = substream(config.seed, "gold");
    let prior = WeightedIndex::new(config.class_prior).expect("validated prior");
    let gold_indices: Vec<usize> = (0..config.n_samples)
        .map(|_| prior.sample(&mut gold_rng))
        .collect();
    let gold = GoldLabels::new(gold_indices.iter().enumerate().map(|(i, &c)| {
        (
            sample_id(i),
            ClassLabel::new(c as u8).expect("class index in range"),
        )
    }))?;

    let mut prototype_rng = substream(config.seed, "prototype");
    let prototype_rows = distributions(&config.voters[0].confusion_rows);
    let prototypes: Vec<usize> = gold_indices
        .iter()
        .map(|&c| prototype_rows[c].sample(&mut prototype_rng))
        .collect();

    let mut pool = Vec::with_capacity(config.voters.len());
    for voter in &config.voters {
        let mut rng = substream(config.seed, &format!("voter:{}", voter.meta.voter_id));
        let own_rows = distributions(&voter.confusion_rows);
        let mut entries = BTreeMap::new();
        for (i, &c) in gold_indices.iter().enumerate() {
            let copy = rng.gen::<f64>() < config.rho;
            let own = own_rows[c].sample(&mut rng);
            let label = if copy { prototypes[i] } else { own };
            entries.insert(
                sample_id(i),
                ClassLabel::new(label as u8).expect("class index in range"),
            );
        }
        pool.push(VoterPredictions {
            meta: voter.meta.clone(),
            entries,
        });
    }
    Ok((gold, pool))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Aug, Method, Role};
    use crate::metrics::alpha_of_predictions;

    fn l(v: u8) -> ClassLabel {
        ClassLabel::new(v).unwrap()
    }

    fn meta(id: &str, mode: ClassMode) -> VoterMeta {
        VoterMeta {
            voter_id: id.to_string(),
            branch_id: id.to_string(),
            role: if mode == ClassMode::NineClass {
                Role::Gatekeeper
            } else {
                Role::Specialist
            },
            method: Method::Sft,
            class_mode: mode,
            base_model: "m".to_string(),
            aug: Aug::Aug,
            fold: 0,
            f1_cv: 0.5,
        }
    }

    fn identity_rows() -> [[f64; NUM_CLASSES]; NUM_CLASSES] {
        let mut rows = [[0.0; NUM_CLASSES]; NUM_CLASSES];
        for (c, row) in rows.iter_mut().enumerate() {
            row[c] = 1.0;
        }
        rows
    }

    /// Diagonal `accuracy`, remainder spread uniformly over the other
    /// non-zero labels (so eight-class safe).
    fn noisy_rows(accuracy: f64) -> [[f64; NUM_CLASSES]; NUM_CLASSES] {
        let mut rows = [[0.0; NUM_CLASSES]; NUM_CLASSES];
        for (c, row) in rows.iter_mut().enumerate() {
            let others: Vec<usize> = (1..NUM_CLASSES).filter(|&k| k != c).collect();
            for &k in &others {
                row[k] = (1.0 - accuracy) / others.len() as f64;
            }
            row[c] = if c == 0 { 0.0 } else { accuracy };
            if c == 0 {
                // an eight-class-safe voter cannot be right on gold 0; spread
                // everything over 1..=8
                for slot in row.iter_mut().skip(1) {
                    *slot = 1.0 / 8.0;
                }
            }
        }
        rows
    }

    fn uniform_prior() -> [f64; NUM_CLASSES] {
        [1.0 / 9.0; NUM_CLASSES]
    }

    fn config(voters: Vec<SimVoter>, rho: f64, seed: u64) -> SimConfig {
        SimConfig {
            n_samples: 200,
            class_prior: uniform_prior(),
            voters,
            rho,
            seed,
        }
    }

    #[test]
    fn validation_rejects_bad_shapes() {
        let voter = SimVoter {
            meta: meta("v1", ClassMode::NineClass),
            confusion_rows: identity_rows(),
        };
        let mut c = config(vec![voter.clone()], 0.5, 1);
        c.n_samples = 0;
        assert_eq!(c.validate().unwrap_err(), SimError::NoSamples);

        let mut c = config(vec![voter.clone()], 0.5, 1);
        c.class_prior[3] = 0.5;
        assert!(matches!(c.validate().unwrap_err(), SimError::BadPriorSum(_)));

        let mut c = config(vec![voter.clone()], 0.5, 1);
        c.rho = 1.5;
        assert_eq!(c.validate().unwrap_err(), SimError::BadRho(1.5));

        let c = config(vec![], 0.5, 1);
        assert_eq!(c.validate().unwrap_err(), SimError::NoVoters);

        let c = config(vec![voter.clone(), voter.clone()], 0.5, 1);
        assert_eq!(
            c.validate().unwrap_err(),
            SimError::DuplicateVoterId("v1".to_string())
        );

        let mut bad_row = voter.clone();
        bad_row.confusion_rows[2][2] = 0.9;
        let c = config(vec![bad_row], 0.5, 1);
        assert!(matches!(c.validate().unwrap_err(), SimError::BadRowSum { row: 2, .. }));
    }

    #[test]
    fn eight_class_voters_cannot_carry_mass_on_zero() {
        let bad = SimVoter {
            meta: meta("v8", ClassMode::EightClass),
            confusion_rows: identity_rows(), // row 0 puts mass on predicted 0
        };
        let c = config(vec![bad], 0.0, 1);
        assert_eq!(
            c.validate().unwrap_err(),
            SimError::EightClassZeroMass {
                voter_id: "v8".to_string(),
                row: 0
            }
        );
    }

    #[test]
    fn prototype_zero_mass_is_rejected_only_when_it_can_leak() {
        let nine = SimVoter {
            meta: meta("v9", ClassMode::NineClass),
            confusion_rows: identity_rows(), // can emit 0 on gold 0
        };
        let eight = SimVoter {
            meta: meta("v8", ClassMode::EightClass),
            confusion_rows: noisy_rows(0.6),
        };
        // correlated draws could copy a 0 into the eight-class voter
        let c = config(vec![nine.clone(), eight.clone()], 0.5, 1);
        assert_eq!(
            c.validate().unwrap_err(),
            SimError::PrototypeLeaksZero {
                voter_id: "v9".to_string(),
                row: 0
            }
        );
        // with rho = 0 nothing is copied, so the same pool is legal
        let c = config(vec![nine.clone(), eight.clone()], 0.0, 1);
        assert!(c.validate().is_ok());
        // with only nine-class voters there is nothing to protect
        let c = config(vec![nine], 0.5, 1);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rho_one_makes_every_voter_identical() {
        let voters: Vec<SimVoter> = (0..4)
            .map(|i| SimVoter {
                meta: meta(&format!("v{i}"), ClassMode::EightClass),
                confusion_rows: noisy_rows(0.3 + 0.1 * i as f64),
            })
            .collect();
        let (_, pool) = simulate(&config(voters, 1.0, 7)).unwrap();
        for voter in &pool[1..] {
            assert_eq!(voter.entries, pool[0].entries);
        }
        let refs: Vec<&VoterPredictions> = pool.iter().collect();
        assert_eq!(alpha_of_predictions(&refs).unwrap(), 1.0);
    }

    #[test]
    fn rho_zero_with_identity_confusion_reproduces_gold() {
        let voters: Vec<SimVoter> = (0..3)
            .map(|i| SimVoter {
                meta: meta(&format!("v{i}"), ClassMode::NineClass),
                confusion_rows: identity_rows(),
            })
            .collect();
        let (gold, pool) = simulate(&config(voters, 0.0, 11)).unwrap();
        for voter in &pool {
            assert_eq!(&voter.entries, gold.entries());
        }
    }

    #[test]
    fn identical_configs_reproduce_bit_identically() {
        let voters: Vec<SimVoter> = (0..3)
            .map(|i| SimVoter {
                meta: meta(&format!("v{i}"), ClassMode::NineClass),
                confusion_rows: noisy_rows(0.6),
            })
            .collect();
        let c = config(voters, 0.5, 99);
        let (gold_a, pool_a) = simulate(&c).unwrap();
        let (gold_b, pool_b) = simulate(&c).unwrap();
        assert_eq!(gold_a, gold_b);
        assert_eq!(pool_a, pool_b);
        let mut other_seed = c.clone();
        other_seed.seed = 100;
        let (gold_c, _) = simulate(&other_seed).unwrap();
        assert_ne!(gold_a, gold_c);
    }

    #[test]
    fn adding_a_voter_leaves_existing_draws_untouched() {
        let voter = |id: &str| SimVoter {
            meta: meta(id, ClassMode::NineClass),
            confusion_rows: noisy_rows(0.6),
        };
        let small = config(vec![voter("a"), voter("b")], 0.4, 5);
        let big = config(vec![voter("a"), voter("b"), voter("c")], 0.4, 5);
        let (gold_small, pool_small) = simulate(&small).unwrap();
        let (gold_big, pool_big) = simulate(&big).unwrap();
        assert_eq!(gold_small, gold_big);
        assert_eq!(pool_small[0].entries, pool_big[0].entries);
        assert_eq!(pool_small[1].entries, pool_big[1].entries);
    }

    #[test]
    fn eight_class_voters_never_emit_zero() {
        let first = SimVoter {
            meta: meta("v0", ClassMode::EightClass),
            confusion_rows: noisy_rows(0.5),
        };
        let second = SimVoter {
            meta: meta("v1", ClassMode::EightClass),
            confusion_rows: noisy_rows(0.7),
        };
        let (_, pool) = simulate(&config(vec![first, second], 0.6, 13)).unwrap();
        for voter in &pool {
            assert!(voter
                .entries
                .values()
                .all(|&label| label != ClassLabel::NO_DEFENCE));
        }
    }

    #[test]
    fn prior_from_counts_normalizes() {
        let counts: BTreeMap<ClassLabel, usize> =
            [75usize, 28, 16, 25, 21, 13, 44, 243, 7]
                .into_iter()
                .enumerate()
                .map(|(c, n)| (l(c as u8), n))
                .collect();
        let prior = prior_from_counts(&counts).unwrap();
        assert!((prior[7] - 243.0 / 472.0).abs() < 1e-12);
        assert!((prior.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let uniform: BTreeMap<ClassLabel, usize> =
            (0..9u8).map(|c| (l(c), 10usize)).collect();
        let prior = prior_from_counts(&uniform).unwrap();
        assert!(prior.iter().all(|&p| (p - 1.0 / 9.0).abs() < 1e-12));

        let majority: BTreeMap<ClassLabel, usize> =
            [244usize, 88, 54, 83, 67, 34, 135, 794, 21]
                .into_iter()
                .enumerate()
                .map(|(c, n)| (l(c as u8), n))
                .collect();
        let prior = prior_from_counts(&majority).unwrap();
        assert!((prior[7] - 794.0 / 1520.0).abs() < 1e-12);

        let zeros: BTreeMap<ClassLabel, usize> = [(l(1), 0usize)].into_iter().collect();
        assert_eq!(prior_from_counts(&zeros).unwrap_err(), SimError::AllZeroCounts);
    }

    #[test]
    fn missing_classes_get_zero_mass() {
        let counts: BTreeMap<ClassLabel, usize> =
            [(l(1), 3usize), (l(7), 1)].into_iter().collect();
        let prior = prior_from_counts(&counts).unwrap();
        assert_eq!(prior[0], 0.0);
        assert!((prior[1] - 0.75).abs() < 1e-12);
        assert!((prior[7] - 0.25).abs() < 1e-12);
    }
}
