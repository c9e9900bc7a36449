//! The pool manifest: one TOML file naming every voter, its metadata, and
//! the relative path to its predictions, plus optional gold and dialogue-map
//! paths. Loading resolves paths against the manifest's directory and fully
//! validates the pool.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{
    validate_registry, ClassLabel, ClassMode, GoldLabels, Violation, VoterMeta,
    VoterPredictions,
};
use crate::io::formats::{read_dialogue_map, read_gold, read_labels, render_labels};
use crate::io::{atomic_write, read_to_string, IoError, PoolViolations};

pub const MANIFEST_VERSION: u32 = 1;

/// One manifest entry: voter metadata plus the predictions file path,
/// relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestVoter {
    pub meta: VoterMeta,
    pub predictions: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolManifest {
    pub version: u32,
    /// Gold label file, relative to the manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<String>,
    /// Dialogue map file, relative to the manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dialogues: Option<String>,
    pub voters: Vec<ManifestVoter>,
}

impl PoolManifest {
    pub fn parse(text: &str, path: &str) -> Result<Self, IoError> {
        let manifest: PoolManifest =
            toml::from_str(text).map_err(|e| IoError::ManifestParse {
                path: path.to_string(),
                message: e.to_string(),
            })?;
        if manifest.version != MANIFEST_VERSION {
            return Err(IoError::UnsupportedVersion {
                path: path.to_string(),
                version: manifest.version,
            });
        }
        Ok(manifest)
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        Self::parse(&read_to_string(path)?, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        atomic_write(path, self.to_toml().as_bytes())
    }
}

/// A fully loaded and validated pool.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedPool {
    pub registry: Vec<VoterMeta>,
    pub predictions: Vec<VoterPredictions>,
    pub gold: Option<GoldLabels>,
    pub dialogues: Option<BTreeMap<String, String>>,
}

/// Structural checks. With gold present this is the full registry
/// validation; without gold the coverage checks are skipped.
fn structural_violations(
    registry: &[VoterMeta],
    predictions: &[VoterPredictions],
    gold: Option<&GoldLabels>,
) -> Vec<Violation> {
    if let Some(gold) = gold {
        return validate_registry(registry, predictions, gold);
    }
    let mut violations = Vec::new();
    let mut seen = BTreeMap::new();
    for meta in registry {
        if seen.insert(meta.voter_id.as_str(), ()).is_some() {
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
    for pred in predictions {
        if pred.meta.class_mode == ClassMode::EightClass {
            let zeros = pred
                .entries
                .values()
                .filter(|l| **l == ClassLabel::NO_DEFENCE)
                .count();
            if zeros > 0 {
                violations.push(Violation::EightClassZero {
                    voter_id: pred.meta.voter_id.clone(),
                    samples: zeros,
                });
            }
        }
    }
    violations
}

/// Loads a pool from its manifest. Every referenced file must exist and
/// parse; the assembled pool must pass registry validation.
pub fn load_pool(manifest_path: &Path) -> Result<LoadedPool, IoError> {
    let manifest = PoolManifest::read(manifest_path)?;
    if manifest.voters.is_empty() {
        return Err(IoError::EmptyPool);
    }
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let gold = manifest
        .gold
        .as_ref()
        .map(|rel| read_gold(&base.join(rel)))
        .transpose()?;
    let dialogues = manifest
        .dialogues
        .as_ref()
        .map(|rel| read_dialogue_map(&base.join(rel)))
        .transpose()?;
    let mut registry = Vec::with_capacity(manifest.voters.len());
    let mut predictions = Vec::with_capacity(manifest.voters.len());
    for voter in &manifest.voters {
        let entries = read_labels(&base.join(&voter.predictions))?;
        registry.push(voter.meta.clone());
        predictions.push(VoterPredictions {
            meta: voter.meta.clone(),
            entries,
        });
    }
    let violations = structural_violations(&registry, &predictions, gold.as_ref());
    if !violations.is_empty() {
        return Err(IoError::InvalidPool(PoolViolations(violations)));
    }
    Ok(LoadedPool {
        registry,
        predictions,
        gold,
        dialogues,
    })
}

fn prediction_file_name(voter_id: &str) -> Result<String, IoError> {
    let safe = voter_id
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if !safe || voter_id.is_empty() || voter_id.starts_with('.') {
        return Err(IoError::BadVoterFileName(voter_id.to_string()));
    }
    Ok(format!("{voter_id}.csv"))
}

/// Writes a complete pool (manifest, per-voter prediction files, gold) into
/// a directory in the standard format and returns the manifest path. Output
/// is deterministic: same pool, same bytes.
pub fn write_pool(
    dir: &Path,
    pool: &[VoterPredictions],
    gold: &GoldLabels,
) -> Result<PathBuf, IoError> {
    if pool.is_empty() {
        return Err(IoError::EmptyPool);
    }
    let mut voters = Vec::with_capacity(pool.len());
    for voter in pool {
        let file = prediction_file_name(&voter.meta.voter_id)?;
        atomic_write(
            &dir.join(&file),
            render_labels(&voter.entries).as_bytes(),
        )?;
        voters.push(ManifestVoter {
            meta: voter.meta.clone(),
            predictions: file,
        });
    }
    atomic_write(
        &dir.join("gold.csv"),
        render_labels(gold.entries()).as_bytes(),
    )?;
    let manifest = PoolManifest {
        version: MANIFEST_VERSION,
        gold: Some("gold.csv".to_string()),
        dialogues: None,
        voters,
    };
    let manifest_path = dir.join("manifest.toml");
    manifest.write(&manifest_path)?;
    Ok(manifest_path)
}
