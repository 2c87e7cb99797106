use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use thiserror::Error;

use super::kv::{KvConfig, KvError};

/// Body part identifier as used in label sidecars and annotations.
pub type PartId = u32;

/// Keypoint identifier within a skeleton.
pub type KeypointId = u32;

const DEFAULT_TAXONOMY: &str = include_str!("../../assets/default_taxonomy.cfg");

/// Part ids of the shipped default taxonomy.
pub mod parts {
    use super::PartId;

    pub const HEAD: PartId = 0;
    pub const TORSO: PartId = 1;
    pub const LEFT_ARM: PartId = 2;
    pub const RIGHT_ARM: PartId = 3;
    pub const LEFT_FOREARM: PartId = 4;
    pub const RIGHT_FOREARM: PartId = 5;
    pub const LEFT_THIGH: PartId = 6;
    pub const RIGHT_THIGH: PartId = 7;
    pub const CALVES: PartId = 8;
}

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error(transparent)]
    Config(#[from] KvError),
    #[error("bad key `{0}`")]
    BadKey(String),
    #[error("part {0} has no name")]
    MissingName(PartId),
    #[error("keypoint {keypoint} assigned to parts {first} and {second}")]
    SharedKeypoint {
        keypoint: KeypointId,
        first: PartId,
        second: PartId,
    },
    #[error("taxonomy defines no parts")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Part {
    pub id: PartId,
    pub name: String,
}

/// Ordered list of body parts and the keypoints each part owns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartTaxonomy {
    parts: Vec<Part>,
    keypoint_map: BTreeMap<PartId, Vec<KeypointId>>,
    keypoint_names: BTreeMap<KeypointId, String>,
}

impl PartTaxonomy {
    pub fn from_config(cfg: &KvConfig) -> Result<Self, TaxonomyError> {
        let mut names: BTreeMap<PartId, String> = BTreeMap::new();
        let mut keypoint_map: BTreeMap<PartId, Vec<KeypointId>> = BTreeMap::new();
        let mut keypoint_names = BTreeMap::new();

        for (key, value) in cfg.iter() {
            let fields: Vec<&str> = key.split('.').collect();
            let bad = || TaxonomyError::BadKey(key.to_string());
            match fields.as_slice() {
                ["part", id, "name"] => {
                    names.insert(id.parse().map_err(|_| bad())?, value.to_string());
                }
                ["part", id, "keypoints"] => {
                    let id: PartId = id.parse().map_err(|_| bad())?;
                    let kps = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse::<KeypointId>().map_err(|_| bad()))
                        .collect::<Result<Vec<_>, _>>()?;
                    keypoint_map.insert(id, kps);
                }
                ["keypoint", id, "name"] => {
                    keypoint_names.insert(id.parse().map_err(|_| bad())?, value.to_string());
                }
                _ => return Err(bad()),
            }
        }

        if let Some(&orphan) = keypoint_map.keys().find(|id| !names.contains_key(id)) {
            return Err(TaxonomyError::MissingName(orphan));
        }
        if names.is_empty() {
            return Err(TaxonomyError::Empty);
        }

        let mut owner: BTreeMap<KeypointId, PartId> = BTreeMap::new();
        for (&part, kps) in &keypoint_map {
            for &kp in kps {
                if let Some(first) = owner.insert(kp, part) {
                    return Err(TaxonomyError::SharedKeypoint {
                        keypoint: kp,
                        first,
                        second: part,
                    });
                }
            }
        }

        let parts = names.into_iter().map(|(id, name)| Part { id, name }).collect();
        Ok(Self {
            parts,
            keypoint_map,
            keypoint_names,
        })
    }

    pub fn parse(text: &str) -> Result<Self, TaxonomyError> {
        Self::from_config(&KvConfig::parse(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TaxonomyError> {
        Self::from_config(&KvConfig::load(path)?)
    }

    /// Text of the shipped default taxonomy config.
    pub fn default_config_text() -> &'static str {
        DEFAULT_TAXONOMY
    }

    pub fn parts(&self) -> &[Part] {
        &self.parts
    }

    pub fn part_ids(&self) -> impl Iterator<Item = PartId> + '_ {
        self.parts.iter().map(|p| p.id)
    }

    pub fn contains(&self, id: PartId) -> bool {
        self.parts.binary_search_by_key(&id, |p| p.id).is_ok()
    }

    pub fn name(&self, id: PartId) -> Option<&str> {
        self.parts
            .binary_search_by_key(&id, |p| p.id)
            .ok()
            .map(|i| self.parts[i].name.as_str())
    }

    pub fn id_of(&self, name: &str) -> Option<PartId> {
        self.parts.iter().find(|p| p.name == name).map(|p| p.id)
    }

    pub fn keypoints(&self, id: PartId) -> &[KeypointId] {
        self.keypoint_map.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Part owning a keypoint id.
    pub fn part_of_keypoint(&self, kp: KeypointId) -> Option<PartId> {
        self.keypoint_map
            .iter()
            .find(|(_, kps)| kps.contains(&kp))
            .map(|(&part, _)| part)
    }

    pub fn keypoint_name(&self, kp: KeypointId) -> Option<&str> {
        self.keypoint_names.get(&kp).map(String::as_str)
    }

    pub fn keypoint_count(&self) -> usize {
        self.keypoint_map.values().map(Vec::len).sum()
    }

    pub fn all_keypoints(&self) -> BTreeSet<KeypointId> {
        self.keypoint_map.values().flatten().copied().collect()
    }
}

impl Default for PartTaxonomy {
    fn default() -> Self {
        Self::parse(DEFAULT_TAXONOMY).expect("shipped taxonomy config is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_has_nine_parts_and_five_torso_keypoints() {
        let tax = PartTaxonomy::default();
        assert_eq!(tax.parts().len(), 9);
        assert_eq!(tax.part_ids().collect::<Vec<_>>(), (0..9).collect::<Vec<_>>());
        let torso = tax.id_of("torso").unwrap();
        assert_eq!(torso, parts::TORSO);
        assert_eq!(tax.keypoints(torso).len(), 5);
        assert_eq!(tax.keypoint_count(), 17);
        assert_eq!(tax.all_keypoints().len(), 17);
    }

    #[test]
    fn default_names_match_constants() {
        let tax = PartTaxonomy::default();
        let expected = [
            (parts::HEAD, "head"),
            (parts::TORSO, "torso"),
            (parts::LEFT_ARM, "left_arm"),
            (parts::RIGHT_ARM, "right_arm"),
            (parts::LEFT_FOREARM, "left_forearm"),
            (parts::RIGHT_FOREARM, "right_forearm"),
            (parts::LEFT_THIGH, "left_thigh"),
            (parts::RIGHT_THIGH, "right_thigh"),
            (parts::CALVES, "calves"),
        ];
        for (id, name) in expected {
            assert_eq!(tax.name(id), Some(name));
        }
        assert_eq!(tax.part_of_keypoint(15), Some(parts::CALVES));
        assert_eq!(tax.keypoint_name(4), Some("neck"));
    }

    #[test]
    fn shared_keypoint_is_rejected() {
        let err = PartTaxonomy::parse("part.0.name=a\npart.0.keypoints=1,2\npart.1.name=b\npart.1.keypoints=2")
            .unwrap_err();
        assert!(matches!(err, TaxonomyError::SharedKeypoint { keypoint: 2, .. }));
    }

    #[test]
    fn keypoints_without_name_are_rejected() {
        assert!(matches!(
            PartTaxonomy::parse("part.0.name=a\npart.3.keypoints=1"),
            Err(TaxonomyError::MissingName(3))
        ));
        assert!(matches!(
            PartTaxonomy::parse("parts.0.name=a"),
            Err(TaxonomyError::BadKey(_))
        ));
    }
}
