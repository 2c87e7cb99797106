use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::SceneError;
use crate::anthro::AnthropometricModel;
use crate::data_model::KvConfig;
use crate::densitymap::SmoothingConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }

    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

/// Ground rectangle persons stand in, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundArea {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl GroundArea {
    pub fn centre(&self) -> (f64, f64) {
        ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub image_w: u32,
    pub image_h: u32,
    /// Focal length range in pixels (fx = fy, principal point at the centre).
    pub focal_range: [f64; 2],
    /// Height of the oblique camera, meters.
    pub camera_height_range: [f64; 2],
    /// Height of the top-down camera used for `birds_eye` frames.
    pub birds_eye_height_range: [f64; 2],
    pub persons_range: [usize; 2],
    pub area: GroundArea,
    /// Ground-plane footprint radius per person, meters.
    pub disc_radius: f64,
    /// Independent probability of each scene tag.
    pub tag_probabilities: BTreeMap<String, f64>,
    /// Fraction of hidden keypoints above which a frame is tagged
    /// `heavy_occlusion`.
    pub heavy_occlusion_fraction: f64,
    pub placement_retries: usize,
    pub model: AnthropometricModel,
    pub smoothing: SmoothingConfig,
    pub frames: SplitCounts,
    pub pools: SplitCounts,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            image_w: 320,
            image_h: 180,
            focal_range: [250.0, 350.0],
            camera_height_range: [3.0, 6.0],
            birds_eye_height_range: [10.0, 14.0],
            persons_range: [5, 25],
            area: GroundArea {
                x_min: -4.0,
                x_max: 4.0,
                y_min: 6.0,
                y_max: 16.0,
            },
            disc_radius: 0.35,
            tag_probabilities: BTreeMap::from([
                ("birds_eye".to_string(), 0.15),
                ("night".to_string(), 0.2),
                ("rain".to_string(), 0.15),
            ]),
            heavy_occlusion_fraction: 0.3,
            placement_retries: 200,
            model: AnthropometricModel::default(),
            smoothing: SmoothingConfig::default(),
            frames: SplitCounts {
                train: 140,
                val: 20,
                test: 40,
            },
            pools: SplitCounts {
                train: 50,
                val: 8,
                test: 16,
            },
        }
    }
}

fn range_keys(cfg: &KvConfig, prefix: &str, default: [f64; 2]) -> Result<[f64; 2], SceneError> {
    Ok([
        cfg.get_or(&format!("{prefix}.min"), default[0])?,
        cfg.get_or(&format!("{prefix}.max"), default[1])?,
    ])
}

const PLAIN_KEYS: &[&str] = &[
    "image_w",
    "image_h",
    "focal.min",
    "focal.max",
    "camera_height.min",
    "camera_height.max",
    "birds_eye_height.min",
    "birds_eye_height.max",
    "persons.min",
    "persons.max",
    "area.x_min",
    "area.x_max",
    "area.y_min",
    "area.y_max",
    "disc_radius",
    "heavy_occlusion_fraction",
    "placement_retries",
    "sigma_px",
    "truncation_radius",
    "frames.train",
    "frames.val",
    "frames.test",
    "pool.train",
    "pool.val",
    "pool.test",
];

impl SceneConfig {
    /// Defaults overridden by `cfg`. Tags come from `tag.<name>` keys (any
    /// `tag.` key replaces the whole default palette); the anthropometric
    /// model from `anthro.` keys.
    pub fn from_config(cfg: &KvConfig) -> Result<Self, SceneError> {
        cfg.check_keys(|k| PLAIN_KEYS.contains(&k) || k.starts_with("tag.") || k.starts_with("anthro."))?;
        let d = Self::default();
        let tags = cfg.section("tag");
        let tag_probabilities = if tags.keys().next().is_none() {
            d.tag_probabilities.clone()
        } else {
            tags.keys()
                .map(|k| Ok((k.to_string(), tags.require::<f64>(k)?)))
                .collect::<Result<_, SceneError>>()?
        };
        let out = Self {
            image_w: cfg.get_or("image_w", d.image_w)?,
            image_h: cfg.get_or("image_h", d.image_h)?,
            focal_range: range_keys(cfg, "focal", d.focal_range)?,
            camera_height_range: range_keys(cfg, "camera_height", d.camera_height_range)?,
            birds_eye_height_range: range_keys(cfg, "birds_eye_height", d.birds_eye_height_range)?,
            persons_range: [
                cfg.get_or("persons.min", d.persons_range[0])?,
                cfg.get_or("persons.max", d.persons_range[1])?,
            ],
            area: GroundArea {
                x_min: cfg.get_or("area.x_min", d.area.x_min)?,
                x_max: cfg.get_or("area.x_max", d.area.x_max)?,
                y_min: cfg.get_or("area.y_min", d.area.y_min)?,
                y_max: cfg.get_or("area.y_max", d.area.y_max)?,
            },
            disc_radius: cfg.get_or("disc_radius", d.disc_radius)?,
            tag_probabilities,
            heavy_occlusion_fraction: cfg.get_or("heavy_occlusion_fraction", d.heavy_occlusion_fraction)?,
            placement_retries: cfg.get_or("placement_retries", d.placement_retries)?,
            model: AnthropometricModel::from_config(&cfg.section("anthro"))?,
            smoothing: SmoothingConfig {
                sigma_px: cfg.get_or("sigma_px", d.smoothing.sigma_px)?,
                truncation_radius: cfg.get_or("truncation_radius", d.smoothing.truncation_radius)?,
            },
            frames: SplitCounts {
                train: cfg.get_or("frames.train", d.frames.train)?,
                val: cfg.get_or("frames.val", d.frames.val)?,
                test: cfg.get_or("frames.test", d.frames.test)?,
            },
            pools: SplitCounts {
                train: cfg.get_or("pool.train", d.pools.train)?,
                val: cfg.get_or("pool.val", d.pools.val)?,
                test: cfg.get_or("pool.test", d.pools.test)?,
            },
        };
        out.validate()?;
        Ok(out)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, SceneError> {
        Self::from_config(&KvConfig::load(path)?)
    }

    /// Every setting as a flat config; parsing it back gives `self`.
    pub fn to_config(&self) -> KvConfig {
        let mut c = KvConfig::new();
        c.set("image_w", self.image_w);
        c.set("image_h", self.image_h);
        for (prefix, r) in [
            ("focal", self.focal_range),
            ("camera_height", self.camera_height_range),
            ("birds_eye_height", self.birds_eye_height_range),
        ] {
            c.set(format!("{prefix}.min"), r[0]);
            c.set(format!("{prefix}.max"), r[1]);
        }
        c.set("persons.min", self.persons_range[0]);
        c.set("persons.max", self.persons_range[1]);
        c.set("area.x_min", self.area.x_min);
        c.set("area.x_max", self.area.x_max);
        c.set("area.y_min", self.area.y_min);
        c.set("area.y_max", self.area.y_max);
        c.set("disc_radius", self.disc_radius);
        for (tag, p) in &self.tag_probabilities {
            c.set(format!("tag.{tag}"), p);
        }
        c.set("heavy_occlusion_fraction", self.heavy_occlusion_fraction);
        c.set("placement_retries", self.placement_retries);
        c.set("sigma_px", self.smoothing.sigma_px);
        c.set("truncation_radius", self.smoothing.truncation_radius);
        for split in Split::ALL {
            c.set(format!("frames.{split}"), self.frames.get(split));
            c.set(format!("pool.{split}"), self.pools.get(split));
        }
        for (k, v) in self.model.to_config().iter() {
            c.set(format!("anthro.{k}"), v);
        }
        c
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: String| Err(SceneError::Config(m));
        if self.image_w == 0 || self.image_h == 0 {
            return bad("image size must be positive".into());
        }
        let ordered_positive = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] > 0.0 && r[0] <= r[1];
        if !ordered_positive(self.focal_range) {
            return bad(format!("focal range {:?}", self.focal_range));
        }
        if !ordered_positive(self.camera_height_range) || !ordered_positive(self.birds_eye_height_range) {
            return bad("camera height ranges must be positive and ordered".into());
        }
        if self.persons_range[0] > self.persons_range[1] {
            return bad(format!("persons range {:?} is empty", self.persons_range));
        }
        let a = &self.area;
        if !(a.x_min < a.x_max && a.y_min < a.y_max) {
            return bad("placement area must have positive size".into());
        }
        if !(self.disc_radius.is_finite() && self.disc_radius > 0.0) {
            return bad("disc_radius must be positive".into());
        }
        if let Some((t, p)) = self.tag_probabilities.iter().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
            return bad(format!("tag {t} probability {p} not in [0,1]"));
        }
        if !(0.0..=1.0).contains(&self.heavy_occlusion_fraction) {
            return bad("heavy_occlusion_fraction must be in [0,1]".into());
        }
        self.smoothing.validate().map_err(|e| SceneError::Config(e.to_string()))?;
        self.model.validate()?;
        Ok(())
    }
}
