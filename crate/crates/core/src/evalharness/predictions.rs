//! Prediction sets: scalar totals from CSV or density maps from `.vdm` files.

use std::collections::BTreeMap;
use std::path::Path;

use super::EvalError;
use crate::data_model::{read_vdm, DensityMap, FrameAnnotation};

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    /// Predicted total volume, dm³.
    Scalar(f64),
    Map(DensityMap),
}

impl Prediction {
    /// Predicted total; maps are summed.
    pub fn total(&self) -> f64 {
        match self {
            Prediction::Scalar(v) => *v,
            Prediction::Map(m) => m.sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionSet {
    pub source: String,
    pub predictions: BTreeMap<String, Prediction>,
}

pub const PREDICTION_CSV_HEADER: &str = "frame_id,V_pred_dm3";

impl PredictionSet {
    pub fn new(source: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            predictions: BTreeMap::new(),
        }
    }

    pub fn get(&self, frame_id: &str) -> Option<&Prediction> {
        self.predictions.get(frame_id)
    }

    pub fn insert(&mut self, frame_id: impl Into<String>, p: Prediction) {
        self.predictions.insert(frame_id.into(), p);
    }

    /// Parse `frame_id,V_pred_dm3` rows; the header is optional.
    pub fn parse_csv(text: &str, source: &str) -> Result<Self, EvalError> {
        let mut set = Self::new(source);
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("frame_id")) {
                continue;
            }
            let bad = || EvalError::PredictionCsv {
                line: i + 1,
                content: line.to_string(),
            };
            let (id, v) = line.split_once(',').ok_or_else(bad)?;
            let v: f64 = v.trim().parse().map_err(|_| bad())?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(bad());
            }
            if set.predictions.insert(id.trim().to_string(), Prediction::Scalar(v)).is_some() {
                return Err(EvalError::DuplicatePrediction(id.trim().to_string()));
            }
        }
        Ok(set)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io(path.display().to_string(), e))?;
        Self::parse_csv(&text, &path.display().to_string())
    }

    /// Load `<frame_id>.vdm` for every frame that has one.
    pub fn load_map_dir(dir: impl AsRef<Path>, frames: &[FrameAnnotation]) -> Result<Self, EvalError> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(EvalError::Io(
                dir.display().to_string(),
                std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
            ));
        }
        let mut set = Self::new(dir.display().to_string());
        for f in frames {
            let path = dir.join(format!("{}.vdm", f.frame_id));
            if path.exists() {
                set.insert(f.frame_id.clone(), Prediction::Map(read_vdm(&path)?));
            }
        }
        Ok(set)
    }

    /// CSV or directory, decided by the path.
    pub fn load(path: impl AsRef<Path>, frames: &[FrameAnnotation]) -> Result<Self, EvalError> {
        let path = path.as_ref();
        if path.is_dir() {
            Self::load_map_dir(path, frames)
        } else {
            Self::load_csv(path)
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{PREDICTION_CSV_HEADER}\n");
        for (id, p) in &self.predictions {
            out.push_str(&format!("{id},{}\n", p.total()));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip() {
        let set = PredictionSet::parse_csv("frame_id,V_pred_dm3\na,1.5\nb,0\n", "t").unwrap();
        assert_eq!(set.get("a"), Some(&Prediction::Scalar(1.5)));
        let again = PredictionSet::parse_csv(&set.to_csv(), "t").unwrap();
        assert_eq!(again.predictions, set.predictions);
    }

    #[test]
    fn bad_rows() {
        assert!(PredictionSet::parse_csv("a;1\n", "t").is_err());
        assert!(PredictionSet::parse_csv("a,-1\n", "t").is_err());
        assert!(matches!(
            PredictionSet::parse_csv("a,1\na,2\n", "t"),
            Err(EvalError::DuplicatePrediction(_))
        ));
    }
}
