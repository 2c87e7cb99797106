//! MAE, PP-MAE and RMSE over per-frame volume predictions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::NeumaierSum;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("metrics need at least one record")]
    Empty,
    #[error("PP-MAE undefined for empty frames ({0})")]
    EmptyFrame(String),
    #[error("frame {frame_id}: invalid volume {value}")]
    InvalidVolume { frame_id: String, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub frame_id: String,
    pub v_true: f64,
    pub v_pred: f64,
    pub n_persons: usize,
}

impl EvalRecord {
    pub fn new(frame_id: impl Into<String>, v_true: f64, v_pred: f64, n_persons: usize) -> Self {
        Self {
            frame_id: frame_id.into(),
            v_true,
            v_pred,
            n_persons,
        }
    }

    pub fn abs_error(&self) -> f64 {
        (self.v_true - self.v_pred).abs()
    }

    fn validate(&self) -> Result<(), MetricsError> {
        for value in [self.v_true, self.v_pred] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(MetricsError::InvalidVolume {
                    frame_id: self.frame_id.clone(),
                    value,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mae: f64,
    /// `None` when every frame is empty.
    pub ppmae: Option<f64>,
    pub rmse: f64,
    pub k: usize,
    /// Frames with no persons, left out of PP-MAE.
    pub excluded_empty: usize,
}

impl MetricsReport {
    /// `metric,value,k` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value,k\n");
        out.push_str(&format!("mae,{},{}\n", self.mae, self.k));
        match self.ppmae {
            Some(p) => out.push_str(&format!("ppmae,{},{}\n", p, self.k - self.excluded_empty)),
            None => out.push_str("ppmae,,0\n"),
        }
        out.push_str(&format!("rmse,{},{}\n", self.rmse, self.k));
        out
    }
}

/// Partial sums that can be filled per shard and merged.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsAccumulator {
    sum_ae: NeumaierSum,
    sum_sq: NeumaierSum,
    sum_pp: NeumaierSum,
    k: usize,
    k_pp: usize,
}

impl MetricsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, r: &EvalRecord) -> Result<(), MetricsError> {
        r.validate()?;
        let ae = r.abs_error();
        self.sum_ae.add(ae);
        self.sum_sq.add(ae * ae);
        self.k += 1;
        if r.n_persons > 0 {
            self.sum_pp.add(ae / r.n_persons as f64);
            self.k_pp += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &MetricsAccumulator) {
        self.sum_ae.merge(&other.sum_ae);
        self.sum_sq.merge(&other.sum_sq);
        self.sum_pp.merge(&other.sum_pp);
        self.k += other.k;
        self.k_pp += other.k_pp;
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn report(&self) -> Result<MetricsReport, MetricsError> {
        if self.k == 0 {
            return Err(MetricsError::Empty);
        }
        let k = self.k as f64;
        Ok(MetricsReport {
            mae: self.sum_ae.value() / k,
            ppmae: (self.k_pp > 0).then(|| self.sum_pp.value() / self.k_pp as f64),
            rmse: (self.sum_sq.value() / k).sqrt(),
            k: self.k,
            excluded_empty: self.k - self.k_pp,
        })
    }
}

/// Full report; empty frames count for MAE/RMSE only.
pub fn evaluate(records: &[EvalRecord]) -> Result<MetricsReport, MetricsError> {
    let mut acc = MetricsAccumulator::new();
    for r in records {
        acc.add(r)?;
    }
    acc.report()
}

pub fn mae(records: &[EvalRecord]) -> Result<f64, MetricsError> {
    Ok(evaluate(records)?.mae)
}

pub fn rmse(records: &[EvalRecord]) -> Result<f64, MetricsError> {
    Ok(evaluate(records)?.rmse)
}

/// Mean of per-frame `ae / n`; any empty frame is an error.
pub fn ppmae(records: &[EvalRecord]) -> Result<f64, MetricsError> {
    if let Some(r) = records.iter().find(|r| r.n_persons == 0) {
        return Err(MetricsError::EmptyFrame(r.frame_id.clone()));
    }
    evaluate(records)?.ppmae.ok_or(MetricsError::Empty)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub frame_id: String,
    pub ae: f64,
    pub pp_ae: f64,
    pub n: usize,
    /// `ae / pp_ae`, `None` when `ae` is 0.
    pub ratio: Option<f64>,
}

pub const SCATTER_CSV_HEADER: &str = "frame_id,ae,pp_ae,n,ratio";

impl ScatterPoint {
    pub fn csv_row(&self) -> String {
        let ratio = self.ratio.map(|r| r.to_string()).unwrap_or_default();
        format!("{},{},{},{},{}", self.frame_id, self.ae, self.pp_ae, self.n, ratio)
    }
}

/// One `(ae, ae/n)` point per frame.
pub fn mae_ppmae_scatter(records: &[EvalRecord]) -> Result<Vec<ScatterPoint>, MetricsError> {
    records
        .iter()
        .map(|r| {
            r.validate()?;
            if r.n_persons == 0 {
                return Err(MetricsError::EmptyFrame(r.frame_id.clone()));
            }
            let ae = r.abs_error();
            let pp_ae = ae / r.n_persons as f64;
            Ok(ScatterPoint {
                frame_id: r.frame_id.clone(),
                ae,
                pp_ae,
                n: r.n_persons,
                ratio: (ae > 0.0).then(|| ae / pp_ae),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recs(v: &[(f64, f64, usize)]) -> Vec<EvalRecord> {
        v.iter()
            .enumerate()
            .map(|(i, &(t, p, n))| EvalRecord::new(format!("f{i}"), t, p, n))
            .collect()
    }

    #[test]
    fn hand_cases() {
        let r = recs(&[(1000.0, 1100.0, 10), (2000.0, 1900.0, 20)]);
        assert_eq!(mae(&r).unwrap(), 100.0);
        assert_eq!(ppmae(&r).unwrap(), 7.5);
        assert_eq!(rmse(&r).unwrap(), 100.0);
        let r = recs(&[(100.0, 100.0, 1), (0.0, 200.0, 1)]);
        assert_eq!(mae(&r).unwrap(), 100.0);
        assert_eq!(rmse(&r).unwrap(), 20000f64.sqrt());
    }

    #[test]
    fn perfect_and_single() {
        let r = recs(&[(5.0, 5.0, 1), (7.0, 7.0, 2)]);
        let rep = evaluate(&r).unwrap();
        assert_eq!((rep.mae, rep.ppmae, rep.rmse), (0.0, Some(0.0), 0.0));
        let r = recs(&[(50.0, 20.0, 3)]);
        let rep = evaluate(&r).unwrap();
        assert_eq!(rep.mae, 30.0);
        assert_eq!(rep.rmse, 30.0);
    }

    #[test]
    fn empty_frames() {
        assert_eq!(evaluate(&[]), Err(MetricsError::Empty));
        let r = recs(&[(10.0, 0.0, 0), (10.0, 5.0, 5)]);
        assert!(matches!(ppmae(&r), Err(MetricsError::EmptyFrame(_))));
        let rep = evaluate(&r).unwrap();
        assert_eq!(rep.excluded_empty, 1);
        assert_eq!(rep.ppmae, Some(1.0));
    }

    #[test]
    fn negative_volume_rejected() {
        assert!(matches!(
            evaluate(&recs(&[(-1.0, 0.0, 1)])),
            Err(MetricsError::InvalidVolume { .. })
        ));
    }

    #[test]
    fn scatter_points() {
        let pts = mae_ppmae_scatter(&recs(&[(40.0, 0.0, 5), (3.0, 3.0, 2)])).unwrap();
        assert_eq!((pts[0].ae, pts[0].pp_ae, pts[0].ratio), (40.0, 8.0, Some(5.0)));
        assert_eq!((pts[1].ae, pts[1].pp_ae, pts[1].ratio), (0.0, 0.0, None));
    }

    #[test]
    fn merged_shards_match() {
        let r = recs(&[(1.0, 2.0, 1), (3.0, 7.0, 2), (9.0, 1.0, 4), (0.5, 0.25, 0)]);
        let mut a = MetricsAccumulator::new();
        let mut b = MetricsAccumulator::new();
        for x in &r[..2] {
            a.add(x).unwrap();
        }
        for x in &r[2..] {
            b.add(x).unwrap();
        }
        a.merge(&b);
        let merged = a.report().unwrap();
        let whole = evaluate(&r).unwrap();
        assert!((merged.mae - whole.mae).abs() < 1e-15);
        assert_eq!(merged.k, 4);
        assert_eq!(merged.excluded_empty, 1);
    }

    #[test]
    fn csv_layout() {
        let rep = evaluate(&recs(&[(1000.0, 1100.0, 10), (2000.0, 1900.0, 20)])).unwrap();
        assert_eq!(rep.to_csv(), "metric,value,k\nmae,100,2\nppmae,7.5,2\nrmse,100,2\n");
    }
}
