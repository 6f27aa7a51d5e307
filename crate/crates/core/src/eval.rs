//! Edge-set metrics: Chamfer distance and radius-matched IoU, precision,
//! recall and F-score on jointly normalized point sets.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{Point, PointCloud, SpatialIndex};
use crate::error::{Error, Result};

/// Match radius in normalized coordinates; a match needs a strictly smaller distance.
pub const MATCH_RADIUS: f64 = 0.02;

const IDENTITY_TOL: f64 = 1e-12;

/// Shifts both sets by the minimum corner of their joint bounding box and
/// divides by its largest extent.
pub fn normalize_pair(pred: &[Point], gt: &[Point]) -> Result<(Vec<Point>, Vec<Point>)> {
    if pred.is_empty() || gt.is_empty() {
        return Err(Error::invalid("normalize_pair needs two non-empty sets"));
    }
    let mut lo = pred[0];
    let mut hi = pred[0];
    for p in pred.iter().chain(gt) {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
    if !(extent > 0.0) || !extent.is_finite() {
        return Err(Error::DegenerateInput(format!("joint bounding box has extent {extent}")));
    }
    let map = |pts: &[Point]| pts.iter().map(|p| Point::from((p - lo) / extent)).collect();
    Ok((map(pred), map(gt)))
}

fn nearest_distances(from: &[Point], to: &[Point]) -> Result<Vec<f64>> {
    let index = SpatialIndex::from_points(to)?;
    Ok(from.par_iter().map(|p| index.knn(p, 1)[0].distance()).collect())
}

/// Symmetric mean nearest-neighbour distance.
pub fn chamfer(a: &[Point], b: &[Point]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("chamfer distance needs two non-empty sets"));
    }
    let ab: f64 = nearest_distances(a, b)?.iter().sum();
    let ba: f64 = nearest_distances(b, a)?.iter().sum();
    Ok(ab / a.len() as f64 + ba / b.len() as f64)
}

/// Coverage matching counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    /// Predicted points with a ground-truth point inside the radius.
    pub tp: usize,
    /// Predicted points without one.
    pub fp: usize,
    /// Ground-truth points with no predicted point inside the radius.
    pub fn_: usize,
    /// Ground-truth points that are covered.
    pub gt_matched: usize,
}

fn covered(from: &[Point], to: &[Point], radius: f64) -> Result<usize> {
    if from.is_empty() || to.is_empty() {
        return Ok(0);
    }
    Ok(nearest_distances(from, to)?.iter().filter(|&&d| d < radius).count())
}

pub fn match_counts(pred: &[Point], gt: &[Point], radius: f64) -> Result<MatchCounts> {
    if !(radius > 0.0) {
        return Err(Error::invalid(format!("match radius must be positive, got {radius}")));
    }
    let tp = covered(pred, gt, radius)?;
    let gt_matched = covered(gt, pred, radius)?;
    Ok(MatchCounts {
        tp,
        fp: pred.len() - tp,
        fn_: gt.len() - gt_matched,
        gt_matched,
    })
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cd: f64,
    pub iou: f64,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub gt_matched: usize,
    pub n_pred: usize,
    pub n_gt: usize,
}

impl EvalReport {
    pub fn from_counts(cd: f64, counts: MatchCounts) -> Result<Self> {
        let MatchCounts { tp, fp, fn_, gt_matched } = counts;
        let precision = ratio(tp, tp + fp);
        let recall = ratio(gt_matched, gt_matched + fn_);
        let report = Self {
            cd,
            iou: ratio(tp, tp + fp + fn_),
            precision,
            recall,
            fscore: harmonic(precision, recall),
            tp,
            fp,
            fn_,
            gt_matched,
            n_pred: tp + fp,
            n_gt: gt_matched + fn_,
        };
        report.check()?;
        Ok(report)
    }

    /// Re-derives every score from the counts.
    pub fn check(&self) -> Result<()> {
        let close = |a: f64, b: f64| (a - b).abs() <= IDENTITY_TOL;
        let ok = self.tp + self.fp == self.n_pred
            && self.gt_matched + self.fn_ == self.n_gt
            && close(self.iou, ratio(self.tp, self.tp + self.fp + self.fn_))
            && close(self.precision, ratio(self.tp, self.n_pred))
            && close(self.recall, ratio(self.gt_matched, self.n_gt))
            && close(self.fscore, harmonic(self.precision, self.recall))
            && [self.iou, self.precision, self.recall, self.fscore]
                .iter()
                .all(|s| (0.0..=1.0).contains(s))
            && self.cd.is_finite()
            && self.cd >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Numerical(format!("inconsistent evaluation report {self:?}")))
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let rows: [(&str, String); 11] = [
            ("CD", format!("{:.4}", self.cd)),
            ("IoU", format!("{:.4}", self.iou)),
            ("Precision", format!("{:.4}", self.precision)),
            ("Recall", format!("{:.4}", self.recall)),
            ("F-score", format!("{:.4}", self.fscore)),
            ("TP", self.tp.to_string()),
            ("FP", self.fp.to_string()),
            ("FN", self.fn_.to_string()),
            ("GT matched", self.gt_matched.to_string()),
            ("Predicted edges", self.n_pred.to_string()),
            ("GT edges", self.n_gt.to_string()),
        ];
        for (name, value) in rows {
            let _ = writeln!(out, "{name:<16}{value:>12}");
        }
        out
    }
}

/// Compares the edge subsets of two labeled clouds.
pub fn evaluate(pred: &PointCloud, gt: &PointCloud) -> Result<EvalReport> {
    evaluate_points(&pred.edge_points()?, &gt.edge_points()?)
}

pub fn evaluate_points(pred_edges: &[Point], gt_edges: &[Point]) -> Result<EvalReport> {
    if pred_edges.is_empty() {
        return Err(Error::EmptyEdgeSet("prediction"));
    }
    if gt_edges.is_empty() {
        return Err(Error::EmptyEdgeSet("ground truth"));
    }
    let (p, g) = normalize_pair(pred_edges, gt_edges)?;
    let cd = chamfer(&p, &g)?;
    EvalReport::from_counts(cd, match_counts(&p, &g, MATCH_RADIUS)?)
}

/// Per-point confusion counts for index-aligned labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointScores {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
}

pub fn point_scores(pred: &[bool], truth: &[bool]) -> Result<PointScores> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!("{} predictions for {} labels", pred.len(), truth.len())));
    }
    let mut tp = 0;
    let mut fp = 0;
    let mut fn_ = 0;
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    Ok(PointScores {
        tp,
        fp,
        fn_,
        precision,
        recall,
        fscore: harmonic(precision, recall),
    })
}
