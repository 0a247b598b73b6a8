//! Segmentation comparison: DICE, XOR discrepancy maps and per-ROI reports.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{Provenance, Roi, SegmentationSet, Source, VoxelMask};

/// A DICE score. `empty_pair` marks the both-empty case, scored 1.0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dice {
    pub value: f64,
    pub empty_pair: bool,
}

/// `2|A∩B| / (|A|+|B|)`, computed with word-level popcounts.
pub fn dice(a: &VoxelMask, b: &VoxelMask) -> Result<Dice> {
    let inter = a.intersection_count(b)?;
    Ok(dice_from_counts(a.count(), b.count(), inter))
}

pub fn dice_from_counts(a: usize, b: usize, intersection: usize) -> Dice {
    let total = a + b;
    if total == 0 {
        Dice {
            value: 1.0,
            empty_pair: true,
        }
    } else {
        Dice {
            value: 2.0 * intersection as f64 / total as f64,
            empty_pair: false,
        }
    }
}

/// Voxels set in exactly one of `a`, `b`.
pub fn discrepancy_map(a: &VoxelMask, b: &VoxelMask) -> Result<VoxelMask> {
    a.symmetric_difference(b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiEvaluation {
    pub roi_name: String,
    pub dice: f64,
    pub empty_pair: bool,
    pub pred_voxels: usize,
    pub gt_voxels: usize,
    pub intersection_voxels: usize,
    pub discrepancy_voxels: usize,
    /// False when the ROI exists in only one of the two sets.
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub series_id: String,
    pub pred_version: u64,
    pub gt_version: u64,
    pub entries: Vec<RoiEvaluation>,
    /// Mean DICE over matched ROIs; `None` when nothing matched.
    pub mean_dice: Option<f64>,
    pub matched_count: usize,
    pub unmatched_count: usize,
    /// Version of the stored discrepancy segmentation, once persisted.
    #[serde(default)]
    pub discrepancy_version: Option<u64>,
    pub created_at: DateTime<Utc>,
}

impl EvaluationReport {
    pub fn entry(&self, roi_name: &str) -> Option<&RoiEvaluation> {
        self.entries.iter().find(|e| e.roi_name == roi_name)
    }
}

/// Compares `pred` against `gt`, ROI by ROI.
///
/// ROIs are matched by exact name. Unmatched ROIs are compared against an
/// empty mask and reported with `matched = false`. Entries list prediction
/// ROIs first (in their order) followed by ground-truth-only ROIs. The
/// second value holds one `<roi>-discrepancy` mask per entry.
pub fn evaluate(
    pred: &SegmentationSet,
    gt: &SegmentationSet,
) -> Result<(EvaluationReport, SegmentationSet)> {
    if pred.series_ref != gt.series_ref {
        return Err(Error::SeriesMismatch(format!(
            "prediction is for series '{}', ground truth for '{}'",
            pred.series_ref, gt.series_ref
        )));
    }
    if pred.grid() != gt.grid() {
        return Err(Error::GridMismatch(
            "prediction and ground truth are on different grids".into(),
        ));
    }

    let pred_names: BTreeSet<&str> = pred.roi_names();
    let mut pairs: Vec<(&Roi, Option<&VoxelMask>, Option<&VoxelMask>)> = pred
        .rois()
        .iter()
        .map(|r| {
            (
                &r.roi,
                Some(&r.mask),
                gt.roi_by_name(&r.roi.name).map(|g| &g.mask),
            )
        })
        .collect();
    pairs.extend(
        gt.rois()
            .iter()
            .filter(|g| !pred_names.contains(g.roi.name.as_str()))
            .map(|g| (&g.roi, None, Some(&g.mask))),
    );

    let empty = VoxelMask::new(pred.grid().clone());
    let results: Vec<(RoiEvaluation, VoxelMask)> = pairs
        .par_iter()
        .map(|(roi, p, g)| {
            let matched = p.is_some() && g.is_some();
            let p = p.unwrap_or(&empty);
            let g = g.unwrap_or(&empty);
            let inter = p.intersection_count(g).expect("grids checked above");
            let (pc, gc) = (p.count(), g.count());
            let d = dice_from_counts(pc, gc, inter);
            let xor = discrepancy_map(p, g).expect("grids checked above");
            let entry = RoiEvaluation {
                roi_name: roi.name.clone(),
                dice: d.value,
                empty_pair: d.empty_pair,
                pred_voxels: pc,
                gt_voxels: gc,
                intersection_voxels: inter,
                discrepancy_voxels: pc + gc - 2 * inter,
                matched,
            };
            (entry, xor)
        })
        .collect();

    let matched: Vec<f64> = results
        .iter()
        .filter(|(e, _)| e.matched)
        .map(|(e, _)| e.dice)
        .collect();
    let mean_dice =
        (!matched.is_empty()).then(|| matched.iter().sum::<f64>() / matched.len() as f64);

    let mut discrepancy = SegmentationSet::new(
        pred.series_ref.clone(),
        pred.grid().clone(),
        Provenance::now(Source::Discrepancy {
            pred_version: pred.version,
            gt_version: gt.version,
        }),
    );
    for (n, ((entry, xor), (roi, _, _))) in results.iter().zip(&pairs).enumerate() {
        let name = format!("{}-discrepancy", entry.roi_name);
        discrepancy.add_roi(Roi::new(n as u32 + 1, name, roi.color), xor.clone())?;
    }

    let report = EvaluationReport {
        series_id: pred.series_ref.clone(),
        pred_version: pred.version,
        gt_version: gt.version,
        matched_count: matched.len(),
        unmatched_count: results.len() - matched.len(),
        mean_dice,
        entries: results.into_iter().map(|(e, _)| e).collect(),
        discrepancy_version: None,
        created_at: Utc::now(),
    };
    Ok((report, discrepancy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::VolumeGrid;

    fn grid() -> VolumeGrid {
        VolumeGrid::identity(4, 4, 2).unwrap()
    }

    fn mask_of(indices: &[usize]) -> VoxelMask {
        let mut m = VoxelMask::new(grid());
        for &n in indices {
            m.set_linear(n, true);
        }
        m
    }

    #[test]
    fn dice_examples() {
        let a = mask_of(&[0, 1, 2, 3]);
        assert_eq!(dice(&a, &a).unwrap().value, 1.0);
        assert_eq!(dice(&a, &mask_of(&[10, 11])).unwrap().value, 0.0);
        let b = mask_of(&[2, 3, 4, 5]);
        assert_eq!(dice(&a, &b).unwrap().value, 0.5);
        let e = dice(&mask_of(&[]), &mask_of(&[])).unwrap();
        assert_eq!(
            e,
            Dice {
                value: 1.0,
                empty_pair: true
            }
        );
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let other = VoxelMask::new(VolumeGrid::identity(4, 4, 3).unwrap());
        assert!(matches!(
            dice(&mask_of(&[]), &other),
            Err(Error::GridMismatch(_))
        ));
        assert!(matches!(
            discrepancy_map(&mask_of(&[]), &other),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn discrepancy_examples() {
        let a = mask_of(&[0, 5, 9]);
        assert!(discrepancy_map(&a, &a).unwrap().is_empty());
        assert_eq!(discrepancy_map(&a, &mask_of(&[])).unwrap(), a);
        let x = discrepancy_map(&a, &mask_of(&[5, 6])).unwrap();
        assert_eq!(x.iter_set().collect::<Vec<_>>(), vec![0, 6, 9]);
    }

    fn set_with(names: &[(&str, &[usize])]) -> SegmentationSet {
        let mut s = SegmentationSet::new("series", grid(), Provenance::now(Source::Manual));
        for (n, (name, idx)) in names.iter().enumerate() {
            s.add_roi(Roi::new(n as u32 + 1, *name, [1, 2, 3]), mask_of(idx))
                .unwrap();
        }
        s
    }

    #[test]
    fn identical_sets_score_one() {
        let s = set_with(&[("liver", &[1, 2, 3]), ("kidney", &[20, 21])]);
        let (report, disc) = evaluate(&s, &s).unwrap();
        assert_eq!(report.mean_dice, Some(1.0));
        assert!(report.entries.iter().all(|e| e.dice == 1.0 && e.matched));
        assert_eq!(disc.rois().len(), 2);
        assert_eq!(disc.rois()[0].roi.name, "liver-discrepancy");
        assert!(disc.rois().iter().all(|r| r.mask.is_empty()));
    }

    #[test]
    fn unmatched_roi_scores_zero_against_empty() {
        let pred = set_with(&[("liver", &[1, 2]), ("spleen", &[7])]);
        let gt = set_with(&[("liver", &[1, 2]), ("Kidney", &[9])]);
        let (report, disc) = evaluate(&pred, &gt).unwrap();
        let spleen = report.entry("spleen").unwrap();
        assert!(!spleen.matched);
        assert_eq!(spleen.dice, 0.0);
        assert!(!report.entry("Kidney").unwrap().matched);
        assert_eq!(report.matched_count, 1);
        assert_eq!(report.unmatched_count, 2);
        assert_eq!(report.mean_dice, Some(1.0));
        assert_eq!(
            disc.roi_by_name("spleen-discrepancy").unwrap().mask.count(),
            1
        );
    }

    #[test]
    fn name_matching_is_case_sensitive() {
        let pred = set_with(&[("Liver", &[1])]);
        let gt = set_with(&[("liver", &[1])]);
        let (report, _) = evaluate(&pred, &gt).unwrap();
        assert_eq!(report.mean_dice, None);
        assert_eq!(report.unmatched_count, 2);
    }

    #[test]
    fn series_mismatch_is_rejected() {
        let a = set_with(&[]);
        let mut b = set_with(&[]);
        b.series_ref = "other".into();
        assert!(matches!(evaluate(&a, &b), Err(Error::SeriesMismatch(_))));
    }

    #[test]
    fn report_counts_are_consistent() {
        let pred = set_with(&[("liver", &[0, 1, 2, 3, 4])]);
        let gt = set_with(&[("liver", &[3, 4, 5])]);
        let (report, _) = evaluate(&pred, &gt).unwrap();
        let e = report.entry("liver").unwrap();
        assert_eq!(
            (e.pred_voxels, e.gt_voxels, e.intersection_voxels),
            (5, 3, 2)
        );
        assert_eq!(e.discrepancy_voxels, 4);
        assert_eq!(e.dice, 0.5);
    }
}
