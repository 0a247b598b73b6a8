//! Built-in reference model: intensity thresholds plus largest 6-connected
//! component per label.
//!
//! Parameters live in the manifest's `params`:
//!
//! ```json
//! {"thresholds": {"liver": 40, "bone": 300}}
//! ```
//!
//! A voxel with value `v` gets the label of the ROI with the largest
//! threshold `t < v` (ties go to the smaller label). Each label is then
//! reduced to its largest 6-connected component; equal sizes keep the
//! component containing the lowest voxel index.

use std::collections::{BTreeMap, VecDeque};

use serde::Deserialize;

use super::ModelManifest;
use crate::error::{Error, Result};

/// Image reference that selects this model.
pub const THRESHOLD_IMAGE: &str = "builtin:threshold";

#[derive(Debug, Deserialize)]
struct Params {
    thresholds: BTreeMap<String, f64>,
}

/// `(label, threshold)` pairs, checked against the label map.
pub fn threshold_rules(manifest: &ModelManifest) -> Result<Vec<(u16, f64)>> {
    let params: Params = serde_json::from_value(manifest.params.clone())
        .map_err(|e| Error::Argument(format!("threshold model params: {e}")))?;
    let mut rules = Vec::new();
    for (roi, label) in &manifest.label_map {
        let t = params
            .thresholds
            .get(roi)
            .ok_or_else(|| Error::Argument(format!("no threshold for ROI '{roi}'")))?;
        if !t.is_finite() {
            return Err(Error::Argument(format!(
                "threshold for '{roi}' is not finite"
            )));
        }
        rules.push((*label, *t));
    }
    if let Some(extra) = params
        .thresholds
        .keys()
        .find(|k| !manifest.label_map.contains_key(*k))
    {
        return Err(Error::Argument(format!(
            "threshold for unmapped ROI '{extra}'"
        )));
    }
    rules.sort_by_key(|r| r.0);
    Ok(rules)
}

pub fn threshold_labels(volume: &[i16], dims: [usize; 3], rules: &[(u16, f64)]) -> Vec<u16> {
    let mut labels: Vec<u16> = volume
        .iter()
        .map(|&v| {
            let v = f64::from(v);
            let mut best: Option<(u16, f64)> = None;
            for &(label, t) in rules {
                if t < v && best.is_none_or(|(_, bt)| t > bt) {
                    best = Some((label, t));
                }
            }
            best.map_or(0, |(l, _)| l)
        })
        .collect();
    for &(label, _) in rules {
        keep_largest_component(&mut labels, dims, label);
    }
    labels
}

/// Clears every voxel of `label` outside its largest 6-connected component.
pub fn keep_largest_component(labels: &mut [u16], dims: [usize; 3], label: u16) {
    let [nx, ny, nz] = dims;
    let mut component = vec![u32::MAX; labels.len()];
    let mut best: Option<(usize, u32)> = None;
    let mut next_id = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..labels.len() {
        if labels[start] != label || component[start] != u32::MAX {
            continue;
        }
        let id = next_id;
        next_id += 1;
        component[start] = id;
        queue.push_back(start);
        let mut size = 0usize;
        while let Some(n) = queue.pop_front() {
            size += 1;
            let (i, j, k) = (n % nx, (n / nx) % ny, n / (nx * ny));
            let mut visit = |m: usize| {
                if labels[m] == label && component[m] == u32::MAX {
                    component[m] = id;
                    queue.push_back(m);
                }
            };
            if i > 0 {
                visit(n - 1);
            }
            if i + 1 < nx {
                visit(n + 1);
            }
            if j > 0 {
                visit(n - nx);
            }
            if j + 1 < ny {
                visit(n + nx);
            }
            if k > 0 {
                visit(n - nx * ny);
            }
            if k + 1 < nz {
                visit(n + nx * ny);
            }
        }
        if best.is_none_or(|(s, _)| size > s) {
            best = Some((size, id));
        }
    }
    if let Some((_, keep)) = best {
        for (l, c) in labels.iter_mut().zip(&component) {
            if *l == label && *c != keep {
                *l = 0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn largest_component_wins_with_low_index_tie_break() {
        // 5x1x1 row: components {0,1} and {3,4} are both size 2.
        let mut l = vec![1, 1, 0, 1, 1];
        keep_largest_component(&mut l, [5, 1, 1], 1);
        assert_eq!(l, vec![1, 1, 0, 0, 0]);

        let mut l = vec![1, 0, 1, 1, 1];
        keep_largest_component(&mut l, [5, 1, 1], 1);
        assert_eq!(l, vec![0, 0, 1, 1, 1]);
    }

    #[test]
    fn diagonal_neighbours_are_not_connected() {
        // 2x2x1, diagonal pair.
        let mut l = vec![1, 0, 0, 1];
        keep_largest_component(&mut l, [2, 2, 1], 1);
        assert_eq!(l, vec![1, 0, 0, 0]);
        // Slice neighbours are connected.
        let mut l = vec![1, 0, 0, 0, 1, 0, 0, 0];
        keep_largest_component(&mut l, [2, 2, 2], 1);
        assert_eq!(l, vec![1, 0, 0, 0, 1, 0, 0, 0]);
    }

    #[test]
    fn highest_exceeded_threshold_labels_the_voxel() {
        let rules = [(1, 0.0), (2, 100.0)];
        let l = threshold_labels(&[-5, 50, 100, 101], [4, 1, 1], &[(1, 0.0)]);
        assert_eq!(l, vec![0, 1, 1, 1]);
        let l = threshold_labels(&[-5, 50, 100, 101], [4, 1, 1], &rules);
        // Label 1 keeps {1,2}; label 2 is {3}.
        assert_eq!(l, vec![0, 1, 1, 2]);
    }
}
