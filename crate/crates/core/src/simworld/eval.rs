//! Association accuracy and box-overlap label assignment.

use serde::{Deserialize, Serialize};

use crate::error::{HopmapError, Result};
use crate::ingest::{FrameSet, SegmentRecord};
use crate::vector::dot;

/// Minimum box overlap for a segment to inherit an object's labels.
pub const DEFAULT_MIN_IOU: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssociationScores {
    pub instance_acc: f64,
    pub category_acc: f64,
    pub n_queries: usize,
}

fn labels(r: &SegmentRecord) -> Result<(i64, i64)> {
    match (r.gt_instance, r.gt_category) {
        (Some(i), Some(c)) => Ok((i, c)),
        _ => Err(HopmapError::Validation(format!(
            "segment {} of frame {} has no ground-truth labels",
            r.segment_id, r.frame_id
        ))),
    }
}

/// For each query view, the nearest map view by descriptor (first in
/// frame-then-segment order on ties) decides whether the instance and the
/// category were recognized.
pub fn eval_association(map_views: &FrameSet, query_views: &FrameSet) -> Result<AssociationScores> {
    let map: Vec<(&SegmentRecord, (i64, i64))> = map_views
        .iter_records()
        .map(|r| labels(r).map(|l| (r, l)))
        .collect::<Result<_>>()?;
    let queries: Vec<(&SegmentRecord, (i64, i64))> = query_views
        .iter_records()
        .map(|r| labels(r).map(|l| (r, l)))
        .collect::<Result<_>>()?;
    if map.is_empty() {
        return Err(HopmapError::EmptyMap);
    }

    let (mut inst, mut cat) = (0usize, 0usize);
    for (q, (qi, qc)) in &queries {
        let mut best = (f64::NEG_INFINITY, (0, 0));
        for (m, l) in &map {
            let s = dot(&q.descriptor, &m.descriptor);
            if s > best.0 {
                best = (s, *l);
            }
        }
        let (mi, mc) = best.1;
        inst += usize::from(mi == *qi);
        cat += usize::from(mc == *qc);
    }
    let n = queries.len();
    let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    Ok(AssociationScores {
        instance_acc: frac(inst),
        category_acc: frac(cat),
        n_queries: n,
    })
}

/// Intersection over union of two `[x0, y0, x1, y1]` boxes.
pub fn bbox_iou(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let iw = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let ih = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    let area = |r: &[f64; 4]| (r[2] - r[0]).max(0.0) * (r[3] - r[1]).max(0.0);
    let union = area(a) + area(b) - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// A labeled ground-truth box in one frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledBox {
    pub frame_id: usize,
    pub bbox: [f64; 4],
    pub instance: i64,
    pub category: i64,
}

/// Gives each segment the labels of the best-overlapping box in its frame
/// when that overlap reaches `min_iou`; otherwise its labels are cleared.
/// Returns how many segments were labeled.
pub fn assign_instances_by_iou(fs: &mut FrameSet, boxes: &[LabeledBox], min_iou: f64) -> usize {
    let mut assigned = 0;
    for r in fs.records.iter_mut().flatten() {
        let best = boxes
            .iter()
            .filter(|b| b.frame_id == r.frame_id)
            .map(|b| (bbox_iou(&r.bbox, &b.bbox), b))
            .fold(None::<(f64, &LabeledBox)>, |acc, (iou, b)| match acc {
                Some((best, _)) if iou <= best => acc,
                _ => Some((iou, b)),
            });
        match best {
            Some((iou, b)) if iou >= min_iou => {
                r.gt_instance = Some(b.instance);
                r.gt_category = Some(b.category);
                assigned += 1;
            }
            _ => {
                r.gt_instance = None;
                r.gt_category = None;
            }
        }
    }
    assigned
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iou_basics() {
        let a = [0.0, 0.0, 2.0, 2.0];
        assert_eq!(bbox_iou(&a, &a), 1.0);
        assert_eq!(bbox_iou(&a, &[2.0, 2.0, 3.0, 3.0]), 0.0);
        // 1x2 overlap over 4 + 4 - 2
        assert!((bbox_iou(&a, &[1.0, 0.0, 3.0, 2.0]) - 2.0 / 6.0).abs() < 1e-15);
    }
}
