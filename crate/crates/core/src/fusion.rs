//! Fusing detections in equirectangular pixel space, where x wraps at the
//! seam.
//!
//! A box is `(x, y, bw, bh)` with `x` in `[0, w)`. A box whose right edge
//! `x + bw` passes `w` continues at column 0, so one object straddling the
//! ±180° meridian is a single box rather than two.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::projection::pixel_to_viewport_coord;
use crate::sphere_geom::{dir_to_equirect, vec_to_dir};
use crate::tessellation::Tessellation;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// A detection in equirect pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class_id: u32,
    pub score: f64,
    pub x: f64,
    pub y: f64,
    pub bw: f64,
    pub bh: f64,
}

impl Detection {
    /// Checks the box against a `w` x `h` frame.
    pub fn validate(&self, w: usize, h: usize) -> Result<()> {
        let (wf, hf) = (w as f64, h as f64);
        let finite = [self.score, self.x, self.y, self.bw, self.bh]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("detection field"));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(invalid("score", format!("{} not in [0, 1]", self.score)));
        }
        if !(0.0..wf).contains(&self.x) {
            return Err(invalid("x", format!("{} not in [0, {w})", self.x)));
        }
        if !(self.bw > 0.0 && self.bw <= wf) {
            return Err(invalid("bw", format!("{} not in (0, {w}]", self.bw)));
        }
        if !(0.0..hf).contains(&self.y) || !(self.bh > 0.0) || self.y + self.bh > hf {
            return Err(invalid(
                "y/bh",
                format!("rows [{}, {}) exceed [0, {h}]", self.y, self.y + self.bh),
            ));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.bw * self.bh
    }

    /// Whether the box continues past the right border into column 0.
    pub fn crosses_seam(&self, w: usize) -> bool {
        self.x + self.bw > w as f64
    }
}

/// A detection reported in one viewport's raster coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewportDetection {
    pub viewport_index: usize,
    pub class_id: u32,
    pub score: f64,
    pub x: f64,
    pub y: f64,
    pub bw: f64,
    pub bh: f64,
}

impl ViewportDetection {
    pub fn validate(&self, size: usize) -> Result<()> {
        let s = size as f64;
        if !(0.0..=1.0).contains(&self.score) {
            return Err(invalid("score", format!("{} not in [0, 1]", self.score)));
        }
        let ok = self.x >= 0.0
            && self.y >= 0.0
            && self.bw > 0.0
            && self.bh > 0.0
            && self.x + self.bw <= s
            && self.y + self.bh <= s;
        if !ok {
            return Err(invalid(
                "box",
                format!(
                    "({}, {}, {}, {}) not inside [0, {size}]^2",
                    self.x, self.y, self.bw, self.bh
                ),
            ));
        }
        Ok(())
    }
}

fn interval_overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

/// Length of the intersection of two arcs `[x, x + len)` on a circle of
/// circumference `w`. Both arcs are at most `w` long, so at most the three
/// unrollings `k = -1, 0, 1` of `b` can meet `a`.
fn cyclic_overlap(ax: f64, alen: f64, bx: f64, blen: f64, w: f64) -> f64 {
    [-w, 0.0, w]
        .iter()
        .map(|shift| interval_overlap(ax, ax + alen, bx + shift, bx + shift + blen))
        .sum::<f64>()
        .min(alen.min(blen))
}

/// Intersection over union with x taken modulo `w`.
pub fn cyclic_iou(a: &Detection, b: &Detection, w: usize) -> f64 {
    // fixed argument order keeps the result bitwise symmetric
    let key = |d: &Detection| [d.x, d.bw, d.y, d.bh];
    let (a, b) = if key(a).partial_cmp(&key(b)) == Some(std::cmp::Ordering::Greater) {
        (b, a)
    } else {
        (a, b)
    };
    let ix = cyclic_overlap(a.x, a.bw, b.x, b.bw, w as f64);
    let iy = interval_overlap(a.y, a.y + a.bh, b.y, b.y + b.bh);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// How suppressed detections affect the one that suppresses them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MergeMode {
    /// Suppressed detections are dropped.
    #[default]
    Discard,
    /// The kept box becomes the score-weighted mean (in cyclic coordinates)
    /// of itself and the boxes it suppressed.
    WeightedMean,
}

/// Greedy per-class NMS with cyclic IoU, discarding suppressed boxes.
pub fn spherical_nms(dets: &[Detection], iou_threshold: f64, w: usize) -> Vec<Detection> {
    spherical_nms_with(dets, iou_threshold, w, MergeMode::Discard)
}

/// Greedy per-class NMS. Candidates are visited by score descending, ties
/// broken by class id and then input position; a candidate suppresses every
/// later one of its class whose cyclic IoU exceeds `iou_threshold`.
pub fn spherical_nms_with(
    dets: &[Detection],
    iou_threshold: f64,
    w: usize,
    mode: MergeMode,
) -> Vec<Detection> {
    nms_impl(dets, iou_threshold, |a, b| cyclic_iou(a, b, w), w, mode)
}

/// The same greedy procedure with textbook planar IoU, ignoring the seam.
pub fn planar_nms(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    nms_impl(dets, iou_threshold, planar_iou, 0, MergeMode::Discard)
}

pub fn planar_iou(a: &Detection, b: &Detection) -> f64 {
    let ix = interval_overlap(a.x, a.x + a.bw, b.x, b.x + b.bw);
    let iy = interval_overlap(a.y, a.y + a.bh, b.y, b.y + b.bh);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

fn nms_impl(
    dets: &[Detection],
    iou_threshold: f64,
    iou: impl Fn(&Detection, &Detection) -> f64,
    w: usize,
    mode: MergeMode,
) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| {
        dets[j]
            .score
            .partial_cmp(&dets[i].score)
            .unwrap_or(Ordering::Equal)
            .then(dets[i].class_id.cmp(&dets[j].class_id))
            .then(i.cmp(&j))
    });
    let mut suppressed = vec![false; dets.len()];
    let mut kept = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        let mut group = vec![i];
        for &j in &order[pos + 1..] {
            if suppressed[j] || dets[j].class_id != dets[i].class_id {
                continue;
            }
            if iou(&dets[i], &dets[j]) > iou_threshold {
                suppressed[j] = true;
                group.push(j);
            }
        }
        kept.push(match mode {
            MergeMode::Discard => dets[i],
            MergeMode::WeightedMean => merge_group(dets, &group, w),
        });
    }
    kept
}

fn merge_group(dets: &[Detection], group: &[usize], w: usize) -> Detection {
    let lead = dets[group[0]];
    if group.len() == 1 {
        return lead;
    }
    let wf = w as f64;
    let lead_cx = lead.x + lead.bw / 2.0;
    let total: f64 = group.iter().map(|&i| dets[i].score).sum();
    if total <= 0.0 {
        return lead;
    }
    let (mut cx, mut cy, mut bw, mut bh) = (0.0, 0.0, 0.0, 0.0);
    for &i in group {
        let d = &dets[i];
        let s = d.score / total;
        // unroll each center to the copy nearest the lead's center
        let mut c = d.x + d.bw / 2.0;
        c += ((lead_cx - c) / wf).round() * wf;
        cx += s * c;
        cy += s * (d.y + d.bh / 2.0);
        bw += s * d.bw;
        bh += s * d.bh;
    }
    Detection {
        x: (cx - bw / 2.0).rem_euclid(wf) % wf,
        y: cy - bh / 2.0,
        bw,
        bh,
        ..lead
    }
}

/// Rotates every box about the polar axis by `delta_lon` degrees.
pub fn rotate_detections(dets: &[Detection], delta_lon: f64, w: usize) -> Vec<Detection> {
    let wf = w as f64;
    let shift = delta_lon / 360.0 * wf;
    dets.iter()
        .map(|d| {
            let mut x = (d.x + shift).rem_euclid(wf);
            if x >= wf {
                x = 0.0;
            }
            Detection { x, ..*d }
        })
        .collect()
}

/// Smallest arc of the circle `[0, w)` containing all `xs`, as
/// `(start, length)`.
fn minimal_cyclic_interval(xs: &mut [f64], w: f64) -> (f64, f64) {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let n = xs.len();
    // the arc starts right after the widest gap between neighbours
    let mut best_gap = xs[0] + w - xs[n - 1];
    let mut start = 0;
    for i in 1..n {
        let gap = xs[i] - xs[i - 1];
        if gap > best_gap {
            best_gap = gap;
            start = i;
        }
    }
    (xs[start], w - best_gap)
}

/// Maps a viewport detection into equirect pixel space by bounding the
/// images of its four corners and four edge midpoints.
pub fn lift_detection(
    vd: &ViewportDetection,
    t: &Tessellation,
    w: usize,
    h: usize,
) -> Result<Detection> {
    let vp = t.viewport(vd.viewport_index)?;
    vd.validate(vp.size)?;
    let frame = vp.frame();
    let (x0, x1) = (vd.x, vd.x + vd.bw);
    let (y0, y1) = (vd.y, vd.y + vd.bh);
    let (xm, ym) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    let samples = [
        (x0, y0),
        (xm, y0),
        (x1, y0),
        (x1, ym),
        (x1, y1),
        (xm, y1),
        (x0, y1),
        (x0, ym),
    ];
    let mut xs = Vec::with_capacity(8);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for (px, py) in samples {
        let c = pixel_to_viewport_coord(px, py, vp.size);
        let e = dir_to_equirect(vec_to_dir(frame.unproject(c)), w, h);
        xs.push(e.x);
        ymin = ymin.min(e.y);
        ymax = ymax.max(e.y);
    }
    let wf = w as f64;
    let (start, len) = minimal_cyclic_interval(&mut xs, wf);
    if len >= wf / 2.0 {
        return Err(Error::DegenerateBox {
            span_deg: len / wf * 360.0,
        });
    }
    let hf = h as f64;
    let y = ymin.clamp(0.0, hf);
    Ok(Detection {
        class_id: vd.class_id,
        score: vd.score,
        x: start,
        y,
        bw: len,
        bh: (ymax.min(hf) - y),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere_geom::{equirect_to_dir, gnomonic_forward, EquirectCoord};
    use crate::tessellation::make_tessellation;

    fn det(class_id: u32, score: f64, x: f64, y: f64, bw: f64, bh: f64) -> Detection {
        Detection {
            class_id,
            score,
            x,
            y,
            bw,
            bh,
        }
    }

    #[test]
    fn validate_boxes() {
        assert!(det(0, 0.5, 990.0, 10.0, 20.0, 10.0).validate(1000, 500).is_ok());
        assert!(det(0, 1.5, 10.0, 10.0, 20.0, 10.0).validate(1000, 500).is_err());
        assert!(det(0, 0.5, 1000.0, 10.0, 20.0, 10.0).validate(1000, 500).is_err());
        assert!(det(0, 0.5, 10.0, 495.0, 20.0, 10.0).validate(1000, 500).is_err());
        assert!(det(0, 0.5, 10.0, 10.0, 1001.0, 10.0).validate(1000, 500).is_err());
        assert!(det(0, 0.5, 10.0, 10.0, 0.0, 10.0).validate(1000, 500).is_err());
    }

    #[test]
    fn iou_examples() {
        let a = det(0, 0.9, 100.0, 50.0, 40.0, 30.0);
        assert_eq!(cyclic_iou(&a, &a, 1000), 1.0);
        let b = det(0, 0.9, 240.0, 50.0, 40.0, 30.0);
        assert_eq!(cyclic_iou(&a, &b, 1000), 0.0);

        let a = det(0, 0.9, 990.0, 10.0, 20.0, 10.0);
        let b = det(0, 0.9, 0.0, 10.0, 10.0, 10.0);
        assert_eq!(cyclic_iou(&a, &b, 1000), 0.5);
        assert_eq!(cyclic_iou(&b, &a, 1000), 0.5);
        assert_eq!(planar_iou(&a, &b), 0.0);
    }

    #[test]
    fn iou_counts_both_sides_of_a_wide_overlap() {
        // a covers [900, 1100) = [900, 1000) u [0, 100); b covers [50, 950)
        let a = det(0, 0.9, 900.0, 0.0, 200.0, 10.0);
        let b = det(0, 0.9, 50.0, 0.0, 900.0, 10.0);
        let inter = 100.0 * 10.0;
        let expected = inter / (2000.0 + 9000.0 - inter);
        assert!((cyclic_iou(&a, &b, 1000) - expected).abs() < 1e-15);
    }

    #[test]
    fn nms_examples() {
        let a = det(0, 0.9, 10.0, 10.0, 20.0, 20.0);
        assert_eq!(spherical_nms(&[a], 0.5, 100), vec![a]);
        let b = Detection { score: 0.8, ..a };
        assert_eq!(spherical_nms(&[b, a], 0.5, 100), vec![a]);
        // different classes never suppress each other
        let c = Detection { class_id: 1, ..b };
        assert_eq!(spherical_nms(&[c, a], 0.5, 100), vec![a, c]);
        assert!(spherical_nms(&[], 0.5, 100).is_empty());
    }

    #[test]
    fn nms_tie_breaking() {
        let a = det(2, 0.5, 10.0, 10.0, 20.0, 20.0);
        let b = det(1, 0.5, 60.0, 10.0, 20.0, 20.0);
        let c = det(1, 0.5, 11.0, 10.0, 20.0, 20.0);
        let d = det(1, 0.5, 12.0, 10.0, 20.0, 20.0);
        // class 1 first, then input order: b, c (d suppressed by c), then a
        assert_eq!(spherical_nms(&[a, b, c, d], 0.5, 1000), vec![b, c, a]);
    }

    #[test]
    fn nms_seam_pair() {
        let w = 1000;
        let left = det(0, 0.9, 0.0, 100.0, 30.0, 40.0);
        let right = det(0, 0.8, 985.0, 100.0, 45.0, 40.0);
        assert!(cyclic_iou(&left, &right, w) > 0.5);
        assert_eq!(spherical_nms(&[left, right], 0.5, w), vec![left]);
        assert_eq!(planar_nms(&[left, right], 0.5).len(), 2);
    }

    #[test]
    fn merge_mode_averages_across_seam() {
        let w = 1000;
        let a = det(0, 0.5, 990.0, 100.0, 20.0, 40.0);
        let b = det(0, 0.5, 994.0, 100.0, 20.0, 40.0);
        let out = spherical_nms_with(&[a, b], 0.3, w, MergeMode::WeightedMean);
        assert_eq!(out.len(), 1);
        assert!((out[0].x - 992.0).abs() < 1e-9);

        let a = det(0, 0.5, 995.0, 100.0, 10.0, 40.0);
        let b = det(0, 0.5, 1.0, 100.0, 10.0, 40.0);
        let out = spherical_nms_with(&[a, b], 0.1, w, MergeMode::WeightedMean);
        assert_eq!(out.len(), 1);
        assert!((out[0].x - 998.0).abs() < 1e-9, "{}", out[0].x);
    }

    #[test]
    fn rotate_examples() {
        let dets = vec![det(0, 0.9, 990.0, 10.0, 20.0, 10.0), det(1, 0.3, 5.0, 1.0, 1.0, 1.0)];
        assert_eq!(rotate_detections(&dets, 0.0, 1000), dets);
        assert_eq!(rotate_detections(&dets, 360.0, 1000), dets);
        let r = rotate_detections(&dets, 36.0, 1000);
        assert_eq!(r[0].x, 90.0);
        assert_eq!(r[1].x, 105.0);
        let r = rotate_detections(&dets, -36.0, 1000);
        assert_eq!(r[1].x, 905.0);
    }

    #[test]
    fn minimal_interval_handles_wrap() {
        let mut xs = vec![995.0, 2.0, 999.0, 5.0];
        assert_eq!(minimal_cyclic_interval(&mut xs, 1000.0), (995.0, 10.0));
        let mut xs = vec![10.0, 20.0, 15.0];
        assert_eq!(minimal_cyclic_interval(&mut xs, 1000.0), (10.0, 10.0));
    }

    #[test]
    fn lift_full_viewport_box_is_centered() {
        let t = make_tessellation(1, 24.0, 64).unwrap();
        let vd = ViewportDetection {
            viewport_index: 0,
            class_id: 3,
            score: 0.7,
            x: 0.0,
            y: 0.0,
            bw: 64.0,
            bh: 64.0,
        };
        let d = lift_detection(&vd, &t, 1024, 512).unwrap();
        assert!((d.x + d.bw / 2.0 - 512.0).abs() < 1e-9);
        assert!((d.y + d.bh / 2.0 - 256.0).abs() < 1e-9);
        assert!((d.bw - 24.0 / 360.0 * 1024.0).abs() < 1e-9);
        assert_eq!((d.class_id, d.score), (3, 0.7));
    }

    #[test]
    fn lift_at_seam() {
        let c = crate::sphere_geom::SphereDir::new(-180.0, 0.0).unwrap();
        let t = Tessellation::from_centers(&[c], 24.0, 64).unwrap();
        let vd = ViewportDetection {
            viewport_index: 0,
            class_id: 0,
            score: 0.5,
            x: 31.0,
            y: 31.0,
            bw: 2.0,
            bh: 2.0,
        };
        let (w, h) = (1024, 512);
        let d = lift_detection(&vd, &t, w, h).unwrap();
        assert!(d.crosses_seam(w));
        let center = EquirectCoord::new(d.x + d.bw / 2.0, d.y + d.bh / 2.0);
        let back = dir_to_equirect(equirect_to_dir(center, w, h), w, h);
        let target = dir_to_equirect(c, w, h);
        let dx = (back.x - target.x).abs().min(w as f64 - (back.x - target.x).abs());
        assert!(dx < 0.5 && (back.y - target.y).abs() < 0.5);
        let _ = gnomonic_forward(c, t.viewport(0).unwrap()).unwrap();
    }

    #[test]
    fn lift_rejects_bad_input() {
        let t = make_tessellation(1, 24.0, 64).unwrap();
        let mut vd = ViewportDetection {
            viewport_index: 1,
            class_id: 0,
            score: 0.5,
            x: 0.0,
            y: 0.0,
            bw: 8.0,
            bh: 8.0,
        };
        assert!(matches!(
            lift_detection(&vd, &t, 100, 50),
            Err(Error::ViewportIndex { .. })
        ));
        vd.viewport_index = 0;
        vd.bw = 70.0;
        assert!(lift_detection(&vd, &t, 100, 50).is_err());
    }

    #[test]
    fn lift_rejects_box_around_pole() {
        let c = crate::sphere_geom::SphereDir::new(0.0, 90.0).unwrap();
        let t = Tessellation::from_centers(&[c], 24.0, 64).unwrap();
        let vd = ViewportDetection {
            viewport_index: 0,
            class_id: 0,
            score: 0.5,
            x: 16.0,
            y: 16.0,
            bw: 32.0,
            bh: 32.0,
        };
        assert!(matches!(
            lift_detection(&vd, &t, 1024, 512),
            Err(Error::DegenerateBox { .. })
        ));
    }
}
