//! Target bounding boxes for densely azimuth-sampled chip sets: an
//! azimuth-aligned composite image per (class, incidence), a reference
//! minimum-area rotated rectangle from its thresholded mask, and per-sample
//! localization by minimizing a bright-bottom pixel loss plus a center
//! displacement penalty.

use thiserror::Error;

use crate::data::SarSample;
use crate::geometry::{clip_polygons, Polygon3, Vec3};
use crate::imaging::MagnitudeImage;

#[derive(Debug, Error)]
pub enum BBoxError {
    #[error("empty sample group")]
    EmptyGroup,
    #[error("no foreground above threshold {threshold}")]
    NoForeground { threshold: f64 },
}

/// Axis dimensions, center and rotation of an oriented rectangle, in pixels
/// and radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatedRect {
    pub center_x: f64,
    pub center_y: f64,
    pub width: f64,
    pub height: f64,
    pub rotation: f64,
}

impl RotatedRect {
    /// Corner points, counterclockwise.
    pub fn corners(&self) -> [(f64, f64); 4] {
        let (s, c) = self.rotation.sin_cos();
        let (hw, hh) = (self.width / 2.0, self.height / 2.0);
        let rot = |x: f64, y: f64| {
            (
                self.center_x + x * c - y * s,
                self.center_y + x * s + y * c,
            )
        };
        [
            rot(-hw, -hh),
            rot(hw, -hh),
            rot(hw, hh),
            rot(-hw, hh),
        ]
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    /// Point-in-rectangle test in the rect's own frame.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.rotation.sin_cos();
        let dx = x - self.center_x;
        let dy = y - self.center_y;
        let local_x = dx * c + dy * s;
        let local_y = -dx * s + dy * c;
        local_x.abs() <= self.width / 2.0 && local_y.abs() <= self.height / 2.0
    }

    /// Chip-frame vertical extremes (min y, max y over the corners).
    pub fn vertical_extent(&self) -> (f64, f64) {
        let ys = self.corners().map(|(_, y)| y);
        let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

/// Intersection-over-union of two rotated rectangles via convex clipping.
pub fn rect_iou(a: &RotatedRect, b: &RotatedRect) -> f64 {
    let poly = |r: &RotatedRect| {
        Polygon3::new(
            r.corners()
                .iter()
                .map(|&(x, y)| Vec3::new(x, y, 0.0))
                .collect(),
        )
        .expect("rect is a valid polygon")
    };
    let inter = clip_polygons(&poly(a), &poly(b))
        .expect("rects are coplanar")
        .map(|p| p.area())
        .unwrap_or(0.0);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Localization hyperparameters (study values as defaults).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBoxConfig {
    /// Composite binarization threshold delta in [0, 1].
    pub threshold: f64,
    /// Vertical weighting exponent alpha.
    pub vertical_exponent: f64,
    /// Distance penalty exponent beta.
    pub distance_exponent: f64,
    /// Distance penalty weight lambda.
    pub distance_weight: f64,
    /// Shift box half-extents (x_max, y_max) in pixels.
    pub max_shift: (f64, f64),
}

impl Default for BBoxConfig {
    fn default() -> Self {
        Self {
            threshold: 0.7,
            vertical_exponent: 1.5,
            distance_exponent: 0.5,
            distance_weight: 0.1,
            max_shift: (32.0, 32.0),
        }
    }
}

/// Rotate a chip by `angle` about its center with bilinear resampling
/// (out-of-frame samples are zero).
pub fn rotate_chip(chip: &MagnitudeImage, angle: f64) -> MagnitudeImage {
    let mut out = MagnitudeImage::zeros(chip.rows, chip.cols);
    let cy = (chip.rows as f64 - 1.0) / 2.0;
    let cx = (chip.cols as f64 - 1.0) / 2.0;
    let (s, c) = angle.sin_cos();
    for r in 0..chip.rows {
        for col in 0..chip.cols {
            // Inverse mapping: source position of this output pixel.
            let dy = r as f64 - cy;
            let dx = col as f64 - cx;
            let sx = cx + dx * c + dy * s;
            let sy = cy - dx * s + dy * c;
            if sx < 0.0 || sy < 0.0 || sx > (chip.cols - 1) as f64 || sy > (chip.rows - 1) as f64
            {
                continue;
            }
            let x0 = sx.floor() as usize;
            let y0 = sy.floor() as usize;
            let fx = sx - x0 as f64;
            let fy = sy - y0 as f64;
            let x1 = (x0 + 1).min(chip.cols - 1);
            let y1 = (y0 + 1).min(chip.rows - 1);
            let v = chip.at(y0, x0) * (1.0 - fx) * (1.0 - fy)
                + chip.at(y0, x1) * fx * (1.0 - fy)
                + chip.at(y1, x0) * (1.0 - fx) * fy
                + chip.at(y1, x1) * fx * fy;
            out.data[r * chip.cols + col] = v;
        }
    }
    out
}

/// Azimuth-aligned composite: rotate each chip by the negative of its azimuth
/// aspect angle, average, log-scale, and min-max normalize to [0, 1].
pub fn composite_image(samples: &[&SarSample]) -> Result<MagnitudeImage, BBoxError> {
    let first = samples.first().ok_or(BBoxError::EmptyGroup)?;
    let (rows, cols) = (first.chip.rows, first.chip.cols);
    let mut acc = vec![0.0; rows * cols];
    for s in samples {
        let rotated = rotate_chip(&s.chip, -s.azimuth_deg.to_radians());
        for (a, v) in acc.iter_mut().zip(&rotated.data) {
            *a += v;
        }
    }
    let n = samples.len() as f64;
    let mut log: Vec<f64> = acc.iter().map(|v| (v / n + 1.0).ln()).collect();
    let lo = log.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = log.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        for v in &mut log {
            *v = (*v - lo) / (hi - lo);
        }
    } else {
        log.fill(0.0);
    }
    Ok(MagnitudeImage {
        rows,
        cols,
        data: log,
    })
}

/// Threshold the composite, find the largest 8-connected foreground
/// component, and fit its minimum-area rotated rectangle (convex hull plus
/// rotating calipers).
pub fn reference_rect(
    composite: &MagnitudeImage,
    threshold: f64,
) -> Result<RotatedRect, BBoxError> {
    let (rows, cols) = (composite.rows, composite.cols);
    let mask: Vec<bool> = composite.data.iter().map(|&v| v >= threshold).collect();
    // Largest connected component by flood fill.
    let mut labels = vec![0u32; rows * cols];
    let mut best: (u32, usize) = (0, 0);
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..rows * cols {
        if !mask[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        let mut size = 0usize;
        stack.push(start);
        labels[start] = next;
        while let Some(at) = stack.pop() {
            size += 1;
            let (r, c) = (at / cols, at % cols);
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if nr < 0 || nc < 0 || nr >= rows as i64 || nc >= cols as i64 {
                        continue;
                    }
                    let idx = nr as usize * cols + nc as usize;
                    if mask[idx] && labels[idx] == 0 {
                        labels[idx] = next;
                        stack.push(idx);
                    }
                }
            }
        }
        if size > best.1 {
            best = (next, size);
        }
    }
    if best.1 == 0 {
        return Err(BBoxError::NoForeground { threshold });
    }
    let points: Vec<(f64, f64)> = (0..rows * cols)
        .filter(|&i| labels[i] == best.0)
        .map(|i| ((i % cols) as f64, (i / cols) as f64))
        .collect();
    Ok(min_area_rect(&points))
}

/// Minimum-area oriented rectangle of a point set.
fn min_area_rect(points: &[(f64, f64)]) -> RotatedRect {
    let hull = convex_hull(points);
    if hull.len() == 1 {
        return RotatedRect {
            center_x: hull[0].0,
            center_y: hull[0].1,
            width: 1.0,
            height: 1.0,
            rotation: 0.0,
        };
    }
    let mut best: Option<RotatedRect> = None;
    for i in 0..hull.len() {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        let angle = (b.1 - a.1).atan2(b.0 - a.0);
        let (s, c) = angle.sin_cos();
        let (mut min_u, mut max_u) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut min_v, mut max_v) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in &hull {
            let u = p.0 * c + p.1 * s;
            let v = -p.0 * s + p.1 * c;
            min_u = min_u.min(u);
            max_u = max_u.max(u);
            min_v = min_v.min(v);
            max_v = max_v.max(v);
        }
        let w = (max_u - min_u).max(1.0);
        let h = (max_v - min_v).max(1.0);
        let cu = (min_u + max_u) / 2.0;
        let cv = (min_v + max_v) / 2.0;
        let rect = RotatedRect {
            center_x: cu * c - cv * s,
            center_y: cu * s + cv * c,
            width: w,
            height: h,
            rotation: angle,
        };
        if best.map(|r| rect.area() < r.area()).unwrap_or(true) {
            best = Some(rect);
        }
    }
    best.unwrap()
}

/// Andrew monotone-chain convex hull.
fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len() * 2);
    for &p in pts.iter().chain(pts.iter().rev().skip(1)) {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Per-sample preprocessing before localization: log scale, min-max
/// normalize, zero out below 0.5, gamma-correct at 1.5.
pub fn preprocess_for_localization(chip: &MagnitudeImage) -> MagnitudeImage {
    let mut log: Vec<f64> = chip.data.iter().map(|&v| (v + 1.0).ln()).collect();
    let lo = log.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = log.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        for v in &mut log {
            *v = (*v - lo) / (hi - lo);
            *v = if *v < 0.5 { 0.0 } else { v.powf(1.5) };
        }
    } else {
        log.fill(0.0);
    }
    MagnitudeImage {
        rows: chip.rows,
        cols: chip.cols,
        data: log,
    }
}

/// Combined localization loss at a candidate center shift.
fn shift_loss(
    image: &MagnitudeImage,
    reference: &RotatedRect,
    rotation: f64,
    shift: (f64, f64),
    cfg: &BBoxConfig,
) -> f64 {
    let rect = RotatedRect {
        center_x: reference.center_x + shift.0,
        center_y: reference.center_y + shift.1,
        rotation,
        ..*reference
    };
    let (y_min, y_max) = rect.vertical_extent();
    let span = (y_max - y_min).max(1e-9);
    let mut pixel_sum = 0.0;
    let mut count = 0usize;
    let corners = rect.corners();
    let c_lo = corners
        .iter()
        .map(|c| c.0)
        .fold(f64::INFINITY, f64::min)
        .floor()
        .max(0.0) as usize;
    let c_hi = (corners
        .iter()
        .map(|c| c.0)
        .fold(f64::NEG_INFINITY, f64::max)
        .ceil() as usize)
        .min(image.cols - 1);
    let r_lo = y_min.floor().max(0.0) as usize;
    let r_hi = (y_max.ceil() as usize).min(image.rows - 1);
    for r in r_lo..=r_hi {
        for c in c_lo..=c_hi {
            if rect.contains(c as f64, r as f64) {
                count += 1;
                let d = ((r as f64 - y_min) / span).clamp(0.0, 1.0);
                pixel_sum += image.at(r, c) * d.powf(cfg.vertical_exponent);
            }
        }
    }
    let pixel_loss = if count == 0 {
        0.0
    } else {
        -pixel_sum / count as f64
    };
    let d_max = (cfg.max_shift.0.powi(2) + cfg.max_shift.1.powi(2)).sqrt();
    let dist_loss = ((shift.0 * shift.0 + shift.1 * shift.1) / d_max)
        .powf(cfg.distance_exponent);
    pixel_loss + cfg.distance_weight * dist_loss
}

fn best_shift<I: Iterator<Item = (i64, i64)>>(
    image: &MagnitudeImage,
    reference: &RotatedRect,
    rotation: f64,
    cfg: &BBoxConfig,
    candidates: I,
) -> ((i64, i64), f64) {
    let mut best = ((0, 0), f64::INFINITY);
    for (dx, dy) in candidates {
        let loss = shift_loss(image, reference, rotation, (dx as f64, dy as f64), cfg);
        // Strict ordering with a deterministic (dx, dy) tie-break.
        if loss < best.1 || (loss == best.1 && (dx, dy) < best.0) {
            best = ((dx, dy), loss);
        }
    }
    best
}

fn grid(x_max: i64, y_max: i64, stride: i64) -> impl Iterator<Item = (i64, i64)> {
    let xs: Vec<i64> = (-x_max..=x_max).step_by(stride as usize).collect();
    let ys: Vec<i64> = (-y_max..=y_max).step_by(stride as usize).collect();
    xs.into_iter()
        .flat_map(move |x| ys.clone().into_iter().map(move |y| (x, y)))
}

/// Localize the reference rectangle in one sample: rotation comes from the
/// sample's azimuth, the center from a coarse-to-fine integer grid search
/// (stride 4 then 1) over the shift box.
pub fn localize_box(sample: &SarSample, reference: &RotatedRect, cfg: &BBoxConfig) -> RotatedRect {
    let image = preprocess_for_localization(&sample.chip);
    let rotation = sample.azimuth_deg.to_radians();
    let (x_max, y_max) = (cfg.max_shift.0 as i64, cfg.max_shift.1 as i64);

    // Coarse pass at stride 4, keeping several cells to refine.
    let mut coarse: Vec<((i64, i64), f64)> = grid(x_max, y_max, 4)
        .map(|(dx, dy)| {
            (
                (dx, dy),
                shift_loss(&image, reference, rotation, (dx as f64, dy as f64), cfg),
            )
        })
        .collect();
    coarse.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    let mut best = ((0i64, 0i64), f64::INFINITY);
    for &((cx, cy), _) in coarse.iter().take(5) {
        let refine = (cx - 3..=cx + 3)
            .flat_map(|x| (cy - 3..=cy + 3).map(move |y| (x, y)))
            .filter(|&(x, y)| x.abs() <= x_max && y.abs() <= y_max);
        let cand = best_shift(&image, reference, rotation, cfg, refine);
        if cand.1 < best.1 || (cand.1 == best.1 && cand.0 < best.0) {
            best = cand;
        }
    }
    RotatedRect {
        center_x: reference.center_x + best.0 .0 as f64,
        center_y: reference.center_y + best.0 .1 as f64,
        rotation,
        ..*reference
    }
}

/// Exhaustive integer grid search over the whole shift box; the declared
/// oracle for the coarse-to-fine minimizer.
pub fn localize_box_exhaustive(
    sample: &SarSample,
    reference: &RotatedRect,
    cfg: &BBoxConfig,
) -> RotatedRect {
    let image = preprocess_for_localization(&sample.chip);
    let rotation = sample.azimuth_deg.to_radians();
    let (x_max, y_max) = (cfg.max_shift.0 as i64, cfg.max_shift.1 as i64);
    let best = best_shift(&image, reference, rotation, cfg, grid(x_max, y_max, 1));
    RotatedRect {
        center_x: reference.center_x + best.0 .0 as f64,
        center_y: reference.center_y + best.0 .1 as f64,
        rotation,
        ..*reference
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng as _, SeedableRng as _};
    use rand_chacha::ChaCha8Rng;

    fn sample_with(chip: MagnitudeImage, azimuth_deg: f64) -> SarSample {
        SarSample {
            chip,
            incidence_deg: 75.0,
            azimuth_deg,
            class_label: "t".into(),
            source_id: "s".into(),
        }
    }

    fn paint_rect(chip: &mut MagnitudeImage, rect: &RotatedRect, level: f64) {
        for r in 0..chip.rows {
            for c in 0..chip.cols {
                if rect.contains(c as f64, r as f64) {
                    chip.data[r * chip.cols + c] = level;
                }
            }
        }
    }

    #[test]
    fn composite_of_single_zero_azimuth_sample_is_its_normalization() {
        let mut chip = MagnitudeImage::zeros(16, 16);
        chip.data[5 * 16 + 7] = 9.0;
        let s = sample_with(chip.clone(), 0.0);
        let comp = composite_image(&[&s]).unwrap();
        assert_relative_eq!(comp.at(5, 7), 1.0);
        assert_eq!(comp.at(0, 0), 0.0);
        // Mean of two identical chips equals one.
        let comp2 = composite_image(&[&s, &s]).unwrap();
        assert_eq!(comp.data, comp2.data);
        assert!(matches!(composite_image(&[]), Err(BBoxError::EmptyGroup)));
    }

    #[test]
    fn composite_of_isotropic_blob_is_rotation_invariant() {
        // A centered Gaussian blob composited over many azimuths stays the
        // same blob within interpolation tolerance.
        let mut chip = MagnitudeImage::zeros(64, 64);
        for r in 0..64 {
            for c in 0..64 {
                let d2 = ((r as f64 - 31.5).powi(2) + (c as f64 - 31.5).powi(2)) / 144.0;
                chip.data[r * 64 + c] = 5.0 * (-d2).exp();
            }
        }
        let samples: Vec<SarSample> = (0..12)
            .map(|i| sample_with(chip.clone(), i as f64 * 30.0))
            .collect();
        let refs: Vec<&SarSample> = samples.iter().collect();
        let comp = composite_image(&refs).unwrap();
        let base = composite_image(&[&samples[0]]).unwrap();
        let mut max_err: f64 = 0.0;
        for r in 8..56 {
            for c in 8..56 {
                max_err = max_err.max((comp.at(r, c) - base.at(r, c)).abs());
            }
        }
        assert!(max_err < 1e-3, "max composite error {max_err}");
    }

    #[test]
    fn reference_rect_recovers_axis_aligned_rectangle() {
        let mut comp = MagnitudeImage::zeros(64, 64);
        for r in 20..33 {
            for c in 12..45 {
                comp.data[r * 64 + c] = 1.0;
            }
        }
        let rect = reference_rect(&comp, 0.7).unwrap();
        assert_relative_eq!(rect.center_x, 28.0, epsilon = 1.0);
        assert_relative_eq!(rect.center_y, 26.0, epsilon = 1.0);
        let (w, h) = (rect.width.max(rect.height), rect.width.min(rect.height));
        assert_relative_eq!(w, 32.0, epsilon = 1.5);
        assert_relative_eq!(h, 12.0, epsilon = 1.5);

        let dark = MagnitudeImage::zeros(8, 8);
        assert!(matches!(
            reference_rect(&dark, 0.5),
            Err(BBoxError::NoForeground { .. })
        ));
    }

    #[test]
    fn reference_rect_recovers_rotation() {
        let mut comp = MagnitudeImage::zeros(96, 96);
        let truth = RotatedRect {
            center_x: 48.0,
            center_y: 48.0,
            width: 40.0,
            height: 16.0,
            rotation: 30f64.to_radians(),
        };
        paint_rect(&mut comp, &truth, 1.0);
        let rect = reference_rect(&comp, 0.5).unwrap();
        // Rectangle rotation is defined modulo 90 degrees.
        let got = rect.rotation.to_degrees().rem_euclid(90.0);
        let want = 30.0;
        let err = (got - want).abs().min((got - want - 90.0).abs());
        assert!(err < 2.0, "rotation {got} vs {want}");
        assert!(rect_iou(&rect, &truth) > 0.85);
    }

    #[test]
    fn localization_matches_exhaustive_oracle_and_recovers_offsets() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let reference = RotatedRect {
            center_x: 63.5,
            center_y: 63.5,
            width: 30.0,
            height: 14.0,
            rotation: 0.0,
        };
        let cfg = BBoxConfig::default();
        for trial in 0..8 {
            let azimuth = rng.gen_range(0.0..360.0);
            let dx = rng.gen_range(-6i64..=6) as f64;
            let dy = rng.gen_range(-6i64..=6) as f64;
            let mut chip = MagnitudeImage::zeros(128, 128);
            let truth = RotatedRect {
                center_x: 63.5 + dx,
                center_y: 63.5 + dy,
                rotation: (azimuth as f64).to_radians(),
                ..reference
            };
            // Brighter toward the radar-facing (bottom) side.
            for r in 0..128 {
                for c in 0..128 {
                    if truth.contains(c as f64, r as f64) {
                        let (y0, y1) = truth.vertical_extent();
                        let d = (r as f64 - y0) / (y1 - y0);
                        chip.data[r * 128 + c] = 40.0 * (0.75 + 0.25 * d);
                    } else {
                        chip.data[r * 128 + c] = rng.gen_range(0.0..0.4);
                    }
                }
            }
            let sample = sample_with(chip, azimuth);
            let fast = localize_box(&sample, &reference, &cfg);
            let slow = localize_box_exhaustive(&sample, &reference, &cfg);
            assert_eq!(
                (fast.center_x, fast.center_y),
                (slow.center_x, slow.center_y),
                "trial {trial}: coarse-to-fine disagrees with the oracle"
            );
            assert!(
                (fast.center_x - truth.center_x).abs() <= 6.0
                    && (fast.center_y - truth.center_y).abs() <= 6.0,
                "trial {trial}: found ({}, {}), truth ({}, {})",
                fast.center_x,
                fast.center_y,
                truth.center_x,
                truth.center_y
            );
            assert!(rect_iou(&fast, &truth) >= 0.5);
        }
    }

    #[test]
    fn uniform_image_localizes_to_zero_shift() {
        let chip = MagnitudeImage {
            rows: 128,
            cols: 128,
            data: vec![3.0; 128 * 128],
        };
        let sample = sample_with(chip, 45.0);
        let reference = RotatedRect {
            center_x: 63.5,
            center_y: 63.5,
            width: 20.0,
            height: 10.0,
            rotation: 0.0,
        };
        let rect = localize_box(&sample, &reference, &BBoxConfig::default());
        assert_eq!(rect.center_x, 63.5);
        assert_eq!(rect.center_y, 63.5);
    }

    #[test]
    fn huge_distance_weight_pins_the_center() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut chip = MagnitudeImage::zeros(128, 128);
        for v in chip.data.iter_mut() {
            *v = rng.gen_range(0.0..50.0);
        }
        let sample = sample_with(chip, 123.0);
        let reference = RotatedRect {
            center_x: 63.5,
            center_y: 63.5,
            width: 24.0,
            height: 12.0,
            rotation: 0.0,
        };
        let cfg = BBoxConfig {
            distance_weight: 1e6,
            ..Default::default()
        };
        let rect = localize_box(&sample, &reference, &cfg);
        assert_eq!((rect.center_x, rect.center_y), (63.5, 63.5));
    }

    #[test]
    fn vertical_weight_is_zero_at_top_one_at_bottom() {
        let rect = RotatedRect {
            center_x: 10.0,
            center_y: 20.0,
            width: 8.0,
            height: 4.0,
            rotation: 0.3,
        };
        let (y0, y1) = rect.vertical_extent();
        let d = |y: f64| (y - y0) / (y1 - y0);
        assert_relative_eq!(d(y0), 0.0);
        assert_relative_eq!(d(y1), 1.0);
    }

    #[test]
    fn pixel_loss_is_translation_covariant_and_scale_invariant() {
        let cfg = BBoxConfig {
            distance_weight: 0.0,
            ..Default::default()
        };
        let reference = RotatedRect {
            center_x: 63.5,
            center_y: 63.5,
            width: 20.0,
            height: 10.0,
            rotation: 0.0,
        };
        let mut chip = MagnitudeImage::zeros(128, 128);
        let blob = RotatedRect {
            center_x: 58.5,
            center_y: 70.5,
            width: 18.0,
            height: 9.0,
            rotation: 0.0,
        };
        paint_rect(&mut chip, &blob, 30.0);
        let sample = sample_with(chip.clone(), 0.0);
        let found = localize_box_exhaustive(&sample, &reference, &cfg);

        // Shift the image by an integer offset: the minimizer follows.
        let (ox, oy) = (6i64, -4i64);
        let mut shifted = MagnitudeImage::zeros(128, 128);
        for r in 0..128usize {
            for c in 0..128usize {
                let (sr, sc) = (r as i64 - oy, c as i64 - ox);
                if (0..128).contains(&sr) && (0..128).contains(&sc) {
                    shifted.data[r * 128 + c] = chip.at(sr as usize, sc as usize);
                }
            }
        }
        let found_shifted =
            localize_box_exhaustive(&sample_with(shifted, 0.0), &reference, &cfg);
        assert_eq!(found_shifted.center_x, found.center_x + ox as f64);
        assert_eq!(found_shifted.center_y, found.center_y + oy as f64);

        // Doubling intensities does not move the minimizer when lambda = 0.
        let mut doubled = chip.clone();
        for v in &mut doubled.data {
            *v *= 2.0;
        }
        let found_doubled =
            localize_box_exhaustive(&sample_with(doubled, 0.0), &reference, &cfg);
        assert_eq!(
            (found_doubled.center_x, found_doubled.center_y),
            (found.center_x, found.center_y)
        );
    }
}

