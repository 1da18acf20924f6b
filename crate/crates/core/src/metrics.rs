//! Segmentation quality metrics against human ground truth: boundary recall
//! and undersegmentation error for superpixels, and the Rand index,
//! variation of information, boundary displacement error and global
//! consistency error for final segmentations.
//!
//! Region-based metrics are computed from the label contingency table, never
//! by enumerating pixel pairs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::LabelMap;

/// Default boundary-recall tolerance in pixels.
pub const DEFAULT_BR_TOLERANCE: usize = 2;

/// One or more human annotations of the same image.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    maps: Vec<LabelMap>,
}

impl GroundTruth {
    pub fn new(maps: Vec<LabelMap>) -> Result<Self> {
        let first = maps
            .first()
            .ok_or_else(|| Error::InvalidParameter("ground truth needs at least one map".into()))?;
        for m in &maps[1..] {
            first.same_dims(m)?;
        }
        Ok(GroundTruth { maps })
    }

    pub fn maps(&self) -> &[LabelMap] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.maps[0].dims()
    }
}

/// Sparse joint label counts of two maps over the same pixels.
#[derive(Debug, Clone)]
pub struct Contingency {
    /// `(label in a, label in b, count)`, sorted by labels.
    pub cells: Vec<(u32, u32, u64)>,
    pub rows: Vec<u64>,
    pub cols: Vec<u64>,
    pub total: u64,
}

impl Contingency {
    pub fn new(a: &LabelMap, b: &LabelMap) -> Result<Self> {
        a.same_dims(b)?;
        let mut keys: Vec<u64> = a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(&x, &y)| (x as u64) << 32 | y as u64)
            .collect();
        keys.sort_unstable();
        let mut cells: Vec<(u32, u32, u64)> = Vec::new();
        for k in keys {
            let (x, y) = ((k >> 32) as u32, k as u32);
            match cells.last_mut() {
                Some(c) if c.0 == x && c.1 == y => c.2 += 1,
                _ => cells.push((x, y, 1)),
            }
        }
        let mut rows = vec![0u64; a.num_labels()];
        let mut cols = vec![0u64; b.num_labels()];
        for &(x, y, n) in &cells {
            rows[x as usize] += n;
            cols[y as usize] += n;
        }
        Ok(Contingency {
            cells,
            rows,
            cols,
            total: a.len() as u64,
        })
    }
}

fn pairs(n: u64) -> f64 {
    n as f64 * (n as f64 - 1.0) / 2.0
}

fn entropy(counts: impl Iterator<Item = u64>, total: u64) -> f64 {
    let t = total as f64;
    counts
        .filter(|&n| n > 0)
        .map(|n| {
            let p = n as f64 / t;
            -p * p.log2()
        })
        .sum()
}

/// Summed-area table with one row and column of zero padding.
fn integral(mask: &[bool], w: usize, h: usize) -> Vec<u32> {
    let mut s = vec![0u32; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0u32;
        for x in 0..w {
            row += mask[y * w + x] as u32;
            s[(y + 1) * (w + 1) + x + 1] = s[y * (w + 1) + x + 1] + row;
        }
    }
    s
}

/// Fraction of ground-truth boundary pixels with a predicted boundary pixel
/// within Chebyshev distance `delta`. A ground truth without boundaries
/// scores 1.
pub fn boundary_recall(pred: &LabelMap, gt: &LabelMap, delta: usize) -> Result<f64> {
    pred.same_dims(gt)?;
    let (w, h) = gt.dims();
    let gt_b = gt.boundary_mask();
    let total = gt_b.iter().filter(|&&b| b).count();
    if total == 0 {
        return Ok(1.0);
    }
    let s = integral(&pred.boundary_mask(), w, h);
    let mut hit = 0usize;
    for y in 0..h {
        for x in 0..w {
            if !gt_b[y * w + x] {
                continue;
            }
            let (x0, y0) = (x.saturating_sub(delta), y.saturating_sub(delta));
            let (x1, y1) = ((x + delta + 1).min(w), (y + delta + 1).min(h));
            let n = s[y1 * (w + 1) + x1] + s[y0 * (w + 1) + x0]
                - s[y0 * (w + 1) + x1]
                - s[y1 * (w + 1) + x0];
            if n > 0 {
                hit += 1;
            }
        }
    }
    Ok(hit as f64 / total as f64)
}

/// `(1/N) Σ_S Σ_{P ∩ S ≠ ∅} min(|P ∩ S|, |P \ S|)` over ground-truth segments
/// `S` and predicted superpixels `P`.
pub fn undersegmentation_error(pred: &LabelMap, gt: &LabelMap) -> Result<f64> {
    let c = Contingency::new(pred, gt)?;
    let leak: u64 = c
        .cells
        .iter()
        .map(|&(p, _, n)| n.min(c.rows[p as usize] - n))
        .sum();
    Ok(leak as f64 / c.total as f64)
}

/// Fraction of unordered pixel pairs on whose same/different-label relation
/// the two maps agree.
pub fn rand_index(a: &LabelMap, b: &LabelMap) -> Result<f64> {
    let c = Contingency::new(a, b)?;
    let total = pairs(c.total);
    if total == 0.0 {
        return Ok(1.0);
    }
    let same_a: f64 = c.rows.iter().map(|&n| pairs(n)).sum();
    let same_b: f64 = c.cols.iter().map(|&n| pairs(n)).sum();
    let same_both: f64 = c.cells.iter().map(|&(_, _, n)| pairs(n)).sum();
    let disagree = same_a + same_b - 2.0 * same_both;
    Ok(((total - disagree) / total).clamp(0.0, 1.0))
}

/// Rand index averaged over every ground-truth annotation.
pub fn probabilistic_rand_index(pred: &LabelMap, gts: &GroundTruth) -> Result<f64> {
    let mut sum = 0.0;
    for gt in gts.maps() {
        sum += rand_index(pred, gt)?;
    }
    Ok(sum / gts.len() as f64)
}

/// `H(a | b) + H(b | a)` in bits.
pub fn variation_of_information(a: &LabelMap, b: &LabelMap) -> Result<f64> {
    let c = Contingency::new(a, b)?;
    let h_ab = entropy(c.cells.iter().map(|x| x.2), c.total);
    let h_a = entropy(c.rows.iter().copied(), c.total);
    let h_b = entropy(c.cols.iter().copied(), c.total);
    Ok((2.0 * h_ab - h_a - h_b).max(0.0))
}

/// Squared Euclidean distance to the nearest `true` pixel of `mask`, by the
/// separable lower-envelope transform of Felzenszwalb and Huttenlocher.
pub fn squared_distance_transform(mask: &[bool], w: usize, h: usize) -> Vec<f64> {
    let inf = 1e20;
    let mut d: Vec<f64> = mask.iter().map(|&m| if m { 0.0 } else { inf }).collect();
    let n = w.max(h);
    let mut f = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    for x in 0..w {
        for y in 0..h {
            f[y] = d[y * w + x];
        }
        edt_1d(&f[..h], &mut out[..h], &mut v, &mut z);
        for y in 0..h {
            d[y * w + x] = out[y];
        }
    }
    for y in 0..h {
        f[..w].copy_from_slice(&d[y * w..(y + 1) * w]);
        edt_1d(&f[..w], &mut out[..w], &mut v, &mut z);
        d[y * w..(y + 1) * w].copy_from_slice(&out[..w]);
    }
    d
}

fn edt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let qf = q as f64;
        let mut s;
        loop {
            let p = v[k] as f64;
            s = ((f[q] + qf * qf) - (f[v[k]] + p * p)) / (2.0 * qf - 2.0 * p);
            if s <= z[k] {
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate().take(n) {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let p = v[k] as f64;
        *out = (qf - p) * (qf - p) + f[v[k]];
    }
}

fn mean_distance(from: &[bool], to_dt: &[f64]) -> f64 {
    let (sum, n) = from
        .iter()
        .zip(to_dt)
        .filter(|(&b, _)| b)
        .fold((0.0, 0usize), |(s, n), (_, &d)| (s + d.sqrt(), n + 1));
    sum / n as f64
}

/// Symmetric mean distance between the boundary pixels of two maps; 0 when
/// either map has no boundary.
pub fn boundary_displacement_error(pred: &LabelMap, gt: &LabelMap) -> Result<f64> {
    pred.same_dims(gt)?;
    let (w, h) = gt.dims();
    let pb = pred.boundary_mask();
    let gb = gt.boundary_mask();
    if !pb.contains(&true) || !gb.contains(&true) {
        return Ok(0.0);
    }
    let pd = squared_distance_transform(&pb, w, h);
    let gd = squared_distance_transform(&gb, w, h);
    Ok(0.5 * (mean_distance(&pb, &gd) + mean_distance(&gb, &pd)))
}

/// `(1/N) min(Σ_p E(a, b, p), Σ_p E(b, a, p))` with local refinement error
/// `E(s1, s2, p) = |R(s1, p) \ R(s2, p)| / |R(s1, p)|`.
pub fn global_consistency_error(a: &LabelMap, b: &LabelMap) -> Result<f64> {
    let c = Contingency::new(a, b)?;
    let mut e_ab = 0.0;
    let mut e_ba = 0.0;
    for &(i, j, n) in &c.cells {
        let n = n as f64;
        let ni = c.rows[i as usize] as f64;
        let nj = c.cols[j as usize] as f64;
        e_ab += n * (ni - n) / ni;
        e_ba += n * (nj - n) / nj;
    }
    Ok((e_ab.min(e_ba) / c.total as f64).clamp(0.0, 1.0))
}

/// The six metrics against one annotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub br: f64,
    pub ue: f64,
    pub pri: f64,
    pub voi: f64,
    pub bde: f64,
    pub gce: f64,
}

impl MetricValues {
    pub fn compute(pred: &LabelMap, gt: &LabelMap, delta: usize) -> Result<Self> {
        Ok(MetricValues {
            br: boundary_recall(pred, gt, delta)?,
            ue: undersegmentation_error(pred, gt)?,
            pri: rand_index(pred, gt)?,
            voi: variation_of_information(pred, gt)?,
            bde: boundary_displacement_error(pred, gt)?,
            gce: global_consistency_error(pred, gt)?,
        })
    }

    /// Arithmetic mean of each metric.
    pub fn mean<'a>(values: impl IntoIterator<Item = &'a MetricValues>) -> Option<MetricValues> {
        let mut acc = [0.0; 6];
        let mut n = 0usize;
        for v in values {
            for (a, x) in acc.iter_mut().zip(v.as_array()) {
                *a += x;
            }
            n += 1;
        }
        (n > 0).then(|| {
            let m = acc.map(|a| a / n as f64);
            MetricValues {
                br: m[0],
                ue: m[1],
                pri: m[2],
                voi: m[3],
                bde: m[4],
                gce: m[5],
            }
        })
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.br, self.ue, self.pri, self.voi, self.bde, self.gce]
    }
}

/// Per-annotation metrics and their average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub br: f64,
    pub ue: f64,
    pub pri: f64,
    pub voi: f64,
    pub bde: f64,
    pub gce: f64,
    pub per_gt: Vec<MetricValues>,
}

impl MetricsReport {
    pub fn values(&self) -> MetricValues {
        MetricValues {
            br: self.br,
            ue: self.ue,
            pri: self.pri,
            voi: self.voi,
            bde: self.bde,
            gce: self.gce,
        }
    }
}

pub fn evaluate(pred: &LabelMap, gts: &GroundTruth) -> Result<MetricsReport> {
    evaluate_with_tolerance(pred, gts, DEFAULT_BR_TOLERANCE)
}

/// Evaluates `pred` against every annotation separately and averages.
pub fn evaluate_with_tolerance(
    pred: &LabelMap,
    gts: &GroundTruth,
    delta: usize,
) -> Result<MetricsReport> {
    let per_gt: Vec<MetricValues> = gts
        .maps()
        .par_iter()
        .map(|gt| MetricValues::compute(pred, gt, delta))
        .collect::<Result<_>>()?;
    let m = MetricValues::mean(&per_gt).expect("ground truth is non-empty");
    Ok(MetricsReport {
        br: m.br,
        ue: m.ue,
        pri: m.pri,
        voi: m.voi,
        bde: m.bde,
        gce: m.gce,
        per_gt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn halves(w: usize, h: usize, split: usize) -> LabelMap {
        LabelMap::from_fn(w, h, |x, _| (x > split) as u32).unwrap()
    }

    #[test]
    fn br_tolerance_window() {
        let gt = halves(30, 8, 10);
        assert_eq!(boundary_recall(&halves(30, 8, 12), &gt, 2).unwrap(), 1.0);
        assert_eq!(boundary_recall(&halves(30, 8, 13), &gt, 2).unwrap(), 0.0);
        assert_eq!(boundary_recall(&halves(30, 8, 8), &gt, 2).unwrap(), 1.0);
        assert_eq!(boundary_recall(&halves(30, 8, 7), &gt, 2).unwrap(), 0.0);
    }

    #[test]
    fn br_edge_cases() {
        let gt = halves(10, 4, 4);
        let single = LabelMap::uniform(10, 4).unwrap();
        assert_eq!(boundary_recall(&single, &gt, 2).unwrap(), 0.0);
        assert_eq!(boundary_recall(&gt, &single, 2).unwrap(), 1.0);
        assert_eq!(boundary_recall(&gt, &gt, 0).unwrap(), 1.0);
    }

    #[test]
    fn ue_straddling_superpixel() {
        // gt: columns 0..=5 vs 6..; pred: one 10-pixel superpixel covering
        // columns 0..10 of row 0, the rest of the image in gt-aligned pieces
        let gt = LabelMap::from_fn(10, 2, |x, _| (x >= 6) as u32).unwrap();
        let pred = LabelMap::from_fn(10, 2, |x, y| if y == 0 { 0 } else { 1 + (x >= 6) as u32 })
            .unwrap();
        let ue = undersegmentation_error(&pred, &gt).unwrap();
        assert!((ue - 8.0 / 20.0).abs() < 1e-15);
    }

    #[test]
    fn ue_refinement_is_zero() {
        let gt = halves(8, 8, 3);
        let pred = LabelMap::from_fn(8, 8, |x, y| (x / 2 + 4 * (y / 4)) as u32).unwrap();
        assert_eq!(undersegmentation_error(&pred, &gt).unwrap(), 0.0);
    }

    #[test]
    fn rand_index_single_pair() {
        let pred = LabelMap::new(2, 1, vec![0, 0]).unwrap();
        let gt = LabelMap::new(2, 1, vec![0, 1]).unwrap();
        assert_eq!(rand_index(&pred, &gt).unwrap(), 0.0);
        assert_eq!(rand_index(&gt, &gt).unwrap(), 1.0);
        let one = LabelMap::uniform(1, 1).unwrap();
        assert_eq!(rand_index(&one, &one).unwrap(), 1.0);
    }

    #[test]
    fn voi_of_halves_against_single_region() {
        let pred = halves(8, 2, 3);
        let gt = LabelMap::uniform(8, 2).unwrap();
        assert!((variation_of_information(&pred, &gt).unwrap() - 1.0).abs() < 1e-12);
        assert!((variation_of_information(&gt, &pred).unwrap() - 1.0).abs() < 1e-12);
        let renamed = LabelMap::from_fn(8, 2, |x, _| if x > 3 { 7 } else { 2 }).unwrap();
        assert_eq!(variation_of_information(&pred, &renamed).unwrap(), 0.0);
    }

    #[test]
    fn bde_shifted_line() {
        let gt = halves(20, 6, 5);
        let pred = halves(20, 6, 8);
        assert!((boundary_displacement_error(&pred, &gt).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(boundary_displacement_error(&gt, &gt).unwrap(), 0.0);
        let single = LabelMap::uniform(20, 6).unwrap();
        assert_eq!(boundary_displacement_error(&single, &gt).unwrap(), 0.0);
    }

    #[test]
    fn distance_transform_matches_scan() {
        let (w, h) = (13, 9);
        let mut state = 99u64;
        for _ in 0..30 {
            let mask: Vec<bool> = (0..w * h)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                    (state >> 60) == 0
                })
                .collect();
            if !mask.contains(&true) {
                continue;
            }
            let dt = squared_distance_transform(&mask, w, h);
            for p in 0..w * h {
                let (x, y) = ((p % w) as f64, (p / w) as f64);
                let best = (0..w * h)
                    .filter(|&q| mask[q])
                    .map(|q| {
                        let (qx, qy) = ((q % w) as f64, (q / w) as f64);
                        (x - qx).powi(2) + (y - qy).powi(2)
                    })
                    .fold(f64::INFINITY, f64::min);
                assert_eq!(dt[p], best);
            }
        }
    }

    #[test]
    fn gce_refinement_is_zero() {
        let gt = halves(8, 8, 3);
        let pred = LabelMap::from_fn(8, 8, |x, y| (x / 2 + 4 * (y / 4)) as u32).unwrap();
        assert_eq!(global_consistency_error(&pred, &gt).unwrap(), 0.0);
        assert!(global_consistency_error(&halves(8, 8, 1), &halves(8, 8, 5)).unwrap() > 0.0);
    }

    #[test]
    fn evaluate_averages_over_annotations() {
        let pred = LabelMap::from_fn(6, 6, |x, y| ((x / 3) + 2 * (y / 3)) as u32).unwrap();
        let coarse = LabelMap::from_fn(6, 6, |x, _| (x / 3) as u32).unwrap();
        let gts = GroundTruth::new(vec![pred.clone(), coarse.clone()]).unwrap();
        let r = evaluate(&pred, &gts).unwrap();
        // pred splits each 18-pixel half into two 9-pixel quadrants:
        // 2 * 9 * 9 pairs per half disagree out of C(36, 2) = 630
        let ri_coarse = 1.0 - 2.0 * 81.0 / 630.0;
        assert!((rand_index(&pred, &coarse).unwrap() - ri_coarse).abs() < 1e-12);
        assert!((r.pri - (1.0 + ri_coarse) / 2.0).abs() < 1e-12);
        assert_eq!(r.per_gt.len(), 2);
        assert_eq!(r.per_gt[0].pri, 1.0);
    }

    #[test]
    fn evaluate_rejects_mismatched_dims() {
        let pred = LabelMap::uniform(4, 4).unwrap();
        let gts = GroundTruth::new(vec![LabelMap::uniform(4, 5).unwrap()]).unwrap();
        assert!(matches!(evaluate(&pred, &gts), Err(Error::DimensionMismatch { .. })));
        assert!(GroundTruth::new(vec![]).is_err());
    }
}
