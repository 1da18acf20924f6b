//! Per-superpixel descriptors and their region-level aggregation.
//!
//! A [`FeatureVector`] holds ten feature slots:
//!
//! | slot | content                                   | length |
//! |------|-------------------------------------------|--------|
//! | 0    | mean of L, a, b                           | 3      |
//! | 1    | variance of L, a, b                       | 3      |
//! | 2    | skewness of L, a, b                       | 3      |
//! | 3    | 10-bin histograms of L, a, b              | 30     |
//! | 4    | GLCM contrast                             | 1      |
//! | 5    | GLCM correlation                          | 1      |
//! | 6    | GLCM energy                               | 1      |
//! | 7    | GLCM entropy                              | 1      |
//! | 8    | 10-bin gradient orientation histogram     | 10     |
//! | 9    | 10-bin gradient magnitude histogram       | 10     |
//!
//! Histogram bins use fixed, image-independent ranges so that any two
//! descriptors are directly comparable bin by bin.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glcm::{cooccurrence, haralick, quantize_lightness};
use crate::gradient::{GradientField, MAX_SOBEL_RESPONSE};
use crate::lab::LabImage;
use crate::labels::LabelMap;

pub const NUM_FEATURES: usize = 10;
pub const HIST_BINS: usize = 10;
pub const FEATURE_LEN: usize = 63;

/// Fixed channel ranges used for intensity histograms.
pub const CHANNEL_RANGES: [(f64, f64); 3] = [(0.0, 100.0), (-128.0, 127.0), (-128.0, 127.0)];

/// Ranges of each slot inside the flat layout.
pub const SLOT_RANGES: [Range<usize>; NUM_FEATURES] = [
    0..3,
    3..6,
    6..9,
    9..39,
    39..40,
    40..41,
    41..42,
    42..43,
    43..53,
    53..63,
];

/// Ten-slot descriptor of one superpixel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub mean: [f64; 3],
    pub variance: [f64; 3],
    pub skewness: [f64; 3],
    pub intensity_hist: [[f64; HIST_BINS]; 3],
    pub contrast: f64,
    pub correlation: f64,
    pub energy: f64,
    pub entropy: f64,
    pub orientation_hist: [f64; HIST_BINS],
    pub magnitude_hist: [f64; HIST_BINS],
}

impl FeatureVector {
    pub fn to_flat(&self) -> [f64; FEATURE_LEN] {
        let mut out = [0.0; FEATURE_LEN];
        out[0..3].copy_from_slice(&self.mean);
        out[3..6].copy_from_slice(&self.variance);
        out[6..9].copy_from_slice(&self.skewness);
        for c in 0..3 {
            out[9 + c * HIST_BINS..9 + (c + 1) * HIST_BINS].copy_from_slice(&self.intensity_hist[c]);
        }
        out[39] = self.contrast;
        out[40] = self.correlation;
        out[41] = self.energy;
        out[42] = self.entropy;
        out[43..53].copy_from_slice(&self.orientation_hist);
        out[53..63].copy_from_slice(&self.magnitude_hist);
        out
    }

    pub fn from_flat(v: &[f64; FEATURE_LEN]) -> Self {
        let arr3 = |r: Range<usize>| -> [f64; 3] { v[r].try_into().unwrap() };
        let arr10 = |s: usize| -> [f64; HIST_BINS] { v[s..s + HIST_BINS].try_into().unwrap() };
        FeatureVector {
            mean: arr3(0..3),
            variance: arr3(3..6),
            skewness: arr3(6..9),
            intensity_hist: [arr10(9), arr10(19), arr10(29)],
            contrast: v[39],
            correlation: v[40],
            energy: v[41],
            entropy: v[42],
            orientation_hist: arr10(43),
            magnitude_hist: arr10(53),
        }
    }

    /// Values of feature slot `slot` (0..10).
    pub fn slot(&self, slot: usize) -> Vec<f64> {
        self.to_flat()[SLOT_RANGES[slot].clone()].to_vec()
    }
}

#[inline]
fn bin_of(v: f64, lo: f64, hi: f64) -> usize {
    let b = ((v - lo) / (hi - lo) * HIST_BINS as f64).floor();
    (b.max(0.0) as usize).min(HIST_BINS - 1)
}

/// Population mean, variance and skewness. A sample with no spread has
/// variance and skewness exactly zero.
fn moments(values: impl Iterator<Item = f64> + Clone) -> (f64, f64, f64) {
    let mut n = 0.0;
    let mut sum = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values.clone() {
        n += 1.0;
        sum += v;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo == hi {
        return (lo, 0.0, 0.0);
    }
    let mean = sum / n;
    let (mut m2, mut m3) = (0.0, 0.0);
    for v in values {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    let skew = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
    (mean, m2, skew)
}

fn normalize(hist: &mut [f64], total: f64) {
    hist.iter_mut().for_each(|b| *b /= total);
}

/// Computes the descriptor of every superpixel; the result is indexed by
/// superpixel label. Labels must be dense.
pub fn extract_features(
    lab: &LabImage,
    grad: &GradientField,
    sp: &LabelMap,
) -> Result<Vec<FeatureVector>> {
    if lab.dims() != sp.dims() {
        return Err(Error::DimensionMismatch {
            expected: sp.dims(),
            found: lab.dims(),
        });
    }
    if grad.dims() != sp.dims() {
        return Err(Error::DimensionMismatch {
            expected: sp.dims(),
            found: grad.dims(),
        });
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); sp.num_labels()];
    for (p, &l) in sp.as_slice().iter().enumerate() {
        members[l as usize].push(p);
    }
    if let Some(empty) = members.iter().position(|m| m.is_empty()) {
        return Err(Error::Partition(format!("superpixel {empty} has no pixels")));
    }
    let levels: Vec<u8> = lab
        .pixels()
        .iter()
        .map(|p| quantize_lightness(p[0]) as u8)
        .collect();
    let labels = sp.as_slice();
    let width = sp.width();

    Ok(members
        .par_iter()
        .enumerate()
        .map(|(id, pixels)| {
            describe(lab, grad, &levels, width, pixels, |q| labels[q] == id as u32)
        })
        .collect())
}

fn describe(
    lab: &LabImage,
    grad: &GradientField,
    levels: &[u8],
    width: usize,
    pixels: &[usize],
    inside: impl Fn(usize) -> bool,
) -> FeatureVector {
    let n = pixels.len() as f64;
    let px = lab.pixels();
    let mut mean = [0.0; 3];
    let mut variance = [0.0; 3];
    let mut skewness = [0.0; 3];
    let mut intensity_hist = [[0.0; HIST_BINS]; 3];
    for c in 0..3 {
        let (m, v, s) = moments(pixels.iter().map(|&p| px[p][c]));
        mean[c] = m;
        variance[c] = v;
        skewness[c] = s;
        let (lo, hi) = CHANNEL_RANGES[c];
        for &p in pixels {
            intensity_hist[c][bin_of(px[p][c], lo, hi)] += 1.0;
        }
        normalize(&mut intensity_hist[c], n);
    }

    let texture = haralick(&cooccurrence(levels, width, pixels, inside));

    let mut orientation_hist = [0.0; HIST_BINS];
    let mut magnitude_hist = [0.0; HIST_BINS];
    for &p in pixels {
        orientation_hist[bin_of(grad.orientation()[p], 0.0, PI)] += 1.0;
        magnitude_hist[bin_of(grad.magnitude()[p], 0.0, MAX_SOBEL_RESPONSE)] += 1.0;
    }
    normalize(&mut orientation_hist, n);
    normalize(&mut magnitude_hist, n);

    FeatureVector {
        mean,
        variance,
        skewness,
        intensity_hist,
        contrast: texture.contrast,
        correlation: texture.correlation,
        energy: texture.energy,
        entropy: texture.entropy,
        orientation_hist,
        magnitude_hist,
    }
}

/// Pixel-weighted aggregate of a region's superpixel descriptors: weighted
/// means for the scalar slots, and weighted (hence renormalised) sums for the
/// histograms. A single superpixel aggregates to exactly its own vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionAggregate {
    features: FeatureVector,
    pixel_area: usize,
}

impl RegionAggregate {
    pub fn single(features: FeatureVector, pixel_area: usize) -> Self {
        RegionAggregate {
            features,
            pixel_area,
        }
    }

    #[inline]
    pub fn features(&self) -> &FeatureVector {
        &self.features
    }

    #[inline]
    pub fn pixel_area(&self) -> usize {
        self.pixel_area
    }

    pub fn merge(&self, other: &RegionAggregate) -> RegionAggregate {
        let wa = self.pixel_area as f64;
        let wb = other.pixel_area as f64;
        let total = wa + wb;
        let a = self.features.to_flat();
        let b = other.features.to_flat();
        let mut out = [0.0; FEATURE_LEN];
        for i in 0..FEATURE_LEN {
            out[i] = (wa * a[i] + wb * b[i]) / total;
        }
        RegionAggregate {
            features: FeatureVector::from_flat(&out),
            pixel_area: self.pixel_area + other.pixel_area,
        }
    }

    /// Aggregate of a list of `(descriptor, pixel area)` pairs computed in one
    /// pass.
    pub fn from_parts<'a>(parts: impl IntoIterator<Item = (&'a FeatureVector, usize)>) -> Option<Self> {
        let mut acc = [0.0; FEATURE_LEN];
        let mut area = 0usize;
        for (fv, a) in parts {
            let flat = fv.to_flat();
            for i in 0..FEATURE_LEN {
                acc[i] += a as f64 * flat[i];
            }
            area += a;
        }
        if area == 0 {
            return None;
        }
        acc.iter_mut().for_each(|v| *v /= area as f64);
        Some(RegionAggregate {
            features: FeatureVector::from_flat(&acc),
            pixel_area: area,
        })
    }
}

/// Descriptors of every superpixel that makes up a region, in merge order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiScaleDescriptor {
    entries: Vec<(u32, FeatureVector)>,
}

impl MultiScaleDescriptor {
    pub fn leaf(id: u32, features: FeatureVector) -> Self {
        MultiScaleDescriptor {
            entries: vec![(id, features)],
        }
    }

    pub fn entries(&self) -> &[(u32, FeatureVector)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|(id, _)| *id)
    }
}

/// Concatenates two descriptors, `a` first. Fails if they share a superpixel.
pub fn merge_descriptor(
    a: &MultiScaleDescriptor,
    b: &MultiScaleDescriptor,
) -> Result<MultiScaleDescriptor> {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let seen: HashSet<u32> = small.ids().collect();
    if let Some(dup) = large.ids().find(|id| seen.contains(id)) {
        return Err(Error::OverlappingIds(dup));
    }
    let mut entries = Vec::with_capacity(a.len() + b.len());
    entries.extend_from_slice(&a.entries);
    entries.extend_from_slice(&b.entries);
    Ok(MultiScaleDescriptor { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradient::gradient_field;

    fn gray_lab(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> LabImage {
        let mut px = Vec::new();
        for y in 0..h {
            for x in 0..w {
                px.push([f(x, y), 0.0, 0.0]);
            }
        }
        LabImage::from_pixels(w, h, px)
    }

    fn hist_sum(h: &[f64]) -> f64 {
        h.iter().sum()
    }

    #[test]
    fn flat_superpixel_is_degenerate() {
        let lab = gray_lab(6, 6, |_, _| 37.3);
        let grad = gradient_field(&lab);
        let sp = LabelMap::uniform(6, 6).unwrap();
        let f = &extract_features(&lab, &grad, &sp).unwrap()[0];
        assert_eq!(f.variance, [0.0; 3]);
        assert_eq!(f.skewness, [0.0; 3]);
        assert_eq!(f.contrast, 0.0);
        assert_eq!(f.energy, 1.0);
        assert_eq!(f.mean[0], 37.3);
    }

    #[test]
    fn two_point_lightness_histogram() {
        let lab = gray_lab(4, 4, |x, _| if x < 2 { 0.0 } else { 100.0 });
        let grad = gradient_field(&lab);
        let sp = LabelMap::uniform(4, 4).unwrap();
        let f = &extract_features(&lab, &grad, &sp).unwrap()[0];
        let mut expected = [0.0; HIST_BINS];
        expected[0] = 0.5;
        expected[9] = 0.5;
        assert_eq!(f.intensity_hist[0], expected);
    }

    #[test]
    fn histograms_are_normalised_and_ranges_hold() {
        let lab = LabImage::from_pixels(
            9,
            7,
            (0..63)
                .map(|i| [(i * 13 % 101) as f64, (i as f64 * 0.7).sin() * 60.0, -(i as f64)])
                .collect(),
        );
        let grad = gradient_field(&lab);
        let sp = LabelMap::from_fn(9, 7, |x, y| ((x / 3) + 3 * (y / 4)) as u32).unwrap();
        for f in extract_features(&lab, &grad, &sp).unwrap() {
            for c in 0..3 {
                assert!((hist_sum(&f.intensity_hist[c]) - 1.0).abs() < 1e-9);
                assert!(f.variance[c] >= 0.0);
            }
            assert!((hist_sum(&f.orientation_hist) - 1.0).abs() < 1e-9);
            assert!((hist_sum(&f.magnitude_hist) - 1.0).abs() < 1e-9);
            assert!((0.0..=1.0).contains(&f.energy));
            assert!((-1.0..=1.0).contains(&f.correlation));
        }
    }

    #[test]
    fn skewness_of_known_sample() {
        // 0, 0, 0, 10: mean 2.5, m2 = 18.75, m3 = 93.75
        let (m, v, s) = moments([0.0, 0.0, 0.0, 10.0].into_iter());
        assert_eq!(m, 2.5);
        assert!((v - 18.75).abs() < 1e-12);
        assert!((s - 93.75 / 18.75f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn empty_superpixel_rejected() {
        let lab = gray_lab(2, 2, |_, _| 1.0);
        let grad = gradient_field(&lab);
        let sp = LabelMap::new(2, 2, vec![0, 0, 2, 2]).unwrap();
        assert!(matches!(
            extract_features(&lab, &grad, &sp),
            Err(Error::Partition(_))
        ));
    }

    #[test]
    fn flat_round_trip() {
        let lab = gray_lab(5, 5, |x, y| (x * 17 + y * 3) as f64);
        let grad = gradient_field(&lab);
        let f = extract_features(&lab, &grad, &LabelMap::uniform(5, 5).unwrap())
            .unwrap()
            .remove(0);
        assert_eq!(FeatureVector::from_flat(&f.to_flat()), f);
        assert_eq!(f.slot(3).len(), 30);
        assert_eq!(f.slot(5), vec![f.correlation]);
    }

    #[test]
    fn descriptor_concatenation() {
        let lab = gray_lab(4, 1, |x, _| x as f64 * 20.0);
        let grad = gradient_field(&lab);
        let sp = LabelMap::new(4, 1, vec![0, 1, 2, 3]).unwrap();
        let f = extract_features(&lab, &grad, &sp).unwrap();
        let b = MultiScaleDescriptor::leaf(1, f[1].clone());
        let c = MultiScaleDescriptor::leaf(2, f[2].clone());
        let bc = merge_descriptor(&b, &c).unwrap();
        assert_eq!(bc.entries(), &[(1, f[1].clone()), (2, f[2].clone())]);
        assert!(matches!(merge_descriptor(&bc, &c), Err(Error::OverlappingIds(2))));

        let d = MultiScaleDescriptor::leaf(3, f[3].clone());
        let left = merge_descriptor(&bc, &d).unwrap();
        let right = merge_descriptor(&b, &merge_descriptor(&c, &d).unwrap()).unwrap();
        assert_eq!(left.len(), 3);
        assert_eq!(left, right);
    }

    #[test]
    fn single_aggregate_is_exact() {
        let lab = gray_lab(3, 3, |x, y| (x * 7 + y * 11) as f64);
        let grad = gradient_field(&lab);
        let f = extract_features(&lab, &grad, &LabelMap::uniform(3, 3).unwrap())
            .unwrap()
            .remove(0);
        let agg = RegionAggregate::single(f.clone(), 9);
        assert_eq!(agg.features(), &f);
        assert_eq!(RegionAggregate::from_parts([(&f, 9)]).unwrap().pixel_area(), 9);
    }
}
