//! Region similarity: a content term built from per-slot χ² distances mapped
//! through a Gaussian membership, a border term averaging the content
//! similarity of superpixel couples along the shared border, and a
//! size/border-weighted combination of the two.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, RegionAggregate, NUM_FEATURES, SLOT_RANGES};

pub const DEFAULT_SIGMA: f64 = 0.5;

/// Offset applied to skewness before χ², which needs non-negative inputs.
pub const SKEWNESS_SHIFT: f64 = 10.0;

/// Upper bound of the content similarity over all possible inputs.
pub const CONTENT_SIMILARITY_BOUND: f64 = 0.8125;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityParams {
    /// Standard deviation of the membership function.
    pub sigma: f64,
}

impl Default for SimilarityParams {
    fn default() -> Self {
        SimilarityParams {
            sigma: DEFAULT_SIGMA,
        }
    }
}

impl SimilarityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "membership sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// `Σ (x_i - y_i)^2 / (x_i + y_i)`, skipping terms whose denominator is 0.
pub fn chi2(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidParameter(format!(
            "chi2 length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if let Some(v) = x.iter().chain(y).find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "chi2 needs non-negative components, got {v}"
        )));
    }
    Ok(chi2_unchecked(x, y))
}

#[inline]
fn chi2_unchecked(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let s = a + b;
            if s > 0.0 {
                (a - b) * (a - b) / s
            } else {
                0.0
            }
        })
        .sum()
}

/// Zero-centred Gaussian membership `exp(-(x / σ)^2 / 2)`.
#[inline]
pub fn membership(x: f64, sigma: f64) -> f64 {
    (-0.5 * (x / sigma).powi(2)).exp()
}

/// Per-slot similarities `S_0 .. S_9`, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureSimilarityVector(pub [f64; NUM_FEATURES]);

impl FeatureSimilarityVector {
    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / NUM_FEATURES as f64
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.0.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / NUM_FEATURES as f64
    }

    /// `(max + min + mean + variance) / 4`.
    pub fn content_similarity(&self) -> f64 {
        0.25 * (self.max() + self.min() + self.mean() + self.variance())
    }
}

/// Flat feature layout with signed scalars moved onto non-negative ranges:
/// a/b means by 128, skewness by [`SKEWNESS_SHIFT`] (clamped at 0) and GLCM
/// correlation by 1.
fn shifted(f: &FeatureVector) -> [f64; crate::features::FEATURE_LEN] {
    let mut v = f.to_flat();
    v[1] += 128.0;
    v[2] += 128.0;
    for s in &mut v[6..9] {
        *s = (*s + SKEWNESS_SHIFT).max(0.0);
    }
    v[40] = (v[40] + 1.0).max(0.0);
    // Guard against rounding below zero in weighted aggregates.
    for s in &mut v[..] {
        if *s < 0.0 {
            *s = 0.0;
        }
    }
    v
}

pub fn feature_similarities(
    a: &FeatureVector,
    b: &FeatureVector,
    params: &SimilarityParams,
) -> FeatureSimilarityVector {
    let va = shifted(a);
    let vb = shifted(b);
    let mut s = [0.0; NUM_FEATURES];
    for (slot, range) in SLOT_RANGES.iter().enumerate() {
        let d = chi2_unchecked(&va[range.clone()], &vb[range.clone()]);
        s[slot] = membership(d, params.sigma);
    }
    FeatureSimilarityVector(s)
}

/// Content similarity of two descriptors.
pub fn content_similarity_features(
    a: &FeatureVector,
    b: &FeatureVector,
    params: &SimilarityParams,
) -> f64 {
    feature_similarities(a, b, params).content_similarity()
}

/// Content similarity of two regions, compared through their aggregates.
pub fn content_similarity(
    a: &RegionAggregate,
    b: &RegionAggregate,
    params: &SimilarityParams,
) -> f64 {
    content_similarity_features(a.features(), b.features(), params)
}

/// Mean of precomputed couple similarities along a border. `couples` must be
/// listed in a canonical order so that the sum is order-independent.
pub fn border_similarity(couple_similarities: &[f64]) -> Option<f64> {
    if couple_similarities.is_empty() {
        return None;
    }
    Some(couple_similarities.iter().sum::<f64>() / couple_similarities.len() as f64)
}

/// Border similarity of two regions given their superpixel members and the
/// superpixel descriptors. Couples are enumerated once per adjacent
/// superpixel pair `(P_i in a, Q_j in b)`; a superpixel touching several
/// superpixels across the border appears in several couples.
pub fn border_similarity_regions(
    a: &[u32],
    b: &[u32],
    adjacency: &crate::adjacency::SuperpixelAdjacency,
    features: &[FeatureVector],
    params: &SimilarityParams,
) -> Result<f64> {
    let in_b: std::collections::HashSet<u32> = b.iter().copied().collect();
    let mut couples: Vec<(u32, u32)> = Vec::new();
    for &p in a {
        for q in adjacency.neighbors(p) {
            if in_b.contains(&q) {
                couples.push(if p < q { (p, q) } else { (q, p) });
            }
        }
    }
    couples.sort_unstable();
    let sims: Vec<f64> = couples
        .iter()
        .map(|&(p, q)| {
            content_similarity_features(&features[p as usize], &features[q as usize], params)
        })
        .collect();
    let (ra, rb) = (a.first().copied().unwrap_or(0), b.first().copied().unwrap_or(0));
    border_similarity(&sims).ok_or(Error::NotAdjacent(ra, rb))
}

/// `sqrt(min(n_i, n_j) / max(n_i, n_j))` over superpixel counts.
pub fn content_weight(size_a: usize, size_b: usize) -> f64 {
    let (lo, hi) = if size_a <= size_b {
        (size_a, size_b)
    } else {
        (size_b, size_a)
    };
    (lo as f64 / hi as f64).sqrt()
}

/// `sqrt(β / (2 C_i C_j) · (C_i + C_j))` for circumferences `C` and common
/// border length `β`, all in pixels.
pub fn border_weight(beta: usize, circ_a: usize, circ_b: usize) -> Result<f64> {
    if beta == 0 || circ_a == 0 || circ_b == 0 {
        return Err(Error::InvalidParameter(format!(
            "border weight needs a shared border: beta={beta}, circumferences {circ_a}/{circ_b}"
        )));
    }
    let (ci, cj) = (circ_a as f64, circ_b as f64);
    Ok((beta as f64 / (2.0 * ci * cj) * (ci + cj)).sqrt())
}

/// Every term of the combined similarity of one region pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimilarityBreakdown {
    pub content: f64,
    pub border: f64,
    pub omega_c: f64,
    pub omega_b: f64,
    pub total: f64,
}

/// Inputs describing one side of a region pair.
#[derive(Debug, Clone, Copy)]
pub struct RegionShape {
    /// Number of superpixels in the region.
    pub superpixels: usize,
    /// Circumference in pixels.
    pub circumference: usize,
}

/// `ω_C · Sim_C + ω_B · Sim_B`.
pub fn combine(
    content: f64,
    border: f64,
    a: RegionShape,
    b: RegionShape,
    beta: usize,
) -> Result<SimilarityBreakdown> {
    let omega_c = content_weight(a.superpixels, b.superpixels);
    let omega_b = border_weight(beta, a.circumference, b.circumference)?;
    Ok(SimilarityBreakdown {
        content,
        border,
        omega_c,
        omega_b,
        total: omega_c * content + omega_b * border,
    })
}
