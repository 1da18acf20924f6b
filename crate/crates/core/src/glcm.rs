//! Gray-level co-occurrence texture statistics over an arbitrary pixel mask.

/// Number of quantisation levels for lightness.
pub const GLCM_LEVELS: usize = 16;

/// Haralick statistics of one normalised co-occurrence matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Haralick {
    pub contrast: f64,
    pub correlation: f64,
    pub energy: f64,
    pub entropy: f64,
}

/// Quantises lightness in `[0, 100]` onto `GLCM_LEVELS` levels.
#[inline]
pub fn quantize_lightness(l: f64) -> usize {
    let q = (l / 100.0 * GLCM_LEVELS as f64).floor();
    (q.max(0.0) as usize).min(GLCM_LEVELS - 1)
}

/// Symmetric co-occurrence counts at distance 1 along both image axes,
/// counting only pairs whose two pixels satisfy `inside`.
///
/// `levels` holds one quantised level per pixel of a `width x height` grid.
/// When no qualifying pair exists (single-pixel masks) the matrix is the
/// degenerate self-pair of the first pixel's level.
pub fn cooccurrence(
    levels: &[u8],
    width: usize,
    pixels: &[usize],
    inside: impl Fn(usize) -> bool,
) -> [[f64; GLCM_LEVELS]; GLCM_LEVELS] {
    let mut m = [[0.0; GLCM_LEVELS]; GLCM_LEVELS];
    let mut total = 0.0;
    let height = levels.len() / width;
    for &p in pixels {
        let (x, y) = (p % width, p / width);
        let a = levels[p] as usize;
        if x + 1 < width && inside(p + 1) {
            let b = levels[p + 1] as usize;
            m[a][b] += 1.0;
            m[b][a] += 1.0;
            total += 2.0;
        }
        if y + 1 < height && inside(p + width) {
            let b = levels[p + width] as usize;
            m[a][b] += 1.0;
            m[b][a] += 1.0;
            total += 2.0;
        }
    }
    if total == 0.0 {
        if let Some(&p) = pixels.first() {
            let a = levels[p] as usize;
            m[a][a] = 1.0;
        }
        return m;
    }
    for row in m.iter_mut() {
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    m
}

pub fn haralick(p: &[[f64; GLCM_LEVELS]; GLCM_LEVELS]) -> Haralick {
    let mut contrast = 0.0;
    let mut energy = 0.0;
    let mut entropy = 0.0;
    let mut mean = 0.0;
    for (i, row) in p.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let d = i as f64 - j as f64;
            contrast += d * d * v;
            energy += v * v;
            if v > 0.0 {
                entropy -= v * v.log2();
            }
            mean += i as f64 * v;
        }
    }
    let mut var = 0.0;
    let mut cov = 0.0;
    for (i, row) in p.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let di = i as f64 - mean;
            let dj = j as f64 - mean;
            var += di * di * v;
            cov += di * dj * v;
        }
    }
    let correlation = if var > 1e-12 {
        (cov / var).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    Haralick {
        contrast,
        correlation,
        energy: energy.min(1.0),
        entropy,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force oracle: visit every pixel and every in-bounds 4-neighbour,
    /// tally the ordered pair, then evaluate the textbook formulas.
    fn brute_force(levels: &[u8], w: usize, h: usize) -> Haralick {
        let mut counts = std::collections::BTreeMap::<(usize, usize), f64>::new();
        let mut n = 0.0;
        for y in 0..h as isize {
            for x in 0..w as isize {
                for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    let (xx, yy) = (x + dx, y + dy);
                    if xx < 0 || yy < 0 || xx >= w as isize || yy >= h as isize {
                        continue;
                    }
                    let a = levels[(y * w as isize + x) as usize] as usize;
                    let b = levels[(yy * w as isize + xx) as usize] as usize;
                    *counts.entry((a, b)).or_default() += 1.0;
                    n += 1.0;
                }
            }
        }
        let probs: Vec<((usize, usize), f64)> =
            counts.into_iter().map(|(k, c)| (k, c / n)).collect();
        let contrast = probs.iter().map(|((i, j), p)| ((*i as f64) - (*j as f64)).powi(2) * p).sum();
        let energy = probs.iter().map(|(_, p)| p * p).sum();
        let entropy = -probs.iter().map(|(_, p)| p * p.log2()).sum::<f64>();
        let mu_i: f64 = probs.iter().map(|((i, _), p)| *i as f64 * p).sum();
        let mu_j: f64 = probs.iter().map(|((_, j), p)| *j as f64 * p).sum();
        let sd_i = probs
            .iter()
            .map(|((i, _), p)| (*i as f64 - mu_i).powi(2) * p)
            .sum::<f64>()
            .sqrt();
        let sd_j = probs
            .iter()
            .map(|((_, j), p)| (*j as f64 - mu_j).powi(2) * p)
            .sum::<f64>()
            .sqrt();
        let cov: f64 = probs
            .iter()
            .map(|((i, j), p)| (*i as f64 - mu_i) * (*j as f64 - mu_j) * p)
            .sum();
        Haralick {
            contrast,
            correlation: cov / (sd_i * sd_j),
            energy,
            entropy,
        }
    }

    #[test]
    fn checkerboard_matches_brute_force() {
        let (w, h) = (8, 8);
        let levels: Vec<u8> = (0..64).map(|p| if (p % 8 + p / 8) % 2 == 0 { 2 } else { 11 }).collect();
        let pixels: Vec<usize> = (0..64).collect();
        let ours = haralick(&cooccurrence(&levels, w, &pixels, |_| true));
        let oracle = brute_force(&levels, w, h);
        assert!((ours.contrast - oracle.contrast).abs() < 1e-12);
        assert!((ours.energy - oracle.energy).abs() < 1e-12);
        assert!((ours.entropy - oracle.entropy).abs() < 1e-12);
        assert!((ours.correlation - oracle.correlation).abs() < 1e-12);
        // every neighbour pair differs: contrast = 9^2, entropy = 1 bit
        assert!((ours.contrast - 81.0).abs() < 1e-12);
        assert!((ours.entropy - 1.0).abs() < 1e-12);
        assert!((ours.correlation + 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_patches_match_brute_force() {
        let (w, h) = (7, 5);
        let mut state = 12345u64;
        for _ in 0..20 {
            let levels: Vec<u8> = (0..w * h)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    ((state >> 33) % 16) as u8
                })
                .collect();
            let pixels: Vec<usize> = (0..w * h).collect();
            let ours = haralick(&cooccurrence(&levels, w, &pixels, |_| true));
            let oracle = brute_force(&levels, w, h);
            assert!((ours.contrast - oracle.contrast).abs() < 1e-9);
            assert!((ours.energy - oracle.energy).abs() < 1e-9);
            assert!((ours.entropy - oracle.entropy).abs() < 1e-9);
            assert!((ours.correlation - oracle.correlation).abs() < 1e-9);
        }
    }

    #[test]
    fn flat_patch_is_degenerate() {
        let levels = vec![5u8; 12];
        let pixels: Vec<usize> = (0..12).collect();
        let h = haralick(&cooccurrence(&levels, 4, &pixels, |_| true));
        assert_eq!(h.contrast, 0.0);
        assert_eq!(h.energy, 1.0);
        assert_eq!(h.entropy, 0.0);
        assert_eq!(h.correlation, 0.0);
    }

    #[test]
    fn mask_excludes_outside_pairs() {
        // the right half has a different level but is outside the mask
        let levels: Vec<u8> = (0..16).map(|p| if p % 4 < 2 { 3 } else { 9 }).collect();
        let pixels: Vec<usize> = (0..16).filter(|p| p % 4 < 2).collect();
        let h = haralick(&cooccurrence(&levels, 4, &pixels, |q| q % 4 < 2));
        assert_eq!(h.contrast, 0.0);
    }

    #[test]
    fn quantisation_range() {
        assert_eq!(quantize_lightness(0.0), 0);
        assert_eq!(quantize_lightness(100.0), 15);
        assert_eq!(quantize_lightness(6.25), 1);
        assert_eq!(quantize_lightness(-3.0), 0);
    }
}
