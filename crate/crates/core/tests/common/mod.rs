#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use superseg::labels::LabelMap;
use superseg::raster::RasterImage;

/// Lightness steps between every pair of adjacent quadrants are large.
pub const QUADRANT_COLORS: [[u8; 3]; 4] = [[20, 20, 20], [235, 235, 235], [230, 120, 30], [40, 60, 150]];

/// Four constant-colour quadrants with Gaussian noise of standard deviation
/// `noise` on every channel, plus the planted label map.
pub fn quadrants(size: usize, noise: f64, seed: u64) -> (RasterImage, LabelMap) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise).unwrap();
    let half = size / 2;
    let truth = LabelMap::from_fn(size, size, |x, y| ((x >= half) as u32) + 2 * ((y >= half) as u32)).unwrap();
    let img = RasterImage::from_fn(size, size, |x, y| {
        let base = QUADRANT_COLORS[truth.get(x, y) as usize];
        base.map(|c| (c as f64 + normal.sample(&mut rng)).round().clamp(0.0, 255.0) as u8)
    })
    .unwrap();
    (img, truth)
}

/// Voronoi cells around `regions` random sites, each with a random colour,
/// plus mild noise.
pub fn planted(w: usize, h: usize, regions: usize, noise: f64, seed: u64) -> (RasterImage, LabelMap) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sites: Vec<(f64, f64)> = (0..regions)
        .map(|_| (rng.gen_range(0.0..w as f64), rng.gen_range(0.0..h as f64)))
        .collect();
    let colors: Vec<[u8; 3]> = (0..regions).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
    let truth = LabelMap::from_fn(w, h, |x, y| {
        let mut best = (f64::INFINITY, 0);
        for (i, &(sx, sy)) in sites.iter().enumerate() {
            let d = (x as f64 - sx).powi(2) + (y as f64 - sy).powi(2);
            if d < best.0 {
                best = (d, i as u32);
            }
        }
        best.1
    })
    .unwrap();
    let normal = Normal::new(0.0, noise).unwrap();
    let img = RasterImage::from_fn(w, h, |x, y| {
        colors[truth.get(x, y) as usize]
            .map(|c| (c as f64 + normal.sample(&mut rng)).round().clamp(0.0, 255.0) as u8)
    })
    .unwrap();
    (img, truth)
}

pub fn random_labels(rng: &mut impl Rng, w: usize, h: usize, k: u32) -> LabelMap {
    LabelMap::from_fn(w, h, |_, _| rng.gen_range(0..k)).unwrap()
}
