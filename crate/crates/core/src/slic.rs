//! SLIC superpixels: k-means in joint Lab + image-plane space, restricted to
//! a `2S x 2S` window around each center.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{neighbors4, LabelMap};
use crate::lab::LabImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlicParams {
    /// Desired number of superpixels `K`.
    pub k: usize,
    /// Compactness weight `m`.
    pub m: f64,
    pub max_iters: usize,
    /// Reserved; initialisation is a deterministic grid.
    pub seed: u64,
}

impl Default for SlicParams {
    fn default() -> Self {
        SlicParams {
            k: 600,
            m: 10.0,
            max_iters: 10,
            seed: 0,
        }
    }
}

impl SlicParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("K must be at least 1".into()));
        }
        if !(self.m > 0.0) || !self.m.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "compactness m must be positive, got {}",
                self.m
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Joint color/space distance `sqrt((d_c / m)^2 + (d_s / S)^2)`.
#[inline]
pub fn slic_distance(color_dist: f64, m: f64, spatial_dist: f64, step: f64) -> f64 {
    ((color_dist / m).powi(2) + (spatial_dist / step).powi(2)).sqrt()
}

#[derive(Debug, Clone, Copy)]
struct Center {
    lab: [f64; 3],
    x: f64,
    y: f64,
}

/// Grid interval `S = sqrt(N / K)`.
pub fn grid_interval(num_pixels: usize, k: usize) -> f64 {
    (num_pixels as f64 / k as f64).sqrt()
}

pub fn slic(lab: &LabImage, params: &SlicParams) -> Result<LabelMap> {
    params.validate()?;
    let (w, h) = lab.dims();
    let n = w * h;
    if params.k > n {
        return Err(Error::InvalidParameter(format!(
            "K = {} exceeds the pixel count {}",
            params.k, n
        )));
    }
    let step = grid_interval(n, params.k);
    let nx = ((w as f64 / step).round() as usize).clamp(1, w);
    let ny = ((h as f64 / step).round() as usize).clamp(1, h);
    let cell_w = w as f64 / nx as f64;
    let cell_h = h as f64 / ny as f64;

    let grad = lightness_gradient(lab);
    let mut centers = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let fx = (i as f64 + 0.5) * cell_w - 0.5;
            let fy = (j as f64 + 0.5) * cell_h - 0.5;
            let px = (fx.round() as usize).min(w - 1);
            let py = (fy.round() as usize).min(h - 1);
            let (x, y) = match perturb_seed(&grad, w, h, px, py, step) {
                moved if moved != (px, py) => (moved.0 as f64, moved.1 as f64),
                _ => (fx, fy),
            };
            centers.push(Center {
                lab: lab.get((x.round() as usize).min(w - 1), (y.round() as usize).min(h - 1)),
                x,
                y,
            });
        }
    }

    // Start from the grid cell partition so pixels outside every window
    // still carry a sensible label.
    let mut labels: Vec<u32> = (0..n)
        .map(|p| {
            let (x, y) = (p % w, p / w);
            let i = ((x as f64 / cell_w) as usize).min(nx - 1);
            let j = ((y as f64 / cell_h) as usize).min(ny - 1);
            (j * nx + i) as u32
        })
        .collect();
    let mut dist = vec![f64::INFINITY; n];
    let reach = step.ceil() as isize;

    for _ in 0..params.max_iters {
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        for (ci, c) in centers.iter().enumerate() {
            let (cx, cy) = (c.x.round() as isize, c.y.round() as isize);
            let x0 = (cx - reach).max(0) as usize;
            let x1 = ((cx + reach) as usize).min(w - 1);
            let y0 = (cy - reach).max(0) as usize;
            let y1 = ((cy + reach) as usize).min(h - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let p = y * w + x;
                    let px = lab.pixels()[p];
                    let dc = ((px[0] - c.lab[0]).powi(2)
                        + (px[1] - c.lab[1]).powi(2)
                        + (px[2] - c.lab[2]).powi(2))
                    .sqrt();
                    let ds = ((x as f64 - c.x).powi(2) + (y as f64 - c.y).powi(2)).sqrt();
                    let d = slic_distance(dc, params.m, ds, step);
                    // strict: ties keep the lower cluster index
                    if d < dist[p] {
                        dist[p] = d;
                        labels[p] = ci as u32;
                    }
                }
            }
        }

        let mut sums = vec![[0.0f64; 6]; centers.len()];
        for (p, &l) in labels.iter().enumerate() {
            let s = &mut sums[l as usize];
            let px = lab.pixels()[p];
            s[0] += px[0];
            s[1] += px[1];
            s[2] += px[2];
            s[3] += (p % w) as f64;
            s[4] += (p / w) as f64;
            s[5] += 1.0;
        }
        let mut moved = 0.0f64;
        for (c, s) in centers.iter_mut().zip(&sums) {
            if s[5] == 0.0 {
                continue;
            }
            let nx = s[3] / s[5];
            let ny = s[4] / s[5];
            moved = moved.max(((nx - c.x).powi(2) + (ny - c.y).powi(2)).sqrt());
            *c = Center {
                lab: [s[0] / s[5], s[1] / s[5], s[2] / s[5]],
                x: nx,
                y: ny,
            };
        }
        if moved < 1.0 {
            break;
        }
    }

    let raw = LabelMap::new(w, h, labels)?;
    let min_size = (step * step / 4.0).max(1.0);
    enforce_connectivity(&raw, min_size)
}

fn lightness_gradient(lab: &LabImage) -> Vec<f64> {
    let (w, h) = lab.dims();
    let l = |x: usize, y: usize| lab.pixels()[y * w + x][0];
    let mut g = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let dx = l((x + 1).min(w - 1), y) - l(x.saturating_sub(1), y);
            let dy = l(x, (y + 1).min(h - 1)) - l(x, y.saturating_sub(1));
            g[y * w + x] = dx * dx + dy * dy;
        }
    }
    g
}

/// Moves a seed to the lowest-gradient pixel of its 3x3 neighbourhood so
/// centers do not start on an edge. Only applies when cells are at least
/// 3 pixels wide.
fn perturb_seed(
    grad: &[f64],
    w: usize,
    h: usize,
    x: usize,
    y: usize,
    step: f64,
) -> (usize, usize) {
    if step < 3.0 {
        return (x, y);
    }
    let mut best = (x, y);
    let mut best_g = grad[y * w + x];
    for yy in y.saturating_sub(1)..=(y + 1).min(h - 1) {
        for xx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
            let g = grad[yy * w + xx];
            if g < best_g {
                best_g = g;
                best = (xx, yy);
            }
        }
    }
    best
}

/// Splits every label into its 4-connected components, then folds fragments
/// smaller than `min_size` pixels into their largest adjacent fragment.
/// Output labels are dense and numbered in raster order.
pub fn enforce_connectivity(map: &LabelMap, min_size: f64) -> Result<LabelMap> {
    let (w, h) = map.dims();
    let comps = map.connected_components();
    let nc = comps.num_labels();
    let cl = comps.as_slice();

    let mut size = vec![0usize; nc];
    for &c in cl {
        size[c as usize] += 1;
    }
    let mut adjacency: Vec<BTreeMap<u32, usize>> = vec![BTreeMap::new(); nc];
    for p in 0..w * h {
        for q in neighbors4(p, w, h) {
            if cl[q] != cl[p] {
                *adjacency[cl[p] as usize].entry(cl[q]).or_default() += 1;
            }
        }
    }

    let mut parent: Vec<u32> = (0..nc as u32).collect();
    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            let up = parent[parent[x as usize] as usize];
            parent[x as usize] = up;
            x = up;
        }
        x
    }

    let mut order: Vec<u32> = (0..nc as u32)
        .filter(|&c| (size[c as usize] as f64) < min_size)
        .collect();
    order.sort_by_key(|&c| (size[c as usize], c));
    let mut merged_size = size.clone();
    for c in order {
        let root = find(&mut parent, c);
        if (merged_size[root as usize] as f64) >= min_size {
            continue;
        }
        // Largest neighbouring group, ties to the lower id.
        let mut best: Option<(usize, u32)> = None;
        for &nb in adjacency[c as usize].keys() {
            let r = find(&mut parent, nb);
            if r == root {
                continue;
            }
            let s = merged_size[r as usize];
            if best.map_or(true, |(bs, br)| s > bs || (s == bs && r < br)) {
                best = Some((s, r));
            }
        }
        if let Some((_, target)) = best {
            parent[root as usize] = target;
            merged_size[target as usize] += merged_size[root as usize];
        }
    }

    let labels: Vec<u32> = cl.iter().map(|&c| find(&mut parent, c)).collect();
    Ok(LabelMap::new(w, h, labels)?.relabel_raster_order())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_lab(w: usize, h: usize, v: [f64; 3]) -> LabImage {
        LabImage::from_pixels(w, h, vec![v; w * h])
    }

    #[test]
    fn distance_kernel() {
        // (3/3)^2 + (8/8)^2 = 2
        assert!((slic_distance(3.0, 3.0, 8.0, 8.0) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(slic_distance(0.0, 10.0, 0.0, 5.0), 0.0);
    }

    #[test]
    fn flat_image_four_quadrants() {
        let lab = flat_lab(20, 20, [50.0, 0.0, 0.0]);
        let sp = slic(
            &lab,
            &SlicParams {
                k: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(sp.num_labels(), 4);
        for s in sp.region_sizes() {
            assert_eq!(s, 100);
        }
        for y in 0..20 {
            for x in 0..20 {
                let q = (y / 10) * 2 + x / 10;
                assert_eq!(sp.get(x, y), q as u32);
            }
        }
    }

    #[test]
    fn k_equals_n_gives_singletons() {
        let px: Vec<[f64; 3]> = (0..30).map(|i| [(i * 3) as f64, 0.0, 0.0]).collect();
        let lab = LabImage::from_pixels(6, 5, px);
        let sp = slic(
            &lab,
            &SlicParams {
                k: 30,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(sp.num_labels(), 30);
    }

    #[test]
    fn k_above_n_is_an_error() {
        let lab = flat_lab(3, 3, [0.0; 3]);
        let err = slic(
            &lab,
            &SlicParams {
                k: 10,
                ..Default::default()
            },
        );
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn output_is_connected_partition() {
        let (w, h) = (48, 40);
        let px: Vec<[f64; 3]> = (0..w * h)
            .map(|p| {
                let (x, y) = (p % w, p / w);
                let v = if (x / 7 + y / 5) % 3 == 0 { 80.0 } else { 20.0 };
                [v, (x as f64).sin() * 10.0, 0.0]
            })
            .collect();
        let lab = LabImage::from_pixels(w, h, px);
        let sp = slic(
            &lab,
            &SlicParams {
                k: 40,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(sp.is_connected_partition());
        assert_eq!(sp.region_sizes().iter().sum::<usize>(), w * h);
    }

    #[test]
    fn small_fragments_fold_into_largest_neighbour() {
        // label 0 has a stray single pixel inside label 1 (bigger) next to
        // label 2 (smaller)
        let map = LabelMap::from_fn(6, 4, |x, y| {
            if x == 4 && y == 1 {
                0
            } else if x < 2 {
                0
            } else if x >= 5 {
                2
            } else {
                1
            }
        })
        .unwrap();
        let out = enforce_connectivity(&map, 2.0).unwrap();
        assert!(out.is_connected_partition());
        assert_eq!(out.get(4, 1), out.get(3, 1));
    }
}
