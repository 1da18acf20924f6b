//! Contour-constrained refinement of a superpixel map.
//!
//! Every superpixel crossed by the contour map is cut along the contours:
//! its non-contour pixels are regrouped into their 4-connected components,
//! and the contour pixels themselves are then handed out, wave by wave, to
//! the adjacent piece whose mean Lab color is closest to the pixel's own
//! color. Pieces never leave their parent superpixel.

use std::collections::VecDeque;

use crate::canny::ContourMap;
use crate::error::{Error, Result};
use crate::lab::LabImage;
use crate::labels::{neighbors4, LabelMap};

const UNASSIGNED: u32 = u32::MAX;

/// Splits superpixels of `sp` along `contours`.
pub fn coslic_split(sp: &LabelMap, contours: &ContourMap, lab: &LabImage) -> Result<LabelMap> {
    if sp.dims() != contours.dims() {
        return Err(Error::DimensionMismatch {
            expected: sp.dims(),
            found: contours.dims(),
        });
    }
    if sp.dims() != lab.dims() {
        return Err(Error::DimensionMismatch {
            expected: sp.dims(),
            found: lab.dims(),
        });
    }
    let (w, h) = sp.dims();
    let n = w * h;
    let parent = sp.as_slice();
    let edge = contours.as_slice();

    // Components of non-contour pixels, restricted to one parent.
    let mut piece = vec![UNASSIGNED; n];
    let mut piece_parent: Vec<u32> = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if edge[start] || piece[start] != UNASSIGNED {
            continue;
        }
        let id = piece_parent.len() as u32;
        piece_parent.push(parent[start]);
        piece[start] = id;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            for q in neighbors4(p, w, h) {
                if !edge[q] && piece[q] == UNASSIGNED && parent[q] == parent[p] {
                    piece[q] = id;
                    queue.push_back(q);
                }
            }
        }
    }

    let mut sums = vec![[0.0f64; 4]; piece_parent.len()];
    for p in 0..n {
        if piece[p] != UNASSIGNED {
            let s = &mut sums[piece[p] as usize];
            let c = lab.pixels()[p];
            s[0] += c[0];
            s[1] += c[1];
            s[2] += c[2];
            s[3] += 1.0;
        }
    }
    let means: Vec<[f64; 3]> = sums
        .iter()
        .map(|s| [s[0] / s[3], s[1] / s[3], s[2] / s[3]])
        .collect();

    // Wavefront attachment of contour pixels. Each wave only looks at pieces
    // settled before it, so the result does not depend on scan order.
    let mut frontier: Vec<usize> = (0..n).filter(|&p| edge[p]).collect();
    loop {
        let mut settled = Vec::new();
        let mut pending = Vec::new();
        for &p in &frontier {
            let color = lab.pixels()[p];
            let mut best: Option<(f64, u32)> = None;
            for q in neighbors4(p, w, h) {
                let id = piece[q];
                if id == UNASSIGNED || parent[q] != parent[p] {
                    continue;
                }
                let m = means[id as usize];
                let d = (color[0] - m[0]).powi(2)
                    + (color[1] - m[1]).powi(2)
                    + (color[2] - m[2]).powi(2);
                if best.map_or(true, |(bd, bid)| d < bd || (d == bd && id < bid)) {
                    best = Some((d, id));
                }
            }
            match best {
                Some((_, id)) => settled.push((p, id)),
                None => pending.push(p),
            }
        }
        if settled.is_empty() {
            break;
        }
        for (p, id) in settled {
            piece[p] = id;
        }
        frontier = pending;
    }

    // Leftovers are parents made only of contour pixels: they keep one
    // piece per connected remainder.
    for start in frontier {
        if piece[start] != UNASSIGNED {
            continue;
        }
        let id = piece_parent.len() as u32;
        piece_parent.push(parent[start]);
        piece[start] = id;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            for q in neighbors4(p, w, h) {
                if piece[q] == UNASSIGNED && parent[q] == parent[p] {
                    piece[q] = id;
                    queue.push_back(q);
                }
            }
        }
    }

    Ok(LabelMap::new(w, h, piece)?.relabel_raster_order())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray_lab(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> LabImage {
        let mut px = Vec::new();
        for y in 0..h {
            for x in 0..w {
                px.push([f(x, y), 0.0, 0.0]);
            }
        }
        LabImage::from_pixels(w, h, px)
    }

    #[test]
    fn no_contours_keeps_partition() {
        let sp = LabelMap::from_fn(8, 6, |x, y| (x / 4 + 2 * (y / 3)) as u32).unwrap();
        let lab = gray_lab(8, 6, |x, _| x as f64);
        let out = coslic_split(&sp, &ContourMap::empty(8, 6).unwrap(), &lab).unwrap();
        assert_eq!(out.relabel_raster_order(), sp.relabel_raster_order());
    }

    #[test]
    fn vertical_contour_splits_square() {
        let sp = LabelMap::uniform(10, 10).unwrap();
        let contours = ContourMap::from_fn(10, 10, |x, _| x == 5).unwrap();
        // left darker, right brighter, contour column close to the right
        let lab = gray_lab(10, 10, |x, _| match x {
            0..=4 => 20.0,
            5 => 75.0,
            _ => 80.0,
        });
        let out = coslic_split(&sp, &contours, &lab).unwrap();
        assert_eq!(out.count_distinct(), 2);
        assert_eq!(out.connected_components().num_labels(), 2);
        let mut sizes = out.region_sizes();
        sizes.sort();
        assert_eq!(sizes, vec![50, 50]);
        assert_eq!(out.get(5, 3), out.get(6, 3));
        assert_ne!(out.get(5, 3), out.get(4, 3));
    }

    #[test]
    fn pieces_refine_parents() {
        let sp = LabelMap::from_fn(12, 8, |x, _| (x / 6) as u32).unwrap();
        let contours = ContourMap::from_fn(12, 8, |x, y| x + y == 9).unwrap();
        let lab = gray_lab(12, 8, |x, y| (x * 5 + y * 3) as f64);
        let out = coslic_split(&sp, &contours, &lab).unwrap();
        assert!(out.is_connected_partition());
        let mut owner = vec![None; out.num_labels()];
        for (o, p) in out.as_slice().iter().zip(sp.as_slice()) {
            let slot = &mut owner[*o as usize];
            assert!(slot.map_or(true, |s| s == *p));
            *slot = Some(*p);
        }
    }

    #[test]
    fn all_contour_superpixel_survives() {
        let sp = LabelMap::from_fn(4, 2, |x, _| (x / 2) as u32).unwrap();
        let contours = ContourMap::from_fn(4, 2, |x, _| x < 2).unwrap();
        let lab = gray_lab(4, 2, |_, _| 50.0);
        let out = coslic_split(&sp, &contours, &lab).unwrap();
        assert_eq!(out.count_distinct(), 2);
        assert_eq!(out.region_sizes().iter().sum::<usize>(), 8);
    }

    #[test]
    fn dimension_mismatch() {
        let sp = LabelMap::uniform(4, 4).unwrap();
        let lab = gray_lab(4, 4, |_, _| 0.0);
        assert!(coslic_split(&sp, &ContourMap::empty(5, 4).unwrap(), &lab).is_err());
    }
}
