//! Superpixel adjacency built from a label map: which superpixels touch, how
//! many 4-adjacent pixel pairs straddle each border, and how many of those
//! pairs lie next to a contour.

use std::collections::BTreeMap;

use crate::labels::LabelMap;

/// Pixel-level facts about the border between two superpixels.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BorderStats {
    /// Straddling 4-adjacent pixel pairs `(pixel in lower label, pixel in
    /// higher label)`.
    pub pixel_pairs: Vec<(u32, u32)>,
    /// Pairs with a contour pixel within Chebyshev distance 1 of either pixel.
    pub near_contour: usize,
}

impl BorderStats {
    /// Common border length `β` in pixel pairs.
    #[inline]
    pub fn length(&self) -> usize {
        self.pixel_pairs.len()
    }
}

#[derive(Debug, Clone, Default)]
pub struct SuperpixelAdjacency {
    neighbors: Vec<Vec<u32>>,
    borders: BTreeMap<(u32, u32), BorderStats>,
}

impl SuperpixelAdjacency {
    /// `near_contour` is an optional per-pixel mask (typically a dilated
    /// contour map).
    pub fn build(map: &LabelMap, near_contour: Option<&[bool]>) -> Self {
        let (w, h) = map.dims();
        let labels = map.as_slice();
        let mut borders: BTreeMap<(u32, u32), BorderStats> = BTreeMap::new();
        let mut visit = |p: usize, q: usize| {
            let (lp, lq) = (labels[p], labels[q]);
            if lp == lq {
                return;
            }
            let (key, pair) = if lp < lq {
                ((lp, lq), (p as u32, q as u32))
            } else {
                ((lq, lp), (q as u32, p as u32))
            };
            let entry = borders.entry(key).or_default();
            entry.pixel_pairs.push(pair);
            if near_contour.is_some_and(|m| m[p] || m[q]) {
                entry.near_contour += 1;
            }
        };
        for y in 0..h {
            for x in 0..w {
                let p = y * w + x;
                if x + 1 < w {
                    visit(p, p + 1);
                }
                if y + 1 < h {
                    visit(p, p + w);
                }
            }
        }
        let mut neighbors = vec![Vec::new(); map.num_labels()];
        for &(a, b) in borders.keys() {
            neighbors[a as usize].push(b);
            neighbors[b as usize].push(a);
        }
        for n in &mut neighbors {
            n.sort_unstable();
        }
        SuperpixelAdjacency { neighbors, borders }
    }

    pub fn num_superpixels(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, sp: u32) -> impl Iterator<Item = u32> + '_ {
        self.neighbors
            .get(sp as usize)
            .into_iter()
            .flat_map(|n| n.iter().copied())
    }

    pub fn border(&self, a: u32, b: u32) -> Option<&BorderStats> {
        let key = if a < b { (a, b) } else { (b, a) };
        self.borders.get(&key)
    }

    /// All borders keyed by `(lower, higher)` superpixel id.
    pub fn borders(&self) -> &BTreeMap<(u32, u32), BorderStats> {
        &self.borders
    }
}

/// Pixels with at least one 4-neighbour outside their own label or outside
/// the image, counted per label.
pub fn circumferences(map: &LabelMap) -> Vec<usize> {
    let (w, h) = map.dims();
    let labels = map.as_slice();
    let mut out = vec![0usize; map.num_labels()];
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            let l = labels[p];
            let on_edge = x == 0 || y == 0 || x + 1 == w || y + 1 == h;
            let differs = (x > 0 && labels[p - 1] != l)
                || (x + 1 < w && labels[p + 1] != l)
                || (y > 0 && labels[p - w] != l)
                || (y + 1 < h && labels[p + w] != l);
            if on_edge || differs {
                out[l as usize] += 1;
            }
        }
    }
    out
}
