//! Per-pixel region labels, the common currency of every stage: superpixels,
//! intermediate merge states, final segmentations and ground truth all use
//! [`LabelMap`].

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// A row-major map from pixel to region label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    num_labels: usize,
}

impl LabelMap {
    /// Wraps a raw label buffer. `num_labels` is taken as `max + 1`; labels
    /// need not be dense (ground truth frequently is not).
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if labels.len() != width * height {
            return Err(Error::Partition(format!(
                "{} labels for a {}x{} map",
                labels.len(),
                width,
                height
            )));
        }
        let num_labels = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
        Ok(LabelMap {
            width,
            height,
            labels,
            num_labels,
        })
    }

    /// A map with every pixel in region 0.
    pub fn uniform(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u32,
    ) -> Result<Self> {
        let mut labels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                labels.push(f(x, y));
            }
        }
        Self::new(width, height, labels)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// One past the largest label in use.
    #[inline]
    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    #[inline]
    pub fn as_slice(&self) -> &[u32] {
        &self.labels
    }

    pub fn into_vec(self) -> Vec<u32> {
        self.labels
    }

    /// Pixel count per label, indexed by label.
    pub fn region_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.num_labels];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }

    /// Number of distinct labels actually present.
    pub fn count_distinct(&self) -> usize {
        self.region_sizes().iter().filter(|&&s| s > 0).count()
    }

    /// True when every label in `[0, num_labels)` is used.
    pub fn is_dense(&self) -> bool {
        self.region_sizes().iter().all(|&s| s > 0)
    }

    /// Renumbers labels onto `[0, k)` preserving their relative order, so
    /// `{0, 5, 9}` becomes `{0, 1, 2}`.
    pub fn relabel_compact(&self) -> LabelMap {
        let sizes = self.region_sizes();
        let mut remap = vec![u32::MAX; sizes.len()];
        let mut next = 0u32;
        for (label, &size) in sizes.iter().enumerate() {
            if size > 0 {
                remap[label] = next;
                next += 1;
            }
        }
        let labels = self.labels.iter().map(|&l| remap[l as usize]).collect();
        LabelMap {
            width: self.width,
            height: self.height,
            labels,
            num_labels: next as usize,
        }
    }

    /// Renumbers labels in order of first appearance in raster order.
    pub fn relabel_raster_order(&self) -> LabelMap {
        let mut remap = vec![u32::MAX; self.num_labels];
        let mut next = 0u32;
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                let slot = &mut remap[l as usize];
                if *slot == u32::MAX {
                    *slot = next;
                    next += 1;
                }
                *slot
            })
            .collect();
        LabelMap {
            width: self.width,
            height: self.height,
            labels,
            num_labels: next as usize,
        }
    }

    /// Labels the 4-connected components of equal-label pixels. Components
    /// are numbered in raster order of their first pixel.
    pub fn connected_components(&self) -> LabelMap {
        let (w, h) = (self.width, self.height);
        let mut out = vec![u32::MAX; w * h];
        let mut next = 0u32;
        let mut queue = VecDeque::new();
        for start in 0..w * h {
            if out[start] != u32::MAX {
                continue;
            }
            let label = self.labels[start];
            out[start] = next;
            queue.push_back(start);
            while let Some(p) = queue.pop_front() {
                for q in neighbors4(p, w, h) {
                    if out[q] == u32::MAX && self.labels[q] == label {
                        out[q] = next;
                        queue.push_back(q);
                    }
                }
            }
            next += 1;
        }
        LabelMap {
            width: w,
            height: h,
            labels: out,
            num_labels: next as usize,
        }
    }

    /// True when labels are dense and every label is a single 4-connected
    /// component.
    pub fn is_connected_partition(&self) -> bool {
        self.is_dense() && self.connected_components().num_labels() == self.count_distinct()
    }

    /// Boundary mask: a pixel is on a boundary when its right or bottom
    /// neighbour carries a different label. Exactly one pixel of each
    /// differing 4-adjacent pair is marked, so a straight border is one pixel
    /// wide.
    pub fn boundary_mask(&self) -> Vec<bool> {
        let (w, h) = (self.width, self.height);
        let mut mask = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let l = self.labels[i];
                if (x + 1 < w && self.labels[i + 1] != l) || (y + 1 < h && self.labels[i + w] != l)
                {
                    mask[i] = true;
                }
            }
        }
        mask
    }

    pub fn same_dims(&self, other: &LabelMap) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                found: other.dims(),
            });
        }
        Ok(())
    }
}

/// 4-neighbours of a linear pixel index.
#[inline]
pub(crate) fn neighbors4(p: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let x = p % w;
    let y = p / w;
    let left = (x > 0).then(|| p - 1);
    let right = (x + 1 < w).then(|| p + 1);
    let up = (y > 0).then(|| p - w);
    let down = (y + 1 < h).then(|| p + w);
    [left, right, up, down].into_iter().flatten()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compact_sparse_labels() {
        let m = LabelMap::new(3, 1, vec![9, 0, 5]).unwrap();
        let c = m.relabel_compact();
        assert_eq!(c.as_slice(), &[2, 0, 1]);
        assert_eq!(c.num_labels(), 3);
    }

    #[test]
    fn compact_is_identity_on_dense() {
        let m = LabelMap::new(2, 2, vec![0, 1, 2, 1]).unwrap();
        assert_eq!(m.relabel_compact(), m);
    }

    #[test]
    fn rejects_wrong_length_and_zero_dims() {
        assert!(LabelMap::new(2, 2, vec![0; 3]).is_err());
        assert!(matches!(LabelMap::new(0, 2, vec![]), Err(Error::EmptyImage)));
    }

    #[test]
    fn components_split_disconnected_label() {
        // label 0 appears on both sides of a label-1 column
        let m = LabelMap::from_fn(3, 2, |x, _| if x == 1 { 1 } else { 0 }).unwrap();
        assert!(!m.is_connected_partition());
        let cc = m.connected_components();
        assert_eq!(cc.num_labels(), 3);
        assert!(cc.is_connected_partition());
    }

    #[test]
    fn diagonal_touch_is_not_connected() {
        let m = LabelMap::new(2, 2, vec![0, 1, 1, 0]).unwrap();
        assert_eq!(m.connected_components().num_labels(), 4);
    }

    #[test]
    fn boundary_is_one_pixel_wide() {
        let m = LabelMap::from_fn(6, 3, |x, _| (x >= 3) as u32).unwrap();
        let b = m.boundary_mask();
        for y in 0..3 {
            for x in 0..6 {
                assert_eq!(b[y * 6 + x], x == 2);
            }
        }
    }
}
