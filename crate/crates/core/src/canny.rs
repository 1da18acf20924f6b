//! Canny edge detection producing the global contour map.
//!
//! The detector runs on the Lab lightness channel rescaled to `[0, 255]`:
//! Gaussian blur, Sobel derivatives, non-maximum suppression along the
//! quantised gradient direction, then hysteresis with 8-connected growth from
//! strong pixels.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::gradient::sobel;
use crate::lab::{to_lab, LabImage};
use crate::raster::RasterImage;

pub const DEFAULT_CANNY_SIGMA: f64 = 1.4;

/// Binary mask of global contour pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContourMap {
    width: usize,
    height: usize,
    mask: Vec<bool>,
}

impl ContourMap {
    pub fn new(width: usize, height: usize, mask: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if mask.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "{} mask entries for a {}x{} map",
                mask.len(),
                width,
                height
            )));
        }
        Ok(ContourMap {
            width,
            height,
            mask,
        })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut mask = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                mask.push(f(x, y));
            }
        }
        Self::new(width, height, mask)
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
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x]
    }

    #[inline]
    pub fn as_slice(&self) -> &[bool] {
        &self.mask
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&c| c).count()
    }

    /// 3x3 dilation: true where any pixel within Chebyshev distance 1 is a
    /// contour pixel.
    pub fn dilated(&self) -> Vec<bool> {
        let (w, h) = (self.width, self.height);
        let mut out = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                if !self.mask[y * w + x] {
                    continue;
                }
                for yy in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                    for xx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                        out[yy * w + xx] = true;
                    }
                }
            }
        }
        out
    }
}

/// Hysteresis thresholds and blur width.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CannyParams {
    pub sigma: f64,
    pub low: f64,
    pub high: f64,
}

impl CannyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "canny sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.low >= 0.0) || !(self.low <= self.high) || !self.high.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "canny thresholds need 0 <= low <= high, got low={} high={}",
                self.low, self.high
            )));
        }
        Ok(())
    }

    /// Median heuristic: `low = 0.66 m`, `high = 1.33 m` with `m` the median
    /// lightness on the `[0, 255]` scale.
    pub fn auto(img: &RasterImage, sigma: f64) -> Self {
        let gray = gray_levels(&to_lab(img));
        let (low, high) = median_thresholds(&gray);
        CannyParams { sigma, low, high }
    }
}

pub(crate) fn gray_levels(lab: &LabImage) -> Vec<f64> {
    lab.pixels().iter().map(|p| p[0] * 2.55).collect()
}

pub(crate) fn median_thresholds(gray: &[f64]) -> (f64, f64) {
    let mut sorted = gray.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    (0.66 * median, 1.33 * median)
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

fn blur(values: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let mut tmp = vec![0.0; values.len()];
    for y in 0..h {
        let row = &values[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (j, kv) in k.iter().enumerate() {
                let xx = (x as isize + j as isize - r).clamp(0, w as isize - 1) as usize;
                acc += kv * row[xx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; values.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, kv) in k.iter().enumerate() {
                let yy = (y as isize + j as isize - r).clamp(0, h as isize - 1) as usize;
                acc += kv * tmp[yy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Runs Canny on `img` with explicit thresholds.
pub fn canny(img: &RasterImage, low: f64, high: f64, sigma: f64) -> Result<ContourMap> {
    let params = CannyParams { sigma, low, high };
    params.validate()?;
    canny_lab(&to_lab(img), &params)
}

/// Canny on an already converted image.
pub fn canny_lab(lab: &LabImage, params: &CannyParams) -> Result<ContourMap> {
    params.validate()?;
    let (w, h) = lab.dims();
    let smooth = blur(&gray_levels(lab), w, h, params.sigma);
    let (gx, gy) = sobel(&smooth, w, h);
    let mag: Vec<f64> = gx.iter().zip(&gy).map(|(x, y)| x.hypot(*y)).collect();

    // Non-maximum suppression. Ties are kept on the "forward" side only so a
    // symmetric ridge two pixels wide thins to one pixel.
    let mut thin = vec![0.0; w * h];
    let at = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = mag[i];
            if m <= 0.0 {
                continue;
            }
            let angle = gy[i].atan2(gx[i]).to_degrees().rem_euclid(180.0);
            let (dx, dy) = if !(22.5..157.5).contains(&angle) {
                (1, 0)
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            let (xi, yi) = (x as isize, y as isize);
            let before = at(xi - dx, yi - dy);
            let after = at(xi + dx, yi + dy);
            if m > before && m >= after {
                thin[i] = m;
            }
        }
    }

    // Hysteresis.
    let mut mask = vec![false; w * h];
    let mut queue = VecDeque::new();
    for i in 0..w * h {
        if thin[i] > 0.0 && thin[i] >= params.high && !mask[i] {
            mask[i] = true;
            queue.push_back(i);
            while let Some(p) = queue.pop_front() {
                let (px, py) = ((p % w) as isize, (p / w) as isize);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (qx, qy) = (px + dx, py + dy);
                        if qx < 0 || qy < 0 || qx >= w as isize || qy >= h as isize {
                            continue;
                        }
                        let q = qy as usize * w + qx as usize;
                        if !mask[q] && thin[q] > 0.0 && thin[q] >= params.low {
                            mask[q] = true;
                            queue.push_back(q);
                        }
                    }
                }
            }
        }
    }
    ContourMap::new(w, h, mask)
}
