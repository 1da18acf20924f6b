//! sRGB to CIE Lab conversion (D65 white point).

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::raster::RasterImage;

/// D65 reference white in XYZ, Y normalised to 1.
const WHITE_D65: [f64; 3] = [0.950_47, 1.0, 1.088_83];

const EPSILON: f64 = 216.0 / 24389.0;
const KAPPA: f64 = 24389.0 / 27.0;

/// A CIE Lab image with `f64` channels: `L` in `[0, 100]`, `a`/`b` roughly in
/// `[-128, 127]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    width: usize,
    height: usize,
    pixels: Vec<[f64; 3]>,
}

impl LabImage {
    /// Builds a Lab image directly from channel values, mainly for tests and
    /// synthetic inputs.
    pub fn from_pixels(width: usize, height: usize, pixels: Vec<[f64; 3]>) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel buffer length");
        LabImage {
            width,
            height,
            pixels,
        }
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
        self.pixels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.pixels
    }

    /// The lightness channel as a flat buffer.
    pub fn lightness(&self) -> Vec<f64> {
        self.pixels.iter().map(|p| p[0]).collect()
    }
}

fn linear_table() -> &'static [f64; 256] {
    static TABLE: OnceLock<[f64; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [0.0; 256];
        for (i, v) in t.iter_mut().enumerate() {
            let c = i as f64 / 255.0;
            *v = if c <= 0.040_45 {
                c / 12.92
            } else {
                ((c + 0.055) / 1.055).powf(2.4)
            };
        }
        t
    })
}

#[inline]
fn lab_f(t: f64) -> f64 {
    if t > EPSILON {
        t.cbrt()
    } else {
        (KAPPA * t + 16.0) / 116.0
    }
}

/// Converts one 8-bit sRGB triplet to Lab.
pub fn srgb_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let lin = linear_table();
    let r = lin[rgb[0] as usize];
    let g = lin[rgb[1] as usize];
    let b = lin[rgb[2] as usize];

    let x = 0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = 0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b;

    let fx = lab_f(x / WHITE_D65[0]);
    let fy = lab_f(y / WHITE_D65[1]);
    let fz = lab_f(z / WHITE_D65[2]);

    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Converts a raster image to Lab, pixel by pixel.
pub fn to_lab(img: &RasterImage) -> LabImage {
    let pixels = img.pixels().par_iter().map(|&p| srgb_to_lab(p)).collect();
    LabImage {
        width: img.width(),
        height: img.height(),
        pixels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent reference: direct gamma expansion without the lookup
    /// table, Lindbloom's rounded constants, and a matrix applied as
    /// a column-vector product.
    fn reference_lab(rgb: [u8; 3]) -> [f64; 3] {
        let expand = |c: u8| {
            let v = c as f64 / 255.0;
            if v > 0.04045 {
                ((v + 0.055) / 1.055).powf(2.4)
            } else {
                v / 12.92
            }
        };
        let rgb = [expand(rgb[0]), expand(rgb[1]), expand(rgb[2])];
        let m = [
            [0.4124, 0.3576, 0.1805],
            [0.2126, 0.7152, 0.0722],
            [0.0193, 0.1192, 0.9505],
        ];
        let xyz: Vec<f64> = m
            .iter()
            .map(|row| row.iter().zip(rgb).map(|(a, b)| a * b).sum())
            .collect();
        let white = [0.9505, 1.0, 1.0890];
        let f = |t: f64| {
            if t > 0.008856 {
                t.powf(1.0 / 3.0)
            } else {
                7.787 * t + 16.0 / 116.0
            }
        };
        let (fx, fy, fz) = (f(xyz[0] / white[0]), f(xyz[1] / white[1]), f(xyz[2] / white[2]));
        [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
    }

    #[test]
    fn white_point() {
        let [l, a, b] = srgb_to_lab([255, 255, 255]);
        assert!((l - 100.0).abs() < 1e-3);
        assert!(a.abs() < 0.01 && b.abs() < 0.01, "a={a} b={b}");
    }

    #[test]
    fn black() {
        assert_eq!(srgb_to_lab([0, 0, 0]), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn pure_red_matches_reference() {
        let ours = srgb_to_lab([255, 0, 0]);
        let oracle = reference_lab([255, 0, 0]);
        for (o, r) in ours.iter().zip(oracle) {
            assert!((o - r).abs() < 0.05, "{ours:?} vs {oracle:?}");
        }
        let expected = [53.24, 80.09, 67.20];
        for (o, e) in ours.iter().zip(expected) {
            assert!((o - e).abs() < 0.01, "{ours:?}");
        }
    }

    #[test]
    fn whole_cube_agrees_with_reference() {
        for r in (0..=255).step_by(17) {
            for g in (0..=255).step_by(17) {
                for b in (0..=255).step_by(17) {
                    let ours = srgb_to_lab([r, g, b]);
                    let oracle = reference_lab([r, g, b]);
                    for (o, e) in ours.iter().zip(oracle) {
                        assert!((o - e).abs() < 0.1, "{:?}: {ours:?} vs {oracle:?}", (r, g, b));
                    }
                }
            }
        }
    }

    #[test]
    fn conversion_is_deterministic() {
        let img = RasterImage::from_fn(7, 5, |x, y| [(x * 30) as u8, (y * 50) as u8, 99]).unwrap();
        assert_eq!(to_lab(&img), to_lab(&img));
    }
}
