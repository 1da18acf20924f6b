//! Sobel gradients of the lightness channel.

use std::f64::consts::PI;

use crate::lab::LabImage;

/// Largest per-axis Sobel response for a channel spanning `[0, 100]`.
pub const MAX_SOBEL_RESPONSE: f64 = 400.0;

/// Per-pixel gradient magnitude and orientation folded into `[0, π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    width: usize,
    height: usize,
    magnitude: Vec<f64>,
    orientation: Vec<f64>,
}

impl GradientField {
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
    pub fn magnitude(&self) -> &[f64] {
        &self.magnitude
    }

    #[inline]
    pub fn orientation(&self) -> &[f64] {
        &self.orientation
    }
}

/// 3x3 Sobel derivatives with edge-replicated borders.
pub(crate) fn sobel(values: &[f64], width: usize, height: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; values.len()];
    let mut gy = vec![0.0; values.len()];
    let at = |x: isize, y: isize| {
        let x = x.clamp(0, width as isize - 1) as usize;
        let y = y.clamp(0, height as isize - 1) as usize;
        values[y * width + x]
    };
    for y in 0..height as isize {
        for x in 0..width as isize {
            let i = y as usize * width + x as usize;
            gx[i] = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            gy[i] = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
        }
    }
    (gx, gy)
}

/// Folds an angle onto `[0, π)`.
#[inline]
pub fn fold_orientation(theta: f64) -> f64 {
    let mut t = theta % PI;
    if t < 0.0 {
        t += PI;
    }
    if t >= PI {
        t -= PI;
    }
    t
}

pub fn gradient_field(lab: &LabImage) -> GradientField {
    let (w, h) = lab.dims();
    let (gx, gy) = sobel(&lab.lightness(), w, h);
    let magnitude = gx.iter().zip(&gy).map(|(x, y)| x.hypot(*y)).collect();
    let orientation = gx
        .iter()
        .zip(&gy)
        .map(|(x, y)| fold_orientation(y.atan2(*x)))
        .collect();
    GradientField {
        width: w,
        height: h,
        magnitude,
        orientation,
    }
}
