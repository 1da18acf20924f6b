//! 8-bit sRGB raster images and file ingestion.

use std::path::Path;

use image::{DynamicImage, ImageError, ImageReader};

use crate::error::{Error, Result};

/// An sRGB image with three 8-bit channels, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "{} pixels for a {}x{} image",
                pixels.len(),
                width,
                height
            )));
        }
        Ok(RasterImage {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
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

    /// Pixel count `N`.
    #[inline]
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn to_rgb_image(&self) -> image::RgbImage {
        let raw = self.pixels.iter().flatten().copied().collect();
        image::RgbImage::from_raw(self.width as u32, self.height as u32, raw)
            .expect("buffer length matches dimensions")
    }

    pub fn from_dynamic(img: DynamicImage) -> Result<Self> {
        let (w, h) = (img.width() as usize, img.height() as usize);
        if w == 0 || h == 0 {
            return Err(Error::EmptyImage);
        }
        let pixels: Vec<[u8; 3]> = match img {
            DynamicImage::ImageRgb8(buf) => buf.pixels().map(|p| p.0).collect(),
            DynamicImage::ImageRgba8(buf) => {
                buf.pixels().map(|p| [p.0[0], p.0[1], p.0[2]]).collect()
            }
            DynamicImage::ImageLuma8(buf) => buf.pixels().map(|p| [p.0[0]; 3]).collect(),
            DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| [p.0[0]; 3]).collect(),
            other => {
                return Err(Error::UnsupportedFormat(format!(
                    "{:?} pixels (expected 8-bit RGB or gray)",
                    other.color()
                )))
            }
        };
        Self::new(w, h, pixels)
    }
}

/// Loads a PNG, PPM or JPEG file as 8-bit sRGB.
pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    if reader.format().is_none() {
        return Err(Error::UnsupportedFormat(format!(
            "{}: unrecognised image format",
            path.display()
        )));
    }
    let img = reader.decode().map_err(|e| decode_error(path, e))?;
    RasterImage::from_dynamic(img)
}

pub(crate) fn decode_error(path: &Path, e: ImageError) -> Error {
    match e {
        ImageError::IoError(io) => Error::io(path, io),
        ImageError::Unsupported(u) => Error::UnsupportedFormat(format!("{}: {u}", path.display())),
        other => Error::Decode {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_white_pixel_png() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("white.png");
        image::RgbImage::from_pixel(1, 1, image::Rgb([255, 255, 255]))
            .save(&path)
            .unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!(img.dims(), (1, 1));
        assert_eq!(img.get(0, 0), [255, 255, 255]);
    }

    #[test]
    fn bsds_sized_ppm() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.ppm");
        image::RgbImage::from_fn(481, 321, |x, y| image::Rgb([x as u8, y as u8, 7]))
            .save(&path)
            .unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!(img.dims(), (481, 321));
        assert_eq!(img.get(300, 200), [44, 200, 7]);
    }

    #[test]
    fn truncated_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cut.png");
        image::RgbImage::from_pixel(32, 32, image::Rgb([1, 2, 3]))
            .save(&path)
            .unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        let err = load_image(&path).unwrap_err();
        assert!(matches!(err, Error::Io { .. } | Error::Decode { .. }), "{err}");
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_image("/nonexistent/definitely.png"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn sixteen_bit_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("deep.png");
        image::ImageBuffer::<image::Rgb<u16>, _>::from_pixel(2, 2, image::Rgb([1000, 2, 3]))
            .save(&path)
            .unwrap();
        assert!(matches!(load_image(&path), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn zero_dims_rejected() {
        assert!(matches!(RasterImage::new(0, 3, vec![]), Err(Error::EmptyImage)));
    }
}
