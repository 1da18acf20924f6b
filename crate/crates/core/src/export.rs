//! PNG export of label maps, boundary overlays and contour masks, and 16-bit
//! label PNG import.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, Luma, Rgb, RgbImage};

use crate::canny::ContourMap;
use crate::error::{Error, Result};
use crate::labels::LabelMap;
use crate::raster::{decode_error, RasterImage};

/// Colour used to draw region borders on overlays.
pub const BOUNDARY_COLOR: [u8; 3] = [255, 0, 0];

/// Labels as a 16-bit grayscale image.
pub fn label_image(map: &LabelMap) -> Result<ImageBuffer<Luma<u16>, Vec<u16>>> {
    let mut data = Vec::with_capacity(map.len());
    for &l in map.as_slice() {
        if l > u16::MAX as u32 {
            return Err(Error::LabelOverflow(l));
        }
        data.push(l as u16);
    }
    Ok(ImageBuffer::from_raw(map.width() as u32, map.height() as u32, data)
        .expect("buffer matches dimensions"))
}

pub fn write_label_png(map: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    label_image(map)?
        .save(path)
        .map_err(|e| decode_error(path, e))
}

/// Reads a grayscale PNG whose pixel values are labels (8 or 16 bit).
pub fn read_label_png(path: impl AsRef<Path>) -> Result<LabelMap> {
    let path = path.as_ref();
    let img = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| decode_error(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let labels: Vec<u32> = match img {
        DynamicImage::ImageLuma16(b) => b.into_raw().into_iter().map(u32::from).collect(),
        DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(u32::from).collect(),
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: label images must be 8- or 16-bit grayscale, found {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    LabelMap::new(w, h, labels)
}

/// Source image with region borders painted in [`BOUNDARY_COLOR`].
pub fn boundary_overlay(img: &RasterImage, map: &LabelMap) -> Result<RgbImage> {
    if img.dims() != map.dims() {
        return Err(Error::DimensionMismatch {
            expected: img.dims(),
            found: map.dims(),
        });
    }
    let mask = map.boundary_mask();
    let (w, h) = img.dims();
    Ok(RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let p = y as usize * w + x as usize;
        Rgb(if mask[p] { BOUNDARY_COLOR } else { img.pixels()[p] })
    }))
}

pub fn write_overlay_png(img: &RasterImage, map: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    boundary_overlay(img, map)?
        .save(path)
        .map_err(|e| decode_error(path, e))
}

/// Contour pixels white on black.
pub fn contour_image(contours: &ContourMap) -> GrayImage {
    let (w, h) = contours.dims();
    GrayImage::from_fn(w as u32, h as u32, |x, y| {
        Luma([if contours.get(x as usize, y as usize) { 255 } else { 0 }])
    })
}

pub fn write_contour_png(contours: &ContourMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    contour_image(contours)
        .save(path)
        .map_err(|e| decode_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let map = LabelMap::from_fn(7, 5, |x, y| (x * 1000 + y * 37) as u32).unwrap();
        let path = dir.path().join("l.png");
        write_label_png(&map, &path).unwrap();
        assert_eq!(read_label_png(&path).unwrap(), map);
    }

    #[test]
    fn all_zero_png_is_single_region() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.png");
        GrayImage::new(4, 3).save(&path).unwrap();
        let map = read_label_png(&path).unwrap();
        assert_eq!(map.count_distinct(), 1);
        assert_eq!(map.dims(), (4, 3));
    }

    #[test]
    fn label_overflow() {
        let map = LabelMap::from_fn(70000, 1, |x, _| x as u32).unwrap();
        assert!(matches!(label_image(&map), Err(Error::LabelOverflow(65536))));
    }

    #[test]
    fn rgb_label_png_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.png");
        RgbImage::new(2, 2).save(&path).unwrap();
        assert!(matches!(read_label_png(&path), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn overlay_paints_boundaries() {
        let img = RasterImage::from_fn(4, 2, |_, _| [10, 20, 30]).unwrap();
        let map = LabelMap::from_fn(4, 2, |x, _| (x >= 2) as u32).unwrap();
        let o = boundary_overlay(&img, &map).unwrap();
        assert_eq!(o.get_pixel(1, 0).0, BOUNDARY_COLOR);
        assert_eq!(o.get_pixel(0, 0).0, [10, 20, 30]);
        assert_eq!(o.get_pixel(2, 1).0, [10, 20, 30]);
    }
}
