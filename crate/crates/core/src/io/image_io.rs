use std::path::Path;

use image::{ImageBuffer, Luma, Rgb, Rgba};

use crate::buffer::Image;
use crate::error::{Error, Result};

/// `[0, 1]` to a byte, clamping and rounding half up.
pub fn to_byte(v: f64) -> u8 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v * 255.0 + 0.5).floor() as u8
}

fn image_err(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Image(format!("{}: {other}", path.display())),
    }
}

/// Writes an 8-bit PNG with 1 (gray), 3 (RGB) or 4 (RGBA) channels.
pub fn write_image(img: &Image, path: &Path) -> Result<()> {
    let (w, h) = (img.width as u32, img.height as u32);
    let bytes: Vec<u8> = img.data.iter().map(|&v| to_byte(v)).collect();
    let res = match img.channels {
        1 => ImageBuffer::<Luma<u8>, _>::from_raw(w, h, bytes).map(|b| b.save(path)),
        3 => ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, bytes).map(|b| b.save(path)),
        4 => ImageBuffer::<Rgba<u8>, _>::from_raw(w, h, bytes).map(|b| b.save(path)),
        c => return Err(Error::Image(format!("cannot write {c}-channel image {}", path.display()))),
    };
    res.expect("buffer size matches").map_err(|e| image_err(path, e))
}

/// Writes a single-channel map as 16-bit grayscale, storing `round(v * scale)`.
pub fn write_u16_image(img: &Image, scale: f64, path: &Path) -> Result<()> {
    if img.channels != 1 {
        return Err(Error::Image(format!("16-bit output needs one channel, got {}", img.channels)));
    }
    let data: Vec<u16> =
        img.data.iter().map(|&v| (v * scale + 0.5).floor().clamp(0.0, u16::MAX as f64) as u16).collect();
    ImageBuffer::<Luma<u16>, _>::from_raw(img.width as u32, img.height as u32, data)
        .expect("buffer size matches")
        .save(path)
        .map_err(|e| image_err(path, e))
}

/// Resamples to `width × height` with a triangle filter.
pub fn resize_image(img: &Image, width: usize, height: usize) -> Result<Image> {
    if width == 0 || height == 0 {
        return Err(Error::Config(format!("cannot resize to {width}x{height}")));
    }
    if img.width == width && img.height == height {
        return Ok(img.clone());
    }
    let (w, h) = (img.width as u32, img.height as u32);
    let mut out = Image::new(width, height, img.channels);
    for c in 0..img.channels {
        let plane: Vec<f32> = (0..img.pixel_count()).map(|i| img.data[i * img.channels + c] as f32).collect();
        let buf = ImageBuffer::<Luma<f32>, _>::from_raw(w, h, plane).expect("buffer size matches");
        let small = image::imageops::resize(&buf, width as u32, height as u32, image::imageops::FilterType::Triangle);
        for (i, v) in small.into_raw().into_iter().enumerate() {
            out.data[i * img.channels + c] = v as f64;
        }
    }
    Ok(out)
}

/// Reads a PNG as floats in `[0, 1]`, keeping its channel count (1, 3 or 4).
pub fn read_image(path: &Path) -> Result<Image> {
    let dynamic = image::open(path).map_err(|e| image_err(path, e))?;
    let (w, h) = (dynamic.width() as usize, dynamic.height() as usize);
    let has_alpha = dynamic.color().has_alpha();
    let gray = dynamic.color().channel_count() <= 2;
    let (channels, data): (usize, Vec<f64>) = match (gray, has_alpha) {
        (true, false) => (1, dynamic.to_luma16().into_raw().iter().map(|&v| v as f64 / 65535.0).collect()),
        (_, true) => (4, dynamic.to_rgba8().into_raw().iter().map(|&v| v as f64 / 255.0).collect()),
        (false, false) => (3, dynamic.to_rgb8().into_raw().iter().map(|&v| v as f64 / 255.0).collect()),
    };
    Image::from_data(w, h, channels, data)
}

/// Reads a PNG as RGB plus a binary mask from its alpha channel, composited
/// over `background`. Images without alpha get a full mask.
pub fn read_rgb_and_mask(path: &Path, background: [f64; 3]) -> Result<(Image, Image)> {
    let img = read_image(path)?;
    let (w, h) = (img.width, img.height);
    let mut rgb = Image::new(w, h, 3);
    let mut mask = Image::filled(w, h, 1, 1.0);
    for i in 0..w * h {
        match img.channels {
            1 => rgb.data[3 * i..3 * i + 3].fill(img.data[i]),
            3 => rgb.data[3 * i..3 * i + 3].copy_from_slice(&img.data[3 * i..3 * i + 3]),
            _ => {
                let a = img.data[4 * i + 3];
                for c in 0..3 {
                    rgb.data[3 * i + c] = img.data[4 * i + c] * a + background[c] * (1.0 - a);
                }
                mask.data[i] = if a > 0.5 { 1.0 } else { 0.0 };
            }
        }
    }
    Ok((rgb, mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_conversion() {
        assert_eq!(to_byte(1.0), 255);
        assert_eq!(to_byte(0.5), 128);
        assert_eq!(to_byte(0.0), 0);
        assert_eq!(to_byte(-3.0), 0);
        assert_eq!(to_byte(7.0), 255);
    }

    #[test]
    fn round_trip_within_quantisation() {
        let dir = tempfile::tempdir().unwrap();
        for ch in [1, 3, 4] {
            let data: Vec<f64> = (0..7 * 5 * ch).map(|i| ((i * 37) % 101) as f64 / 100.0).collect();
            let img = Image::from_data(7, 5, ch, data).unwrap();
            let p = dir.path().join(format!("i{ch}.png"));
            write_image(&img, &p).unwrap();
            let back = read_image(&p).unwrap();
            assert_eq!(back.channels, ch);
            for (a, b) in img.data.iter().zip(&back.data) {
                assert!((a - b).abs() <= 1.0 / 255.0 + 1e-12);
            }
        }
    }

    #[test]
    fn resize_keeps_constants() {
        let img = Image::filled(32, 16, 3, 0.25);
        let small = resize_image(&img, 8, 4).unwrap();
        assert_eq!((small.width, small.height, small.channels), (8, 4, 3));
        assert!(small.data.iter().all(|v| (v - 0.25).abs() < 1e-6));
        assert_eq!(resize_image(&img, 32, 16).unwrap(), img);
        assert!(resize_image(&img, 0, 4).is_err());
    }

    #[test]
    fn depth_png() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image::from_data(2, 1, 1, vec![1.2345, 70.0]).unwrap();
        let p = dir.path().join("d.png");
        write_u16_image(&img, 1000.0, &p).unwrap();
        let raw = image::open(&p).unwrap().to_luma16().into_raw();
        assert_eq!(raw, vec![1235, 65535]);
    }

    #[test]
    fn alpha_becomes_mask() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image::from_data(2, 1, 4, vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let p = dir.path().join("a.png");
        write_image(&img, &p).unwrap();
        let (rgb, mask) = read_rgb_and_mask(&p, [1.0, 1.0, 1.0]).unwrap();
        assert_eq!(mask.data, vec![1.0, 0.0]);
        assert_eq!(&rgb.data[3..6], &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn unwritable_path() {
        let img = Image::new(2, 2, 3);
        assert!(write_image(&img, Path::new("/nonexistent/dir/x.png")).is_err());
    }
}
