use std::path::Path;

use super::write_atomic;
use crate::error::{Error, Result};
use crate::mapops::{Mask, RgbImage};

/// sRGB transfer function, linear → encoded.
pub fn encode_srgb(v: f64) -> f64 {
    let v = v.clamp(0.0, 1.0);
    if v <= 0.0031308 {
        12.92 * v
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

/// Inverse sRGB transfer function, encoded → linear.
pub fn decode_srgb(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

/// Writes a PFM (`PF` for 3 channels, `Pf` for 1), little-endian.
/// `data` is row-major, top row first.
pub fn write_pfm(path: &Path, width: usize, height: usize, channels: usize, data: &[f32]) -> Result<()> {
    let tag = match channels {
        1 => "Pf",
        3 => "PF",
        _ => return Err(Error::Image(format!("PFM supports 1 or 3 channels, not {channels}"))),
    };
    if data.len() != width * height * channels {
        return Err(Error::Image(format!("{width}x{height}x{channels} PFM needs {} samples", width * height * channels)));
    }
    let mut out = format!("{tag}\n{width} {height}\n-1.0\n").into_bytes();
    let row = width * channels;
    for y in (0..height).rev() {
        for v in &data[y * row..(y + 1) * row] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    write_atomic(path, &out)
}

/// Reads a PFM, returning `(width, height, channels, samples)` with the
/// top row first.
pub fn read_pfm(path: &Path) -> Result<(usize, usize, usize, Vec<f32>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |why: &str| Error::format(path, format!("bad PFM: {why}"));
    let mut tokens = Vec::new();
    let mut pos = 0;
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header is not ASCII"))?);
    }
    pos += 1;
    let channels = match tokens[0] {
        "PF" => 3,
        "Pf" => 1,
        t => return Err(bad(&format!("unknown tag {t:?}"))),
    };
    let width: usize = tokens[1].parse().map_err(|_| bad("width"))?;
    let height: usize = tokens[2].parse().map_err(|_| bad("height"))?;
    let scale: f32 = tokens[3].parse().map_err(|_| bad("scale"))?;
    let n = width * height * channels;
    if bytes.len() < pos || bytes.len() - pos != n * 4 {
        return Err(bad(&format!("expected {} data bytes", n * 4)));
    }
    let little = scale < 0.0;
    let raw: Vec<f32> = bytes[pos..]
        .chunks_exact(4)
        .map(|c| {
            let b: [u8; 4] = c.try_into().unwrap();
            if little {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            }
        })
        .collect();
    let row = width * channels;
    let mut data = Vec::with_capacity(n);
    for y in (0..height).rev() {
        data.extend_from_slice(&raw[y * row..(y + 1) * row]);
    }
    Ok((width, height, channels, data))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PngDepth {
    Eight,
    Sixteen,
}

/// Writes linear RGB as an sRGB-encoded PNG.
pub fn write_png(path: &Path, img: &RgbImage, depth: PngDepth) -> Result<()> {
    let (w, h) = (img.width as u32, img.height as u32);
    let encoded = img.pixels.iter().flat_map(|p| p.map(encode_srgb));
    let dynamic = match depth {
        PngDepth::Eight => {
            let buf: Vec<u8> = encoded.map(|v| (v * 255.0).round() as u8).collect();
            image::DynamicImage::ImageRgb8(image::RgbImage::from_raw(w, h, buf).unwrap())
        }
        PngDepth::Sixteen => {
            let buf: Vec<u16> = encoded.map(|v| (v * 65535.0).round() as u16).collect();
            image::DynamicImage::ImageRgb16(image::ImageBuffer::from_raw(w, h, buf).unwrap())
        }
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    dynamic
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Image(format!("{}: {e}", path.display())))
}

fn is_pfm(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pfm"))
}

fn open_png(path: &Path) -> Result<image::DynamicImage> {
    image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| Error::Image(format!("{}: {e}", path.display())))
}

/// Loads linear RGB: PFM as stored, PNG decoded from sRGB.
pub fn read_image(path: &Path) -> Result<RgbImage> {
    if is_pfm(path) {
        let (w, h, c, data) = read_pfm(path)?;
        let pixels = data
            .chunks_exact(c)
            .map(|s| if c == 3 { [s[0] as f64, s[1] as f64, s[2] as f64] } else { [s[0] as f64; 3] })
            .collect();
        return RgbImage::new(w, h, pixels);
    }
    let img = open_png(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels = match img.color().bits_per_pixel() / img.color().channel_count() as u16 {
        8 => img
            .to_rgb8()
            .pixels()
            .map(|p| p.0.map(|v| decode_srgb(v as f64 / 255.0)))
            .collect(),
        _ => img
            .to_rgb16()
            .pixels()
            .map(|p| p.0.map(|v| decode_srgb(v as f64 / 65535.0)))
            .collect(),
    };
    RgbImage::new(w, h, pixels)
}

/// Writes PFM (linear) or PNG (sRGB) by extension.
pub fn write_image(path: &Path, img: &RgbImage, depth: PngDepth) -> Result<()> {
    if is_pfm(path) {
        let data: Vec<f32> = img.pixels.iter().flat_map(|p| p.map(|v| v as f32)).collect();
        write_pfm(path, img.width, img.height, 3, &data)
    } else {
        write_png(path, img, depth)
    }
}

/// Loads a grayscale mask (first channel, stored values, threshold 0.5).
pub fn read_mask(path: &Path) -> Result<Mask> {
    if is_pfm(path) {
        let (w, h, c, data) = read_pfm(path)?;
        let gray: Vec<f64> = data.chunks_exact(c).map(|s| s[0] as f64).collect();
        return Mask::from_gray(w, h, &gray);
    }
    let img = open_png(path)?.to_luma16();
    let gray: Vec<f64> = img.pixels().map(|p| p.0[0] as f64 / 65535.0).collect();
    Mask::from_gray(img.width() as usize, img.height() as usize, &gray)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn srgb_transfer_inverts() {
        for i in 0..=100 {
            let v = i as f64 / 100.0;
            assert!((decode_srgb(encode_srgb(v)) - v).abs() < 1e-12);
        }
        assert!((encode_srgb(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pfm_round_trip_keeps_orientation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.pfm");
        let data: Vec<f32> = (0..2 * 3 * 3).map(|i| i as f32 * 0.25).collect();
        write_pfm(&p, 2, 3, 3, &data).unwrap();
        assert_eq!(read_pfm(&p).unwrap(), (2, 3, 3, data));
        let raw = std::fs::read(&p).unwrap();
        // Bottom row first on disk.
        assert_eq!(&raw[raw.len() - 24..raw.len() - 20], &0f32.to_le_bytes());
    }

    #[test]
    fn png_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let img = RgbImage::new(2, 1, vec![[0.0, 0.18, 1.0], [0.5, 0.02, 0.7]]).unwrap();
        for (depth, tol) in [(PngDepth::Eight, 4e-3), (PngDepth::Sixteen, 2e-5)] {
            let p = dir.path().join(format!("x{depth:?}.png"));
            write_png(&p, &img, depth).unwrap();
            let back = read_image(&p).unwrap();
            for (a, b) in img.pixels.iter().zip(&back.pixels) {
                for c in 0..3 {
                    assert!((a[c] - b[c]).abs() < tol, "{a:?} {b:?}");
                }
            }
        }
    }
}
