//! Raster and point-cloud files.
//!
//! Intensities are quantized only here: PNG (8/16-bit) and binary PPM are
//! mapped linearly onto `[0, 1]`. Real-valued rasters (unwrapped phase,
//! depth) use a minimal float format: the magic `RF32`, width and height as
//! little-endian `u32`, then row-major little-endian `f32` samples with NaN
//! marking masked pixels.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageError, Luma, Rgb};

use crate::error::{Error, Result};
use crate::grid::{DepthMap, Grid, Mask, RgbImage, Scalar};

pub const FLOAT_RASTER_MAGIC: [u8; 4] = *b"RF32";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn from_bits(bits: u8) -> Result<Self> {
        match bits {
            8 => Ok(BitDepth::Eight),
            16 => Ok(BitDepth::Sixteen),
            other => Err(Error::invalid(format!("bit depth must be 8 or 16, got {other}"))),
        }
    }

    fn max_code(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }
}

#[inline]
fn quantize(v: f64, depth: BitDepth) -> u16 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v * depth.max_code()).round() as u16
}

fn decode(path: &Path) -> Result<DynamicImage> {
    let mut head = Vec::with_capacity(32);
    File::open(path)
        .and_then(|f| f.take(32).read_to_end(&mut head))
        .map_err(|e| Error::io(path, e))?;
    let format = image::guess_format(&head).map_err(|_| Error::UnsupportedFormat {
        path: path.to_path_buf(),
        reason: "unrecognized file signature".into(),
    })?;
    let mut reader = image::ImageReader::open(path).map_err(|e| Error::io(path, e))?;
    reader.set_format(format);
    reader.decode().map_err(|e| match e {
        ImageError::Unsupported(u) => Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: u.to_string(),
        },
        ImageError::IoError(io) if io.kind() != std::io::ErrorKind::UnexpectedEof => Error::io(path, io),
        other => Error::Corrupt {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    })
}

fn is_sixteen_bit(img: &DynamicImage) -> bool {
    let c = img.color();
    c.bits_per_pixel() / u16::from(c.channel_count()) == 16
}

/// Loads a PNG or binary PPM as linear intensities in `[0, 1]`.
pub fn load_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let img = decode(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut planes = [vec![0.0; w * h], vec![0.0; w * h], vec![0.0; w * h]];
    if is_sixteen_bit(&img) {
        for (i, px) in img.into_rgb16().pixels().enumerate() {
            for c in 0..3 {
                planes[c][i] = f64::from(px[c]) / 65535.0;
            }
        }
    } else {
        for (i, px) in img.into_rgb8().pixels().enumerate() {
            for c in 0..3 {
                planes[c][i] = f64::from(px[c]) / 255.0;
            }
        }
    }
    RgbImage::from_planes(w, h, planes)
}

/// Loads a raster as a single plane in `[0, 1]`. Color inputs are averaged.
pub fn load_gray(path: impl AsRef<Path>) -> Result<Scalar> {
    let path = path.as_ref();
    let img = decode(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if img.color().channel_count() >= 3 {
        drop(img);
        return Ok(load_image(path)?.brightness());
    }
    let data = if is_sixteen_bit(&img) {
        img.into_luma16().pixels().map(|p| f64::from(p[0]) / 65535.0).collect()
    } else {
        img.into_luma8().pixels().map(|p| f64::from(p[0]) / 255.0).collect()
    };
    Grid::from_vec(w, h, data)
}

fn write_dynamic(img: DynamicImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|e| match e {
        ImageError::IoError(io) => Error::io(path, io),
        ImageError::Unsupported(u) => Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: u.to_string(),
        },
        other => Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(other.to_string()),
        },
    })
}

/// Writes an image, clamping to `[0, 1]` and rounding to the nearest code.
/// The container follows the extension (`.png` or `.ppm`).
pub fn save_image(image: &RgbImage, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let (w, h) = (image.width() as u32, image.height() as u32);
    let dynamic = match depth {
        BitDepth::Eight => {
            let buf = ImageBuffer::from_fn(w, h, |x, y| {
                let p = image.pixel(x as usize, y as usize);
                Rgb(p.map(|v| quantize(v, depth) as u8))
            });
            DynamicImage::ImageRgb8(buf)
        }
        BitDepth::Sixteen => {
            let buf = ImageBuffer::from_fn(w, h, |x, y| {
                let p = image.pixel(x as usize, y as usize);
                Rgb(p.map(|v| quantize(v, depth)))
            });
            DynamicImage::ImageRgb16(buf)
        }
    };
    write_dynamic(dynamic, path.as_ref())
}

/// Writes a single plane of `[0, 1]` values as grayscale. NaN maps to 0.
pub fn save_gray(values: &Scalar, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let (w, h) = (values.width() as u32, values.height() as u32);
    let dynamic = match depth {
        BitDepth::Eight => DynamicImage::ImageLuma8(ImageBuffer::from_fn(w, h, |x, y| {
            Luma([quantize(*values.get(x as usize, y as usize), depth) as u8])
        })),
        BitDepth::Sixteen => DynamicImage::ImageLuma16(ImageBuffer::from_fn(w, h, |x, y| {
            Luma([quantize(*values.get(x as usize, y as usize), depth)])
        })),
    };
    write_dynamic(dynamic, path.as_ref())
}

/// Writes a validity mask as an 8-bit PNG (255 valid, 0 masked).
pub fn save_mask(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    let g = Grid::from_vec(
        mask.width(),
        mask.height(),
        mask.data().iter().map(|&m| if m { 1.0 } else { 0.0 }).collect(),
    )?;
    save_gray(&g, path, BitDepth::Eight)
}

/// Reads a mask written by [`save_mask`]; any code above half scale is valid.
pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let g = load_gray(path)?;
    Grid::from_vec(g.width(), g.height(), g.data().iter().map(|&v| v > 0.5).collect())
}

/// Writes real values as an 8-bit grayscale PNG stretched to their
/// finite min/max. Non-finite entries become black.
pub fn save_normalized(width: usize, height: usize, values: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let (lo, hi) = values
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let scaled = values
        .iter()
        .map(|&v| if v.is_finite() { (v - lo) / span } else { 0.0 })
        .collect();
    save_gray(&Grid::from_vec(width, height, scaled)?, path, BitDepth::Eight)
}

/// Writes a real-valued raster in the `RF32` format.
pub fn write_float_raster(width: usize, height: usize, values: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if values.len() != width * height {
        return Err(Error::invalid("float raster length does not match dimensions"));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    write(&FLOAT_RASTER_MAGIC)?;
    write(&(width as u32).to_le_bytes())?;
    write(&(height as u32).to_le_bytes())?;
    for &v in values {
        write(&(v as f32).to_le_bytes())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads an `RF32` raster, returning `(width, height, values)`.
pub fn read_float_raster(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f64>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    let corrupt = |reason: &str| Error::Corrupt {
        path: path.to_path_buf(),
        reason: reason.into(),
    };
    if bytes.len() < 12 {
        return Err(corrupt("truncated header"));
    }
    if bytes[..4] != FLOAT_RASTER_MAGIC {
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: "missing RF32 magic".into(),
        });
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if width == 0 || height == 0 {
        return Err(corrupt("zero dimension"));
    }
    let body = &bytes[12..];
    if body.len() != width * height * 4 {
        return Err(corrupt("payload size does not match header"));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    Ok((width, height, values))
}

/// Writes an ASCII PLY with one vertex `(x, y, depth)` for every valid pixel
/// whose coordinates are both multiples of `stride`.
pub fn export_point_cloud(depth: &DepthMap, path: impl AsRef<Path>, stride: usize) -> Result<usize> {
    let path = path.as_ref();
    if stride == 0 {
        return Err(Error::invalid("point cloud stride must be positive"));
    }
    let mut vertices = Vec::new();
    for y in (0..depth.height()).step_by(stride) {
        for x in (0..depth.width()).step_by(stride) {
            if let Some(z) = depth.get(y * depth.width() + x) {
                vertices.push((x, y, z));
            }
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res = (|| -> std::io::Result<()> {
        write!(
            w,
            "ply\nformat ascii 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
            vertices.len()
        )?;
        for (x, y, z) in &vertices {
            writeln!(w, "{x} {y} {}", *z as f32)?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))?;
    Ok(vertices.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantization_rounds_to_nearest_and_clamps() {
        assert_eq!(quantize(0.5, BitDepth::Eight), 128);
        assert_eq!(quantize(1.0, BitDepth::Sixteen), 65535);
        assert_eq!(quantize(1.2, BitDepth::Eight), 255);
        assert_eq!(quantize(-0.3, BitDepth::Eight), 0);
    }

    #[test]
    fn bit_depth_parsing() {
        assert_eq!(BitDepth::from_bits(16).unwrap(), BitDepth::Sixteen);
        assert!(BitDepth::from_bits(12).is_err());
    }
}
