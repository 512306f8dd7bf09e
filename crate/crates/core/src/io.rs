//! File I/O for 8-bit images (PNG, binary PGM/PPM) and raw-float cubes.
//!
//! Cube layout, all integers little-endian `u32`:
//!
//! ```text
//! "KFC1" | width | height | bands | flag (0 = f32, 1 = f64) | samples...
//! ```
//!
//! Samples are band-sequential (planar), row-major within a band, encoded as
//! little-endian IEEE-754 values of the width selected by the flag.

use std::fs;
use std::path::Path;

use image::{DynamicImage, ImageFormat, ImageReader};

use crate::error::{Error, Result};
use crate::image::Image;

pub const CUBE_MAGIC: &[u8; 4] = b"KFC1";
const CUBE_HEADER_LEN: usize = 20;

/// Default dynamic range assigned to loaded cubes.
pub const DEFAULT_CUBE_RANGE: f64 = 255.0;

/// Sample width of a cube file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CubeSampleType {
    F32,
    F64,
}

impl CubeSampleType {
    fn flag(self) -> u32 {
        match self {
            CubeSampleType::F32 => 0,
            CubeSampleType::F64 => 1,
        }
    }

    fn width(self) -> usize {
        match self {
            CubeSampleType::F32 => 4,
            CubeSampleType::F64 => 8,
        }
    }

    /// Narrowest type that represents every sample exactly.
    pub fn narrowest_for(samples: &[f64]) -> Self {
        if samples.iter().all(|&v| (v as f32) as f64 == v) {
            CubeSampleType::F32
        } else {
            CubeSampleType::F64
        }
    }
}

/// Clamps to `[0, 255]` and rounds half away from zero.
#[inline]
pub fn quantize_u8(v: f64) -> u8 {
    v.clamp(0.0, 255.0).round() as u8
}

/// Loads an 8-bit grayscale/RGB image or a `KFC1` cube.
///
/// 8-bit sources get `range_max = 255`; cubes get [`DEFAULT_CUBE_RANGE`].
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(CUBE_MAGIC) {
        return decode_cube(&bytes);
    }
    let reader = ImageReader::new(std::io::Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    if reader.format().is_none() {
        return Err(Error::UnsupportedFormat(format!(
            "{}: not a PNG, PGM/PPM or KFC1 file",
            path.display()
        )));
    }
    let decoded = reader.decode().map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    from_dynamic(decoded)
}

fn from_dynamic(img: DynamicImage) -> Result<Image> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(buf) => {
            let samples = buf.into_raw().into_iter().map(f64::from).collect();
            Image::new(w, h, 1, samples, 255.0)
        }
        DynamicImage::ImageRgb8(buf) => {
            let raw = buf.into_raw();
            let n = w * h;
            let mut samples = vec![0.0; 3 * n];
            for (k, px) in raw.chunks_exact(3).enumerate() {
                for c in 0..3 {
                    samples[c * n + k] = f64::from(px[c]);
                }
            }
            Image::new(w, h, 3, samples, 255.0)
        }
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageRgba8(_) => Err(Error::UnsupportedFormat(
            "images with an alpha channel are not supported".into(),
        )),
        other => Err(Error::UnsupportedFormat(format!(
            "unsupported bit depth / color type {:?}",
            other.color()
        ))),
    }
}

/// Writes `img` to `path`, choosing the format from the extension.
///
/// `.png`, `.pgm`, `.ppm` and `.pnm` are 8-bit targets: samples are clamped
/// and rounded with [`quantize_u8`]. `.kfc` and `.cube` write a cube using the
/// narrowest exact sample width.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let target = TargetFormat::from_path(path)?;
    target.check(img)?;
    let bytes = match target {
        TargetFormat::Cube => encode_cube(img, CubeSampleType::narrowest_for(img.samples())),
        TargetFormat::Png | TargetFormat::Pnm => encode_8bit(img, target)?,
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes a cube with an explicit sample width.
pub fn save_cube(img: &Image, path: impl AsRef<Path>, sample_type: CubeSampleType) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_cube(img, sample_type)).map_err(|e| Error::io(path, e))
}

/// Output format inferred from a file extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetFormat {
    Png,
    Pnm,
    Cube,
}

impl TargetFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "png" => Ok(TargetFormat::Png),
            "pgm" | "ppm" | "pnm" => Ok(TargetFormat::Pnm),
            "kfc" | "cube" => Ok(TargetFormat::Cube),
            _ => Err(Error::UnsupportedFormat(format!(
                "cannot infer output format from {}",
                path.display()
            ))),
        }
    }

    /// Checks that `img` can be written in this format.
    pub fn check(self, img: &Image) -> Result<()> {
        match self {
            TargetFormat::Cube => Ok(()),
            _ if matches!(img.channels(), 1 | 3) => Ok(()),
            _ => Err(Error::UnsupportedFormat(format!(
                "8-bit targets need 1 or 3 channels, image has {}",
                img.channels()
            ))),
        }
    }
}

fn encode_8bit(img: &Image, target: TargetFormat) -> Result<Vec<u8>> {
    let (w, h) = (img.width(), img.height());
    let n = w * h;
    let ch = img.channels();
    let mut interleaved = vec![0u8; n * ch];
    for c in 0..ch {
        for (k, &v) in img.channel(c).iter().enumerate() {
            interleaved[k * ch + c] = quantize_u8(v);
        }
    }
    let dynamic = if ch == 1 {
        DynamicImage::ImageLuma8(
            image::GrayImage::from_raw(w as u32, h as u32, interleaved).expect("buffer size"),
        )
    } else {
        DynamicImage::ImageRgb8(
            image::RgbImage::from_raw(w as u32, h as u32, interleaved).expect("buffer size"),
        )
    };
    let format = match target {
        TargetFormat::Png => ImageFormat::Png,
        _ => ImageFormat::Pnm,
    };
    let mut out = std::io::Cursor::new(Vec::new());
    dynamic
        .write_to(&mut out, format)
        .map_err(|e| Error::UnsupportedFormat(e.to_string()))?;
    Ok(out.into_inner())
}

/// Serializes an image in the `KFC1` cube layout.
pub fn encode_cube(img: &Image, sample_type: CubeSampleType) -> Vec<u8> {
    let mut out = Vec::with_capacity(CUBE_HEADER_LEN + img.samples().len() * sample_type.width());
    out.extend_from_slice(CUBE_MAGIC);
    for v in [img.width(), img.height(), img.channels()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&sample_type.flag().to_le_bytes());
    match sample_type {
        CubeSampleType::F32 => {
            for &v in img.samples() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        CubeSampleType::F64 => {
            for &v in img.samples() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

/// Parses a `KFC1` cube.
pub fn decode_cube(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < CUBE_HEADER_LEN || !bytes.starts_with(CUBE_MAGIC) {
        return Err(Error::UnsupportedFormat("truncated or missing KFC1 header".into()));
    }
    let word = |i: usize| {
        let o = 4 + 4 * i;
        u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize
    };
    let (w, h, bands, flag) = (word(0), word(1), word(2), word(3));
    let sample_type = match flag {
        0 => CubeSampleType::F32,
        1 => CubeSampleType::F64,
        f => return Err(Error::UnsupportedFormat(format!("unknown cube sample flag {f}"))),
    };
    let count = w
        .checked_mul(h)
        .and_then(|v| v.checked_mul(bands))
        .ok_or_else(|| Error::UnsupportedFormat("cube dimensions overflow".into()))?;
    let expected = count * sample_type.width();
    let payload = &bytes[CUBE_HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::HeaderMismatch {
            expected,
            actual: payload.len(),
        });
    }
    let samples = match sample_type {
        CubeSampleType::F32 => payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
            .collect(),
        CubeSampleType::F64 => payload
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect(),
    };
    Image::new(w, h, bands, samples, DEFAULT_CUBE_RANGE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantization_clamps_and_rounds_half_away() {
        assert_eq!(quantize_u8(255.7), 255);
        assert_eq!(quantize_u8(77.5), 78);
        assert_eq!(quantize_u8(77.49), 77);
        assert_eq!(quantize_u8(-3.0), 0);
        assert_eq!(quantize_u8(128.0), 128);
    }

    #[test]
    fn cube_header_contract() {
        let img = Image::from_fn(4, 3, 10, 255.0, |c, x, y| (c * 12 + y * 4 + x) as f64).unwrap();
        let bytes = encode_cube(&img, CubeSampleType::F32);
        assert_eq!(&bytes[..4], b"KFC1");
        assert_eq!(bytes.len(), 20 + 120 * 4);
        let back = decode_cube(&bytes).unwrap();
        assert_eq!((back.width(), back.height(), back.channels()), (4, 3, 10));
        assert_eq!(back, img);
    }

    #[test]
    fn cube_size_mismatch_is_rejected() {
        let img = Image::zeros(2, 2, 2, 255.0);
        let mut bytes = encode_cube(&img, CubeSampleType::F64);
        bytes.pop();
        assert!(matches!(decode_cube(&bytes), Err(Error::HeaderMismatch { .. })));
        let mut bad_flag = encode_cube(&img, CubeSampleType::F32);
        bad_flag[16] = 7;
        assert!(matches!(decode_cube(&bad_flag), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn narrowest_sample_type() {
        assert_eq!(CubeSampleType::narrowest_for(&[1.0, 0.5, 255.0]), CubeSampleType::F32);
        assert_eq!(CubeSampleType::narrowest_for(&[0.1]), CubeSampleType::F64);
    }

    #[test]
    fn target_format_from_extension() {
        assert_eq!(TargetFormat::from_path(Path::new("a.PNG")).unwrap(), TargetFormat::Png);
        assert_eq!(TargetFormat::from_path(Path::new("a.ppm")).unwrap(), TargetFormat::Pnm);
        assert_eq!(TargetFormat::from_path(Path::new("a.kfc")).unwrap(), TargetFormat::Cube);
        assert!(TargetFormat::from_path(Path::new("a.tiff")).is_err());
        let four = Image::zeros(1, 1, 4, 255.0);
        assert!(TargetFormat::Png.check(&four).is_err());
        assert!(TargetFormat::Cube.check(&four).is_ok());
    }
}
