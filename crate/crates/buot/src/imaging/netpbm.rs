//! Binary Netpbm reader/writer: P5 (grayscale) and P6 (color), 8-bit.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use super::RasterImage;

#[derive(Debug, Error)]
pub enum PnmError {
    #[error("not a binary PGM/PPM file (expected P5 or P6 magic)")]
    UnrecognizedFormat,
    #[error("unexpected end of file")]
    UnexpectedEof,
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("unsupported maxval {0}; only 8-bit samples (maxval <= 255) are handled")]
    UnsupportedMaxval(u32),
    #[error("Netpbm I/O failed: {0}")]
    Io(#[from] io::Error),
}

struct HeaderCursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    /// Skips whitespace and `#` comments (which run to end of line).
    fn skip_separators(&mut self) {
        while self.pos < self.data.len() {
            match self.data[self.pos] {
                b' ' | b'\t' | b'\r' | b'\n' => self.pos += 1,
                b'#' => {
                    while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => return,
            }
        }
    }

    fn read_u32(&mut self) -> Result<u32, PnmError> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(PnmError::BadHeader("expected an unsigned integer".into()));
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PnmError::BadHeader("integer out of range".into()))
    }
}

/// Decodes a binary PGM (P5) or PPM (P6) byte stream.
pub fn decode_pnm(data: &[u8]) -> Result<RasterImage, PnmError> {
    if data.len() < 2 {
        return Err(PnmError::UnexpectedEof);
    }
    let channels: u8 = match &data[..2] {
        b"P5" => 1,
        b"P6" => 3,
        _ => return Err(PnmError::UnrecognizedFormat),
    };
    let mut cur = HeaderCursor { data, pos: 2 };
    let width = cur.read_u32()? as usize;
    let height = cur.read_u32()? as usize;
    let maxval = cur.read_u32()?;
    if maxval == 0 || maxval > 255 {
        return Err(PnmError::UnsupportedMaxval(maxval));
    }
    if width == 0 || height == 0 {
        return Err(PnmError::BadHeader("zero image dimension".into()));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match data.get(cur.pos) {
        Some(b' ' | b'\t' | b'\r' | b'\n') => cur.pos += 1,
        Some(_) => return Err(PnmError::BadHeader("missing raster separator".into())),
        None => return Err(PnmError::UnexpectedEof),
    }

    let needed = width * height * channels as usize;
    let raster = data.get(cur.pos..cur.pos + needed).ok_or(PnmError::UnexpectedEof)?;
    let samples: Vec<u8> = if maxval == 255 {
        raster.to_vec()
    } else {
        raster
            .iter()
            .map(|&v| ((v as u32 * 255 + maxval / 2) / maxval).min(255) as u8)
            .collect()
    };
    RasterImage::new(width, height, channels, samples)
        .map_err(|e| PnmError::BadHeader(e.to_string()))
}

/// Encodes as binary P5 (1 channel) or P6 (3 channels) with maxval 255.
pub fn encode_pnm(img: &RasterImage) -> Vec<u8> {
    encode_pnm_with_comment(img, None)
}

/// Same, with an optional `#` comment line in the header (the Netpbm
/// conventions allow comments anywhere before the raster).
pub fn encode_pnm_with_comment(img: &RasterImage, comment: Option<&str>) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut header = format!("{magic}\n");
    if let Some(c) = comment {
        debug_assert!(!c.contains('\n'));
        header.push_str(&format!("# {c}\n"));
    }
    header.push_str(&format!("{} {}\n255\n", img.width(), img.height()));
    let mut out = header.into_bytes();
    out.extend_from_slice(img.samples());
    out
}

pub fn read_pnm(path: impl AsRef<Path>) -> Result<RasterImage, PnmError> {
    decode_pnm(&fs::read(path)?)
}

pub fn write_pnm(path: impl AsRef<Path>, img: &RasterImage) -> Result<(), PnmError> {
    Ok(fs::write(path, encode_pnm(img))?)
}

/// Writes with a header comment (used to reference run manifests).
pub fn write_pnm_with_comment(
    path: impl AsRef<Path>,
    img: &RasterImage,
    comment: &str,
) -> Result<(), PnmError> {
    Ok(fs::write(path, encode_pnm_with_comment(img, Some(comment)))?)
}

/// PNG ingestion behind the `png` capability flag; grayscale stays one
/// channel, everything else is converted to RGB.
#[cfg(feature = "png")]
pub fn read_png(path: impl AsRef<Path>) -> Result<RasterImage, PnmError> {
    let dynimg = image::open(path.as_ref())
        .map_err(|e| PnmError::BadHeader(format!("png decode: {e}")))?;
    let img = match dynimg {
        image::DynamicImage::ImageLuma8(g) => RasterImage::grayscale(
            g.width() as usize,
            g.height() as usize,
            g.into_raw(),
        ),
        other => {
            let rgb = other.into_rgb8();
            RasterImage::rgb(rgb.width() as usize, rgb.height() as usize, rgb.into_raw())
        }
    };
    img.map_err(|e| PnmError::BadHeader(e.to_string()))
}
