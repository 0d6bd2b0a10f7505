//! Grayscale PGM (P2 and P5) and PNG (8 and 16 bit) with intensities mapped to `[0, 1]`.

use std::io::Cursor;
use std::path::Path;

use nsf_core::ImageGrid;

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn from_bits(bits: u32) -> Option<Self> {
        match bits {
            8 => Some(BitDepth::Eight),
            16 => Some(BitDepth::Sixteen),
            _ => None,
        }
    }

    pub fn max_value(self) -> u32 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    PgmAscii,
    PgmBinary,
    Png,
}

impl ImageFormat {
    /// Binary PGM for `.pgm`, PNG for `.png`.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("pgm") => Ok(ImageFormat::PgmBinary),
            Some("png") => Ok(ImageFormat::Png),
            _ => Err(CliError::UnsupportedFormat {
                path: path.into(),
                reason: "expected a .pgm or .png extension".into(),
            }),
        }
    }
}

/// A decoding failure before the caller attaches a path.
#[derive(Clone, Debug, PartialEq)]
pub enum DecodeError {
    Unsupported(String),
    Corrupt { offset: usize, reason: String },
}

impl DecodeError {
    fn with_path(self, path: &Path) -> CliError {
        match self {
            DecodeError::Unsupported(reason) => CliError::UnsupportedFormat {
                path: path.into(),
                reason,
            },
            DecodeError::Corrupt { offset, reason } => CliError::CorruptHeader {
                path: path.into(),
                offset,
                reason,
            },
        }
    }
}

fn corrupt(offset: usize, reason: impl Into<String>) -> DecodeError {
    DecodeError::Corrupt {
        offset,
        reason: reason.into(),
    }
}

const PNG_SIGNATURE: [u8; 8] = [137, 80, 78, 71, 13, 10, 26, 10];

pub fn read_image(path: &Path) -> Result<ImageGrid> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes).map_err(|e| e.with_path(path))
}

/// Writes with the format implied by the extension.
pub fn write_image(path: &Path, grid: &ImageGrid, depth: BitDepth) -> Result<()> {
    let bytes = encode(grid, depth, ImageFormat::from_path(path)?);
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Sniffs the format from the leading bytes.
pub fn decode(bytes: &[u8]) -> std::result::Result<ImageGrid, DecodeError> {
    if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else if bytes.len() < 2 {
        Err(corrupt(bytes.len(), "file too short for a magic number"))
    } else {
        Err(DecodeError::Unsupported(format!(
            "unrecognised magic {:?}; only grayscale PGM (P2, P5) and PNG are read",
            String::from_utf8_lossy(&bytes[..2])
        )))
    }
}

pub fn encode(grid: &ImageGrid, depth: BitDepth, format: ImageFormat) -> Vec<u8> {
    match format {
        ImageFormat::PgmAscii => encode_pgm(grid, depth, true),
        ImageFormat::PgmBinary => encode_pgm(grid, depth, false),
        ImageFormat::Png => encode_png(grid, depth),
    }
}

fn quantize(v: f64, max: u32) -> u32 {
    (v.clamp(0.0, 1.0) * max as f64).round() as u32
}

fn encode_pgm(grid: &ImageGrid, depth: BitDepth, ascii: bool) -> Vec<u8> {
    let max = depth.max_value();
    let magic = if ascii { "P2" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n{max}\n", grid.width(), grid.height()).into_bytes();
    if ascii {
        for u in 0..grid.height() {
            let row: Vec<String> = grid.row(u).iter().map(|&v| quantize(v, max).to_string()).collect();
            out.extend_from_slice(row.join(" ").as_bytes());
            out.push(b'\n');
        }
    } else {
        for &v in grid.data() {
            let q = quantize(v, max);
            match depth {
                BitDepth::Eight => out.push(q as u8),
                BitDepth::Sixteen => out.extend_from_slice(&(q as u16).to_be_bytes()),
            }
        }
    }
    out
}

/// Whitespace- and comment-separated header tokenizer.
struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> std::result::Result<u32, DecodeError> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(if start >= self.bytes.len() {
                corrupt(start, format!("file ends before {what}"))
            } else {
                corrupt(start, format!("expected {what}"))
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| corrupt(start, format!("{what} out of range")))
    }
}

fn decode_pgm(bytes: &[u8]) -> std::result::Result<ImageGrid, DecodeError> {
    let ascii = bytes[1] == b'2';
    let mut t = Tokens { bytes, pos: 2 };
    let width = t.number("width")? as usize;
    let height = t.number("height")? as usize;
    t.skip_space();
    let max_pos = t.pos;
    let max = t.number("maximum value")?;
    if width == 0 || height == 0 {
        return Err(corrupt(2, format!("empty image {width}x{height}")));
    }
    if max == 0 || max > 65535 {
        return Err(corrupt(max_pos, format!("maximum value {max} outside 1..=65535")));
    }
    let count = width * height;
    let scale = 1.0 / max as f64;
    let mut data = Vec::with_capacity(count);
    if ascii {
        for _ in 0..count {
            t.skip_space();
            let at = t.pos;
            let v = t.number("pixel value")?;
            if v > max {
                return Err(corrupt(at, format!("pixel value {v} exceeds maximum {max}")));
            }
            data.push(v as f64 * scale);
        }
    } else {
        if t.pos >= bytes.len() || !bytes[t.pos].is_ascii_whitespace() {
            return Err(corrupt(t.pos, "expected one whitespace byte before the raster"));
        }
        let start = t.pos + 1;
        let wide = max > 255;
        let need = count * if wide { 2 } else { 1 };
        if bytes.len() < start + need {
            return Err(corrupt(
                bytes.len(),
                format!("raster truncated: {} of {need} bytes", bytes.len().saturating_sub(start)),
            ));
        }
        let raster = &bytes[start..start + need];
        for i in 0..count {
            let v = if wide {
                u16::from_be_bytes([raster[2 * i], raster[2 * i + 1]]) as u32
            } else {
                raster[i] as u32
            };
            if v > max {
                let offset = start + if wide { 2 * i } else { i };
                return Err(corrupt(offset, format!("pixel value {v} exceeds maximum {max}")));
            }
            data.push(v as f64 * scale);
        }
    }
    ImageGrid::new(height, width, data).map_err(|e| corrupt(0, e.to_string()))
}

fn encode_png(grid: &ImageGrid, depth: BitDepth) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, grid.width() as u32, grid.height() as u32);
        enc.set_color(png::ColorType::Grayscale);
        let max = depth.max_value();
        let raster: Vec<u8> = match depth {
            BitDepth::Eight => {
                enc.set_depth(png::BitDepth::Eight);
                grid.data().iter().map(|&v| quantize(v, max) as u8).collect()
            }
            BitDepth::Sixteen => {
                enc.set_depth(png::BitDepth::Sixteen);
                grid.data()
                    .iter()
                    .flat_map(|&v| (quantize(v, max) as u16).to_be_bytes())
                    .collect()
            }
        };
        let mut writer = enc.write_header().expect("in-memory PNG header");
        writer.write_image_data(&raster).expect("in-memory PNG data");
    }
    out
}

fn decode_png(bytes: &[u8]) -> std::result::Result<ImageGrid, DecodeError> {
    let map_err = |e: png::DecodingError| match e {
        png::DecodingError::IoError(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
            corrupt(bytes.len(), "file truncated")
        }
        other => corrupt(0, other.to_string()),
    };
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(map_err)?;
    let info = reader.info();
    let (width, height) = (info.width as usize, info.height as usize);
    let (color, depth) = (info.color_type, info.bit_depth);
    if color != png::ColorType::Grayscale {
        return Err(DecodeError::Unsupported(format!("PNG color type {color:?}; only grayscale is read")));
    }
    let wide = match depth {
        png::BitDepth::Eight => false,
        png::BitDepth::Sixteen => true,
        other => {
            return Err(DecodeError::Unsupported(format!(
                "PNG bit depth {other:?}; only 8 and 16 bits are read"
            )))
        }
    };
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| corrupt(0, "PNG dimensions overflow"))?;
    let mut buf = vec![0u8; size];
    reader.next_frame(&mut buf).map_err(map_err)?;
    let count = width * height;
    let data: Vec<f64> = if wide {
        (0..count)
            .map(|i| u16::from_be_bytes([buf[2 * i], buf[2 * i + 1]]) as f64 / 65535.0)
            .collect()
    } else {
        buf[..count].iter().map(|&v| v as f64 / 255.0).collect()
    };
    ImageGrid::new(height, width, data).map_err(|e| corrupt(0, e.to_string()))
}
