//! Flat binary model container.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | field |
//! |---|---|
//! | 4 | magic `NSFM` |
//! | 2 | version (1) |
//! | 1 | kind: 1 spectral diagonal, 2 convolutional network |
//! | 1 | reserved (0) |
//! | 4 + 4 | U, V (0, 0 for networks, which accept any size) |
//! | 4 | layer count L (0 for the diagonal model) |
//! | 12 L | per layer: kernel, in-channels, out-channels |
//! | 8 | parameter count P |
//! | 8 P | parameters as `f64`, in declaration order |

use std::path::Path;

use nsf_core::{ConvLayer, ConvNetModel, ImageGrid, Model, SpectralDiagonalModel};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"NSFM";
pub const VERSION: u16 = 1;
const KIND_DIAGONAL: u8 = 1;
const KIND_CONVNET: u8 = 2;

#[derive(Clone, Debug, PartialEq)]
pub enum SavedModel {
    Diagonal(SpectralDiagonalModel),
    ConvNet(ConvNetModel),
}

impl SavedModel {
    pub fn forward(&self, x: &ImageGrid) -> nsf_core::Result<ImageGrid> {
        match self {
            SavedModel::Diagonal(m) => m.forward(x),
            SavedModel::ConvNet(m) => m.forward(x),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SavedModel::Diagonal(_) => "diagonal",
            SavedModel::ConvNet(_) => "convnet",
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let (kind, (u, v), layers, params): (u8, (usize, usize), &[ConvLayer], &[f64]) = match self {
            SavedModel::Diagonal(m) => (KIND_DIAGONAL, m.shape(), &[], m.params()),
            SavedModel::ConvNet(m) => (KIND_CONVNET, (0, 0), m.layers(), m.params()),
        };
        let mut out = Vec::with_capacity(32 + 12 * layers.len() + 8 * params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(kind);
        out.push(0);
        out.extend_from_slice(&(u as u32).to_le_bytes());
        out.extend_from_slice(&(v as u32).to_le_bytes());
        out.extend_from_slice(&(layers.len() as u32).to_le_bytes());
        for l in layers {
            for x in [l.kernel, l.in_channels, l.out_channels] {
                out.extend_from_slice(&(x as u32).to_le_bytes());
            }
        }
        out.extend_from_slice(&(params.len() as u64).to_le_bytes());
        for p in params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    /// Parses a container; failures carry the byte offset of the bad field.
    pub fn decode(bytes: &[u8]) -> std::result::Result<Self, (usize, String)> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != MAGIC {
            return Err((0, "not an NSFM model file".into()));
        }
        let at = r.pos;
        let version = u16::from_le_bytes(r.take(2, "version")?.try_into().expect("2 bytes"));
        if version != VERSION {
            return Err((at, format!("unsupported version {version}")));
        }
        let at = r.pos;
        let kind = r.take(2, "kind")?[0];
        let u = r.u32("height")? as usize;
        let v = r.u32("width")? as usize;
        let n_layers = r.u32("layer count")? as usize;
        let mut layers = Vec::with_capacity(n_layers.min(1024));
        for _ in 0..n_layers {
            let (k, i, o) = (r.u32("kernel")?, r.u32("in-channels")?, r.u32("out-channels")?);
            layers.push(ConvLayer::new(k as usize, i as usize, o as usize));
        }
        let count_at = r.pos;
        let count = u64::from_le_bytes(r.take(8, "parameter count")?.try_into().expect("8 bytes")) as usize;
        if bytes.len().saturating_sub(r.pos) / 8 < count {
            return Err((bytes.len(), format!("parameters truncated: expected {count}")));
        }
        let params: Vec<f64> = (0..count)
            .map(|_| f64::from_le_bytes(r.take(8, "parameter").expect("length checked").try_into().expect("8 bytes")))
            .collect();
        if r.pos != bytes.len() {
            return Err((r.pos, "trailing bytes after parameters".into()));
        }
        let bad = |e: nsf_core::Error| (count_at, e.to_string());
        match kind {
            KIND_DIAGONAL => SpectralDiagonalModel::from_params(u, v, params).map(SavedModel::Diagonal).map_err(bad),
            KIND_CONVNET => ConvNetModel::from_params(&layers, params).map(SavedModel::ConvNet).map_err(bad),
            other => Err((at, format!("unknown model kind {other}"))),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::decode(&bytes).map_err(|(offset, reason)| CliError::CorruptHeader {
            path: path.into(),
            offset,
            reason,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> std::result::Result<&'a [u8], (usize, String)> {
        if self.bytes.len() < self.pos + n {
            return Err((self.bytes.len(), format!("file ends inside {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> std::result::Result<u32, (usize, String)> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}
