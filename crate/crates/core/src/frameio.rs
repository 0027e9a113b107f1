//! DNV1 frame streams.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "DNV1"
//! 4       4     width        u32 LE
//! 8       4     height       u32 LE
//! 12      4     frame_count  u32 LE
//! 16      1     kind         0 = depth, 1 = guidance
//! 17      ...   frames, back to back
//! ```
//!
//! Depth pixels are u16 LE millimeters with 0 meaning invalid. Guidance pixels
//! are 3 bytes R, G, B. No padding, no compression, no trailing bytes.
//! Timestamps are not stored; decoded frames carry their index as timestamp.

use std::path::Path;

use crate::error::{Error, FormatError, Result};
use crate::types::{DepthFrame, GuidanceFrame};

pub const MAGIC: &[u8; 4] = b"DNV1";
pub const HEADER_LEN: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    Depth = 0,
    Guidance = 1,
}

impl FrameKind {
    fn bytes_per_pixel(self) -> u64 {
        match self {
            FrameKind::Depth => 2,
            FrameKind::Guidance => 3,
        }
    }

    fn name(self) -> &'static str {
        match self {
            FrameKind::Depth => "depth",
            FrameKind::Guidance => "guidance",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameStreamHeader {
    pub width: u32,
    pub height: u32,
    pub frame_count: u32,
    pub kind: FrameKind,
}

impl FrameStreamHeader {
    pub fn encode(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..4].copy_from_slice(MAGIC);
        out[4..8].copy_from_slice(&self.width.to_le_bytes());
        out[8..12].copy_from_slice(&self.height.to_le_bytes());
        out[12..16].copy_from_slice(&self.frame_count.to_le_bytes());
        out[16] = self.kind as u8;
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, FormatError> {
        if bytes.len() < 4 || &bytes[0..4] != MAGIC {
            return Err(FormatError::BadMagic);
        }
        if bytes.len() < HEADER_LEN {
            return Err(FormatError::Truncated { expected: HEADER_LEN as u64, found: bytes.len() as u64 });
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
        let kind = match bytes[16] {
            0 => FrameKind::Depth,
            1 => FrameKind::Guidance,
            other => return Err(FormatError::UnknownKind(other)),
        };
        let header = FrameStreamHeader { width: word(4), height: word(8), frame_count: word(12), kind };
        if header.width == 0 || header.height == 0 {
            return Err(FormatError::ZeroDimension { width: header.width, height: header.height });
        }
        Ok(header)
    }

    /// Total stream length in bytes, or an overflow error.
    pub fn stream_len(&self) -> Result<u64, FormatError> {
        let overflow =
            FormatError::DimensionOverflow { width: self.width, height: self.height, frames: self.frame_count };
        let body = (self.width as u64)
            .checked_mul(self.height as u64)
            .and_then(|p| p.checked_mul(self.kind.bytes_per_pixel()))
            .and_then(|f| f.checked_mul(self.frame_count as u64))
            .and_then(|b| b.checked_add(HEADER_LEN as u64))
            .ok_or(overflow.clone())?;
        usize::try_from(body).map_err(|_| overflow)?;
        Ok(body)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrameStream {
    Depth(Vec<DepthFrame>),
    Guidance(Vec<GuidanceFrame>),
}

impl FrameStream {
    pub fn len(&self) -> usize {
        match self {
            FrameStream::Depth(f) => f.len(),
            FrameStream::Guidance(f) => f.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> FrameKind {
        match self {
            FrameStream::Depth(_) => FrameKind::Depth,
            FrameStream::Guidance(_) => FrameKind::Guidance,
        }
    }

    fn dims(&self) -> Vec<(usize, usize)> {
        match self {
            FrameStream::Depth(f) => f.iter().map(|f| (f.width(), f.height())).collect(),
            FrameStream::Guidance(f) => f.iter().map(|f| (f.width(), f.height())).collect(),
        }
    }

    pub fn into_depth(self) -> Result<Vec<DepthFrame>> {
        match self {
            FrameStream::Depth(f) => Ok(f),
            FrameStream::Guidance(_) => Err(FormatError::KindMismatch { expected: "depth", found: "guidance" }.into()),
        }
    }

    pub fn into_guidance(self) -> Result<Vec<GuidanceFrame>> {
        match self {
            FrameStream::Guidance(f) => Ok(f),
            FrameStream::Depth(_) => Err(FormatError::KindMismatch { expected: "guidance", found: "depth" }.into()),
        }
    }
}

/// Serializes a homogeneous stream. An empty stream needs explicit dimensions,
/// so it is rejected.
pub fn encode_stream(stream: &FrameStream) -> Result<Vec<u8>> {
    let dims = stream.dims();
    let Some(&(w, h)) = dims.first() else {
        return Err(Error::Dimension("cannot write an empty stream".into()));
    };
    if let Some(&(bw, bh)) = dims.iter().find(|&&d| d != (w, h)) {
        return Err(Error::Dimension(format!("stream mixes {w}x{h} and {bw}x{bh} frames")));
    }
    let too_big = || Error::Dimension(format!("{w}x{h} exceeds the u32 header fields"));
    let header = FrameStreamHeader {
        width: u32::try_from(w).map_err(|_| too_big())?,
        height: u32::try_from(h).map_err(|_| too_big())?,
        frame_count: u32::try_from(stream.len()).map_err(|_| too_big())?,
        kind: stream.kind(),
    };
    let mut out = Vec::with_capacity(header.stream_len()? as usize);
    out.extend_from_slice(&header.encode());
    match stream {
        FrameStream::Depth(frames) => {
            for f in frames {
                for &d in f.raw_depths() {
                    out.extend_from_slice(&d.to_le_bytes());
                }
            }
        }
        FrameStream::Guidance(frames) => {
            for f in frames {
                for px in f.pixels() {
                    out.extend_from_slice(px);
                }
            }
        }
    }
    Ok(out)
}

pub fn decode_stream(bytes: &[u8]) -> Result<FrameStream> {
    let header = FrameStreamHeader::decode(bytes)?;
    let expected = header.stream_len()?;
    let found = bytes.len() as u64;
    if found < expected {
        return Err(FormatError::Truncated { expected, found }.into());
    }
    if found > expected {
        return Err(FormatError::TrailingBytes(found - expected).into());
    }
    let (w, h) = (header.width as usize, header.height as usize);
    let n = w * h;
    let body = &bytes[HEADER_LEN..];
    let count = header.frame_count as usize;
    Ok(match header.kind {
        FrameKind::Depth => FrameStream::Depth(
            body.chunks_exact(2 * n)
                .take(count)
                .enumerate()
                .map(|(k, chunk)| {
                    let depth = chunk.chunks_exact(2).map(|b| u16::from_le_bytes([b[0], b[1]])).collect();
                    DepthFrame::from_depths(w, h, depth, k as f64)
                })
                .collect::<Result<_>>()?,
        ),
        FrameKind::Guidance => FrameStream::Guidance(
            body.chunks_exact(3 * n)
                .take(count)
                .map(|chunk| {
                    let rgb = chunk.chunks_exact(3).map(|b| [b[0], b[1], b[2]]).collect();
                    GuidanceFrame::new(w, h, rgb)
                })
                .collect::<Result<_>>()?,
        ),
    })
}

/// Writes a stream to `path`, returning the byte count.
pub fn write_stream(stream: &FrameStream, path: &Path) -> Result<u64> {
    let bytes = encode_stream(stream)?;
    std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    Ok(bytes.len() as u64)
}

pub fn read_stream(path: &Path) -> Result<FrameStream> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_stream(&bytes)
}

/// Human-readable name of a stream kind, for messages.
pub fn kind_name(kind: FrameKind) -> &'static str {
    kind.name()
}
