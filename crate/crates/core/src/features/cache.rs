//! Feature cache files.
//!
//! Layout, all integers `u32` little-endian:
//!
//! ```text
//! offset  field
//! 0       magic b"RLFW"
//! 4       version (1)
//! 8       frames per window
//! 12      channels per frame
//! 16      window count
//! 20      per window: label (u32), then frames * channels f32 LE, row-major
//! ```

use std::fs;
use std::path::Path;

use super::FeatureWindow;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"RLFW";
const VERSION: u32 = 1;

pub fn encode(windows: &[FeatureWindow]) -> Result<Vec<u8>> {
    let (frames, channels) = windows.first().map_or((0, 0), FeatureWindow::shape);
    if windows.iter().any(|w| w.shape() != (frames, channels)) {
        return Err(Error::Shape("cached windows must share one shape".into()));
    }
    let mut out = Vec::with_capacity(20 + windows.len() * (4 + frames * channels * 4));
    out.extend_from_slice(MAGIC);
    for v in [VERSION, frames as u32, channels as u32, windows.len() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for w in windows {
        out.extend_from_slice(&(w.label as u32).to_le_bytes());
        for &x in &w.data {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    Ok(out)
}

/// Decodes a cache; `session_id` is attached to every window.
pub fn decode(bytes: &[u8], session_id: &str) -> Result<Vec<FeatureWindow>> {
    let bad = |msg: &str| Error::Shape(format!("feature cache: {msg}"));
    if bytes.len() < 20 || &bytes[..4] != MAGIC {
        return Err(bad("bad magic"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    if word(4) != VERSION as usize {
        return Err(bad("unsupported version"));
    }
    let (frames, channels, count) = (word(8), word(12), word(16));
    let per = 4 + frames * channels * 4;
    if bytes.len() != 20 + count * per {
        return Err(bad("truncated"));
    }
    (0..count)
        .map(|k| {
            let base = 20 + k * per;
            let label = word(base);
            let data = bytes[base + 4..base + per]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect();
            FeatureWindow::new(frames, channels, data, label, session_id)
        })
        .collect()
}

pub fn write(path: &Path, windows: &[FeatureWindow]) -> Result<()> {
    fs::write(path, encode(windows)?).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path, session_id: &str) -> Result<Vec<FeatureWindow>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, session_id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_at_f32_precision() {
        let w = FeatureWindow::new(3, 2, vec![0.5, -1.25, 3.0, 1e-3, 7.0, 0.1], 4, "s").unwrap();
        let bytes = encode(&[w.clone(), w.clone()]).unwrap();
        assert_eq!(bytes.len(), 20 + 2 * (4 + 24));
        let back = decode(&bytes, "s").unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].label, 4);
        for (a, b) in back[0].data.iter().zip(&w.data) {
            assert_eq!(*a, *b as f32 as f64);
        }
        assert!(decode(&bytes[..bytes.len() - 1], "s").is_err());
        assert!(decode(b"nope", "s").is_err());
    }
}
