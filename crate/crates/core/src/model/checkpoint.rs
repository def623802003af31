//! Model checkpoint files.
//!
//! Little-endian throughout; `u32` for counts, `f64` for values:
//!
//! ```text
//! magic b"RLCK", version u32 (1)
//! num_users, input_width, input_frames, num_layers   (u32 each)
//! hidden_size per layer                               (u32 each)
//! per user: byte length u32, UTF-8 id
//! norm mean [input_width] f64, norm std [input_width] f64,
//! zero-variance flags [input_width] u8
//! per layer: weights [4H (I+H)] f64, bias [4H] f64
//! head weights [num_users * last_hidden] f64, head bias [num_users] f64
//! ```

use std::fs;
use std::path::Path;

use super::lstm::LstmLayerParams;
use super::network::Network;
use super::{FunnelModel, NormStats};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"RLCK";
const VERSION: u32 = 1;

pub fn encode(model: &FunnelModel) -> Vec<u8> {
    let mut out = Vec::new();
    let u32le = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
    let f64s = |out: &mut Vec<u8>, v: &[f64]| v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
    out.extend_from_slice(MAGIC);
    u32le(&mut out, VERSION as usize);
    u32le(&mut out, model.num_users());
    u32le(&mut out, model.input_width());
    u32le(&mut out, model.input_frames);
    u32le(&mut out, model.network.layers.len());
    for h in model.hidden_sizes() {
        u32le(&mut out, h);
    }
    for id in &model.user_ids {
        u32le(&mut out, id.len());
        out.extend_from_slice(id.as_bytes());
    }
    f64s(&mut out, &model.norm.mean);
    f64s(&mut out, &model.norm.std);
    out.extend(model.norm.flagged.iter().map(|&f| f as u8));
    for t in model.network.tensors() {
        f64s(&mut out, t);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Shape("checkpoint truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Shape("checkpoint size overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn decode(bytes: &[u8]) -> Result<FunnelModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Shape("not a model checkpoint".into()));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(Error::Shape(format!("unsupported checkpoint version {version}")));
    }
    let (users, width, frames, n_layers) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?);
    let hidden = (0..n_layers).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let mut user_ids = Vec::with_capacity(users);
    for _ in 0..users {
        let n = r.u32()?;
        let s = std::str::from_utf8(r.take(n)?).map_err(|_| Error::Shape("user id is not UTF-8".into()))?;
        user_ids.push(s.to_string());
    }
    let mean = r.f64s(width)?;
    let std = r.f64s(width)?;
    let flagged = r.take(width)?.iter().map(|&b| b != 0).collect();
    let mut layers = Vec::with_capacity(n_layers);
    let mut input = width;
    for &h in &hidden {
        let weights = r.f64s(4 * h * (input + h))?;
        let bias = r.f64s(4 * h)?;
        layers.push(LstmLayerParams { input_size: input, hidden_size: h, weights, bias });
        input = h;
    }
    let head_weights = r.f64s(users * input)?;
    let head_bias = r.f64s(users)?;
    if r.pos != bytes.len() {
        return Err(Error::Shape("trailing bytes after checkpoint".into()));
    }
    let network = Network { layers, head_weights, head_bias };
    FunnelModel::new(network, NormStats { mean, std, flagged }, user_ids, frames)
}

pub fn save(path: &Path, model: &FunnelModel) -> Result<()> {
    fs::write(path, encode(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<FunnelModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| Error::Format { path: path.to_path_buf(), msg: e.to_string() })
}
