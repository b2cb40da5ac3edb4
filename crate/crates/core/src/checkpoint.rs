//! Binary policy checkpoints.
//!
//! All integers and floats are little-endian:
//!
//! | bytes | field |
//! |-------|-------|
//! | 4     | magic `PXPV` |
//! | 4     | format version (u32, currently 1) |
//! | 4     | observation dimension (u32) |
//! | 4     | hidden layer count `L` (u32) |
//! | 4·L   | hidden layer widths (u32 each) |
//! | 4     | head tag (u32: 0 categorical, 1 Gaussian) |
//! | 4     | choices per axis (u32, 0 for Gaussian) |
//! | 8·3   | initial log-std, policy output gain, value output gain (f64) |
//! | 8     | parameter count `P` (u64) |
//! | 8·P   | parameters (f64) |
//! | 4     | CRC-32 (IEEE) of every preceding byte |

use std::path::Path;

use crate::error::{Error, Result};
use crate::net::{HeadKind, NetConfig, PolicyValueNet};

pub const MAGIC: [u8; 4] = *b"PXPV";
pub const VERSION: u32 = 1;

pub fn encode(net: &PolicyValueNet) -> Vec<u8> {
    let cfg = net.config();
    let mut out = Vec::with_capacity(64 + 8 * net.num_params());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(cfg.obs_dim as u32).to_le_bytes());
    out.extend_from_slice(&(cfg.hidden.len() as u32).to_le_bytes());
    for h in &cfg.hidden {
        out.extend_from_slice(&(*h as u32).to_le_bytes());
    }
    let (tag, choices) = match cfg.head {
        HeadKind::Categorical { choices } => (0u32, choices as u32),
        HeadKind::Gaussian => (1u32, 0u32),
    };
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&choices.to_le_bytes());
    for v in [cfg.init_log_std, cfg.policy_output_gain, cfg.value_output_gain] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(net.num_params() as u64).to_le_bytes());
    for p in net.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.err(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            reason: reason.into(),
        }
    }
}

/// Decodes a checkpoint; `path` is only used in error messages.
pub fn decode(bytes: &[u8], path: &Path) -> Result<PolicyValueNet> {
    let mut r = Reader { bytes, pos: 0, path };
    let magic = r.take(4).map_err(|_| {
        r.err(format!(
            "not a policy checkpoint (expected magic bytes {:?} = \"PXPV\")",
            MAGIC
        ))
    })?;
    if magic != MAGIC {
        return Err(r.err(format!(
            "not a policy checkpoint: found magic bytes {magic:?}, expected {:?} = \"PXPV\"",
            MAGIC
        )));
    }
    if bytes.len() < 8 {
        return Err(r.err("truncated header"));
    }
    let body = &bytes[..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    let actual = crc32fast::hash(body);
    if stored != actual {
        return Err(r.err(format!(
            "checksum mismatch (stored {stored:#010x}, computed {actual:#010x})"
        )));
    }
    r.bytes = body;
    let version = r.u32()?;
    if version != VERSION {
        return Err(r.err(format!("unsupported version {version}, expected {VERSION}")));
    }
    let obs_dim = r.u32()? as usize;
    let layers = r.u32()? as usize;
    if layers > 64 {
        return Err(r.err(format!("implausible hidden layer count {layers}")));
    }
    let hidden = (0..layers).map(|_| r.u32().map(|h| h as usize)).collect::<Result<Vec<_>>>()?;
    let head = match (r.u32()?, r.u32()?) {
        (0, choices) => HeadKind::Categorical {
            choices: choices as usize,
        },
        (1, _) => HeadKind::Gaussian,
        (tag, _) => return Err(r.err(format!("unknown head tag {tag}"))),
    };
    let cfg = NetConfig {
        obs_dim,
        hidden,
        head,
        init_log_std: r.f64()?,
        policy_output_gain: r.f64()?,
        value_output_gain: r.f64()?,
    };
    let count = r.u64()? as usize;
    if count.checked_mul(8) != Some(body.len() - r.pos) {
        return Err(r.err(format!(
            "parameter count {count} does not match payload of {} bytes",
            body.len() - r.pos
        )));
    }
    let params = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    PolicyValueNet::from_params(cfg, params).map_err(|e| r.err(e.to_string()))
}

pub fn save(net: &PolicyValueNet, path: &Path) -> Result<()> {
    std::fs::write(path, encode(net)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<PolicyValueNet> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}
