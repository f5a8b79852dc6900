//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic          8 bytes  "FSWPCKPT"
//! format_version u32
//! header_len     u32
//! header         header_len bytes of UTF-8 JSON (CheckpointHeader)
//! block_count    u32
//! block_count times:
//!   name_len     u16
//!   name         name_len bytes UTF-8
//!   ndims        u8
//!   dims         ndims x u32
//!   values       prod(dims) x f32
//! ```
//!
//! Parameter blocks come first, in [`Layout`](super::Layout) order. When
//! optimizer state is present it follows as two blocks, `optim.m` and
//! `optim.v`, each covering the whole flat parameter vector.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{NetConfig, PolicyParams};
use crate::error::{Error, Result};
use crate::optim::AdamState;

pub const MAGIC: &[u8; 8] = b"FSWPCKPT";
pub const FORMAT_VERSION: u32 = 1;

/// Counters from which every training RNG stream is derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ResumeState {
    pub seed: u64,
    pub env_steps: u64,
    pub updates: u64,
    pub episodes: u64,
}

impl ResumeState {
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for v in [self.seed, self.env_steps, self.updates, self.episodes] {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub net_config: NetConfig,
    /// Environment steps consumed when the checkpoint was written.
    pub training_step: u64,
    pub rng_state_digest: String,
    pub resume: ResumeState,
    /// Adam step counter; zero when no optimizer state is stored.
    #[serde(default)]
    pub optimizer_step: u64,
    /// Experiment configuration that produced the checkpoint, verbatim.
    #[serde(default)]
    pub experiment: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: PolicyParams<f32>,
    pub optimizer: Option<AdamState>,
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_block(buf: &mut Vec<u8>, name: &str, shape: &[usize], values: &[f32]) {
    buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
    buf.extend_from_slice(name.as_bytes());
    buf.push(shape.len() as u8);
    for &d in shape {
        put_u32(buf, d as u32);
    }
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn block(&mut self) -> Result<(String, Vec<usize>, Vec<f32>)> {
        let len = self.u16()? as usize;
        let name = std::str::from_utf8(self.take(len)?)
            .map_err(|_| Error::Checkpoint("block name is not UTF-8".into()))?
            .to_owned();
        let ndims = self.u8()? as usize;
        let shape = (0..ndims)
            .map(|_| self.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let count: usize = shape.iter().product();
        let raw = self.take(count * 4)?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok((name, shape, values))
    }
}

impl Checkpoint {
    pub fn new(
        params: PolicyParams<f32>,
        resume: ResumeState,
        experiment: serde_json::Value,
    ) -> Self {
        Self {
            header: CheckpointHeader {
                format_version: FORMAT_VERSION,
                net_config: params.cfg,
                training_step: resume.env_steps,
                rng_state_digest: resume.digest(),
                resume,
                optimizer_step: 0,
                experiment,
            },
            params,
            optimizer: None,
        }
    }

    pub fn with_optimizer(mut self, state: AdamState) -> Self {
        self.header.optimizer_step = state.step;
        self.optimizer = Some(state);
        self
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        put_u32(&mut buf, FORMAT_VERSION);
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        put_u32(&mut buf, header.len() as u32);
        buf.extend_from_slice(&header);
        let extra = if self.optimizer.is_some() { 2 } else { 0 };
        put_u32(&mut buf, (self.params.layout.blocks.len() + extra) as u32);
        for b in &self.params.layout.blocks {
            put_block(
                &mut buf,
                &b.name,
                &b.shape,
                &self.params.data[b.range.clone()],
            );
        }
        if let Some(opt) = &self.optimizer {
            put_block(&mut buf, "optim.m", &[opt.m.len()], &opt.m);
            put_block(&mut buf, "optim.v", &[opt.v.len()], &opt.v);
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = cur.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let hlen = cur.u32()? as usize;
        let header: CheckpointHeader = serde_json::from_slice(cur.take(hlen)?)
            .map_err(|e| Error::Checkpoint(format!("header: {e}")))?;
        let mut params = PolicyParams::<f32>::zeros(header.net_config)?;
        let count = cur.u32()? as usize;
        let n_param_blocks = params.layout.blocks.len();
        if count != n_param_blocks && count != n_param_blocks + 2 {
            return Err(Error::Checkpoint(format!(
                "{count} blocks, expected {n_param_blocks} (+2 optimizer)"
            )));
        }
        for b in params.layout.blocks.clone() {
            let (name, shape, values) = cur.block()?;
            if name != b.name || shape != b.shape {
                return Err(Error::Checkpoint(format!(
                    "block {name} {shape:?} where {} {:?} was expected",
                    b.name, b.shape
                )));
            }
            params.data[b.range].copy_from_slice(&values);
        }
        let optimizer = if count > n_param_blocks {
            let (mn, _, m) = cur.block()?;
            let (vn, _, v) = cur.block()?;
            if mn != "optim.m"
                || vn != "optim.v"
                || m.len() != params.count()
                || v.len() != params.count()
            {
                return Err(Error::Checkpoint("malformed optimizer blocks".into()));
            }
            Some(AdamState {
                step: header.optimizer_step,
                m,
                v,
            })
        } else {
            None
        };
        if cur.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Self {
            header,
            params,
            optimizer,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Hex SHA-256 of the serialized parameter blocks.
    pub fn params_digest(&self) -> String {
        let mut h = Sha256::new();
        for v in &self.params.data {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}
