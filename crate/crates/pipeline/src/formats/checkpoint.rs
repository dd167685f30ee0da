//! Network checkpoints.
//!
//! Layout (little-endian): magic `KDL1`, u16 version, the network spec
//! (three u32 input dims, u32 class count, u32 layer count, then per layer
//! a u8 tag and its u32 fields), u64 parameter count, the parameters as
//! f64, and a CRC-32 of everything before it.

use std::path::Path;

use kdloc_core::net::{Layer, NetworkSpec, NetworkState};

use super::Reader;
use crate::error::{self, Error, Result};

pub const MAGIC: &[u8; 4] = b"KDL1";
pub const VERSION: u16 = 1;

const TAG_CONV: u8 = 0;
const TAG_RELU: u8 = 1;
const TAG_MAXPOOL: u8 = 2;
const TAG_GAP: u8 = 3;
const TAG_DENSE: u8 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: NetworkSpec,
    pub params: Vec<f64>,
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("dimension fits in u32").to_le_bytes());
}

impl Checkpoint {
    pub fn from_net(net: &NetworkState) -> Self {
        Self { spec: net.spec().clone(), params: net.params().to_vec() }
    }

    pub fn into_net(self) -> Result<NetworkState> {
        Ok(NetworkState::from_params(self.spec, self.params)?)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 8 * self.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for d in self.spec.input {
            put_u32(&mut out, d);
        }
        put_u32(&mut out, self.spec.classes);
        put_u32(&mut out, self.spec.layers.len());
        for layer in &self.spec.layers {
            match *layer {
                Layer::Conv2d { in_channels, out_channels, kernel, stride, padding } => {
                    out.push(TAG_CONV);
                    for v in [in_channels, out_channels, kernel, stride, padding] {
                        put_u32(&mut out, v);
                    }
                }
                Layer::Relu => out.push(TAG_RELU),
                Layer::MaxPool { kernel, stride } => {
                    out.push(TAG_MAXPOOL);
                    put_u32(&mut out, kernel);
                    put_u32(&mut out, stride);
                }
                Layer::GlobalAvgPool => out.push(TAG_GAP),
                Layer::Dense { inputs, outputs } => {
                    out.push(TAG_DENSE);
                    put_u32(&mut out, inputs);
                    put_u32(&mut out, outputs);
                }
            }
        }
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < 4 + 2 + 4 {
            return Err("file too short to be a checkpoint".into());
        }
        let (body, crc) = bytes.split_at(bytes.len() - 4);
        let mut r = Reader::new(body);
        if r.take(4)? != MAGIC {
            return Err("not a checkpoint (bad magic)".into());
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(format!("unsupported checkpoint version {version}"));
        }
        let stored = u32::from_le_bytes(crc.try_into().expect("four bytes"));
        if crc32fast::hash(body) != stored {
            return Err("checksum mismatch".into());
        }
        let mut u = || r.u32().map(|v| v as usize);
        let input = [u()?, u()?, u()?];
        let classes = u()?;
        let count = u()?;
        let mut layers = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let tag = r.u8()?;
            let mut u = || r.u32().map(|v| v as usize);
            let layer = match tag {
                TAG_CONV => Layer::Conv2d {
                    in_channels: u()?,
                    out_channels: u()?,
                    kernel: u()?,
                    stride: u()?,
                    padding: u()?,
                },
                TAG_RELU => Layer::Relu,
                TAG_MAXPOOL => Layer::MaxPool { kernel: u()?, stride: u()? },
                TAG_GAP => Layer::GlobalAvgPool,
                TAG_DENSE => Layer::Dense { inputs: u()?, outputs: u()? },
                t => return Err(format!("unknown layer tag {t} at byte {}", r.position() - 1)),
            };
            layers.push(layer);
        }
        let spec = NetworkSpec { input, layers, classes };
        spec.validate().map_err(|e| e.to_string())?;
        let n = r.u64()? as usize;
        if n != spec.param_count() {
            return Err(format!("{n} parameters stored, spec needs {}", spec.param_count()));
        }
        if r.remaining() != 8 * n {
            return Err(format!("expected {} parameter bytes, found {}", 8 * n, r.remaining()));
        }
        let params: Vec<f64> = (0..n).map(|_| r.array().map(f64::from_le_bytes)).collect::<std::result::Result<_, _>>()?;
        if params.iter().any(|p| !p.is_finite()) {
            return Err("non-finite parameter".into());
        }
        Ok(Self { spec, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        error::write(path, &self.encode())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&error::read(path)?).map_err(|m| Error::format(path, m))
    }
}
