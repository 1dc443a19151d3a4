//! Binary Q-network checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! | offset | size      | field                                         |
//! |--------|-----------|-----------------------------------------------|
//! | 0      | 4         | magic `BHQN`                                  |
//! | 4      | 4         | format version, `u32` (currently 1)           |
//! | 8      | 8         | training seed, `u64`                          |
//! | 16     | 32        | SHA-256 of the canonical scenario config      |
//! | 48     | 4         | `S`, number of layer sizes, `u32`             |
//! | 52     | 8 * S     | layer sizes `[input, hidden.., actions]`, `u64` |
//!
//! followed, for each of the `S - 1` dense layers in order, by the weight
//! matrix in row-major order (`outputs` rows of `inputs` values, one row per
//! output unit) and then the bias vector, all as `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use sha2::{Digest, Sha256};

use super::network::{Dense, QNetwork};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"BHQN";
pub const VERSION: u32 = 1;

pub type ConfigHash = [u8; 32];

/// SHA-256 of a canonical config rendering.
pub fn config_hash(canonical: &str) -> ConfigHash {
    Sha256::digest(canonical.as_bytes()).into()
}

pub fn hash_hex(h: &ConfigHash) -> String {
    h.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub config_hash: ConfigHash,
    pub network: QNetwork,
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let sizes = self.network.layer_sizes();
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.config_hash)?;
        w.write_all(&(sizes.len() as u32).to_le_bytes())?;
        for s in &sizes {
            w.write_all(&(*s as u64).to_le_bytes())?;
        }
        for layer in self.network.layers() {
            for v in layer.weights.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
            for v in layer.bias.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("not a Q-network checkpoint".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let seed = read_u64(&mut r)?;
        let mut config_hash = [0u8; 32];
        r.read_exact(&mut config_hash)?;
        let n_sizes = read_u32(&mut r)? as usize;
        if !(2..=16).contains(&n_sizes) {
            return Err(Error::Checkpoint(format!("implausible layer count {n_sizes}")));
        }
        let sizes = (0..n_sizes)
            .map(|_| read_u64(&mut r).map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let mut layers = Vec::with_capacity(n_sizes - 1);
        for w in sizes.windows(2) {
            let (inputs, outputs) = (w[0], w[1]);
            let weights = read_f64s(&mut r, inputs * outputs)?;
            let bias = read_f64s(&mut r, outputs)?;
            layers.push(Dense {
                weights: Array2::from_shape_vec((outputs, inputs), weights)
                    .map_err(|e| Error::Checkpoint(e.to_string()))?,
                bias: Array1::from(bias),
            });
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Checkpoint("trailing bytes after last layer".into()));
        }
        Ok(Self {
            seed,
            config_hash,
            network: QNetwork::from_layers(layers)?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Checkpoint("truncated checkpoint".into()),
        _ => Error::Io(e),
    })?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}
