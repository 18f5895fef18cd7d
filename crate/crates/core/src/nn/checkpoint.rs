//! Binary network checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "DNET" | version u32 | input_dim u32 | n_layers u32
//! per layer: in_dim u32 | out_dim u32 | activation u8 | dropout f64
//!            | weights (out*in f64) | biases (out f64)
//! ```
//!
//! Parameters are widened to `f64` on save and narrowed on load, so a
//! checkpoint written from an `f32` network reloads bit-identically into
//! `f32`. Loading re-runs the structural validation of [`Network::from_layers`],
//! so a corrupt file can never produce a malformed network.

use super::{Activation, DenseLayer, Network, Scalar};
use crate::error::{Error, Result};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"DNET";
const VERSION: u32 = 1;

fn activation_code(a: Activation) -> u8 {
    match a {
        Activation::Identity => 0,
        Activation::Relu => 1,
        Activation::LeakyRelu => 2,
        Activation::Softmax => 3,
    }
}

fn activation_from_code(c: u8) -> Result<Activation> {
    match c {
        0 => Ok(Activation::Identity),
        1 => Ok(Activation::Relu),
        2 => Ok(Activation::LeakyRelu),
        3 => Ok(Activation::Softmax),
        other => Err(Error::Checkpoint(format!(
            "unknown activation code {other}"
        ))),
    }
}

fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_exact<R: Read, const N: usize>(r: &mut R, what: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("truncated reading {what}: {e}")))?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact::<R, 4>(r, what)?))
}

fn read_f64<R: Read>(r: &mut R, what: &str) -> Result<f64> {
    Ok(f64::from_le_bytes(read_exact::<R, 8>(r, what)?))
}

/// Serialize `network` to a writer.
pub fn write_network<T: Scalar, W: Write>(network: &Network<T>, w: &mut W) -> Result<()> {
    w.write_all(MAGIC)?;
    write_u32(w, VERSION)?;
    write_u32(w, network.input_dim() as u32)?;
    write_u32(w, network.layers().len() as u32)?;
    for layer in network.layers() {
        write_u32(w, layer.in_dim() as u32)?;
        write_u32(w, layer.out_dim() as u32)?;
        w.write_all(&[activation_code(layer.activation())])?;
        write_f64(w, layer.dropout_rate())?;
        for &v in layer.weights() {
            write_f64(w, v.as_f64())?;
        }
        for &v in layer.biases() {
            write_f64(w, v.as_f64())?;
        }
    }
    Ok(())
}

/// Deserialize a network from a reader.
pub fn read_network<T: Scalar, R: Read>(r: &mut R) -> Result<Network<T>> {
    let magic = read_exact::<R, 4>(r, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic, not a network file".into()));
    }
    let version = read_u32(r, "version")?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let input_dim = read_u32(r, "input_dim")? as usize;
    let n_layers = read_u32(r, "layer count")? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for i in 0..n_layers {
        let in_dim = read_u32(r, "layer in_dim")? as usize;
        let out_dim = read_u32(r, "layer out_dim")? as usize;
        let act = activation_from_code(read_exact::<R, 1>(r, "activation")?[0])?;
        let dropout = read_f64(r, "dropout rate")?;
        // Cap a corrupt size field before it turns into a huge allocation.
        if in_dim == 0 || out_dim == 0 || in_dim.saturating_mul(out_dim) > (1 << 32) {
            return Err(Error::Checkpoint(format!(
                "implausible layer {i} shape {out_dim}x{in_dim}"
            )));
        }
        let mut weights = Vec::with_capacity(out_dim * in_dim);
        for _ in 0..out_dim * in_dim {
            weights.push(T::lit(read_f64(r, "weight")?));
        }
        let mut biases = Vec::with_capacity(out_dim);
        for _ in 0..out_dim {
            biases.push(T::lit(read_f64(r, "bias")?));
        }
        layers.push(
            DenseLayer::from_parts(in_dim, out_dim, weights, biases, act, dropout)
                .map_err(|e| Error::Checkpoint(format!("invalid layer {i}: {e}")))?,
        );
    }
    Network::from_layers(input_dim, layers)
        .map_err(|e| Error::Checkpoint(format!("invalid network structure: {e}")))
}

/// Write a network checkpoint file.
pub fn save_network<T: Scalar>(network: &Network<T>, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_network(network, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Read a network checkpoint file.
pub fn load_network<T: Scalar>(path: &Path) -> Result<Network<T>> {
    let mut r = BufReader::new(File::open(path)?);
    let network = read_network(&mut r)?;
    // Trailing garbage means the file is not what it claims to be.
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after network".into()));
    }
    Ok(network)
}
