//! On-disk agent container: a small metadata header followed by the actor
//! and critic network containers.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   "DAGT"
//! version u32          (currently 1)
//! model   u8           0 = one-step classify-only, 1 = one-step with
//!                      reject, 2 = episodic
//! origin  u32          origin month the agent was trained from
//! digest  [u8; 32]     sha-256 of the config JSON that follows
//! cfg_len u32
//! config  cfg_len bytes of JSON
//! actor   network container
//! critic  network container
//! ```
//!
//! Parameters and config travel in the file; optimizer moments, window
//! contents, and rng positions do not. A loaded agent therefore predicts
//! identically to the saved one, while further fine-tuning restarts from
//! fresh optimizer state.

use std::io::{Read, Write};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{read_network, write_network, Network};

const MAGIC: &[u8; 4] = b"DAGT";
const VERSION: u32 = 1;

pub(crate) const MODEL_CLASSIFY_ONLY: u8 = 0;
pub(crate) const MODEL_CLASSIFY_REJECT: u8 = 1;
pub(crate) const MODEL_EPISODIC: u8 = 2;

pub(crate) fn config_digest(config_json: &[u8]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(config_json);
    hasher.finalize().into()
}

pub(crate) fn write_container<W: Write>(
    w: &mut W,
    model: u8,
    origin_month: u32,
    config_json: &[u8],
    actor: &Network<f32>,
    critic: &Network<f32>,
) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[model])?;
    w.write_all(&origin_month.to_le_bytes())?;
    w.write_all(&config_digest(config_json))?;
    let cfg_len = u32::try_from(config_json.len())
        .map_err(|_| Error::Checkpoint("config JSON exceeds u32 length".into()))?;
    w.write_all(&cfg_len.to_le_bytes())?;
    w.write_all(config_json)?;
    write_network(actor, w)?;
    write_network(critic, w)?;
    Ok(())
}

pub(crate) struct ContainerHeader {
    pub model: u8,
    pub origin_month: u32,
    pub config_json: Vec<u8>,
}

pub(crate) fn read_container<R: Read>(
    r: &mut R,
) -> Result<(ContainerHeader, Network<f32>, Network<f32>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad agent container magic".into()));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported agent container version {version}"
        )));
    }
    let mut model = [0u8; 1];
    r.read_exact(&mut model)?;
    let model = model[0];
    if model > MODEL_EPISODIC {
        return Err(Error::Checkpoint(format!("unknown model code {model}")));
    }
    r.read_exact(&mut word)?;
    let origin_month = u32::from_le_bytes(word);
    let mut digest = [0u8; 32];
    r.read_exact(&mut digest)?;
    r.read_exact(&mut word)?;
    let cfg_len = u32::from_le_bytes(word) as usize;
    let mut config_json = vec![0u8; cfg_len];
    r.read_exact(&mut config_json)?;
    if config_digest(&config_json) != digest {
        return Err(Error::Checkpoint(
            "config digest mismatch: header does not match stored config".into(),
        ));
    }
    let actor = read_network::<f32, _>(r)?;
    let critic = read_network::<f32, _>(r)?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Checkpoint(
            "trailing bytes after agent container".into(),
        ));
    }
    Ok((
        ContainerHeader {
            model,
            origin_month,
            config_json,
        },
        actor,
        critic,
    ))
}
