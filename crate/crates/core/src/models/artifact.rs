//! Binary model artifact: magic, config block, user count, then every
//! parameter tensor as little-endian f32 in [`ModelParams::tensors`] order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ModelConfig, ModelKind, ModelParams, XavierLaw};
use crate::error::{Error, Result};

pub const ARTIFACT_MAGIC: [u8; 6] = *b"BRIEM1";

pub fn write_artifact(params: &ModelParams<f32>, w: &mut impl Write) -> std::io::Result<()> {
    let c = &params.config;
    w.write_all(&ARTIFACT_MAGIC)?;
    w.write_all(&[c.kind.code()])?;
    w.write_all(&(c.d as u32).to_le_bytes())?;
    w.write_all(&(c.feature_dim as u32).to_le_bytes())?;
    w.write_all(&c.dropout.to_le_bytes())?;
    w.write_all(&c.mlp_dropout.to_le_bytes())?;
    w.write_all(&[match c.init {
        XavierLaw::Uniform => 0,
        XavierLaw::Normal => 1,
    }])?;
    w.write_all(&c.seed.to_le_bytes())?;
    w.write_all(&(c.mlp_hidden.len() as u32).to_le_bytes())?;
    for &h in &c.mlp_hidden {
        w.write_all(&(h as u32).to_le_bytes())?;
    }
    w.write_all(&(params.n_users as u32).to_le_bytes())?;
    for t in params.tensors() {
        for v in t {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_artifact(r: &mut impl Read) -> Result<ModelParams<f32>> {
    let mut magic = [0u8; 6];
    read_exact(r, &mut magic)?;
    if magic != ARTIFACT_MAGIC {
        return Err(Error::Artifact(format!("bad magic {magic:?}")));
    }
    let kind = ModelKind::from_code(read_u8(r)?).ok_or_else(|| Error::Artifact("unknown model kind".into()))?;
    let d = read_u32(r)? as usize;
    let feature_dim = read_u32(r)? as usize;
    let dropout = f32::from_bits(read_u32(r)?);
    let mlp_dropout = f32::from_bits(read_u32(r)?);
    let init = match read_u8(r)? {
        0 => XavierLaw::Uniform,
        1 => XavierLaw::Normal,
        other => return Err(Error::Artifact(format!("unknown init law {other}"))),
    };
    let mut seed = [0u8; 8];
    read_exact(r, &mut seed)?;
    let n_hidden = read_u32(r)? as usize;
    if n_hidden > 1024 {
        return Err(Error::Artifact(format!("implausible hidden layer count {n_hidden}")));
    }
    let mlp_hidden = (0..n_hidden).map(|_| read_u32(r).map(|h| h as usize)).collect::<Result<_>>()?;
    let n_users = read_u32(r)? as usize;

    let config = ModelConfig {
        kind,
        d,
        feature_dim,
        dropout,
        mlp_hidden,
        mlp_dropout,
        init,
        seed: u64::from_le_bytes(seed),
    };
    config.validate().map_err(|e| Error::Artifact(e.to_string()))?;
    if !kind.is_learned() {
        return Err(Error::Artifact(format!("{kind} has no parameters to load")));
    }

    let mut params = ModelParams::<f32>::zeros(&config, n_users);
    for t in params.tensors_mut() {
        let mut buf = vec![0u8; t.len() * 4];
        read_exact(r, &mut buf)?;
        for (x, c) in t.iter_mut().zip(buf.chunks_exact(4)) {
            *x = f32::from_le_bytes(c.try_into().unwrap());
        }
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| Error::Artifact(e.to_string()))? != 0 {
        return Err(Error::Artifact("trailing bytes after parameters".into()));
    }
    Ok(params)
}

pub fn save_artifact(params: &ModelParams<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_artifact(params, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_artifact(path: impl AsRef<Path>) -> Result<ModelParams<f32>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_artifact(&mut BufReader::new(file))
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::Artifact("artifact truncated".into()))
}

fn read_u8(r: &mut impl Read) -> Result<u8> {
    let mut b = [0u8; 1];
    read_exact(r, &mut b)?;
    Ok(b[0])
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}
