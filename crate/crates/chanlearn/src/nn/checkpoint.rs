//! Versioned binary model container (magic `ICLM`): layer specs, parameter
//! blobs, and the training digest that identifies the run that produced it.

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::io::{Cursor, Read, Write};
use std::path::Path;
use thiserror::Error;

use super::model::{LayerSpec, Model, ModelSpec};

pub const MODEL_MAGIC: &[u8; 4] = b"ICLM";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("bad magic at byte {offset}: not an ICLM model file")]
    BadMagic { offset: usize },
    #[error("unsupported model container version {0}")]
    UnsupportedVersion(u32),
    #[error("file truncated near byte {offset}")]
    Truncated { offset: usize },
    #[error("unknown layer tag {tag} at byte {offset}")]
    UnknownLayer { tag: u8, offset: usize },
    #[error("parameter layout does not match the layer specs: {0}")]
    ParamMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn layer_tag(layer: &LayerSpec) -> u8 {
    match layer {
        LayerSpec::Conv { .. } => 0,
        LayerSpec::Relu => 1,
        LayerSpec::MaxPool2 => 2,
        LayerSpec::Flatten => 3,
        LayerSpec::Dense { .. } => 4,
        LayerSpec::Softmax => 5,
    }
}

/// Serialize a model plus its training digest.
pub fn save_model(model: &Model, digest: &str, path: &Path) -> Result<(), CheckpointError> {
    let mut buf: Vec<u8> = Vec::new();
    buf.write_all(MODEL_MAGIC)?;
    buf.write_u32::<LittleEndian>(VERSION)?;
    let (c, h, w) = model.spec.input;
    buf.write_u32::<LittleEndian>(c as u32)?;
    buf.write_u32::<LittleEndian>(h as u32)?;
    buf.write_u32::<LittleEndian>(w as u32)?;
    buf.write_u32::<LittleEndian>(model.spec.layers.len() as u32)?;
    for layer in &model.spec.layers {
        buf.write_u8(layer_tag(layer))?;
        match *layer {
            LayerSpec::Conv { filters, kh, kw } => {
                buf.write_u32::<LittleEndian>(filters as u32)?;
                buf.write_u32::<LittleEndian>(kh as u32)?;
                buf.write_u32::<LittleEndian>(kw as u32)?;
            }
            LayerSpec::Dense { units } => {
                buf.write_u32::<LittleEndian>(units as u32)?;
            }
            _ => {}
        }
    }
    buf.write_u32::<LittleEndian>(model.params.len() as u32)?;
    for tensor in &model.params {
        buf.write_u64::<LittleEndian>(tensor.len() as u64)?;
        for &v in tensor {
            buf.write_f32::<LittleEndian>(v)?;
        }
    }
    let digest_bytes = digest.as_bytes();
    buf.write_u16::<LittleEndian>(digest_bytes.len() as u16)?;
    buf.write_all(digest_bytes)?;
    buf.write_all(MODEL_MAGIC)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Deserialize and structurally validate a model container.
pub fn load_model(path: &Path) -> Result<(Model, String), CheckpointError> {
    let bytes = std::fs::read(path)?;
    parse_model(&bytes)
}

pub fn parse_model(bytes: &[u8]) -> Result<(Model, String), CheckpointError> {
    let mut cur = Cursor::new(bytes);
    let truncated = |cur: &Cursor<&[u8]>| CheckpointError::Truncated { offset: cur.position() as usize };

    let mut magic = [0u8; 4];
    cur.read_exact(&mut magic).map_err(|_| truncated(&cur))?;
    if &magic != MODEL_MAGIC {
        return Err(CheckpointError::BadMagic { offset: 0 });
    }
    let version = cur.read_u32::<LittleEndian>().map_err(|_| truncated(&cur))?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let c = cur.read_u32::<LittleEndian>().map_err(|_| truncated(&cur))? as usize;
    let h = cur.read_u32::<LittleEndian>().map_err(|_| truncated(&cur))? as usize;
    let w = cur.read_u32::<LittleEndian>().map_err(|_| truncated(&cur))? as usize;
    let n_layers = cur.read_u32::<LittleEndian>().map_err(|_| truncated(&cur))? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let offset = cur.position() as usize;
        let tag = cur.read_u8().map_err(|_| truncated(&cur))?;
        layers.push(match tag {
            0 => LayerSpec::Conv {
                filters: cur.read_u32::<LittleEndian>().map_err(|_| truncated(&cur))? as usize,
                kh: cur.read_u32::<LittleEndian>().map_err(|_| truncated(&cur))? as usize,
                kw: cur.read_u32::<LittleEndian>().map_err(|_| truncated(&cur))? as usize,
            },
            1 => LayerSpec::Relu,
            2 => LayerSpec::MaxPool2,
            3 => LayerSpec::Flatten,
            4 => LayerSpec::Dense {
                units: cur.read_u32::<LittleEndian>().map_err(|_| truncated(&cur))? as usize,
            },
            5 => LayerSpec::Softmax,
            tag => return Err(CheckpointError::UnknownLayer { tag, offset }),
        });
    }
    let spec = ModelSpec { input: (c, h, w), layers };
    spec.shapes().map_err(|e| CheckpointError::ParamMismatch(e.to_string()))?;

    let n_tensors = cur.read_u32::<LittleEndian>().map_err(|_| truncated(&cur))? as usize;
    let mut params = Vec::with_capacity(n_tensors);
    for _ in 0..n_tensors {
        let len = cur.read_u64::<LittleEndian>().map_err(|_| truncated(&cur))? as usize;
        let mut tensor = vec![0.0f32; len];
        for v in &mut tensor {
            *v = cur.read_f32::<LittleEndian>().map_err(|_| truncated(&cur))?;
        }
        params.push(tensor);
    }
    let digest_len = cur.read_u16::<LittleEndian>().map_err(|_| truncated(&cur))? as usize;
    let mut digest_bytes = vec![0u8; digest_len];
    cur.read_exact(&mut digest_bytes).map_err(|_| truncated(&cur))?;
    let digest = String::from_utf8_lossy(&digest_bytes).into_owned();
    let mut tail = [0u8; 4];
    cur.read_exact(&mut tail).map_err(|_| truncated(&cur))?;
    if &tail != MODEL_MAGIC {
        return Err(CheckpointError::BadMagic { offset: cur.position() as usize - 4 });
    }

    let model = Model { spec, params };
    let declared = model.spec.param_count().map_err(|e| CheckpointError::ParamMismatch(e.to_string()))?;
    if model.param_count() != declared {
        return Err(CheckpointError::ParamMismatch(format!(
            "blob holds {} parameters, specs imply {declared}",
            model.param_count()
        )));
    }
    Ok((model, digest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::ModelSpec;

    #[test]
    fn round_trip_is_bit_exact() {
        let model = Model::init(ModelSpec::speech_cnn(), 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.iclm");
        save_model(&model, "digest-abc", &path).unwrap();
        let (loaded, digest) = load_model(&path).unwrap();
        assert_eq!(digest, "digest-abc");
        assert_eq!(loaded.spec, model.spec);
        assert_eq!(loaded.params, model.params);
    }

    #[test]
    fn truncation_and_bad_magic_are_rejected() {
        let model = Model::init(ModelSpec::speech_cnn(), 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.iclm");
        save_model(&model, "d", &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        assert!(matches!(
            parse_model(&bytes[..bytes.len() / 2]),
            Err(CheckpointError::Truncated { .. })
        ));

        let mut corrupt = bytes.clone();
        corrupt[0] = b'X';
        assert!(matches!(parse_model(&corrupt), Err(CheckpointError::BadMagic { offset: 0 })));
    }
}
