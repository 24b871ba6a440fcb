//! Versioned binary model checkpoints.
//!
//! Layout (all integers little-endian):
//! ```text
//! magic   8 bytes  "DVLACKPT"
//! version u32
//! cfg_len u32, followed by the model config as canonical JSON
//! vocab   u32
//! expert  u8   (1 if the action expert is attached)
//! nparams u32
//! per parameter, in creation order:
//!   name_len u32, name bytes, rows u32, cols u32, rows*cols f32 values
//! ```
//!
//! Values are stored as f32: the working precision is f64, but checkpoint
//! files carry single precision to halve their size. Loading widens back to
//! f64, and save(load(x)) is byte-identical.

use std::fs;
use std::io::{Read as _, Write as _};
use std::path::Path;

use crate::mat::Mat;
use crate::model::config::ModelConfig;
use crate::model::forward::TwoExpertModel;
use crate::model::params::ParamSet;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"DVLACKPT";
const VERSION: u32 = 1;

pub fn save(model: &TwoExpertModel, path: &Path) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    let cfg_json = serde_json::to_vec(&model.config)?;
    buf.extend_from_slice(&(cfg_json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&cfg_json);
    buf.extend_from_slice(&(model.vocab_size as u32).to_le_bytes());
    buf.push(model.has_action_expert as u8);
    buf.extend_from_slice(&(model.params.len() as u32).to_le_bytes());
    for (name, mat) in model.params.iter() {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(mat.rows as u32).to_le_bytes());
        buf.extend_from_slice(&(mat.cols as u32).to_le_bytes());
        for &v in &mat.data {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::CheckpointFormat("truncated file".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

pub fn load(path: &Path) -> Result<TwoExpertModel> {
    let mut raw = Vec::new();
    fs::File::open(path)?.read_to_end(&mut raw)?;
    let mut c = Cursor { data: &raw, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(Error::CheckpointFormat("bad magic".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::CheckpointFormat(format!(
            "unsupported version {version} (expected {VERSION})"
        )));
    }
    let cfg_len = c.u32()? as usize;
    let config: ModelConfig = serde_json::from_slice(c.take(cfg_len)?)?;
    config.validate()?;
    let vocab_size = c.u32()? as usize;
    let has_expert = c.u8()? != 0;
    let n_params = c.u32()? as usize;
    let mut params = ParamSet::new();
    for _ in 0..n_params {
        let name_len = c.u32()? as usize;
        let name = std::str::from_utf8(c.take(name_len)?)
            .map_err(|_| Error::CheckpointFormat("non-utf8 parameter name".into()))?
            .to_string();
        let rows = c.u32()? as usize;
        let cols = c.u32()? as usize;
        let mut m = Mat::zeros(rows, cols);
        let bytes = c.take(rows * cols * 4)?;
        for (i, ch) in bytes.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes([ch[0], ch[1], ch[2], ch[3]]) as f64;
            if !v.is_finite() {
                return Err(Error::CheckpointFormat(format!("non-finite value in {name}")));
            }
            m.data[i] = v;
        }
        params.insert(&name, m);
    }
    if c.pos != raw.len() {
        return Err(Error::CheckpointFormat("trailing bytes".into()));
    }
    Ok(TwoExpertModel {
        config,
        vocab_size,
        params,
        has_action_expert: has_expert,
    })
}

/// Load and require the stored config to hash-match `expected`.
pub fn load_expect(path: &Path, expected: &ModelConfig) -> Result<TwoExpertModel> {
    let model = load(path)?;
    if model.config.hash() != expected.hash() {
        return Err(Error::ConfigHashMismatch {
            ckpt: model.config.hash(),
            requested: expected.hash(),
        });
    }
    Ok(model)
}
