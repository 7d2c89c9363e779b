//! Versioned binary container for fitted models.
//!
//! All integers and reals are little-endian.
//!
//! ```text
//! magic     8 bytes   "LSTNETCK"
//! version   u32       FORMAT_VERSION
//! kind      u8        0 = neural, 1 = ridge (VAR), 2 = univariate AR
//! seed      u64       RNG seed the model was built with
//! width     u32       number of series n
//! config    u32 byte length, then UTF-8 JSON of the model configuration
//! scales    u32 count, then count × f64 normalization factors (0 = none)
//! params    u32 count, then per tensor:
//!             u32 name length, UTF-8 name
//!             u32 rank, rank × u32 extents
//!             product(extents) × f64 values, row-major
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::io::atomic_write;
use crate::model::{LstNetConfig, LstNetModel, ParamStore};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"LSTNETCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Neural,
    Ridge,
    UnivariateAr,
}

impl ModelKind {
    fn tag(self) -> u8 {
        match self {
            ModelKind::Neural => 0,
            ModelKind::Ridge => 1,
            ModelKind::UnivariateAr => 2,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(ModelKind::Neural),
            1 => Ok(ModelKind::Ridge),
            2 => Ok(ModelKind::UnivariateAr),
            _ => Err(Error::Checkpoint(format!("unknown model kind tag {tag}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub seed: u64,
    pub width: usize,
    pub config_json: String,
    pub scales: Vec<f64>,
    pub params: ParamStore,
}

fn corrupt(e: std::io::Error) -> Error {
    Error::Checkpoint(format!("truncated or unreadable checkpoint: {e}"))
}

fn read_len<R: Read>(r: &mut R) -> Result<usize> {
    Ok(r.read_u32::<LittleEndian>().map_err(corrupt)? as usize)
}

fn read_string<R: Read>(r: &mut R) -> Result<String> {
    let len = read_len(r)?;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(corrupt)?;
    String::from_utf8(buf).map_err(|e| Error::Checkpoint(format!("invalid UTF-8: {e}")))
}

fn write_len<W: Write>(w: &mut W, len: usize) -> Result<()> {
    let len = u32::try_from(len).map_err(|_| Error::Checkpoint("section too large".into()))?;
    w.write_u32::<LittleEndian>(len)?;
    Ok(())
}

impl Checkpoint {
    pub fn from_model(model: &LstNetModel, scales: &[f64], seed: u64) -> Result<Self> {
        Ok(Checkpoint {
            kind: ModelKind::Neural,
            seed,
            width: model.width(),
            config_json: serde_json::to_string(model.config()).map_err(|e| Error::Checkpoint(e.to_string()))?,
            scales: scales.to_vec(),
            params: model.params().clone(),
        })
    }

    pub fn to_model(&self) -> Result<LstNetModel> {
        if self.kind != ModelKind::Neural {
            return Err(Error::Checkpoint(format!(
                "expected a neural checkpoint, found {:?}",
                self.kind
            )));
        }
        let config: LstNetConfig = serde_json::from_str(&self.config_json)
            .map_err(|e| Error::Checkpoint(format!("bad model configuration: {e}")))?;
        LstNetModel::from_parts(config, self.width, self.params.clone())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
        w.write_u8(self.kind.tag())?;
        w.write_u64::<LittleEndian>(self.seed)?;
        write_len(w, self.width)?;
        write_len(w, self.config_json.len())?;
        w.write_all(self.config_json.as_bytes())?;
        write_len(w, self.scales.len())?;
        for &s in &self.scales {
            w.write_f64::<LittleEndian>(s)?;
        }
        write_len(w, self.params.len())?;
        for (name, t) in self.params.iter() {
            write_len(w, name.len())?;
            w.write_all(name.as_bytes())?;
            write_len(w, t.rank())?;
            for &d in t.shape() {
                write_len(w, d)?;
            }
            for &v in t.data() {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(corrupt)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = r.read_u32::<LittleEndian>().map_err(corrupt)?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version} (this build reads {FORMAT_VERSION})"
            )));
        }
        let kind = ModelKind::from_tag(r.read_u8().map_err(corrupt)?)?;
        let seed = r.read_u64::<LittleEndian>().map_err(corrupt)?;
        let width = read_len(r)?;
        let config_json = read_string(r)?;
        let n_scales = read_len(r)?;
        let scales = (0..n_scales)
            .map(|_| r.read_f64::<LittleEndian>().map_err(corrupt))
            .collect::<Result<Vec<_>>>()?;
        let n_params = read_len(r)?;
        let mut params = ParamStore::new();
        for _ in 0..n_params {
            let name = read_string(r)?;
            let rank = read_len(r)?;
            let shape = (0..rank).map(|_| read_len(r)).collect::<Result<Vec<_>>>()?;
            let len: usize = shape.iter().product();
            let data = (0..len)
                .map(|_| r.read_f64::<LittleEndian>().map_err(corrupt))
                .collect::<Result<Vec<_>>>()?;
            params.insert(name, Tensor::new(shape, data)?);
        }
        Ok(Checkpoint {
            kind,
            seed,
            width,
            config_json,
            scales,
            params,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    /// Writes through a temporary sibling file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        atomic_write(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::read_from(&mut bytes.as_slice())
    }
}
