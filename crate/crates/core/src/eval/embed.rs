use std::fs;
use std::path::Path;

use ndarray::{s, Array2, Axis};
use rayon::prelude::*;

use super::Representation;
use crate::codec::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::model::{BaselineModel, DualModel};
use crate::simgen::Dataset;

pub const EMBEDDING_MAGIC: &[u8; 8] = b"CDISEMBD";
const EMBEDDING_VERSION: u32 = 1;
const CHUNK: usize = 256;

/// One row per observation, in observation order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub obs_id: Vec<usize>,
    pub star_id: Vec<usize>,
    pub instrument_id: Vec<usize>,
    pub z_star: Array2<f64>,
    pub z_instr: Array2<f64>,
    pub z_baseline: Option<Array2<f64>>,
}

impl EmbeddingTable {
    pub fn len(&self) -> usize {
        self.obs_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs_id.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let mut ok = self.star_id.len() == n
            && self.instrument_id.len() == n
            && self.z_star.nrows() == n
            && self.z_instr.nrows() == n
            && self.z_star.ncols() == self.z_instr.ncols();
        if let Some(b) = &self.z_baseline {
            ok &= b.nrows() == n;
        }
        if !ok {
            return Err(Error::Shape(
                "embedding table columns have inconsistent lengths".into(),
            ));
        }
        Ok(())
    }

    /// Features for `rep`; raw flux comes from the dataset.
    pub fn features(&self, rep: Representation, ds: &Dataset) -> Result<Array2<f64>> {
        match rep {
            Representation::Raw => raw_flux(ds),
            Representation::ZStar => Ok(self.z_star.clone()),
            Representation::ZInstr => Ok(self.z_instr.clone()),
            Representation::ZBaseline => self
                .z_baseline
                .clone()
                .ok_or_else(|| Error::Config("embeddings contain no baseline latent".into())),
        }
    }
}

impl EmbeddingTable {
    /// Flux rows of every observation, the input the encoders see.
    pub fn raw_features(ds: &Dataset) -> Result<Array2<f64>> {
        raw_flux(ds)
    }
}

fn raw_flux(ds: &Dataset) -> Result<Array2<f64>> {
    let t = ds.t_steps();
    let flat: Vec<f64> = ds
        .observations
        .iter()
        .flat_map(|o| o.flux.iter().copied())
        .collect();
    Array2::from_shape_vec((ds.len(), t), flat).map_err(|e| Error::Shape(e.to_string()))
}

/// Applies `f` to fixed-size row chunks so results do not depend on thread count.
fn chunked(
    x: &Array2<f64>,
    width: usize,
    f: impl Fn(&Array2<f64>) -> Result<Array2<f64>> + Sync,
) -> Result<Array2<f64>> {
    let parts = (0..x.nrows().div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            f(
                &x.slice(s![c * CHUNK..((c + 1) * CHUNK).min(x.nrows()), ..])
                    .to_owned(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    if views.is_empty() {
        return Ok(Array2::zeros((0, width)));
    }
    ndarray::concatenate(Axis(0), &views).map_err(|e| Error::Shape(e.to_string()))
}

/// Latents of every observation. Projection heads are not used.
pub fn embed_dataset(
    dual: &DualModel,
    baseline: Option<&BaselineModel>,
    ds: &Dataset,
) -> Result<EmbeddingTable> {
    let t = ds.t_steps();
    for (what, arch) in std::iter::once(("dual", dual.architecture()))
        .chain(baseline.map(|b| ("baseline", b.architecture())))
    {
        if arch.t_steps != t {
            return Err(Error::Shape(format!(
                "{what} model expects {} time steps, dataset has {t}",
                arch.t_steps
            )));
        }
    }
    let x = raw_flux(ds)?;
    let z_dim = dual.architecture().latent_width();
    let table = EmbeddingTable {
        obs_id: ds.observations.iter().map(|o| o.obs_id).collect(),
        star_id: ds.observations.iter().map(|o| o.star_id).collect(),
        instrument_id: ds.observations.iter().map(|o| o.instrument_id).collect(),
        z_star: chunked(&x, z_dim, |c| dual.enc_star.predict(c))?,
        z_instr: chunked(&x, z_dim, |c| dual.enc_instr.predict(c))?,
        z_baseline: baseline
            .map(|b| chunked(&x, b.architecture().latent_width(), |c| b.encode(c)))
            .transpose()?,
    };
    table.validate()?;
    Ok(table)
}

fn write_matrix(w: &mut ByteWriter, m: &Array2<f64>) {
    w.usize(m.nrows());
    w.usize(m.ncols());
    w.f64s(&m.iter().copied().collect::<Vec<_>>());
}

fn read_matrix(r: &mut ByteReader<'_>) -> Result<Array2<f64>> {
    let shape = (r.usize()?, r.usize()?);
    Array2::from_shape_vec(shape, r.f64s()?).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_embeddings(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<()> {
    table.validate()?;
    let mut w = ByteWriter::new();
    w.bytes(EMBEDDING_MAGIC);
    w.u32(EMBEDDING_VERSION);
    w.usize(table.len());
    for ids in [&table.obs_id, &table.star_id, &table.instrument_id] {
        for &v in ids.iter() {
            w.usize(v);
        }
    }
    write_matrix(&mut w, &table.z_star);
    write_matrix(&mut w, &table.z_instr);
    w.u32(table.z_baseline.is_some() as u32);
    if let Some(b) = &table.z_baseline {
        write_matrix(&mut w, b);
    }
    fs::write(path, w.finish())?;
    Ok(())
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let bytes = fs::read(path)?;
    let mut r = ByteReader::verified(&bytes, "embeddings")?;
    if r.bytes(8)? != EMBEDDING_MAGIC {
        return Err(Error::Format("not an embeddings file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != EMBEDDING_VERSION {
        return Err(Error::Format(format!(
            "embeddings version {version}, expected {EMBEDDING_VERSION}"
        )));
    }
    let n = r.usize()?;
    let mut ids = || (0..n).map(|_| r.usize()).collect::<Result<Vec<_>>>();
    let (obs_id, star_id, instrument_id) = (ids()?, ids()?, ids()?);
    let z_star = read_matrix(&mut r)?;
    let z_instr = read_matrix(&mut r)?;
    let z_baseline = match r.u32()? {
        0 => None,
        1 => Some(read_matrix(&mut r)?),
        other => return Err(Error::Format(format!("bad baseline flag {other}"))),
    };
    r.expect_end()?;
    let table = EmbeddingTable {
        obs_id,
        star_id,
        instrument_id,
        z_star,
        z_instr,
        z_baseline,
    };
    table.validate()?;
    Ok(table)
}
