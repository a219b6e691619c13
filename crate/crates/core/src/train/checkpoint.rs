use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{TrainConfig, TrainLogRecord};
use crate::codec::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::model::{Architecture, Model};
use crate::nncore::AdamState;
use crate::rng::RngState;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CDISCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Early-stopping bookkeeping.
///
/// `best_val` is the lowest validation loss seen; `ref_val` is the value the
/// patience counter compares against and only moves on a `min_delta` gain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub epoch: usize,
    pub best_epoch: usize,
    pub best_val: f64,
    pub ref_val: f64,
    pub bad_epochs: usize,
    pub stopped: bool,
}

/// Complete training state: resumable and, through `best`, deployable.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub arch: Architecture,
    pub config: TrainConfig,
    pub dataset_fingerprint: u64,
    pub progress: Progress,
    pub log: Vec<TrainLogRecord>,
    pub rng: RngState,
    pub adam: AdamState,
    pub current: Vec<(String, Array2<f64>)>,
    pub best: Vec<(String, Array2<f64>)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    arch: Architecture,
    config: TrainConfig,
    dataset_fingerprint: u64,
    progress: Progress,
    log: Vec<TrainLogRecord>,
    rng: RngState,
    adam: AdamState,
}

impl Checkpoint {
    fn model_from(&self, blocks: &[(String, Array2<f64>)]) -> Result<Model> {
        let mut model = Model::new(self.arch.clone(), self.config.tau, self.config.seed)?;
        model.load_values(blocks)?;
        Ok(model)
    }

    /// Parameters with the lowest recorded validation loss.
    pub fn best_model(&self) -> Result<Model> {
        self.model_from(&self.best)
    }

    pub fn current_model(&self) -> Result<Model> {
        self.model_from(&self.current)
    }

    /// Fails with a spec-hash error unless the stored architecture is `expected`.
    pub fn expect_architecture(&self, expected: &Architecture) -> Result<()> {
        if expected.spec_hash() != self.arch.spec_hash() {
            return Err(Error::SpecHash {
                expected: expected.spec_hash(),
                found: self.arch.spec_hash(),
            });
        }
        Ok(())
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let header = Header {
            arch: self.arch.clone(),
            config: self.config.clone(),
            dataset_fingerprint: self.dataset_fingerprint,
            progress: self.progress,
            log: self.log.clone(),
            rng: self.rng,
            adam: self.adam.clone(),
        };
        let mut w = ByteWriter::new();
        w.bytes(CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION);
        w.u64(self.arch.spec_hash());
        w.str(&serde_json::to_string(&header)?);
        write_blocks(&mut w, self.current.iter().map(|(n, v)| (n.as_str(), v)));
        write_blocks(&mut w, self.best.iter().map(|(n, v)| (n.as_str(), v)));
        let names: Vec<&str> = self.current.iter().map(|(n, _)| n.as_str()).collect();
        let moments = if self.adam.first_moment.is_empty() {
            Vec::new()
        } else {
            names.clone()
        };
        write_blocks(&mut w, moments.iter().copied().zip(&self.adam.first_moment));
        write_blocks(
            &mut w,
            moments.iter().copied().zip(&self.adam.second_moment),
        );
        Ok(w.finish())
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::verified(bytes, "checkpoint")?;
        if r.bytes(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "checkpoint version {version}, expected {CHECKPOINT_VERSION}"
            )));
        }
        let stored_hash = r.u64()?;
        let header: Header = serde_json::from_str(&r.str()?)?;
        if header.arch.spec_hash() != stored_hash {
            return Err(Error::SpecHash {
                expected: stored_hash,
                found: header.arch.spec_hash(),
            });
        }
        let current = read_blocks(&mut r)?;
        let best = read_blocks(&mut r)?;
        let first = read_blocks(&mut r)?;
        let second = read_blocks(&mut r)?;
        r.expect_end()?;
        let mut adam = header.adam;
        adam.first_moment = first.into_iter().map(|(_, v)| v).collect();
        adam.second_moment = second.into_iter().map(|(_, v)| v).collect();
        Ok(Self {
            arch: header.arch,
            config: header.config,
            dataset_fingerprint: header.dataset_fingerprint,
            progress: header.progress,
            log: header.log,
            rng: header.rng,
            adam,
            current,
            best,
        })
    }
}

fn write_blocks<'b>(
    w: &mut ByteWriter,
    blocks: impl ExactSizeIterator<Item = (&'b str, &'b Array2<f64>)>,
) {
    w.usize(blocks.len());
    for (name, value) in blocks {
        w.str(name);
        w.usize(value.nrows());
        w.usize(value.ncols());
        w.f64s(&value.iter().copied().collect::<Vec<_>>());
    }
}

fn read_blocks(r: &mut ByteReader<'_>) -> Result<Vec<(String, Array2<f64>)>> {
    let n = r.usize()?;
    (0..n)
        .map(|_| {
            let name = r.str()?;
            let (rows, cols) = (r.usize()?, r.usize()?);
            let value = Array2::from_shape_vec((rows, cols), r.f64s()?)
                .map_err(|e| Error::Format(format!("block {name}: {e}")))?;
            Ok((name, value))
        })
        .collect()
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, ckpt.encode()?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::decode(&fs::read(path)?)
}
