use std::fs;
use std::path::Path;

use super::{Dataset, InstrumentParams, LightCurve, SimConfig, StellarParams};
use crate::codec::{ByteReader, ByteWriter};
use crate::error::{Error, Result};

pub const DATASET_MAGIC: &[u8; 8] = b"CDISDATA";
pub const DATASET_VERSION: u32 = 1;

fn encode(ds: &Dataset) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(DATASET_MAGIC);
    w.u32(DATASET_VERSION);

    let c = &ds.config;
    for v in [
        c.n_stars,
        c.n_instruments,
        c.n_obs,
        c.k_params,
        c.m_terms,
        c.t_steps,
    ] {
        w.usize(v);
    }
    for v in [
        c.alpha,
        c.lambda_reduction,
        c.noise_std,
        c.clip_lo,
        c.clip_hi,
    ] {
        w.f64(v);
    }
    w.u64(c.seed);

    for s in &ds.stars {
        w.usize(s.star_id);
        w.f64s(&s.theta);
    }
    for m in &ds.instruments {
        w.usize(m.instrument_id);
        w.f64s(&m.beta);
        w.f64s(&m.gamma);
    }
    for o in &ds.observations {
        w.usize(o.obs_id);
        w.usize(o.star_id);
        w.usize(o.instrument_id);
        w.f64s(&o.flux);
        w.f64s(&o.times);
        w.f64s(&o.phases);
    }
    w.finish()
}

fn decode(bytes: &[u8]) -> Result<Dataset> {
    let mut r = ByteReader::verified(bytes, "dataset")?;
    if r.bytes(8)? != DATASET_MAGIC {
        return Err(Error::Format("not a dataset file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != DATASET_VERSION {
        return Err(Error::Format(format!(
            "dataset version {version}, expected {DATASET_VERSION}"
        )));
    }
    let config = SimConfig {
        n_stars: r.usize()?,
        n_instruments: r.usize()?,
        n_obs: r.usize()?,
        k_params: r.usize()?,
        m_terms: r.usize()?,
        t_steps: r.usize()?,
        alpha: r.f64()?,
        lambda_reduction: r.f64()?,
        noise_std: r.f64()?,
        clip_lo: r.f64()?,
        clip_hi: r.f64()?,
        seed: r.u64()?,
    };
    let stars = (0..config.n_stars)
        .map(|_| {
            Ok(StellarParams {
                star_id: r.usize()?,
                theta: r.f64s()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let instruments = (0..config.n_instruments)
        .map(|_| {
            Ok(InstrumentParams {
                instrument_id: r.usize()?,
                beta: r.f64s()?,
                gamma: r.f64s()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let observations = (0..config.n_obs)
        .map(|_| {
            Ok(LightCurve {
                obs_id: r.usize()?,
                star_id: r.usize()?,
                instrument_id: r.usize()?,
                flux: r.f64s()?,
                times: r.f64s()?,
                phases: r.f64s()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    r.expect_end()?;
    Dataset::from_parts(config, stars, instruments, observations)
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode(ds))?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    decode(&fs::read(path)?)
}

/// Identifies a dataset by the checksum of its binary encoding.
pub fn dataset_fingerprint(ds: &Dataset) -> u64 {
    let bytes = encode(ds);
    u64::from_le_bytes(
        bytes[bytes.len() - 32..bytes.len() - 24]
            .try_into()
            .unwrap(),
    )
}

/// Lossless JSON dump for inspection; floats use shortest round-trip formatting.
pub fn export_json(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, serde_json::to_vec(ds)?)?;
    Ok(())
}
