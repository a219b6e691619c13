//! Light-curve simulator.
//!
//! Each observation is a star's Fourier-series signal, distorted by a
//! slowly varying instrument scale and offset, clipped to `[clip_lo, clip_hi]`
//! and finally perturbed with white Gaussian noise. The dataset is an
//! observation graph in which every star is seen by several instruments and
//! every instrument sees several stars, which is what makes triplet sampling
//! possible.

mod dataset;
mod io;
mod signal;
mod triplet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dataset::{build_dataset, Dataset};
pub use io::{
    dataset_fingerprint, export_json, load_dataset, save_dataset, DATASET_MAGIC, DATASET_VERSION,
};
pub use signal::{
    distort, instrument_offset, instrument_scale, observe, sample_instrument, sample_phases,
    sample_star, stellar_signal, time_grid,
};
pub use triplet::{sample_triplet, Triplet, TripletPool};

fn default_k() -> usize {
    13
}
fn default_m_terms() -> usize {
    17
}
fn default_t() -> usize {
    100
}
fn default_alpha() -> f64 {
    1.0
}
fn default_lambda() -> f64 {
    0.5
}
fn default_noise() -> f64 {
    0.03
}
fn default_clip_lo() -> f64 {
    -1.0
}
fn default_clip_hi() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_stars: usize,
    /// Number of instrument configurations.
    pub n_instruments: usize,
    pub n_obs: usize,
    /// Stellar parameters per star; the first sets the period, the rest are Fourier amplitudes.
    #[serde(default = "default_k")]
    pub k_params: usize,
    /// Fourier terms in each instrument scale and offset.
    #[serde(default = "default_m_terms")]
    pub m_terms: usize,
    #[serde(default = "default_t")]
    pub t_steps: usize,
    /// Power-law decay exponent of the harmonic amplitudes.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Period reduction factor.
    #[serde(default = "default_lambda")]
    pub lambda_reduction: f64,
    #[serde(default = "default_noise")]
    pub noise_std: f64,
    #[serde(default = "default_clip_lo")]
    pub clip_lo: f64,
    #[serde(default = "default_clip_hi")]
    pub clip_hi: f64,
    pub seed: u64,
}

impl SimConfig {
    /// 40,000 observations of 2,000 stars through 17 instruments.
    pub fn full_scale(seed: u64) -> Self {
        Self {
            n_stars: 2000,
            n_instruments: 17,
            n_obs: 40_000,
            ..Self::desk_scale(seed)
        }
    }

    /// 4,000 observations of 200 stars through 17 instruments.
    pub fn desk_scale(seed: u64) -> Self {
        Self {
            n_stars: 200,
            n_instruments: 17,
            n_obs: 4000,
            k_params: default_k(),
            m_terms: default_m_terms(),
            t_steps: default_t(),
            alpha: default_alpha(),
            lambda_reduction: default_lambda(),
            noise_std: default_noise(),
            clip_lo: default_clip_lo(),
            clip_hi: default_clip_hi(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(format!("sim: {msg}")));
        if self.n_stars == 0 {
            return fail("n_stars must be positive".into());
        }
        if self.n_obs < self.n_stars {
            return fail(format!(
                "n_obs ({}) must be >= n_stars ({})",
                self.n_obs, self.n_stars
            ));
        }
        if self.k_params < 2 {
            return fail(format!("k_params must be >= 2, got {}", self.k_params));
        }
        if self.t_steps < 2 {
            return fail(format!("t_steps must be >= 2, got {}", self.t_steps));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return fail(format!(
                "noise_std must be finite and >= 0, got {}",
                self.noise_std
            ));
        }
        if !(self.clip_lo < self.clip_hi) {
            return fail(format!(
                "clip_lo ({}) must be < clip_hi ({})",
                self.clip_lo, self.clip_hi
            ));
        }
        if !(self.lambda_reduction > 0.0 && self.lambda_reduction.is_finite()) {
            return fail(format!(
                "lambda_reduction must be > 0, got {}",
                self.lambda_reduction
            ));
        }
        if !self.alpha.is_finite() {
            return fail("alpha must be finite".into());
        }
        Ok(())
    }

    /// Period in time steps for a given log-period parameter.
    pub fn period(&self, log_period: f64) -> f64 {
        self.t_steps as f64 * log_period.exp() * self.lambda_reduction
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StellarParams {
    pub star_id: usize,
    /// `theta[0]` is the log-period; `theta[1..]` are harmonic amplitudes.
    pub theta: Vec<f64>,
}

impl StellarParams {
    pub fn log_period(&self) -> f64 {
        self.theta[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentParams {
    pub instrument_id: usize,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightCurve {
    pub obs_id: usize,
    pub star_id: usize,
    pub instrument_id: usize,
    pub flux: Vec<f64>,
    pub times: Vec<f64>,
    /// One phase per harmonic, in `[0, 2π)`.
    pub phases: Vec<f64>,
}
