use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{InstrumentParams, LightCurve, SimConfig, StellarParams};
use crate::error::{Error, Result};

const INSTRUMENT_AMPLITUDE: f64 = 0.05;

/// Log-period uniform on (-1, 1), harmonic amplitudes standard normal.
pub fn sample_star<R: Rng + ?Sized>(
    rng: &mut R,
    star_id: usize,
    config: &SimConfig,
) -> StellarParams {
    let mut theta = Vec::with_capacity(config.k_params);
    theta.push(rng.random_range(-1.0..1.0));
    theta.extend((1..config.k_params).map(|_| rng.sample::<f64, _>(StandardNormal)));
    StellarParams { star_id, theta }
}

pub fn sample_instrument<R: Rng + ?Sized>(
    rng: &mut R,
    instrument_id: usize,
    config: &SimConfig,
) -> InstrumentParams {
    let beta = (0..config.m_terms)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    let gamma = (0..config.m_terms)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    InstrumentParams {
        instrument_id,
        beta,
        gamma,
    }
}

pub fn sample_phases<R: Rng + ?Sized>(rng: &mut R, config: &SimConfig) -> Vec<f64> {
    (1..config.k_params)
        .map(|_| rng.random_range(0.0..TAU))
        .collect()
}

/// Uniform grid `0, 1, ..., T-1`.
pub fn time_grid(t_steps: usize) -> Vec<f64> {
    (0..t_steps).map(|t| t as f64).collect()
}

/// Noise-free stellar flux: the real part of the harmonic series with
/// amplitudes `theta[k] / k^alpha`, per-observation phases and period
/// `T * exp(theta[0]) * lambda`.
pub fn stellar_signal(
    star: &StellarParams,
    phases: &[f64],
    times: &[f64],
    config: &SimConfig,
) -> Result<Vec<f64>> {
    if !(config.lambda_reduction > 0.0) {
        return Err(Error::Config(format!(
            "lambda_reduction must be > 0 (got {}), the period would be degenerate",
            config.lambda_reduction
        )));
    }
    let n_harmonics = star.theta.len().saturating_sub(1);
    if phases.len() != n_harmonics {
        return Err(Error::Shape(format!(
            "expected {n_harmonics} phases for K = {}, got {}",
            star.theta.len(),
            phases.len()
        )));
    }
    let omega = TAU / config.period(star.log_period());
    let amplitudes: Vec<f64> = (1..=n_harmonics)
        .map(|k| star.theta[k] / (k as f64).powf(config.alpha))
        .collect();
    Ok(times
        .iter()
        .map(|&t| {
            amplitudes
                .iter()
                .zip(phases)
                .enumerate()
                .map(|(i, (&a, &phi))| a * (phi + omega * (i + 1) as f64 * t).cos())
                .sum()
        })
        .collect())
}

fn cosine_series(coeffs: &[f64], times: &[f64], t_steps: usize) -> Vec<f64> {
    let base = PI / t_steps as f64;
    times
        .iter()
        .map(|&t| {
            coeffs
                .iter()
                .enumerate()
                .map(|(j, &c)| c * (base * j as f64 * t).cos())
                .sum()
        })
        .collect()
}

/// Multiplicative distortion `1 + 0.05 * Re[sum_j beta_j exp(i pi j t / T)]`.
pub fn instrument_scale(inst: &InstrumentParams, times: &[f64], config: &SimConfig) -> Vec<f64> {
    cosine_series(&inst.beta, times, config.t_steps)
        .into_iter()
        .map(|s| 1.0 + INSTRUMENT_AMPLITUDE * s)
        .collect()
}

/// Additive distortion `0.05 * Re[sum_j gamma_j exp(i pi j t / T)]`.
pub fn instrument_offset(inst: &InstrumentParams, times: &[f64], config: &SimConfig) -> Vec<f64> {
    cosine_series(&inst.gamma, times, config.t_steps)
        .into_iter()
        .map(|o| INSTRUMENT_AMPLITUDE * o)
        .collect()
}

/// `clip(scale * signal + offset)`, without noise.
pub fn distort(signal: &[f64], scale: &[f64], offset: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    signal
        .iter()
        .zip(scale)
        .zip(offset)
        .map(|((&f, &s), &o)| (s * f + o).clamp(lo, hi))
        .collect()
}

/// One noisy observation. Clipping happens before the noise is added.
pub fn observe<R: Rng + ?Sized>(
    obs_id: usize,
    star: &StellarParams,
    inst: &InstrumentParams,
    phases: Vec<f64>,
    rng: &mut R,
    config: &SimConfig,
) -> Result<LightCurve> {
    let times = time_grid(config.t_steps);
    let signal = stellar_signal(star, &phases, &times, config)?;
    let scale = instrument_scale(inst, &times, config);
    let offset = instrument_offset(inst, &times, config);
    let mut flux = distort(&signal, &scale, &offset, config.clip_lo, config.clip_hi);
    if config.noise_std > 0.0 {
        for f in &mut flux {
            *f += config.noise_std * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(LightCurve {
        obs_id,
        star_id: star.star_id,
        instrument_id: inst.instrument_id,
        flux,
        times,
        phases,
    })
}
