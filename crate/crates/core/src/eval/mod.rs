//! Embedding extraction, downstream probes, PCA and report files.

mod embed;
mod leakage;
mod pca;
mod probe;
mod report;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use embed::{embed_dataset, load_embeddings, save_embeddings, EmbeddingTable, EMBEDDING_MAGIC};
pub use leakage::{instrument_leakage_probe, LeakageResult};
pub use pca::{pca_2d, Pca};
pub use probe::{probe_regression, r2_score, ProbeResult, ProbeTask};
pub use report::{
    read_probe_csv, write_coords_csv, write_probe_csv, write_report, CoordRow, Report,
    COORDS_HEADER, PROBE_HEADER,
};

/// Feature source for a probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Raw,
    ZStar,
    ZInstr,
    ZBaseline,
}

impl Representation {
    pub const ALL: [Representation; 4] = [
        Representation::Raw,
        Representation::ZStar,
        Representation::ZInstr,
        Representation::ZBaseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Representation::Raw => "raw",
            Representation::ZStar => "z_star",
            Representation::ZInstr => "z_instr",
            Representation::ZBaseline => "z_baseline",
        }
    }
}

impl std::fmt::Display for Representation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown representation {s:?} (expected raw, z_star, z_instr or z_baseline)"
                ))
            })
    }
}

fn default_probe_hidden() -> usize {
    32
}
fn default_probe_epochs() -> usize {
    200
}
fn default_probe_lr() -> f64 {
    1e-3
}
fn default_probe_batch_size() -> usize {
    32
}
fn default_train_sizes() -> Vec<usize> {
    vec![10, 30, 100, 300, 1000]
}
fn default_runs() -> usize {
    5
}
fn default_leakage_epochs() -> usize {
    300
}
fn default_leakage_lr() -> f64 {
    1e-2
}
fn default_leakage_test_fraction() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default = "default_probe_hidden")]
    pub probe_hidden: usize,
    #[serde(default = "default_probe_epochs")]
    pub probe_epochs: usize,
    #[serde(default = "default_probe_lr")]
    pub probe_lr: f64,
    #[serde(default = "default_probe_batch_size")]
    pub probe_batch_size: usize,
    /// Labelled observations per probe fit.
    #[serde(default = "default_train_sizes")]
    pub train_sizes: Vec<usize>,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    #[serde(default = "default_runs")]
    pub leakage_runs: usize,
    #[serde(default = "default_leakage_epochs")]
    pub leakage_epochs: usize,
    #[serde(default = "default_leakage_lr")]
    pub leakage_lr: f64,
    #[serde(default = "default_leakage_test_fraction")]
    pub leakage_test_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            probe_hidden: default_probe_hidden(),
            probe_epochs: default_probe_epochs(),
            probe_lr: default_probe_lr(),
            probe_batch_size: default_probe_batch_size(),
            train_sizes: default_train_sizes(),
            n_runs: default_runs(),
            leakage_runs: default_runs(),
            leakage_epochs: default_leakage_epochs(),
            leakage_lr: default_leakage_lr(),
            leakage_test_fraction: default_leakage_test_fraction(),
            seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(format!("eval: {msg}")));
        if self.n_runs < 2 || self.leakage_runs < 2 {
            return fail("n_runs and leakage_runs must be at least 2");
        }
        if self.train_sizes.is_empty() || self.train_sizes.contains(&0) {
            return fail("train_sizes must be a non-empty list of positive counts");
        }
        if self.probe_hidden == 0
            || self.probe_epochs == 0
            || self.probe_batch_size == 0
            || self.leakage_epochs == 0
        {
            return fail("probe widths, epochs and batch size must be positive");
        }
        if !(self.probe_lr > 0.0
            && self.leakage_lr > 0.0
            && self.probe_lr.is_finite()
            && self.leakage_lr.is_finite())
        {
            return fail("learning rates must be positive");
        }
        if !(self.leakage_test_fraction > 0.0 && self.leakage_test_fraction < 1.0) {
            return fail("leakage_test_fraction must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Column-wise mean and standard deviation of `rows` of `x`; zero spreads become one.
pub(crate) fn column_stats(
    x: &ndarray::Array2<f64>,
    rows: &[usize],
) -> (ndarray::Array1<f64>, ndarray::Array1<f64>) {
    let sub = x.select(ndarray::Axis(0), rows);
    let mean = sub.mean_axis(ndarray::Axis(0)).unwrap();
    let std = sub
        .std_axis(ndarray::Axis(0), 0.0)
        .mapv(|s| if s > 0.0 { s } else { 1.0 });
    (mean, std)
}

/// Mean and sample standard deviation.
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}
