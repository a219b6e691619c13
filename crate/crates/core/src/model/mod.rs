//! Dual-latent autoencoder, single-latent baseline and their losses.

mod baseline;
mod batch;
mod dual;
mod loss;

use serde::{Deserialize, Serialize};

use crate::codec::short_hash;
use crate::error::{Error, Result};
use crate::nncore::{Activation, FinalActivation, MlpSpec, ParamTensor, Params};

pub use baseline::BaselineModel;
pub use batch::TripletBatch;
pub use dual::{hadamard, DualModel};
pub use loss::{batch_infonce, infonce_from_logits, infonce_multi, recon_loss, recon_loss_batch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dual,
    Baseline,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Dual => "dual",
            ModelKind::Baseline => "baseline",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dual" => Ok(ModelKind::Dual),
            "baseline" => Ok(ModelKind::Baseline),
            other => Err(Error::Config(format!(
                "unknown model kind {other:?} (expected dual or baseline)"
            ))),
        }
    }
}

fn default_z_dim() -> usize {
    20
}
fn default_encoder_hidden() -> Vec<usize> {
    vec![128, 64]
}
fn default_proj_hidden() -> usize {
    32
}
fn default_proj_dim() -> usize {
    16
}
fn default_fuse_dim() -> usize {
    64
}
fn default_decoder_hidden() -> Vec<usize> {
    vec![128]
}
fn default_activation() -> Activation {
    Activation::Relu
}
fn default_tanh() -> FinalActivation {
    FinalActivation::Tanh
}

/// Network widths. The encoder input width is the light-curve length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_z_dim")]
    pub z_dim: usize,
    #[serde(default = "default_encoder_hidden")]
    pub encoder_hidden: Vec<usize>,
    #[serde(default = "default_proj_hidden")]
    pub proj_hidden: usize,
    #[serde(default = "default_proj_dim")]
    pub proj_dim: usize,
    #[serde(default = "default_fuse_dim")]
    pub fuse_dim: usize,
    #[serde(default = "default_decoder_hidden")]
    pub decoder_hidden: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default = "default_tanh")]
    pub fuse_final: FinalActivation,
    #[serde(default = "default_tanh")]
    pub decoder_final: FinalActivation,
    /// Width of the baseline's single latent; defaults to `z_dim`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_z_dim: Option<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            z_dim: default_z_dim(),
            encoder_hidden: default_encoder_hidden(),
            proj_hidden: default_proj_hidden(),
            proj_dim: default_proj_dim(),
            fuse_dim: default_fuse_dim(),
            decoder_hidden: default_decoder_hidden(),
            activation: default_activation(),
            fuse_final: default_tanh(),
            decoder_final: default_tanh(),
            baseline_z_dim: None,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let widths = [
            self.z_dim,
            self.proj_hidden,
            self.proj_dim,
            self.fuse_dim,
            self.baseline_z_dim.unwrap_or(1),
        ];
        if widths.contains(&0)
            || self.encoder_hidden.contains(&0)
            || self.decoder_hidden.contains(&0)
        {
            return Err(Error::Config("model: all widths must be positive".into()));
        }
        Ok(())
    }
}

/// Everything that fixes the parameter shapes of a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub kind: ModelKind,
    pub t_steps: usize,
    pub config: ModelConfig,
}

pub struct NetworkSpecs {
    pub encoder: MlpSpec,
    pub projection: MlpSpec,
    pub fuse: MlpSpec,
    pub decoder: MlpSpec,
}

impl Architecture {
    pub fn new(kind: ModelKind, t_steps: usize, config: ModelConfig) -> Result<Self> {
        config.validate()?;
        if t_steps == 0 {
            return Err(Error::Config("t_steps must be positive".into()));
        }
        Ok(Self {
            kind,
            t_steps,
            config,
        })
    }

    fn specs(&self, z_dim: usize) -> NetworkSpecs {
        let c = &self.config;
        let mut enc = vec![self.t_steps];
        enc.extend(&c.encoder_hidden);
        enc.push(z_dim);
        let mut dec = vec![c.fuse_dim];
        dec.extend(&c.decoder_hidden);
        dec.push(self.t_steps);
        NetworkSpecs {
            encoder: MlpSpec::new(enc, c.activation, FinalActivation::None),
            projection: MlpSpec::new(
                vec![z_dim, c.proj_hidden, c.proj_dim],
                c.activation,
                FinalActivation::None,
            ),
            fuse: MlpSpec::new(vec![z_dim, c.fuse_dim], c.activation, c.fuse_final),
            decoder: MlpSpec::new(dec, c.activation, c.decoder_final),
        }
    }

    pub fn dual_specs(&self) -> NetworkSpecs {
        self.specs(self.config.z_dim)
    }

    pub fn baseline_specs(&self) -> NetworkSpecs {
        self.specs(self.config.baseline_z_dim.unwrap_or(self.config.z_dim))
    }

    pub fn latent_width(&self) -> usize {
        match self.kind {
            ModelKind::Dual => self.config.z_dim,
            ModelKind::Baseline => self.config.baseline_z_dim.unwrap_or(self.config.z_dim),
        }
    }

    /// Canonical description of every network; its hash guards checkpoints.
    pub fn describe(&self) -> String {
        let s = match self.kind {
            ModelKind::Dual => self.dual_specs(),
            ModelKind::Baseline => self.baseline_specs(),
        };
        format!(
            "kind={};enc={};proj={};fuse={};dec={}",
            self.kind.name(),
            s.encoder.describe(),
            s.projection.describe(),
            s.fuse.describe(),
            s.decoder.describe()
        )
    }

    pub fn spec_hash(&self) -> u64 {
        short_hash(&self.describe())
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    #[serde(default = "one")]
    pub lambda_recon: f64,
    #[serde(default = "one")]
    pub lambda_star: f64,
    #[serde(default = "one")]
    pub lambda_instr: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_recon: 1.0,
            lambda_star: 1.0,
            lambda_instr: 1.0,
        }
    }
}

impl LossWeights {
    pub fn new(lambda_recon: f64, lambda_star: f64, lambda_instr: f64) -> Self {
        Self {
            lambda_recon,
            lambda_star,
            lambda_instr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.lambda_recon, self.lambda_star, self.lambda_instr]
            .iter()
            .all(|w| *w >= 0.0 && w.is_finite())
        {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "loss weights must be finite and >= 0: {self:?}"
            )))
        }
    }
}

/// Weighted total and the three unweighted components.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub recon: f64,
    pub star: f64,
    pub instr: f64,
}

impl LossBreakdown {
    pub fn weighted(w: &LossWeights, recon: f64, star: f64, instr: f64) -> Self {
        Self {
            total: w.lambda_recon * recon + w.lambda_star * star + w.lambda_instr * instr,
            recon,
            star,
            instr,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
            && self.recon.is_finite()
            && self.star.is_finite()
            && self.instr.is_finite()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            total: s * self.total,
            recon: s * self.recon,
            star: s * self.star,
            instr: s * self.instr,
        }
    }

    pub(crate) fn add_scaled(&mut self, other: &LossBreakdown, s: f64) {
        self.total += s * other.total;
        self.recon += s * other.recon;
        self.star += s * other.star;
        self.instr += s * other.instr;
    }
}

/// Either trainable model behind one interface.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Model {
    Dual(DualModel),
    Baseline(BaselineModel),
}

impl Model {
    pub fn new(arch: Architecture, tau: f64, seed: u64) -> Result<Self> {
        Ok(match arch.kind {
            ModelKind::Dual => Model::Dual(DualModel::new(arch, tau, seed)?),
            ModelKind::Baseline => Model::Baseline(BaselineModel::new(arch, tau, seed)?),
        })
    }

    pub fn architecture(&self) -> &Architecture {
        match self {
            Model::Dual(m) => m.architecture(),
            Model::Baseline(m) => m.architecture(),
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.architecture().kind
    }

    pub fn loss(&self, batch: &TripletBatch, weights: &LossWeights) -> Result<LossBreakdown> {
        match self {
            Model::Dual(m) => m.total_loss(batch, weights),
            Model::Baseline(m) => m.baseline_losses(batch, weights),
        }
    }

    pub fn loss_and_grad(
        &mut self,
        batch: &TripletBatch,
        weights: &LossWeights,
    ) -> Result<LossBreakdown> {
        match self {
            Model::Dual(m) => m.loss_and_grad(batch, weights),
            Model::Baseline(m) => m.loss_and_grad(batch, weights),
        }
    }

    /// Copies parameter values from `blocks`, which must match name and shape one to one.
    pub fn load_values(&mut self, blocks: &[(String, ndarray::Array2<f64>)]) -> Result<()> {
        let mut params = self.params_mut();
        if params.len() != blocks.len() {
            return Err(Error::Shape(format!(
                "{} parameter blocks, model has {}",
                blocks.len(),
                params.len()
            )));
        }
        for (p, (name, value)) in params.iter_mut().zip(blocks) {
            if &p.name != name || p.value.dim() != value.dim() {
                return Err(Error::Shape(format!(
                    "block {name} {:?} does not match model block {} {:?}",
                    value.dim(),
                    p.name,
                    p.value.dim()
                )));
            }
            p.value.assign(value);
        }
        Ok(())
    }

    pub fn as_dual(&self) -> Option<&DualModel> {
        match self {
            Model::Dual(m) => Some(m),
            Model::Baseline(_) => None,
        }
    }

    pub fn as_baseline(&self) -> Option<&BaselineModel> {
        match self {
            Model::Baseline(m) => Some(m),
            Model::Dual(_) => None,
        }
    }
}

impl Params for Model {
    fn params(&self) -> Vec<&ParamTensor> {
        match self {
            Model::Dual(m) => m.params(),
            Model::Baseline(m) => m.params(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        match self {
            Model::Dual(m) => m.params_mut(),
            Model::Baseline(m) => m.params_mut(),
        }
    }
}

#[cfg(test)]
mod tests;
