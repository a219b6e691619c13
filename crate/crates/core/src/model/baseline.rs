use ndarray::{Array1, Array2};

use super::batch::TripletBatch;
use super::loss::{batch_infonce, recon_loss_batch};
use super::{Architecture, LossBreakdown, LossWeights};
use crate::error::{Error, Result};
use crate::nncore::{
    l2_normalize_backward, l2_normalize_with_norms, Mlp, MlpCache, ParamTensor, Params,
};
use crate::rng::{stream, Domain};

/// Single shared latent trained with reconstruction and same-star contrast only.
///
/// Losses use the anchor and same-star rows of a triplet batch; the
/// same-instrument rows are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    arch: Architecture,
    pub tau: f64,
    pub encoder: Mlp,
    pub projection: Mlp,
    pub lift: Mlp,
    pub decoder: Mlp,
}

impl BaselineModel {
    pub fn new(arch: Architecture, tau: f64, seed: u64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::Config(format!(
                "temperature must be positive, got {tau}"
            )));
        }
        let s = arch.baseline_specs();
        let net =
            |spec, name: &str, k: u64| Mlp::new(spec, name, &mut stream(seed, Domain::Init, k));
        Ok(Self {
            encoder: net(s.encoder, "enc", 0)?,
            projection: net(s.projection, "proj", 2)?,
            lift: net(s.fuse, "lift", 4)?,
            decoder: net(s.decoder, "decoder", 6)?,
            arch,
            tau,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn encode(&self, flux: &Array2<f64>) -> Result<Array2<f64>> {
        self.encoder.predict(flux)
    }

    pub fn decode(&self, z: &Array2<f64>) -> Result<Array2<f64>> {
        self.decoder.predict(&self.lift.predict(z)?)
    }

    /// Reconstruction over the anchor and same-star rows plus stellar InfoNCE on
    /// the single latent; the instrument term is reported as zero.
    pub fn baseline_losses(
        &self,
        batch: &TripletBatch,
        weights: &LossWeights,
    ) -> Result<LossBreakdown> {
        Ok(self.forward(batch, weights)?.0)
    }

    pub fn loss_and_grad(
        &mut self,
        batch: &TripletBatch,
        weights: &LossWeights,
    ) -> Result<LossBreakdown> {
        let (losses, t) = self.forward(batch, weights)?;
        let d_g = self.decoder.backward(&t.decoder, &t.d_recon)?;
        let mut d_z = self.lift.backward(&t.lift, &d_g)?;
        let d_q = l2_normalize_backward(&t.p.0, &t.p.1, &t.d_p);
        d_z += &self.projection.backward(&t.projection, &d_q)?;
        self.encoder.backward(&t.encoder, &d_z)?;
        Ok(losses)
    }

    fn forward(&self, batch: &TripletBatch, w: &LossWeights) -> Result<(LossBreakdown, Tape)> {
        let batch = &batch.pairs();
        let x = &batch.flux;
        let (z, encoder) = self.encoder.forward(x)?;
        let (q, projection) = self.projection.forward(&z)?;
        let p = l2_normalize_with_norms(&q);
        let (g, lift) = self.lift.forward(&z)?;
        let (recon, decoder) = self.decoder.forward(&g)?;

        let (l_recon, d_recon) = recon_loss_batch(&recon, x, batch.mask.as_ref())?;
        let (l_star, d_p) =
            batch_infonce(&p.0, &batch.star, &batch.obs, batch.n_anchors, self.tau)?;
        let tape = Tape {
            encoder,
            projection,
            lift,
            decoder,
            p,
            d_recon: d_recon * w.lambda_recon,
            d_p: d_p * w.lambda_star,
        };
        Ok((LossBreakdown::weighted(w, l_recon, l_star, 0.0), tape))
    }
}

struct Tape {
    encoder: MlpCache,
    projection: MlpCache,
    lift: MlpCache,
    decoder: MlpCache,
    p: (Array2<f64>, Array1<f64>),
    d_recon: Array2<f64>,
    d_p: Array2<f64>,
}

impl Params for BaselineModel {
    fn params(&self) -> Vec<&ParamTensor> {
        [&self.encoder, &self.projection, &self.lift, &self.decoder]
            .into_iter()
            .flat_map(|m| m.params())
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut out = Vec::new();
        for m in [
            &mut self.encoder,
            &mut self.projection,
            &mut self.lift,
            &mut self.decoder,
        ] {
            out.extend(m.params_mut());
        }
        out
    }
}
