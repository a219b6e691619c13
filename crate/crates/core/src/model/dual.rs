use ndarray::{Array1, Array2};

use super::batch::TripletBatch;
use super::loss::{batch_infonce, recon_loss_batch};
use super::{Architecture, LossBreakdown, LossWeights};
use crate::error::{Error, Result};
use crate::nncore::{
    l2_normalize_backward, l2_normalize_with_norms, Mlp, MlpCache, ParamTensor, Params,
};
use crate::rng::{stream, Domain};

/// Stellar and instrumental encoders with untied weights, contrastive
/// projection heads, and a decoder fed by the Hadamard product of the two
/// fused latents.
#[derive(Debug, Clone, PartialEq)]
pub struct DualModel {
    arch: Architecture,
    pub tau: f64,
    pub enc_star: Mlp,
    pub enc_instr: Mlp,
    pub proj_star: Mlp,
    pub proj_instr: Mlp,
    pub fuse_star: Mlp,
    pub fuse_instr: Mlp,
    pub decoder: Mlp,
}

struct Tape {
    enc_star: MlpCache,
    enc_instr: MlpCache,
    proj_star: MlpCache,
    proj_instr: MlpCache,
    fuse_star: MlpCache,
    fuse_instr: MlpCache,
    decoder: MlpCache,
    p_star: (Array2<f64>, Array1<f64>),
    p_instr: (Array2<f64>, Array1<f64>),
    g_star: Array2<f64>,
    g_instr: Array2<f64>,
    d_recon: Array2<f64>,
    d_p_star: Array2<f64>,
    d_p_instr: Array2<f64>,
}

/// Element-wise product of two equally shaped batches.
pub fn hadamard(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!(
            "fusion inputs {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(a * b)
}

impl DualModel {
    pub fn new(arch: Architecture, tau: f64, seed: u64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::Config(format!(
                "temperature must be positive, got {tau}"
            )));
        }
        let s = arch.dual_specs();
        let net =
            |spec, name: &str, k: u64| Mlp::new(spec, name, &mut stream(seed, Domain::Init, k));
        Ok(Self {
            enc_star: net(s.encoder.clone(), "enc_star", 0)?,
            enc_instr: net(s.encoder, "enc_instr", 1)?,
            proj_star: net(s.projection.clone(), "proj_star", 2)?,
            proj_instr: net(s.projection, "proj_instr", 3)?,
            fuse_star: net(s.fuse.clone(), "fuse_star", 4)?,
            fuse_instr: net(s.fuse, "fuse_instr", 5)?,
            decoder: net(s.decoder, "decoder", 6)?,
            arch,
            tau,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    /// Stellar and instrumental latents. Projection heads are not involved.
    pub fn encode(&self, flux: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        Ok((self.enc_star.predict(flux)?, self.enc_instr.predict(flux)?))
    }

    pub fn decode(&self, z_star: &Array2<f64>, z_instr: &Array2<f64>) -> Result<Array2<f64>> {
        let g_star = self.fuse_star.predict(z_star)?;
        let g_instr = self.fuse_instr.predict(z_instr)?;
        self.decoder.predict(&hadamard(&g_star, &g_instr)?)
    }

    /// Normalized contrastive projections of each latent.
    pub fn project(
        &self,
        z_star: &Array2<f64>,
        z_instr: &Array2<f64>,
    ) -> Result<(Array2<f64>, Array2<f64>)> {
        Ok((
            l2_normalize_with_norms(&self.proj_star.predict(z_star)?).0,
            l2_normalize_with_norms(&self.proj_instr.predict(z_instr)?).0,
        ))
    }

    /// `(L_star, L_instr)` over the batch anchors.
    pub fn batch_contrastive_losses(&self, batch: &TripletBatch) -> Result<(f64, f64)> {
        let (zs, zi) = self.encode(&batch.flux)?;
        let (ps, pi) = self.project(&zs, &zi)?;
        let (ls, _) = batch_infonce(&ps, &batch.star, &batch.obs, batch.n_anchors, self.tau)?;
        let (li, _) = batch_infonce(
            &pi,
            &batch.instrument,
            &batch.obs,
            batch.n_anchors,
            self.tau,
        )?;
        Ok((ls, li))
    }

    pub fn total_loss(&self, batch: &TripletBatch, weights: &LossWeights) -> Result<LossBreakdown> {
        Ok(self.forward(batch, weights)?.0)
    }

    /// Loss plus gradients accumulated into every parameter block.
    pub fn loss_and_grad(
        &mut self,
        batch: &TripletBatch,
        weights: &LossWeights,
    ) -> Result<LossBreakdown> {
        let (losses, tape) = self.forward(batch, weights)?;
        self.backward(tape)?;
        Ok(losses)
    }

    fn forward(&self, batch: &TripletBatch, w: &LossWeights) -> Result<(LossBreakdown, Tape)> {
        let x = &batch.flux;
        let (zs, enc_star) = self.enc_star.forward(x)?;
        let (zi, enc_instr) = self.enc_instr.forward(x)?;
        let (qs, proj_star) = self.proj_star.forward(&zs)?;
        let (qi, proj_instr) = self.proj_instr.forward(&zi)?;
        let p_star = l2_normalize_with_norms(&qs);
        let p_instr = l2_normalize_with_norms(&qi);
        let (g_star, fuse_star) = self.fuse_star.forward(&zs)?;
        let (g_instr, fuse_instr) = self.fuse_instr.forward(&zi)?;
        let (recon, decoder) = self.decoder.forward(&hadamard(&g_star, &g_instr)?)?;

        let (l_recon, d_recon) = recon_loss_batch(&recon, x, batch.mask.as_ref())?;
        let (l_star, d_p_star) = batch_infonce(
            &p_star.0,
            &batch.star,
            &batch.obs,
            batch.n_anchors,
            self.tau,
        )?;
        let (l_instr, d_p_instr) = batch_infonce(
            &p_instr.0,
            &batch.instrument,
            &batch.obs,
            batch.n_anchors,
            self.tau,
        )?;

        let losses = LossBreakdown::weighted(w, l_recon, l_star, l_instr);
        let tape = Tape {
            enc_star,
            enc_instr,
            proj_star,
            proj_instr,
            fuse_star,
            fuse_instr,
            decoder,
            p_star,
            p_instr,
            g_star,
            g_instr,
            d_recon: d_recon * w.lambda_recon,
            d_p_star: d_p_star * w.lambda_star,
            d_p_instr: d_p_instr * w.lambda_instr,
        };
        Ok((losses, tape))
    }

    fn backward(&mut self, t: Tape) -> Result<()> {
        let d_fused = self.decoder.backward(&t.decoder, &t.d_recon)?;
        let mut d_zs = self
            .fuse_star
            .backward(&t.fuse_star, &(&d_fused * &t.g_instr))?;
        let mut d_zi = self
            .fuse_instr
            .backward(&t.fuse_instr, &(&d_fused * &t.g_star))?;

        let d_qs = l2_normalize_backward(&t.p_star.0, &t.p_star.1, &t.d_p_star);
        let d_qi = l2_normalize_backward(&t.p_instr.0, &t.p_instr.1, &t.d_p_instr);
        d_zs += &self.proj_star.backward(&t.proj_star, &d_qs)?;
        d_zi += &self.proj_instr.backward(&t.proj_instr, &d_qi)?;

        self.enc_star.backward(&t.enc_star, &d_zs)?;
        self.enc_instr.backward(&t.enc_instr, &d_zi)?;
        Ok(())
    }
}

impl Params for DualModel {
    fn params(&self) -> Vec<&ParamTensor> {
        [
            &self.enc_star,
            &self.enc_instr,
            &self.proj_star,
            &self.proj_instr,
            &self.fuse_star,
            &self.fuse_instr,
            &self.decoder,
        ]
        .into_iter()
        .flat_map(|m| m.params())
        .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut out = Vec::new();
        for m in [
            &mut self.enc_star,
            &mut self.enc_instr,
            &mut self.proj_star,
            &mut self.proj_instr,
            &mut self.fuse_star,
            &mut self.fuse_instr,
            &mut self.decoder,
        ] {
            out.extend(m.params_mut());
        }
        out
    }
}
