//! Reconstruction and multi-positive InfoNCE losses with their gradients.

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Masked MSE `sum_t m_t (r_t - x_t)^2 / sum_t m_t`.
pub fn recon_loss(reconstruction: &[f64], target: &[f64], mask: &[f64]) -> Result<f64> {
    if reconstruction.len() != target.len() || mask.len() != target.len() {
        return Err(Error::Shape(format!(
            "reconstruction {}, target {}, mask {}",
            reconstruction.len(),
            target.len(),
            mask.len()
        )));
    }
    let weight: f64 = mask.iter().sum();
    if weight == 0.0 {
        return Err(Error::Numeric("reconstruction mask is all zero".into()));
    }
    let sse: f64 = reconstruction
        .iter()
        .zip(target)
        .zip(mask)
        .map(|((r, x), m)| m * (r - x).powi(2))
        .sum();
    Ok(sse / weight)
}

/// Mean over rows of the per-row masked MSE, with its gradient w.r.t. the reconstruction.
/// `mask = None` means every step counts.
pub fn recon_loss_batch(
    reconstruction: &Array2<f64>,
    target: &Array2<f64>,
    mask: Option<&Array2<f64>>,
) -> Result<(f64, Array2<f64>)> {
    if reconstruction.dim() != target.dim() || mask.is_some_and(|m| m.dim() != target.dim()) {
        return Err(Error::Shape(format!(
            "reconstruction {:?} vs target {:?}",
            reconstruction.dim(),
            target.dim()
        )));
    }
    let rows = target.nrows() as f64;
    let mut grad = Array2::zeros(target.raw_dim());
    let mut total = 0.0;
    for i in 0..target.nrows() {
        let (r, x) = (reconstruction.row(i), target.row(i));
        let weight = mask.map_or(target.ncols() as f64, |m| m.row(i).sum());
        if weight == 0.0 {
            return Err(Error::Numeric(format!(
                "reconstruction mask row {i} is all zero"
            )));
        }
        for t in 0..target.ncols() {
            let m = mask.map_or(1.0, |m| m[[i, t]]);
            let d = r[t] - x[t];
            total += m * d * d / weight;
            grad[[i, t]] = 2.0 * m * d / weight / rows;
        }
    }
    Ok((total / rows, grad))
}

/// Loss and logit gradients of `-log(sum_P e^s / (sum_P e^s + sum_N e^s))`.
///
/// Evaluated as `softplus(lse(N) - lse(P))`, which stays accurate when the
/// loss is tiny and never overflows.
pub fn infonce_from_logits(pos: &[f64], neg: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Structure(format!(
            "InfoNCE needs at least one positive and one negative ({} / {})",
            pos.len(),
            neg.len()
        )));
    }
    let (lse_p, soft_p) = log_softmax_parts(pos);
    let (lse_n, soft_n) = log_softmax_parts(neg);
    let d = lse_n - lse_p;
    let loss = if d > 0.0 {
        d + (-d).exp().ln_1p()
    } else {
        d.exp().ln_1p()
    };
    let sig = if d >= 0.0 {
        1.0 / (1.0 + (-d).exp())
    } else {
        d.exp() / (1.0 + d.exp())
    };
    let dpos = soft_p.iter().map(|w| -sig * w).collect();
    let dneg = soft_n.iter().map(|w| sig * w).collect();
    Ok((loss, dpos, dneg))
}

fn log_softmax_parts(x: &[f64]) -> (f64, Vec<f64>) {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    // Summing in sorted order makes the result independent of input order.
    let mut sorted = e.clone();
    sorted.sort_by(f64::total_cmp);
    let s: f64 = sorted.iter().sum();
    (m + s.ln(), e.into_iter().map(|v| v / s).collect())
}

/// Generalized InfoNCE for one anchor with several positives.
pub fn infonce_multi(
    anchor: &[f64],
    positives: &[&[f64]],
    negatives: &[&[f64]],
    tau: f64,
) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::Config(format!(
            "temperature must be positive, got {tau}"
        )));
    }
    let logit = |v: &[f64]| -> Result<f64> {
        if v.len() != anchor.len() {
            return Err(Error::Shape(format!(
                "vector width {} vs anchor {}",
                v.len(),
                anchor.len()
            )));
        }
        Ok(anchor.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / tau)
    };
    let pos = positives
        .iter()
        .map(|p| logit(p))
        .collect::<Result<Vec<_>>>()?;
    let neg = negatives
        .iter()
        .map(|n| logit(n))
        .collect::<Result<Vec<_>>>()?;
    Ok(infonce_from_logits(&pos, &neg)?.0)
}

/// Mean InfoNCE over the first `n_anchors` rows of `proj`.
///
/// For each anchor, every other row with a different observation id is a
/// positive when its `label` matches and a negative otherwise. Returns the
/// loss and its gradient w.r.t. `proj`.
pub fn batch_infonce(
    proj: &Array2<f64>,
    labels: &[usize],
    obs_ids: &[usize],
    n_anchors: usize,
    tau: f64,
) -> Result<(f64, Array2<f64>)> {
    let rows = proj.nrows();
    if labels.len() != rows || obs_ids.len() != rows || n_anchors > rows || n_anchors == 0 {
        return Err(Error::Shape(
            "batch metadata does not match projections".into(),
        ));
    }
    if !(tau > 0.0) {
        return Err(Error::Config(format!(
            "temperature must be positive, got {tau}"
        )));
    }
    let mut grad = Array2::zeros(proj.raw_dim());
    let mut total = 0.0;
    let scale = 1.0 / n_anchors as f64;
    for i in 0..n_anchors {
        let a = proj.row(i);
        let (mut pos_idx, mut neg_idx) = (Vec::new(), Vec::new());
        for j in 0..rows {
            if obs_ids[j] == obs_ids[i] {
                continue;
            }
            if labels[j] == labels[i] {
                pos_idx.push(j);
            } else {
                neg_idx.push(j);
            }
        }
        let dot = |j: usize| -> f64 { a.dot(&proj.row(j)) / tau };
        let pos: Vec<f64> = pos_idx.iter().map(|&j| dot(j)).collect();
        let neg: Vec<f64> = neg_idx.iter().map(|&j| dot(j)).collect();
        let (loss, dpos, dneg) = infonce_from_logits(&pos, &neg).map_err(|e| {
            Error::Structure(format!("anchor row {i} (observation {}): {e}", obs_ids[i]))
        })?;
        total += loss;
        for (&j, &g) in pos_idx.iter().chain(&neg_idx).zip(dpos.iter().chain(&dneg)) {
            let g = g * scale / tau;
            accumulate(&mut grad, i, proj.row(j), g);
            accumulate(&mut grad, j, a, g);
        }
    }
    Ok((total * scale, grad))
}

fn accumulate(grad: &mut Array2<f64>, row: usize, v: ArrayView1<f64>, g: f64) {
    grad.row_mut(row).scaled_add(g, &v);
}
