use super::tensor::Params;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    pub tolerance: f64,
    /// Relative errors are measured against `max(|analytic|, |numeric|, floor)`.
    pub floor: f64,
    /// Check at most this many evenly spaced entries per block.
    pub max_entries_per_block: Option<usize>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-4,
            floor: 1e-6,
            max_entries_per_block: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockReport {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockReport>,
    pub max_rel_error: f64,
    pub passed: bool,
}

/// Compares analytic gradients against central finite differences.
///
/// `loss` must return the loss and accumulate its gradient into the model's
/// parameter blocks; gradients are zeroed around every call.
pub fn gradient_check<M, F>(
    model: &mut M,
    mut loss: F,
    config: &GradCheckConfig,
) -> Result<GradCheckReport>
where
    M: Params,
    F: FnMut(&mut M) -> Result<f64>,
{
    model.zero_grad();
    loss(model)?;
    let analytic: Vec<Vec<f64>> = model
        .params()
        .iter()
        .map(|p| p.grad.iter().copied().collect())
        .collect();
    model.zero_grad();

    let n_blocks = analytic.len();
    let mut blocks = Vec::with_capacity(n_blocks);
    for b in 0..n_blocks {
        let (name, len) = {
            let p = &model.params()[b];
            (p.name.clone(), p.len())
        };
        let entries: Vec<usize> = match config.max_entries_per_block {
            Some(k) if k < len => (0..k).map(|i| i * len / k).collect(),
            _ => (0..len).collect(),
        };
        let mut report = BlockReport {
            name,
            checked: entries.len(),
            max_rel_error: 0.0,
            max_abs_error: 0.0,
        };
        for &i in &entries {
            let original = nth(model, b, i);
            set_nth(model, b, i, original + config.step);
            let plus = loss(model)?;
            set_nth(model, b, i, original - config.step);
            let minus = loss(model)?;
            set_nth(model, b, i, original);
            model.zero_grad();

            let numeric = (plus - minus) / (2.0 * config.step);
            let a = analytic[b][i];
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(config.floor);
            report.max_abs_error = report.max_abs_error.max(abs);
            report.max_rel_error = report.max_rel_error.max(rel);
        }
        blocks.push(report);
    }
    let max_rel_error = blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        passed: max_rel_error < config.tolerance,
        max_rel_error,
        blocks,
    })
}

fn nth<M: Params>(model: &M, block: usize, i: usize) -> f64 {
    *model.params()[block].value.iter().nth(i).unwrap()
}

fn set_nth<M: Params>(model: &mut M, block: usize, i: usize, v: f64) {
    *model.params_mut()[block].value.iter_mut().nth(i).unwrap() = v;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::{Activation, FinalActivation, Mlp, MlpSpec};
    use crate::rng::{stream, Domain};
    use ndarray::Array2;
    use rand::Rng;

    fn linear_net() -> Mlp {
        let spec = MlpSpec::new(vec![5, 4, 3], Activation::Relu, FinalActivation::None);
        // Positive first-layer biases keep every ReLU in its linear regime for these inputs.
        let mut rng = stream(1, Domain::Init, 0);
        let w0 = Array2::from_shape_simple_fn((5, 4), || rng.random_range(-0.1..0.1));
        let w1 = Array2::from_shape_simple_fn((4, 3), || rng.random_range(-1.0..1.0));
        Mlp::from_weights(
            spec,
            "lin",
            vec![
                (w0, Array2::from_elem((1, 4), 5.0)),
                (w1, Array2::zeros((1, 3))),
            ],
        )
        .unwrap()
    }

    fn linear_loss(x: &Array2<f64>, c: &Array2<f64>) -> impl FnMut(&mut Mlp) -> Result<f64> {
        let (x, c) = (x.clone(), c.clone());
        move |net: &mut Mlp| {
            let (y, cache) = net.forward(&x)?;
            net.backward(&cache, &c)?;
            Ok((&y * &c).sum())
        }
    }

    fn inputs() -> (Array2<f64>, Array2<f64>) {
        let mut rng = stream(2, Domain::Init, 0);
        let x = Array2::from_shape_simple_fn((6, 5), || rng.random_range(-1.0..1.0));
        let c = Array2::from_shape_simple_fn((6, 3), || rng.random_range(-1.0..1.0));
        (x, c)
    }

    #[test]
    fn linear_loss_is_exact() {
        let (x, c) = inputs();
        let mut net = linear_net();
        let cfg = GradCheckConfig {
            step: 1e-3,
            tolerance: 1e-10,
            ..Default::default()
        };
        let report = gradient_check(&mut net, linear_loss(&x, &c), &cfg).unwrap();
        assert!(report.passed, "{report:?}");
        assert_eq!(report.blocks.len(), 4);
    }

    #[test]
    fn corrupted_gradient_is_reported() {
        let (x, c) = inputs();
        let mut net = linear_net();
        let mut honest = linear_loss(&x, &c);
        let corrupted = move |net: &mut Mlp| {
            let l = honest(net)?;
            net.params_mut()[2].grad[[1, 1]] += 0.5;
            Ok(l)
        };
        let report = gradient_check(&mut net, corrupted, &GradCheckConfig::default()).unwrap();
        assert!(!report.passed);
        assert!(report.blocks[2].max_rel_error > 1e-2);
        assert!(report.blocks[0].max_rel_error < 1e-6);
    }

    #[test]
    fn parameters_are_restored() {
        let (x, c) = inputs();
        let mut net = linear_net();
        let before = net.clone();
        gradient_check(&mut net, linear_loss(&x, &c), &GradCheckConfig::default()).unwrap();
        assert_eq!(net, before);
    }
}
