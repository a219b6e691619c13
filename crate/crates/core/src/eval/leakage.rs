use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{column_stats, mean_std, EvalConfig};
use crate::error::{Error, Result};
use crate::nncore::{Activation, AdamState, FinalActivation, Mlp, MlpSpec, Params};
use crate::rng::{label_index, stream, Domain};

/// Held-out accuracy of a multinomial logistic classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageResult {
    pub representation: String,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub runs: Vec<f64>,
}

/// Classifies `classes` from standardized `features` on `leakage_runs` random
/// train/test splits of the rows.
pub fn instrument_leakage_probe(
    features: &Array2<f64>,
    classes: &[usize],
    representation: &str,
    config: &EvalConfig,
) -> Result<LeakageResult> {
    config.validate()?;
    let n = features.nrows();
    if classes.len() != n {
        return Err(Error::Shape(format!(
            "{n} feature rows, {} class labels",
            classes.len()
        )));
    }
    let n_classes = classes.iter().max().map_or(0, |m| m + 1);
    if classes.iter().all(|&c| c == classes[0]) {
        return Err(Error::Structure(
            "leakage probe needs at least two classes".into(),
        ));
    }
    let n_test = ((n as f64) * config.leakage_test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::Structure(format!(
            "cannot split {n} rows with test fraction {}",
            config.leakage_test_fraction
        )));
    }

    let runs = (0..config.leakage_runs)
        .map(|run| {
            let mut rng = stream(
                config.seed,
                Domain::Leakage,
                label_index(&format!("{representation}/{run}")),
            );
            let mut rows: Vec<usize> = (0..n).collect();
            rows.shuffle(&mut rng);
            let (test, train) = rows.split_at(n_test);
            let (mu, sd) = column_stats(features, train);
            let x = (features.select(Axis(0), train) - &mu) / &sd;
            let mut onehot = Array2::zeros((train.len(), n_classes));
            for (r, &i) in train.iter().enumerate() {
                onehot[[r, classes[i]]] = 1.0;
            }
            let spec = MlpSpec::new(
                vec![x.ncols(), n_classes],
                Activation::Relu,
                FinalActivation::None,
            );
            let mut net = Mlp::new(spec, "logit", &mut rng)?;
            let mut adam = AdamState::new(config.leakage_lr);
            for _ in 0..config.leakage_epochs {
                let (logits, cache) = net.forward(&x)?;
                let grad = (softmax_rows(&logits) - &onehot) / train.len() as f64;
                net.backward(&cache, &grad)?;
                adam.step(net.params_mut())?;
            }
            let logits = net.predict(&((features.select(Axis(0), test) - &mu) / &sd))?;
            let correct = test
                .iter()
                .zip(logits.rows())
                .filter(|(&i, row)| argmax(row.as_slice().unwrap()) == classes[i])
                .count();
            Ok(correct as f64 / test.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (accuracy_mean, accuracy_std) = mean_std(&runs);
    Ok(LeakageResult {
        representation: representation.to_string(),
        accuracy_mean,
        accuracy_std,
        runs,
    })
}

fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.clone();
    for mut row in p.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
    }
    p
}

/// Index of the first maximum.
fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold(0, |best, (i, &x)| if x > v[best] { i } else { best })
}
