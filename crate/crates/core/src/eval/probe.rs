use std::collections::HashSet;

use ndarray::{Array1, Array2, Axis};
use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{column_stats, mean_std, EvalConfig};
use crate::error::{Error, Result};
use crate::nncore::{Activation, AdamState, FinalActivation, Mlp, MlpSpec, Params};
use crate::rng::{label_index, stream, Domain};

/// Mean and spread of held-out R² over repeated fits at one train size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub representation: String,
    pub train_size: usize,
    pub r2_mean: f64,
    pub r2_std: f64,
    pub n_runs: usize,
}

/// Rows of `features` are observations. Probe fits draw from `pool`; scores use `test`.
pub struct ProbeTask<'a> {
    pub features: &'a Array2<f64>,
    pub labels: &'a [f64],
    pub stars: &'a [usize],
    pub pool: &'a [usize],
    pub test: &'a [usize],
}

/// `1 - SS_res / SS_tot` about the mean of `truth`.
pub fn r2_score(truth: &[f64], pred: &[f64]) -> Result<f64> {
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(Error::Shape(format!(
            "r2 over {} labels and {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|y| (y - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Structure("labels have zero variance".into()));
    }
    let ss_res: f64 = truth.iter().zip(pred).map(|(y, p)| (y - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Fits the small regressor `n_runs` times per train size and scores each fit on the test rows.
pub fn probe_regression(
    task: &ProbeTask<'_>,
    representation: &str,
    config: &EvalConfig,
) -> Result<Vec<ProbeResult>> {
    config.validate()?;
    let n = task.features.nrows();
    if task.labels.len() != n || task.stars.len() != n {
        return Err(Error::Shape(format!(
            "{n} feature rows, {} labels, {} stars",
            task.labels.len(),
            task.stars.len()
        )));
    }
    if let Some(&bad) = task.pool.iter().chain(task.test).find(|&&i| i >= n) {
        return Err(Error::Shape(format!(
            "row {bad} out of range for {n} observations"
        )));
    }
    let test_labels: Vec<f64> = task.test.iter().map(|&i| task.labels[i]).collect();
    r2_score(&test_labels, &test_labels)?;
    if let Some(&size) = config.train_sizes.iter().find(|&&s| s > task.pool.len()) {
        return Err(Error::Config(format!(
            "train_size {size} exceeds the probe pool of {} observations",
            task.pool.len()
        )));
    }
    let test_stars: HashSet<usize> = task.test.iter().map(|&i| task.stars[i]).collect();
    let jobs: Vec<(usize, usize)> = config
        .train_sizes
        .iter()
        .flat_map(|&s| (0..config.n_runs).map(move |r| (s, r)))
        .collect();
    let scores = jobs
        .par_iter()
        .map(|&(size, run)| {
            let mut rng = stream(
                config.seed,
                Domain::Probe,
                label_index(&format!("{representation}/{size}/{run}")),
            );
            let train: Vec<usize> = index::sample(&mut rng, task.pool.len(), size)
                .into_iter()
                .map(|k| task.pool[k])
                .collect();
            if let Some(&leak) = train.iter().find(|&&i| test_stars.contains(&task.stars[i])) {
                return Err(Error::Structure(format!(
                    "probe row {leak} shares a star with the test set"
                )));
            }
            let pred = fit_and_predict(task, &train, config, &mut rng)?;
            r2_score(&test_labels, &pred)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(config
        .train_sizes
        .iter()
        .zip(scores.chunks(config.n_runs))
        .map(|(&train_size, runs)| {
            let (r2_mean, r2_std) = mean_std(runs);
            ProbeResult {
                representation: representation.to_string(),
                train_size,
                r2_mean,
                r2_std,
                n_runs: runs.len(),
            }
        })
        .collect())
}

fn fit_and_predict(
    task: &ProbeTask<'_>,
    train: &[usize],
    config: &EvalConfig,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Vec<f64>> {
    let (mu, sd) = column_stats(task.features, train);
    let standardize = |rows: &[usize]| (task.features.select(Axis(0), rows) - &mu) / &sd;
    let y: Array1<f64> = train.iter().map(|&i| task.labels[i]).collect();
    let y_mean = y.mean().unwrap();
    let y_sd = match y.std(0.0) {
        s if s > 0.0 => s,
        _ => 1.0,
    };
    let x = standardize(train);
    let y = ((y - y_mean) / y_sd).insert_axis(Axis(1));

    let d = x.ncols();
    let spec = MlpSpec::new(
        vec![d, config.probe_hidden, 1],
        Activation::Relu,
        FinalActivation::None,
    );
    let mut net = Mlp::new(spec, "probe", rng)?;
    let mut adam = AdamState::new(config.probe_lr);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for _ in 0..config.probe_epochs {
        order.shuffle(rng);
        for chunk in order.chunks(config.probe_batch_size) {
            let xb = x.select(Axis(0), chunk);
            let yb = y.select(Axis(0), chunk);
            let (out, cache) = net.forward(&xb)?;
            let grad = (out - yb) * (2.0 / chunk.len() as f64);
            net.backward(&cache, &grad)?;
            adam.step(net.params_mut())?;
        }
    }
    let pred = net.predict(&standardize(task.test))?;
    Ok(pred.column(0).iter().map(|p| p * y_sd + y_mean).collect())
}
