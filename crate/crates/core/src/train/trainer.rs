use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::RngCore;
use rand_chacha::ChaCha8Rng;

use super::checkpoint::{Checkpoint, Progress};
use super::split::{make_epoch_batches, split_dataset, Split};
use super::{TrainConfig, TrainLogRecord};
use crate::error::{Error, Result};
use crate::model::{Architecture, LossBreakdown, Model, ModelConfig, ModelKind, TripletBatch};
use crate::nncore::{AdamState, Params};
use crate::rng::{stream, Domain, RngState};
use crate::simgen::{dataset_fingerprint, Dataset, TripletPool};

/// Optimisation state for one run. Epoch 0 evaluates the untrained model;
/// each later epoch is one pass over the training anchors.
pub struct Trainer<'a> {
    ds: &'a Dataset,
    config: TrainConfig,
    split: Split,
    val_batches: Vec<TripletBatch>,
    model: Model,
    best: Model,
    adam: AdamState,
    rng: ChaCha8Rng,
    progress: Progress,
    log: Vec<TrainLogRecord>,
}

impl<'a> Trainer<'a> {
    pub fn new(ds: &'a Dataset, arch: Architecture, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        check_width(ds, &arch)?;
        let model = Model::new(arch, config.tau, config.seed)?;
        let mut trainer =
            Self::assemble(ds, config, model.clone(), model, AdamState::new(0.0), None)?;
        trainer.adam = AdamState::new(trainer.config.lr);
        trainer.initial_epoch()?;
        Ok(trainer)
    }

    /// Continues a run from a checkpoint taken on the same dataset.
    pub fn resume(ds: &'a Dataset, ckpt: Checkpoint) -> Result<Self> {
        ckpt.config.validate()?;
        check_width(ds, &ckpt.arch)?;
        if ckpt.dataset_fingerprint != dataset_fingerprint(ds) {
            return Err(Error::Structure(
                "checkpoint was trained on a different dataset".into(),
            ));
        }
        let model = ckpt.current_model()?;
        let best = ckpt.best_model()?;
        let mut t = Self::assemble(
            ds,
            ckpt.config.clone(),
            model,
            best,
            ckpt.adam,
            Some(ckpt.rng),
        )?;
        t.progress = ckpt.progress;
        t.log = ckpt.log;
        Ok(t)
    }

    fn assemble(
        ds: &'a Dataset,
        config: TrainConfig,
        model: Model,
        best: Model,
        adam: AdamState,
        rng: Option<RngState>,
    ) -> Result<Self> {
        let split = split_dataset(ds, config.val_fraction, config.seed)?;
        let val_pool = TripletPool::restricted(ds, split.val.clone());
        let mut val_rng = stream(config.seed, Domain::Validation, 0);
        let val_batches = make_epoch_batches(&val_pool, config.batch_size, &mut val_rng)?
            .iter()
            .map(|b| TripletBatch::from_triplets(ds, b))
            .collect::<Result<Vec<_>>>()?;
        let rng = rng
            .map(|s| s.restore())
            .unwrap_or_else(|| stream(config.seed, Domain::Train, 0));
        Ok(Self {
            ds,
            config,
            split,
            val_batches,
            model,
            best,
            adam,
            rng,
            progress: Progress::default(),
            log: Vec::new(),
        })
    }

    fn initial_epoch(&mut self) -> Result<()> {
        let pool = TripletPool::restricted(self.ds, self.split.train.clone());
        let mut rng = stream(self.config.seed, Domain::InitialEval, 0);
        let mut train = LossBreakdown::default();
        let mut anchors = 0;
        for triplets in make_epoch_batches(&pool, self.config.batch_size, &mut rng)? {
            let batch = TripletBatch::from_triplets(self.ds, &triplets)?;
            let l = self.model.loss(&batch, &self.config.weights)?;
            train.add_scaled(&l, batch.n_anchors as f64);
            anchors += batch.n_anchors;
        }
        let train = train.scaled(1.0 / anchors as f64);
        let val = self.validation_loss()?;
        finite_or_fail(&train, 0, "initial training pass")?;
        finite_or_fail(&val, 0, "validation")?;
        self.progress = Progress {
            epoch: 0,
            best_epoch: 0,
            best_val: val.total,
            ref_val: val.total,
            bad_epochs: 0,
            stopped: false,
        };
        self.log.push(TrainLogRecord {
            epoch: 0,
            train,
            val,
            lr: self.config.lr,
        });
        Ok(())
    }

    pub fn validation_loss(&self) -> Result<LossBreakdown> {
        mean_loss(&self.model, &self.val_batches, &self.config)
    }

    pub fn finished(&self) -> bool {
        self.progress.stopped || self.progress.epoch >= self.config.max_epochs
    }

    /// One pass over the training anchors followed by validation.
    pub fn run_epoch(&mut self) -> Result<TrainLogRecord> {
        if self.finished() {
            return Err(Error::Config("training has already finished".into()));
        }
        let start = Instant::now();
        let epoch = self.progress.epoch + 1;
        let epoch_seed = self.rng.next_u64();
        let mut rng = stream(epoch_seed, Domain::Train, epoch as u64);
        let pool = TripletPool::restricted(self.ds, self.split.train.clone());
        let batches = make_epoch_batches(&pool, self.config.batch_size, &mut rng)?;

        let mut train = LossBreakdown::default();
        let mut anchors = 0;
        for (b, triplets) in batches.iter().enumerate() {
            let batch = TripletBatch::from_triplets(self.ds, triplets)?;
            let l = self.model.loss_and_grad(&batch, &self.config.weights)?;
            let context = format!("epoch {epoch}, batch {b}, epoch seed {epoch_seed}");
            if !l.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss {l:?} at {context}"
                )));
            }
            self.adam
                .step(self.model.params_mut())
                .map_err(|e| Error::Numeric(format!("{e} at {context}")))?;
            train.add_scaled(&l, batch.n_anchors as f64);
            anchors += batch.n_anchors;
        }
        let train = train.scaled(1.0 / anchors as f64);
        let val = self.validation_loss()?;
        finite_or_fail(&val, epoch, "validation")?;

        let p = &mut self.progress;
        p.epoch = epoch;
        if val.total < p.best_val {
            p.best_val = val.total;
            p.best_epoch = epoch;
            self.best = self.model.clone();
        }
        if val.total < p.ref_val - self.config.min_delta {
            p.ref_val = val.total;
            p.bad_epochs = 0;
        } else {
            p.bad_epochs += 1;
            p.stopped = p.bad_epochs >= self.config.patience;
        }
        let record = TrainLogRecord {
            epoch,
            train,
            val,
            lr: self.config.lr,
        };
        self.log.push(record);
        log::info!(
            "epoch {epoch}: train {:.5} val {:.5} (best {:.5} @ {}) {:.2}s",
            train.total,
            val.total,
            p.best_val,
            p.best_epoch,
            start.elapsed().as_secs_f64()
        );
        Ok(record)
    }

    /// Runs until early stopping or `max_epochs`.
    pub fn run(&mut self) -> Result<()> {
        while !self.finished() {
            self.run_epoch()?;
        }
        if self.progress.stopped {
            log::info!(
                "early stopping after epoch {}; best epoch {}",
                self.progress.epoch,
                self.progress.best_epoch
            );
        }
        Ok(())
    }

    pub fn run_epochs(&mut self, n: usize) -> Result<()> {
        for _ in 0..n {
            if self.finished() {
                break;
            }
            self.run_epoch()?;
        }
        Ok(())
    }

    pub fn log(&self) -> &[TrainLogRecord] {
        &self.log
    }

    pub fn progress(&self) -> &Progress {
        &self.progress
    }

    pub fn split(&self) -> &Split {
        &self.split
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn best_model(&self) -> &Model {
        &self.best
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            arch: self.model.architecture().clone(),
            config: self.config.clone(),
            dataset_fingerprint: dataset_fingerprint(self.ds),
            progress: self.progress,
            log: self.log.clone(),
            rng: RngState::capture(&self.rng),
            adam: self.adam.clone(),
            current: blocks(&self.model),
            best: blocks(&self.best),
        }
    }
}

fn blocks(model: &Model) -> Vec<(String, ndarray::Array2<f64>)> {
    model
        .params()
        .into_iter()
        .map(|p| (p.name.clone(), p.value.clone()))
        .collect()
}

fn check_width(ds: &Dataset, arch: &Architecture) -> Result<()> {
    if arch.t_steps != ds.t_steps() {
        return Err(Error::Shape(format!(
            "model expects {} time steps, dataset has {}",
            arch.t_steps,
            ds.t_steps()
        )));
    }
    Ok(())
}

fn finite_or_fail(l: &LossBreakdown, epoch: usize, what: &str) -> Result<()> {
    if l.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!(
            "non-finite {what} loss {l:?} at epoch {epoch}"
        )))
    }
}

/// Anchor-weighted mean of per-batch losses.
fn mean_loss(
    model: &Model,
    batches: &[TripletBatch],
    config: &TrainConfig,
) -> Result<LossBreakdown> {
    let mut sum = LossBreakdown::default();
    let mut anchors = 0;
    for batch in batches {
        sum.add_scaled(&model.loss(batch, &config.weights)?, batch.n_anchors as f64);
        anchors += batch.n_anchors;
    }
    Ok(sum.scaled(1.0 / anchors as f64))
}

/// Trains a fresh model to completion and returns its final checkpoint.
pub fn train_model(
    kind: ModelKind,
    ds: &Dataset,
    model: ModelConfig,
    config: TrainConfig,
) -> Result<Checkpoint> {
    let arch = Architecture::new(kind, ds.t_steps(), model)?;
    let mut trainer = Trainer::new(ds, arch, config)?;
    trainer.run()?;
    Ok(trainer.checkpoint())
}

/// One JSON object per line.
pub fn write_log(records: &[TrainLogRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    std::fs::File::create(path)?.write_all(&out)?;
    Ok(())
}
