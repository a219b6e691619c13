use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use causadis_core::config::RunConfig;
use causadis_core::eval::{
    embed_dataset, instrument_leakage_probe, load_embeddings, pca_2d, probe_regression,
    read_probe_csv, save_embeddings, write_probe_csv, write_report, EmbeddingTable, ProbeTask,
    Representation,
};
use causadis_core::model::{Architecture, ModelKind};
use causadis_core::simgen::{build_dataset, load_dataset, save_dataset, Dataset};
use causadis_core::train::{load_checkpoint, save_checkpoint, split_dataset, write_log, Trainer};
use causadis_core::{Error, Result};

use crate::GlobalArgs;

pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
}

impl Context {
    pub fn new(args: &GlobalArgs) -> Result<Self> {
        let mut config = match &args.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::desk_scale(0),
        };
        if let Some(seed) = args.seed {
            config.override_seed(seed);
        }
        if let Some(out) = &args.out {
            config.out_dir = out.clone();
        }
        config.validate()?;
        let out = config.out_dir.clone();
        Ok(Self { config, out })
    }

    fn path(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out)?;
        Ok(self.out.join(name))
    }

    /// Writes the resolved configuration next to a stage's outputs.
    fn echo(&self, stage: &str) -> Result<()> {
        fs::write(
            self.path(&format!("{stage}.config.toml"))?,
            self.config.to_toml()?,
        )?;
        Ok(())
    }
}

pub fn simulate(ctx: &Context) -> Result<()> {
    let ds = build_dataset(&ctx.config.sim)?;
    let path = ctx.path("dataset.bin")?;
    save_dataset(&ds, &path)?;
    ctx.echo("simulate")?;

    let mut per_star: BTreeMap<usize, usize> = BTreeMap::new();
    for obs in &ds.index_by_star {
        *per_star.entry(obs.len()).or_default() += 1;
    }
    let (lo, hi) = ds
        .observations
        .iter()
        .flat_map(|o| o.flux.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
    println!("observations: {}", ds.len());
    println!(
        "stars: {}  instruments: {}  time steps: {}",
        ds.stars.len(),
        ds.instruments.len(),
        ds.t_steps()
    );
    println!("observations per star (count: stars):");
    for (count, stars) in &per_star {
        println!("  {count}: {stars}");
    }
    println!("flux range: [{lo:.4}, {hi:.4}]");
    println!("wrote {}", path.display());
    Ok(())
}

/// Writes through a temporary sibling so an interrupted run never leaves a torn file.
fn replace_file(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    write(&tmp)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn train(
    ctx: &Context,
    dataset: &Path,
    model: &str,
    resume: Option<&Path>,
    epochs: Option<usize>,
) -> Result<()> {
    let ds = load_dataset(dataset)?;
    let kind: ModelKind = model.parse()?;
    let arch = Architecture::new(kind, ds.t_steps(), ctx.config.model.clone())?;
    let mut trainer = match resume {
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            ckpt.expect_architecture(&arch)?;
            Trainer::resume(&ds, ckpt)?
        }
        None => Trainer::new(&ds, arch, ctx.config.train.clone())?,
    };

    let name = kind.name();
    let ckpt_path = ctx.path(&format!("{name}.ckpt"))?;
    let log_path = ctx.path(&format!("{name}_log.jsonl"))?;
    let persist = |trainer: &Trainer| -> Result<()> {
        replace_file(&ckpt_path, |p| save_checkpoint(&trainer.checkpoint(), p))?;
        replace_file(&log_path, |p| write_log(trainer.log(), p))
    };
    ctx.echo(&format!("train_{name}"))?;
    persist(&trainer)?;
    let mut budget = epochs.unwrap_or(usize::MAX);
    while !trainer.finished() && budget > 0 {
        trainer.run_epoch()?;
        persist(&trainer)?;
        budget -= 1;
    }

    let p = trainer.progress();
    let first = trainer.log()[0].val.total;
    let status = if p.stopped {
        " (early stop)"
    } else if trainer.finished() {
        ""
    } else {
        " (paused, continue with --resume)"
    };
    println!(
        "{name}: {} epochs{status}, validation loss {first:.5} -> best {:.5} at epoch {}",
        p.epoch, p.best_val, p.best_epoch
    );
    println!("wrote {}", ckpt_path.display());
    Ok(())
}

pub fn embed(
    ctx: &Context,
    checkpoint: &Path,
    dataset: &Path,
    baseline: Option<&Path>,
) -> Result<()> {
    let ds = load_dataset(dataset)?;
    let dual = load_checkpoint(checkpoint)?.best_model()?;
    let dual = dual.as_dual().ok_or_else(|| {
        Error::Config(format!(
            "{} is not a dual-model checkpoint",
            checkpoint.display()
        ))
    })?;
    let base = baseline
        .map(|p| load_checkpoint(p)?.best_model())
        .transpose()?;
    let base = match (&base, baseline) {
        (Some(m), Some(p)) => Some(m.as_baseline().ok_or_else(|| {
            Error::Config(format!("{} is not a baseline checkpoint", p.display()))
        })?),
        _ => None,
    };
    let table = embed_dataset(dual, base, &ds)?;
    let path = ctx.path("embeddings.bin")?;
    save_embeddings(&table, &path)?;
    ctx.echo("embed")?;
    println!(
        "embedded {} observations (latent width {})",
        table.len(),
        table.z_star.ncols()
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn matching_embeddings(path: &Path, ds: &Dataset) -> Result<EmbeddingTable> {
    let table = load_embeddings(path)?;
    let aligned = table.len() == ds.len()
        && ds.observations.iter().enumerate().all(|(i, o)| {
            table.obs_id[i] == o.obs_id
                && table.star_id[i] == o.star_id
                && table.instrument_id[i] == o.instrument_id
        });
    if !aligned {
        return Err(Error::Structure(format!(
            "{} does not belong to this dataset",
            path.display()
        )));
    }
    Ok(table)
}

pub fn probe(
    ctx: &Context,
    dataset: &Path,
    representation: &str,
    embeddings: Option<&Path>,
) -> Result<()> {
    let ds = load_dataset(dataset)?;
    let rep: Representation = representation.parse()?;
    let features = match (rep, embeddings) {
        (Representation::Raw, _) => EmbeddingTable::raw_features(&ds)?,
        (_, Some(path)) => matching_embeddings(path, &ds)?.features(rep, &ds)?,
        (_, None) => {
            return Err(Error::Config(format!(
                "--embeddings is required for representation {rep}"
            )))
        }
    };
    let split = split_dataset(&ds, ctx.config.train.val_fraction, ctx.config.train.seed)?;
    let labels: Vec<f64> = (0..ds.len()).map(|o| ds.log_period_of(o)).collect();
    let stars: Vec<usize> = (0..ds.len()).map(|o| ds.star_of(o)).collect();
    let task = ProbeTask {
        features: &features,
        labels: &labels,
        stars: &stars,
        pool: &split.train,
        test: &split.val,
    };
    let results = probe_regression(&task, rep.name(), &ctx.config.eval)?;
    let path = ctx.path(&format!("probe_{rep}.csv"))?;
    write_probe_csv(&results, &path)?;
    ctx.echo(&format!("probe_{rep}"))?;
    for r in &results {
        println!(
            "{rep} n={:<5} R2 = {:.4} +- {:.4}",
            r.train_size, r.r2_mean, r.r2_std
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

pub fn report(ctx: &Context, dataset: &Path, embeddings: &Path, probes: &[PathBuf]) -> Result<()> {
    let ds = load_dataset(dataset)?;
    let table = matching_embeddings(embeddings, &ds)?;
    let mut results = Vec::new();
    for path in probes {
        results.extend(read_probe_csv(path)?);
    }
    let mut reps = vec![
        Representation::Raw,
        Representation::ZStar,
        Representation::ZInstr,
    ];
    if table.z_baseline.is_some() {
        reps.push(Representation::ZBaseline);
    }
    let mut leakage = Vec::new();
    let mut pcas = Vec::new();
    for rep in reps {
        let features = table.features(rep, &ds)?;
        leakage.push(instrument_leakage_probe(
            &features,
            &table.instrument_id,
            rep.name(),
            &ctx.config.eval,
        )?);
        if rep != Representation::Raw {
            pcas.push((rep.name().to_string(), pca_2d(&features)?));
        }
    }
    write_report(&ctx.out, &table, &results, &leakage, &pcas)?;
    ctx.echo("report")?;
    for l in &leakage {
        println!(
            "instrument accuracy from {:<10} {:.4} +- {:.4}",
            l.representation, l.accuracy_mean, l.accuracy_std
        );
    }
    println!("wrote report to {}", ctx.out.display());
    Ok(())
}
