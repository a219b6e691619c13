use ndarray::{array, Array2};
use rand::Rng;

use super::*;
use crate::nncore::{gradient_check, GradCheckConfig};
use crate::rng::{stream, Domain};
use crate::simgen::{build_dataset, Dataset, SimConfig, TripletPool};

fn small_dataset(seed: u64) -> Dataset {
    let cfg = SimConfig {
        n_stars: 8,
        n_instruments: 3,
        n_obs: 48,
        t_steps: 24,
        ..SimConfig::desk_scale(seed)
    };
    build_dataset(&cfg).unwrap()
}

fn small_arch(kind: ModelKind, t_steps: usize) -> Architecture {
    let config = ModelConfig {
        z_dim: 5,
        encoder_hidden: vec![7, 6],
        proj_hidden: 6,
        proj_dim: 4,
        fuse_dim: 6,
        decoder_hidden: vec![7],
        ..ModelConfig::default()
    };
    Architecture::new(kind, t_steps, config).unwrap()
}

fn batch_of(ds: &Dataset, n: usize, seed: u64) -> TripletBatch {
    let pool = TripletPool::full(ds);
    let mut rng = stream(seed, Domain::Train, 0);
    let triplets: Vec<_> = (0..n)
        .map(|_| {
            pool.sample(rng.random_range(0..ds.len()), &mut rng)
                .unwrap()
        })
        .collect();
    TripletBatch::from_triplets(ds, &triplets).unwrap()
}

#[test]
fn default_architecture_widths() {
    let arch = Architecture::new(ModelKind::Dual, 100, ModelConfig::default()).unwrap();
    let s = arch.dual_specs();
    assert_eq!(s.encoder.layer_widths, vec![100, 128, 64, 20]);
    assert_eq!(s.projection.layer_widths, vec![20, 32, 16]);
    assert_eq!(s.fuse.layer_widths, vec![20, 64]);
    assert_eq!(s.decoder.layer_widths, vec![64, 128, 100]);
    assert_eq!(s.decoder.final_activation, FinalActivation::Tanh);
}

#[test]
fn spec_hash_tracks_shapes() {
    let a = Architecture::new(ModelKind::Dual, 100, ModelConfig::default()).unwrap();
    let b = Architecture::new(
        ModelKind::Dual,
        100,
        ModelConfig {
            z_dim: 21,
            ..ModelConfig::default()
        },
    )
    .unwrap();
    let c = Architecture::new(ModelKind::Baseline, 100, ModelConfig::default()).unwrap();
    assert_eq!(a.spec_hash(), a.clone().spec_hash());
    assert_ne!(a.spec_hash(), b.spec_hash());
    assert_ne!(a.spec_hash(), c.spec_hash());
}

#[test]
fn zero_width_rejected() {
    let bad = ModelConfig {
        proj_dim: 0,
        ..ModelConfig::default()
    };
    assert!(matches!(
        Architecture::new(ModelKind::Dual, 100, bad),
        Err(Error::Config(_))
    ));
}

#[test]
fn encode_is_deterministic_and_untied() {
    let ds = small_dataset(3);
    let arch = small_arch(ModelKind::Dual, ds.t_steps());
    let m1 = DualModel::new(arch.clone(), 0.1, 9).unwrap();
    let m2 = DualModel::new(arch, 0.1, 9).unwrap();
    let batch = batch_of(&ds, 4, 1);
    let (zs1, zi1) = m1.encode(&batch.flux).unwrap();
    let (zs2, zi2) = m2.encode(&batch.flux).unwrap();
    assert_eq!(zs1, zs2);
    assert_eq!(zi1, zi2);
    assert_eq!(zs1.ncols(), 5);
    assert_ne!(m1.enc_star.weight(0).value, m1.enc_instr.weight(0).value);
    assert!((&zs1 - &zi1).iter().any(|d| d.abs() > 1e-6));
}

#[test]
fn default_latents_have_twenty_columns() {
    let arch = Architecture::new(ModelKind::Dual, 100, ModelConfig::default()).unwrap();
    let m = DualModel::new(arch, 0.1, 0).unwrap();
    let (zs, zi) = m.encode(&Array2::zeros((3, 100))).unwrap();
    assert_eq!(zs.dim(), (3, 20));
    assert_eq!(zi.dim(), (3, 20));
}

#[test]
fn hadamard_identities() {
    let a = array![[1.0, -2.0, 0.5], [3.0, 0.0, -1.0]];
    let b = array![[2.0, 4.0, -4.0], [0.5, 7.0, 1.0]];
    assert_eq!(hadamard(&a, &Array2::ones((2, 3))).unwrap(), a);
    assert_eq!(hadamard(&a, &b).unwrap(), hadamard(&b, &a).unwrap());
    assert_eq!(
        hadamard(&a, &b).unwrap(),
        array![[2.0, -8.0, -2.0], [1.5, 0.0, -1.0]]
    );
    assert!(matches!(
        hadamard(&a, &Array2::ones((3, 2))),
        Err(Error::Shape(_))
    ));
}

#[test]
fn projection_heads_do_not_touch_reconstruction() {
    let ds = small_dataset(4);
    let arch = small_arch(ModelKind::Dual, ds.t_steps());
    let m = DualModel::new(arch, 0.1, 2).unwrap();
    let batch = batch_of(&ds, 4, 2);
    let w = LossWeights::default();
    let before = m.total_loss(&batch, &w).unwrap();
    let mut p = m.clone();
    p.proj_star = DualModel::new(p.architecture().clone(), 0.1, 77)
        .unwrap()
        .proj_star;
    let after = p.total_loss(&batch, &w).unwrap();
    assert_eq!(before.recon, after.recon);
    assert_eq!(before.instr, after.instr);
    assert_ne!(before.star, after.star);
}

#[test]
fn total_is_weighted_sum() {
    let ds = small_dataset(5);
    let arch = small_arch(ModelKind::Dual, ds.t_steps());
    let m = DualModel::new(arch, 0.1, 3).unwrap();
    let batch = batch_of(&ds, 4, 3);
    let unit = m.total_loss(&batch, &LossWeights::default()).unwrap();
    assert!((unit.total - (unit.recon + unit.star + unit.instr)).abs() < 1e-12);
    let w = LossWeights::new(2.0, 0.0, 0.5);
    let l = m.total_loss(&batch, &w).unwrap();
    assert!((l.total - (2.0 * l.recon + 0.5 * l.instr)).abs() < 1e-12);
    assert_eq!(l.star, unit.star);
    let (ls, li) = m.batch_contrastive_losses(&batch).unwrap();
    assert_eq!((ls, li), (unit.star, unit.instr));
}

#[test]
fn reconstruction_matches_decode() {
    let ds = small_dataset(6);
    let arch = small_arch(ModelKind::Dual, ds.t_steps());
    let m = DualModel::new(arch, 0.1, 4).unwrap();
    let batch = batch_of(&ds, 3, 4);
    let (zs, zi) = m.encode(&batch.flux).unwrap();
    let recon = m.decode(&zs, &zi).unwrap();
    let oracle = (&recon - &batch.flux).mapv(|d| d * d).sum() / (recon.len() as f64);
    let l = m.total_loss(&batch, &LossWeights::default()).unwrap();
    assert!((l.recon - oracle).abs() < 1e-12);
    assert!(recon.iter().all(|v| v.abs() <= 1.0));
}

fn check_model(
    model: &mut Model,
    batch: &TripletBatch,
    w: LossWeights,
    max_entries: Option<usize>,
) {
    let config = GradCheckConfig {
        max_entries_per_block: max_entries,
        ..GradCheckConfig::default()
    };
    let report = gradient_check(model, |m| Ok(m.loss_and_grad(batch, &w)?.total), &config).unwrap();
    for b in &report.blocks {
        assert!(b.max_rel_error < 1e-4, "{} rel {}", b.name, b.max_rel_error);
    }
    assert!(report.passed);
}

#[test]
fn dual_gradient_full_check() {
    let ds = small_dataset(7);
    let arch = small_arch(ModelKind::Dual, ds.t_steps());
    let mut model = Model::new(arch, 0.1, 5).unwrap();
    let batch = batch_of(&ds, 4, 5);
    check_model(&mut model, &batch, LossWeights::default(), None);
    check_model(&mut model, &batch, LossWeights::new(0.3, 2.0, 0.7), None);
}

#[test]
fn dual_gradient_default_architecture() {
    let ds = build_dataset(&SimConfig {
        n_stars: 8,
        n_instruments: 3,
        n_obs: 48,
        ..SimConfig::desk_scale(8)
    })
    .unwrap();
    let arch = Architecture::new(ModelKind::Dual, ds.t_steps(), ModelConfig::default()).unwrap();
    let mut model = Model::new(arch, 0.1, 6).unwrap();
    let batch = batch_of(&ds, 4, 6);
    check_model(&mut model, &batch, LossWeights::default(), Some(40));
}

#[test]
fn baseline_gradient_full_check() {
    let ds = small_dataset(9);
    let arch = small_arch(ModelKind::Baseline, ds.t_steps());
    let mut model = Model::new(arch, 0.1, 7).unwrap();
    let batch = batch_of(&ds, 4, 7);
    check_model(&mut model, &batch, LossWeights::default(), None);
}

#[test]
fn baseline_ignores_instrument_weight() {
    let ds = small_dataset(10);
    let arch = small_arch(ModelKind::Baseline, ds.t_steps());
    let m = BaselineModel::new(arch, 0.1, 8).unwrap();
    let batch = batch_of(&ds, 4, 8);
    let a = m
        .baseline_losses(&batch, &LossWeights::new(1.0, 1.0, 0.0))
        .unwrap();
    let b = m
        .baseline_losses(&batch, &LossWeights::new(1.0, 1.0, 5.0))
        .unwrap();
    assert_eq!(a, b);
    assert_eq!(a.instr, 0.0);
    assert!((a.total - a.recon - a.star).abs() < 1e-12);
}

#[test]
fn baseline_star_loss_matches_enumeration() {
    let ds = small_dataset(11);
    let arch = small_arch(ModelKind::Baseline, ds.t_steps());
    let m = BaselineModel::new(arch, 0.1, 9).unwrap();
    let batch = batch_of(&ds, 5, 9);
    let z = m.encode(&batch.flux).unwrap();
    let q = m.projection.predict(&z).unwrap();
    let n = 2 * batch.n_anchors;
    let unit: Vec<Vec<f64>> = (0..n)
        .map(|r| {
            let row = q.row(r);
            let norm = row.dot(&row).sqrt();
            row.iter().map(|v| v / norm).collect()
        })
        .collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut total = 0.0;
    for a in 0..batch.n_anchors {
        let (mut pos, mut all) = (0.0, 0.0);
        for j in 0..n {
            if batch.obs[j] == batch.obs[a] {
                continue;
            }
            let e = (dot(&unit[a], &unit[j]) / 0.1).exp();
            all += e;
            if batch.star[j] == batch.star[a] {
                pos += e;
            }
        }
        total += -(pos / all).ln();
    }
    let oracle = total / batch.n_anchors as f64;
    let l = m.baseline_losses(&batch, &LossWeights::default()).unwrap();
    assert!((l.star - oracle).abs() < 1e-10, "{} vs {}", l.star, oracle);
    let recon = m.decode(&z).unwrap().slice(ndarray::s![..n, ..]).to_owned();
    let x = batch.flux.slice(ndarray::s![..n, ..]).to_owned();
    let mse = (&recon - &x).mapv(|d| d * d).sum() / recon.len() as f64;
    assert!((l.recon - mse).abs() < 1e-12);
}

#[test]
fn load_values_checks_names_and_shapes() {
    let arch = small_arch(ModelKind::Dual, 24);
    let src = Model::new(arch.clone(), 0.1, 1).unwrap();
    let mut dst = Model::new(arch, 0.1, 2).unwrap();
    let blocks: Vec<_> = src
        .params()
        .iter()
        .map(|p| (p.name.clone(), p.value.clone()))
        .collect();
    dst.load_values(&blocks).unwrap();
    assert_eq!(src, dst);
    let mut renamed = blocks.clone();
    renamed[0].0 = "other".into();
    assert!(matches!(dst.load_values(&renamed), Err(Error::Shape(_))));
    assert!(matches!(
        dst.load_values(&blocks[1..]),
        Err(Error::Shape(_))
    ));
}

#[test]
fn non_positive_temperature_rejected() {
    let arch = small_arch(ModelKind::Dual, 24);
    assert!(matches!(Model::new(arch, 0.0, 1), Err(Error::Config(_))));
}
