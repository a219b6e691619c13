use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use causadis_core::eval::read_probe_csv;
use causadis_core::train::load_checkpoint;
use tempfile::TempDir;

const SMALL: &str = r#"version = 1

[sim]
n_stars = 12
n_instruments = 4
n_obs = 144
t_steps = 24
seed = 3

[model]
z_dim = 6
encoder_hidden = [16, 12]
proj_hidden = 8
proj_dim = 4
fuse_dim = 10
decoder_hidden = [16]

[train]
batch_size = 16
max_epochs = 3
val_fraction = 0.25

[eval]
probe_epochs = 20
train_sizes = [5, 20]
n_runs = 2
leakage_runs = 2
leakage_epochs = 30
"#;

fn causadis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_causadis"))
        .args(args)
        .env("CAUSADIS_LOG", "warn")
        .output()
        .expect("spawn causadis")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("run.toml"), config).unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn p(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }

    fn run(&self, args: &[&str]) -> Output {
        let (config, out) = (self.p("run.toml"), self.p("out"));
        let mut all = vec!["--config", &config, "--out", &out];
        all.extend_from_slice(args);
        causadis(&all)
    }

    fn ok(&self, args: &[&str]) -> String {
        let o = self.run(args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        String::from_utf8_lossy(&o.stdout).into_owned()
    }
}

#[test]
fn every_subcommand_has_help() {
    for sub in [
        None,
        Some("simulate"),
        Some("train"),
        Some("embed"),
        Some("probe"),
        Some("report"),
    ] {
        let args: Vec<&str> = sub.into_iter().chain(["--help"]).collect();
        let o = causadis(&args);
        assert!(o.status.success(), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stdout).contains("Usage"));
    }
}

#[test]
fn missing_required_key_is_a_config_error() {
    let ws = Workspace::new(&SMALL.replace("n_obs = 144\n", ""));
    let o = ws.run(&["simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("n_obs"), "{}", stderr(&o));
}

#[test]
fn unknown_key_and_bad_values_are_config_errors() {
    let ws = Workspace::new(&SMALL.replace("[train]\n", "[train]\nlearning_rate = 0.1\n"));
    let o = ws.run(&["simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("learning_rate"));

    let ws = Workspace::new(&SMALL.replace("max_epochs = 3", "max_epochs = 0"));
    assert_eq!(ws.run(&["simulate"]).status.code(), Some(2));

    let ws = Workspace::new(&SMALL.replace("version = 1", "version = 2"));
    assert_eq!(ws.run(&["simulate"]).status.code(), Some(2));
}

#[test]
fn unreadable_inputs_map_to_exit_codes() {
    let ws = Workspace::new(SMALL);
    let missing = ws.p("nowhere.bin");
    assert_eq!(
        ws.run(&["train", "--dataset", &missing]).status.code(),
        Some(5)
    );
    assert_eq!(
        causadis(&["--config", &ws.p("absent.toml"), "simulate"])
            .status
            .code(),
        Some(5)
    );

    ws.ok(&["simulate"]);
    let mut bytes = fs::read(ws.path("out/dataset.bin")).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    fs::write(ws.path("corrupt.bin"), &bytes).unwrap();
    let o = ws.run(&["train", "--dataset", &ws.p("corrupt.bin")]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("checksum"), "{}", stderr(&o));

    fs::write(ws.path("junk.bin"), b"not a dataset").unwrap();
    assert_eq!(
        ws.run(&[
            "probe",
            "--dataset",
            &ws.p("junk.bin"),
            "--representation",
            "raw"
        ])
        .status
        .code(),
        Some(3)
    );
}

#[test]
fn seed_flag_controls_the_dataset() {
    let ws = Workspace::new(SMALL);
    let dataset = |seed: &str, dir: &str| {
        let out = ws.p(dir);
        let o = causadis(&[
            "--config",
            &ws.p("run.toml"),
            "--seed",
            seed,
            "--out",
            &out,
            "simulate",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(Path::new(&out).join("dataset.bin")).unwrap()
    };
    let a = dataset("5", "a");
    assert_eq!(a, dataset("5", "b"));
    assert_ne!(a, dataset("6", "c"));
    let echo = fs::read_to_string(ws.path("a/simulate.config.toml")).unwrap();
    assert!(echo.contains("seed = 5"), "{echo}");
}

#[test]
fn simulate_prints_a_summary() {
    let ws = Workspace::new(SMALL);
    let out = ws.ok(&["simulate"]);
    assert!(out.contains("observations: 144"), "{out}");
    assert!(out.contains("flux range"));
}

#[test]
fn embeddings_are_required_except_for_raw() {
    let ws = Workspace::new(SMALL);
    ws.ok(&["simulate"]);
    let dataset = ws.p("out/dataset.bin");
    let o = ws.run(&["probe", "--dataset", &dataset, "--representation", "z_star"]);
    assert_eq!(o.status.code(), Some(2));
    ws.ok(&["probe", "--dataset", &dataset, "--representation", "raw"]);
    let rows = read_probe_csv(ws.path("out/probe_raw.csv")).unwrap();
    assert_eq!(
        rows.iter().map(|r| r.train_size).collect::<Vec<_>>(),
        vec![5, 20]
    );
    assert!(rows.iter().all(|r| r.n_runs == 2 && r.r2_mean.is_finite()));
}

#[test]
fn small_pipeline_end_to_end() {
    let ws = Workspace::new(SMALL);
    ws.ok(&["simulate"]);
    let (dataset, embeddings) = (ws.p("out/dataset.bin"), ws.p("out/embeddings.bin"));
    ws.ok(&["train", "--dataset", &dataset, "--model", "dual"]);
    ws.ok(&[
        "--threads",
        "2",
        "train",
        "--dataset",
        &dataset,
        "--model",
        "baseline",
    ]);

    let log = fs::read_to_string(ws.path("out/dual_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 4);
    for line in log.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["val"]["total"].as_f64().unwrap().is_finite());
    }
    let ckpt = load_checkpoint(ws.path("out/dual.ckpt")).unwrap();
    assert_eq!(ckpt.progress.epoch, 3);

    ws.ok(&[
        "embed",
        "--checkpoint",
        &ws.p("out/dual.ckpt"),
        "--dataset",
        &dataset,
        "--baseline",
        &ws.p("out/baseline.ckpt"),
    ]);
    let mut probes = Vec::new();
    for rep in ["raw", "z_star", "z_instr", "z_baseline"] {
        ws.ok(&[
            "probe",
            "--dataset",
            &dataset,
            "--representation",
            rep,
            "--embeddings",
            &embeddings,
        ]);
        probes.push(ws.p(&format!("out/probe_{rep}.csv")));
    }
    let mut args = vec![
        "report",
        "--dataset",
        &dataset,
        "--embeddings",
        &embeddings,
        "--probe",
    ];
    args.extend(probes.iter().map(String::as_str));
    ws.ok(&args);

    for name in [
        "probe_results.csv",
        "coords_z_star.csv",
        "coords_z_instr.csv",
        "coords_z_baseline.csv",
        "pca_z_star.svg",
        "r2_vs_train_size.svg",
        "summary.json",
        "report.config.toml",
    ] {
        assert!(ws.path("out").join(name).exists(), "missing {name}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.path("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["probes"].as_array().unwrap().len(), 8);
    assert_eq!(summary["leakage"].as_array().unwrap().len(), 4);

    // Swapped checkpoints are rejected.
    let o = ws.run(&[
        "embed",
        "--checkpoint",
        &ws.p("out/baseline.ckpt"),
        "--dataset",
        &dataset,
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = ws.run(&[
        "train",
        "--dataset",
        &dataset,
        "--model",
        "baseline",
        "--resume",
        &ws.p("out/dual.ckpt"),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn paused_training_resumes_bit_exactly() {
    let paused = Workspace::new(SMALL);
    paused.ok(&["simulate"]);
    let dataset = paused.p("out/dataset.bin");
    let first = paused.ok(&["train", "--dataset", &dataset, "--epochs", "1"]);
    assert!(first.contains("1 epochs (paused"), "{first}");
    assert_eq!(
        load_checkpoint(paused.path("out/dual.ckpt"))
            .unwrap()
            .progress
            .epoch,
        1
    );
    fs::copy(paused.path("out/dual.ckpt"), paused.path("half.ckpt")).unwrap();
    paused.ok(&[
        "train",
        "--dataset",
        &dataset,
        "--resume",
        &paused.p("half.ckpt"),
    ]);

    let straight = Workspace::new(SMALL);
    straight.ok(&["simulate"]);
    straight.ok(&["train", "--dataset", &straight.p("out/dataset.bin")]);
    for name in ["out/dual.ckpt", "out/dual_log.jsonl"] {
        assert_eq!(
            fs::read(paused.path(name)).unwrap(),
            fs::read(straight.path(name)).unwrap(),
            "{name}"
        );
    }
}
