use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

use ventnet_cli::commands::COMPARE_OUTPUTS;
use ventnet_cli::config::{flag_of, KEYS};
use ventnet_core::synth::{decode_dataset, DatasetManifest};

const SMALL: &[&str] = &["--subjects", "6", "--windows", "20", "--window-seconds", "20"];
const QUICK: &[&str] = &[
    "--max-epochs",
    "2",
    "--patience",
    "1",
    "--finetune-epochs",
    "1",
    "--pretrain-epochs",
    "1",
    "--proxy-windows",
    "40",
];

fn ventnet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ventnet"))
        .args(args)
        .env("VENTNET_OUT_DIR", dir)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn run(dir: &Path, args: &[&str]) -> String {
    let out = ventnet(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn with<'a>(base: &[&'a str], extra: &[&'a str]) -> Vec<&'a str> {
    base.iter().chain(extra).copied().collect()
}

#[test]
fn help_lists_exactly_the_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let help = run(dir.path(), &["train", "--help"]);
    let flags: BTreeSet<String> = help
        .split_whitespace()
        .filter_map(|w| w.strip_prefix("--"))
        .map(|w| w.trim_end_matches([',', '.']).to_string())
        .collect();
    let keys: BTreeSet<String> = KEYS.iter().map(|k| flag_of(k.name)).collect();
    let non_keys: BTreeSet<String> = ["config", "out-dir", "force", "help", "data", "pretrained", "out"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    assert!(keys.is_subset(&flags), "missing: {:?}", keys.difference(&flags).collect::<Vec<_>>());
    let extra: Vec<_> = flags.difference(&keys).filter(|f| !non_keys.contains(*f)).collect();
    assert!(extra.is_empty(), "flags without a config key: {extra:?}");

    // Every key printed by `config` is accepted back as a flag and as a file entry.
    let dump = run(dir.path(), &["config"]);
    assert_eq!(dump.lines().count(), KEYS.len());
    std::fs::write(dir.path().join("all.cfg"), &dump).unwrap();
    assert_eq!(run(dir.path(), &["config", "--config", "all.cfg"]), dump);
    let mut args = vec!["config".to_string()];
    for line in dump.lines() {
        let (k, v) = line.split_once('=').unwrap();
        args.push(format!("--{}", flag_of(k)));
        args.push(v.to_string());
    }
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    assert_eq!(run(dir.path(), &refs), dump);
}

#[test]
fn synth_writes_the_requested_records_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run(d, &["synth", "--subjects", "4", "--windows", "10", "--window-seconds", "20"]);
    let bytes = std::fs::read(d.join("dataset.vntd")).unwrap();
    assert_eq!(decode_dataset(&bytes).unwrap().windows.len(), 40);

    let refused = ventnet(d, &["synth", "--subjects", "4", "--windows", "10", "--window-seconds", "20"]);
    assert_eq!(code(&refused), 2);
    assert!(String::from_utf8_lossy(&refused.stderr).contains("--force"));

    run(d, &["synth", "--subjects", "4", "--windows", "10", "--window-seconds", "20", "--force"]);
    assert_eq!(std::fs::read(d.join("dataset.vntd")).unwrap(), bytes);
    let names: Vec<_> = std::fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 2, "stray files: {names:?}");
}

#[test]
fn default_cohort_has_103_subjects() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["synth", "--windows", "1", "--window-seconds", "12"]);
    assert!(out.contains("subjects=103 female=53 male=50"), "{out}");
    let manifest = std::fs::read_to_string(dir.path().join("dataset.vntd.manifest")).unwrap();
    assert_eq!(DatasetManifest::from_kv(&manifest).unwrap().n_subjects, 103);
    let file = decode_dataset(&std::fs::read(dir.path().join("dataset.vntd")).unwrap()).unwrap();
    let subjects: BTreeSet<u32> = file.windows.iter().map(|w| w.subject_id).collect();
    assert_eq!(subjects.len(), 103);
}

#[test]
fn out_dir_flag_overrides_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let other = dir.path().join("elsewhere");
    run(dir.path(), &with(SMALL, &["synth", "--out-dir", other.to_str().unwrap()]));
    assert!(other.join("dataset.vntd").exists());
    assert!(!dir.path().join("dataset.vntd").exists());
}

#[test]
fn untrained_model_evaluates_near_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run(d, &with(SMALL, &["synth"]));
    run(d, &with(SMALL, &["init", "--data", "dataset.vntd"]));
    let report = run(d, &with(SMALL, &["eval", "--model", "model_init.vntc", "--data", "dataset.vntd"]));
    let get = |k: &str| -> f64 {
        report
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{k}=")))
            .unwrap_or_else(|| panic!("no {k} in {report}"))
            .parse()
            .unwrap()
    };
    let ratio = get("rmse") / get("baseline_rmse");
    assert!((0.8..1.5).contains(&ratio), "untrained rmse / baseline = {ratio}");
    assert!(d.join("model_init.predictions.csv").exists());
}

#[test]
fn error_classes_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run(d, &with(SMALL, &["synth"]));

    // 2: bad settings and inconsistent inputs.
    std::fs::write(d.join("bad.cfg"), "colour=red\n").unwrap();
    assert_eq!(code(&ventnet(d, &["config", "--config", "bad.cfg"])), 2);
    assert_eq!(code(&ventnet(d, &["config", "--sparsity", "1.5"])), 2);
    assert_eq!(code(&ventnet(d, &["config", "--no-such-flag", "1"])), 2);
    let mismatch = ventnet(d, &["train", "--data", "dataset.vntd", "--fs-hz", "50"]);
    assert_eq!(code(&mismatch), 2);
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("fs_hz"));
    run(d, &["init", "--window-seconds", "30", "--out", "wide.vntc"]);
    assert_eq!(code(&ventnet(d, &["eval", "--model", "wide.vntc", "--data", "dataset.vntd"])), 2);

    // 3: missing inputs, named in the message.
    let missing = ventnet(d, &["compare", "--a", "nowhere_a.csv", "--b", "nowhere_b.csv"]);
    assert_eq!(code(&missing), 3);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nowhere_a.csv"));
    assert_eq!(code(&ventnet(d, &["config", "--config", "absent.cfg"])), 3);
    std::fs::copy(d.join("dataset.vntd"), d.join("lonely.vntd")).unwrap();
    let no_manifest = ventnet(d, &["train", "--data", "lonely.vntd"]);
    assert_eq!(code(&no_manifest), 3);
    assert!(String::from_utf8_lossy(&no_manifest.stderr).contains("lonely.vntd.manifest"));

    // 4: damaged files.
    let mut bytes = std::fs::read(d.join("dataset.vntd")).unwrap();
    bytes[100] ^= 0x01;
    std::fs::write(d.join("flipped.vntd"), &bytes).unwrap();
    std::fs::copy(d.join("dataset.vntd.manifest"), d.join("flipped.vntd.manifest")).unwrap();
    assert_eq!(code(&ventnet(d, &["train", "--data", "flipped.vntd"])), 4);
    std::fs::write(d.join("junk.vntc"), b"VNTC but not really").unwrap();
    assert_eq!(code(&ventnet(d, &with(SMALL, &["eval", "--model", "junk.vntc", "--data", "dataset.vntd"]))), 4);
    std::fs::write(d.join("a.csv"), "not a predictions file\n").unwrap();
    std::fs::write(d.join("b.csv"), "not a predictions file\n").unwrap();
    assert_eq!(code(&ventnet(d, &["compare", "--a", "a.csv", "--b", "b.csv"])), 4);

    // 5: numeric blow-up during training.
    let nan = ventnet(
        d,
        &with(SMALL, &["train", "--data", "dataset.vntd", "--learning-rate", "1e30", "--max-epochs", "2", "--patience", "1"]),
    );
    assert_eq!(code(&nan), 5);
    assert!(String::from_utf8_lossy(&nan.stderr).contains("epoch 1"));
    assert!(!d.join("model_a.vntc").exists(), "failed run left an output behind");
}

#[test]
fn pipeline_is_idempotent_under_force() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg: Vec<&str> = with(SMALL, QUICK);
    run(d, &with(&cfg, &["synth"]));
    run(d, &with(&cfg, &["train", "--data", "dataset.vntd"]));
    run(d, &with(&cfg, &["prune", "--model", "model_a.vntc", "--data", "dataset.vntd"]));
    run(d, &with(&cfg, &["eval", "--model", "model_a.vntc", "--data", "dataset.vntd", "--name", "A"]));
    run(d, &with(&cfg, &["eval", "--model", "model_b.vntc", "--data", "dataset.vntd", "--name", "B"]));
    let compare = ["compare", "--a", "A.predictions.csv", "--b", "B.predictions.csv", "--prune-summary", "model_b.prune.txt"];
    run(d, &compare);
    let first: Vec<Vec<u8>> = COMPARE_OUTPUTS.iter().map(|n| std::fs::read(d.join(n)).unwrap()).collect();
    assert_eq!(code(&ventnet(d, &compare)), 2);

    // Retraining from scratch reproduces the predictions, hence every report.
    run(d, &with(&cfg, &["train", "--data", "dataset.vntd", "--force"]));
    run(d, &with(&cfg, &["prune", "--model", "model_a.vntc", "--data", "dataset.vntd", "--force"]));
    run(d, &with(&cfg, &["eval", "--model", "model_a.vntc", "--data", "dataset.vntd", "--name", "A", "--force"]));
    run(d, &with(&cfg, &["eval", "--model", "model_b.vntc", "--data", "dataset.vntd", "--name", "B", "--force"]));
    run(d, &with(&compare, &["--force"]));
    for (name, before) in COMPARE_OUTPUTS.iter().zip(&first) {
        assert_eq!(&std::fs::read(d.join(name)).unwrap(), before, "{name} changed");
    }
    let names: Vec<String> = std::fs::read_dir(d)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().all(|n| !n.starts_with(".tmp")), "{names:?}");
}
