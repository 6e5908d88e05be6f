use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use citl::data::read_canonical_csv;
use citl::eval::{prepare_target, ExperimentConfig, StructuralRiskOnly, Variant};
use citl::ShallowModel;
use tempfile::TempDir;

const SMALL: &str = "l_max = 25\nsource.l_max = 25\ngamma_list = 0.01,0.05,0.1,0.5\nsource.gamma_list = 0.01,0.05,0.1,0.5\n";

fn citl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_citl"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

/// Writes a small synthetic task and the matching config into a fresh directory.
fn workspace(d: usize) -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let o = citl(
        dir.path(),
        &["synth", "--seed", "1", "--shift", "0.5", "--n-cycles", "60", "--d", &d.to_string(), "--out-dir", "tasks"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    fs::write(dir.path().join("small.conf"), SMALL).unwrap();
    let p = dir.path().to_path_buf();
    (dir, p)
}

fn train_source(dir: &Path, out: &str) -> Output {
    citl(
        dir,
        &["train-source", "--data", "tasks/source.csv", "--out", out, "--seed", "7", "--C", "8", "--config", "small.conf"],
    )
}

#[test]
fn synth_writes_two_canonical_csvs_deterministically() {
    let (_g, dir) = workspace(12);
    let src = fs::read(dir.join("tasks/source.csv")).unwrap();
    let tgt = fs::read(dir.join("tasks/target.csv")).unwrap();
    assert_eq!(read_canonical_csv(&src[..]).unwrap().len(), 60);
    assert_eq!(read_canonical_csv(&tgt[..]).unwrap().dim(), 12);
    let o = citl(&dir, &["synth", "--seed", "1", "--shift", "0.5", "--n-cycles", "60", "--d", "12", "--out-dir", "again"]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(dir.join("again/source.csv")).unwrap(), src);
    assert_eq!(fs::read(dir.join("again/target.csv")).unwrap(), tgt);
}

#[test]
fn train_source_writes_model_and_log_reproducibly() {
    let (_g, dir) = workspace(12);
    assert_eq!(code(&train_source(&dir, "a.json")), 0);
    assert!(dir.join("a.growth.csv").exists());
    assert_eq!(code(&train_source(&dir, "b.json")), 0);
    let a = fs::read(dir.join("a.json")).unwrap();
    assert_eq!(a, fs::read(dir.join("b.json")).unwrap());
    let model = ShallowModel::from_json(&String::from_utf8(a).unwrap()).unwrap();
    assert_eq!(model.config["c"], 8.0);
    assert_eq!(model.config["l_max"], 25);
}

#[test]
fn bad_inputs_exit_with_code_two() {
    let (_g, dir) = workspace(12);
    let missing = citl(&dir, &["train-source", "--data", "missing.csv", "--out", "m.json"]);
    assert_eq!(code(&missing), 2);
    assert!(!String::from_utf8_lossy(&missing.stderr).is_empty());
    let unknown = citl(&dir, &["train-source", "--data", "tasks/source.csv", "--out", "m.json", "--set", "epsilon=1"]);
    assert_eq!(code(&unknown), 2);
    fs::write(dir.join("bad.conf"), "eps = 0.1\nlearning_rate = 3\n").unwrap();
    let bad_file = citl(&dir, &["train-source", "--data", "tasks/source.csv", "--out", "m.json", "--config", "bad.conf"]);
    assert_eq!(code(&bad_file), 2);
    let bad_value = citl(&dir, &["train-source", "--data", "tasks/source.csv", "--out", "m.json", "--r", "2"]);
    assert_eq!(code(&bad_value), 2);
    assert!(!dir.join("m.json").exists());
}

#[test]
fn transfer_writes_model_log_and_replayable_report() {
    let (_g, dir) = workspace(12);
    assert_eq!(code(&train_source(&dir, "src.json")), 0);
    let run = |out: &str, mode: &str| {
        citl(
            &dir,
            &[
                "transfer", "--source-model", "src.json", "--data", "tasks/target.csv", "--out", out, "--seed", "7",
                "--mode", mode, "--config", "small.conf", "--no-timings",
            ],
        )
    };
    let o = run("t.json", "global");
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["t.json", "t.growth.csv", "t.report.csv", "t.report.json"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let record: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("t.report.json")).unwrap()).unwrap();
    assert_eq!(record["seed"], 7);
    assert_eq!(record["config"]["experiment"]["split"]["labeled_count"], 20);
    assert_eq!(record["config"]["experiment"]["split"]["semisup_unlabeled_count"], 20);
    assert_eq!(record["config"]["experiment"]["transfer"]["l_max"], 25);
    assert_eq!(record["reports"].as_array().unwrap().len(), 1);

    assert_eq!(code(&run("u.json", "global")), 0);
    for (a, b) in [("t.json", "u.json"), ("t.growth.csv", "u.growth.csv"), ("t.report.csv", "u.report.csv")] {
        assert_eq!(fs::read(dir.join(a)).unwrap(), fs::read(dir.join(b)).unwrap(), "{a}");
    }

    assert_eq!(code(&run("i.json", "incremental")), 0);
    let report = fs::read_to_string(dir.join("i.report.csv")).unwrap();
    assert!(report.contains(",citl_incremental,"), "{report}");
    assert!(fs::read_to_string(dir.join("i.growth.csv")).unwrap().contains(",incremental,"));
}

#[test]
fn zero_unlabeled_terms_match_structural_risk_variant() {
    let (_g, dir) = workspace(12);
    assert_eq!(code(&train_source(&dir, "src.json")), 0);
    let o = citl(
        &dir,
        &[
            "transfer", "--source-model", "src.json", "--data", "tasks/target.csv", "--out", "sr.json", "--seed", "7",
            "--eta", "0", "--c-tu", "0", "--config", "small.conf",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cli_model = ShallowModel::from_json(&fs::read_to_string(dir.join("sr.json")).unwrap()).unwrap();

    let source = ShallowModel::from_json(&fs::read_to_string(dir.join("src.json")).unwrap()).unwrap();
    let target = read_canonical_csv(fs::File::open(dir.join("tasks/target.csv")).unwrap()).unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.transfer.grow.l_max = 25;
    cfg.transfer.grow.gamma_list = vec![0.01, 0.05, 0.1, 0.5];
    let split = prepare_target(&source, &target, cfg.split).unwrap();
    let (lib_model, _) = StructuralRiskOnly.train(&source, &split, &cfg, 7).unwrap();
    assert_eq!(cli_model.w, lib_model.w);
    assert_eq!(cli_model.beta, lib_model.beta);
}

#[test]
fn dimension_mismatch_exits_with_code_four() {
    let (_g, dir) = workspace(12);
    assert_eq!(code(&train_source(&dir, "src.json")), 0);
    let o = citl(&dir, &["synth", "--seed", "2", "--n-cycles", "60", "--d", "8", "--out-dir", "narrow"]);
    assert_eq!(code(&o), 0);
    let t = citl(&dir, &["transfer", "--source-model", "src.json", "--data", "narrow/target.csv", "--out", "t.json"]);
    assert_eq!(code(&t), 4);
    let p = citl(&dir, &["predict", "--model", "src.json", "--data", "narrow/target.csv"]);
    assert_eq!(code(&p), 4);
}

#[test]
fn predict_emits_one_row_per_input_row() {
    let (_g, dir) = workspace(12);
    assert_eq!(code(&train_source(&dir, "src.json")), 0);
    let o = citl(&dir, &["predict", "--model", "src.json", "--data", "tasks/target.csv"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "cycle_id,soh_pred");
    assert_eq!(lines.len() - 1, 60);

    // label-free input
    let csv = fs::read_to_string(dir.join("tasks/target.csv")).unwrap();
    let unlabeled: String = csv
        .lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(1);
            f.join(",") + "\n"
        })
        .collect();
    fs::write(dir.join("x.csv"), unlabeled).unwrap();
    let o = citl(&dir, &["predict", "--model", "src.json", "--data", "x.csv", "--out", "p.csv"]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read_to_string(dir.join("p.csv")).unwrap(), text);
}

#[test]
fn evaluate_reports_on_every_row() {
    let (_g, dir) = workspace(12);
    assert_eq!(code(&train_source(&dir, "src.json")), 0);
    let o = citl(&dir, &["evaluate", "--model", "src.json", "--data", "tasks/source.csv", "--report", "e.csv"]);
    assert_eq!(code(&o), 0);
    let rows = fs::read_to_string(dir.join("e.csv")).unwrap();
    assert_eq!(rows.lines().count(), 2);
    let model = ShallowModel::from_json(&fs::read_to_string(dir.join("src.json")).unwrap()).unwrap();
    assert!(rows.lines().nth(1).unwrap().ends_with(&format!(",{}", model.node_count())));
    assert!(dir.join("e.json").exists());
}

#[test]
fn ablate_emits_four_variants_per_seed() {
    let dir = TempDir::new().unwrap();
    let preset = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets/synthetic_benchmark.conf");
    let o = citl(
        dir.path(),
        &["ablate", "--seeds", "20", "--config", preset.to_str().unwrap(), "--report", "abl.csv", "--no-timings"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = fs::read_to_string(dir.path().join("abl.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 4 * 20);
    for v in ["baseline", "structural_risk", "no_manifold", "full"] {
        assert_eq!(rows.lines().filter(|l| l.contains(&format!(",{v},"))).count(), 20, "{v}");
    }
    let record: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("abl.json")).unwrap()).unwrap();
    assert_eq!(record["config"]["experiment"]["transfer"]["eta"], 1e7);
}

#[test]
fn ablate_requires_both_data_files() {
    let (_g, dir) = workspace(12);
    let o = citl(&dir, &["ablate", "--source", "tasks/source.csv", "--seeds", "1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn commands_leave_inputs_untouched() {
    let (_g, dir) = workspace(12);
    assert_eq!(code(&train_source(&dir, "src.json")), 0);
    let inputs = ["tasks/source.csv", "tasks/target.csv", "src.json", "small.conf"];
    let before: Vec<Vec<u8>> = inputs.iter().map(|f| fs::read(dir.join(f)).unwrap()).collect();
    let runs: [&[&str]; 3] = [
        &["transfer", "--source-model", "src.json", "--data", "tasks/target.csv", "--out", "t.json", "--config", "small.conf"],
        &["predict", "--model", "src.json", "--data", "tasks/target.csv", "--out", "p.csv"],
        &["evaluate", "--model", "src.json", "--data", "tasks/target.csv"],
    ];
    for args in runs {
        assert_eq!(code(&citl(&dir, args)), 0, "{args:?}");
    }
    for (f, b) in inputs.iter().zip(&before) {
        assert_eq!(&fs::read(dir.join(f)).unwrap(), b, "{f}");
    }
}
