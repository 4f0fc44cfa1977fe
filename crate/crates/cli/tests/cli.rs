use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use vo2tcn::RunConfig;

fn vo2tcn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vo2tcn")).args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn csv_rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

fn simulate(dir: &Path, n: usize, seed: u64) {
    let out = vo2tcn(&["simulate", "--cohort", &n.to_string(), "--seed", &seed.to_string(), "--out", p(dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

/// Small, fast training settings shared by the tests.
fn quick_config(dir: &Path) -> PathBuf {
    let path = dir.join("quick.toml");
    std::fs::write(
        &path,
        "[data]\ntrain_stride = 40\nval_stride = 20\n\n[model]\nfilters = 4\nkernel = 3\ndilations = 2\n\n[training]\nepochs = 2\n\n[grid]\nfilters = [2, 4]\nkernels = [1, 3]\ndilations = [1, 2]\n",
    )
    .unwrap();
    path
}

fn dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn example_config_matches_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/example.toml");
    assert_eq!(RunConfig::load(&path).unwrap(), RunConfig::default());
    let reduced = RunConfig::load(&path.with_file_name("grid_reduced.toml")).unwrap();
    assert_eq!(reduced.grid.configs(5, 0.2).unwrap().len(), 27);
}

#[test]
fn simulate_counts_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    simulate(&a, 3, 5);
    simulate(&b, 3, 5);
    let files = dir_files(&a);
    let csvs = files.iter().filter(|(n, _)| n.ends_with(".csv")).count();
    assert_eq!(csvs, 12);
    assert!(files.iter().any(|(n, _)| n == "cohort.toml"));
    assert!(files.iter().any(|(n, _)| n == "effective_config.toml"));
    assert_eq!(files, dir_files(&b));

    let one = tmp.path().join("one");
    simulate(&one, 1, 5);
    assert_eq!(dir_files(&one).iter().filter(|(n, _)| n.ends_with(".csv")).count(), 4);
}

#[test]
fn simulate_rejects_empty_cohort() {
    let tmp = tempfile::tempdir().unwrap();
    let out = vo2tcn(&["simulate", "--cohort", "0", "--out", p(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_writes_model_history_and_config() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    simulate(&data, 4, 1);
    let cfg = quick_config(tmp.path());
    let out_dir = tmp.path().join("run");
    let out = vo2tcn(&["train", "--config", p(&cfg), "--data", p(&data), "--epochs", "1", "--out", p(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(csv_rows(&out_dir.join("history.csv")), 1);
    assert!(out_dir.join("model.bin").is_file());
    let echoed = RunConfig::load(&out_dir.join("effective_config.toml")).unwrap();
    assert_eq!(echoed.training.epochs, 1);
    assert_eq!(echoed.model.filters, 4);
}

#[test]
fn train_error_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope");
    let out = vo2tcn(&["train", "--data", p(&missing), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));

    let data = tmp.path().join("data");
    simulate(&data, 3, 1);
    let out = vo2tcn(&["train", "--data", p(&data), "--kernel", "0", "--out", p(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));

    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "[training]\nlearning_rat = 0.1\n").unwrap();
    let out = vo2tcn(&["train", "--config", p(&bad), "--data", p(&data), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn grid_rows_and_jobs_independence() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    simulate(&data, 4, 2);
    let cfg = quick_config(tmp.path());
    let r1 = tmp.path().join("r1.csv");
    let r2 = tmp.path().join("r2.csv");
    for (out, jobs) in [(&r1, "1"), (&r2, "2")] {
        let o =
            vo2tcn(&["grid", "--grid", p(&cfg), "--data", p(&data), "--jobs", jobs, "--epochs", "1", "--out", p(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(csv_rows(&r1), 8);
    assert_eq!(std::fs::read(&r1).unwrap(), std::fs::read(&r2).unwrap());
    assert!(tmp.path().join("r1.config.toml").is_file());

    let malformed = tmp.path().join("malformed.toml");
    std::fs::write(&malformed, "[grid]\nfilters = \"many\"\n").unwrap();
    let o = vo2tcn(&["grid", "--grid", p(&malformed), "--data", p(&data), "--out", p(&r1)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evaluate_and_predict() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    simulate(&data, 4, 3);
    let cfg = quick_config(tmp.path());
    let run = tmp.path().join("run");
    let o = vo2tcn(&["train", "--config", p(&cfg), "--data", p(&data), "--out", p(&run)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let model = run.join("model.bin");

    let eval = tmp.path().join("eval");
    let o = vo2tcn(&["evaluate", "--model", p(&model), "--data", p(&data), "--out", p(&eval)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in vo2tcn::pipeline::EVAL_FILES {
        assert!(eval.join(f).is_file(), "missing {}", f);
    }

    let saved = vo2tcn::SavedModel::load(&model).unwrap();
    let train_id = &saved.split.train[0];
    let leak = tmp.path().join("leak");
    let o =
        vo2tcn(&["evaluate", "--model", p(&model), "--data", p(&data), "--out", p(&leak), "--participants", train_id]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!leak.exists());
    let o = vo2tcn(&[
        "evaluate",
        "--model",
        p(&model),
        "--data",
        p(&data),
        "--out",
        p(&leak),
        "--participants",
        train_id,
        "--allow-train-leak",
    ]);
    assert!(o.status.success());

    // RF of (4, 3, 2) is 7, so a 1110 s recording gives 1104 rows
    let input = data.join(format!("{}_lh.csv", saved.split.test[0]));
    let pred = tmp.path().join("pred.csv");
    let o = vo2tcn(&["predict", "--model", p(&model), "--input", p(&input), "--output", p(&pred)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_rows(&pred), 1110 - 7 + 1);
    let text = std::fs::read_to_string(&pred).unwrap();
    assert_eq!(text.lines().next().unwrap(), "time_s,vo2_true_mlpm,vo2_pred_mlpm,mets_pred,category_pred");
}

#[test]
fn predict_with_full_size_model_row_count() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    simulate(&data, 3, 4);
    let cfg = tmp.path().join("big.toml");
    std::fs::write(&cfg, "[data]\ntrain_stride = 400\nval_stride = 200\n\n[training]\nepochs = 1\n").unwrap();
    let run = tmp.path().join("run");
    let o = vo2tcn(&["train", "--config", p(&cfg), "--data", p(&data), "--out", p(&run)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let pred = tmp.path().join("pred.csv");
    let input = data.join("P01_vth.csv");
    let o = vo2tcn(&["predict", "--model", p(&run.join("model.bin")), "--input", p(&input), "--output", p(&pred)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_rows(&pred), 893);

    // a recording shorter than the receptive field is a data error
    let text = std::fs::read_to_string(&input).unwrap();
    let short: Vec<&str> = text.lines().take(101).collect();
    let short_path = tmp.path().join("short.csv");
    std::fs::write(&short_path, short.join("\n") + "\n").unwrap();
    let o = vo2tcn(&["predict", "--model", p(&run.join("model.bin")), "--input", p(&short_path), "--output", p(&pred)]);
    assert_eq!(o.status.code(), Some(3));
}
