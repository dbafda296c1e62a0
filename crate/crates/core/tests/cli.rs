use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fairevo::experiment::runner;
use rand::Rng;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fairevo"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// 150 rows with a numeric, a categorical and a sensitive column.
fn write_dataset(dir: &Path) -> PathBuf {
    let mut g = fairevo::rng::stream(1, 0);
    let mut csv = String::from("income,age,colour,sex,outcome\n");
    for i in 0..150 {
        let sex = if i % 3 == 0 { "f" } else { "m" };
        let income: f64 = g.random::<f64>() * 100.0;
        let age = g.random_range(18..80);
        let colour = ["red", "green", "blue"][g.random_range(0..3)];
        let yes = income + if sex == "m" { 10.0 } else { -10.0 } + g.random::<f64>() * 20.0 > 60.0;
        writeln!(csv, "{income:.2},{age},{colour},{sex},{}", if yes { "yes" } else { "no" }).unwrap();
    }
    let path = dir.join("toy.csv");
    std::fs::write(&path, csv).unwrap();
    std::fs::write(
        dir.join("schema.toml"),
        "positive_label_value = \"yes\"\nprivileged_value = \"m\"\n\n[columns]\nincome = \"numeric\"\nage = \"numeric\"\ncolour = \"categorical\"\nsex = \"sensitive\"\noutcome = \"label\"\n",
    )
    .unwrap();
    path
}

fn small_run(dataset: &Path, out: &Path, extra: &[&str]) -> Output {
    run(bin()
        .arg("run")
        .arg("--dataset")
        .arg(dataset)
        .arg("--out")
        .arg(out)
        .args([
            "--generations", "4", "--archive", "6", "--offspring", "6", "--folds", "1", "--trials", "2",
            "--seed", "5", "--hv-samples", "2000",
        ])
        .args(extra))
}

#[test]
fn out_of_range_tau_is_a_config_error() {
    let o = run(bin().args(["reduce", "--tau", "1.5", "--matrix", "unused.csv"]));
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path());
    let o = small_run(&data, &dir.path().join("o"), &["--tau", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = small_run(&dir.path().join("absent.csv"), &dir.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(3));
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b\n1,x\n").unwrap();
    let o = run(bin().arg("indicators").arg("--set").arg(&bad));
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn unknown_preset_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path());
    let o = small_run(&data, &dir.path().join("o"), &["--preset", "nonesuch"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_is_deterministic_and_summary_is_recomputable() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(small_run(&data, &a, &[]).status.success());
    assert!(small_run(&data, &b, &[]).status.success());
    let sa = std::fs::read_to_string(a.join("summary.csv")).unwrap();
    let sb = std::fs::read_to_string(b.join("summary.csv")).unwrap();
    assert_eq!(sa, sb);
    assert_eq!(sa.lines().count(), 1 + 2 + 1, "header, two runs, mean");
    assert_eq!(runner::recompute_summary(&a, "toy").unwrap(), sa);
    for f in ["run.json", "generations.csv", "timings.csv", "mask.csv", "final_objectives.csv"] {
        assert!(a.join("run_f0_t1").join(f).is_file(), "{f}");
    }
    // Short famoel runs never leave the warm start.
    let mask = std::fs::read_to_string(a.join("run_f0_t0/mask.csv")).unwrap();
    for line in mask.lines().skip(1) {
        assert!(line.split(',').skip(1).all(|b| b == "1"), "{line}");
    }
}

#[test]
fn folds_times_trials_run_directories() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path());
    let out = dir.path().join("o");
    let o = small_run(&data, &out, &["--folds", "3", "--generations", "1", "--save-genomes"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let runs = std::fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("run_"))
        .count();
    assert_eq!(runs, 6);
    let genomes = fairevo::moea::read_genomes(&out.join("run_f2_t1/genomes.bin")).unwrap();
    assert!(!genomes.is_empty());
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path());
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, "tau = 0.22\ngenerations = 7\npreset = \"adult\"\n").unwrap();
    let o = run(bin()
        .arg("run")
        .arg("--config")
        .arg(&cfg)
        .arg("--dataset")
        .arg(&data)
        .args(["--tau", "0.3", "--dry-run"]));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["tau"], 0.3);
    assert_eq!(v["generations"], 7);
    assert_eq!(v["learning_rate"], 0.001);
    assert_eq!(v["hidden_nodes"], 64);
}

#[test]
fn tau_sweep_plot_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path());
    let sweep = dir.path().join("sweep");
    let o = small_run(&data, &sweep, &["--tau-grid", "0.2,0.5", "--generations", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(sweep.join("tau_sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);

    let moel = dir.path().join("moel");
    assert!(small_run(&data, &moel, &["--mode", "moel", "--generations", "2"]).status.success());

    let plots = dir.path().join("plots");
    let o = run(bin()
        .arg("plot")
        .arg("--input")
        .arg(&moel)
        .arg(sweep.join("tau_0.2"))
        .arg(&sweep)
        .arg("--out")
        .arg(&plots));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["hv_curve.svg", "mask_heatmap.svg", "selection_frequency.svg", "tau_sweep.svg"] {
        let svg = std::fs::read_to_string(plots.join(f)).unwrap();
        assert!(svg.contains("<svg") && svg.trim_end().ends_with("</svg>"), "{f}");
        if f.ends_with("curve.svg") || f == "tau_sweep.svg" {
            assert!(svg.contains("class=\"legend\""), "{f} has no legend");
        }
    }

    let report = dir.path().join("report.json");
    let o = run(bin()
        .arg("compare")
        .arg("--input")
        .arg(format!("famoel={}", sweep.join("tau_0.2").display()))
        .arg(format!("moel={}", moel.display()))
        .args(["--indicator", "test_hv", "--reference", "moel", "--out"])
        .arg(&report));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let t = &v["totals"]["famoel"];
    let total = t["win"].as_u64().unwrap() + t["tie"].as_u64().unwrap() + t["loss"].as_u64().unwrap();
    assert_eq!(total, 1);

    let empty = dir.path().join("empty_plots");
    let o = run(bin().args(["plot", "--input", "/nonexistent/dir", "--out"]).arg(&empty));
    assert_eq!(o.status.code(), Some(3));
    assert!(!empty.exists(), "failed plot left an output directory");
}

#[test]
fn reduce_from_objectives_and_metrics_table() {
    let dir = tempfile::tempdir().unwrap();
    let obj = dir.path().join("obj.csv");
    let mut text = String::from("a,b,c\n");
    for i in 0..20 {
        let x = i as f64;
        writeln!(text, "{x},{},{}", 2.0 * x + 1.0, (x * 7.0) % 5.0).unwrap();
    }
    std::fs::write(&obj, text).unwrap();
    let o = run(bin().arg("reduce").arg("--objectives").arg(&obj));
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "0,2");

    let preds = dir.path().join("p.csv");
    std::fs::write(&preds, "label,score,group\n1,0.9,1\n0,0.2,1\n1,0.8,0\n0,0.1,0\n").unwrap();
    let o = run(bin().arg("metrics").arg("--predictions").arg(&preds));
    assert!(o.status.success());
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 26);
    let values: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!(values[1..].iter().all(|&v| v == 0.0), "{values:?}");
}

#[test]
fn indicators_on_a_two_point_set() {
    let dir = tempfile::tempdir().unwrap();
    let set = dir.path().join("s.csv");
    std::fs::write(&set, "0,0\n1,1\n").unwrap();
    let front = dir.path().join("f.csv");
    std::fs::write(&front, "0,0\n1,1\n").unwrap();
    let o = run(bin().arg("indicators").arg("--set").arg(&set).arg("--front").arg(&front));
    assert!(o.status.success());
    let out = stdout(&o);
    let row: Vec<f64> = out.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    // (1,1) is dominated, so only the origin is measured.
    assert!((row[0] - 1.44).abs() < 1e-9);
    assert_eq!(&row[1..], &[0.0, 0.0, 0.0]);
}
