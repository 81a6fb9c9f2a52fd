use std::path::Path;
use std::process::{Command, Output};

use odtnet::dataset::{BUNDLED_FORMULATIONS_CSV, FORMULATION_COLUMNS};

fn odtnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_odtnet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn set_sizes(split_text: &str) -> Vec<usize> {
    split_text
        .lines()
        .map(|l| {
            let (_, v) = l.split_once(':').unwrap();
            v.split(',').filter(|s| !s.is_empty()).count()
        })
        .collect()
}

#[test]
fn ingest_summarizes_bundled_corpus() {
    let o = odtnet(&["ingest"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("records\t145\n"));
    assert!(text.contains("labeled\t144\n"));
    assert!(text.contains("api_groups\t26\n"));
    assert!(text.contains("feature_dimension\t48\n"));
    assert!(!stderr(&o).contains("warning"));
}

#[test]
fn ingest_strict_warns_but_succeeds() {
    let o = odtnet(&["ingest", "--strict"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o)
        .lines()
        .any(|l| l.contains("lubricant1_mg") && l.contains("Risperidone")));
}

#[test]
fn ingest_empty_table_warns() {
    let dir = tempfile::tempdir().unwrap();
    let header_only = dir.path().join("header.csv");
    std::fs::write(&header_only, format!("{}\n", FORMULATION_COLUMNS.join(","))).unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    for file in [&header_only, &empty] {
        let o = odtnet(&["ingest", "--formulations", path(file)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).contains("records\t0\n"));
        assert!(stderr(&o).contains("warning"));
    }
}

#[test]
fn ingest_rejects_corrupt_row() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.csv");
    let mut lines: Vec<String> = BUNDLED_FORMULATIONS_CSV.lines().map(String::from).collect();
    let mut cells: Vec<&str> = lines[3].split(',').collect();
    cells[1] = "forty-five";
    lines[3] = cells.join(",");
    std::fs::write(&file, lines.join("\n")).unwrap();
    let o = odtnet(&["ingest", "--formulations", path(&file)]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(
        err.contains("row 3") && err.contains("api_dose_mg"),
        "{err}"
    );
}

#[test]
fn split_is_deterministic_and_sized() {
    let a = odtnet(&["split", "--seed", "11"]);
    let b = odtnet(&["split", "--seed", "11"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(set_sizes(&stdout(&a)), vec![104, 20, 20]);

    let r = odtnet(&[
        "split",
        "--strategy",
        "random",
        "--n-validation",
        "10",
        "--n-test",
        "15",
    ]);
    assert_eq!(set_sizes(&stdout(&r)), vec![119, 10, 15]);
}

#[test]
fn split_with_explicit_test_records() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("test.txt");
    std::fs::write(&file, "0, 1 2\n3\n").unwrap();
    let o = odtnet(&["split", "--test-indices", path(&file)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("\ntest:0,1,2,3\n"));
    assert_eq!(set_sizes(&stdout(&o)), vec![120, 20, 4]);
}

#[test]
fn split_config_errors_exit_one() {
    let o = odtnet(&["split", "--n-validation", "200"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("n_validation"), "{}", stderr(&o));

    let o = odtnet(&["split", "--strategy", "stratified"]);
    assert_eq!(o.status.code(), Some(1));

    let o = odtnet(&["split", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(
        &cfg,
        "# split settings\nn-validation = 10\nstrategy = random\nseed = 5\n",
    )
    .unwrap();
    let o = odtnet(&["split", "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(set_sizes(&stdout(&o)), vec![114, 10, 20]);

    let o = odtnet(&["split", "--config", path(&cfg), "--n-validation", "12"]);
    assert_eq!(set_sizes(&stdout(&o)), vec![112, 12, 20]);

    std::fs::write(&cfg, "learning_rate = 0.1\n").unwrap();
    let o = odtnet(&["split", "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown key"));
}

#[test]
fn train_echoes_preset() {
    let o = odtnet(&["train", "--preset", "dnn", "--epochs", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains(&format!("hidden_layers\t{}\n", ["50"; 10].join(","))));
    assert!(text.contains("epochs\t1\n"));

    let o = odtnet(&["train", "--preset", "ann", "--epochs", "1"]);
    let text = stdout(&o);
    assert!(text.contains("hidden_layers\t200\n"));
    assert!(text.contains("learning_rate\t0.01\nmomentum\t0.8\n"));
    for set in [
        "train\tn=104\taccuracy=",
        "validation\tn=20\taccuracy=",
        "test\tn=20\taccuracy=",
    ] {
        assert!(text.contains(set), "{text}");
    }

    let o = odtnet(&["train", "--preset", "ann", "--hidden", "4"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn train_report_matches_golden() {
    let o = odtnet(&["train", "--preset", "dnn", "--epochs", "30", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let golden = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/golden/dnn_seed7_30epochs.txt"
    );
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(golden, &o.stdout).unwrap();
    }
    assert_eq!(stdout(&o), std::fs::read_to_string(golden).unwrap());
}

#[test]
fn train_evaluate_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let split = dir.path().join("split.txt");
    let model = dir.path().join("model.txt");
    let preds = dir.path().join("preds.csv");

    let o = odtnet(&["split", "--out", path(&split)]);
    assert_eq!(o.status.code(), Some(0));
    let o = odtnet(&[
        "train",
        "--preset",
        "custom",
        "--hidden",
        "6,6",
        "--epochs",
        "40",
        "--split",
        path(&split),
        "--out",
        path(&model),
        "--predictions",
        path(&preds),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let train_test_line = stdout(&o)
        .lines()
        .find(|l| l.starts_with("test\t"))
        .unwrap()
        .to_string();
    let csv = std::fs::read_to_string(&preds).unwrap();
    assert!(csv.starts_with("set,row_index,label_sec,prediction_sec,abs_error_sec,hit\n"));
    assert_eq!(csv.lines().count(), 145);

    let o = odtnet(&["evaluate", "--model", path(&model), "--split", path(&split)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim_end(), train_test_line);

    let o = odtnet(&["predict", "--model", path(&model)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(lines[0], "record_index,api_name,prediction_sec");
    assert_eq!(lines.len(), 146);
    for line in &lines[1..] {
        let p: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!((0.0..=100.0).contains(&p), "{line}");
    }
}

#[test]
fn evaluate_empty_set_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let split = dir.path().join("split.txt");
    let model = dir.path().join("model.txt");
    let o = odtnet(&["split", "--out", path(&split)]);
    assert_eq!(o.status.code(), Some(0));
    let o = odtnet(&[
        "train",
        "--preset",
        "custom",
        "--epochs",
        "1",
        "--split",
        path(&split),
        "--out",
        path(&model),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    // Move every test record into training.
    let text = std::fs::read_to_string(&split).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let test = lines[2].trim_start_matches("test:").to_string();
    lines[0] = format!("{},{test}", lines[0]);
    lines[2] = "test:".into();
    std::fs::write(&split, lines.join("\n")).unwrap();

    let o = odtnet(&["evaluate", "--model", path(&model), "--split", path(&split)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty"), "{}", stderr(&o));
}

#[test]
fn predict_unknown_excipient_is_a_codec_error() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.txt");
    let input = dir.path().join("new.csv");
    let o = odtnet(&[
        "train",
        "--preset",
        "custom",
        "--epochs",
        "1",
        "--out",
        path(&model),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut lines: Vec<&str> = BUNDLED_FORMULATIONS_CSV.lines().take(2).collect();
    let row = lines[1].replacen("Mannitol", "Unobtainium", 1);
    lines[1] = &row;
    std::fs::write(&input, lines.join("\n")).unwrap();

    let o = odtnet(&["predict", "--model", path(&model), "--input", path(&input)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Unobtainium"), "{}", stderr(&o));
}

#[test]
fn codec_dump_lists_every_feature() {
    let o = odtnet(&["codec", "dump"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 48);
    assert!(text.lines().any(|l| l == "10\tfiller1=Mannitol"), "{text}");
    assert!(text.ends_with("47\tpunch_mm\n"));
}

#[test]
fn missing_model_file_is_a_usage_error() {
    let o = odtnet(&["evaluate", "--model", "/nonexistent/model.txt"]);
    assert_eq!(o.status.code(), Some(1));
    let o = odtnet(&["ingest", "--apis", "/nonexistent/apis.csv"]);
    assert_eq!(o.status.code(), Some(1));
}
