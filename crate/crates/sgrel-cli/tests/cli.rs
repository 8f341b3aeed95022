//! Behavior of the `sgrel` binary: pipeline wiring, exit codes, file
//! schemas and run-to-run determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sgrel(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgrel"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(path: PathBuf) -> String {
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn header(path: PathBuf) -> String {
    read(path).lines().next().unwrap_or_default().to_owned()
}

#[test]
fn pipeline_emits_every_declared_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    assert_ok(&sgrel(
        d,
        &["generate", "--out", "data", "--images", "60", "--seed", "5", "--emit-detections"],
    ));
    assert_ok(&sgrel(d, &["labels", "--dataset", "data/dataset.json", "--out", "lab"]));
    assert_ok(&sgrel(
        d,
        &["train", "--dataset", "data/dataset.json", "--out", "run", "--epochs", "3"],
    ));
    assert_ok(&sgrel(
        d,
        &[
            "eval",
            "--dataset",
            "data/dataset.json",
            "--checkpoint",
            "run/checkpoint.json",
            "--mode",
            "predcls",
            "--out",
            "ev",
        ],
    ));
    assert_ok(&sgrel(
        d,
        &[
            "analyze",
            "--dataset",
            "data/dataset.json",
            "--checkpoint",
            "run/checkpoint.json",
            "--out",
            "an",
        ],
    ));
    assert_ok(&sgrel(
        d,
        &[
            "export-features",
            "--dataset",
            "data/dataset.json",
            "--checkpoint",
            "run/checkpoint.json",
            "--out",
            "ft",
        ],
    ));

    assert_eq!(
        header(d.join("lab/labels.csv")),
        "image_id,sub_idx,obj_idx,bit_h,bit_v,distance,iou"
    );
    assert_eq!(header(d.join("lab/label_counts.csv")), "predicate_id,name,kind,count");
    assert_eq!(
        header(d.join("run/train_log.csv")),
        "epoch,L0,L_task1,L_task2,L_task3,L_task4,L"
    );
    assert_eq!(header(d.join("ev/recall.csv")), "mode,k,recall");
    assert_eq!(header(d.join("ev/recall_by_type.csv")), "mode,k,kind,recall");
    assert_eq!(
        header(d.join("ev/alpha.csv")),
        "threshold,geometric_count,possessive_count,alpha"
    );
    assert_eq!(header(d.join("ev/nontrivial.csv")), "threshold,nontrivial_count");
    assert_eq!(header(d.join("an/alpha.csv")), "threshold,geometric_count,possessive_count,alpha");
    assert!(header(d.join("ft/features.csv"))
        .starts_with("image_id,pair_index,predicate_id,kind,confidence,f_0"));
    assert!(d.join("data/detections.json").exists());

    // recall.csv has the default three K rows.
    assert_eq!(read(d.join("ev/recall.csv")).lines().count(), 4);
}

#[test]
fn eval_without_checkpoint_or_predictions_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_ok(&sgrel(d, &["generate", "--out", "data", "--images", "4"]));
    let out = sgrel(
        d,
        &["eval", "--dataset", "data/dataset.json", "--mode", "predcls", "--out", "ev"],
    );
    assert_exit(&out, 2);
}

#[test]
fn missing_required_flag_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = sgrel(dir.path(), &["train", "--dataset", "x.json", "--out", "o"]);
    assert_exit(&out, 2);
}

#[test]
fn unreadable_dataset_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = sgrel(
        dir.path(),
        &["labels", "--dataset", "no-such-file.json", "--out", "o"],
    );
    assert_exit(&out, 2);
}

#[test]
fn corrupt_dataset_exits_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.json"), "{\n  \"version\": 1,\n").unwrap();
    let out = sgrel(d, &["labels", "--dataset", "bad.json", "--out", "o"]);
    assert_exit(&out, 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line"), "{err}");
}

#[test]
fn unknown_mode_or_format_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = sgrel(
        d,
        &["eval", "--dataset", "x.json", "--checkpoint", "c.json", "--mode", "everything", "--out", "o"],
    );
    assert_exit(&out, 2);
    let out = sgrel(d, &["labels", "--dataset", "x.json", "--format", "csv", "--out", "o"]);
    assert_exit(&out, 2);
}

#[test]
fn sgcls_without_detections_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_ok(&sgrel(d, &["generate", "--out", "data", "--images", "6"]));
    assert_ok(&sgrel(
        d,
        &["train", "--dataset", "data/dataset.json", "--out", "run", "--epochs", "1"],
    ));
    let out = sgrel(
        d,
        &[
            "eval",
            "--dataset",
            "data/dataset.json",
            "--checkpoint",
            "run/checkpoint.json",
            "--mode",
            "sgcls",
            "--out",
            "ev",
        ],
    );
    assert_exit(&out, 2);
}

#[test]
fn weights_flag_must_have_four_values() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_ok(&sgrel(d, &["generate", "--out", "data", "--images", "6"]));
    let out = sgrel(
        d,
        &[
            "train",
            "--dataset",
            "data/dataset.json",
            "--out",
            "run",
            "--epochs",
            "1",
            "--weights",
            "1,2,3",
        ],
    );
    assert_exit(&out, 2);
}

#[test]
fn predictions_file_round_trips_through_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_ok(&sgrel(d, &["generate", "--out", "data", "--images", "30", "--seed", "2"]));
    assert_ok(&sgrel(
        d,
        &["train", "--dataset", "data/dataset.json", "--out", "run", "--epochs", "2"],
    ));
    assert_ok(&sgrel(
        d,
        &[
            "eval",
            "--dataset",
            "data/dataset.json",
            "--checkpoint",
            "run/checkpoint.json",
            "--mode",
            "predcls",
            "--out",
            "ev1",
            "--predictions-out",
            "preds.jsonl",
        ],
    ));
    assert_ok(&sgrel(
        d,
        &[
            "eval",
            "--dataset",
            "data/dataset.json",
            "--predictions",
            "preds.jsonl",
            "--mode",
            "predcls",
            "--out",
            "ev2",
        ],
    ));
    assert_eq!(read(d.join("ev1/recall.csv")), read(d.join("ev2/recall.csv")));
    assert_eq!(read(d.join("ev1/alpha.csv")), read(d.join("ev2/alpha.csv")));
}

#[test]
fn thresholds_flag_sets_the_analysis_grid() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_ok(&sgrel(d, &["generate", "--out", "data", "--images", "10"]));
    assert_ok(&sgrel(
        d,
        &["train", "--dataset", "data/dataset.json", "--out", "run", "--epochs", "1"],
    ));
    assert_ok(&sgrel(
        d,
        &[
            "analyze",
            "--dataset",
            "data/dataset.json",
            "--checkpoint",
            "run/checkpoint.json",
            "--thresholds",
            "0.25,0.5,0.75",
            "--out",
            "an",
        ],
    ));
    let alpha = read(d.join("an/alpha.csv"));
    assert_eq!(alpha.lines().count(), 4);
    assert!(alpha.lines().nth(1).unwrap().starts_with("0.25,"));
}

#[test]
fn micro_and_unconstrained_flags_change_the_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_ok(&sgrel(d, &["generate", "--out", "data", "--images", "40", "--seed", "7"]));
    assert_ok(&sgrel(
        d,
        &["train", "--dataset", "data/dataset.json", "--out", "run", "--epochs", "2"],
    ));
    let base = [
        "eval",
        "--dataset",
        "data/dataset.json",
        "--checkpoint",
        "run/checkpoint.json",
        "--mode",
        "predcls",
        "--k",
        "5",
    ];
    let with_flag = |extra: &[&str], out: &str| {
        let mut args: Vec<&str> = base.to_vec();
        args.extend_from_slice(extra);
        args.extend_from_slice(&["--out", out]);
        assert_ok(&sgrel(d, &args));
        read(d.join(out).join("recall.csv"))
    };
    let plain = with_flag(&[], "ev0");
    let micro = with_flag(&["--micro-recall"], "ev1");
    let unconstrained = with_flag(&["--no-graph-constraint"], "ev2");
    // Different averaging / candidate sets are visibly different reports on
    // a heterogeneous dataset (micro vs macro may coincide only if every
    // image had identical counts; this seed does not).
    assert_ne!(plain, micro);
    assert_ne!(plain, unconstrained);
}

#[test]
fn identical_invocations_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for run in ["a", "b"] {
        assert_ok(&sgrel(
            d,
            &[
                "generate",
                "--out",
                &format!("{run}/data"),
                "--images",
                "50",
                "--seed",
                "11",
                "--emit-detections",
                "--box-jitter",
                "0.1",
                "--score-sigma",
                "0.1",
            ],
        ));
        assert_ok(&sgrel(
            d,
            &[
                "train",
                "--dataset",
                &format!("{run}/data/dataset.json"),
                "--out",
                &format!("{run}/run"),
                "--epochs",
                "3",
                "--seed",
                "4",
            ],
        ));
        assert_ok(&sgrel(
            d,
            &[
                "eval",
                "--dataset",
                &format!("{run}/data/dataset.json"),
                "--checkpoint",
                &format!("{run}/run/checkpoint.json"),
                "--detections",
                &format!("{run}/data/detections.json"),
                "--mode",
                "sgdet",
                "--out",
                &format!("{run}/ev"),
            ],
        ));
    }
    for file in ["data/dataset.json", "data/detections.json", "run/checkpoint.json", "ev/recall.csv", "ev/recall_by_type.csv", "ev/alpha.csv", "ev/nontrivial.csv"] {
        assert_eq!(
            std::fs::read(d.join("a").join(file)).unwrap(),
            std::fs::read(d.join("b").join(file)).unwrap(),
            "{file} differs between identical runs"
        );
    }
    // The train log may differ only in its '#' timing lines.
    let strip = |p: PathBuf| -> Vec<String> {
        read(p).lines().filter(|l| !l.starts_with('#')).map(str::to_owned).collect()
    };
    assert_eq!(strip(d.join("a/run/train_log.csv")), strip(d.join("b/run/train_log.csv")));
}

#[test]
fn vg_format_flag_reads_region_graph_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("vg.json"),
        r#"[{"image_id": 1, "width": 100.0, "height": 100.0,
             "objects": [{"object_id": 1, "x": 5.0, "y": 5.0, "w": 30.0, "h": 30.0, "names": ["desk"]},
                         {"object_id": 2, "x": 10.0, "y": 2.0, "w": 15.0, "h": 10.0, "names": ["lamp"]}],
             "relationships": [{"predicate": "on", "subject_id": 2, "object_id": 1}]}]"#,
    )
    .unwrap();
    assert_ok(&sgrel(d, &["labels", "--dataset", "vg.json", "--format", "vg", "--out", "lab"]));
    let counts = read(d.join("lab/label_counts.csv"));
    assert!(counts.contains("on,geometric,1"), "{counts}");
}
