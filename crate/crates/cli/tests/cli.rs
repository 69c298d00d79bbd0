use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = "\
[grid]
f_grid = [1.0, 2.0]
seeds_per_cell = 4
anomaly_seeds_per_cell = 2
healthy_per_seed = 3

[models.ann]
epochs = 20
";

fn faultnet(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_faultnet"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> String {
    assert!(
        o.status.success(),
        "exit {:?}\n{}",
        o.status.code(),
        stderr(&o)
    );
    stdout(&o)
}

fn hash_line(out: &str, prefix: &str) -> String {
    out.lines()
        .find_map(|l| l.strip_prefix(prefix))
        .unwrap()
        .to_string()
}

/// Temp dir holding `small.toml` and a generated corpus under `corpus/`.
fn corpus_with(config: &str) -> (TempDir, PathBuf) {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("small.toml"), config).unwrap();
    ok(faultnet(
        &["generate", "--config", "small.toml", "--out", "corpus"],
        tmp.path(),
    ));
    let manifest = tmp.path().join("corpus/manifest.json");
    (tmp, manifest)
}

#[test]
fn generate_reports_cells_and_is_repeatable() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("small.toml"), SMALL).unwrap();
    let a = ok(faultnet(
        &["generate", "--config", "small.toml", "--out", "nested/a"],
        tmp.path(),
    ));
    let b = ok(faultnet(
        &["generate", "--config", "small.toml", "--out", "b"],
        tmp.path(),
    ));
    // 4 seeds x 3 healthy, 6 cases x 4 seeds twice, 6 cases x 2 F x 2 seeds twice.
    assert!(
        a.contains("cells: 12 single + 12 pair cases; 108 records (12 healthy, 24 s1, 24 s2, 24 s3, 24 s4)"),
        "{a}"
    );
    assert_eq!(
        hash_line(&a, "manifest hash: "),
        hash_line(&b, "manifest hash: ")
    );
    assert!(tmp.path().join("nested/a/manifest.json").exists());
    let c = ok(faultnet(
        &[
            "generate",
            "--config",
            "small.toml",
            "--seed",
            "9",
            "--out",
            "c",
        ],
        tmp.path(),
    ));
    assert_ne!(
        hash_line(&a, "manifest hash: "),
        hash_line(&c, "manifest hash: ")
    );
}

#[test]
fn default_grid_cell_count() {
    let tmp = TempDir::new().unwrap();
    // Only count cells: shrink the records so the full default grid stays quick.
    fs::write(tmp.path().join("c.toml"), "[sim]\nduration = 0.2\n").unwrap();
    let out = ok(faultnet(
        &["generate", "--config", "c.toml", "--out", "o"],
        tmp.path(),
    ));
    assert!(
        out.contains("cells: 12 single + 12 pair cases; 840 records (120 healthy, 120 s1, 240 s2, 120 s3, 240 s4)"),
        "{out}"
    );
}

#[test]
fn malformed_config_key_exits_2_and_names_the_key() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("bad.toml"), "[grid]\nseeds_per_cel = 3\n").unwrap();
    let o = faultnet(
        &["generate", "--config", "bad.toml", "--out", "o"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seeds_per_cel"), "{}", stderr(&o));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn single_model_bundle_records_its_kind_and_is_deterministic() {
    let (tmp, _) = corpus_with(SMALL);
    let m = "corpus/manifest.json";
    let a = ok(faultnet(
        &["train", "--manifest", m, "--model", "knn", "--out", "k1"],
        tmp.path(),
    ));
    let b = ok(faultnet(
        &["train", "--manifest", m, "--model", "knn", "--out", "k2"],
        tmp.path(),
    ));
    assert_eq!(
        hash_line(&a, "bundle hash: "),
        hash_line(&b, "bundle hash: ")
    );
    assert!(a.contains("training fit on"));
    let header: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("k1/bundle.json")).unwrap())
            .unwrap();
    assert_eq!(header["mode"], "single");
    assert_eq!(header["models"][0]["kind"], "KNN");
}

#[test]
fn pipeline_on_hardware_only_corpus_exits_3() {
    let cfg =
        "[grid]\nscenarios = [\"single_no_anomaly\"]\nseeds_per_cell = 3\nhealthy_per_seed = 2\n";
    let (tmp, _) = corpus_with(cfg);
    let o = faultnet(
        &["train", "--manifest", "corpus/manifest.json", "--out", "b"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("typer class missing"), "{}", stderr(&o));
}

#[test]
fn evaluate_diagnose_and_error_paths() {
    let (tmp, m) = corpus_with(SMALL);
    let p = tmp.path();
    ok(faultnet(
        &[
            "train",
            "--config",
            "small.toml",
            "--manifest",
            "corpus/manifest.json",
            "--out",
            "b",
        ],
        p,
    ));

    let text = ok(faultnet(
        &[
            "evaluate",
            "--bundle",
            "b",
            "--manifest",
            "corpus/manifest.json",
            "--out",
            "e1",
        ],
        p,
    ));
    ok(faultnet(
        &[
            "evaluate",
            "--bundle",
            "b",
            "--manifest",
            "corpus/manifest.json",
            "--out",
            "e2",
        ],
        p,
    ));
    for f in ["report.txt", "report.json"] {
        assert_eq!(
            fs::read(p.join("e1").join(f)).unwrap(),
            fs::read(p.join("e2").join(f)).unwrap()
        );
    }
    assert!(text.contains("Performance Metrics for Single Switch Without Anomalies"));
    let header = text.lines().find(|l| l.starts_with("Model")).unwrap();
    let cols: Vec<&str> = header.split('|').map(str::trim).skip(1).collect();
    assert_eq!(cols, ["Accuracy", "Precision", "Recall", "F1-Score"]);

    // Numbers in the text table match the JSON copy.
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p.join("e1/report.json")).unwrap()).unwrap();
    let first = &json["sections"][0]["rows"][0];
    let row = text.lines().find(|l| l.starts_with("Pipeline(")).unwrap();
    let nums: Vec<f64> = row
        .split('|')
        .skip(1)
        .map(|s| s.trim().parse().unwrap())
        .collect();
    for (k, key) in ["accuracy", "precision", "recall", "f1"].iter().enumerate() {
        assert_eq!(nums[k], first[key].as_f64().unwrap(), "{key}");
    }

    // Healthy record.
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&m).unwrap()).unwrap();
    let record_of = |prefix: &str| -> String {
        let cells = manifest["cells"].as_array().unwrap();
        let e = cells
            .iter()
            .find(|c| c["id"].as_str().unwrap().starts_with(prefix))
            .unwrap();
        format!("corpus/{}", e["record"].as_str().unwrap())
    };
    let healthy = record_of("healthy");
    let line = ok(faultnet(
        &["diagnose", "--bundle", "b", "--record", &healthy],
        p,
    ));
    assert_eq!(line.trim(), "status=NoFault type=None loc=NA");
    let s1 = record_of("s1-S1-");
    let line = ok(faultnet(&["diagnose", "--bundle", "b", "--record", &s1], p));
    assert!(line.contains("loc=Single(S1)"), "{line}");

    // Truncated row.
    let text = fs::read_to_string(p.join(&healthy)).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let cut = lines[5].rsplit_once(',').unwrap().0.to_string();
    lines[5] = &cut;
    fs::write(p.join("bad.csv"), lines.join("\n")).unwrap();
    let o = faultnet(&["diagnose", "--bundle", "b", "--record", "bad.csv"], p);
    assert_eq!(o.status.code(), Some(5));
    assert!(stderr(&o).contains("line 6"), "{}", stderr(&o));

    // Corpus built with different windows.
    fs::write(
        p.join("other.toml"),
        "[grid]\nf_grid = [1.0]\nseeds_per_cell = 2\nhealthy_per_seed = 1\n\
         [features]\nframe = \"alpha_beta\"\nwindow_len = 167\nwindow_stride = 100\n\
         stats = [\"mean\", \"variance\", \"lag1_autocorr\"]\n\
         channels = [\"i_alpha\", \"i_beta\", \"v_alpha\", \"v_beta\"]\n",
    )
    .unwrap();
    ok(faultnet(
        &["generate", "--config", "other.toml", "--out", "other"],
        p,
    ));
    let o = faultnet(
        &[
            "evaluate",
            "--bundle",
            "b",
            "--manifest",
            "other/manifest.json",
            "--out",
            "e3",
        ],
        p,
    );
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn training_side_scores_at_least_as_well_as_test_side_for_dt() {
    let (tmp, _) = corpus_with(SMALL);
    let p = tmp.path();
    let m = "corpus/manifest.json";
    let accuracy = |dir: &str| -> f64 {
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(p.join(dir).join("report.json")).unwrap())
                .unwrap();
        json["sections"].as_array().unwrap().last().unwrap()["rows"][0]["accuracy"]
            .as_f64()
            .unwrap()
    };
    let (mut train_sum, mut test_sum) = (0.0, 0.0);
    for seed in ["1", "2", "3"] {
        let b = format!("dt{seed}");
        ok(faultnet(
            &[
                "train",
                "--manifest",
                m,
                "--model",
                "dt",
                "--seed",
                seed,
                "--out",
                &b,
            ],
            p,
        ));
        for side in ["train", "test"] {
            let out = format!("{b}-{side}");
            ok(faultnet(
                &[
                    "evaluate",
                    "--bundle",
                    &b,
                    "--manifest",
                    m,
                    "--split",
                    side,
                    "--out",
                    &out,
                ],
                p,
            ));
        }
        train_sum += accuracy(&format!("{b}-train"));
        test_sum += accuracy(&format!("{b}-test"));
    }
    assert!(train_sum >= test_sum, "train {train_sum} < test {test_sum}");
}

#[test]
fn report_compares_all_learners() {
    let (tmp, _) = corpus_with(SMALL);
    let text = ok(faultnet(
        &[
            "report",
            "--config",
            "small.toml",
            "--manifest",
            "corpus/manifest.json",
            "--out",
            "r",
        ],
        tmp.path(),
    ));
    for model in ["DT", "KNN", "SVM", "NN", "ANN"] {
        assert!(
            text.lines().any(|l| l.starts_with(&format!("{model} "))),
            "{model}"
        );
    }
    assert!(text.contains("Performance Metrics for Single and Multi-Switch Without Anomalies"));
    assert!(tmp.path().join("r/report.json").exists());
}
