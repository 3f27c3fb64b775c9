use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use srsad_core::cli::content_hash;

const BIN: &str = env!("CARGO_BIN_EXE_srsad");

const SMALL_CONFIG: &str = r#"{
  "corpus": {"kind": "synthetic", "seed": 3,
             "spec": {"speakers": [4, 2, 2], "clips_per_speaker": 1, "speech_clip_s": 13,
                      "songs": [4, 2, 2], "song_s": 16, "noises": [2, 2, 2], "noise_s": 16}},
  "model": {"architecture": "sr-sad",
            "body": {"c": 16, "front_linear_out": 8, "gru1_hidden": 8, "gru2_hidden": 8,
                     "gru3_hidden": 16, "gru_layers_per_block": 2, "head_hidden": 8}}
}"#;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn srsad(args: &[&str]) -> Run {
    let out = Command::new(BIN).args(args).output().expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn ok(args: &[&str]) -> Value {
    let r = srsad(args);
    assert_eq!(r.code, 0, "{args:?}\n{}", r.stderr);
    serde_json::from_str(&r.stdout).expect("stdout is JSON")
}

fn schema_check(name: &str, instance: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(format!("{name}.schema.json"));
    let schema: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{name}: {errors:#?}");
}

fn read_json(p: impl AsRef<Path>) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

fn setup() -> (tempfile::TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, SMALL_CONFIG).unwrap();
    let cfg = cfg.display().to_string();
    (dir, cfg)
}

fn p(dir: &tempfile::TempDir, name: &str) -> String {
    dir.path().join(name).display().to_string()
}

#[test]
fn mix_is_deterministic_and_reports_composition() {
    let (dir, cfg) = setup();
    let (a, b) = (p(&dir, "a"), p(&dir, "b"));
    let summary = ok(&["mix", "--synthetic", "--config", &cfg, "--samples", "10", "--seed", "1", "--out", &a]);
    ok(&["mix", "--synthetic", "--config", &cfg, "--samples", "10", "--seed", "1", "--out", &b]);
    schema_check("mix_summary", &summary);
    assert_eq!(summary["n_samples"], 10);
    let wavs = std::fs::read_dir(&a).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "wav")).count();
    assert_eq!(wavs, 10);
    assert_eq!(content_hash(Path::new(&a)).unwrap(), content_hash(Path::new(&b)).unwrap());
    schema_check("dataset_index", &read_json(Path::new(&a).join("dataset.json")));
    schema_check("sample_sidecar", &read_json(Path::new(&a).join("000003.json")));
    schema_check("repro_record", &read_json(Path::new(&a).join("repro.json")));

    let speech_only = ok(&["mix", "--synthetic", "--config", &cfg, "--samples", "10", "--p-speech", "1.0", "--out", &p(&dir, "c")]);
    assert_eq!(speech_only["singing_sample_fraction"], 0.0);

    let test = ok(&["mix", "--synthetic", "--config", &cfg, "--kind", "test", "--samples", "4", "--out", &p(&dir, "t")]);
    schema_check("mix_summary", &test);
    schema_check("sample_sidecar", &read_json(dir.path().join("t/000000.json")));
}

#[test]
fn train_infer_eval_round_trip() {
    let (dir, cfg) = setup();
    let (data, model, test) = (p(&dir, "data"), p(&dir, "model"), p(&dir, "test"));
    ok(&["mix", "--synthetic", "--config", &cfg, "--samples", "32", "--seed", "2", "--out", &data]);
    let summary = ok(&["train", "--config", &cfg, "--dataset", &data, "--epochs", "300", "--seed", "2", "--out", &model]);
    schema_check("training_summary", &summary);
    let log = std::fs::read_to_string(dir.path().join("model/train_log.ndjson")).unwrap();
    let best = log
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["train_loss"].as_f64().unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!(best < 0.05, "best training BCE {best}");
    assert!(std::fs::read_dir(dir.path().join("model/checkpoints")).unwrap().count() > 0);
    schema_check("repro_record", &read_json(dir.path().join("model/repro.json")));

    ok(&["mix", "--synthetic", "--config", &cfg, "--kind", "test", "--samples", "4", "--out", &test]);
    let weights = format!("{model}/weights.srw");
    let wav = format!("{test}/000001.wav");
    let inferred = ok(&["infer", "--weights", &weights, &wav, "--threshold", "0.5", "--gap-fill", "0.3", "--out", &p(&dir, "inf")]);
    schema_check("infer_summary", &inferred);
    schema_check("decision_sidecar", &read_json(dir.path().join("inf/000001.decisions.json")));
    assert_eq!(inferred[0]["n_frames"], 938);

    let report = ok(&["eval", "--dataset", &test, "--weights", &weights, "--out", &p(&dir, "ev")]);
    schema_check("metric_report", &report);
    let names: Vec<&str> = report["metrics"].as_array().unwrap().iter().map(|m| m["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["auc", "auc_sirr"]);

    let inf_all = p(&dir, "scores");
    let wavs: Vec<String> = (0..4).map(|i| format!("{test}/{i:06}.wav")).collect();
    let mut args = vec!["infer", "--weights", weights.as_str(), "--out", inf_all.as_str()];
    args.extend(wavs.iter().map(String::as_str));
    ok(&args);
    let from_scores = ok(&["eval", "--dataset", &test, "--scores", &inf_all, "--out", &p(&dir, "ev2")]);
    for (a, b) in report["metrics"].as_array().unwrap().iter().zip(from_scores["metrics"].as_array().unwrap()) {
        assert_eq!(a["n_positive"], b["n_positive"]);
        assert!((a["value"].as_f64().unwrap() - b["value"].as_f64().unwrap()).abs() < 1e-4);
    }
}

#[test]
fn complexity_reports_lc_as_cheaper() {
    let lc = ok(&["complexity", "--config", "default-lc", "--rtf-reps", "0"]);
    let full = ok(&["complexity", "--config", "default", "--rtf-reps", "3"]);
    schema_check("complexity_reports", &lc);
    schema_check("complexity_reports", &full);
    assert!(lc[0]["macs_per_chunk"].as_u64() < full[0]["macs_per_chunk"].as_u64());
    assert!(full[0]["rtf"].as_f64().unwrap() > 0.0);
    let csv = srsad(&["complexity", "--model", "tiny", "--rtf-reps", "0", "--format", "csv"]);
    assert!(csv.stdout.starts_with("model,architecture,macs_per_chunk"));
    assert!(csv.stderr.contains("MACs(pub)"));
}

#[test]
fn error_classes_have_distinct_exit_codes() {
    let (dir, _) = setup();
    assert_eq!(srsad(&["train", "--no-such-flag"]).code, 2);
    assert_eq!(srsad(&["complexity", "--model", "huge"]).code, 2);
    let missing = srsad(&["infer", "--weights", &p(&dir, "nope.srw"), "x.wav", "--out", &p(&dir, "o")]);
    assert_eq!(missing.code, 3, "{}", missing.stderr);
    let corrupt: PathBuf = dir.path().join("bad.srw");
    std::fs::write(&corrupt, b"not a weight file").unwrap();
    let r = srsad(&["infer", "--weights", corrupt.to_str().unwrap(), "x.wav", "--out", &p(&dir, "o")]);
    assert_eq!(r.code, 3);
    assert!(r.stderr.contains("corrupt"), "{}", r.stderr);
    assert_eq!(srsad(&["mix", "--synthetic", "--samples", "2", "--p-speech", "1.5", "--out", &p(&dir, "m")]).code, 2);
}

#[test]
fn sweep_emits_rows_csv_and_plot() {
    let (dir, cfg) = setup();
    let out = p(&dir, "sweep");
    let rows = ok(&[
        "sweep", "--synthetic", "--config", &cfg, "--variable", "p-speech", "--values", "0.5,1.0", "--seeds", "1",
        "--epochs", "1", "--pairs", "8", "--val-pairs", "4", "--test-samples", "2", "--out", &out,
    ]);
    schema_check("sweep_rows", &rows);
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert!(dir.path().join("sweep/sweep.csv").exists() && dir.path().join("sweep/sweep.svg").exists());
    schema_check("experiment_result", &read_json(dir.path().join("sweep/value_0.5_seed_1/metrics.json")));
    schema_check("repro_record", &read_json(dir.path().join("sweep/repro.json")));
}
