//! End-to-end tests of the `brandcap` binary: exit codes, JSON output, and
//! the dataset workflow, all against the deterministic mock provider.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn brandcap() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_brandcap"));
    // keep host configuration out of the tests
    for key in [
        "PROVIDER_BASE_URL",
        "PROVIDER_API_KEY",
        "CHAT_MODEL",
        "EMBED_TEXT_MODEL",
        "EMBED_IMAGE_MODEL",
        "CAPTION_MODEL",
        "CACHE_DIR",
        "MAX_INFLIGHT",
    ] {
        cmd.env_remove(key);
    }
    cmd
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn posts_fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/resources/fixtures/posts_sample.jsonl")
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).to_string()
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).to_string()
}

#[test]
fn generate_from_description_echoes_the_entity() {
    let output = brandcap()
        .args([
            "generate",
            "--provider",
            "mock",
            "--seed",
            "7",
            "--description",
            "a bed with a green comforter and a wooden headboard",
            "--personality",
            "sophistication",
            "--entity",
            "this season",
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr_of(&output));
    let caption: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    let text = caption["text"].as_str().unwrap();
    assert!(text.contains("this season"), "caption: {text}");
    assert_eq!(caption["flags"]["tonality_clean"], true);
    assert_eq!(
        caption["primary_caption"],
        "a bed with a green comforter and a wooden headboard"
    );
}

#[test]
fn generate_is_deterministic_for_a_fixed_seed() {
    let run = || {
        let output = brandcap()
            .args([
                "generate",
                "--provider",
                "mock",
                "--seed",
                "11",
                "--description",
                "a quiet cabin by a lake",
                "--personality",
                "ruggedness",
                "--hashtag",
                "#trailready",
            ])
            .output()
            .unwrap();
        assert!(output.status.success());
        let mut value: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
        // wall-clock latency is the one nondeterministic field
        value["provider_latency_ms"] = 0.into();
        value
    };
    assert_eq!(run(), run());
}

#[test]
fn generate_rejects_image_xor_violations() {
    let both = brandcap()
        .args([
            "generate",
            "--provider",
            "mock",
            "--image",
            "https://img.example.com/a.jpg",
            "--description",
            "a thing",
            "--personality",
            "sincerity",
        ])
        .output()
        .unwrap();
    assert_eq!(both.status.code(), Some(1), "{}", stderr_of(&both));

    let neither = brandcap()
        .args([
            "generate",
            "--provider",
            "mock",
            "--personality",
            "sincerity",
        ])
        .output()
        .unwrap();
    assert_eq!(neither.status.code(), Some(1));
}

#[test]
fn generate_rejects_unknown_personalities_and_bad_attributes() {
    let unknown = brandcap()
        .args([
            "generate",
            "--provider",
            "mock",
            "--description",
            "x",
            "--personality",
            "bold",
        ])
        .output()
        .unwrap();
    assert_eq!(unknown.status.code(), Some(1));
    assert!(stderr_of(&unknown).contains("unknown personality"));

    let bad_tag = brandcap()
        .args([
            "generate",
            "--provider",
            "mock",
            "--description",
            "x",
            "--personality",
            "sincerity",
            "--hashtag",
            "no-hash",
        ])
        .output()
        .unwrap();
    assert_eq!(bad_tag.status.code(), Some(1));
    assert!(stderr_of(&bad_tag).contains("malformed"));
}

#[test]
fn generate_shots_need_a_pool() {
    let output = brandcap()
        .args([
            "generate",
            "--provider",
            "mock",
            "--description",
            "x",
            "--personality",
            "sincerity",
            "--shots",
            "1",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr_of(&output).contains("--shots-file"));
}

#[test]
fn generate_with_a_shot_pool_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let pool = dir.path().join("shots.jsonl");
    std::fs::write(
        &pool,
        concat!(
            r#"{"description": "a pair of metallic sneakers on a white couch", "attributes": {"usernames": ["@balenciaga"]}, "personality": "sophistication", "target_caption": "No shoes on the couch (unless they're @balenciaga)"}"#,
            "\n"
        ),
    )
    .unwrap();
    let output = brandcap()
        .args([
            "generate",
            "--provider",
            "mock",
            "--seed",
            "5",
            "--description",
            "a dog sleeping on a couch in a living room",
            "--personality",
            "sophistication",
            "--shots",
            "1",
            "--shots-file",
            pool.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr_of(&output));
    let caption: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert!(caption["text"]
        .as_str()
        .unwrap()
        .starts_with("a dog sleeping on a couch"));
}

#[test]
fn exit_code_two_when_the_provider_is_unreachable() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("brandcap.conf");
    std::fs::write(&config, "max_retries = 0\ninitial_backoff_ms = 0\n").unwrap();
    let output = brandcap()
        .env("PROVIDER_BASE_URL", "http://127.0.0.1:9")
        .args([
            "--config",
            config.to_str().unwrap(),
            "generate",
            "--description",
            "x",
            "--personality",
            "sincerity",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{}", stderr_of(&output));
}

#[test]
fn env_overrides_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("brandcap.conf");
    // env CHAT_MODEL must win over the file value; the generated request
    // echoes the model id it was sent with
    std::fs::write(&config, "chat_model = file-model\n").unwrap();
    let output = brandcap()
        .env("CHAT_MODEL", "env-model")
        .args([
            "--config",
            config.to_str().unwrap(),
            "generate",
            "--provider",
            "mock",
            "--description",
            "a thing",
            "--personality",
            "sincerity",
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr_of(&output));
    let caption: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert_eq!(caption["request"]["model_id"], "env-model");

    // and the --model flag wins over both
    let output = brandcap()
        .env("CHAT_MODEL", "env-model")
        .args([
            "--config",
            config.to_str().unwrap(),
            "generate",
            "--provider",
            "mock",
            "--description",
            "a thing",
            "--personality",
            "sincerity",
            "--model",
            "flag-model",
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let caption: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert_eq!(caption["request"]["model_id"], "flag-model");
}

#[test]
fn dataset_prepare_matches_the_hand_audit() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("splits");
    let output = brandcap()
        .args([
            "dataset",
            "--seed",
            "3",
            "prepare",
            "--input",
            posts_fixture().to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
            "--val-fraction",
            "0.25",
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr_of(&output));
    let stdout = stdout_of(&output);
    assert!(
        stdout.contains("kept 12 records, dropped 8 (3 emoji-only, 3 too short, 2 not English)"),
        "stdout: {stdout}"
    );
    for name in [
        "train.jsonl",
        "validation.jsonl",
        "test.jsonl",
        "stats.txt",
        "dropped.jsonl",
    ] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    let stats = std::fs::read_to_string(out_dir.join("stats.txt")).unwrap();
    assert!(stats.contains("Total"));

    // all test-brand records live in test.jsonl
    let test_lines = std::fs::read_to_string(out_dir.join("test.jsonl")).unwrap();
    for id in ["p001", "p002", "p003", "p004", "p005", "p007", "p009"] {
        assert!(test_lines.contains(id), "{id} missing from test split");
    }
    let train_lines = std::fs::read_to_string(out_dir.join("train.jsonl")).unwrap();
    let val_lines = std::fs::read_to_string(out_dir.join("validation.jsonl")).unwrap();
    for id in ["p001", "p002", "p003", "p004", "p005", "p007", "p009"] {
        assert!(!train_lines.contains(id));
        assert!(!val_lines.contains(id));
    }
}

#[test]
fn dataset_stats_on_an_empty_dir_prints_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let output = brandcap()
        .args(["dataset", "stats", "--dir", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = stdout_of(&output);
    assert!(stdout.contains("Sincerity"));
    assert!(stdout.contains("Total"));
}

#[test]
fn dataset_sample_fails_cleanly_when_the_pool_is_too_small() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("splits");
    assert!(brandcap()
        .args([
            "dataset",
            "prepare",
            "--input",
            posts_fixture().to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
            "--val-fraction",
            "0.25",
        ])
        .output()
        .unwrap()
        .status
        .success());

    let undersized = brandcap()
        .args([
            "dataset",
            "sample",
            "--dir",
            out_dir.to_str().unwrap(),
            "--per-personality",
            "5",
        ])
        .output()
        .unwrap();
    assert_eq!(undersized.status.code(), Some(1));
    assert!(stderr_of(&undersized).contains("insufficient test records"));

    let ok = brandcap()
        .args([
            "dataset",
            "--seed",
            "9",
            "sample",
            "--dir",
            out_dir.to_str().unwrap(),
            "--per-personality",
            "1",
        ])
        .output()
        .unwrap();
    assert!(ok.status.success());
    assert_eq!(stdout_of(&ok).lines().count(), 5);
}

#[test]
fn dataset_build_pairs_uses_stored_descriptions() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("records.jsonl");
    std::fs::write(
        &records,
        concat!(
            r#"{"id": "p003", "brand": "Marriott", "image_ref": null, "caption": "There is nothing quite like New York City in the fall. The weather is perfect for a short walk to the Brooklyn Bridge when you stay at @brooklynmarriott.", "collected_at": "2023-04-03"}"#,
            "\n"
        ),
    )
    .unwrap();
    let descriptions = dir.path().join("descriptions.jsonl");
    std::fs::write(
        &descriptions,
        concat!(
            r#"{"id": "p003", "description": "a large bed in a hotel room with a view of the city"}"#,
            "\n"
        ),
    )
    .unwrap();
    let output = brandcap()
        .args([
            "dataset",
            "--provider",
            "mock",
            "build-pairs",
            "--input",
            records.to_str().unwrap(),
            "--variant",
            "selective",
            "--descriptions",
            descriptions.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr_of(&output));
    let pair: serde_json::Value =
        serde_json::from_str(stdout_of(&output).lines().next().unwrap()).unwrap();
    let instruction = pair["instruction"].as_str().unwrap();
    assert!(instruction.contains("The tone of the text should be competent."));
    assert!(instruction.contains("a large bed in a hotel room with a view of the city"));
    assert!(instruction.contains("Usernames: @brooklynmarriott."));
    assert_eq!(pair["personality"], "competence");
}

#[test]
fn dataset_import_converts_the_export_shape() {
    let dir = tempfile::tempdir().unwrap();
    let export = dir.path().join("export.jsonl");
    std::fs::write(
        &export,
        concat!(
            r#"{"shortcode": "Cq1x", "caption": "hello there", "display_url": "https://cdn.example.com/1.jpg", "taken_at": 1682553600, "owner_username": "Walgreens"}"#,
            "\n"
        ),
    )
    .unwrap();
    let output = brandcap()
        .args(["dataset", "import", "--input", export.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr_of(&output));
    let row: serde_json::Value =
        serde_json::from_str(stdout_of(&output).lines().next().unwrap()).unwrap();
    assert_eq!(row["id"], "Cq1x");
    assert_eq!(row["brand"], "Walgreens");
    assert_eq!(row["collected_at"], "2023-04-27");
}

#[test]
fn evaluate_missing_input_exits_one() {
    let output = brandcap()
        .args([
            "evaluate",
            "--provider",
            "mock",
            "--inputs",
            "/definitely/not/here.jsonl",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
}

fn run_generate_batch(dir: &Path) -> PathBuf {
    let generated = dir.join("generated.jsonl");
    let output = brandcap()
        .args([
            "generate",
            "--provider",
            "mock",
            "--seed",
            "7",
            "--batch",
            fixture("eval_batch.jsonl").to_str().unwrap(),
            "--out",
            generated.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr_of(&output));
    generated
}

#[test]
fn evaluate_over_the_bundled_fixture_matches_the_golden_report() {
    let dir = tempfile::tempdir().unwrap();
    let generated = run_generate_batch(dir.path());
    let report_path = dir.path().join("report.json");
    let output = brandcap()
        .args([
            "evaluate",
            "--provider",
            "mock",
            "--seed",
            "7",
            "--inputs",
            generated.to_str().unwrap(),
            "--dataset",
            fixture("eval_posts.jsonl").to_str().unwrap(),
            "--model-label",
            "mock-chat",
            "--out",
            report_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr_of(&output));

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let golden: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("golden_eval_report.json")).unwrap())
            .unwrap();
    assert_eq!(report, golden);

    // the text table mirrors the report column order
    let table = std::fs::read_to_string(report_path.with_extension("txt")).unwrap();
    assert!(table.contains("Model"));
    assert!(table.contains("mock-chat"));
    assert!(table.contains("CLIPScore w/o Add. Info"));
}

#[test]
fn evaluate_skip_flags_null_out_their_columns() {
    let dir = tempfile::tempdir().unwrap();
    let generated = run_generate_batch(dir.path());
    let output = brandcap()
        .args([
            "evaluate",
            "--provider",
            "mock",
            "--seed",
            "7",
            "--inputs",
            generated.to_str().unwrap(),
            "--dataset",
            fixture("eval_posts.jsonl").to_str().unwrap(),
            "--skip-geval",
            "--skip-clipscore",
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr_of(&output));
    let stdout = stdout_of(&output);
    let json_part = stdout.split("\nModel").next().unwrap();
    let report: serde_json::Value = serde_json::from_str(json_part).unwrap();
    assert!(report["geval_accuracy"].is_null());
    assert!(report["geval_macro_f1"].is_null());
    assert!(report["clipscore"].is_null());
    assert!(report["cosine_similarity"].is_number());
    // mock echoes every attribute, so coverage is full where provided
    assert_eq!(report["coverage"]["hashtags"], 100.0);
    assert_eq!(report["coverage"]["usernames"], 100.0);
}
