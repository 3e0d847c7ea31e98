//! End-to-end checks of the `ssae` binary: exit codes, file outputs,
//! edit scripts, and the machine-readable stdout contract.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ssae_cli::io;
use ssae_core::design::ConceptDictionary;
use ssae_core::model::{Activation, SsaeModel};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ssae"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn synth_world(dir: &Path, extra: &[&str]) {
    let mut args = vec![
        "synth",
        "--dim-n",
        "16",
        "--concepts-k",
        "4",
        "--latent-d",
        "2",
        "--samples",
        "40",
        "--seed",
        "7",
        "--quiet",
    ];
    args.extend_from_slice(extra);
    let out = run_in(dir, &args);
    assert_code(&out, 0);
}

#[test]
fn synth_writes_four_files_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let flags = [
        "synth", "--dim-n", "64", "--concepts-k", "8", "--latent-d", "4", "--samples", "200",
        "--noise", "0.01", "--holdout", "0:1", "--seed", "7", "--quiet",
    ];
    for sub in ["a", "b"] {
        let mut args = flags.to_vec();
        args.extend_from_slice(&["--out-dir", sub]);
        assert_code(&run_in(dir.path(), &args), 0);
    }
    for name in ["X.mat", "realizations.jsonl", "concepts.json", "truth.mat"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    // the held-out pair never co-occurs in the generated realizations
    let dict = io::read_concepts(&dir.path().join("a/concepts.json")).unwrap();
    let real = io::read_realizations(&dir.path().join("a/realizations.jsonl"), &dict).unwrap();
    assert!(ssae_core::design::check_composability(&real, 0, 1));
}

#[test]
fn synth_rejects_zero_samples_as_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["synth", "--samples", "0"]);
    assert_code(&out, 1);
}

#[test]
fn train_defaults_to_latent_d_ten_and_epochs_zero_keeps_init() {
    let dir = tempfile::tempdir().unwrap();
    synth_world(dir.path(), &[]);
    let out = run_in(
        dir.path(),
        &[
            "train",
            "--concepts",
            "concepts.json",
            "--realizations",
            "realizations.jsonl",
            "--embeddings",
            "X.mat",
            "--epochs",
            "0",
            "--seed",
            "3",
            "--quiet",
        ],
    );
    assert_code(&out, 0);
    let (model, dict) = io::load_checkpoint(&dir.path().join("model.ckpt")).unwrap();
    assert_eq!(model.design().subspace_dim(), 10);
    assert_eq!(dict.len(), 4);

    // matches a fresh init with the same seed and shape
    let cfg = ssae_core::model::TrainConfig {
        seed: 3,
        ..Default::default()
    };
    let fresh = SsaeModel::init(model.design(), 16, Activation::Relu, &cfg).unwrap();
    assert_eq!(model, fresh);
}

fn write_story_checkpoint(dir: &Path) -> PathBuf {
    // hand-named dictionary so edits can be scripted by name
    let names = vec![
        "brune hair".to_string(),
        "blond hair".to_string(),
        "blue eyes".to_string(),
        "gun".to_string(),
        "coffee".to_string(),
    ];
    let dict = ConceptDictionary::new(names).unwrap();
    let design = ssae_core::design::SparseDesign::new(3, 5).unwrap();
    let cfg = ssae_core::model::TrainConfig {
        seed: 11,
        ..Default::default()
    };
    let model = SsaeModel::init(design, 12, Activation::Relu, &cfg).unwrap();
    let path = dir.join("story.ckpt");
    io::save_checkpoint(&path, &model, &dict).unwrap();
    path
}

#[test]
fn compose_swaps_hair_color_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = write_story_checkpoint(dir.path());
    let out = run_in(
        dir.path(),
        &[
            "compose",
            "--model",
            ckpt.to_str().unwrap(),
            "--base",
            "brune hair,blue eyes",
            "--swap",
            "brune hair:blond hair",
            "--json",
        ],
    );
    assert_code(&out, 0);
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(
        summary["final_active"],
        serde_json::json!(["blond hair", "blue eyes"])
    );
    let prov: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("provenance.json")).unwrap())
            .unwrap();
    assert_eq!(prov["base"], serde_json::json!(["brune hair", "blue eyes"]));
    assert_eq!(prov["edits"][0]["op"], "swap");
}

#[test]
fn compose_remove_to_empty_set_decodes_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = write_story_checkpoint(dir.path());
    let out = run_in(
        dir.path(),
        &[
            "compose",
            "--model",
            ckpt.to_str().unwrap(),
            "--base",
            "gun",
            "--remove",
            "gun",
            "--quiet",
        ],
    );
    assert_code(&out, 0);
    let emb = io::read_matrix(&dir.path().join("embedding.mat")).unwrap();
    assert_eq!(emb.shape(), (12, 1));
    assert!(emb.data().iter().all(|&v| v == 0.0));
}

#[test]
fn compose_remove_insert_equals_swap_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = write_story_checkpoint(dir.path());
    let model = ckpt.to_str().unwrap();
    let a = run_in(
        dir.path(),
        &[
            "compose", "--model", model, "--base", "gun,coffee", "--swap", "gun:blue eyes",
            "--out", "a.mat", "--provenance", "a.json", "--quiet",
        ],
    );
    assert_code(&a, 0);
    let b = run_in(
        dir.path(),
        &[
            "compose", "--model", model, "--base", "gun,coffee", "--remove", "gun", "--insert",
            "blue eyes", "--out", "b.mat", "--provenance", "b.json", "--quiet",
        ],
    );
    assert_code(&b, 0);
    assert_eq!(
        std::fs::read(dir.path().join("a.mat")).unwrap(),
        std::fs::read(dir.path().join("b.mat")).unwrap()
    );
}

#[test]
fn compose_illegal_edit_names_the_step() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = write_story_checkpoint(dir.path());
    let out = run_in(
        dir.path(),
        &[
            "compose",
            "--model",
            ckpt.to_str().unwrap(),
            "--base",
            "gun",
            "--remove",
            "gun",
            "--remove",
            "gun",
        ],
    );
    assert_code(&out, 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("step 2"), "stderr: {stderr}");

    let out = run_in(
        dir.path(),
        &[
            "compose",
            "--model",
            ckpt.to_str().unwrap(),
            "--base",
            "purple hair",
        ],
    );
    assert_code(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("purple hair"));
}

#[test]
fn eval_without_truth_omits_recovery_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = write_story_checkpoint(dir.path());
    let out = run_in(
        dir.path(),
        &["eval", "--model", ckpt.to_str().unwrap(), "--quiet"],
    );
    assert_code(&out, 0);
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert!(report.get("recovery_errors").is_none());
    assert!(report.get("reconstruction").is_none());
    assert!(report.get("gram").is_some());
}

#[test]
fn eval_holdout_without_truth_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = write_story_checkpoint(dir.path());
    let out = run_in(
        dir.path(),
        &[
            "eval",
            "--model",
            ckpt.to_str().unwrap(),
            "--holdout",
            "0:1",
        ],
    );
    assert_code(&out, 1);
}

#[test]
fn gradcheck_exit_codes_cover_pass_truncation_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let pass = run_in(dir.path(), &["gradcheck", "--seed", "3", "--json"]);
    assert_code(&pass, 0);
    let summary: serde_json::Value = serde_json::from_slice(&pass.stdout).unwrap();
    assert_eq!(summary["passed"], true);

    // central differences carry irreducible roundoff; demanding 1e-12 at
    // h = 1e-6 must fail
    let truncation = run_in(
        dir.path(),
        &["gradcheck", "--seed", "3", "--tolerance", "1e-12", "--quiet"],
    );
    assert_code(&truncation, 3);

    let corrupt = run_in(
        dir.path(),
        &["gradcheck", "--seed", "3", "--corrupt", "1e-3", "--json"],
    );
    assert_code(&corrupt, 3);
    let summary: serde_json::Value = serde_json::from_slice(&corrupt.stdout).unwrap();
    assert_eq!(summary["worst"]["tensor"], "W2");
    assert_eq!(summary["worst"]["row"], 0);
    assert_eq!(summary["worst"]["col"], 0);
}

#[test]
fn json_mode_emits_valid_json_on_success_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["synth", "--dim-n", "8", "--concepts-k", "3", "--latent-d", "2", "--samples", "20", "--json"],
    );
    assert_code(&out, 0);
    let synth_summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(synth_summary["command"], "synth");
    assert_eq!(synth_summary["membership_full_rank"], true);

    let out = run_in(
        dir.path(),
        &[
            "train",
            "--concepts",
            "concepts.json",
            "--realizations",
            "realizations.jsonl",
            "--embeddings",
            "X.mat",
            "--latent-d",
            "2",
            "--epochs",
            "5",
            "--json",
        ],
    );
    assert_code(&out, 0);
    let train_summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(train_summary["duration_seconds"].is_number());

    let out = run_in(
        dir.path(),
        &["eval", "--model", "model.ckpt", "--truth", "truth.mat", "--json"],
    );
    assert_code(&out, 0);
    let eval_summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(eval_summary["max_recovery_error"].is_number());
}

#[test]
fn data_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("garbage.mat"), b"not a matrix").unwrap();
    std::fs::write(dir.path().join("concepts.json"), br#"["a","b"]"#).unwrap();
    std::fs::write(
        dir.path().join("real.jsonl"),
        "{\"id\":\"s0\",\"concepts\":[\"a\"]}\n",
    )
    .unwrap();
    let out = run_in(
        dir.path(),
        &[
            "train",
            "--concepts",
            "concepts.json",
            "--realizations",
            "real.jsonl",
            "--embeddings",
            "garbage.mat",
        ],
    );
    assert_code(&out, 2);
}

#[test]
fn trained_checkpoint_reproduces_identical_loss_after_reload() {
    let dir = tempfile::tempdir().unwrap();
    synth_world(dir.path(), &["--noise", "0.02"]);
    let out = run_in(
        dir.path(),
        &[
            "train",
            "--concepts",
            "concepts.json",
            "--realizations",
            "realizations.jsonl",
            "--embeddings",
            "X.mat",
            "--latent-d",
            "2",
            "--epochs",
            "50",
            "--lr",
            "1e-2",
            "--seed",
            "5",
            "--json",
        ],
    );
    assert_code(&out, 0);
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let reported = summary["final_loss"].as_f64().unwrap();

    let (model, dict) = io::load_checkpoint(&dir.path().join("model.ckpt")).unwrap();
    let x = io::read_matrix(&dir.path().join("X.mat")).unwrap();
    let real = io::read_realizations(&dir.path().join("realizations.jsonl"), &dict).unwrap();
    let recomputed = model.loss(&x, &real).unwrap();
    assert_eq!(recomputed, reported, "loss changed across checkpoint reload");
}
