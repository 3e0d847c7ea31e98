//! `ssae` — file-to-file pipeline for concept-supervised sparse
//! auto-encoders: generate a synthetic world, train, edit and decode
//! latent codes, evaluate, and gradient-check.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
//! failure. Every run with identical flags, inputs, and seed writes
//! byte-identical output files.

use std::path::PathBuf;
use std::time::Instant;

use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};
use serde_json::json;

use ssae_cli::io::{self, Dtype, IoError};
use ssae_cli::report::{
    DiagnosticsJson, EditJson, PairFlagJson, ProvenanceJson, TrainReportJson,
};
use ssae_core::compose::LatentCode;
use ssae_core::design::{check_composability, ConceptDictionary, SparseDesign};
use ssae_core::diagnostics::{diagnostics_report, gradcheck, GradCheckConfig};
use ssae_core::model::{Activation, Optimizer, SsaeModel, TrainConfig, TrainVariant};
use ssae_core::numerics::Matrix;
use ssae_core::synth::{generate, SynthSpec};

const EXIT_USAGE: i32 = 1;
const EXIT_DATA: i32 = 2;
const EXIT_NUMERICAL: i32 = 3;

struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

fn core_exit_code(e: &ssae_core::Error) -> i32 {
    use ssae_core::Error::*;
    match e {
        InvalidConfig { .. } => EXIT_USAGE,
        RankDeficient { .. }
        | NonFinite { .. }
        | NonFiniteTraining { .. }
        | KinkProximity { .. }
        | DegenerateSampler { .. }
        | RankGenerationFailed { .. } => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

impl From<ssae_core::Error> for CliError {
    fn from(e: ssae_core::Error) -> Self {
        CliError {
            code: core_exit_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        let code = match &e {
            IoError::Core(c) => core_exit_code(c),
            _ => EXIT_DATA,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

/// What a command hands back to `main` for printing.
struct CmdOutput {
    json: serde_json::Value,
    human: Vec<String>,
    exit_code: i32,
}

impl CmdOutput {
    fn ok(json: serde_json::Value, human: Vec<String>) -> Self {
        CmdOutput {
            json,
            human,
            exit_code: 0,
        }
    }
}

struct Ctx {
    seed: u64,
    quiet: bool,
    json: bool,
}

fn main() {
    let matches = match build_cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprintln!("{e}");
            std::process::exit(EXIT_USAGE);
        }
    };
    let ctx = Ctx {
        seed: *matches.get_one::<u64>("seed").unwrap(),
        quiet: matches.get_flag("quiet"),
        json: matches.get_flag("json"),
    };
    let result = match matches.subcommand() {
        Some(("synth", sub)) => cmd_synth(&ctx, sub),
        Some(("train", sub)) => cmd_train(&ctx, sub),
        Some(("compose", sub)) => cmd_compose(&ctx, sub),
        Some(("eval", sub)) => cmd_eval(&ctx, sub),
        Some(("gradcheck", sub)) => cmd_gradcheck(&ctx, sub),
        _ => unreachable!("subcommand is required"),
    };
    match result {
        Ok(out) => {
            if ctx.json {
                println!("{}", serde_json::to_string_pretty(&out.json).unwrap());
            } else if !ctx.quiet {
                for line in &out.human {
                    println!("{line}");
                }
            }
            std::process::exit(out.exit_code);
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            std::process::exit(e.code);
        }
    }
}

fn build_cli() -> Command {
    Command::new("ssae")
        .about("Concept-supervised sparse auto-encoder pipeline")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg(
            Arg::new("seed")
                .long("seed")
                .global(true)
                .value_parser(value_parser!(u64))
                .default_value("0")
                .help("Seed for every random choice in the invocation"),
        )
        .arg(
            Arg::new("quiet")
                .long("quiet")
                .global(true)
                .action(ArgAction::SetTrue)
                .help("Suppress the human-readable summary"),
        )
        .arg(
            Arg::new("json")
                .long("json")
                .global(true)
                .action(ArgAction::SetTrue)
                .help("Print a JSON summary to stdout instead of text"),
        )
        .subcommand(synth_cmd())
        .subcommand(train_cmd())
        .subcommand(compose_cmd())
        .subcommand(eval_cmd())
        .subcommand(gradcheck_cmd())
}

fn synth_cmd() -> Command {
    Command::new("synth")
        .about("Generate a synthetic world: concepts, realizations, embeddings, truth")
        .arg(arg_usize("dim-n", "64", "Embedding dimension N"))
        .arg(arg_usize("concepts-k", "8", "Concept count K"))
        .arg(arg_usize("latent-d", "4", "Latent sub-vector dimension d"))
        .arg(arg_usize("samples", "200", "Sample count n"))
        .arg(arg_f64("noise", "0.0", "Gaussian noise sigma per entry"))
        .arg(arg_usize("min-concepts", "1", "Minimum concepts per sample"))
        .arg(arg_usize("max-concepts", "3", "Maximum concepts per sample"))
        .arg(
            Arg::new("holdout")
                .long("holdout")
                .action(ArgAction::Append)
                .value_name("K1:K2")
                .help("Concept pair that must never co-occur (repeatable)"),
        )
        .arg(
            Arg::new("out-dir")
                .long("out-dir")
                .default_value(".")
                .value_parser(value_parser!(PathBuf))
                .help("Directory for X.mat, realizations.jsonl, concepts.json, truth.mat"),
        )
}

fn train_cmd() -> Command {
    Command::new("train")
        .about("Train a model on concepts + realizations + embeddings")
        .arg(arg_path("concepts", "Concept dictionary JSON").required(true))
        .arg(arg_path("realizations", "Realizations JSONL").required(true))
        .arg(arg_path("embeddings", "Embedding matrix X.mat").required(true))
        .arg(
            Arg::new("model")
                .long("model")
                .default_value("model.ckpt")
                .value_parser(value_parser!(PathBuf))
                .help("Checkpoint output path"),
        )
        .arg(
            Arg::new("report")
                .long("report")
                .default_value("report.json")
                .value_parser(value_parser!(PathBuf))
                .help("Training report output path"),
        )
        .arg(arg_usize("latent-d", "10", "Latent sub-vector dimension d"))
        .arg(arg_usize("epochs", "1000", "Training epochs"))
        .arg(
            Arg::new("batch-size")
                .long("batch-size")
                .value_parser(value_parser!(usize))
                .help("Mini-batch size (default: full batch)"),
        )
        .arg(arg_f64("lr", "0.001", "Learning rate"))
        .arg(
            Arg::new("optimizer")
                .long("optimizer")
                .default_value("adam")
                .value_parser(["adam", "sgd"]),
        )
        .arg(arg_f64("beta1", "0.9", "Adam first-moment decay"))
        .arg(arg_f64("beta2", "0.999", "Adam second-moment decay"))
        .arg(arg_f64("epsilon", "1e-8", "Adam denominator floor"))
        .arg(arg_f64("init-scale-w2", "1.0", "Decoder init scale"))
        .arg(arg_f64("init-scale-y", "1.0", "Tied-parameter init scale"))
        .arg(
            Arg::new("activation")
                .long("activation")
                .default_value("relu")
                .value_parser(["relu", "identity"]),
        )
        .arg(
            Arg::new("variant")
                .long("variant")
                .default_value("decoder-only")
                .value_parser(["decoder-only", "masked-encoder"]),
        )
}

fn compose_cmd() -> Command {
    Command::new("compose")
        .about("Edit a latent code (swap/remove/insert) and decode it to an embedding")
        .arg(arg_path("model", "Trained checkpoint").required(true))
        .arg(
            Arg::new("base")
                .long("base")
                .value_name("NAME,NAME,...")
                .help("Comma-separated concept names of the starting code (default: empty)"),
        )
        .arg(
            Arg::new("swap")
                .long("swap")
                .action(ArgAction::Append)
                .value_name("FROM:TO")
                .help("Swap one active concept for another (repeatable, applied in order)"),
        )
        .arg(
            Arg::new("remove")
                .long("remove")
                .action(ArgAction::Append)
                .value_name("NAME")
                .help("Remove an active concept (repeatable, applied in order)"),
        )
        .arg(
            Arg::new("insert")
                .long("insert")
                .action(ArgAction::Append)
                .value_name("NAME")
                .help("Insert an inactive concept (repeatable, applied in order)"),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .default_value("embedding.mat")
                .value_parser(value_parser!(PathBuf))
                .help("Decoded embedding output (N×1 matrix file)"),
        )
        .arg(
            Arg::new("provenance")
                .long("provenance")
                .default_value("provenance.json")
                .value_parser(value_parser!(PathBuf))
                .help("Provenance JSON output"),
        )
        .arg(
            Arg::new("realizations")
                .long("realizations")
                .value_parser(value_parser!(PathBuf))
                .help("Training realizations, to flag seen/unseen pairs in the provenance"),
        )
}

fn eval_cmd() -> Command {
    Command::new("eval")
        .about("Emit a diagnostics report for a checkpoint")
        .arg(arg_path("model", "Trained checkpoint").required(true))
        .arg(
            Arg::new("embeddings")
                .long("embeddings")
                .value_parser(value_parser!(PathBuf))
                .help("Embedding matrix, enables reconstruction errors"),
        )
        .arg(
            Arg::new("realizations")
                .long("realizations")
                .value_parser(value_parser!(PathBuf))
                .help("Realizations JSONL, enables reconstruction errors"),
        )
        .arg(
            Arg::new("truth")
                .long("truth")
                .value_parser(value_parser!(PathBuf))
                .help("Ground-truth concept matrix, enables recovery and holdout scoring"),
        )
        .arg(
            Arg::new("holdout")
                .long("holdout")
                .action(ArgAction::Append)
                .value_name("K1:K2")
                .help("Held-out pair to score against summed truth vectors (repeatable)"),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .default_value("report.json")
                .value_parser(value_parser!(PathBuf))
                .help("Report output path"),
        )
}

fn gradcheck_cmd() -> Command {
    Command::new("gradcheck")
        .about("Compare analytic gradients against central finite differences")
        .arg(
            Arg::new("model")
                .long("model")
                .value_parser(value_parser!(PathBuf))
                .help("Checkpoint to check (with --embeddings and --realizations)"),
        )
        .arg(
            Arg::new("embeddings")
                .long("embeddings")
                .value_parser(value_parser!(PathBuf)),
        )
        .arg(
            Arg::new("realizations")
                .long("realizations")
                .value_parser(value_parser!(PathBuf)),
        )
        .arg(arg_usize("dim-n", "5", "Embedding dimension of the built-in instance"))
        .arg(arg_usize("concepts-k", "3", "Concept count of the built-in instance"))
        .arg(arg_usize("latent-d", "2", "Latent dimension of the built-in instance"))
        .arg(arg_usize("samples", "8", "Sample count of the built-in instance"))
        .arg(arg_f64("noise", "0.05", "Noise sigma of the built-in instance"))
        .arg(
            Arg::new("activation")
                .long("activation")
                .default_value("relu")
                .value_parser(["relu", "identity"]),
        )
        .arg(
            Arg::new("variant")
                .long("variant")
                .default_value("decoder-only")
                .value_parser(["decoder-only", "masked-encoder"]),
        )
        .arg(arg_f64("step", "1e-6", "Central-difference step h"))
        .arg(arg_f64("tolerance", "1e-6", "Maximum allowed relative error"))
        .arg(arg_usize("max-coords", "10000", "Coordinate budget before subsampling"))
        .arg(
            Arg::new("corrupt")
                .long("corrupt")
                .value_parser(value_parser!(f64))
                .hide(true)
                .help("Debug: offset added to one analytic gradient entry"),
        )
}

fn arg_usize(name: &'static str, default: &'static str, help: &'static str) -> Arg {
    Arg::new(name)
        .long(name)
        .default_value(default)
        .value_parser(value_parser!(usize))
        .help(help)
}

fn arg_f64(name: &'static str, default: &'static str, help: &'static str) -> Arg {
    Arg::new(name)
        .long(name)
        .default_value(default)
        .value_parser(value_parser!(f64))
        .help(help)
}

fn arg_path(name: &'static str, help: &'static str) -> Arg {
    Arg::new(name)
        .long(name)
        .value_parser(value_parser!(PathBuf))
        .help(help)
}

fn write_json_file<T: serde::Serialize>(path: &PathBuf, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report serializes");
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn parse_pair(raw: &str) -> Result<(usize, usize), CliError> {
    let (a, b) = raw
        .split_once(':')
        .ok_or_else(|| CliError::usage(format!("holdout pair '{raw}' must look like K1:K2")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| CliError::usage(format!("holdout pair '{raw}' has a non-integer index")))
    };
    Ok((parse(a)?, parse(b)?))
}

fn pairs_from(matches: &ArgMatches) -> Result<Vec<(usize, usize)>, CliError> {
    matches
        .get_many::<String>("holdout")
        .unwrap_or_default()
        .map(|raw| parse_pair(raw))
        .collect()
}

fn cmd_synth(ctx: &Ctx, sub: &ArgMatches) -> Result<CmdOutput, CliError> {
    let spec = SynthSpec {
        n_embed: *sub.get_one("dim-n").unwrap(),
        concepts: *sub.get_one("concepts-k").unwrap(),
        subspace_dim: *sub.get_one("latent-d").unwrap(),
        samples: *sub.get_one("samples").unwrap(),
        noise_sigma: *sub.get_one("noise").unwrap(),
        min_concepts: *sub.get_one("min-concepts").unwrap(),
        max_concepts: *sub.get_one("max-concepts").unwrap(),
        holdout_pairs: pairs_from(sub)?,
        seed: ctx.seed,
    };
    let ds = generate(&spec)?;
    let dict = ConceptDictionary::new(
        (0..spec.concepts).map(|k| format!("concept-{k:02}")).collect(),
    )?;
    let out_dir: &PathBuf = sub.get_one("out-dir").unwrap();
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::data(format!("{}: {e}", out_dir.display())))?;
    let x_path = out_dir.join("X.mat");
    let real_path = out_dir.join("realizations.jsonl");
    let concepts_path = out_dir.join("concepts.json");
    let truth_path = out_dir.join("truth.mat");
    io::write_matrix(&x_path, &ds.x, Dtype::F64)?;
    io::write_realizations(&real_path, &ds.real, &dict)?;
    io::write_concepts(&concepts_path, &dict)?;
    io::write_matrix(&truth_path, &ds.truth, Dtype::F64)?;

    let counts: Vec<usize> = (0..spec.concepts)
        .map(|k| (0..ds.real.len()).filter(|&i| ds.real.contains(i, k)).count())
        .collect();
    let json = json!({
        "command": "synth",
        "seed": ctx.seed,
        "n_embed": spec.n_embed,
        "concepts": spec.concepts,
        "latent_d": spec.subspace_dim,
        "samples": spec.samples,
        "noise_sigma": spec.noise_sigma,
        "holdout_pairs": spec.holdout_pairs,
        "membership_full_rank": true,
        "concept_sample_counts": counts,
        "files": {
            "embeddings": x_path,
            "realizations": real_path,
            "concepts": concepts_path,
            "truth": truth_path,
        },
    });
    let human = vec![
        format!(
            "wrote {} ({}x{}), {}, {} ({} concepts), {} ({} samples)",
            x_path.display(),
            spec.n_embed,
            spec.samples,
            truth_path.display(),
            concepts_path.display(),
            spec.concepts,
            real_path.display(),
            spec.samples
        ),
        format!("membership matrix: full rank ({0}/{0})", spec.concepts),
        format!("samples per concept: {counts:?}"),
    ];
    Ok(CmdOutput::ok(json, human))
}

fn train_config_from(ctx: &Ctx, sub: &ArgMatches) -> TrainConfig {
    let optimizer = match sub.get_one::<String>("optimizer").unwrap().as_str() {
        "sgd" => Optimizer::Sgd,
        _ => Optimizer::Adam {
            beta1: *sub.get_one("beta1").unwrap(),
            beta2: *sub.get_one("beta2").unwrap(),
            epsilon: *sub.get_one("epsilon").unwrap(),
        },
    };
    let variant = match sub.get_one::<String>("variant").unwrap().as_str() {
        "masked-encoder" => TrainVariant::MaskedEncoder,
        _ => TrainVariant::DecoderOnly,
    };
    TrainConfig {
        epochs: *sub.get_one("epochs").unwrap(),
        batch_size: sub.get_one("batch-size").copied(),
        learning_rate: *sub.get_one("lr").unwrap(),
        optimizer,
        init_scale_w2: *sub.get_one("init-scale-w2").unwrap(),
        init_scale_y: *sub.get_one("init-scale-y").unwrap(),
        seed: ctx.seed,
        variant,
    }
}

fn activation_from(sub: &ArgMatches) -> Activation {
    match sub.get_one::<String>("activation").unwrap().as_str() {
        "identity" => Activation::Identity,
        _ => Activation::Relu,
    }
}

fn cmd_train(ctx: &Ctx, sub: &ArgMatches) -> Result<CmdOutput, CliError> {
    let dict = io::read_concepts(sub.get_one::<PathBuf>("concepts").unwrap())?;
    let real = io::read_realizations(sub.get_one::<PathBuf>("realizations").unwrap(), &dict)?;
    let x = io::read_matrix(sub.get_one::<PathBuf>("embeddings").unwrap())?;
    let d: usize = *sub.get_one("latent-d").unwrap();
    let design = SparseDesign::new(d, dict.len())?;
    let config = train_config_from(ctx, sub);
    let activation = activation_from(sub);

    let model = SsaeModel::init(design, x.rows(), activation, &config)?;
    let started = Instant::now();
    let (trained, report) = model.train(&x, &real, &config)?;
    let duration = started.elapsed().as_secs_f64();

    let model_path: &PathBuf = sub.get_one("model").unwrap();
    let report_path: &PathBuf = sub.get_one("report").unwrap();
    io::save_checkpoint(model_path, &trained, &dict)?;
    let config_echo = json!({
        "epochs": config.epochs,
        "batch_size": config.batch_size,
        "learning_rate": config.learning_rate,
        "optimizer": sub.get_one::<String>("optimizer").unwrap(),
        "init_scale_w2": config.init_scale_w2,
        "init_scale_y": config.init_scale_y,
        "seed": config.seed,
        "variant": sub.get_one::<String>("variant").unwrap(),
        "activation": activation.as_str(),
        "latent_d": d,
    });
    let report_json = TrainReportJson::new(
        config_echo,
        trained.n_embed(),
        real.len(),
        dict.len(),
        d,
        &report,
    );
    // the report file stays byte-identical across reruns; timing goes to
    // stdout only
    write_json_file(report_path, &report_json)?;

    let json = json!({
        "command": "train",
        "model": model_path,
        "report": report_path,
        "initial_loss": report_json.initial_loss,
        "final_loss": report_json.final_loss,
        "epochs": config.epochs,
        "duration_seconds": duration,
    });
    let human = vec![
        format!(
            "trained {} epochs in {duration:.2}s: loss {:.6e} -> {:.6e}",
            config.epochs, report_json.initial_loss, report_json.final_loss
        ),
        format!("wrote {} and {}", model_path.display(), report_path.display()),
    ];
    Ok(CmdOutput::ok(json, human))
}

enum Edit {
    Swap(String, String),
    Remove(String),
    Insert(String),
}

fn edit_name(edit: &Edit) -> String {
    match edit {
        Edit::Swap(a, b) => format!("swap {a}:{b}"),
        Edit::Remove(a) => format!("remove {a}"),
        Edit::Insert(a) => format!("insert {a}"),
    }
}

/// Rebuilds the edit sequence in command-line order from the three
/// repeatable flags.
fn edit_script(sub: &ArgMatches) -> Result<Vec<Edit>, CliError> {
    let mut steps: Vec<(usize, Edit)> = Vec::new();
    if let (Some(values), Some(indices)) = (sub.get_many::<String>("swap"), sub.indices_of("swap"))
    {
        for (v, i) in values.zip(indices) {
            let (from, to) = v
                .split_once(':')
                .ok_or_else(|| CliError::usage(format!("--swap '{v}' must look like FROM:TO")))?;
            steps.push((i, Edit::Swap(from.to_string(), to.to_string())));
        }
    }
    if let (Some(values), Some(indices)) =
        (sub.get_many::<String>("remove"), sub.indices_of("remove"))
    {
        for (v, i) in values.zip(indices) {
            steps.push((i, Edit::Remove(v.clone())));
        }
    }
    if let (Some(values), Some(indices)) =
        (sub.get_many::<String>("insert"), sub.indices_of("insert"))
    {
        for (v, i) in values.zip(indices) {
            steps.push((i, Edit::Insert(v.clone())));
        }
    }
    steps.sort_by_key(|(i, _)| *i);
    Ok(steps.into_iter().map(|(_, e)| e).collect())
}

fn cmd_compose(ctx: &Ctx, sub: &ArgMatches) -> Result<CmdOutput, CliError> {
    let (model, dict) = io::load_checkpoint(sub.get_one::<PathBuf>("model").unwrap())?;
    let resolve = |name: &str| -> Result<usize, CliError> {
        dict.index_of(name)
            .ok_or_else(|| CliError::data(format!("unknown concept name '{name}'")))
    };

    let mut base_names: Vec<String> = Vec::new();
    if let Some(raw) = sub.get_one::<String>("base") {
        for name in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            base_names.push(name.to_string());
        }
    }
    let base_set: Vec<usize> = base_names
        .iter()
        .map(|n| resolve(n))
        .collect::<Result<_, _>>()?;
    let mut code = LatentCode::from_set(&base_set, model.design())?;

    let edits = edit_script(sub)?;
    let mut edits_json = Vec::new();
    for (step, edit) in edits.iter().enumerate() {
        let applied = match edit {
            Edit::Swap(from, to) => {
                edits_json.push(EditJson {
                    op: "swap".into(),
                    from: Some(from.clone()),
                    to: Some(to.clone()),
                    concept: None,
                });
                code.swap(resolve(from)?, resolve(to)?)
            }
            Edit::Remove(name) => {
                edits_json.push(EditJson {
                    op: "remove".into(),
                    from: None,
                    to: None,
                    concept: Some(name.clone()),
                });
                code.remove(resolve(name)?)
            }
            Edit::Insert(name) => {
                edits_json.push(EditJson {
                    op: "insert".into(),
                    from: None,
                    to: None,
                    concept: Some(name.clone()),
                });
                code.insert(resolve(name)?)
            }
        };
        code = applied.map_err(|e| CliError {
            code: EXIT_DATA,
            message: format!("edit step {} ({}): {e}", step + 1, edit_name(edit)),
        })?;
    }

    let embedding = model.decode(&code)?;
    let out_path: &PathBuf = sub.get_one("out").unwrap();
    let emb_matrix = Matrix::from_vec(model.n_embed(), 1, embedding)?;
    io::write_matrix(out_path, &emb_matrix, Dtype::F64)?;

    let final_names: Vec<String> = code
        .active()
        .iter()
        .map(|&k| dict.name(k).unwrap().to_string())
        .collect();
    let pairs = match sub.get_one::<PathBuf>("realizations") {
        Some(path) => {
            let real = io::read_realizations(path, &dict)?;
            let mut flags = Vec::new();
            let active = code.active();
            for (i, &k1) in active.iter().enumerate() {
                for &k2 in &active[i + 1..] {
                    flags.push(PairFlagJson {
                        pair: [
                            dict.name(k1).unwrap().to_string(),
                            dict.name(k2).unwrap().to_string(),
                        ],
                        seen_in_training: !check_composability(&real, k1, k2),
                    });
                }
            }
            Some(flags)
        }
        None => None,
    };
    let provenance = ProvenanceJson {
        base: base_names,
        edits: edits_json,
        final_active: final_names.clone(),
        pairs,
    };
    let prov_path: &PathBuf = sub.get_one("provenance").unwrap();
    write_json_file(prov_path, &provenance)?;

    let json = json!({
        "command": "compose",
        "seed": ctx.seed,
        "final_active": final_names,
        "embedding": out_path,
        "provenance": prov_path,
    });
    let human = vec![
        format!("final active set: {{{}}}", final_names.join(", ")),
        format!("wrote {} and {}", out_path.display(), prov_path.display()),
    ];
    Ok(CmdOutput::ok(json, human))
}

fn cmd_eval(_ctx: &Ctx, sub: &ArgMatches) -> Result<CmdOutput, CliError> {
    let (model, dict) = io::load_checkpoint(sub.get_one::<PathBuf>("model").unwrap())?;
    let data = match (
        sub.get_one::<PathBuf>("embeddings"),
        sub.get_one::<PathBuf>("realizations"),
    ) {
        (Some(x_path), Some(r_path)) => {
            let x = io::read_matrix(x_path)?;
            let real = io::read_realizations(r_path, &dict)?;
            Some((x, real))
        }
        (None, None) => None,
        _ => {
            return Err(CliError::usage(
                "--embeddings and --realizations must be given together",
            ))
        }
    };
    let truth = sub
        .get_one::<PathBuf>("truth")
        .map(|p| io::read_matrix(p))
        .transpose()?;
    let holdout = pairs_from(sub)?;
    if !holdout.is_empty() && truth.is_none() {
        return Err(CliError::usage(
            "--holdout scoring needs --truth to compare against",
        ));
    }

    let report = diagnostics_report(
        &model,
        data.as_ref().map(|(x, r)| (x, r)),
        truth.as_ref(),
        &holdout,
    )?;
    let report_json = DiagnosticsJson::new(
        &report,
        &dict,
        model.n_embed(),
        model.design().subspace_dim(),
        data.is_some(),
        truth.is_some(),
    );
    let out_path: &PathBuf = sub.get_one("out").unwrap();
    write_json_file(out_path, &report_json)?;

    let fold_max = |acc: Option<f64>, v: f64| Some(acc.map_or(v, |a| a.max(v)));
    let mean_rmse = if report.per_sample_rmse.is_empty() {
        None
    } else {
        Some(report.per_sample_rmse.iter().sum::<f64>() / report.per_sample_rmse.len() as f64)
    };
    let max_recovery = report.recovery_errors.iter().copied().fold(None, fold_max);
    let max_holdout = report
        .holdout_scores
        .iter()
        .map(|s| s.relative_error)
        .fold(None, fold_max);
    let json = json!({
        "command": "eval",
        "report": out_path,
        "mean_per_sample_rmse": mean_rmse,
        "max_recovery_error": max_recovery,
        "max_holdout_error": max_holdout,
    });
    let mut human = vec![format!("wrote {}", out_path.display())];
    if let Some(m) = mean_rmse {
        human.push(format!("mean per-sample RMSE: {m:.6e}"));
    }
    if let Some(m) = max_recovery {
        human.push(format!("worst recovery relative error: {m:.6e}"));
    }
    if let Some(m) = max_holdout {
        human.push(format!("worst holdout relative error: {m:.6e}"));
    }
    Ok(CmdOutput::ok(json, human))
}

fn cmd_gradcheck(ctx: &Ctx, sub: &ArgMatches) -> Result<CmdOutput, CliError> {
    let (model, x, real) = match sub.get_one::<PathBuf>("model") {
        Some(model_path) => {
            let (x_path, r_path) = match (
                sub.get_one::<PathBuf>("embeddings"),
                sub.get_one::<PathBuf>("realizations"),
            ) {
                (Some(x), Some(r)) => (x, r),
                _ => {
                    return Err(CliError::usage(
                        "--model needs --embeddings and --realizations",
                    ))
                }
            };
            let (model, dict) = io::load_checkpoint(model_path)?;
            let x = io::read_matrix(x_path)?;
            let real = io::read_realizations(r_path, &dict)?;
            (model, x, real)
        }
        None => {
            let concepts: usize = *sub.get_one("concepts-k").unwrap();
            let spec = SynthSpec {
                n_embed: *sub.get_one("dim-n").unwrap(),
                concepts,
                subspace_dim: *sub.get_one("latent-d").unwrap(),
                samples: *sub.get_one("samples").unwrap(),
                noise_sigma: *sub.get_one("noise").unwrap(),
                min_concepts: 1,
                max_concepts: concepts.min(2),
                holdout_pairs: vec![],
                seed: ctx.seed,
            };
            let ds = generate(&spec)?;
            let variant = match sub.get_one::<String>("variant").unwrap().as_str() {
                "masked-encoder" => TrainVariant::MaskedEncoder,
                _ => TrainVariant::DecoderOnly,
            };
            let config = TrainConfig {
                seed: ctx.seed,
                variant,
                ..TrainConfig::default()
            };
            let model = SsaeModel::init(
                spec.design()?,
                spec.n_embed,
                activation_from(sub),
                &config,
            )?;
            (model, ds.x, ds.real)
        }
    };
    let cfg = GradCheckConfig {
        step: *sub.get_one("step").unwrap(),
        tolerance: *sub.get_one("tolerance").unwrap(),
        max_coords: *sub.get_one("max-coords").unwrap(),
        seed: ctx.seed,
        corrupt: sub.get_one("corrupt").copied(),
    };
    let report = gradcheck(&model, &x, &real, &cfg)?;
    let worst = report.worst.as_ref();
    let json = json!({
        "command": "gradcheck",
        "passed": report.passed,
        "max_rel_error": report.max_rel_error,
        "tolerance": report.tolerance,
        "coords_checked": report.coords_checked,
        "worst": worst.map(|w| json!({
            "tensor": w.tensor.as_str(),
            "row": w.row,
            "col": w.col,
            "analytic": w.analytic,
            "numeric": w.numeric,
        })),
    });
    let mut human = vec![format!(
        "{}: max relative error {:.3e} over {} coordinates (tolerance {:.1e})",
        if report.passed { "PASS" } else { "FAIL" },
        report.max_rel_error,
        report.coords_checked,
        report.tolerance
    )];
    if let Some(w) = worst {
        human.push(format!(
            "worst coordinate: {}[{},{}] analytic {:.9e} vs numeric {:.9e}",
            w.tensor.as_str(),
            w.row,
            w.col,
            w.analytic,
            w.numeric
        ));
    }
    Ok(CmdOutput {
        json,
        human,
        exit_code: if report.passed { 0 } else { EXIT_NUMERICAL },
    })
}
