//! `enprocell` command-line tool.
//!
//! Every setting is a `--key value` flag and a `key=value` config-file line;
//! see `enprocell <command> --help`. Exit status: 0 success, 2 usage error,
//! 1 runtime error (one line on stderr).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};
use enprocell::config::{MatrixFormat, Mode, RunConfig};
use enprocell::evaluation::{self, Protocol};
use enprocell::io::{self, input_digest, read_labels, summarize, write_dense, write_labels, write_mtx_dir};
use enprocell::report::{self, write_text};
use enprocell::{format, Error};
use enprocell_core::{ExpressionMatrix, LabeledDataset, TrainedPipeline};

/// Names the default output location is resolved against when `--out` is
/// not given.
const OUT_DIR_VAR: &str = "ENPROCELL_OUT_DIR";

const SETTINGS: &[(&str, &str)] = &[
    ("mode", "evaluation protocol: intra or inter"),
    ("ref-matrix", "reference expression matrix; repeat for several references"),
    ("ref-labels", "reference label table, one per --ref-matrix"),
    ("query", "query expression matrix"),
    ("query-labels", "query label table (truth labels, optional batch column)"),
    ("model", "trained pipeline file"),
    ("format", "matrix format: dense (CSV/TSV file) or mtx (MatrixMarket directory)"),
    ("orientation", "rows of a dense file: cells or genes"),
    ("delimiter", "dense and label file delimiter: comma or tab"),
    ("labels-header", "label tables start with a header row: on or off"),
    ("hvg", "number of highly variable genes"),
    ("pcs", "PCA components; a comma list for sweep; 0 = MDA only"),
    ("mda", "include the MDA block: on or off"),
    ("epsilon", "within-class scatter ridge, relative to its mean diagonal"),
    ("hidden", "hidden layer widths (e.g. 100,55,30) or network1..network6"),
    ("epochs", "maximum training epochs"),
    ("batch-size", "minibatch size"),
    ("lr", "Adam learning rate"),
    ("seed", "seed for network training and synthetic data"),
    ("val-frac", "validation share for early stopping"),
    ("patience", "epochs without validation improvement before stopping"),
    ("split-seed", "seed of the intra-dataset train/test split"),
    ("test-frac", "held-out share of each class in intra mode"),
    ("align-batches", "center batches in projected space: on or off"),
    ("probs", "add one probability column per class to predictions"),
    ("repeats", "timed prediction repeats for bench"),
    ("cells-per-class", "synth: cells in each class, comma list"),
    ("genes", "synth: number of genes"),
    ("separation", "synth: distance between class centroids in noise units"),
    ("informative", "synth: genes carrying the class signal"),
    ("sparsity", "synth: probability an entry is zeroed"),
    ("batch-offsets", "synth: per-batch shift along a random direction, comma list"),
    ("nuisance-genes", "synth: high-variance genes unrelated to class"),
    ("nuisance-factors", "synth: latent factors driving the nuisance genes"),
    ("nuisance-scale", "synth: standard deviation of nuisance genes"),
    ("baseline", "synth: expression level before noise, shifts and truncation at zero"),
    ("housekeeping-genes", "synth: trailing genes that carry most of each library"),
    ("housekeeping-level", "synth: expression level of housekeeping genes"),
];

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<enprocell_core::Error> for Failure {
    fn from(e: enprocell_core::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

fn cli() -> Command {
    let mut common: Vec<Arg> = vec![
        Arg::new("config").long("config").value_name("FILE").value_parser(clap::value_parser!(PathBuf))
            .help("key=value settings file; flags override it"),
        Arg::new("out").long("out").value_name("PATH").value_parser(clap::value_parser!(PathBuf))
            .help(format!("output file or directory (default under ${OUT_DIR_VAR} or the working directory)")),
    ];
    for &(key, help) in SETTINGS {
        let mut arg = Arg::new(key).long(key).value_name("VALUE").help(help);
        arg = match key {
            "ref-matrix" | "ref-labels" => arg.action(ArgAction::Append),
            "probs" => arg.num_args(0..=1).default_missing_value("on"),
            _ => arg,
        };
        common.push(arg);
    }
    // a repeated flag takes its last value; only the reference lists accumulate
    let sub = |name: &'static str, about: &'static str| {
        Command::new(name).about(about).args(common.clone()).args_override_self(true)
    };
    Command::new("enprocell")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Cell-type classification with an ensemble of PCA and MDA projections")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(
            sub("train", "fit a pipeline on reference data").args([
                Arg::new("loss-csv").long("loss-csv").value_name("FILE").value_parser(clap::value_parser!(PathBuf))
                    .help("per-epoch loss table (default: <out>.loss.csv)"),
                Arg::new("spectra").long("spectra").value_name("FILE").value_parser(clap::value_parser!(PathBuf))
                    .help("also write PCA/MDA eigenvalue spectra"),
            ]),
        )
        .subcommand(sub("predict", "label query cells with a trained pipeline"))
        .subcommand(sub("evaluate", "run the intra- or inter-dataset protocol"))
        .subcommand(
            sub("sweep", "repeat a protocol over a grid of PCA component counts").arg(
                Arg::new("jobs").long("jobs").value_name("N").value_parser(clap::value_parser!(usize))
                    .help("grid points run in parallel"),
            ),
        )
        .subcommand(sub("bench", "time prediction on a query"))
        .subcommand(sub("synth", "write a synthetic labeled dataset"))
}

/// Defaults, then `--config`, then flags.
fn effective_config(m: &ArgMatches) -> Outcome<RunConfig> {
    let mut config = RunConfig::default();
    if let Some(path) = m.get_one::<PathBuf>("config") {
        config.apply_file(path).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    for &(key, _) in SETTINGS {
        if let Some(values) = m.get_many::<String>(key) {
            let joined = values.cloned().collect::<Vec<_>>().join(",");
            config.set(key, &joined).map_err(|e| Failure::Usage(e.to_string()))?;
        }
    }
    Ok(config)
}

fn require<T>(value: Option<T>, flag: &str) -> Outcome<T> {
    value.ok_or_else(|| Failure::Usage(format!("missing required --{flag}")))
}

fn out_path(m: &ArgMatches, default_name: &str) -> PathBuf {
    if let Some(p) = m.get_one::<PathBuf>("out") {
        return p.clone();
    }
    let base = std::env::var_os(OUT_DIR_VAR).map(PathBuf::from).unwrap_or_default();
    base.join(default_name)
}

fn read_matrix(path: &Path, config: &RunConfig) -> Outcome<ExpressionMatrix> {
    Ok(match config.format {
        MatrixFormat::Dense => io::read_dense(path, config.orientation, config.delimiter)?,
        MatrixFormat::Mtx => io::read_mtx_dir(path)?,
    })
}

fn read_dataset(matrix: &str, labels: &str, config: &RunConfig) -> Outcome<LabeledDataset> {
    let m = read_matrix(Path::new(matrix), config)?;
    let (dataset, _warnings) = read_labels(Path::new(labels), m, config.label_options())?;
    log::info!("{labels}: {} cells ({})", dataset.n_cells(), summarize(&dataset));
    Ok(dataset)
}

fn references(config: &RunConfig) -> Outcome<Vec<LabeledDataset>> {
    if config.ref_matrix.is_empty() {
        return Err(Failure::Usage("missing required --ref-matrix".into()));
    }
    if config.ref_labels.is_empty() {
        return Err(Failure::Usage("missing required --ref-labels".into()));
    }
    if config.ref_matrix.len() != config.ref_labels.len() {
        return Err(Failure::Usage(format!(
            "{} --ref-matrix values but {} --ref-labels values",
            config.ref_matrix.len(),
            config.ref_labels.len()
        )));
    }
    config
        .ref_matrix
        .iter()
        .zip(&config.ref_labels)
        .map(|(m, l)| read_dataset(m, l, config))
        .collect()
}

/// The query matrix, its truth labels and batch ids when a label table is
/// given, and the batch ids to align with (a single shared batch when
/// alignment is on and the table has no batch column).
fn query(config: &RunConfig) -> Outcome<(ExpressionMatrix, Option<LabeledDataset>, Option<Vec<String>>)> {
    let path = require(config.query.as_deref(), "query")?;
    let matrix = read_matrix(Path::new(path), config)?;
    let labeled = match &config.query_labels {
        Some(l) => Some(read_labels(Path::new(l), matrix.clone(), config.label_options())?.0),
        None => None,
    };
    // labels drop cells the table does not mention, so predict on its matrix
    let matrix = labeled.as_ref().map(|d| d.matrix.clone()).unwrap_or(matrix);
    let batch = config.align_batches.then(|| {
        labeled
            .as_ref()
            .and_then(|d| d.batch.clone())
            .unwrap_or_else(|| vec![String::new(); matrix.n_cells()])
    });
    Ok((matrix, labeled, batch))
}

fn protocol(config: &RunConfig) -> Outcome<Protocol> {
    let refs = references(config)?;
    Ok(match config.mode {
        Mode::Intra => {
            let [dataset] = <[LabeledDataset; 1]>::try_from(refs)
                .map_err(|_| Failure::Usage("intra mode takes exactly one reference".into()))?;
            Protocol::Intra {
                dataset,
                test_fraction: config.test_frac,
                split_seed: config.split_seed,
            }
        }
        Mode::Inter => {
            let q = require(config.query.as_deref(), "query")?;
            let l = require(config.query_labels.as_deref(), "query-labels")?;
            Protocol::Inter {
                references: refs,
                query: read_dataset(q, l, config)?,
            }
        }
    })
}

fn cmd_train(m: &ArgMatches, config: &RunConfig) -> Outcome {
    let pipeline_config = config.pipeline_config().map_err(|e| Failure::Usage(e.to_string()))?;
    let mut refs = references(config)?;
    let dataset = if refs.len() == 1 {
        refs.remove(0)
    } else {
        evaluation::stack_references(&refs)?
    };
    let mut pipeline = TrainedPipeline::fit(&dataset, &pipeline_config)?;
    for (i, (mp, lp)) in config.ref_matrix.iter().zip(&config.ref_labels).enumerate() {
        pipeline.meta.fingerprints.push((format!("ref-matrix.{i}"), input_digest(Path::new(mp))?));
        pipeline.meta.fingerprints.push((format!("ref-labels.{i}"), input_digest(Path::new(lp))?));
    }
    let out = out_path(m, "pipeline.enpc");
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::Io { path: parent.into(), source: e })?;
    }
    format::save_pipeline(&pipeline, &out)?;
    let loss = m
        .get_one::<PathBuf>("loss-csv")
        .cloned()
        .unwrap_or_else(|| PathBuf::from(format!("{}.loss.csv", out.display())));
    write_text(&loss, &report::loss_csv(&pipeline.meta.history, config)?)?;
    if let Some(path) = m.get_one::<PathBuf>("spectra") {
        write_text(path, &report::spectra_csv(&pipeline.basis, config)?)?;
    }
    log::info!(
        "trained on {} cells; best epoch {}; wrote {}",
        pipeline.meta.n_train_cells,
        pipeline.meta.best_epoch,
        out.display()
    );
    Ok(())
}

fn load_model(config: &RunConfig) -> Outcome<TrainedPipeline> {
    let path = require(config.model.as_deref(), "model")?;
    Ok(format::load_pipeline(Path::new(path))?)
}

fn cmd_predict(m: &ArgMatches, config: &RunConfig) -> Outcome {
    let pipeline = load_model(config)?;
    let (matrix, labeled, batch) = query(config)?;
    let prediction = pipeline.predict(&matrix, batch.as_deref())?;
    if let Some(d) = &labeled {
        let r = enprocell_core::metrics::score(&d.labels, &prediction.labels)?;
        log::info!("accuracy {:.4}, macro_f1 {:.4}", r.accuracy, r.macro_f1);
    }
    let text = report::predictions_csv(matrix.cell_ids(), &prediction, &pipeline.model.label_dict, config.probs, config)?;
    write_text(&out_path(m, "predictions.csv"), &text)?;
    Ok(())
}

fn cmd_evaluate(m: &ArgMatches, config: &RunConfig) -> Outcome {
    let outcome = protocol(config)?.run(&config.pipeline_config().map_err(|e| Failure::Usage(e.to_string()))?)?;
    report::write_report_dir(&out_path(m, "report"), &outcome.report, config)?;
    println!("accuracy {:.4}  macro_f1 {:.4}", outcome.report.accuracy, outcome.report.macro_f1);
    Ok(())
}

fn cmd_sweep(m: &ArgMatches, config: &RunConfig) -> Outcome {
    let jobs = m.get_one::<usize>("jobs").copied().unwrap_or(1);
    let result = evaluation::sweep_components(&protocol(config)?, &config.pipeline_config_with(0), &config.pcs, jobs)?;
    write_text(&out_path(m, "sweep.csv"), &report::sweep_csv(&result, config)?)?;
    Ok(())
}

fn cmd_bench(m: &ArgMatches, config: &RunConfig) -> Outcome {
    let pipeline = load_model(config)?;
    let (matrix, _, batch) = query(config)?;
    let timing = evaluation::time_predict(&pipeline, &matrix, batch.as_deref(), config.repeats)?;
    write_text(&out_path(m, "bench.csv"), &report::bench_csv(&timing, matrix.n_cells(), config)?)?;
    println!("median {:.6} s over {} repeats", timing.median, config.repeats);
    Ok(())
}

fn cmd_synth(m: &ArgMatches, config: &RunConfig) -> Outcome {
    let dataset = config.synth_spec().generate()?;
    let dir = out_path(m, "synth");
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
    match config.format {
        MatrixFormat::Dense => {
            let ext = match config.delimiter {
                io::Delimiter::Comma => "csv",
                io::Delimiter::Tab => "tsv",
            };
            write_dense(&dataset.matrix, &dir.join(format!("matrix.{ext}")), config.orientation, config.delimiter)?
        }
        MatrixFormat::Mtx => write_mtx_dir(&dataset.matrix, &dir.join("matrix"))?,
    }
    write_labels(&dataset, &dir.join("labels.csv"))?;
    write_text(&dir.join("config.txt"), &config.header())?;
    Ok(())
}

fn run(matches: &ArgMatches) -> Outcome {
    let (name, m) = matches.subcommand().expect("subcommand required");
    let config = effective_config(m)?;
    match name {
        "train" => cmd_train(m, &config),
        "predict" => cmd_predict(m, &config),
        "evaluate" => cmd_evaluate(m, &config),
        "sweep" => cmd_sweep(m, &config),
        "bench" => cmd_bench(m, &config),
        "synth" => cmd_synth(m, &config),
        _ => unreachable!("clap rejects unknown subcommands"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = cli().get_matches();
    match run(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run `enprocell --help` for usage");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
