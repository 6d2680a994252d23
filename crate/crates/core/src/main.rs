use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};
use log::{info, warn};

use mvpose::entropy::{top_n_views, EntropyMap};
use mvpose::error::{Error, Result};
use mvpose::fusion::FusionRule;
use mvpose::pipeline::evaluate::TimingSummary;
use mvpose::pipeline::heatmap::emit_heatmap;
use mvpose::pipeline::noise::noise_table_csv;
use mvpose::pipeline::recognize::{
    read_results, train_entropy_predictor, train_view_predictor, write_results,
};
use mvpose::pipeline::{
    build_dataset, evaluate, noise_sweep, run_recognition, BuildOptions, EntropySource, KnnDescriptor,
    Manifest, RecognitionOptions, ResultRow, Split, SweepOptions, DEFAULT_SIGMAS,
};
use mvpose::predict::exchange::{read_predictions, write_predictions, PredictionTable, ViewSource};
use mvpose::predict::{EntropyPredictor, KnnEntropyPredictor, KnnOptions};
use mvpose::synth::{primitive_set, write_model_tree};
use mvpose::viewrig::Rig;
use mvpose::voxel::{VoxelGrid, VoxelizeOptions};

const EXIT_INVALID: u8 = 1;
const EXIT_SKIPPED: u8 = 2;

/// Best-view object recognition and pose estimation.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Options,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Write a tree of randomized primitive meshes (box, cylinder, cone, pyramid, sphere).
    Synth,
    /// Normalize, voxelize and render every model under --input into --out.
    BuildDataset,
    /// Validate k-NN settings against a manifest and save them to --out.
    TrainKnn,
    /// Predict the entropy map of a voxel grid (--input) with a k-NN --model.
    PredictMap,
    /// List the best views (entropy-map peaks) of a map CSV.
    BestViews,
    /// Recognize the objects of a manifest and write a results CSV.
    Recognize,
    /// Score a results CSV against its --manifest.
    Evaluate,
    /// Re-run recognition on noisy copies of the test meshes.
    NoiseSweep,
    /// Render an entropy map CSV as a PGM heatmap.
    Heatmap,
}

/// Every flag can also be given as `name = value` in a --config file;
/// command-line values win.
#[derive(clap::Args, Debug, Default)]
struct Options {
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Fraction of each category to keep when building a dataset.
    #[arg(long, global = true)]
    subsample: Option<f64>,
    #[arg(long, global = true)]
    max_views: Option<usize>,
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// k-NN descriptor written by train-knn.
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Root of the category/split/*.off model tree.
    #[arg(long, global = true)]
    models: Option<PathBuf>,
    /// oracle (stored map) or knn (predicted from voxels).
    #[arg(long, global = true)]
    entropy: Option<String>,
    /// plurality or score-sum.
    #[arg(long, global = true)]
    rule: Option<String>,
    /// JSON-lines per-view predictions to use instead of the k-NN view model.
    #[arg(long, global = true)]
    predictions: Option<PathBuf>,
    #[arg(long, global = true)]
    export_predictions: Option<PathBuf>,
    /// train, test or all.
    #[arg(long, global = true)]
    split: Option<String>,
    /// Comma-separated noise levels.
    #[arg(long, global = true)]
    sigmas: Option<String>,
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Per-object timing CSV written by recognize.
    #[arg(long, global = true)]
    timing: Option<PathBuf>,
    #[arg(long, global = true)]
    per_category: Option<usize>,
    #[arg(long, global = true)]
    test_per_category: Option<usize>,
    /// Fill closed surfaces when voxelizing.
    #[arg(long, global = true)]
    solid: Option<bool>,
}

fn required<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument(format!("--{flag} is required")))
}

fn long_flags() -> BTreeSet<String> {
    Cli::command()
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .filter(|l| l != "config" && l != "help" && l != "version")
        .collect()
}

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        let a = a.to_string_lossy();
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Appends `--key value` for every config entry not already on the command line.
fn merge_config(mut argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    let known = long_flags();
    let given: BTreeSet<String> = argv
        .iter()
        .filter_map(|a| a.to_str()?.strip_prefix("--").map(|f| f.split('=').next().unwrap_or(f).to_string()))
        .collect();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Format {
            context: path.display().to_string(),
            line: i + 1,
            message: "expected key = value".into(),
        })?;
        let key = key.trim().replace('_', "-");
        if !known.contains(&key) {
            return Err(Error::Format {
                context: path.display().to_string(),
                line: i + 1,
                message: format!("unknown key {key:?}"),
            });
        }
        if !given.contains(&key) {
            argv.push(format!("--{key}").into());
            argv.push(value.trim().into());
        }
    }
    Ok(argv)
}

fn parse_split(s: Option<&str>) -> Result<Option<Split>> {
    match s.unwrap_or("test") {
        "all" => Ok(None),
        other => other.parse().map(Some),
    }
}

fn parse_rule(s: Option<&str>) -> Result<FusionRule> {
    match s.unwrap_or("plurality") {
        "plurality" => Ok(FusionRule::ArgmaxPlurality),
        "score-sum" => Ok(FusionRule::ScoreSum),
        other => Err(Error::InvalidArgument(format!("unknown fusion rule {other:?}"))),
    }
}

fn parse_sigmas(s: Option<&str>) -> Result<Vec<f64>> {
    let Some(s) = s else {
        return Ok(DEFAULT_SIGMAS.to_vec());
    };
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite() && *x >= 0.0)
                .ok_or_else(|| Error::InvalidArgument(format!("bad sigma {v:?}")))
        })
        .collect()
}

fn knn_options(o: &Options) -> KnnOptions {
    let d = KnnOptions::default();
    KnnOptions {
        k: o.k.unwrap_or(d.k),
        epsilon: o.epsilon.unwrap_or(d.epsilon),
    }
}

/// The descriptor from --model, or one built from the flags and `fallback`.
fn descriptor(o: &Options, fallback: &Path) -> Result<(KnnDescriptor, PathBuf)> {
    match &o.model {
        Some(path) => {
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            Ok((KnnDescriptor::read(path)?, base))
        }
        None => {
            let k = knn_options(o);
            let d = KnnDescriptor {
                manifest: fallback.to_path_buf(),
                k: k.k,
                epsilon: k.epsilon,
            };
            Ok((d, PathBuf::new()))
        }
    }
}

fn write_or_print(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io { path: p.clone(), source: e }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn voxel_options(o: &Options) -> VoxelizeOptions {
    VoxelizeOptions {
        solid: o.solid.unwrap_or(false),
        ..VoxelizeOptions::default()
    }
}

fn timing_path(results: &Path) -> PathBuf {
    results.with_extension("timing.csv")
}

/// Returns `true` when some inputs were skipped.
fn run(command: Command, o: &Options) -> Result<bool> {
    match command {
        Command::Synth => {
            let out = required(&o.out, "out")?;
            let per = o.per_category.unwrap_or(20);
            let test = o.test_per_category.unwrap_or(per / 4);
            if test > per {
                return Err(Error::InvalidArgument("--test-per-category exceeds --per-category".into()));
            }
            let models = primitive_set(per, test, o.seed.unwrap_or(0));
            write_model_tree(&models, out)?;
            info!("wrote {} models to {}", models.len(), out.display());
        }
        Command::BuildDataset => {
            let options = BuildOptions {
                workers: o.workers.unwrap_or_else(default_workers),
                subsample: o.subsample.unwrap_or(1.0),
                seed: o.seed.unwrap_or(0),
                voxel: voxel_options(o),
                ..BuildOptions::default()
            };
            let summary = build_dataset(required(&o.input, "input")?, required(&o.out, "out")?, &options)?;
            info!("{} records written", summary.manifest.records.len());
            for (path, reason) in &summary.skipped {
                warn!("skipped {}: {reason}", path.display());
            }
            if !summary.skipped.is_empty() {
                eprintln!("{} model(s) skipped", summary.skipped.len());
                return Ok(true);
            }
        }
        Command::TrainKnn => {
            let manifest_path = required(&o.input, "input")?;
            let out = required(&o.out, "out")?;
            let options = knn_options(o);
            options.check()?;
            let manifest = Manifest::read(manifest_path)?;
            let views = train_view_predictor(&manifest, options)?;
            let maps = train_entropy_predictor(&manifest, options)?;
            let d = KnnDescriptor {
                manifest: std::path::absolute(manifest_path)
                    .map_err(|e| Error::Io { path: manifest_path.clone(), source: e })?,
                k: options.k,
                epsilon: options.epsilon,
            };
            d.write(out)?;
            info!(
                "{} training views and {} training grids over {} categories",
                views.len(),
                maps.len(),
                views.categories().len()
            );
        }
        Command::PredictMap => {
            required(&o.model, "model")?;
            let (d, base) = descriptor(o, Path::new(""))?;
            let predictor = train_entropy_predictor(&d.load_manifest(&base)?, d.options())?;
            let grid = VoxelGrid::read(required(&o.input, "input")?)?;
            let map = predictor.predict_map(&grid)?;
            write_or_print(o.out.as_ref(), &map.to_csv())?;
        }
        Command::BestViews => {
            let map = EntropyMap::read_csv(required(&o.input, "input")?)?;
            let peaks = top_n_views(&map, o.max_views.unwrap_or(usize::MAX))?;
            let rig = Rig::default();
            let mut text = String::from("rank,view_index,ring,azimuth,phi,theta,entropy\n");
            for (rank, p) in peaks.iter().enumerate() {
                let v = rig.viewpoint(p.view_index())?;
                let _ = writeln!(
                    text,
                    "{},{},{},{},{},{},{:?}",
                    rank + 1,
                    p.view_index(),
                    p.ring,
                    p.azimuth,
                    v.phi(),
                    v.theta(),
                    p.value
                );
            }
            write_or_print(o.out.as_ref(), &text)?;
        }
        Command::Recognize => {
            let manifest_path = required(&o.input, "input")?;
            let out = required(&o.out, "out")?;
            let manifest = Manifest::read(manifest_path)?;
            let (d, base) = descriptor(o, manifest_path)?;
            let train = d.load_manifest(&base)?;
            let entropy_model: Option<KnnEntropyPredictor> = match o.entropy.as_deref().unwrap_or("oracle") {
                "oracle" => None,
                "knn" => Some(train_entropy_predictor(&train, d.options())?),
                other => return Err(Error::InvalidArgument(format!("unknown entropy source {other:?}"))),
            };
            let table;
            let view_model;
            let views = match &o.predictions {
                Some(p) => {
                    table = PredictionTable::new(read_predictions(p)?)?;
                    ViewSource::Table(&table)
                }
                None => {
                    view_model = train_view_predictor(&train, d.options())?;
                    ViewSource::Model(&view_model)
                }
            };
            let options = RecognitionOptions {
                entropy: match &entropy_model {
                    Some(m) => EntropySource::Model(m),
                    None => EntropySource::Oracle,
                },
                views,
                max_views: o.max_views,
                rule: parse_rule(o.rule.as_deref())?,
                rig: Rig::default(),
            };
            let outcomes = run_recognition(&manifest, parse_split(o.split.as_deref())?, &options)?;
            let rows: Vec<ResultRow> = outcomes.iter().map(ResultRow::from).collect();
            write_results(&rows, out)?;
            let mut timing = String::from("object_id,seconds\n");
            for r in &outcomes {
                let _ = writeln!(timing, "{},{:?}", r.object_id, r.seconds);
            }
            write_or_print(Some(&timing_path(out)), &timing)?;
            if let Some(p) = &o.export_predictions {
                let records: Vec<_> = outcomes.iter().flat_map(|r| r.predictions.clone()).collect();
                write_predictions(&records, p)?;
            }
            let correct = rows.iter().filter(|r| r.true_category == r.predicted_category).count();
            info!("{correct}/{} objects classified correctly", rows.len());
        }
        Command::Evaluate => {
            let rows = read_results(required(&o.input, "input")?)?;
            let manifest = Manifest::read(required(&o.manifest, "manifest")?)?;
            let mut report = evaluate(&rows, &manifest)?;
            let timing = o.timing.clone().or_else(|| {
                let p = timing_path(o.input.as_ref()?);
                p.exists().then_some(p)
            });
            if let Some(p) = timing {
                report.timing = TimingSummary::from_seconds(&read_timing(&p)?);
            }
            report.write(required(&o.out, "out")?)?;
            println!(
                "class accuracy {:.4}  pose accuracy {:.4}  mean views {:.2}",
                report.class_accuracy, report.pose_accuracy, report.mean_views
            );
        }
        Command::NoiseSweep => {
            let manifest_path = required(&o.input, "input")?;
            let manifest = Manifest::read(manifest_path)?;
            let (d, base) = descriptor(o, manifest_path)?;
            let train = d.load_manifest(&base)?;
            let view_model = train_view_predictor(&train, d.options())?;
            let entropy_model = match o.entropy.as_deref().unwrap_or("oracle") {
                "oracle" => None,
                "knn" => Some(train_entropy_predictor(&train, d.options())?),
                other => return Err(Error::InvalidArgument(format!("unknown entropy source {other:?}"))),
            };
            let options = SweepOptions {
                sigmas: parse_sigmas(o.sigmas.as_deref())?,
                seed: o.seed.unwrap_or(0),
                recognition: RecognitionOptions {
                    entropy: match &entropy_model {
                        Some(m) => EntropySource::Model(m),
                        None => EntropySource::Oracle,
                    },
                    views: ViewSource::Model(&view_model),
                    max_views: o.max_views,
                    rule: parse_rule(o.rule.as_deref())?,
                    rig: Rig::default(),
                },
                render: Default::default(),
                voxel: voxel_options(o),
            };
            let rows = noise_sweep(&manifest, required(&o.models, "models")?, &options)?;
            write_or_print(o.out.as_ref(), &noise_table_csv(&rows))?;
        }
        Command::Heatmap => {
            let map = EntropyMap::read_csv(required(&o.input, "input")?)?;
            let sidecar = emit_heatmap(&map, required(&o.out, "out")?)?;
            info!("raw values in {}", sidecar.display());
        }
    }
    Ok(false)
}

fn read_timing(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.rsplit(',').next().and_then(|s| s.parse().ok()).ok_or_else(|| Error::Format {
                context: "timing".into(),
                line: i + 1,
                message: format!("bad row {l:?}"),
            })
        })
        .collect()
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let argv = match merge_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INVALID) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.opts.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(EXIT_INVALID);
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli.command, &cli.opts) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(EXIT_SKIPPED),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}
