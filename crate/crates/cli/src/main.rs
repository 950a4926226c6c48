//! `leafpipe`: command-line front end for the rice leaf disease pipelines.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use leafpipe::augment::augment_class;
use leafpipe::dimred::{self, AeTrainConfig};
use leafpipe::elm::{elm_train, ElmConfig, ElmModel, TrainingMode};
use leafpipe::eval::{confusion, metrics, render_csv, render_table, run_experiment, ExperimentReport, ExperimentRow};
use leafpipe::features::{canonical_names, FeatureSubset};
use leafpipe::featselect::{self, SelectMethod};
use leafpipe::imgcore::ImageRgb;
use leafpipe::matrix::{FeatureMatrix, Standardizer};
use leafpipe::pipeline::persist::{self, FeaturesMeta, FEATURES_SCHEMA_VERSION};
use leafpipe::pipeline::{ingest, load_working, process_dataset, synth_generate, PipelineConfig};
use leafpipe::segment::{overlay, segment_leaf};
use leafpipe::{Error, Result};

#[derive(Parser)]
#[command(name = "leafpipe", version, about = "Rice leaf disease detection: direct pixel and feature-analysis ELM pipelines")]
struct Cli {
    /// TOML configuration file (defaults apply to anything omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "LEAFPIPE_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a procedural six-class leaf dataset with lesion masks.
    SynthData(SynthArgs),
    /// List the classes and sample counts of a dataset directory.
    Ingest(DataArgs),
    /// Balance every class to the configured target with flips, rotations and scaling.
    Augment(AugmentArgs),
    /// Write lesion masks and overlays.
    Segment(DataArgs),
    /// Extract the 252-feature matrix to CSV.
    Extract(DataArgs),
    /// Fit a dimensionality reduction on a feature file and write the reduced matrix.
    Reduce(ReduceArgs),
    /// Score features and keep the top k.
    Select(SelectArgs),
    /// Train an ELM on a canonical feature file.
    Train(TrainArgs),
    /// Evaluate a trained model on a feature file.
    Eval(EvalArgs),
    /// Run the cross-validated experiment matrix.
    RunExperiment(ExperimentArgs),
    /// Render the table of a saved experiment report.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    separability: Option<f64>,
    #[arg(long)]
    size: Option<usize>,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset root holding one subdirectory per class.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long)]
    data: PathBuf,
    /// Images per class after augmentation.
    #[arg(long)]
    target: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReduceMethod {
    Pca,
    Kpca,
    SparseAe,
    StackedAe,
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long, value_enum)]
    method: ReduceMethod,
    /// Output dimension (defaults: 70, 65, 60, 126).
    #[arg(long)]
    components: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectArg {
    Anova,
    ChiSquare,
    Rf,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long, value_enum)]
    method: SelectArg,
    /// Features to keep (defaults: 50, 40, 35).
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SubsetArg {
    Texture,
    Glcm,
    Gldm,
    Fft,
    Dwt,
    All,
    Frequency,
    Spatial,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    ClosedForm,
    Iterative,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    subset: SubsetArg,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    features: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Image dataset root (enables the DICDM row).
    #[arg(long, conflicts_with = "features", required_unless_present = "features")]
    data: Option<PathBuf>,
    /// Precomputed canonical feature CSV.
    #[arg(long)]
    features: Option<PathBuf>,
    /// `all` or a comma-separated list such as `KPCA,PCA,Anova`.
    #[arg(long, default_value = "all")]
    rows: String,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Args)]
struct ReportArgs {
    /// `report.json` written by run-experiment.
    #[arg(long)]
    input: PathBuf,
    /// Emit CSV instead of the text table.
    #[arg(long)]
    csv: bool,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    Ok(match cli.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn require_out(cli: &Cli) -> Result<&Path> {
    cli.out.as_deref().ok_or_else(|| Error::Argument("this subcommand needs --out".into()))
}

fn create_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::Io {
        path: p.to_path_buf(),
        source: e,
    })
}

fn write(p: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    std::fs::write(p, contents).map_err(|e| Error::Io {
        path: p.to_path_buf(),
        source: e,
    })
}

fn json<T: serde::Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| Error::Serde(e.to_string()))
}

/// Writes to `--out` when given, stdout otherwise.
fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn class_names_for(path: &Path, m: &FeatureMatrix) -> Vec<String> {
    match persist::load_meta(path) {
        Ok(meta) => meta.class_names,
        Err(_) => (0..m.n_classes()).map(|c| format!("class{c}")).collect(),
    }
}

fn save_matrix(m: &FeatureMatrix, out: &Path, cfg: &PipelineConfig, class_names: Vec<String>) -> Result<()> {
    if let Some(parent) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    persist::save_features(m, out)?;
    persist::save_meta(
        &FeaturesMeta {
            schema_version: FEATURES_SCHEMA_VERSION,
            config_hash: cfg.hash(),
            class_names,
            rows: m.rows(),
            cols: m.cols(),
            segmentation_fallbacks: Vec::new(),
            degenerate_texture: Vec::new(),
        },
        out,
    )
}

fn mode(arg: Option<ModeArg>, cfg: &PipelineConfig) -> TrainingMode {
    match arg {
        Some(ModeArg::ClosedForm) => TrainingMode::ClosedForm,
        Some(ModeArg::Iterative) => TrainingMode::Iterative,
        None => cfg.experiment.elm_mode,
    }
}

fn subset(s: SubsetArg) -> FeatureSubset {
    match s {
        SubsetArg::Texture => FeatureSubset::Texture,
        SubsetArg::Glcm => FeatureSubset::Glcm,
        SubsetArg::Gldm => FeatureSubset::Gldm,
        SubsetArg::Fft => FeatureSubset::Fft,
        SubsetArg::Dwt => FeatureSubset::Dwt,
        SubsetArg::All => FeatureSubset::All,
        SubsetArg::Frequency => FeatureSubset::Frequency,
        SubsetArg::Spatial => FeatureSubset::Spatial,
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::SynthData(a) => {
            let mut synth = cfg.synth;
            synth.per_class = a.per_class.unwrap_or(synth.per_class);
            synth.separability = a.separability.unwrap_or(synth.separability);
            synth.size = a.size.unwrap_or(synth.size);
            let m = synth_generate(&synth, cfg.seed, require_out(cli)?)?;
            println!("{} images in {} classes under {}", m.total(), m.classes.len(), m.root.display());
        }
        Command::Ingest(a) => emit(cli, &json(&ingest(&a.data)?)?)?,
        Command::Augment(a) => {
            let out = require_out(cli)?;
            let manifest = ingest(&a.data)?;
            let mut spec = cfg.augment.clone();
            spec.target_per_class = a.target.unwrap_or(spec.target_per_class);
            for (c, files) in manifest.samples.iter().enumerate() {
                let images = files.iter().map(|p| leafpipe::imgcore::decode_image(p)).collect::<Result<Vec<ImageRgb>>>()?;
                let dir = out.join(&manifest.classes[c]);
                create_dir(&dir)?;
                for (i, img) in augment_class(&images, &spec, c)?.iter().enumerate() {
                    img.save_png(&dir.join(format!("{:05}.png", i)))?;
                }
            }
            println!("augmented {} classes to {} images each", manifest.classes.len(), spec.target_per_class);
        }
        Command::Segment(a) => {
            let out = require_out(cli)?;
            let manifest = ingest(&a.data)?;
            for (label, path) in manifest.entries() {
                let img = load_working(path, cfg.image_size)?;
                let seg = segment_leaf(&img, &cfg.ahe)?;
                let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let dir = out.join(&manifest.classes[label]);
                create_dir(&dir)?;
                let mask = ImageRgb::from_fn(seg.width(), seg.height(), |x, y| if seg.mask.get(x, y) { [255; 3] } else { [0; 3] });
                mask.save_png(&dir.join(format!("{stem}_mask.png")))?;
                overlay(&img, &seg.mask).save_png(&dir.join(format!("{stem}_overlay.png")))?;
                if seg.fallback {
                    log::warn!("{}: lesion coverage out of range, used the whole image", path.display());
                }
            }
        }
        Command::Extract(a) => {
            let out = require_out(cli)?;
            let manifest = ingest(&a.data)?;
            let data = process_dataset(&manifest, &cfg, false)?;
            if let Some(parent) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                create_dir(parent)?;
            }
            persist::save_features(&data.features, out)?;
            persist::save_meta(
                &FeaturesMeta {
                    schema_version: FEATURES_SCHEMA_VERSION,
                    config_hash: cfg.hash(),
                    class_names: data.class_names.clone(),
                    rows: data.features.rows(),
                    cols: data.features.cols(),
                    segmentation_fallbacks: data.segmentation_fallbacks,
                    degenerate_texture: data.degenerate_texture,
                },
                out,
            )?;
        }
        Command::Reduce(a) => {
            let m = persist::load_features(&a.features)?;
            let classes = class_names_for(&a.features, &m);
            let z = Standardizer::fit(&m)?.apply(&m)?;
            let e = &cfg.experiment;
            let ae = AeTrainConfig {
                seed: cfg.seed,
                ..e.autoencoder
            };
            let reduced = match a.method {
                ReduceMethod::Pca => dimred::pca_transform(&dimred::pca_fit(&z, a.components.unwrap_or(e.pca_components))?, &z)?,
                ReduceMethod::Kpca => dimred::kpca_transform(&dimred::kpca_fit(&z, a.components.unwrap_or(e.kpca_components), e.kpca_gamma)?, &z)?,
                ReduceMethod::SparseAe => {
                    let model = dimred::sparse_ae_fit(&z, a.components.unwrap_or(e.sparse_ae_bottleneck), e.sparsity, &ae)?;
                    dimred::ae_encode(&model, &z)?
                }
                ReduceMethod::StackedAe => {
                    let model = dimred::stacked_ae_fit(&z, a.components.unwrap_or(e.stacked_ae_bottleneck), e.stacked_ae_hidden, &ae)?;
                    dimred::ae_encode(&model, &z)?
                }
            };
            save_matrix(&reduced, require_out(cli)?, &cfg, classes)?;
        }
        Command::Select(a) => {
            let m = persist::load_features(&a.features)?;
            let classes = class_names_for(&a.features, &m);
            let z = Standardizer::fit(&m)?.apply(&m)?;
            let e = &cfg.experiment;
            let (method, k) = match a.method {
                SelectArg::Anova => (SelectMethod::AnovaF, a.k.unwrap_or(e.anova_k)),
                SelectArg::ChiSquare => (SelectMethod::ChiSquare, a.k.unwrap_or(e.chi_square_k)),
                SelectArg::Rf => (SelectMethod::RandomForest, a.k.unwrap_or(e.rf_k)),
            };
            let model = featselect::fit_selector(&z, method, k, &e.forest, cfg.seed)?;
            save_matrix(&featselect::select(&m, &model)?, require_out(cli)?, &cfg, classes)?;
        }
        Command::Train(a) => {
            let m = persist::load_features_with_names(&a.features, canonical_names())?;
            let classes = class_names_for(&a.features, &m);
            let m = m.select_cols(&subset(a.subset).range().collect::<Vec<_>>());
            let s = Standardizer::fit(&m)?;
            let z = s.apply(&m)?;
            let elm_cfg = ElmConfig {
                mode: mode(a.mode, &cfg),
                ridge: cfg.experiment.ridge,
                iterative: cfg.experiment.iterative,
                ..ElmConfig::fadm(z.cols(), cfg.seed)
            };
            let mut model = elm_train(&z, &classes, &elm_cfg)?;
            model.standardizer = Some(s);
            model.config_hash = Some(cfg.hash());
            model.save(require_out(cli)?)?;
        }
        Command::Eval(a) => {
            let model = ElmModel::load(&a.model)?;
            let m = persist::load_features(&a.features)?;
            let cols = model
                .input_names
                .iter()
                .map(|n| m.names.iter().position(|x| x == n).ok_or_else(|| Error::DictionaryMismatch(format!("feature {n:?} missing from {}", a.features.display()))))
                .collect::<Result<Vec<_>>>()?;
            let x = m.select_cols(&cols);
            let x = match &model.standardizer {
                Some(s) => s.apply(&x)?,
                None => x,
            };
            let pred = model.predict(&x)?;
            let cm = confusion(&m.labels, &pred, model.n_classes())?;
            let report = serde_json::json!({
                "schema_version": FEATURES_SCHEMA_VERSION,
                "config_hash": cfg.hash(),
                "model": a.model,
                "samples": m.rows(),
                "confusion": cm,
                "metrics": metrics(&cm),
            });
            emit(cli, &json(&report)?)?;
        }
        Command::RunExperiment(a) => {
            let out = require_out(cli)?;
            let rows = ExperimentRow::parse_list(&a.rows)?;
            let mut cfg = cfg.clone();
            cfg.experiment.folds = a.folds.unwrap_or(cfg.experiment.folds);
            cfg.experiment.elm_mode = mode(a.mode, &cfg);
            let data = match (&a.data, &a.features) {
                (Some(dir), _) => process_dataset(&ingest(dir)?, &cfg, rows.contains(&ExperimentRow::Dicdm))?.experiment_data(),
                (None, Some(f)) => {
                    let m = persist::load_features_with_names(f, canonical_names())?;
                    leafpipe::eval::ExperimentData {
                        class_names: class_names_for(f, &m),
                        features: m,
                        pixels: None,
                        pixel_size: format!("{0}x{0}", cfg.dicdm_size),
                    }
                }
                (None, None) => return Err(Error::Argument("run-experiment needs --data or --features".into())),
            };
            let (mut report, audit) = run_experiment(&data, &rows, &cfg.experiment)?;
            report.config_hash = cfg.hash();
            create_dir(out)?;
            write(&out.join("report.json"), report.to_json()?)?;
            write(&out.join("table.txt"), render_table(&report))?;
            write(&out.join("table.csv"), render_csv(&report))?;
            write(&out.join("audit.json"), json(&audit)?)?;
            print!("{}", render_table(&report));
        }
        Command::Report(a) => {
            let text = std::fs::read_to_string(&a.input).map_err(|e| Error::Io {
                path: a.input.clone(),
                source: e,
            })?;
            let report = ExperimentReport::from_json(&text)?;
            emit(cli, &if a.csv { render_csv(&report) } else { render_table(&report) })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return ExitCode::from(if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { 2 } else { 0 });
            }
            let first = e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            eprintln!("error: kind=usage msg={first}");
            return ExitCode::from(2);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: kind=argument msg=cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: kind={} msg={}", e.kind(), e.to_string().replace('\n', " "));
            ExitCode::from(1)
        }
    }
}
