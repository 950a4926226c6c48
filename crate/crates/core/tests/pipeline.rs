use leafpipe::elm::{elm_train, ElmConfig, ElmModel};
use leafpipe::eval::{run_experiment, stratified_kfold, verify_audit, ExperimentRow};
use leafpipe::features::{canonical_names, GLCM};
use leafpipe::featselect::{fit_selector, ForestConfig, SelectMethod, ANOVA_K};
use leafpipe::matrix::{standardize_fit_apply, FeatureMatrix};
use leafpipe::pipeline::{persist, process_dataset, synth_generate, PipelineConfig, ProcessedDataset, SynthConfig};
use leafpipe::rng;
use rand::Rng;

fn small_config() -> PipelineConfig {
    let mut cfg = PipelineConfig::from_toml("seed = 5\nimage_size = 32\ndicdm_size = 16\n").unwrap();
    cfg.experiment.folds = 3;
    cfg
}

fn dataset(per_class: usize, separability: f64, dir: &std::path::Path) -> ProcessedDataset {
    let synth = SynthConfig {
        per_class,
        separability,
        size: 32,
    };
    let manifest = synth_generate(&synth, 5, dir).unwrap();
    process_dataset(&manifest, &small_config(), true).unwrap()
}

#[test]
fn synthetic_images_through_the_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(12, 1.0, dir.path());
    assert_eq!(data.features.rows(), 72);
    assert_eq!(data.features.names, canonical_names());
    assert!(data.features.values().iter().all(|v| v.is_finite()));
    let px = data.pixels.as_ref().unwrap();
    assert_eq!(px.cols(), 16 * 16);

    // CSV is a fixpoint: write, read, write gives the same bytes and matrix
    let csv = dir.path().join("features.csv");
    persist::save_features(&data.features, &csv).unwrap();
    let back = persist::load_features_with_names(&csv, canonical_names()).unwrap();
    assert_eq!(back.values(), data.features.values());
    assert_eq!(back.labels, data.features.labels);
    assert_eq!(persist::features_to_csv(&back).unwrap(), std::fs::read(&csv).unwrap());

    let mut cfg = small_config();
    cfg.experiment.pca_components = 20;
    let rows = [ExperimentRow::Dicdm, ExperimentRow::All, ExperimentRow::Pca, ExperimentRow::Anova];
    let (report, audit) = run_experiment(&data.clone().experiment_data(), &rows, &cfg.experiment).unwrap();
    for r in &report.rows {
        assert!(r.error.is_none(), "{}: {:?}", r.label, r.error);
    }
    assert_eq!(report.row(ExperimentRow::Pca).unwrap().n_features, Some(20));
    assert!(report.accuracy(ExperimentRow::All).unwrap() > 50.0);
    let folds = stratified_kfold(&data.features.labels, 3, cfg.experiment.seed).unwrap();
    verify_audit(&audit, &folds).unwrap();
}

#[test]
fn anova_keeps_glcm_features() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(15, 1.0, dir.path());
    let z = standardize_fit_apply(&data.features).unwrap();
    let model = fit_selector(&z, SelectMethod::AnovaF, ANOVA_K, &ForestConfig::default(), 0).unwrap();
    assert_eq!(model.selected.len(), 50);
    assert!(model.selected.iter().any(|i| GLCM.contains(i)), "no GLCM feature among {:?}", model.selected);
}

#[test]
fn unseparable_classes_stay_near_chance() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(30, 0.0, dir.path());
    let cfg = small_config();
    let (report, _) = run_experiment(&data.experiment_data(), &[ExperimentRow::All], &cfg.experiment).unwrap();
    let acc = report.accuracy(ExperimentRow::All).unwrap();
    assert!(acc < 35.0, "accuracy {acc} with no class signal");
}

#[test]
fn saved_model_predicts_identically() {
    let mut r = rng::stream(1, &[0x5a]);
    let (n, d) = (100, 12);
    let labels: Vec<usize> = (0..n).map(|i| i % 4).collect();
    let values = (0..n * d).map(|k| labels[k / d] as f64 * 0.5 + r.gen_range(-1.0..1.0)).collect();
    let names = (0..d).map(|j| format!("x{j}")).collect();
    let m = FeatureMatrix::new(n, d, values, names, labels).unwrap();
    let classes: Vec<String> = (0..4).map(|c| format!("c{c}")).collect();
    let model = elm_train(&m, &classes, &ElmConfig::fadm(d, 9)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    model.save(&path).unwrap();
    let loaded = ElmModel::load(&path).unwrap();
    assert_eq!(loaded, model);
    let probe_values = (0..n * d).map(|_| r.gen_range(-3.0..3.0)).collect();
    let probe = FeatureMatrix::new(n, d, probe_values, m.names.clone(), vec![0; n]).unwrap();
    assert_eq!(loaded.predict(&probe).unwrap(), model.predict(&probe).unwrap());
    assert_eq!(loaded.predict_proba(&probe).unwrap(), model.predict_proba(&probe).unwrap());
}
