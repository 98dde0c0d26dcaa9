use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{CorpusSource, ExperimentConfig, ModelFamily};
use super::metrics::{predicted_class, EvalReport};
use super::pipeline::{extract, stable_hash, FeatureCache, FeatureSet, FeatureSpec, InputLayout, Normalizer};
use super::synthetic::{generate_synthetic, SYNTHETIC_EMOTIONS};
use super::{AtStage, HarnessError, Result, Stage};
use crate::audio::{clean, read_wav, CleaningConfig, Waveform};
use crate::corpus::{ingest_manifest, scan_corpus, split, LabelScheme, Utterance};
use crate::features::{serf, FeatureMatrix};
use crate::hmm::{train_classifier, FitConfig, HmmClassifier};
use crate::nn::{
    build_champion_cnn, build_cnn1d, build_dnn, build_shallow_cnn, load_model, predict_batch, save_model, softmax,
    train as train_network, Network, TrainConfig, SERC_MAGIC,
};
use crate::seed::derive_seed_str;

const MODEL_META_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum ItemSource {
    File(PathBuf),
    /// Index into [`Dataset::waveforms`].
    Memory(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub id: String,
    pub label: usize,
    pub source: ItemSource,
}

/// Labeled utterances grouped by split.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub scheme: String,
    pub class_names: Vec<String>,
    pub train: Vec<Item>,
    pub val: Vec<Item>,
    pub test: Vec<Item>,
    pub external: Vec<Item>,
    pub waveforms: Vec<Waveform>,
    /// Identifies where the audio comes from; part of the cache key.
    pub source_tag: String,
}

impl Dataset {
    fn splits(&self) -> [(&'static str, &[Item]); 4] {
        [
            ("train", &self.train),
            ("val", &self.val),
            ("test", &self.test),
            ("external", &self.external),
        ]
    }
}

fn labeled(utts: &[Utterance], scheme: &LabelScheme, prefix: &str) -> Result<Vec<Item>> {
    utts.iter()
        .map(|u| {
            Ok(Item {
                id: format!("{prefix}{}", u.id),
                label: scheme.label_of(u).at_ctx(Stage::Ingest, &u.id)?,
                source: ItemSource::File(u.path.clone()),
            })
        })
        .collect()
}

/// Resolve the corpus section of `cfg` into labeled, split items.
pub fn build_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let c = &cfg.corpus;
    let scheme = LabelScheme::new(c.scheme);
    let mut ds = match c.source {
        CorpusSource::Ravdess => {
            let (utts, summary) = scan_corpus(&c.root).at(Stage::Ingest)?;
            if !summary.unparsed.is_empty() {
                warn!("{} wav files with non-RAVDESS names skipped", summary.unparsed.len());
            }
            let kept: Vec<Utterance> = utts
                .into_iter()
                .filter(|u| !c.speech_only || u.is_audio_only_speech())
                .filter(|u| scheme.accepts(u.emotion))
                .collect();
            let s = split(&kept, &c.split).at(Stage::Ingest)?;
            if s.dropped > 0 {
                info!("{} utterances belong to no split", s.dropped);
            }
            Dataset {
                scheme: c.scheme.to_string(),
                class_names: scheme.class_names.clone(),
                train: labeled(&s.train, &scheme, "")?,
                val: labeled(&s.val, &scheme, "")?,
                test: labeled(&s.test, &scheme, "")?,
                source_tag: format!("ravdess:{}", c.root.display()),
                ..Default::default()
            }
        }
        CorpusSource::Synthetic => {
            let seed = derive_seed_str(cfg.seed, "synthetic");
            let corpus = generate_synthetic(&c.synthetic, seed)?;
            let spec = c.synthetic.split_spec();
            let mut ds = Dataset {
                scheme: "synthetic3".into(),
                class_names: SYNTHETIC_EMOTIONS.iter().map(|e| e.name().to_string()).collect(),
                source_tag: format!("synthetic:{}:{seed}", stable_hash(&c.synthetic)),
                ..Default::default()
            };
            for (i, u) in corpus.into_iter().enumerate() {
                let item = Item {
                    id: format!("synth-{}", u.utterance.id),
                    label: u.class,
                    source: ItemSource::Memory(i),
                };
                let actor = u.utterance.actor;
                if spec.train_actors.contains(&actor) {
                    ds.train.push(item);
                } else if spec.val_actors.contains(&actor) {
                    ds.val.push(item);
                } else {
                    ds.test.push(item);
                }
                ds.waveforms.push(u.waveform);
            }
            ds
        }
    };
    if let Some(manifest) = &c.external_manifest {
        if c.source == CorpusSource::Synthetic {
            return Err(HarnessError::new(Stage::Config, "external manifests need a scheme-labeled corpus"));
        }
        let utts: Vec<Utterance> = ingest_manifest(manifest)
            .at(Stage::Ingest)?
            .into_iter()
            .filter(|u| scheme.accepts(u.emotion))
            .collect();
        ds.external = labeled(&utts, &scheme, "ext-")?;
    }
    if c.present_classes_only {
        compact_labels(&mut ds);
    }
    if ds.train.is_empty() {
        return Err(HarnessError::new(Stage::Ingest, "training split is empty"));
    }
    Ok(ds)
}

fn compact_labels(ds: &mut Dataset) {
    let mut present = vec![false; ds.class_names.len()];
    for it in &ds.train {
        present[it.label] = true;
    }
    let mut map = vec![None; present.len()];
    let mut names = Vec::new();
    for (i, p) in present.iter().enumerate() {
        if *p {
            map[i] = Some(names.len());
            names.push(ds.class_names[i].clone());
        }
    }
    let remap = |items: &mut Vec<Item>| {
        let before = items.len();
        items.retain_mut(|it| match map[it.label] {
            Some(l) => {
                it.label = l;
                true
            }
            None => false,
        });
        if items.len() < before {
            warn!("{} items of classes absent from training dropped", before - items.len());
        }
    };
    remap(&mut ds.train);
    remap(&mut ds.val);
    remap(&mut ds.test);
    remap(&mut ds.external);
    ds.class_names = names;
}

fn load_waveform(ds: &Dataset, item: &Item) -> Result<Waveform> {
    match &item.source {
        ItemSource::File(p) => read_wav(p).at(Stage::Ingest),
        ItemSource::Memory(i) => Ok(ds.waveforms[*i].clone()),
    }
}

fn process(w: &Waveform, id: &str, cleaning: &CleaningConfig, features: &FeatureSpec) -> Result<FeatureMatrix> {
    let cleaned = clean(w, cleaning).at_ctx(Stage::Clean, id)?;
    extract(&cleaned, features).map_err(|e| HarnessError::new(e.stage, format!("{id}: {}", e.message)))
}

/// Features per split, in item order.
#[derive(Debug, Clone, Default)]
pub struct Features {
    pub train: Vec<FeatureMatrix>,
    pub val: Vec<FeatureMatrix>,
    pub test: Vec<FeatureMatrix>,
    pub external: Vec<FeatureMatrix>,
    pub cache_dir: PathBuf,
    pub computed: usize,
}

fn cache_for(ds: &Dataset, root: &Path, cleaning: &CleaningConfig, features: &FeatureSpec) -> FeatureCache {
    FeatureCache::new(root, &stable_hash(&(&ds.source_tag, cleaning)), &stable_hash(features))
}

fn featurize_with(
    ds: &Dataset,
    cache_root: &Path,
    cleaning: &CleaningConfig,
    features: &FeatureSpec,
    splits: &[&str],
) -> Result<Features> {
    let cache = cache_for(ds, cache_root, cleaning, features);
    let computed = std::sync::atomic::AtomicUsize::new(0);
    let mut out = Features {
        cache_dir: cache.dir().to_path_buf(),
        ..Default::default()
    };
    for (name, items) in ds.splits() {
        if !splits.contains(&name) {
            continue;
        }
        let mats = items
            .par_iter()
            .map(|it| {
                cache.get_or_insert_with(&it.id, || {
                    computed.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    process(&load_waveform(ds, it)?, &it.id, cleaning, features)
                })
            })
            .collect::<Result<Vec<_>>>()?;
        match name {
            "train" => out.train = mats,
            "val" => out.val = mats,
            "test" => out.test = mats,
            _ => out.external = mats,
        }
    }
    out.computed = computed.into_inner();
    Ok(out)
}

/// Clean and extract features for every split, reusing cached matrices.
pub fn featurize(cfg: &ExperimentConfig, ds: &Dataset) -> Result<Features> {
    featurize_with(ds, &cfg.cache_root(), &cfg.cleaning, &cfg.features, &["train", "val", "test", "external"])
}

/// Everything a saved model needs to turn a WAV into an input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub version: u32,
    pub family: ModelFamily,
    pub scheme: String,
    pub class_names: Vec<String>,
    pub cleaning: CleaningConfig,
    pub features: FeatureSpec,
    pub normalizer: Option<Normalizer>,
    pub layout: Option<InputLayout>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct HmmBundle {
    meta: ModelMeta,
    classifier: HmmClassifier,
}

enum Trained {
    Nn(Network<f32>),
    Hmm(HmmClassifier),
}

struct LoadedModel {
    meta: ModelMeta,
    model: Trained,
}

impl LoadedModel {
    fn load(path: &Path) -> Result<Self> {
        let s = Stage::Predict;
        let bytes = std::fs::read(path).at_ctx(s, path.display())?;
        if bytes.starts_with(SERC_MAGIC) {
            let file = load_model(path).at_ctx(s, path.display())?;
            let meta: ModelMeta = serde_json::from_value(file.metadata).at_ctx(s, "model metadata")?;
            Ok(LoadedModel {
                meta,
                model: Trained::Nn(file.network),
            })
        } else {
            let bundle: HmmBundle = serde_json::from_slice(&bytes).at_ctx(s, path.display())?;
            let classifier = HmmClassifier::from_json(&serde_json::to_string(&bundle.classifier).at(s)?).at(s)?;
            Ok(LoadedModel {
                meta: bundle.meta,
                model: Trained::Hmm(classifier),
            })
        }
    }

    fn predict(&self, m: &FeatureMatrix) -> Result<Vec<f64>> {
        let m = match &self.meta.normalizer {
            Some(n) => n.apply(m)?,
            None => m.clone(),
        };
        score(&self.model, self.meta.layout, &[m]).map(|mut v| v.remove(0))
    }
}

fn score(model: &Trained, layout: Option<InputLayout>, mats: &[FeatureMatrix]) -> Result<Vec<Vec<f64>>> {
    match model {
        Trained::Nn(net) => {
            let layout = layout.ok_or_else(|| HarnessError::new(Stage::Predict, "network model without input layout"))?;
            let xs = mats.iter().map(|m| layout.to_tensor(m)).collect::<Result<Vec<_>>>()?;
            predict_batch(net, &xs).at(Stage::Predict)
        }
        Trained::Hmm(c) => mats
            .par_iter()
            .map(|m| c.classify(m).map(|(_, lls)| softmax(&lls)).at(Stage::Predict))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmGridPoint {
    pub n_states: usize,
    pub n_components: usize,
    pub val_accuracy: Option<f64>,
    pub error: Option<String>,
}

/// Outcome of one experiment. Contains no timings or paths, so identical
/// configs give identical reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub fingerprint: String,
    pub family: ModelFamily,
    pub features: FeatureSet,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Number of trained models: one network, or one HMM per class.
    pub n_models: usize,
    pub val_accuracy: Option<f64>,
    pub best_epoch: Option<usize>,
    pub hmm_grid: Vec<HmmGridPoint>,
    pub test: EvalReport,
    pub external: Option<EvalReport>,
    pub model_file: String,
}

fn labels(items: &[Item]) -> Vec<usize> {
    items.iter().map(|i| i.label).collect()
}

fn split_accuracy(probs: &[Vec<f64>], items: &[Item]) -> Option<f64> {
    if items.is_empty() {
        return None;
    }
    let hits = probs.iter().zip(items).filter(|(p, it)| predicted_class(p) == it.label).count();
    Some(hits as f64 / items.len() as f64)
}

struct Fitted {
    model: Trained,
    layout: Option<InputLayout>,
    history_csv: String,
    best_epoch: Option<usize>,
    hmm_grid: Vec<HmmGridPoint>,
    n_models: usize,
}

fn fit_network(cfg: &ExperimentConfig, ds: &Dataset, train: &[FeatureMatrix], val: &[FeatureMatrix]) -> Result<Fitted> {
    let n = ds.class_names.len();
    let (mut spec, layout) = match cfg.model.family {
        ModelFamily::ChampionCnn => (build_champion_cnn(n), InputLayout::Image),
        ModelFamily::ShallowCnn => (build_shallow_cnn(n), InputLayout::Image),
        ModelFamily::Cnn1d => (build_cnn1d(n), InputLayout::Sequence),
        ModelFamily::Dnn => {
            let frames = train.iter().map(|m| m.frames).max().unwrap_or(1);
            (build_dnn(n), InputLayout::Flat { frames })
        }
        ModelFamily::Hmm => unreachable!(),
    };
    spec.seed = derive_seed_str(cfg.seed, "init");
    let examples = |mats: &[FeatureMatrix], items: &[Item]| -> Result<Vec<_>> {
        mats.iter()
            .zip(items)
            .map(|(m, it)| Ok((layout.to_tensor(m)?, it.label)))
            .collect()
    };
    let train_ex = examples(train, &ds.train)?;
    let val_ex = examples(val, &ds.val)?;
    let tc = TrainConfig {
        epochs: cfg.model.epochs,
        batch_size: cfg.model.batch_size,
        optimizer: cfg.model.optimizer.clone(),
        seed: derive_seed_str(cfg.seed, "train"),
    };
    let input_shape = train_ex[0].0.shape.clone();
    let outcome = train_network(spec, &input_shape, &train_ex, &val_ex, &tc).at(Stage::Train)?;
    let mut history_csv = String::from("epoch,train_loss,train_acc,val_acc,val_loss\n");
    for h in &outcome.history {
        let _ = writeln!(history_csv, "{},{},{},{},{}", h.epoch, h.train_loss, h.train_acc, h.val_acc, h.val_loss);
    }
    Ok(Fitted {
        model: Trained::Nn(outcome.network),
        layout: Some(layout),
        history_csv,
        best_epoch: Some(outcome.best_epoch),
        hmm_grid: Vec::new(),
        n_models: 1,
    })
}

fn fit_hmm(cfg: &ExperimentConfig, ds: &Dataset, train: &[FeatureMatrix], val: &[FeatureMatrix]) -> Result<Fitted> {
    let h = &cfg.model.hmm;
    let refs: Vec<(&FeatureMatrix, usize)> = train.iter().zip(&ds.train).map(|(m, it)| (m, it.label)).collect();
    let (sel_mats, sel_items) = if ds.val.is_empty() {
        (train, &ds.train[..])
    } else {
        (val, &ds.val[..])
    };
    let mut grid = Vec::new();
    let mut best: Option<(f64, HmmClassifier)> = None;
    for &n_states in &h.n_states {
        for &n_components in &h.n_components {
            let fit = FitConfig {
                n_states,
                n_components,
                topology: h.topology,
                max_iter: h.max_iter,
                tol: h.tol,
                var_floor: h.var_floor,
                seed: derive_seed_str(cfg.seed, "hmm"),
            };
            let started = Instant::now();
            let result = train_classifier(&refs, &ds.class_names, &fit)
                .at(Stage::Train)
                .and_then(|c| {
                    let model = Trained::Hmm(c);
                    let probs = score(&model, None, sel_mats)?;
                    let acc = split_accuracy(&probs, sel_items).unwrap_or(0.0);
                    let Trained::Hmm(c) = model else { unreachable!() };
                    Ok((acc, c))
                });
            match result {
                Ok((acc, c)) => {
                    info!(
                        "hmm {n_states} states × {n_components} components: selection accuracy {acc:.4} ({:.1}s)",
                        started.elapsed().as_secs_f64()
                    );
                    grid.push(HmmGridPoint {
                        n_states,
                        n_components,
                        val_accuracy: Some(acc),
                        error: None,
                    });
                    if best.as_ref().is_none_or(|(b, _)| acc > *b) {
                        best = Some((acc, c));
                    }
                }
                Err(e) => {
                    warn!("hmm {n_states} states × {n_components} components failed: {}", e.message);
                    grid.push(HmmGridPoint {
                        n_states,
                        n_components,
                        val_accuracy: None,
                        error: Some(e.message),
                    });
                }
            }
        }
    }
    let (_, classifier) = best.ok_or_else(|| {
        let reasons: Vec<_> = grid.iter().filter_map(|g| g.error.clone()).collect();
        HarnessError::new(Stage::Train, format!("every HMM configuration failed: {}", reasons.join("; ")))
    })?;
    let mut history_csv = String::from("class,iteration,loglik\n");
    for (name, hist) in classifier.class_names.iter().zip(&classifier.histories) {
        for (i, ll) in hist.iter().enumerate() {
            let _ = writeln!(history_csv, "{name},{},{ll}", i + 1);
        }
    }
    let n_models = classifier.models.len();
    Ok(Fitted {
        model: Trained::Hmm(classifier),
        layout: None,
        history_csv,
        best_epoch: None,
        hmm_grid: grid,
        n_models,
    })
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).at_ctx(Stage::Report, path.display())
}

fn normalize_all(norm: &Option<Normalizer>, mats: Vec<FeatureMatrix>) -> Result<Vec<FeatureMatrix>> {
    match norm {
        Some(n) => mats.iter().map(|m| n.apply(m)).collect(),
        None => Ok(mats),
    }
}

/// Run the whole pipeline and write `report.json`, `confusion.csv`,
/// `history.csv`, `predictions.csv`, `config.toml` and the model file into
/// `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let started = Instant::now();
    let ds = build_dataset(cfg)?;
    info!(
        "{}: {} train / {} val / {} test / {} external utterances",
        cfg.name,
        ds.train.len(),
        ds.val.len(),
        ds.test.len(),
        ds.external.len()
    );
    if ds.test.is_empty() {
        return Err(HarnessError::new(Stage::Ingest, "test split is empty"));
    }
    let feats = featurize(cfg, &ds)?;
    info!("features ready ({} computed, cache {})", feats.computed, feats.cache_dir.display());

    let normalizer = if cfg.features.normalize {
        Some(Normalizer::fit(&feats.train.iter().collect::<Vec<_>>())?)
    } else {
        None
    };
    let train_m = normalize_all(&normalizer, feats.train)?;
    let val_m = normalize_all(&normalizer, feats.val)?;
    let test_m = normalize_all(&normalizer, feats.test)?;
    let ext_m = normalize_all(&normalizer, feats.external)?;

    let fitted = match cfg.model.family {
        ModelFamily::Hmm => fit_hmm(cfg, &ds, &train_m, &val_m)?,
        _ => fit_network(cfg, &ds, &train_m, &val_m)?,
    };
    info!("trained in {:.1}s", started.elapsed().as_secs_f64());

    let probs: Vec<Vec<Vec<f64>>> = [&train_m, &val_m, &test_m, &ext_m]
        .iter()
        .map(|m| score(&fitted.model, fitted.layout, m))
        .collect::<Result<_>>()?;
    let test = EvalReport::compute(&ds.scheme, &ds.class_names, &probs[2], &labels(&ds.test))?;
    let external = if ds.external.is_empty() {
        None
    } else {
        Some(EvalReport::compute(&ds.scheme, &ds.class_names, &probs[3], &labels(&ds.external))?)
    };

    let out = &cfg.output_dir;
    std::fs::create_dir_all(out).at_ctx(Stage::Report, out.display())?;
    let meta = ModelMeta {
        version: MODEL_META_VERSION,
        family: cfg.model.family,
        scheme: ds.scheme.clone(),
        class_names: ds.class_names.clone(),
        cleaning: cfg.cleaning.clone(),
        features: cfg.features.clone(),
        normalizer,
        layout: fitted.layout,
    };
    let model_file = match &fitted.model {
        Trained::Nn(net) => {
            let meta_json = serde_json::to_value(&meta).at(Stage::Report)?;
            save_model(&out.join("model.serc"), net, &meta_json).at(Stage::Report)?;
            "model.serc"
        }
        Trained::Hmm(c) => {
            let bundle = HmmBundle {
                meta: meta.clone(),
                classifier: c.clone(),
            };
            let json = serde_json::to_vec_pretty(&bundle).at(Stage::Report)?;
            serf::atomic_write(&out.join("model.hmm.json"), &json).at(Stage::Report)?;
            "model.hmm.json"
        }
    };

    let report = ExperimentReport {
        name: cfg.name.clone(),
        fingerprint: cfg.fingerprint(),
        family: cfg.model.family,
        features: cfg.features.kind,
        n_train: ds.train.len(),
        n_val: ds.val.len(),
        n_test: ds.test.len(),
        n_models: fitted.n_models,
        val_accuracy: split_accuracy(&probs[1], &ds.val),
        best_epoch: fitted.best_epoch,
        hmm_grid: fitted.hmm_grid,
        test,
        external,
        model_file: model_file.to_string(),
    };

    let mut predictions = String::from("id,split,label,predicted");
    for name in &ds.class_names {
        let _ = write!(predictions, ",p_{name}");
    }
    predictions.push('\n');
    for ((split_name, items), rows) in ds.splits().iter().zip(&probs) {
        for (it, row) in items.iter().zip(rows) {
            let _ = write!(
                predictions,
                "{},{split_name},{},{}",
                it.id,
                ds.class_names[it.label],
                ds.class_names[predicted_class(row)]
            );
            for p in row {
                let _ = write!(predictions, ",{p}");
            }
            predictions.push('\n');
        }
    }
    write_file(out, "report.json", &serde_json::to_vec_pretty(&report).at(Stage::Report)?)?;
    write_file(out, "confusion.csv", report.test.confusion_csv().as_bytes())?;
    write_file(out, "history.csv", fitted.history_csv.as_bytes())?;
    write_file(out, "predictions.csv", predictions.as_bytes())?;
    write_file(out, "config.toml", cfg.to_toml()?.as_bytes())?;
    info!(
        "{}: test accuracy {:.4}, macro F1 {:.4} ({:.1}s total)",
        cfg.name,
        report.test.accuracy,
        report.test.macro_f1,
        started.elapsed().as_secs_f64()
    );
    Ok(report)
}

/// Run each config in turn; failures do not stop the remaining runs.
pub fn run_grid(configs: &[ExperimentConfig]) -> Vec<Result<ExperimentReport>> {
    configs.iter().map(run_experiment).collect()
}

/// Score the test split of `cfg`'s corpus with a saved model, using the
/// cleaning and feature settings stored in the model.
pub fn evaluate_model(cfg: &ExperimentConfig, model_path: &Path) -> Result<EvalReport> {
    let model = LoadedModel::load(model_path)?;
    let ds = build_dataset(cfg)?;
    if ds.class_names != model.meta.class_names {
        return Err(HarnessError::new(
            Stage::Eval,
            format!(
                "model classes {:?} differ from corpus classes {:?}",
                model.meta.class_names, ds.class_names
            ),
        ));
    }
    if ds.test.is_empty() {
        return Err(HarnessError::new(Stage::Eval, "test split is empty"));
    }
    let feats = featurize_with(&ds, &cfg.cache_root(), &model.meta.cleaning, &model.meta.features, &["test"])?;
    let probs = feats.test.iter().map(|m| model.predict(m)).collect::<Result<Vec<_>>>()?;
    EvalReport::compute(&ds.scheme, &ds.class_names, &probs, &labels(&ds.test))
}

/// Classify one WAV file. Returns every class with its probability, most
/// likely first.
pub fn predict_file(model_path: &Path, wav_path: &Path) -> Result<Vec<(String, f64)>> {
    let model = LoadedModel::load(model_path)?;
    let w = read_wav(wav_path).at(Stage::Predict)?;
    let id = wav_path.display().to_string();
    let m = process(&w, &id, &model.meta.cleaning, &model.meta.features)?;
    let probs = model.predict(&m)?;
    let mut ranked: Vec<(String, f64)> = model.meta.class_names.iter().cloned().zip(probs).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(ranked)
}
