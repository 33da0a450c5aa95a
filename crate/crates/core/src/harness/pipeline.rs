use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use super::config::{ExperimentConfig, RetrainMode, TranslatorSource};
use super::report::{Cell, DeltaEntry, ExperimentResult};
use crate::error::{Error, Result};
use crate::fusion::{fuse_from_heads, FusionParams};
use crate::learner::{self, checkpoint, load_samples, LossRecord, OptimState, SegModel, TrainConfig, TrainSample};
use crate::metrics::{aggregate, delta_report, evaluate_image, MetricReport};
use crate::nightshift::{self, convert_subset, Converter, TranslatorPair};
use crate::panoptic::io::{read_image, read_panoptic, write_image, write_panoptic};
use crate::panoptic::{ClassCatalog, DatasetEntry, DatasetIndex, Domain, Split};
use crate::scenegen::{self, build_mix, compose_scene, render, GenerateSpec, LightingSpec, MixSpec};

const TRACE_STRIDE: usize = 10;

/// A dataset manifest saved inside the output directory.
#[derive(Debug, Clone)]
pub struct Saved {
    pub index: DatasetIndex,
    pub hash: String,
}

fn save(index: DatasetIndex, out: &Path, name: &str) -> Result<Saved> {
    let hash = index.save(&out.join(format!("{name}.json")))?;
    Ok(Saved { index, hash })
}

/// The day training and validation sets and the converted validation set.
#[derive(Debug, Clone)]
pub struct Datasets {
    pub train: Saved,
    pub val: Saved,
    pub val_converted: Saved,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: SegModel,
    pub state: OptimState,
    pub checkpoint_hash: String,
}

pub struct Approach1Output {
    pub result: ExperimentResult,
    pub datasets: Datasets,
    pub retrained: TrainedModel,
}

fn stage<T>(name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| e.in_stage(name))
}

fn converter(cfg: &ExperimentConfig) -> Result<Converter> {
    Ok(match &cfg.conversion.translator {
        TranslatorSource::Parametric => Converter::Params(cfg.night.clone()),
        TranslatorSource::Checkpoint(p) => Converter::Translator(TranslatorPair::load(p)?),
    })
}

/// Renders the day sets and converts the validation set. Deterministic in
/// the config, so repeated calls rebuild identical files.
pub fn prepare_datasets(cfg: &ExperimentConfig, catalog: &ClassCatalog, out: &Path) -> Result<Datasets> {
    stage("generate", || {
        let spec = |count, seed, split, prefix: &str| GenerateSpec {
            count,
            seed,
            width: cfg.width,
            height: cfg.height,
            lighting: LightingSpec::day(),
            scene: cfg.scene.clone(),
            split,
            prefix: prefix.into(),
        };
        let data = out.join("data");
        let train_spec = spec(cfg.scenes.train, crate::rng::derive(cfg.seed, 1), Split::Train, "train");
        let val_spec = spec(cfg.scenes.val, crate::rng::derive(cfg.seed, 2), Split::Val, "val");
        let train = scenegen::generate_dataset(&train_spec, catalog, &data.join("day"))?;
        let val = scenegen::generate_dataset(&val_spec, catalog, &data.join("day"))?;
        Ok((save(train, out, "train_day")?, save(val, out, "val_day")?))
    })
    .and_then(|(train, val)| {
        stage("convert-val", || {
            let conv = converter(cfg)?;
            let seed = crate::rng::derive(cfg.seed, 4);
            let converted = convert_subset(&val.index, cfg.conversion.val_fraction, seed, &conv, &out.join("data/val_converted"))?;
            Ok(Datasets {
                train,
                val,
                val_converted: save(converted, out, "val_converted")?,
            })
        })
    })
}

fn train(
    cfg: &TrainConfig,
    samples: &[TrainSample],
    catalog: &ClassCatalog,
    start: Option<&TrainedModel>,
    path: &Path,
) -> Result<(TrainedModel, Vec<LossRecord>)> {
    let (mut model, mut state) = match start {
        Some(t) => {
            let mut s = t.state.clone();
            s.hyper = cfg.adam();
            (t.model.clone(), s)
        }
        None => {
            let m = cfg.init_model(catalog);
            let s = OptimState::new(&m.params, cfg.adam());
            (m, s)
        }
    };
    let trace = learner::train_on_samples(&mut model, &mut state, cfg, samples)?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let checkpoint_hash = checkpoint::save(path, &model, &state, catalog)?;
    let thinned = trace.into_iter().step_by(TRACE_STRIDE).collect();
    Ok((
        TrainedModel {
            model,
            state,
            checkpoint_hash,
        },
        thinned,
    ))
}

/// Predicts every labelled entry in parallel and aggregates the metrics in
/// an order-independent way.
pub fn evaluate_model(
    model: &SegModel,
    index: &DatasetIndex,
    catalog: &ClassCatalog,
    fusion: &FusionParams,
) -> Result<MetricReport> {
    let evals = index
        .entries
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let label = e
                .label
                .as_ref()
                .ok_or_else(|| Error::Input(format!("{} has no labels", e.image.display())))?;
            let img = read_image(&e.image)?;
            let (gt, _) = read_panoptic(label, catalog)?;
            let heads = learner::predict(model, &img)?;
            let pred = fuse_from_heads(&heads, fusion, catalog)?;
            evaluate_image(&pred.labels, &pred.scores, &gt, catalog, i as u64)
        })
        .collect::<Result<Vec<_>>>()?;
    aggregate(&evals, catalog)
}

fn cell(
    model: &str,
    dataset: &str,
    iterations: Option<u64>,
    trained: &TrainedModel,
    data: &Saved,
    catalog: &ClassCatalog,
    fusion: &FusionParams,
) -> Result<Cell> {
    Ok(Cell {
        model: model.into(),
        dataset: dataset.into(),
        iterations,
        report: evaluate_model(&trained.model, &data.index, catalog, fusion)?,
        checkpoint_hash: trained.checkpoint_hash.clone(),
        manifest_hash: data.hash.clone(),
    })
}

fn find<'a>(cells: &'a [Cell], model: &str, dataset: &str) -> &'a MetricReport {
    &cells
        .iter()
        .find(|c| c.model == model && c.dataset == dataset)
        .expect("cell exists")
        .report
}

/// Baseline on day data, retrained on a partly converted training set,
/// both evaluated on the original and the converted validation set.
pub fn run_approach1(cfg: &ExperimentConfig, out: &Path) -> Result<Approach1Output> {
    cfg.check()?;
    let catalog = ClassCatalog::resolve(&cfg.catalog)?;
    let fusion = cfg.fusion_params();
    let datasets = prepare_datasets(cfg, &catalog, out)?;
    let ckpt = out.join("checkpoints");

    let (baseline, base_trace) = stage("train-baseline", || {
        let samples = load_samples(&datasets.train.index, &catalog, &cfg.segmenter)?;
        train(&cfg.segmenter, &samples, &catalog, None, &ckpt.join("baseline.bin"))
    })?;

    let mixed = stage("convert-train", || {
        let conv = converter(cfg)?;
        let seed = crate::rng::derive(cfg.seed, 3);
        let idx = convert_subset(
            &datasets.train.index,
            cfg.conversion.fraction,
            seed,
            &conv,
            &out.join("data/train_converted"),
        )?;
        save(idx, out, "train_mixed")
    })?;

    let (retrained, re_trace) = stage("retrain", || {
        let samples = load_samples(&mixed.index, &catalog, &cfg.segmenter)?;
        let start = match cfg.retrain {
            RetrainMode::Scratch => None,
            RetrainMode::FromBaseline => Some(&baseline),
        };
        train(&cfg.segmenter, &samples, &catalog, start, &ckpt.join("retrained.bin"))
    })?;

    let table1 = stage("evaluate", || {
        let mut cells = Vec::new();
        for (name, m) in [("Baseline", &baseline), ("Retrained", &retrained)] {
            cells.push(cell(name, "Original", None, m, &datasets.val, &catalog, &fusion)?);
            cells.push(cell(name, "Converted", None, m, &datasets.val_converted, &catalog, &fusion)?);
        }
        Ok(cells)
    })?;
    let deltas = ["Original", "Converted"]
        .iter()
        .map(|d| DeltaEntry {
            name: format!("Retrained - Baseline ({d})"),
            delta: delta_report(find(&table1, "Baseline", d), find(&table1, "Retrained", d)),
        })
        .collect();
    let mut traces = BTreeMap::new();
    traces.insert("baseline".to_string(), base_trace);
    traces.insert("retrained".to_string(), re_trace);
    let result = ExperimentResult {
        config: cfg.clone(),
        class_names: catalog.classes().iter().filter(|c| c.is_eval).map(|c| c.name.clone()).collect(),
        table1,
        table3: Vec::new(),
        deltas,
        traces,
        translator_trace: Vec::new(),
        manifests: [
            ("train_day", &datasets.train),
            ("val_day", &datasets.val),
            ("val_converted", &datasets.val_converted),
            ("train_mixed", &mixed),
        ]
        .iter()
        .map(|(n, s)| (n.to_string(), s.hash.clone()))
        .collect(),
        checkpoints: [("baseline", &baseline), ("retrained", &retrained)]
            .iter()
            .map(|(n, m)| (n.to_string(), m.checkpoint_hash.clone()))
            .collect(),
    };
    Ok(Approach1Output {
        result,
        datasets,
        retrained,
    })
}

/// Renders `val` scenes again under rotating night lighting variants.
fn varied_night_val(cfg: &ExperimentConfig, catalog: &ClassCatalog, out: &Path) -> Result<Saved> {
    let dir = out.join("data/val_varied");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let val_seed = crate::rng::derive(cfg.seed, 2);
    let entries = (0..cfg.scenes.val)
        .into_par_iter()
        .map(|i| {
            let scene = compose_scene(crate::rng::derive(val_seed, i as u64), catalog, &cfg.scene)?;
            let lighting = LightingSpec::night_variant(i).with_seed(crate::rng::derive(cfg.seed, 100 + i as u64));
            let (img, labels) = render(&scene, &lighting, cfg.width, cfg.height)?;
            let image = dir.join(format!("val_varied_{i:05}.png"));
            let label = dir.join(format!("val_varied_{i:05}_panoptic.png"));
            write_image(&image, &img)?;
            write_panoptic(&label, &labels, catalog, None)?;
            Ok(DatasetEntry {
                image,
                label: Some(label),
                split: Split::Val,
                domain: Domain::Night,
                source: Some(format!("variant-{}", i % 4)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    save(DatasetIndex::new(val_seed, entries)?, out, "val_varied")
}

/// Trains a translator on day scenes against a mix of night looks, then
/// refines `base` in stages on training sets partly converted with it.
pub fn run_approach2(
    cfg: &ExperimentConfig,
    out: &Path,
    datasets: &Datasets,
    base: &TrainedModel,
    result: &mut ExperimentResult,
) -> Result<()> {
    let a2 = &cfg.approach2;
    if a2.stages.is_empty() {
        return Ok(());
    }
    let catalog = ClassCatalog::resolve(&cfg.catalog)?;
    let fusion = cfg.fusion_params();

    let mix = stage("night-sources", || {
        let mut sources = Vec::new();
        for (k, src) in a2.sources.iter().enumerate() {
            let spec = GenerateSpec {
                count: src.available,
                seed: crate::rng::derive(cfg.seed, 50 + k as u64),
                width: cfg.width,
                height: cfg.height,
                lighting: LightingSpec::night_variant(src.variant).with_seed(crate::rng::derive(cfg.seed, 60 + k as u64)),
                scene: cfg.scene.clone(),
                split: Split::Train,
                prefix: src.name.clone(),
            };
            sources.push(scenegen::generate_dataset(&spec, &catalog, &out.join("data/night").join(&src.name))?);
        }
        let specs: Vec<MixSpec> = a2
            .sources
            .iter()
            .zip(&sources)
            .map(|(s, idx)| MixSpec {
                name: &s.name,
                source: idx,
                count: s.count,
            })
            .collect();
        save(build_mix(&specs, crate::rng::derive(cfg.seed, 70))?, out, "night_mix")
    })?;

    let translator = stage("train-translator", || {
        let outcome = nightshift::train_translator(&datasets.train.index, &mix.index, &a2.translator, None)?;
        let hash = outcome.pair.save(&out.join("checkpoints/translator.bin"))?;
        Ok((outcome, hash))
    })?;
    let (tr_outcome, tr_hash) = translator;
    let conv = Converter::Translator(tr_outcome.pair.clone());

    let varied = stage("varied-val", || varied_night_val(cfg, &catalog, out))?;

    let sets: [(&str, &Saved); 3] = [
        ("Original", &datasets.val),
        ("Converted", &datasets.val_converted),
        ("Varied-night", &varied),
    ];
    let mut table3 = Vec::new();
    stage("evaluate-retrained", || {
        for (name, data) in sets {
            table3.push(cell("Retrained", name, Some(0), base, data, &catalog, &fusion)?);
        }
        Ok(())
    })?;

    let mut seg_cfg = cfg.segmenter.clone();
    if let Some(lr) = a2.lr_base {
        seg_cfg.lr_base = lr;
    }
    let mut current = base.clone();
    for (s, st) in a2.stages.iter().enumerate() {
        let (next, trace, data_hash) = stage(&st.name, || {
            let seed = crate::rng::derive(cfg.seed, 200 + s as u64);
            let idx = convert_subset(&datasets.train.index, st.fraction, seed, &conv, &out.join("data").join(format!("stage{s}")))?;
            let data = save(idx, out, &format!("train_stage{s}"))?;
            let samples = load_samples(&data.index, &catalog, &seg_cfg)?;
            let stage_cfg = TrainConfig {
                iterations: st.iterations,
                ..seg_cfg.clone()
            };
            let (m, t) = train(&stage_cfg, &samples, &catalog, Some(&current), &out.join(format!("checkpoints/stage{s}.bin")))?;
            Ok((m, t, data.hash))
        })?;
        for (name, data) in sets {
            table3.push(cell(&st.name, name, Some(st.iterations), &next, data, &catalog, &fusion)?);
        }
        result.traces.insert(st.name.clone(), trace);
        result.manifests.insert(format!("train_stage{s}"), data_hash);
        result.checkpoints.insert(st.name.clone(), next.checkpoint_hash.clone());
        current = next;
    }
    let last = &a2.stages.last().expect("non-empty").name;
    for d in ["Original", "Converted", "Varied-night"] {
        result.deltas.push(DeltaEntry {
            name: format!("{last} - Retrained ({d})"),
            delta: delta_report(find(&table3, "Retrained", d), find(&table3, last, d)),
        });
    }
    result.manifests.insert("night_mix".into(), mix.hash);
    result.manifests.insert("val_varied".into(), varied.hash);
    result.checkpoints.insert("translator".into(), tr_hash);
    result.translator_trace = tr_outcome.trace;
    result.table3 = table3;
    Ok(())
}

/// Approach-1 followed by Approach-2 when stages are configured.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentResult> {
    let mut a1 = run_approach1(cfg, out)?;
    run_approach2(cfg, out, &a1.datasets, &a1.retrained, &mut a1.result)?;
    Ok(a1.result)
}

