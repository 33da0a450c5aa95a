use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use noctis::fusion::{fuse_from_heads, FusionParams};
use noctis::harness::{emit_report, run_experiment, ExperimentConfig, ReportFormat};
use noctis::learner::{self, checkpoint, TrainConfig};
use noctis::metrics::{aggregate, delta_report, evaluate_image, MetricReport};
use noctis::nightshift::{convert_subset, train_translator, Converter, GanConfig, NightParams, TranslatorPair};
use noctis::panoptic::io::{read_image, read_panoptic, write_panoptic};
use noctis::panoptic::{ClassCatalog, DatasetEntry, DatasetIndex, Split};
use noctis::scenegen::{generate_dataset, GenerateSpec, LightingSpec, SceneConfig};
use noctis::{Error, Result};

#[derive(Parser)]
#[command(name = "noctis", version, about = "Panoptic segmentation under low illumination")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Render synthetic street scenes with panoptic ground truth.
    Generate {
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 128)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        /// `day`, `night`, `night-0` … `night-3`, or a lighting TOML file.
        #[arg(long, default_value = "day")]
        lighting: String,
        #[arg(long, value_enum, default_value = "train")]
        split: SplitArg,
        #[arg(long, default_value = "scene")]
        prefix: String,
        #[arg(long, default_value = "desk")]
        catalog: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replace a seeded fraction of a dataset by night versions.
    Convert {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 0.28)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Night transform parameters (key = value file).
        #[arg(long, conflicts_with = "translator")]
        params: Option<PathBuf>,
        /// Trained translator checkpoint.
        #[arg(long)]
        translator: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the day/night translator on two manifests.
    TrainTranslator {
        #[arg(long)]
        day: PathBuf,
        #[arg(long)]
        night: PathBuf,
        /// TOML translator config; desk settings when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Warm start from an existing checkpoint.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the segmenter.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long, default_value = "desk")]
        catalog: String,
        #[arg(long)]
        out: PathBuf,
        /// Writes the loss trace as JSON.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Predict panoptic label maps for every entry of a manifest.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "desk")]
        catalog: String,
        /// Fusion parameters as JSON; scaled defaults when absent.
        #[arg(long)]
        fusion: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against ground truth, entry by entry.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value = "desk")]
        catalog: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Difference of two metric reports, `b - a`.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the configured experiment end to end.
    Experiment {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn lighting(spec: &str) -> Result<LightingSpec> {
    match spec {
        "day" => Ok(LightingSpec::day()),
        "night" => Ok(LightingSpec::night()),
        s => match s.strip_prefix("night-").and_then(|k| k.parse::<usize>().ok()) {
            Some(k) => Ok(LightingSpec::night_variant(k)),
            None => LightingSpec::load(Path::new(s)),
        },
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::Input(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn labels_of(e: &DatasetEntry) -> Result<&Path> {
    e.label
        .as_deref()
        .ok_or_else(|| Error::Input(format!("{} has no labels", e.image.display())))
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate {
            count,
            seed,
            width,
            height,
            lighting: l,
            split,
            prefix,
            catalog,
            out,
        } => {
            let catalog = ClassCatalog::resolve(&catalog)?;
            let spec = GenerateSpec {
                count,
                seed,
                width,
                height,
                lighting: lighting(&l)?,
                scene: SceneConfig::default(),
                split: split.into(),
                prefix,
            };
            let index = generate_dataset(&spec, &catalog, &out)?;
            let hash = index.save(&out.join("manifest.json"))?;
            println!("{} scenes, manifest {hash}", index.len());
        }
        Command::Convert {
            manifest,
            fraction,
            seed,
            params,
            translator,
            out,
        } => {
            let conv = match (params, translator) {
                (_, Some(t)) => Converter::Translator(TranslatorPair::load(&t)?),
                (Some(p), None) => Converter::Params(NightParams::load(&p)?),
                (None, None) => Converter::Params(ExperimentConfig::default().night),
            };
            let index = DatasetIndex::load(&manifest)?;
            let converted = convert_subset(&index, fraction, seed, &conv, &out)?;
            let hash = converted.save(&out.join("manifest.json"))?;
            println!("manifest {hash}");
        }
        Command::TrainTranslator {
            day,
            night,
            config,
            init,
            out,
        } => {
            let cfg = match config {
                Some(p) => GanConfig::load(&p)?,
                None => GanConfig::desk(),
            };
            let init = init.map(|p| TranslatorPair::load(&p)).transpose()?;
            let outcome = train_translator(&DatasetIndex::load(&day)?, &DatasetIndex::load(&night)?, &cfg, init)?;
            if let Some(dir) = out.parent() {
                std::fs::create_dir_all(dir).map_err(|e| Error::Input(format!("{}: {e}", dir.display())))?;
            }
            let hash = outcome.pair.save(&out)?;
            if let Some(last) = outcome.trace.last() {
                println!("epoch {} total {:.6}", last.epoch, last.losses.total);
            }
            println!("translator {hash}");
        }
        Command::Train {
            manifest,
            config,
            resume,
            catalog,
            out,
            trace,
        } => {
            let catalog = ClassCatalog::resolve(&catalog)?;
            let cfg = match config {
                Some(p) => TrainConfig::load(&p)?,
                None => TrainConfig::default(),
            };
            let resume = resume.map(|p| checkpoint::load(&p, &catalog)).transpose()?;
            let outcome = learner::train_segmenter(&cfg, &DatasetIndex::load(&manifest)?, &catalog, resume)?;
            if let Some(dir) = out.parent() {
                std::fs::create_dir_all(dir).map_err(|e| Error::Input(format!("{}: {e}", dir.display())))?;
            }
            let hash = checkpoint::save(&out, &outcome.model, &outcome.state, &catalog)?;
            if let Some(t) = trace {
                write_text(&t, &serde_json::to_string_pretty(&outcome.trace)?)?;
            }
            if let Some(last) = outcome.trace.last() {
                println!("iteration {} loss {:.6}", last.iteration, last.loss.total);
            }
            println!("checkpoint {hash}");
        }
        Command::Infer {
            checkpoint: ckpt,
            manifest,
            catalog,
            fusion,
            out,
        } => {
            let catalog = ClassCatalog::resolve(&catalog)?;
            let (model, _) = checkpoint::load(&ckpt, &catalog)?;
            let index = DatasetIndex::load(&manifest)?;
            let params: Option<FusionParams> = fusion.map(|p| read_json(&p)).transpose()?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Input(format!("{}: {e}", out.display())))?;
            let entries = index
                .entries
                .par_iter()
                .enumerate()
                .map(|(i, e)| {
                    let img = read_image(&e.image)?;
                    let p = params.unwrap_or_else(|| FusionParams::for_dims(img.width(), img.height()));
                    let heads = learner::predict(&model, &img)?;
                    let pred = fuse_from_heads(&heads, &p, &catalog)?;
                    let path = out.join(format!("{i:05}_pred_panoptic.png"));
                    write_panoptic(&path, &pred.labels, &catalog, Some(&pred.scores))?;
                    Ok(DatasetEntry {
                        label: Some(path),
                        ..e.clone()
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let hash = DatasetIndex::new(index.seed, entries)?.save(&out.join("manifest.json"))?;
            println!("predictions {hash}");
        }
        Command::Evaluate { pred, gt, catalog, out } => {
            let catalog = ClassCatalog::resolve(&catalog)?;
            let pred = DatasetIndex::load(&pred)?;
            let gt = DatasetIndex::load(&gt)?;
            if pred.len() != gt.len() {
                return Err(Error::Input(format!(
                    "prediction manifest has {} entries, ground truth {}",
                    pred.len(),
                    gt.len()
                )));
            }
            let evals = pred
                .entries
                .par_iter()
                .zip(&gt.entries)
                .enumerate()
                .map(|(i, (p, g))| {
                    let (pm, scores) = read_panoptic(labels_of(p)?, &catalog)?;
                    let (gm, _) = read_panoptic(labels_of(g)?, &catalog)?;
                    evaluate_image(&pm, &scores, &gm, &catalog, i as u64)
                })
                .collect::<Result<Vec<_>>>()?;
            let report = aggregate(&evals, &catalog)?;
            write_text(&out.join("metrics.json"), &(serde_json::to_string_pretty(&report)? + "\n"))?;
            let text = report.to_text();
            write_text(&out.join("metrics.txt"), &text)?;
            print!("{text}");
        }
        Command::Compare { a, b, out } => {
            let a: MetricReport = read_json(&a)?;
            let b: MetricReport = read_json(&b)?;
            let d = delta_report(&a, &b);
            write_text(&out.join("delta.csv"), &d.to_csv())?;
            let text = d.to_text();
            write_text(&out.join("delta.txt"), &text)?;
            print!("{text}");
        }
        Command::Experiment { config, out } => {
            let cfg = match config {
                Some(p) => ExperimentConfig::load(&p)?,
                None => ExperimentConfig::default(),
            };
            let result = run_experiment(&cfg, &out)?;
            emit_report(&result, &ReportFormat::ALL, &out.join("report"))?;
            print!("{}", result.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("NOCTIS_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("noctis: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
