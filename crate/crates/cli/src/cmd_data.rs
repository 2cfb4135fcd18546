use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use qmlsec_core::cae::{
    cae_encode_dataset, cae_init, cae_train as train_cae, CaeConfig, CaeModel, CaeTrainConfig,
    Image,
};
use qmlsec_core::data::{
    generate_synthetic_counts, load_image_directory, manifest_from_csv, manifest_to_csv, read_pgm,
    resize_to_square, stratified_indices, write_image_directory, DefectClass, ManifestEntry,
    IMAGE_SIDE, REFERENCE_CLASS_COUNTS,
};
use serde::{Deserialize, Serialize};

use crate::config::{load, overlay};
use crate::output::{read_text, OutputDir};
use crate::Out;

pub const MANIFEST: &str = "manifest.csv";

#[derive(Args)]
pub struct GenArgs {
    /// Same number of images for every class.
    #[arg(long)]
    per_class: Option<usize>,
    /// Six comma-separated per-class counts in class-code order.
    #[arg(long, value_delimiter = ',', conflicts_with = "per_class")]
    counts: Option<Vec<usize>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    out: Out,
}

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct GenSettings {
    counts: [usize; 6],
    seed: u64,
}

impl Default for GenSettings {
    fn default() -> Self {
        Self {
            counts: REFERENCE_CLASS_COUNTS,
            seed: 0,
        }
    }
}

fn class_dirs() -> Vec<&'static str> {
    DefectClass::ALL.iter().map(|c| c.name()).collect()
}

fn write_images(out: &mut OutputDir, set: &qmlsec_core::data::LabeledImageSet) -> Result<()> {
    let entries = write_image_directory(set, out.path())?;
    for c in DefectClass::ALL {
        if entries.iter().any(|e| e.label == c) {
            out.record(&format!("{}/", c.name()));
        }
    }
    out.write(MANIFEST, &manifest_to_csv(&entries))
}

pub fn gen(a: GenArgs) -> Result<()> {
    let mut s: GenSettings = load(a.config.as_deref())?;
    overlay!(s, a; seed);
    if let Some(n) = a.per_class {
        s.counts = [n; 6];
    }
    if let Some(c) = &a.counts {
        s.counts = c
            .as_slice()
            .try_into()
            .map_err(|_| anyhow::anyhow!("--counts needs 6 values, got {}", c.len()))?;
    }
    let set = generate_synthetic_counts(&s.counts, s.seed)?;
    let mut planned = class_dirs();
    planned.push(MANIFEST);
    let mut out = OutputDir::open(&a.out.out, a.out.force, &planned)?;
    out.seed("seed", s.seed);
    write_images(&mut out, &set)?;
    println!("wrote {} images to {}", set.len(), a.out.out.display());
    out.finish("dataset gen", &s)
}

#[derive(Args)]
pub struct IngestArgs {
    /// Directory holding one subdirectory of PGM files per class.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    out: Out,
}

pub fn ingest(a: IngestArgs) -> Result<()> {
    let set = load_image_directory(&a.input)?;
    let mut planned = class_dirs();
    planned.push(MANIFEST);
    let mut out = OutputDir::open(&a.out.out, a.out.force, &planned)?;
    out.input(&a.input);
    write_images(&mut out, &set)?;
    let counts = set.class_counts();
    for c in DefectClass::ALL {
        println!("{},{}", c.name(), counts[c.code()]);
    }
    out.finish("dataset ingest", &serde_json::json!({ "side": IMAGE_SIDE }))
}

#[derive(Args)]
pub struct SplitArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Share of each class placed in the training manifest.
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    out: Out,
}

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct SplitSettings {
    fraction: f64,
    seed: u64,
}

impl Default for SplitSettings {
    fn default() -> Self {
        Self {
            fraction: 0.7,
            seed: 0,
        }
    }
}

/// Manifest rows with relative paths resolved against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let root = path.parent().unwrap_or(Path::new(""));
    let entries = manifest_from_csv(&read_text(path)?)
        .with_context(|| format!("parsing manifest {}", path.display()))?;
    Ok(entries
        .into_iter()
        .map(|e| ManifestEntry {
            path: root.join(&e.path).display().to_string(),
            label: e.label,
        })
        .collect())
}

pub fn split(a: SplitArgs) -> Result<()> {
    let mut s: SplitSettings = load(a.config.as_deref())?;
    overlay!(s, a; fraction, seed);
    let entries: Vec<ManifestEntry> = read_manifest(&a.manifest)?
        .into_iter()
        .map(|e| {
            let p = Path::new(&e.path);
            let abs = p
                .canonicalize()
                .with_context(|| format!("resolving {}", p.display()))?;
            Ok(ManifestEntry {
                path: abs.display().to_string(),
                label: e.label,
            })
        })
        .collect::<Result<_>>()?;
    let labels: Vec<usize> = entries.iter().map(|e| e.label.code()).collect();
    let (train, test) = stratified_indices(&labels, s.fraction, s.seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| entries[i].clone()).collect::<Vec<_>>();
    let mut out = OutputDir::open(&a.out.out, a.out.force, &["train.csv", "test.csv"])?;
    out.input(&a.manifest).seed("seed", s.seed);
    out.write("train.csv", &manifest_to_csv(&pick(&train)))?;
    out.write("test.csv", &manifest_to_csv(&pick(&test)))?;
    println!("train {} test {}", train.len(), test.len());
    out.finish("dataset split", &s)
}

pub fn load_images(manifest: &Path, side: usize) -> Result<(Vec<Image>, Vec<usize>)> {
    let entries = read_manifest(manifest)?;
    if entries.is_empty() {
        bail!("manifest {} lists no images", manifest.display());
    }
    let mut images = Vec::with_capacity(entries.len());
    for e in &entries {
        let im = read_pgm(Path::new(&e.path))?;
        images.push(if im.width == side && im.height == side {
            im
        } else {
            resize_to_square(&im, side)
        });
    }
    Ok((images, entries.iter().map(|e| e.label.code()).collect()))
}

#[derive(Args)]
pub struct CaeTrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Latent dimension.
    #[arg(long)]
    latent: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    out: Out,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(default)]
struct CaeSettings {
    model: CaeConfig,
    train: CaeTrainConfig,
}

pub const CAE_WEIGHTS: &str = "cae.weights";

pub fn history_csv(history: &[f64]) -> String {
    let mut s = String::from("epoch,mse\n");
    for (i, v) in history.iter().enumerate() {
        s.push_str(&format!("{},{v:?}\n", i + 1));
    }
    s
}

pub fn cae_train(a: CaeTrainArgs) -> Result<()> {
    let mut s: CaeSettings = load(a.config.as_deref())?;
    if let Some(v) = a.latent {
        s.model.latent = v;
    }
    let t = &mut s.train;
    overlay!(t, a; epochs, learning_rate, batch_size, seed);
    let (images, _) = load_images(&a.manifest, s.model.side)?;
    let mut out = OutputDir::open(&a.out.out, a.out.force, &[CAE_WEIGHTS, "history.csv"])?;
    out.input(&a.manifest).seed("seed", s.train.seed);
    let init = cae_init(s.model, s.train.seed)?;
    let (model, history) = train_cae(&init, &images, &s.train)?;
    out.write(CAE_WEIGHTS, &model.to_text())?;
    out.write("history.csv", &history_csv(&history))?;
    if let Some(last) = history.last() {
        println!("final mse {last:.6}");
    }
    out.finish("cae train", &s)
}

#[derive(Args)]
pub struct CaeEncodeArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    out: Out,
}

pub fn cae_encode(a: CaeEncodeArgs) -> Result<()> {
    let model = CaeModel::from_text(&read_text(&a.weights)?)
        .with_context(|| format!("parsing weights {}", a.weights.display()))?;
    let (images, labels) = load_images(&a.manifest, model.config.side)?;
    let latents = cae_encode_dataset(&model, &images, &labels)?;
    let mut out = OutputDir::open(&a.out.out, a.out.force, &["latent.csv"])?;
    out.input(&a.weights).input(&a.manifest);
    out.write("latent.csv", &latents.to_csv())?;
    println!(
        "encoded {} images to {} features",
        latents.len(),
        latents.width()
    );
    out.finish("cae encode", &model.config)
}
