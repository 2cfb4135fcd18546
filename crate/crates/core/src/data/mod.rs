//! Labelled PCB-defect image sets: a synthetic motif generator, PGM
//! directory ingestion and stratified splitting.

mod pgm;
mod synth;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use pgm::{read_pgm, resize_to_square, write_pgm};
pub use synth::{generate_synthetic_counts, generate_synthetic_defects, render_defect, IMAGE_SIDE};

use crate::cae::{CaeError, Image};
use crate::rng::rng_for;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("count per class must be at least 1")]
    ZeroCount,
    #[error("unknown defect class `{0}`")]
    UnknownClass(String),
    #[error("no images found under {0}")]
    Empty(PathBuf),
    #[error("{path}: {msg}")]
    BadImage { path: PathBuf, msg: String },
    #[error("split fraction {0} outside (0, 1)")]
    Fraction(f64),
    #[error("{0} images but {1} labels")]
    LengthMismatch(usize, usize),
    #[error("manifest line {line}: {msg}")]
    Manifest { line: usize, msg: String },
    #[error(transparent)]
    Image(#[from] CaeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The six PCB defect categories, coded 0 to 5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectClass {
    MissingHole,
    MouseBite,
    OpenCircuit,
    Short,
    Spur,
    SpuriousCopper,
}

impl DefectClass {
    pub const ALL: [DefectClass; 6] = [
        DefectClass::MissingHole,
        DefectClass::MouseBite,
        DefectClass::OpenCircuit,
        DefectClass::Short,
        DefectClass::Spur,
        DefectClass::SpuriousCopper,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            DefectClass::MissingHole => "missing_hole",
            DefectClass::MouseBite => "mouse_bite",
            DefectClass::OpenCircuit => "open_circuit",
            DefectClass::Short => "short",
            DefectClass::Spur => "spur",
            DefectClass::SpuriousCopper => "spurious_copper",
        }
    }
}

impl fmt::Display for DefectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DefectClass {
    type Err = DataError;

    /// Case-insensitive; `-` and spaces are accepted in place of `_`.
    fn from_str(s: &str) -> Result<Self, DataError> {
        let norm: String = s
            .trim()
            .chars()
            .map(|c| match c {
                '-' | ' ' => '_',
                c => c.to_ascii_lowercase(),
            })
            .collect();
        Self::ALL
            .into_iter()
            .find(|c| c.name() == norm)
            .ok_or_else(|| DataError::UnknownClass(s.to_string()))
    }
}

/// Per-class image counts of the augmented PCB defect dataset, in code order.
pub const REFERENCE_CLASS_COUNTS: [usize; 6] = [3612, 3684, 3548, 3508, 3636, 3676];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Synthetic,
    Ingested,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImageSet {
    pub images: Vec<Image>,
    pub labels: Vec<DefectClass>,
    pub provenance: Provenance,
}

impl LabeledImageSet {
    pub fn new(
        images: Vec<Image>,
        labels: Vec<DefectClass>,
        provenance: Provenance,
    ) -> Result<Self, DataError> {
        if images.len() != labels.len() {
            return Err(DataError::LengthMismatch(images.len(), labels.len()));
        }
        Ok(Self {
            images,
            labels,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn label_codes(&self) -> Vec<usize> {
        self.labels.iter().map(|c| c.code()).collect()
    }

    /// Number of samples of each class, in code order.
    pub fn class_counts(&self) -> [usize; 6] {
        let mut counts = [0; 6];
        for l in &self.labels {
            counts[l.code()] += 1;
        }
        counts
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            provenance: self.provenance,
        }
    }
}

/// Seeded stratified split. Each class contributes `round(fraction · n_c)`
/// samples to the first set; both sets keep the original sample order.
pub fn split_dataset(
    set: &LabeledImageSet,
    fraction: f64,
    seed: u64,
) -> Result<(LabeledImageSet, LabeledImageSet), DataError> {
    let (train, holdout) = stratified_indices(&set.label_codes(), fraction, seed)?;
    Ok((set.select(&train), set.select(&holdout)))
}

/// Index form of [`split_dataset`] over arbitrary integer labels.
pub fn stratified_indices(
    labels: &[usize],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DataError::Fraction(fraction));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut train = Vec::new();
    let mut holdout = Vec::new();
    for class in 0..n_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng_for(seed, class as u64));
        let take = (fraction * idx.len() as f64).round() as usize;
        train.extend_from_slice(&idx[..take]);
        holdout.extend_from_slice(&idx[take..]);
    }
    train.sort_unstable();
    holdout.sort_unstable();
    Ok((train, holdout))
}

/// Reads `root/<class>/*.pgm`, one subdirectory per defect class. Images are
/// center-cropped and resized to the standard side length.
pub fn load_image_directory(root: &Path) -> Result<LabeledImageSet, DataError> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    dirs.retain(|p| p.is_dir());
    dirs.sort();
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for dir in dirs {
        let name = dir
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        if name.starts_with('.') {
            continue;
        }
        let class: DefectClass = name.parse()?;
        let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        files.retain(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
        });
        files.sort();
        for f in files {
            let raw = read_pgm(&f)?;
            images.push(resize_to_square(&raw, IMAGE_SIDE));
            labels.push(class);
        }
    }
    if images.is_empty() {
        return Err(DataError::Empty(root.to_path_buf()));
    }
    LabeledImageSet::new(images, labels, Provenance::Ingested)
}

/// One `path,label` row of a dataset manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: String,
    pub label: DefectClass,
}

pub fn manifest_to_csv(entries: &[ManifestEntry]) -> String {
    let mut s = String::from("path,label\n");
    for e in entries {
        s.push_str(&format!("{},{}\n", e.path, e.label.code()));
    }
    s
}

/// Parses a manifest; labels may be codes or class names.
pub fn manifest_from_csv(text: &str) -> Result<Vec<ManifestEntry>, DataError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "path,label" => {}
        _ => {
            return Err(DataError::Manifest {
                line: 1,
                msg: "expected header `path,label`".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| DataError::Manifest { line: n + 1, msg };
        let (path, label) = line
            .rsplit_once(',')
            .ok_or_else(|| err("expected `path,label`".into()))?;
        let label = match label.trim().parse::<usize>() {
            Ok(code) => DefectClass::from_code(code)
                .ok_or_else(|| err(format!("label code {code} out of range")))?,
            Err(_) => label.parse().map_err(|e: DataError| err(e.to_string()))?,
        };
        out.push(ManifestEntry {
            path: path.to_string(),
            label,
        });
    }
    Ok(out)
}

/// Writes every image as `dir/<class>/<index>.pgm` and returns the manifest
/// rows with paths relative to `dir`.
pub fn write_image_directory(
    set: &LabeledImageSet,
    dir: &Path,
) -> Result<Vec<ManifestEntry>, DataError> {
    let mut entries = Vec::with_capacity(set.len());
    for (i, (im, label)) in set.images.iter().zip(&set.labels).enumerate() {
        let sub = dir.join(label.name());
        std::fs::create_dir_all(&sub)?;
        let rel = format!("{}/{i:06}.pgm", label.name());
        write_pgm(&dir.join(&rel), im)?;
        entries.push(ManifestEntry {
            path: rel,
            label: *label,
        });
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_codes_and_names() {
        assert_eq!(DefectClass::ALL.len(), 6);
        for (i, c) in DefectClass::ALL.iter().enumerate() {
            assert_eq!(c.code(), i);
            assert_eq!(DefectClass::from_code(i), Some(*c));
            assert_eq!(c.name().parse::<DefectClass>().unwrap(), *c);
        }
        assert_eq!(
            "Missing_hole".parse::<DefectClass>().unwrap(),
            DefectClass::MissingHole
        );
        assert_eq!(
            "spurious-copper".parse::<DefectClass>().unwrap(),
            DefectClass::SpuriousCopper
        );
        assert!("scratch".parse::<DefectClass>().is_err());
        assert_eq!(REFERENCE_CLASS_COUNTS.iter().sum::<usize>(), 21664);
    }

    #[test]
    fn split_balanced_and_small() {
        let labels: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let (a, b) = stratified_indices(&labels, 0.7, 1).unwrap();
        assert_eq!((a.len(), b.len()), (70, 30));
        let (a, b) = stratified_indices(&[0, 0, 1, 1, 2, 2], 0.5, 3).unwrap();
        assert_eq!((a.len(), b.len()), (3, 3));
        for c in 0..3 {
            assert_eq!(a.iter().filter(|&&i| i / 2 == c).count(), 1);
        }
        assert_eq!(
            stratified_indices(&labels, 0.7, 1).unwrap(),
            stratified_indices(&labels, 0.7, 1).unwrap()
        );
        assert_ne!(
            stratified_indices(&labels, 0.7, 1).unwrap(),
            stratified_indices(&labels, 0.7, 2).unwrap()
        );
        for f in [0.0, 1.0, -0.2, f64::NAN] {
            assert!(matches!(
                stratified_indices(&labels, f, 0),
                Err(DataError::Fraction(_))
            ));
        }
    }

    #[test]
    fn manifest_round_trip() {
        let entries = vec![
            ManifestEntry {
                path: "short/000001.pgm".into(),
                label: DefectClass::Short,
            },
            ManifestEntry {
                path: "a,b/x.pgm".into(),
                label: DefectClass::Spur,
            },
        ];
        let csv = manifest_to_csv(&entries);
        assert!(csv.starts_with("path,label\nshort/000001.pgm,3\n"));
        assert_eq!(manifest_from_csv(&csv).unwrap(), entries);
        let named = manifest_from_csv("path,label\nfoo.pgm,mouse_bite\n").unwrap();
        assert_eq!(named[0].label, DefectClass::MouseBite);
        assert!(manifest_from_csv("file,class\n").is_err());
        assert!(manifest_from_csv("path,label\nx.pgm,9\n").is_err());
    }
}
