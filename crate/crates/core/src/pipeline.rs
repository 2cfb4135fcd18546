//! End-to-end defect classification run: synthetic images, autoencoder
//! compression, then QNN training on 3-class and 6-class latent sets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cae::{
    cae_encode_dataset, cae_init, cae_train, CaeConfig, CaeError, CaeModel, CaeTrainConfig,
};
use crate::data::{
    generate_synthetic_counts, split_dataset, stratified_indices, DataError, LabeledImageSet,
    REFERENCE_CLASS_COUNTS,
};
use crate::qnn::{
    evaluate_qnn, train_qnn, AnsatzSpec, HeadKind, History, LabeledFeatures, QnnError, QnnModel,
    TrainConfig,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Cae(#[from] CaeError),
    #[error(transparent)]
    Qnn(#[from] QnnError),
    #[error("{0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub class_counts: [usize; 6],
    pub seed: u64,
    /// Autoencoder training share of the image set; the rest is encoded.
    pub cae_train_fraction: f64,
    /// QNN training share of each latent set.
    pub train_fraction: f64,
    pub cae: CaeConfig,
    pub cae_train: CaeTrainConfig,
    /// Samples in each latent classification set.
    pub task_samples: usize,
    pub qnn_layers: usize,
    pub qnn_train: TrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            class_counts: REFERENCE_CLASS_COUNTS,
            seed: 0,
            cae_train_fraction: 0.7,
            train_fraction: 0.7,
            cae: CaeConfig::with_latent(4),
            cae_train: CaeTrainConfig::default(),
            task_samples: 2000,
            qnn_layers: 2,
            qnn_train: TrainConfig::default(),
        }
    }
}

/// Latent classification sets built from the autoencoder's holdout images.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTasks {
    pub three_class: LabeledFeatures,
    pub six_class: LabeledFeatures,
}

/// Picks two disjoint class-balanced sets of `n` samples from `latents`:
/// classes 0 to 2 first, then all six classes from what is left. Within a
/// class, samples are taken in order; both sets keep the original order.
pub fn build_latent_tasks(
    latents: &LabeledFeatures,
    n: usize,
) -> Result<LatentTasks, PipelineError> {
    let mut used = vec![false; latents.len()];
    let mut pick = |k: usize| -> Result<Vec<usize>, PipelineError> {
        let mut chosen = Vec::with_capacity(n);
        for class in 0..k {
            let want = n / k + usize::from(class < n % k);
            let idx: Vec<usize> = (0..latents.len())
                .filter(|&i| latents.labels[i] == class && !used[i])
                .take(want)
                .collect();
            if idx.len() < want {
                return Err(PipelineError::Config(format!(
                    "{k}-class set needs {want} samples of class {class}, {} available",
                    idx.len()
                )));
            }
            idx.iter().for_each(|&i| used[i] = true);
            chosen.extend(idx);
        }
        chosen.sort_unstable();
        Ok(chosen)
    };
    let three = pick(3)?;
    let six = pick(6)?;
    Ok(LatentTasks {
        three_class: latents.subset(&three),
        six_class: latents.subset(&six),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskResult {
    pub name: String,
    pub n_classes: usize,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub model: QnnModel,
    pub history: History,
}

/// Splits `set` 70:30 (stratified) and trains a dense-head QNN with one qubit
/// per latent feature.
pub fn run_latent_task(
    name: &str,
    set: &LabeledFeatures,
    n_classes: usize,
    layers: usize,
    train_fraction: f64,
    config: &TrainConfig,
) -> Result<TaskResult, PipelineError> {
    let (tr, va) = stratified_indices(&set.labels, train_fraction, config.seed)?;
    let (train, val) = (set.subset(&tr), set.subset(&va));
    let spec = AnsatzSpec::crx_ring(set.width(), layers);
    let model = QnnModel::new(spec, HeadKind::Dense, n_classes, config.seed)?;
    let (model, history) = train_qnn(&model, &train, Some(&val), config)?;
    Ok(TaskResult {
        name: name.to_string(),
        n_classes,
        train_accuracy: evaluate_qnn(&model, &train)?.accuracy,
        val_accuracy: evaluate_qnn(&model, &val)?.accuracy,
        model,
        history,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub cae: CaeModel,
    pub cae_history: Vec<f64>,
    pub tasks: LatentTasks,
    pub results: Vec<TaskResult>,
}

impl PipelineReport {
    /// `dataset,train_accuracy,val_accuracy` rows.
    pub fn table_csv(&self) -> String {
        let mut s = String::from("dataset,train_accuracy,val_accuracy\n");
        for r in &self.results {
            s.push_str(&format!(
                "{},{:.4},{:.4}\n",
                r.name, r.train_accuracy, r.val_accuracy
            ));
        }
        s
    }
}

/// Trains the autoencoder on the training split of `images` and encodes the
/// holdout split.
pub fn compress_images(
    images: &LabeledImageSet,
    config: &PipelineConfig,
) -> Result<(CaeModel, Vec<f64>, LabeledFeatures), PipelineError> {
    let (train, holdout) = split_dataset(images, config.cae_train_fraction, config.seed)?;
    let init = cae_init(config.cae, config.seed)?;
    let (cae, history) = cae_train(&init, &train.images, &config.cae_train)?;
    let latents = cae_encode_dataset(&cae, &holdout.images, &holdout.label_codes())?;
    Ok((cae, history, latents))
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineReport, PipelineError> {
    let images = generate_synthetic_counts(&config.class_counts, config.seed)?;
    let (cae, cae_history, latents) = compress_images(&images, config)?;
    let tasks = build_latent_tasks(&latents, config.task_samples)?;
    let results = vec![
        run_latent_task(
            "defect_3_class",
            &tasks.three_class,
            3,
            config.qnn_layers,
            config.train_fraction,
            &config.qnn_train,
        )?,
        run_latent_task(
            "defect_6_class",
            &tasks.six_class,
            6,
            config.qnn_layers,
            config.train_fraction,
            &config.qnn_train,
        )?,
    ];
    Ok(PipelineReport {
        cae,
        cae_history,
        tasks,
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latent_tasks_are_disjoint() {
        let labels: Vec<usize> = (0..72).map(|i| i % 6).collect();
        let features = (0..72).map(|i| vec![i as f64]).collect();
        let set = LabeledFeatures::new(features, labels).unwrap();
        let t = build_latent_tasks(&set, 20).unwrap();
        assert!(t.three_class.labels.iter().all(|&l| l < 3));
        assert_eq!(t.three_class.len(), 20);
        assert_eq!(t.six_class.len(), 20);
        let count = |s: &LabeledFeatures, c: usize| s.labels.iter().filter(|&&l| l == c).count();
        assert_eq!(
            (0..3).map(|c| count(&t.three_class, c)).collect::<Vec<_>>(),
            vec![7, 7, 6]
        );
        assert_eq!(
            (0..6).map(|c| count(&t.six_class, c)).collect::<Vec<_>>(),
            vec![4, 4, 3, 3, 3, 3]
        );
        for f in &t.six_class.features {
            assert!(!t.three_class.features.contains(f));
        }
        assert!(build_latent_tasks(&set, 30).is_err());
    }
}
