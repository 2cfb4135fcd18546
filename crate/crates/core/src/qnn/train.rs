use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::encoding::Scaler;
use super::gradient::{batch_loss, gradient_parameter_shift, Sample};
use super::model::{forward, LossKind, QnnModel};
use super::QnnError;
use crate::optim::{nelder_mead_minimize, NelderMeadConfig, OptimizerState};
use crate::rng::rng_for;

/// Feature rows with integer class labels.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabeledFeatures {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl LabeledFeatures {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self, QnnError> {
        if features.len() != labels.len() {
            return Err(QnnError::WidthMismatch {
                expected: features.len(),
                got: labels.len(),
            });
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// CSV `f1,…,fd,label` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let d = self.width();
        let header: Vec<String> = (1..=d).map(|i| format!("f{i}")).collect();
        let _ = writeln!(out, "{},label", header.join(","));
        for (row, label) in self.features.iter().zip(&self.labels) {
            for v in row {
                let _ = write!(out, "{v:?},");
            }
            let _ = writeln!(out, "{label}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, QnnError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| QnnError::InvalidValue("empty feature CSV".into()))?;
        let cols = header.split(',').count();
        if cols < 2 || header.split(',').next_back() != Some("label") {
            return Err(QnnError::InvalidValue(format!("bad header `{header}`")));
        }
        let mut out = Self::default();
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != cols {
                return Err(QnnError::InvalidValue(format!(
                    "row {}: expected {cols} fields",
                    i + 2
                )));
            }
            let (f, l) = fields.split_at(cols - 1);
            let row = f
                .iter()
                .map(|v| v.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| QnnError::InvalidValue(format!("row {}: {e}", i + 2)))?;
            let label = l[0]
                .parse::<usize>()
                .map_err(|e| QnnError::InvalidValue(format!("row {}: {e}", i + 2)))?;
            out.features.push(row);
            out.labels.push(label);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adagrad,
    Adam,
    NelderMead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    /// Sparse categorical cross-entropy, Adagrad at 0.5, 10 epochs, batch 32.
    fn default() -> Self {
        Self {
            loss: LossKind::Sce,
            optimizer: OptimizerKind::Adagrad,
            learning_rate: 0.5,
            epochs: 10,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), QnnError> {
        // lr = 0 is accepted so a run can be replayed without updates.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(QnnError::InvalidValue(format!(
                "learning rate {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(QnnError::InvalidValue(
                "epochs and batch size must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    /// CSV `epoch,train_loss,train_acc,val_loss,val_acc`; missing validation
    /// metrics are left empty.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
        for r in &self.epochs {
            let _ = writeln!(
                out,
                "{},{:?},{:?},{},{}",
                r.epoch,
                r.train_loss,
                r.train_acc,
                opt(r.val_loss),
                opt(r.val_acc)
            );
        }
        out
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
}

impl Evaluation {
    /// `(correct, total)` per true class.
    pub fn per_class(&self) -> Vec<(u64, u64)> {
        self.confusion
            .iter()
            .enumerate()
            .map(|(c, row)| (row[c], row.iter().sum()))
            .collect()
    }
}

fn scaled_rows(model: &QnnModel, set: &LabeledFeatures) -> Result<Vec<Vec<f64>>, QnnError> {
    set.features.iter().map(|r| model.prepare(r)).collect()
}

fn check_labels(model: &QnnModel, set: &LabeledFeatures) -> Result<(), QnnError> {
    let n_classes = model.n_classes();
    match set.labels.iter().find(|&&l| l >= n_classes) {
        Some(&label) => Err(QnnError::LabelOutOfRange { label, n_classes }),
        None => Ok(()),
    }
}

/// Accuracy and confusion matrix under exact expectations.
pub fn evaluate_qnn(model: &QnnModel, set: &LabeledFeatures) -> Result<Evaluation, QnnError> {
    if set.is_empty() {
        return Err(QnnError::EmptyDataset);
    }
    check_labels(model, set)?;
    let rows = scaled_rows(model, set)?;
    let k = model.n_classes();
    let mut confusion = vec![vec![0u64; k]; k];
    let predictions = rows
        .iter()
        .map(|x| forward(model, x, None).map(|o| o.predict()))
        .collect::<Result<Vec<_>, _>>()?;
    for (p, &y) in predictions.iter().zip(&set.labels) {
        confusion[y][*p] += 1;
    }
    let correct: u64 = (0..k).map(|c| confusion[c][c]).sum();
    Ok(Evaluation {
        accuracy: correct as f64 / set.len() as f64,
        confusion,
    })
}

fn metrics(
    model: &QnnModel,
    rows: &[Vec<f64>],
    labels: &[usize],
    loss: LossKind,
) -> Result<(f64, f64), QnnError> {
    let batch: Vec<Sample> = rows
        .iter()
        .map(Vec::as_slice)
        .zip(labels.iter().copied())
        .collect();
    let l = batch_loss(model, &batch, loss)?;
    let correct = rows
        .iter()
        .zip(labels)
        .map(|(x, &y)| forward(model, x, None).map(|o| usize::from(o.predict() == y)))
        .sum::<Result<usize, _>>()?;
    Ok((l, correct as f64 / labels.len() as f64))
}

/// Mini-batch training with exact parameter-shift gradients.
///
/// The scaler is fitted on `train` and stored in the returned model. Epoch
/// `e` shuffles with a stream derived from `config.seed`; metrics are
/// recomputed over the full sets after each epoch.
pub fn train_qnn(
    model: &QnnModel,
    train: &LabeledFeatures,
    val: Option<&LabeledFeatures>,
    config: &TrainConfig,
) -> Result<(QnnModel, History), QnnError> {
    config.validate()?;
    model.validate()?;
    if train.is_empty() {
        return Err(QnnError::EmptyDataset);
    }
    if train.width() != model.n_qubits() {
        return Err(QnnError::WidthMismatch {
            expected: model.n_qubits(),
            got: train.width(),
        });
    }
    let mut model = model.clone();
    model.scaler = Some(Scaler::fit(&train.features)?);
    check_labels(&model, train)?;
    let train_rows = scaled_rows(&model, train)?;
    let val_rows = match val {
        Some(v) if !v.is_empty() => {
            check_labels(&model, v)?;
            Some((scaled_rows(&model, v)?, &v.labels))
        }
        _ => None,
    };

    let mut params = model.params();
    let mut optimizer = match config.optimizer {
        OptimizerKind::Adagrad => Some(OptimizerState::adagrad(config.learning_rate, params.len())),
        OptimizerKind::Adam => Some(OptimizerState::adam(config.learning_rate, params.len())),
        OptimizerKind::NelderMead => None,
    };
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = History::default();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng_for(config.seed, epoch as u64));
        match optimizer.as_mut() {
            Some(opt) => {
                for chunk in order.chunks(config.batch_size) {
                    let batch: Vec<Sample> = chunk
                        .iter()
                        .map(|&i| (train_rows[i].as_slice(), train.labels[i]))
                        .collect();
                    let (_, grad) = gradient_parameter_shift(&model, &batch, config.loss)?;
                    opt.step(&mut params, &grad.flat())
                        .map_err(|e| QnnError::InvalidValue(e.to_string()))?;
                    model.set_params(&params)?;
                }
            }
            None => {
                // One simplex run per epoch on the full training loss; the
                // learning rate sets the initial simplex size.
                let batch: Vec<Sample> = train_rows
                    .iter()
                    .map(Vec::as_slice)
                    .zip(train.labels.iter().copied())
                    .collect();
                let cfg = NelderMeadConfig {
                    max_iter: 10 * params.len(),
                    tol: 1e-10,
                    initial_step: config.learning_rate,
                    ..NelderMeadConfig::default()
                };
                let probe = model.clone();
                let result = nelder_mead_minimize(
                    |p| {
                        let mut m = probe.clone();
                        m.set_params(p).expect("parameter length fixed");
                        batch_loss(&m, &batch, config.loss).unwrap_or(f64::NAN)
                    },
                    &params,
                    &cfg,
                )
                .map_err(|e| QnnError::InvalidValue(e.to_string()))?;
                params = result.x;
                model.set_params(&params)?;
            }
        }
        let (train_loss, train_acc) = metrics(&model, &train_rows, &train.labels, config.loss)?;
        let (val_loss, val_acc) = match &val_rows {
            Some((rows, labels)) => {
                let (l, a) = metrics(&model, rows, labels, config.loss)?;
                (Some(l), Some(a))
            }
            None => (None, None),
        };
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            train_acc,
            val_loss,
            val_acc,
        });
    }
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qnn::encoding::AnsatzSpec;
    use crate::qnn::model::HeadKind;
    use rand::Rng;

    fn separable(n: usize, seed: u64) -> LabeledFeatures {
        let mut rng = crate::rng::rng(seed);
        let mut out = LabeledFeatures::default();
        for _ in 0..n {
            let x: f64 = rng.random_range(-1.0..1.0);
            let y: f64 = rng.random_range(-1.0..1.0);
            if x.abs() < 0.1 {
                continue;
            }
            out.features.push(vec![x, y]);
            out.labels.push(usize::from(x > 0.0));
        }
        out
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let m = QnnModel::new(AnsatzSpec::crx_ring(2, 1), HeadKind::Dense, 2, 3).unwrap();
        let data = separable(64, 1);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 2,
            ..Default::default()
        };
        let (trained, h) = train_qnn(&m, &data, None, &cfg).unwrap();
        assert_eq!(trained.params(), m.params());
        assert_eq!(h.epochs[0].train_loss, h.epochs[1].train_loss);
    }

    #[test]
    fn learns_linearly_separable_binary_task() {
        let data = separable(200, 2);
        let m = QnnModel::new(AnsatzSpec::crx_ring(2, 2), HeadKind::Dense, 2, 7).unwrap();
        let (_, h) = train_qnn(
            &m,
            &data,
            None,
            &TrainConfig {
                seed: 7,
                ..Default::default()
            },
        )
        .unwrap();
        let acc = h.last().unwrap().train_acc;
        assert!(acc >= 0.9, "train accuracy {acc}");
    }

    #[test]
    fn training_is_deterministic() {
        let data = separable(80, 4);
        let m = QnnModel::new(AnsatzSpec::crx_ring(2, 1), HeadKind::Dense, 2, 1).unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 8,
            seed: 12,
            ..Default::default()
        };
        let a = train_qnn(&m, &data, Some(&data), &cfg).unwrap();
        let b = train_qnn(&m, &data, Some(&data), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.1.to_csv(), b.1.to_csv());
    }

    #[test]
    fn other_optimizers_run() {
        let data = separable(40, 5);
        let m = QnnModel::new(AnsatzSpec::crx_ring(2, 1), HeadKind::SingleZ, 2, 1).unwrap();
        for optimizer in [OptimizerKind::Adam, OptimizerKind::NelderMead] {
            let cfg = TrainConfig {
                loss: LossKind::Mse,
                optimizer,
                learning_rate: 0.1,
                epochs: 2,
                ..Default::default()
            };
            let (_, h) = train_qnn(&m, &data, None, &cfg).unwrap();
            assert!(h.epochs[1].train_loss <= h.epochs[0].train_loss + 0.5);
        }
    }

    #[test]
    fn evaluation_cases() {
        let mut m = QnnModel::new(AnsatzSpec::crx_ring(2, 1), HeadKind::Dense, 3, 1).unwrap();
        let zeros = vec![0.0; m.head.num_params()];
        let theta = m.theta.clone();
        let mut flat = theta;
        flat.extend(zeros);
        m.set_params(&flat).unwrap();
        let mut rng = crate::rng::rng(3);
        let n = 3000;
        let set = LabeledFeatures::new(
            (0..n)
                .map(|_| vec![rng.random_range(0.0..6.0), rng.random_range(0.0..6.0)])
                .collect(),
            (0..n).map(|_| rng.random_range(0..3)).collect(),
        )
        .unwrap();
        let ev = evaluate_qnn(&m, &set).unwrap();
        assert!((ev.accuracy - 1.0 / 3.0).abs() < 0.03, "{}", ev.accuracy);
        assert_eq!(ev.per_class().iter().map(|p| p.1).sum::<u64>(), n as u64);
        assert!(evaluate_qnn(&m, &LabeledFeatures::default()).is_err());
    }

    #[test]
    fn perfect_predictions_score_one() {
        let m = QnnModel::new(AnsatzSpec::crx_ring(2, 1), HeadKind::Dense, 2, 1).unwrap();
        let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.3, 1.0]).collect();
        let labels = xs
            .iter()
            .map(|x| forward(&m, x, None).unwrap().predict())
            .collect();
        let ev = evaluate_qnn(&m, &LabeledFeatures::new(xs, labels).unwrap()).unwrap();
        assert_eq!(ev.accuracy, 1.0);
    }

    #[test]
    fn rejects_bad_training_input() {
        let m = QnnModel::new(AnsatzSpec::crx_ring(2, 1), HeadKind::Dense, 2, 1).unwrap();
        let cfg = TrainConfig::default();
        assert!(matches!(
            train_qnn(&m, &LabeledFeatures::default(), None, &cfg),
            Err(QnnError::EmptyDataset)
        ));
        let wide = LabeledFeatures::new(vec![vec![1.0, 2.0, 3.0]], vec![0]).unwrap();
        assert!(train_qnn(&m, &wide, None, &cfg).is_err());
        let bad = LabeledFeatures::new(vec![vec![1.0, 2.0]], vec![4]).unwrap();
        assert!(train_qnn(&m, &bad, None, &cfg).is_err());
        let cfg = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        assert!(train_qnn(&m, &separable(10, 1), None, &cfg).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let set =
            LabeledFeatures::new(vec![vec![0.1, -2.5e-7], vec![3.0, 4.0]], vec![1, 0]).unwrap();
        let text = set.to_csv();
        assert!(text.starts_with("f1,f2,label\n"));
        assert_eq!(LabeledFeatures::from_csv(&text).unwrap(), set);
        assert!(LabeledFeatures::from_csv("a,b\n1,2\n").is_err());
    }
}
