use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use qmlsec_core::data::stratified_indices;
use qmlsec_core::pipeline::{run_pipeline, PipelineConfig};
use qmlsec_core::qnn::{
    evaluate_qnn, gradient_check, train_qnn, AnsatzSpec, HeadKind, LabeledFeatures, LossKind,
    OptimizerKind, QnnModel, TrainConfig, DEFAULT_ANSATZ,
};
use serde::{Deserialize, Serialize};

use crate::cmd_data::{history_csv, CAE_WEIGHTS};
use crate::config::{load, overlay};
use crate::output::{read_text, OutputDir};
use crate::{OptOut, Out};

#[derive(Clone, Copy, ValueEnum)]
pub enum HeadArg {
    Parity,
    SingleZ,
    Dense,
}

impl From<HeadArg> for HeadKind {
    fn from(h: HeadArg) -> Self {
        match h {
            HeadArg::Parity => HeadKind::Parity,
            HeadArg::SingleZ => HeadKind::SingleZ,
            HeadArg::Dense => HeadKind::Dense,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum LossArg {
    Mse,
    Bce,
    Sce,
}

impl From<LossArg> for LossKind {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Mse => LossKind::Mse,
            LossArg::Bce => LossKind::Bce,
            LossArg::Sce => LossKind::Sce,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum OptimizerArg {
    Adagrad,
    Adam,
    NelderMead,
}

impl From<OptimizerArg> for OptimizerKind {
    fn from(o: OptimizerArg) -> Self {
        match o {
            OptimizerArg::Adagrad => OptimizerKind::Adagrad,
            OptimizerArg::Adam => OptimizerKind::Adam,
            OptimizerArg::NelderMead => OptimizerKind::NelderMead,
        }
    }
}

fn features(path: &Path) -> Result<LabeledFeatures> {
    LabeledFeatures::from_csv(&read_text(path)?)
        .with_context(|| format!("parsing features {}", path.display()))
}

#[derive(Args)]
pub struct TrainArgs {
    /// Feature CSV `f1,…,fd,label`.
    #[arg(long)]
    data: PathBuf,
    /// Validation CSV; without it `--train-fraction` splits `--data`.
    #[arg(long)]
    val: Option<PathBuf>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    ansatz: Option<String>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long, value_enum)]
    head: Option<HeadArg>,
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerArg>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    out: Out,
}

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct TrainSettings {
    ansatz: String,
    layers: usize,
    head: HeadKind,
    train_fraction: f64,
    train: TrainConfig,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            ansatz: DEFAULT_ANSATZ.to_string(),
            layers: 2,
            head: HeadKind::Dense,
            train_fraction: 0.7,
            train: TrainConfig::default(),
        }
    }
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut s: TrainSettings = load(a.config.as_deref())?;
    overlay!(s, a; ansatz, layers, train_fraction);
    if let Some(h) = a.head {
        s.head = h.into();
    }
    if let Some(l) = a.loss {
        s.train.loss = l.into();
    }
    if let Some(o) = a.optimizer {
        s.train.optimizer = o.into();
    }
    let t = &mut s.train;
    overlay!(t, a; learning_rate, epochs, batch_size, seed);

    let data = features(&a.data)?;
    let (train_set, val_set) = match &a.val {
        Some(p) => (data, Some(features(p)?)),
        None if s.train_fraction >= 1.0 => (data, None),
        None => {
            let (tr, va) = stratified_indices(&data.labels, s.train_fraction, s.train.seed)?;
            (data.subset(&tr), Some(data.subset(&va)))
        }
    };
    if train_set.is_empty() {
        bail!("training set is empty");
    }
    let n_classes = train_set.labels.iter().max().map_or(2, |m| (m + 1).max(2));
    let spec = AnsatzSpec::new(&s.ansatz, train_set.width(), s.layers);
    let model = QnnModel::new(spec, s.head, n_classes, s.train.seed)?;

    let mut out = OutputDir::open(
        &a.out.out,
        a.out.force,
        &["model.json", "history.csv", "metrics.json"],
    )?;
    out.input(&a.data).seed("seed", s.train.seed);
    if let Some(v) = &a.val {
        out.input(v);
    }
    let (model, history) = train_qnn(&model, &train_set, val_set.as_ref(), &s.train)?;
    let train_acc = evaluate_qnn(&model, &train_set)?.accuracy;
    let val_acc = val_set
        .as_ref()
        .map(|v| evaluate_qnn(&model, v))
        .transpose()?
        .map(|e| e.accuracy);
    out.write_json("model.json", &model)?;
    out.write("history.csv", &history.to_csv())?;
    out.write_json(
        "metrics.json",
        &serde_json::json!({ "train_accuracy": train_acc, "val_accuracy": val_acc }),
    )?;
    match val_acc {
        Some(v) => println!("train accuracy {train_acc:.4} val accuracy {v:.4}"),
        None => println!("train accuracy {train_acc:.4}"),
    }
    out.finish("qnn train", &s)
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    out: OptOut,
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let model: QnnModel = serde_json::from_str(&read_text(&a.model)?)
        .with_context(|| format!("parsing model {}", a.model.display()))?;
    model.validate()?;
    let data = features(&a.data)?;
    let e = evaluate_qnn(&model, &data)?;
    println!("accuracy {:.4}", e.accuracy);
    if let Some(dir) = &a.out.out {
        let mut out = OutputDir::open(dir, a.out.force, &["evaluation.json"])?;
        out.input(&a.model).input(&a.data);
        out.write_json("evaluation.json", &e)?;
        out.finish("qnn eval", &serde_json::json!({}))?;
    }
    Ok(())
}

pub const GRADCHECK_TOLERANCE: f64 = 1e-5;

#[derive(Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of random models, cycling through the three heads.
    #[arg(long, default_value_t = 6)]
    models: usize,
    #[arg(long, default_value_t = 4)]
    qubits: usize,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[command(flatten)]
    out: OptOut,
}

pub fn gradcheck(a: GradcheckArgs) -> Result<()> {
    let err = gradient_check(a.seed, a.models, a.qubits, a.layers)?;
    println!("max relative error {err:.3e}");
    if let Some(dir) = &a.out.out {
        let mut out = OutputDir::open(dir, a.out.force, &["gradcheck.json"])?;
        out.seed("seed", a.seed);
        out.write_json(
            "gradcheck.json",
            &serde_json::json!({ "max_relative_error": err }),
        )?;
        out.finish(
            "qnn gradcheck",
            &serde_json::json!({ "models": a.models, "qubits": a.qubits, "layers": a.layers }),
        )?;
    }
    if err >= GRADCHECK_TOLERANCE {
        bail!("gradient mismatch {err:.3e} exceeds {GRADCHECK_TOLERANCE:e}");
    }
    Ok(())
}

#[derive(Args)]
pub struct PipelineArgs {
    /// Same number of synthetic images for every class.
    #[arg(long)]
    per_class: Option<usize>,
    /// Samples in each latent classification set.
    #[arg(long)]
    task_samples: Option<usize>,
    #[arg(long)]
    cae_epochs: Option<usize>,
    #[arg(long)]
    qnn_epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    out: Out,
}

pub fn pipeline(a: PipelineArgs) -> Result<()> {
    let mut c: PipelineConfig = load(a.config.as_deref())?;
    if let Some(n) = a.per_class {
        c.class_counts = [n; 6];
    }
    overlay!(c, a; task_samples, seed);
    if let Some(s) = a.seed {
        c.cae_train.seed = s;
        c.qnn_train.seed = s;
    }
    if let Some(e) = a.cae_epochs {
        c.cae_train.epochs = e;
    }
    if let Some(e) = a.qnn_epochs {
        c.qnn_train.epochs = e;
    }
    let planned = [
        "table.csv",
        CAE_WEIGHTS,
        "cae_history.csv",
        "latent_3_class.csv",
        "latent_6_class.csv",
    ];
    let mut out = OutputDir::open(&a.out.out, a.out.force, &planned)?;
    out.seed("seed", c.seed)
        .seed("cae_seed", c.cae_train.seed)
        .seed("qnn_seed", c.qnn_train.seed);
    let report = run_pipeline(&c)?;
    out.write("table.csv", &report.table_csv())?;
    out.write(CAE_WEIGHTS, &report.cae.to_text())?;
    out.write("cae_history.csv", &history_csv(&report.cae_history))?;
    out.write("latent_3_class.csv", &report.tasks.three_class.to_csv())?;
    out.write("latent_6_class.csv", &report.tasks.six_class.to_csv())?;
    for r in &report.results {
        out.write_json(&format!("model_{}.json", r.name), &r.model)?;
        out.write(&format!("history_{}.csv", r.name), &r.history.to_csv())?;
    }
    print!("{}", report.table_csv());
    out.finish("pipeline", &c)
}
