use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use qmlsec_core::noise::run_noisy_counts_with;
use qmlsec_core::simcore::{
    probabilities, run_bound, sample_counts, total_variation_distance, Counts, Distribution,
};

use crate::config::{circuit, device};
use crate::output::OutputDir;
use crate::{OptOut, Out};

/// Basis index as a bitstring, highest qubit first.
fn bitstring(index: usize, n: usize) -> String {
    (0..n)
        .rev()
        .map(|q| if (index >> q) & 1 == 1 { '1' } else { '0' })
        .collect()
}

fn counts_csv(counts: &Counts, n: usize) -> String {
    let mut s = String::from("outcome,count\n");
    for (k, v) in counts {
        let _ = writeln!(s, "{},{v}", bitstring(*k, n));
    }
    s
}

fn probs_csv(d: &Distribution, n: usize) -> String {
    let mut s = String::from("outcome,probability\n");
    for (k, p) in d.probs().iter().enumerate() {
        let _ = writeln!(s, "{},{p:?}", bitstring(k, n));
    }
    s
}

#[derive(Args)]
pub struct RunArgs {
    #[arg(long)]
    circuit: PathBuf,
    /// Values for `param=` bindings, comma-separated.
    #[arg(long, value_delimiter = ',')]
    params: Option<Vec<f64>>,
    /// Sample this many shots instead of writing exact probabilities.
    #[arg(long)]
    shots: Option<u64>,
    /// Device profile file or shipped profile name; implies noisy shots.
    #[arg(long)]
    device: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: Out,
}

pub fn run(a: RunArgs) -> Result<()> {
    let c = circuit(&a.circuit)?;
    let params = a.params.clone().unwrap_or_default();
    let n = c.n_qubits();
    let mut out = OutputDir::open(
        &a.out.out,
        a.out.force,
        &["counts.csv", "probabilities.csv"],
    )?;
    out.input(&a.circuit);
    match (&a.device, a.shots) {
        (Some(spec), shots) => {
            let d = device(spec)?;
            let shots = shots.unwrap_or(1024);
            let counts = run_noisy_counts_with(&c, &params, &d, shots, a.seed, None)?;
            out.seed("seed", a.seed);
            out.write("counts.csv", &counts_csv(&counts, d.n_qubits))?;
            println!("{shots} noisy shots on {}", d.device_id);
        }
        (None, Some(shots)) => {
            let dist = probabilities(&run_bound(&c, &params, None)?);
            let counts = sample_counts(&dist, shots, a.seed)?;
            out.seed("seed", a.seed);
            out.write("counts.csv", &counts_csv(&counts, n))?;
            println!("{shots} ideal shots");
        }
        (None, None) => {
            let dist = probabilities(&run_bound(&c, &params, None)?);
            out.write("probabilities.csv", &probs_csv(&dist, n))?;
        }
    }
    out.finish(
        "sim run",
        &serde_json::json!({ "params": params, "shots": a.shots, "device": a.device }),
    )
}

#[derive(Args)]
pub struct TvdArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, value_delimiter = ',')]
    params: Option<Vec<f64>>,
    #[command(flatten)]
    out: OptOut,
}

pub fn tvd(a: TvdArgs) -> Result<()> {
    let params = a.params.clone().unwrap_or_default();
    let p = probabilities(&run_bound(&circuit(&a.a)?, &params, None)?);
    let q = probabilities(&run_bound(&circuit(&a.b)?, &params, None)?);
    let d = total_variation_distance(&p, &q)?;
    println!("{d:?}");
    if let Some(dir) = &a.out.out {
        let mut out = OutputDir::open(dir, a.out.force, &["tvd.json"])?;
        out.input(&a.a).input(&a.b);
        out.write_json("tvd.json", &serde_json::json!({ "tvd": d }))?;
        out.finish("sim tvd", &serde_json::json!({ "params": params }))?;
    }
    Ok(())
}
