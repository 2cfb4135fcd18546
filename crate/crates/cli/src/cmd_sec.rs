use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use qmlsec_core::security::{
    allocate_with_buffers, hamming_fraction, insert_dummy_gates, qupuf_signature,
    rank_insertion_points, recombine_circuit, restore_circuit, simulate_fault_injection,
    split_circuit, Fragment, Placement, PufVariant, RankMode, SecurityKey, Selection, Signature,
    SplitPolicy,
};
use qmlsec_core::simcore::{Circuit, GateKind, GateOp};

use crate::config::{circuit, device};
use crate::output::{read_text, OutputDir};
use crate::{OptOut, Out};

#[derive(Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Hadamard,
    Decoherence,
}

#[derive(Args)]
pub struct PufArgs {
    /// Device profile file or shipped profile name.
    #[arg(long)]
    device: String,
    #[arg(long, value_enum, default_value = "hadamard")]
    variant: VariantArg,
    #[arg(long, default_value_t = 10_000)]
    shots: u64,
    /// Idle time of the decoherence challenge.
    #[arg(long)]
    delay: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Signature CSV to report the Hamming fraction against.
    #[arg(long)]
    compare: Option<PathBuf>,
    #[command(flatten)]
    out: Out,
}

pub fn puf(a: PufArgs) -> Result<()> {
    let d = device(&a.device)?;
    let variant = match a.variant {
        VariantArg::Hadamard => PufVariant::Hadamard,
        VariantArg::Decoherence => PufVariant::Decoherence,
    };
    let mut out = OutputDir::open(&a.out.out, a.out.force, &["signature.csv"])?;
    out.seed("seed", a.seed);
    let sig = qupuf_signature(&d, variant, a.shots, a.delay, a.seed)?;
    out.write("signature.csv", &sig.to_csv())?;
    let bits: String = sig
        .bits
        .iter()
        .map(|&b| if b { '1' } else { '0' })
        .collect();
    println!("{} {bits}", d.device_id);
    if let Some(p) = &a.compare {
        let other = Signature::from_csv(&read_text(p)?, "reference", 0)
            .with_context(|| format!("parsing signature {}", p.display()))?;
        println!("hamming fraction {:?}", hamming_fraction(&sig, &other)?);
        out.input(p);
    }
    out.finish(
        "sec puf",
        &serde_json::json!({
            "device": a.device, "variant": variant, "shots": a.shots, "delay": a.delay
        }),
    )
}

#[derive(Clone, Copy, ValueEnum)]
pub enum PolicyArg {
    ByGateCount,
    ByLayer,
}

#[derive(Args)]
pub struct SplitArgs {
    #[arg(long)]
    circuit: PathBuf,
    /// Number of fragments.
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value = "by-gate-count")]
    policy: PolicyArg,
    /// Emit fragments in a seeded random order.
    #[arg(long)]
    shuffle_seed: Option<u64>,
    #[command(flatten)]
    out: Out,
}

pub fn split(a: SplitArgs) -> Result<()> {
    let c = circuit(&a.circuit)?;
    let policy = match a.policy {
        PolicyArg::ByGateCount => SplitPolicy::ByGateCount,
        PolicyArg::ByLayer => SplitPolicy::ByLayer,
    };
    let fragments = split_circuit(&c, a.k, policy, a.shuffle_seed)?;
    let names: Vec<String> = (0..fragments.len())
        .map(|j| format!("part_{j}.frag"))
        .collect();
    let planned: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut out = OutputDir::open(&a.out.out, a.out.force, &planned)?;
    out.input(&a.circuit);
    if let Some(s) = a.shuffle_seed {
        out.seed("shuffle_seed", s);
    }
    for (name, f) in names.iter().zip(&fragments) {
        out.write(name, &f.to_text())?;
    }
    println!("{} fragments", fragments.len());
    out.finish(
        "sec split",
        &serde_json::json!({ "k": a.k, "policy": policy }),
    )
}

#[derive(Args)]
pub struct RecombineArgs {
    /// Fragment files in any order.
    #[arg(long, num_args = 1.., required = true)]
    fragments: Vec<PathBuf>,
    #[command(flatten)]
    out: Out,
}

pub fn recombine(a: RecombineArgs) -> Result<()> {
    let mut fragments = Vec::with_capacity(a.fragments.len());
    for p in &a.fragments {
        fragments.push(
            Fragment::from_text(&read_text(p)?)
                .with_context(|| format!("parsing fragment {}", p.display()))?,
        );
    }
    let c = recombine_circuit(&fragments)?;
    let mut out = OutputDir::open(&a.out.out, a.out.force, &["recombined.circuit"])?;
    for p in &a.fragments {
        out.input(p);
    }
    out.write("recombined.circuit", &c.to_text())?;
    println!("{} ops on {} qubits", c.len(), c.n_qubits());
    out.finish("sec recombine", &serde_json::json!({}))
}

#[derive(Clone, Copy, ValueEnum)]
pub enum DummyArg {
    Swap,
    Zz,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Exhaustive,
    Heuristic,
}

#[derive(Args)]
pub struct ObfuscateArgs {
    #[arg(long)]
    circuit: PathBuf,
    /// Device whose coupling map supplies candidate edges.
    #[arg(long)]
    device: String,
    #[arg(long, value_enum, default_value = "swap")]
    kind: DummyArg,
    #[arg(long, value_enum, default_value = "exhaustive")]
    mode: ModeArg,
    /// Number of top-ranked candidates to insert.
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Values for `param=` bindings used while scoring.
    #[arg(long, value_delimiter = ',')]
    params: Option<Vec<f64>>,
    #[command(flatten)]
    out: Out,
}

pub fn obfuscate(a: ObfuscateArgs) -> Result<()> {
    let c = circuit(&a.circuit)?;
    let d = device(&a.device)?;
    let kind = match a.kind {
        DummyArg::Swap => GateKind::SWAP,
        DummyArg::Zz => GateKind::ZZ,
    };
    let mode = match a.mode {
        ModeArg::Exhaustive => RankMode::Exhaustive,
        ModeArg::Heuristic => RankMode::Heuristic,
    };
    let scored = c.bind(a.params.as_deref().unwrap_or_default())?;
    let ranked = rank_insertion_points(&scored, &d, kind, mode)?;
    if a.count > ranked.len() {
        bail!("{} dummies requested, {} candidates", a.count, ranked.len());
    }
    let selections: Vec<Selection> = ranked[..a.count]
        .iter()
        .map(|c| Selection {
            position: c.position,
            kind,
            edge: c.edge,
        })
        .collect();
    let (obf, key) = insert_dummy_gates(&c, &selections)?;
    let mut ranking = String::from("position,a,b,score\n");
    for r in &ranked {
        let _ = writeln!(
            ranking,
            "{},{},{},{:?}",
            r.position, r.edge.0, r.edge.1, r.score
        );
    }
    let mut out = OutputDir::open(
        &a.out.out,
        a.out.force,
        &["obfuscated.circuit", "key.json", "ranking.csv"],
    )?;
    out.input(&a.circuit);
    out.write("obfuscated.circuit", &obf.to_text())?;
    out.write("key.json", &(key.to_json() + "\n"))?;
    out.write("ranking.csv", &ranking)?;
    println!(
        "inserted {} {kind} gate(s); top score {:?}",
        a.count, ranked[0].score
    );
    out.finish(
        "sec obfuscate",
        &serde_json::json!({
            "device": a.device, "kind": kind, "mode": mode, "count": a.count, "params": a.params
        }),
    )
}

#[derive(Args)]
pub struct RestoreArgs {
    #[arg(long)]
    circuit: PathBuf,
    #[arg(long)]
    key: PathBuf,
    #[command(flatten)]
    out: Out,
}

pub fn restore(a: RestoreArgs) -> Result<()> {
    let c = circuit(&a.circuit)?;
    let key = SecurityKey::from_json(&read_text(&a.key)?)
        .with_context(|| format!("parsing key {}", a.key.display()))?;
    let restored = restore_circuit(&c, &key)?;
    let mut out = OutputDir::open(&a.out.out, a.out.force, &["restored.circuit"])?;
    out.input(&a.circuit).input(&a.key);
    out.write("restored.circuit", &restored.to_text())?;
    println!("removed {} dummy gate(s)", key.entries.len());
    out.finish("sec restore", &serde_json::json!({}))
}

#[derive(Args)]
pub struct AllocateArgs {
    #[arg(long)]
    device: String,
    /// Qubit counts of the co-tenant programs, comma-separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    #[command(flatten)]
    out: OptOut,
}

pub fn allocate(a: AllocateArgs) -> Result<()> {
    let d = device(&a.device)?;
    let sizes: Vec<usize> = a.sizes.clone();
    let alloc = allocate_with_buffers(d.n_qubits, &d.coupling_map, &sizes)?;
    for (i, p) in alloc.programs.iter().enumerate() {
        println!("program {i}: {p:?}");
    }
    println!("buffer: {:?}", alloc.buffer);
    if let Some(dir) = &a.out.out {
        let mut out = OutputDir::open(dir, a.out.force, &["allocation.json"])?;
        out.write_json("allocation.json", &alloc)?;
        out.finish(
            "sec allocate",
            &serde_json::json!({ "device": a.device, "sizes": sizes }),
        )?;
    }
    Ok(())
}

#[derive(Args)]
pub struct InjectArgs {
    #[arg(long)]
    device: String,
    /// Qubits driven by the adversary, comma-separated.
    #[arg(long, value_delimiter = ',')]
    adversary: Vec<usize>,
    /// Victim circuit; a Bell-pair preparation when omitted.
    #[arg(long)]
    victim: Option<PathBuf>,
    /// Override the device's crosstalk multiplier.
    #[arg(long)]
    multiplier: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    shots: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OptOut,
}

pub fn bell_pair() -> Circuit {
    Circuit::from_ops(2, vec![GateOp::h(0), GateOp::cnot(0, 1)]).expect("valid circuit")
}

pub fn inject(a: InjectArgs) -> Result<()> {
    let mut d = device(&a.device)?;
    if let Some(m) = a.multiplier {
        d.crosstalk_multiplier = m;
        d.validate()?;
    }
    let adversary: Vec<usize> = a.adversary.clone();
    let victim = match &a.victim {
        Some(p) => circuit(p)?,
        None => bell_pair(),
    };
    let mut csv = String::from("placement,reliability\n");
    let mut rows = Vec::new();
    for (name, placement) in [
        ("adjacent", Placement::Adjacent),
        ("buffered", Placement::Buffered),
    ] {
        let r = simulate_fault_injection(&victim, &adversary, &d, placement, a.shots, a.seed)?;
        let _ = writeln!(csv, "{name},{r:?}");
        println!("{name} {r:.4}");
        rows.push(r);
    }
    if rows[0] > 0.0 {
        println!("buffered/adjacent {:.3}", rows[1] / rows[0]);
    }
    if let Some(dir) = &a.out.out {
        let mut out = OutputDir::open(dir, a.out.force, &["reliability.csv"])?;
        out.seed("seed", a.seed);
        if let Some(p) = &a.victim {
            out.input(p);
        }
        out.write("reliability.csv", &csv)?;
        out.finish(
            "sec inject",
            &serde_json::json!({
                "device": a.device,
                "adversary": adversary,
                "multiplier": d.crosstalk_multiplier,
                "shots": a.shots
            }),
        )?;
    }
    Ok(())
}
