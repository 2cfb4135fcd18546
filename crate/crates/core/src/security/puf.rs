use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::SecurityError;
use crate::noise::{run_noisy_counts, DeviceProfile};
use crate::simcore::{Circuit, GateOp};

pub const MIN_PUF_SHOTS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PufVariant {
    /// `H` on every qubit, then measure.
    Hadamard,
    /// `X` on every qubit, idle for a delay, then measure.
    Decoherence,
}

/// Device fingerprint: per-qubit `P(read 1)` estimates and their majority bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signature {
    pub bits: Vec<bool>,
    pub biases: Vec<f64>,
    pub device_id: String,
    pub shots: u64,
}

impl Signature {
    pub fn from_biases(biases: Vec<f64>, device_id: impl Into<String>, shots: u64) -> Self {
        Self {
            bits: biases.iter().map(|&b| b > 0.5).collect(),
            biases,
            device_id: device_id.into(),
            shots,
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("qubit,bias,bit\n");
        for (q, (b, bit)) in self.biases.iter().zip(&self.bits).enumerate() {
            let _ = writeln!(s, "{q},{b:?},{}", u8::from(*bit));
        }
        s
    }

    /// Parses `qubit,bias,bit` rows; the device id and shot count are not
    /// part of the file.
    pub fn from_csv(text: &str, device_id: &str, shots: u64) -> Result<Self, SecurityError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some("qubit,bias,bit") {
            return Err(SecurityError::Format(
                "expected header `qubit,bias,bit`".into(),
            ));
        }
        let mut biases = Vec::new();
        let mut bits = Vec::new();
        for (i, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || SecurityError::Format(format!("bad signature row `{line}`"));
            if f.len() != 3 || f[0].parse::<usize>().ok() != Some(i) {
                return Err(bad());
            }
            let bias: f64 = f[1].parse().map_err(|_| bad())?;
            if !(0.0..=1.0).contains(&bias) {
                return Err(bad());
            }
            let bit = match f[2] {
                "0" => false,
                "1" => true,
                _ => return Err(bad()),
            };
            if bit != (bias > 0.5) {
                return Err(bad());
            }
            biases.push(bias);
            bits.push(bit);
        }
        Ok(Self {
            bits,
            biases,
            device_id: device_id.to_string(),
            shots,
        })
    }
}

/// Challenge circuit of a PUF variant over the whole device register.
pub fn puf_circuit(
    n_qubits: usize,
    variant: PufVariant,
    delay: Option<f64>,
) -> Result<Circuit, SecurityError> {
    let mut c = Circuit::new(n_qubits)?;
    match variant {
        PufVariant::Hadamard => {
            for q in 0..n_qubits {
                c.push(GateOp::h(q))?;
            }
        }
        PufVariant::Decoherence => {
            let t = delay
                .filter(|t| *t > 0.0)
                .ok_or(SecurityError::MissingDelay)?;
            for q in 0..n_qubits {
                c.push(GateOp::x(q))?;
            }
            for q in 0..n_qubits {
                c.push(GateOp::delay(q, t))?;
            }
        }
    }
    Ok(c)
}

/// Runs the challenge `shots` times under the device's noise and thresholds
/// each qubit's observed `P(1)` at one half.
pub fn qupuf_signature(
    device: &DeviceProfile,
    variant: PufVariant,
    shots: u64,
    delay: Option<f64>,
    seed: u64,
) -> Result<Signature, SecurityError> {
    if shots < MIN_PUF_SHOTS {
        return Err(SecurityError::TooFewShots(shots));
    }
    let circuit = puf_circuit(device.n_qubits, variant, delay)?;
    let counts = run_noisy_counts(&circuit, device, shots, seed)?;
    let mut ones = vec![0u64; device.n_qubits];
    for (&outcome, &c) in &counts {
        for (q, n) in ones.iter_mut().enumerate() {
            if (outcome >> q) & 1 == 1 {
                *n += c;
            }
        }
    }
    let biases = ones.iter().map(|&n| n as f64 / shots as f64).collect();
    Ok(Signature::from_biases(
        biases,
        device.device_id.clone(),
        shots,
    ))
}

/// Fraction of differing signature bits.
pub fn hamming_fraction(a: &Signature, b: &Signature) -> Result<f64, SecurityError> {
    if a.len() != b.len() || a.is_empty() {
        return Err(SecurityError::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let diff = a.bits.iter().zip(&b.bits).filter(|(x, y)| x != y).count();
    Ok(diff as f64 / a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(bits: &[bool]) -> Signature {
        let biases = bits.iter().map(|&b| if b { 0.9 } else { 0.1 }).collect();
        Signature::from_biases(biases, "d", 100)
    }

    #[test]
    fn hamming_cases() {
        let a = sig(&[true, false, true, true]);
        assert_eq!(hamming_fraction(&a, &a).unwrap(), 0.0);
        let comp = sig(&[false, true, false, false]);
        assert_eq!(hamming_fraction(&a, &comp).unwrap(), 1.0);
        let one = sig(&[true, false, true, false]);
        assert_eq!(hamming_fraction(&a, &one).unwrap(), 0.25);
        assert!(hamming_fraction(&a, &sig(&[true])).is_err());
    }

    #[test]
    fn ideal_device_is_unbiased() {
        let d = DeviceProfile::ideal(3, DeviceProfile::line_edges(3));
        let shots = 100_000u64;
        let s = qupuf_signature(&d, PufVariant::Hadamard, shots, None, 1).unwrap();
        let sigma = (0.25 / shots as f64).sqrt();
        assert!(
            s.biases.iter().all(|b| (b - 0.5).abs() < 3.0 * sigma),
            "{:?}",
            s.biases
        );
    }

    #[test]
    fn readout_bias_closed_form() {
        let mut d = DeviceProfile::ideal(1, vec![]);
        d.per_qubit[0].readout_p10 = 0.1;
        d.per_qubit[0].readout_p01 = 0.02;
        let shots = 100_000u64;
        let s = qupuf_signature(&d, PufVariant::Hadamard, shots, None, 2).unwrap();
        let want = 0.5 * 0.9 + 0.5 * 0.02;
        let sigma = (want * (1.0 - want) / shots as f64).sqrt();
        assert!((s.biases[0] - want).abs() < 3.0 * sigma, "{}", s.biases[0]);
        assert_eq!(s.bits, vec![false]);
    }

    #[test]
    fn decoherence_variant_separates_t1() {
        let mut d = DeviceProfile::ideal(2, vec![(0, 1)]);
        d.per_qubit[0].t1 = 50e3;
        d.per_qubit[0].t2 = 100e3;
        d.per_qubit[1].t1 = 100e3;
        d.per_qubit[1].t2 = 200e3;
        let s = qupuf_signature(&d, PufVariant::Decoherence, 20_000, Some(50e3), 3).unwrap();
        // P(1) = exp(−t/T1): e^{-1} ≈ 0.37 and e^{-1/2} ≈ 0.61.
        assert_eq!(s.bits, vec![false, true]);
        assert!((s.biases[0] - (-1f64).exp()).abs() < 0.02);
        assert!((s.biases[1] - (-0.5f64).exp()).abs() < 0.02);
    }

    #[test]
    fn argument_errors() {
        let d = DeviceProfile::ideal(2, vec![(0, 1)]);
        assert!(matches!(
            qupuf_signature(&d, PufVariant::Hadamard, 99, None, 0),
            Err(SecurityError::TooFewShots(99))
        ));
        assert!(matches!(
            qupuf_signature(&d, PufVariant::Decoherence, 100, None, 0),
            Err(SecurityError::MissingDelay)
        ));
        assert!(matches!(
            qupuf_signature(&d, PufVariant::Decoherence, 100, Some(0.0), 0),
            Err(SecurityError::MissingDelay)
        ));
    }

    #[test]
    fn csv_round_trip() {
        let s = Signature::from_biases(vec![0.25, 0.75, 0.5], "dev", 1000);
        let text = s.to_csv();
        assert_eq!(text, "qubit,bias,bit\n0,0.25,0\n1,0.75,1\n2,0.5,0\n");
        assert_eq!(Signature::from_csv(&text, "dev", 1000).unwrap(), s);
        assert!(Signature::from_csv("qubit,bias,bit\n0,0.7,0\n", "d", 1).is_err());
        assert!(Signature::from_csv("q,b\n", "d", 1).is_err());
    }
}
