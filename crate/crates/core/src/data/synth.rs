use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{DataError, DefectClass, LabeledImageSet, Provenance};
use crate::cae::Image;
use crate::rng::{derive_seed, rng_for};

pub const IMAGE_SIDE: usize = 32;

const SUPERSAMPLE: usize = 2;
const NOISE_SIGMA: f64 = 0.06;

/// Coverage test of a class motif in its own frame (pixel units, origin at
/// the motif center, `v` pointing down).
fn motif(class: DefectClass, shape: &[f64; 4], u: f64, v: f64) -> bool {
    let [a, b, c, d] = *shape;
    match class {
        // Solid pad disc.
        DefectClass::MissingHole => u * u + v * v <= a * a,
        // Trace with semicircular bites taken out of its upper edge.
        DefectClass::MouseBite => {
            let half = 5.0;
            let in_trace = v.abs() <= half;
            let bite = |cx: f64| (u - cx).powi(2) + (v + half).powi(2) <= b * b;
            in_trace && !bite(a) && !bite(a + c)
        }
        // Trace interrupted by a gap.
        DefectClass::OpenCircuit => v.abs() <= 4.0 && (u - b).abs() >= a / 2.0,
        // Two parallel traces bridged by a bar.
        DefectClass::Short => {
            let gap = a;
            let traces = (v + gap).abs() <= 3.0 || (v - gap).abs() <= 3.0;
            traces || ((u - b).abs() <= c / 2.0 && v.abs() <= gap)
        }
        // Trace with a triangular protrusion from its upper edge.
        DefectClass::Spur => {
            let top = -4.5;
            let in_trace = v.abs() <= 4.5;
            let h = a;
            let half_base = c;
            let t = (top - v) / h;
            in_trace || (v <= top && t <= 1.0 && (u - b).abs() <= half_base * (1.0 - t))
        }
        // Isolated copper blob.
        DefectClass::SpuriousCopper => ((u - c) / a).powi(2) + ((v - d) / b).powi(2) <= 1.0,
    }
}

/// Class-specific random shape parameters.
fn shape_params(class: DefectClass, rng: &mut ChaCha8Rng) -> [f64; 4] {
    match class {
        DefectClass::MissingHole => [rng.random_range(7.5..10.0), 0.0, 0.0, 0.0],
        DefectClass::MouseBite => [
            rng.random_range(-9.0..-2.0),
            rng.random_range(2.5..4.0),
            rng.random_range(7.0..11.0),
            0.0,
        ],
        DefectClass::OpenCircuit => [
            rng.random_range(5.0..9.0),
            rng.random_range(-3.0..3.0),
            0.0,
            0.0,
        ],
        DefectClass::Short => [
            rng.random_range(7.0..9.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(3.0..6.0),
            0.0,
        ],
        DefectClass::Spur => [
            rng.random_range(6.0..10.0),
            rng.random_range(-6.0..6.0),
            rng.random_range(2.5..4.5),
            0.0,
        ],
        DefectClass::SpuriousCopper => [
            rng.random_range(4.5..7.5),
            rng.random_range(3.5..6.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
        ],
    }
}

/// Renders one defect patch from its own generator.
pub fn render_defect(class: DefectClass, rng: &mut ChaCha8Rng) -> Image {
    let shape = shape_params(class, rng);
    let angle = rng.random_range(0.0..std::f64::consts::PI);
    let scale = rng.random_range(0.8..1.2);
    let (dx, dy) = (rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
    let background = rng.random_range(0.05..0.15);
    let copper = rng.random_range(0.75..0.9);
    let noise = Normal::new(0.0, NOISE_SIGMA).expect("valid sigma");
    let (sin, cos) = angle.sin_cos();
    let center = IMAGE_SIDE as f64 / 2.0;
    let step = 1.0 / SUPERSAMPLE as f64;
    let mut pixels = Vec::with_capacity(IMAGE_SIDE * IMAGE_SIDE);
    for y in 0..IMAGE_SIDE {
        for x in 0..IMAGE_SIDE {
            let mut hits = 0;
            for sy in 0..SUPERSAMPLE {
                for sx in 0..SUPERSAMPLE {
                    let px = x as f64 + (sx as f64 + 0.5) * step - center - dx;
                    let py = y as f64 + (sy as f64 + 0.5) * step - center - dy;
                    let u = (cos * px + sin * py) / scale;
                    let v = (-sin * px + cos * py) / scale;
                    hits += usize::from(motif(class, &shape, u, v));
                }
            }
            let cover = hits as f64 / (SUPERSAMPLE * SUPERSAMPLE) as f64;
            let value = background + cover * (copper - background) + noise.sample(rng);
            pixels.push(value.clamp(0.0, 1.0));
        }
    }
    Image {
        width: IMAGE_SIDE,
        height: IMAGE_SIDE,
        pixels,
    }
}

/// `count_per_class` patches of every class, interleaved so that sample `j`
/// has class code `j mod 6`. Each image uses its own derived seed.
pub fn generate_synthetic_defects(
    count_per_class: usize,
    seed: u64,
) -> Result<LabeledImageSet, DataError> {
    generate_synthetic_counts(&[count_per_class; 6], seed)
}

/// Per-class counts in code order. Samples are ordered by their index within
/// the class, then by class code.
pub fn generate_synthetic_counts(
    counts: &[usize; 6],
    seed: u64,
) -> Result<LabeledImageSet, DataError> {
    if counts.contains(&0) {
        return Err(DataError::ZeroCount);
    }
    let max = counts.iter().copied().max().unwrap_or(0);
    let jobs: Vec<(DefectClass, usize)> = (0..max)
        .flat_map(|i| {
            DefectClass::ALL
                .into_iter()
                .filter(move |c| i < counts[c.code()])
                .map(move |c| (c, i))
        })
        .collect();
    let (images, labels): (Vec<Image>, Vec<DefectClass>) = jobs
        .into_par_iter()
        .map(|(class, i)| {
            let mut rng = rng_for(derive_seed(seed, class.code() as u64), i as u64);
            (render_defect(class, &mut rng), class)
        })
        .unzip();
    LabeledImageSet::new(images, labels, Provenance::Synthetic)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn balanced_and_deterministic() {
        let set = generate_synthetic_defects(10, 4).unwrap();
        assert_eq!(set.len(), 60);
        assert_eq!(set.class_counts(), [10; 6]);
        assert_eq!(set, generate_synthetic_defects(10, 4).unwrap());
        assert_ne!(
            set.images,
            generate_synthetic_defects(10, 5).unwrap().images
        );
        assert!(set
            .images
            .iter()
            .all(|im| im.width == 32 && im.pixels.iter().all(|p| (0.0..=1.0).contains(p))));
        assert!(matches!(
            generate_synthetic_defects(0, 0),
            Err(DataError::ZeroCount)
        ));
        let uneven = generate_synthetic_counts(&[1, 2, 1, 1, 1, 3], 4).unwrap();
        assert_eq!(uneven.class_counts(), [1, 2, 1, 1, 1, 3]);
        assert_eq!(uneven.images[..6], set.images[..6]);
    }

    #[test]
    fn larger_set_extends_smaller_one() {
        let small = generate_synthetic_defects(3, 9).unwrap();
        let big = generate_synthetic_defects(5, 9).unwrap();
        assert_eq!(small.images[..], big.images[..18]);
    }

    #[test]
    fn classes_are_distinguishable() {
        let set = generate_synthetic_defects(30, 1).unwrap();
        let by_class: Vec<Vec<&Image>> = (0..6)
            .map(|c| {
                set.images
                    .iter()
                    .zip(&set.labels)
                    .filter(|(_, l)| l.code() == c)
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        let mean = |ims: &[&Image]| -> Vec<f64> {
            (0..1024)
                .map(|p| ims.iter().map(|i| i.pixels[p]).sum::<f64>() / ims.len() as f64)
                .collect()
        };
        let means: Vec<Vec<f64>> = by_class.iter().map(|c| mean(c)).collect();
        let held_out = generate_synthetic_defects(30, 2).unwrap();
        let hits = held_out
            .images
            .iter()
            .zip(&held_out.labels)
            .filter(|(img, label)| {
                let nearest = (0..6)
                    .min_by(|&a, &b| {
                        dist(&img.pixels, &means[a]).total_cmp(&dist(&img.pixels, &means[b]))
                    })
                    .unwrap();
                nearest == label.code()
            })
            .count();
        let accuracy = hits as f64 / held_out.len() as f64;
        assert!(
            accuracy > 2.0 / 6.0,
            "nearest class mean accuracy {accuracy}"
        );
        let (mut within, mut across) = (Vec::new(), Vec::new());
        for i in 0..set.len() {
            for j in i + 1..set.len() {
                let d = dist(&set.images[i].pixels, &set.images[j].pixels);
                if set.labels[i] == set.labels[j] {
                    within.push(d)
                } else {
                    across.push(d)
                }
            }
        }
        let w = within.iter().sum::<f64>() / within.len() as f64;
        let a = across.iter().sum::<f64>() / across.len() as f64;
        assert!(a > w, "{a} vs {w}");
    }
}
