use proptest::prelude::*;
use qmlsec_core::data::{
    generate_synthetic_counts, load_image_directory, stratified_indices, write_image_directory,
    REFERENCE_CLASS_COUNTS,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn split_is_stratified(
        counts in prop::collection::vec(1usize..40, 2..7),
        fraction in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let labels: Vec<usize> = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
            .collect();
        let (train, test) = stratified_indices(&labels, fraction, seed).unwrap();
        prop_assert_eq!(train.len() + test.len(), labels.len());
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        for (c, &n) in counts.iter().enumerate() {
            let got = train.iter().filter(|&&i| labels[i] == c).count() as f64;
            prop_assert!((got - fraction * n as f64).abs() <= 1.0, "class {} got {} of {}", c, got, n);
        }
        prop_assert_eq!(stratified_indices(&labels, fraction, seed).unwrap(), (train, test));
    }

    #[test]
    fn generated_pixels_in_unit_range(seed in any::<u64>(), n in 1usize..4) {
        let set = generate_synthetic_counts(&[n; 6], seed).unwrap();
        prop_assert!(set.images.iter().flat_map(|im| &im.pixels).all(|p| (0.0..=1.0).contains(p)));
        prop_assert_eq!(generate_synthetic_counts(&[n; 6], seed).unwrap(), set);
    }
}

#[test]
fn ingests_reference_sized_dataset() {
    let set = generate_synthetic_counts(&REFERENCE_CLASS_COUNTS, 2).unwrap();
    assert_eq!(set.len(), 21664);
    let dir = tempfile::tempdir().unwrap();
    let entries = write_image_directory(&set, dir.path()).unwrap();
    assert_eq!(entries.len(), 21664);
    let back = load_image_directory(dir.path()).unwrap();
    assert_eq!(back.class_counts(), REFERENCE_CLASS_COUNTS);
    assert!(back
        .images
        .iter()
        .all(|im| im.width == 32 && im.height == 32));
}
