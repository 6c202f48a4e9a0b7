use std::fs;

use jointhdr::imaging::ReferenceChoice;
use jointhdr::sim::{
    make_sample, read_dataset, read_manifest, write_dataset, write_dataset_split, MotionSpec, SampleSpec, SceneSpec,
    SimError,
};

fn samples(n: u64) -> Vec<jointhdr::sim::DatasetSample> {
    (0..n)
        .map(|seed| {
            let mut spec = SampleSpec::new(SceneSpec::new(seed, 32, 32), 200.0 * (seed + 1) as f64);
            spec.motion = MotionSpec { global_shift: (1, 2), ..MotionSpec::none() };
            spec.reference = ReferenceChoice::from_index(seed as usize % 3).unwrap();
            make_sample(&spec).unwrap()
        })
        .collect()
}

#[test]
fn empty_dataset_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&[], dir.path()).unwrap();
    assert!(read_dataset(dir.path()).unwrap().is_empty());
}

#[test]
fn round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let original = samples(3);
    write_dataset_split(&original, dir.path(), 2).unwrap();
    let back = read_dataset(dir.path()).unwrap();
    assert_eq!(back, original);
    let manifest = read_manifest(dir.path()).unwrap();
    assert_eq!(manifest.train, vec![0, 1]);
    assert_eq!(manifest.test, vec![2]);

    // rewriting produces the same bytes
    let again = tempfile::tempdir().unwrap();
    write_dataset_split(&back, again.path(), 2).unwrap();
    for name in ["meta.json", "static_under.f32", "ground_truth.f32", "SHA256SUMS"] {
        let a = fs::read(dir.path().join("sample_0001").join(name)).unwrap();
        let b = fs::read(again.path().join("sample_0001").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn corrupted_metadata_is_reported_with_index() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&samples(2), dir.path()).unwrap();
    let meta = dir.path().join("sample_0001").join("meta.json");
    let mut bytes = fs::read(&meta).unwrap();
    // flip one digit of a numeric value
    let pos = bytes.iter().position(|b| b.is_ascii_digit()).unwrap();
    bytes[pos] = if bytes[pos] == b'9' { b'8' } else { bytes[pos] + 1 };
    fs::write(&meta, bytes).unwrap();
    match read_dataset(dir.path()) {
        Err(SimError::Parse { index, .. }) => assert_eq!(index, 1),
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn truncated_pixels_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&samples(1), dir.path()).unwrap();
    let file = dir.path().join("sample_0000").join("dynamic_over.f32");
    let bytes = fs::read(&file).unwrap();
    fs::write(&file, &bytes[..bytes.len() - 4]).unwrap();
    assert!(matches!(read_dataset(dir.path()), Err(SimError::Parse { index: 0, .. })));
}
