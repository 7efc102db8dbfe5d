use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdc_core::grid::Grid;
use sdc_core::net::{init_params_with, NetworkSpec};
use sdc_core::train::{predict, spec_for, Checkpoint, ModelState, ModelVariant, Precision, TrainConfig};
use sdc_core::Error;

fn checkpoint(variant: ModelVariant, precision: Precision, seed: u64) -> Checkpoint {
    let cfg = TrainConfig {
        variant,
        precision,
        ..TrainConfig::default()
    };
    let spec = spec_for(&cfg).unwrap();
    let state = match precision {
        Precision::F32 => ModelState::F32(init_params_with(&spec, seed, &cfg.init).unwrap()),
        Precision::F64 => ModelState::F64(init_params_with(&spec, seed, &cfg.init).unwrap()),
    };
    Checkpoint { spec, config: cfg, state }
}

fn image(h: usize, w: usize, seed: u64) -> Grid<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Grid::new(vec![1, h, w], (0..h * w).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
}

#[test]
fn round_trip_gives_bit_identical_predictions() {
    let tmp = tempfile::tempdir().unwrap();
    for (i, precision) in [Precision::F32, Precision::F64].into_iter().enumerate() {
        let ck = checkpoint(ModelVariant::Sdcnet { stages: 2 }, precision, 3);
        let path = tmp.path().join(format!("m{i}.ckpt"));
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        let img = image(128, 192, 9);
        let (a, b) = (predict(&img, &ck).unwrap(), predict(&img, &back).unwrap());
        let bits = |g: &Grid<f64>| g.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a.div.grid()), bits(b.div.grid()));
        assert_eq!(a.count.to_bits(), b.count.to_bits());
    }
}

#[test]
fn damaged_files_are_rejected() {
    let ck = checkpoint(ModelVariant::Classification, Precision::F32, 1);
    let bytes = ck.encode().unwrap();

    for cut in [4, 20, bytes.len() - 1] {
        let err = Checkpoint::decode(&bytes[..cut]).unwrap_err();
        assert!(matches!(err, Error::TruncatedPayload { .. }), "cut at {cut}: {err}");
    }
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(Checkpoint::decode(&bad), Err(Error::MalformedHeader(_))));
    let mut newer = bytes.clone();
    newer[7] = b'2';
    assert!(matches!(Checkpoint::decode(&newer), Err(Error::UnsupportedVersion(_))));
}

#[test]
fn wrong_spec_names_the_tensor() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("m.ckpt");
    let ck = checkpoint(ModelVariant::Sdcnet { stages: 2 }, Precision::F32, 2);
    ck.save(&path).unwrap();
    assert!(Checkpoint::load_for(&path, &ck.spec).is_ok());

    let other = NetworkSpec::toy(ck.spec.head_outputs + 3, 2);
    let err = Checkpoint::load_for(&path, &other).unwrap_err().to_string();
    assert!(err.contains("classifier.fc2"), "{err}");

    let fewer = NetworkSpec::toy(ck.spec.head_outputs, 1);
    assert!(Checkpoint::load_for(&path, &fewer).is_err());
}

#[test]
fn classification_on_one_patch_gives_one_cell() {
    let ck = checkpoint(ModelVariant::Classification, Precision::F64, 5);
    let pred = predict(&image(64, 64, 1), &ck).unwrap();
    assert_eq!(pred.div.hw(), (1, 1));
    assert_eq!(pred.counts.len(), 1);
    assert!(pred.masks.is_empty());
    assert!((pred.count - pred.div.total()).abs() < 1e-9);
}

#[test]
fn predicted_count_is_the_sum_of_div() {
    for (variant, hw) in [
        (ModelVariant::Sdcnet { stages: 2 }, (100, 70)),
        (ModelVariant::Sdcnet { stages: 1 }, (64, 128)),
        (ModelVariant::RegressionSdcOpen { stages: 2 }, (130, 64)),
    ] {
        let ck = checkpoint(variant.clone(), Precision::F32, 8);
        let pred = predict(&image(hw.0, hw.1, 4), &ck).unwrap();
        let cell = 64 >> variant.stages();
        let padded = (hw.0.div_ceil(64) * 64, hw.1.div_ceil(64) * 64);
        assert_eq!(pred.div.hw(), (padded.0 / cell, padded.1 / cell));
        let sum: f64 = pred.div.grid().data().iter().sum();
        assert!((pred.count - sum).abs() < 1e-9);
        assert_eq!(pred.masks.len(), variant.stages());
    }
}
