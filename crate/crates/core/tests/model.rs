use amc_core::dataset::{IqRecord, C32};
use amc_core::model::{
    load_model, save_model, train, AmcModel, Control, LabelMap, LabeledSet, ModelConfig, TrainOptions,
};
use amc_core::{Error, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny_config(classes: usize) -> ModelConfig {
    ModelConfig {
        input_len: 32,
        filters: [4, 4, 3, 2],
        dense_units: 8,
        classes,
        dropout: 0.0,
        noise_layer: false,
        ..ModelConfig::hisarmod()
    }
}

fn records(n: usize, len: usize, seed: u64) -> Vec<IqRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let v = [Variant::AmDsb, Variant::Fsk2, Variant::Pam4, Variant::Bpsk, Variant::Qam16][i % 5];
            IqRecord {
                samples: (0..len).map(|_| C32::new(rng.random::<f32>() - 0.5, rng.random::<f32>() - 0.5)).collect(),
                modulation: v.into(),
                family: v.family().id(),
                channel: 0,
                snr_db: 10,
                seed: i as u64,
            }
        })
        .collect()
}

fn rows(model: &AmcModel<f32>) -> Vec<(String, Vec<usize>)> {
    model.shape_table().into_iter().map(|r| (r.name, r.shape)).collect()
}

fn expected_rows(len: usize, classes: usize, noise: bool) -> Vec<(String, Vec<usize>)> {
    let mut v = vec![("Input".to_string(), vec![2, len])];
    if noise {
        v.push(("Noise Layer".into(), vec![2, len]));
    }
    let mut w = len;
    for (i, f) in [256, 128, 64, 64].into_iter().enumerate() {
        let n = i + 1;
        v.push((format!("Conv{n}"), vec![2, w, f]));
        w /= 2;
        v.push((format!("Max_Pool{n}"), vec![2, w, f]));
        v.push((format!("Dropout{n}"), vec![2, w, f]));
    }
    v.push(("Flatten".into(), vec![2 * w * 64]));
    v.push(("Dense1".into(), vec![128]));
    v.push(("Dense2".into(), vec![classes]));
    v
}

#[test]
fn shape_tables_for_both_geometries() {
    let m = AmcModel::<f32>::build(ModelConfig::hisarmod()).unwrap();
    assert_eq!(rows(&m), expected_rows(1024, 5, true));
    let m = AmcModel::<f32>::build(ModelConfig::radioml()).unwrap();
    assert_eq!(rows(&m), expected_rows(128, 10, false));
}

#[test]
fn parameter_count_matches_layer_arithmetic() {
    let conv = |cin: usize, cout: usize| 2 * 3 * cin * cout + cout;
    let dense = |i: usize, o: usize| i * o + o;
    let body = conv(1, 256) + conv(256, 128) + conv(128, 64) + conv(64, 64);
    let m = AmcModel::<f32>::build(ModelConfig::hisarmod()).unwrap();
    assert_eq!(m.parameter_count(), body + dense(8192, 128) + dense(128, 5));
    let m = AmcModel::<f32>::build(ModelConfig::radioml()).unwrap();
    assert_eq!(m.parameter_count(), body + dense(1024, 128) + dense(128, 10));
}

#[test]
fn predictions_are_distributions_and_batch_independent() {
    let mut m = AmcModel::<f64>::build(tiny_config(5)).unwrap();
    let recs = records(64, 32, 1);
    let refs: Vec<&IqRecord> = recs.iter().collect();
    let one = m.predict(&refs, 1).unwrap();
    let all = m.predict(&refs, 64).unwrap();
    for (a, b) in one.iter().zip(&all) {
        assert!((a.probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        for (x, y) in a.probs.iter().zip(&b.probs) {
            assert!((x - y).abs() < 1e-9);
        }
    }
    let dup = vec![refs[3]; 4];
    let d = m.predict(&dup, 4).unwrap();
    assert!(d.windows(2).all(|w| w[0] == w[1]));
    let reversed: Vec<&IqRecord> = refs.iter().rev().copied().collect();
    let r = m.predict(&reversed, 16).unwrap();
    for (a, b) in r.iter().zip(all.iter().rev()) {
        for (x, y) in a.probs.iter().zip(&b.probs) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn wrong_length_is_geometry_error() {
    let mut m = AmcModel::<f32>::build(tiny_config(5)).unwrap();
    let recs = records(2, 64, 1);
    let refs: Vec<&IqRecord> = recs.iter().collect();
    assert!(matches!(m.predict(&refs, 2), Err(Error::Geometry { .. })));
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.hiqw");
    let mut m = AmcModel::<f32>::build(ModelConfig { seed: 9, ..tiny_config(5) }).unwrap();
    let labels = LabelMap::families();
    save_model(&path, &m, &labels).unwrap();
    let (mut back, back_labels, hash) = load_model::<f32>(&path).unwrap();
    assert_eq!(back_labels, labels);
    assert_eq!(back.config().filters, m.config().filters);
    assert_eq!(hash.len(), 64);
    let recs = records(5, 32, 2);
    let refs: Vec<&IqRecord> = recs.iter().collect();
    assert_eq!(back.predict(&refs, 5).unwrap(), m.predict(&refs, 5).unwrap());
}

fn sets(n: usize, seed: u64) -> (LabeledSet, LabeledSet) {
    let recs = records(n, 32, seed);
    let refs: Vec<&IqRecord> = recs.iter().collect();
    let labels = LabelMap::families();
    let (a, b) = refs.split_at(n * 4 / 5);
    (LabeledSet::from_records(a, &labels).unwrap(), LabeledSet::from_records(b, &labels).unwrap())
}

#[test]
fn constant_validation_loss_stops_at_epoch_six() {
    let (tr, va) = sets(50, 3);
    let mut m = AmcModel::<f64>::build(tiny_config(5)).unwrap();
    // a vanishing step leaves the validation loss effectively constant
    let opts = TrainOptions { learning_rate: 1e-30, max_epochs: 50, batch_size: 8, ..Default::default() };
    let state = train(&mut m, &tr, &va, &opts, &mut |_| Control::Continue).unwrap();
    assert_eq!(state.epoch, 6);
    assert!(state.stopped_early);
    assert_eq!(state.best_epoch, 1);
}

#[test]
fn training_is_deterministic_and_keeps_best() {
    let (tr, va) = sets(60, 4);
    let opts = TrainOptions { learning_rate: 3e-3, max_epochs: 12, batch_size: 8, seed: 5, ..Default::default() };
    let run = || {
        let mut m = AmcModel::<f64>::build(ModelConfig { noise_layer: true, dropout: 0.2, ..tiny_config(5) }).unwrap();
        let s = train(&mut m, &tr, &va, &opts, &mut |_| Control::Continue).unwrap();
        let (loss, _) = m.evaluate(&va, 16).unwrap();
        (s, loss)
    };
    let (a, loss_a) = run();
    let (b, _) = run();
    assert_eq!(a.history, b.history);
    let best = a.history.iter().map(|h| h.val_loss).fold(f64::INFINITY, f64::min);
    assert_eq!(a.best_val_loss, best);
    // restored weights reproduce the best validation loss
    assert!((loss_a - best).abs() < 1e-12);
    assert!(a.history.last().unwrap().train_loss < a.history[0].train_loss);
}

#[test]
fn observer_can_stop() {
    let (tr, va) = sets(20, 5);
    let mut m = AmcModel::<f32>::build(tiny_config(5)).unwrap();
    let opts = TrainOptions { max_epochs: 10, batch_size: 4, ..Default::default() };
    let s = train(&mut m, &tr, &va, &opts, &mut |e| if e.epoch == 2 { Control::Stop } else { Control::Continue }).unwrap();
    assert_eq!(s.history.len(), 2);
    assert!(!s.stopped_early);
}

#[test]
fn divergence_names_epoch() {
    let (mut tr, va) = sets(20, 6);
    tr.inputs[0] = f32::NAN;
    let mut m = AmcModel::<f32>::build(tiny_config(5)).unwrap();
    let opts = TrainOptions { max_epochs: 3, batch_size: 4, ..Default::default() };
    match train(&mut m, &tr, &va, &opts, &mut |_| Control::Continue) {
        Err(Error::Training { epoch, .. }) => assert_eq!(epoch, 1),
        other => panic!("expected training error, got {:?}", other.map(|s| s.epoch)),
    }
}
