//! Analytic gradients against central finite differences (f64, h = 1e-5).

use amc_nn::loss::{cross_entropy, cross_entropy_logit_grad, softmax_cross_entropy};
use amc_nn::{activation, Conv2d, Dense, Dropout, Flatten, GaussianNoise, Layer, MaxPoolWidth, Mode, Pass, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;
const INSTANCES: u64 = 5;

fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na.max(nb) == 0.0 {
        0.0
    } else {
        diff / na.max(nb)
    }
}

/// Scalar probe `L = sum(r * layer(x))` evaluated with a fixed RNG seed so
/// stochastic layers see the same mask on every evaluation.
fn probe(layer: &mut dyn Layer<f64>, x: &Tensor<f64>, r: &[f64], mode: Mode, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let snr = vec![5.0; x.batch()];
    let mut pass = Pass {
        mode,
        rng: &mut rng,
        snr_db: Some(&snr),
    };
    let y = layer.forward(x, &mut pass).unwrap();
    y.data().iter().zip(r).map(|(a, b)| a * b).sum()
}

/// Returns (input relative error, per-parameter relative errors).
fn check_layer(layer: &mut dyn Layer<f64>, x: &Tensor<f64>, mode: Mode, seed: u64) -> (f64, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    let out_len = {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let snr = vec![5.0; x.batch()];
        let mut pass = Pass {
            mode,
            rng: &mut r,
            snr_db: Some(&snr),
        };
        layer.forward(x, &mut pass).unwrap().len()
    };
    let r: Vec<f64> = (0..out_len).map(|_| rng.random_range(-1.0..1.0)).collect();

    // analytic
    layer.zero_grads();
    probe(layer, x, &r, mode, seed);
    let out_shape = {
        let mut s = x.shape().to_vec();
        let per = layer.output_shape(&s[1..]).unwrap();
        s.truncate(1);
        s.extend(per);
        s
    };
    let grad_in = layer.backward(&Tensor::from_vec(&out_shape, r.clone()).unwrap()).unwrap();
    let analytic_params: Vec<Vec<f64>> = layer.params_mut().iter().map(|p| p.grad.data().to_vec()).collect();

    // numeric, input
    let mut numeric_in = vec![0.0; x.len()];
    for i in 0..x.len() {
        let mut xp = x.clone();
        xp.data_mut()[i] += H;
        let mut xm = x.clone();
        xm.data_mut()[i] -= H;
        numeric_in[i] = (probe(layer, &xp, &r, mode, seed) - probe(layer, &xm, &r, mode, seed)) / (2.0 * H);
    }
    let input_err = rel_err(grad_in.data(), &numeric_in);

    // numeric, params
    let mut param_errs = Vec::new();
    for (pi, analytic) in analytic_params.iter().enumerate() {
        let mut numeric = vec![0.0; analytic.len()];
        for j in 0..analytic.len() {
            let orig = layer.params_mut()[pi].value.data()[j];
            layer.params_mut()[pi].value.data_mut()[j] = orig + H;
            let lp = probe(layer, x, &r, mode, seed);
            layer.params_mut()[pi].value.data_mut()[j] = orig - H;
            let lm = probe(layer, x, &r, mode, seed);
            layer.params_mut()[pi].value.data_mut()[j] = orig;
            numeric[j] = (lp - lm) / (2.0 * H);
        }
        param_errs.push(rel_err(analytic, &numeric));
    }
    (input_err, param_errs)
}

fn assert_ok(name: &str, (input, params): (f64, Vec<f64>)) {
    assert!(input < TOL, "{name}: input gradient rel err {input:e}");
    for (i, e) in params.iter().enumerate() {
        assert!(*e < TOL, "{name}: param {i} gradient rel err {e:e}");
    }
}

#[test]
fn conv2d_gradients() {
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for relu in [false, true] {
            let mut conv = Conv2d::<f64>::new("conv", (2, 3), 3, 4, relu, &mut rng);
            let bias = random_tensor(&[4], &mut rng);
            let w = conv.weight().clone();
            conv.set_params(w, bias).unwrap();
            let x = random_tensor(&[1, 2, 8, 3], &mut rng);
            assert_ok("conv2d", check_layer(&mut conv, &x, Mode::Eval, seed));
        }
    }
}

#[test]
fn dense_gradients() {
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        for relu in [false, true] {
            let mut d = Dense::<f64>::new("dense", 7, 5, relu, &mut rng);
            let x = random_tensor(&[3, 7], &mut rng);
            assert_ok("dense", check_layer(&mut d, &x, Mode::Eval, seed));
        }
    }
}

#[test]
fn maxpool_gradients() {
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let mut pool = MaxPoolWidth::new("pool");
        let x = random_tensor(&[2, 2, 8, 3], &mut rng);
        assert_ok("maxpool", check_layer(&mut pool, &x, Mode::Eval, seed));
    }
}

#[test]
fn dropout_gradients_with_fixed_mask() {
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let mut d = Dropout::<f64>::new("drop", 0.5).unwrap();
        let x = random_tensor(&[2, 2, 4, 3], &mut rng);
        assert_ok("dropout", check_layer(&mut d, &x, Mode::Train, seed));
    }
}

#[test]
fn flatten_and_noise_gradients() {
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);
        let x = random_tensor(&[2, 2, 4, 3], &mut rng);
        assert_ok("flatten", check_layer(&mut Flatten::new(), &x, Mode::Train, seed));
        assert_ok("noise", check_layer(&mut GaussianNoise::default(), &x, Mode::Train, seed));
    }
}

#[test]
fn relu_gradients() {
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let x = random_tensor(&[20], &mut rng);
        let r = random_tensor(&[20], &mut rng);
        let f = |x: &Tensor<f64>| -> f64 { activation::relu(x).data().iter().zip(r.data()).map(|(a, b)| a * b).sum() };
        let analytic = activation::relu_backward(&x, &r).unwrap();
        let numeric: Vec<f64> = (0..20)
            .map(|i| {
                let mut p = x.clone();
                p.data_mut()[i] += H;
                let mut m = x.clone();
                m.data_mut()[i] -= H;
                (f(&p) - f(&m)) / (2.0 * H)
            })
            .collect();
        assert!(rel_err(analytic.data(), &numeric) < TOL);
    }
}

#[test]
fn softmax_cross_entropy_gradient_is_p_minus_onehot() {
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
        let logits: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
        let label = rng.random_range(0..5);
        let p = activation::softmax(&logits).unwrap();
        let loss = |y: &[f64]| cross_entropy(&activation::softmax(y).unwrap(), label).unwrap();
        let analytic = cross_entropy_logit_grad(&p, label).unwrap();
        for i in 0..5 {
            let mut lp = logits.clone();
            lp[i] += H;
            let mut lm = logits.clone();
            lm[i] -= H;
            let numeric = (loss(&lp) - loss(&lm)) / (2.0 * H);
            assert!((numeric - analytic[i]).abs() < 1e-8);
            let onehot = if i == label { 1.0 } else { 0.0 };
            assert!((analytic[i] - (p[i] - onehot)).abs() <= 1e-12);
        }
        // batched path agrees
        let t = Tensor::from_vec(&[1, 5], logits.clone()).unwrap();
        let batch = softmax_cross_entropy(&t, &[label]).unwrap();
        for i in 0..5 {
            assert!((batch.grad.data()[i] - analytic[i]).abs() <= 1e-12);
        }
    }
}
