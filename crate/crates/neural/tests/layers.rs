use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sniforge_neural::gradcheck::random_tensor;
use sniforge_neural::layers::{gru_cell, BatchNorm, Conv1d, Dropout, Gru, GruParams, Layer};
use sniforge_neural::{build_baseline_rnn, build_cnn_rnn, CnnRnnWidths, Network, NnError, Tensor};

fn conv_with_kernel(kernel: &[f64]) -> Conv1d {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut conv = Conv1d::new("c", kernel.len(), 1, 1, &mut rng);
    conv.params_mut()[0].value = kernel.to_vec();
    conv
}

#[test]
fn conv1d_hand_dot_product() {
    let conv = conv_with_kernel(&[1.0, 0.0, -1.0]);
    let x = Tensor::new(vec![1, 3, 1], vec![1.0, 2.0, 3.0]).unwrap();
    let y = conv.infer(&x).unwrap();
    assert_eq!(y.shape(), &[1, 1, 1]);
    assert_eq!(y.data(), &[-2.0]);
}

#[test]
fn conv1d_identity_tap_drops_ends() {
    let conv = conv_with_kernel(&[0.0, 1.0, 0.0]);
    let x = Tensor::new(vec![1, 6, 1], vec![4.0, -1.0, 2.5, 7.0, 0.0, 3.0]).unwrap();
    let y = conv.infer(&x).unwrap();
    assert_eq!(y.data(), &[-1.0, 2.5, 7.0, 0.0]);
}

#[test]
fn conv1d_rejects_short_sequence() {
    let conv = conv_with_kernel(&[1.0, 1.0, 1.0]);
    let x = Tensor::zeros(&[1, 2, 1]);
    assert!(matches!(conv.infer(&x), Err(NnError::SequenceTooShort { len: 2, kernel: 3 })));
}

#[test]
fn extra_zero_padding_shifts_conv_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let conv = Conv1d::new("c", 3, 2, 4, &mut rng);
    // a pre-padded sample: two zero steps then data
    let mut data = vec![0.0; 4];
    data.extend(random_tensor(&[1, 6, 2], &mut rng).into_data());
    let x = Tensor::new(vec![1, 8, 2], data.clone()).unwrap();
    let mut padded = vec![0.0; 6];
    padded.extend(&data);
    let xp = Tensor::new(vec![1, 11, 2], padded).unwrap();
    let y = conv.infer(&x).unwrap();
    let yp = conv.infer(&xp).unwrap();
    let tail = &yp.data()[yp.len() - y.len()..];
    assert_eq!(tail, y.data());
}

#[test]
fn gru_cell_zero_params_gives_zero() {
    let p = GruParams { input: 2, units: 3, w: vec![0.0; 18], u: vec![0.0; 27], b: vec![0.0; 9] };
    let h = gru_cell(&[0.7, -1.2], &[0.0; 3], &p).unwrap();
    assert_eq!(h, vec![0.0; 3]);
    // with a non-zero state the update gate sits at 0.5 and the candidate at 0
    let h = gru_cell(&[0.7, -1.2], &[0.4, -0.2, 1.0], &p).unwrap();
    assert_eq!(h, vec![0.2, -0.1, 0.5]);
}

#[test]
fn gru_cell_closed_update_gate_carries_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let gru = Gru::new("g", 2, 3, false, &mut rng);
    let mut p = gru.cell_params();
    for j in 0..3 {
        p.b[j] = -60.0;
    }
    let h_prev = [0.3, -0.8, 0.55];
    let h = gru_cell(&[0.9, -0.4], &h_prev, &p).unwrap();
    for (a, b) in h.iter().zip(h_prev) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn gru_cell_dimension_mismatch() {
    let p = GruParams { input: 2, units: 3, w: vec![0.0; 18], u: vec![0.0; 27], b: vec![0.0; 9] };
    assert!(gru_cell(&[1.0], &[0.0; 3], &p).is_err());
}

#[test]
fn batched_gru_matches_stepwise_cell() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let gru = Gru::new("g", 3, 4, true, &mut rng);
    let x = random_tensor(&[2, 5, 3], &mut rng);
    let y = gru.infer(&x).unwrap();
    let p = gru.cell_params();
    for b in 0..2 {
        let mut h = vec![0.0; 4];
        for t in 0..5 {
            let xt = &x.data()[(b * 5 + t) * 3..(b * 5 + t + 1) * 3];
            h = gru_cell(xt, &h, &p).unwrap();
            let got = &y.data()[(b * 5 + t) * 4..(b * 5 + t + 1) * 4];
            for (g, e) in got.iter().zip(&h) {
                assert!((g - e).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn batchnorm_zero_variance_channel_is_finite() {
    let mut bn = BatchNorm::new("bn", 2);
    let x = Tensor::new(vec![3, 2], vec![5.0, 1.0, 5.0, 2.0, 5.0, 3.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let y = bn.forward_train(&x, &mut rng).unwrap();
    assert!(y.is_finite());
    // constant channel normalizes to beta = 0
    assert_eq!(y.data()[0], 0.0);
    assert_eq!(y.data()[2], 0.0);
}

#[test]
fn batchnorm_rejects_single_sample_batch_in_training() {
    let mut bn = BatchNorm::new("bn", 2);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = Tensor::zeros(&[1, 4, 2]);
    assert!(matches!(bn.forward_train(&x, &mut rng), Err(NnError::BatchTooSmall)));
    assert!(bn.infer(&x).is_ok());
}

#[test]
fn batchnorm_inference_uses_frozen_running_stats() {
    let mut bn = BatchNorm::new("bn", 3);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        let x = random_tensor(&[4, 3, 3], &mut rng);
        bn.forward_train(&x, &mut rng).unwrap();
    }
    let probe = random_tensor(&[2, 3, 3], &mut rng);
    let a = bn.infer(&probe).unwrap();
    let b = bn.infer(&probe).unwrap();
    assert_eq!(a.data(), b.data());
    // the batch of one is normalized with running, not batch, statistics
    let single = probe.select_rows(&[0]);
    assert_eq!(bn.infer(&single).unwrap().data(), &a.data()[..9]);
}

#[test]
fn dropout_modes() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_tensor(&[4, 10], &mut rng);
    let mut d0 = Dropout::new(0.0).unwrap();
    assert_eq!(d0.forward_train(&x, &mut rng).unwrap(), x);
    let mut d = Dropout::new(0.5).unwrap();
    assert_eq!(d.infer(&x).unwrap(), x);
    let y = d.forward_train(&x, &mut rng).unwrap();
    for (a, b) in y.data().iter().zip(x.data()) {
        assert!(*a == 0.0 || (*a - 2.0 * b).abs() < 1e-15);
    }
    assert!(Dropout::new(1.0).is_err());
}

#[test]
fn cnn_rnn_parameter_count_closed_form() {
    // conv(k*c*f1 + f1) + bn(2 f1) + conv(k*f1*f2 + f2) + bn(2 f2)
    // + gru(3h(f2 + h + 1)) + dense(h*d + d) + dense(d*n + n)
    let closed = |c: usize, f1: usize, f2: usize, h: usize, d: usize, n: usize| {
        3 * c * f1 + f1 + 2 * f1 + 3 * f1 * f2 + f2 + 2 * f2 + 3 * h * (f2 + h + 1) + h * d + d + d * n + n
    };
    for (widths, c, n) in [(CnnRnnWidths::FULL, 1, 13), (CnnRnnWidths::SMALL, 2, 5)] {
        let spec = build_cnn_rnn(n, 25, c, &widths, true).unwrap();
        let expect = closed(c, widths.conv1_filters, widths.conv2_filters, widths.gru_units, widths.dense_units, n);
        assert_eq!(spec.param_count().unwrap(), expect);
        assert_eq!(Network::new(spec, 0).unwrap().param_count(), expect);
    }
    assert_eq!(closed(1, 200, 400, 200, 200, 0), 643_200);
}

#[test]
fn baseline_on_zero_input_is_uniform() {
    let net = Network::new(build_baseline_rnn(4, 25, 1, 100).unwrap(), 7).unwrap();
    let p = net.predict_proba(&Tensor::zeros(&[2, 25, 1])).unwrap();
    for v in p.data() {
        assert!((v - 0.25).abs() < 1e-15);
    }
}

#[test]
fn predict_proba_rows_on_simplex_and_repeatable() {
    let spec = build_cnn_rnn(3, 25, 1, &CnnRnnWidths::SMALL, true).unwrap();
    let net = Network::new(spec, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = random_tensor(&[300, 25, 1], &mut rng);
    let p = net.predict_proba(&x).unwrap();
    assert_eq!(p.shape(), &[300, 3]);
    for row in p.data().chunks(3) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert!(row.iter().all(|&v| v >= 0.0));
    }
    assert_eq!(net.predict_proba(&x).unwrap(), p);
    let logits = net.logits(&x).unwrap();
    assert_eq!(sniforge_neural::argmax_rows(&logits).unwrap(), sniforge_neural::argmax_rows(&p).unwrap());
}

proptest::proptest! {
    #[test]
    fn softmax_rows_on_simplex_for_extreme_logits(
        rows in proptest::collection::vec(proptest::collection::vec(-800.0f64..800.0, 4), 1..20),
        shift in -1e3f64..1e3,
    ) {
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        let p = sniforge_neural::loss::softmax(&Tensor::new(vec![rows.len(), 4], data.clone()).unwrap()).unwrap();
        for row in p.data().chunks(4) {
            proptest::prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            proptest::prop_assert!(row.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
        // invariant to a constant shift per row
        let shifted: Vec<f64> = data.iter().map(|v| v + shift).collect();
        let q = sniforge_neural::loss::softmax(&Tensor::new(vec![rows.len(), 4], shifted).unwrap()).unwrap();
        for (a, b) in p.data().iter().zip(q.data()) {
            proptest::prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
