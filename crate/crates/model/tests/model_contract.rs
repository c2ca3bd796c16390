//! Contract tests for the assembled model: patching, dual-attention wiring,
//! parameter sharing, heads, determinism, and gradient correctness of the
//! whole encoder at f64.

use tsfm_core::{grad_check, Rng, Tensor};
use tsfm_model::{Model, ModelConfig, Pass};

fn tiny_cfg() -> ModelConfig {
    ModelConfig {
        channels: 2,
        window_len: 12,
        patch_size: 4, // N = 3
        d_model: 8,
        n_layers: 1,
        n_heads: 2,
        d_ff: 16,
        n_classes: 3,
        dropout: 0.0,
        ..ModelConfig::default()
    }
}

#[test]
fn patchify_pins() {
    let cfg = ModelConfig {
        channels: 1,
        window_len: 4,
        patch_size: 2,
        d_model: 4,
        n_layers: 0,
        n_heads: 1,
        d_ff: 8,
        ..ModelConfig::default()
    };
    let model = Model::<f32>::new(&cfg, &mut Rng::new(0)).unwrap();
    let x = Tensor::from_vec(&[1, 1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let p = model.patchify(&x).unwrap();
    assert_eq!(p.shape(), vec![1, 1, 2, 2]);
    assert_eq!(p.to_vec(), vec![1.0, 2.0, 3.0, 4.0]);

    // L=512 with P=16 and P=4 give the standard patch counts.
    assert_eq!(ModelConfig::preset("3M16P").unwrap().n_patches(), 32);
    assert_eq!(ModelConfig::preset("3M4P").unwrap().n_patches(), 128);

    // Non-divisible patch size is a config error at validation time.
    let bad = ModelConfig { window_len: 10, patch_size: 4, ..cfg };
    assert!(Model::<f32>::new(&bad, &mut Rng::new(0)).is_err());
}

#[test]
fn encode_output_shape_and_determinism() {
    let cfg = tiny_cfg();
    let model = Model::<f32>::new(&cfg, &mut Rng::new(11)).unwrap();
    let mut rng = Rng::new(5);
    let x = Tensor::<f32>::rand_uniform(&[2, 2, 12], -1.0, 1.0, &mut rng);
    let (z, _) = model.encode(&x, &mut Pass::Eval).unwrap();
    assert_eq!(z.shape(), vec![2, 2, 3, 8]);

    // Two identical windows in one batch produce identical latent rows.
    let one = Tensor::<f32>::rand_uniform(&[1, 2, 12], -1.0, 1.0, &mut rng);
    let pair_data = [one.to_vec(), one.to_vec()].concat();
    let pair = Tensor::from_vec(&[2, 2, 12], pair_data).unwrap();
    let (zp, _) = model.encode(&pair, &mut Pass::Eval).unwrap();
    let v = zp.to_vec();
    let half = v.len() / 2;
    assert_eq!(v[..half], v[half..]);

    // Same seed, fresh model: bit-identical logits across runs.
    let logits_a = model.forward_classify(&x, &mut Pass::Eval).unwrap().to_vec();
    let model_b = Model::<f32>::new(&cfg, &mut Rng::new(11)).unwrap();
    let logits_b = model_b.forward_classify(&x, &mut Pass::Eval).unwrap().to_vec();
    assert_eq!(logits_a, logits_b);
}

#[test]
fn encode_is_channel_permutation_equivariant_but_classify_is_not() {
    let cfg = ModelConfig { channels: 3, ..tiny_cfg() };
    let model = Model::<f64>::new(&cfg, &mut Rng::new(3)).unwrap();
    let mut rng = Rng::new(8);
    let x = Tensor::<f64>::rand_uniform(&[1, 3, 12], -1.0, 1.0, &mut rng);

    // Swap channels 0 and 2.
    let v = x.to_vec();
    let mut sw = v.clone();
    sw[..12].copy_from_slice(&v[24..36]);
    sw[24..36].copy_from_slice(&v[..12]);
    let xs = Tensor::from_vec(&[1, 3, 12], sw).unwrap();

    let (z, _) = model.encode(&x, &mut Pass::Eval).unwrap();
    let (zs, _) = model.encode(&xs, &mut Pass::Eval).unwrap();
    let (zv, zsv) = (z.to_vec(), zs.to_vec());
    let block = 3 * 8; // N * d per channel
    for i in 0..block {
        assert!((zv[i] - zsv[2 * block + i]).abs() < 1e-9);
        assert!((zv[2 * block + i] - zsv[i]).abs() < 1e-9);
        assert!((zv[block + i] - zsv[block + i]).abs() < 1e-9);
    }

    // The flattened head is channel-sensitive: logits must differ.
    let la = model.classify(&z).unwrap().to_vec();
    let lb = model.classify(&zs).unwrap().to_vec();
    assert!(la.iter().zip(&lb).any(|(a, b)| (a - b).abs() > 1e-9));
}

#[test]
fn channel_attention_flag_changes_output() {
    let cfg = tiny_cfg();
    let ablated = ModelConfig { channel_attention: false, ..cfg.clone() };
    let model = Model::<f32>::new(&cfg, &mut Rng::new(2)).unwrap();
    let mut model_ab = Model::<f32>::new(&ablated, &mut Rng::new(2)).unwrap();
    // Same parameters, different wiring.
    model_ab.restore(&model.snapshot()).unwrap();
    let x = Tensor::<f32>::rand_uniform(&[1, 2, 12], -1.0, 1.0, &mut Rng::new(4));
    let a = model.forward_classify(&x, &mut Pass::Eval).unwrap().to_vec();
    let b = model_ab.forward_classify(&x, &mut Pass::Eval).unwrap().to_vec();
    assert!(a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 1e-7));
}

#[test]
fn single_channel_attention_weights_are_exactly_one() {
    let cfg = ModelConfig { channels: 1, ..tiny_cfg() };
    let model = Model::<f32>::new(&cfg, &mut Rng::new(7)).unwrap();
    let x = Tensor::<f32>::rand_uniform(&[2, 1, 12], -1.0, 1.0, &mut Rng::new(9));
    let w = model.channel_attention_weights(&x, 0).unwrap();
    assert_eq!(w.shape(), vec![2, 3, 2, 1, 1]);
    assert!(w.to_vec().iter().all(|&v| v == 1.0));
}

#[test]
fn temporal_and_channel_attention_share_storage() {
    // Mutating W_Q through the layer handle must change the
    // channel-attention weights: same storage, not a copy.
    let cfg = tiny_cfg();
    let model = Model::<f32>::new(&cfg, &mut Rng::new(31)).unwrap();
    let x = Tensor::<f32>::rand_uniform(&[1, 2, 12], -1.0, 1.0, &mut Rng::new(12));
    let before = model.channel_attention_weights(&x, 0).unwrap().to_vec();
    model.layers[0].attn.wq.with_data_mut(|d| {
        for v in d.iter_mut() {
            *v += 0.35;
        }
    });
    let after = model.channel_attention_weights(&x, 0).unwrap().to_vec();
    assert!(before.iter().zip(&after).any(|(a, b)| (a - b).abs() > 1e-6));
}

#[test]
fn shared_wq_gets_gradient_from_both_sublayers() {
    // Finite-difference oracle on tiny dims: perturbing W_Q changes the
    // loss through both the temporal and the channel path, and the
    // analytic gradient matches the combined effect.
    let cfg = ModelConfig { dropout: 0.0, ..tiny_cfg() };
    let model = Model::<f64>::new(&cfg, &mut Rng::new(41)).unwrap();
    let x = Tensor::<f64>::rand_uniform(&[1, 2, 12], -1.0, 1.0, &mut Rng::new(42));
    let wq = model.layers[0].attn.wq.clone();
    let report = grad_check(
        |_| {
            let logits = model.forward_classify(&x, &mut Pass::Eval).unwrap();
            logits.mul(&logits)?.sum_all()
        },
        &[wq.clone()],
        1e-5,
        1e-3,
    )
    .unwrap();
    assert!(report.passed(), "max rel err {}", report.max_rel_err);

    // Ablating channel attention changes grad(W_Q): the channel sublayer
    // contributes to the shared gradient.
    let grad_dual = {
        model.zero_grads();
        let logits = model.forward_classify(&x, &mut Pass::Eval).unwrap();
        logits.mul(&logits).unwrap().sum_all().unwrap().backward().unwrap();
        wq.grad().unwrap().to_vec()
    };
    let ablated = ModelConfig { channel_attention: false, ..cfg };
    let model_ab = Model::<f64>::new(&ablated, &mut Rng::new(41)).unwrap();
    model_ab.restore(&model.snapshot()).unwrap();
    let grad_temporal_only = {
        let logits = model_ab.forward_classify(&x, &mut Pass::Eval).unwrap();
        logits.mul(&logits).unwrap().sum_all().unwrap().backward().unwrap();
        model_ab.layers[0].attn.wq.grad().unwrap().to_vec()
    };
    assert!(grad_dual
        .iter()
        .zip(&grad_temporal_only)
        .any(|(a, b)| (a - b).abs() > 1e-9));
}

#[test]
fn reconstruct_shapes_and_zero_head() {
    let cfg = tiny_cfg();
    let model = Model::<f32>::new(&cfg, &mut Rng::new(1)).unwrap();
    let x = Tensor::<f32>::rand_uniform(&[2, 2, 12], -1.0, 1.0, &mut Rng::new(2));
    let (z, _) = model.encode(&x, &mut Pass::Eval).unwrap();
    let r = model.reconstruct(&z).unwrap();
    assert_eq!(r.shape(), vec![2, 2, 3, 4]);

    model.recon_w.with_data_mut(|d| d.fill(0.0));
    model.recon_b.with_data_mut(|d| d.fill(0.0));
    let r0 = model.reconstruct(&z).unwrap();
    assert!(r0.to_vec().iter().all(|&v| v == 0.0));
}

/// Solve A X = I for square A via Gauss-Jordan; test-only linear algebra.
fn invert(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * 2 * n];
    for r in 0..n {
        m[r * 2 * n..r * 2 * n + n].copy_from_slice(&a[r * n..(r + 1) * n]);
        m[r * 2 * n + n + r] = 1.0;
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| {
                m[i * 2 * n + col].abs().partial_cmp(&m[j * 2 * n + col].abs()).unwrap()
            })
            .unwrap();
        for c in 0..2 * n {
            m.swap(col * 2 * n + c, piv * 2 * n + c);
        }
        let diag = m[col * 2 * n + col];
        for c in 0..2 * n {
            m[col * 2 * n + c] /= diag;
        }
        for r in 0..n {
            if r != col {
                let f = m[r * 2 * n + col];
                for c in 0..2 * n {
                    m[r * 2 * n + c] -= f * m[col * 2 * n + c];
                }
            }
        }
    }
    let mut out = vec![0.0; n * n];
    for r in 0..n {
        out[r * n..(r + 1) * n].copy_from_slice(&m[r * 2 * n + n..(r + 1) * 2 * n]);
    }
    out
}

#[test]
fn reconstruction_head_as_pseudo_inverse_recovers_input() {
    // Identity-like encoder: zero layers, positional table zeroed. Then
    // embed = x W + b, and the right inverse R = W^T (W W^T)^-1 with bias
    // -b R makes reconstruct(embed(x)) = x.
    let cfg = ModelConfig {
        channels: 1,
        window_len: 8,
        patch_size: 2,
        d_model: 6,
        n_layers: 0,
        n_heads: 1,
        d_ff: 8,
        dropout: 0.0,
        ..ModelConfig::default()
    };
    let model = Model::<f64>::new(&cfg, &mut Rng::new(77)).unwrap();
    model.pos.with_data_mut(|d| d.fill(0.0));

    let (p, d) = (cfg.patch_size, cfg.d_model);
    let w = model.patch_w.to_vec(); // [P, d]
    let b = model.patch_b.to_vec(); // [d]

    // gram[P,P] = W W^T
    let mut gram = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            gram[i * p + j] = (0..d).map(|t| w[i * d + t] * w[j * d + t]).sum();
        }
    }
    let gram_inv = invert(&gram, p);
    // r[d, P] = W^T gram_inv
    let mut r = vec![0.0; d * p];
    for t in 0..d {
        for j in 0..p {
            r[t * p + j] = (0..p).map(|i| w[i * d + t] * gram_inv[i * p + j]).sum();
        }
    }
    let mut rb = vec![0.0; p];
    for j in 0..p {
        rb[j] = -(0..d).map(|t| b[t] * r[t * p + j]).sum::<f64>();
    }
    model.recon_w.set_data(r).unwrap();
    model.recon_b.set_data(rb).unwrap();

    let mut rng = Rng::new(99);
    let x = Tensor::<f64>::rand_uniform(&[1, 1, 8], -1.0, 1.0, &mut rng);
    let patches = model.patchify(&x).unwrap();
    let emb = model.embed(&patches).unwrap();
    let z = model.encoder_forward(&emb, &mut Pass::Eval).unwrap();
    let recon = model.reconstruct(&z).unwrap();
    for (a, b) in recon.to_vec().iter().zip(patches.to_vec()) {
        assert!((a - b).abs() < 1e-3, "{a} vs {b}");
    }
}

#[test]
fn classify_pins() {
    let cfg = tiny_cfg();
    let model = Model::<f32>::new(&cfg, &mut Rng::new(6)).unwrap();
    let mut rng = Rng::new(61);
    let x = Tensor::<f32>::rand_uniform(&[3, 2, 12], -1.0, 1.0, &mut rng);

    // Zero head weights, fixed bias: every instance gets logits == bias.
    model.head_w.with_data_mut(|d| d.fill(0.0));
    model.head_b.set_data(vec![0.5, -1.0, 2.0]).unwrap();
    let logits = model.forward_classify(&x, &mut Pass::Eval).unwrap();
    for row in logits.to_vec().chunks_exact(3) {
        assert_eq!(row, &[0.5, -1.0, 2.0]);
    }

    // argmax(softmax(logits)) == argmax(logits) for random logits.
    let raw = Tensor::<f32>::rand_uniform(&[4, 5], -3.0, 3.0, &mut rng);
    let probs = raw.softmax_lastaxis().unwrap();
    let argmax = |v: &[f32]| {
        v.iter().enumerate().fold((0usize, f32::MIN), |best, (i, &x)| {
            if x > best.1 {
                (i, x)
            } else {
                best
            }
        })
        .0
    };
    for (lrow, prow) in raw.to_vec().chunks_exact(5).zip(probs.to_vec().chunks_exact(5)) {
        assert_eq!(argmax(lrow), argmax(prow));
    }
}

#[test]
fn pooling_over_single_patch_is_identity() {
    let z = Tensor::<f32>::rand_uniform(&[2, 3, 1, 4], -1.0, 1.0, &mut Rng::new(8));
    let pooled = z.mean_axis(2).unwrap();
    assert_eq!(pooled.to_vec(), z.to_vec());
}

#[test]
fn model_param_count_matches_analytic_formula() {
    for name in ["3M16P", "25M16P"] {
        let cfg = ModelConfig::preset(name).unwrap();
        // Building the full preset is costly; the tiny config is checked
        // instance-for-instance below, the presets via the formula only.
        assert!(cfg.count_params() > 0);
    }
    let cfg = tiny_cfg();
    let model = Model::<f32>::new(&cfg, &mut Rng::new(0)).unwrap();
    assert_eq!(model.param_count(), cfg.count_params());
}

#[test]
fn full_model_gradients_match_finite_differences() {
    // C=2, N=3, d=8, 1 dual-attention layer, all parameters at once.
    let cfg = ModelConfig { dropout: 0.0, ..tiny_cfg() };
    let model = Model::<f64>::new(&cfg, &mut Rng::new(55)).unwrap();
    let x = Tensor::<f64>::rand_uniform(&[1, 2, 12], -1.0, 1.0, &mut Rng::new(56));
    let params = model.params();
    let report = grad_check(
        |_| {
            let (z, _) = model.encode(&x, &mut Pass::Eval).map_err(|e| match e {
                tsfm_model::ModelError::Tensor(t) => t,
                other => panic!("{other}"),
            })?;
            let logits = model.classify(&z)?;
            let recon = model.reconstruct(&z)?;
            let a = logits.mul(&logits)?.sum_all()?;
            let b = recon.mul(&recon)?.sum_all()?;
            a.add(&b)?.sum_all()
        },
        &params,
        1e-5,
        1e-3,
    )
    .unwrap();
    assert!(report.passed(), "max rel err {} at {:?}", report.max_rel_err, report.worst);
}

#[test]
fn dropout_is_active_only_in_training() {
    let cfg = ModelConfig { dropout: 0.5, ..tiny_cfg() };
    let model = Model::<f32>::new(&cfg, &mut Rng::new(14)).unwrap();
    let x = Tensor::<f32>::rand_uniform(&[1, 2, 12], -1.0, 1.0, &mut Rng::new(15));
    let eval_a = model.forward_classify(&x, &mut Pass::Eval).unwrap().to_vec();
    let eval_b = model.forward_classify(&x, &mut Pass::Eval).unwrap().to_vec();
    assert_eq!(eval_a, eval_b);
    let mut rng = Rng::new(16);
    let train = model
        .forward_classify(&x, &mut Pass::Train { rng: &mut rng })
        .unwrap()
        .to_vec();
    assert!(eval_a.iter().zip(&train).any(|(a, b)| (a - b).abs() > 1e-7));
}
