use super::*;
use crate::rng::{substream, Stream};
use proptest::prelude::*;

fn layer<T: Scalar>(
    in_dim: usize,
    out_dim: usize,
    w: &[f64],
    b: &[f64],
    act: Activation,
) -> DenseLayer<T> {
    DenseLayer::from_parts(
        in_dim,
        out_dim,
        w.iter().map(|&v| T::lit(v)).collect(),
        b.iter().map(|&v| T::lit(v)).collect(),
        act,
        0.0,
    )
    .expect("valid test layer")
}

/// Loss used by the finite-difference oracle: a fixed linear functional of
/// the network output, L(theta) = sum_i dy_i * out_i(theta).
fn linear_loss(net: &Network<f64>, input: &[f64], dy: &[f64]) -> f64 {
    let out = net.infer(input).expect("infer");
    out.iter().zip(dy).map(|(o, g)| o * g).sum()
}

/// Central finite differences over every parameter.
fn numeric_grads(net: &mut Network<f64>, input: &[f64], dy: &[f64], h: f64) -> Gradients<f64> {
    let mut grads = net.zero_gradients();
    for l in 0..grads.layers.len() {
        for which in 0..2 {
            let count = if which == 0 {
                net.layers()[l].weights().len()
            } else {
                net.layers()[l].biases().len()
            };
            for i in 0..count {
                let read = |net: &mut Network<f64>| -> f64 {
                    let layer = &mut net.layers_mut()[l];
                    if which == 0 {
                        layer.weights()[i]
                    } else {
                        layer.biases()[i]
                    }
                };
                let write = |net: &mut Network<f64>, v: f64| {
                    let layer = &mut net.layers_mut()[l];
                    if which == 0 {
                        layer.weights_mut()[i] = v;
                    } else {
                        layer.biases_mut()[i] = v;
                    }
                };
                let orig = read(net);
                write(net, orig + h);
                let plus = linear_loss(net, input, dy);
                write(net, orig - h);
                let minus = linear_loss(net, input, dy);
                write(net, orig);
                let g = (plus - minus) / (2.0 * h);
                if which == 0 {
                    grads.layers[l].weights[i] = g;
                } else {
                    grads.layers[l].biases[i] = g;
                }
            }
        }
    }
    grads
}

/// Worst relative disagreement between two gradient sets. The denominator
/// is floored so that entries near zero — where central differences are pure
/// cancellation noise (~1e-12 absolute at h = 1e-5) — are judged on an
/// absolute scale instead.
fn max_rel_err(a: &Gradients<f64>, b: &Gradients<f64>, floor: f64) -> f64 {
    let mut worst = 0.0f64;
    for (la, lb) in a.layers.iter().zip(&b.layers) {
        let pairs = la
            .weights
            .iter()
            .zip(&lb.weights)
            .chain(la.biases.iter().zip(&lb.biases));
        for (&x, &y) in pairs {
            let scale = x.abs().max(y.abs()).max(floor);
            worst = worst.max((x - y).abs() / scale);
        }
    }
    worst
}

#[test]
fn hand_checked_single_layer_backward() {
    // W = [[1,2],[3,4]], b = [0.5,-0.5], leaky-relu, x = [1,-1]:
    //   pre  = [-0.5, -1.5]
    //   post = [-0.005, -0.015]
    // With dy = [1,1] both deltas pass through the 0.01 slope:
    //   dW = [[0.01,-0.01],[0.01,-0.01]], db = [0.01, 0.01]
    let net = Network::from_layers(
        2,
        vec![layer::<f64>(
            2,
            2,
            &[1.0, 2.0, 3.0, 4.0],
            &[0.5, -0.5],
            Activation::LeakyRelu,
        )],
    )
    .unwrap();
    let (out, cache) = net
        .forward(&[1.0, -1.0], Mode::Eval, None::<&mut rand_chacha::ChaCha8Rng>)
        .unwrap();
    assert_eq!(out, vec![-0.005, -0.015]);
    let grads = net.backward(&cache, &[1.0, 1.0]).unwrap();
    assert_eq!(grads.layers[0].weights, vec![0.01, -0.01, 0.01, -0.01]);
    assert_eq!(grads.layers[0].biases, vec![0.01, 0.01]);
}

#[test]
fn hand_checked_two_layer_chain() {
    // Identity-weight relu layer into a [1,-1] linear head, x = [2,-3]:
    // post1 = [2,0], out = 2. With dy = [1]:
    //   dW2 = [2, 0], db2 = [1]
    //   upstream = [1,-1], relu gate kills the second lane -> delta1 = [1,0]
    //   dW1 = [[2,-3],[0,0]], db1 = [1,0]
    let net = Network::from_layers(
        2,
        vec![
            layer::<f64>(2, 2, &[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0], Activation::Relu),
            layer::<f64>(2, 1, &[1.0, -1.0], &[0.0], Activation::Identity),
        ],
    )
    .unwrap();
    let (out, cache) = net
        .forward(&[2.0, -3.0], Mode::Eval, None::<&mut rand_chacha::ChaCha8Rng>)
        .unwrap();
    assert_eq!(out, vec![2.0]);
    let grads = net.backward(&cache, &[1.0]).unwrap();
    assert_eq!(grads.layers[1].weights, vec![2.0, 0.0]);
    assert_eq!(grads.layers[1].biases, vec![1.0]);
    assert_eq!(grads.layers[0].weights, vec![2.0, -3.0, 0.0, 0.0]);
    assert_eq!(grads.layers[0].biases, vec![1.0, 0.0]);
}

#[test]
fn softmax_jacobian_vector_product() {
    // Uniform softmax over two logits: p = [0.5, 0.5]. For dy = [1, 0] the
    // JVP is p_i (dy_i - sum_j dy_j p_j) = [0.25, -0.25].
    let net = Network::from_layers(
        2,
        vec![layer::<f64>(
            2,
            2,
            &[1.0, 0.0, 0.0, 1.0],
            &[0.0, 0.0],
            Activation::Softmax,
        )],
    )
    .unwrap();
    let (out, cache) = net
        .forward(&[0.0, 0.0], Mode::Eval, None::<&mut rand_chacha::ChaCha8Rng>)
        .unwrap();
    assert_eq!(out, vec![0.5, 0.5]);
    let grads = net.backward(&cache, &[1.0, 0.0]).unwrap();
    // dz flows into dW = dz ⊗ x; with x = 0 only biases pick it up.
    assert_eq!(grads.layers[0].biases, vec![0.25, -0.25]);
}

/// Smallest |pre-activation| across all layers for `input`; finite
/// differences near a rectifier kink straddle the non-differentiable point,
/// so probe inputs must keep a margin from zero.
fn kink_clearance(net: &Network<f64>, input: &[f64]) -> f64 {
    let (_, cache) = net
        .forward(input, Mode::Eval, None::<&mut rand_chacha::ChaCha8Rng>)
        .unwrap();
    cache
        .layers
        .iter()
        .flat_map(|l| l.pre.iter())
        .fold(f64::INFINITY, |acc, &z| acc.min(z.abs()))
}

fn sample_clear_input(
    net: &Network<f64>,
    dim: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
    margin: f64,
) -> Vec<f64> {
    for _ in 0..200 {
        let input: Vec<f64> = (0..dim).map(|_| f64::uniform01(rng) * 2.0 - 1.0).collect();
        if kink_clearance(net, &input) >= margin {
            return input;
        }
    }
    panic!("no kink-free probe input found in 200 draws");
}

#[test]
fn backward_matches_finite_differences() {
    // Random leaky-relu/softmax nets in f64, checked against central
    // differences on a linear functional of the output.
    let mut rng = substream(11, Stream::Init);
    for case in 0..8 {
        let head = if case % 2 == 0 {
            Activation::Softmax
        } else {
            Activation::Identity
        };
        let specs = mlp_specs(2, 8, Activation::LeakyRelu, 0.0, 3, head);
        let mut net: Network<f64> = Network::new(10, &specs, &mut rng).unwrap();
        let input = sample_clear_input(&net, 10, &mut rng, 1e-3);
        let dy: Vec<f64> = (0..3).map(|_| f64::uniform01(&mut rng) * 2.0 - 1.0).collect();
        let (_, cache) = net
            .forward(&input, Mode::Eval, None::<&mut rand_chacha::ChaCha8Rng>)
            .unwrap();
        let analytic = net.backward(&cache, &dy).unwrap();
        let numeric = numeric_grads(&mut net, &input, &dy, 1e-5);
        let err = max_rel_err(&analytic, &numeric, 1e-6);
        assert!(
            err < 1e-5,
            "case {case}: analytic/numeric gradients disagree, max rel err {err:.3e}"
        );
    }
}

#[test]
fn pre_activation_seeding_matches_logit_differences() {
    // backward_pre_activation(g) must equal d/dtheta of sum_i g_i z_i where
    // z are the final-layer logits. Numeric side: same parameters with an
    // identity head, so the output *is* z.
    let mut rng = substream(12, Stream::Init);
    let specs = mlp_specs(1, 6, Activation::LeakyRelu, 0.0, 3, Activation::Softmax);
    let net: Network<f64> = Network::new(5, &specs, &mut rng).unwrap();
    let mut logit_net = Network::from_layers(
        5,
        net.layers()
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let act = if i == net.layers().len() - 1 {
                    Activation::Identity
                } else {
                    l.activation()
                };
                DenseLayer::from_parts(
                    l.in_dim(),
                    l.out_dim(),
                    l.weights().to_vec(),
                    l.biases().to_vec(),
                    act,
                    0.0,
                )
                .unwrap()
            })
            .collect(),
    )
    .unwrap();
    let input = [0.3, -0.7, 0.1, 0.9, -0.2];
    let g = [0.4, -1.1, 0.25];
    let (_, cache) = net
        .forward(&input, Mode::Eval, None::<&mut rand_chacha::ChaCha8Rng>)
        .unwrap();
    let analytic = net.backward_pre_activation(&cache, &g).unwrap();
    let numeric = numeric_grads(&mut logit_net, &input, &g, 1e-5);
    let err = max_rel_err(&analytic, &numeric, 1e-6);
    assert!(err < 1e-5, "pre-activation seeding off by {err:.3e}");
}

#[test]
fn cross_entropy_logit_gradient_is_p_minus_onehot() {
    // For L = -ln p_y through a softmax head, dL/dz = p - onehot(y). Check
    // the seeded backward against finite differences of the actual loss.
    let mut rng = substream(13, Stream::Init);
    let specs = mlp_specs(1, 6, Activation::LeakyRelu, 0.0, 3, Activation::Softmax);
    let mut net: Network<f64> = Network::new(4, &specs, &mut rng).unwrap();
    let input = [0.5, -0.4, 0.8, -0.1];
    let target = 1usize;

    let (probs, cache) = net
        .forward(&input, Mode::Eval, None::<&mut rand_chacha::ChaCha8Rng>)
        .unwrap();
    let mut dz = probs.clone();
    dz[target] -= 1.0;
    let analytic = net.backward_pre_activation(&cache, &dz).unwrap();

    // Numeric: perturb each parameter, recompute -ln p_target.
    let mut numeric = net.zero_gradients();
    let h = 1e-6;
    for l in 0..numeric.layers.len() {
        for i in 0..numeric.layers[l].weights.len() {
            let orig = net.layers()[l].weights()[i];
            net.layers_mut()[l].weights_mut()[i] = orig + h;
            let plus = -net.infer(&input).unwrap()[target].ln();
            net.layers_mut()[l].weights_mut()[i] = orig - h;
            let minus = -net.infer(&input).unwrap()[target].ln();
            net.layers_mut()[l].weights_mut()[i] = orig;
            numeric.layers[l].weights[i] = (plus - minus) / (2.0 * h);
        }
        for i in 0..numeric.layers[l].biases.len() {
            let orig = net.layers()[l].biases()[i];
            net.layers_mut()[l].biases_mut()[i] = orig + h;
            let plus = -net.infer(&input).unwrap()[target].ln();
            net.layers_mut()[l].biases_mut()[i] = orig - h;
            let minus = -net.infer(&input).unwrap()[target].ln();
            net.layers_mut()[l].biases_mut()[i] = orig;
            numeric.layers[l].biases[i] = (plus - minus) / (2.0 * h);
        }
    }
    let err = max_rel_err(&analytic, &numeric, 1e-6);
    assert!(err < 1e-5, "cross-entropy logit gradient off by {err:.3e}");
}

#[test]
fn zero_output_gradient_gives_zero_parameter_gradients() {
    let mut rng = substream(14, Stream::Init);
    let specs = mlp_specs(2, 8, Activation::LeakyRelu, 0.0, 3, Activation::Softmax);
    let net: Network<f64> = Network::new(6, &specs, &mut rng).unwrap();
    let input: Vec<f64> = (0..6).map(|_| f64::uniform01(&mut rng)).collect();
    let (_, cache) = net
        .forward(&input, Mode::Eval, None::<&mut rand_chacha::ChaCha8Rng>)
        .unwrap();
    let grads = net.backward(&cache, &[0.0, 0.0, 0.0]).unwrap();
    for lg in &grads.layers {
        assert!(lg.weights.iter().all(|&g| g == 0.0));
        assert!(lg.biases.iter().all(|&g| g == 0.0));
    }
}

#[test]
fn stale_cache_is_rejected() {
    let mut rng = substream(15, Stream::Init);
    let small: Network<f64> =
        Network::new(4, &mlp_specs(1, 3, Activation::Relu, 0.0, 2, Activation::Identity), &mut rng)
            .unwrap();
    let big: Network<f64> =
        Network::new(4, &mlp_specs(2, 5, Activation::Relu, 0.0, 2, Activation::Identity), &mut rng)
            .unwrap();
    let (_, cache) = small
        .forward(&[0.1, 0.2, 0.3, 0.4], Mode::Eval, None::<&mut rand_chacha::ChaCha8Rng>)
        .unwrap();
    let err = big.backward(&cache, &[1.0, 0.0]).unwrap_err();
    assert!(
        matches!(err, crate::Error::Contract(_)),
        "mismatched cache must be a contract violation, got {err}"
    );
}

#[test]
fn clip_scales_to_the_boundary() {
    // Gradient [3,4] has norm 5; clipping at 0.5 scales by 0.1.
    let mut g = Gradients {
        layers: vec![LayerGrads {
            weights: vec![3.0f64, 4.0],
            biases: vec![],
        }],
    };
    let norm = clip_global_norm(&mut [&mut g], 0.5).unwrap();
    assert_eq!(norm, 5.0);
    assert_eq!(g.layers[0].weights, vec![3.0 * 0.1, 4.0 * 0.1]);
    let after = g.squared_norm().sqrt();
    assert!((after - 0.5).abs() <= 1e-12, "post-clip norm {after}");
}

#[test]
fn clip_leaves_small_and_zero_gradients_alone() {
    let mut g = Gradients {
        layers: vec![LayerGrads {
            weights: vec![0.1f64, -0.2],
            biases: vec![0.05],
        }],
    };
    let before = g.clone();
    clip_global_norm(&mut [&mut g], 0.5).unwrap();
    assert_eq!(g.layers[0].weights, before.layers[0].weights);
    assert_eq!(g.layers[0].biases, before.layers[0].biases);

    let mut z = Gradients {
        layers: vec![LayerGrads {
            weights: vec![0.0f64; 4],
            biases: vec![0.0],
        }],
    };
    let norm = clip_global_norm(&mut [&mut z], 0.5).unwrap();
    assert_eq!(norm, 0.0);
    assert!(z.layers[0].weights.iter().all(|&v| v == 0.0));
}

#[test]
fn joint_clip_covers_multiple_parameter_sets() {
    // Actor-and-critic style: [3] and [4] jointly have norm 5.
    let mut a = Gradients {
        layers: vec![LayerGrads {
            weights: vec![3.0f64],
            biases: vec![],
        }],
    };
    let mut b = Gradients {
        layers: vec![LayerGrads {
            weights: vec![4.0f64],
            biases: vec![],
        }],
    };
    let norm = clip_global_norm(&mut [&mut a, &mut b], 1.0).unwrap();
    assert_eq!(norm, 5.0);
    assert!((a.layers[0].weights[0] - 0.6).abs() < 1e-15);
    assert!((b.layers[0].weights[0] - 0.8).abs() < 1e-15);
    assert!((global_grad_norm(&[&a, &b]) - 1.0).abs() <= 1e-12);
}

/// Textbook Adam over a flat parameter vector; the independent oracle for
/// the optimizer test.
struct ReferenceAdam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl ReferenceAdam {
    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / (1.0 - self.beta1.powi(self.t as i32));
            let v_hat = self.v[i] / (1.0 - self.beta2.powi(self.t as i32));
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[test]
fn adam_matches_reference_over_several_steps() {
    let net0 = Network::from_layers(
        1,
        vec![layer::<f64>(1, 2, &[0.5, -0.25], &[0.1, 0.0], Activation::Identity)],
    )
    .unwrap();
    let mut net = net0.clone();
    let mut opt = OptimizerState::adam(&net, 0.001, 0.9, 0.999, 1e-8).unwrap();
    let mut reference = ReferenceAdam {
        lr: 0.001,
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
        t: 0,
        m: vec![0.0; 4],
        v: vec![0.0; 4],
    };
    let mut ref_params = vec![0.5, -0.25, 0.1, 0.0];
    let grad_seq = [
        [0.3, -0.2, 0.05, 1.0],
        [-0.1, 0.4, 0.0, -0.5],
        [0.2, 0.2, -0.3, 0.25],
    ];
    for g in &grad_seq {
        let grads = Gradients {
            layers: vec![LayerGrads {
                weights: vec![g[0], g[1]],
                biases: vec![g[2], g[3]],
            }],
        };
        opt.step(&mut net, &grads).unwrap();
        reference.step(&mut ref_params, g);
    }
    assert_eq!(opt.step_count(), 3);
    let got = [
        net.layers()[0].weights()[0],
        net.layers()[0].weights()[1],
        net.layers()[0].biases()[0],
        net.layers()[0].biases()[1],
    ];
    for (i, (&a, &b)) in got.iter().zip(&ref_params).enumerate() {
        let rel = (a - b).abs() / b.abs().max(1e-12);
        assert!(rel < 1e-12, "param {i}: {a} vs reference {b} (rel {rel:.2e})");
    }
}

#[test]
fn adam_first_step_magnitude_is_learning_rate() {
    // With any constant gradient g, the bias corrections cancel on step one
    // and the update is lr * g/(|g| + eps') — essentially lr * sign(g).
    let mut net = Network::from_layers(
        1,
        vec![layer::<f64>(1, 1, &[1.0], &[0.0], Activation::Identity)],
    )
    .unwrap();
    let mut opt = OptimizerState::adam(&net, 0.01, 0.9, 0.999, 1e-8).unwrap();
    let grads = Gradients {
        layers: vec![LayerGrads {
            weights: vec![0.3],
            biases: vec![0.0],
        }],
    };
    opt.step(&mut net, &grads).unwrap();
    let expected = 1.0 - 0.01 * (0.3 / (0.3 + 1e-8));
    assert!(
        (net.layers()[0].weights()[0] - expected).abs() < 1e-14,
        "got {}, expected {expected}",
        net.layers()[0].weights()[0]
    );
}

#[test]
fn sgd_zero_gradient_keeps_parameters_and_counts_step() {
    let mut rng = substream(16, Stream::Init);
    let mut net: Network<f32> =
        Network::new(3, &mlp_specs(1, 4, Activation::Relu, 0.0, 2, Activation::Identity), &mut rng)
            .unwrap();
    let before = net.clone();
    let mut opt = OptimizerState::sgd(0.1).unwrap();
    let zero = net.zero_gradients();
    opt.step(&mut net, &zero).unwrap();
    assert_eq!(opt.step_count(), 1);
    for (a, b) in net.layers().iter().zip(before.layers()) {
        assert_eq!(a.weights(), b.weights());
        assert_eq!(a.biases(), b.biases());
    }
}

#[test]
fn optimizer_rejects_mismatched_shapes() {
    let mut rng = substream(17, Stream::Init);
    let net_a: Network<f64> =
        Network::new(3, &mlp_specs(1, 4, Activation::Relu, 0.0, 2, Activation::Identity), &mut rng)
            .unwrap();
    let mut net_b: Network<f64> =
        Network::new(3, &mlp_specs(1, 5, Activation::Relu, 0.0, 2, Activation::Identity), &mut rng)
            .unwrap();
    let before = net_b.clone();
    // Moments shaped for A, applied to B with B-shaped gradients.
    let mut opt = OptimizerState::adam(&net_a, 0.001, 0.9, 0.999, 1e-8).unwrap();
    let grads = net_b.zero_gradients();
    let err = opt.step(&mut net_b, &grads).unwrap_err();
    assert!(matches!(err, crate::Error::DimensionMismatch(_)));
    assert_eq!(opt.step_count(), 0, "failed step must not count");
    for (a, b) in net_b.layers().iter().zip(before.layers()) {
        assert_eq!(a.weights(), b.weights(), "failed step must not mutate");
    }
}

#[test]
fn train_mode_requires_generator_and_eval_ignores_dropout() {
    let mut rng = substream(18, Stream::Init);
    let specs = mlp_specs(1, 8, Activation::LeakyRelu, 0.5, 2, Activation::Softmax);
    let net: Network<f32> = Network::new(4, &specs, &mut rng).unwrap();
    let input = [1.0f32, -0.5, 0.25, 0.0];

    let err = net
        .forward(&input, Mode::Train, None::<&mut rand_chacha::ChaCha8Rng>)
        .unwrap_err();
    assert!(matches!(err, crate::Error::Contract(_)));

    // Eval forward is deterministic and equals infer.
    let (out1, _) = net
        .forward(&input, Mode::Eval, None::<&mut rand_chacha::ChaCha8Rng>)
        .unwrap();
    let out2 = net.infer(&input).unwrap();
    assert_eq!(out1, out2);
}

#[test]
fn dropout_masks_are_inverted_and_only_on_hidden_layers() {
    let mut rng = substream(19, Stream::Init);
    let specs = mlp_specs(1, 64, Activation::LeakyRelu, 0.25, 3, Activation::Softmax);
    let net: Network<f32> = Network::new(4, &specs, &mut rng).unwrap();
    let input = [0.5f32, 0.5, -0.5, 1.0];
    let mut drop_rng = substream(19, Stream::Dropout);
    let (_, cache) = net.forward(&input, Mode::Train, Some(&mut drop_rng)).unwrap();
    let mask = cache.layers[0].mask.as_ref().expect("hidden layer masked");
    let keep = 1.0f32 / 0.75;
    assert!(
        mask.iter().all(|&m| m == 0.0 || m == keep),
        "inverted dropout mask values must be 0 or 1/(1-rate)"
    );
    assert!(mask.iter().any(|&m| m == 0.0), "rate 0.25 over 64 units should drop some");
    assert!(mask.iter().any(|&m| m != 0.0), "and keep some");
    assert!(cache.layers[1].mask.is_none(), "output layer is never masked");

    // Zero-rate dropout in Train mode must match Eval exactly and consume
    // no randomness.
    let specs0 = mlp_specs(1, 8, Activation::LeakyRelu, 0.0, 2, Activation::Identity);
    let net0: Network<f32> = Network::new(4, &specs0, &mut rng).unwrap();
    let before = drop_rng.clone();
    let (train_out, _) = net0.forward(&input, Mode::Train, Some(&mut drop_rng)).unwrap();
    assert_eq!(train_out, net0.infer(&input).unwrap());
    assert_eq!(
        drop_rng.clone().random::<u64>(),
        before.clone().random::<u64>(),
        "zero-rate dropout must not advance the generator"
    );
}

#[test]
fn construction_rules_are_enforced() {
    let mut rng = substream(20, Stream::Init);
    // Softmax on a hidden layer.
    let bad = Network::<f32>::new(
        4,
        &[
            LayerSpec::new(8, Activation::Softmax, 0.0),
            LayerSpec::new(2, Activation::Identity, 0.0),
        ],
        &mut rng,
    );
    assert!(matches!(bad.unwrap_err(), crate::Error::Config(_)));
    // Dropout on the output layer.
    let bad = Network::<f32>::new(4, &[LayerSpec::new(2, Activation::Softmax, 0.5)], &mut rng);
    assert!(matches!(bad.unwrap_err(), crate::Error::Config(_)));
    // Dropout rate outside [0, 1].
    let bad = Network::<f32>::new(
        4,
        &[
            LayerSpec::new(8, Activation::Relu, 1.5),
            LayerSpec::new(2, Activation::Identity, 0.0),
        ],
        &mut rng,
    );
    assert!(matches!(bad.unwrap_err(), crate::Error::Config(_)));
    // Zero-width layer and zero input dim.
    assert!(Network::<f32>::new(0, &[LayerSpec::new(2, Activation::Identity, 0.0)], &mut rng).is_err());
    assert!(Network::<f32>::new(4, &[LayerSpec::new(0, Activation::Identity, 0.0)], &mut rng).is_err());
    // Non-finite parameters.
    assert!(DenseLayer::<f64>::from_parts(
        1,
        1,
        vec![f64::NAN],
        vec![0.0],
        Activation::Identity,
        0.0
    )
    .is_err());
}

#[test]
fn initialization_is_seeded_and_bounded() {
    let build = || {
        let mut rng = substream(21, Stream::Init);
        Network::<f32>::new(
            32,
            &mlp_specs(2, 16, Activation::LeakyRelu, 0.5, 3, Activation::Softmax),
            &mut rng,
        )
        .unwrap()
    };
    let a = build();
    let b = build();
    for (la, lb) in a.layers().iter().zip(b.layers()) {
        assert_eq!(la.weights(), lb.weights(), "same seed, same parameters");
        assert_eq!(la.biases(), lb.biases());
    }
    for l in a.layers() {
        let bound = (1.0 / l.in_dim() as f64).sqrt() as f32;
        assert!(
            l.weights().iter().all(|w| w.abs() <= bound),
            "weights exceed the fan-in uniform bound"
        );
        assert!(l.biases().iter().all(|&b| b == 0.0), "biases start at zero");
    }
}

#[test]
fn forward_is_deterministic_given_identical_state() {
    let mut rng = substream(22, Stream::Init);
    let net: Network<f32> = Network::new(
        16,
        &mlp_specs(2, 12, Activation::LeakyRelu, 0.5, 3, Activation::Softmax),
        &mut rng,
    )
    .unwrap();
    let input: Vec<f32> = (0..16).map(|i| (i as f32 * 0.37).sin()).collect();
    let mut rng_a = substream(5, Stream::Dropout);
    let mut rng_b = substream(5, Stream::Dropout);
    let (out_a, _) = net.forward(&input, Mode::Train, Some(&mut rng_a)).unwrap();
    let (out_b, _) = net.forward(&input, Mode::Train, Some(&mut rng_b)).unwrap();
    assert_eq!(out_a, out_b, "identical rng state must replay identically");
}

#[test]
fn checkpoint_roundtrip_is_bit_exact() {
    let mut rng = substream(23, Stream::Init);
    let net: Network<f32> = Network::new(
        10,
        &mlp_specs(2, 8, Activation::LeakyRelu, 0.5, 3, Activation::Softmax),
        &mut rng,
    )
    .unwrap();
    let mut bytes = Vec::new();
    write_network(&net, &mut bytes).unwrap();
    let loaded: Network<f32> = read_network(&mut bytes.as_slice()).unwrap();
    assert_eq!(loaded.input_dim(), net.input_dim());
    for (a, b) in loaded.layers().iter().zip(net.layers()) {
        assert_eq!(a.weights(), b.weights());
        assert_eq!(a.biases(), b.biases());
        assert_eq!(a.activation(), b.activation());
        assert_eq!(a.dropout_rate(), b.dropout_rate());
    }
    // Same bytes written back.
    let mut again = Vec::new();
    write_network(&loaded, &mut again).unwrap();
    assert_eq!(bytes, again);
}

#[test]
fn checkpoint_rejects_corruption() {
    let mut rng = substream(24, Stream::Init);
    let net: Network<f64> = Network::new(
        4,
        &mlp_specs(1, 4, Activation::Relu, 0.0, 2, Activation::Identity),
        &mut rng,
    )
    .unwrap();
    let mut bytes = Vec::new();
    write_network(&net, &mut bytes).unwrap();

    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(matches!(
        read_network::<f64, _>(&mut bad_magic.as_slice()).unwrap_err(),
        crate::Error::Checkpoint(_)
    ));

    let mut bad_version = bytes.clone();
    bad_version[4] = 99;
    assert!(matches!(
        read_network::<f64, _>(&mut bad_version.as_slice()).unwrap_err(),
        crate::Error::Checkpoint(_)
    ));

    let truncated = &bytes[..bytes.len() - 3];
    assert!(matches!(
        read_network::<f64, _>(&mut &truncated[..]).unwrap_err(),
        crate::Error::Checkpoint(_)
    ));
}

#[test]
fn save_and_load_file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.bin");
    let mut rng = substream(25, Stream::Init);
    let net: Network<f32> = Network::new(
        6,
        &mlp_specs(1, 5, Activation::LeakyRelu, 0.5, 2, Activation::Softmax),
        &mut rng,
    )
    .unwrap();
    save_network(&net, &path).unwrap();
    let loaded: Network<f32> = load_network(&path).unwrap();
    assert_eq!(loaded.layers()[0].weights(), net.layers()[0].weights());

    // Appending garbage must be detected.
    use std::io::Write as _;
    let mut f = std::fs::OpenOptions::new().append(true).open(&path).unwrap();
    f.write_all(b"junk").unwrap();
    drop(f);
    assert!(matches!(
        load_network::<f32>(&path).unwrap_err(),
        crate::Error::Checkpoint(_)
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn softmax_is_a_strictly_positive_distribution(
        logits in proptest::collection::vec(-60.0f64..60.0, 1..8)
    ) {
        let mut values = logits.clone();
        softmax_in_place(&mut values);
        let sum: f64 = values.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9, "softmax sums to 1, got {sum}");
        prop_assert!(values.iter().all(|&p| p > 0.0), "softmax outputs strictly positive");
    }

    #[test]
    fn softmax_is_shift_invariant(
        logits in proptest::collection::vec(-30.0f64..30.0, 2..6),
        shift in -50.0f64..50.0
    ) {
        let mut a = logits.clone();
        softmax_in_place(&mut a);
        let mut b: Vec<f64> = logits.iter().map(|v| v + shift).collect();
        softmax_in_place(&mut b);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn clipped_norm_never_exceeds_bound(
        values in proptest::collection::vec(-100.0f64..100.0, 1..32),
        max_norm in 0.01f64..10.0
    ) {
        let mut g = Gradients {
            layers: vec![LayerGrads { weights: values.clone(), biases: vec![] }],
        };
        let before = clip_global_norm(&mut [&mut g], max_norm).unwrap();
        let after = g.squared_norm().sqrt();
        prop_assert!(after <= max_norm + 1e-12, "norm {after} exceeds bound {max_norm}");
        if before <= max_norm {
            prop_assert_eq!(&g.layers[0].weights, &values, "sub-threshold gradients untouched");
        }
    }

    #[test]
    fn leaky_relu_forward_matches_definition(x in -10.0f64..10.0) {
        let net = Network::from_layers(
            1,
            vec![layer::<f64>(1, 1, &[1.0], &[0.0], Activation::LeakyRelu)],
        ).unwrap();
        let out = net.infer(&[x]).unwrap()[0];
        let expected = if x >= 0.0 { x } else { x * LEAKY_SLOPE };
        prop_assert!((out - expected).abs() < 1e-15);
    }

    #[test]
    fn infer_rejects_wrong_input_width(extra in 1usize..4) {
        let mut rng = substream(26, Stream::Init);
        let net: Network<f64> = Network::new(
            4,
            &mlp_specs(1, 3, Activation::Relu, 0.0, 2, Activation::Identity),
            &mut rng,
        ).unwrap();
        let input = vec![0.0; 4 + extra];
        prop_assert!(matches!(
            net.infer(&input).unwrap_err(),
            crate::Error::DimensionMismatch(_)
        ));
    }
}
