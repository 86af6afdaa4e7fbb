mod common;

use splitctl_core::nn::{train_step, DenseNet, OptimizerConfig, Sample, SgdMomentum};

fn samples<'a>(inputs: &'a [Vec<f64>], targets: &[(usize, f64)]) -> Vec<Sample<'a>> {
    inputs.iter().zip(targets).map(|(x, &(action, target))| Sample { input: x, action, target }).collect()
}

#[test]
fn analytic_gradients_match_central_differences() {
    for seed in 0..30 {
        let (net, inputs, targets) = common::gradient_check_case(seed);
        let batch = samples(&inputs, &targets);
        let err = common::max_gradient_error(&net, &batch, 1e-5);
        assert!(err <= 1e-4, "seed {seed}: max relative error {err:e}");
    }
}

#[test]
fn untaken_actions_get_no_output_gradient() {
    let (net, inputs, _) = common::gradient_check_case(3);
    let targets: Vec<(usize, f64)> = inputs.iter().map(|_| (1, 0.5)).collect();
    let (_, grads) = net.loss_and_gradients(&samples(&inputs, &targets)).unwrap();
    let out = grads.layers.last().unwrap();
    for col in [0, 2] {
        assert!(out.weights.column(col).iter().all(|&g| g == 0.0));
        assert_eq!(out.bias[col], 0.0);
    }
}

#[test]
fn small_sgd_step_reduces_loss() {
    for seed in 0..10 {
        let (mut net, inputs, targets) = common::gradient_check_case(100 + seed);
        let batch = samples(&inputs, &targets);
        let before = net.loss(&batch).unwrap();
        let cfg = OptimizerConfig { learning_rate: 1e-3, momentum: 0.0, lr_decay: 0.0, ..Default::default() };
        let mut opt = SgdMomentum::new(&cfg, &net);
        assert_eq!(train_step(&mut net, &mut opt, &batch).unwrap(), before);
        let after = net.loss(&batch).unwrap();
        assert!(after < before || before == 0.0, "seed {seed}: {before} -> {after}");
    }
}

#[test]
fn full_size_network_has_expected_parameter_count() {
    let net = DenseNet::init(&[6, 256, 128, 64, 3], 0).unwrap();
    assert_eq!(net.param_count(), 7 * 256 + 257 * 128 + 129 * 64 + 65 * 3);
}
