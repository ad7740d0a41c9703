use m3net_core::diagnostics::{check_model_gradients, GradCheckOptions, Situation};
use m3net_core::nn::{
    grad_check, softmax_cross_entropy, Activation, DenseLayer, ParamTensor, Parameterized, Sgd,
    SgdConfig,
};
use m3net_core::seed::rng_from_seed;
use m3net_core::{ModelConfig, Variant};
use proptest::prelude::*;
use rand::Rng;

/// tanh hidden layer followed by a two-logit identity layer.
struct TwoLayer {
    hidden: DenseLayer,
    out: DenseLayer,
}

impl TwoLayer {
    fn random(in_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut net = Self {
            hidden: DenseLayer::glorot(in_dim, hidden, Activation::Tanh, &mut rng),
            out: DenseLayer::glorot(hidden, 2, Activation::Identity, &mut rng),
        };
        // nonzero biases so their gradients are exercised away from the origin
        for p in net.params_mut() {
            for v in p.values_mut() {
                *v += rng.random_range(-0.5..0.5);
            }
        }
        net
    }

    fn loss(&self, xs: &[(Vec<f64>, u8)]) -> f64 {
        xs.iter()
            .map(|(x, y)| {
                let h = self.hidden.apply(x).unwrap();
                let z = self.out.apply(&h).unwrap();
                softmax_cross_entropy([z[0], z[1]], *y).0
            })
            .sum::<f64>()
            / xs.len() as f64
    }

    fn backward(&mut self, xs: &[(Vec<f64>, u8)]) {
        let scale = 1.0 / xs.len() as f64;
        for (x, y) in xs {
            let h = self.hidden.forward(x).unwrap();
            let z = self.out.forward(&h).unwrap();
            let (_, g) = softmax_cross_entropy([z[0], z[1]], *y);
            let gh = self.out.backward(&[g[0] * scale, g[1] * scale]).unwrap();
            self.hidden.backward(&gh).unwrap();
        }
    }
}

impl Parameterized for TwoLayer {
    fn params(&self) -> Vec<&ParamTensor> {
        let mut v = self.hidden.params();
        v.extend(self.out.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut v = self.hidden.params_mut();
        v.extend(self.out.params_mut());
        v
    }
}

fn inputs(in_dim: usize, n: usize, seed: u64) -> Vec<(Vec<f64>, u8)> {
    let mut rng = rng_from_seed(seed ^ 0xA5A5);
    (0..n)
        .map(|i| ((0..in_dim).map(|_| rng.random_range(-2.0..2.0)).collect(), (i % 2) as u8))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn two_layer_gradients_match_central_differences(
        seed in any::<u64>(),
        in_dim in 1usize..8,
        hidden in 1usize..8,
        n in 1usize..6,
    ) {
        let mut net = TwoLayer::random(in_dim, hidden, seed);
        let xs = inputs(in_dim, n, seed);
        net.zero_grad();
        net.backward(&xs);
        let report = grad_check(&mut net, 1e-5, |m| Ok(m.loss(&xs))).unwrap();
        prop_assert!(report.max_relative_error < 1e-4, "{report:?}");
    }
}

fn small_config(variant: Variant, dim: usize) -> ModelConfig {
    ModelConfig {
        variant,
        dim,
        image_feature_width: 12,
        bag_capacity: 4,
        biomarker_width: 6,
        attention_hidden: 5,
        bio_hidden: 7,
        combined_hidden: 4,
        blood_index: 0,
        mayo_index: 5,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn small_model_gradients_match_in_every_situation(
        seed in any::<u64>(),
        m3net2 in any::<bool>(),
        dim in 1usize..6,
        situation in prop::sample::select(Situation::ALL.to_vec()),
        batch in 1usize..5,
    ) {
        let variant = if m3net2 { Variant::M3Net2 } else { Variant::M3Net1 };
        let opts = GradCheckOptions { seed, batch, ..GradCheckOptions::default() };
        let report = check_model_gradients(&small_config(variant, dim), situation, &opts).unwrap();
        prop_assert!(report.max_relative_error < 1e-4, "{report:?}");
    }
}

#[test]
fn full_size_models_pass_on_complete_subjects() {
    for config in [
        ModelConfig::default(),
        ModelConfig { variant: Variant::M3Net2, dim: 5, ..ModelConfig::default() },
    ] {
        let report =
            check_model_gradients(&config, Situation::Complete, &GradCheckOptions::default()).unwrap();
        assert!(report.max_relative_error < 1e-4, "{}: {report:?}", config.label());
    }
}

#[test]
fn corrupted_gradient_is_detected() {
    let opts = GradCheckOptions { perturb_analytic: Some(0.1), ..GradCheckOptions::default() };
    for situation in Situation::ALL {
        let report = check_model_gradients(&small_config(Variant::M3Net1, 5), situation, &opts).unwrap();
        assert!(report.max_relative_error > 1e-2, "{situation:?}: {report:?}");
    }
}

#[test]
fn coarse_step_reports_larger_error() {
    let config = small_config(Variant::M3Net2, 3);
    let fine = check_model_gradients(&config, Situation::Complete, &GradCheckOptions::default()).unwrap();
    let coarse = GradCheckOptions { step: 1e-1, ..GradCheckOptions::default() };
    let coarse = check_model_gradients(&config, Situation::Complete, &coarse).unwrap();
    assert!(coarse.max_relative_error > 10.0 * fine.max_relative_error);
}

#[test]
fn two_steps_equal_one_doubled_step_on_a_linear_loss() {
    // loss = g·p has a constant gradient g
    let g = [0.5, -1.5, 2.0];
    let start = [1.0, 0.25, -3.0];
    let run = |steps: usize, lr: f64| {
        let mut p = ParamTensor::from_values(&[3], start.to_vec()).unwrap();
        let mut sgd = Sgd::new(SgdConfig::default());
        for _ in 0..steps {
            p.grad_mut().copy_from_slice(&g);
            sgd.step(vec![&mut p], lr);
        }
        p.values().to_vec()
    };
    let two = run(2, 0.01);
    let one = run(1, 0.02);
    for (a, b) in two.iter().zip(&one) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn quadratic_bowl_steps_differ_from_doubled_step() {
    // loss = p²/2: the gradient changes after the first step
    let run = |steps: usize, lr: f64| {
        let mut p = ParamTensor::from_values(&[1], vec![1.0]).unwrap();
        let mut sgd = Sgd::new(SgdConfig::default());
        for _ in 0..steps {
            let x = p.values()[0];
            p.grad_mut()[0] = x;
            sgd.step(vec![&mut p], lr);
        }
        p.values()[0]
    };
    assert!((run(2, 0.1) - 0.81).abs() < 1e-15);
    assert!((run(1, 0.2) - 0.8).abs() < 1e-15);
}

#[test]
fn identical_seeds_give_bit_identical_parameters() {
    let train = |seed| {
        let mut net = TwoLayer::random(4, 6, seed);
        let xs = inputs(4, 8, seed);
        let mut sgd = Sgd::new(SgdConfig::default());
        for _ in 0..50 {
            net.zero_grad();
            net.backward(&xs);
            sgd.step(net.params_mut(), 0.05);
        }
        net.params().iter().flat_map(|p| p.values().to_vec()).collect::<Vec<f64>>()
    };
    let (a, b) = (train(9), train(9));
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}
