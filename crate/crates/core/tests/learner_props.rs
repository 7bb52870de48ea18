use proptest::prelude::*;

use decal::dataset::ClassLabel;
use decal::learner::{evaluate, train_round, LearnerConfig, Model, TrainingData};

fn arb_model() -> impl Strategy<Value = Model> {
    (1usize..=5, 2usize..=4, 0usize..=8, any::<u64>(), -0.5f64..0.5).prop_map(|(d, c, h, seed, shift)| {
        let cfg = LearnerConfig { hidden_width: h, ..Default::default() };
        let mut m = Model::init(&cfg, d, c, seed);
        for (i, w) in m.params_mut().iter_mut().enumerate() {
            *w += shift * ((i % 3) as f64 - 1.0);
        }
        m
    })
}

fn arb_model_and_points(n: usize) -> impl Strategy<Value = (Model, Vec<Vec<f64>>, Vec<usize>)> {
    arb_model().prop_flat_map(move |m| {
        let (d, c) = (m.feature_dim(), m.num_classes());
        (
            Just(m),
            prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d), n),
            prop::collection::vec(0..c, n),
        )
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

proptest! {
    #[test]
    fn gradients_match_finite_differences((model, xs, ys) in arb_model_and_points(10)) {
        let h = 1e-5;
        let x: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let y: Vec<ClassLabel> = ys.iter().map(|&c| ClassLabel(c)).collect();
        let (_, grad) = model.loss_and_gradient(&x, &y).unwrap();
        prop_assert_eq!(grad.len(), model.param_count());
        for j in 0..model.param_count() {
            let mut up = model.clone();
            up.params_mut()[j] += h;
            let mut down = model.clone();
            down.params_mut()[j] -= h;
            let fd = (up.loss_and_gradient(&x, &y).unwrap().0 - down.loss_and_gradient(&x, &y).unwrap().0) / (2.0 * h);
            let rel = (grad[j] - fd).abs() / grad[j].abs().max(fd.abs()).max(1e-6);
            prop_assert!(rel <= 1e-4, "param {}: analytic {} numeric {}", j, grad[j], fd);
        }
    }

    #[test]
    fn posteriors_are_distributions(
        model in arb_model(),
        x in prop::collection::vec(prop_oneof![-1e3f64..1e3, -1e300f64..1e300], 5),
    ) {
        let x = &x[..model.feature_dim()];
        let p = model.predict_proba(x).unwrap();
        prop_assert!(p.values().iter().all(|&v| v >= 0.0 && v.is_finite()));
        prop_assert!((p.values().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn embedding_norm_identity((model, xs, _) in arb_model_and_points(1)) {
        let x = &xs[0];
        let p = model.predict_proba(x).unwrap();
        let yhat = p.argmax();
        let resid: Vec<f64> = p.values().iter().enumerate()
            .map(|(c, &v)| v - if c == yhat { 1.0 } else { 0.0 })
            .collect();
        let h = model.penultimate(x).unwrap();
        let g = model.gradient_embedding(x).unwrap();
        prop_assert_eq!(g.0.len(), model.num_classes() * model.penultimate_dim());
        prop_assert!((g.norm() - norm(&resid) * norm(&h)).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn training_honours_its_stopping_rule_and_is_deterministic(
        (model, xs, ys) in arb_model_and_points(12),
        seed in any::<u64>(),
        epochs in 0usize..60,
    ) {
        let cfg = LearnerConfig {
            hidden_width: 4,
            learning_rate: 0.05,
            max_epochs: epochs,
            minibatch_size: 5,
            ..Default::default()
        };
        let mut data = TrainingData::default();
        for (x, &y) in xs.iter().zip(&ys) {
            data.push(x, ClassLabel(y));
        }
        let model = Model::init(&cfg, model.feature_dim(), model.num_classes(), seed ^ 1);
        let mut a = model.clone();
        let ra = train_round(&mut a, &data, &cfg, seed).unwrap();
        let mut b = model.clone();
        let rb = train_round(&mut b, &data, &cfg, seed).unwrap();
        prop_assert_eq!(ra, rb);
        prop_assert_eq!(a.params(), b.params());
        prop_assert!(ra.epochs_used <= epochs);

        let acc = evaluate(&a, data.features.iter().copied().zip(data.labels.iter().copied())).unwrap();
        if ra.reached_target {
            prop_assert!(acc >= cfg.train_accuracy_target);
        } else {
            prop_assert_eq!(ra.epochs_used, epochs);
        }
    }
}
