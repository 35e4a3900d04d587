use proptest::prelude::*;
use rand::Rng;
use rll_core::encoder::{
    batch_loss, finite_difference_check, gradient, group_posterior, unweighted_group_posterior,
    EncoderParams, ObjectiveInputs,
};
use rll_core::grouping::Group;
use rll_core::rng;

struct Instance {
    params: EncoderParams,
    features: Vec<Vec<f64>>,
    conf: Vec<f64>,
    k: usize,
    eta: f64,
}

fn instance(seed: u64) -> Instance {
    let mut rng = rng::seeded(seed);
    let depth = rng.random_range(1..=3);
    let mut sizes = vec![rng.random_range(1..=6)];
    for _ in 0..depth {
        sizes.push(rng.random_range(2..=6));
    }
    let mut params = EncoderParams::zeros(&sizes);
    params.values_mut().for_each(|v| *v = rng.random_range(-1.5..1.5));
    let k = rng.random_range(1..=5);
    let features = (0..k + 2)
        .map(|_| (0..sizes[0]).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let conf = (0..k + 2).map(|_| rng.random_range(0.5..=1.0)).collect();
    let eta = rng.random_range(0.1..30.0);
    Instance { params, features, conf, k, eta }
}

impl Instance {
    fn inputs(&self) -> ObjectiveInputs<'_> {
        ObjectiveInputs::from_parts(self.features.iter().map(|f| &f[..]).collect(), self.conf.clone()).unwrap()
    }

    /// Anchor 0; the candidate set {1, ..., k+1} with `target` first.
    fn group(&self, target: usize) -> Group {
        Group {
            anchor: 0,
            target,
            negatives: (1..self.k + 2).filter(|&c| c != target).collect(),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn posterior_sums_to_one(seed: u64) {
        let inst = instance(seed);
        let inputs = inst.inputs();
        let total: f64 = (1..inst.k + 2)
            .map(|t| group_posterior(&inst.params, &inst.group(t), &inputs, inst.eta).unwrap())
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "sum {total}");
    }

    #[test]
    fn unit_confidences_reduce_to_plain_softmax(seed: u64) {
        let inst = instance(seed);
        let inputs = inst.inputs().unweighted();
        let g = inst.group(1);
        let a = group_posterior(&inst.params, &g, &inputs, inst.eta).unwrap();
        let b = unweighted_group_posterior(&inst.params, &g, &inputs, inst.eta).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn invariant_to_embedding_scale(seed: u64, scale in 0.01f64..100.0) {
        let inst = instance(seed);
        let inputs = inst.inputs();
        let g = inst.group(1);
        let mut scaled = inst.params.clone();
        let last = scaled.layers.last_mut().unwrap();
        last.weights.iter_mut().chain(last.bias.iter_mut()).for_each(|v| *v *= scale);
        let a = group_posterior(&inst.params, &g, &inputs, inst.eta).unwrap();
        let b = group_posterior(&scaled, &g, &inputs, inst.eta).unwrap();
        prop_assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    #[test]
    fn loss_is_non_negative(seed: u64) {
        let inst = instance(seed);
        let groups: Vec<Group> = (1..inst.k + 2).map(|t| inst.group(t)).collect();
        prop_assert!(batch_loss(&inst.params, &groups, &inst.inputs(), inst.eta).unwrap() >= 0.0);
    }

    #[test]
    fn eta_and_confidence_enter_as_a_product(seed: u64) {
        let inst = instance(seed);
        let groups = vec![inst.group(1)];
        let g1 = gradient(&inst.params, &groups, &inst.inputs(), inst.eta).unwrap();
        let halved: Vec<f64> = inst.conf.iter().map(|c| c / 2.0).collect();
        let inputs2 = ObjectiveInputs::from_parts(inst.features.iter().map(|f| &f[..]).collect(), halved).unwrap();
        let g2 = gradient(&inst.params, &groups, &inputs2, 2.0 * inst.eta).unwrap();
        for (a, b) in g1.values().zip(g2.values()) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }
}

#[test]
fn thousand_random_instances() {
    for seed in 0..1000 {
        let inst = instance(seed);
        let inputs = inst.inputs();
        let total: f64 = (1..inst.k + 2)
            .map(|t| group_posterior(&inst.params, &inst.group(t), &inputs, inst.eta).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-9);
        let unit = inputs.unweighted();
        let g = inst.group(1);
        assert_eq!(
            group_posterior(&inst.params, &g, &unit, inst.eta).unwrap().to_bits(),
            unweighted_group_posterior(&inst.params, &g, &unit, inst.eta).unwrap().to_bits()
        );
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = rng::seeded(77);
    for _ in 0..20 {
        let depth = rng.random_range(2..=3);
        let mut sizes = vec![rng.random_range(2..=8)];
        for _ in 0..depth {
            sizes.push(rng.random_range(2..=8));
        }
        let mut params = EncoderParams::zeros(&sizes);
        params.values_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        let k = rng.random_range(1..=4);
        let n = k + 4;
        let features: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let conf: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..=1.0)).collect();
        let inputs = ObjectiveInputs::from_parts(features.iter().map(|f| &f[..]).collect(), conf).unwrap();
        let groups: Vec<Group> = (0..5)
            .map(|_| {
                let anchor = rng.random_range(0..3);
                let target = (anchor + rng.random_range(1..3)) % 3;
                Group { anchor, target, negatives: (3..3 + k).collect() }
            })
            .collect();
        let err = finite_difference_check(&params, &groups, &inputs, 2.0, 1e-5).unwrap();
        assert!(err < 1e-4, "sizes {sizes:?}: relative error {err}");
    }
}
