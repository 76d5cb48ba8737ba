use dsfl_core::rng;
use dsfl_learn::nn::Gradient;
use dsfl_learn::{split_training_step, Network, SplitModel};
use ndarray::Array2;
use rand::Rng;

fn random_batch(rng: &mut impl Rng, n: usize, width: usize, classes: usize) -> (Array2<f64>, Vec<u8>) {
    let x = Array2::from_shape_fn((n, width), |_| rng.gen_range(0.0..1.0));
    let y = (0..n).map(|_| rng.gen_range(0..classes) as u8).collect();
    (x, y)
}

fn max_rel_diff(a: &Network, b: &Network) -> f64 {
    let scale = a
        .layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(l.biases.iter()))
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a
        .layers
        .iter()
        .zip(&b.layers)
        .flat_map(|(x, y)| {
            x.weights
                .iter()
                .zip(y.weights.iter())
                .chain(x.biases.iter().zip(y.biases.iter()))
                .map(|(p, q)| (p - q).abs())
        })
        .fold(0.0f64, f64::max);
    diff / scale
}

#[test]
fn split_step_equals_monolithic_step() {
    for trial in 0..50u64 {
        let mut rng = rng::stream(trial, &[0x5117]);
        let depth = rng.gen_range(2..=4);
        let mut sizes: Vec<usize> = (0..depth).map(|_| rng.gen_range(3..40)).collect();
        sizes.push(rng.gen_range(2..11));
        let cut = rng.gen_range(1..depth);
        let model = SplitModel::mlp(&sizes, cut, &mut rng).unwrap();
        let n = rng.gen_range(1..33);
        let (x, y) = random_batch(&mut rng, n, sizes[0], *sizes.last().unwrap());
        let lr = rng.gen_range(0.001..0.5);

        let mut mono = model.monolithic();
        let mono_loss = mono.sgd_step(x.view(), &y, lr).unwrap();
        let (mut device, mut server) = model.into_parts();
        let split_loss = split_training_step(&mut device, &mut server, x.view(), &y, lr).unwrap();
        let joined = SplitModel::from_parts(device, server).unwrap().monolithic();

        let rel = max_rel_diff(&mono, &joined);
        assert!(rel <= 1e-6, "trial {trial}: relative difference {rel}");
        assert!((mono_loss - split_loss).abs() <= 1e-6 * mono_loss, "trial {trial}");
    }
}

#[test]
fn zero_rate_split_step_changes_nothing() {
    let mut rng = rng::stream(3, &[]);
    let (mut d, mut s) = SplitModel::mlp(&[12, 8, 5], 1, &mut rng).unwrap().into_parts();
    let (d0, s0) = (d.clone(), s.clone());
    let (x, y) = random_batch(&mut rng, 6, 12, 5);
    let loss = split_training_step(&mut d, &mut s, x.view(), &y, 0.0).unwrap();
    assert!(loss.is_finite() && loss > 0.0);
    assert_eq!((d, s), (d0, s0));
}

const FD_EPS: f64 = 1e-4;
const FD_REL_TOL: f64 = 1e-4;
/// Below this magnitude both gradients are treated as zero.
const FD_ABS_FLOOR: f64 = 1e-8;

/// Whether the relu pattern of any hidden unit flips between the two
/// perturbed networks; central differences are meaningless across a kink.
fn crosses_kink(a: &Network, b: &Network, x: &Array2<f64>) -> bool {
    let (oa, ob) = (a.forward(x.view()), b.forward(x.view()));
    oa.iter()
        .zip(&ob)
        .take(a.layers.len() - 1)
        .any(|(p, q)| p.iter().zip(q.iter()).any(|(u, v)| (*u > 0.0) != (*v > 0.0)))
}

fn check_param(net: &Network, grads: &[Gradient], x: &Array2<f64>, y: &[u8], l: usize, idx: Option<(usize, usize)>, b: usize) -> bool {
    let (mut plus, mut minus) = (net.clone(), net.clone());
    let analytic = match idx {
        Some(ij) => {
            plus.layers[l].weights[ij] += FD_EPS;
            minus.layers[l].weights[ij] -= FD_EPS;
            grads[l].weights[ij]
        }
        None => {
            plus.layers[l].biases[b] += FD_EPS;
            minus.layers[l].biases[b] -= FD_EPS;
            grads[l].biases[b]
        }
    };
    if crosses_kink(&plus, &minus, x) {
        return false;
    }
    let numeric = (plus.loss(x.view(), y).unwrap() - minus.loss(x.view(), y).unwrap()) / (2.0 * FD_EPS);
    let scale = analytic.abs().max(numeric.abs());
    assert!(
        scale < FD_ABS_FLOOR || (analytic - numeric).abs() <= FD_REL_TOL * scale,
        "layer {l} {idx:?}/{b}: analytic {analytic} vs numeric {numeric}"
    );
    true
}

#[test]
fn every_gradient_matches_central_differences() {
    let mut checked = 0;
    let mut skipped = 0;
    for seed in 0..4u64 {
        let mut rng = rng::stream(seed, &[0xFD]);
        let net = Network::mlp(&[9, 7, 6, 4], &mut rng).unwrap();
        let (x, y) = random_batch(&mut rng, 10, 9, 4);
        let (_, grads) = net.loss_and_gradients(x.view(), &y).unwrap();
        for (l, layer) in net.layers.iter().enumerate() {
            for ij in layer.weights.indexed_iter().map(|(ij, _)| ij) {
                if check_param(&net, &grads, &x, &y, l, Some(ij), 0) { checked += 1 } else { skipped += 1 }
            }
            for b in 0..layer.biases.len() {
                if check_param(&net, &grads, &x, &y, l, None, b) { checked += 1 } else { skipped += 1 }
            }
        }
    }
    assert!(skipped * 100 <= checked, "{skipped} kink skips vs {checked} checks");
}

#[test]
fn full_size_gradients_match_on_sampled_parameters() {
    let mut rng = rng::stream(11, &[0xFD]);
    let net = Network::mlp(&[784, 128, 10], &mut rng).unwrap();
    let (x, y) = random_batch(&mut rng, 10, 784, 10);
    let (_, grads) = net.loss_and_gradients(x.view(), &y).unwrap();
    let mut checked = 0;
    for _ in 0..300 {
        let l = rng.gen_range(0..2);
        let (r, c) = net.layers[l].weights.dim();
        if rng.gen_bool(0.8) {
            checked += check_param(&net, &grads, &x, &y, l, Some((rng.gen_range(0..r), rng.gen_range(0..c))), 0) as usize;
        } else {
            checked += check_param(&net, &grads, &x, &y, l, None, rng.gen_range(0..c)) as usize;
        }
    }
    assert!(checked >= 290);
}
