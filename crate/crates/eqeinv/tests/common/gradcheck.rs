//! Central finite-difference gradient oracle, independent of the layers'
//! analytic backward passes: it only ever calls `forward`.

use eqeinv::nn::layers::Mode;
use eqeinv::nn::{LayerOp, Tensor4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;

/// Random tensor with entries kept away from zero so ReLU's kink and pooling
/// ties cannot sit inside the finite-difference stencil.
pub fn random_tensor(n: usize, c: usize, h: usize, w: usize, rng: &mut ChaCha8Rng) -> Tensor4 {
    let data = (0..n * c * h * w)
        .map(|_| loop {
            let v: f64 = rng.random::<f64>() * 2.0 - 1.0;
            if v.abs() > 64.0 * FD_STEP {
                break v;
            }
        })
        .collect();
    Tensor4::from_data(n, c, h, w, data)
}

/// Scalar loss for the oracle: a fixed random linear functional of the
/// layer output.
fn probe_loss(layer: &mut LayerOp, x: &Tensor4, weights: &[f64]) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let y = layer.forward(x, Mode::Train, &mut rng).expect("forward failed");
    y.data.iter().zip(weights).map(|(a, b)| a * b).sum()
}

fn relative_error(a: f64, b: f64) -> f64 {
    let denom = a.abs().max(b.abs());
    if denom < 1e-6 {
        (a - b).abs() * 1e2 // effectively an absolute check near zero
    } else {
        (a - b).abs() / denom
    }
}

/// Check analytic input and parameter gradients of `layer` against central
/// finite differences on input `x`. Returns the worst relative error.
#[allow(clippy::needless_range_loop)] // index juggling around repeated mutable borrows
pub fn check_layer(layer: &mut LayerOp, x: &Tensor4) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let y = layer
        .forward(x, Mode::Train, &mut rng)
        .expect("forward failed");
    let probe: Vec<f64> = {
        let mut r = ChaCha8Rng::seed_from_u64(2);
        (0..y.data.len()).map(|_| r.random::<f64>() * 2.0 - 1.0).collect()
    };
    let dout = Tensor4::from_data(y.n, y.c, y.h, y.w, probe.clone());
    let dx = layer.backward(&dout).expect("backward failed");

    let mut worst: f64 = 0.0;

    // Input gradient.
    let mut x_pert = x.clone();
    for i in 0..x_pert.data.len() {
        let original = x_pert.data[i];
        x_pert.data[i] = original + FD_STEP;
        let plus = probe_loss(layer, &x_pert, &probe);
        x_pert.data[i] = original - FD_STEP;
        let minus = probe_loss(layer, &x_pert, &probe);
        x_pert.data[i] = original;
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        worst = worst.max(relative_error(numeric, dx.data[i]));
    }

    // Parameter gradients, against the analytic values captured above
    // (perturbed forwards never touch the gradient buffers).
    let analytic: Vec<Vec<f64>> = layer
        .learnables()
        .iter()
        .map(|(_, grad, _)| (*grad).clone())
        .collect();
    for p in 0..analytic.len() {
        for i in 0..analytic[p].len() {
            let original = layer.learnables()[p].0[i];
            layer.learnables()[p].0[i] = original + FD_STEP;
            let plus = probe_loss(layer, x, &probe);
            layer.learnables()[p].0[i] = original - FD_STEP;
            let minus = probe_loss(layer, x, &probe);
            layer.learnables()[p].0[i] = original;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(numeric, analytic[p][i]));
        }
    }
    worst
}
