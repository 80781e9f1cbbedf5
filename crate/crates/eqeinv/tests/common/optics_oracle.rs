//! Independent optics oracle: integrates the 1-D Helmholtz equation
//! `E'' + k(z)^2 E = 0` through the stack on a fine spatial grid with RK4
//! and obtains per-layer absorptance by integrating the local dissipation
//! density. No Fresnel coefficients, no transfer matrices — a completely
//! different route than the solver under test.

use num_complex::Complex64;
use std::f64::consts::PI;

pub struct OracleResponse {
    pub reflectance: f64,
    pub transmittance: f64,
    pub absorptance: Vec<f64>,
}

/// Solve one wavelength for a stack of `(complex_index, thickness_nm)`
/// layers between lossless media of real indices `n_in` and `n_out`.
pub fn field_propagation(
    layers: &[(Complex64, f64)],
    n_in: f64,
    n_out: f64,
    lambda_nm: f64,
) -> OracleResponse {
    let wavenumber = |n: Complex64| n * (2.0 * PI / lambda_nm);
    let k_in = wavenumber(Complex64::new(n_in, 0.0));
    let k_out = wavenumber(Complex64::new(n_out, 0.0));

    // Start in the exit medium with a unit forward wave at the last
    // interface and march backward to the front of the stack, keeping the
    // field magnitude at every node of every layer.
    let mut e = Complex64::ONE;
    let mut e_prime = Complex64::I * k_out;
    let mut nodes_per_layer: Vec<(Vec<f64>, f64)> = Vec::with_capacity(layers.len()); // (|E|^2 nodes, step)
    for &(index, thickness) in layers.iter().rev() {
        let k = wavenumber(index);
        let mut steps = ((k.norm() * thickness / 0.01).ceil() as usize).max(32);
        if steps % 2 == 1 {
            steps += 1;
        }
        let h = thickness / steps as f64;
        let mut nodes = Vec::with_capacity(steps + 1);
        nodes.push(e.norm_sqr());
        for _ in 0..steps {
            let (ne, nep) = rk4_step(e, e_prime, -h, k * k);
            e = ne;
            e_prime = nep;
            nodes.push(e.norm_sqr());
        }
        nodes_per_layer.push((nodes, h));
    }
    nodes_per_layer.reverse();

    // Decompose the field at the front interface into incident + reflected
    // plane waves of the incident medium, then normalize by the incident
    // amplitude.
    let a = (e + e_prime / (Complex64::I * k_in)) / 2.0;
    let b = (e - e_prime / (Complex64::I * k_in)) / 2.0;
    let incident_power = a.norm_sqr();
    let reflectance = b.norm_sqr() / incident_power;
    let transmittance = (n_out / n_in) / incident_power;

    let absorptance = layers
        .iter()
        .zip(&nodes_per_layer)
        .map(|(&(index, _), (nodes, h))| {
            // Dissipation density 4 pi n k / (lambda n_in) |E|^2, Simpson rule.
            let coeff = 4.0 * PI * index.re * index.im / (lambda_nm * n_in);
            coeff * simpson(nodes, *h) / incident_power
        })
        .collect();

    OracleResponse {
        reflectance,
        transmittance,
        absorptance,
    }
}

fn rk4_step(e: Complex64, e_prime: Complex64, h: f64, k_sq: Complex64) -> (Complex64, Complex64) {
    let f = |y: (Complex64, Complex64)| (y.1, -k_sq * y.0);
    let y = (e, e_prime);
    let k1 = f(y);
    let k2 = f((y.0 + 0.5 * h * k1.0, y.1 + 0.5 * h * k1.1));
    let k3 = f((y.0 + 0.5 * h * k2.0, y.1 + 0.5 * h * k2.1));
    let k4 = f((y.0 + h * k3.0, y.1 + h * k3.1));
    (
        y.0 + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        y.1 + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    )
}

fn simpson(nodes: &[f64], h: f64) -> f64 {
    let n = nodes.len() - 1;
    assert!(n >= 2 && n.is_multiple_of(2), "simpson needs an even interval count");
    let mut sum = nodes[0] + nodes[n];
    for (i, &v) in nodes.iter().enumerate().take(n).skip(1) {
        sum += v * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}
