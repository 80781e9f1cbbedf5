//! Gaussian-process surrogate with a squared-exponential ARD kernel.
//!
//! Inputs live in the warped unit cube, objectives are standardized before
//! fitting. Kernel hyperparameters (signal variance, per-dimension length
//! scales, noise variance) are set by maximizing the log marginal likelihood
//! with a seeded multi-start Nelder-Mead in log-parameter space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::HyperoptError;

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix
/// (row-major `n x n`). Fails if a pivot is not positive.
fn cholesky(matrix: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = matrix[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn solve_lower(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            x[i] -= l[i * n + k] * x[k];
        }
        x[i] /= l[i * n + i];
    }
    x
}

fn solve_upper_from_lower(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    // Solves L^T x = b.
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        for k in i + 1..n {
            x[i] -= l[k * n + i] * x[k];
        }
        x[i] /= l[i * n + i];
    }
    x
}

/// Fitted surrogate, ready for posterior queries.
#[derive(Debug, Clone)]
pub struct GpSurrogate {
    pub signal_variance: f64,
    pub length_scales: Vec<f64>,
    pub noise_variance: f64,
    /// Jitter that had to be added to make the kernel matrix factorizable.
    pub jitter: f64,
    x_train: Vec<Vec<f64>>,
    y_mean: f64,
    y_std: f64,
    chol: Vec<f64>,
    alpha: Vec<f64>,
    log_marginal_likelihood: f64,
}

fn kernel(a: &[f64], b: &[f64], signal: f64, scales: &[f64]) -> f64 {
    let mut sq = 0.0;
    for ((&x, &y), &l) in a.iter().zip(b).zip(scales) {
        let d = (x - y) / l;
        sq += d * d;
    }
    signal * (-0.5 * sq).exp()
}

impl GpSurrogate {
    /// Fit with explicit kernel hyperparameters. Objectives are standardized
    /// internally; a growing jitter is added until the kernel factorizes.
    pub fn with_kernel(
        x_train: Vec<Vec<f64>>,
        y_train: &[f64],
        signal_variance: f64,
        length_scales: Vec<f64>,
        noise_variance: f64,
    ) -> Result<Self, HyperoptError> {
        let n = x_train.len();
        if n == 0 || y_train.len() != n {
            return Err(HyperoptError::Surrogate(format!(
                "need matching nonzero inputs and objectives, got {n} and {}",
                y_train.len()
            )));
        }
        let y_mean = y_train.iter().sum::<f64>() / n as f64;
        let variance = y_train.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_std = if variance.sqrt() > 1e-12 { variance.sqrt() } else { 1.0 };
        let y_std_train: Vec<f64> = y_train.iter().map(|y| (y - y_mean) / y_std).collect();

        let mut base = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                base[i * n + j] = kernel(&x_train[i], &x_train[j], signal_variance, &length_scales);
            }
        }
        let mut jitter = 0.0;
        let mut next_jitter = 1e-10;
        let chol = loop {
            let mut k = base.clone();
            for i in 0..n {
                k[i * n + i] += noise_variance + jitter;
            }
            match cholesky(&k, n) {
                Some(l) => break l,
                None => {
                    jitter = next_jitter;
                    next_jitter *= 10.0;
                    if jitter > 1.0 {
                        return Err(HyperoptError::Surrogate(
                            "kernel matrix is not positive definite even with jitter 1.0 \
                             (degenerate, likely identical inputs)"
                                .into(),
                        ));
                    }
                }
            }
        };
        let alpha = solve_upper_from_lower(&chol, n, &solve_lower(&chol, n, &y_std_train));
        let mut lml = -0.5
            * y_std_train
                .iter()
                .zip(&alpha)
                .map(|(y, a)| y * a)
                .sum::<f64>();
        for i in 0..n {
            lml -= chol[i * n + i].ln();
        }
        lml -= n as f64 / 2.0 * (2.0 * std::f64::consts::PI).ln();
        Ok(Self {
            signal_variance,
            length_scales,
            noise_variance,
            jitter,
            x_train,
            y_mean,
            y_std,
            chol,
            alpha,
            log_marginal_likelihood: lml,
        })
    }

    /// Fit kernel hyperparameters by seeded multi-start Nelder-Mead on the
    /// log marginal likelihood.
    pub fn fit(x_train: Vec<Vec<f64>>, y_train: &[f64], seed: u64) -> Result<Self, HyperoptError> {
        let n = x_train.len();
        if n < 2 {
            return Err(HyperoptError::Surrogate(format!(
                "need at least 2 observations to fit, got {n}"
            )));
        }
        let dim = x_train[0].len();
        // Parameters in log space: [ln signal, ln scale_1.., ln noise].
        let objective = |log_params: &[f64]| -> f64 {
            let signal = log_params[0].exp();
            let scales: Vec<f64> = log_params[1..=dim].iter().map(|v| v.exp()).collect();
            let noise = log_params[dim + 1].exp();
            if !(1e-4..=1e3).contains(&signal)
                || scales.iter().any(|s| !(5e-3..=30.0).contains(s))
                || !(1e-9..=1.0).contains(&noise)
            {
                return f64::INFINITY;
            }
            match GpSurrogate::with_kernel(x_train.clone(), y_train, signal, scales, noise) {
                Ok(gp) => -gp.log_marginal_likelihood,
                Err(_) => f64::INFINITY,
            }
        };

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best: Option<(f64, Vec<f64>)> = None;
        for start in 0..5 {
            let init: Vec<f64> = if start == 0 {
                let mut v = vec![0.0; dim + 2];
                v[dim + 1] = (1e-4f64).ln();
                for slot in v.iter_mut().take(dim + 1).skip(1) {
                    *slot = 0.5f64.ln();
                }
                v
            } else {
                let mut v = vec![rng.random_range(-1.0..1.0)];
                for _ in 0..dim {
                    v.push(rng.random_range(-2.3..1.0)); // scales ~ 0.1..e
                }
                v.push(rng.random_range(-14.0..-2.0)); // noise ~ 1e-6..0.1
                v
            };
            let (value, point) = nelder_mead(&objective, &init, 0.4, 200);
            if best.as_ref().is_none_or(|(b, _)| value < *b) {
                best = Some((value, point));
            }
        }
        let (_, p) = best.expect("at least one start ran");
        let signal = p[0].exp();
        let scales: Vec<f64> = p[1..=dim].iter().map(|v| v.exp()).collect();
        let noise = p[dim + 1].exp();
        GpSurrogate::with_kernel(x_train, y_train, signal, scales, noise)
    }

    /// Posterior mean and variance at a warped point, in objective units.
    pub fn posterior(&self, x: &[f64]) -> (f64, f64) {
        let n = self.x_train.len();
        let k_star: Vec<f64> = self
            .x_train
            .iter()
            .map(|xi| kernel(xi, x, self.signal_variance, &self.length_scales))
            .collect();
        let mean_std: f64 = k_star.iter().zip(&self.alpha).map(|(k, a)| k * a).sum();
        let v = solve_lower(&self.chol, n, &k_star);
        let var_std = (self.signal_variance - v.iter().map(|x| x * x).sum::<f64>()).max(0.0);
        (
            self.y_mean + self.y_std * mean_std,
            self.y_std * self.y_std * var_std,
        )
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_marginal_likelihood
    }

    pub fn train_len(&self) -> usize {
        self.x_train.len()
    }

    pub fn train_inputs(&self) -> &[Vec<f64>] {
        &self.x_train
    }
}

/// Plain Nelder-Mead on an objective that may return infinity outside its
/// feasible region. Returns the best value and point found.
pub fn nelder_mead(
    objective: &dyn Fn(&[f64]) -> f64,
    start: &[f64],
    step: f64,
    max_iters: usize,
) -> (f64, Vec<f64>) {
    let dim = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for d in 0..dim {
        let mut p = start.to_vec();
        p[d] += step;
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| objective(p)).collect();

    for _ in 0..max_iters {
        let mut order: Vec<usize> = (0..simplex.len()).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        let worst = simplex.len() - 1;
        if values[worst].is_finite()
            && values[worst] - values[0] < 1e-10 * (1.0 + values[0].abs())
        {
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|d| simplex[..worst].iter().map(|p| p[d]).sum::<f64>() / worst as f64)
            .collect();
        let mix = |a: f64| -> Vec<f64> {
            (0..dim)
                .map(|d| centroid[d] + a * (simplex[worst][d] - centroid[d]))
                .collect()
        };
        let reflected = mix(-1.0);
        let fr = objective(&reflected);
        if fr < values[0] {
            let expanded = mix(-2.0);
            let fe = objective(&expanded);
            if fe < fr {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
        } else if fr < values[worst - 1] {
            simplex[worst] = reflected;
            values[worst] = fr;
        } else {
            let contracted = mix(0.5);
            let fc = objective(&contracted);
            if fc < values[worst] {
                simplex[worst] = contracted;
                values[worst] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..simplex.len() {
                    for d in 0..dim {
                        simplex[i][d] = best[d] + 0.5 * (simplex[i][d] - best[d]);
                    }
                    values[i] = objective(&simplex[i]);
                }
            }
        }
    }
    let mut best_idx = 0;
    for i in 1..values.len() {
        if values[i] < values[best_idx] {
            best_idx = i;
        }
    }
    (values[best_idx], simplex[best_idx].clone())
}
