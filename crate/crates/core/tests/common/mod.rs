//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

/// Tanh-sinh (double exponential) quadrature of `f` over `(lo, hi)`.
///
/// Abscissae cluster at the endpoints, so integrable endpoint singularities
/// such as `1/√(A² − δ²)` are handled. The step is halved until two
/// successive estimates agree to `tol`.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> f64 {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let pi_2 = std::f64::consts::FRAC_PI_2;
    let eval = |h: f64| -> f64 {
        let mut sum = 0.0;
        let mut k: i64 = 0;
        loop {
            let t = k as f64 * h;
            let u = pi_2 * t.sinh();
            let x = u.tanh();
            let w = pi_2 * t.cosh() / (u.cosh() * u.cosh());
            if x >= 1.0 || w < 1e-300 {
                break;
            }
            let mut term = 0.0;
            for s in [x, -x] {
                let p = mid + half * s;
                if p > lo && p < hi {
                    let v = f(p);
                    if v.is_finite() {
                        term += v;
                    }
                }
                if k == 0 {
                    break;
                }
            }
            sum += w * term;
            k += 1;
        }
        half * h * sum
    };
    let mut h = 0.5;
    let mut prev = eval(h);
    for _ in 0..12 {
        h *= 0.5;
        let next = eval(h);
        if (next - prev).abs() < tol * 0.01 {
            return next;
        }
        prev = next;
    }
    prev
}

/// Plain moments with divisor n, independent of the crate's estimator.
pub fn mean_and_second_moment(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let m2 = v.iter().map(|x| x * x).sum::<f64>() / n;
    (mean, m2)
}

/// Sample standard deviation about the mean with divisor n.
pub fn std_about_mean(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn normal_draws(rng: &mut ChaCha20Rng, sigma: f64, count: usize) -> Vec<f64> {
    let d = Normal::new(0.0, sigma).unwrap();
    (0..count).map(|_| d.sample(rng)).collect()
}

/// `(1/N)·Σ e eᵀ` about zero, with the standard error of each entry.
pub fn covariance_with_se(samples: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let dim = samples[0].len();
    let n = samples.len() as f64;
    let mut m = vec![vec![0.0; dim]; dim];
    let mut m4 = vec![vec![0.0; dim]; dim];
    for s in samples {
        for i in 0..dim {
            for j in 0..dim {
                let p = s[i] * s[j];
                m[i][j] += p;
                m4[i][j] += p * p;
            }
        }
    }
    let mut se = vec![vec![0.0; dim]; dim];
    for i in 0..dim {
        for j in 0..dim {
            m[i][j] /= n;
            m4[i][j] /= n;
            se[i][j] = ((m4[i][j] - m[i][j] * m[i][j]) / n).sqrt();
        }
    }
    (m, se)
}

/// The steelyard adjusted-value map, written out by hand (tenths).
pub const STEELYARD_MAP_TENTHS: [[f64; 6]; 3] = [
    [4.0, -1.0, -1.0, 3.0, -2.0, 3.0],
    [-1.0, 4.0, -1.0, 3.0, 3.0, -2.0],
    [-1.0, -1.0, 4.0, -2.0, 3.0, 3.0],
];

pub const STEELYARD_ROWS: [[f64; 3]; 6] = [
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [1.0, 1.0, 0.0],
    [0.0, 1.0, 1.0],
    [1.0, 0.0, 1.0],
];
