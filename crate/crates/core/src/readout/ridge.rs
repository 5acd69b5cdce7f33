//! One-vs-all ridge regression on flattened maps.
//!
//! Features and one-hot targets are centred so the intercept is not
//! penalized. The system is solved in whichever of the primal
//! (`features x features`) or dual (`samples x samples`) forms is smaller.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{contract, Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RidgeModel {
    pub n_features: usize,
    pub n_classes: usize,
    /// `[class][feature]`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RidgeSolver {
    /// `(Xc' Xc + λI) W = Xc' Yc`.
    Primal,
    /// `W = Xc' (Xc Xc' + λI)^-1 Yc`.
    Dual,
    /// The smaller of the two systems.
    Auto,
}

/// In-place Cholesky factorization of the SPD matrix `a` (`n x n`, row-major)
/// into its lower factor.
fn cholesky(a: &mut [f64], n: usize) -> Result<()> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) {
            return Err(Error::NumericDomain("ridge system is not positive definite".into()));
        }
        let d = libm::sqrt(d);
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    Ok(())
}

/// Solve `L L' x = b` in place for each of the `m` right-hand columns of `b`
/// (`n x m`, row-major).
fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64], m: usize) {
    for col in 0..m {
        for i in 0..n {
            let mut s = b[i * m + col];
            for k in 0..i {
                s -= l[i * n + k] * b[k * m + col];
            }
            b[i * m + col] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i * m + col];
            for k in i + 1..n {
                s -= l[k * n + i] * b[k * m + col];
            }
            b[i * m + col] = s / l[i * n + i];
        }
    }
}

pub fn ridge_fit(x: &[Vec<f64>], labels: &[usize], n_classes: usize, lambda: f64) -> Result<RidgeModel> {
    ridge_fit_with(x, labels, n_classes, lambda, RidgeSolver::Auto)
}

pub fn ridge_fit_with(
    x: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    lambda: f64,
    solver: RidgeSolver,
) -> Result<RidgeModel> {
    let n = x.len();
    if n == 0 || n != labels.len() {
        return Err(contract!("ridge needs a non-empty set with one label per row"));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(contract!("ridge penalty must be positive and finite, got {lambda}"));
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(contract!("all rows must have the same non-zero length"));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(contract!("label {l} out of range for {n_classes} classes"));
    }
    let c = n_classes;

    let mut x_mean = vec![0.0; d];
    for row in x {
        x_mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
    }
    x_mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut y_mean = vec![0.0; c];
    for &l in labels {
        y_mean[l] += 1.0;
    }
    y_mean.iter_mut().for_each(|m| *m /= n as f64);

    let xc: Vec<Vec<f64>> = x
        .iter()
        .map(|r| r.iter().zip(&x_mean).map(|(v, m)| v - m).collect())
        .collect();
    // Centred one-hot targets, n x c.
    let mut yc = vec![0.0; n * c];
    for (i, &l) in labels.iter().enumerate() {
        for k in 0..c {
            yc[i * c + k] = f64::from(u8::from(k == l)) - y_mean[k];
        }
    }

    let use_dual = match solver {
        RidgeSolver::Primal => false,
        RidgeSolver::Dual => true,
        RidgeSolver::Auto => n <= d,
    };

    // `w` is d x c.
    let w = if use_dual {
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let dot: f64 = xc[i].iter().zip(&xc[j]).map(|(a, b)| a * b).sum();
                k[i * n + j] = dot;
                k[j * n + i] = dot;
            }
            k[i * n + i] += lambda;
        }
        cholesky(&mut k, n)?;
        let mut alpha = yc;
        cholesky_solve(&k, n, &mut alpha, c);
        let mut w = vec![0.0; d * c];
        for (i, row) in xc.iter().enumerate() {
            for (f, v) in row.iter().enumerate() {
                for k in 0..c {
                    w[f * c + k] += v * alpha[i * c + k];
                }
            }
        }
        w
    } else {
        let mut g = vec![0.0; d * d];
        let mut rhs = vec![0.0; d * c];
        for (i, row) in xc.iter().enumerate() {
            for a in 0..d {
                for b in 0..=a {
                    g[a * d + b] += row[a] * row[b];
                }
                for k in 0..c {
                    rhs[a * c + k] += row[a] * yc[i * c + k];
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                g[b * d + a] = g[a * d + b];
            }
            g[a * d + a] += lambda;
        }
        cholesky(&mut g, d)?;
        cholesky_solve(&g, d, &mut rhs, c);
        rhs
    };

    let mut weights = vec![0.0; c * d];
    for f in 0..d {
        for k in 0..c {
            weights[k * d + f] = w[f * c + k];
        }
    }
    let bias = (0..c)
        .map(|k| y_mean[k] - weights[k * d..(k + 1) * d].iter().zip(&x_mean).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    Ok(RidgeModel {
        n_features: d,
        n_classes: c,
        weights,
        bias,
    })
}

impl RidgeModel {
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(contract!("expected {} features, got {}", self.n_features, x.len()));
        }
        Ok(self
            .weights
            .chunks_exact(self.n_features)
            .zip(&self.bias)
            .map(|(w, b)| b + w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
            .collect())
    }
}

pub fn ridge_predict(model: &RidgeModel, x: &[f64]) -> Result<usize> {
    Ok(super::model::argmax(&model.scores(x)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn residual(m: &RidgeModel, x: &[Vec<f64>], labels: &[usize]) -> f64 {
        x.iter()
            .zip(labels)
            .map(|(r, &l)| {
                m.scores(r)
                    .unwrap()
                    .iter()
                    .enumerate()
                    .map(|(k, s)| (s - f64::from(u8::from(k == l))).powi(2))
                    .sum::<f64>()
            })
            .sum()
    }

    #[test]
    fn orthogonal_one_hot_maps_are_recovered() {
        let x = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let m = ridge_fit(&x, &[0, 1], 2, 1e-6).unwrap();
        assert_eq!(ridge_predict(&m, &x[0]).unwrap(), 0);
        assert_eq!(ridge_predict(&m, &x[1]).unwrap(), 1);
        let s = m.scores(&x[0]).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-5 && s[1].abs() < 1e-5);
    }

    #[test]
    fn huge_penalty_falls_back_to_bias_class() {
        let x = vec![vec![1.0, 2.0], vec![3.0, -1.0], vec![0.5, 0.5], vec![2.0, 2.0]];
        let m = ridge_fit(&x, &[1, 1, 1, 0], 2, 1e12).unwrap();
        assert!(m.weights.iter().all(|w| w.abs() < 1e-9));
        assert_eq!(ridge_predict(&m, &[100.0, -50.0]).unwrap(), 1);
    }

    #[test]
    fn primal_and_dual_agree_and_beat_zero_model() {
        let mut rng = crate::rng::seeded(10, 0);
        for (n, d) in [(12, 5), (6, 9)] {
            let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
            let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
            let p = ridge_fit_with(&x, &labels, 3, 0.1, RidgeSolver::Primal).unwrap();
            let q = ridge_fit_with(&x, &labels, 3, 0.1, RidgeSolver::Dual).unwrap();
            for (a, b) in p.weights.iter().zip(&q.weights).chain(p.bias.iter().zip(&q.bias)) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
            let zero = RidgeModel {
                n_features: d,
                n_classes: 3,
                weights: vec![0.0; 3 * d],
                bias: vec![0.0; 3],
            };
            assert!(residual(&p, &x, &labels) <= residual(&zero, &x, &labels));
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ridge_fit(&[], &[], 2, 1.0).is_err());
        assert!(ridge_fit(&[vec![1.0]], &[0], 2, 0.0).is_err());
        assert!(ridge_fit(&[vec![1.0], vec![1.0, 2.0]], &[0, 1], 2, 1.0).is_err());
        assert!(ridge_fit(&[vec![1.0]], &[3], 2, 1.0).is_err());
    }
}
