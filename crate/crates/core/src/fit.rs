//! Small nonlinear least-squares toolkit (Levenberg–Marquardt with a
//! central-difference Jacobian) shared by the calibration and tomography
//! fitters.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop when the relative drop in the sum of squares falls below this.
    pub ftol: f64,
    /// Stop when the relative parameter step falls below this.
    pub xtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iter: 500, ftol: 1e-15, xtol: 1e-13 }
    }
}

#[derive(Debug, Clone)]
pub struct LmResult {
    pub params: Vec<f64>,
    /// `s² (JᵀJ)⁻¹` with `s² = RSS/(m−n)`; `None` if singular or `m ≤ n`.
    pub covariance: Option<DMatrix<f64>>,
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl LmResult {
    pub fn stderr(&self, k: usize) -> f64 {
        self.covariance.as_ref().map_or(f64::NAN, |c| c[(k, k)].max(0.0).sqrt())
    }
}

fn jacobian(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], m: usize) -> DMatrix<f64> {
    let n = x.len();
    let mut j = DMatrix::zeros(m, n);
    let mut xp = x.to_vec();
    for k in 0..n {
        let h = 1e-6 * x[k].abs().max(1e-3);
        xp[k] = x[k] + h;
        let fp = f(&xp);
        xp[k] = x[k] - h;
        let fm = f(&xp);
        xp[k] = x[k];
        for i in 0..m {
            j[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    j
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Minimize `Σ rᵢ(x)²` starting from `x0`.
pub fn levenberg_marquardt(f: impl Fn(&[f64]) -> Vec<f64>, x0: &[f64], opts: LmOptions) -> LmResult {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = f(&x);
    let m = r.len();
    let mut cost = sum_sq(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            break;
        }
        let j = jacobian(&f, &x, m);
        let jt = j.transpose();
        let jtj = &jt * &j;
        let g = &jt * DVector::from_column_slice(&r);
        let mut accepted = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let rn = f(&xn);
            let cn = sum_sq(&rn);
            if cn.is_finite() && cn <= cost {
                let rel_drop = (cost - cn) / cost.max(f64::MIN_POSITIVE);
                let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let rel_step = step.norm() / (xnorm + opts.xtol);
                x = xn;
                r = rn;
                cost = cn;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if rel_drop < opts.ftol || rel_step < opts.xtol {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // no downhill step at any damping: at a (local) minimum
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    let covariance = if m > n {
        let j = jacobian(&f, &x, m);
        let s2 = cost / (m - n) as f64;
        (j.transpose() * &j).try_inverse().map(|inv| inv * s2)
    } else {
        None
    };
    LmResult { params: x, covariance, residual_norm: cost.sqrt(), converged, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_line_exactly() {
        let t: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let y: Vec<f64> = t.iter().map(|x| 3.0 * x - 1.5).collect();
        let res = levenberg_marquardt(|p| t.iter().zip(&y).map(|(x, v)| p[0] * x + p[1] - v).collect(), &[0.0, 0.0], LmOptions::default());
        assert!((res.params[0] - 3.0).abs() < 1e-10);
        assert!((res.params[1] + 1.5).abs() < 1e-10);
        assert!(res.converged);
    }

    #[test]
    fn rosenbrock_residuals() {
        let res = levenberg_marquardt(|p| vec![10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0]], &[-1.2, 1.0], LmOptions::default());
        assert!((res.params[0] - 1.0).abs() < 1e-8 && (res.params[1] - 1.0).abs() < 1e-8);
    }
}
