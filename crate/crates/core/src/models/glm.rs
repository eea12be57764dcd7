//! Logistic regression fitted by iteratively reweighted least squares.
//!
//! Works on standardized features. Each iteration solves
//! `(XᵀWX + λI') β = XᵀWz` with `W = diag(p(1-p))` and working response
//! `z = η + (y - p)/w`; the intercept is not penalized. Converged when the
//! largest coefficient change drops below `tol`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{sigmoid, Design, ModelSpec, ParamReader};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlmParams {
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl GlmParams {
    pub const NAMES: [&'static str; 3] = ["l2", "max_iter", "tol"];

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let r = ParamReader::new(spec, &Self::NAMES)?;
        Ok(GlmParams {
            l2: r.real("l2", 0.0, |v| v >= 0.0, "non-negative")?,
            max_iter: r.int("max_iter", 100, 1)? as usize,
            tol: r.real("tol", 1e-8, |v| v > 0.0, "positive")?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmModel {
    pub intercept: f64,
    /// Coefficients on the standardized scale.
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl GlmModel {
    pub fn linear(&self, z: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(z).map(|(b, v)| b * v).sum::<f64>()
    }

    pub fn score(&self, z: &[f64]) -> f64 {
        sigmoid(self.linear(z))
    }
}

fn log_likelihood(eta: &DVector<f64>, y: &[f64]) -> f64 {
    eta.iter()
        .zip(y)
        .map(|(&e, &t)| {
            // t*e - log(1 + e^e)
            let sp = if e > 0.0 { e + (-e).exp().ln_1p() } else { e.exp().ln_1p() };
            t * e - sp
        })
        .sum()
}

pub fn train(data: &Design, params: &GlmParams, warnings: &mut Vec<String>) -> Result<GlmModel> {
    let n = data.len();
    let d = data.n_features();
    let x = DMatrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { data.rows[i][j - 1] });
    let y: Vec<f64> = data.labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    let mut penalty = DMatrix::<f64>::identity(d + 1, d + 1) * params.l2;
    penalty[(0, 0)] = 0.0;

    let mut beta = DVector::<f64>::zeros(d + 1);
    let objective = |b: &DVector<f64>| log_likelihood(&(&x * b), &y) - 0.5 * params.l2 * b.rows(1, d).norm_squared();
    let mut best = (objective(&beta), beta.clone());
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iter {
        iterations += 1;
        let eta = &x * &beta;
        let mut xtw = x.transpose();
        let mut rhs_w = DVector::<f64>::zeros(n);
        for i in 0..n {
            let p = sigmoid(eta[i]);
            let w = (p * (1.0 - p)).max(1e-12);
            let z = eta[i] + (y[i] - p) / w;
            xtw.column_mut(i).scale_mut(w);
            rhs_w[i] = z;
        }
        let lhs = &xtw * &x + &penalty;
        let rhs = &xtw * rhs_w;
        let next = match lhs.clone().cholesky() {
            Some(c) => c.solve(&rhs),
            None => match lhs.lu().solve(&rhs) {
                Some(s) => s,
                None => {
                    warnings.push(format!("glm: normal equations became singular at iteration {iterations}"));
                    break;
                }
            },
        };
        if next.iter().any(|v| !v.is_finite()) {
            warnings.push(format!("glm: non-finite coefficients at iteration {iterations}"));
            break;
        }
        let delta = (&next - &beta).amax();
        beta = next;
        let obj = objective(&beta);
        if obj >= best.0 {
            best = (obj, beta.clone());
        }
        if delta < params.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        warnings.push(format!(
            "glm: IRLS did not converge within {} iterations (tol {}); returning the best iterate",
            params.max_iter, params.tol
        ));
        beta = best.1;
    }
    Ok(GlmModel {
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        iterations,
        converged,
    })
}
