//! Two-class linear discriminant analysis.
//!
//! Pooled within-class covariance plus `shrinkage · I`, weights
//! `w = Σ⁻¹(μ₁ - μ₀)`, offset `-½(μ₁ + μ₀)ᵀw + log(π₁/π₀)`; the posterior
//! of the stress class is `sigmoid(wᵀx + b)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{sigmoid, Design, ModelSpec, ParamReader};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdaParams {
    pub shrinkage: f64,
}

impl LdaParams {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let r = ParamReader::new(spec, &["shrinkage"])?;
        Ok(LdaParams { shrinkage: r.real("shrinkage", 1e-6, |v| v >= 0.0, "non-negative")? })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Ridge actually added to the covariance diagonal.
    pub ridge: f64,
}

impl LdaModel {
    pub fn linear(&self, z: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(z).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn score(&self, z: &[f64]) -> f64 {
        sigmoid(self.linear(z))
    }
}

pub fn train(data: &Design, params: &LdaParams, warnings: &mut Vec<String>) -> Result<LdaModel> {
    let d = data.n_features();
    let n = data.len();
    let n1 = data.positives();
    let n0 = n - n1;
    if n0 == 0 || n1 == 0 {
        return Err(Error::DegenerateFit("lda needs rows of both labels".into()));
    }
    let mut mu = [DVector::<f64>::zeros(d), DVector::<f64>::zeros(d)];
    for (r, &l) in data.rows.iter().zip(&data.labels) {
        mu[l as usize] += DVector::from_column_slice(r);
    }
    mu[0] /= n0 as f64;
    mu[1] /= n1 as f64;
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for (r, &l) in data.rows.iter().zip(&data.labels) {
        let c = DVector::from_column_slice(r) - &mu[l as usize];
        cov.ger(1.0, &c, &c, 1.0);
    }
    cov /= (n.saturating_sub(2)).max(1) as f64;

    let diff = &mu[1] - &mu[0];
    let mut ridge = params.shrinkage;
    let weights = loop {
        let m = &cov + DMatrix::<f64>::identity(d, d) * ridge;
        if let Some(ch) = m.cholesky() {
            // reject numerically singular factors as well as outright failures
            let l = ch.l_dirty().diagonal();
            let (lo, hi) = l.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v * v), b.max(v * v)));
            let w = ch.solve(&diff);
            if lo > 1e-12 * hi && w.iter().all(|v| v.is_finite()) {
                break w;
            }
        }
        let next = if ridge == 0.0 { 1e-8 } else { ridge * 10.0 };
        warnings.push(format!("lda: covariance not positive definite with ridge {ridge}; retrying with {next}"));
        ridge = next;
    };
    let intercept = -0.5 * (&mu[1] + &mu[0]).dot(&weights) + (n1 as f64 / n0 as f64).ln();
    Ok(LdaModel { weights: weights.iter().copied().collect(), intercept, ridge })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{self, Family, ModelState, ParamValue};

    #[test]
    fn boundary_is_perpendicular_bisector() {
        // class clouds ±μ + {±a e_i}: isotropic within-class scatter, equal priors
        let mu = [1.5, -0.5, 0.75];
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (sign, label) in [(1.0, true), (-1.0, false)] {
            for i in 0..3 {
                for a in [0.8, -0.8] {
                    let mut r: Vec<f64> = mu.iter().map(|m| sign * m).collect();
                    r[i] += a;
                    rows.push(r);
                    labels.push(label);
                }
            }
        }
        let spec = ModelSpec::new(Family::Lda).with("shrinkage", ParamValue::Real(0.0));
        let m = models::train(&spec, &Design::new(rows, labels)).unwrap();
        // points p with p·μ = 0 lie on the bisector
        for p in [[0.0, 0.0, 0.0], [0.5, 1.5, 0.0], [1.0, 0.0, -2.0], [-0.5, 0.0, 1.0]] {
            let dot: f64 = p.iter().zip(&mu).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-12);
            assert!((m.score(&p) - 0.5).abs() < 1e-6, "{p:?} -> {}", m.score(&p));
        }
        assert!(m.score(&mu) > 0.5);
    }

    #[test]
    fn duplicate_constant_feature_still_trains() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 * 0.1, 5.0, 5.0, (i % 4) as f64]).collect();
        let labels: Vec<bool> = (0..30).map(|i| i % 3 == 0).collect();
        let d = Design::new(rows.clone(), labels.clone());
        let m = models::train(&ModelSpec::new(Family::Lda), &d).unwrap();
        assert!(m.score_all(&rows).iter().all(|s| s.is_finite()));
        // and with no shrinkage at all the ridge is raised instead of failing
        let collinear: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0], 2.0 * r[0], r[3]]).collect();
        let spec = ModelSpec::new(Family::Lda).with("shrinkage", ParamValue::Real(0.0));
        let m = models::train(&spec, &Design::new(collinear, labels)).unwrap();
        let ModelState::Lda(l) = &m.state else { unreachable!() };
        assert!(l.ridge > 0.0);
        assert!(!m.warnings.is_empty());
    }
}
