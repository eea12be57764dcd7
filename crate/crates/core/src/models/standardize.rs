use serde::{Deserialize, Serialize};

/// Per-feature centring and scaling fitted on training rows.
///
/// An empty standardizer is the identity (used by the tree families).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity() -> Self {
        Standardizer::default()
    }

    pub fn is_identity(&self) -> bool {
        self.mean.is_empty()
    }

    /// Population mean and standard deviation; constant columns get scale 1.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, |r| r.len());
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 * m.abs().max(1.0) {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, std }
    }

    /// Standardized values, snapped to a grid of `2^-24` standard units.
    ///
    /// Rescaling a raw column by `a > 0` and shifting it changes the fitted
    /// mean and scale only by rounding error; snapping makes the transformed
    /// rows bit-identical again, so iterative solvers (SMO in particular)
    /// follow the same path instead of diverging on near-ties.
    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        if self.is_identity() {
            return x.to_vec();
        }
        x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| snap((v - m) / s)).collect()
    }

    pub fn transform_all(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }
}

const GRID: f64 = (1u64 << 24) as f64;

fn snap(z: f64) -> f64 {
    (z * GRID).round() / GRID
}
