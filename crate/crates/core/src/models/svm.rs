//! RBF-kernel support vector machine.
//!
//! The dual is solved by sequential minimal optimization with second-order
//! working-set selection; iteration stops once the maximal KKT violation
//! across the selected pair falls below `tol`. Scores come from a Platt
//! sigmoid fitted to the training decision values.

use std::collections::VecDeque;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::{Design, ModelSpec, ParamReader};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    /// `None` selects `1 / (d · var(X))` on the standardized training matrix.
    pub gamma: Option<f64>,
    pub tol: f64,
    /// Cap on SMO iterations; defaults to `max(100_000, 100 n)`.
    pub max_passes: Option<usize>,
}

impl SvmParams {
    pub const NAMES: [&'static str; 4] = ["C", "gamma", "tol", "max_passes"];

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let r = ParamReader::new(spec, &Self::NAMES)?;
        Ok(SvmParams {
            c: r.real("C", 1.0, |v| v > 0.0, "positive")?,
            gamma: r.opt_real("gamma", |v| v > 0.0, "positive")?,
            tol: r.real("tol", 1e-3, |v| v > 0.0, "positive")?,
            max_passes: r.opt_int("max_passes", 1)?.map(|v| v as usize),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub gamma: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// `α_i y_i` per support vector.
    pub dual_coef: Vec<f64>,
    pub rho: f64,
    pub platt_a: f64,
    pub platt_b: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

impl SvmModel {
    /// `Σ α_i y_i K(x_i, z) - ρ`; positive means stress.
    pub fn decision(&self, z: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, c)| c * rbf(self.gamma, sv, z))
            .sum::<f64>()
            - self.rho
    }

    pub fn score(&self, z: &[f64]) -> f64 {
        platt_probability(self.platt_a, self.platt_b, self.decision(z))
    }
}

fn platt_probability(a: f64, b: f64, f: f64) -> f64 {
    let t = a * f + b;
    if t >= 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    }
}

/// Raw dual solution over the training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct KernelRows<'a> {
    x: &'a [Vec<f64>],
    gamma: f64,
    rows: Vec<Option<Rc<Vec<f64>>>>,
    order: VecDeque<usize>,
    budget: usize,
}

impl<'a> KernelRows<'a> {
    fn new(x: &'a [Vec<f64>], gamma: f64) -> Self {
        let n = x.len();
        let budget = (40_000_000 / n.max(1)).clamp(2, n.max(2));
        KernelRows { x, gamma, rows: vec![None; n], order: VecDeque::new(), budget }
    }

    fn row(&mut self, i: usize) -> Rc<Vec<f64>> {
        if let Some(r) = &self.rows[i] {
            return Rc::clone(r);
        }
        let r = Rc::new(self.x.iter().map(|xj| rbf(self.gamma, &self.x[i], xj)).collect::<Vec<_>>());
        if self.order.len() >= self.budget {
            if let Some(old) = self.order.pop_front() {
                self.rows[old] = None;
            }
        }
        self.rows[i] = Some(Rc::clone(&r));
        self.order.push_back(i);
        r
    }
}

const TAU: f64 = 1e-12;

/// Solve `min ½αᵀQα - eᵀα` s.t. `yᵀα = 0`, `0 ≤ α ≤ C`, with `Q_ij = y_i y_j K_ij`.
pub fn solve_smo(x: &[Vec<f64>], y: &[f64], c: f64, gamma: f64, tol: f64, max_iter: usize) -> SmoSolution {
    let n = x.len();
    let mut kernel = KernelRows::new(x, gamma);
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        // i: maximal violator among I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let in_up = if y[t] > 0.0 { !upper(alpha[t]) } else { !lower(alpha[t]) };
            if in_up && v >= gmax {
                gmax = v;
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else {
            converged = true;
            break;
        };
        let ki = kernel.row(i);
        // j: second-order choice among I_low
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best_obj = f64::INFINITY;
        for t in 0..n {
            let in_low = if y[t] > 0.0 { !lower(alpha[t]) } else { !upper(alpha[t]) };
            if !in_low {
                continue;
            }
            let v = y[t] * grad[t];
            if v >= gmax2 {
                gmax2 = v;
            }
            let grad_diff = gmax + v;
            if grad_diff > 0.0 {
                let quad = 2.0 - 2.0 * ki[t];
                let quad = if quad > 0.0 { quad } else { TAU };
                let obj = -(grad_diff * grad_diff) / quad;
                if obj <= best_obj {
                    best_obj = obj;
                    j_sel = Some(t);
                }
            }
        }
        let Some(j) = j_sel.filter(|_| gmax + gmax2 >= tol) else {
            converged = true;
            break;
        };
        iterations += 1;
        let kj = kernel.row(j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        let qij = y[i] * y[j] * ki[j];
        if y[i] != y[j] {
            let quad = 2.0 + 2.0 * qij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = 2.0 - 2.0 * qij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (da, db) = (ai - old_i, aj - old_j);
        for k in 0..n {
            grad[k] += y[k] * (y[i] * ki[k] * da + y[j] * kj[k] * db);
        }
    }

    // bias from free vectors, else the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 { sum_free / free as f64 } else { (ub + lb) / 2.0 };
    SmoSolution { alpha, rho, iterations, converged }
}

/// Fit `P(stress | f) = 1 / (1 + exp(A f + B))` by Newton's method with
/// backtracking, using regularized targets.
pub fn platt_fit(decision: &[f64], labels: &[bool]) -> (f64, f64, bool) {
    let prior1 = labels.iter().filter(|&&l| l).count() as f64;
    let prior0 = labels.len() as f64 - prior1;
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let targets: Vec<f64> = labels.iter().map(|&l| if l { hi } else { lo }).collect();
    let objective = |a: f64, b: f64| -> f64 {
        decision
            .iter()
            .zip(&targets)
            .map(|(&f, &t)| {
                let z = f * a + b;
                if z >= 0.0 {
                    t * z + (-z).exp().ln_1p()
                } else {
                    (t - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };
    let (mut a, mut b) = (0.0, ((prior0 + 1.0) / (prior1 + 1.0)).ln());
    let mut fval = objective(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (1e-12, 1e-12, 0.0, 0.0, 0.0);
        for (&f, &t) in decision.iter().zip(&targets) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = t - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            return (a, b, true);
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < 1e-10 {
            return (a, b, false);
        }
    }
    (a, b, false)
}

pub fn default_gamma(rows: &[Vec<f64>]) -> f64 {
    let d = rows.first().map_or(1, |r| r.len()) as f64;
    let count = rows.len() as f64 * d;
    let mean: f64 = rows.iter().flatten().sum::<f64>() / count;
    let var: f64 = rows.iter().flatten().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
    if var > 0.0 {
        1.0 / (d * var)
    } else {
        1.0 / d
    }
}

pub fn train(data: &Design, params: &SvmParams, warnings: &mut Vec<String>) -> Result<SvmModel> {
    let n = data.len();
    let pos = data.positives();
    if pos == 0 || pos == n {
        return Err(Error::DegenerateFit("svm_rbf needs rows of both labels".into()));
    }
    let gamma = params.gamma.unwrap_or_else(|| default_gamma(&data.rows));
    let y: Vec<f64> = data.labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
    let max_iter = params.max_passes.unwrap_or_else(|| (100 * n).max(100_000));
    let sol = solve_smo(&data.rows, &y, params.c, gamma, params.tol, max_iter);
    if !sol.converged {
        warnings.push(format!(
            "svm_rbf: SMO stopped after {} iterations without meeting tol {}",
            sol.iterations, params.tol
        ));
    }
    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    for (i, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(data.rows[i].clone());
            dual_coef.push(a * y[i]);
        }
    }
    let mut model = SvmModel {
        gamma,
        support_vectors,
        dual_coef,
        rho: sol.rho,
        platt_a: 0.0,
        platt_b: 0.0,
        iterations: sol.iterations,
        converged: sol.converged,
    };
    let decision: Vec<f64> = data.rows.iter().map(|r| model.decision(r)).collect();
    let (a, b, ok) = platt_fit(&decision, &data.labels);
    if !ok {
        warnings.push("svm_rbf: Platt scaling line search stopped early".into());
    }
    model.platt_a = a;
    model.platt_b = b;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{self, Family, ParamValue};

    /// Independent KKT check: recompute every decision value from scratch.
    fn kkt_violation(x: &[Vec<f64>], y: &[f64], sol: &SmoSolution, c: f64, gamma: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..x.len() {
            let f: f64 = (0..x.len()).map(|j| sol.alpha[j] * y[j] * rbf(gamma, &x[j], &x[i])).sum::<f64>() - sol.rho;
            let m = y[i] * f - 1.0;
            let v = if sol.alpha[i] <= 0.0 {
                (-m).max(0.0)
            } else if sol.alpha[i] >= c {
                m.max(0.0)
            } else {
                m.abs()
            };
            worst = worst.max(v);
        }
        let eq: f64 = sol.alpha.iter().zip(y).map(|(a, y)| a * y).sum();
        assert!(eq.abs() < 1e-9, "equality constraint off by {eq}");
        assert!(sol.alpha.iter().all(|&a| (0.0..=c).contains(&a)));
        worst
    }

    #[test]
    fn xor_is_learned() {
        let rows = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let labels = vec![false, false, true, true];
        let d = Design::new(rows, labels);
        let spec = ModelSpec::new(Family::SvmRbf).with("C", ParamValue::Real(10.0));
        let m = models::train(&spec, &d).unwrap();
        assert_eq!(m.accuracy(&d), 1.0);
    }

    #[test]
    fn kkt_conditions_hold_at_termination() {
        let mut state = 12345u64;
        let mut next = || {
            state = crate::rng::splitmix64(state);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for (c, tol) in [(1.0, 1e-3), (5.0, 1e-4), (0.3, 1e-3)] {
            let x: Vec<Vec<f64>> = (0..120).map(|_| vec![next() * 4.0 - 2.0, next() * 4.0 - 2.0]).collect();
            let y: Vec<f64> = x
                .iter()
                .map(|r| if r[0] * r[0] + r[1] * r[1] + 0.6 * (next() - 0.5) < 1.5 { 1.0 } else { -1.0 })
                .collect();
            let gamma = 0.5;
            let sol = solve_smo(&x, &y, c, gamma, tol, 1_000_000);
            assert!(sol.converged);
            let v = kkt_violation(&x, &y, &sol, c, gamma);
            assert!(v <= tol + 1e-9, "C={c}: KKT violation {v} > {tol}");
        }
    }

    #[test]
    fn contradictory_duplicates_hit_the_box() {
        let rows = vec![vec![0.5, 0.5], vec![0.5, 0.5], vec![3.0, 3.0], vec![-3.0, -3.0]];
        let labels = vec![true, false, true, false];
        let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
        let sol = solve_smo(&rows, &y, 1.0, 0.5, 1e-3, 10_000);
        assert_eq!(sol.alpha[0], 1.0);
        assert_eq!(sol.alpha[1], 1.0);
        let m = models::train(&ModelSpec::new(Family::SvmRbf), &Design::new(rows, labels)).unwrap();
        assert!(m.score(&[0.5, 0.5]).is_finite());
    }

    #[test]
    fn iteration_cap_warns() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()]).collect();
        let labels: Vec<bool> = (0..40).map(|i| i % 2 == 0).collect();
        let spec = ModelSpec::new(Family::SvmRbf).with("max_passes", ParamValue::Int(1));
        let m = models::train(&spec, &Design::new(rows, labels)).unwrap();
        assert!(m.warnings.iter().any(|w| w.contains("SMO")));
    }

    #[test]
    fn platt_is_monotone_in_decision() {
        let dec: Vec<f64> = (-10..=10).map(|i| i as f64 / 3.0).collect();
        let labels: Vec<bool> = dec.iter().map(|&f| f > 0.4).collect();
        let (a, b, _) = platt_fit(&dec, &labels);
        assert!(a < 0.0);
        assert!(platt_probability(a, b, 2.0) > platt_probability(a, b, -2.0));
    }
}
