//! k-nearest neighbours on standardized rows.

use serde::{Deserialize, Serialize};

use super::{Design, ModelSpec, ParamReader};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnParams {
    pub k: usize,
}

impl KnnParams {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let r = ParamReader::new(spec, &["k"])?;
        Ok(KnnParams { k: r.int("k", 5, 1)? as usize })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

impl KnnModel {
    /// Indices of the k nearest rows; equal distances go to the lower index.
    pub fn neighbours(&self, z: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }

    /// Stress fraction among the k nearest neighbours.
    pub fn score(&self, z: &[f64]) -> f64 {
        let nb = self.neighbours(z);
        nb.iter().filter(|&&i| self.labels[i]).count() as f64 / nb.len() as f64
    }
}

pub fn train(data: &Design, params: &KnnParams) -> Result<KnnModel> {
    if params.k > data.len() {
        return Err(Error::Hyperparameter(format!(
            "knn `k` = {} exceeds the {} training rows",
            params.k,
            data.len()
        )));
    }
    Ok(KnnModel { k: params.k, rows: data.rows.clone(), labels: data.labels.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{self, Family, ParamValue};

    fn knn(k: i64) -> ModelSpec {
        ModelSpec::new(Family::Knn).with("k", ParamValue::Int(k))
    }

    #[test]
    fn one_neighbour_recalls_training_label() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let labels: Vec<bool> = (0..10).map(|i| i % 3 == 0).collect();
        let m = models::train(&knn(1), &Design::new(rows.clone(), labels.clone())).unwrap();
        for (r, l) in rows.iter().zip(&labels) {
            assert_eq!(m.score(r), if *l { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn all_neighbours_give_global_fraction() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let labels = vec![true, false, false, true, false, false, false, false];
        let m = models::train(&knn(8), &Design::new(rows, labels)).unwrap();
        for q in [-5.0, 0.0, 3.3, 100.0] {
            assert_eq!(m.score(&[q]), 0.25);
        }
    }

    #[test]
    fn equidistant_tie_breaks_by_index() {
        // query 0.5 is equidistant from rows 1 and 2
        let model = KnnModel { k: 2, rows: vec![vec![-1.0], vec![0.0], vec![1.0]], labels: vec![true, false, true] };
        // distances²: 2.25, 0.25, 0.25 -> rows 1 and 2
        assert_eq!(model.neighbours(&[0.5]), vec![1, 2]);
        let model = KnnModel { k: 1, ..model };
        assert_eq!(model.neighbours(&[0.5]), vec![1]);
        assert_eq!(model.score(&[0.5]), 0.0);
        let k3 = KnnModel { k: 3, ..model };
        assert_eq!(k3.neighbours(&[0.0]), vec![1, 0, 2]);
        assert!((k3.score(&[0.0]) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn k_larger_than_rows_fails() {
        let d = Design::new(vec![vec![1.0], vec![2.0]], vec![true, false]);
        assert!(matches!(models::train(&knn(3), &d), Err(Error::Hyperparameter(_))));
    }
}
