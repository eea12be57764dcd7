//! Participant-level train/test partitioning and training-set upsampling.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::features::FeatureVector;
use crate::rng::seeded;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub train: Vec<FeatureVector>,
    pub test: Vec<FeatureVector>,
    pub train_participants: BTreeSet<String>,
    pub test_participants: BTreeSet<String>,
    pub seed: u64,
    pub target_train_fraction: f64,
    /// Train share of rows reached by the greedy pass alone.
    pub greedy_train_fraction: f64,
    /// Train share of rows in the final partition.
    pub achieved_train_fraction: f64,
}

/// Row count per participant, in first-seen order.
pub fn participant_counts(rows: &[FeatureVector]) -> Vec<(String, usize)> {
    let mut order: Vec<String> = Vec::new();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in rows {
        let c = counts.entry(r.participant_id.as_str()).or_insert(0);
        if *c == 0 {
            order.push(r.participant_id.clone());
        }
        *c += 1;
    }
    order.into_iter().map(|id| {
        let n = counts[id.as_str()];
        (id, n)
    }).collect()
}

/// Participants sorted by descending row count; equal counts are ordered by a
/// seeded shuffle of their ids.
fn seeded_order(counts: &[(String, usize)], seed: u64) -> Vec<(String, usize)> {
    let mut order: Vec<(String, usize)> = counts.to_vec();
    order.sort_by(|a, b| a.0.cmp(&b.0));
    order.shuffle(&mut seeded(seed));
    order.sort_by_key(|p| std::cmp::Reverse(p.1));
    order
}

/// Greedy pass: each participant, largest first, goes to the side that keeps
/// the running train fraction closest to `target`. Returns train membership.
pub fn greedy_assignment(sizes: &[usize], target: f64) -> Vec<bool> {
    let (mut train, mut test) = (0usize, 0usize);
    sizes
        .iter()
        .map(|&n| {
            let if_train = (train + n) as f64 / (train + test + n) as f64;
            let if_test = train as f64 / (train + test + n) as f64;
            let to_train = (if_train - target).abs() <= (if_test - target).abs();
            if to_train {
                train += n;
            } else {
                test += n;
            }
            to_train
        })
        .collect()
}

/// Exact closest-fraction partition by subset-sum over row counts.
///
/// Both sides must be non-empty. Among equally close train totals the one
/// reached by `prefer` wins, then the larger total.
fn exact_assignment(sizes: &[usize], target: f64, prefer: usize) -> Vec<bool> {
    let total: usize = sizes.iter().sum();
    // first participant index that made each sum reachable
    let mut via: Vec<Option<usize>> = vec![None; total + 1];
    let mut reachable = vec![false; total + 1];
    reachable[0] = true;
    for (i, &n) in sizes.iter().enumerate() {
        for s in (n..=total).rev() {
            if !reachable[s] && reachable[s - n] {
                reachable[s] = true;
                via[s] = Some(i);
            }
        }
    }
    let dist = |s: usize| (s as f64 / total as f64 - target).abs();
    let mut best = prefer;
    for (s, _) in reachable.iter().enumerate().take(total).skip(1).filter(|r| *r.1) {
        let (d, db) = (dist(s), dist(best));
        if d < db - 1e-15 || ((d - db).abs() <= 1e-15 && best != prefer && s > best) {
            best = s;
        }
    }
    let mut assign = vec![false; sizes.len()];
    let mut s = best;
    while s > 0 {
        let i = via[s].expect("reachable sum has a predecessor");
        assign[i] = true;
        s -= sizes[i];
    }
    assign
}

/// Split participants so the train share of rows is as close as possible to
/// `target_train_fraction`.
///
/// A greedy largest-first pass runs first; its result is kept when it is
/// already optimal and otherwise replaced by the exact subset-sum optimum.
pub fn participant_split(
    rows: &[FeatureVector],
    target_train_fraction: f64,
    seed: u64,
) -> Result<SplitDataset> {
    if !(target_train_fraction > 0.0 && target_train_fraction < 1.0) {
        return Err(Error::Split(format!(
            "train fraction must lie in (0, 1), got {target_train_fraction}"
        )));
    }
    let counts = participant_counts(rows);
    if counts.len() < 2 {
        return Err(Error::Split(format!(
            "need at least 2 participants, found {}",
            counts.len()
        )));
    }
    let order = seeded_order(&counts, seed);
    let sizes: Vec<usize> = order.iter().map(|p| p.1).collect();
    let total: usize = sizes.iter().sum();

    let mut greedy = greedy_assignment(&sizes, target_train_fraction);
    if greedy.iter().all(|&t| t) {
        // keep the smallest participant out of train so both sides exist
        *greedy.last_mut().unwrap() = false;
    } else if greedy.iter().all(|&t| !t) {
        greedy[0] = true;
    }
    let greedy_rows: usize = sizes.iter().zip(&greedy).filter(|p| *p.1).map(|p| p.0).sum();
    let exact = exact_assignment(&sizes, target_train_fraction, greedy_rows);
    let exact_rows: usize = sizes.iter().zip(&exact).filter(|p| *p.1).map(|p| p.0).sum();
    let assign = if exact_rows == greedy_rows { greedy } else { exact };

    let train_participants: BTreeSet<String> =
        order.iter().zip(&assign).filter(|p| *p.1).map(|p| p.0 .0.clone()).collect();
    let test_participants: BTreeSet<String> =
        order.iter().zip(&assign).filter(|p| !*p.1).map(|p| p.0 .0.clone()).collect();
    let (train, test): (Vec<_>, Vec<_>) = rows
        .iter()
        .cloned()
        .partition(|r| train_participants.contains(&r.participant_id));
    Ok(SplitDataset {
        achieved_train_fraction: train.len() as f64 / total as f64,
        greedy_train_fraction: greedy_rows as f64 / total as f64,
        train,
        test,
        train_participants,
        test_participants,
        seed,
        target_train_fraction,
    })
}

/// Desired non-stress : stress proportion after upsampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassRatio {
    pub nonstress: u64,
    pub stress: u64,
}

impl Default for ClassRatio {
    fn default() -> Self {
        ClassRatio { nonstress: 10, stress: 7 }
    }
}

impl ClassRatio {
    /// `floor(n_nonstress * stress / nonstress)`.
    pub fn target_stress(&self, n_nonstress: usize) -> usize {
        (n_nonstress as u128 * self.stress as u128 / self.nonstress as u128) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpsampleReport {
    pub nonstress: usize,
    pub stress_before: usize,
    pub stress_after: usize,
    pub target: usize,
    pub warning: Option<String>,
}

/// Append stress rows, drawn uniformly with replacement from the existing
/// ones, until the stress count reaches the target ratio. Original rows come
/// first and are never modified.
pub fn upsample_stress(
    train: &[FeatureVector],
    ratio: ClassRatio,
    seed: u64,
) -> Result<(Vec<FeatureVector>, UpsampleReport)> {
    if ratio.nonstress == 0 || ratio.stress == 0 {
        return Err(Error::Resample("ratio terms must be positive".into()));
    }
    let stress_idx: Vec<usize> =
        train.iter().enumerate().filter(|(_, r)| r.is_stress()).map(|(i, _)| i).collect();
    let nonstress = train.len() - stress_idx.len();
    if stress_idx.is_empty() {
        return Err(Error::Resample("training data has no stress rows".into()));
    }
    if nonstress == 0 {
        return Err(Error::Resample("training data has no non-stress rows".into()));
    }
    let target = ratio.target_stress(nonstress);
    let mut out = train.to_vec();
    let mut warning = None;
    if target < stress_idx.len() {
        let msg = format!(
            "stress rows ({}) already exceed the target ({target}); upsampling skipped",
            stress_idx.len()
        );
        log::warn!("{msg}");
        warning = Some(msg);
    } else {
        let mut rng = seeded(seed);
        out.reserve(target - stress_idx.len());
        for _ in stress_idx.len()..target {
            let pick = stress_idx[rng.random_range(0..stress_idx.len())];
            out.push(train[pick].clone());
        }
    }
    let report = UpsampleReport {
        nonstress,
        stress_before: stress_idx.len(),
        stress_after: out.len() - nonstress,
        target,
        warning,
    };
    Ok((out, report))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub stress: usize,
    pub nonstress: usize,
}

pub fn label_counts(rows: &[FeatureVector]) -> LabelCounts {
    let stress = rows.iter().filter(|r| r.is_stress()).count();
    LabelCounts { stress, nonstress: rows.len() - stress }
}

/// Contents of `split.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub target_train_fraction: f64,
    pub achieved_train_fraction: f64,
    pub greedy_train_fraction: f64,
    pub train_participants: Vec<String>,
    pub test_participants: Vec<String>,
    pub train_counts: LabelCounts,
    pub test_counts: LabelCounts,
    pub upsampled_train_counts: Option<LabelCounts>,
    pub upsample: Option<UpsampleReport>,
}

impl SplitManifest {
    pub fn new(split: &SplitDataset, upsample: Option<&UpsampleReport>) -> Self {
        SplitManifest {
            seed: split.seed,
            target_train_fraction: split.target_train_fraction,
            achieved_train_fraction: split.achieved_train_fraction,
            greedy_train_fraction: split.greedy_train_fraction,
            train_participants: split.train_participants.iter().cloned().collect(),
            test_participants: split.test_participants.iter().cloned().collect(),
            train_counts: label_counts(&split.train),
            test_counts: label_counts(&split.test),
            upsampled_train_counts: upsample
                .map(|u| LabelCounts { stress: u.stress_after, nonstress: u.nonstress }),
            upsample: upsample.cloned(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::N_FEATURES;
    use crate::windowing::Label;
    use proptest::prelude::*;

    fn rows(spec: &[(&str, usize, usize)]) -> Vec<FeatureVector> {
        let mut out = Vec::new();
        for &(id, stress, nonstress) in spec {
            for i in 0..stress + nonstress {
                let label = Label::from_stress(i < stress);
                out.push(FeatureVector::from_values(id, label, [i as f64; N_FEATURES]));
            }
        }
        out
    }

    #[test]
    fn exact_eighty_twenty() {
        let s = participant_split(&rows(&[("A", 0, 80), ("B", 0, 20)]), 0.8, 1).unwrap();
        assert_eq!(s.train_participants, BTreeSet::from(["A".to_string()]));
        assert_eq!(s.test_participants, BTreeSet::from(["B".to_string()]));
        assert_eq!(s.achieved_train_fraction, 0.8);
    }

    fn brute_force_best(sizes: &[usize], target: f64) -> f64 {
        let total: usize = sizes.iter().sum();
        let mut best = f64::INFINITY;
        for mask in 1..(1u32 << sizes.len()) - 1 {
            let s: usize = (0..sizes.len()).filter(|i| mask >> i & 1 == 1).map(|i| sizes[i]).sum();
            best = best.min((s as f64 / total as f64 - target).abs());
        }
        best
    }

    #[test]
    fn four_equal_participants() {
        let data = rows(&[("A", 0, 25), ("B", 0, 25), ("C", 0, 25), ("D", 0, 25)]);
        let s = participant_split(&data, 0.8, 9).unwrap();
        assert_eq!(s.train_participants.len(), 3);
        assert_eq!(s.achieved_train_fraction, 0.75);
        // greedy alone already reaches the optimum here
        assert_eq!(s.greedy_train_fraction, 0.75);
        assert!(((0.75f64 - 0.8).abs() - brute_force_best(&[25; 4], 0.8)).abs() < 1e-15);
    }

    #[test]
    fn exact_pass_fixes_greedy_miss() {
        // greedy: 50 -> train, 30 -> test, 20 -> train = 0.7; optimum {50, 30} = 0.8
        let data = rows(&[("A", 0, 50), ("B", 0, 30), ("C", 0, 20)]);
        let s = participant_split(&data, 0.8, 3).unwrap();
        assert!((s.greedy_train_fraction - 0.7).abs() < 1e-12);
        assert_eq!(s.achieved_train_fraction, 0.8);
    }

    #[test]
    fn large_cohort_fraction_identity() {
        let f = 25_608.0 / 31_103.0;
        assert!((f * 100.0f64 - 82.3).abs() < 0.05);
    }

    #[test]
    fn split_errors() {
        assert!(matches!(participant_split(&rows(&[("A", 1, 5)]), 0.8, 0), Err(Error::Split(_))));
        assert!(participant_split(&rows(&[("A", 1, 5), ("B", 1, 1)]), 1.0, 0).is_err());
    }

    #[test]
    fn upsample_reaches_ten_to_seven() {
        assert_eq!(ClassRatio::default().target_stress(23_668), 16_567);
    }

    #[test]
    fn upsample_already_at_ratio() {
        let data = rows(&[("A", 7, 10)]);
        let (out, rep) = upsample_stress(&data, ClassRatio::default(), 0).unwrap();
        assert_eq!(out, data);
        assert_eq!(rep.stress_after, 7);
        assert!(rep.warning.is_none());
    }

    #[test]
    fn upsample_single_stress_row() {
        let data = rows(&[("A", 1, 100)]);
        let (out, rep) = upsample_stress(&data, ClassRatio::default(), 5).unwrap();
        assert_eq!(rep.stress_after, 70);
        let original = &data[0];
        let dupes = out.iter().filter(|r| r.is_stress()).filter(|r| *r == original).count();
        assert_eq!(dupes, 70);
        assert_eq!(&out[..data.len()], &data[..]);
    }

    #[test]
    fn upsample_errors_and_noop() {
        assert!(matches!(
            upsample_stress(&rows(&[("A", 0, 10)]), ClassRatio::default(), 0),
            Err(Error::Resample(_))
        ));
        let (out, rep) = upsample_stress(&rows(&[("A", 9, 10)]), ClassRatio::default(), 0).unwrap();
        assert_eq!(out.len(), 19);
        assert!(rep.warning.is_some());
    }

    proptest! {
        #[test]
        fn split_is_disjoint_and_optimal(sizes in proptest::collection::vec(1usize..60, 2..9),
                                         seed in any::<u64>()) {
            let spec: Vec<(String, usize)> =
                sizes.iter().enumerate().map(|(i, &n)| (format!("p{i}"), n)).collect();
            let data: Vec<FeatureVector> = spec.iter().flat_map(|(id, n)| {
                (0..*n).map(move |i| FeatureVector::from_values(id.clone(), Label::NonStress, [i as f64; N_FEATURES]))
            }).collect();
            let s = participant_split(&data, 0.8, seed).unwrap();
            prop_assert!(s.train_participants.is_disjoint(&s.test_participants));
            prop_assert!(!s.train_participants.is_empty() && !s.test_participants.is_empty());
            for r in &s.train { prop_assert!(s.train_participants.contains(&r.participant_id)); }
            for r in &s.test { prop_assert!(s.test_participants.contains(&r.participant_id)); }
            let d = (s.achieved_train_fraction - 0.8).abs();
            prop_assert!(d <= brute_force_best(&sizes, 0.8) + 1e-12);
            let again = participant_split(&data, 0.8, seed).unwrap();
            prop_assert_eq!(again, s);
        }

        #[test]
        fn upsampled_rows_are_copies(stress in 1usize..20, nonstress in 1usize..200, seed in any::<u64>()) {
            let mut data = rows(&[("A", stress, nonstress)]);
            for (i, r) in data.iter_mut().enumerate() { r.mean_hr = i as f64; }
            let (out, rep) = upsample_stress(&data, ClassRatio::default(), seed).unwrap();
            prop_assert_eq!(rep.nonstress, nonstress);
            let ns_before: Vec<_> = data.iter().filter(|r| !r.is_stress()).collect();
            let ns_after: Vec<_> = out.iter().filter(|r| !r.is_stress()).collect();
            prop_assert_eq!(ns_before, ns_after);
            for r in out.iter().filter(|r| r.is_stress()) {
                prop_assert!(data.iter().any(|o| o == r));
            }
            let again = upsample_stress(&data, ClassRatio::default(), seed).unwrap().0;
            prop_assert_eq!(again, out);
        }
    }
}
