//! Acceptance criteria, one `PASS`/`FAIL` line each. Runs as a plain binary
//! so the report is printed even when everything passes.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stress_core::dataset::{participant_split, upsample_stress, ClassRatio};
use stress_core::evaluation::{auc, five_by_two_statistic, roc_curve, Scenario};
use stress_core::explain::{brute_force_shapley, shap_matrix, tree_shap_single};
use stress_core::features::{acc_magnitude, FeatureVector, N_FEATURES};
use stress_core::models::grid::{cmp_hyperparameters, grid_search, study_gbt_grid, Objective};
use stress_core::models::tree::{Split, Tree, TreeNode};
use stress_core::models::{default_spec, train, Design, Family, ParamValue};
use stress_core::synth::CohortConfig;
use stress_core::windowing::Label;
use stressdetect::config::{ExplainConfig, Input, RunConfig};
use stressdetect::pipeline::{cmd_run, execute, RunOutput};

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rows_with(participant: &str, stress: bool, n: usize) -> Vec<FeatureVector> {
    (0..n).map(|i| FeatureVector::from_values(participant, Label::from_stress(stress), [i as f64; N_FEATURES])).collect()
}

fn upsampling_identity() -> Outcome {
    let mut rows = rows_with("p", false, 23_668);
    rows.extend(rows_with("p", true, 1_940));
    let (out, report) = upsample_stress(&rows, ClassRatio { nonstress: 10, stress: 7 }, 0).map_err(|e| e.to_string())?;
    let stress = out.iter().filter(|r| r.is_stress()).count();
    check(stress == 16_567 && report.stress_after == 16_567, || format!("{stress} stress rows"))?;
    check(out.len() - stress == 23_668, || "non-stress rows changed".into())?;
    Ok(format!("{stress} stress rows"))
}

fn acc_magnitude_oracle() -> Outcome {
    // Integer Pythagorean triples and quadruples, scaled and sign-flipped.
    let exact = [(3.0, 4.0, 0.0, 5.0), (0.0, 3.0, 4.0, 5.0), (1.0, 2.0, 2.0, 3.0), (2.0, 3.0, 6.0, 7.0), (3.0, 4.0, 12.0, 13.0)];
    for &(x, y, z, m) in &exact {
        for k in 1..=100 {
            let k = k as f64;
            for s in [1.0, -1.0] {
                let got = acc_magnitude(s * k * x, k * y, -s * k * z);
                check(got == k * m, || format!("|({x},{y},{z})·{k}| = {got}, expected {}", k * m))?;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..1_000_000 {
        let (x, y, z) = (rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0));
        worst = worst.max((acc_magnitude(x, y, z) - x.hypot(y).hypot(z)).abs());
    }
    check(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:e} over 10^6 triples"))
}

fn auc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for set in 0..1000 {
        let n = rng.random_range(2..=500);
        // coarse scores in some sets so ties are common
        let levels = if set % 3 == 0 { rng.random_range(2..10) } else { 0 };
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.4).collect();
        labels[0] = true;
        labels[1] = false;
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                let s = rng.random::<f64>();
                if levels > 0 { (s * levels as f64).floor() / levels as f64 } else { s }
            })
            .collect();
        let area = auc(&roc_curve(&scores, &labels).map_err(|e| e.to_string())?);
        let (mut wins, mut pairs) = (0.0, 0.0);
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if labels[i] && !labels[j] {
                    pairs += 1.0;
                    wins += if si > sj { 1.0 } else if si == sj { 0.5 } else { 0.0 };
                }
            }
        }
        worst = worst.max((area - wins / pairs).abs());
    }
    check(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:e} over 1000 sets"))
}

fn random_point(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.5..1.5)).collect()
}

fn shap_local_accuracy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rows: Vec<Vec<f64>> = (0..400).map(|_| random_point(&mut rng, N_FEATURES)).collect();
    let labels: Vec<bool> = rows.iter().map(|r| r[3] + 0.5 * r[2] * r[8] > 0.2).collect();
    let data = Design::new(rows, labels);
    let probes: Vec<Vec<f64>> = (0..1000).map(|_| random_point(&mut rng, N_FEATURES)).collect();
    let mut worst = 0.0f64;
    for family in [Family::Gbt, Family::RandomForest] {
        let model = train(&default_spec(family, 4), &data).map_err(|e| e.to_string())?;
        let shap = shap_matrix(&model, &probes).map_err(|e| e.to_string())?;
        for (row, x) in shap.iter().zip(&probes) {
            worst = worst.max((row.reconstructed_margin() - model.margin(x)).abs());
        }
    }
    check(worst <= 1e-9, || format!("max gap {worst:e}"))?;
    Ok(format!("max gap {worst:e} over 2 x 1000 inputs"))
}

/// Random tree with consistent covers over `d` features.
fn random_tree(rng: &mut ChaCha8Rng, d: usize, max_depth: usize) -> Tree {
    fn grow(rng: &mut ChaCha8Rng, nodes: &mut Vec<TreeNode>, d: usize, depth: usize, cover: f64) -> usize {
        let id = nodes.len();
        nodes.push(TreeNode::leaf(rng.random_range(-3.0..3.0), cover));
        if depth > 0 && cover >= 2.0 && rng.random::<f64>() < 0.85 {
            let left_cover = (cover * rng.random_range(0.1..0.9)).round().clamp(1.0, cover - 1.0);
            let split = (rng.random_range(0..d), rng.random_range(-1.0..1.0));
            let left = grow(rng, nodes, d, depth - 1, left_cover);
            let right = grow(rng, nodes, d, depth - 1, cover - left_cover);
            nodes[id].split = Some(Split { feature: split.0, threshold: split.1, left, right });
        }
        id
    }
    let mut nodes = Vec::new();
    let cover = rng.random_range(20..200) as f64;
    grow(rng, &mut nodes, d, max_depth, cover);
    Tree { nodes }
}

fn shap_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let d = rng.random_range(1..=4);
        let depth = rng.random_range(1..=3);
        let tree = random_tree(&mut rng, d, depth);
        for _ in 0..4 {
            let x = random_point(&mut rng, d);
            let exact = brute_force_shapley(&tree, &x, d).map_err(|e| e.to_string())?;
            for (a, b) in tree_shap_single(&tree, &x, d).iter().zip(&exact) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    check(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:e} over 500 trees"))
}

fn t5_density(t: f64) -> f64 {
    8.0 / (3.0 * std::f64::consts::PI * 5f64.sqrt()) * (1.0 + t * t / 5.0).powi(-3)
}

/// Two-sided tail of Student's t with 5 df by composite Simpson.
fn t5_two_sided(t: f64) -> f64 {
    let steps = 20_000;
    let h = t.abs() / steps as f64;
    let mut s = t5_density(0.0) + t5_density(t.abs());
    for i in 1..steps {
        s += t5_density(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    1.0 - 2.0 * s * h / 3.0
}

fn five_by_two() -> Outcome {
    let g = 0.00015f64.sqrt();
    let d = [[0.02, 0.0], [0.0, g], [0.0, g], [0.0, g], [0.0, g]];
    let stat = five_by_two_statistic(&d);
    let oracle = t5_two_sided(2.0);
    check((stat.t - 2.0).abs() <= 1e-12, || format!("t = {}", stat.t))?;
    check((stat.p_value - oracle).abs() <= 1e-6, || format!("p = {} vs {oracle}", stat.p_value))?;
    Ok(format!("t = {}, p = {:.6} (quadrature {oracle:.6})", stat.t, stat.p_value))
}

fn split_integrity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut optimality_checks = 0;
    for cohort in 0..100u64 {
        let n_participants = rng.random_range(2..=20);
        let sizes: Vec<usize> = (0..n_participants).map(|_| rng.random_range(1..=300)).collect();
        let rows: Vec<FeatureVector> =
            sizes.iter().enumerate().flat_map(|(p, &n)| rows_with(&format!("P{p:02}"), p % 2 == 0, n)).collect();
        let split = participant_split(&rows, 0.8, cohort).map_err(|e| e.to_string())?;
        check(split.train_participants.is_disjoint(&split.test_participants), || format!("cohort {cohort}: overlap"))?;
        check(split.train_participants.len() + split.test_participants.len() == n_participants, || {
            format!("cohort {cohort}: participants lost")
        })?;
        check(
            split.train.iter().all(|r| split.train_participants.contains(&r.participant_id))
                && split.test.iter().all(|r| split.test_participants.contains(&r.participant_id))
                && split.train.len() + split.test.len() == rows.len(),
            || format!("cohort {cohort}: rows on the wrong side"),
        )?;
        if n_participants <= 12 {
            let total: usize = sizes.iter().sum();
            let best = (1..(1u32 << n_participants) - 1)
                .map(|mask| {
                    let train: usize = sizes.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|p| p.1).sum();
                    (train as f64 / total as f64 - 0.8).abs()
                })
                .fold(f64::INFINITY, f64::min);
            let got = (split.achieved_train_fraction - 0.8).abs();
            check(got <= best + 1e-12, || format!("cohort {cohort}: |f - 0.8| = {got} > optimum {best}"))?;
            optimality_checks += 1;
        }
    }
    Ok(format!("100 cohorts disjoint; optimal on all {optimality_checks} with <= 12 participants"))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 }
}

fn gbt_only(seed: u64, cohort: CohortConfig, explain: Option<ExplainConfig>) -> RunConfig {
    RunConfig {
        input: Input::Synth(cohort),
        models: vec![default_spec(Family::Gbt, seed)],
        explain,
        ..RunConfig::synth_default(seed)
    }
}

fn test_auc(out: &RunOutput) -> f64 {
    out.evaluated[0].report.auc
}

/// Criteria 8 and 9 share the same runs.
fn signal_recovery() -> (Outcome, Outcome) {
    let mut planted = Vec::new();
    let mut null = Vec::new();
    let mut top3_hits = 0;
    let expected: std::collections::BTreeSet<&str> = ["std_hr", "min_hr", "std_acc"].into();
    for seed in 0..10 {
        let cohort = CohortConfig { seed, ..CohortConfig::default() };
        let out = match execute(&gbt_only(seed, cohort.clone(), Some(ExplainConfig::default()))) {
            Ok(o) => o,
            Err(e) => return (Err(e.to_string()), Err("planted run failed".into())),
        };
        planted.push(test_auc(&out));
        let top: std::collections::BTreeSet<&str> =
            out.importance.as_ref().map(|imp| imp.iter().take(3).map(|f| f.feature.as_str()).collect()).unwrap_or_default();
        top3_hits += usize::from(top == expected);

        match execute(&gbt_only(seed, cohort.zero_effect(), None)) {
            Ok(o) => null.push(test_auc(&o)),
            Err(e) => return (Err(e.to_string()), Err("zero-effect run failed".into())),
        }
    }
    let (m_planted, m_null) = (median(planted), median(null));
    let auc = if m_planted >= 0.90 && (0.45..=0.55).contains(&m_null) {
        Ok(format!("median AUC planted {m_planted:.4}, zero-effect {m_null:.4}"))
    } else {
        Err(format!("median AUC planted {m_planted:.4} (need >= 0.90), zero-effect {m_null:.4} (need 0.45..0.55)"))
    };
    let shap = if top3_hits >= 8 {
        Ok(format!("top-3 recovered in {top3_hits}/10 seeds"))
    } else {
        Err(format!("top-3 recovered in only {top3_hits}/10 seeds"))
    };
    (auc, shap)
}

fn grid_enumeration() -> Outcome {
    let out = execute(&RunConfig { models: vec![], explain: None, ..RunConfig::synth_default(10) });
    let rows = match out {
        Ok(o) => o.split,
        Err(e) => return Err(e.to_string()),
    };
    let ratio = Some(ClassRatio::default());
    let search = || grid_search(Family::Gbt, &study_gbt_grid(), &Default::default(), &rows, Objective::ValidationAccuracy, ratio, 10);
    let a = search().map_err(|e| e.to_string())?;
    let b = search().map_err(|e| e.to_string())?;
    check(a.combinations == 24 && a.leaderboard.len() == 24, || format!("{} entries", a.leaderboard.len()))?;
    check(a.leaderboard.iter().all(|e| e.accuracy.is_some() && e.error.is_none()), || "untrained entries".into())?;
    check(a == b, || "two searches disagree".into())?;
    // winner: highest accuracy, then the smallest hyperparameters in the fixed order
    let top = a.leaderboard.iter().map(|e| e.accuracy.unwrap()).fold(f64::NEG_INFINITY, f64::max);
    let winner = a
        .leaderboard
        .iter()
        .filter(|e| e.accuracy == Some(top))
        .min_by(|x, y| cmp_hyperparameters(&x.hyperparameters, &y.hyperparameters))
        .unwrap();
    let best = a.best.as_ref().ok_or("no winner")?;
    check(winner.hyperparameters.iter().all(|(k, v)| best.hyperparameters.get(k) == Some(v)), || {
        format!("winner {:?} is not the tie-break choice {:?}", best.hyperparameters, winner.hyperparameters)
    })?;
    let ties = a.leaderboard.iter().filter(|e| e.accuracy == Some(top)).count();
    let show = |k: &str| best.hyperparameters.get(k).map(ParamValue::to_string).unwrap_or_default();
    Ok(format!(
        "24 entries trained; winner loss={} criterion={} n_estimators={} max_depth={} ({ties} tied at accuracy {top:.4})",
        show("loss"),
        show("criterion"),
        show("n_estimators"),
        show("max_depth")
    ))
}

fn tree_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn determinism(first: &mut Option<RunOutput>) -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = RunConfig::synth_default(21);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let out = cmd_run(&cfg, &a, false).map_err(|e| e.to_string())?;
    cmd_run(&cfg, &b, false).map_err(|e| e.to_string())?;
    let (ta, tb) = (tree_bytes(&a), tree_bytes(&b));
    check(ta == tb, || {
        let differing: Vec<&String> = ta.keys().filter(|k| ta.get(*k) != tb.get(*k)).collect();
        format!("bundles differ in {differing:?}")
    })?;
    let svgs = ta.keys().filter(|k| k.ends_with(".svg")).count();
    *first = Some(out);
    Ok(format!("{} files identical, {svgs} of them SVG", ta.len()))
}

fn scenario_contract(run: Option<&RunOutput>) -> Outcome {
    let run = run.ok_or("no run output to inspect")?;
    for e in &run.evaluated {
        let find = |s: Scenario| e.report.scenario_matrices.iter().find(|m| m.scenario == s).map(|m| m.confusion);
        let full = find(Scenario::TprAtLeast(1.0)).ok_or("missing tpr >= 1 scenario")?;
        let tpr = full.tp as f64 / (full.tp + full.fn_) as f64;
        let fpr = full.fp as f64 / (full.fp + full.tn) as f64;
        check(full.fn_ == 0 && tpr == 1.0 && fpr <= 1.0, || format!("{}: tpr >= 1 gave {full:?}", e.name))?;
        let capped = find(Scenario::FprAtMost(0.1)).ok_or("missing fpr <= 0.1 scenario")?;
        let fpr = capped.fp as f64 / (capped.fp + capped.tn) as f64;
        check(fpr <= 0.1 && capped.fpr == fpr, || format!("{}: fpr <= 0.1 gave {capped:?}", e.name))?;
    }
    Ok(format!("{} models honour both operating points", run.evaluated.len()))
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome, Duration, Duration)> = Vec::new();
    let mut timed = |id: u32, name: &'static str, budget: Duration, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = f();
        results.push((id, name, outcome, start.elapsed(), budget));
    };
    let secs = Duration::from_secs;
    timed(1, "upsampling identity", secs(1), &mut upsampling_identity);
    timed(2, "acceleration magnitude", secs(5), &mut acc_magnitude_oracle);
    timed(3, "auc oracle", secs(30), &mut auc_oracle);
    timed(4, "treeshap local accuracy", secs(30), &mut shap_local_accuracy);
    timed(5, "treeshap oracle", secs(60), &mut shap_oracle);
    timed(6, "5x2cv t statistic", secs(5), &mut five_by_two);
    timed(7, "split integrity", secs(60), &mut split_integrity);

    let start = Instant::now();
    let (recovery, ranking) = signal_recovery();
    let elapsed = start.elapsed();
    results.push((8, "signal recovery", recovery, elapsed, secs(600)));
    results.push((9, "shap ranking", ranking, elapsed, secs(600)));

    let mut timed = |id: u32, name: &'static str, budget: Duration, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = f();
        results.push((id, name, outcome, start.elapsed(), budget));
    };
    timed(10, "grid enumeration", secs(600), &mut grid_enumeration);
    let mut run = None;
    timed(11, "determinism", secs(600), &mut || determinism(&mut run));
    timed(12, "scenario contract", secs(60), &mut || scenario_contract(run.as_ref()));

    let mut failed = 0;
    for (id, name, outcome, took, budget) in results {
        let outcome = match outcome {
            Ok(detail) if took > budget => Err(format!("{detail}; took {took:.2?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {id:>2} {name}: {detail} [{took:.2?}]"),
            Err(why) => {
                failed += 1;
                println!("FAIL {id:>2} {name}: {why} [{took:.2?}]");
            }
        }
    }
    if failed == 0 {
        println!("acceptance: all 12 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of 12 criteria failed");
        ExitCode::FAILURE
    }
}
