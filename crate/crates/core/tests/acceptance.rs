//! Acceptance suite. Every criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use bouts_core::boosting::{fit_independent, BoostConfig, BoutsModel, Trainer};
use bouts_core::data::{overlap_split, prepare, Partition, SplitRatios, TaskDataset};
use bouts_core::multitask::{grow_multitask_tree, maximin_split};
use bouts_core::pathsweep::{log_grid, select_penalty, sweep, DownstreamGrid, LogBase};
use bouts_core::stability::{
    cohens_d, spearman, stability, stability_variance, ztest, SelectionMatrix, StabilityVariant,
};
use bouts_core::study::{run_study, StudyConfig};
use bouts_core::synth::{SynthSpec, Synthetic};
use bouts_core::trees::{best_split_single, grow_tree, NodeView, SortedFeatures};
use bouts_core::{Criterion, Matrix, TreeParams, UsedFeatures};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Feature penalty used for the planted-recovery and stability runs.
const LAMBDA: f64 = 5.0;
const GAIN_TOL: f64 = 1e-12;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(id: &str, title: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let pass = out.pass && in_time;
    let limit = limit.map_or(String::new(), |l| format!(", limit {:.0?}", l));
    println!(
        "{id} {} {title}: {} [{:.2?}{limit}]",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed
    );
    pass
}

// ---------------------------------------------------------------- oracles

fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n
}

/// Impurity decrease written out from its definition.
fn oracle_gain(yl: &[f64], yr: &[f64], criterion: Criterion) -> f64 {
    let (nl, nr) = (yl.len() as f64, yr.len() as f64);
    let n = nl + nr;
    match criterion {
        Criterion::Variance => {
            let all: Vec<f64> = yl.iter().chain(yr).copied().collect();
            variance(&all) - nl / n * variance(yl) - nr / n * variance(yr)
        }
        Criterion::Friedman => {
            let ml = yl.iter().sum::<f64>() / nl;
            let mr = yr.iter().sum::<f64>() / nr;
            nl * nr / n * (ml - mr) * (ml - mr)
        }
    }
}

/// Every valid `(threshold, penalized gain)` of one feature over a node, in
/// increasing threshold order.
fn oracle_candidates(
    x: &Matrix,
    y: &[f64],
    idx: &[usize],
    f: usize,
    penalty: f64,
    params: &TreeParams,
) -> Vec<(f64, f64)> {
    let mut values: Vec<f64> = idx.iter().map(|&i| x.get(i, f)).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let mut out = Vec::new();
    for w in values.windows(2) {
        let mut v = 0.5 * (w[0] + w[1]);
        if v >= w[1] {
            v = w[0];
        }
        let yl: Vec<f64> = idx.iter().filter(|&&i| x.get(i, f) <= v).map(|&i| y[i]).collect();
        let yr: Vec<f64> = idx.iter().filter(|&&i| x.get(i, f) > v).map(|&i| y[i]).collect();
        if yl.len() < params.min_samples_leaf || yr.len() < params.min_samples_leaf {
            continue;
        }
        out.push((v, oracle_gain(&yl, &yr, params.criterion) - penalty));
    }
    out
}

/// First entry whose key is within tolerance of the maximum.
fn first_max<T: Copy>(items: &[(T, f64)]) -> Option<(T, f64)> {
    let best = items.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    items.iter().copied().find(|c| c.1 >= best - GAIN_TOL)
}

fn random_params(rng: &mut ChaCha8Rng) -> TreeParams {
    TreeParams {
        max_depth: 3,
        min_samples_leaf: rng.random_range(1..=3),
        min_gain: if rng.random_bool(0.5) { 0.0 } else { 1e-7 },
        criterion: if rng.random_bool(0.5) { Criterion::Variance } else { Criterion::Friedman },
    }
}

/// Features on a few integer levels (so ties occur) and dyadic targets (so
/// that every partial sum is exact).
fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Matrix, Vec<f64>) {
    let levels = *[3u32, 6, 1000].choose(rng).unwrap();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(0..levels) as f64).collect())
        .collect();
    let y = (0..n).map(|_| rng.random_range(-128i32..=128) as f64 / 64.0).collect();
    (Matrix::from_rows(&rows).unwrap(), y)
}

fn random_used(rng: &mut ChaCha8Rng, d: usize) -> UsedFeatures {
    (0..d).filter(|_| rng.random_bool(0.3)).collect()
}

// ---------------------------------------------------------------- A1, A2

fn a1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut mismatches = Vec::new();
    let mut splits = 0;
    for case in 0..1000 {
        let n = rng.random_range(2..=32);
        let d = rng.random_range(1..=5);
        let (x, y) = random_matrix(&mut rng, n, d);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        idx.truncate(rng.random_range(1..=n));
        let lambda = *[0.0, 0.1, 0.5].choose(&mut rng).unwrap();
        let used = random_used(&mut rng, d);
        let params = random_params(&mut rng);

        let per_feature: Vec<(usize, (f64, f64))> = (0..d)
            .filter_map(|f| {
                let cands = oracle_candidates(&x, &y, &idx, f, used.penalty(f, lambda), &params);
                first_max(&cands).map(|c| (f, c))
            })
            .collect();
        let keyed: Vec<((usize, f64), f64)> = per_feature.iter().map(|&(f, (v, g))| ((f, v), g)).collect();
        let expected = first_max(&keyed).filter(|&(_, g)| g > params.min_gain);
        let got = best_split_single(&NodeView::new(&x, &y, &idx), &used, lambda, &params);
        let ok = match (expected, got) {
            (None, None) => true,
            (Some(((f, v), g)), Some(c)) => {
                splits += 1;
                c.feature == f && c.threshold == v && (c.gain - g).abs() <= GAIN_TOL
            }
            _ => false,
        };
        if !ok {
            mismatches.push(format!("case {case}: oracle {expected:?}, got {got:?}"));
        }
    }
    Outcome {
        pass: mismatches.is_empty(),
        detail: format!(
            "1000 instances, {splits} with a split, {} mismatches{}",
            mismatches.len(),
            mismatches.first().map_or(String::new(), |m| format!(" (first: {m})"))
        ),
    }
}

fn a2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut mismatches = Vec::new();
    let mut splits = 0;
    for case in 0..500 {
        let t_count = rng.random_range(1..=3);
        let d = rng.random_range(1..=4);
        let tasks: Vec<(Matrix, Vec<f64>, Vec<usize>)> = (0..t_count)
            .map(|_| {
                let n = rng.random_range(2..=16);
                let (x, y) = random_matrix(&mut rng, n, d);
                (x, y, (0..n).collect())
            })
            .collect();
        let lambda = *[0.0, 0.1, 0.5].choose(&mut rng).unwrap();
        let used = random_used(&mut rng, d);
        let params = random_params(&mut rng);

        // Brute-force maximin: per-task best over thresholds, min over
        // tasks, max over features.
        let mut scored: Vec<(usize, f64)> = Vec::new();
        let mut thresholds: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
        for f in 0..d {
            let per_task: Option<Vec<(f64, f64)>> = tasks
                .iter()
                .map(|(x, y, idx)| first_max(&oracle_candidates(x, y, idx, f, used.penalty(f, lambda), &params)))
                .collect();
            if let Some(best) = per_task {
                scored.push((f, best.iter().map(|b| b.1).fold(f64::INFINITY, f64::min)));
                thresholds.insert(f, best);
            }
        }
        let expected = first_max(&scored).filter(|&(_, s)| s > params.min_gain);
        let views: Vec<NodeView> = tasks.iter().map(|(x, y, idx)| NodeView::new(x, y, idx)).collect();
        let got = maximin_split(&views, &used, lambda, &params);
        let ok = match (&expected, &got) {
            (None, None) => true,
            (Some((f, s)), Some(m)) => {
                splits += 1;
                let want = &thresholds[f];
                m.feature == *f
                    && (m.score - s).abs() <= GAIN_TOL
                    && m.thresholds.iter().zip(want).all(|(a, b)| *a == b.0)
                    && m.gains.iter().zip(want).all(|(a, b)| (a - b.1).abs() <= GAIN_TOL)
                    && m.gains.iter().all(|g| *g >= m.score - GAIN_TOL)
            }
            _ => false,
        };
        if !ok {
            mismatches.push(format!("case {case}: oracle {expected:?}, got {got:?}"));
        }
    }
    Outcome {
        pass: mismatches.is_empty(),
        detail: format!(
            "500 instances, {splits} with a split, {} mismatches{}",
            mismatches.len(),
            mismatches.first().map_or(String::new(), |m| format!(" (first: {m})"))
        ),
    }
}

// ---------------------------------------------------------------- A3, A4

fn planted_spec(seed: u64) -> SynthSpec {
    SynthSpec::planted(3, 50, 3, 2, 500, seed)
}

fn standardized_train(data: &Synthetic, seed: u64) -> Vec<TaskDataset> {
    let split = overlap_split(&data.dataset.tasks, SplitRatios::default(), seed).unwrap();
    prepare(&data.dataset, &split).unwrap().into_iter().map(|p| p.train).collect()
}

fn recovery_config() -> BoostConfig {
    BoostConfig::default().with_lambda(LAMBDA)
}

fn a3_a4() -> (Outcome, Outcome) {
    let mut perfect = 0;
    let mut full_recall = true;
    let mut recall_sum = 0.0;
    let mut recall_n = 0.0;
    let mut spurious = Vec::new();
    let mut violations = 0;
    let mut rounds = 0;
    for seed in 0..10 {
        let spec = planted_spec(seed);
        let data = spec.generate().unwrap();
        let train = standardized_train(&data, seed);
        let (model, trace) = Trainer::new(&train, &recovery_config()).unwrap().run_traced();

        let truth: BTreeSet<usize> = spec.universal.iter().copied().collect();
        let found = model.universal_indices();
        let extra = found.difference(&truth).count();
        spurious.push(extra);
        full_recall &= truth.is_subset(&found);
        if truth.is_subset(&found) && extra <= 2 {
            perfect += 1;
        }
        for (t, planted) in spec.task_specific.iter().enumerate() {
            let got = model.task_specific_indices(t);
            recall_sum += planted.iter().filter(|f| got.contains(f)).count() as f64 / planted.len() as f64;
            recall_n += 1.0;
            let seq = trace.sequence(t);
            rounds += seq.len() - 1;
            violations += seq.windows(2).filter(|w| w[1] > w[0]).count();
        }
    }
    let mean_recall = recall_sum / recall_n;
    let a3 = Outcome {
        pass: full_recall && perfect >= 9 && mean_recall >= 0.9,
        detail: format!(
            "universal recall 1.0 in every seed: {full_recall}; seeds with recall 1 and <= 2 spurious: {perfect}/10 \
             (spurious per seed {spurious:?}); mean task-specific recall {mean_recall:.3}"
        ),
    };
    let a4 = Outcome {
        pass: violations == 0,
        detail: format!("{rounds} accepted task-rounds over 10 seeds, {violations} increases in training MSE"),
    };
    (a3, a4)
}

// ---------------------------------------------------------------- A5

fn a5() -> Outcome {
    let spec = SynthSpec {
        n_samples: vec![100, 1000, 1000],
        ..SynthSpec::planted(3, 50, 3, 2, 1000, 1)
    };
    let data = spec.generate().unwrap().dataset;
    let config = StudyConfig {
        replicates: 100,
        seed: 0,
        boost: BoostConfig::default().with_lambda(LAMBDA),
        ..StudyConfig::default()
    };
    let sel = run_study(&data, &config).unwrap();
    let v = config.variant;
    let phi_u = stability(&sel.universal, v).unwrap();
    let phi_s = stability(&sel.single_task[0], v).unwrap();
    let test = ztest(&sel.universal, &sel.single_task[0], v).unwrap();
    let d = cohens_d(&sel.universal, &sel.single_task[0], v).unwrap();
    Outcome {
        pass: phi_u > phi_s && test.p_value < 0.05 && d > 1.0,
        detail: format!(
            "M=100, universal stability {phi_u:.3} vs small-task single-task {phi_s:.3}; T={:.2}, p={:.2e}, Cohen's d={d:.2}",
            test.statistic, test.p_value
        ),
    }
}

// ---------------------------------------------------------------- A6

fn random_selection(rng: &mut ChaCha8Rng, m: usize, probs: &[f64]) -> SelectionMatrix {
    let rows = (0..m).map(|_| probs.iter().map(|&p| rng.random_bool(p)).collect()).collect();
    SelectionMatrix::new((0..probs.len()).map(|j| format!("f{j}")).collect(), rows).unwrap()
}

fn resample(rows: &[Vec<bool>], pick: impl Iterator<Item = usize>, names: &[String]) -> SelectionMatrix {
    SelectionMatrix::new(names.to_vec(), pick.map(|i| rows[i].clone()).collect()).unwrap()
}

fn bootstrap_variance(z: &SelectionMatrix, v: StabilityVariant, rng: &mut ChaCha8Rng) -> f64 {
    let m = z.n_replicates();
    let stats: Vec<f64> = (0..10_000)
        .filter_map(|_| {
            let b = resample(&z.rows, (0..m).map(|_| rng.random_range(0..m)), &z.feature_names);
            stability(&b, v).ok()
        })
        .collect();
    variance(&stats) * stats.len() as f64 / (stats.len() - 1) as f64
}

fn permutation_p(a: &SelectionMatrix, b: &SelectionMatrix, v: StabilityVariant, rng: &mut ChaCha8Rng) -> f64 {
    let observed = ztest(a, b, v).unwrap().statistic.abs();
    let pooled: Vec<Vec<bool>> = a.rows.iter().chain(&b.rows).cloned().collect();
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    let m = a.n_replicates();
    let mut hits = 0;
    let draws = 10_000;
    for _ in 0..draws {
        order.shuffle(rng);
        let pa = resample(&pooled, order[..m].iter().copied(), &a.feature_names);
        let pb = resample(&pooled, order[m..].iter().copied(), &a.feature_names);
        if ztest(&pa, &pb, v).unwrap().statistic.abs() >= observed {
            hits += 1;
        }
    }
    hits as f64 / draws as f64
}

fn a6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let uniform = vec![0.3; 20];
    let skewed: Vec<f64> = (0..20).map(|j| [0.9, 0.8, 0.6, 0.4, 0.2][j % 5] * if j < 10 { 1.0 } else { 0.25 }).collect();
    let designs: [(&str, Vec<f64>); 4] = [
        ("mixed p", skewed.clone()),
        ("3 strong", (0..20).map(|j| if j < 3 { 0.9 } else { 0.05 }).collect()),
        ("bimodal", (0..20).map(|j| if j < 10 { 0.8 } else { 0.2 }).collect()),
        ("p in [0.1, 0.6]", (0..20).map(|j| 0.1 + 0.5 * j as f64 / 19.0).collect()),
    ];
    let mut worst_rel: f64 = 0.0;
    let mut var_lines = Vec::new();
    for m in [50, 100] {
        for (label, probs) in &designs {
            for v in [StabilityVariant::Normalized, StabilityVariant::PaperFormula] {
                let z = random_selection(&mut rng, m, probs);
                let est = stability_variance(&z, v).unwrap();
                let boot = bootstrap_variance(&z, v, &mut rng);
                let rel = (est - boot).abs() / boot;
                worst_rel = worst_rel.max(rel);
                if rel > 0.25 {
                    var_lines.push(format!("M={m} {label} {v:?}: {est:.3e} vs bootstrap {boot:.3e}"));
                }
            }
        }
    }
    // With every feature equally likely the estimator has no first-order
    // term and the asymptotic variance understates the spread. Reported,
    // not scored.
    let z = random_selection(&mut rng, 100, &uniform);
    let v = StabilityVariant::Normalized;
    let random_ratio = stability_variance(&z, v).unwrap() / bootstrap_variance(&z, v, &mut rng);
    let mut worst_p: f64 = 0.0;
    let mut p_lines = Vec::new();
    for _ in 0..5 {
        let a = random_selection(&mut rng, 100, &skewed);
        let b = random_selection(&mut rng, 100, &skewed);
        let v = StabilityVariant::Normalized;
        let p = ztest(&a, &b, v).unwrap().p_value;
        let perm = permutation_p(&a, &b, v, &mut rng);
        worst_p = worst_p.max((p - perm).abs());
        p_lines.push(format!("{p:.3}/{perm:.3}"));
    }
    let mut identity = true;
    for _ in 0..200 {
        let m = rng.random_range(2..40);
        let a = random_selection(&mut rng, m, &skewed);
        let b = random_selection(&mut rng, m, &uniform);
        for v in [StabilityVariant::Normalized, StabilityVariant::PaperFormula] {
            if let (Ok(d), Ok(t)) = (cohens_d(&a, &b, v), ztest(&a, &b, v)) {
                identity &= d == std::f64::consts::SQRT_2 * t.statistic;
            }
        }
    }
    Outcome {
        pass: var_lines.is_empty() && worst_p <= 0.02 && identity,
        detail: format!(
            "variance vs 10k bootstrap over {} selection designs: worst relative error {:.1}%{} \
             (uniform random selection, unscored: ratio {random_ratio:.2}); z-test vs 10k permutation p (z/perm): [{}], \
             worst gap {worst_p:.3}; d = sqrt(2) T exactly: {identity}",
            2 * 2 * designs.len(),
            100.0 * worst_rel,
            if var_lines.is_empty() { String::new() } else { format!(" ({})", var_lines.join("; ")) },
            p_lines.join(", ")
        ),
    }
}

// ---------------------------------------------------------------- A7

fn a7() -> Outcome {
    let grid = log_grid(20, LogBase::Natural).unwrap();
    let endpoints = grid[0].ln() == -4.0 && grid[19].ln() == 4.0;

    let spec = planted_spec(0);
    let data = spec.generate().unwrap();
    let split = overlap_split(&data.dataset.tasks, SplitRatios::default(), 0).unwrap();
    let prepared = prepare(&data.dataset, &split).unwrap();
    let path = sweep(&prepared, &BoostConfig::default(), &grid, &DownstreamGrid::default()).unwrap();
    let totals: Vec<f64> = path.points.iter().map(|p| p.total_features()).collect();
    let trend = spearman(&path.lambdas(), &totals).unwrap();
    let chosen = path.select(0.1).unwrap();

    // Task 1 loses 12% of its reference explained variance at point 7.
    let k = 7;
    let constructed: Vec<Vec<f64>> = (0..12)
        .map(|j| vec![0.8, if j < k { 0.7 - 0.001 * j as f64 } else { 0.7 * 0.88 }, 0.6])
        .collect();
    let picked = select_penalty(&constructed, 0.1).unwrap();

    Outcome {
        pass: endpoints && trend <= -0.8 && picked.index == k - 1 && !picked.warning,
        detail: format!(
            "log endpoints exact: {endpoints}; Spearman(lambda, total features) = {trend:.3} \
             (counts {:?}); constructed 12% drop at point {k} selects {}; on the sweep the rule selects \
             lambda = {:.3} (index {})",
            totals.iter().map(|t| format!("{t:.1}")).collect::<Vec<_>>(),
            picked.index,
            grid[chosen.index],
            chosen.index
        ),
    }
}

// ---------------------------------------------------------------- A8

fn a8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut tree_cases = 0;
    let mut tree_equal = true;
    for _ in 0..50 {
        let n = rng.random_range(10..80);
        let d = rng.random_range(1..6);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = rows.iter().map(|r| r[0] * r[0] + rng.random_range(-0.3..0.3)).collect();
        let sorted = SortedFeatures::new(&x);
        let used = random_used(&mut rng, d);
        let params = TreeParams {
            max_depth: rng.random_range(1..5),
            min_samples_leaf: rng.random_range(1..4),
            ..TreeParams::default()
        };
        let lambda = rng.random_range(0.0..2.0);
        let single = grow_tree(&sorted, &y, &used, lambda, &params);
        let multi = grow_multitask_tree(&[&sorted], &[&y], &used, lambda, &params);
        tree_equal &= multi.task_tree(0) == single;
        tree_cases += 1;
    }

    let spec = planted_spec(3);
    let data = spec.generate().unwrap();
    let train = standardized_train(&data, 3);
    let one = std::slice::from_ref(&train[0]);
    let multi_cfg = BoostConfig {
        rounds_universal: 50,
        rounds_task: 0,
        ..BoostConfig::default().with_lambda(1.0)
    };
    let single_cfg = BoostConfig {
        rounds_universal: 0,
        rounds_task: 50,
        ..multi_cfg.clone()
    };
    let a = BoutsModel::fit(one, &multi_cfg).unwrap();
    let b = BoutsModel::fit(one, &single_cfg).unwrap();
    let pa = a.predict(0, &train[0].x).unwrap();
    let pb = b.predict(0, &train[0].x).unwrap();
    let t1_gap = pa.iter().zip(&pb).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let t1_nodes = a.universal_trees.iter().zip(&b.task_trees[0]).all(|(m, s)| &m.task_tree(0) == s)
        && a.universal_trees.len() == b.task_trees[0].len();

    let cfg = BoostConfig {
        rounds_universal: 0,
        rounds_task: 60,
        ..BoostConfig::default().with_lambda(1.0)
    };
    let joint = BoutsModel::fit(&train, &cfg).unwrap();
    let mut bu0_gap: f64 = 0.0;
    for (t, task) in train.iter().enumerate() {
        let alone = fit_independent(std::slice::from_ref(task), &cfg).unwrap();
        let p = joint.predict(t, &task.x).unwrap();
        let q = alone.predict(0, &task.x).unwrap();
        bu0_gap = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(bu0_gap, f64::max);
    }
    Outcome {
        pass: tree_equal && t1_nodes && t1_gap <= 1e-12 && bu0_gap <= 1e-12,
        detail: format!(
            "T=1 multitask tree equals single-task tree in {tree_cases} random cases: {tree_equal}; \
             T=1 boosted ensembles node-for-node equal: {t1_nodes}, max prediction gap {t1_gap:.1e}; \
             B_U=0 vs independent boosting max gap {bu0_gap:.1e}"
        ),
    }
}

// ---------------------------------------------------------------- A9

fn a9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut violations = Vec::new();
    for case in 0..1000 {
        let t_count = rng.random_range(1..=4);
        let pool = rng.random_range(1..=60);
        let tasks: Vec<TaskDataset> = (0..t_count)
            .map(|t| {
                let ids: Vec<String> = (0..pool).filter(|_| rng.random_bool(0.6)).map(|i| format!("id{i}")).collect();
                let ids = if ids.is_empty() { vec![format!("only{t}")] } else { ids };
                let n = ids.len();
                TaskDataset::new(
                    format!("t{t}"),
                    vec!["a".into()],
                    Matrix::new(n, 1, (0..n).map(|i| i as f64).collect()).unwrap(),
                    vec![0.0; n],
                    ids,
                )
                .unwrap()
            })
            .collect();
        let train = rng.random_range(0.1..0.8);
        let val = rng.random_range(0.05..(0.95 - train));
        let ratios = if case % 2 == 0 {
            SplitRatios::default()
        } else {
            SplitRatios {
                train,
                val,
                test: 1.0 - train - val,
            }
        };
        let seed = rng.random();
        let split = overlap_split(&tasks, ratios, seed).unwrap();
        let again = overlap_split(&tasks, ratios, seed).unwrap();
        if split != again {
            violations.push(format!("case {case}: not deterministic"));
        }

        let mut label: BTreeMap<&str, Partition> = BTreeMap::new();
        let mut signature: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
        for (t, (task, s)) in tasks.iter().zip(&split.tasks).enumerate() {
            let mut seen = vec![0; task.n_samples()];
            for p in [Partition::Train, Partition::Val, Partition::Test] {
                for &i in s.get(p) {
                    seen[i] += 1;
                    let id = task.sample_ids[i].as_str();
                    signature.entry(id).or_default().insert(t);
                    if *label.entry(id).or_insert(p) != p {
                        violations.push(format!("case {case}: id {id} leaks across partitions"));
                    }
                }
            }
            if seen.iter().any(|&c| c != 1) {
                violations.push(format!("case {case}: task {t} is not partitioned"));
            }
        }
        let mut cells: BTreeMap<&BTreeSet<usize>, [usize; 3]> = BTreeMap::new();
        for (id, sig) in &signature {
            let slot = match label[id] {
                Partition::Train => 0,
                Partition::Val => 1,
                Partition::Test => 2,
            };
            cells.entry(sig).or_default()[slot] += 1;
        }
        for counts in cells.values() {
            let n = counts.iter().sum::<usize>() as f64;
            for (c, r) in counts.iter().zip([ratios.train, ratios.val, ratios.test]) {
                if (*c as f64 - r * n).abs() > 1.0 {
                    violations.push(format!("case {case}: cell of {n} got {counts:?} for ratios {ratios:?}"));
                }
            }
        }
    }
    Outcome {
        pass: violations.is_empty(),
        detail: format!(
            "1000 configurations, {} violations{}",
            violations.len(),
            violations.first().map_or(String::new(), |v| format!(" (first: {v})"))
        ),
    }
}

fn main() {
    let secs = Duration::from_secs;
    let mut results = vec![
        check("A1", "split oracle", Some(secs(10)), a1),
        check("A2", "maximin oracle", Some(secs(10)), a2),
    ];
    let mut a4 = None;
    results.push(check("A3", "planted recovery", Some(secs(120)), || {
        let (a3, monotone) = a3_a4();
        a4 = Some(monotone);
        a3
    }));
    results.push(check("A4", "monotone training loss", None, || a4.unwrap()));
    results.push(check("A5", "stability improvement", Some(secs(600)), a5));
    results.push(check("A6", "stability statistics", None, a6));
    results.push(check("A7", "path protocol", None, a7));
    results.push(check("A8", "degeneration", None, a8));
    results.push(check("A9", "overlap split", None, a9));
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
