//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use dsag_cli::config::load_config;
use dsag_core::gradient_cache::{GradientCache, SubgradientEntry};
use dsag_core::harness::{coded_bound_trace, coded_wait_count, Method};
use dsag_core::latency::{LatencyDist, WorkerProfile};
use dsag_core::load_balancer::{
    contribution, equalize, h_min_baseline, latency_ratio, optimize, ProfiledStats, SimSettings, WorkerStats,
};
use dsag_core::methods::{
    apply_update, explained_variance, optimum_oracle, range_loss, regularizer, regularizer_gradient, subgradient,
};
use dsag_core::order_stats::{mc_order_stat, pooled_iid_profiles, simulate_iterations};
use dsag_core::partitioning::{advance_index, align_partitions, p_start, p_stop, p_trans, PartitionState};
use dsag_core::{run_experiment, ExperimentConfig, ProblemSpec, RunTrace, TraceRow};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
}

fn partition_algebra() -> Outcome {
    let e = |err: dsag_core::Error| err.to_string();
    let known = [
        ("p_start(10,3,2)", p_start(10, 3, 2).map_err(e)?, 4),
        ("p_trans(10,2,3,2)", p_trans(10, 2, 3, 2).map_err(e)?, 2),
        ("align(10,2,3,1)", align_partitions(10, 2, 3, 1).map_err(e)?.k_new, 1),
        ("align(10,2,4,1)", align_partitions(10, 2, 4, 1).map_err(e)?.k_new, 3),
        ("mod(1,2)+1", advance_index(1, 2).map_err(e)?, 2),
    ];
    for (name, got, want) in known {
        ensure(got == want, || format!("{name} = {got}, expected {want}"))?;
    }

    let mut checked = 0usize;
    let mut max_steps_over_p = 0usize;
    for n in 1..=50 {
        for p in 1..=n {
            // Cover and disjointness: partitions tile 1..=n in order, none empty.
            let mut next = 1;
            for i in 1..=p {
                let (a, b) = (p_start(n, p, i).map_err(e)?, p_stop(n, p, i).map_err(e)?);
                ensure(a == next && b >= a, || format!("n={n} p={p} i={i}: [{a}, {b}] after row {}", next - 1))?;
                next = b + 1;
            }
            ensure(next == n + 1, || format!("n={n} p={p}: rows end at {}", next - 1))?;

            for q in 1..=n {
                for k in 1..=p {
                    // p_trans containment.
                    let first = p_start(n, p, k).map_err(e)?;
                    let t = p_trans(n, p, q, k).map_err(e)?;
                    ensure(
                        (1..=q).contains(&t) && p_start(n, q, t).map_err(e)? <= first && first <= p_stop(n, q, t).map_err(e)?,
                        || format!("p_trans({n},{p},{q},{k}) = {t} does not contain row {first}"),
                    )?;

                    // Alignment soundness: the walk starts at the mapped
                    // index of the advanced one and stops on a pair of
                    // partitions with the same first row.
                    let a = align_partitions(n, p, q, k).map_err(e)?;
                    let mapped = p_trans(n, p, q, k % p + 1).map_err(e)?;
                    ensure(
                        (1..=mapped).contains(&a.k_new) && a.steps == mapped - a.k_new && a.steps < q,
                        || format!("align({n},{p},{q},{k}): k' = {} after {} steps from {mapped}", a.k_new, a.steps),
                    )?;
                    ensure(
                        (1..=p).contains(&a.k_old)
                            && p_start(n, q, a.k_new).map_err(e)? == p_start(n, p, a.k_old).map_err(e)?,
                        || format!("align({n},{p},{q},{k}): start rows differ"),
                    )?;
                    max_steps_over_p = max_steps_over_p.max(a.steps.saturating_sub(p));
                    checked += 1;
                }
            }
        }
    }
    Ok(format!(
        "{checked} alignments checked, 5 worked values exact; walk exceeds p by up to {max_steps_over_p} steps"
    ))
}

fn gradient_cache() -> Outcome {
    let e = |err: dsag_core::Error| err.to_string();
    let val = |x: f64| Array2::from_elem((1, 1), x);
    let ins = |c: &mut GradientCache, a: usize, b: usize, t: u64, x: f64| {
        c.try_insert(SubgradientEntry::new(a, b, t, val(x))).map(|o| o.accepted())
    };

    // Two workers with ten rows each, two subpartitions; the first worker
    // moves to three subpartitions and sends rows 4..=6.
    let mut c = GradientCache::new(20, (1, 1));
    for (a, b) in [(1, 5), (6, 10), (11, 15), (16, 20)] {
        ins(&mut c, a, b, 0, 1.0).map_err(e)?;
    }
    ensure(ins(&mut c, 4, 6, 1, 2.0).map_err(e)?, || "rows 4..=6 rejected".into())?;
    ensure(c.intervals() == vec![(4, 6, 1), (11, 15, 0), (16, 20, 0)], || {
        format!("after double eviction: {:?}", c.intervals())
    })?;
    ensure(c.covered() == 13 && c.coverage() == 0.65 && c.sum()[[0, 0]] == 4.0, || {
        format!("covered {} coverage {} sum {}", c.covered(), c.coverage(), c.sum()[[0, 0]])
    })?;

    // Index realignment picks the order 1..=3, 4..=6, 7..=10.
    let replay = |order: &[(usize, usize)]| -> Result<Vec<Vec<(usize, usize)>>, String> {
        let mut c = GradientCache::new(10, (1, 1));
        ins(&mut c, 1, 5, 0, 1.0).map_err(e)?;
        ins(&mut c, 6, 10, 0, 1.0).map_err(e)?;
        let mut gaps = Vec::new();
        for (t, &(a, b)) in order.iter().enumerate() {
            ensure(ins(&mut c, a, b, t as u64 + 1, 1.0).map_err(e)?, || format!("[{a}, {b}] rejected"))?;
            gaps.push(c.eviction_gap_report());
        }
        Ok(gaps)
    };
    let mut state = PartitionState { n: 10, p: 2, k: 2 };
    let mut order = vec![state.next(Some(3)).map_err(e)?];
    for _ in 0..2 {
        order.push(state.next(None).map_err(e)?);
    }
    ensure(order == vec![(1, 3), (4, 6), (7, 10)], || format!("processing order {order:?}"))?;
    let aligned = replay(&order)?;
    ensure(aligned == vec![vec![(4, 5)], vec![(7, 10)], vec![]], || format!("gaps {aligned:?}"))?;
    let naive = replay(&[(4, 6), (7, 10), (1, 3)])?;
    ensure(naive == vec![vec![(1, 3), (7, 10)], vec![(1, 3)], vec![]], || format!("gaps {naive:?}"))?;

    // Random sequences against a naive model.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    let mut ops = 0;
    for seq in 0..3 {
        let n = [10, 50, 200][seq];
        let mut cache = GradientCache::new(n, (2, 1));
        let mut model: Vec<(usize, usize, u64, Array2<f64>)> = Vec::new();
        for _ in 0..10_000 {
            let a = rng.random_range(1..=n);
            let b = rng.random_range(a..=n.min(a + n / 4));
            let t = rng.random_range(0..200u64);
            let v = Array2::from_shape_fn((2, 1), |_| rng.random_range(-1e3..1e3));
            let accepted = cache.try_insert(SubgradientEntry::new(a, b, t, v.clone())).map_err(e)?.accepted();
            let overlap: Vec<usize> = (0..model.len()).filter(|&i| model[i].0 <= b && a <= model[i].1).collect();
            let expect = overlap.iter().all(|&i| model[i].2 < t);
            ensure(accepted == expect, || format!("insert [{a}, {b}]@{t}: accepted {accepted}"))?;
            if expect {
                for &i in overlap.iter().rev() {
                    model.remove(i);
                }
                model.push((a, b, t, v));
                model.sort_by_key(|m| m.0);
            }
            let intervals: Vec<(usize, usize, u64)> = model.iter().map(|m| (m.0, m.1, m.2)).collect();
            ensure(cache.intervals() == intervals, || "interval sets diverged".into())?;
            ensure(model.windows(2).all(|w| w[0].1 < w[1].0), || "overlapping entries".into())?;
            let covered: usize = model.iter().map(|m| m.1 + 1 - m.0).sum();
            ensure(cache.covered() == covered, || "coverage diverged".into())?;
            let mut sum = Array2::zeros((2, 1));
            for m in &model {
                sum += &m.3;
            }
            let scale = model.iter().flat_map(|m| m.3.iter()).map(|x| x.abs()).sum::<f64>().max(1.0);
            let err = (cache.sum() - &sum).iter().map(|x| x.abs()).fold(0.0, f64::max) / scale;
            worst = worst.max(err);
            ensure(err <= 1e-10, || format!("sum drifted by {err:e} relative"))?;
            ops += 1;
        }
    }
    Ok(format!("worked examples replayed; {ops} random inserts, max sum error {worst:.1e}"))
}

fn order_statistics() -> Outcome {
    let e = |err: dsag_core::Error| err.to_string();
    let exp: Vec<WorkerProfile> = (0..10)
        .map(|i| WorkerProfile::new(i, LatencyDist::Constant(0.0), LatencyDist::from_moments(1.0, 1.0)?, 0, 1.0))
        .collect::<Result<_, _>>()
        .map_err(e)?;
    let mut detail = Vec::new();
    for w in [1usize, 3, 10] {
        let mut rng = ChaCha8Rng::seed_from_u64(w as u64);
        let est = mc_order_stat(&exp, w, 1_000_000, &mut rng).map_err(e)?;
        let truth: f64 = (0..w).map(|j| 1.0 / (10 - j) as f64).sum();
        let rel = (est.mean - truth).abs() / truth;
        ensure(rel <= 0.02, || format!("w={w}: {} vs {truth} ({:.2}%)", est.mean, 100.0 * rel))?;
        detail.push(format!("w={w} {:.2}%", 100.0 * rel));
    }

    let hand = vec![WorkerProfile::deterministic(0, 0.0, 1.0), WorkerProfile::deterministic(1, 0.0, 3.0)];
    let tl = simulate_iterations(&hand, 1, 12, &mut ChaCha8Rng::seed_from_u64(0), 0.0).map_err(e)?;
    let expect: Vec<f64> = (1..=12).map(|t| t as f64).collect();
    ensure(tl.completion_times == expect, || format!("hand case {:?}", tl.completion_times))?;

    // Two groups: five fast and five three-times slower workers.
    let groups: Vec<WorkerProfile> = (0..10)
        .map(|i| {
            let m = if i < 5 { 1.0 } else { 3.0 };
            WorkerProfile::new(i, LatencyDist::Constant(0.01), LatencyDist::from_moments(m, (0.1 * m).powi(2))?, 0, 1.0)
        })
        .collect::<Result<_, _>>()
        .map_err(e)?;
    let pooled = pooled_iid_profiles(&groups).map_err(e)?;
    let mut worst_gap = f64::INFINITY;
    for w in [3usize, 5] {
        let het = mc_order_stat(&groups, w, 100_000, &mut ChaCha8Rng::seed_from_u64(7)).map_err(e)?.mean;
        let iid = mc_order_stat(&pooled, w, 100_000, &mut ChaCha8Rng::seed_from_u64(7)).map_err(e)?.mean;
        let gap = (iid - het).abs() / het;
        worst_gap = worst_gap.min(gap);
        ensure(gap > 0.10, || format!("w={w}: i.i.d. {iid} vs heterogeneous {het}"))?;
    }
    Ok(format!("{}; hand case exact; i.i.d. gap >= {:.0}%", detail.join(", "), 100.0 * worst_gap))
}

fn gradient_correctness() -> Outcome {
    let e = |err: dsag_core::Error| err.to_string();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let data = gaussian(&mut rng, 20, 5);
        let labels = Array1::from_shape_fn(20, |_| if rng.random::<bool>() { 1.0 } else { -1.0 });
        let specs = [
            ProblemSpec::pca(data.clone(), 2, 0.9).map_err(e)?,
            ProblemSpec::logreg(data, labels, 1.0 / 20.0, 0.25).map_err(e)?,
        ];
        for spec in &specs {
            let (d, k) = spec.iterate_shape();
            let v = gaussian(&mut rng, d, k);
            let first = rng.random_range(1..=20);
            let last = rng.random_range(first..=20);
            let analytic = subgradient(spec, &v, first, last).map_err(e)? + regularizer_gradient(spec, &v);
            let f = |v: &Array2<f64>| -> Result<f64, String> {
                Ok(range_loss(spec, v, first, last).map_err(e)? + regularizer(spec, v))
            };
            let mut fd = Array2::zeros((d, k));
            for idx in 0..d * k {
                let (r, c) = (idx / k, idx % k);
                let mut plus = v.clone();
                plus[[r, c]] += h;
                let mut minus = v.clone();
                minus[[r, c]] -= h;
                fd[[r, c]] = (f(&plus)? - f(&minus)?) / (2.0 * h);
            }
            let norm = analytic.iter().map(|x| x * x).sum::<f64>().sqrt();
            let diff = (&analytic - &fd).iter().map(|x| x * x).sum::<f64>().sqrt();
            let rel = diff / norm;
            worst = worst.max(rel);
            ensure(rel <= 1e-5, || format!("relative error {rel:e} on rows {first}..={last}"))?;
        }
    }
    Ok(format!("40 checks, max relative error {worst:.1e}"))
}

fn pca_fixed_point() -> Outcome {
    let e = |err: dsag_core::Error| err.to_string();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data = gaussian(&mut rng, 500, 50);
    let spec = ProblemSpec::pca(data, 3, 1.0).map_err(e)?;
    let oracle = optimum_oracle(&spec).map_err(e)?;
    let target = explained_variance(&spec.data, &oracle.v);
    let mut v = spec.initial_iterate(&mut rng).map_err(e)?;
    let mut iterations = 0;
    for _ in 0..5000 {
        let g = subgradient(&spec, &v, 1, 500).map_err(e)?;
        v = apply_update(&spec, &v, &g, 1.0).map_err(e)?;
        iterations += 1;
    }
    let gap = target - explained_variance(&spec.data, &v);
    ensure(gap.abs() <= 1e-6, || format!("explained variance gap {gap:e} after {iterations} steps"))?;
    Ok(format!("gap {gap:.1e} after {iterations} steps (oracle {target:.6})"))
}

fn straggler_config(method: Method, w: usize) -> Result<ExperimentConfig, String> {
    let mut cfg = load_config(&configs().join("straggler_logreg.toml")).map_err(|e| e.to_string())?;
    cfg.method = method;
    cfg.w = Some(w);
    cfg.budget.target_gap = None;
    cfg.budget.time_s = Some(400.0);
    Ok(cfg)
}

/// Median gap over the second half of the simulated time.
fn plateau(trace: &RunTrace) -> f64 {
    let half = trace.total_time() / 2.0;
    let mut gaps: Vec<f64> = trace.rows.iter().filter(|r| r.time_s >= half).map(|r| r.suboptimality).collect();
    gaps.sort_by(f64::total_cmp);
    gaps[gaps.len() / 2]
}

fn convergence_dichotomy() -> Outcome {
    let e = |err: dsag_core::Error| err.to_string();
    let dsag = run_experiment(&straggler_config(Method::Dsag, 5)?).map_err(e)?;
    let sag5 = run_experiment(&straggler_config(Method::Sag, 5)?).map_err(e)?;
    let sgd5 = run_experiment(&straggler_config(Method::Sgd, 5)?).map_err(e)?;
    let mut sag_all = straggler_config(Method::Sag, 10)?;
    sag_all.budget.time_s = Some(4000.0);
    sag_all.budget.target_gap = Some(1e-6);
    let sag_all = run_experiment(&sag_all).map_err(e)?;

    let t_dsag8 = dsag.time_to_gap(1e-8);
    let p_sag = plateau(&sag5);
    let p_sgd = plateau(&sgd5);
    let t_dsag6 = dsag.time_to_gap(1e-6);
    let t_sag6 = sag_all.time_to_gap(1e-6);
    let speedup = match (t_dsag6, t_sag6) {
        (Some(a), Some(b)) => b / a,
        _ => f64::NAN,
    };
    let parts = [
        (t_dsag8.is_some(), format!("dsag(w=5) 1e-8 at {:.0} s", t_dsag8.unwrap_or(f64::NAN))),
        (p_sag >= 1e-3, format!("sag(w=5) plateau {p_sag:.1e}")),
        (p_sgd >= 1e-3, format!("sgd(w=5) plateau {p_sgd:.1e}")),
        (speedup >= 1.2, format!("sag(w=N)/dsag time to 1e-6 {speedup:.2}x")),
    ];
    let text = parts
        .iter()
        .map(|(ok, s)| format!("{s} [{}]", if *ok { "ok" } else { "below target" }))
        .collect::<Vec<_>>()
        .join("; ");
    ensure(parts.iter().all(|p| p.0), || text.clone())?;
    Ok(text)
}

fn random_scenario(rng: &mut ChaCha8Rng) -> (ProfiledStats, Vec<usize>, Vec<usize>, SimSettings) {
    let n = rng.random_range(2..=16);
    let rows: Vec<usize> = (0..n).map(|_| rng.random_range(50..=400)).collect();
    let p0: Vec<usize> = rows.iter().map(|&r| rng.random_range(5..=r / 5)).collect();
    let workers = p0
        .iter()
        .map(|&p| {
            let e_comm = rng.random_range(0.0..0.2);
            let e_comp = rng.random_range(0.2..2.0);
            let cv_comm: f64 = rng.random_range(0.01..0.2);
            let cv_comp: f64 = rng.random_range(0.01..0.3);
            Some(WorkerStats {
                e_comm,
                v_comm: (cv_comm * e_comm).powi(2),
                e_comp,
                v_comp: (cv_comp * e_comp).powi(2),
                observed_p: p,
                sample_count: 20,
                degenerate: false,
            })
        })
        .collect();
    let mut settings = SimSettings::new(rng.random_range(1..=n));
    settings.margin = 0.02;
    (ProfiledStats { workers }, rows, p0, settings)
}

/// Mean of the per-iteration latency ratio over `t-1..=t+1`.
fn smoothed_ratio(trace: &RunTrace, t: usize) -> f64 {
    let r: Vec<f64> = (t - 1..=t + 1).filter_map(|i| trace.rows[i].latency_ratio()).collect();
    r.iter().sum::<f64>() / r.len() as f64
}

fn load_balancer() -> Outcome {
    let e = |err: dsag_core::Error| err.to_string();
    let det = ProfiledStats {
        workers: [1.0, 2.0]
            .iter()
            .map(|&e_comp| {
                Some(WorkerStats {
                    e_comm: 0.0,
                    v_comm: 0.0,
                    e_comp,
                    v_comp: 0.0,
                    observed_p: 4,
                    sample_count: 10,
                    degenerate: true,
                })
            })
            .collect(),
    };
    let eq = equalize(&det, &[100, 100]).map_err(e)?;
    ensure(eq == vec![2, 4], || format!("equalization gave {eq:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(2025);
    let mut worst_h = f64::INFINITY;
    let mut worst_ratio = 0.0f64;
    for case in 0..50u64 {
        let (stats, rows, p0, settings) = random_scenario(&mut rng);
        let h_min = h_min_baseline(&p0, &stats, &rows, settings, &mut rng).map_err(e)?;
        let sol = optimize(&p0, &stats, &rows, h_min, settings, &mut rng).map_err(e)?;
        // Re-estimate with a fresh seed. Near-equal latencies make the
        // simulated queue mix slowly, so a short run is far noisier than 2%.
        let mut long = settings;
        long.sim_budget = 20_000;
        let mut fresh = ChaCha8Rng::seed_from_u64(case + 1_000_000);
        let (h, _) = contribution(&sol.p, &stats, &rows, long, &mut fresh).map_err(e)?;
        worst_h = worst_h.min(h / h_min);
        ensure(h >= 0.99 * h_min * 0.98, || format!("case {case}: h {h} below h_min {h_min}"))?;
        let eq_ratio = latency_ratio(&stats, &equalize(&stats, &rows).map_err(e)?).map_err(e)?;
        worst_ratio = worst_ratio.max(sol.predicted_ratio / eq_ratio);
        ensure(sol.predicted_ratio <= 1.05 * eq_ratio, || {
            format!("case {case}: ratio {} vs equalization {eq_ratio}", sol.predicted_ratio)
        })?;
    }

    // Three workers slow down at 40 s, three others speed up at 90 s.
    let balanced_cfg = load_config(&configs().join("rebalance_bursts.toml")).map_err(|e| e.to_string())?;
    let mut unbalanced_cfg = balanced_cfg.clone();
    unbalanced_cfg.balancer.enabled = false;
    let balanced = run_experiment(&balanced_cfg).map_err(e)?;
    let unbalanced = run_experiment(&unbalanced_cfg).map_err(e)?;
    let slowdown = |t: &RunTrace| -> Result<usize, String> {
        (1..t.rows.len())
            .find(|&i| t.rows[i - 1].time_s >= 40.0)
            .ok_or_else(|| "run ends before the slowdown".to_string())
    };
    let (sb, su) = (slowdown(&balanced)?, slowdown(&unbalanced)?);
    let window = |s: usize, len: usize| (s + 1).max(2)..=(s + 25).min(len - 2);
    let best_balanced = window(sb, balanced.rows.len())
        .map(|t| (t, smoothed_ratio(&balanced, t)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or("empty window")?;
    let min_unbalanced = window(su, unbalanced.rows.len())
        .map(|t| smoothed_ratio(&unbalanced, t))
        .fold(f64::INFINITY, f64::min);
    ensure(best_balanced.1 < 1.2, || {
        format!("balanced ratio stays at {:.2} or above after the slowdown", best_balanced.1)
    })?;
    ensure(min_unbalanced > 1.4, || format!("unbalanced ratio dips to {min_unbalanced:.2}"))?;
    Ok(format!(
        "[2,4] exact; 50 scenarios, min h/h_min {worst_h:.3}, max ratio vs equalization {worst_ratio:.3}; \
         after slowdown ratio {:.2} at +{} iterations (unbalanced min {min_unbalanced:.2})",
        best_balanced.1,
        best_balanced.0 - sb
    ))
}

fn coded_bound() -> Outcome {
    let e = |err: dsag_core::Error| err.to_string();
    let mut gd_cfg = straggler_config(Method::Gd, 10)?;
    gd_cfg.partitions.subpartitions = Some(1);
    gd_cfg.budget.time_s = Some(150.0);
    let gd = run_experiment(&gd_cfg).map_err(e)?;
    let same = coded_bound_trace(&gd, 1.0).map_err(e)?;
    ensure(same == gd, || "rate 1 changed the trace".into())?;

    let n = 49;
    let rate = 45.0 / 49.0;
    ensure(coded_wait_count(rate, n) == 45, || format!("waits for {}", coded_wait_count(rate, n)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(49);
    let rows: Vec<TraceRow> = (0..=40u64)
        .map(|t| TraceRow {
            iteration: t,
            time_s: 0.0,
            suboptimality: 0.5f64.powi(t as i32),
            xi: 1.0,
            fresh_count: n,
            fresh: vec![true; n],
            p: vec![1; n],
            latency: (0..n)
                .map(|_| (t > 0).then(|| (rng.random_range(0.0..0.1), rng.random_range(0.5..3.0))))
                .collect(),
        })
        .collect();
    let trace = RunTrace {
        num_workers: n,
        rows,
        rebalances: Vec::new(),
    };
    let coded = coded_bound_trace(&trace, rate).map_err(e)?;
    let mut clock = 0.0;
    for (row, out) in trace.rows.iter().zip(&coded.rows) {
        if row.iteration > 0 {
            let mut totals: Vec<f64> = row.latency.iter().flatten().map(|(a, b)| a + b * 49.0 / 45.0).collect();
            totals.sort_by(f64::total_cmp);
            clock += totals[44];
        }
        ensure((out.time_s - clock).abs() <= 1e-12 * clock.max(1.0), || {
            format!("iteration {}: {} vs brute force {clock}", row.iteration, out.time_s)
        })?;
        ensure(out.suboptimality == row.suboptimality, || "suboptimality changed".into())?;
    }
    Ok(format!("rate 1 identity; rate 45/49 matches brute force over {} iterations", trace.rows.len() - 1))
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let d = dir.path();
    let s = |p: PathBuf| p.to_str().unwrap().to_owned();
    let dsag = |args: &[String]| -> Result<(), String> {
        let o = Command::new(env!("CARGO_BIN_EXE_dsag"))
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(o.status.success(), || {
            format!("dsag {} failed: {}", args.join(" "), String::from_utf8_lossy(&o.stderr))
        })
    };

    let mut trace = String::from("worker_id,iteration,total_latency_s,compute_latency_s,timestamp_s\n");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for t in 0..500 {
        for w in 0..4 {
            let comp = rng.random_range(0.5..1.5) * (w + 1) as f64;
            trace.push_str(&format!("{w},{t},{},{comp},{t}\n", comp + rng.random_range(0.0..0.1)));
        }
    }
    std::fs::write(d.join("trace.csv"), trace).map_err(|e| e.to_string())?;

    let straggler = s(configs().join("straggler_logreg.toml"));
    let rebalance = s(configs().join("rebalance_bursts.toml"));
    let pca = s(configs().join("pca_small.json"));
    // Later commands read the outputs of earlier ones (fit_a.csv, run-gd_a.csv).
    let commands: Vec<(&str, Vec<String>)> = vec![
        ("fit", vec!["fit".into(), s(d.join("trace.csv")), "--window".into(), "200".into()]),
        ("predict", vec!["predict".into(), s(d.join("fit_a.csv")), "--w".into(), "3".into(), "--samples".into(), "20000".into(), "--seed".into(), "9".into()]),
        ("predict-iid", vec!["predict".into(), s(d.join("fit_a.csv")), "--w".into(), "3".into(), "--iid".into(), "--seed".into(), "9".into()]),
        ("predict-iterative", vec!["predict".into(), s(d.join("fit_a.csv")), "--w".into(), "2".into(), "--mode".into(), "iterative".into(), "--margin".into(), "0.02".into(), "--seed".into(), "9".into()]),
        ("run", vec!["run".into(), straggler.clone(), "--per-worker".into(), "--seed".into(), "11".into()]),
        ("run-balancer", vec!["run".into(), rebalance, "--per-worker".into()]),
        ("run-pca", vec!["run".into(), pca]),
        ("run-gd", vec!["run".into(), s(d.join("gd.toml")), "--per-worker".into()]),
        ("coded-bound", vec!["coded-bound".into(), s(d.join("run-gd_a.csv")), "--rate".into(), "45/49".into()]),
    ];
    let gd = std::fs::read_to_string(&straggler)
        .map_err(|e| e.to_string())?
        .replace("method = \"dsag\"", "method = \"gd\"")
        .replace("w = 5\n", "")
        .replace("subpartitions = 10", "subpartitions = 1")
        .replace("time_s = 400.0", "time_s = 100.0");
    std::fs::write(d.join("gd.toml"), gd).map_err(|e| e.to_string())?;

    for (name, args) in &commands {
        let mut outputs = Vec::new();
        for copy in ["a", "b"] {
            let out = d.join(format!("{name}_{copy}.csv"));
            let mut full = args.clone();
            full.extend(["--out".to_owned(), s(out.clone())]);
            dsag(&full)?;
            outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
        }
        ensure(!outputs[0].is_empty() && outputs[0] == outputs[1], || format!("{name}: outputs differ"))?;
    }
    Ok(format!("{} commands byte-identical across reruns", commands.len()))
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "partition algebra", limit: Duration::from_secs(10), run: partition_algebra },
        Criterion { id: 2, name: "gradient cache replay", limit: Duration::from_secs(30), run: gradient_cache },
        Criterion { id: 3, name: "order statistics", limit: Duration::from_secs(60), run: order_statistics },
        Criterion { id: 4, name: "gradient correctness", limit: Duration::from_secs(10), run: gradient_correctness },
        Criterion { id: 5, name: "PCA fixed point", limit: Duration::from_secs(60), run: pca_fixed_point },
        Criterion { id: 6, name: "convergence dichotomy", limit: Duration::from_secs(300), run: convergence_dichotomy },
        Criterion { id: 7, name: "load balancer", limit: Duration::from_secs(180), run: load_balancer },
        Criterion { id: 8, name: "coded bound", limit: Duration::from_secs(60), run: coded_bound },
        Criterion { id: 9, name: "CLI determinism", limit: Duration::from_secs(120), run: cli_determinism },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.id.to_string() == *f || c.name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if elapsed > c.limit => Err(format!("{msg}; took {elapsed:.1?}, limit {:?}", c.limit)),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("PASS criterion {} ({}, {:.1?}): {msg}", c.id, c.name, elapsed),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {} ({}, {:.1?}): {msg}", c.id, c.name, elapsed);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
