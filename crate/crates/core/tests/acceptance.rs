//! End-to-end acceptance checks. Each test prints one `ACCEPTANCE [PASS]` or
//! `ACCEPTANCE [FAIL]` line to stderr (visible without `--nocapture`) and
//! fails if its criterion is not met.
//!
//! World: 50×50 cells, 4 patches of 7×7, 40 isolated weeds, up to 12 weeds
//! per cell; sensor: discretised Gaussian with σ = 0.5 + 0.1 w.

mod common;

use common::*;
use fieldswarm::belief::{mapped_threshold, KnowledgeVector};
use fieldswarm::comms::CommRange;
use fieldswarm::config::Duration;
use fieldswarm::runner::{execute, RunOptions, RunOutput, RunSpec};
use fieldswarm::sensor::SensorModel;
use fieldswarm::strategy::pf::wrapped_cauchy;
use fieldswarm::strategy::StrategyConfig;
use fieldswarm::world::WorldConfig;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

const HORIZON_TN: f64 = 10.0;
/// Samples per `T_N`; sample `k` is at `k T_N / 20`.
const PER_TN: usize = 20;
const END: usize = 10 * PER_TN;
const SEEDS: u64 = 20;
const PF_SEEDS: usize = 10;

fn report(name: &str, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "ACCEPTANCE [{verdict}] {name}: {detail}");
    assert!(pass, "{name}: {detail}");
}

fn sensor() -> &'static SensorModel {
    static SENSOR: OnceLock<SensorModel> = OnceLock::new();
    SENSOR.get_or_init(|| SensorModel::synthesize(12, 0.5, 0.1).unwrap())
}

type Slot = Arc<OnceLock<Arc<Vec<RunOutput>>>>;

/// 20-seed batches, computed once per (strategy, N, R) and shared between
/// tests.
fn batch(strategy: StrategyConfig, n_agents: usize, range: CommRange) -> Arc<Vec<RunOutput>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Slot>>> = OnceLock::new();
    let key = format!("{}_{}_{}", strategy.label(), n_agents, range.label());
    let slot = {
        let mut cache = CACHE.get_or_init(Default::default).lock().unwrap();
        cache.entry(key).or_default().clone()
    };
    slot.get_or_init(|| {
        let world = WorldConfig::default();
        let outputs = (0..SEEDS)
            .into_par_iter()
            .map(|seed| {
                let spec = RunSpec {
                    strategy,
                    n_agents,
                    range,
                    seed,
                };
                let out = execute(
                    &world,
                    sensor(),
                    &spec,
                    Duration::TimeOverTn(HORIZON_TN),
                    &RunOptions::default(),
                )
                .unwrap();
                assert!(out.records.len() > END, "{} has {} samples", spec.run_id(), out.records.len());
                out
            })
            .collect();
        Arc::new(outputs)
    })
    .clone()
}

fn greedy(n: usize) -> Arc<Vec<RunOutput>> {
    batch(StrategyConfig::Greedy, n, CommRange::Unbounded)
}

fn baseline(n: usize) -> Arc<Vec<RunOutput>> {
    batch(StrategyConfig::Preplanned { passes: 10 }, n, CommRange::Unbounded)
}

/// Mean MSE per sample index over the given runs.
fn mean_mse(runs: &[RunOutput]) -> Vec<f64> {
    (0..=END)
        .map(|k| runs.iter().map(|r| r.records[k].mse).sum::<f64>() / runs.len() as f64)
        .collect()
}

/// First sample index from which `a` stays strictly below `b` up to the
/// horizon.
fn sustained_crossing(a: &[f64], b: &[f64]) -> Option<usize> {
    let mut k = END + 1;
    while k > 0 && a[k - 1] < b[k - 1] {
        k -= 1;
    }
    (k <= END).then_some(k)
}

fn fmt_tn(k: Option<usize>) -> String {
    k.map_or("never".into(), |k| format!("{:.2} T_N", k as f64 / PER_TN as f64))
}

#[test]
fn math_core_oracles() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for n_w in 1..=4 {
        let thr = mapped_threshold(n_w);
        for model in fixture_models(n_w) {
            let t = table(&model);
            for prior in lattice(n_w + 1, 4) {
                let kv = KnowledgeVector::from_probs(prior.clone(), thr);
                worst = worst.max((kv.entropy() - oracle_entropy(&prior)).abs());
                worst = worst.max((kv.information_gain(&model) - oracle_ig(&t, &prior)).abs());
                for o in 0..model.n_observations() {
                    let mut post = kv.clone();
                    if let (Ok(()), Some(expected)) = (post.bayes_update(&model, o, thr), oracle_posterior(&t, &prior, o)) {
                        for (a, b) in post.probs().iter().zip(&expected) {
                            worst = worst.max((a - b).abs());
                        }
                    }
                }
            }
        }
        let n = n_w as f64;
        let direct = -((n - 1.0) / n * ((n - 1.0) / n).ln() + 1.0 / n * (1.0 / n).ln());
        worst = worst.max((mapped_threshold(n_w) - direct).abs());
    }
    let enumeration_s = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut martingale: f64 = 0.0;
    let mut bound_violations = 0;
    for _ in 0..10_000 {
        let n_w = rng.random_range(1..=12);
        let model = random_model(n_w, &mut rng);
        let prior = random_simplex(n_w + 1, &mut rng);
        let thr = mapped_threshold(n_w);
        let kv = KnowledgeVector::from_probs(prior.clone(), thr);
        let mut mean = vec![0.0; n_w + 1];
        for o in 0..model.n_observations() {
            let pred: f64 = (0..=n_w).map(|w| model.prob(o, w) * prior[w]).sum();
            let mut post = kv.clone();
            if post.bayes_update(&model, o, thr).is_ok() {
                for (m, p) in mean.iter_mut().zip(post.probs()) {
                    *m += pred * p;
                }
            }
        }
        for (m, p) in mean.iter().zip(&prior) {
            martingale = martingale.max((m - p).abs());
        }
        let ig = kv.information_gain(&model);
        if !(ig >= 0.0 && ig <= kv.entropy()) {
            bound_violations += 1;
        }
    }
    let random_s = start.elapsed().as_secs_f64();

    let mut quad: f64 = 0.0;
    for p in [0.0, 0.3, 0.8] {
        let steps = 20_000;
        let h = 2.0 * PI / steps as f64;
        let mut s = wrapped_cauchy(-PI, p) + wrapped_cauchy(PI, p);
        for i in 1..steps {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * wrapped_cauchy(-PI + i as f64 * h, p);
        }
        quad = quad.max((s * h / 3.0 - 1.0).abs());
    }

    let pass = worst < TOL
        && enumeration_s < 1.0
        && martingale < TOL
        && bound_violations == 0
        && random_s < 10.0
        && quad < 1e-6;
    report(
        "math core oracles",
        pass,
        format!(
            "enumeration max err {worst:.1e} in {enumeration_s:.3}s; martingale max err {martingale:.1e}, \
             {bound_violations} IG bound violations in {random_s:.2}s; wrapped Cauchy quadrature err {quad:.1e}"
        ),
    );
}

#[test]
fn greedy_beats_preplanned_baseline() {
    let mut pass = true;
    let mut details = Vec::new();
    for n in [10, 50] {
        let g = mean_mse(&greedy(n));
        let b = mean_mse(&baseline(n));
        let cross = sustained_crossing(&g, &b);
        let ratio = g[END] / b[END];
        let ok = cross.is_some_and(|k| k <= 5 * PER_TN) && g[END] <= b[END] / 3.0;
        pass &= ok;
        details.push(format!(
            "N={n}: G below B from {} (need <= 5 T_N), MSE at 10 T_N G={:.4} B(M=10)={:.4} ratio {:.3} (need <= 1/3)",
            fmt_tn(cross),
            g[END],
            b[END],
            ratio
        ));
    }
    report("greedy vs pre-planned baseline", pass, details.join("; "));
}

/// Per-seed mean MSE over samples in [3 T_N, 10 T_N].
fn time_averaged(runs: &[RunOutput]) -> Vec<f64> {
    runs.iter()
        .map(|r| {
            let window = &r.records[3 * PER_TN..=END];
            window.iter().map(|x| x.mse).sum::<f64>() / window.len() as f64
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn heuristic_ordering() {
    let g = time_averaged(&greedy(50));
    let r = time_averaged(&batch(StrategyConfig::Proportional, 50, CommRange::Unbounded));
    let s1 = time_averaged(&batch(StrategyConfig::Softmax { gamma: 1.0 }, 50, CommRange::Unbounded));

    // Paired bootstrap of mean(S1 - G) over seeds.
    let diffs: Vec<f64> = s1.iter().zip(&g).map(|(s, g)| s - g).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut boot: Vec<f64> = (0..10_000)
        .map(|_| {
            let total: f64 = (0..diffs.len()).map(|_| diffs[rng.random_range(0..diffs.len())]).sum();
            total / diffs.len() as f64
        })
        .collect();
    boot.sort_by(f64::total_cmp);
    let lower = boot[boot.len() / 20];

    let pass = mean(&g) <= mean(&r) && lower >= 0.0;
    report(
        "heuristic ordering",
        pass,
        format!(
            "time-averaged MSE G={:.4} R={:.4} S1={:.4}; bootstrap 5% quantile of S1-G = {:.4} (need >= 0)",
            mean(&g),
            mean(&r),
            mean(&s1),
            lower
        ),
    );
}

#[test]
fn potential_field_does_not_beat_greedy_to_the_baseline() {
    let b = mean_mse(&baseline(50)[..PF_SEEDS]);
    let g_cross = sustained_crossing(&mean_mse(&greedy(50)[..PF_SEEDS]), &b);
    let mut pass = true;
    let mut details = vec![format!("G below B from {}", fmt_tn(g_cross))];
    for sigma_a in [2.0, 8.0] {
        for sigma_r in [2.0, 8.0] {
            let pf = StrategyConfig::PotentialField {
                sigma_a,
                sigma_r,
                beta: 1.0,
            };
            let runs = batch(pf, 50, CommRange::Unbounded);
            let curve = mean_mse(&runs[..PF_SEEDS]);
            let cross = sustained_crossing(&curve, &b);
            let ok = match (cross, g_cross) {
                (None, _) => true,
                (Some(_), None) => false,
                (Some(p), Some(g)) => p >= g,
            };
            pass &= ok;
            details.push(format!(
                "{} from {} (MSE at 10 T_N {:.4})",
                pf.label(),
                fmt_tn(cross),
                curve[END]
            ));
        }
    }
    report("potential-field baseline no earlier than greedy", pass, details.join("; "));
}

#[test]
fn coverage_time_scales_with_swarm_size() {
    let mut means = Vec::new();
    let mut uncovered = 0;
    for n in [10, 30, 50] {
        let runs = greedy(n);
        let tc: Vec<f64> = runs
            .iter()
            .map(|r| {
                r.summary.coverage_over_tn.unwrap_or_else(|| {
                    uncovered += 1;
                    f64::INFINITY
                })
            })
            .collect();
        means.push((n, mean(&tc)));
    }
    let lo = means.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    let hi = means.iter().map(|m| m.1).fold(0.0, f64::max);
    let spread = (hi - lo) / lo;
    let pass = uncovered == 0 && spread < 0.35;
    let listed: Vec<String> = means.iter().map(|(n, m)| format!("N={n}: {m:.3}")).collect();
    report(
        "coverage scaling",
        pass,
        format!(
            "mean T_C/T_N {}; spread {:.1}% (need < 35%); {uncovered} runs not covered",
            listed.join(", "),
            100.0 * spread
        ),
    );
}

#[test]
fn correlation_builds_up() {
    let runs = greedy(50);
    let at = |k: usize| -> Option<f64> {
        let rs: Option<Vec<f64>> = runs.iter().map(|r| r.records[k].pearson_r).collect();
        rs.map(|v| mean(&v))
    };
    let r3 = at(3 * PER_TN);
    let r10 = at(END);
    let pass = r3.is_some_and(|r| r > 0.0) && r10.is_some_and(|r| r > 0.5);
    report(
        "correlation growth",
        pass,
        format!("mean r at 3 T_N = {r3:?} (need > 0), at 10 T_N = {r10:?} (need > 0.5)"),
    );
}

#[test]
fn limited_range_degrades_mapping() {
    let final_mse = |runs: &[RunOutput]| mean(&runs.iter().map(|r| r.records[END].mse).collect::<Vec<_>>());
    let range = CommRange::Cells(10.0);
    let inf10 = final_mse(&greedy(10));
    let lim: Vec<(usize, f64)> = [10, 30, 50]
        .into_iter()
        .map(|n| (n, final_mse(&batch(StrategyConfig::Greedy, n, range))))
        .collect();
    let ratio = lim[0].1 / inf10;
    let monotone = lim.windows(2).all(|w| w[1].1 < w[0].1);
    let pass = ratio >= 2.0 && monotone;
    let listed: Vec<String> = lim.iter().map(|(n, m)| format!("N={n}: {m:.4}")).collect();
    report(
        "limited communication degradation",
        pass,
        format!(
            "R=10 MSE at 10 T_N {}; N=10 ratio to R=inf ({inf10:.4}) = {ratio:.2} (need >= 2); monotone in N: {monotone}",
            listed.join(", ")
        ),
    );
}

#[test]
fn metrics_are_byte_identical_across_executions() {
    let config = r#"{
        "strategies": [{"kind": "G"}, {"kind": "S", "gamma": 1}, {"kind": "PF", "sigma_a": 2, "sigma_r": 8, "beta": 1}, {"kind": "B", "passes": 3}],
        "n_agents": [10],
        "comm_ranges": ["inf", 10],
        "duration": {"time_over_tn": 1.5},
        "seeds": [3, 4],
        "output_dir": "out"
    }"#;
    let exe = env!("CARGO_BIN_EXE_fieldswarm");
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.json");
        std::fs::write(&path, config).unwrap();
        let status = std::process::Command::new(exe)
            .args(["run", path.to_str().unwrap(), "--jobs", "2"])
            .env("RUST_LOG", "warn")
            .status()
            .unwrap();
        assert!(status.success());
        let out = dir.path().join("out");
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(out.join("runs"))
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
            .collect();
        files.sort();
        files.push(("aggregate.csv".into(), std::fs::read(out.join("aggregate.csv")).unwrap()));
        outputs.push(files);
    }
    let n_files = outputs[0].len();
    let pass = n_files == 17 && outputs[0] == outputs[1];
    report(
        "determinism",
        pass,
        format!("{n_files} CSV files compared across two executions, identical: {}", outputs[0] == outputs[1]),
    );
}
