//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.
//!
//! Expected values are recomputed here from the closed forms rather than
//! taken from the library under test.

mod common;

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use verilab_core::bounds::{
    bound_report, posterior_correct, required_suites, simulate_selection, single_test_threshold, suite_pass_probs,
    wrong_selection_bound, BoundInputs, SimConfig,
};
use verilab_core::harness::{load_corpus, run_pipeline, CorpusRequirements, RunConfig};
use verilab_core::metrics::{
    halstead_counts, halstead_difficulty_raw, maintainability_index, sample_difficulty, CorpusNormalizer,
};
use verilab_core::minilang::lex;
use verilab_core::rewards::{
    functionality_reward_augmented, functionality_reward_base, group_advantages, grpo_objective, kl_estimate,
    shaped_coverage_reward, total_reward, GrpoParams, OutcomeClass, PolicyTrace, ShapingParams,
};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

const Q: f64 = 0.7132;
const Q_PRIME: f64 = 0.7693;

fn bound_reproduction() -> Check {
    let start = Instant::now();
    let m85 = required_suites(Q, Q_PRIME, 100, 0.97, 0.85).map_err(|e| e.to_string())?.m;
    let m70 = required_suites(Q, Q_PRIME, 100, 0.97, 0.70).map_err(|e| e.to_string())?.m;
    let report = bound_report(BoundInputs {
        q: Q,
        q_prime: Q_PRIME,
        p: 0.85,
        c: 0.97,
        n: 100,
        m: 100,
        k: 1,
        w: 1.0 - Q,
        delta: 1.0 - Q_PRIME,
    })
    .map_err(|e| e.to_string())?;
    within(start.elapsed(), Duration::from_secs(1))?;

    let oracle = |p: f64| 2.0 * ((1.0 - Q) / (1.0 - Q_PRIME) * 100.0).ln() / ((1.97 * p) - 1.0).powi(2);
    ensure((m85 - oracle(0.85)).abs() < 1e-9, || format!("M(0.85) = {m85}, closed form {}", oracle(0.85)))?;
    ensure((19.0..=23.0).contains(&m85), || format!("M(0.85) = {m85} outside [19, 23]"))?;
    ensure(m70 / m85 > 3.0, || format!("M(0.70)/M(0.85) = {}", m70 / m85))?;
    ensure(report.required_m == Some(m85), || "bound report disagrees with required_suites".into())?;
    Ok(format!("M(0.85) = {m85:.4}, M(0.70) = {m70:.4}, ratio {:.3}", m70 / m85))
}

fn posterior_grid() -> Check {
    let start = Instant::now();
    let axis: Vec<f64> = (1..=50).map(|i| i as f64 / 51.0).collect();
    let mut boundary = 0;
    for &q in &axis {
        for &c in &axis {
            let threshold = 1.0 / (1.0 + c);
            ensure(single_test_threshold(c) == threshold, || format!("threshold at c = {c}"))?;
            let at = posterior_correct(q, threshold, c);
            ensure((at - q).abs() <= 1e-12, || format!("boundary q={q} c={c}: {at}"))?;
            boundary += 1;
            for &p in &axis {
                let raised = posterior_correct(q, p, c) > q;
                if (p - threshold).abs() < 1e-12 {
                    continue;
                }
                ensure(raised == (p > threshold), || format!("q={q} p={p} c={c}"))?;
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("125000 grid points, {boundary} boundary checks"))
}

fn monte_carlo() -> Check {
    let start = Instant::now();
    let mut configs = Vec::new();
    for n in [4u32, 10, 25, 50] {
        for (p, c, k) in [(0.85, 0.97, 1u32), (0.7, 0.9, 1), (0.9, 0.8, 2), (0.75, 0.97, 1)] {
            for w in [0.3, 0.5] {
                let model = suite_pass_probs(p, c, k);
                let margin = model.alpha_c - model.alpha_w;
                // Smallest M whose union bound is at most 0.05, so the bound is nearly tight.
                let m = (1..=2000u32)
                    .find(|&m| w * n as f64 * (-(m as f64) * margin * margin / 2.0).exp() <= 0.05)
                    .ok_or("no admissible M")?;
                configs.push((n, w, m, model));
            }
        }
    }
    ensure(configs.len() >= 20, || format!("only {} configs", configs.len()))?;
    let mut worst: f64 = 0.0;
    for (i, &(n, w, m, model)) in configs.iter().enumerate() {
        let bound = wrong_selection_bound(n, w, m, model.alpha_c - model.alpha_w);
        ensure(bound <= 0.05, || format!("config {i} bound {bound}"))?;
        let out = simulate_selection(&SimConfig {
            trials: 10_000,
            seed: 0xACCE_0000 + i as u64,
            alpha_c: model.alpha_c,
            alpha_w: model.alpha_w,
            n,
            w,
            m,
        })
        .map_err(|e| e.to_string())?;
        ensure(out.wilson_low <= bound, || {
            format!("config {i} (n={n} w={w} m={m}): rate {} above bound {bound} beyond Wilson slack", out.wrong_rate)
        })?;
        worst = worst.max(out.wrong_rate / bound);
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!("{} configs, max rate/bound {worst:.3}", configs.len()))
}

fn shaping() -> Check {
    for alpha in [0.1, 1.0, 3.0, 10.0] {
        let params = ShapingParams::new(alpha).map_err(|e| e.to_string())?;
        ensure(shaped_coverage_reward(0.0, params) == 0.0, || format!("r(0) at alpha {alpha}"))?;
        ensure(shaped_coverage_reward(1.0, params) == 1.0, || format!("r(1) at alpha {alpha}"))?;
        let grid: Vec<f64> = (0..1000).map(|i| shaped_coverage_reward(i as f64 / 999.0, params)).collect();
        for i in 1..grid.len() {
            ensure(grid[i] > grid[i - 1], || format!("not increasing at {i}, alpha {alpha}"))?;
        }
        for i in 1..grid.len() - 1 {
            let second = grid[i + 1] - 2.0 * grid[i] + grid[i - 1];
            ensure(second >= -1e-15, || format!("not convex at {i}, alpha {alpha}: {second}"))?;
            let cov = i as f64 / 999.0;
            ensure(grid[i] < cov, || format!("above the diagonal at {cov}, alpha {alpha}"))?;
        }
        let oracle = ((alpha * 0.3).exp() - 1.0) / (alpha.exp() - 1.0);
        ensure((shaped_coverage_reward(0.3, params) - oracle).abs() < 1e-12, || format!("r(0.3) at alpha {alpha}"))?;
    }
    let tiny = ShapingParams::new(1e-12).map_err(|e| e.to_string())?;
    for i in 0..=1000 {
        let cov = i as f64 / 1000.0;
        let r = shaped_coverage_reward(cov, tiny);
        ensure((r - cov).abs() < 1e-6, || format!("alpha 1e-12 at {cov}: {r}"))?;
    }
    Ok("endpoints, monotone, convex, small-alpha limit".into())
}

fn reward_table() -> Check {
    let ln2 = 2f64.ln();
    let params = ShapingParams::new(ln2).map_err(|e| e.to_string())?;
    let d = 1.0 - 0.639130;
    let passed_aug = (2f64.sqrt() - 1.0) * (1.0 + d);
    let cases: [(&str, f64, f64, f64); 9] = [
        ("base error", functionality_reward_base(OutcomeClass::Error), -2.0, 0.0),
        ("base failure", functionality_reward_base(OutcomeClass::Failure), -1.5, 0.0),
        ("base passed", functionality_reward_base(OutcomeClass::Passed { cov: 0.75 }), 0.75, 0.0),
        ("augmented error", functionality_reward_augmented(OutcomeClass::Error, params, d), -2.0, 0.0),
        ("augmented failure", functionality_reward_augmented(OutcomeClass::Failure, params, d), -1.0 - (1.0 - d), 1e-15),
        ("augmented passed", functionality_reward_augmented(OutcomeClass::Passed { cov: 0.5 }, params, d), passed_aug, 1e-12),
        ("total syntax", total_reward(-1.0, None).map_err(|e| e.to_string())?, -1.0, 0.0),
        ("total error", total_reward(1.0, Some(-2.0)).map_err(|e| e.to_string())?, -1.0, 0.0),
        ("total passed", total_reward(1.0, Some(passed_aug)).map_err(|e| e.to_string())?, 1.0 + passed_aug, 1e-15),
    ];
    for (name, got, want, tol) in cases {
        ensure((got - want).abs() <= tol, || format!("{name}: {got} vs {want}"))?;
    }
    ensure((passed_aug - 0.563690).abs() < 1e-6, || format!("worked example {passed_aug}"))?;
    let continuity = functionality_reward_augmented(OutcomeClass::Failure, params, 0.5);
    ensure(continuity == functionality_reward_base(OutcomeClass::Failure), || format!("D = 0.5 gives {continuity}"))?;
    Ok("9 values, D = 0.5 failure = -1.5".into())
}

fn grpo() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for g in 0..1000 {
        let size = rng.random_range(2..=16);
        let rewards: Vec<f64> = (0..size).map(|_| rng.random_range(-3.0..3.0)).collect();
        let adv = group_advantages(&rewards, 1e-8).map_err(|e| e.to_string())?;
        let n = adv.len() as f64;
        let mean = adv.iter().sum::<f64>() / n;
        let sd = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
        ensure(mean.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9, || format!("group {g}: mean {mean}, sd {sd}"))?;
    }

    let params = GrpoParams::default();
    let trace = |ratio: f64| PolicyTrace {
        logp_new: vec![ratio.ln() - 1.0],
        logp_old: vec![-1.0],
        logp_ref: vec![ratio.ln() - 1.0],
    };
    let j = grpo_objective(&[trace(1.5), trace(1.5)], &[1.0, -1.0], &params).map_err(|e| e.to_string())?;
    ensure((j + 0.15).abs() < 1e-12, || format!("worked example gives {j}"))?;

    for _ in 0..1000 {
        let len = rng.random_range(1..=8);
        let a: Vec<f64> = (0..len).map(|_| rng.random_range(-5.0..0.0)).collect();
        let mut b = a.clone();
        ensure(kl_estimate(&a, &b).map_err(|e| e.to_string())? == 0.0, || "identical log-probs".into())?;
        let t = rng.random_range(0..len);
        b[t] -= rng.random_range(0.01..2.0);
        let kl = kl_estimate(&a, &b).map_err(|e| e.to_string())?;
        ensure(kl > 0.0, || format!("kl {kl} for distinct log-probs"))?;
    }

    for _ in 0..200 {
        let size = rng.random_range(2..=6);
        let traces: Vec<PolicyTrace> = (0..size)
            .map(|_| {
                let len = rng.random_range(1..=6);
                let mut draw = || (0..len).map(|_| rng.random_range(-4.0..-0.1)).collect::<Vec<f64>>();
                PolicyTrace {
                    logp_new: draw(),
                    logp_old: draw(),
                    logp_ref: draw(),
                }
            })
            .collect();
        let rewards: Vec<f64> = (0..size).map(|_| rng.random_range(-2.0..2.0)).collect();
        let adv = group_advantages(&rewards, 1e-8).map_err(|e| e.to_string())?;
        let base = grpo_objective(&traces, &adv, &params).map_err(|e| e.to_string())?;
        let shifted: Vec<PolicyTrace> = traces
            .iter()
            .map(|t| {
                let shift: Vec<f64> = (0..t.logp_new.len()).map(|_| rng.random_range(-1.0..0.0)).collect();
                let add = |v: &[f64]| v.iter().zip(&shift).map(|(x, s)| x + s).collect::<Vec<f64>>();
                PolicyTrace {
                    logp_new: add(&t.logp_new),
                    logp_old: add(&t.logp_old),
                    logp_ref: add(&t.logp_ref),
                }
            })
            .collect();
        let moved = grpo_objective(&shifted, &adv, &params).map_err(|e| e.to_string())?;
        ensure((base - moved).abs() < 1e-9, || format!("shift changed J: {base} vs {moved}"))?;
    }
    Ok("1000 groups standardized, J = -0.15, KL >= 0, shift invariant".into())
}

fn static_metrics() -> Check {
    let tokens = lex("x = a + a * b;").map_err(|e| e.to_string())?;
    let counts = halstead_counts(&tokens);
    ensure((counts.eta1, counts.n1, counts.eta2, counts.n2) == (3, 3, 3, 4), || format!("{counts:?}"))?;
    let d_hat = halstead_difficulty_raw(&counts);
    ensure(d_hat == 2.0, || format!("D_hat = {d_hat}"))?;

    let mi = maintainability_index(100.0, 2, 10, 0.0).map_err(|e| e.to_string())?;
    let oracle = 100.0 * (171.0 - 5.2 * 100f64.ln() - 0.23 * 2.0 - 16.2 * 10f64.ln()) / 171.0;
    ensure((mi - 63.9130).abs() <= 1e-3 && (mi - oracle).abs() < 1e-12, || format!("MI = {mi}, closed form {oracle}"))?;

    let d = sample_difficulty(0.25, 0.49);
    ensure(d == 0.35, || format!("D = {d}"))?;

    let corpus: Vec<f64> = (1..=100).map(f64::from).collect();
    let norm = CorpusNormalizer::fit(&corpus).map_err(|e| e.to_string())?;
    ensure(norm.d_hat_95 == 95.0, || format!("D_hat_95 = {}", norm.d_hat_95))?;
    ensure(norm.normalize(200.0) == 1.0 && norm.normalize(47.5) == 0.5, || "clip".into())?;
    Ok(format!("D_hat 2.0, MI {mi:.4}, D 0.35, D_hat_95 95"))
}

fn coverage_oracle() -> Check {
    let start = Instant::now();
    let mut with_branches = 0;
    for seed in 0..200u64 {
        let g = common::Gen::new(seed, 3).program();
        common::check_against_interpreter(&g).map_err(|e| format!("seed {seed}: {e}"))?;
        with_branches += usize::from(g.sites > 0);
    }
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("200/200 programs agree ({with_branches} with branches)"))
}

fn read_tree(root: &Path) -> Vec<(std::path::PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn quality_sums(v: &serde_json::Value, out: &mut Vec<f64>) {
    match v {
        serde_json::Value::Object(map) => {
            if let (Some(pr), Some(fr), Some(er)) = (map.get("pr"), map.get("fr"), map.get("er")) {
                out.push(pr.as_f64().unwrap_or(f64::NAN) + fr.as_f64().unwrap_or(f64::NAN) + er.as_f64().unwrap_or(f64::NAN));
            }
            map.values().for_each(|x| quality_sums(x, out));
        }
        serde_json::Value::Array(items) => items.iter().for_each(|x| quality_sums(x, out)),
        _ => {}
    }
}

fn pipeline_determinism() -> Check {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let corpus = load_corpus(&fixtures.join("corpus.json"), CorpusRequirements { candidates: true, responses: false })
        .map_err(|e| e.to_string())?;
    let mut trees = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut cfg = RunConfig::load(&fixtures.join("run.toml")).map_err(|e| e.to_string())?;
        cfg.out_dir = dir.path().to_path_buf();
        let summary = run_pipeline(&cfg, &corpus).map_err(|e| e.to_string())?;
        ensure(summary.failed.is_empty(), || format!("failed problems {:?}", summary.failed))?;
        trees.push(read_tree(dir.path()));
    }
    ensure(trees[0] == trees[1], || "output trees differ".into())?;
    let mut sums = Vec::new();
    for (_, bytes) in &trees[0] {
        let v: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
        quality_sums(&v, &mut sums);
    }
    ensure(!sums.is_empty(), || "no quality reports emitted".into())?;
    for s in &sums {
        ensure((s - 1.0).abs() <= 1e-9, || format!("pr+fr+er = {s}"))?;
    }
    Ok(format!("{} files identical, {} quality reports conserve", trees[0].len(), sums.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("bound reproduction", bound_reproduction),
        ("posterior/threshold grid", posterior_grid),
        ("monte carlo vs analytic bound", monte_carlo),
        ("coverage shaping", shaping),
        ("reward table", reward_table),
        ("grpo math", grpo),
        ("static metrics", static_metrics),
        ("coverage oracle", coverage_oracle),
        ("pipeline determinism", pipeline_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = check();
        let ms = start.elapsed().as_millis();
        match result {
            Ok(detail) => println!("PASS  {name:<32} {detail} [{ms} ms]"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<32} {why} [{ms} ms]");
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
