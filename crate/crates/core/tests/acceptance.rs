//! Acceptance gate. Prints one PASS or FAIL line per criterion and exits
//! non-zero when any criterion fails.
//!
//! Runs with `harness = false` so the lines are printed even when every
//! check passes.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use veracity::conformal::bh_procedure;
use veracity::filter::{filter_errors, FilterConfig, GridSearch};
use veracity::metrics::{auprc, auroc, lift_at_k, loo_prediction_error, LooMode};
use veracity::models::{BoostingConfig, ForestConfig};
use veracity::pipeline::ScoringParams;
use veracity::scores::{arithmetic_score, geometric_score, residual_score};
use veracity::simbench::{
    conformal_validity, corollary1_probability, run_conformal_experiment, run_filter_experiment, ConformalTable,
    Noise, Setting, SimConfig,
};
use veracity::uncertainty::UncertaintyEstimates;
use veracity::{inject_corruption, CorruptionSpec, RegressorSpec, ScoreMethod};

const METHODS: [ScoreMethod; 3] = [ScoreMethod::Residual, ScoreMethod::Arithmetic, ScoreMethod::Geometric];

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

/// Forest with 40-row leaves, used for the residual-size model everywhere.
fn smooth_forest() -> RegressorSpec {
    RegressorSpec::random_forest(ForestConfig { min_samples_leaf: 40, ..Default::default() }, 0).unwrap()
}

fn conformal_regressor() -> RegressorSpec {
    RegressorSpec::random_forest(ForestConfig::default(), 0)
        .unwrap()
        .with_residual_model(smooth_forest())
        .unwrap()
}

fn boosting() -> RegressorSpec {
    RegressorSpec::boosting(BoostingConfig::default(), 0)
        .unwrap()
        .with_residual_model(smooth_forest())
        .unwrap()
}

fn conformal_config(setting: Setting, strengths: Vec<f64>) -> SimConfig {
    let mut cfg = SimConfig::new(setting, conformal_regressor());
    cfg.n = 200;
    cfg.runs = 50;
    cfg.alpha = 0.1;
    cfg.strengths = strengths;
    cfg.methods = METHODS.to_vec();
    cfg.seed = 2024;
    cfg
}

fn cell(t: &ConformalTable, m: ScoreMethod, a: f64) -> &veracity::simbench::ConformalCell {
    t.cell(m, a).expect("cell computed")
}

fn criterion_1_and_3(clean: &ConformalTable, elapsed: Duration) -> (Verdict, Verdict) {
    let mut pass1 = elapsed <= Duration::from_secs(600);
    let mut d1 = Vec::new();
    for a in [-3.0, 3.0] {
        let sa = cell(clean, ScoreMethod::Arithmetic, a);
        let sr = cell(clean, ScoreMethod::Residual, a);
        let gap = sa.power.mean - sr.power.mean;
        pass1 &= gap >= 0.20 && sa.fdr.mean <= 0.25;
        d1.push(format!(
            "a={a:+}: power a {:.3} r {:.3} gap {gap:.3}, FDR a {:.3}",
            sa.power.mean, sr.power.mean, sa.fdr.mean
        ));
    }
    d1.push(format!("{:.0}s", elapsed.as_secs_f64()));

    let mut pass3 = true;
    let mut d3 = Vec::new();
    for a in [-2.0, 2.0] {
        let sa = cell(clean, ScoreMethod::Arithmetic, a).auprc.mean;
        let sr = cell(clean, ScoreMethod::Residual, a).auprc.mean;
        pass3 &= sa - sr >= 0.15;
        d3.push(format!("a={a:+}: AUPRC a {sa:.3} r {sr:.3} gap {:.3}", sa - sr));
    }
    (Verdict::new(pass1, d1.join("; ")), Verdict::new(pass3, d3.join("; ")))
}

fn criterion_2(dirty: &ConformalTable) -> Verdict {
    let mut pass = true;
    let mut d = Vec::new();
    for &m in &METHODS {
        for a in [-3.0, 3.0] {
            let p = cell(dirty, m, a).power.mean;
            pass &= p <= 0.15;
            d.push(format!("{}@{a:+} {p:.3}", m.name()));
        }
    }
    Verdict::new(pass, format!("power {}", d.join(", ")))
}

fn criterion_4() -> Verdict {
    let mut pass = true;
    let mut d = Vec::new();
    for setting in [Setting::One, Setting::Two] {
        let mut cfg = SimConfig::new(setting, boosting());
        cfg.runs = 50;
        cfg.strengths = vec![-3.0, 3.0];
        cfg.methods = METHODS.to_vec();
        cfg.filter_search = GridSearch::CoarseToFine;
        cfg.seed = 4;
        let t = run_filter_experiment(&cfg).expect("filter study runs");
        for c in &t.cells {
            let ok = c.error_fraction_after.mean < 0.07
                && (0.05..=0.25).contains(&c.removed_fraction.mean)
                && c.auprc_after.mean >= c.auprc_before.mean - 0.02
                && c.improved_share >= 0.70;
            pass &= ok;
            d.push(format!(
                "S{}/{}@{:+}: err {:.3} removed {:.3} AUPRC {:.3}->{:.3} improved {:.2}{}",
                t.setting,
                c.method.name(),
                c.strength,
                c.error_fraction_after.mean,
                c.removed_fraction.mean,
                c.auprc_before.mean,
                c.auprc_after.mean,
                c.improved_share,
                if ok { "" } else { " <-" }
            ));
        }
    }
    Verdict::new(pass, d.join("; "))
}

fn criterion_5() -> Verdict {
    let est: Vec<_> = [0.0, 1.0, 2.0, 3.0]
        .iter()
        .enumerate()
        .map(|(i, &a)| corollary1_probability(a, 1_000_000, 500 + i as u64).unwrap())
        .collect();
    let mut pass = (est[0].estimate - 0.5).abs() <= 0.01 && est[3].estimate >= 0.9;
    for w in est.windows(2) {
        let se = (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt();
        pass &= w[1].estimate - w[0].estimate > 2.0 * se;
    }
    let vals: Vec<String> = est.iter().map(|e| format!("{:.4}", e.estimate)).collect();
    Verdict::new(pass, format!("P at a=0..3: {}", vals.join(", ")))
}

/// Descending score, then ascending index.
fn order(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    idx
}

fn brute_auroc(s: &[f64], l: &[bool]) -> f64 {
    let (mut num, mut den) = (0u64, 0u64);
    for i in 0..s.len() {
        for j in 0..s.len() {
            if l[i] && !l[j] {
                den += 2;
                num += match s[i].partial_cmp(&s[j]).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
    }
    num as f64 / den as f64
}

/// Step integral of precision over recall.
fn brute_auprc(s: &[f64], l: &[bool]) -> f64 {
    let pos = l.iter().filter(|&&x| x).count() as f64;
    let o = order(s);
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for k in 1..=o.len() {
        let tp = o[..k].iter().filter(|&&i| l[i]).count() as f64;
        let recall = tp / pos;
        area += (recall - prev_recall) * (tp / k as f64);
        prev_recall = recall;
    }
    area
}

fn brute_lift(s: &[f64], l: &[bool], k: usize) -> f64 {
    let o = order(s);
    let hits = o[..k].iter().filter(|&&i| l[i]).count() as f64;
    let base = l.iter().filter(|&&x| x).count() as f64 / l.len() as f64;
    hits / k as f64 / base
}

fn criterion_6() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst_pr, mut worst_lift, mut auroc_mismatch) = (0.0f64, 0.0f64, 0usize);
    let mut instances = 0;
    while instances < 200 {
        let n = rng.random_range(2..=50);
        let levels = rng.random_range(1..=n.max(2));
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 * 0.37 - 1.0).collect();
        let l: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        if !l.iter().any(|&x| x) || l.iter().all(|&x| x) {
            continue;
        }
        instances += 1;
        if auroc(&s, &l).unwrap() != brute_auroc(&s, &l) {
            auroc_mismatch += 1;
        }
        worst_pr = worst_pr.max((auprc(&s, &l).unwrap() - brute_auprc(&s, &l)).abs());
        for k in 1..=n {
            worst_lift = worst_lift.max((lift_at_k(&s, &l, k).unwrap() - brute_lift(&s, &l, k)).abs());
        }
    }
    Verdict::new(
        auroc_mismatch == 0 && worst_pr <= 1e-12 && worst_lift <= 1e-12,
        format!("{instances} instances: AUROC mismatches {auroc_mismatch}, max AUPRC diff {worst_pr:.1e}, max lift diff {worst_lift:.1e}"),
    )
}

/// Pairs of rows `(i, j)` whose residuals satisfy `r_i < r_j` and whose
/// denominators satisfy the premise for the given combination.
fn criterion_7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pairs = 100_000;
    let mut checked = [0usize; 2];
    let mut violations = [0usize; 2];
    let draw = |rng: &mut ChaCha8Rng| 10f64.powf(rng.random_range(-3.0..3.0));
    for (which, combine) in [(0usize, (|u: f64, s: f64| u + s) as fn(f64, f64) -> f64), (1, |u: f64, s: f64| u * s)] {
        let (mut r, mut u, mut s) = (Vec::new(), Vec::new(), Vec::new());
        while r.len() < 2 * pairs {
            let rj = draw(&mut rng);
            let ri = rj * rng.random_range(0.0..1.0);
            let (uj, sj) = (draw(&mut rng), draw(&mut rng));
            // Row i gets at least row j's denominator: sometimes exactly equal.
            let grow = if rng.random_bool(0.2) { 1.0 } else { 1.0 + rng.random_range(0.0..3.0) };
            let w = rng.random_range(0.05..0.95);
            let (ui, si) = if which == 0 {
                let total = (uj + sj) * grow;
                (total * w, total * (1.0 - w))
            } else {
                let prod = uj * sj * grow;
                let ui = prod.powf(w);
                (ui, prod / ui)
            };
            if !(ri < rj) || combine(ui, si) < combine(uj, sj) {
                continue;
            }
            r.extend([ri, rj]);
            u.extend([ui, uj]);
            s.extend([si, sj]);
        }
        let sr = residual_score(&r, &vec![0.0; r.len()]).unwrap();
        let unc = UncertaintyEstimates::with_floors(u, s, 20, (1e-300, 1e-300)).unwrap();
        let scores = if which == 0 { arithmetic_score(&sr, &unc) } else { geometric_score(&sr, &unc) }.unwrap();
        for p in 0..pairs {
            checked[which] += 1;
            if !(scores.values[2 * p] < scores.values[2 * p + 1]) {
                violations[which] += 1;
            }
        }
    }
    Verdict::new(
        violations == [0, 0],
        format!(
            "{} arithmetic and {} geometric pairs, violations {} and {}",
            checked[0], checked[1], violations[0], violations[1]
        ),
    )
}

fn criterion_8() -> Verdict {
    let mut cfg = SimConfig::new(Setting::Two, conformal_regressor());
    cfg.runs = 50;
    cfg.seed = 8;
    let alphas = [0.05, 0.1, 0.2];
    let slack = 3.0 / (cfg.n as f64).sqrt();
    let mut pass = true;
    let mut d = Vec::new();
    for m in METHODS {
        let rates = conformal_validity(&cfg, m, &alphas).expect("validity study runs");
        let means: Vec<f64> = (0..alphas.len())
            .map(|j| rates.iter().map(|r| r[j]).sum::<f64>() / rates.len() as f64)
            .collect();
        for (a, mean) in alphas.iter().zip(&means) {
            pass &= *mean <= a + slack;
        }
        let txt: Vec<String> = means.iter().map(|v| format!("{v:.3}")).collect();
        d.push(format!("{} {}", m.name(), txt.join("/")));
    }
    Verdict::new(pass, format!("P(p<=a) for a=0.05/0.1/0.2 (slack {slack:.3}): {}", d.join(", ")))
}

/// Largest `k` with at least `k` p-values at or below `k * alpha / m`; every
/// p-value under that cut is rejected.
fn brute_bh(p: &[f64], alpha: f64) -> Vec<usize> {
    let m = p.len();
    let cut = (1..=m).filter(|&k| p.iter().filter(|&&v| v <= k as f64 * alpha / m as f64).count() >= k).max();
    match cut {
        Some(k) => (0..m).filter(|&j| p[j] <= k as f64 * alpha / m as f64).collect(),
        None => Vec::new(),
    }
}

fn criterion_9() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut mismatches = 0;
    let mut rejections = 0;
    for _ in 0..500 {
        let m = rng.random_range(1..=30);
        let grid = rng.random_bool(0.5);
        let p: Vec<f64> = (0..m)
            .map(|_| {
                if grid {
                    rng.random_range(1..=40) as f64 / 201.0
                } else if rng.random_bool(0.3) {
                    rng.random_range(0.0..0.01)
                } else {
                    rng.random_range(0.0..1.0)
                }
            })
            .collect();
        let alpha = [0.05, 0.1, 0.2, rng.random_range(0.0..1.0)][rng.random_range(0..4)];
        let got = bh_procedure(&p, alpha).unwrap();
        rejections += got.len();
        if got != brute_bh(&p, alpha) {
            mismatches += 1;
        }
    }
    Verdict::new(mismatches == 0, format!("500 vectors, {mismatches} mismatches, {rejections} rejections in total"))
}

fn criterion_10() -> Verdict {
    let reg = boosting();
    let mode = LooMode::KfoldApprox(10);
    let mut before = 0.0;
    let mut after = [0.0; 3];
    let mut per_fixture = Vec::new();
    for seed in 1..=6u64 {
        let clean = Setting::Two.generate(200, Noise::default(), seed).unwrap();
        let (ds, _) = inject_corruption(&clean, &CorruptionSpec { fraction: 0.1, strength: 3.0, seed }).unwrap();
        let e = loo_prediction_error(&reg, &ds, mode, 1).unwrap();
        before += e;
        let mut ratios = Vec::new();
        for (j, m) in METHODS.into_iter().enumerate() {
            let cfg = FilterConfig {
                scoring: ScoringParams::with_method(m),
                search: GridSearch::CoarseToFine,
                seed: 2,
                ..Default::default()
            };
            let out = filter_errors(&reg, &ds, &cfg).unwrap();
            let kept = ds.subset(&out.retained(ds.n()));
            let e_after = loo_prediction_error(&reg, &kept, mode, 1).unwrap();
            after[j] += e_after;
            ratios.push(format!("{:.2}", e_after / e));
        }
        per_fixture.push(ratios.join("/"));
    }
    let ratios: Vec<f64> = after.iter().map(|a| a / before).collect();
    Verdict::new(
        ratios.iter().all(|&r| r <= 0.7),
        format!(
            "pooled E_p after/before r {:.3} a {:.3} g {:.3} (per fixture {})",
            ratios[0],
            ratios[1],
            ratios[2],
            per_fixture.join(", ")
        ),
    )
}

fn main() {
    let mut results: Vec<(u8, &str, Verdict)> = Vec::new();
    let mut report = |n: u8, name: &'static str, v: Verdict, t: Instant| {
        println!(
            "criterion {n:>2} {name:<28} {} ({:.1}s) {}",
            if v.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            v.detail
        );
        results.push((n, name, v));
    };

    let t = Instant::now();
    let clean = run_conformal_experiment(&conformal_config(Setting::One, vec![-3.0, -2.0, 2.0, 3.0]), false)
        .expect("conformal study runs");
    let (c1, c3) = criterion_1_and_3(&clean, t.elapsed());
    report(1, "conformal power gap", c1, t);
    report(3, "AUPRC gap", c3, t);

    let t = Instant::now();
    let dirty = run_conformal_experiment(&conformal_config(Setting::One, vec![-3.0, 3.0]), true)
        .expect("contaminated study runs");
    report(2, "contamination failure mode", criterion_2(&dirty), t);

    let t = Instant::now();
    report(4, "filtering efficacy", criterion_4(), t);
    let t = Instant::now();
    report(5, "shift probability oracle", criterion_5(), t);
    let t = Instant::now();
    report(6, "metric oracles", criterion_6(), t);
    let t = Instant::now();
    report(7, "ordering invariant fuzz", criterion_7(), t);
    let t = Instant::now();
    report(8, "conformal validity", criterion_8(), t);
    let t = Instant::now();
    report(9, "BH oracle", criterion_9(), t);
    let t = Instant::now();
    report(10, "prediction error reduction", criterion_10(), t);

    let failed: Vec<u8> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria PASS", results.len());
    } else {
        println!("acceptance: FAIL on criteria {failed:?}");
        std::process::exit(1);
    }
}
