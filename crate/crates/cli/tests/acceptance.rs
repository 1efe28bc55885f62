//! Acceptance suite: one PASS/FAIL line per criterion.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use markmle::consistency::bias_vs_k_study;
use markmle::limits::examples::{example_info, example_model, uniform_exp_law};
use markmle::limits::{EvaluationWindow, LimitEngine};
use markmle::maxint::ObservedSet;
use markmle::plmle::{fit_imputed, product_limit_weights};
use markmle::repaired::{discretize_marks, eval_repaired_f, fit_cr_mle, CrProblem, EmConfig, MarkGrid};
use markmle::simulate::{run_study, ExampleSpec, StudyConfig};
use markmle::{
    brute_force_maximal_intersections, fit, impute_right_endpoints, log_likelihood, maximal_intersections,
    observed_sets, order_dataset, Bound, Observation, QuadratureConfig, Region,
};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Records on a 0.5 time lattice; marks distinct unless a whole event
/// record is repeated.
fn random_dataset(rng: &mut ChaCha20Rng, n: usize, k: usize, lattice: u32) -> Vec<Observation> {
    let mut out: Vec<Observation> = Vec::with_capacity(n);
    let mut next_mark = 0.0;
    for _ in 0..n {
        if let Some(prev) = out.iter().rfind(|o| o.delta_plus()) {
            if rng.random_bool(0.1) {
                out.push(prev.clone());
                continue;
            }
        }
        let mut slots: Vec<u32> = (1..=lattice).collect();
        for i in 0..k {
            let j = rng.random_range(i..slots.len());
            slots.swap(i, j);
        }
        let mut times: Vec<f64> = slots[..k].iter().map(|&s| s as f64 * 0.5).collect();
        times.sort_by(f64::total_cmp);
        let delta = rng.random_range(1..=k + 1);
        let mark = (delta <= k).then(|| {
            next_mark += 1.0;
            next_mark + rng.random::<f64>() * 0.5
        });
        out.push(Observation::new(times, delta, mark).unwrap());
    }
    out
}

fn ac1() -> Outcome {
    for n in 1..=20usize {
        let (w, tail) = product_limit_weights::<Ratio<i128>>(&vec![true; n]);
        if w.iter().any(|v| *v != Ratio::new(1, n as i128)) || tail != Ratio::from_integer(0) {
            return outcome(false, format!("rational weights differ from 1/{n}"));
        }
    }
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let n = r.random_range(1..=200);
        let k = r.random_range(1..=3);
        let data: Vec<Observation> = (0..n)
            .map(|i| {
                let mut times: Vec<f64> = (0..k).map(|_| r.random::<f64>() * 10.0).collect();
                times.sort_by(f64::total_cmp);
                let j = r.random_range(1..=k);
                Observation::new(times, j, Some(i as f64 + r.random::<f64>())).unwrap()
            })
            .collect();
        let m = fit(&order_dataset(&data).unwrap()).unwrap();
        for (_, p) in m.masses() {
            worst = worst.max((p - 1.0 / n as f64).abs());
        }
    }
    outcome(
        worst <= 1e-15,
        format!("exact for n <= 20; float max |p - 1/n| = {worst:e}"),
    )
}

fn contains_matrix(data: &[Observation]) -> (Vec<Vec<bool>>, f64, Vec<f64>) {
    let ord = order_dataset(data).unwrap();
    let mis = maximal_intersections(&ord);
    let sets = observed_sets(&ord);
    let contains = sets
        .iter()
        .map(|s| mis.iter().map(|mi| mi.region.is_within(s)).collect())
        .collect();
    let fitted = fit(&ord).unwrap();
    let probs = mis
        .iter()
        .map(|mi| match fitted.masses().iter().find(|m| m.0.region == mi.region) {
            Some(m) => m.1,
            None => fitted.censored_tail(),
        })
        .collect();
    (contains, log_likelihood(&fitted, &ord), probs)
}

fn containment_loglik(contains: &[Vec<bool>], p: &[f64]) -> f64 {
    contains
        .iter()
        .map(|row| row.iter().zip(p).filter(|(c, _)| **c).map(|(_, v)| v).sum::<f64>().ln())
        .sum()
}

/// Exponentiated-gradient ascent on the simplex.
fn mirror_ascent(contains: &[Vec<bool>], m: usize) -> f64 {
    let mut p = vec![1.0 / m as f64; m];
    let mut step = 0.5;
    let mut best = containment_loglik(contains, &p);
    let n = contains.len() as f64;
    for _ in 0..20_000 {
        let mut grad = vec![0.0; m];
        for row in contains {
            let q: f64 = row.iter().zip(&p).filter(|(c, _)| **c).map(|(_, v)| v).sum();
            for c in 0..m {
                if row[c] {
                    grad[c] += 1.0 / q;
                }
            }
        }
        let mut next: Vec<f64> = p.iter().zip(&grad).map(|(v, g)| v * (step * g / n).exp()).collect();
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= s);
        let ll = containment_loglik(contains, &next);
        if ll >= best {
            best = ll;
            p = next;
        } else {
            step *= 0.5;
            if step < 1e-12 {
                break;
            }
        }
    }
    best
}

fn ac2() -> Outcome {
    let mut r = rng(2024);
    let mut worst_opt = f64::INFINITY;
    let mut worst_rand = f64::INFINITY;
    for _ in 0..200 {
        let n = r.random_range(1..=6);
        let k = r.random_range(1..=2);
        let data = random_dataset(&mut r, n, k, 6);
        let (contains, ll, probs) = contains_matrix(&data);
        if (containment_loglik(&contains, &probs) - ll).abs() > 1e-12 {
            return outcome(false, "library log-likelihood disagrees with set containment");
        }
        let m = probs.len();
        worst_opt = worst_opt.min(ll - mirror_ascent(&contains, m));
        for _ in 0..10_000 {
            let mut p: Vec<f64> = (0..m).map(|_| -r.random::<f64>().max(1e-300).ln()).collect();
            let s: f64 = p.iter().sum();
            p.iter_mut().for_each(|v| *v /= s);
            worst_rand = worst_rand.min(ll - containment_loglik(&contains, &p));
        }
    }
    outcome(
        worst_opt >= -1e-6 && worst_rand >= -1e-8,
        format!("min margin vs maximizer {worst_opt:e}, vs random points {worst_rand:e}"),
    )
}

fn sorted_regions(mut r: Vec<Region>) -> Vec<Region> {
    r.sort_by(|a, b| {
        let (ka, kb) = (a.sort_key(), b.sort_key());
        ka.0.cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(ka.2.total_cmp(&kb.2))
            .then(ka.3.total_cmp(&kb.3))
    });
    r
}

fn ac3() -> Outcome {
    let mismatches: Vec<u64> = (0..1000u64)
        .into_par_iter()
        .filter(|&seed| {
            let mut r = rng(10_000 + seed);
            let n = r.random_range(1..=500);
            let k = r.random_range(1..=3);
            let data = random_dataset(&mut r, n, k, 12);
            let ord = order_dataset(&data).unwrap();
            let fast = sorted_regions(maximal_intersections(&ord).iter().map(|m| m.region).collect());
            let brute = brute_force_maximal_intersections(&observed_sets(&ord));
            fast != sorted_regions(brute.iter().map(|m| m.region).collect())
        })
        .collect();
    outcome(
        mismatches.is_empty(),
        format!("{} of 1000 instances differ", mismatches.len()),
    )
}

fn cfg() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn engine(id: u8) -> LimitEngine {
    let model = example_model(id).unwrap();
    let window = EvaluationWindow::new(&model, example_info(id).unwrap().tau, vec![], &cfg()).unwrap();
    LimitEngine::new(&model, &window, &cfg()).unwrap()
}

fn ex1_fx(x: f64) -> f64 {
    1.0 - x.exp() * (1.0 - 2.0 * x).sqrt()
}

fn ac4() -> Outcome {
    let e = engine(1);
    let worst = (1..=9)
        .map(|i| {
            let x = 0.05 * i as f64;
            (e.fx_lim(x).unwrap() - ex1_fx(x)).abs()
        })
        .fold(0.0, f64::max);
    let at = e.fx_lim(0.25).unwrap();
    outcome(
        worst <= 1e-6 && (at - 0.092041).abs() <= 1e-5,
        format!(
            "max |quadrature - closed form| = {worst:e}; value at 0.25 = {at:.7} vs stated 0.092041 (closed form {:.7})",
            ex1_fx(0.25)
        ),
    )
}

fn ac5() -> Outcome {
    let mut c = StudyConfig::new(ExampleSpec::new(1, 10_000, 42).unwrap());
    c.y_grid = vec![1.0];
    let r = run_study(&c).unwrap();
    let sup = r
        .marginal
        .iter()
        .filter(|row| row.x <= 0.45)
        .map(|row| (row.mle_lower.unwrap() - row.limit_lower.unwrap()).abs())
        .fold(0.0, f64::max);
    let truth = example_model(1).unwrap().law.f0x(0.25);
    let gap = (r.mle.eval_fx(0.25, Bound::Lower) - truth).abs();
    outcome(
        sup <= 0.03 && gap >= 0.10,
        format!("seed 42: sup gap to limit {sup:.4}, gap to truth at 0.25 {gap:.4}"),
    )
}

fn ac6() -> Outcome {
    let data = markmle::simulate::gen_example(&ExampleSpec::new(1, 10_000, 42).unwrap());
    let grid = MarkGrid::equidistant(0.0, 4.0, 20).unwrap();
    let est = fit_cr_mle(&discretize_marks(&data, &grid), &EmConfig::default()).unwrap();
    let law = example_model(1).unwrap().law;
    let mut worst: f64 = 0.0;
    for x in [0.1, 0.2, 0.3, 0.4] {
        for (j, &y) in grid.cutpoints().iter().enumerate() {
            worst = worst.max((eval_repaired_f(&est, x, j + 1, Bound::Lower) - law.f0(x, y)).abs());
        }
    }
    outcome(worst <= 0.05, format!("seed 42: max |repaired - truth| = {worst:.4}"))
}

fn ac7() -> Outcome {
    let rows = bias_vs_k_study(&uniform_exp_law(), 1.0, &[1, 2, 5, 10, 25], &[0.5], &cfg()).unwrap();
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    let last = *gaps.last().unwrap();
    let shown: Vec<String> = gaps.iter().map(|g| format!("{g:.4}")).collect();
    outcome(
        decreasing && last < 0.05,
        format!(
            "gaps for k = 1,2,5,10,25: {}; decreasing {decreasing}",
            shown.join(", ")
        ),
    )
}

fn ac8() -> Outcome {
    let e = engine(1);
    let mut worst: f64 = 0.0;
    for i in 1..=10 {
        let x = 0.045 * i as f64;
        let fx = e.fx_lim(x).unwrap();
        for j in 1..=10 {
            let y = 0.4 * j as f64;
            let expect = fx * -(-y).exp_m1();
            worst = worst
                .max((e.f_lim(x, y).unwrap() - expect).abs())
                .max((e.f_lim_ratio(x, y).unwrap() - expect).abs());
        }
    }
    outcome(worst <= 1e-6, format!("max deviation from product form {worst:e}"))
}

fn ac9() -> Outcome {
    let mut r = rng(9);
    for case in 0..100 {
        let n = r.random_range(1..=80);
        let k = r.random_range(1..=3);
        let data = random_dataset(&mut r, n, k, 10);
        let ord = order_dataset(&data).unwrap();
        let m = fit(&ord).unwrap();
        let imp = impute_right_endpoints(&ord);
        if imp.sets().iter().any(|s| matches!(s, ObservedSet::Segment { .. })) {
            return outcome(false, format!("instance {case}: imputation left a segment"));
        }
        let refit = fit_imputed(&imp);
        let key = |a: &(f64, f64, f64), b: &(f64, f64, f64)| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1));
        let mut direct: Vec<(f64, f64, f64)> = m
            .masses()
            .iter()
            .filter_map(|(mi, p)| match mi.region {
                Region::Segment { r, mark, .. } => Some((r, mark, *p)),
                Region::HalfPlane { .. } => None,
            })
            .collect();
        let mut points = refit.points.clone();
        direct.sort_by(key);
        points.sort_by(key);
        if direct != points || m.censored_tail() != refit.censored_tail {
            return outcome(false, format!("instance {case}: masses differ"));
        }
    }
    outcome(true, "100 instances identical")
}

fn compositions(total: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if parts == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in 0..=total {
        prefix.push(first);
        compositions(total - first, parts - 1, prefix, out);
        prefix.pop();
    }
}

/// Simplex grid at step 0.05, then pattern search around the incumbent.
fn grid_search(p: &CrProblem) -> f64 {
    let m = p.candidates().len();
    let ll = |x: &[f64]| p.log_likelihood(x).unwrap();
    if m == 1 {
        return ll(&[1.0]);
    }
    let mut all = Vec::new();
    compositions(20, m, &mut Vec::new(), &mut all);
    let mut best: Vec<f64> = Vec::new();
    let mut best_ll = f64::NEG_INFINITY;
    for c in all {
        let x: Vec<f64> = c.iter().map(|&v| v as f64 / 20.0).collect();
        let v = ll(&x);
        if v > best_ll {
            best_ll = v;
            best = x;
        }
    }
    let mut offsets = Vec::new();
    let mut idx = vec![0usize; m - 1];
    loop {
        offsets.push(idx.iter().map(|&i| i as f64 - 2.0).collect::<Vec<f64>>());
        let mut d = 0;
        while d < m - 1 {
            idx[d] += 1;
            if idx[d] < 5 {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == m - 1 {
            break;
        }
    }
    let mut h = 0.025;
    while h > 1e-7 {
        let mut improved = true;
        while improved {
            improved = false;
            for off in &offsets {
                let mut x = best.clone();
                let mut s = 0.0;
                for i in 0..m - 1 {
                    x[i] += h * off[i];
                    s += x[i];
                }
                x[m - 1] = 1.0 - s;
                if x.iter().any(|&v| v < 0.0) {
                    continue;
                }
                let v = ll(&x);
                if v > best_ll + 1e-15 {
                    best_ll = v;
                    best = x;
                    improved = true;
                }
            }
        }
        h *= if h > 1e-3 { 0.5 } else { 0.1 };
    }
    best_ll
}

fn ac10() -> Outcome {
    let grid1 = MarkGrid::new(vec![1.0]).unwrap();
    let hand = [
        Observation::current_status(1.0, Some(0.5)).unwrap(),
        Observation::current_status(2.0, None).unwrap(),
    ];
    let est = fit_cr_mle(&discretize_marks(&hand, &grid1), &EmConfig::default()).unwrap();
    let first = est.per_risk[0].first().map_or(0.0, |s| s.mass);
    let hand_ok = (first - 0.5).abs() < 1e-6 && (est.censored_tail - 0.5).abs() < 1e-6;

    let grid = MarkGrid::new(vec![2.0, 4.0]).unwrap();
    let mut r = rng(77);
    let mut worst: f64 = 0.0;
    let mut monotone = true;
    let mut tested = 0;
    while tested < 100 {
        let n = r.random_range(1..=6);
        let k = r.random_range(1..=2);
        let data = random_dataset(&mut r, n, k, 6);
        let p = CrProblem::new(&discretize_marks(&data, &grid)).unwrap();
        let fitted = p.fit(&EmConfig::default());
        let h = &fitted.convergence.history;
        monotone &= h.windows(2).all(|w| w[1] >= w[0] - 1e-12);
        if p.candidates().len() <= 5 {
            worst = worst.max((fitted.convergence.log_likelihood - grid_search(&p)).abs());
            tested += 1;
        }
    }
    outcome(
        hand_ok && monotone && worst <= 1e-5,
        format!(
            "hand masses ({first:.6}, {:.6}); monotone {monotone}; max |EM - grid| = {worst:e}",
            est.censored_tail
        ),
    )
}

fn ac11() -> Outcome {
    let out = match Command::new(env!("CARGO_BIN_EXE_markmle"))
        .args(["check", "--example", "1"])
        .output()
    {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("could not run binary: {e}")),
    };
    if !out.status.success() {
        return outcome(false, format!("exit status {}", out.status));
    }
    let text = String::from_utf8_lossy(&out.stdout);
    let verdict = text.lines().find_map(|l| l.strip_prefix("verdict: ")).unwrap_or("");
    let row = text.lines().find_map(|l| {
        let f: Vec<f64> = l.split(',').map(|s| s.parse().ok()).collect::<Option<_>>()?;
        (f.len() == 4 && (f[0] - 0.25).abs() < 1e-9).then(|| (f[1], f[2]))
    });
    let Some((lim, tru)) = row else {
        return outcome(false, "no row for x = 0.25 in the report");
    };
    outcome(
        (lim - 0.09657).abs() <= 1e-4 && (tru - 0.28768).abs() <= 1e-4 && verdict == "inconsistent",
        format!("limit {lim:.5}, truth {tru:.5}, verdict {verdict}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("AC1", ac1, None),
        ("AC2", ac2, Some(Duration::from_secs(60))),
        ("AC3", ac3, Some(Duration::from_secs(60))),
        ("AC4", ac4, Some(Duration::from_secs(10))),
        ("AC5", ac5, Some(Duration::from_secs(30))),
        ("AC6", ac6, Some(Duration::from_secs(120))),
        ("AC7", ac7, Some(Duration::from_secs(30))),
        ("AC8", ac8, None),
        ("AC9", ac9, None),
        ("AC10", ac10, None),
        ("AC11", ac11, None),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let o = run();
        let took = start.elapsed();
        let in_time = budget.is_none_or(|b| took <= b);
        let pass = o.pass && in_time;
        if !pass {
            failed += 1;
        }
        let budget_note = match budget {
            Some(b) if !in_time => format!(", over the {}s budget", b.as_secs()),
            _ => String::new(),
        };
        println!(
            "{name} {} ({}; {:.2}s{budget_note})",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64()
        );
    }
    println!("{} of 11 criteria passed", 11 - failed);
    // Known failures are ledgered; the suite reports rather than aborts.
    ExitCode::SUCCESS
}
