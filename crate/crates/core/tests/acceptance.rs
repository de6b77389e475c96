//! End-to-end acceptance gate: one PASS/FAIL line per criterion, non-zero
//! exit if any fails.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use common::oracle::{
    brute_force_estimator, brute_force_magnitude, chi2_cdf_oracle, chi2_quantile_oracle,
    closed_form_sigma_independent, OracleReport, OracleSmoothing,
};
use common::random_small_pattern;
use markgof::estimate::{bandwidth_from_c, sigma1_hat, sigma2_hat, sigma3_hat, y_vector};
use markgof::harness::{
    run_scenario_with_threads, ErrorRateRow, ErrorRateTable, ScenarioConfig, TestVariant,
};
use markgof::seeding::{derive_seed, rng_from_seed};
use markgof::testkit::{chi2_cdf, chi2_quantile};
use markgof::{
    EstimatorKind, IndependentPoissonModel, KernelSpec, MarkBins, NullMarkDistribution,
    PatternModel, Window,
};
use nalgebra::DMatrix;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut out = f();
    let elapsed = start.elapsed();
    out.detail = format!("{}; {:.1} s", out.detail, elapsed.as_secs_f64());
    if let Some(limit) = limit {
        if elapsed > limit {
            out.pass = false;
            out.detail
                .push_str(&format!(" exceeds {} s budget", limit.as_secs()));
        }
    }
    out
}

fn oracle_equivalence() -> Outcome {
    let mut rng = rng_from_seed(0xacc1);
    let kinds = [
        EstimatorKind::EdgeCorrected,
        EstimatorKind::Naive,
        EstimatorKind::Smoothed,
    ];
    let mut worst: Option<OracleReport> = None;
    let mut failures = 0;
    for case in 0..1000 {
        let pattern = random_small_pattern(&mut rng, 12);
        let ell = rng.random_range(1..=10);
        let bins = MarkBins::new(ell).unwrap();
        let null0 = NullMarkDistribution::uniform(&bins);
        let kernel = if case % 2 == 0 {
            KernelSpec::uniform()
        } else {
            KernelSpec::triangular()
        };
        let bw = bandwidth_from_c(rng.random_range(0.2..10.0), pattern.window(), &kernel).unwrap();
        let smoothing = OracleSmoothing {
            shape: kernel.shape,
            support: kernel.support,
            smoothing_length: bw.smoothing_length,
        };
        let mains = [
            sigma1_hat(&pattern, &bins, &null0).unwrap().matrix,
            sigma2_hat(&pattern, &bins, &null0).unwrap().matrix,
            sigma3_hat(&pattern, &bins, &null0, &kernel, &bw)
                .unwrap()
                .matrix,
        ];
        for (main, kind) in mains.iter().zip(kinds) {
            let oracle =
                brute_force_estimator(&pattern, ell, null0.probabilities(), kind, Some(smoothing));
            let scale =
                brute_force_magnitude(&pattern, ell, null0.probabilities(), kind, Some(smoothing));
            for ((&m, &o), &s) in main.iter().zip(oracle.iter()).zip(scale.iter()) {
                let r = OracleReport::relative(format!("{kind} case {case}"), m, o, s, 1e-10);
                if !r.pass {
                    failures += 1;
                }
                if worst.as_ref().is_none_or(|w| r.rel_dev > w.rel_dev) {
                    worst = Some(r);
                }
            }
        }
    }
    let worst = worst.unwrap();
    outcome(
        failures == 0,
        format!(
            "{failures} entries off; max relative deviation {:.2e} ({})",
            worst.rel_dev, worst.quantity
        ),
    )
}

fn unbiasedness() -> Outcome {
    let lambda = 0.01;
    let window = Window::square(100.0).unwrap();
    let model = IndependentPoissonModel { intensity: lambda };
    let bins = MarkBins::new(8).unwrap();
    let null0 = NullMarkDistribution::uniform(&bins);
    let reps = 10_000;
    let mut sum = DMatrix::<f64>::zeros(8, 8);
    let mut sum_sq = DMatrix::<f64>::zeros(8, 8);
    for nu in 0..reps {
        let p = model.simulate(&window, derive_seed(0xacc2, &[nu])).unwrap();
        let s = sigma1_hat(&p, &bins, &null0).unwrap().matrix;
        sum_sq += s.component_mul(&s);
        sum += s;
    }
    let n = reps as f64;
    let mean = &sum / n;
    let var = (sum_sq / n - mean.component_mul(&mean)) * (n / (n - 1.0));
    let target = closed_form_sigma_independent(lambda, null0.probabilities());
    let mut worst = 0.0f64;
    for i in 0..8 {
        for j in 0..8 {
            let se = (var[(i, j)] / n).sqrt();
            worst = worst.max((mean[(i, j)] - target[(i, j)]).abs() / se);
        }
    }
    outcome(
        worst <= 3.0,
        format!("max |mean - closed form| = {worst:.2} standard errors over 64 entries"),
    )
}

fn chi2_numerics() -> Outcome {
    let mut cdf_dev = 0.0f64;
    let mut q_dev = 0.0f64;
    for df in 1..=16 {
        for k in 0..=240 {
            let x = 0.25 * k as f64;
            cdf_dev = cdf_dev.max((chi2_cdf(x, df) - chi2_cdf_oracle(x, df)).abs());
        }
        for p in [1e-4, 0.01, 0.05, 0.1, 0.5, 0.9, 0.95, 0.99, 0.9999] {
            let q = chi2_quantile(p, df).unwrap();
            let oracle = chi2_quantile_oracle(p, df);
            q_dev = q_dev.max((q - oracle).abs() / oracle.max(1.0));
        }
    }
    let two = (chi2_quantile(0.95, 2).unwrap() - (-2.0 * 0.05f64.ln())).abs();
    outcome(
        cdf_dev <= 1e-9 && q_dev <= 1e-9 && two <= 1e-10,
        format!("cdf dev {cdf_dev:.2e}, quantile rel dev {q_dev:.2e}, chi2(2, 0.95) dev {two:.2e}"),
    )
}

fn moments(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let m2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = v.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    let m4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

fn clt() -> Outcome {
    let lambda = 0.01;
    let window = Window::square((1000.0f64 / lambda).sqrt()).unwrap();
    let model = IndependentPoissonModel { intensity: lambda };
    let bins = MarkBins::new(8).unwrap();
    let null0 = NullMarkDistribution::uniform(&bins);
    let sigma = closed_form_sigma_independent(lambda, null0.probabilities());
    let reps = 2000;
    let mut components: Vec<Vec<f64>> = (0..8).map(|_| Vec::with_capacity(reps)).collect();
    for nu in 0..reps {
        let p = model
            .simulate(&window, derive_seed(0xacc4, &[nu as u64]))
            .unwrap();
        let y = y_vector(&p, &bins, &null0).unwrap();
        for i in 0..8 {
            components[i].push(y[i] / sigma[(i, i)].sqrt());
        }
    }
    let pooled: Vec<f64> = components.iter().flatten().copied().collect();
    let (skew, kurt) = moments(&pooled);
    let (max_skew, max_kurt) = components
        .iter()
        .map(|c| moments(c))
        .fold((0.0f64, 0.0f64), |(s, k), (a, b)| {
            (s.max(a.abs()), k.max(b.abs()))
        });
    outcome(
        skew.abs() <= 0.15 && kurt.abs() <= 0.3,
        format!(
            "pooled skewness {skew:.3}, excess kurtosis {kurt:.3}; per component max |skewness| {max_skew:.3}, max |excess kurtosis| {max_kurt:.3}"
        ),
    )
}

fn row(t: &ErrorRateTable, variant: TestVariant, target: usize, ce: f64) -> &ErrorRateRow {
    t.find(variant, target, ce)
        .unwrap_or_else(|| panic!("missing row {variant:?} {target} {ce}"))
}

fn fmt_row(r: &ErrorRateRow) -> String {
    format!("{:.3}±{:.3}", r.rate(), r.std_error())
}

fn type_one_error(t: &ErrorRateTable) -> Outcome {
    let r = row(t, TestVariant::Mgm { n_mc: 500 }, 600, 1.0);
    outcome(
        (0.02..=0.10).contains(&r.rate()),
        format!(
            "MGM rate {} at 600 points, {} inconclusive",
            fmt_row(r),
            r.inconclusive
        ),
    )
}

fn power_ordering(t: &ErrorRateTable) -> Outcome {
    let mgm = TestVariant::Mgm { n_mc: 500 };
    let [r1, r2, r3] = [1.0, 1.135, 1.325].map(|ce| row(t, mgm, 1200, ce));
    let pass =
        r3.rate() > r2.rate() && r2.rate() > r1.rate() - 2.0 * r1.std_error() && r3.rate() >= 0.9;
    let tmd: Vec<String> = [0.5, 1.0, 2.0, 5.0]
        .iter()
        .map(|&c| {
            let [a, b, d] =
                [1.0, 1.135, 1.325].map(|ce| row(t, TestVariant::Tmd { c }, 1200, ce).rate());
            format!("c={c}: {a:.3}/{b:.3}/{d:.3}")
        })
        .collect();
    outcome(
        pass,
        format!(
            "MGM at 1200 points, c_e 1/1.135/1.325: {}/{}/{}; TMD {}",
            fmt_row(r1),
            fmt_row(r2),
            fmt_row(r3),
            tmd.join(", ")
        ),
    )
}

fn geometry_suite() -> Outcome {
    let mut rng = rng_from_seed(0xacc7);
    let mut violations = 0;
    let slack = 1.0 + 4.0 * f64::EPSILON;
    for _ in 0..10_000 {
        let w = Window::new(
            [rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3)],
            [rng.random_range(1e-2..1e4), rng.random_range(1e-2..1e4)],
        )
        .unwrap();
        let rho = w.inradius();
        let ratio = w.boundary_length() / w.area();
        if !(1.0 / rho <= ratio && ratio <= 2.0 / rho * slack) {
            violations += 1;
        }
        let angle = rng.random_range(0.0..2.0 * PI);
        let r = rho * rng.random::<f64>();
        let x = [r * angle.cos(), r * angle.sin()];
        if 1.0 - w.set_covariance(x) / w.area() > 2.0 * x[0].hypot(x[1]) / rho {
            violations += 1;
        }
        let grid = w.grid_cells_hit() as f64 / w.area();
        if !(1.0 <= grid && grid <= 1.0 + (w.dilated_ball_area(2f64.sqrt()) - w.area()) / w.area())
        {
            violations += 1;
        }
    }
    let trend: Vec<f64> = [10.0, 100.0, 1000.0]
        .iter()
        .map(|&l| {
            let w = Window::new([0.25, 0.6], [l, l]).unwrap();
            w.grid_cells_hit() as f64 / w.area()
        })
        .collect();
    let monotone = trend[0] > trend[1] && trend[1] > trend[2] && trend[2] >= 1.0;
    outcome(
        violations == 0 && monotone,
        format!(
            "{violations} violations over 10^4 windows; grid ratio for L=10,100,1000: {trend:.4?}"
        ),
    )
}

fn determinism(one: &str, eight: &str) -> Outcome {
    outcome(
        one == eight,
        format!("{} CSV bytes, identical = {}", one.len(), one == eight),
    )
}

fn bandwidth_sensitivity(t: &ErrorRateTable) -> Outcome {
    let (lo, hi) = (TestVariant::Tmd { c: 0.5 }, TestVariant::Tmd { c: 5.0 });
    let (lo0, hi0) = (row(t, lo, 1200, 1.0), row(t, hi, 1200, 1.0));
    let mut pass = hi0.rate() <= lo0.rate() + 2.0 * lo0.std_error();
    let mut detail = format!("type I c=0.5 {} vs c=5 {}", fmt_row(lo0), fmt_row(hi0));
    for ce in [1.135, 1.325] {
        let (a, b) = (row(t, lo, 1200, ce), row(t, hi, 1200, ce));
        pass &= a.rate() >= b.rate() - 2.0 * b.std_error();
        detail.push_str(&format!(
            "; power at c_e={ce}: c=0.5 {} vs c=5 {}",
            fmt_row(a),
            fmt_row(b)
        ));
    }
    outcome(pass, detail)
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |n: usize, name: &'static str, o: Outcome| {
        println!(
            "criterion {n} [{name}]: {} ({})",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((n, name, o));
    };

    report(
        1,
        "estimator oracle equivalence",
        timed(Some(Duration::from_secs(10)), oracle_equivalence),
    );
    report(
        2,
        "unbiasedness of the edge-corrected estimator",
        timed(Some(Duration::from_secs(120)), unbiasedness),
    );
    report(
        3,
        "chi-square numerics",
        timed(Some(Duration::from_secs(5)), chi2_numerics),
    );
    report(4, "CLT sanity", timed(Some(Duration::from_secs(180)), clt));

    let cfg = ScenarioConfig::default();
    let start = Instant::now();
    let eight = run_scenario_with_threads(&cfg, 8).expect("default experiment");
    let eight_secs = start.elapsed().as_secs_f64();
    let table = eight.table;
    report(5, "type I error", {
        let mut o = type_one_error(&table);
        o.pass &= eight_secs < 900.0;
        o.detail = format!("{}; default experiment {eight_secs:.1} s", o.detail);
        o
    });
    report(6, "power ordering", timed(None, || power_ordering(&table)));
    report(
        7,
        "geometry property suite",
        timed(Some(Duration::from_secs(5)), geometry_suite),
    );
    let one = run_scenario_with_threads(&cfg, 1).expect("default experiment");
    report(
        8,
        "determinism across worker counts",
        timed(None, || {
            determinism(&one.table.to_csv_string(), &table.to_csv_string())
        }),
    );
    report(
        9,
        "TMD bandwidth sensitivity",
        timed(None, || bandwidth_sensitivity(&table)),
    );

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
