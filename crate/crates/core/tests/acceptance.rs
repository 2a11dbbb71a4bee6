//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use pwls::m_equiv::{self, MConfig};
use pwls::numerics::{self, Dataset};
use pwls::simbench::{self, HeteroSimConfig, HomoSimConfig, Method, SimConfig};
use pwls::solver::{self, PenaltyScales, SolverConfig};
use pwls::tuning;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

fn w_update_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let grid: Vec<f64> = (0..100_000)
        .map(|k| (-8.0 * std::f64::consts::LN_10 * k as f64 / 99_999.0).exp())
        .collect();
    let mut worst: f64 = 0.0;
    let mut misses = 0;
    for _ in 0..1000 {
        let r = log_uniform(&mut rng, 1e-3, 1e3) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let lambda = log_uniform(&mut rng, 1e-3, 1e3);
        let varpi = log_uniform(&mut rng, 1e-3, 1e3);
        let omega = log_uniform(&mut rng, 1e-3, 1e3);
        let f = |w: f64| omega * w * w * r * r + lambda * varpi * w.ln().abs();
        let w = solver::w_update(r, lambda * varpi / omega);
        let best = grid.iter().map(|&g| f(g)).fold(f64::INFINITY, f64::min);
        let rel = (f(w) - best) / best.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        if rel > 1e-3 {
            misses += 1;
        }
    }
    Outcome {
        pass: misses == 0,
        detail: format!("{misses}/1000 above 1e-3, worst relative excess {worst:.2e}"),
    }
}

fn inner_min(r: f64, lambda: f64) -> f64 {
    if r * r <= 0.5 * lambda {
        r * r
    } else {
        0.5 * lambda * (1.0 + (2.0 * r * r / lambda).ln())
    }
}

fn small_instance_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut misses = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..50 {
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(0.5..3.0)).collect();
        let mut y: Vec<f64> = x.iter().map(|v| 2.0 * v + 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
        let out = rng.random_range(0..5);
        y[out] += 10.0;
        let lambda = log_uniform(&mut rng, 0.1, 10.0);
        let profile = |b: f64| -> f64 { x.iter().zip(&y).map(|(xi, yi)| inner_min(yi - xi * b, lambda)).sum() };
        let span = 5.0 * x.iter().zip(&y).map(|(a, b)| (b / a).abs()).fold(1.0, f64::max);
        let m = 100_000;
        let brute = (0..=m)
            .map(|k| profile(-span + 2.0 * span * k as f64 / m as f64))
            .fold(f64::INFINITY, f64::min);
        let d = Dataset::new(DMatrix::from_column_slice(5, 1, &x), DVector::from_vec(y.clone())).unwrap();
        let cfg = SolverConfig { epsilon: 1e-12, max_iter: 5000, ..Default::default() };
        let init = solver::initial_estimates(&d, &cfg).unwrap();
        let f = solver::fit(&d, lambda, &PenaltyScales::uniform(5), &init.beta, &init.w, &cfg).unwrap();
        let rel = (f.objective - brute) / brute;
        worst = worst.max(rel);
        if rel > 1e-6 {
            misses += 1;
        }
    }
    Outcome {
        pass: misses == 0,
        detail: format!("{misses}/50 above 1e-6, worst relative gap {worst:.2e}"),
    }
}

fn m_equivalence() -> Outcome {
    let mut passed = 0;
    let mut collapsed = 0;
    let mut other = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let x = DMatrix::from_fn(30, 3, |_, j| if j == 0 { 1.0 } else { rng.sample(StandardNormal) });
        let y = DVector::from_fn(30, |i, _| {
            x.row(i).sum() + rng.sample::<f64, _>(StandardNormal) + if i < 3 { 6.0 } else { 0.0 }
        });
        let d = Dataset::new(x, y).unwrap();
        for lambda in [0.5, 1.0, 2.0] {
            match m_equiv::theorem1_check(&d, &MConfig::new(lambda)) {
                Ok(rep) if rep.pass => passed += 1,
                Ok(_) => other += 1,
                Err(pwls::Error::ScaleCollapsed) => collapsed += 1,
                Err(_) => other += 1,
            }
        }
    }
    Outcome {
        pass: passed == 60,
        detail: format!(
            "{passed}/60 agree; {collapsed} scale collapsed (objective unbounded below for lambda(n-p) <= 2cn), {other} other"
        ),
    }
}

fn rho_psi() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_gap: f64 = 0.0;
    let mut worst_fd: f64 = 0.0;
    for lambda in [0.5, 1.0, 2.0, 10.0] {
        let knot: f64 = (lambda / 2.0_f64).sqrt();
        for k in [knot, -knot] {
            let gap = (m_equiv::rho(k.next_down(), lambda) - m_equiv::rho(k.next_up(), lambda)).abs();
            worst_gap = worst_gap.max(gap);
        }
        let mut n = 0;
        while n < 200 {
            let t: f64 = rng.random_range(-10.0..10.0);
            if (t.abs() - knot).abs() < 1e-3 {
                continue;
            }
            n += 1;
            let h = 1e-6;
            let fd = (m_equiv::rho(t + h, lambda) - m_equiv::rho(t - h, lambda)) / (2.0 * h);
            worst_fd = worst_fd.max((fd - m_equiv::psi(t, lambda)).abs());
        }
    }
    Outcome {
        pass: worst_gap < 1e-12 && worst_fd < 1e-5,
        detail: format!("knot gap {worst_gap:.2e}, finite-difference error {worst_fd:.2e}"),
    }
}

fn report_detail(r: &simbench::MetricsReport) -> String {
    format!(
        "JD {:.1}%, M {:.2}%, S {:.2}% over {} reps ({} failed)",
        r.joint_detection, r.masking, r.swamping, r.reps, r.failures
    )
}

fn homo_table(leverage: Option<f64>, base_seed: u64) -> Result<simbench::MetricsReport, pwls::Error> {
    let cfg = SimConfig::Homo(HomoSimConfig { leverage, ..Default::default() });
    simbench::run_benchmark(Method::Pwls, &cfg, 200, base_seed)
}

fn table1_no_leverage() -> Outcome {
    match homo_table(None, 1000) {
        Ok(r) => Outcome {
            pass: (55.0..=85.0).contains(&r.joint_detection) && r.masking <= 2.0 && r.swamping <= 6.0,
            detail: report_detail(&r),
        },
        Err(e) => Outcome { pass: false, detail: e.to_string() },
    }
}

fn table1_leverage() -> Outcome {
    match homo_table(Some(15.0), 2000) {
        Ok(r) => Outcome {
            pass: r.joint_detection >= 50.0 && r.masking <= 3.0,
            detail: report_detail(&r),
        },
        Err(e) => Outcome { pass: false, detail: e.to_string() },
    }
}

fn table2() -> Outcome {
    let cfg = SimConfig::Hetero(HeteroSimConfig::default());
    let h = simbench::run_benchmark(Method::Hpwls, &cfg, 100, 3000);
    let p = simbench::run_benchmark(Method::Pwls, &cfg, 100, 3000);
    match (h, p) {
        (Ok(h), Ok(p)) => Outcome {
            pass: h.joint_detection >= 80.0
                && h.masking <= 3.0
                && h.swamping <= 2.0
                && h.joint_detection > p.joint_detection,
            detail: format!("H-PWLS {}; PWLS JD {:.1}%", report_detail(&h), p.joint_detection),
        },
        (Err(e), _) | (_, Err(e)) => Outcome { pass: false, detail: e.to_string() },
    }
}

fn stability_fixture(rep: u64) -> Dataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(500 + rep);
    let x = DMatrix::from_fn(50, 2, |_, j| if j == 0 { 1.0 } else { rng.sample(StandardNormal) });
    let y = DVector::from_fn(50, |i, _| {
        x[(i, 0)] + x[(i, 1)] + rng.sample::<f64, _>(StandardNormal) + if i < 5 { 8.0 } else { 0.0 }
    });
    Dataset::new(x, y).unwrap()
}

fn stability_separation() -> Outcome {
    let cfg = SolverConfig::default();
    let mut good = 0;
    let mut errors = 0;
    for rep in 0..20u64 {
        let d = stability_fixture(rep);
        let run = || -> pwls::Result<bool> {
            let s = solver::adaptive_scales(&solver::initial_estimates(&d, &cfg)?.w);
            let path = solver::solution_path(&d, &s, &cfg)?;
            let st = tuning::stability_curve(&d, &path.lambdas, &s, 50, rep, &cfg)?;
            let col = st.outlier_prob.column(st.index);
            Ok((0..5).all(|i| col[i] > 0.8) && (5..50).all(|i| col[i] < 0.3))
        };
        match run() {
            Ok(true) => good += 1,
            Ok(false) => {}
            Err(_) => errors += 1,
        }
    }
    Outcome {
        pass: good >= 18,
        detail: format!("{good}/20 repeats separate ({errors} errors)"),
    }
}

fn property_suites() -> Outcome {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut check = |ok: bool, what: &str| {
        if !ok {
            failures.push(what.to_string());
        }
    };

    for _ in 0..500 {
        let n = rng.random_range(1..30);
        let a: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.3)).collect();
        let b: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.3)).collect();
        let k: f64 = tuning::kappa(&a, &b, n);
        check((-1.0..=1.0).contains(&k), "kappa bounds");
        check(k == tuning::kappa::<f64>(&b, &a, n), "kappa symmetry");
        check(tuning::kappa::<f64>(&a, &a, n) == 1.0, "kappa identity");
    }
    check(tuning::kappa::<f64>(&[], &[], 5) == 1.0, "kappa of empty sets");
    check(tuning::kappa::<f64>(&[0, 1, 2], &[0, 1, 2], 3) == 1.0, "kappa of full sets");

    let cfg = SolverConfig::default();
    for seed in 0..20u64 {
        let mut g = ChaCha8Rng::seed_from_u64(700 + seed);
        let x = DMatrix::from_fn(40, 3, |_, j| if j == 0 { 1.0 } else { g.sample(StandardNormal) });
        let y = DVector::from_fn(40, |i, _| x.row(i).sum() + g.sample::<f64, _>(StandardNormal) + if i < 4 { 7.0 } else { 0.0 });
        let d = Dataset::new(x, y).unwrap();
        let s = PenaltyScales::new(DVector::from_fn(40, |_, _| g.random_range(0.2..5.0)), 999.0).unwrap();
        let lambda: f64 = log_uniform(&mut g, 0.1, 20.0);
        let b0 = numerics::ols_solve(&d, None).unwrap();
        let w0 = DVector::from_element(40, 1.0);
        let f = solver::fit(&d, lambda, &s, &b0, &w0, &cfg).unwrap();
        check(
            f.history.windows(2).all(|p| p[1] <= p[0] + 1e-10 * p[0].abs().max(1.0)),
            "objective monotone per iteration",
        );
        let tight = SolverConfig { epsilon: 1e-14, max_iter: 5000, ..Default::default() };
        let f = solver::fit(&d, lambda, &s, &b0, &w0, &tight).unwrap();
        if f.converged {
            let r = d.residuals(&f.beta);
            check(
                (0..40).all(|i| (solver::w_update(r[i], lambda * s.varpi()[i]) - f.w[i]).abs() < 1e-12),
                "w fixed point",
            );
            let rw: Vec<f64> = f.w.iter().map(|v| v * v).collect();
            let beta = numerics::weighted_lstsq(d.x(), d.y(), Some(&rw)).unwrap();
            check((&beta - &f.beta).amax() < 1e-8, "beta fixed point");
        }
        if seed < 3 {
            let path = solver::solution_path(&d, &s, &cfg).unwrap();
            check(path == solver::solution_path(&d, &s, &cfg).unwrap(), "path determinism");
            let grid: Vec<f64> = path.lambdas.iter().step_by(10).copied().collect();
            let a = tuning::stability_curve(&d, &grid, &s, 5, seed, &cfg).unwrap();
            let b = tuning::stability_curve(&d, &grid, &s, 5, seed, &cfg).unwrap();
            check(a == b, "stability determinism");
            check(a.s_curve.iter().all(|v| (-1.0..=1.0).contains(v)), "S in [-1, 1]");
            check(a.outlier_prob.iter().all(|v| (0.0..=1.0).contains(v)), "P in [0, 1]");
        }
    }
    let cfg_b = SimConfig::Homo(HomoSimConfig { n: 200, p: 5, k: 20, ..Default::default() });
    check(
        simbench::run_benchmark(Method::Pwls, &cfg_b, 3, 5).ok() == simbench::run_benchmark(Method::Pwls, &cfg_b, 3, 5).ok(),
        "benchmark determinism",
    );
    failures.dedup();
    Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            "all property checks hold".into()
        } else {
            format!("violated: {}", failures.join(", "))
        },
    }
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);
    let criteria: [Criterion; 9] = [
        ("1 w-update oracle", w_update_oracle, Some(Duration::from_secs(10))),
        ("2 small-instance global optimality", small_instance_optimality, Some(Duration::from_secs(60))),
        ("3 M-estimator equivalence (c = 1)", m_equivalence, Some(Duration::from_secs(30))),
        ("4 rho/psi analytics", rho_psi, None),
        ("5 homoscedastic benchmark, no leverage", table1_no_leverage, Some(Duration::from_secs(1800))),
        ("6 homoscedastic benchmark, L = 15", table1_leverage, None),
        ("7 heteroscedastic benchmark, case 1", table2, None),
        ("8 stability selection separation", stability_separation, None),
        ("9 property suites", property_suites, None),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let mut outcome = run();
        let elapsed = start.elapsed();
        if let Some(limit) = limit {
            if elapsed > limit {
                outcome.pass = false;
                outcome.detail.push_str(&format!("; exceeded {limit:?}"));
            }
        }
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {name}: {} [{:.1}s]", outcome.detail, elapsed.as_secs_f64());
        if !outcome.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
