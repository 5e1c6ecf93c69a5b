//! Acceptance battery. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thinlab::cgs::{
    derive_h_from_f, make_log_family, make_theorem1, pair_grid, residual_check, symmetric_grid,
    vector_space_rigidity_falsifier, CgsInstance, Domain, EquationForm, LogFamilySolution,
    RigidityVerdict, Theorem1Solution,
};
use thinlab::config::RunConfig;
use thinlab::magma::{MagmaElement, MagmaOps};
use thinlab::psf::{tv_distance, CoefficientSequence};
use thinlab::suite::run_suite;
use thinlab::thinning::{
    check_invariance, closed_form_h_p, pgf_composition_check, rho_check, solve_h_p, thin_exact,
    thin_mc, InvarianceTolerances, RhoMap, RhoMode, ThinningParam,
};

const SEED: u64 = 20_240_601;
const THETAS: [f64; 4] = [0.5, 1.0, 2.0, 5.0];
const NEGBIN_THETAS: [f64; 4] = [0.1, 0.3, 0.5, 0.8];
const PS: [f64; 4] = [0.1, 0.3, 0.5, 0.9];
const TRUNC: f64 = 1e-12;

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn families() -> Vec<(CoefficientSequence, &'static [f64])> {
    vec![
        (CoefficientSequence::Poisson, &THETAS),
        (CoefficientSequence::Binomial { n: 10 }, &THETAS),
        (CoefficientSequence::NegativeBinomial { r: 3.0 }, &NEGBIN_THETAS),
    ]
}

fn tp(p: f64) -> ThinningParam {
    ThinningParam::new(p).unwrap()
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for theta in THETAS {
        for p in PS {
            let poisson = CoefficientSequence::Poisson;
            let nu = thin_exact(&poisson.pmf(theta, TRUNC).unwrap(), tp(p));
            let target = poisson.pmf(p * theta, TRUNC).unwrap();
            worst = worst.max(tv_distance(&nu, &target).distance);
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-10 && elapsed.as_secs_f64() < 1.0,
        format!("max TV {worst:.3e} <= 1e-10, runtime {:.3} s < 1 s", elapsed.as_secs_f64()),
    )
}

fn criterion_2() -> Verdict {
    let tols = InvarianceTolerances {
        invariance_tol: 1e-10,
        ..InvarianceTolerances::default()
    };
    let (mut theta_err, mut tv): (f64, f64) = (0.0, 0.0);
    let mut all_passed = true;
    for (seq, thetas) in families().into_iter().skip(1) {
        for &theta in thetas {
            for p in PS {
                // independent oracle for the parameter map
                let q = 1.0 - p;
                let expected = match seq {
                    CoefficientSequence::Binomial { .. } => p * theta / (1.0 + q * theta),
                    _ => p * theta / (1.0 - q * theta),
                };
                let r = check_invariance(&seq, theta, tp(p), &tols).unwrap();
                all_passed &= r.passed;
                theta_err = theta_err.max((r.fitted_theta_prime - expected).abs());
                tv = tv.max(r.tv);
                let nu = thin_exact(&seq.pmf(theta, TRUNC).unwrap(), tp(p));
                tv = tv.max(tv_distance(&nu, &seq.pmf(expected, TRUNC).unwrap()).distance);
            }
        }
    }
    verdict(
        all_passed && theta_err <= 1e-8 && tv <= 1e-10,
        format!("max |theta' - closed form| {theta_err:.3e} <= 1e-8, max TV {tv:.3e} <= 1e-10"),
    )
}

fn criterion_3() -> Verdict {
    let mut worst: f64 = 0.0;
    for (seq, thetas) in families() {
        for &theta in thetas {
            for p in PS {
                let t = tp(p);
                let rhs = seq.phi_eval(theta, 1e-14).unwrap() / seq.phi_eval(t.q() * theta, 1e-14).unwrap();
                for h in [solve_h_p(&seq, theta, t, 1e-8).unwrap(), closed_form_h_p(&seq, theta, t).unwrap()] {
                    worst = worst.max((seq.phi_eval(h, 1e-14).unwrap() - rhs).abs());
                }
            }
        }
    }
    verdict(worst <= 1e-8, format!("max |phi(h_p) - phi(theta)/phi(q theta)| {worst:.3e} <= 1e-8"))
}

fn criterion_4() -> Verdict {
    let s = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut worst: f64 = 0.0;
    for (seq, thetas) in families() {
        for &theta in thetas {
            for p in PS {
                worst = worst.max(pgf_composition_check(&seq, theta, tp(p), &s, TRUNC).unwrap());
            }
        }
    }
    verdict(worst <= 1e-10, format!("max PGF composition residual {worst:.3e} <= 1e-10"))
}

fn criterion_5() -> Verdict {
    let u: Vec<f64> = (-5..=5).map(|i| i as f64 / 10.0).collect();
    let v: Vec<f64> = (0..=10).map(|i| i as f64 / 20.0).collect();
    let mut worst: f64 = 0.0;
    let mut evaluated = 0;
    for (seq, _) in families() {
        // ρ is 1, 1/(1+v), 1/(1-v) for the three families
        let rho = RhoMap::new(seq.clone(), tp(0.5), RhoMode::ClosedForm).unwrap();
        let expected = |x: f64| match seq {
            CoefficientSequence::Poisson => 1.0,
            CoefficientSequence::Binomial { .. } => 1.0 / (1.0 + x),
            _ => 1.0 / (1.0 - x),
        };
        for &x in &v {
            worst = worst.max((rho.eval(x).unwrap() - expected(x)).abs());
        }
        for mode in [RhoMode::ClosedForm, RhoMode::Solved] {
            let r = rho_check(&RhoMap::new(seq.clone(), tp(0.5), mode).unwrap(), &u, &v).unwrap();
            worst = worst.max(r.max_residual);
            evaluated += r.evaluated;
        }
    }
    verdict(
        worst <= 1e-9 && evaluated > 0,
        format!("max proto-equation residual {worst:.3e} <= 1e-9 over {evaluated} points"),
    )
}

fn criterion_6() -> Verdict {
    let seq = CoefficientSequence::custom(vec![1.0, 1.0, 1.0], None).unwrap();
    let r = check_invariance(&seq, 1.0, tp(0.5), &InvarianceTolerances::default()).unwrap();
    verdict(!r.passed && r.tv > 1e-3, format!("custom (1,1,1) rejected with TV {:.3e} > 1e-3", r.tv))
}

fn criterion_7() -> Verdict {
    let mu = CoefficientSequence::Poisson.pmf(2.0, TRUNC).unwrap();
    let mc = thin_mc(&mu, tp(0.3), 1_000_000, SEED).unwrap();
    let tv = tv_distance(&mc, &thin_exact(&mu, tp(0.3))).distance;
    verdict(tv <= 0.005, format!("TV(mc, exact) {tv:.3e} <= 5e-3 with n = 1e6"))
}

fn criterion_8() -> Verdict {
    let words = MagmaOps::words();
    let axis: Vec<Rational64> = (0..20).map(|k| Rational64::new(k, 4)).collect();
    let wpairs = pair_grid(&axis, &axis);
    let mut step_worst: f64 = 0.0;
    let steps = [
        Theorem1Solution::S0Zero { a: MagmaElement::word("x"), b: Rational64::from_integer(1) },
        Theorem1Solution::S0Positive { s0: Rational64::from_integer(1), a: MagmaElement::word("ab") },
        Theorem1Solution::S0Positive { s0: Rational64::new(5, 3), a: MagmaElement::word("y") },
    ];
    for sol in &steps {
        let inst = make_theorem1(sol, &words).unwrap();
        step_worst = step_worst.max(residual_check(&inst, &wpairs, 0.0).unwrap().max_residual);
    }

    let grid = linspace(0.0, 100.0, 41);
    let pairs = pair_grid(&grid, &grid);
    let mut smooth_worst: f64 = 0.0;
    let mut perturbed_min = f64::INFINITY;
    for alpha in [0.0, 0.5, 1.0, 3.0] {
        for a in [MagmaElement::Real(1.5), MagmaElement::Vector(vec![1.0, -2.0])] {
            let inst = make_log_family(&LogFamilySolution { alpha, a }).unwrap();
            smooth_worst = smooth_worst.max(residual_check(&inst, &pairs, 1e-10).unwrap().max_residual);
            let bent = inst.with_side_factor(1.0 + 1e-3);
            perturbed_min = perturbed_min.min(residual_check(&bent, &pairs, 1e-10).unwrap().max_residual);
        }
    }
    verdict(
        step_worst == 0.0 && smooth_worst <= 1e-10 && perturbed_min >= 1e-5,
        format!(
            "step residual {step_worst} == 0, linear/log {smooth_worst:.3e} <= 1e-10, perturbed {perturbed_min:.3e} >= 1e-5"
        ),
    )
}

fn criterion_9() -> Verdict {
    let s = linspace(0.0, 4.75, 20);
    let (a, b) = (2.0, 3.0);
    let lin = derive_h_from_f(&|x| a * x, &s, 1e-4).unwrap();
    let log = derive_h_from_f(&|x: f64| b * (a * x).ln_1p(), &s, 1e-4).unwrap();
    let mut worst: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        worst = worst.max((lin[i] - 1.0).abs());
        worst = worst.max((log[i] - 1.0 / (1.0 + a * x)).abs());
    }
    verdict(worst <= 1e-6, format!("max |h - 1/g| {worst:.3e} <= 1e-6 on 20 points, both forms"))
}

fn candidate(a: [f64; 2], g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> CgsInstance<Vec<f64>> {
    CgsInstance::new(
        "candidate",
        EquationForm::Rew,
        Domain::VectorSpace(2),
        MagmaOps::reals(),
        move |v: &Vec<f64>| MagmaElement::Real(a[0] * v[0] + a[1] * v[1]),
        move |v: &Vec<f64>| g(v),
    )
}

fn criterion_10() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let grid = symmetric_grid(2, 3.0, 7);
    let (mut falsified, mut consistent) = (0, 0);
    for i in 0..10 {
        let a: [f64; 2] = [rng.random_range(0.5..2.0), rng.random_range(-2.0..-0.5)];
        let c: f64 = rng.random_range(0.1..1.5);
        let inst = if i % 2 == 0 {
            candidate(a, move |v| 1.0 + c * v[0])
        } else {
            candidate(a, move |v| 1.0 + c * (v[0] - v[1]).sin())
        };
        if let RigidityVerdict::Falsified(w) = vector_space_rigidity_falsifier(&inst, &grid, 1e-10).unwrap() {
            // the witness must really violate the equation
            if inst.residual_at(&w.s, &w.t).unwrap() > 1e-10 {
                falsified += 1;
            }
        }
        let a: [f64; 2] = [rng.random_range(-2.0..2.0), rng.random_range(0.5..2.0)];
        let additive = candidate(a, |_| 1.0);
        if vector_space_rigidity_falsifier(&additive, &grid, 1e-10).unwrap().is_consistent() {
            consistent += 1;
        }
    }
    verdict(
        falsified == 10 && consistent == 10,
        format!("{falsified}/10 non-constant g falsified with witnesses, {consistent}/10 additive consistent"),
    )
}

fn criterion_11() -> Verdict {
    let grid = linspace(0.0, 100.0, 41);
    let pairs = pair_grid(&grid, &grid);
    let mut g_ok = true;
    let mut worst: f64 = 0.0;
    for alpha in [0.0, 0.25, 1.0, 4.0] {
        let inst = make_log_family(&LogFamilySolution { alpha, a: MagmaElement::Real(1.0) }).unwrap();
        g_ok &= inst.f(&0.0) == MagmaElement::Real(0.0);
        g_ok &= grid.iter().all(|s| inst.side(s).unwrap() > 0.0);
        let dual = inst.dual(&grid).unwrap();
        worst = worst.max(residual_check(&dual, &pairs, 1e-10).unwrap().max_residual);
        worst = worst.max(residual_check(&dual.dual(&grid).unwrap(), &pairs, 1e-10).unwrap().max_residual);
    }
    let step = make_theorem1(
        &Theorem1Solution::S0Positive { s0: Rational64::from_integer(1), a: MagmaElement::word("ab") },
        &MagmaOps::words(),
    )
    .unwrap();
    let axis: Vec<Rational64> = (0..8).map(|k| Rational64::new(k, 2)).collect();
    let kernel_detected = step.dual(&axis).is_err();
    verdict(
        g_ok && kernel_detected && worst <= 1e-10,
        format!("g > 0 and f(0) = 0: {g_ok}, step kernel detected: {kernel_detected}, duality residual {worst:.3e} <= 1e-10"),
    )
}

fn criterion_12() -> Verdict {
    let cfg = RunConfig {
        seed: Some(SEED),
        ..RunConfig::default()
    };
    let a = run_suite(&cfg).unwrap();
    let b = run_suite(&cfg).unwrap();
    let ja = serde_json::to_vec_pretty(&a).unwrap();
    let jb = serde_json::to_vec_pretty(&b).unwrap();
    let failing: Vec<&str> = a.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    verdict(
        ja == jb && a.overall,
        format!(
            "two suite runs byte-identical: {} ({} bytes), suite overall pass: {} {failing:?}",
            ja == jb,
            ja.len(),
            a.overall
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("Poisson invariance", criterion_1),
        ("Binomial and negative binomial invariance", criterion_2),
        ("phi identity", criterion_3),
        ("PGF composition", criterion_4),
        ("proto equation", criterion_5),
        ("negative control", criterion_6),
        ("Monte Carlo consistency", criterion_7),
        ("CGS solution suites", criterion_8),
        ("derivative recovery of h", criterion_9),
        ("vector-space rigidity", criterion_10),
        ("duality and kernel invariants", criterion_11),
        ("determinism", criterion_12),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let v = run();
        if !v.passed {
            failures += 1;
        }
        println!(
            "criterion {:>2} {}: {name}: {}",
            i + 1,
            if v.passed { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
