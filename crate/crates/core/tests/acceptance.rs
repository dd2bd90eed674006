//! Acceptance criteria. Each criterion prints one `PASS`/`FAIL` line with its
//! measured value, tolerance and runtime; the test fails if any criterion fails.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use meanslab_core::constants::{beta, gamma, kantorovich, kantorovich_classic, specht};
use meanslab_core::harness::{run_suite, CheckId, Instance, InstanceConfig, SuiteConfig};
use meanslab_core::means2::mean2;
use meanslab_core::means_n::{
    arithmetic_mean, base_mean, deformed_mean, harmonic_mean, karcher_mean, karcher_scale, log_euclidean, power_mean,
};
use meanslab_core::scalar;
use meanslab_core::spd::{op_norm, random_spd_with, random_spectrum, SpdMatrix};
use meanslab_core::{BaseMean, MeanTwo, NMeanSpec, SolverConfig, SpectralBounds, Weights};

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, limit: Duration, run: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = run();
    let took = start.elapsed();
    let in_time = took <= limit;
    let pass = out.pass && in_time;
    println!(
        "[{}] criterion {id} {name}: {}; {:.2} s (limit {} s){}",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        took.as_secs_f64(),
        limit.as_secs(),
        if in_time { "" } else { " OVER TIME" }
    );
    pass
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn rel_op(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    op_norm(&(a - b)) / op_norm(b)
}

fn random_weights(n: usize, rng: &mut impl Rng) -> Weights {
    let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    Weights::normalized(&scores).unwrap()
}

fn random_sigma(rng: &mut impl Rng, lo: f64) -> MeanTwo {
    let alpha = rng.random_range(lo..=1.0);
    match rng.random_range(0..3) {
        0 => MeanTwo::geometric(alpha).unwrap(),
        1 => MeanTwo::arithmetic(alpha).unwrap(),
        _ => MeanTwo::harmonic(alpha).unwrap(),
    }
}

/// `max` (or `min`) of `f` on `[lo, hi]`: dense grid, then golden-section refinement
/// around the best grid point. `f` is unimodal on the bracket for every use below.
fn grid_extremum(lo: f64, hi: f64, maximize: bool, f: impl Fn(f64) -> f64) -> f64 {
    let sign = if maximize { 1.0 } else { -1.0 };
    let g = |t: f64| sign * f(t);
    let n = 20_000;
    let step = (hi - lo) / n as f64;
    let (mut best_i, mut best) = (0usize, g(lo));
    for i in 1..=n {
        let v = g(lo + step * i as f64);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let (mut a, mut b) = (lo + step * best_i.saturating_sub(1) as f64, (lo + step * (best_i + 1) as f64).min(hi));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if g(c) >= g(d) {
            b = d;
        } else {
            a = c;
        }
    }
    sign * best.max(g(0.5 * (a + b))).max(g(lo)).max(g(hi))
}

fn scalar_power_closed_form(w: &[f64], alpha: f64, a: &[f64]) -> f64 {
    w.iter().zip(a).map(|(wj, aj)| wj * aj.powf(alpha)).sum::<f64>().powf(1.0 / alpha)
}

fn c1_scalar_power_mean() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let alphas = [-1.0, -0.75, -0.5, -0.25, -0.1, 0.1, 0.25, 0.5, 0.75, 1.0];
    let mut worst = 0.0f64;
    let mut points = 0;
    for &alpha in &alphas {
        for _ in 0..10 {
            let n = rng.random_range(2..=5);
            let w = random_weights(n, &mut rng);
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..10.0)).collect();
            let mats: Vec<SpdMatrix> = a.iter().map(|&x| SpdMatrix::scalar(x).unwrap()).collect();
            let x = power_mean(&w, alpha, &mats, &SolverConfig::default()).unwrap().entries()[(0, 0)];
            worst = worst.max(rel(x, scalar_power_closed_form(w.as_slice(), alpha, &a)));
            points += 1;
        }
    }
    Outcome { pass: worst <= 1e-12, detail: format!("{points} points, max rel err {worst:.2e} (tol 1e-12)") }
}

fn c2_commuting_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = SolverConfig::default();
    let bounds = InstanceConfig::default().bounds;
    let mut worst = 0.0f64;
    let mut evaluations = 0;
    for _ in 0..200 {
        let dim = rng.random_range(1..=6);
        let n = rng.random_range(2..=4);
        let b = bounds[rng.random_range(0..bounds.len())];
        let diags: Vec<Vec<f64>> = (0..n).map(|_| random_spectrum(dim, b, &mut rng)).collect();
        let mats: Vec<SpdMatrix> = diags.iter().map(|d| SpdMatrix::diagonal(d).unwrap()).collect();
        let w = random_weights(n, &mut rng);
        let ws = w.as_slice();
        let column = |i: usize| diags.iter().map(|d| d[i]).collect::<Vec<f64>>();
        let mut compare = |x: &SpdMatrix, f: &dyn Fn(&[f64]) -> f64| {
            for i in 0..dim {
                worst = worst.max(rel(x.entries()[(i, i)], f(&column(i))));
                for j in 0..dim {
                    if i != j {
                        worst = worst.max(x.entries()[(i, j)].abs() / x.op_norm());
                    }
                }
            }
            evaluations += 1;
        };
        compare(&arithmetic_mean(&w, &mats).unwrap(), &|a| ws.iter().zip(a).map(|(w, a)| w * a).sum());
        compare(&harmonic_mean(&w, &mats).unwrap(), &|a| 1.0 / ws.iter().zip(a).map(|(w, a)| w / a).sum::<f64>());
        let geometric = |a: &[f64]| ws.iter().zip(a).map(|(w, a)| w * a.ln()).sum::<f64>().exp();
        compare(&karcher_mean(&w, &mats, &cfg).unwrap().0, &geometric);
        compare(&log_euclidean(&w, &mats).unwrap(), &geometric);
        for alpha in [-1.0, -0.5, 0.3, 0.5, 1.0] {
            compare(&power_mean(&w, alpha, &mats, &cfg).unwrap(), &|a| scalar_power_closed_form(ws, alpha, a));
        }
        for base in [BaseMean::Arithmetic, BaseMean::Harmonic] {
            let sigma = random_sigma(&mut rng, 0.1);
            let spec = NMeanSpec::deformed(base, w.clone(), sigma.clone()).unwrap();
            let (x, _) = deformed_mean(&spec, &mats, &cfg).unwrap();
            compare(&x, &|a| scalar::deformed_mean(base, ws, &sigma, a));
        }
    }
    Outcome { pass: worst <= 1e-10, detail: format!("200 cases, {evaluations} means, max rel err {worst:.2e} (tol 1e-10)") }
}

fn fixed_point_defect(spec: &NMeanSpec, mats: &[SpdMatrix], x: &SpdMatrix) -> f64 {
    let sigma = spec.deform.as_ref().unwrap();
    let moved: Vec<SpdMatrix> = mats.iter().map(|a| mean2(sigma, x, a).unwrap()).collect();
    let image = base_mean(spec.base, &spec.weights, &moved).unwrap();
    rel_op(image.entries(), x.entries())
}

fn c3_solver_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = SolverConfig::default();
    let (mut failures, mut max_iter, mut worst) = (0, 0, 0.0f64);
    for _ in 0..500 {
        let dim = rng.random_range(1..=6);
        let n = rng.random_range(2..=5);
        let b = SpectralBounds::new(1.0, rng.random_range(1.5..=100.0)).unwrap();
        let mats: Vec<SpdMatrix> = (0..n).map(|_| random_spd_with(dim, b, &mut rng).unwrap()).collect();
        let base = if rng.random_bool(0.5) { BaseMean::Arithmetic } else { BaseMean::Harmonic };
        let spec = NMeanSpec::deformed(base, random_weights(n, &mut rng), random_sigma(&mut rng, 0.1)).unwrap();
        match deformed_mean(&spec, &mats, &cfg) {
            Ok((x, trace)) if trace.converged && trace.residual <= 1e-12 && trace.iterations <= 500 => {
                max_iter = max_iter.max(trace.iterations);
                let defect = fixed_point_defect(&spec, &mats, &x);
                worst = worst.max(defect);
                if defect > 1e-12 {
                    failures += 1;
                }
            }
            _ => failures += 1,
        }
    }
    Outcome {
        pass: failures == 0,
        detail: format!("500 instances, {failures} non-convergences, max iterations {max_iter}, max recomputed residual {worst:.2e} (tol 1e-12)"),
    }
}

fn c4_karcher_residual() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = SolverConfig::default();
    let bounds = InstanceConfig::default().bounds;
    let (mut worst_grad, mut worst_mid) = (0.0f64, 0.0f64);
    for k in 0..200 {
        let dim = rng.random_range(2..=6);
        let n = if k % 4 == 0 { 2 } else { rng.random_range(2..=5) };
        let b = bounds[rng.random_range(0..bounds.len())];
        let mats: Vec<SpdMatrix> = (0..n).map(|_| random_spd_with(dim, b, &mut rng).unwrap()).collect();
        let w = if n == 2 { Weights::uniform(2) } else { random_weights(n, &mut rng) };
        let (x, _) = karcher_mean(&w, &mats, &cfg).unwrap();
        let root_inv = x.pow(-0.5).unwrap();
        let mut grad = DMatrix::zeros(dim, dim);
        for (wj, a) in w.as_slice().iter().zip(&mats) {
            let whitened = root_inv.entries() * a.entries() * root_inv.entries();
            let whitened = SpdMatrix::new((&whitened + whitened.transpose()) * 0.5).unwrap();
            grad += whitened.log().unwrap() * *wj;
        }
        worst_grad = worst_grad.max(op_norm(&grad) / karcher_scale(&mats).unwrap());
        if n == 2 {
            let (a, bm) = (&mats[0], &mats[1]);
            let ar = a.pow(0.5).unwrap();
            let ari = a.pow(-0.5).unwrap();
            let inner = ari.entries() * bm.entries() * ari.entries();
            let inner = SpdMatrix::new((&inner + inner.transpose()) * 0.5).unwrap().pow(0.5).unwrap();
            let mid = ar.entries() * inner.entries() * ar.entries();
            worst_mid = worst_mid.max(rel_op(x.entries(), &mid));
        }
    }
    Outcome {
        pass: worst_grad <= 1e-10 && worst_mid <= 1e-9,
        detail: format!("200 instances, max residual/scale {worst_grad:.2e} (tol 1e-10), n=2 vs A#B {worst_mid:.2e} (tol 1e-9)"),
    }
}

const SUITE_TRIALS: usize = 500;
const SUITE_SEED: u64 = 20240601;

fn full_suite(jobs: Option<usize>) -> String {
    let mut cfg = SuiteConfig::new("all", CheckId::registry(), SUITE_TRIALS, SUITE_SEED);
    cfg.jobs = jobs;
    serde_json::to_string(&run_suite(&cfg).unwrap()).unwrap()
}

fn c5_inequality_suite(body: &mut Option<String>) -> Outcome {
    let mut cfg = SuiteConfig::new("all", CheckId::registry(), SUITE_TRIALS, SUITE_SEED);
    cfg.jobs = None;
    let report = run_suite(&cfg).unwrap();
    let worst = report
        .summary
        .checks
        .iter()
        .filter_map(|c| c.min_relative_margin.map(|m| (m, c.name)))
        .min_by(|a, b| a.0.total_cmp(&b.0));
    for c in report.summary.checks.iter().filter(|c| c.failures > 0) {
        println!("    {}: {} failures, {} errors, worst seed {:?}", c.name, c.failures, c.errors, c.worst_seed);
    }
    *body = Some(serde_json::to_string(&report).unwrap());
    let (m, name) = worst.unwrap();
    Outcome {
        pass: report.summary.failures == 0 && report.summary.instances == 18 * SUITE_TRIALS,
        detail: format!(
            "{} checks x {SUITE_TRIALS} instances, {} failures, {} errors, smallest relative margin {m:.2e} ({name}), tol -1e-9",
            report.summary.checks.len(),
            report.summary.failures,
            report.summary.errors
        ),
    }
}

fn c6_constants() -> Outcome {
    let mut worst_k = 0.0f64;
    for h in [1.5, 2.0, 5.0, 10.0] {
        let classic = (h + 1.0f64).powi(2) / (4.0 * h);
        worst_k = worst_k.max(rel(kantorovich(h, 2.0).unwrap(), classic)).max(rel(kantorovich(h, -1.0).unwrap(), classic));
    }
    let pairs = [(1.0, 2.0), (0.5, 4.0), (1.0, 16.0), (2.0, 5.0)];
    let mut worst_gamma_zero = 0.0f64;
    let mut worst_beta_zero = 0.0f64;
    let mut worst_oracle = 0.0f64;
    for &(m, big_m) in &pairs {
        let h = big_m / m;
        worst_beta_zero = worst_beta_zero.max(beta(m, big_m, kantorovich_classic(m, big_m)).unwrap().abs());
        for r in [-2.0, -1.0, -0.5, 0.25, 0.5, 0.75, 1.5, 2.0, 3.0] {
            worst_gamma_zero = worst_gamma_zero.max(gamma(m, big_m, r, kantorovich(h, r).unwrap()).unwrap().abs());
        }
        for alpha in [0.1, 0.5, 1.0, 1.5, 4.0] {
            let oracle = grid_extremum(m, big_m, true, |t| t - alpha * big_m * m / (big_m + m - t));
            worst_oracle = worst_oracle.max((beta(m, big_m, alpha).unwrap() - oracle).abs());
            for r in [-2.0, -1.0, -0.5, 0.25, 0.5, 0.75, 1.5, 2.0, 3.0] {
                let chord = |t: f64| m.powf(r) + (big_m.powf(r) - m.powf(r)) / (big_m - m) * (t - m);
                let maximize = !(0.0..1.0).contains(&r);
                let oracle = grid_extremum(m, big_m, maximize, |t| chord(t) - alpha * t.powf(r));
                worst_oracle = worst_oracle.max((gamma(m, big_m, r, alpha).unwrap() - oracle).abs());
            }
        }
    }
    Outcome {
        pass: worst_k <= 1e-12 && worst_gamma_zero <= 1e-10 && worst_beta_zero <= 1e-12 && worst_oracle <= 1e-8,
        detail: format!(
            "K(h,2)=K(h,-1)=classic {worst_k:.1e} (1e-12), gamma(K)=0 {worst_gamma_zero:.1e} (1e-10), \
             beta(classic)=0 {worst_beta_zero:.1e} (1e-12), grid oracles {worst_oracle:.1e} (1e-8)"
        ),
    }
}

fn c7_improvements() -> Outcome {
    let mut violations = Vec::new();
    let mut min_gap = f64::INFINITY;
    for h in [1.5, 2.0, 5.0] {
        for r in [0.25, 0.5, 0.75] {
            let lhs = kantorovich(h, -r).unwrap();
            let rhs = kantorovich(h, -1.0).unwrap().powf(r);
            min_gap = min_gap.min(rhs - lhs);
            if !(lhs < rhs) {
                violations.push(format!("K({h},-{r})"));
            }
        }
    }
    let mut min_ratio_gap = f64::INFINITY;
    for (m, big_m) in [(1.0, 2.0), (0.5, 4.0), (1.0, 16.0)] {
        let h: f64 = big_m / m;
        for (q, p) in [(1.0, 2.0), (1.5, 3.0), (0.5, 1.0), (0.25, 2.0)] {
            let improved = kantorovich(h.powf(p), -q / p).unwrap().powf(1.0 / q);
            let classic = kantorovich_classic(m.powf(p), big_m.powf(p)).powf(1.0 / p);
            min_ratio_gap = min_ratio_gap.min(classic - improved);
            if !(improved < classic) {
                violations.push(format!("(q,p)=({q},{p}) at h={h}"));
            }
        }
    }
    Outcome {
        pass: violations.is_empty(),
        detail: format!(
            "min K(h,-1)^r - K(h,-r) = {min_gap:.3e}, min classic - improved = {min_ratio_gap:.3e}, violations {violations:?}"
        ),
    }
}

fn c8_lie_trotter() -> Outcome {
    let cfg = SolverConfig::default();
    let mut worst_ratio = 0.0f64;
    for seed in 0..50 {
        let inst = Instance::generate(seed, &InstanceConfig::default()).unwrap();
        let spec = inst.spec().unwrap();
        let target = log_euclidean(&inst.weights, &inst.matrices).unwrap();
        let e = |p: f64| {
            let powered: Vec<SpdMatrix> = inst.matrices.iter().map(|a| a.pow(p).unwrap()).collect();
            let x = spec.eval_matrix(&powered, &cfg).unwrap().pow(1.0 / p).unwrap();
            op_norm(&(x.entries() - target.entries()))
        };
        let mut prev = e(0.2);
        for p in [0.2, 0.1, 0.05, 0.025] {
            let next = e(p / 2.0);
            worst_ratio = worst_ratio.max(next / prev);
            prev = next;
        }
    }
    let mut worst_specht = 0.0f64;
    for h in [1.5f64, 2.0, 5.0, 10.0, 16.0] {
        let q: f64 = 1e-4;
        worst_specht = worst_specht.max((kantorovich(h.powf(q), 1.0 / q).unwrap() - specht(h).unwrap()).abs());
    }
    Outcome {
        pass: worst_ratio <= 0.75 && worst_specht <= 1e-3,
        detail: format!("50 instances, max e(p/2)/e(p) = {worst_ratio:.3} (<= 0.75), max |K(h^q,1/q) - S(h)| = {worst_specht:.2e} (1e-3)"),
    }
}

fn c9_determinism(first: Option<&str>) -> Outcome {
    let first = first.map(str::to_owned).unwrap_or_else(|| full_suite(None));
    let second = full_suite(Some(2));
    Outcome {
        pass: first == second,
        detail: format!("{} byte report bodies, {}", first.len(), if first == second { "identical" } else { "differ" }),
    }
}

#[test]
fn acceptance() {
    let secs = Duration::from_secs;
    let mut all = true;
    all &= report(1, "scalar oracle equivalence", secs(1), c1_scalar_power_mean);
    all &= report(2, "commuting oracle equivalence", secs(10), c2_commuting_oracles);
    all &= report(3, "solver contract", secs(120), c3_solver_contract);
    all &= report(4, "Karcher residual", secs(60), c4_karcher_residual);
    let mut body = None;
    all &= report(5, "inequality suite", secs(900), || c5_inequality_suite(&mut body));
    all &= report(6, "constants identities", secs(60), c6_constants);
    all &= report(7, "improvement claims", secs(1), c7_improvements);
    all &= report(8, "Lie-Trotter rate and Specht limit", secs(120), c8_lie_trotter);
    all &= report(9, "determinism", secs(900), || c9_determinism(body.as_deref()));
    assert!(all, "at least one acceptance criterion failed");
}
