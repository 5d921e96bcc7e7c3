//! Acceptance suite. Each test evaluates one criterion at its stated
//! tolerance and prints a single `acceptance <k> PASS|FAIL` line, bypassing
//! the test harness capture so the line shows up for passing tests too.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use cvswap::analysis::{
    block_logneg_formula, block_logneg_numeric, gle_formula, gle_numeric,
    pairwise_logneg_formula, pairwise_logneg_numeric, symmetric_groups, NetworkPoint,
};
use cvswap::gaussian::BONA_FIDE_TOL;
use cvswap::optomech::{
    lyapunov_residual, mechanical_cluster, steady_state_raw, sweep_point, KappaConvention,
    OptomechParams, SweepPoint,
};
use cvswap::relay::{bell_detect, build_relay, cluster_closed_form, BellOutcome};
use cvswap::sources::{sample_normal_form, tmsv, tmsv_output_bound, SampledForm};
use cvswap::GaussianState;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_517;

fn report(k: u32, name: &str, passed: bool, detail: &str) {
    let verdict = if passed { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "acceptance {k} {verdict} {name}: {detail}").unwrap();
    out.flush().unwrap();
}

fn max_abs<'a>(it: impl IntoIterator<Item = &'a f64>) -> f64 {
    it.into_iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

fn random_forms(count: usize) -> Vec<SampledForm> {
    (0..count)
        .map(|i| sample_normal_form(&mut ChaCha8Rng::seed_from_u64(SEED + i as u64), 10.0).unwrap())
        .collect()
}

fn relay_output(copy: &GaussianState, n: usize) -> GaussianState {
    bell_detect(&vec![copy.clone(); n], &build_relay(n).unwrap(), &BellOutcome::zeros(n)).unwrap()
}

/// Kronecker sequence over (μ, η, ω, N): 100 well-spread points in
/// `[1,10] × [0.1,1] × [1,5] × {2..8}`.
fn network_grid() -> Vec<NetworkPoint> {
    let alphas = [2f64.sqrt(), 3f64.sqrt(), 5f64.sqrt(), 7f64.sqrt()];
    (1..=100)
        .map(|k| {
            let u: Vec<f64> = alphas.iter().map(|a| (k as f64 * a).fract()).collect();
            let n = 2 + ((u[3] * 7.0) as usize).min(6);
            NetworkPoint::new(1.0 + 9.0 * u[0], 0.1 + 0.9 * u[1], 1.0 + 4.0 * u[2], n).unwrap()
        })
        .collect()
}

fn benchmark_sweep(convention: KappaConvention, n: usize) -> Vec<SweepPoint> {
    (0..=150)
        .map(|i| {
            let p = OptomechParams::benchmark(convention, 8e6, 1.5 * i as f64 / 150.0);
            sweep_point(&p, n, true).unwrap()
        })
        .collect()
}

fn best_mech(points: &[SweepPoint]) -> f64 {
    points
        .iter()
        .filter(|p| p.stable)
        .map(|p| p.e_mech)
        .fold(f64::NAN, f64::max)
}

#[test]
fn criterion_1_closed_form_fidelity() {
    let started = Instant::now();
    let forms = random_forms(200);
    let mut worst = 0.0_f64;
    for sf in &forms {
        let copy = sf.nf.to_state();
        for n in 2..=8 {
            let out = relay_output(&copy, n);
            let closed = cluster_closed_form(&sf.nf, n).unwrap().assemble();
            worst = worst.max(max_abs((out.cov() - closed).iter()));
        }
    }
    let elapsed = started.elapsed();
    let passed = worst < 1e-9 && elapsed < Duration::from_secs(30);
    report(
        1,
        "closed-form fidelity",
        passed,
        &format!("200 forms x N=2..8, max |dV| = {worst:.3e} (< 1e-9), {:.2} s (< 30 s)", elapsed.as_secs_f64()),
    );
    assert!(passed);
}

#[test]
fn criterion_2_formulas_match_oracles() {
    let (mut pair_err, mut gle_err, mut block_err, mut full_house_err) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    let mut full_house_exact = true;
    let mut full_house_points = 0;
    for pt in network_grid() {
        let n = pt.n_users();
        let cluster = pt.cluster().unwrap().to_state().unwrap();
        pair_err = pair_err.max(
            (pairwise_logneg_numeric(&cluster, 0, n - 1).unwrap() - pairwise_logneg_formula(&pt).value).abs(),
        );
        gle_err = gle_err.max((gle_numeric(&cluster, 0, n - 1).unwrap().value - gle_formula(&pt).value).abs());
        for np in 1..=n / 2 {
            let (ga, gb) = symmetric_groups(n, np);
            let numeric = block_logneg_numeric(&cluster, &ga, &gb).unwrap();
            let formula = block_logneg_formula(&pt, np).unwrap();
            block_err = block_err.max((numeric - formula.value).abs());
            if 2 * np == n {
                full_house_points += 1;
                let e2 = pt.two_user_raw().max(0.0);
                full_house_exact &= formula.value == e2;
                full_house_err = full_house_err.max((numeric - e2).abs());
            }
        }
    }
    let passed = pair_err < 1e-9 && gle_err < 1e-6 && block_err < 1e-9 && full_house_exact && full_house_err < 1e-9;
    report(
        2,
        "formula vs numeric oracle",
        passed,
        &format!(
            "100 points: pairwise {pair_err:.2e} (< 1e-9), GLE {gle_err:.2e} (< 1e-6), block {block_err:.2e} (< 1e-9), \
             full house exact = {full_house_exact} on {full_house_points} points, numeric {full_house_err:.2e}"
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_3_ghz_limit() {
    let mut worst = 0.0_f64;
    for mu in [2.0, 10.0, 100.0] {
        let copy = tmsv(mu).unwrap().to_state();
        for n in 2..=8 {
            let v = relay_output(&copy, n).cov().clone();
            let mut var_p_sum = 0.0;
            for i in 0..n {
                for j in 0..n {
                    var_p_sum += v[(2 * i + 1, 2 * j + 1)];
                }
            }
            worst = worst.max((var_p_sum - n as f64 / mu).abs());
            for i in 0..n {
                for j in i + 1..n {
                    let var = v[(2 * i, 2 * i)] + v[(2 * j, 2 * j)] - 2.0 * v[(2 * i, 2 * j)];
                    worst = worst.max((var - 2.0 / mu).abs());
                }
            }
        }
    }
    let passed = worst < 1e-9;
    report(
        3,
        "GHZ variance identities",
        passed,
        &format!("mu in {{2, 10, 100}}, N=2..8, max deviation {worst:.3e} (< 1e-9)"),
    );
    assert!(passed);
}

#[test]
fn criterion_4_tmsv_upper_bound() {
    let forms = random_forms(10_000);
    let mut above = 0;
    let mut worst_excess = 0.0_f64;
    let mut worst_d = 0.0;
    let mut asym = 0;
    let mut asym_min_gap = f64::INFINITY;
    for sf in &forms {
        let gap = tmsv_output_bound(sf.e_in) - sf.e_out;
        if gap < -1e-12 {
            above += 1;
            if -gap > worst_excess {
                worst_excess = -gap;
                worst_d = sf.asymmetry();
            }
        }
        if sf.asymmetry().abs() >= 1.0 {
            asym += 1;
            asym_min_gap = asym_min_gap.min(gap);
        }
    }
    let passed = above == 0 && asym_min_gap > 1e-12;
    report(
        4,
        "TMSV output bound",
        passed,
        &format!(
            "{} samples: {above} above the bound (worst excess {worst_excess:.3e} at d = {worst_d:.3}); \
             {asym} with |d| >= 1, smallest gap {asym_min_gap:.3e} (> 1e-12)",
            forms.len()
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_5_optomechanical_reproduction() {
    let started = Instant::now();
    let convention = KappaConvention::Angular;
    let sweeps: Vec<Vec<SweepPoint>> = (2..=5).map(|n| benchmark_sweep(convention, n)).collect();
    let elapsed = started.elapsed();

    let n2 = &sweeps[0];
    let stable = n2.iter().filter(|p| p.stable).count();
    let a = stable > 0;
    let e_in_max = n2.iter().filter(|p| p.stable).map(|p| p.e_in).fold(f64::NAN, f64::max);
    let b = e_in_max > 0.0;
    let best: Vec<f64> = sweeps.iter().map(|s| best_mech(s)).collect();
    let c = best[0] > 0.0;
    let d = best.iter().all(|&e| e > 0.0) && best.windows(2).all(|w| w[1] < w[0]);
    let fast = elapsed < Duration::from_secs(60);

    // The other reading of the quoted cavity linewidth, for the record.
    let other: Vec<f64> = (2..=5).map(|n| best_mech(&benchmark_sweep(KappaConvention::Ordinary, n))).collect();

    let passed = a && b && c && d && fast;
    report(
        5,
        "optomechanical cluster",
        passed,
        &format!(
            "(a) stable {stable}/{} [{a}], (b) max optical-mechanical E_N {e_in_max:.4} [{b}], \
             (c) N=2 mechanical E_N {:.4} [{c}], (d) max E_N for N=2..5 {best:?} [{d}], \
             sweep {:.2} s [{fast}]; ordinary kappa gives {other:?}",
            n2.len(),
            best[0],
            elapsed.as_secs_f64()
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_6_physicality() {
    let mut nu_min = f64::INFINITY;
    let mut states = 0usize;
    let mut exceed = 0usize;
    let mut checked = 0usize;
    let mut check_state = |s: &GaussianState| {
        nu_min = nu_min.min(s.check_bona_fide().map_or(f64::NEG_INFINITY, |v| v));
        states += 1;
    };

    // Random inputs through the relay.
    for sf in random_forms(200) {
        let copy = sf.nf.to_state();
        check_state(&copy);
        for n in 2..=8 {
            let out = relay_output(&copy, n);
            check_state(&out);
            let pair = out.reduce(&[0, 1]).unwrap().log_negativity(&[1]).unwrap();
            checked += 1;
            exceed += usize::from(pair > sf.e_in + 1e-12);
        }
    }

    // Network grid: lossy inputs, clusters, every entanglement measure.
    for pt in network_grid() {
        let n = pt.n_users();
        let nf = pt.normal_form().unwrap();
        let e_in = nf.log_negativity();
        check_state(&nf.to_state());
        let cluster = pt.cluster().unwrap().to_state().unwrap();
        check_state(&cluster);
        let mut outputs = vec![
            pairwise_logneg_numeric(&cluster, 0, n - 1).unwrap(),
            gle_numeric(&cluster, 0, n - 1).unwrap().value,
        ];
        for np in 1..=n / 2 {
            let (ga, gb) = symmetric_groups(n, np);
            outputs.push(block_logneg_numeric(&cluster, &ga, &gb).unwrap());
        }
        checked += outputs.len();
        exceed += outputs.iter().filter(|&&e| e > e_in + 1e-12).count();
    }

    // Optomechanical steady states and mechanical clusters.
    let mut lyap_worst = 0.0_f64;
    for convention in [KappaConvention::Angular, KappaConvention::Ordinary] {
        for g_hz in [2e6, 5e6, 8e6] {
            for i in 0..=30 {
                let p = OptomechParams::benchmark(convention, g_hz, 1.5 * i as f64 / 30.0);
                let Ok((a, d, v)) = steady_state_raw(&p) else { continue };
                let scale = max_abs(d.iter()).max(max_abs((&a * &v).iter()));
                lyap_worst = lyap_worst.max(lyapunov_residual(&a, &d, &v) / scale);
                for n in [2, 5] {
                    for pre in [true, false] {
                        let mc = mechanical_cluster(&p, n, pre).unwrap();
                        check_state(&mc.state);
                        checked += 1;
                        exceed += usize::from(mc.e_mech > mc.e_in + 1e-12);
                    }
                }
            }
        }
    }

    let passed = nu_min >= 1.0 - BONA_FIDE_TOL && lyap_worst < 1e-10 && exceed == 0;
    report(
        6,
        "physicality",
        passed,
        &format!(
            "{states} states, min symplectic eigenvalue {nu_min:.12} (>= 1 - 1e-9), \
             Lyapunov residual {lyap_worst:.2e} relative (< 1e-10), {exceed}/{checked} outputs above input entanglement"
        ),
    );
    assert!(passed);
}

fn run_cli(args: &[&str], out: &Path, workers: &str) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_cvswap"))
        .args(args)
        .args(["--seed", "11", "--out", out.to_str().unwrap()])
        .env("CVSWAP_WORKERS", workers)
        .output()
        .expect("binary runs");
    assert!(status.status.success(), "{args:?}: {}", String::from_utf8_lossy(&status.stderr));
    std::fs::read(out).unwrap()
}

#[test]
fn criterion_7_deterministic_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut differing = Vec::new();
    let mut bytes = 0;
    for exp in cvswap_cli::config::Experiment::NAMES {
        for format in ["csv", "json"] {
            let args = [exp, "--format", format];
            let first = run_cli(&args, &dir.path().join(format!("{exp}-1.{format}")), "1");
            let second = run_cli(&args, &dir.path().join(format!("{exp}-2.{format}")), "3");
            bytes += first.len();
            if first != second || first.is_empty() {
                differing.push(format!("{exp}/{format}"));
            }
        }
    }
    let passed = differing.is_empty();
    report(
        7,
        "deterministic CLI output",
        passed,
        &format!(
            "{} experiments x 2 formats run twice ({bytes} bytes), differing: {differing:?}",
            cvswap_cli::config::Experiment::NAMES.len()
        ),
    );
    assert!(passed);
}
