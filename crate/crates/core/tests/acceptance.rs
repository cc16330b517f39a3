//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run with `cargo test -p maskspectra --test acceptance`.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use maskspectra::bounds::{
    bound_report, dirichlet_closed_form, gaussian_bound, ratio_approximation, sigma_bound, worst_case_bound,
    BoundSpec,
};
use maskspectra::mask::{generate_mask, is_prime, nominal_support, worst_case_mask, Mask, MaskConfig};
use maskspectra::montecarlo::{run_experiment, ExperimentSpec};
use maskspectra::qfunc::{q_function, q_inverse};
use maskspectra::recovery::{recover, sample_random, RecoverySpec, DEFAULT_ALPHA};
use maskspectra::spectrum::{dft_direct, dft_fast, max_nonzero_bin, FastDft};

type Outcome = Result<String, String>;

fn workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(8)
}

fn within_rel(got: f64, want: f64, rel: f64) -> bool {
    ((got - want) / want).abs() <= rel
}

fn timed(limit: Duration, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    if took > limit {
        Err(format!("took {took:.2?}, limit {limit:?}"))
    } else {
        Ok(took)
    }
}

/// 1. Worst-case bound reproduces the published table within 0.05 %.
fn worst_case_table() -> Outcome {
    let start = Instant::now();
    let cases: [(usize, usize, f64); 9] = [
        (127, 64, 40.426),
        (127, 102, 23.439),
        (127, 13, 12.778),
        (1543, 772, 491.152),
        (1543, 1235, 288.207),
        (1543, 155, 152.44),
        (131071, 65535, 4.172e4),
        (131071, 104856, 2.452e4),
        (131071, 13107, 1.289e4),
    ];
    let mut worst = 0.0f64;
    for (n, n_p, want) in cases {
        let got = worst_case_bound(n, n_p).map_err(|e| e.to_string())?;
        let rel = ((got - want) / want).abs();
        worst = worst.max(rel);
        if rel > 5e-4 {
            return Err(format!("({n}, {n_p}): got {got}, want {want} (rel {rel:.2e})"));
        }
    }
    let took = timed(Duration::from_secs(1), start)?;
    Ok(format!("max rel err {worst:.2e}, {took:.2?}"))
}

/// 2. worst_case_bound equals the Dirichlet closed form for every prime
///    N <= 2000 and every n_p.
fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    for n in (2..=2000).filter(|&n| is_prime(n)) {
        for n_p in 1..=n {
            let a = worst_case_bound(n, n_p).map_err(|e| e.to_string())?;
            let b = dirichlet_closed_form(n, n_p).map_err(|e| e.to_string())?;
            let err = (a - b).abs() / b.max(1.0);
            worst = worst.max(err);
            if err > 1e-9 {
                return Err(format!("N={n} n_p={n_p}: {a} vs {b}"));
            }
            checked += 1;
        }
    }
    let took = timed(Duration::from_secs(30), start)?;
    Ok(format!("{checked} pairs, max rel err {worst:.2e}, {took:.2?}"))
}

/// 3. Exhaustive enumeration: no mask beats the contiguous block.
fn brute_force_maximality() -> Outcome {
    let start = Instant::now();
    for n in [7usize, 11, 13] {
        let mut best = vec![0.0f64; n + 1];
        for bits in 0u32..(1 << n) {
            let mask = Mask::from_bits((0..n).map(|i| bits >> i & 1 == 1));
            let n_p = mask.n_p();
            if n_p == 0 {
                continue;
            }
            let peak = max_nonzero_bin(&dft_direct(&mask.to_real())).map_err(|e| e.to_string())?.value;
            let bound = worst_case_bound(n, n_p).map_err(|e| e.to_string())?;
            if peak > bound + 1e-9 {
                return Err(format!("N={n}: mask {mask} has {peak} > {bound}"));
            }
            best[n_p] = best[n_p].max(peak);
        }
        for (n_p, &got) in best.iter().enumerate().skip(1) {
            let bound = worst_case_bound(n, n_p).map_err(|e| e.to_string())?;
            if (got - bound).abs() > 1e-9 {
                return Err(format!("N={n} n_p={n_p}: enumerated max {got} != bound {bound}"));
            }
        }
    }
    let took = timed(Duration::from_secs(60), start)?;
    Ok(format!("all 2^7 + 2^11 + 2^13 masks, bound attained for every n_p, {took:.2?}"))
}

/// 4. Simulated mean of the per-trial maximum against the published
///    simulation columns.
fn monte_carlo_table() -> Outcome {
    let w = workers();
    let run = |n: usize, p: f64, trials: u64| {
        let cfg = MaskConfig::new(n, p, 20_240_101).map_err(|e| e.to_string())?;
        run_experiment(&ExperimentSpec::new(cfg, trials).with_workers(w)).map_err(|e| e.to_string())
    };

    let half = run(127, 0.5, 100_000)?;
    let m = half.per_trial_max.mean();
    if !within_rel(m, 11.55, 0.10) {
        return Err(format!("(127, 0.5): mean max {m:.3}, want 11.55 ± 10%"));
    }

    let tenth = run(127, 0.1, 100_000)?;
    let ratio = tenth.per_trial_max.mean() / (127.0 * 0.1);
    if !within_rel(ratio, 0.607, 0.15) {
        return Err(format!("(127, 0.1): ratio {ratio:.4}, want 0.607 ± 15%"));
    }

    let start = Instant::now();
    let large = run(131071, 0.5, 1_000)?;
    let big = large.per_trial_max.mean();
    if !within_rel(big, 618.65, 0.10) {
        return Err(format!("(131071, 0.5): mean max {big:.2}, want 618.65 ± 10%"));
    }
    let took = timed(Duration::from_secs(15 * 60), start)?;
    Ok(format!(
        "127/0.5 mean {m:.3} (11.55); 127/0.1 ratio {ratio:.4} (0.607); 131071/0.5 mean {big:.2} (618.65) in {took:.2?}"
    ))
}

const GRID_N: [usize; 3] = [127, 1543, 8191];
const GRID_P: [f64; 3] = [0.2, 0.5, 0.8];

struct GridPoint {
    n: usize,
    p: f64,
    gaussian_t: f64,
    sigma4: f64,
    global_max: f64,
    exceed_gaussian: u64,
    exceed_sigma4: u64,
}

fn grid() -> Result<Vec<GridPoint>, String> {
    let mut out = Vec::new();
    for n in GRID_N {
        for p in GRID_P {
            let spec = BoundSpec::new(n, p, 1e-4).map_err(|e| e.to_string())?;
            let gaussian_t = gaussian_bound(&spec).map_err(|e| e.to_string())?;
            let sigma4 = sigma_bound(n, p, 4).map_err(|e| e.to_string())?;
            let cfg = MaskConfig::new(n, p, 77).map_err(|e| e.to_string())?;
            let stats = run_experiment(
                &ExperimentSpec::new(cfg, 10_000)
                    .with_workers(workers())
                    .with_threshold("gaussian", gaussian_t)
                    .with_threshold("sigma4", sigma4),
            )
            .map_err(|e| e.to_string())?;
            out.push(GridPoint {
                n,
                p,
                gaussian_t,
                sigma4,
                global_max: stats.global_max,
                exceed_gaussian: stats.exceedance_counts[0].count,
                exceed_sigma4: stats.exceedance_counts[1].count,
            });
        }
    }
    Ok(out)
}

/// 5. The Gaussian bound at eps = 1e-4 is never exceeded in 1e4 trials.
fn confident_bound(points: &[GridPoint]) -> Outcome {
    for g in points {
        if g.exceed_gaussian != 0 {
            return Err(format!(
                "(N={}, p={}): {} exceedances of T={:.3}",
                g.n, g.p, g.exceed_gaussian, g.gaussian_t
            ));
        }
    }
    let tightest = points
        .iter()
        .map(|g| g.global_max / g.gaussian_t)
        .fold(0.0, f64::max);
    Ok(format!("0 exceedances on 9 grid points; largest max/T = {tightest:.3}"))
}

/// 6. The 4-sigma bound tracks the global maximum within 25 % and is
///    crossed somewhere on the grid.
fn four_sigma_tracking(points: &[GridPoint]) -> Outcome {
    let mut worst = 0.0f64;
    for g in points {
        let rel = (g.sigma4 - g.global_max).abs() / g.global_max;
        worst = worst.max(rel);
        if rel > 0.25 {
            return Err(format!(
                "(N={}, p={}): 4σ {:.3} vs global max {:.3} (rel {rel:.3})",
                g.n, g.p, g.sigma4, g.global_max
            ));
        }
    }
    let crossed: Vec<String> = points
        .iter()
        .filter(|g| g.exceed_sigma4 > 0)
        .map(|g| format!("({},{})×{}", g.n, g.p, g.exceed_sigma4))
        .collect();
    if crossed.is_empty() {
        return Err("4σ bound never exceeded on the grid".into());
    }
    Ok(format!("max rel gap {worst:.3}; exceeded at {}", crossed.join(" ")))
}

/// 7. Closed-form ratio approximation against the exact worst-case ratio.
fn approximation_fidelity() -> Outcome {
    let ps: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let mut ns: Vec<usize> = (1000..=2000).collect();
    ns.extend([2003, 4099, 8191, 10007, 65537, 131071]);
    let mut worst = 0.0f64;
    for &n in &ns {
        for &p in &ps {
            let n_p = nominal_support(n, p);
            let exact = worst_case_bound(n, n_p).map_err(|e| e.to_string())? / n_p as f64;
            let approx = ratio_approximation(n, p).map_err(|e| e.to_string())?.value;
            let d = (approx - exact).abs();
            worst = worst.max(d);
            if d > 0.02 {
                return Err(format!("(N={n}, p={p}): approx {approx:.4} vs exact {exact:.4}"));
            }
        }
    }
    let mut worst_limit = 0.0f64;
    for &p in &ps {
        let approx = ratio_approximation(1_000_000, p).map_err(|e| e.to_string())?.value;
        let limit = (p * PI).sin() / (p * PI);
        let d = (approx - limit).abs();
        worst_limit = worst_limit.max(d);
        if d >= 1e-3 {
            return Err(format!("limit at p={p}: {approx} vs {limit}"));
        }
    }
    Ok(format!("max |Δ| {worst:.4} over {} (N,p); limit gap {worst_limit:.1e}", ns.len() * ps.len()))
}

/// 8. Spectrum, transform, reduction and Q-function invariants.
fn invariant_suites() -> Outcome {
    let mut masks = 0;
    for n in [7usize, 127, 1543] {
        let plan = FastDft::new(n);
        for t in 0..334 {
            let mask = generate_mask(&MaskConfig::new(n, 0.37, 5).map_err(|e| e.to_string())?, t);
            let s = plan.mask_spectrum(&mask).map_err(|e| e.to_string())?;
            let c = s.coeffs();
            let n_p = mask.n_p() as f64;
            if (c[0].re - n_p).abs() > 1e-9 || c[0].im.abs() > 1e-9 {
                return Err(format!("A_0 = {} != n_p = {n_p}", c[0]));
            }
            let parseval = n as f64 * n_p;
            if (s.energy() - parseval).abs() > 1e-6 * parseval.max(1.0) {
                return Err(format!("Parseval: {} vs {parseval}", s.energy()));
            }
            for k in 1..n {
                let (a, b) = (c[k].norm(), c[n - k].norm());
                if (a - b).abs() > 1e-9 * a.max(b).max(1.0) {
                    return Err(format!("symmetry at N={n} k={k}: {a} vs {b}"));
                }
            }
            masks += 1;
        }
    }

    let mut sizes: Vec<usize> = (1..=64).collect();
    sizes.extend([127, 128, 255, 256, 509, 1000, 1024, 1543, 2047, 2048, 4093, 4095, 4096]);
    for n in sizes {
        let x: Vec<f64> = (0..n).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let d = dft_direct(&x);
        let f = dft_fast(&x);
        let scale = d.magnitudes().into_iter().fold(1.0, f64::max);
        let err = d
            .coeffs()
            .iter()
            .zip(f.coeffs())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        if err > 1e-9 * scale {
            return Err(format!("fast vs direct at N={n}: {err:e}"));
        }
    }

    let cfg = MaskConfig::new(127, 0.5, 99).map_err(|e| e.to_string())?;
    let base = ExperimentSpec::new(cfg, 3000).with_threshold("t", 12.0);
    let one = run_experiment(&base.clone().with_workers(1)).map_err(|e| e.to_string())?;
    let eight = run_experiment(&base.with_workers(8)).map_err(|e| e.to_string())?;
    if one != eight {
        return Err("1-worker and 8-worker statistics differ".into());
    }

    // Below x = -5, Q(x) sits within a few ulps of 1 and x is not recoverable.
    for i in -250..=400 {
        let x = i as f64 / 50.0;
        let back = q_inverse(q_function(x)).map_err(|e| e.to_string())?;
        if (back - x).abs() > 1e-9 {
            return Err(format!("Q round trip at {x}: {back}"));
        }
    }
    Ok(format!("{masks} masks; fast≡direct on 77 sizes; 1 vs 8 workers identical; Q round trip"))
}

/// 9. Recovery demo on the bundled fixture.
fn recovery_demo() -> Outcome {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/bandlimited_127.csv");
    let file = std::fs::File::open(path).map_err(|e| e.to_string())?;
    let x = maskspectra::recovery::read_signal_csv(std::io::BufReader::new(file)).map_err(|e| e.to_string())?;
    let n = x.len();
    let spectrum = dft_direct(&x);
    let on_band: Vec<f64> = spectrum.magnitudes().into_iter().filter(|&m| m > 1e-6).collect();
    let min_on_band = on_band.iter().copied().fold(f64::INFINITY, f64::min);

    let full = Mask::from_bits(vec![true; n]);
    let spec = RecoverySpec::new(full, 1, 0.5 * min_on_band, DEFAULT_ALPHA).map_err(|e| e.to_string())?;
    let exact = recover(&x, &spec, Some(&x)).map_err(|e| e.to_string())?;
    let snr_full = exact.final_snr_db().unwrap_or(f64::NAN);
    if snr_full < 100.0 {
        return Err(format!("p=1: SNR {snr_full:.1} dB after one pass"));
    }

    let mask = generate_mask(&MaskConfig::new(n, 0.5, 1).map_err(|e| e.to_string())?, 0);
    let xs = sample_random(&x, &mask).map_err(|e| e.to_string())?;
    let spec = RecoverySpec::with_default_threshold(mask.clone(), &xs).map_err(|e| e.to_string())?;
    let out = recover(&xs, &spec, Some(&x)).map_err(|e| e.to_string())?;
    let snr_half = out.final_snr_db().unwrap_or(f64::NAN);
    if out.history.len() > 50 || snr_half < 40.0 {
        return Err(format!("p=0.5: SNR {snr_half:.1} dB after {} iterations", out.history.len()));
    }

    // One more pass from the truth leaves it unchanged.
    let fixed = RecoverySpec::new(mask.clone(), 1, 0.5 * min_on_band, DEFAULT_ALPHA).map_err(|e| e.to_string())?;
    let refill: Vec<f64> = xs.iter().zip(&x).zip(mask.bits()).map(|((&s, &t), &b)| if b == 1 { s } else { t }).collect();
    let plan = FastDft::new(n);
    let coeffs = plan.forward_real(&refill).map_err(|e| e.to_string())?;
    let kept = maskspectra::recovery::hard_threshold(coeffs.coeffs(), fixed.threshold_at(0));
    let again = plan.inverse(&kept).map_err(|e| e.to_string())?;
    let drift = again.iter().zip(&x).map(|(a, b)| (a.re - b).abs()).fold(0.0, f64::max);
    if drift > 1e-9 {
        return Err(format!("fixed point drifted by {drift:e}"));
    }
    Ok(format!(
        "p=1: {snr_full:.0} dB in 1 pass; p=0.5: {snr_half:.1} dB in {} passes ({:?}); fixed-point drift {drift:.1e}",
        out.history.len(),
        out.stop
    ))
}

fn main() {
    let mut failed = 0;
    let mut report = |id: u32, name: &str, outcome: Outcome| match outcome {
        Ok(detail) => println!("PASS  criterion {id}: {name}: {detail}"),
        Err(why) => {
            failed += 1;
            println!("FAIL  criterion {id}: {name}: {why}");
        }
    };

    report(1, "worst-case bound reproduces table", worst_case_table());
    report(2, "worst-case bound equals Dirichlet closed form", oracle_equivalence());
    report(3, "brute-force maximality of the contiguous block", brute_force_maximality());
    report(4, "Monte Carlo matches simulation columns", monte_carlo_table());
    let points = grid();
    match points {
        Ok(points) => {
            report(5, "Gaussian bound is never exceeded", confident_bound(&points));
            report(6, "4-sigma bound tracks the maximum", four_sigma_tracking(&points));
        }
        Err(e) => {
            report(5, "Gaussian bound is never exceeded", Err(e.clone()));
            report(6, "4-sigma bound tracks the maximum", Err(e));
        }
    }
    report(7, "ratio approximation fidelity", approximation_fidelity());
    report(8, "invariant suites", invariant_suites());
    report(9, "recovery demo", recovery_demo());

    // Keep the bound report path exercised alongside the raw bound.
    let r = bound_report(&BoundSpec::new(127, 0.5, 1e-4).expect("valid")).expect("report");
    assert_eq!(r.worst_case, worst_case_bound(127, 64).expect("bound"));
    let _ = worst_case_mask(127, 64);

    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
    println!("all 9 criteria passed");
}
