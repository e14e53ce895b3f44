//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). The process exits non-zero on a
//! FAIL only when `STREAMALLOC_ACCEPTANCE_STRICT=1`; otherwise the report is
//! informational and the numbers behind every verdict are printed.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use streamalloc::allocator::{max_matching, BipartiteGraph, ChannelAllocator, ChannelMatrix, SlotPlan};
use streamalloc::model::ChannelModel;
use streamalloc::noback::{expected_cost, kkt_report, noback_solve, NobackInstance, NobackUser};
use streamalloc::optimizer::{brute_force_alpha, conc_min};
use streamalloc::simulator::{
    mean_stderr, replication_rng, run_replications, ConsumptionKind, PolicySpec, SimOptions, SimRng,
};
use streamalloc::{GridProb, RateVector, Rational, SystemConfig, UserProfile};
use streamalloc_cli::experiment::{excess_pauses, generate_instance, random_noback_instance, simulate, trace_cost};
use streamalloc_cli::{run_experiment, Consumption, ExperimentConfig, ExperimentKind};

struct Verdict {
    pass: bool,
    detail: String,
}

fn check(id: u32, title: &str, budget_secs: f64, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let v = f();
    let secs = start.elapsed().as_secs_f64();
    let in_time = secs < budget_secs;
    let pass = v.pass && in_time;
    let timing = if in_time { String::new() } else { format!("; over the {budget_secs} s budget") };
    println!(
        "criterion {id}: {} {title} ({}; {secs:.1} s{timing})",
        if pass { "PASS" } else { "FAIL" },
        v.detail
    );
    pass
}

fn grid(z: u32, denom: u32) -> GridProb {
    GridProb::new(z, denom).unwrap()
}

fn c1_oracle_equivalence() -> Verdict {
    let mut rng = SimRng::seed_from_u64(1);
    let (mut worst, mut max_fractional) = (0.0f64, 0usize);
    for _ in 0..200 {
        let n = rng.random_range(1..=8usize);
        let denom = rng.random_range(2..=10u32);
        let users: Vec<UserProfile> = (0..n)
            .map(|_| {
                let p = grid(rng.random_range(0..=denom), denom);
                match rng.random_range(0..4) {
                    0 => UserProfile::power_law(p, 0.3),
                    1 => UserProfile::power_law(p, 0.5),
                    2 => UserProfile::power_law(p, 0.7),
                    _ => UserProfile::linear(p, 1.0),
                }
                .unwrap()
            })
            .collect();
        let c = Rational::new(rng.random_range(1..=(denom as i64 * n as i64)), denom as i64);
        let fast = conc_min(&users, c).unwrap();
        let brute = brute_force_alpha(&users, c).unwrap();
        worst = worst.max((fast.cost - brute.cost).abs());
        let fractional = fast
            .rates
            .alpha
            .iter()
            .zip(&users)
            .filter(|(a, u)| **a > Rational::from_integer(0) && **a < u.p.to_rational())
            .count();
        max_fractional = max_fractional.max(fractional);
    }
    Verdict {
        pass: worst <= 1e-12 && max_fractional <= 1,
        detail: format!("max |cost gap| {worst:.1e}, max fractional users {max_fractional}"),
    }
}

fn c2_single_user_pauses() -> Verdict {
    let t = 100_000;
    let p = grid(1, 2);
    let mut worst = 0.0f64;
    let mut cells = Vec::new();
    for (k, (num, den)) in [(1, 10), (3, 10), (9, 20), (3, 5)].into_iter().enumerate() {
        let alpha = num as f64 / den as f64;
        let config = SystemConfig::new(1, 1, 1.0, 200 + k as u64, t).unwrap();
        let spec = PolicySpec::Static(RateVector::new(vec![Rational::new(num, den)]));
        let traces = run_replications(&spec, &config, &[ConsumptionKind::Iid { p }], &SimOptions::default(), 20).unwrap();
        let kappas: Vec<f64> = traces.iter().map(|tr| tr.kappa()[0]).collect();
        let (kappa, _) = mean_stderr(&kappas);
        let err = (kappa - (0.5 - alpha).max(0.0)).abs();
        worst = worst.max(err);
        cells.push(format!("a={alpha}: {kappa:.4}"));
    }
    Verdict { pass: worst <= 0.01, detail: format!("{}; max error {worst:.4}", cells.join(", ")) }
}

fn c3_fig2a() -> Verdict {
    let cfg = ExperimentConfig { n: vec![20, 30], ..ExperimentConfig::defaults(ExperimentKind::Fig2a) };
    let rows = run_experiment(&cfg).unwrap();
    let bench = |n| rows.iter().find(|r| r.n == n && r.policy == "benchmark").unwrap().cost_mean;
    let cost = |n, h| rows.iter().find(|r| r.n == n && r.h == Some(h)).unwrap().cost_mean;
    let mut pass = true;
    let mut parts = Vec::new();
    for (n, h, tol) in [(20, 0.6, 0.02), (20, 0.8, 0.02), (30, 0.4, 0.05)] {
        let gap = cost(n, h) / bench(n) - 1.0;
        pass &= gap.abs() <= tol;
        // the same allocation simulated for T epochs, for reference
        let users = generate_instance(&cfg, n).unwrap();
        let alpha = conc_min(&users, Rational::from_integer(cfg.channels(n) as i64)).unwrap().rates;
        let traces = simulate(&PolicySpec::Static(alpha), &users, &cfg, cfg.channels(n), h, 900 + n as u64, &SimOptions::default()).unwrap();
        let (finite, _) = trace_cost(&traces, &users);
        parts.push(format!(
            "n={n} h={h}: {:.3} vs bound {:.3} ({:+.1}%, tol {}%; T-epoch cost {finite:.3})",
            cost(n, h),
            bench(n),
            100.0 * gap,
            100.0 * tol
        ));
    }
    Verdict { pass, detail: parts.join("; ") }
}

fn c4_fig2b() -> Verdict {
    let cfg = ExperimentConfig { n: vec![25, 30], h: vec![0.4], ..ExperimentConfig::defaults(ExperimentKind::Fig2b) };
    let rows = run_experiment(&cfg).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [25, 30] {
        let learner = rows.iter().find(|r| r.n == n && r.policy == "ifestival").unwrap();
        let rr = rows.iter().find(|r| r.n == n && r.policy == "round_robin").unwrap();
        pass &= learner.cost_mean < rr.cost_mean;
        parts.push(format!(
            "n={n}: learner {:.3}±{:.3} vs round robin {:.3}±{:.3}",
            learner.cost_mean, learner.cost_stderr, rr.cost_mean, rr.cost_stderr
        ));
    }
    Verdict { pass, detail: parts.join("; ") }
}

fn c5_excess_pauses() -> Verdict {
    let cfg = ExperimentConfig::defaults(ExperimentKind::Regret);
    let n = cfg.n[0];
    let m = cfg.channels(n);
    let users = generate_instance(&cfg, n).unwrap();
    let alpha = conc_min(&users, Rational::from_integer(m as i64)).unwrap().rates.to_f64();
    let params = streamalloc_cli::experiment::ifestival_params(&cfg, &users);
    let w = params.w;
    let opts = SimOptions { checkpoints: vec![1_000, 10_000, 100_000, 1_000_000] };
    let traces = simulate(&PolicySpec::IFestival(params), &users, &cfg, m, 1.0, 500, &opts).unwrap();
    let excess = excess_pauses(&traces, &users, &alpha);
    let per_t: Vec<f64> = excess.iter().map(|&(t, e)| e / t as f64).collect();
    let scaled: Vec<f64> = excess.iter().map(|&(t, e)| e / ((t as f64).powf(2.0 / 3.0) * (t as f64).ln())).collect();
    let decreasing = per_t.windows(2).all(|w| w[1] < w[0]);
    let (lo, hi) = scaled.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let ratio = hi / lo;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ");
    Verdict {
        pass: decreasing && lo > 0.0 && ratio <= 5.0,
        detail: format!("w={w}; excess/T {}; max/min of excess/(T^2/3 ln T) {ratio:.2}", fmt(&per_t)),
    }
}

/// Projected subgradient descent on the expected shortfall; returns the best value seen.
fn subgradient_oracle(inst: &NobackInstance) -> f64 {
    let n = inst.users.len();
    let c = inst.capacity_f64();
    let project = |y: &[f64]| -> Vec<f64> {
        let clip = |s: f64| -> Vec<f64> { y.iter().map(|v| (v - s).clamp(0.0, 1.0)).collect() };
        if clip(0.0).iter().sum::<f64>() <= c {
            return clip(0.0);
        }
        let (mut lo, mut hi) = (0.0, y.iter().cloned().fold(0.0, f64::max));
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if clip(mid).iter().sum::<f64>() > c {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        clip(hi)
    };
    let objective = |x: &[f64]| -> f64 {
        inst.users
            .iter()
            .zip(x)
            .map(|(u, &xi)| {
                let s = if xi <= u.a {
                    (u.a + u.b) / 2.0 - xi
                } else if xi >= u.b {
                    0.0
                } else {
                    (u.b - xi).powi(2) / (2.0 * (u.b - u.a))
                };
                u.weight * s
            })
            .sum()
    };
    let mut x = project(&vec![c / n as f64; n]);
    let mut best = objective(&x);
    for k in 1..=4000 {
        let step = 0.5 / (k as f64).sqrt();
        let y: Vec<f64> = inst
            .users
            .iter()
            .zip(&x)
            .map(|(u, &xi)| xi + step * u.weight * (1.0 - ((xi - u.a) / (u.b - u.a)).clamp(0.0, 1.0)))
            .collect();
        x = project(&y);
        best = best.min(objective(&x));
    }
    best
}

fn c6_noback() -> Verdict {
    let results: Vec<(f64, bool, f64)> = (0..100u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(600, rep);
            let n: usize = rng.random_range(1..=10);
            let m = rng.random_range(1..=n.div_ceil(2));
            let inst = random_noback_instance(n, m, &mut rng).unwrap();
            let sol = noback_solve(&inst).unwrap();
            let kkt = kkt_report(&inst, &sol);
            let gap = expected_cost(&inst, &sol.rates).unwrap() - subgradient_oracle(&inst);
            (kkt.interior_residual, kkt.threshold_violated, gap)
        })
        .collect();
    let residual = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let violations = results.iter().filter(|r| r.1).count();
    let gap = results.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
    let worked = NobackInstance::new(
        vec![NobackUser::uniform(1.0, 0.2, 0.6), NobackUser::uniform(2.0, 0.2, 0.6)],
        Rational::new(1, 2),
    )
    .unwrap();
    let rates = noback_solve(&worked).unwrap().rates;
    // 0.2 and 0.6 are not binary fractions, so equality is up to rounding of the inputs
    let exact = rates.iter().zip([0.1, 0.4]).all(|(r, t): (&f64, f64)| (r - t).abs() <= 1e-15);
    Verdict {
        pass: residual <= 1e-8 && violations == 0 && gap <= 1e-6 && exact,
        detail: format!(
            "max residual {residual:.1e}, threshold violations {violations}, max cost minus oracle {gap:.1e}, worked example {rates:?}"
        ),
    }
}

fn brute_matching(g: &BipartiteGraph, l: usize, used: u32) -> usize {
    if l == g.left() {
        return 0;
    }
    let mut best = brute_matching(g, l + 1, used);
    for &r in &g.adj[l] {
        if used >> r & 1 == 0 {
            best = best.max(1 + brute_matching(g, l + 1, used | 1 << r));
        }
    }
    best
}

fn c7_matching_selection() -> Verdict {
    let mut rng = SimRng::seed_from_u64(7);

    // slot repeats and mean slot counts
    let alpha = RateVector::new(
        [(3, 10), (7, 10), (1, 2), (9, 10), (1, 5), (4, 5), (3, 5)].iter().map(|&(a, b)| Rational::new(a, b)).collect(),
    );
    let n = alpha.len();
    let plan = SlotPlan::new(&alpha, 4).unwrap();
    let draws = 1_000_000u64;
    let (mut sums, mut squares, mut max_repeat) = (vec![0u64; n], vec![0u64; n], 0u32);
    for _ in 0..draws {
        let c = plan.draw(&mut rng).counts(n);
        for i in 0..n {
            sums[i] += c[i] as u64;
            squares[i] += (c[i] * c[i]) as u64;
            max_repeat = max_repeat.max(c[i]);
        }
    }
    let worst_z = alpha
        .to_f64()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mean = sums[i] as f64 / draws as f64;
            let sd = ((squares[i] as f64 / draws as f64 - mean * mean) / draws as f64).sqrt();
            if sd == 0.0 { (mean - a).abs() * f64::INFINITY } else { (mean - a).abs() / sd }
        })
        .fold(0.0, f64::max);

    // Hopcroft–Karp against exhaustive search
    let mut hk_mismatch = 0;
    for _ in 0..100 {
        let mut g = BipartiteGraph::new(8, 8);
        let density = rng.random_range(0.1..0.9);
        for l in 0..8 {
            for r in 0..8 {
                if rng.random_bool(density) {
                    g.add_edge(l, r);
                }
            }
        }
        let m = max_matching(&g);
        if !m.is_valid_for(&g) || m.len() != brute_matching(&g, 0, 0) {
            hk_mismatch += 1;
        }
    }

    // imperfect-matching frequency at full load
    let epochs = 200_000u32;
    let freq: Vec<f64> = [5usize, 10, 20]
        .iter()
        .map(|&m| {
            let n = m * 5 / 2;
            let alloc = ChannelAllocator::new(&RateVector::new(vec![Rational::new(m as i64, n as i64); n]), m).unwrap();
            let model = ChannelModel::uniform(n, m, 0.5).unwrap();
            let mut rng = replication_rng(700, m as u64);
            let misses = (0..epochs)
                .filter(|_| !alloc.allocate(&ChannelMatrix::sample(&model, &mut rng), &mut rng).is_perfect())
                .count();
            misses as f64 / epochs as f64
        })
        .collect();
    let halves = freq[0] > 0.0 && freq[1] <= freq[0] / 2.0 && freq[2] <= freq[1] / 2.0;

    Verdict {
        pass: max_repeat <= 2 && worst_z <= 4.0 && hk_mismatch == 0 && halves,
        detail: format!(
            "max repeats {max_repeat}, worst |mean - a| {worst_z:.2} sigma, matching mismatches {hk_mismatch}/100, imperfect frequency m=5,10,20: {:.2e} {:.2e} {:.2e}",
            freq[0], freq[1], freq[2]
        ),
    }
}

fn c8_markov() -> Verdict {
    let base = ExperimentConfig { horizon: 100_000, ..ExperimentConfig::defaults(ExperimentKind::Fig2a) };
    let n = 20;
    let h = 0.8;
    let m = base.channels(n);
    let users = generate_instance(&base, n).unwrap();
    let alpha = conc_min(&users, Rational::from_integer(m as i64)).unwrap().rates;
    let spec = PolicySpec::Static(alpha);
    let iid = simulate(&spec, &users, &base, m, h, 800, &SimOptions::default()).unwrap();
    let markov_cfg = ExperimentConfig { consumption: Consumption::Markov { stickiness: 0.9 }, ..base.clone() };
    let markov = simulate(&spec, &users, &markov_cfg, m, h, 800, &SimOptions::default()).unwrap();
    let (a, a_se) = trace_cost(&iid, &users);
    let (b, b_se) = trace_cost(&markov, &users);
    let gap = b / a - 1.0;
    Verdict {
        pass: gap.abs() <= 0.05,
        detail: format!("n={n} h={h}: i.i.d. {a:.3}±{a_se:.3}, Markov {b:.3}±{b_se:.3} ({:+.1}%, tol 5%)", 100.0 * gap),
    }
}

fn main() {
    let results = [
        check(1, "lower-bound solver equals vertex enumeration", 10.0, c1_oracle_equivalence),
        check(2, "single-user pause frequency", 30.0, c2_single_user_pauses),
        check(3, "channel allocation near the lower bound", 300.0, c3_fig2a),
        check(4, "learner under fading beats round robin without fading", 300.0, c4_fig2b),
        check(5, "learner excess pauses shrink at the predicted rate", 600.0, c5_excess_pauses),
        check(6, "no-feedback allocation optimality", 10.0, c6_noback),
        check(7, "slot selection and matching", 60.0, c7_matching_selection),
        check(8, "Markov consumption cost close to i.i.d.", 60.0, c8_markov),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!("{} of {} criteria pass", results.len() - failed, results.len());
    if failed > 0 && std::env::var("STREAMALLOC_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
