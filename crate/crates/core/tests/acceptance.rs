//! Acceptance run. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fail.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use phasec_core::bench::{generate, run_pipeline};
use phasec_core::costmodel::{edge_cost, min_decomposition, ClockConfig, Scheme, SkipLimit};
use phasec_core::ilp::{build_model, solve, SolveOptions};
use phasec_core::legalize::apply_schedule;
use phasec_core::mapping::{insert_splitter_trees, logic_depth, FanoutLimits, MappedDag};
use phasec_core::netlist::parse_netlist;
use phasec_core::verify::{brute_force_schedule, check_legality, compute_repetitions, jj_count, BruteForceLimits};

type Outcome = Result<String, String>;

const SKIPS: [SkipLimit; 4] = [SkipLimit::Finite(0), SkipLimit::Finite(1), SkipLimit::Finite(2), SkipLimit::Unbounded];

fn clock(n: u32, s: SkipLimit, scheme: Scheme) -> ClockConfig {
    ClockConfig { n, p: n / 4, s_max: s, scheme, ..ClockConfig::default() }
}

fn map(text: &str) -> MappedDag {
    insert_splitter_trees(&parse_netlist(text).unwrap(), &FanoutLimits::default()).unwrap()
}

fn closed_form_matches_oracle() -> Outcome {
    let (mut checked, mut bad) = (0, Vec::new());
    for n in [4, 8, 12, 16] {
        for s in SKIPS {
            for scheme in Scheme::ALL {
                let c = clock(n, s, scheme);
                for d in 1..=200i64 {
                    checked += 1;
                    let fast = edge_cost(d, &c).map_err(|e| e.to_string())?;
                    let slow = min_decomposition(d, &c).map_err(|e| e.to_string())?.cost();
                    if fast != slow {
                        bad.push(format!("N={n} S={s} {scheme} d={d}: {fast} vs {slow}"));
                    }
                }
            }
        }
    }
    if bad.is_empty() {
        Ok(format!("{checked}/{checked} gaps agree"))
    } else {
        Err(format!("{} mismatches, first {}", bad.len(), bad[0]))
    }
}

fn reconvergent_gap() -> Outcome {
    let dag = insert_splitter_trees(&generate::reconvergent(11), &FanoutLimits::default()).unwrap();
    let want = [(Scheme::Balanced, 11), (Scheme::PhaseSkip, 5), (Scheme::PhaseAlign, 3), (Scheme::Combined, 1)];
    let mut got = Vec::new();
    for (scheme, _) in want {
        let r = run_pipeline(&dag, &ClockConfig::default().with_scheme(scheme), &SolveOptions::default())?;
        got.push(r.report.bs);
    }
    let expect: Vec<usize> = want.iter().map(|w| w.1).collect();
    let text = got.iter().map(|b| b.to_string()).collect::<Vec<_>>().join("/");
    if got == expect {
        Ok(format!("BS {text}"))
    } else {
        Err(format!("BS {text}, expected 11/5/3/1"))
    }
}

fn two_stage_throughput() -> Outcome {
    let dag = insert_splitter_trees(&generate::two_stage(), &FanoutLimits::default()).unwrap();
    let cfg = ClockConfig::default();
    let free = solve(&build_model(&dag, &cfg).map_err(|e| e.to_string())?, &SolveOptions::default()).map_err(|e| e.to_string())?;
    let circuit = apply_schedule(&dag, &free, &cfg).map_err(|e| e.to_string())?;
    let max_edge = free.edges.iter().map(|e| e.skips).max().unwrap_or(0);
    let reps = compute_repetitions(&circuit, &cfg);
    let bounded = solve(&build_model(&dag, &cfg.with_r_max(1)).map_err(|e| e.to_string())?, &SolveOptions::default())
        .map_err(|e| e.to_string())?;
    let detail = format!(
        "objective {} (max skips per edge {max_edge}, R_max {}, throughput {}), with R_max<=1 objective {}",
        free.objective, reps.r_max, reps.throughput, bounded.objective
    );
    let ok = max_edge <= 1 && reps.r_max == 2 && reps.throughput == Ratio::new(1, 3) && bounded.objective > free.objective;
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn solver_matches_brute_force() -> Outcome {
    let (mut mismatches, mut nonzero) = (Vec::new(), 0);
    for seed in 0..100u64 {
        let dag = common::random_dag(seed, 8);
        let base = ClockConfig::default();
        let l_max = base.pi_levels.1 + logic_depth(&dag) * base.n;
        let cfg = ClockConfig { max_level: Some(l_max), ..base };
        let ilp = solve(&build_model(&dag, &cfg).map_err(|e| e.to_string())?, &SolveOptions::default()).map_err(|e| e.to_string())?;
        let bf = brute_force_schedule(&dag, &cfg, l_max, None, &BruteForceLimits::default()).map_err(|e| e.to_string())?;
        nonzero += usize::from(bf.objective > 0);
        if ilp.objective != bf.objective {
            mismatches.push(format!("seed {seed}: {} vs {}", ilp.objective, bf.objective));
        }
    }
    if mismatches.is_empty() {
        Ok(format!("100/100 seeds agree, {nonzero} with nonzero optimum"))
    } else {
        Err(format!("{}/100 disagree, first {}", mismatches.len(), mismatches[0]))
    }
}

fn c17_row() -> Outcome {
    let dag = map(include_str!("../benchmarks/c17.net"));
    let r = run_pipeline(&dag, &ClockConfig::default(), &SolveOptions::default())?.report;
    let detail = format!("gates {} BS {} JJs {} MPS {}", r.gates, r.bs, r.jjs, r.mps);
    let within = r.bs.abs_diff(1) <= 1 && r.jjs == jj_count(r.gates, r.bs) && r.mps <= 1;
    match (within, r.bs == 1) {
        (true, true) => Ok(format!("{detail}, exact")),
        (true, false) => Ok(format!("{detail}, within tolerance (reference BS 1, JJs 38)")),
        _ => Err(format!("{detail}, reference BS 1, JJs 38, MPS 1")),
    }
}

/// Reported area figures for 21 benchmarks:
/// (name, gates, JJs, then BS and JJs for three buffering approaches).
const AREA_ROWS: [(&str, usize, usize, [(usize, usize); 3]); 21] = [
    ("adder1", 7, 42, [(8, 58), (5, 52), (3, 48)]),
    ("adder8", 77, 462, [(168, 798), (87, 636), (57, 576)]),
    ("mult8", 439, 2634, [(957, 4548), (681, 3996), (418, 3470)]),
    ("counter16", 29, 174, [(39, 252), (52, 278), (27, 228)]),
    ("counter32", 82, 492, [(107, 706), (131, 754), (71, 634)]),
    ("counter64", 195, 1170, [(226, 1622), (309, 1788), (169, 1508)]),
    ("counter128", 428, 2568, [(484, 3536), (656, 3880), (355, 3278)]),
    ("c17", 6, 36, [(3, 42), (5, 46), (1, 38)]),
    ("c432", 121, 726, [(440, 1606), (147, 1020), (78, 882)]),
    ("c499", 387, 2322, [(1247, 4816), (407, 3136), (303, 2928)]),
    ("c880", 306, 1836, [(798, 3432), (516, 2868), (194, 2224)]),
    ("c1355", 389, 2334, [(1227, 4788), (398, 3130), (296, 2926)]),
    ("c1908", 289, 1734, [(1030, 3794), (364, 2462), (213, 2160)]),
    ("c2670", 368, 2208, [(969, 4146), (351, 2910), (226, 2660)]),
    ("c3540", 794, 4764, [(1312, 7388), (1060, 6884), (664, 6092)]),
    ("c5315", 1302, 7812, [(3200, 14212), (1337, 10486), (821, 9454)]),
    ("c6288", 1870, 11220, [(7485, 26190), (3206, 17632), (2013, 15246)]),
    ("c7552", 1394, 8364, [(4489, 17342), (1860, 12084), (1238, 10840)]),
    ("sorter32", 480, 2880, [(480, 3840), (448, 3776), (448, 3776)]),
    ("sorter48", 880, 5280, [(720, 6720), (960, 7200), (720, 6720)]),
    ("alu32", 1513, 9078, [(9711, 28500), (1969, 13016), (1422, 11922)]),
];

fn area_table_fit() -> Outcome {
    let mut points = Vec::new();
    for (name, gates, jjs, cols) in AREA_ROWS {
        points.push((name, gates, 0, jjs));
        points.extend(cols.iter().map(|&(bs, jj)| (name, gates, bs, jj)));
    }
    // least squares through the origin: jj = a*gates + b*bs
    let (mut sgg, mut sgb, mut sbb, mut sgj, mut sbj) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(_, g, b, j) in &points {
        let (g, b, j) = (g as f64, b as f64, j as f64);
        sgg += g * g;
        sgb += g * b;
        sbb += b * b;
        sgj += g * j;
        sbj += b * j;
    }
    let det = sgg * sbb - sgb * sgb;
    let a = (sgj * sbb - sbj * sgb) / det;
    let b = (sbj * sgg - sgj * sgb) / det;
    let misfit: Vec<_> = points.iter().filter(|&&(_, g, b, j)| jj_count(g, b) != j).collect();
    let detail = format!("{} points, fitted weights {a:.4}/{b:.4}", points.len());
    if misfit.is_empty() && (a - 6.0).abs() < 1e-9 && (b - 2.0).abs() < 1e-9 {
        Ok(detail)
    } else {
        Err(format!("{detail}, {} rows off, first {:?}", misfit.len(), misfit.first()))
    }
}

fn costs(c: &ClockConfig, max: i64) -> Vec<u32> {
    (1..=max).map(|d| edge_cost(d, c).unwrap()).collect()
}

fn dominance_and_monotonicity() -> Outcome {
    let mut violations = Vec::new();
    let mut checks = 0usize;
    let mut flag = |ok: bool, what: String| {
        checks += 1;
        if !ok {
            violations.push(what);
        }
    };
    for n in [4, 8, 12, 16] {
        for s in SKIPS {
            let per: Vec<Vec<u32>> = Scheme::ALL.iter().map(|&sc| costs(&clock(n, s, sc), 200)).collect();
            let (bal, ps, pa, comb) = (&per[0], &per[1], &per[2], &per[3]);
            for d in 0..200 {
                flag(comb[d] <= ps[d].min(pa[d]), format!("combined above baselines N={n} S={s} d={}", d + 1));
                flag(ps[d] <= bal[d] && pa[d] <= bal[d], format!("baseline above balanced N={n} S={s} d={}", d + 1));
            }
            // more phase overlap never costs more
            for p in 1..n {
                let lo = costs(&ClockConfig { p, ..clock(n, s, Scheme::Combined) }, 200);
                let hi = costs(&ClockConfig { p: p + 1, ..clock(n, s, Scheme::Combined) }, 200);
                flag(lo.iter().zip(&hi).all(|(a, b)| b <= a), format!("P {p}->{} raises cost N={n} S={s}", p + 1));
            }
            let c = clock(n, s, Scheme::Combined);
            match s {
                SkipLimit::Unbounded => {
                    flag(comb.windows(n as usize + 1).all(|w| w[0] == w[n as usize]), format!("not periodic N={n}"));
                }
                SkipLimit::Finite(k) => {
                    let free = costs(&ClockConfig { s_max: SkipLimit::Unbounded, ..c }, 200);
                    let window = (k * n + 1) as usize;
                    flag(comb[..window] == free[..window], format!("finite skips differ inside window N={n} S={k}"));
                    flag(comb[window..] != free[window..], format!("finite skips periodic past window N={n} S={k}"));
                }
            }
        }
        for scheme in Scheme::ALL {
            let chain: Vec<Vec<u32>> = [0, 1, 2, 3].map(SkipLimit::Finite).iter().chain(&[SkipLimit::Unbounded]).map(|&s| costs(&clock(n, s, scheme), 200)).collect();
            for w in chain.windows(2) {
                flag(w[0].iter().zip(&w[1]).all(|(a, b)| b <= a), format!("more skips raise cost N={n} {scheme}"));
            }
        }
    }

    // objective against the repetition bound on random instances
    let mut sweeps = 0;
    for seed in 1000..1040u64 {
        let dag = common::random_dag(seed, 8);
        let cfg = ClockConfig::default();
        let mut last = u64::MAX;
        for r in 0..=3 {
            let bounded = cfg.with_r_max(r);
            let sol = solve(&build_model(&dag, &bounded).unwrap(), &SolveOptions::default()).unwrap();
            let circuit = apply_schedule(&dag, &sol, &bounded).unwrap();
            let legal = check_legality(&circuit, &bounded, &FanoutLimits::default()).is_legal();
            let reps = compute_repetitions(&circuit, &bounded);
            flag(sol.objective <= last, format!("seed {seed}: objective rises at R_max={r}"));
            flag(legal, format!("seed {seed}: illegal schedule at R_max={r}"));
            flag(reps.r_max <= r, format!("seed {seed}: {} repetitions exceed R_max={r}", reps.r_max));
            last = sol.objective;
            sweeps += 1;
        }
    }
    if violations.is_empty() {
        Ok(format!("{checks} checks incl. {sweeps} bounded solves, 0 violations (phase count N excluded, see README)"))
    } else {
        Err(format!("{} violations, first: {}", violations.len(), violations[0]))
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Duration); 7] = [
        ("closed-form edge cost equals oracle", closed_form_matches_oracle, Duration::from_secs(1)),
        ("reconvergent gap of 12 per scheme", reconvergent_gap, Duration::from_secs(1)),
        ("two-stage reconvergence throughput", two_stage_throughput, Duration::from_secs(5)),
        ("solver equals brute force on 100 random DAGs", solver_matches_brute_force, Duration::from_secs(60)),
        ("c17 area", c17_row, Duration::from_secs(10)),
        ("area table JJ relation", area_table_fit, Duration::from_secs(1)),
        ("scheme dominance and monotonicity sweeps", dominance_and_monotonicity, Duration::from_secs(10)),
    ];
    let mut failed = 0;
    for (k, (name, run, limit)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(d) if took < limit => (true, d),
            Ok(d) => (false, format!("{d}; took {took:.2?}, limit {limit:?}")),
            Err(d) => (false, d),
        };
        failed += usize::from(!pass);
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("criterion {}: {verdict} {name}: {detail} [{took:.2?}]", k + 1);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
