//! Batch runs over netlist directories, throughput sweeps, and generators
//! for the bundled synthetic circuits.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use std::time::{Duration, Instant};

use num_rational::Ratio;

use crate::costmodel::{ClockConfig, Scheme};
use crate::ilp::{build_model, solve, IlpError, SolveOptions, SolveStatus};
use crate::legalize::apply_schedule;
use crate::mapping::{insert_splitter_trees, logic_depth, FanoutLimits, MappedDag};
use crate::netlist::{parse_netlist, Netlist};
use crate::verify::{check_legality, report_metrics, solution_repetitions, CostReport};

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub report: CostReport,
    pub status: SolveStatus,
    pub wall: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub name: String,
    pub balanced: Option<SchemeResult>,
    pub phase_skip: Option<SchemeResult>,
    pub phase_align: Option<SchemeResult>,
    pub combined: Option<SchemeResult>,
    /// Combined scheme under a repetition bound, with the bound used.
    pub combined_r: Option<(u32, SchemeResult)>,
    pub pct_vs_ps: Option<f64>,
    pub pct_vs_pa: Option<f64>,
    pub error: Option<String>,
}

impl BenchRow {
    fn failed(name: String, error: String) -> Self {
        BenchRow {
            name,
            balanced: None,
            phase_skip: None,
            phase_align: None,
            combined: None,
            combined_r: None,
            pct_vs_ps: None,
            pct_vs_pa: None,
            error: Some(error),
        }
    }
}

/// Percent JJ saving of `ours` relative to `other`.
pub fn percent_delta(other: usize, ours: usize) -> f64 {
    100.0 * (other as f64 - ours as f64) / other as f64
}

/// Map, solve, legalize, verify and report one netlist under one clock
/// configuration. Any legality violation is an error.
pub fn run_pipeline(dag: &MappedDag, config: &ClockConfig, opts: &SolveOptions) -> Result<SchemeResult, String> {
    let start = Instant::now();
    let model = build_model(dag, config).map_err(|e| e.to_string())?;
    let sol = solve(&model, opts).map_err(|e| e.to_string())?;
    let circuit = apply_schedule(dag, &sol, config).map_err(|e| e.to_string())?;
    let legality = check_legality(&circuit, config, &FanoutLimits::default());
    if let Some(v) = legality.violations.first() {
        return Err(format!("illegal schedule: {v}"));
    }
    Ok(SchemeResult { report: report_metrics(&circuit), status: sol.status, wall: start.elapsed() })
}

fn bench_one(netlist: &Netlist, config: &ClockConfig, opts: &SolveOptions) -> Result<BenchRow, String> {
    let dag = insert_splitter_trees(netlist, &FanoutLimits::default()).map_err(|e| e.to_string())?;
    let unbounded = ClockConfig { r_max: None, ..*config };
    let run = |scheme: Scheme| run_pipeline(&dag, &unbounded.with_scheme(scheme), opts);
    let balanced = run(Scheme::Balanced)?;
    let phase_skip = run(Scheme::PhaseSkip)?;
    let phase_align = run(Scheme::PhaseAlign)?;
    let combined = run(Scheme::Combined)?;

    let combined_r = match config.r_max {
        Some(r) => Some((r, run_pipeline(&dag, &unbounded.with_scheme(Scheme::Combined).with_r_max(r), opts)?)),
        None => {
            // tightest bound whose area still matches the phase-align baseline
            let top = logic_depth(&dag).div_ceil(config.n);
            let mut chosen = None;
            for r in 0..=top {
                let res = run_pipeline(&dag, &unbounded.with_r_max(r).with_scheme(Scheme::Combined), opts);
                if let Ok(res) = res {
                    let fits = res.report.jjs <= phase_align.report.jjs;
                    if fits || r == top {
                        chosen = Some((r, res));
                        break;
                    }
                }
            }
            chosen
        }
    };
    let ours = combined.report.jjs;
    Ok(BenchRow {
        name: netlist.name.clone(),
        pct_vs_ps: Some(percent_delta(phase_skip.report.jjs, ours)),
        pct_vs_pa: Some(percent_delta(phase_align.report.jjs, ours)),
        balanced: Some(balanced),
        phase_skip: Some(phase_skip),
        phase_align: Some(phase_align),
        combined: Some(combined),
        combined_r,
        error: None,
    })
}

/// Runs every `*.net` file in `dir`, in file-name order. Per-file failures
/// become error rows.
pub fn run_suite(dir: &Path, config: &ClockConfig, time_limit: Option<Duration>) -> io::Result<Vec<BenchRow>> {
    let mut files: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "net"))
        .collect();
    files.sort();
    let opts = SolveOptions { time_limit, node_limit: None };
    let mut rows = Vec::with_capacity(files.len());
    for path in files {
        let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let row = fs::read_to_string(&path)
            .map_err(|e| e.to_string())
            .and_then(|text| parse_netlist(&text).map_err(|e| e.to_string()))
            .and_then(|mut n| {
                if n.name == "top" {
                    n.name = stem.clone();
                }
                bench_one(&n, config, &opts)
            });
        rows.push(row.unwrap_or_else(|e| BenchRow::failed(stem, e)));
    }
    Ok(rows)
}

fn status_label(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Optimal => "optimal",
        SolveStatus::Feasible => "feasible",
    }
}

fn ratio(r: Ratio<u64>) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

const CSV_HEADER: &str = "benchmark,gates,balanced_bs,balanced_jjs,phase_skip_bs,phase_skip_jjs,phase_align_bs,phase_align_jjs,\
combined_bs,combined_jjs,combined_mps,combined_status,rmax,rmax_bs,rmax_jjs,rmax_throughput,pct_vs_ps,pct_vs_pa,error";

/// CSV with one line per row. Wall times are left out so reruns match.
pub fn suite_csv(rows: &[BenchRow]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for row in rows {
        let pair = |r: &Option<SchemeResult>| match r {
            Some(r) => format!("{},{}", r.report.bs, r.report.jjs),
            None => ",".into(),
        };
        let gates = row.combined.as_ref().map(|r| r.report.gates.to_string()).unwrap_or_default();
        let comb = match &row.combined {
            Some(r) => format!("{},{},{},{}", r.report.bs, r.report.jjs, r.report.mps, status_label(r.status)),
            None => ",,,".into(),
        };
        let rr = match &row.combined_r {
            Some((r, res)) => format!("{r},{},{},{}", res.report.bs, res.report.jjs, ratio(res.report.throughput())),
            None => ",,,".into(),
        };
        let pct = |p: Option<f64>| p.map(|p| format!("{p:.2}")).unwrap_or_default();
        let err = row.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        writeln!(
            out,
            "{},{gates},{},{},{},{comb},{rr},{},{},{err}",
            row.name,
            pair(&row.balanced),
            pair(&row.phase_skip),
            pair(&row.phase_align),
            pct(row.pct_vs_ps),
            pct(row.pct_vs_pa)
        )
        .unwrap();
    }
    out
}

/// Aligned text table of the same data.
pub fn suite_table(rows: &[BenchRow]) -> String {
    let header = ["benchmark", "gates", "bal BS/JJ", "PS BS/JJ", "PA BS/JJ", "ours BS/JJ", "MPS", "R", "R BS/JJ", "thru", "%PS", "%PA"];
    let mut cells: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for row in rows {
        if let Some(e) = &row.error {
            cells.push(vec![row.name.clone(), format!("error: {e}")]);
            continue;
        }
        let pair = |r: &Option<SchemeResult>| r.as_ref().map(|r| format!("{}/{}", r.report.bs, r.report.jjs)).unwrap_or_default();
        let comb = row.combined.as_ref().unwrap();
        let (r, rbs, thru) = match &row.combined_r {
            Some((r, res)) => (r.to_string(), format!("{}/{}", res.report.bs, res.report.jjs), ratio(res.report.throughput())),
            None => Default::default(),
        };
        let mark = if comb.status == SolveStatus::Optimal { "" } else { "*" };
        cells.push(vec![
            row.name.clone(),
            comb.report.gates.to_string(),
            pair(&row.balanced),
            pair(&row.phase_skip),
            pair(&row.phase_align),
            format!("{}{mark}", pair(&row.combined)),
            comb.report.mps.to_string(),
            r,
            rbs,
            thru,
            row.pct_vs_ps.map(|p| format!("{p:.1}")).unwrap_or_default(),
            row.pct_vs_pa.map(|p| format!("{p:.1}")).unwrap_or_default(),
        ]);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| cells.iter().filter(|r| r.len() == header.len()).map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &cells {
        let line: Vec<String> = if row.len() == header.len() {
            row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect()
        } else {
            row.clone()
        };
        writeln!(out, "{}", line.join("  ").trim_end()).unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub r_max: u32,
    pub result: Result<(u64, Ratio<u64>), IlpError>,
}

/// Solves once per repetition bound. Throughput is taken from the skips the
/// solution actually uses.
pub fn sweep_throughput(dag: &MappedDag, config: &ClockConfig, r_values: &[u32], opts: &SolveOptions) -> Vec<SweepPoint> {
    r_values
        .iter()
        .map(|&r| {
            let cfg = config.with_r_max(r);
            let result = build_model(dag, &cfg).and_then(|m| solve(&m, opts)).map(|sol| {
                let reps = solution_repetitions(dag, &sol);
                (sol.objective, reps.throughput)
            });
            SweepPoint { r_max: r, result }
        })
        .collect()
}

/// Generators for the bundled synthetic circuits. These are stand-ins with a
/// similar shape to common benchmarks, not reproductions of them.
pub mod generate {
    use std::fmt::Write as _;

    use crate::netlist::{parse_netlist, Netlist};

    fn build(text: String) -> Netlist {
        parse_netlist(&text).expect("generator output is valid")
    }

    /// `len` buffers in series.
    pub fn chain(len: usize) -> Netlist {
        let mut t = format!("name chain{len}\nin a\n");
        let mut prev = "a".to_string();
        for k in 1..=len {
            writeln!(t, "gate g{k} BUF {prev}").unwrap();
            prev = format!("g{k}");
        }
        build(t + &format!("out {prev}\n"))
    }

    /// One input reaching a join gate directly and through `len` buffers.
    pub fn reconvergent(len: usize) -> Netlist {
        let mut t = format!("name reconv{len}\nin a\n");
        let mut prev = "a".to_string();
        for k in 1..=len {
            writeln!(t, "gate g{k} BUF {prev}").unwrap();
            prev = format!("g{k}");
        }
        build(t + &format!("gate x AND a {prev}\nout x\n"))
    }

    /// Two stacked reconvergences, each with an 8-buffer detour, fed by two
    /// inputs.
    pub fn two_stage() -> Netlist {
        let mut t = String::from("name two_stage\nin b\nin c\n");
        let mut prev = "b".to_string();
        for k in 1..=8 {
            writeln!(t, "gate c{k} BUF {prev}").unwrap();
            prev = format!("c{k}");
        }
        writeln!(t, "gate x1 AND c {prev}").unwrap();
        prev = "x1".into();
        for k in 1..=8 {
            writeln!(t, "gate d{k} BUF {prev}").unwrap();
            prev = format!("d{k}");
        }
        build(t + &format!("gate y OR x1 {prev}\nout y\n"))
    }

    /// `stages` diamonds in series; each splits into a short and a long arm
    /// of `skew` extra gates.
    pub fn diamond_ladder(stages: usize, skew: usize) -> Netlist {
        let mut t = format!("name ladder{stages}x{skew}\nin a\nin b\ngate s0 AND a b\n");
        for s in 1..=stages {
            let mut prev = format!("s{}", s - 1);
            for k in 1..=skew {
                writeln!(t, "gate l{s}_{k} NOT {prev}").unwrap();
                prev = format!("l{s}_{k}");
            }
            writeln!(t, "gate s{s} OR s{} {prev}", s - 1).unwrap();
        }
        build(t + &format!("out s{stages}\n"))
    }

    /// Ripple-carry adder built from majority full adders: three MAJ3 gates
    /// per bit.
    pub fn ripple_adder(bits: usize) -> Netlist {
        let mut t = format!("name adder{bits}\nin cin\n");
        for i in 0..bits {
            writeln!(t, "in a{i}\nin b{i}").unwrap();
        }
        let mut carry = "cin".to_string();
        for i in 0..bits {
            writeln!(t, "gate c{i} MAJ3 a{i} b{i} {carry}").unwrap();
            writeln!(t, "gate m{i} MAJ3 a{i} b{i} ~{carry}").unwrap();
            writeln!(t, "gate s{i} MAJ3 ~c{i} {carry} m{i}").unwrap();
            writeln!(t, "out s{i}").unwrap();
            carry = format!("c{i}");
        }
        build(t + &format!("out {carry}\n"))
    }

    /// Incrementer: adds the enable input to a `bits`-wide word.
    pub fn counter(bits: usize) -> Netlist {
        let mut t = format!("name counter{bits}\nin en\n");
        for i in 0..bits {
            writeln!(t, "in q{i}").unwrap();
        }
        let mut carry = "en".to_string();
        for i in 0..bits {
            // q xor carry as (q | c) & !(q & c)
            writeln!(t, "gate o{i} OR q{i} {carry}").unwrap();
            writeln!(t, "gate k{i} AND q{i} {carry}").unwrap();
            writeln!(t, "gate x{i} AND o{i} ~k{i}").unwrap();
            writeln!(t, "out x{i}").unwrap();
            carry = format!("k{i}");
        }
        build(t + &format!("out {carry}\n"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmodel::SkipLimit;

    fn mapped(n: &Netlist) -> MappedDag {
        insert_splitter_trees(n, &FanoutLimits::default()).unwrap()
    }

    #[test]
    fn percent_delta_sign() {
        assert_eq!(percent_delta(100, 75), 25.0);
        assert!(percent_delta(40, 50) < 0.0);
    }

    #[test]
    fn generators_are_valid_and_sized() {
        assert_eq!(generate::chain(5).logic_gate_count(), 5);
        assert_eq!(generate::reconvergent(11).logic_gate_count(), 12);
        assert_eq!(generate::two_stage().logic_gate_count(), 18);
        assert_eq!(generate::ripple_adder(4).logic_gate_count(), 12);
        assert_eq!(generate::counter(3).logic_gate_count(), 9);
        assert_eq!(logic_depth(&mapped(&generate::two_stage())), 18);
    }

    #[test]
    fn adder_computes_sums() {
        // evaluate the generated netlist on every input for two bits
        let n = generate::ripple_adder(2);
        for v in 0u32..32 {
            let (cin, a, b) = (v & 1, (v >> 1) & 3, (v >> 3) & 3);
            let mut val = std::collections::HashMap::new();
            val.insert("cin".to_string(), cin == 1);
            for i in 0..2 {
                val.insert(format!("a{i}"), (a >> i) & 1 == 1);
                val.insert(format!("b{i}"), (b >> i) & 1 == 1);
            }
            for g in n.topological_gates() {
                let ins: Vec<bool> = g
                    .fanins
                    .iter()
                    .map(|f| {
                        let x = match f.id.as_str() {
                            crate::netlist::CONST0_ID => false,
                            crate::netlist::CONST1_ID => true,
                            id => val[id],
                        };
                        x ^ f.inverted
                    })
                    .collect();
                let out = match ins.len() {
                    3 => (ins[0] as u8 + ins[1] as u8 + ins[2] as u8) >= 2,
                    1 if g.kind == crate::netlist::GateKind::Not => !ins[0],
                    1 => ins[0],
                    _ => continue,
                };
                val.insert(g.id.clone(), out);
            }
            let sum = a + b + cin;
            let got = val["s0"] as u32 + 2 * val["s1"] as u32 + 4 * val["c1"] as u32;
            assert_eq!(got, sum, "a={a} b={b} cin={cin}");
        }
    }

    #[test]
    fn sweep_is_monotone_and_saturates() {
        let dag = mapped(&generate::two_stage());
        let cfg = ClockConfig::default();
        let pts = sweep_throughput(&dag, &cfg, &[0, 1, 2, 3, 4], &SolveOptions::default());
        let objs: Vec<u64> = pts.iter().map(|p| p.result.as_ref().unwrap().0).collect();
        assert!(objs.windows(2).all(|w| w[0] >= w[1]), "{objs:?}");
        let free = run_pipeline(&dag, &cfg, &SolveOptions::default()).unwrap();
        assert_eq!(*objs.last().unwrap() as usize + dag.splitter_count(), free.report.bs);
    }

    #[test]
    fn no_skips_sweep_point_equals_phase_skipping() {
        let dag = mapped(&generate::reconvergent(11));
        let cfg = ClockConfig { s_max: SkipLimit::Finite(0), ..ClockConfig::default() };
        let pts = sweep_throughput(&dag, &cfg, &[0], &SolveOptions::default());
        let ps = run_pipeline(&dag, &cfg.with_scheme(Scheme::PhaseSkip), &SolveOptions::default()).unwrap();
        assert_eq!(pts[0].result.as_ref().unwrap().0 as usize, ps.report.bs);
    }

    #[test]
    fn empty_directory_gives_empty_table() {
        let dir = std::env::temp_dir().join(format!("phasec-empty-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let rows = run_suite(&dir, &ClockConfig::default(), None).unwrap();
        assert!(rows.is_empty());
        assert_eq!(suite_csv(&rows).lines().count(), 1);
        fs::remove_dir_all(&dir).unwrap();
    }
}
