//! Solver-independent checks: hop legality from levels alone, repetition
//! counts, area metrics, and an exhaustive reference scheduler.

use std::collections::HashMap;
use std::fmt;

use num_rational::Ratio;
use serde::Serialize;
use thiserror::Error;

use crate::costmodel::{ClockConfig, HopRules, SkipLimit};
use crate::ilp::Solution;
use crate::legalize::ScheduledCircuit;
use crate::mapping::{FanoutLimits, MappedDag, NodeId, NodeKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),
    #[error("negative phase skip {0}")]
    Domain(i64),
    #[error("no schedule satisfies the constraints")]
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// A hop whose span no combination of phase and cycle skips covers.
    Hop { src: String, dst: String, delta: i64 },
    InputLevel { node: String, level: u32 },
    /// An output not at the level of the first output.
    OutputLevel { node: String, level: u32, expected: u32 },
    Fanout { node: String, fanout: usize, limit: usize },
    Repetitions { node: String, reps: u32, limit: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Hop { src, dst, delta } => write!(f, "hop {src} -> {dst} spans {delta} levels"),
            Violation::InputLevel { node, level } => write!(f, "input {node} at level {level}"),
            Violation::OutputLevel { node, level, expected } => {
                write!(f, "output {node} at level {level}, expected {expected}")
            }
            Violation::Fanout { node, fanout, limit } => write!(f, "{node} drives {fanout} > {limit}"),
            Violation::Repetitions { node, reps, limit } => write!(f, "{node} needs {reps} repetitions > {limit}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LegalityReport {
    pub violations: Vec<Violation>,
}

impl LegalityReport {
    pub fn is_legal(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Smallest number of cycle skips that makes a single hop of `delta` levels
/// legal, if any.
pub fn hop_skips(delta: i64, rules: &HopRules) -> Option<u32> {
    if delta < 1 {
        return None;
    }
    let (n, p) = (i64::from(rules.n), i64::from(rules.p));
    let s = (delta - p).max(0).div_euclid(n) + i64::from((delta - p).max(0) % n != 0);
    let in_window = match rules.s_max {
        SkipLimit::Finite(m) => s <= i64::from(m),
        SkipLimit::Unbounded => true,
    };
    (delta - s * n >= 1 && in_window).then_some(s as u32)
}

/// Re-checks a scheduled circuit from levels and clock parameters only.
pub fn check_legality(circuit: &ScheduledCircuit, config: &ClockConfig, limits: &FanoutLimits) -> LegalityReport {
    let dag = &circuit.dag;
    let rules = config.rules();
    let level = |v: NodeId| circuit.levels[v.0];
    let mut violations = Vec::new();
    for e in dag.edges() {
        let delta = i64::from(level(e.dst)) - i64::from(level(e.src));
        if hop_skips(delta, &rules).is_none() {
            violations.push(Violation::Hop { src: dag.node(e.src).id.clone(), dst: dag.node(e.dst).id.clone(), delta });
        }
    }
    let (lo, hi) = config.pi_levels;
    for v in dag.inputs() {
        if !(lo..=hi).contains(&level(v)) {
            violations.push(Violation::InputLevel { node: dag.node(v).id.clone(), level: level(v) });
        }
    }
    let outs: Vec<NodeId> = dag.outputs().collect();
    if let Some(&first) = outs.first() {
        for &o in &outs[1..] {
            if level(o) != level(first) {
                violations.push(Violation::OutputLevel { node: dag.node(o).id.clone(), level: level(o), expected: level(first) });
            }
        }
    }
    for (v, fanout) in dag.fanout_violations(limits) {
        violations.push(Violation::Fanout { node: dag.node(v).id.clone(), fanout, limit: limits.limit_for(dag.kind(v)) });
    }
    if let Some(limit) = config.r_max {
        let r = compute_repetitions(circuit, config);
        for v in dag.node_ids() {
            if r.per_node[v.0] > limit {
                violations.push(Violation::Repetitions { node: dag.node(v).id.clone(), reps: r.per_node[v.0], limit });
            }
        }
    }
    LegalityReport { violations }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Repetitions {
    pub per_node: Vec<u32>,
    pub r_max: u32,
    pub throughput: Ratio<u64>,
}

fn accumulate(dag: &MappedDag, mut skips: impl FnMut(usize) -> u32) -> Repetitions {
    let mut per_node = vec![0u32; dag.len()];
    for v in dag.node_ids() {
        per_node[v.0] = dag.fanin(v).iter().map(|e| per_node[dag.edge(*e).src.0] + skips(e.0)).max().unwrap_or(0);
    }
    let r_max = per_node.iter().copied().max().unwrap_or(0);
    Repetitions { per_node, r_max, throughput: Ratio::new(1, u64::from(r_max) + 1) }
}

/// Input repetitions implied by the levels: the longest-path sum of the
/// minimum cycle skips on each hop.
pub fn compute_repetitions(circuit: &ScheduledCircuit, config: &ClockConfig) -> Repetitions {
    let rules = config.rules();
    let dag = &circuit.dag;
    accumulate(dag, |e| {
        let edge = dag.edges()[e];
        let delta = i64::from(circuit.levels[edge.dst.0]) - i64::from(circuit.levels[edge.src.0]);
        hop_skips(delta, &rules).unwrap_or(0)
    })
}

/// Input repetitions implied by the skip counts of a solution.
pub fn solution_repetitions(dag: &MappedDag, solution: &Solution) -> Repetitions {
    accumulate(dag, |e| solution.edges[e].skips)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CostReport {
    pub gates: usize,
    /// Inserted buffers plus splitters.
    pub bs: usize,
    pub jjs: usize,
    pub mps: u32,
    pub r_max: u32,
    pub throughput_num: u64,
    pub throughput_den: u64,
}

impl CostReport {
    pub fn throughput(&self) -> Ratio<u64> {
        Ratio::new(self.throughput_num, self.throughput_den)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

pub const GATE_JJS: usize = 6;
pub const BUFFER_JJS: usize = 2;

pub fn jj_count(gates: usize, bs: usize) -> usize {
    GATE_JJS * gates + BUFFER_JJS * bs
}

pub fn report_metrics(circuit: &ScheduledCircuit) -> CostReport {
    let dag = &circuit.dag;
    let gates = dag.gate_count();
    let bs = dag.splitter_count() + dag.buffer_count();
    let mps = dag
        .edges()
        .iter()
        .map(|e| (circuit.levels[e.dst.0].saturating_sub(circuit.levels[e.src.0])).saturating_sub(1))
        .max()
        .unwrap_or(0);
    let reps = compute_repetitions(circuit, &circuit.config);
    CostReport {
        gates,
        bs,
        jjs: jj_count(gates, bs),
        mps,
        r_max: reps.r_max,
        throughput_num: *reps.throughput.numer(),
        throughput_den: *reps.throughput.denom(),
    }
}

/// Throughput of a four-phase baseline with maximum phase skip `mps`.
pub fn convert_mps_to_throughput(mps: i64) -> Result<Ratio<i64>, VerifyError> {
    if mps < 0 {
        return Err(VerifyError::Domain(mps));
    }
    Ok(Ratio::new(4, mps + 4))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BruteForceLimits {
    pub max_internal_nodes: usize,
    pub max_visits: u64,
    /// Remember the best partial cost per frontier state.
    pub memoize: bool,
}

impl Default for BruteForceLimits {
    fn default() -> Self {
        BruteForceLimits { max_internal_nodes: 10, max_visits: 100_000_000, memoize: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BruteForceResult {
    pub objective: u64,
    pub levels: Vec<u32>,
    pub reps: Option<Vec<u32>>,
    pub visits: u64,
}

struct Oracle<'a> {
    dag: &'a MappedDag,
    preds: Vec<Vec<NodeId>>,
    lo: Vec<u32>,
    hi: Vec<u32>,
    first_output: usize,
    /// `table[cap][delta]`, from the enumeration reference.
    table: Vec<Vec<u32>>,
    r_max: Option<u32>,
    /// Nodes `< k` with a successor `>= k`.
    open: Vec<Vec<usize>>,
    limits: BruteForceLimits,
    visits: u64,
    best: u64,
    best_levels: Vec<u32>,
    best_reps: Vec<u32>,
    memo: HashMap<Vec<u32>, u64>,
}

impl Oracle<'_> {
    fn cost(&self, cap: u32, delta: u32) -> u64 {
        let t = if self.r_max.is_some() { cap as usize } else { 0 };
        u64::from(self.table[t][delta as usize])
    }

    fn dfs(&mut self, k: usize, partial: u64, levels: &mut Vec<u32>, reps: &mut Vec<u32>) -> Result<(), VerifyError> {
        self.visits += 1;
        if self.visits > self.limits.max_visits {
            return Err(VerifyError::TooLarge(format!("more than {} search visits", self.limits.max_visits)));
        }
        if partial >= self.best {
            return Ok(());
        }
        if k == self.dag.len() {
            self.best = partial;
            self.best_levels = levels.clone();
            self.best_reps = reps.clone();
            return Ok(());
        }
        if self.limits.memoize && k > 0 {
            let mut key = vec![k as u32];
            for &u in &self.open[k] {
                key.push(levels[u]);
                key.push(reps[u]);
            }
            if k > self.first_output {
                key.push(levels[self.first_output]);
            }
            match self.memo.get(&key) {
                Some(&seen) if seen <= partial => return Ok(()),
                _ => {
                    self.memo.insert(key, partial);
                }
            }
        }
        let v = NodeId(k);
        let preds = self.preds[k].clone();
        let mut lo = preds.iter().map(|u| levels[u.0] + 1).fold(self.lo[k], u32::max);
        let mut hi = self.hi[k];
        if self.dag.kind(v) == NodeKind::Output && k > self.first_output {
            lo = lo.max(levels[self.first_output]);
            hi = hi.min(levels[self.first_output]);
        }
        let (r_lo, r_hi) = match self.r_max {
            Some(r) if self.dag.kind(v) != NodeKind::Input => (preds.iter().map(|u| reps[u.0]).max().unwrap_or(0), r),
            _ => (0, 0),
        };
        for l in lo..=hi {
            for r in r_lo..=r_hi {
                let add: u64 = preds.iter().map(|u| self.cost(r - reps[u.0], l - levels[u.0])).sum();
                levels[k] = l;
                reps[k] = r;
                self.dfs(k + 1, partial + add, levels, reps)?;
            }
        }
        levels[k] = 0;
        reps[k] = 0;
        Ok(())
    }
}

/// Exhaustive optimum over all level (and repetition) assignments with
/// levels in `[0, l_max]`. Edge costs come from literal enumeration of the
/// edge rows, not from the closed forms.
pub fn brute_force_schedule(
    dag: &MappedDag,
    config: &ClockConfig,
    l_max: u32,
    r_max: Option<u32>,
    limits: &BruteForceLimits,
) -> Result<BruteForceResult, VerifyError> {
    let internal = dag.nodes().iter().filter(|n| n.kind.is_internal()).count();
    if internal > limits.max_internal_nodes {
        return Err(VerifyError::TooLarge(format!("{internal} internal nodes > {}", limits.max_internal_nodes)));
    }
    let rules = config.rules();
    let caps: Vec<Option<u32>> = match r_max {
        Some(r) => (0..=r).map(Some).collect(),
        None => vec![None],
    };
    let table = caps
        .iter()
        .map(|&cap| {
            std::iter::once(u32::MAX)
                .chain((1..=l_max).map(|d| rules.enumerate(i64::from(d), cap).expect("gap is positive").cost()))
                .collect()
        })
        .collect();

    let n = dag.len();
    let preds: Vec<Vec<NodeId>> = dag.node_ids().map(|v| dag.preds(v).collect()).collect();
    let mut lo = vec![0u32; n];
    let mut hi = vec![l_max; n];
    for v in dag.node_ids() {
        if dag.kind(v) == NodeKind::Input {
            lo[v.0] = config.pi_levels.0;
            hi[v.0] = config.pi_levels.1.min(l_max);
        }
    }
    // longest distance to any sink caps each level
    for v in dag.node_ids().rev() {
        for w in dag.succs(v) {
            hi[v.0] = hi[v.0].min(hi[w.0].saturating_sub(1));
        }
    }
    let open = (0..=n)
        .map(|k| (0..k.min(n)).filter(|&u| dag.succs(NodeId(u)).any(|w| w.0 >= k)).collect())
        .collect();
    let first_output = dag.outputs().next().map_or(n, |o| o.0);
    let mut oracle = Oracle {
        dag,
        preds,
        lo,
        hi,
        first_output,
        table,
        r_max,
        open,
        limits: *limits,
        visits: 0,
        best: u64::MAX,
        best_levels: Vec::new(),
        best_reps: Vec::new(),
        memo: HashMap::new(),
    };
    let (mut levels, mut reps) = (vec![0u32; n], vec![0u32; n]);
    oracle.dfs(0, 0, &mut levels, &mut reps)?;
    if oracle.best == u64::MAX {
        return Err(VerifyError::Infeasible);
    }
    Ok(BruteForceResult {
        objective: oracle.best,
        levels: oracle.best_levels,
        reps: r_max.map(|_| oracle.best_reps),
        visits: oracle.visits,
    })
}
