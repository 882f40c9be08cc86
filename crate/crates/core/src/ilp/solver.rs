//! Best-first branch-and-bound over node levels.
//!
//! Nodes are fixed one at a time in a topological order where each primary
//! input is placed right before its first consumer and all outputs are fixed
//! together as the last step. Once a node's level is chosen, every edge into
//! it has a known gap, so its cost comes straight from the closed-form edge
//! tables. With a repetition bound, a step also picks the node's repetition
//! count; only counts that strictly lower the incoming cost are tried.
//!
//! The lower bound is combinatorial: for each unfixed node with at least one
//! fixed predecessor, the cheapest level in its remaining window for the
//! edges from fixed predecessors. Those edge sets are disjoint, so the sum is
//! admissible. Windows come from longest-path propagation, which also prunes
//! states that can no longer fit under the level bound.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::time::{Duration, Instant};

use crate::costmodel::EdgeDecomposition;
use crate::mapping::{NodeId, NodeKind};

use super::{IlpError, IlpModel, Solution, SolveStats, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolveOptions {
    pub time_limit: Option<Duration>,
    /// Maximum number of expanded search states.
    pub node_limit: Option<u64>,
}

const UNSET: u32 = u32::MAX;
const DIVE_EVERY: u64 = 2048;

#[derive(Debug, Clone, Copy)]
enum Step {
    Node(NodeId),
    Outputs,
}

#[derive(Debug, Clone, Copy)]
struct State {
    parent: u32,
    /// Steps fixed so far; the root has 0.
    depth: u32,
    level: u32,
    rep: u32,
    g: u64,
}

struct Search<'a> {
    model: &'a IlpModel,
    steps: Vec<Step>,
    outputs: Vec<NodeId>,
    preds: Vec<Vec<NodeId>>,
    /// Static level windows.
    lo: Vec<u32>,
    hi: Vec<u32>,
    /// Fixed nodes that still have unfixed successors, per depth.
    open: Vec<Vec<NodeId>>,
    /// `cost[cap][delta]`; a single uncapped table without a repetition bound.
    cost: Vec<Vec<u32>>,
    r_max: Option<u32>,
}

impl<'a> Search<'a> {
    fn new(model: &'a IlpModel) -> Result<Self, IlpError> {
        let dag = model.dag();
        let n = dag.len();
        let cfg = model.config();
        let l_max = model.l_max();

        let mut steps = Vec::new();
        let mut placed = vec![false; n];
        for v in dag.node_ids().filter(|&v| dag.kind(v).is_internal()) {
            for u in dag.preds(v) {
                if dag.kind(u) == NodeKind::Input && !placed[u.0] {
                    placed[u.0] = true;
                    steps.push(Step::Node(u));
                }
            }
            steps.push(Step::Node(v));
        }
        for u in dag.inputs().filter(|u| !placed[u.0]) {
            steps.push(Step::Node(u));
        }
        let outputs: Vec<NodeId> = dag.outputs().collect();
        if !outputs.is_empty() {
            steps.push(Step::Outputs);
        }
        let mut pos = vec![0; n];
        for (k, s) in steps.iter().enumerate() {
            match *s {
                Step::Node(v) => pos[v.0] = k,
                Step::Outputs => outputs.iter().for_each(|o| pos[o.0] = k),
            }
        }

        let preds: Vec<Vec<NodeId>> = dag.node_ids().map(|v| dag.preds(v).collect()).collect();
        let mut lo = vec![0u32; n];
        for v in dag.node_ids() {
            lo[v.0] = match dag.kind(v) {
                NodeKind::Input => cfg.pi_levels.0,
                _ => preds[v.0].iter().map(|u| lo[u.0] + 1).max().unwrap_or(0),
            };
        }
        let po_lo = outputs.iter().map(|o| lo[o.0]).max().unwrap_or(0);
        outputs.iter().for_each(|o| lo[o.0] = po_lo);
        let mut hi = vec![l_max; n];
        for v in dag.node_ids().rev() {
            let mut h = dag.succs(v).map(|w| hi[w.0].saturating_sub(1)).min().unwrap_or(l_max);
            if dag.kind(v) == NodeKind::Input {
                h = h.min(cfg.pi_levels.1);
            }
            hi[v.0] = h;
        }
        if dag.node_ids().any(|v| lo[v.0] > hi[v.0]) {
            return Err(IlpError::Infeasible);
        }

        let mut open = Vec::with_capacity(steps.len() + 1);
        for depth in 0..=steps.len() {
            let fixed = |v: NodeId| pos[v.0] < depth;
            open.push(dag.node_ids().filter(|&v| fixed(v) && dag.succs(v).any(|w| !fixed(w))).collect());
        }

        let rules = model.rules();
        let caps: Vec<Option<u32>> = match model.r_max() {
            Some(r) => (0..=r).map(Some).collect(),
            None => vec![None],
        };
        let cost = caps
            .iter()
            .map(|&cap| {
                let mut t = vec![UNSET; l_max as usize + 1];
                for d in 1..=l_max {
                    t[d as usize] = rules.decompose(i64::from(d), cap).map(|x| x.cost()).unwrap_or(UNSET);
                }
                t
            })
            .collect();

        Ok(Search { model, steps, outputs, preds, lo, hi, open, cost, r_max: model.r_max() })
    }

    /// Cheapest cost under any repetition split; a valid lower bound.
    fn uncapped(&self, delta: u32) -> u32 {
        self.cost[self.cost.len() - 1][delta as usize]
    }

    fn capped(&self, cap: u32, delta: u32) -> u32 {
        match self.r_max {
            Some(_) => self.cost[cap as usize][delta as usize],
            None => self.cost[0][delta as usize],
        }
    }

    fn reconstruct(&self, arena: &[State], mut idx: u32, levels: &mut [u32], reps: &mut [u32]) {
        levels.fill(UNSET);
        reps.fill(0);
        while idx != 0 {
            let s = arena[idx as usize];
            match self.steps[s.depth as usize - 1] {
                Step::Node(v) => {
                    levels[v.0] = s.level;
                    reps[v.0] = s.rep;
                }
                Step::Outputs => self.outputs.iter().for_each(|o| levels[o.0] = s.level),
            }
            idx = s.parent;
        }
    }

    /// Admissible bound on the cost of every edge not yet priced, or `None`
    /// when some unfixed node has an empty window.
    fn bound(&self, depth: usize, levels: &[u32], dlo: &mut [u32]) -> Option<u64> {
        let mut h = 0u64;
        for step in &self.steps[depth..] {
            let v = match *step {
                Step::Node(v) => v,
                Step::Outputs => break,
            };
            let (lo, any_fixed) = self.window_lo(v, levels, dlo);
            if lo > self.hi[v.0] {
                return None;
            }
            dlo[v.0] = lo;
            if any_fixed {
                h += self.best_over(lo, self.hi[v.0], |l| self.preds[v.0].iter().filter(|u| levels[u.0] != UNSET).map(|u| self.uncapped(l - levels[u.0]) as u64).sum());
            }
        }
        if depth < self.steps.len() && !self.outputs.is_empty() {
            let mut lo = 0;
            let mut hi = u32::MAX;
            for o in &self.outputs {
                lo = lo.max(self.window_lo(*o, levels, dlo).0);
                hi = hi.min(self.hi[o.0]);
            }
            if lo > hi {
                return None;
            }
            let priced: Vec<u32> = self
                .outputs
                .iter()
                .map(|o| levels[self.preds[o.0][0].0])
                .filter(|&l| l != UNSET)
                .collect();
            if !priced.is_empty() {
                h += self.best_over(lo, hi, |l| priced.iter().map(|&u| self.uncapped(l - u) as u64).sum());
            }
        }
        Some(h)
    }

    /// Lowest feasible level for `v` given fixed and propagated predecessor
    /// levels; also reports whether any predecessor is fixed.
    fn window_lo(&self, v: NodeId, levels: &[u32], dlo: &[u32]) -> (u32, bool) {
        let mut lo = self.lo[v.0];
        let mut any_fixed = false;
        for u in &self.preds[v.0] {
            let l = if levels[u.0] != UNSET {
                any_fixed = true;
                levels[u.0]
            } else {
                dlo[u.0]
            };
            lo = lo.max(l + 1);
        }
        (lo, any_fixed)
    }

    fn best_over(&self, lo: u32, hi: u32, f: impl Fn(u32) -> u64) -> u64 {
        (lo..=hi).map(f).min().unwrap_or(0)
    }

    /// Children of a state as `(level, rep, added cost)`.
    fn children(&self, depth: usize, levels: &[u32], reps: &[u32], out: &mut Vec<(u32, u32, u64)>) {
        out.clear();
        match self.steps[depth] {
            Step::Node(v) => {
                let preds = &self.preds[v.0];
                let lo = preds.iter().map(|u| levels[u.0] + 1).fold(self.lo[v.0], u32::max);
                let is_input = self.model.dag().kind(v) == NodeKind::Input;
                for l in lo..=self.hi[v.0] {
                    match self.r_max {
                        Some(r_max) if !is_input => {
                            let r_lo = preds.iter().map(|u| reps[u.0]).max().unwrap_or(0);
                            let mut best = u64::MAX;
                            for r in r_lo..=r_max {
                                let c: u64 = preds.iter().map(|u| self.capped(r - reps[u.0], l - levels[u.0]) as u64).sum();
                                if c < best {
                                    best = c;
                                    out.push((l, r, c));
                                }
                            }
                        }
                        _ => {
                            let c = preds.iter().map(|u| self.uncapped(l - levels[u.0]) as u64).sum();
                            out.push((l, 0, c));
                        }
                    }
                }
            }
            Step::Outputs => {
                let drivers: Vec<NodeId> = self.outputs.iter().map(|o| self.preds[o.0][0]).collect();
                let lo = drivers.iter().map(|u| levels[u.0] + 1).chain(self.outputs.iter().map(|o| self.lo[o.0])).max().unwrap();
                let hi = self.outputs.iter().map(|o| self.hi[o.0]).min().unwrap();
                for l in lo..=hi {
                    let c = drivers
                        .iter()
                        .map(|u| {
                            let cap = self.r_max.map_or(0, |r| r - reps[u.0]);
                            self.capped(cap, l - levels[u.0]) as u64
                        })
                        .sum();
                    out.push((l, 0, c));
                }
            }
        }
    }

    fn key(&self, depth: usize, levels: &[u32], reps: &[u32]) -> Vec<u32> {
        let mut key = Vec::with_capacity(1 + 2 * self.open[depth].len());
        key.push(depth as u32);
        for v in &self.open[depth] {
            key.push(levels[v.0]);
            if self.r_max.is_some() {
                key.push(reps[v.0]);
            }
        }
        key
    }

    /// Turns complete levels and node repetitions into a model solution.
    fn finish(&self, levels: &[u32], reps: &mut [u32], status: SolveStatus, stats: SolveStats) -> Result<Solution, IlpError> {
        let dag = self.model.dag();
        let rules = self.model.rules();
        if let Some(r_max) = self.r_max {
            for o in &self.outputs {
                let u = self.preds[o.0][0];
                let delta = levels[o.0] - levels[u.0];
                let best = self.capped(r_max - reps[u.0], delta);
                reps[o.0] = (reps[u.0]..=r_max).find(|&r| self.capped(r - reps[u.0], delta) == best).unwrap();
            }
        }
        let edges: Vec<EdgeDecomposition> = dag
            .edges()
            .iter()
            .map(|e| {
                let delta = i64::from(levels[e.dst.0]) - i64::from(levels[e.src.0]);
                let cap = self.r_max.map(|_| reps[e.dst.0] - reps[e.src.0]);
                rules.decompose(delta, cap)
            })
            .collect::<Result<_, _>>()?;
        let objective = edges.iter().map(|d| u64::from(d.cost())).sum();
        let sol = Solution {
            status,
            objective,
            levels: levels.to_vec(),
            edges,
            reps: self.r_max.map(|_| reps.to_vec()),
            stats: SolveStats { best_bound: stats.best_bound.min(objective), ..stats },
        };
        self.model.check(&sol)?;
        Ok(sol)
    }

    /// Cost of a complete level assignment with every repetition count at 0.
    fn evaluate(&self, levels: &[u32]) -> Option<u64> {
        let dag = self.model.dag();
        let mut total = 0u64;
        for v in dag.node_ids() {
            if levels[v.0] < self.lo[v.0] || levels[v.0] > self.hi[v.0] {
                return None;
            }
        }
        for e in dag.edges() {
            let (a, b) = (levels[e.src.0], levels[e.dst.0]);
            if b <= a {
                return None;
            }
            total += self.capped(0, b - a) as u64;
        }
        Some(total)
    }
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct Entry(Reverse<u64>, u32, Reverse<u32>);

/// Solves the model exactly unless a limit is hit first, in which case the
/// best schedule found is returned with status `Feasible`.
pub fn solve(model: &IlpModel, opts: &SolveOptions) -> Result<Solution, IlpError> {
    let start = Instant::now();
    let search = Search::new(model)?;
    let n = model.dag().len();
    let total = search.steps.len();

    let mut levels = vec![UNSET; n];
    let mut reps = vec![0u32; n];
    let mut dlo = vec![0u32; n];
    let mut kids = Vec::new();

    let mut incumbent: Option<(u64, Vec<u32>, Vec<u32>)> = None;
    let ws = super::warm_start(model.dag(), model.config());
    if let Some(c) = search.evaluate(&ws.levels) {
        incumbent = Some((c, ws.levels.clone(), vec![0; n]));
    }
    let upper = |inc: &Option<(u64, Vec<u32>, Vec<u32>)>| inc.as_ref().map_or(u64::MAX, |i| i.0);

    let mut arena = vec![State { parent: 0, depth: 0, level: 0, rep: 0, g: 0 }];
    let mut heap = BinaryHeap::new();
    let mut seen: HashMap<Vec<u32>, u64> = HashMap::new();
    let root_h = match search.bound(0, &levels, &mut dlo) {
        Some(h) => h,
        None => return Err(IlpError::Infeasible),
    };
    if total == 0 {
        return search.finish(&levels, &mut reps, SolveStatus::Optimal, SolveStats { wall: start.elapsed(), ..Default::default() });
    }
    heap.push(Entry(Reverse(root_h), 0, Reverse(0)));

    let mut expanded = 0u64;
    let mut limited = None;
    while let Some(Entry(Reverse(f), _, Reverse(idx))) = heap.pop() {
        if f >= upper(&incumbent) {
            break;
        }
        let state = arena[idx as usize];
        let depth = state.depth as usize;
        search.reconstruct(&arena, idx, &mut levels, &mut reps);
        if depth > 0 {
            let key = search.key(depth, &levels, &reps);
            if seen.get(&key).is_some_and(|&g| g < state.g) {
                continue;
            }
        }
        let over_time = opts.time_limit.is_some_and(|t| expanded.is_multiple_of(64) && start.elapsed() >= t);
        if over_time || opts.node_limit.is_some_and(|l| expanded >= l) {
            limited = Some(f);
            break;
        }
        expanded += 1;

        if expanded % DIVE_EVERY == 1 {
            dive(&search, &levels, &reps, depth, state.g, &mut dlo, &mut incumbent);
        }

        search.children(depth, &levels, &reps, &mut kids);
        for &(level, rep, add) in &kids {
            let g = state.g + add;
            if g >= upper(&incumbent) {
                continue;
            }
            set(&search, depth, &mut levels, &mut reps, level, rep);
            if depth + 1 == total {
                incumbent = Some((g, levels.clone(), reps.clone()));
            } else if let Some(h) = search.bound(depth + 1, &levels, &mut dlo) {
                if g + h < upper(&incumbent) {
                    let key = search.key(depth + 1, &levels, &reps);
                    if !seen.get(&key).is_some_and(|&old| old <= g) {
                        seen.insert(key, g);
                        arena.push(State { parent: idx, depth: depth as u32 + 1, level, rep, g });
                        let id = (arena.len() - 1) as u32;
                        heap.push(Entry(Reverse(g + h), depth as u32 + 1, Reverse(id)));
                    }
                }
            }
            unset(&search, depth, &mut levels, &mut reps);
        }
    }

    let (best, status) = match (limited, &incumbent) {
        (Some(f), Some(_)) => (f, SolveStatus::Feasible),
        (Some(_), None) => return Err(IlpError::NoIncumbent),
        (None, Some(i)) => (i.0, SolveStatus::Optimal),
        (None, None) => return Err(IlpError::Infeasible),
    };
    let (_, inc_levels, mut inc_reps) = incumbent.unwrap();
    let stats = SolveStats { nodes: expanded, wall: start.elapsed(), best_bound: best };
    search.finish(&inc_levels, &mut inc_reps, status, stats)
}

fn set(search: &Search, depth: usize, levels: &mut [u32], reps: &mut [u32], level: u32, rep: u32) {
    match search.steps[depth] {
        Step::Node(v) => {
            levels[v.0] = level;
            reps[v.0] = rep;
        }
        Step::Outputs => search.outputs.iter().for_each(|o| levels[o.0] = level),
    }
}

fn unset(search: &Search, depth: usize, levels: &mut [u32], reps: &mut [u32]) {
    match search.steps[depth] {
        Step::Node(v) => {
            levels[v.0] = UNSET;
            reps[v.0] = 0;
        }
        Step::Outputs => search.outputs.iter().for_each(|o| levels[o.0] = UNSET),
    }
}

/// Greedy completion from a state, following the child with the best bound.
fn dive(
    search: &Search,
    levels: &[u32],
    reps: &[u32],
    mut depth: usize,
    mut g: u64,
    dlo: &mut [u32],
    incumbent: &mut Option<(u64, Vec<u32>, Vec<u32>)>,
) {
    let (mut levels, mut reps) = (levels.to_vec(), reps.to_vec());
    let mut kids = Vec::new();
    let total = search.steps.len();
    while depth < total {
        search.children(depth, &levels, &reps, &mut kids);
        let mut best: Option<(u64, u32, u32, u64)> = None;
        for &(level, rep, add) in &kids {
            set(search, depth, &mut levels, &mut reps, level, rep);
            let h = if depth + 1 == total { Some(0) } else { search.bound(depth + 1, &levels, dlo) };
            if let Some(h) = h {
                let f = g + add + h;
                if best.is_none_or(|b| f < b.0) {
                    best = Some((f, level, rep, add));
                }
            }
            unset(search, depth, &mut levels, &mut reps);
        }
        let Some((f, level, rep, add)) = best else { return };
        if incumbent.as_ref().is_some_and(|i| f >= i.0) {
            return;
        }
        set(search, depth, &mut levels, &mut reps, level, rep);
        g += add;
        depth += 1;
    }
    *incumbent = Some((g, levels, reps));
}
