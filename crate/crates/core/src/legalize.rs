//! Turns a level assignment into an explicit buffered circuit.
//!
//! Every edge `(i, j)` with decomposition `(α, β, S)` becomes a chain of
//! `α + β` buffers, i.e. `α + β + 1` hops. Each hop advances `p + s·N` levels
//! with `1 ≤ p ≤ P` and `0 ≤ s ≤ S_max`. Cycle skips are spent on the
//! earliest hops and each hop takes as much phase advance as it can, which
//! pushes the buffers as late as possible and keeps the placement unique.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::costmodel::{ClockConfig, EdgeDecomposition, HopRules, Scheme, SkipLimit};
use crate::ilp::Solution;
use crate::mapping::{parse_dag, write_dag, DagBuilder, MappedDag, MappingError, NodeId, NodeKind, Operand, Pin};
use crate::netlist::NetlistError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LegalizeError {
    #[error("solution does not match the DAG ({0})")]
    Shape(&'static str),
    #[error("edge {src} -> {dst}: gap {delta} is not realizable as {hops} hops")]
    Unrealizable { src: String, dst: String, delta: i64, hops: u32 },
    #[error(transparent)]
    Build(#[from] MappingError),
}

/// Buffer chain annotation for one edge of the unbuffered DAG.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HopChain {
    pub src: String,
    pub dst: String,
    /// Present when the chain came from a solver decomposition.
    pub decomposition: Option<Decomposition>,
    pub buffers: Vec<PlacedBuffer>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Decomposition {
    pub alpha: u32,
    pub beta: u32,
    pub skips: u32,
}

impl From<EdgeDecomposition> for Decomposition {
    fn from(d: EdgeDecomposition) -> Self {
        Decomposition { alpha: d.alpha, beta: d.beta, skips: d.skips }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlacedBuffer {
    pub id: String,
    pub level: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduledCircuit {
    pub dag: MappedDag,
    /// Level per node of `dag`.
    pub levels: Vec<u32>,
    /// Clock parameters the schedule was built for.
    pub config: ClockConfig,
    pub hops: Vec<HopChain>,
}

impl ScheduledCircuit {
    pub fn level(&self, v: NodeId) -> u32 {
        self.levels[v.0]
    }

    pub fn phase(&self, v: NodeId) -> u32 {
        self.levels[v.0] % self.config.n
    }

    pub fn buffer_count(&self) -> usize {
        self.dag.buffer_count()
    }
}

/// Per-hop level advances for a gap of `delta` split into `hops` hops using
/// at most `skips` cycle skips. Returns `None` if impossible.
pub fn hop_spans(delta: u32, hops: u32, skips: u32, rules: &HopRules) -> Option<Vec<u32>> {
    let (n, p) = (rules.n, rules.p);
    let per_hop = rules.s_max.finite().unwrap_or(u32::MAX);
    // spending fewer skips than allowed is fine; pick the most that fit
    for used in (0..=skips).rev() {
        let phase = match delta.checked_sub(used * n) {
            Some(t) => t,
            None => continue,
        };
        if phase < hops || phase > hops * p || u64::from(used) > u64::from(hops) * u64::from(per_hop) {
            continue;
        }
        let (mut skip_left, mut phase_left) = (used, phase);
        let spans = (0..hops)
            .map(|h| {
                let s = skip_left.min(per_hop);
                let rest = hops - h - 1;
                let ph = p.min(phase_left - rest);
                skip_left -= s;
                phase_left -= ph;
                ph + s * n
            })
            .collect();
        return Some(spans);
    }
    None
}

/// Inserts the buffers described by `solution`.
pub fn apply_schedule(dag: &MappedDag, solution: &Solution, config: &ClockConfig) -> Result<ScheduledCircuit, LegalizeError> {
    if solution.levels.len() != dag.len() {
        return Err(LegalizeError::Shape("level count"));
    }
    if solution.edges.len() != dag.edges().len() {
        return Err(LegalizeError::Shape("edge count"));
    }
    let rules = config.rules();
    let mut chains = Vec::with_capacity(dag.edges().len());
    for (e, d) in dag.edges().iter().zip(&solution.edges) {
        let (li, lj) = (solution.levels[e.src.0], solution.levels[e.dst.0]);
        let delta = i64::from(lj) - i64::from(li);
        let hops = d.cost() + 1;
        let spans = u32::try_from(delta)
            .ok()
            .filter(|&dl| dl >= 1)
            .and_then(|dl| hop_spans(dl, hops, d.skips, &rules))
            .ok_or_else(|| LegalizeError::Unrealizable {
                src: dag.node(e.src).id.clone(),
                dst: dag.node(e.dst).id.clone(),
                delta,
                hops,
            })?;
        chains.push(spans);
    }

    let mut b = DagBuilder::new(dag.name());
    b.reserve(dag.nodes().iter().map(|n| n.id.as_str()));
    for (id, kind) in dag.constants() {
        b.constant(id, *kind)?;
    }
    let mut new_id = vec![NodeId(usize::MAX); dag.len()];
    let mut levels = Vec::new();
    let mut hops = Vec::with_capacity(dag.edges().len());
    let mut chain_end: Vec<NodeId> = vec![NodeId(usize::MAX); dag.edges().len()];

    let insert_chain = |b: &mut DagBuilder,
                        levels: &mut Vec<u32>,
                        chain_end: &mut [NodeId],
                        ei: usize,
                        new_id: &[NodeId]|
     -> Result<HopChain, LegalizeError> {
        let e = dag.edges()[ei];
        let (src, dst) = (&dag.node(e.src).id, &dag.node(e.dst).id);
        let mut cur = new_id[e.src.0];
        let mut level = solution.levels[e.src.0];
        let mut placed = Vec::new();
        let spans = &chains[ei];
        for &span in &spans[..spans.len() - 1] {
            level += span;
            let name = b.fresh_name(&format!("{src}_{dst}_b{}", placed.len()));
            cur = b.buffer(&name, cur)?;
            levels.push(level);
            placed.push(PlacedBuffer { id: name, level });
        }
        chain_end[ei] = cur;
        Ok(HopChain {
            src: src.clone(),
            dst: dst.clone(),
            decomposition: Some(solution.edges[ei].into()),
            buffers: placed,
        })
    };

    let mut chain_of: HashMap<usize, HopChain> = HashMap::new();
    for v in dag.inputs() {
        new_id[v.0] = b.input(&dag.node(v).id)?;
        levels.push(solution.levels[v.0]);
    }
    let outputs: Vec<NodeId> = dag.outputs().collect();
    for v in dag.node_ids().filter(|&v| dag.kind(v).is_internal()) {
        for &e in dag.fanin(v) {
            let chain = insert_chain(&mut b, &mut levels, &mut chain_end, e.0, &new_id)?;
            chain_of.insert(e.0, chain);
        }
        let node = dag.node(v);
        let mut ends = dag.fanin(v).iter().map(|e| chain_end[e.0]);
        let id = match node.kind {
            NodeKind::Gate(kind) => {
                let ops = node
                    .pins
                    .iter()
                    .map(|p| match p {
                        Pin::Signal { inverted } => Operand::Signal { node: ends.next().unwrap(), inverted: *inverted },
                        Pin::Const { id, inverted } => Operand::Const { id: id.clone(), inverted: *inverted },
                    })
                    .collect();
                b.gate(&node.id, kind, ops)?
            }
            NodeKind::Splitter => b.splitter(&node.id, ends.next().unwrap())?,
            NodeKind::Buffer => b.buffer(&node.id, ends.next().unwrap())?,
            NodeKind::Input | NodeKind::Output => unreachable!(),
        };
        new_id[v.0] = id;
        levels.push(solution.levels[v.0]);
    }
    for &o in &outputs {
        for &e in dag.fanin(o) {
            let chain = insert_chain(&mut b, &mut levels, &mut chain_end, e.0, &new_id)?;
            chain_of.insert(e.0, chain);
        }
    }
    for &o in &outputs {
        let src = chain_end[dag.fanin(o)[0].0];
        new_id[o.0] = b.output(&dag.node(o).id, src)?;
        levels.push(solution.levels[o.0]);
    }
    for e in 0..dag.edges().len() {
        hops.push(chain_of.remove(&e).expect("every edge gets a chain"));
    }
    Ok(ScheduledCircuit { dag: b.build(), levels, config: *config, hops })
}

/// Scheduled-netlist text: a `clock N P S_max` header, then the DAG dump with
/// `@<level>` on every node and `buf` statements for inserted buffers.
pub fn serialize_scheduled(circuit: &ScheduledCircuit) -> String {
    let rules = circuit.config.rules();
    let mut out = format!("clock {} {} {}", rules.n, rules.p, rules.s_max);
    if let Some(r) = circuit.config.r_max {
        out += &format!(" {r}");
    }
    out.push('\n');
    out + &write_dag(&circuit.dag, Some(&circuit.levels))
}

/// Parses [`serialize_scheduled`] output. Without a `clock` header the
/// default clock is assumed. Hop chains are recovered by following buffers.
pub fn parse_scheduled(text: &str) -> Result<ScheduledCircuit, NetlistError> {
    let mut config = ClockConfig::default();
    let mut body = String::with_capacity(text.len());
    for (idx, line) in text.lines().enumerate() {
        let toks: Vec<&str> = line.split('#').next().unwrap_or("").split_whitespace().collect();
        if toks.first() == Some(&"clock") {
            let err = |r: &str| NetlistError::Parse { line: idx + 1, reason: r.to_string() };
            if !(4..=5).contains(&toks.len()) {
                return Err(err("expected `clock <N> <P> <S_max> [R_max]`"));
            }
            config.n = toks[1].parse().map_err(|_| err("bad N"))?;
            config.p = toks[2].parse().map_err(|_| err("bad P"))?;
            config.s_max = toks[3].parse::<SkipLimit>().map_err(|e| err(&e))?;
            config.r_max = toks.get(4).map(|r| r.parse()).transpose().map_err(|_| err("bad R_max"))?;
            config.scheme = Scheme::Combined;
            config.validate().map_err(|e| err(&e.to_string()))?;
            body.push('\n');
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    let (dag, levels) = parse_dag(&body, true)?;
    let hops = trace_chains(&dag, &levels);
    Ok(ScheduledCircuit { dag, levels, config, hops })
}

/// Groups buffer runs back into edges of the unbuffered DAG.
fn trace_chains(dag: &MappedDag, levels: &[u32]) -> Vec<HopChain> {
    let mut out = Vec::new();
    for v in dag.node_ids().filter(|&v| dag.kind(v) != NodeKind::Buffer) {
        for mut u in dag.preds(v) {
            let mut buffers = Vec::new();
            while dag.kind(u) == NodeKind::Buffer {
                buffers.push(PlacedBuffer { id: dag.node(u).id.clone(), level: levels[u.0] });
                u = dag.preds(u).next().expect("buffers have one input");
            }
            buffers.reverse();
            out.push(HopChain { src: dag.node(u).id.clone(), dst: dag.node(v).id.clone(), decomposition: None, buffers });
        }
    }
    out
}

/// Hop annotations as a JSON array.
pub fn hops_json(circuit: &ScheduledCircuit) -> String {
    serde_json::to_string_pretty(&circuit.hops).expect("hop chains serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ilp::{build_model, solve, SolveOptions};
    use crate::mapping::{insert_splitter_trees, FanoutLimits};
    use crate::netlist::parse_netlist;

    fn rules() -> HopRules {
        ClockConfig::default().rules()
    }

    #[test]
    fn gap_twelve_with_one_buffer() {
        assert_eq!(hop_spans(12, 2, 1, &rules()), Some(vec![10, 2]));
    }

    #[test]
    fn adjacent_levels_need_no_buffer() {
        assert_eq!(hop_spans(1, 1, 0, &rules()), Some(vec![1]));
    }

    #[test]
    fn impossible_chain_is_rejected() {
        assert_eq!(hop_spans(7, 1, 0, &rules()), None);
        // more hops than levels
        assert_eq!(hop_spans(2, 3, 0, &rules()), None);
        assert_eq!(hop_spans(10, 3, 1, &rules()), None);
        // a skip that leaves too little phase advance for every hop is dropped
        assert_eq!(hop_spans(8, 4, 1, &rules()), Some(vec![2, 2, 2, 2]));
    }

    fn schedule(text: &str) -> ScheduledCircuit {
        let dag = insert_splitter_trees(&parse_netlist(text).unwrap(), &FanoutLimits::default()).unwrap();
        let cfg = ClockConfig::default();
        let sol = solve(&build_model(&dag, &cfg).unwrap(), &SolveOptions::default()).unwrap();
        let c = apply_schedule(&dag, &sol, &cfg).unwrap();
        assert_eq!(c.buffer_count() as u64, sol.objective);
        c
    }

    #[test]
    fn reconvergent_pair_gets_one_buffer() {
        let mut text = String::from("in a\ngate g1 BUF a\n");
        for k in 2..=11 {
            text += &format!("gate g{k} BUF g{}\n", k - 1);
        }
        text += "gate x AND a g11\nout x";
        let c = schedule(&text);
        assert_eq!(c.buffer_count(), 1);
        let a = c.dag.find("a").unwrap();
        let hop = c.hops.iter().find(|h| h.src == "a" && h.dst == "x").unwrap();
        assert_eq!(hop.buffers.len(), 1);
        assert_eq!(hop.buffers[0].level, c.level(a) + 10);
        assert_eq!(hop.buffers[0].id, "a_x_b0");
        let text = serialize_scheduled(&c);
        assert_eq!(text.lines().filter(|l| l.starts_with("buf ")).count(), 1);
    }

    #[test]
    fn chain_levels_and_round_trip() {
        let c = schedule("in a\ngate g1 BUF a\ngate g2 BUF g1\ngate g3 BUF g2\nout g3");
        let levels: Vec<u32> = ["g1", "g2", "g3"].iter().map(|n| c.level(c.dag.find(n).unwrap())).collect();
        assert_eq!(levels[1], levels[0] + 1);
        assert_eq!(levels[2], levels[1] + 1);
        let text = serialize_scheduled(&c);
        let back = parse_scheduled(&text).unwrap();
        assert_eq!(back.dag, c.dag);
        assert_eq!(back.levels, c.levels);
        assert_eq!(serialize_scheduled(&back), text);
    }

    #[test]
    fn phases_follow_levels() {
        let c = schedule("in a; in b; gate g AND a b; gate h NOT g; out h");
        for v in c.dag.node_ids() {
            assert_eq!(c.phase(v), c.level(v) % 8);
        }
    }

    #[test]
    fn traced_chains_match_inserted_ones() {
        let mut text = String::from("in a\ngate g1 BUF a\n");
        for k in 2..=11 {
            text += &format!("gate g{k} BUF g{}\n", k - 1);
        }
        text += "gate x AND a g11\nout x";
        let c = schedule(&text);
        let back = parse_scheduled(&serialize_scheduled(&c)).unwrap();
        let strip = |hs: &[HopChain]| {
            let mut v: Vec<(String, String, Vec<PlacedBuffer>)> =
                hs.iter().map(|h| (h.src.clone(), h.dst.clone(), h.buffers.clone())).collect();
            v.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
            v
        };
        assert_eq!(strip(&back.hops), strip(&c.hops));
        assert!(hops_json(&c).contains("\"a_x_b0\""));
    }
}
