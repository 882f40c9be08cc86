//! AQFP-legal DAGs: splitter-tree insertion under fanout limits.
//!
//! Node order in a [`MappedDag`] is always topological with primary inputs
//! first and primary outputs last. Edges are numbered by destination node,
//! then by pin, which is the order every downstream consumer (the ILP rows,
//! the LP export, legalization) walks them in.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::netlist::{validate, statements, GateKind, Netlist, NetlistError, ViolationKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Input,
    Output,
    Gate(GateKind),
    Splitter,
    /// Path-balancing buffer inserted by legalization.
    Buffer,
}

impl NodeKind {
    pub fn is_internal(self) -> bool {
        !matches!(self, NodeKind::Input | NodeKind::Output)
    }
}

/// One input pin of a node. Signal pins consume the node's fanin edges in
/// order; constant pins refer to a constant cell and carry no edge.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Pin {
    Signal { inverted: bool },
    Const { id: String, inverted: bool },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DagNode {
    pub id: String,
    pub kind: NodeKind,
    pub pins: Vec<Pin>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappedDag {
    name: String,
    nodes: Vec<DagNode>,
    edges: Vec<Edge>,
    fanin: Vec<Vec<EdgeId>>,
    fanout: Vec<Vec<EdgeId>>,
    constants: Vec<(String, GateKind)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FanoutLimits {
    pub splitter: usize,
    pub input: usize,
    /// Allow splitter trees behind primary inputs whose fanout exceeds
    /// `input`.
    pub split_inputs: bool,
}

impl Default for FanoutLimits {
    fn default() -> Self {
        FanoutLimits { splitter: 3, input: 2, split_inputs: true }
    }
}

impl FanoutLimits {
    pub fn limit_for(&self, kind: NodeKind) -> usize {
        match kind {
            NodeKind::Input => self.input,
            NodeKind::Output => 0,
            NodeKind::Buffer => 1,
            NodeKind::Gate(_) | NodeKind::Splitter => self.splitter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MappingError {
    #[error("invalid netlist: node `{node}`: {reason}")]
    InvalidNetlist { node: String, reason: ViolationKind },
    #[error("primary input `{input}` has fanout {fanout} > {limit} and input splitting is disabled")]
    InputFanout { input: String, fanout: usize, limit: usize },
    #[error("fanout limits must allow at least 2 per splitter and 1 per input")]
    BadLimits,
    #[error("malformed DAG at `{node}`: {reason}")]
    Structure { node: String, reason: String },
}

fn structure(node: &str, reason: impl Into<String>) -> MappingError {
    MappingError::Structure { node: node.to_string(), reason: reason.into() }
}

/// A gate operand handed to [`DagBuilder::gate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Operand {
    Signal { node: NodeId, inverted: bool },
    Const { id: String, inverted: bool },
}

impl From<NodeId> for Operand {
    fn from(node: NodeId) -> Self {
        Operand::Signal { node, inverted: false }
    }
}

/// Incremental DAG construction. Inputs must be added before any internal
/// node, and outputs after every internal node, so the returned ids are the
/// final node ids and creation order is topological.
#[derive(Debug, Clone)]
pub struct DagBuilder {
    name: String,
    nodes: Vec<DagNode>,
    sources: Vec<Vec<NodeId>>,
    constants: Vec<(String, GateKind)>,
    names: HashSet<String>,
    ids: HashSet<String>,
    stage: u8,
}

impl DagBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        DagBuilder {
            name: name.into(),
            nodes: Vec::new(),
            sources: Vec::new(),
            constants: Vec::new(),
            names: HashSet::new(),
            ids: HashSet::new(),
            stage: 0,
        }
    }

    /// Marks names as taken so [`fresh_name`](Self::fresh_name) avoids them.
    pub fn reserve<'a>(&mut self, names: impl IntoIterator<Item = &'a str>) {
        self.names.extend(names.into_iter().map(str::to_string));
    }

    pub fn fresh_name(&mut self, base: &str) -> String {
        if !self.names.contains(base) {
            return base.to_string();
        }
        (1..).map(|k| format!("{base}_{k}")).find(|n| !self.names.contains(n)).unwrap()
    }

    fn claim(&mut self, id: &str) -> Result<(), MappingError> {
        if !self.ids.insert(id.to_string()) {
            return Err(structure(id, "duplicate id"));
        }
        self.names.insert(id.to_string());
        Ok(())
    }

    fn check_source(&self, id: &str, src: NodeId) -> Result<(), MappingError> {
        match self.nodes.get(src.0) {
            None => Err(structure(id, format!("unknown source node {}", src.0))),
            Some(n) if n.kind == NodeKind::Output => Err(structure(id, "an output cannot drive other nodes")),
            Some(_) => Ok(()),
        }
    }

    fn push(&mut self, node: DagNode, sources: Vec<NodeId>) -> NodeId {
        self.nodes.push(node);
        self.sources.push(sources);
        NodeId(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, id: &str, kind: GateKind) -> Result<(), MappingError> {
        if !kind.is_const() {
            return Err(structure(id, "not a constant kind"));
        }
        self.claim(id)?;
        self.constants.push((id.to_string(), kind));
        Ok(())
    }

    pub fn input(&mut self, id: &str) -> Result<NodeId, MappingError> {
        if self.stage > 0 {
            return Err(structure(id, "inputs must precede internal nodes"));
        }
        self.claim(id)?;
        Ok(self.push(DagNode { id: id.to_string(), kind: NodeKind::Input, pins: Vec::new() }, Vec::new()))
    }

    fn enter_internal(&mut self, id: &str) -> Result<(), MappingError> {
        if self.stage > 1 {
            return Err(structure(id, "internal nodes must precede outputs"));
        }
        self.stage = 1;
        Ok(())
    }

    pub fn gate(&mut self, id: &str, kind: GateKind, operands: Vec<Operand>) -> Result<NodeId, MappingError> {
        self.enter_internal(id)?;
        if kind.is_const() {
            return Err(structure(id, "constants are declared with `constant`"));
        }
        if operands.len() != kind.arity() {
            return Err(structure(id, format!("{kind} takes {} operands", kind.arity())));
        }
        let mut pins = Vec::with_capacity(operands.len());
        let mut sources = Vec::new();
        for op in operands {
            match op {
                Operand::Signal { node, inverted } => {
                    self.check_source(id, node)?;
                    if sources.contains(&node) {
                        return Err(structure(id, "the same driver feeds two pins"));
                    }
                    sources.push(node);
                    pins.push(Pin::Signal { inverted });
                }
                Operand::Const { id: cid, inverted } => {
                    if !self.constants.iter().any(|(c, _)| *c == cid) {
                        return Err(structure(id, format!("unknown constant `{cid}`")));
                    }
                    pins.push(Pin::Const { id: cid, inverted });
                }
            }
        }
        if sources.is_empty() {
            return Err(structure(id, "gate has no signal input"));
        }
        self.claim(id)?;
        Ok(self.push(DagNode { id: id.to_string(), kind: NodeKind::Gate(kind), pins }, sources))
    }

    fn single(&mut self, id: &str, kind: NodeKind, src: NodeId) -> Result<NodeId, MappingError> {
        self.check_source(id, src)?;
        self.claim(id)?;
        Ok(self.push(DagNode { id: id.to_string(), kind, pins: vec![Pin::Signal { inverted: false }] }, vec![src]))
    }

    pub fn splitter(&mut self, id: &str, src: NodeId) -> Result<NodeId, MappingError> {
        self.enter_internal(id)?;
        self.single(id, NodeKind::Splitter, src)
    }

    pub fn buffer(&mut self, id: &str, src: NodeId) -> Result<NodeId, MappingError> {
        self.enter_internal(id)?;
        self.single(id, NodeKind::Buffer, src)
    }

    pub fn output(&mut self, id: &str, src: NodeId) -> Result<NodeId, MappingError> {
        self.stage = 2;
        self.single(id, NodeKind::Output, src)
    }

    pub fn build(self) -> MappedDag {
        let n = self.nodes.len();
        let mut edges = Vec::new();
        let mut fanin = vec![Vec::new(); n];
        let mut fanout = vec![Vec::new(); n];
        for (dst, srcs) in self.sources.iter().enumerate() {
            for &src in srcs {
                let e = EdgeId(edges.len());
                edges.push(Edge { src, dst: NodeId(dst) });
                fanin[dst].push(e);
                fanout[src.0].push(e);
            }
        }
        MappedDag { name: self.name, nodes: self.nodes, edges, fanin, fanout, constants: self.constants }
    }
}

impl MappedDag {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[DagNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &DagNode {
        &self.nodes[id.0]
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.nodes[id.0].kind
    }

    pub fn node_ids(&self) -> impl DoubleEndedIterator<Item = NodeId> + ExactSizeIterator {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> Edge {
        self.edges[id.0]
    }

    pub fn edge_ids(&self) -> impl DoubleEndedIterator<Item = EdgeId> + ExactSizeIterator {
        (0..self.edges.len()).map(EdgeId)
    }

    pub fn fanin(&self, id: NodeId) -> &[EdgeId] {
        &self.fanin[id.0]
    }

    pub fn fanout(&self, id: NodeId) -> &[EdgeId] {
        &self.fanout[id.0]
    }

    pub fn preds(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.fanin[id.0].iter().map(|e| self.edges[e.0].src)
    }

    pub fn succs(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.fanout[id.0].iter().map(|e| self.edges[e.0].dst)
    }

    pub fn inputs(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.node_ids().filter(|&n| self.kind(n) == NodeKind::Input)
    }

    pub fn outputs(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.node_ids().filter(|&n| self.kind(n) == NodeKind::Output)
    }

    pub fn constants(&self) -> &[(String, GateKind)] {
        &self.constants
    }

    pub fn find(&self, id: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.id == id).map(NodeId)
    }

    /// Name used for an edge in solver variables: `<src>__<dst>`.
    pub fn edge_label(&self, e: EdgeId) -> String {
        let edge = self.edges[e.0];
        format!("{}__{}", self.nodes[edge.src.0].id, self.nodes[edge.dst.0].id)
    }

    pub fn gate_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n.kind, NodeKind::Gate(_))).count()
    }

    pub fn splitter_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Splitter).count()
    }

    pub fn buffer_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Buffer).count()
    }

    /// Nodes that exceed their fanout limit, with their fanout.
    pub fn fanout_violations(&self, limits: &FanoutLimits) -> Vec<(NodeId, usize)> {
        self.node_ids()
            .map(|n| (n, self.fanout(n).len()))
            .filter(|&(n, k)| k > limits.limit_for(self.kind(n)))
            .collect()
    }

    /// ASAP depth counted in internal nodes: inputs are 0, an internal node
    /// is one more than its deepest predecessor, an output copies its driver.
    pub fn asap_depths(&self) -> Vec<u32> {
        let mut depth = vec![0u32; self.nodes.len()];
        for n in self.node_ids() {
            let base = self.preds(n).map(|p| depth[p.0]).max().unwrap_or(0);
            depth[n.0] = if self.kind(n).is_internal() { base + 1 } else { base };
        }
        depth
    }

    /// Re-applies splitter insertion to an existing DAG. A no-op when the
    /// limits already hold.
    pub fn split_fanouts(&self, limits: &FanoutLimits) -> Result<MappedDag, MappingError> {
        split_fanouts(self, limits)
    }

    /// Dumps the DAG in the netlist grammar extended with `split`, `buf` and
    /// `out <driver> as <po>` statements.
    pub fn to_text(&self) -> String {
        write_dag(self, None)
    }
}

/// Lowers a validated netlist and inserts balanced splitter trees wherever a
/// node's fanout exceeds its limit.
pub fn insert_splitter_trees(netlist: &Netlist, limits: &FanoutLimits) -> Result<MappedDag, MappingError> {
    let raw = lower(netlist)?;
    split_fanouts(&raw, limits)
}

/// Netlist to DAG without any splitters.
pub fn lower(netlist: &Netlist) -> Result<MappedDag, MappingError> {
    if let Some(v) = validate(netlist).violations.into_iter().next() {
        return Err(MappingError::InvalidNetlist { node: v.node, reason: v.kind });
    }
    let mut b = DagBuilder::new(netlist.name.clone());
    b.reserve(netlist.inputs.iter().map(String::as_str));
    b.reserve(netlist.gates.iter().map(|g| g.id.as_str()));
    let mut ids: HashMap<&str, NodeId> = HashMap::new();
    for pi in &netlist.inputs {
        ids.insert(pi, b.input(pi)?);
    }
    let gates = netlist.topological_gates();
    for g in gates.iter().filter(|g| g.kind.is_const()) {
        b.constant(&g.id, g.kind)?;
    }
    for g in gates.iter().filter(|g| !g.kind.is_const()) {
        let ops = g
            .fanins
            .iter()
            .map(|f| match ids.get(f.id.as_str()) {
                Some(&node) => Operand::Signal { node, inverted: f.inverted },
                None => Operand::Const { id: f.id.clone(), inverted: f.inverted },
            })
            .collect();
        ids.insert(&g.id, b.gate(&g.id, g.kind, ops)?);
    }
    for po in &netlist.outputs {
        let name = b.fresh_name(&format!("po_{po}"));
        b.output(&name, ids[po.as_str()])?;
    }
    Ok(b.build())
}

/// Shape of a minimum-depth splitter tree with `leaves` sinks and at most
/// `arity` children per splitter. Splitters are numbered breadth-first; the
/// result holds each splitter's parent (`None` for the root) and, for each
/// leaf slot in breadth-first order, the splitter that drives it.
pub fn splitter_tree(leaves: usize, arity: usize) -> (Vec<Option<usize>>, Vec<usize>) {
    assert!(arity >= 2 && leaves >= 2);
    let mut parent = vec![None];
    let mut queue: VecDeque<usize> = std::iter::repeat_n(0, arity).collect();
    let mut count = arity;
    while count < leaves {
        let p = queue.pop_front().expect("queue holds every open leaf");
        parent.push(Some(p));
        queue.extend(std::iter::repeat_n(parent.len() - 1, arity));
        count += arity - 1;
    }
    // the newest splitter owns the tail of the queue; trim it to fit
    queue.truncate(queue.len() - (count - leaves));
    (parent, queue.into_iter().collect())
}

fn split_fanouts(dag: &MappedDag, limits: &FanoutLimits) -> Result<MappedDag, MappingError> {
    if limits.splitter < 2 || limits.input < 1 {
        return Err(MappingError::BadLimits);
    }
    let mut b = DagBuilder::new(dag.name.clone());
    b.reserve(dag.nodes.iter().map(|n| n.id.as_str()));
    b.reserve(dag.constants.iter().map(|(c, _)| c.as_str()));
    for (id, kind) in &dag.constants {
        b.constant(id, *kind)?;
    }
    let mut driver: Vec<Option<NodeId>> = vec![None; dag.edges.len()];
    let mut new_id = vec![NodeId(usize::MAX); dag.nodes.len()];

    let fan_out = |b: &mut DagBuilder, driver: &mut Vec<Option<NodeId>>, old: NodeId, new: NodeId| {
        let outs = dag.fanout(old);
        let kind = dag.kind(old);
        if outs.len() <= limits.limit_for(kind) {
            for e in outs {
                driver[e.0] = Some(new);
            }
            return Ok(());
        }
        if kind == NodeKind::Input && !limits.split_inputs {
            return Err(MappingError::InputFanout {
                input: dag.node(old).id.clone(),
                fanout: outs.len(),
                limit: limits.input,
            });
        }
        let (parents, leaf_drivers) = splitter_tree(outs.len(), limits.splitter);
        let base = dag.node(old).id.clone();
        let mut made = Vec::with_capacity(parents.len());
        for p in parents {
            let name = b.fresh_name(&format!("{base}_s{}", made.len()));
            let src = p.map_or(new, |p| made[p]);
            made.push(b.splitter(&name, src)?);
        }
        for (e, s) in outs.iter().zip(leaf_drivers) {
            driver[e.0] = Some(made[s]);
        }
        Ok(())
    };

    for n in dag.inputs() {
        new_id[n.0] = b.input(&dag.node(n).id)?;
    }
    for n in dag.inputs() {
        fan_out(&mut b, &mut driver, n, new_id[n.0])?;
    }
    for n in dag.node_ids().filter(|&n| dag.kind(n) != NodeKind::Input) {
        let node = dag.node(n);
        let mut srcs = dag.fanin(n).iter().map(|e| driver[e.0].expect("drivers are assigned in topological order"));
        let id = match node.kind {
            NodeKind::Gate(kind) => {
                let ops = node
                    .pins
                    .iter()
                    .map(|p| match p {
                        Pin::Signal { inverted } => Operand::Signal { node: srcs.next().unwrap(), inverted: *inverted },
                        Pin::Const { id, inverted } => Operand::Const { id: id.clone(), inverted: *inverted },
                    })
                    .collect();
                b.gate(&node.id, kind, ops)?
            }
            NodeKind::Splitter => b.splitter(&node.id, srcs.next().unwrap())?,
            NodeKind::Buffer => b.buffer(&node.id, srcs.next().unwrap())?,
            NodeKind::Output => b.output(&node.id, srcs.next().unwrap())?,
            NodeKind::Input => unreachable!(),
        };
        new_id[n.0] = id;
        if node.kind != NodeKind::Output {
            fan_out(&mut b, &mut driver, n, id)?;
        }
    }
    Ok(b.build())
}

/// Longest input-to-output path measured in internal nodes.
pub fn logic_depth(dag: &MappedDag) -> u32 {
    let depth = dag.asap_depths();
    let outs: Vec<u32> = dag.outputs().map(|o| depth[o.0]).collect();
    if outs.is_empty() {
        depth.into_iter().max().unwrap_or(0)
    } else {
        outs.into_iter().max().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImbalanceHistogram {
    /// imbalance (levels) -> number of gates
    pub buckets: BTreeMap<u32, usize>,
    pub mean: f64,
}

/// For every gate with at least two signal inputs, the spread between the
/// deepest and shallowest ASAP level among its fanins.
pub fn imbalance_histogram(dag: &MappedDag) -> ImbalanceHistogram {
    let depth = dag.asap_depths();
    let mut buckets = BTreeMap::new();
    let (mut total, mut count) = (0u64, 0usize);
    for n in dag.node_ids() {
        if !matches!(dag.kind(n), NodeKind::Gate(_)) || dag.fanin(n).len() < 2 {
            continue;
        }
        let levels: Vec<u32> = dag.preds(n).map(|p| depth[p.0]).collect();
        let spread = levels.iter().max().unwrap() - levels.iter().min().unwrap();
        *buckets.entry(spread).or_insert(0) += 1;
        total += u64::from(spread);
        count += 1;
    }
    let mean = if count == 0 { 0.0 } else { total as f64 / count as f64 };
    ImbalanceHistogram { buckets, mean }
}

/// Shared writer for mapped and scheduled dumps. Levels, when given, are
/// appended as `@<level>`.
pub(crate) fn write_dag(dag: &MappedDag, levels: Option<&[u32]>) -> String {
    let mut out = String::new();
    let at = |n: NodeId| levels.map(|l| format!(" @{}", l[n.0])).unwrap_or_default();
    writeln!(out, "name {}", dag.name).unwrap();
    for n in dag.inputs() {
        writeln!(out, "in {}{}", dag.node(n).id, at(n)).unwrap();
    }
    for (id, kind) in &dag.constants {
        writeln!(out, "gate {id} {kind}").unwrap();
    }
    for n in dag.node_ids() {
        let node = dag.node(n);
        let mut srcs = dag.preds(n).map(|p| dag.node(p).id.as_str());
        match node.kind {
            NodeKind::Input => {}
            NodeKind::Gate(kind) => {
                write!(out, "gate {} {kind}", node.id).unwrap();
                for pin in &node.pins {
                    let (name, inv) = match pin {
                        Pin::Signal { inverted } => (srcs.next().unwrap(), *inverted),
                        Pin::Const { id, inverted } => (id.as_str(), *inverted),
                    };
                    write!(out, " {}{name}", if inv { "~" } else { "" }).unwrap();
                }
                writeln!(out, "{}", at(n)).unwrap();
            }
            NodeKind::Splitter => writeln!(out, "split {} {}{}", node.id, srcs.next().unwrap(), at(n)).unwrap(),
            NodeKind::Buffer => writeln!(out, "buf {} {}{}", node.id, srcs.next().unwrap(), at(n)).unwrap(),
            NodeKind::Output => writeln!(out, "out {} as {}{}", srcs.next().unwrap(), node.id, at(n)).unwrap(),
        }
    }
    out
}

/// Parses the extended grammar produced by [`write_dag`]. Statements must
/// appear in topological order. With `levels` set, every non-constant
/// statement must carry an `@<level>` suffix.
pub(crate) fn parse_dag(text: &str, levels: bool) -> Result<(MappedDag, Vec<u32>), NetlistError> {
    let err = |line: usize, reason: String| NetlistError::Parse { line, reason };
    let mut name = "top".to_string();
    let mut b: Option<DagBuilder> = None;
    let mut ids: HashMap<String, NodeId> = HashMap::new();
    let mut consts: HashSet<String> = HashSet::new();
    let mut lv: Vec<u32> = Vec::new();

    for (line, mut toks) in statements(text) {
        let level = match toks.last() {
            Some(t) if t.starts_with('@') => {
                let v = t[1..].parse::<u32>().map_err(|_| err(line, format!("bad level `{t}`")))?;
                toks.pop();
                Some(v)
            }
            _ => None,
        };
        let is_const_decl = toks[0] == "gate" && toks.len() == 3 && matches!(toks[2], "CONST0" | "CONST1");
        if toks[0] != "name" && !is_const_decl {
            if levels && level.is_none() {
                return Err(err(line, "missing `@<level>`".into()));
            }
            if !levels && level.is_some() {
                return Err(err(line, "unexpected level annotation".into()));
            }
        }
        if toks[0] == "name" {
            if toks.len() != 2 || b.is_some() {
                return Err(err(line, "`name` must be a single id before any node".into()));
            }
            name = toks[1].to_string();
            continue;
        }
        let builder = b.get_or_insert_with(|| DagBuilder::new(name.clone()));
        let lookup = |ids: &HashMap<String, NodeId>, tok: &str| {
            ids.get(tok).copied().ok_or_else(|| err(line, format!("unknown driver `{tok}`")))
        };
        let map = |e: MappingError| err(line, e.to_string());
        let arg = |i: usize| toks.get(i).copied().ok_or_else(|| err(line, "missing operand".into()));
        let node = match toks[0] {
            "in" if toks.len() == 2 => Some(builder.input(toks[1]).map_err(map)?),
            "split" | "buf" if toks.len() == 3 => {
                let src = lookup(&ids, toks[2])?;
                Some(if toks[0] == "split" { builder.splitter(toks[1], src) } else { builder.buffer(toks[1], src) }.map_err(map)?)
            }
            "out" if toks.len() == 4 && toks[2] == "as" => Some(builder.output(toks[3], lookup(&ids, toks[1])?).map_err(map)?),
            "gate" => {
                let id = arg(1)?;
                let kind = GateKind::from_keyword(arg(2)?).ok_or_else(|| err(line, format!("unknown gate kind `{}`", toks[2])))?;
                if kind.is_const() {
                    builder.constant(id, kind).map_err(map)?;
                    consts.insert(id.to_string());
                    None
                } else {
                    let mut ops = Vec::new();
                    for tok in &toks[3..] {
                        let (inverted, base) = match tok.strip_prefix('~') {
                            Some(rest) => (true, rest),
                            None => (false, *tok),
                        };
                        if consts.contains(base) {
                            ops.push(Operand::Const { id: base.to_string(), inverted });
                        } else {
                            ops.push(Operand::Signal { node: lookup(&ids, base)?, inverted });
                        }
                    }
                    Some(builder.gate(id, kind, ops).map_err(map)?)
                }
            }
            other => return Err(err(line, format!("malformed `{other}` statement"))),
        };
        if let Some(node) = node {
            ids.insert(builder.nodes[node.0].id.clone(), node);
            lv.push(level.unwrap_or(0));
        }
    }
    let dag = b.unwrap_or_else(|| DagBuilder::new(name)).build();
    Ok((dag, lv))
}

/// Parses a mapped DAG dump (no levels).
pub fn parse_mapped(text: &str) -> Result<MappedDag, NetlistError> {
    parse_dag(text, false).map(|(dag, _)| dag)
}
