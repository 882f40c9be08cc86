//! Gate-level netlists in a small line-oriented text format.
//!
//! ```text
//! # full comment line
//! name c17
//! in n1
//! in n2; in n3          # `;` separates statements on one line
//! gate g1 MAJ3 n1 ~n2 n3
//! gate g2 NAND g1 n3     # folded to MAJ3(~g1, ~n3, 1)
//! out g2
//! ```
//!
//! Fanins may be prefixed with `~` to take the inverted signal. AQFP
//! inverters are buffers with a negated output, so an inversion on a gate
//! input costs nothing and does not add a level.
//!
//! The two-input operators `AND`, `OR`, `NAND` and `NOR` are accepted as
//! sugar and folded into `MAJ3` with a constant third input:
//! `AND(a,b) = MAJ3(a,b,0)`, `OR(a,b) = MAJ3(a,b,1)`,
//! `NAND(a,b) = MAJ3(~a,~b,1)` and `NOR(a,b) = MAJ3(~a,~b,0)`. The
//! constants are declared implicitly as `_const0` / `_const1`.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

/// Implicit constant ids created by the two-input folding frontend.
pub const CONST0_ID: &str = "_const0";
pub const CONST1_ID: &str = "_const1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateKind {
    Buf,
    Not,
    Maj3,
    Const0,
    Const1,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::Const0 | GateKind::Const1 => 0,
            GateKind::Buf | GateKind::Not => 1,
            GateKind::Maj3 => 3,
        }
    }

    pub fn is_const(self) -> bool {
        matches!(self, GateKind::Const0 | GateKind::Const1)
    }

    pub fn keyword(self) -> &'static str {
        match self {
            GateKind::Buf => "BUF",
            GateKind::Not => "NOT",
            GateKind::Maj3 => "MAJ3",
            GateKind::Const0 => "CONST0",
            GateKind::Const1 => "CONST1",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        Some(match word {
            "BUF" => GateKind::Buf,
            "NOT" => GateKind::Not,
            "MAJ3" => GateKind::Maj3,
            "CONST0" => GateKind::Const0,
            "CONST1" => GateKind::Const1,
            _ => return None,
        })
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// A reference to a driver, optionally inverted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fanin {
    pub id: String,
    pub inverted: bool,
}

impl Fanin {
    pub fn new(id: impl Into<String>) -> Self {
        Fanin { id: id.into(), inverted: false }
    }

    pub fn inverted(id: impl Into<String>) -> Self {
        Fanin { id: id.into(), inverted: true }
    }
}

impl fmt::Display for Fanin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.inverted {
            write!(f, "~{}", self.id)
        } else {
            f.write_str(&self.id)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateDecl {
    pub id: String,
    pub kind: GateKind,
    pub fanins: Vec<Fanin>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Netlist {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub gates: Vec<GateDecl>,
}

impl Default for Netlist {
    fn default() -> Self {
        Netlist { name: "top".to_string(), inputs: Vec::new(), outputs: Vec::new(), gates: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    DuplicateId,
    Dangling,
    Cycle,
    Arity,
    /// The same driver feeds two pins of one gate.
    DuplicateFanin,
    /// A logic gate with no non-constant input.
    ConstantOnly,
    /// An output driven by a constant cell.
    ConstantOutput,
    DuplicateOutput,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::DuplicateId => "duplicate-id",
            ViolationKind::Dangling => "dangling",
            ViolationKind::Cycle => "cycle",
            ViolationKind::Arity => "arity",
            ViolationKind::DuplicateFanin => "duplicate-fanin",
            ViolationKind::ConstantOnly => "constant-only",
            ViolationKind::ConstantOutput => "constant-output",
            ViolationKind::DuplicateOutput => "duplicate-output",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub node: String,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.node, self.kind)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetlistError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("invalid netlist: node `{node}`: {reason}")]
    Validation { node: String, reason: ViolationKind },
}

fn is_identifier(tok: &str) -> bool {
    let mut chars = tok.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_id(tok: &str, line: usize) -> Result<String, NetlistError> {
    if is_identifier(tok) {
        Ok(tok.to_string())
    } else {
        Err(NetlistError::Parse { line, reason: format!("invalid identifier `{tok}`") })
    }
}

fn parse_fanin(tok: &str, line: usize) -> Result<Fanin, NetlistError> {
    match tok.strip_prefix('~') {
        Some(rest) => Ok(Fanin::inverted(parse_id(rest, line)?)),
        None => Ok(Fanin::new(parse_id(tok, line)?)),
    }
}

/// Splits text into `(line number, tokens)` statements, dropping comments.
pub(crate) fn statements(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().flat_map(|(idx, raw)| {
        let body = raw.split('#').next().unwrap_or("");
        body.split(';')
            .map(move |stmt| (idx + 1, stmt.split_whitespace().collect::<Vec<_>>()))
            .filter(|(_, toks)| !toks.is_empty())
            .collect::<Vec<_>>()
    })
}

/// Parses and validates a netlist. Gates come back in a stable topological
/// order, so `parse_netlist(&n.to_string())` reproduces `n`.
pub fn parse_netlist(text: &str) -> Result<Netlist, NetlistError> {
    let mut netlist = Netlist::default();
    let mut named = false;
    // first line that referenced each implicit constant
    let mut implicit: Vec<(&'static str, GateKind, usize)> = Vec::new();

    for (line, toks) in statements(text) {
        match toks[0] {
            "name" => {
                if toks.len() != 2 {
                    return Err(NetlistError::Parse { line, reason: "expected `name <id>`".into() });
                }
                if named {
                    return Err(NetlistError::Parse { line, reason: "duplicate `name` statement".into() });
                }
                netlist.name = parse_id(toks[1], line)?;
                named = true;
            }
            "in" => {
                if toks.len() != 2 {
                    return Err(NetlistError::Parse { line, reason: "expected `in <id>`".into() });
                }
                netlist.inputs.push(parse_id(toks[1], line)?);
            }
            "out" => {
                if toks.len() != 2 {
                    return Err(NetlistError::Parse { line, reason: "expected `out <id>`".into() });
                }
                netlist.outputs.push(parse_id(toks[1], line)?);
            }
            "gate" => {
                if toks.len() < 3 {
                    return Err(NetlistError::Parse { line, reason: "expected `gate <id> <KIND> <fanin>*`".into() });
                }
                let id = parse_id(toks[1], line)?;
                let fanins = toks[3..].iter().map(|t| parse_fanin(t, line)).collect::<Result<Vec<_>, _>>()?;
                let (kind, fanins) = match GateKind::from_keyword(toks[2]) {
                    Some(kind) => (kind, fanins),
                    None => {
                        let (invert, constant) = match toks[2] {
                            "AND" => (false, GateKind::Const0),
                            "OR" => (false, GateKind::Const1),
                            "NAND" => (true, GateKind::Const1),
                            "NOR" => (true, GateKind::Const0),
                            other => {
                                return Err(NetlistError::Parse { line, reason: format!("unknown gate kind `{other}`") })
                            }
                        };
                        if fanins.len() != 2 {
                            return Err(NetlistError::Parse {
                                line,
                                reason: format!("`{}` takes exactly 2 fanins", toks[2]),
                            });
                        }
                        let const_id = if constant == GateKind::Const0 { CONST0_ID } else { CONST1_ID };
                        if !implicit.iter().any(|(id, _, _)| *id == const_id) {
                            implicit.push((const_id, constant, line));
                        }
                        let mut folded: Vec<Fanin> = fanins
                            .into_iter()
                            .map(|f| Fanin { id: f.id, inverted: f.inverted ^ invert })
                            .collect();
                        folded.push(Fanin::new(const_id));
                        (GateKind::Maj3, folded)
                    }
                };
                netlist.gates.push(GateDecl { id, kind, fanins });
            }
            other => {
                return Err(NetlistError::Parse { line, reason: format!("unknown statement `{other}`") });
            }
        }
    }

    for (id, kind, line) in implicit {
        if netlist.inputs.iter().any(|i| i == id) {
            return Err(NetlistError::Parse { line, reason: format!("reserved id `{id}` declared as an input") });
        }
        match netlist.gates.iter().find(|g| g.id == id) {
            Some(g) if g.kind == kind => {}
            Some(_) => {
                return Err(NetlistError::Parse { line, reason: format!("reserved id `{id}` is not a {kind} cell") })
            }
            None => netlist.gates.push(GateDecl { id: id.to_string(), kind, fanins: Vec::new() }),
        }
    }

    if let Some(v) = validate(&netlist).violations.into_iter().next() {
        return Err(NetlistError::Validation { node: v.node, reason: v.kind });
    }
    netlist.gates = netlist.topological_gates().into_iter().cloned().collect();
    Ok(netlist)
}

/// Lists every structural problem of a netlist. An empty report means
/// `parse_netlist` and splitter insertion accept it.
pub fn validate(netlist: &Netlist) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut push = |node: &str, kind| report.violations.push(Violation { node: node.to_string(), kind });

    let mut kinds: HashMap<&str, Option<GateKind>> = HashMap::new();
    for pi in &netlist.inputs {
        if kinds.insert(pi.as_str(), None).is_some() {
            push(pi, ViolationKind::DuplicateId);
        }
    }
    for gate in &netlist.gates {
        if kinds.insert(gate.id.as_str(), Some(gate.kind)).is_some() {
            push(&gate.id, ViolationKind::DuplicateId);
        }
    }

    for gate in &netlist.gates {
        if gate.fanins.len() != gate.kind.arity() {
            push(&gate.id, ViolationKind::Arity);
        }
        let mut seen = HashSet::new();
        let mut signals = 0;
        for fanin in &gate.fanins {
            match kinds.get(fanin.id.as_str()) {
                None => push(&gate.id, ViolationKind::Dangling),
                Some(Some(k)) if k.is_const() => {}
                Some(_) => {
                    signals += 1;
                    if !seen.insert(fanin.id.as_str()) {
                        push(&gate.id, ViolationKind::DuplicateFanin);
                    }
                }
            }
        }
        if !gate.kind.is_const() && signals == 0 && !gate.fanins.is_empty() {
            push(&gate.id, ViolationKind::ConstantOnly);
        }
    }

    let mut outs = HashSet::new();
    for out in &netlist.outputs {
        match kinds.get(out.as_str()) {
            None => push(out, ViolationKind::Dangling),
            Some(Some(k)) if k.is_const() => push(out, ViolationKind::ConstantOutput),
            Some(_) => {}
        }
        if !outs.insert(out.as_str()) {
            push(out, ViolationKind::DuplicateOutput);
        }
    }

    for id in cyclic_gates(netlist) {
        push(id, ViolationKind::Cycle);
    }
    report
}

/// Gates that lie on a directed cycle.
fn cyclic_gates(netlist: &Netlist) -> Vec<&str> {
    let index: HashMap<&str, usize> = netlist.gates.iter().enumerate().map(|(i, g)| (g.id.as_str(), i)).collect();
    let succs: Vec<Vec<usize>> = {
        let mut s = vec![Vec::new(); netlist.gates.len()];
        for (j, g) in netlist.gates.iter().enumerate() {
            for f in &g.fanins {
                if let Some(&i) = index.get(f.id.as_str()) {
                    s[i].push(j);
                }
            }
        }
        s
    };
    let remaining = kahn(&succs);
    // a leftover gate is either on a cycle or downstream of one
    remaining
        .into_iter()
        .filter(|&start| {
            let mut stack = succs[start].clone();
            let mut seen = HashSet::new();
            while let Some(v) = stack.pop() {
                if v == start {
                    return true;
                }
                if seen.insert(v) {
                    stack.extend(&succs[v]);
                }
            }
            false
        })
        .map(|i| netlist.gates[i].id.as_str())
        .collect()
}

/// Stable Kahn sort over successor lists; returns the nodes that could not
/// be ordered.
fn kahn(succs: &[Vec<usize>]) -> Vec<usize> {
    let order = kahn_order(succs);
    let placed: HashSet<usize> = order.into_iter().collect();
    (0..succs.len()).filter(|i| !placed.contains(i)).collect()
}

fn kahn_order(succs: &[Vec<usize>]) -> Vec<usize> {
    let mut indeg = vec![0usize; succs.len()];
    for s in succs {
        for &j in s {
            indeg[j] += 1;
        }
    }
    let mut ready: std::collections::BTreeSet<usize> = (0..succs.len()).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(succs.len());
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for &j in &succs[i] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                ready.insert(j);
            }
        }
    }
    order
}

impl Netlist {
    /// Gates in topological order, earliest declaration first among ready
    /// gates. Gates on cycles are omitted.
    pub fn topological_gates(&self) -> Vec<&GateDecl> {
        let index: HashMap<&str, usize> = self.gates.iter().enumerate().map(|(i, g)| (g.id.as_str(), i)).collect();
        let mut succs = vec![Vec::new(); self.gates.len()];
        for (j, g) in self.gates.iter().enumerate() {
            for f in &g.fanins {
                if let Some(&i) = index.get(f.id.as_str()) {
                    succs[i].push(j);
                }
            }
        }
        kahn_order(&succs).into_iter().map(|i| &self.gates[i]).collect()
    }

    /// Logic gates, i.e. everything except constant cells.
    pub fn logic_gate_count(&self) -> usize {
        self.gates.iter().filter(|g| !g.kind.is_const()).count()
    }

    pub fn gate(&self, id: &str) -> Option<&GateDecl> {
        self.gates.iter().find(|g| g.id == id)
    }
}

impl fmt::Display for Netlist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "name {}", self.name)?;
        for pi in &self.inputs {
            writeln!(f, "in {pi}")?;
        }
        for gate in self.topological_gates() {
            write!(f, "gate {} {}", gate.id, gate.kind)?;
            for fanin in &gate.fanins {
                write!(f, " {fanin}")?;
            }
            writeln!(f)?;
        }
        for po in &self.outputs {
            writeln!(f, "out {po}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_one_gate() {
        let n = parse_netlist("in a; in b; in c; gate g1 MAJ3 a b c; out g1").unwrap();
        assert_eq!(n.inputs.len(), 3);
        assert_eq!(n.gates.len(), 1);
        assert_eq!(n.outputs, vec!["g1"]);
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let err = parse_netlist("in a; in b; gate g1 MAJ3 a b g1; out g1").unwrap_err();
        assert_eq!(err, NetlistError::Validation { node: "g1".into(), reason: ViolationKind::Cycle });
    }

    #[test]
    fn longer_cycle_reports_members_only() {
        let text = "in a\ngate g1 MAJ3 a g3 _c\ngate g2 BUF g1\ngate g3 NOT g2\ngate g4 BUF g3\ngate _c CONST0\nout g4";
        let n = Netlist {
            name: "t".into(),
            inputs: vec!["a".into()],
            outputs: vec!["g4".into()],
            gates: vec![
                GateDecl { id: "g1".into(), kind: GateKind::Maj3, fanins: vec![Fanin::new("a"), Fanin::new("g3"), Fanin::new("_c")] },
                GateDecl { id: "g2".into(), kind: GateKind::Buf, fanins: vec![Fanin::new("g1")] },
                GateDecl { id: "g3".into(), kind: GateKind::Not, fanins: vec![Fanin::new("g2")] },
                GateDecl { id: "g4".into(), kind: GateKind::Buf, fanins: vec![Fanin::new("g3")] },
                GateDecl { id: "_c".into(), kind: GateKind::Const0, fanins: vec![] },
            ],
        };
        let report = validate(&n);
        let cyc: Vec<_> = report.violations.iter().filter(|v| v.kind == ViolationKind::Cycle).map(|v| v.node.as_str()).collect();
        assert_eq!(cyc, vec!["g1", "g2", "g3"]);
        assert!(parse_netlist(text).is_err());
    }

    #[test]
    fn valid_netlist_has_empty_report() {
        let n = parse_netlist("in a\ngate g BUF a\nout g\n").unwrap();
        assert!(validate(&n).is_valid());
    }

    #[test]
    fn dangling_output() {
        let n = Netlist { inputs: vec!["a".into()], outputs: vec!["zz".into()], ..Default::default() };
        let report = validate(&n);
        assert_eq!(report.violations, vec![Violation { node: "zz".into(), kind: ViolationKind::Dangling }]);
    }

    #[test]
    fn duplicate_gate_ids() {
        let n = Netlist {
            inputs: vec!["a".into()],
            gates: vec![
                GateDecl { id: "g1".into(), kind: GateKind::Buf, fanins: vec![Fanin::new("a")] },
                GateDecl { id: "g1".into(), kind: GateKind::Not, fanins: vec![Fanin::new("a")] },
            ],
            ..Default::default()
        };
        assert!(validate(&n).has(ViolationKind::DuplicateId));
    }

    #[test]
    fn arity_and_duplicate_fanin() {
        let err = parse_netlist("in a; in b; gate g MAJ3 a b; out g").unwrap_err();
        assert!(matches!(err, NetlistError::Validation { reason: ViolationKind::Arity, .. }));
        let err = parse_netlist("in a; in b; gate g MAJ3 a ~a b; out g").unwrap_err();
        assert!(matches!(err, NetlistError::Validation { reason: ViolationKind::DuplicateFanin, .. }));
    }

    #[test]
    fn constant_only_gate_rejected() {
        let err = parse_netlist("gate k CONST1\ngate g BUF k\nout g").unwrap_err();
        assert!(matches!(err, NetlistError::Validation { reason: ViolationKind::ConstantOnly, .. }));
        let err = parse_netlist("gate k CONST1\nout k").unwrap_err();
        assert!(matches!(err, NetlistError::Validation { reason: ViolationKind::ConstantOutput, .. }));
    }

    #[test]
    fn two_input_folding() {
        let n = parse_netlist("in a; in b\ngate x NAND a b\ngate y AND a x\nout y").unwrap();
        let x = n.gate("x").unwrap();
        assert_eq!(x.kind, GateKind::Maj3);
        assert_eq!(x.fanins, vec![Fanin::inverted("a"), Fanin::inverted("b"), Fanin::new(CONST1_ID)]);
        assert_eq!(n.gate(CONST1_ID).unwrap().kind, GateKind::Const1);
        assert_eq!(n.gate(CONST0_ID).unwrap().kind, GateKind::Const0);
        assert_eq!(n.logic_gate_count(), 2);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_netlist("in a\n\ngate g FOO a\n").unwrap_err();
        assert!(matches!(err, NetlistError::Parse { line: 3, .. }));
        let err = parse_netlist("in 9a\n").unwrap_err();
        assert!(matches!(err, NetlistError::Parse { line: 1, .. }));
    }

    #[test]
    fn gates_are_reordered_topologically() {
        let n = parse_netlist("in a\nout g2\ngate g2 BUF g1\ngate g1 NOT a\n").unwrap();
        assert_eq!(n.gates[0].id, "g1");
        assert_eq!(parse_netlist(&n.to_string()).unwrap(), n);
    }
}
