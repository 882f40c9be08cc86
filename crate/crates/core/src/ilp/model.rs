use std::collections::HashSet;

use crate::costmodel::{ClockConfig, EdgeDecomposition, HopRules, SkipLimit};
use crate::mapping::{logic_depth, EdgeId, MappedDag, NodeId, NodeKind};

use super::{IlpError, Solution, SolveStats, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Level(NodeId),
    Alpha(EdgeId),
    Beta(EdgeId),
    Skips(EdgeId),
    Cost(EdgeId),
    Reps(NodeId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lo: i64,
    pub hi: Option<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }

    fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            Sense::Le => lhs <= rhs,
            Sense::Ge => lhs >= rhs,
            Sense::Eq => lhs == rhs,
        }
    }
}

/// `Σ coef·var  sense  rhs`; zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub name: String,
    pub terms: Vec<(i64, usize)>,
    pub sense: Sense,
    pub rhs: i64,
}

#[derive(Debug, Clone)]
pub struct IlpModel {
    dag: MappedDag,
    config: ClockConfig,
    rules: HopRules,
    l_max: u32,
    vars: Vec<Variable>,
    rows: Vec<Row>,
    level_var: Vec<usize>,
    edge_vars: Vec<[usize; 4]>,
    rep_var: Option<Vec<usize>>,
}

/// Level bound used when the configuration does not set one:
/// `pi_hi + (depth + 1)·(S·N + P)` with the scheme's effective `P` and `S`.
/// Unbounded skips count as one window per hop.
pub fn default_level_bound(dag: &MappedDag, config: &ClockConfig) -> Result<u32, IlpError> {
    if let Some(l) = config.max_level {
        return Ok(l);
    }
    let rules = config.rules();
    let s = match rules.s_max {
        SkipLimit::Finite(s) => s,
        SkipLimit::Unbounded if config.r_max.is_some() => {
            return Err(IlpError::Config(
                "a repetition bound with unbounded cycle skips needs an explicit level bound".into(),
            ))
        }
        SkipLimit::Unbounded => 1,
    };
    let depth = logic_depth(dag);
    Ok(config.pi_levels.1 + (depth + 1) * (s * rules.n + rules.p))
}

struct Rows(Vec<Row>);

impl Rows {
    fn add(&mut self, name: String, terms: &[(i64, usize)], sense: Sense, rhs: i64) {
        let terms = terms.iter().copied().filter(|&(c, _)| c != 0).collect();
        self.0.push(Row { name, terms, sense, rhs });
    }
}

pub fn build_model(dag: &MappedDag, config: &ClockConfig) -> Result<IlpModel, IlpError> {
    config.validate()?;
    let l_max = default_level_bound(dag, config)?;
    let rules = config.rules();
    let (n, p) = (i64::from(rules.n), i64::from(rules.p));

    let mut vars = Vec::new();
    let mut push = |name: String, kind, lo, hi| {
        vars.push(Variable { name, kind, lo, hi });
        vars.len() - 1
    };
    let level_var: Vec<usize> = dag
        .node_ids()
        .map(|v| push(format!("L_{}", dag.node(v).id), VarKind::Level(v), 0, Some(i64::from(l_max))))
        .collect();
    let beta_hi = match rules.s_max {
        SkipLimit::Finite(0) | SkipLimit::Unbounded => Some(0),
        SkipLimit::Finite(_) => None,
    };
    let mut labels = HashSet::new();
    let edge_vars: Vec<[usize; 4]> = dag
        .edge_ids()
        .map(|e| {
            let mut label = dag.edge_label(e);
            if !labels.insert(label.clone()) {
                label = format!("{label}__e{}", e.0);
                labels.insert(label.clone());
            }
            [
                push(format!("a_{label}"), VarKind::Alpha(e), 0, None),
                push(format!("b_{label}"), VarKind::Beta(e), 0, beta_hi),
                push(format!("S_{label}"), VarKind::Skips(e), 0, None),
                push(format!("C_{label}"), VarKind::Cost(e), 0, None),
            ]
        })
        .collect();
    let rep_var: Option<Vec<usize>> = config.r_max.map(|r| {
        dag.node_ids()
            .map(|v| {
                let hi = if dag.kind(v) == NodeKind::Input { 0 } else { i64::from(r) };
                push(format!("R_{}", dag.node(v).id), VarKind::Reps(v), 0, Some(hi))
            })
            .collect()
    });

    let mut rows = Rows(Vec::new());
    for e in dag.edge_ids() {
        let edge = dag.edge(e);
        let (li, lj) = (level_var[edge.src.0], level_var[edge.dst.0]);
        let [a, b, s, c] = edge_vars[e.0];
        // label is the part after the `a_` prefix
        let label = &vars[a].name[2..];
        rows.add(format!("lvl_lo_{label}"), &[(1, lj), (-1, li), (-n, s), (-1, b)], Sense::Ge, 1);
        rows.add(format!("lvl_hi_{label}"), &[(1, lj), (-1, li), (-p, a), (-n, s), (-1, b)], Sense::Le, p);
        if let SkipLimit::Finite(m) = rules.s_max {
            let m = i64::from(m);
            rows.add(format!("skip_lo_{label}"), &[(1, s), (-m, b)], Sense::Ge, 0);
            rows.add(format!("skip_hi_{label}"), &[(1, s), (-m, b)], Sense::Le, m);
        }
        rows.add(format!("cost_{label}"), &[(1, c), (-1, a), (-1, b)], Sense::Eq, 0);
        if let Some(rv) = &rep_var {
            rows.add(format!("rep_{label}"), &[(1, rv[edge.src.0]), (1, s), (-1, rv[edge.dst.0])], Sense::Le, 0);
        }
    }
    let (pi_lo, pi_hi) = config.pi_levels;
    for v in dag.inputs() {
        let name = &dag.node(v).id;
        rows.add(format!("pi_lo_{name}"), &[(1, level_var[v.0])], Sense::Ge, i64::from(pi_lo));
        rows.add(format!("pi_hi_{name}"), &[(1, level_var[v.0])], Sense::Le, i64::from(pi_hi));
    }
    let outs: Vec<NodeId> = dag.outputs().collect();
    for w in outs.windows(2) {
        let name = &dag.node(w[1]).id;
        rows.add(format!("po_eq_{name}"), &[(1, level_var[w[0].0]), (-1, level_var[w[1].0])], Sense::Eq, 0);
    }
    let rows = rows.0;

    Ok(IlpModel {
        dag: dag.clone(),
        config: *config,
        rules,
        l_max,
        vars,
        rows,
        level_var,
        edge_vars,
        rep_var,
    })
}

impl IlpModel {
    pub fn dag(&self) -> &MappedDag {
        &self.dag
    }

    pub fn config(&self) -> &ClockConfig {
        &self.config
    }

    pub fn rules(&self) -> HopRules {
        self.rules
    }

    pub fn l_max(&self) -> u32 {
        self.l_max
    }

    pub fn r_max(&self) -> Option<u32> {
        self.config.r_max
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    /// Indices of the `C` variables, whose sum is minimized.
    pub fn objective_vars(&self) -> impl Iterator<Item = usize> + '_ {
        self.edge_vars.iter().map(|v| v[3])
    }

    pub fn level_var(&self, v: NodeId) -> usize {
        self.level_var[v.0]
    }

    /// Flattens a solution into one value per model variable.
    pub fn values(&self, sol: &Solution) -> Vec<i64> {
        let mut out = vec![0i64; self.vars.len()];
        for (v, &l) in sol.levels.iter().enumerate() {
            out[self.level_var[v]] = i64::from(l);
        }
        for (e, d) in sol.edges.iter().enumerate() {
            let [a, b, s, c] = self.edge_vars[e];
            out[a] = i64::from(d.alpha);
            out[b] = i64::from(d.beta);
            out[s] = i64::from(d.skips);
            out[c] = i64::from(d.cost());
        }
        if let (Some(rv), Some(reps)) = (&self.rep_var, &sol.reps) {
            for (v, &r) in reps.iter().enumerate() {
                out[rv[v]] = i64::from(r);
            }
        }
        out
    }

    /// Checks bounds and every row exactly.
    pub fn check_values(&self, values: &[i64]) -> Result<(), IlpError> {
        for (var, &x) in self.vars.iter().zip(values) {
            if x < var.lo || var.hi.is_some_and(|h| x > h) {
                return Err(IlpError::ConstraintViolated(format!("bound_{}", var.name)));
            }
        }
        for row in &self.rows {
            let lhs: i64 = row.terms.iter().map(|&(c, v)| c * values[v]).sum();
            if !row.sense.holds(lhs, row.rhs) {
                return Err(IlpError::ConstraintViolated(row.name.clone()));
            }
        }
        Ok(())
    }

    pub fn check(&self, sol: &Solution) -> Result<(), IlpError> {
        if sol.levels.len() != self.dag.len()
            || sol.edges.len() != self.dag.edges().len()
            || sol.reps.is_some() != self.rep_var.is_some()
        {
            return Err(IlpError::ConstraintViolated("shape".into()));
        }
        self.check_values(&self.values(sol))
    }

    /// Rebuilds a structured solution from per-variable values after
    /// checking it against the model.
    pub fn solution_from_values(&self, values: &[i64], status: SolveStatus, stats: SolveStats) -> Result<Solution, IlpError> {
        self.check_values(values)?;
        let u = |i: usize| values[i] as u32;
        let levels = self.level_var.iter().map(|&i| u(i)).collect();
        let edges: Vec<EdgeDecomposition> = self
            .edge_vars
            .iter()
            .map(|&[a, b, s, _]| EdgeDecomposition { alpha: u(a), beta: u(b), skips: u(s) })
            .collect();
        let reps = self.rep_var.as_ref().map(|rv| rv.iter().map(|&i| u(i)).collect());
        let objective = self.objective_vars().map(|i| values[i] as u64).sum();
        Ok(Solution { status, objective, levels, edges, reps, stats })
    }
}

/// Fully path-balanced schedule: inputs at the top of their window, every
/// other node at its ASAP depth above that, no cycle skips.
pub fn warm_start(dag: &MappedDag, config: &ClockConfig) -> Solution {
    let rules = config.rules();
    let skip_free = HopRules { s_max: SkipLimit::Finite(0), ..rules };
    let base = config.pi_levels.1;
    let depth = dag.asap_depths();
    let po_level = base + dag.outputs().map(|o| depth[o.0]).max().unwrap_or(0) + 1;
    let levels: Vec<u32> = dag
        .node_ids()
        .map(|v| match dag.kind(v) {
            NodeKind::Output => po_level,
            _ => base + depth[v.0],
        })
        .collect();
    let edges: Vec<EdgeDecomposition> = dag
        .edges()
        .iter()
        .map(|e| {
            let delta = i64::from(levels[e.dst.0]) - i64::from(levels[e.src.0]);
            skip_free.decompose(delta, None).expect("ASAP levels strictly increase along edges")
        })
        .collect();
    let objective = edges.iter().map(|d| u64::from(d.cost())).sum();
    Solution {
        status: SolveStatus::Feasible,
        objective,
        levels,
        edges,
        reps: config.r_max.map(|_| vec![0; dag.len()]),
        stats: SolveStats::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{insert_splitter_trees, FanoutLimits};
    use crate::netlist::parse_netlist;

    fn dag(text: &str) -> MappedDag {
        insert_splitter_trees(&parse_netlist(text).unwrap(), &FanoutLimits::default()).unwrap()
    }

    #[test]
    fn one_gate_model_shape() {
        let d = dag("in a; in b; in c; gate g MAJ3 a b c; out g");
        let m = build_model(&d, &ClockConfig::default()).unwrap();
        let levels = m.variables().iter().filter(|v| matches!(v.kind, VarKind::Level(_))).count();
        assert_eq!(levels, 5);
        assert_eq!(m.objective_vars().count(), 4);
        let pi_rows = m.rows().iter().filter(|r| r.name.starts_with("pi_")).count();
        assert_eq!(pi_rows, 6);
    }

    #[test]
    fn warm_start_costs() {
        let tree = dag("in a; in b; in c; in d\ngate x AND a b\ngate y OR c d\ngate z AND x y\nout z");
        let ws = warm_start(&tree, &ClockConfig::default());
        assert_eq!(ws.objective, 0);
        assert!(ws.edges.iter().all(|d| d.alpha == 0));

        let mut text = String::from("in a\ngate g1 BUF a\n");
        for k in 2..=11 {
            text += &format!("gate g{k} BUF g{}\n", k - 1);
        }
        text += "gate x AND a g11\nout x";
        let ws = warm_start(&dag(&text), &ClockConfig::default());
        assert_eq!(ws.objective, 5);
        let m = build_model(&dag(&text), &ClockConfig::default()).unwrap();
        m.check(&ws).unwrap();
    }

    #[test]
    fn repetition_bound_with_unbounded_skips_needs_level_bound() {
        let d = dag("in a; gate g BUF a; out g");
        let c = ClockConfig { s_max: SkipLimit::Unbounded, r_max: Some(1), ..ClockConfig::default() };
        assert!(matches!(build_model(&d, &c), Err(IlpError::Config(_))));
        assert!(build_model(&d, &ClockConfig { max_level: Some(40), ..c }).is_ok());
    }

    #[test]
    fn violated_row_is_named() {
        let d = dag("in a; gate g BUF a; out g");
        let m = build_model(&d, &ClockConfig::default()).unwrap();
        let mut ws = warm_start(&d, &ClockConfig::default());
        m.check(&ws).unwrap();
        ws.levels[1] = ws.levels[0];
        assert_eq!(m.check(&ws), Err(IlpError::ConstraintViolated("lvl_lo_a__g".into())));
    }
}
