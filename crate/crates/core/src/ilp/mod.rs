//! Exact level assignment: the integer program over levels, per-edge
//! decompositions and repetition counts, a branch-and-bound solver for it,
//! and LP-format export for external solvers.

mod lpfile;
mod model;
mod solver;

use std::time::Duration;

use thiserror::Error;

use crate::costmodel::{CostError, EdgeDecomposition};

pub use lpfile::{export_lp, format_solution, import_solution};
pub use model::{build_model, default_level_bound, warm_start, IlpModel, Row, Sense, VarKind, Variable};
pub use solver::{solve, SolveOptions};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IlpError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("model is infeasible")]
    Infeasible,
    #[error("search limit reached before any feasible schedule was found")]
    NoIncumbent,
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("missing value for variable `{0}`")]
    MissingVariable(String),
    #[error("variable `{0}` assigned twice")]
    DuplicateVariable(String),
    #[error("line {line}: {reason}")]
    BadListing { line: usize, reason: String },
    #[error("constraint `{0}` violated")]
    ConstraintViolated(String),
}

impl From<CostError> for IlpError {
    fn from(e: CostError) -> Self {
        IlpError::Config(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Proven optimal.
    Optimal,
    /// Best schedule found before a limit hit, or an imported one.
    Feasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolveStats {
    pub nodes: u64,
    pub wall: Duration,
    /// Lower bound on the optimum; equals the objective when optimal.
    pub best_bound: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub status: SolveStatus,
    pub objective: u64,
    /// Level per DAG node.
    pub levels: Vec<u32>,
    /// Decomposition per DAG edge.
    pub edges: Vec<EdgeDecomposition>,
    /// Repetition counts per node, when the model is throughput-constrained.
    pub reps: Option<Vec<u32>>,
    pub stats: SolveStats,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmodel::{ClockConfig, Scheme, SkipLimit};
    use crate::mapping::{insert_splitter_trees, FanoutLimits, MappedDag};
    use crate::netlist::parse_netlist;

    fn dag(text: &str) -> MappedDag {
        insert_splitter_trees(&parse_netlist(text).unwrap(), &FanoutLimits::default()).unwrap()
    }

    fn reconvergent(len: usize) -> MappedDag {
        let mut text = String::from("in a\ngate g1 BUF a\n");
        for k in 2..=len {
            text += &format!("gate g{k} BUF g{}\n", k - 1);
        }
        text += &format!("gate x AND a g{len}\nout x");
        dag(&text)
    }

    fn run(d: &MappedDag, c: &ClockConfig) -> Solution {
        solve(&build_model(d, c).unwrap(), &SolveOptions::default()).unwrap()
    }

    #[test]
    fn chain_is_free_and_consecutive() {
        let d = dag("in a\ngate g1 BUF a\ngate g2 NOT g1\ngate g3 BUF g2\nout g3");
        let sol = run(&d, &ClockConfig::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.objective, 0);
        for e in d.edges() {
            assert_eq!(sol.levels[e.dst.0], sol.levels[e.src.0] + 1);
        }
    }

    #[test]
    fn reconvergent_gap_per_scheme() {
        let d = reconvergent(11);
        let base = ClockConfig::default();
        let expect = [(Scheme::Balanced, 11), (Scheme::PhaseSkip, 5), (Scheme::PhaseAlign, 3), (Scheme::Combined, 1)];
        for (scheme, cost) in expect {
            let sol = run(&d, &base.with_scheme(scheme));
            assert_eq!(sol.objective, cost, "{scheme}");
            assert_eq!(sol.stats.best_bound, cost);
        }
    }

    #[test]
    fn no_skips_reduces_to_phase_skipping() {
        let d = reconvergent(7);
        let c = ClockConfig { s_max: SkipLimit::Finite(0), ..ClockConfig::default() };
        assert_eq!(run(&d, &c).objective, run(&d, &c.with_scheme(Scheme::PhaseSkip)).objective);
        let c1 = ClockConfig { p: 1, ..c };
        assert_eq!(run(&d, &c1).objective, run(&d, &c.with_scheme(Scheme::Balanced)).objective);
    }

    #[test]
    fn tight_level_bound_is_infeasible() {
        let d = reconvergent(4);
        let c = ClockConfig { max_level: Some(6), ..ClockConfig::default() };
        assert_eq!(solve(&build_model(&d, &c).unwrap(), &SolveOptions::default()), Err(IlpError::Infeasible));
    }

    #[test]
    fn repetition_bound_limits_skips() {
        let d = reconvergent(11);
        let free = run(&d, &ClockConfig { r_max: Some(1), ..ClockConfig::default() });
        assert_eq!(free.objective, 1);
        let none = run(&d, &ClockConfig { r_max: Some(0), ..ClockConfig::default() });
        assert_eq!(none.objective, 5);
        assert!(none.edges.iter().all(|e| e.skips == 0));
    }

    #[test]
    fn node_limit_returns_sound_bound() {
        let d = reconvergent(11);
        let m = build_model(&d, &ClockConfig::default()).unwrap();
        let sol = solve(&m, &SolveOptions { node_limit: Some(1), ..Default::default() }).unwrap();
        assert!(sol.stats.best_bound <= sol.objective);
        m.check(&sol).unwrap();
    }

    #[test]
    fn lp_export_rows_and_determinism() {
        let d = dag("in i; gate j BUF i; out j");
        let m = build_model(&d, &ClockConfig::default()).unwrap();
        let lp = export_lp(&m);
        assert!(lp.contains("1 L_j - 1 L_i - 8 S_i__j - 1 b_i__j >= 1"), "{lp}");
        assert!(lp.starts_with("\\ top\nMinimize\n"));
        assert!(lp.contains("\nSubject To\n") && lp.contains("\nBounds\n") && lp.contains("\nGenerals\n"));
        assert!(lp.ends_with("End\n"));
        assert_eq!(lp, export_lp(&build_model(&d, &ClockConfig::default()).unwrap()));
    }

    #[test]
    fn solution_listing_round_trip() {
        let d = reconvergent(11);
        let m = build_model(&d, &ClockConfig::default()).unwrap();
        let sol = solve(&m, &SolveOptions::default()).unwrap();
        let listing = format_solution(&m, &sol);
        let back = import_solution(&listing, &m).unwrap();
        assert_eq!(back.objective, sol.objective);
        assert_eq!(back.levels, sol.levels);
        assert_eq!(back.status, SolveStatus::Feasible);

        let floats = listing.lines().map(|l| format!("{l}.0  # from solver\n")).collect::<String>();
        assert_eq!(import_solution(&floats, &m).unwrap().objective, sol.objective);

        let missing: String = listing.lines().filter(|l| !l.starts_with("a_a__x ")).map(|l| format!("{l}\n")).collect();
        assert_eq!(import_solution(&missing, &m), Err(IlpError::MissingVariable("a_a__x".into())));

        let unknown = format!("{listing}zz 1\n");
        assert_eq!(import_solution(&unknown, &m), Err(IlpError::UnknownVariable("zz".into())));

        let broken: String = listing
            .lines()
            .map(|l| if l.starts_with("L_x ") { "L_x 0\n".to_string() } else { format!("{l}\n") })
            .collect();
        assert!(matches!(import_solution(&broken, &m), Err(IlpError::ConstraintViolated(_))));
    }
}
