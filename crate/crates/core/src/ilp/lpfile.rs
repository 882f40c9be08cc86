//! LP-format export and plain-text solution listings.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{IlpError, IlpModel, Solution, SolveStats, SolveStatus};

const WRAP: usize = 120;

struct Lines {
    out: String,
    line: usize,
}

impl Lines {
    fn token(&mut self, tok: &str) {
        if self.line + tok.len() + 1 > WRAP && self.line > 0 {
            self.out.push_str("\n   ");
            self.line = 3;
        }
        self.out.push(' ');
        self.out.push_str(tok);
        self.line += tok.len() + 1;
    }

    fn end(&mut self) {
        self.out.push('\n');
        self.line = 0;
    }
}

fn terms(lines: &mut Lines, model: &IlpModel, terms: &[(i64, usize)]) {
    for (k, &(c, v)) in terms.iter().enumerate() {
        let name = &model.variables()[v].name;
        match (k, c < 0) {
            (0, false) => lines.token(&format!("{c} {name}")),
            (0, true) => lines.token(&format!("-{} {name}", -c)),
            (_, false) => lines.token(&format!("+ {c} {name}")),
            (_, true) => lines.token(&format!("- {} {name}", -c)),
        }
    }
}

/// Writes the model in LP file format. Output depends only on the model.
pub fn export_lp(model: &IlpModel) -> String {
    let mut l = Lines { out: String::new(), line: 0 };
    writeln!(l.out, "\\ {}", model.dag().name()).unwrap();
    l.out.push_str("Minimize\n");
    l.token("obj:");
    let obj: Vec<(i64, usize)> = model.objective_vars().map(|v| (1, v)).collect();
    if obj.is_empty() {
        if let Some(v) = model.variables().first() {
            l.token(&format!("0 {}", v.name));
        }
    } else {
        terms(&mut l, model, &obj);
    }
    l.end();
    l.out.push_str("Subject To\n");
    for row in model.rows() {
        l.token(&format!("{}:", row.name));
        terms(&mut l, model, &row.terms);
        l.token(&format!("{} {}", row.sense.symbol(), row.rhs));
        l.end();
    }
    l.out.push_str("Bounds\n");
    for var in model.variables() {
        match var.hi {
            Some(h) if h == var.lo => writeln!(l.out, " {} = {h}", var.name).unwrap(),
            Some(h) => writeln!(l.out, " {} <= {} <= {h}", var.lo, var.name).unwrap(),
            None => writeln!(l.out, " {} >= {}", var.name, var.lo).unwrap(),
        }
    }
    l.out.push_str("Generals\n");
    for var in model.variables() {
        l.token(&var.name);
    }
    if l.line > 0 {
        l.end();
    }
    l.out.push_str("End\n");
    l.out
}

/// One `<name> <value>` line per model variable, in model order.
pub fn format_solution(model: &IlpModel, sol: &Solution) -> String {
    let mut out = String::new();
    for (var, x) in model.variables().iter().zip(model.values(sol)) {
        writeln!(out, "{} {x}", var.name).unwrap();
    }
    out
}

fn parse_value(tok: &str) -> Option<i64> {
    if let Ok(v) = tok.parse::<i64>() {
        return Some(v);
    }
    // external solvers often print integral values as floats
    let f = tok.parse::<f64>().ok()?;
    let r = f.round();
    ((f - r).abs() <= 1e-6 && r.abs() < 9.0e15).then_some(r as i64)
}

/// Reads a `<name> <value>` listing (one pair per line, `#` comments) and
/// checks it against every row of the model.
pub fn import_solution(text: &str, model: &IlpModel) -> Result<Solution, IlpError> {
    let index: HashMap<&str, usize> =
        model.variables().iter().enumerate().map(|(i, v)| (v.name.as_str(), i)).collect();
    let mut values: Vec<Option<i64>> = vec![None; model.variables().len()];
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [] => continue,
            [name, value] => {
                let &v = index.get(name).ok_or_else(|| IlpError::UnknownVariable(name.to_string()))?;
                let x = parse_value(value).ok_or_else(|| IlpError::BadListing {
                    line: idx + 1,
                    reason: format!("`{value}` is not an integer"),
                })?;
                if values[v].replace(x).is_some() {
                    return Err(IlpError::DuplicateVariable(name.to_string()));
                }
            }
            _ => {
                return Err(IlpError::BadListing { line: idx + 1, reason: "expected `<name> <value>`".into() });
            }
        }
    }
    let values: Vec<i64> = values
        .iter()
        .zip(model.variables())
        .map(|(x, var)| x.ok_or_else(|| IlpError::MissingVariable(var.name.clone())))
        .collect::<Result<_, _>>()?;
    model.solution_from_values(&values, SolveStatus::Feasible, SolveStats::default())
}
