//! Per-edge buffer cost under the four clocking schemes.
//!
//! An edge spanning `delta` levels is realized by `alpha` phase-skip buffers
//! (each hop may advance up to `P` levels) and `beta` cycle buffers (each
//! opening another window of up to `S_max` whole-cycle skips). [`HopRules`]
//! carries the closed forms used by the solver and a literal enumeration of
//! the constraint rows used as the reference.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CostError {
    #[error("level gap must be at least 1, got {0}")]
    Domain(i64),
    #[error("invalid clock configuration: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Balanced,
    PhaseSkip,
    PhaseAlign,
    Combined,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Balanced, Scheme::PhaseSkip, Scheme::PhaseAlign, Scheme::Combined];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Balanced => "balanced",
            Scheme::PhaseSkip => "phase-skip",
            Scheme::PhaseAlign => "phase-align",
            Scheme::Combined => "combined",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| format!("unknown scheme `{s}` (balanced, phase-skip, phase-align, combined)"))
    }
}

/// Cycle skips allowed per cycle-buffer window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SkipLimit {
    Finite(u32),
    Unbounded,
}

impl SkipLimit {
    pub fn finite(self) -> Option<u32> {
        match self {
            SkipLimit::Finite(s) => Some(s),
            SkipLimit::Unbounded => None,
        }
    }

    pub fn is_zero(self) -> bool {
        self == SkipLimit::Finite(0)
    }
}

impl fmt::Display for SkipLimit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SkipLimit::Finite(s) => write!(f, "{s}"),
            SkipLimit::Unbounded => f.write_str("inf"),
        }
    }
}

impl FromStr for SkipLimit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inf" | "unbounded" => Ok(SkipLimit::Unbounded),
            _ => s.parse().map(SkipLimit::Finite).map_err(|_| format!("expected an integer or `inf`, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClockConfig {
    /// Phases per clock cycle.
    pub n: u32,
    /// Maximum phase skip per hop.
    pub p: u32,
    pub s_max: SkipLimit,
    /// Repetition bound; `None` leaves throughput unconstrained.
    pub r_max: Option<u32>,
    pub scheme: Scheme,
    /// Inclusive level window for primary inputs.
    pub pi_levels: (u32, u32),
    /// Upper level bound for the search; derived from depth when unset.
    pub max_level: Option<u32>,
}

impl Default for ClockConfig {
    fn default() -> Self {
        ClockConfig {
            n: 8,
            p: 2,
            s_max: SkipLimit::Finite(1),
            r_max: None,
            scheme: Scheme::Combined,
            pi_levels: (3, 5),
            max_level: None,
        }
    }
}

impl ClockConfig {
    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_r_max(mut self, r_max: u32) -> Self {
        self.r_max = Some(r_max);
        self
    }

    pub fn validate(&self) -> Result<(), CostError> {
        if self.n == 0 {
            return Err(CostError::Config("N must be positive"));
        }
        if self.p == 0 {
            return Err(CostError::Config("P must be positive"));
        }
        if self.pi_levels.0 > self.pi_levels.1 {
            return Err(CostError::Config("empty input level window"));
        }
        Ok(())
    }

    /// The hop rules the scheme actually allows.
    pub fn rules(&self) -> HopRules {
        let (p, s_max) = match self.scheme {
            Scheme::Balanced => (1, SkipLimit::Finite(0)),
            Scheme::PhaseSkip => (self.p, SkipLimit::Finite(0)),
            Scheme::PhaseAlign => (1, self.s_max),
            Scheme::Combined => (self.p, self.s_max),
        };
        HopRules { n: self.n, p, s_max }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct EdgeDecomposition {
    pub alpha: u32,
    pub beta: u32,
    pub skips: u32,
}

impl EdgeDecomposition {
    pub fn cost(&self) -> u32 {
        self.alpha + self.beta
    }
}

/// Effective `(N, P, S_max)` for one scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HopRules {
    pub n: u32,
    pub p: u32,
    pub s_max: SkipLimit,
}

fn check_delta(delta: i64) -> Result<u32, CostError> {
    if delta < 1 || delta > i64::from(u32::MAX) {
        Err(CostError::Domain(delta))
    } else {
        Ok(delta as u32)
    }
}

fn div_ceil(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

impl HopRules {
    /// The edge rows, checked literally.
    pub fn satisfies(&self, delta: u32, d: &EdgeDecomposition) -> bool {
        let (n, p, delta) = (u64::from(self.n), u64::from(self.p), u64::from(delta));
        let (a, b, s) = (u64::from(d.alpha), u64::from(d.beta), u64::from(d.skips));
        let window = match self.s_max {
            SkipLimit::Finite(m) => b * u64::from(m) <= s && s <= (1 + b) * u64::from(m),
            SkipLimit::Unbounded => b == 0,
        };
        window && 1 + s * n + b <= delta && delta <= (a + 1) * p + s * n + b
    }

    /// Minimum-cost decomposition in closed form, optionally limiting the
    /// number of cycle skips to `cap`. Ties prefer smaller beta, then fewer
    /// skips, then smaller alpha.
    pub fn decompose(&self, delta: i64, cap: Option<u32>) -> Result<EdgeDecomposition, CostError> {
        let delta = u64::from(check_delta(delta)?);
        let (n, p) = (u64::from(self.n), u64::from(self.p));
        let cap = cap.map(u64::from).unwrap_or(u64::MAX);
        let alpha_for = |skips: u64, beta: u64| div_ceil(delta - skips * n - beta, p) - 1;
        let least_skips = |alpha: u64, beta: u64, floor: u64| {
            let reach = beta + (alpha + 1) * p;
            floor.max(div_ceil(delta.saturating_sub(reach), n))
        };
        let pack = |alpha: u64, beta: u64, skips: u64| EdgeDecomposition {
            alpha: alpha as u32,
            beta: beta as u32,
            skips: skips as u32,
        };
        match self.s_max {
            SkipLimit::Unbounded => {
                let top = ((delta - 1) / n).min(cap);
                let alpha = alpha_for(top, 0);
                Ok(pack(alpha, 0, least_skips(alpha, 0, 0)))
            }
            SkipLimit::Finite(s) => {
                let s = u64::from(s);
                let mut beta_hi = (delta - 1) / (s * n + 1);
                if s > 0 {
                    beta_hi = beta_hi.min(cap / s);
                } else {
                    beta_hi = 0;
                }
                let mut best: Option<(u64, u64, u64)> = None;
                for beta in 0..=beta_hi {
                    let top = ((beta + 1) * s).min((delta - 1 - beta) / n).min(cap);
                    if top < beta * s {
                        continue;
                    }
                    let cost = alpha_for(top, beta) + beta;
                    if best.is_none_or(|(c, _, _)| cost < c) {
                        best = Some((cost, beta, top));
                    }
                }
                let (cost, beta, _) = best.expect("beta = 0 is always feasible");
                let alpha = cost - beta;
                Ok(pack(alpha, beta, least_skips(alpha, beta, beta * s)))
            }
        }
    }

    /// Reference decomposition: scans cost, then beta, then skips, and
    /// returns the first assignment that satisfies the rows.
    pub fn enumerate(&self, delta: i64, cap: Option<u32>) -> Result<EdgeDecomposition, CostError> {
        let delta = check_delta(delta)?;
        let skip_range = |beta: u32| -> (u32, u32) {
            match self.s_max {
                SkipLimit::Finite(m) => (beta * m, (beta + 1) * m),
                SkipLimit::Unbounded => (0, delta.div_ceil(self.n)),
            }
        };
        for cost in 0..delta {
            for beta in 0..=cost {
                let (lo, hi) = skip_range(beta);
                let hi = cap.map_or(hi, |c| hi.min(c));
                for skips in lo..=hi {
                    let d = EdgeDecomposition { alpha: cost - beta, beta, skips };
                    if self.satisfies(delta, &d) {
                        return Ok(d);
                    }
                }
            }
        }
        unreachable!("alpha = delta - 1 always satisfies the rows")
    }
}

/// Minimum buffers on an edge spanning `delta` levels.
pub fn edge_cost(delta: i64, config: &ClockConfig) -> Result<u32, CostError> {
    let d = check_delta(delta)?;
    let rules = config.rules();
    let (n, p) = (rules.n, rules.p);
    Ok(match (config.scheme, rules.s_max) {
        (Scheme::Balanced, _) => d - 1,
        (Scheme::PhaseSkip, _) => (d - 1) / p,
        (Scheme::PhaseAlign | Scheme::Combined, SkipLimit::Unbounded) => ((d - 1) % n) / p,
        (Scheme::PhaseAlign | Scheme::Combined, SkipLimit::Finite(_)) => rules.decompose(delta, None)?.cost(),
    })
}

/// Minimum decomposition found by enumerating the edge rows directly.
pub fn min_decomposition(delta: i64, config: &ClockConfig) -> Result<EdgeDecomposition, CostError> {
    config.rules().enumerate(delta, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CurvePoint {
    pub delta: u32,
    pub balanced: u32,
    pub phase_skip: u32,
    pub phase_align: u32,
    pub combined: u32,
}

/// Cost of every scheme for gaps `1..=max_delta`.
pub fn cost_curve(max_delta: u32, config: &ClockConfig) -> Result<Vec<CurvePoint>, CostError> {
    config.validate()?;
    (1..=max_delta)
        .map(|d| {
            let at = |s: Scheme| edge_cost(i64::from(d), &config.with_scheme(s));
            Ok(CurvePoint {
                delta: d,
                balanced: at(Scheme::Balanced)?,
                phase_skip: at(Scheme::PhaseSkip)?,
                phase_align: at(Scheme::PhaseAlign)?,
                combined: at(Scheme::Combined)?,
            })
        })
        .collect()
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("delta_L,balanced,phase_skip,phase_align,combined\n");
    for pt in points {
        out += &format!("{},{},{},{},{}\n", pt.delta, pt.balanced, pt.phase_skip, pt.phase_align, pt.combined);
    }
    out
}
