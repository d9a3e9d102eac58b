//! Net-utility model of integration distance and the empirical cost-benefit
//! sweep.
//!
//! `B(d) = b_max (1 - e^{-alpha d})`, `R(d) = beta_risk d^k`, `U = B - R`.
//! The optimum solves `b_max alpha e^{-alpha d} = beta_risk k d^{k-1}`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{add_transfer_edges, MultilayerGraph};
use crate::resilience::{degradation_curve, relocation_rate, AttackKind, AttackStrategy, RelocationModel};

pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityParams {
    pub b_max: f64,
    pub alpha: f64,
    pub beta_risk: f64,
    pub k: f64,
}

impl UtilityParams {
    pub fn new(b_max: f64, alpha: f64, beta_risk: f64, k: f64) -> Result<Self> {
        let p = UtilityParams { b_max, alpha, beta_risk, k };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !(pos(self.b_max) && pos(self.alpha) && pos(self.beta_risk)) {
            return Err(Error::input(format!(
                "b_max, alpha and beta_risk must be positive and finite: {self:?}"
            )));
        }
        if !(self.k.is_finite() && self.k >= 1.0) {
            return Err(Error::input(format!("k must be at least 1, got {}", self.k)));
        }
        Ok(())
    }

    /// `U'(d)`: marginal benefit minus marginal risk.
    pub fn marginal(&self, d: f64) -> f64 {
        self.b_max * self.alpha * (-self.alpha * d).exp() - self.beta_risk * self.k * d.powf(self.k - 1.0)
    }

    /// `U''(d)` for `d > 0`.
    pub fn curvature(&self, d: f64) -> f64 {
        let risk = if self.k == 1.0 {
            0.0
        } else {
            self.beta_risk * self.k * (self.k - 1.0) * d.powf(self.k - 2.0)
        };
        -self.b_max * self.alpha * self.alpha * (-self.alpha * d).exp() - risk
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Utility {
    pub u: f64,
    pub b: f64,
    pub r: f64,
}

pub fn utility(p: &UtilityParams, d: f64) -> Result<Utility> {
    if !(d >= 0.0) {
        return Err(Error::input(format!("d must be non-negative, got {d}")));
    }
    let b = -p.b_max * (-p.alpha * d).exp_m1();
    let r = if d == 0.0 { 0.0 } else { p.beta_risk * d.powf(p.k) };
    Ok(Utility { u: b - r, b, r })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub d_star: f64,
    /// `|U'(d*)|`.
    pub residual: f64,
    /// Analytic `U''(d*)`.
    pub second_derivative: f64,
    /// Central-difference `U''(d*)`.
    pub numeric_second_derivative: f64,
    pub concave: bool,
    /// Set when integration never pays off and `d* = 0`.
    pub boundary: bool,
}

/// Finds `d*` by bracket doubling followed by Newton steps safeguarded with
/// bisection.
pub fn solve_optimal_d(p: &UtilityParams) -> Result<Optimum> {
    p.validate()?;
    if p.k == 1.0 && p.b_max * p.alpha <= p.beta_risk {
        return Ok(Optimum {
            d_star: 0.0,
            residual: p.marginal(0.0).abs(),
            second_derivative: p.curvature(0.0),
            numeric_second_derivative: p.curvature(0.0),
            concave: true,
            boundary: true,
        });
    }

    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while p.marginal(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 2f64.powi(60) {
            return Err(Error::Numerical("no sign change in the optimality condition".into()));
        }
    }
    let mut d = 0.5 * (lo + hi);
    for _ in 0..500 {
        let f = p.marginal(d);
        if f == 0.0 {
            break;
        }
        if f > 0.0 {
            lo = d;
        } else {
            hi = d;
        }
        let step = d - f / p.curvature(d);
        let next = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
        if next == d || hi - lo <= f64::EPSILON * hi {
            break;
        }
        d = next;
    }
    // Within a few ulps the best representable point can differ from `d`.
    let mut best = d;
    let mut x = d;
    for _ in 0..4 {
        x = x.next_down();
        if p.marginal(x).abs() < p.marginal(best).abs() {
            best = x;
        }
    }
    x = d;
    for _ in 0..4 {
        x = x.next_up();
        if p.marginal(x).abs() < p.marginal(best).abs() {
            best = x;
        }
    }
    let d = best;
    let residual = p.marginal(d).abs();
    if !(residual < RESIDUAL_TOL) {
        return Err(Error::Numerical(format!(
            "optimality residual {residual:e} above tolerance at d = {d}"
        )));
    }
    let second = p.curvature(d);
    let numeric = numeric_second_derivative(p, d);
    Ok(Optimum {
        d_star: d,
        residual,
        second_derivative: second,
        numeric_second_derivative: numeric,
        concave: second < 0.0 && numeric < 0.0,
        boundary: false,
    })
}

fn numeric_second_derivative(p: &UtilityParams, d: f64) -> f64 {
    let h = 1e-3 * d;
    let u = |x: f64| utility(p, x).map(|v| v.u).unwrap_or(f64::NAN);
    (u(d + h) - 2.0 * u(d) + u(d - h)) / (h * h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    BMax,
    Alpha,
    BetaRisk,
    K,
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parameter::BMax => "b_max",
            Parameter::Alpha => "alpha",
            Parameter::BetaRisk => "beta_risk",
            Parameter::K => "k",
        })
    }
}

impl FromStr for Parameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "b_max" | "bmax" => Ok(Parameter::BMax),
            "alpha" => Ok(Parameter::Alpha),
            "beta_risk" | "beta" => Ok(Parameter::BetaRisk),
            "k" => Ok(Parameter::K),
            other => Err(Error::input(format!("unknown parameter `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub parameter: Parameter,
    pub d_before: f64,
    pub d_after: f64,
    /// Sign of `d_after - d_before`: -1, 0 or 1.
    pub sign: i8,
}

/// Re-solves with `parameter` scaled by `1 + delta` and reports the
/// direction `d*` moved.
pub fn sensitivity(p: &UtilityParams, parameter: Parameter, delta: f64) -> Result<Sensitivity> {
    let before = solve_optimal_d(p)?.d_star;
    let mut q = *p;
    let slot = match parameter {
        Parameter::BMax => &mut q.b_max,
        Parameter::Alpha => &mut q.alpha,
        Parameter::BetaRisk => &mut q.beta_risk,
        Parameter::K => &mut q.k,
    };
    *slot *= 1.0 + delta;
    let after = solve_optimal_d(&q)?.d_star;
    let sign = match after.partial_cmp(&before) {
        Some(std::cmp::Ordering::Greater) => 1,
        Some(std::cmp::Ordering::Less) => -1,
        _ => 0,
    };
    Ok(Sensitivity {
        parameter,
        d_before: before,
        d_after: after,
        sign,
    })
}

/// Heuristic least-squares fit of `(b_max, alpha)` to benefit observations
/// and `(beta_risk, k)` to risk observations, both given as `(d, value)`.
pub fn fit(benefit: &[(f64, f64)], risk: &[(f64, f64)]) -> Result<UtilityParams> {
    if benefit.iter().chain(risk).any(|&(d, y)| !(d >= 0.0 && y.is_finite())) {
        return Err(Error::input("fit data needs non-negative d and finite values"));
    }
    if !benefit.iter().any(|&(d, _)| d > 0.0) || !risk.iter().any(|&(d, _)| d > 0.0) {
        return Err(Error::input("fit data needs points with d > 0"));
    }
    // For a fixed shape parameter the scale has a closed-form optimum.
    let scaled = |basis: &dyn Fn(f64) -> f64, data: &[(f64, f64)]| {
        let (num, den) = data.iter().fold((0.0, 0.0), |(n, m), &(d, y)| {
            let g = basis(d);
            (n + y * g, m + g * g)
        });
        let scale = if den > 0.0 { num / den } else { 0.0 };
        let sse: f64 = data.iter().map(|&(d, y)| (y - scale * basis(d)).powi(2)).sum();
        (scale, sse)
    };
    let (ln_alpha, _) = golden_min(-9.0, 5.0, |la| {
        scaled(&|d| -(-la.exp() * d).exp_m1(), benefit).1
    });
    let alpha = ln_alpha.exp();
    let (b_max, _) = scaled(&|d| -(-alpha * d).exp_m1(), benefit);
    let (k, _) = golden_min(1.0, 8.0, |k| scaled(&|d| d.powf(k), risk).1);
    let (beta_risk, _) = scaled(&|d| d.powf(k), risk);
    UtilityParams::new(b_max, alpha, beta_risk, k)
        .map_err(|e| Error::Numerical(format!("fit produced invalid parameters: {e}")))
}

fn golden_min(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub d_imt: f64,
    /// Directed transfer edges.
    pub imt_edges: usize,
    pub rb_random: f64,
    pub rb_targeted: f64,
    pub rl_750: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoOptions {
    pub repeats: usize,
    pub seed: u64,
    pub d_max: f64,
}

impl Default for ParetoOptions {
    fn default() -> Self {
        ParetoOptions {
            repeats: 50,
            seed: 42,
            d_max: 750.0,
        }
    }
}

/// Rebuilds transfer edges at each threshold and measures robustness
/// against random failure and degree attack, and symmetric relocation.
pub fn pareto_sweep(base: &MultilayerGraph, d_imts: &[f64], opts: ParetoOptions) -> Result<Vec<ParetoPoint>> {
    if d_imts.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::input("d_imt values must be ascending"));
    }
    d_imts
        .par_iter()
        .map(|&d| {
            let g = add_transfer_edges(base, d)?.graph;
            let random = degradation_curve(&g, &AttackStrategy::random(opts.seed), opts.repeats)?;
            let targeted = degradation_curve(&g, &AttackStrategy::targeted(AttackKind::DegreeTargeted), 1)?;
            let rl = relocation_rate(&g, opts.d_max, RelocationModel::Symmetric, None)?;
            Ok(ParetoPoint {
                d_imt: d,
                imt_edges: g.transfer_edge_count(),
                rb_random: random.r_b,
                rb_targeted: targeted.r_b,
                rl_750: rl.network_rl,
            })
        })
        .collect()
}
