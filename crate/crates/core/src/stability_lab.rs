//! Numerical checks of the stability machinery for `delta^alpha - lambda`:
//! the discrete resolvent, the envelopes `V_gamma^j`, the piecewise-linear
//! barrier and the long-time bound.

use crate::caputo_l1::CaputoWeights;
use crate::error::{Error, Result};
use crate::special_functions::{gamma as gamma_fn, mittag_leffler};
use crate::temporal_mesh::{check_step_restriction, FracParams, TemporalMesh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

const MODULE: &str = "stability_lab";

/// `V_gamma^j` for `j = 0..=M`; entry 0 is unused and set to 0.
pub fn envelope_values(mesh: &TemporalMesh, alpha: f64, gamma: f64) -> Vec<f64> {
    let tau = mesh.tau();
    let t = mesh.nodes();
    let mut v = vec![0.0; t.len()];
    for j in 1..t.len() {
        let base = tau * t[j].powf(alpha - 1.0);
        v[j] = if gamma > 0.0 {
            base
        } else if gamma == 0.0 {
            base * (1.0 + (t[j] / tau).ln())
        } else {
            base * (tau / t[j]).powf(gamma)
        };
    }
    v
}

/// Solves `V^0 = 0`, `(delta^alpha - lambda) V^m = g^m` level by level.
/// `g` holds `g^1..g^M`; the result holds `V^0..=V^M`. Requires the strict
/// step restriction so that every pivot `kappa_{m,m} - lambda` is positive.
pub fn solve_resolvent(mesh: &TemporalMesh, alpha: f64, lambda: f64, g: &[f64]) -> Result<Vec<f64>> {
    let m_total = mesh.num_steps();
    if g.len() != m_total {
        return Err(Error::LengthMismatch {
            module: MODULE,
            expected: m_total,
            found: g.len(),
        });
    }
    let params = FracParams::new(alpha, lambda)?;
    check_step_restriction(mesh, params, true).require(MODULE)?;
    let mut v = Vec::with_capacity(m_total + 1);
    v.push(0.0);
    for m in 1..=m_total {
        let w = CaputoWeights::new(mesh, alpha, m)?;
        let pivot = w.diagonal() - lambda;
        if !(pivot > 0.0) {
            return Err(Error::StepRestriction {
                module: MODULE,
                j: m,
                lhs: lambda,
                rhs: w.diagonal(),
            });
        }
        let load = w.history_load(&v)?;
        v.push((g[m - 1] + load) / pivot);
    }
    Ok(v)
}

/// `(delta^alpha - lambda) V^j` for `j = 1..=M`.
pub fn apply_shifted(mesh: &TemporalMesh, alpha: f64, lambda: f64, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != mesh.num_steps() + 1 {
        return Err(Error::LengthMismatch {
            module: MODULE,
            expected: mesh.num_steps() + 1,
            found: v.len(),
        });
    }
    (1..v.len())
        .map(|m| {
            let w = CaputoWeights::new(mesh, alpha, m)?;
            Ok(w.diagonal() * v[m] - w.history_load(&v[..m])? - lambda * v[m])
        })
        .collect()
}

/// Right-hand side `(tau / t_m)^{gamma + 1}` for `m = 1..=M`.
pub fn envelope_data(mesh: &TemporalMesh, gamma: f64) -> Vec<f64> {
    let tau = mesh.tau();
    mesh.nodes()[1..].iter().map(|t| (tau / t).powf(gamma + 1.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub max_ratio: f64,
    pub worst_j: usize,
    /// `|V^j| / V_gamma^j` for `j = 1..=M`.
    pub profile: Vec<f64>,
}

pub fn envelope_ratio(mesh: &TemporalMesh, alpha: f64, lambda: f64, gamma: f64) -> Result<EnvelopeReport> {
    if !gamma.is_finite() {
        return Err(Error::invalid(MODULE, "gamma must be finite"));
    }
    let v = solve_resolvent(mesh, alpha, lambda, &envelope_data(mesh, gamma))?;
    let env = envelope_values(mesh, alpha, gamma);
    let profile: Vec<f64> = (1..v.len()).map(|j| v[j].abs() / env[j]).collect();
    let (worst, max_ratio) = profile
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (j, &p)| if p > acc.1 { (j, p) } else { acc });
    Ok(EnvelopeReport {
        max_ratio,
        worst_j: worst + 1,
        profile,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementReport {
    pub alpha: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub r: f64,
    pub m_values: Vec<usize>,
    pub max_ratios: Vec<f64>,
    /// `ratio(2M) / ratio(M) - 1` per doubling.
    pub growth: Vec<f64>,
    /// Excluded from pass/fail (`gamma = 0` with `lambda > 0`).
    pub report_only: bool,
    pub pass: bool,
}

/// Largest growth per doubling still counted as bounded.
pub const GROWTH_LIMIT: f64 = 0.05;

/// Runs [`envelope_ratio`] on graded meshes `M0, 2 M0, ...` and checks that
/// the ratio grows by less than [`GROWTH_LIMIT`] per doubling. Unless
/// `override_gate` is set, `gamma > alpha - 1` requires
/// `r <= (2 - alpha) / alpha`.
#[allow(clippy::too_many_arguments)]
pub fn envelope_refinement(
    m0: usize,
    t_final: f64,
    r: f64,
    alpha: f64,
    lambda: f64,
    gamma: f64,
    doublings: usize,
    override_gate: bool,
) -> Result<RefinementReport> {
    if gamma > alpha - 1.0 && r > (2.0 - alpha) / alpha * (1.0 + 1e-12) && !override_gate {
        return Err(Error::invalid(
            MODULE,
            format!("grading r = {r} exceeds (2-alpha)/alpha for gamma = {gamma} > alpha - 1"),
        ));
    }
    let mut m_values = Vec::new();
    let mut max_ratios = Vec::new();
    for k in 0..=doublings {
        let m = m0 << k;
        let mesh = TemporalMesh::graded(m, t_final, r)?;
        m_values.push(m);
        max_ratios.push(envelope_ratio(&mesh, alpha, lambda, gamma)?.max_ratio);
    }
    let growth: Vec<f64> = max_ratios.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
    let report_only = gamma == 0.0 && lambda > 0.0;
    let pass = !report_only && growth.iter().all(|g| *g < GROWTH_LIMIT);
    Ok(RefinementReport {
        alpha,
        lambda,
        gamma,
        r,
        m_values,
        max_ratios,
        growth,
        report_only,
        pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub trials: usize,
    pub violations: usize,
    /// Most negative `V2^j - V1^j` seen.
    pub worst_gap: f64,
}

/// Draws `trials` random pairs `g1 <= g2` and checks `V1 <= V2`.
pub fn comparison_trials(mesh: &TemporalMesh, alpha: f64, lambda: f64, trials: usize, seed: u64) -> Result<ComparisonReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = mesh.num_steps();
    let mut violations = 0;
    let mut worst_gap = f64::INFINITY;
    for _ in 0..trials {
        let g1: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // sparse nonnegative increments, so that equality also occurs
        let g2: Vec<f64> = g1
            .iter()
            .map(|g| if rng.gen_bool(0.5) { *g } else { g + rng.gen_range(0.0..1.0) })
            .collect();
        let v1 = solve_resolvent(mesh, alpha, lambda, &g1)?;
        let v2 = solve_resolvent(mesh, alpha, lambda, &g2)?;
        let scale = v1.iter().chain(&v2).fold(1.0f64, |a, v| a.max(v.abs()));
        let gap = v1.iter().zip(&v2).map(|(a, b)| b - a).fold(f64::INFINITY, f64::min);
        worst_gap = worst_gap.min(gap);
        if gap < -1e-13 * scale {
            violations += 1;
        }
    }
    Ok(ComparisonReport {
        trials,
        violations,
        worst_gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarrierB {
    pub anchor: usize,
    pub c0: f64,
    pub tau_bar: f64,
    /// Kink indices `q_0..q_K` into the mesh.
    pub kinks: Vec<usize>,
    pub c_bar: f64,
    /// `B^0..=B^M`.
    pub values: Vec<f64>,
    /// `(delta^alpha - lambda) B^j` for `j = 1..=M`.
    pub residual: Vec<f64>,
    /// Smallest residual for `t_j < t_anchor + c0`.
    pub min_before: f64,
    /// Smallest residual for `t_j >= t_anchor + c0`; infinite when empty.
    pub c_pos: f64,
    pub bound: f64,
}

const C_BAR_CAP: f64 = 1048576.0;

/// Barrier `B = sum_k c_bar^k max(0, t - q_k)` anchored at `t_anchor`, with
/// `c_bar` found by doubling from 2 until the sign pattern of
/// `(delta^alpha - lambda) B` verifies.
pub fn build_barrier(mesh: &TemporalMesh, alpha: f64, lambda: f64, c0: f64, anchor: usize) -> Result<BarrierB> {
    let params = FracParams::new(alpha, lambda)?;
    let m_total = mesh.num_steps();
    if anchor > m_total {
        return Err(Error::LevelOutOfRange {
            level: anchor,
            max: m_total,
        });
    }
    if !(c0 > 0.0) {
        return Err(Error::invalid(MODULE, "c0 must be positive"));
    }
    if params.lambda > 0.0 {
        let limit = 0.5 * (params.lambda * gamma_fn(2.0 - alpha)?).powf(-1.0 / alpha);
        if c0 >= limit {
            return Err(Error::invalid(MODULE, format!("c0 = {c0} must be below {limit}")));
        }
    }
    let tau_bar = mesh.max_step();
    if tau_bar > 0.5 * c0 {
        return Err(Error::invalid(MODULE, format!("max step {tau_bar} exceeds c0/2 = {}", 0.5 * c0)));
    }
    let t = mesh.nodes();
    let ta = t[anchor];
    let span = mesh.final_time() - ta;
    let k_max = if c0 >= span {
        0
    } else {
        ((span / c0).ceil() as usize).saturating_sub(2)
    };
    let mut kinks = vec![anchor];
    for k in 1..=k_max {
        let hi = ta + c0 * k as f64;
        let lo = hi - tau_bar;
        let q = (anchor..=m_total)
            .rev()
            .find(|&j| t[j] <= hi * (1.0 + 1e-14) && t[j] >= lo * (1.0 - 1e-14))
            .ok_or_else(|| Error::invalid(MODULE, format!("no mesh point in [{lo}, {hi}]")))?;
        kinks.push(q);
    }
    let shape = |c_bar: f64| -> Vec<f64> {
        t.iter()
            .map(|&tj| {
                kinks
                    .iter()
                    .enumerate()
                    .map(|(k, &q)| c_bar.powi(k as i32) * (tj - t[q]).max(0.0))
                    .sum()
            })
            .collect()
    };
    let mut c_bar = 2.0;
    loop {
        let values = shape(c_bar);
        let residual = apply_shifted(mesh, alpha, lambda, &values)?;
        let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
        let mut min_before = f64::INFINITY;
        let mut c_pos = f64::INFINITY;
        for j in 1..=m_total {
            let r = residual[j - 1];
            if t[j] < ta + c0 {
                min_before = min_before.min(r);
            } else {
                c_pos = c_pos.min(r);
            }
        }
        let ok = min_before >= -1e-12 * scale && c_pos > 0.0;
        if ok {
            let bound = values.iter().fold(0.0f64, |a, &v| a.max(v));
            return Ok(BarrierB {
                anchor,
                c0,
                tau_bar,
                kinks,
                c_bar,
                values,
                residual,
                min_before,
                c_pos,
                bound,
            });
        }
        c_bar *= 2.0;
        if c_bar > C_BAR_CAP {
            return Err(Error::invalid(
                MODULE,
                format!("no barrier coefficient up to {C_BAR_CAP} verifies the sign pattern"),
            ));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LongTimeReport {
    pub alpha: f64,
    pub lambda: f64,
    pub lambda_prime: f64,
    pub tau: f64,
    /// `(T_k, sup_{t_j <= T_k} |V^j| / (tau^alpha E_alpha(lambda' t_j^alpha)))`
    /// at `T/8, T/4, T/2, T`.
    pub sups: Vec<(f64, f64)>,
    /// `lambda' = lambda`: reported without a verdict.
    pub report_only: bool,
    pub pass: bool,
}

/// Uniform mesh with step `tau` and `levels` steps, data
/// `g^j = (tau / t_j)^alpha`. The normalized supremum must stay within
/// [`GROWTH_LIMIT`] per doubling of the horizon.
pub fn long_time_check(alpha: f64, lambda: f64, lambda_prime: f64, tau: f64, levels: usize) -> Result<LongTimeReport> {
    if !(lambda >= 0.0) || !(lambda_prime >= lambda) {
        return Err(Error::invalid(
            MODULE,
            format!("need lambda' >= lambda >= 0, got lambda = {lambda}, lambda' = {lambda_prime}"),
        ));
    }
    if levels < 8 {
        return Err(Error::invalid(MODULE, "need at least 8 levels"));
    }
    let mesh = TemporalMesh::uniform(levels, tau * levels as f64)?;
    let g: Vec<f64> = envelope_data(&mesh, alpha - 1.0);
    let v = solve_resolvent(&mesh, alpha, lambda, &g)?;
    let t = mesh.nodes();
    let ta = tau.powf(alpha);
    let mut running = 0.0f64;
    let mut prefix = Vec::with_capacity(levels + 1);
    prefix.push(0.0);
    for j in 1..=levels {
        let e = mittag_leffler(alpha, lambda_prime * t[j].powf(alpha));
        running = running.max(v[j].abs() / (ta * e));
        prefix.push(running);
    }
    let sups: Vec<(f64, f64)> = [8usize, 4, 2, 1]
        .iter()
        .map(|d| {
            let j = levels / d;
            (t[j], prefix[j])
        })
        .collect();
    let report_only = lambda > 0.0 && lambda_prime == lambda;
    let pass = !report_only
        && sups.iter().all(|s| s.1.is_finite())
        && sups.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + GROWTH_LIMIT));
    Ok(LongTimeReport {
        alpha,
        lambda,
        lambda_prime,
        tau,
        sups,
        report_only,
        pass,
    })
}
