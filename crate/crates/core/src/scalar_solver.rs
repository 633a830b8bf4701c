//! The problem without spatial derivatives,
//! `D^alpha u + f(t, u) = 0`, `u(0) = u0`, discretized level by level as
//! `kappa_{m,m} U^m + f(t_m, U^m) = F^m`.

use crate::caputo_l1::WeightCache;
use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::pde_solver::SolverConfig;
use crate::temporal_mesh::{check_step_restriction, FracParams, StepRestrictionReport, TemporalMesh};

const MODULE: &str = "scalar_solver";

#[derive(Debug, Clone)]
pub struct ScalarTrajectory {
    pub mesh: TemporalMesh,
    pub alpha: f64,
    /// `U^0..=U^M`.
    pub values: Vec<f64>,
    /// Root-finder iterations per level; entry 0 belongs to `U^0` and is 0.
    pub newton_iters: Vec<usize>,
    /// Range check against the reaction's declared range, when it has one.
    pub range_ok: Option<bool>,
    pub restriction: StepRestrictionReport,
    pub nonlin_tol: f64,
    pub warnings: Vec<String>,
}

pub fn solve_scalar(
    f: &Nonlinearity,
    u0: f64,
    mesh: &TemporalMesh,
    alpha: f64,
    cfg: &SolverConfig,
) -> Result<ScalarTrajectory> {
    cfg.validate()?;
    if !u0.is_finite() {
        return Err(Error::invalid(MODULE, "u0 must be finite"));
    }
    let params = FracParams::new(alpha, f.lambda())?;
    let restriction = check_step_restriction(mesh, params, cfg.strict_restriction);
    let mut warnings = Vec::new();
    if !restriction.pass {
        if cfg.strict_restriction {
            restriction.require(MODULE)?;
        }
        warnings.push(restriction.message());
    }
    let m_total = mesh.num_steps();
    let mut values = Vec::with_capacity(m_total + 1);
    values.push(u0);
    let mut iters = vec![0];
    let mut cache = WeightCache::new(mesh, alpha, cfg.cache_weights);
    let nodes = mesh.nodes();
    for m in 1..=m_total {
        let w = cache.get(m)?;
        let load = w.history_load(&values)?;
        let (u, it) = solve_level(f, nodes[m], w.diagonal(), load, values[m - 1], m, cfg)?;
        values.push(u);
        iters.push(it);
    }
    let mut traj = ScalarTrajectory {
        mesh: mesh.clone(),
        alpha,
        values,
        newton_iters: iters,
        range_ok: None,
        restriction,
        nonlin_tol: cfg.nonlin_tol,
        warnings,
    };
    if let Some((s1, s2)) = f.range() {
        if (s1..=s2).contains(&u0) {
            traj.range_ok = Some(range_check(&traj, s1, s2));
        }
    }
    Ok(traj)
}

/// Root of the nondecreasing map `g(U) = kappa U + f(t, U) - load`:
/// bracket by geometric expansion from `guess`, then Newton steps kept
/// inside the bracket, falling back to bisection.
fn solve_level(
    f: &Nonlinearity,
    t: f64,
    kappa: f64,
    load: f64,
    guess: f64,
    level: usize,
    cfg: &SolverConfig,
) -> Result<(f64, usize)> {
    let tol = cfg.nonlin_tol * load.abs().max(1.0);
    let g = |u: f64| -> Result<f64> {
        let v = kappa * u + f.eval(&[], t, u) - load;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { module: MODULE, level })
        }
    };
    let mut x = guess;
    let mut gx = g(x)?;
    if gx.abs() <= tol {
        return Ok((x, 0));
    }
    // bracket [lo, hi] with g(lo) < 0 < g(hi)
    let dir = if gx > 0.0 { -1.0 } else { 1.0 };
    let mut step = (gx.abs() / kappa).max(1e-3 * (1.0 + x.abs()));
    let (mut lo, mut hi);
    let mut far = x;
    let mut expansions = 0;
    loop {
        let y = far + dir * step;
        let gy = g(y)?;
        if gy.abs() <= tol {
            return Ok((y, 1));
        }
        if (gy > 0.0) != (gx > 0.0) {
            if dir > 0.0 {
                lo = far;
                hi = y;
            } else {
                lo = y;
                hi = far;
            }
            break;
        }
        far = y;
        step *= 2.0;
        expansions += 1;
        if expansions > 2000 {
            return Err(Error::Nonconvergence {
                module: MODULE,
                level,
                iterations: 0,
                residual: gy.abs(),
            });
        }
    }
    x = 0.5 * (lo + hi);
    if (guess - lo) * (guess - hi) < 0.0 {
        x = guess;
    }
    for it in 1..=cfg.max_newton {
        gx = g(x)?;
        if gx.abs() <= tol {
            return Ok((x, it));
        }
        if gx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = kappa + f.deriv(&[], t, x);
        let newton = x - gx / d;
        x = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            // bracket collapsed to adjacent floats: the closest root
            // representable; accept it if the residual is at roundoff level
            let gx = g(x)?;
            let scale = kappa * x.abs() + f.eval(&[], t, x).abs() + load.abs();
            if gx.abs() <= 8.0 * f64::EPSILON * scale {
                return Ok((x, it));
            }
        }
    }
    let r = g(x)?.abs();
    Err(Error::Nonconvergence {
        module: MODULE,
        level,
        iterations: cfg.max_newton,
        residual: r,
    })
}

/// `sigma1 - tol <= U^m <= sigma2 + tol` for all `m`, with `tol` the
/// nonlinear tolerance of the run.
pub fn range_check(traj: &ScalarTrajectory, sigma1: f64, sigma2: f64) -> bool {
    let slack = traj.nonlin_tol;
    traj.values
        .iter()
        .all(|&u| u >= sigma1 - slack && u <= sigma2 + slack)
}

/// Error envelope `E^1..E^M` (entry `m - 1` holds `E^m`):
///
/// - `r < 2 - alpha`: `M^-r t_m^(alpha-1)`
/// - `r = 2 - alpha`: `M^-(r(1-eps)) t_m^(alpha-(1-eps))`
/// - `r > 2 - alpha`: `M^(alpha-2) t_m^(alpha-(2-alpha)/r)`
///
/// Equality is decided with a relative tolerance of `1e-12`.
pub fn error_envelope(mesh: &TemporalMesh, alpha: f64, r: f64, eps: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(MODULE, format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(r >= 1.0) {
        return Err(Error::invalid(MODULE, format!("grading r must be >= 1, got {r}")));
    }
    let mf = mesh.num_steps() as f64;
    let crit = 2.0 - alpha;
    let t = &mesh.nodes()[1..];
    let env: Vec<f64> = if ((r - crit) / crit).abs() <= 1e-12 {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::invalid(MODULE, format!("eps must lie in (0, 1), got {eps}")));
        }
        t.iter()
            .map(|tm| mf.powf(-r * (1.0 - eps)) * tm.powf(alpha - (1.0 - eps)))
            .collect()
    } else if r < crit {
        t.iter().map(|tm| mf.powf(-r) * tm.powf(alpha - 1.0)).collect()
    } else {
        t.iter()
            .map(|tm| mf.powf(alpha - 2.0) * tm.powf(alpha - crit / r))
            .collect()
    };
    Ok(env)
}

/// Sharper envelope for `r = 2 - alpha` with a logarithmic factor:
/// `M^(alpha-2) t_m^(alpha-1) (1 + ln(t_m / t_1))`.
pub fn error_envelope_log(mesh: &TemporalMesh, alpha: f64) -> Vec<f64> {
    let mf = mesh.num_steps() as f64;
    let t1 = mesh.tau();
    mesh.nodes()[1..]
        .iter()
        .map(|tm| mf.powf(alpha - 2.0) * tm.powf(alpha - 1.0) * (1.0 + (tm / t1).ln()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_functions::mittag_leffler;
    use crate::temporal_mesh::build_graded;
    use proptest::prelude::*;

    fn cfg() -> SolverConfig {
        SolverConfig::scalar()
    }

    #[test]
    fn zero_reaction_keeps_constant() {
        let mesh = build_graded(40, 1.0, 2.0).unwrap();
        let tr = solve_scalar(&Nonlinearity::zero(), 7.0, &mesh, 0.4, &cfg()).unwrap();
        assert!(tr.values.iter().all(|u| (u - 7.0).abs() < 1e-12));
        assert_eq!(tr.values.len(), 41);
        assert_eq!(tr.range_ok, None);
    }

    #[test]
    fn linear_relaxation_approaches_mittag_leffler() {
        let exact = mittag_leffler(0.5, -1.0);
        assert!((exact - 0.427_583_576_155_807).abs() < 1e-14);
        let mut prev = f64::INFINITY;
        for m in [64, 256, 1024] {
            let mesh = build_graded(m, 1.0, 3.0).unwrap();
            let tr = solve_scalar(&Nonlinearity::linear(1.0), 1.0, &mesh, 0.5, &cfg()).unwrap();
            let err = (tr.values[m] - exact).abs();
            assert!(err < prev / 4.0 || err < 1e-6, "M = {m}: {err}");
            prev = err;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn residuals_meet_tolerance() {
        let f = Nonlinearity::allen_cahn(0.5).unwrap();
        let mesh = build_graded(50, 1.0, 3.0).unwrap();
        let c = cfg();
        let tr = solve_scalar(&f, 0.9, &mesh, 0.5, &c).unwrap();
        for m in 1..=50 {
            let w = crate::caputo_l1::l1_weights(&mesh, 0.5, m).unwrap();
            let load = w.history_load(&tr.values[..m]).unwrap();
            let res = w.diagonal() * tr.values[m] + f.eval(&[], mesh.nodes()[m], tr.values[m]) - load;
            assert!(res.abs() <= c.nonlin_tol * load.abs().max(1.0));
        }
        assert_eq!(tr.range_ok, Some(true));
        assert!(tr.restriction.pass);
    }

    #[test]
    fn restriction_failure_warns_or_errors() {
        let f = Nonlinearity::allen_cahn(0.3).unwrap();
        let mesh = TemporalMesh::uniform(32, 1.0).unwrap();
        let tr = solve_scalar(&f, 0.5, &mesh, 0.3, &cfg()).unwrap();
        assert!(!tr.restriction.pass);
        assert_eq!(tr.warnings.len(), 1);
        let mut strict = cfg();
        strict.strict_restriction = true;
        let err = solve_scalar(&f, 0.5, &mesh, 0.3, &strict).unwrap_err();
        assert!(err.is_solver_failure());
    }

    #[test]
    fn blowup_is_reported() {
        // f = -u^3 grows without bound for u0 = 5 on coarse steps
        let f = Nonlinearity::custom(std::sync::Arc::new(|_, _, s| if s > 1e3 { f64::NAN } else { -s * s * s }), 0.0).unwrap();
        let mesh = TemporalMesh::uniform(4, 10.0).unwrap();
        assert!(solve_scalar(&f, 5.0, &mesh, 0.5, &cfg()).is_err());
    }

    #[test]
    fn range_check_examples() {
        let mesh = TemporalMesh::uniform(3, 1.0).unwrap();
        let mut tr = solve_scalar(&Nonlinearity::zero(), 0.5, &mesh, 0.5, &cfg()).unwrap();
        assert!(range_check(&tr, -1.0, 1.0));
        tr.values[2] = 1.000_001;
        tr.nonlin_tol = 1e-10;
        assert!(!range_check(&tr, -1.0, 1.0));
    }

    #[test]
    fn envelope_examples() {
        let mesh = TemporalMesh::uniform(100, 1.0).unwrap();
        let e = error_envelope(&mesh, 0.5, 1.0, 1e-2).unwrap();
        assert!((e[99] - 0.01).abs() < 1e-15);
        let mesh3 = build_graded(100, 1.0, 3.0).unwrap();
        let e = error_envelope(&mesh3, 0.5, 3.0, 1e-2).unwrap();
        assert!((e[99] - 1e-3).abs() < 1e-15);
        let mesh = TemporalMesh::uniform(32, 1.0).unwrap();
        let e = error_envelope(&mesh, 0.3, 1.0, 1e-2).unwrap();
        assert!((e[0] - 32f64.powf(-0.3)).abs() < 1e-14);
        // middle branch
        let mesh = build_graded(16, 1.0, 1.5).unwrap();
        let e = error_envelope(&mesh, 0.5, 1.5, 0.01).unwrap();
        let t1 = mesh.nodes()[1];
        assert!((e[0] - 16f64.powf(-1.5 * 0.99) * t1.powf(0.5 - 0.99)).abs() < 1e-14);
        let l = error_envelope_log(&mesh, 0.5);
        assert!((l[0] - 16f64.powf(-1.5) * t1.powf(-0.5)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn allen_cahn_stays_in_range(u0 in -1.0f64..=1.0, a in prop::sample::select(vec![0.3, 0.5, 0.7]), m in 8usize..200, r in 1.0f64..4.0) {
            let f = Nonlinearity::allen_cahn(a).unwrap();
            let mesh = build_graded(m, 1.0, r).unwrap();
            let tr = solve_scalar(&f, u0, &mesh, a, &cfg()).unwrap();
            if tr.restriction.pass {
                prop_assert_eq!(tr.range_ok, Some(true));
            }
        }

        #[test]
        fn fisher_stays_in_unit_interval(u0 in 0.0f64..=1.0, m in 8usize..100) {
            let mesh = build_graded(m, 2.0, 2.0).unwrap();
            let tr = solve_scalar(&Nonlinearity::fisher(), u0, &mesh, 0.6, &cfg()).unwrap();
            prop_assert!(tr.restriction.pass);
            prop_assert_eq!(tr.range_ok, Some(true));
        }
    }
}
