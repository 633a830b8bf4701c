//! `fraxolve check`: a quick pass over the library's invariants.

use fraxolve::caputo_l1::apply_delta;
use fraxolve::error_harness::{allen_cahn_experiment, envelope_conformity};
use fraxolve::nonlinearity::{verify_assumptions, Nonlinearity, SamplingSpec};
use fraxolve::pde_solver::{solve_pde, SolverConfig};
use fraxolve::scalar_solver::solve_scalar;
use fraxolve::spatial_fd::{assemble, check_max_principle, BoundarySpec, CoefficientField, Grid};
use fraxolve::special_functions::{gamma, mittag_leffler};
use fraxolve::stability_lab::{comparison_trials, envelope_refinement};
use fraxolve::temporal_mesh::{verify_quasi_graded, TemporalMesh};
use std::fmt::Write as _;

type Check = (&'static str, fn() -> Result<String, String>);

fn ok_if(pass: bool, detail: String) -> Result<String, String> {
    if pass {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn mittag_leffler_spot_values() -> Result<String, String> {
    let d1 = (mittag_leffler(1.0, 1.0) - std::f64::consts::E).abs();
    // e * erfc(1)
    let d2 = (mittag_leffler(0.5, -1.0) - 0.427_583_576_155_807_0).abs();
    ok_if(d1 <= 1e-9 && d2 <= 1e-9, format!("deviations {d1:.1e}, {d2:.1e}"))
}

fn l1_linear_exactness() -> Result<String, String> {
    let (alpha, r) = (0.4, 2.5);
    let mesh = TemporalMesh::graded(40, 1.0, r).map_err(e)?;
    let g2 = gamma(2.0 - alpha).map_err(e)?;
    let mut worst: f64 = 0.0;
    for m in 1..=40 {
        let vals: Vec<f64> = mesh.nodes()[..=m].iter().map(|t| 3.0 * t - 1.0).collect();
        let got = apply_delta(&mesh, alpha, &vals).map_err(e)?;
        let want = 3.0 * mesh.nodes()[m].powf(1.0 - alpha) / g2;
        worst = worst.max((got - want).abs());
    }
    ok_if(worst <= 1e-12, format!("max deviation {worst:.1e}"))
}

fn mesh_quasi_graded() -> Result<String, String> {
    let mesh = TemporalMesh::graded(256, 1.0, 3.0).map_err(e)?;
    let rep = verify_quasi_graded(&mesh, 3.0).map_err(e)?;
    ok_if(rep.pass, format!("max ratio {:.3} (limit {})", rep.max_ratio, rep.constant))
}

fn structural_assumptions() -> Result<String, String> {
    let f = Nonlinearity::allen_cahn(0.5).map_err(e)?;
    let rep = verify_assumptions(&f, &SamplingSpec::new(-1.0, 1.0, 2000));
    ok_if(
        rep.a1_pass && rep.a2_pass == Some(true),
        format!("one-sided margin {:.3e}", rep.a1_margin),
    )
}

fn operator_sign_pattern() -> Result<String, String> {
    let grid = Grid::new(2, 16, 1.0).map_err(e)?;
    let coeffs = CoefficientField::constant(&[1.0, 0.5], Some(&[3.0, -2.0]), Some(1.0));
    let mp = check_max_principle(&grid, &coeffs, &[0.0]).map_err(e)?;
    let op = assemble(&grid, &coeffs, 0.0, &BoundarySpec::dirichlet_zero()).map_err(e)?;
    let sp = op.sign_pattern();
    ok_if(mp.pass && sp.is_m_matrix_pattern(), format!("min row sum {:.3e}", sp.min_row_sum))
}

fn scalar_range() -> Result<String, String> {
    let f = Nonlinearity::allen_cahn(0.5).map_err(e)?;
    let mesh = TemporalMesh::graded(64, 1.0, 3.0).map_err(e)?;
    let traj = solve_scalar(&f, 0.9, &mesh, 0.5, &SolverConfig::scalar()).map_err(e)?;
    ok_if(traj.range_ok == Some(true), format!("U(T) = {:.6}", traj.values.last().unwrap()))
}

fn pde_range() -> Result<String, String> {
    let problem = allen_cahn_experiment(0.5).map_err(e)?;
    let mesh = TemporalMesh::graded(16, 1.0, 3.0).map_err(e)?;
    let grid = Grid::new(2, 8, std::f64::consts::PI).map_err(e)?;
    let hist = solve_pde(&problem, &mesh, &grid, &SolverConfig::default()).map_err(e)?;
    ok_if(hist.range_ok == Some(true), format!("{} levels", mesh.num_steps()))
}

fn resolvent_comparison() -> Result<String, String> {
    let mesh = TemporalMesh::graded(64, 1.0, 2.0).map_err(e)?;
    let rep = comparison_trials(&mesh, 0.5, 1.0, 100, 7).map_err(e)?;
    ok_if(rep.violations == 0, format!("{} violations in {} pairs", rep.violations, rep.trials))
}

fn envelope_bounded() -> Result<String, String> {
    let rep = envelope_refinement(64, 1.0, 1.0, 0.5, 0.0, 1.0, 2, false).map_err(e)?;
    ok_if(rep.pass, format!("growth {:?}", rep.growth))
}

fn error_envelope_conformity() -> Result<String, String> {
    let rep = envelope_conformity(0.5, 3.0, &[128, 256, 512], 0.01).map_err(e)?;
    ok_if(rep.pass, format!("max ratios {:?}", rep.max_ratios))
}

const CHECKS: &[Check] = &[
    ("mittag_leffler_spot_values", mittag_leffler_spot_values),
    ("l1_linear_exactness", l1_linear_exactness),
    ("mesh_quasi_graded", mesh_quasi_graded),
    ("structural_assumptions", structural_assumptions),
    ("operator_sign_pattern", operator_sign_pattern),
    ("scalar_range", scalar_range),
    ("pde_range", pde_range),
    ("resolvent_comparison", resolvent_comparison),
    ("envelope_bounded", envelope_bounded),
    ("error_envelope_conformity", error_envelope_conformity),
];

/// Prints one PASS/FAIL line per check; returns 0 when all pass, else 2.
pub fn run_checks(out: &mut String) -> i32 {
    let mut failed = 0;
    for (name, check) in CHECKS {
        match check() {
            Ok(detail) => {
                let _ = writeln!(out, "PASS {name}: {detail}");
            }
            Err(detail) => {
                failed += 1;
                let _ = writeln!(out, "FAIL {name}: {detail}");
            }
        }
    }
    let _ = writeln!(out, "{} of {} checks passed", CHECKS.len() - failed, CHECKS.len());
    if failed == 0 {
        0
    } else {
        2
    }
}
