//! Acceptance suite: one PASS/FAIL line per criterion, with per-case detail
//! lines underneath. Exits nonzero when any criterion fails.
//!
//! `ACCEPTANCE_ONLY=AC1,AC5` restricts the run to the listed criteria.

use fraxolve::caputo_l1::apply_delta;
use fraxolve::error_harness::{
    envelope_conformity, global_rate_1d_linear, table_run, GradingRule, NRule, Study,
    TableRow, TableSpec,
};
use fraxolve::nonlinearity::Nonlinearity;
use fraxolve::pde_solver::{solve_pde, Problem, SolverConfig};
use fraxolve::scalar_solver::solve_scalar;
use fraxolve::spatial_fd::{BoundaryCondition, BoundarySpec, CoefficientField, Grid};
use fraxolve::special_functions::mittag_leffler;
use fraxolve::stability_lab::{comparison_trials, envelope_refinement};
use fraxolve::temporal_mesh::TemporalMesh;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

const ALPHAS: [f64; 3] = [0.3, 0.5, 0.7];

/// Coarsest mesh of the envelope refinement triple. Close to gamma = alpha - 1
/// with lambda > 0 the ratio settles slowly, so the triple starts here.
const ENVELOPE_M0: usize = 2048;

struct Outcome {
    pass: bool,
    summary: String,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            pass: true,
            summary: String::new(),
            details: Vec::new(),
        }
    }

    fn case(&mut self, ok: bool, detail: String) {
        self.pass &= ok;
        self.details.push(format!("{} {detail}", if ok { "ok  " } else { "BAD " }));
    }
}

fn grading_name(rule: GradingRule) -> &'static str {
    match rule {
        GradingRule::Uniform => "r=1",
        GradingRule::TwoMinusAlphaOver09 => "r=(2-a)/0.9",
        GradingRule::TwoMinusAlphaOverAlpha => "r=(2-a)/a",
        GradingRule::TwoMinusAlpha => "r=2-a",
        GradingRule::Fixed(_) => "r=fixed",
    }
}

/// Published rates for M = 2^5 -> 2^6 and 2^6 -> 2^7, per grading and alpha.
fn table1_time_rates(rule: GradingRule, alpha: f64) -> [f64; 2] {
    let k = ALPHAS.iter().position(|a| *a == alpha).unwrap();
    let table: [[f64; 2]; 3] = match rule {
        GradingRule::Uniform => [[1.07, 1.04], [1.15, 1.08], [1.13, 1.09]],
        GradingRule::TwoMinusAlphaOver09 => [[1.71, 1.71], [1.60, 1.56], [1.33, 1.30]],
        GradingRule::TwoMinusAlphaOverAlpha => [[1.62, 1.64], [1.67, 1.63], [1.39, 1.35]],
        _ => unreachable!(),
    };
    table[k]
}

/// Published errors at the coarsest size, checked within a factor of 2.
fn table1_time_err(rule: GradingRule, alpha: f64) -> f64 {
    let k = ALPHAS.iter().position(|a| *a == alpha).unwrap();
    match rule {
        GradingRule::Uniform => [1.88e-3, 7.41e-4, 1.06e-3][k],
        GradingRule::TwoMinusAlphaOver09 => [5.87e-4, 3.30e-4, 7.14e-4][k],
        GradingRule::TwoMinusAlphaOverAlpha => [1.26e-3, 3.26e-4, 6.77e-4][k],
        _ => unreachable!(),
    }
}

fn gradings() -> Vec<GradingRule> {
    vec![
        GradingRule::Uniform,
        GradingRule::TwoMinusAlphaOver09,
        GradingRule::TwoMinusAlphaOverAlpha,
    ]
}

/// Range flags of every table run, collected for AC4.
struct RangeLedger {
    runs: usize,
    failures: Vec<String>,
}

impl RangeLedger {
    fn rows(&mut self, label: &str, rows: &[TableRow]) {
        for row in rows {
            self.runs += 2;
            if !row.range_ok {
                self.failures.push(format!("{label} alpha={} M={} N={}", row.alpha, row.m, row.n));
            }
        }
    }
}

fn run_table(alpha: f64, rule: GradingRule, sizes: &[usize], n_rule: NRule, study: Study) -> Vec<TableRow> {
    let spec = TableSpec {
        alphas: vec![alpha],
        rs: vec![rule],
        sizes: sizes.to_vec(),
        n_rule,
        study,
        budget_seconds: 1e5,
    };
    table_run(&spec, &SolverConfig::default()).expect("table run")
}

fn ac1(ranges: &mut RangeLedger) -> Outcome {
    let mut out = Outcome::new();
    let mut worst: f64 = 0.0;
    for rule in gradings() {
        for alpha in ALPHAS {
            let rows = run_table(alpha, rule, &[32, 64, 128], NRule::TwoM, Study::Time);
            ranges.rows("AC1", &rows);
            let want = table1_time_rates(rule, alpha);
            let got: Vec<f64> = rows.iter().filter_map(|r| r.rate).collect();
            let devs: Vec<f64> = got.iter().zip(&want).map(|(g, w)| (g - w).abs()).collect();
            let err0 = rows[0].err;
            let ref0 = table1_time_err(rule, alpha);
            let ok_rate = devs.iter().all(|d| *d <= 0.15);
            let ok_err = err0 / ref0 <= 2.0 && ref0 / err0 <= 2.0;
            worst = devs.iter().fold(worst, |m, d| m.max(*d));
            out.case(
                ok_rate && ok_err,
                format!(
                    "{} alpha={alpha}: rates {:.3} {:.3} (published {:.2} {:.2}); err(2^5) {:.3e} (published {:.2e})",
                    grading_name(rule),
                    got[0],
                    got[1],
                    want[0],
                    want[1],
                    err0,
                    ref0
                ),
            );
        }
    }
    out.summary = format!("temporal rates within 0.15 of the published values (largest deviation {worst:.3})");
    out
}

fn ac2(ranges: &mut RangeLedger) -> Outcome {
    let mut out = Outcome::new();
    let mut worst: f64 = 0.0;
    for rule in gradings() {
        for alpha in ALPHAS {
            let rows = run_table(alpha, rule, &[8, 16, 32], NRule::MSquared, Study::Space);
            ranges.rows("AC2", &rows);
            let got: Vec<f64> = rows.iter().filter_map(|r| r.rate).collect();
            let dev = got.iter().fold(0.0f64, |m, g| m.max((g - 2.0).abs()));
            worst = worst.max(dev);
            out.case(
                dev <= 0.1,
                format!("{} alpha={alpha}: rates {:.3} {:.3}", grading_name(rule), got[0], got[1]),
            );
        }
    }
    out.summary = format!("spatial rates 2.0 +- 0.1 with M = N^2 (largest deviation {worst:.3})");
    out
}

fn ac3(ranges: &mut RangeLedger) -> Outcome {
    let mut out = Outcome::new();
    let published = [1.64, 1.45, 1.22];
    let published_err = [1.49e-4, 3.91e-4, 8.90e-4];
    for (k, alpha) in ALPHAS.into_iter().enumerate() {
        // the finest run of the last pair has M = 2^9
        let rows = run_table(alpha, GradingRule::TwoMinusAlphaOverAlpha, &[64, 128, 256], NRule::HalfM, Study::Global);
        ranges.rows("AC3", &rows);
        let got: Vec<f64> = rows.iter().filter_map(|r| r.rate).collect();
        let ok = got.iter().all(|g| (g - published[k]).abs() <= 0.15);
        out.case(
            ok,
            format!(
                "2D global, alpha={alpha}, N=M/2, M=2^6..2^8: rates {:.3} {:.3} (published {:.2}); err(2^8) {:.3e} (published {:.2e})",
                got[0], got[1], published[k], rows[2].err, published_err[k]
            ),
        );
    }
    let ms: Vec<usize> = vec![1 << 10, 1 << 11, 1 << 12, 1 << 13];
    for (alpha, r) in [(0.3, 1.0), (0.5, 1.0), (0.7, 1.0), (0.5, 1.5)] {
        let rows = global_rate_1d_linear(alpha, r, &ms, 8, &SolverConfig::default()).expect("1d run");
        let got: Vec<f64> = rows.iter().filter_map(|r| r.rate).collect();
        let want = alpha * r;
        let ok = got.iter().all(|g| (g - want).abs() <= 0.1);
        out.case(
            ok,
            format!(
                "1D exact, alpha={alpha}, r={r}, M=2^10..2^13: rates {} (target {want:.2})",
                got.iter().map(|g| format!("{g:.3}")).collect::<Vec<_>>().join(" ")
            ),
        );
    }
    out.summary = "global rates: 2D within 0.15 of 1.64/1.45/1.22, 1D within 0.1 of alpha*r".into();
    out
}

fn ac4(ranges: &RangeLedger) -> Outcome {
    let mut out = Outcome::new();
    let mut runs = ranges.runs;
    let mut failures = ranges.failures.clone();
    // scalar Allen-Cahn from several starting values
    for alpha in ALPHAS {
        let f = Nonlinearity::allen_cahn(alpha).unwrap();
        for u0 in [-1.0, -0.5, 0.0, 0.3, 1.0] {
            for (m, r) in [(64, 1.0), (64, (2.0 - alpha) / alpha)] {
                let mesh = TemporalMesh::graded(m, 1.0, r).unwrap();
                let traj = solve_scalar(&f, u0, &mesh, alpha, &SolverConfig::scalar()).unwrap();
                runs += 1;
                if traj.range_ok != Some(true) {
                    failures.push(format!("scalar alpha={alpha} u0={u0} r={r}"));
                }
            }
        }
    }
    // Fisher with Neumann and periodic faces, Allen-Cahn with convection
    let grid = Grid::new(2, 16, PI).unwrap();
    let mesh = TemporalMesh::graded(32, 1.0, 2.0).unwrap();
    let fisher_u0: Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync> =
        Arc::new(|x, _| 0.5 + 0.5 * (2.0 * x[0]).sin() * x[1].cos());
    let cases: Vec<(&str, Problem)> = vec![
        (
            "fisher neumann",
            Problem::new(
                0.4,
                CoefficientField::laplacian(2),
                BoundarySpec::all(BoundaryCondition::neumann()).time_independent(),
                Nonlinearity::fisher(),
                fisher_u0.clone(),
            ),
        ),
        (
            "fisher periodic",
            Problem::new(
                0.6,
                CoefficientField::laplacian(2),
                BoundarySpec::periodic(),
                Nonlinearity::fisher(),
                fisher_u0,
            ),
        ),
        (
            "allen-cahn convection",
            Problem::new(
                0.5,
                CoefficientField::constant(&[1.0, 0.5], Some(&[2.0, -1.0]), None),
                BoundarySpec::dirichlet_zero(),
                Nonlinearity::allen_cahn(0.5).unwrap(),
                Arc::new(|x, _| 0.95 * x[0].sin() * (2.0 * x[1]).sin()),
            ),
        ),
    ];
    for (name, problem) in cases {
        let hist = solve_pde(&problem, &mesh, &grid, &SolverConfig::default()).unwrap();
        runs += 1;
        if hist.range_ok != Some(true) {
            failures.push(name.to_string());
        }
    }
    for f in &failures {
        out.case(false, format!("range violated: {f}"));
    }
    out.pass = failures.is_empty();
    out.summary = format!("{runs} compliant runs, {} range violations (tol = nonlin_tol)", failures.len());
    out
}

fn ac5() -> Outcome {
    let mut out = Outcome::new();
    let mut cases = 0;
    for alpha in ALPHAS {
        let r_opt = (2.0 - alpha) / alpha;
        for lambda in [0.0, 1.0] {
            // part (i): gamma > alpha - 1 with 1 <= r <= (2 - alpha)/alpha
            for gamma in [1.0, 0.5, 0.0, (alpha - 1.0) / 2.0] {
                if gamma == 0.0 && lambda > 0.0 {
                    continue;
                }
                for r in [1.0, r_opt] {
                    let rep = envelope_refinement(ENVELOPE_M0, 1.0, r, alpha, lambda, gamma, 2, false).unwrap();
                    cases += 1;
                    out.case(
                        rep.pass,
                        format!(
                            "alpha={alpha} lambda={lambda} gamma={gamma:.3} r={r:.3}: growth {}",
                            fmt_growth(&rep.growth)
                        ),
                    );
                }
            }
            // part (ii): gamma <= alpha - 1 on arbitrary gradings
            for gamma in [alpha - 1.0, -1.0] {
                for r in [1.0, r_opt, 8.0] {
                    let rep = envelope_refinement(ENVELOPE_M0, 1.0, r, alpha, lambda, gamma, 2, false).unwrap();
                    cases += 1;
                    out.case(
                        rep.pass,
                        format!(
                            "alpha={alpha} lambda={lambda} gamma={gamma:.3} r={r:.3}: growth {}",
                            fmt_growth(&rep.growth)
                        ),
                    );
                }
            }
        }
    }
    let mut pairs = 0;
    let mut violations = 0;
    for (k, alpha) in ALPHAS.into_iter().enumerate() {
        let mesh = TemporalMesh::graded(128, 1.0, (2.0 - alpha) / alpha).unwrap();
        let rep = comparison_trials(&mesh, alpha, 1.0, 100, 1000 + k as u64).unwrap();
        pairs += rep.trials;
        violations += rep.violations;
        out.case(
            rep.violations == 0,
            format!("comparison alpha={alpha} lambda=1: {} violations in {} pairs", rep.violations, rep.trials),
        );
    }
    out.summary = format!(
        "{cases} envelope cases with growth < 5% per doubling (M = {ENVELOPE_M0}..{}); {violations} comparison violations in {pairs} pairs",
        ENVELOPE_M0 * 4
    );
    out
}

fn fmt_growth(g: &[f64]) -> String {
    g.iter().map(|v| format!("{:+.2}%", 100.0 * v)).collect::<Vec<_>>().join(" ")
}

/// Gaussian elimination with partial pivoting on a dense row-major matrix.
fn dense_solve(n: usize, mut a: Vec<f64>, mut b: Vec<f64>) -> Vec<f64> {
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs())).unwrap();
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            b.swap(k, p);
        }
        for i in k + 1..n {
            let l = a[i * n + k] / a[k * n + k];
            for j in k..n {
                a[i * n + j] -= l * a[k * n + j];
            }
            b[i] -= l * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i * n + j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i * n + i];
    }
    x
}

/// L1 coefficient of `U^j - U^{j-1}` in the level-`m` derivative.
fn l1_coeff(t: &[f64], alpha: f64, m: usize, j: usize) -> f64 {
    let g = statrs::function::gamma::gamma(2.0 - alpha);
    ((t[m] - t[j - 1]).powf(1.0 - alpha) - (t[m] - t[j]).powf(1.0 - alpha)) / (g * (t[j] - t[j - 1]))
}

fn ac6() -> Outcome {
    let mut out = Outcome::new();
    // all levels of -1.3 u'' + 0.4 u' + 0.7 u with the L1 derivative, solved at once
    let (alpha, a, b, c) = (0.45, 1.3, 0.4, 0.7);
    let (n, m_steps) = (8, 4);
    let grid = Grid::new(1, n, PI).unwrap();
    let mesh = TemporalMesh::graded(m_steps, 1.0, 2.0).unwrap();
    let t = mesh.nodes().to_vec();
    let h = PI / n as f64;
    let u0 = |x: f64| x.sin() + x * (PI - x) / 3.0;
    let k = n - 1;
    let dim = k * m_steps;
    let mut mat = vec![0.0; dim * dim];
    let mut rhs = vec![0.0; dim];
    for m in 1..=m_steps {
        for i in 0..k {
            let row = (m - 1) * k + i;
            // time: sum_j w_mj (U^j - U^{j-1})
            for j in 1..=m {
                let w = l1_coeff(&t, alpha, m, j);
                mat[row * dim + (j - 1) * k + i] += w;
                if j >= 2 {
                    mat[row * dim + (j - 2) * k + i] -= w;
                } else {
                    rhs[row] += w * u0((i + 1) as f64 * h);
                }
            }
            let col = (m - 1) * k;
            mat[row * dim + col + i] += 2.0 * a / (h * h) + c;
            if i > 0 {
                mat[row * dim + col + i - 1] += -a / (h * h) - b / (2.0 * h);
            }
            if i + 1 < k {
                mat[row * dim + col + i + 1] += -a / (h * h) + b / (2.0 * h);
            }
        }
    }
    let oracle = dense_solve(dim, mat, rhs);
    let problem = Problem::new(
        alpha,
        CoefficientField::constant(&[a], Some(&[b]), None),
        BoundarySpec::dirichlet_zero(),
        Nonlinearity::linear(c),
        Arc::new(move |x, _| u0(x[0])),
    );
    let cfg = SolverConfig {
        nonlin_tol: 1e-14,
        ..SolverConfig::default()
    };
    let hist = solve_pde(&problem, &mesh, &grid, &cfg).unwrap();
    let mut dev: f64 = 0.0;
    for m in 1..=m_steps {
        for i in 0..k {
            dev = dev.max((hist.fields[m][i + 1] - oracle[(m - 1) * k + i]).abs());
        }
    }
    out.case(dev <= 1e-10, format!("PDE solve vs dense monolithic oracle (N=8, M=4): {dev:.2e}"));

    // L1 operator on linear-in-t data: delta(c0 + c1 t)(t_m) = c1 t_m^{1-alpha} / Gamma(2-alpha)
    let mut dev_l1: f64 = 0.0;
    for alpha in [0.1, 0.3, 0.5, 0.7, 0.9] {
        for r in [1.0, 2.0, (2.0 - alpha) / alpha] {
            let mesh = TemporalMesh::graded(50, 2.0, r).unwrap();
            let g = statrs::function::gamma::gamma(2.0 - alpha);
            for m in 1..=50 {
                let vals: Vec<f64> = mesh.nodes()[..=m].iter().map(|s| 0.7 - 1.9 * s).collect();
                let got = apply_delta(&mesh, alpha, &vals).unwrap();
                let want = -1.9 * mesh.nodes()[m].powf(1.0 - alpha) / g;
                dev_l1 = dev_l1.max((got - want).abs());
            }
        }
    }
    out.case(dev_l1 <= 1e-12, format!("L1 operator on linear sequences: {dev_l1:.2e}"));

    let d1 = (mittag_leffler(1.0, 1.0) - std::f64::consts::E).abs();
    // e * erfc(1)
    let d2 = (mittag_leffler(0.5, -1.0) - 0.427_583_576_155_807_0).abs();
    out.case(d1 <= 1e-9 && d2 <= 1e-9, format!("E_1(1) = e: {d1:.2e}; E_0.5(-1) = e erfc(1): {d2:.2e}"));
    out.summary = format!("oracle deviations {dev:.1e} (PDE), {dev_l1:.1e} (L1), {:.1e} (ML)", d1.max(d2));
    out
}

fn ac7() -> Outcome {
    let mut out = Outcome::new();
    let ms = [256, 512, 1024, 2048];
    for alpha in ALPHAS {
        let rs = [
            ("1", 1.0),
            ("2-a-0.2", 2.0 - alpha - 0.2),
            ("2-a+0.2", 2.0 - alpha + 0.2),
            ("(2-a)/a", (2.0 - alpha) / alpha),
        ];
        for (name, r) in rs {
            if r < 1.0 {
                continue;
            }
            let rep = envelope_conformity(alpha, r, &ms, 0.01).unwrap();
            out.case(
                rep.pass,
                format!(
                    "alpha={alpha} r={name}={r:.3}: max ratios {}; growth {}",
                    rep.max_ratios.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" "),
                    fmt_growth(&rep.growth)
                ),
            );
        }
    }
    out.summary = "pointwise error / envelope bounded, growth < 10% per doubling, M = 2^8..2^11".into();
    out
}

fn main() {
    let only: Option<Vec<String>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').map(|p| p.trim().to_uppercase()).collect());
    let wanted = |id: &str| only.as_ref().map_or(true, |v| v.iter().any(|p| p == id));
    let mut ranges = RangeLedger {
        runs: 0,
        failures: Vec::new(),
    };
    let mut failed = 0;
    let mut report = |id: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        println!(
            "{id} {} {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.summary,
            start.elapsed().as_secs_f64()
        );
        for d in &o.details {
            println!("    {d}");
        }
        if !o.pass {
            failed += 1;
        }
    };
    if wanted("AC6") {
        report("AC6", &mut ac6);
    }
    if wanted("AC5") {
        report("AC5", &mut ac5);
    }
    if wanted("AC7") {
        report("AC7", &mut ac7);
    }
    if wanted("AC2") {
        report("AC2", &mut || ac2(&mut ranges));
    }
    if wanted("AC1") {
        report("AC1", &mut || ac1(&mut ranges));
    }
    if wanted("AC3") {
        report("AC3", &mut || ac3(&mut ranges));
    }
    if wanted("AC4") {
        report("AC4", &mut || ac4(&ranges));
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
