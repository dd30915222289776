//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Cases come from the bundled `cases/` directory. When an SPE10
//! permeability file is present at `cases/spe10/spe_perm.dat` (or at the
//! path in `AM_MSRSB_SPE10`) the layer-85 criteria run on it; otherwise they
//! run on the bundled correlated lognormal stand-in.

#![allow(clippy::needless_range_loop)]

use std::path::{Path, PathBuf};

use am_msrsb::cli::config::{PermeabilityConfig, RepairMode, SolveConfig};
use am_msrsb::cli::{prepare, run_case, CaseConfig, CaseReport};
use am_msrsb::discretization::{assemble_mpfa_o, assemble_tpfa, is_m_matrix, BoundarySpec};
use am_msrsb::fields::{correlated_lognormal_field, rotated_tensor, Tensor, TensorField};
use am_msrsb::geometry::{build_cartesian_grid, partition_uniform, perturb_interior_nodes};
use am_msrsb::linalg::{direct_solve, triple_product, SparseMatrix};
use am_msrsb::monotone::{repair, repair_fine, RepairReport};
use am_msrsb::msrsb::{restriction_cv, UNITY_TOLERANCE};
use am_msrsb::solver::one_step_multiscale;
use am_msrsb::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Criterion 1
const MIN_STANDIN_SIGMA: f64 = 3.0;
// Criterion 2
const MAX_L2: f64 = 0.02;
const MAX_LINF: f64 = 0.10;
// Criterion 3: drift relative to the largest diagonal magnitude
const DRIFT_FACTOR: f64 = 1e-13;
// Criterion 4
const CV_CONTRAST: f64 = 3.0;
const CV_CYCLE_CAP: usize = 300;
const GALERKIN_SPREAD: f64 = 0.5;
// Criterion 5
const LARGE_RATIO_CYCLES: (usize, usize) = (100, 500);
// Criterion 6
const BASIS_SLACK: f64 = 1e-9;
// Criterion 7: twice the reported counts 54 and 128
const CYCLE_LIMIT_60: usize = 108;
const CYCLE_LIMIT_45: usize = 256;
// Criterion 8
const MPFA_TPFA_REL: f64 = 1e-10;
const LINEAR_EXACT: f64 = 1e-9;
const CONSTANT_EXACT: f64 = 1e-10;
const ITERATIVE_FACTOR: f64 = 10.0;
const TRIPLE_PRODUCT_TOL: f64 = 1e-12;
// Criterion 9
const GOLDEN_TOL: f64 = 1e-12;

struct Line {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn cases_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cases")
}

fn spe10_file() -> Option<PathBuf> {
    let path = std::env::var_os("AM_MSRSB_SPE10")
        .map(PathBuf::from)
        .unwrap_or_else(|| cases_dir().join("spe10/spe_perm.dat"));
    path.exists().then_some(path)
}

fn load(name: &str) -> CaseConfig {
    let mut c = CaseConfig::load(&cases_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    if let (Some(path), PermeabilityConfig::Lognormal { .. }) = (spe10_file(), &c.permeability) {
        if c.grid.cells == [60, 220] {
            c.permeability = PermeabilityConfig::Spe10 {
                path,
                layers: [85, 85],
                components: Default::default(),
            };
        }
    }
    c
}

fn with_repair(c: &CaseConfig, mode: RepairMode) -> CaseConfig {
    let mut c = c.clone();
    c.repair.mode = mode;
    c.name = format!("{}-{:?}", c.name, mode).to_lowercase();
    c
}

fn run(c: &CaseConfig) -> CaseReport {
    run_case(c, None)
        .unwrap_or_else(|e| panic!("{}: {e}", c.name))
        .report
}

fn cycles(r: &CaseReport) -> Option<usize> {
    (r.solve.converged && r.failure.is_none()).then_some(r.solve.iterations)
}

fn show(r: &CaseReport) -> String {
    match (&r.failure, r.solve.converged) {
        (Some(f), _) => format!("diverged ({f})"),
        (None, true) => format!("{} cycles", r.solve.iterations),
        (None, false) => format!(
            "not converged in {} cycles (residual {:.2e})",
            r.solve.iterations,
            r.solve.residual_history.last().copied().unwrap_or(f64::NAN)
        ),
    }
}

fn source_note() -> &'static str {
    if spe10_file().is_some() {
        "SPE10 layer 85"
    } else {
        "lognormal stand-in"
    }
}

/// Every report collected along the way, for the null-space and
/// iterative-accuracy checks.
#[derive(Default)]
struct Collected {
    repairs: Vec<(String, RepairReport)>,
    iterative: Vec<(String, CaseReport, f64)>,
}

impl Collected {
    fn add(&mut self, c: &CaseConfig, r: &CaseReport) {
        for rep in [&r.coarse_repair, &r.fine_repair].into_iter().flatten() {
            self.repairs.push((r.name.clone(), rep.clone()));
        }
        if let SolveConfig::Iterative { tol, .. } = c.solve {
            self.iterative.push((r.name.clone(), r.clone(), tol));
        }
    }
}

fn criterion_1_and_2(all: &mut Collected) -> (Line, Line) {
    let am = load("test2.toml");
    let raw = with_repair(&am, RepairMode::Off);
    let sigma_ok = match am.permeability {
        PermeabilityConfig::Lognormal { sigma, .. } => sigma >= MIN_STANDIN_SIGMA,
        _ => true,
    };
    let ra = run(&am);
    let rr = run(&raw);
    all.add(&am, &ra);
    let va = ra
        .solve
        .violations
        .as_ref()
        .map_or(usize::MAX, |v| v.total());
    let vr = rr.solve.violations.as_ref().map_or(0, |v| v.total());
    let one = Line {
        id: "1 monotonicity",
        pass: sigma_ok && va == 0 && vr >= 1,
        detail: format!(
            "{}: repaired one-step has {va} cells outside [0,1], unrepaired has {vr} (need 0 and >=1)",
            source_note()
        ),
    };
    let two = match &ra.solve.error_norms {
        Some(n) => Line {
            id: "2 accuracy",
            pass: n.l2 <= MAX_L2 && n.linf <= MAX_LINF,
            detail: format!(
                "{}: L2 {:.4} (<= {MAX_L2}), Linf {:.4} (<= {MAX_LINF})",
                source_note(),
                n.l2,
                n.linf
            ),
        },
        None => Line {
            id: "2 accuracy",
            pass: false,
            detail: "no reference solution".into(),
        },
    };
    (one, two)
}

fn criterion_4(all: &mut Collected) -> Line {
    let cv = load("test4a_cv.toml");
    let g = load("test4a_galerkin.toml");
    let (cv_am, cv_raw) = (run(&cv), run(&with_repair(&cv, RepairMode::Off)));
    let (g_am, g_raw) = (run(&g), run(&with_repair(&g, RepairMode::Off)));
    all.add(&cv, &cv_am);
    all.add(&cv, &cv_raw);
    all.add(&g, &g_am);
    all.add(&g, &g_raw);
    let cv_ok = match (cycles(&cv_am), cycles(&cv_raw)) {
        (Some(a), Some(r)) => r as f64 >= CV_CONTRAST * a as f64,
        (Some(_), None) => true,
        _ => false,
    };
    let g_ok = match (cycles(&g_am), cycles(&g_raw)) {
        (Some(a), Some(r)) => (a as f64 - r as f64).abs() <= GALERKIN_SPREAD * r.max(a) as f64,
        _ => false,
    };
    Line {
        id: "4 iterative contrast",
        pass: cv_ok && g_ok,
        detail: format!(
            "{}: cv/2 steps repaired {} vs unrepaired {} (need unrepaired >= {CV_CONTRAST}x or none within {CV_CYCLE_CAP}); galerkin/1 step {} vs {} (need within {:.0}%)",
            source_note(),
            show(&cv_am),
            show(&cv_raw),
            show(&g_am),
            show(&g_raw),
            GALERKIN_SPREAD * 100.0
        ),
    }
}

fn criterion_5(all: &mut Collected) -> Line {
    let c = load("test4b.toml");
    let (am, raw) = (run(&c), run(&with_repair(&c, RepairMode::Off)));
    all.add(&c, &am);
    all.add(&c, &raw);
    let (lo, hi) = LARGE_RATIO_CYCLES;
    let pass = match (cycles(&am), cycles(&raw)) {
        (Some(a), Some(r)) => a <= r && (lo..=hi).contains(&a) && (lo..=hi).contains(&r),
        _ => false,
    };
    Line {
        id: "5 large-ratio benefit",
        pass,
        detail: format!(
            "{}: repaired {} vs unrepaired {} (need repaired <= unrepaired, both in [{lo}, {hi}])",
            source_note(),
            show(&am),
            show(&raw)
        ),
    }
}

fn criterion_6(all: &mut Collected) -> Line {
    let c = load("test5a.toml");
    let am = prepare(&c).expect("repaired basis");
    if let Some(r) = &am.fine_repair {
        all.repairs.push(("test5a basis".into(), r.clone()));
    }
    let (lo, hi) = am.prolongation.value_range();
    let defect = am.prolongation.unity_defect();
    let bounded = lo >= -BASIS_SLACK && hi <= 1.0 + BASIS_SLACK && defect <= UNITY_TOLERANCE;
    let sweeps_ok = am.prolongation.iterations == 5;
    let raw = prepare(&with_repair(&c, RepairMode::Off));
    let (raw_bad, raw_note) = match raw {
        Ok(p) => {
            let (a, b) = p.prolongation.value_range();
            (a < 0.0 || b > 1.0, format!("raw range [{a:.3e}, {b:.6}]"))
        }
        Err(e @ Error::BasisDivergence { .. }) => (true, format!("raw basis {e}")),
        Err(e) => (false, format!("raw basis failed unexpectedly: {e}")),
    };
    Line {
        id: "6 basis bounds",
        pass: bounded && sweeps_ok && raw_bad,
        detail: format!(
            "repaired basis after {} sweeps in [{lo:.3e}, {hi:.12}], unity defect {defect:.1e}; {raw_note}",
            am.prolongation.iterations
        ),
    }
}

fn criterion_7(all: &mut Collected) -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for (file, limit) in [
        ("test5b.toml", CYCLE_LIMIT_60),
        ("test5c.toml", CYCLE_LIMIT_45),
    ] {
        let c = load(file);
        let (am, raw) = (run(&c), run(&with_repair(&c, RepairMode::Off)));
        all.add(&c, &am);
        all.add(&c, &raw);
        let ok = match (cycles(&am), cycles(&raw)) {
            (Some(a), Some(r)) => a <= r && a <= limit,
            (Some(a), None) => a <= limit,
            _ => false,
        };
        pass &= ok;
        parts.push(format!(
            "{}: repaired {} vs raw {} (limit {limit})",
            c.name,
            show(&am),
            show(&raw)
        ));
    }
    Line {
        id: "7 repaired-basis convergence",
        pass,
        detail: parts.join("; "),
    }
}

fn criterion_3(all: &mut Collected) -> Line {
    // the reduced 3-D case adds a repaired operator of a third kind
    let c = load("spe3d_reduced.toml");
    let r = run(&c);
    all.add(&c, &r);
    let worst = all
        .repairs
        .iter()
        .map(|(name, r)| (name, r.nullspace_drift / (DRIFT_FACTOR * r.max_diagonal)))
        .fold((String::new(), 0.0f64), |acc, (n, q)| {
            if q > acc.1 {
                (n.clone(), q)
            } else {
                acc
            }
        });
    Line {
        id: "3 null-space identity",
        pass: !all.repairs.is_empty() && worst.1 <= 1.0,
        detail: format!(
            "{} repaired operators, worst drift is {:.3} of {DRIFT_FACTOR:e} x max diagonal ({})",
            all.repairs.len(),
            worst.1,
            worst.0
        ),
    }
}

fn max_rel_entry_diff(a: &SparseMatrix, b: &SparseMatrix) -> f64 {
    let scale = a.max_abs().max(b.max_abs());
    a.add(&b.scaled(-1.0)).unwrap().max_abs() / scale
}

fn criterion_8(all: &Collected) -> Line {
    let mut failed = Vec::new();
    let mut check = |name: &str, ok: bool, note: String| {
        if !ok {
            failed.push(format!("{name}: {note}"));
        }
    };

    // TPFA M-matrix on a strongly heterogeneous field
    let g = build_cartesian_grid(&[365.76, 670.56], &[60, 220]).unwrap();
    let k = correlated_lognormal_field(2, g.cell_counts(), 1, 0.0, 3.0, 1).unwrap();
    let tpfa = assemble_tpfa(&g, &k, &BoundarySpec::left_to_right(1.0, 0.0)).unwrap();
    check(
        "tpfa m-matrix",
        is_m_matrix(&tpfa.matrix, 1e-12),
        String::new(),
    );

    // MPFA-O equals TPFA on a K-orthogonal grid with diagonal tensors
    let g2 = build_cartesian_grid(&[3.0, 2.0], &[24, 16]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let k2 = TensorField::from_cells(
        (0..g2.num_cells())
            .map(|_| Tensor::Sym2 {
                xx: rng.random_range(0.1..10.0),
                xy: 0.0,
                yy: rng.random_range(0.1..10.0),
            })
            .collect(),
    )
    .unwrap();
    let bc = BoundarySpec::left_to_right(1.0, 0.0);
    let d = max_rel_entry_diff(
        &assemble_mpfa_o(&g2, &k2, &bc).unwrap().matrix,
        &assemble_tpfa(&g2, &k2, &bc).unwrap().matrix,
    );
    check("mpfa = tpfa", d <= MPFA_TPFA_REL, format!("{d:e}"));

    // MPFA-O reproduces linear pressure on a perturbed grid with a full tensor
    let g3 = perturb_interior_nodes(
        &build_cartesian_grid(&[20.0, 150.0], &[40, 40]).unwrap(),
        0.3,
        3,
    )
    .unwrap();
    let k3 = TensorField::homogeneous(Tensor::Sym2 {
        xx: 100.0,
        xy: 75.0,
        yy: 100.0,
    })
    .unwrap();
    let lin = |x: [f64; 3]| 1.0 - 0.02 * x[0] + 0.005 * x[1];
    let s3 = assemble_mpfa_o(&g3, &k3, &BoundarySpec::sampled(&g3, lin)).unwrap();
    let p3 = direct_solve(&s3.matrix, &s3.rhs).unwrap();
    let e3 = (0..g3.num_cells())
        .map(|c| (p3[c] - lin(g3.centroid(c))).abs())
        .fold(0.0, f64::max);
    check("mpfa linear", e3 <= LINEAR_EXACT, format!("{e3:e}"));

    // one-step multiscale reproduces a constant pressure
    let part = partition_uniform(&g, &[3, 5]).unwrap();
    let sys = assemble_tpfa(&g, &k, &BoundarySpec::constant(&g, 0.7)).unwrap();
    let cfg = load("test2.toml");
    let p = prepare(&cfg).unwrap().prolongation.matrix;
    let r = restriction_cv(&part);
    let a_c = triple_product(&r.matrix, &sys.matrix, &p).unwrap();
    let x = one_step_multiscale(&sys.rhs, &p, &r.matrix, &a_c).unwrap();
    let ec = x.iter().map(|v| (v - 0.7).abs()).fold(0.0, f64::max);
    check("constant", ec <= CONSTANT_EXACT, format!("{ec:e}"));

    // partition of unity: asserted inside every sweep; the final bases too
    for name in ["test2.toml", "test4b.toml", "test5a.toml", "test5c.toml"] {
        let p = prepare(&load(name)).unwrap().prolongation;
        check(
            name,
            p.unity_defect() <= UNITY_TOLERANCE,
            format!("{:e}", p.unity_defect()),
        );
    }

    // B·1 = Bᵀ·1 = 0 for a coarse and a fine perturbation
    let rep = repair(&a_c, 0.0, 1.0).unwrap();
    let mp = assemble_mpfa_o(&g3, &rotated_tensor(60.0, 1000.0, 100.0).unwrap(), &bc).unwrap();
    let fine = repair_fine(&mp.matrix).unwrap();
    for (name, b, scale) in [
        ("coarse B", &rep.perturbation.matrix, a_c.max_abs_diagonal()),
        (
            "fine B",
            &fine.perturbation.matrix,
            mp.matrix.max_abs_diagonal(),
        ),
    ] {
        let worst = b
            .row_sums()
            .into_iter()
            .chain(b.col_sums())
            .fold(0.0f64, |m, s| m.max(s.abs()));
        check(
            name,
            b.nnz() > 0 && worst <= DRIFT_FACTOR * scale,
            format!("{worst:e}"),
        );
    }

    // converged iterative runs against the direct solve
    for (name, r, tol) in &all.iterative {
        if let (true, Some(n)) = (r.solve.converged, &r.solve.error_norms) {
            check(
                &format!("iterative {name}"),
                n.l2 <= ITERATIVE_FACTOR * tol,
                format!(
                    "relative error {:.2e} > {:.0e}",
                    n.l2,
                    ITERATIVE_FACTOR * tol
                ),
            );
        }
    }

    // triple product against a dense oracle
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst_tp = 0.0f64;
    for _ in 0..6 {
        let n = rng.random_range(20..=200);
        let m = rng.random_range(2..=n / 4);
        let rand_sparse = |rng: &mut ChaCha8Rng, r: usize, c: usize, density: f64| {
            let mut t = Vec::new();
            for i in 0..r {
                for j in 0..c {
                    if rng.random_bool(density) {
                        t.push((i, j, rng.random_range(-1.0..1.0)));
                    }
                }
            }
            SparseMatrix::from_triplets(r, c, &t, false).unwrap()
        };
        let a = rand_sparse(&mut rng, n, n, 0.05);
        let p = rand_sparse(&mut rng, n, m, 0.2);
        let r = p.transpose();
        let fast = triple_product(&r, &a, &p).unwrap().to_dense();
        let (rd, ad, pd) = (r.to_dense(), a.to_dense(), p.to_dense());
        for i in 0..m {
            for j in 0..m {
                let mut s = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        s += rd[i][k] * ad[k][l] * pd[l][j];
                    }
                }
                worst_tp = worst_tp.max((fast[i][j] - s).abs());
            }
        }
    }
    check(
        "triple product",
        worst_tp <= TRIPLE_PRODUCT_TOL,
        format!("{worst_tp:e}"),
    );

    let pass = failed.is_empty();
    Line {
        id: "8 property suite",
        pass,
        detail: if pass {
            "all property checks hold".into()
        } else {
            failed.join("; ")
        },
    }
}

fn criterion_9() -> Line {
    let mut worst = 0.0f64;
    let mut diff = |a: f64, b: f64| worst = worst.max((a - b).abs());

    let a = SparseMatrix::from_dense(&[
        vec![2.0, 0.5, -1.0],
        vec![0.5, 3.0, -2.0],
        vec![-1.0, -2.0, 4.0],
    ])
    .unwrap();
    let m = repair(&a, 0.1, 1.0).unwrap().operator.to_dense();
    let expect = [[3.0, -0.5, -1.0], [-0.5, 4.0, -2.0], [-1.0, -2.0, 4.0]];
    for i in 0..3 {
        for j in 0..3 {
            diff(m[i][j], expect[i][j]);
        }
    }

    let g = build_cartesian_grid(&[2.0, 1.0], &[2, 1]).unwrap();
    let k = TensorField::homogeneous(Tensor::isotropic(2, 1.0)).unwrap();
    let s = assemble_tpfa(&g, &k, &BoundarySpec::left_to_right(1.0, 0.0)).unwrap();
    let p = direct_solve(&s.matrix, &s.rhs).unwrap();
    diff(p[0], 0.75);
    diff(p[1], 0.25);

    let t45 = rotated_tensor(45.0, 1000.0, 10.0)
        .unwrap()
        .tensor(0)
        .as_matrix2();
    for (v, e) in [
        (t45[0][0], 505.0),
        (t45[0][1], 495.0),
        (t45[1][0], 495.0),
        (t45[1][1], 505.0),
    ] {
        diff(v, e);
    }
    let t60 = rotated_tensor(60.0, 1000.0, 100.0)
        .unwrap()
        .tensor(0)
        .as_matrix2();
    let off = 225.0 * 3f64.sqrt();
    for (v, e) in [
        (t60[0][0], 325.0),
        (t60[0][1], off),
        (t60[1][0], off),
        (t60[1][1], 775.0),
    ] {
        diff(v, e);
    }
    let rounded = (t60[0][1] * 1000.0).round() / 1000.0 == 389.711;
    Line {
        id: "9 golden values",
        pass: worst <= GOLDEN_TOL && rounded,
        detail: format!(
            "largest deviation {worst:.1e} (<= {GOLDEN_TOL:e}); 60-degree off-diagonal {:.6}",
            t60[0][1]
        ),
    }
}

fn main() {
    let mut all = Collected::default();
    let (one, two) = criterion_1_and_2(&mut all);
    let four = criterion_4(&mut all);
    let five = criterion_5(&mut all);
    let six = criterion_6(&mut all);
    let seven = criterion_7(&mut all);
    let three = criterion_3(&mut all);
    let eight = criterion_8(&all);
    let nine = criterion_9();
    let lines = [one, two, three, four, five, six, seven, eight, nine];
    for l in &lines {
        println!(
            "{} criterion {}: {}",
            if l.pass { "PASS" } else { "FAIL" },
            l.id,
            l.detail
        );
    }
    let failed = lines.iter().filter(|l| !l.pass).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        lines.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
