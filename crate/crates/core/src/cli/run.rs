//! Case pipeline: grid, field, assembly, basis, coarse system, solve and
//! diagnostics.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{CaseConfig, PermeabilityConfig, RestrictionChoice, SolveConfig};
use super::export;
use crate::discretization::{assemble_mpfa_o, assemble_tpfa, BoundarySpec, Scheme, SparseSystem};
use crate::error::{Error, Result};
use crate::fields::{correlated_lognormal_field, read_spe10, rotated_tensor, Tensor, TensorField};
use crate::geometry::{
    build_cartesian_grid, build_support_regions, partition_uniform, perturb_interior_nodes,
    BoundarySide, CoarsePartition, Grid,
};
use crate::linalg::{triple_product, BandLu, SparseMatrix};
use crate::monotone::{repair, repair_fine, RepairReport};
use crate::msrsb::{
    connectivity_matrix, init_prolongation, restriction_cv, restriction_galerkin,
    smooth_prolongation, Prolongation, Restriction,
};
use crate::solver::{
    bound_check, error_norms, iterative_multiscale, one_step_multiscale, write_residual_csv,
    CoarseCorrection, IterativeOptions, SolveReport, SolveSettings,
};

/// Fine-scale problem and basis shared by every command.
pub struct Prepared {
    pub grid: Grid,
    pub field: TensorField,
    pub system: SparseSystem,
    pub partition: CoarsePartition,
    pub prolongation: Prolongation,
    /// Report of the fine-operator preprocessing used for the basis.
    pub fine_repair: Option<RepairReport>,
}

pub fn build_grid(config: &CaseConfig) -> Result<Grid> {
    let grid = build_cartesian_grid(&config.grid.extent, &config.grid.cells)?;
    match &config.grid.perturbation {
        Some(p) => perturb_interior_nodes(&grid, p.amplitude, p.seed),
        None => Ok(grid),
    }
}

pub fn build_field(config: &CaseConfig, grid: &Grid) -> Result<TensorField> {
    let dim = grid.dim();
    let field = match &config.permeability {
        PermeabilityConfig::Homogeneous { value } => {
            if !(*value > 0.0) {
                return Err(Error::Config(format!(
                    "permeability value {value} must be positive"
                )));
            }
            TensorField::homogeneous(Tensor::isotropic(dim, *value))?
        }
        PermeabilityConfig::Tensor { xx, xy, yy } => TensorField::homogeneous(Tensor::Sym2 {
            xx: *xx,
            xy: *xy,
            yy: *yy,
        })?,
        PermeabilityConfig::Rotated { theta, k1, k2 } => rotated_tensor(*theta, *k1, *k2)?,
        PermeabilityConfig::Lognormal {
            seed,
            mu,
            sigma,
            correlation,
        } => correlated_lognormal_field(dim, grid.cell_counts(), *seed, *mu, *sigma, *correlation)?,
        PermeabilityConfig::Spe10 {
            path,
            layers,
            components,
        } => {
            let counts = grid.cell_counts();
            let dims = [counts[0], counts[1], crate::fields::SPE10_DIMS[2]];
            read_spe10(path, dims, (layers[0], layers[1]), *components)?
        }
    };
    if !field.fits(grid.num_cells()) {
        return Err(Error::Config(format!(
            "permeability has {} cells, grid has {}",
            field.len(),
            grid.num_cells()
        )));
    }
    Ok(field)
}

pub fn boundary_spec(config: &CaseConfig) -> BoundarySpec {
    let b = &config.boundary;
    let mut spec = BoundarySpec::new();
    for (side, value) in [
        (BoundarySide::Left, b.left),
        (BoundarySide::Right, b.right),
        (BoundarySide::Bottom, b.bottom),
        (BoundarySide::Top, b.top),
        (BoundarySide::Front, b.front),
        (BoundarySide::Back, b.back),
    ] {
        if let Some(v) = value {
            spec = spec.with_side(side, v);
        }
    }
    spec
}

pub fn prepare(config: &CaseConfig) -> Result<Prepared> {
    config.validate()?;
    let grid = build_grid(config)?;
    let field = build_field(config, &grid)?;
    let bc = boundary_spec(config);
    let system = match config.scheme {
        Scheme::Tpfa => assemble_tpfa(&grid, &field, &bc)?,
        Scheme::MpfaO => assemble_mpfa_o(&grid, &field, &bc)?,
    };
    let partition = partition_uniform(&grid, &config.coarsening.ratio)?;
    let supports = build_support_regions(&grid, &partition);
    let (basis_operator, fine_repair) = if config.repair.mode.fine() {
        let r = repair_fine(&system.matrix)?;
        (r.operator, Some(r.report))
    } else {
        (system.matrix.clone(), None)
    };
    let prolongation = smooth_prolongation(
        &connectivity_matrix(&basis_operator),
        &init_prolongation(&partition),
        &supports,
        config.basis.omega,
        config.basis.tol,
        config.basis.max_sweeps,
    )?;
    Ok(Prepared {
        grid,
        field,
        system,
        partition,
        prolongation,
        fine_repair,
    })
}

/// Coarse operator for `restriction`, repaired when the config asks for it.
fn coarse_operator(
    config: &CaseConfig,
    prepared: &Prepared,
    restriction: &Restriction,
) -> Result<(SparseMatrix, Option<RepairReport>)> {
    let a_c = triple_product(
        &restriction.matrix,
        &prepared.system.matrix,
        &prepared.prolongation.matrix,
    )?;
    if config.repair.mode.coarse() {
        let r = repair(&a_c, config.repair.epsilon, config.repair.weight)?;
        Ok((r.operator, Some(r.report)))
    } else {
        Ok((a_c, None))
    }
}

fn restriction_for(choice: RestrictionChoice, prepared: &Prepared) -> Restriction {
    match choice {
        RestrictionChoice::Cv => restriction_cv(&prepared.partition),
        RestrictionChoice::Galerkin => restriction_galerkin(&prepared.prolongation),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisSummary {
    pub sweeps: usize,
    pub converged: bool,
    pub max_increment: f64,
    pub min_entry: f64,
    pub max_entry: f64,
    pub unity_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseReport {
    pub name: String,
    pub fine_cells: usize,
    pub coarse_blocks: usize,
    pub scheme: Scheme,
    pub solve: SolveReport,
    /// Missing when basis smoothing diverged.
    pub basis: Option<BasisSummary>,
    pub fine_repair: Option<RepairReport>,
    pub coarse_repair: Option<RepairReport>,
    /// Census of the coarse pressures against the same bounds.
    pub coarse_violations: Option<crate::solver::ViolationCensus>,
    /// Why error norms are missing, if they are.
    pub reference_note: Option<String>,
    /// Basis or solver divergence; the run still counts as completed.
    pub failure: Option<String>,
    pub manifest: Vec<PathBuf>,
}

pub struct CaseResult {
    pub report: CaseReport,
    /// Missing after a divergence.
    pub pressure: Option<Vec<f64>>,
    pub reference: Option<Vec<f64>>,
    /// Missing when basis smoothing diverged.
    pub prepared: Option<Prepared>,
}

fn solve_settings(config: &CaseConfig) -> SolveSettings {
    SolveSettings {
        restriction: format!("{:?}", config.restriction).to_lowercase(),
        repair: format!("{:?}", config.repair.mode).to_lowercase(),
        epsilon: config.repair.mode.coarse().then_some(config.repair.epsilon),
        weight: config.repair.mode.coarse().then_some(config.repair.weight),
        smoothing_steps: match config.solve {
            SolveConfig::OneStep => None,
            SolveConfig::Iterative {
                smoothing_steps, ..
            } => Some(smoothing_steps),
        },
        coarsening_ratio: config.coarsening.ratio.clone(),
    }
}

/// Runs one case. Files are written only when an output directory is set
/// in the config or passed as `output`. Basis and solver divergence are
/// reported in the result rather than returned as errors.
pub fn run_case(config: &CaseConfig, output: Option<&Path>) -> Result<CaseResult> {
    let prepared = match prepare(config) {
        Ok(p) => p,
        Err(e @ Error::BasisDivergence { .. }) => {
            let grid = build_grid(config)?;
            let partition = partition_uniform(&grid, &config.coarsening.ratio)?;
            let report = CaseReport {
                name: config.name.clone(),
                fine_cells: grid.num_cells(),
                coarse_blocks: partition.num_blocks(),
                scheme: config.scheme,
                solve: SolveReport {
                    settings: solve_settings(config),
                    ..SolveReport::default()
                },
                basis: None,
                fine_repair: None,
                coarse_repair: None,
                coarse_violations: None,
                reference_note: Some("no multiscale solution to compare".into()),
                failure: Some(e.to_string()),
                manifest: Vec::new(),
            };
            let mut result = CaseResult {
                report,
                pressure: None,
                reference: None,
                prepared: None,
            };
            if let Some(dir) = output
                .map(Path::to_path_buf)
                .or_else(|| config.output.dir.clone())
            {
                write_outputs(&mut result, &dir)?;
            }
            return Ok(result);
        }
        Err(e) => return Err(e),
    };
    let a_f = &prepared.system.matrix;
    let q = &prepared.system.rhs;

    let restriction = restriction_for(config.restriction, &prepared);
    let (operator, coarse_repair) = coarse_operator(config, &prepared, &restriction)?;

    let mut failure = None;
    let (pressure, mut solve) = match &config.solve {
        SolveConfig::OneStep => {
            let start = std::time::Instant::now();
            let p = one_step_multiscale(
                q,
                &prepared.prolongation.matrix,
                &restriction.matrix,
                &operator,
            )?;
            let report = SolveReport {
                wall_time_seconds: start.elapsed().as_secs_f64(),
                ..SolveReport::default()
            };
            (Some(p), report)
        }
        SolveConfig::Iterative {
            tol,
            max_cycles,
            smoothing_steps,
            finalize_cv,
        } => {
            let options = IterativeOptions {
                tol: *tol,
                max_cycles: *max_cycles,
                smoothing_steps: *smoothing_steps,
            };
            let coarse = CoarseCorrection::new(&restriction.matrix, &operator)?;
            let finalize = if *finalize_cv && config.restriction == RestrictionChoice::Galerkin {
                let cv = restriction_cv(&prepared.partition);
                let (op_cv, _) = coarse_operator(config, &prepared, &cv)?;
                Some(CoarseCorrection::new(&cv.matrix, &op_cv)?)
            } else {
                None
            };
            match iterative_multiscale(
                a_f,
                q,
                &prepared.prolongation.matrix,
                &coarse,
                &options,
                finalize.as_ref(),
            ) {
                Ok((p, report)) => (Some(p), report),
                Err(Error::Breakdown { cycle, history }) => {
                    failure = Some(format!(
                        "iteration broke down at cycle {cycle}: residual is not finite"
                    ));
                    let report = SolveReport {
                        iterations: history.len(),
                        residual_history: history,
                        ..SolveReport::default()
                    };
                    (None, report)
                }
                Err(e) => return Err(e),
            }
        }
    };
    solve.settings = solve_settings(config);
    solve.nullspace_drift = coarse_repair.as_ref().map(|r| r.nullspace_drift);

    let mut coarse_violations = None;
    if let (Some((lo, hi)), Some(p)) = (dirichlet_bounds(&prepared.system), &pressure) {
        solve.violations = Some(bound_check(p, lo, hi)?);
        if matches!(config.solve, SolveConfig::OneStep) {
            let coarse = BandLu::factor(&operator)?.solve(&restriction.matrix.spmv(q)?)?;
            coarse_violations = Some(bound_check(&coarse, lo, hi)?);
        }
    }

    let (reference, mut reference_note) = if config.reference.enabled {
        match BandLu::factor_with_budget(a_f, config.reference.budget) {
            Ok(lu) => (Some(lu.solve(q)?), None),
            Err(e @ Error::TooLarge { .. }) => {
                (None, Some(format!("direct reference skipped: {e}")))
            }
            Err(e) => return Err(e),
        }
    } else {
        (None, Some("direct reference disabled".into()))
    };
    match (&reference, &pressure) {
        (Some(r), Some(p)) => solve.error_norms = Some(error_norms(r, p)?),
        (Some(_), None) => reference_note = Some("no multiscale solution to compare".into()),
        _ => {}
    }

    let (min_entry, max_entry) = prepared.prolongation.value_range();
    let report = CaseReport {
        name: config.name.clone(),
        fine_cells: prepared.grid.num_cells(),
        coarse_blocks: prepared.partition.num_blocks(),
        scheme: config.scheme,
        solve,
        basis: Some(BasisSummary {
            sweeps: prepared.prolongation.iterations,
            converged: prepared.prolongation.converged,
            max_increment: prepared.prolongation.max_increment,
            min_entry,
            max_entry,
            unity_defect: prepared.prolongation.unity_defect(),
        }),
        fine_repair: prepared.fine_repair.clone(),
        coarse_repair,
        coarse_violations,
        reference_note,
        failure,
        manifest: Vec::new(),
    };
    let mut result = CaseResult {
        report,
        pressure,
        reference,
        prepared: Some(prepared),
    };
    if let Some(dir) = output
        .map(Path::to_path_buf)
        .or_else(|| config.output.dir.clone())
    {
        write_outputs(&mut result, &dir)?;
    }
    Ok(result)
}

/// Smallest and largest prescribed pressure, the range a monotone solution
/// must stay in when there are no sources.
pub fn dirichlet_bounds(system: &SparseSystem) -> Option<(f64, f64)> {
    let mut it = system.dirichlet.iter().map(|&(_, v)| v);
    let first = it.next()?;
    Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
}

fn write_outputs(result: &mut CaseResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = Vec::new();
    if let (Some(prepared), Some(pressure)) = (&result.prepared, &result.pressure) {
        let grid = &prepared.grid;
        let kxx = prepared.field.kxx();
        let kxx = if kxx.len() == grid.num_cells() {
            kxx
        } else {
            vec![kxx[0]; grid.num_cells()]
        };
        let mut fields: Vec<(&str, &[f64])> = vec![("pressure", pressure), ("kxx", &kxx)];
        if let Some(r) = &result.reference {
            fields.push(("reference", r));
        }
        let vtk = dir.join("fields.vtk");
        export::write_vtk(&vtk, grid, &fields)?;
        manifest.push(vtk);
        let csv = dir.join("fields.csv");
        export::write_csv(&csv, grid, &fields)?;
        manifest.push(csv);
    }
    if !result.report.solve.residual_history.is_empty() {
        let path = dir.join("residuals.csv");
        write_residual_csv(&path, &result.report.solve.residual_history)?;
        manifest.push(path);
    }
    let report_path = dir.join("report.json");
    manifest.push(report_path.clone());
    result.report.manifest = manifest;
    let text = serde_json::to_string_pretty(&result.report)
        .map_err(|e| Error::InvalidArgument(format!("report serialization failed: {e}")))?;
    std::fs::write(&report_path, text).map_err(|e| Error::io(&report_path, e))
}

/// Repair diagnostics without solving.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepairSummary {
    pub name: String,
    pub fine: Option<RepairReport>,
    pub coarse: RepairReport,
}

impl RepairSummary {
    pub fn to_text(&self) -> String {
        let mut s = format!("case {}\n", self.name);
        if let Some(f) = &self.fine {
            s.push_str("[fine operator]\n");
            s.push_str(&f.to_text());
        }
        s.push_str("[coarse operator]\n");
        s.push_str(&self.coarse.to_text());
        s
    }
}

/// Fine and coarse repair statistics for the configured restriction. The
/// coarse statistics use the configured threshold and weight even when
/// coarse repair is off.
pub fn repair_report(config: &CaseConfig) -> Result<RepairSummary> {
    let prepared = prepare(config)?;
    let fine = match prepared.fine_repair.clone() {
        Some(r) => Some(r),
        None if prepared.system.scheme == Scheme::MpfaO => {
            Some(repair_fine(&prepared.system.matrix)?.report)
        }
        None => None,
    };
    let restriction = restriction_for(config.restriction, &prepared);
    let a_c = triple_product(
        &restriction.matrix,
        &prepared.system.matrix,
        &prepared.prolongation.matrix,
    )?;
    let coarse = repair(&a_c, config.repair.epsilon, config.repair.weight)?.report;
    Ok(RepairSummary {
        name: config.name.clone(),
        fine,
        coarse,
    })
}

/// Writes basis columns to `dir`; returns the written files.
pub fn export_basis(config: &CaseConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let prepared = prepare(config)?;
    let columns = if config.output.basis_columns.is_empty() {
        let b = prepared.partition.block_counts();
        vec![prepared
            .partition
            .block_index([b[0] / 2, b[1] / 2, b[2] / 2])]
    } else {
        config.output.basis_columns.clone()
    };
    prepared.prolongation.export_columns(dir, &columns)
}

/// Outcome of one config in a batch.
pub struct BatchItem {
    pub config: PathBuf,
    pub result: Result<CaseReport>,
}

/// Runs every `*.toml` in `dir` concurrently, in file-name order. Each case
/// writes to `<output>/<case name>` when `output` is given.
pub fn run_batch(dir: &Path, output: Option<&Path>, seed: Option<u64>) -> Result<Vec<BatchItem>> {
    let mut configs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    configs.sort();
    let run_one = |path: &Path| -> Result<CaseReport> {
        let mut config = CaseConfig::load(path)?;
        if let Some(s) = seed {
            config.override_seed(s);
        }
        let out = output.map(|o| o.join(&config.name));
        Ok(run_case(&config, out.as_deref())?.report)
    };
    let results: Vec<Result<CaseReport>> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|p| scope.spawn(move || run_one(p)))
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::InvalidArgument("case panicked".into())))
            })
            .collect()
    });
    Ok(configs
        .into_iter()
        .zip(results)
        .map(|(config, result)| BatchItem { config, result })
        .collect())
}
