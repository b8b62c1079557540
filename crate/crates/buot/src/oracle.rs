//! Exact small-instance ground truth.
//!
//! For `p = 1` the discrete transport problems are linear programs after
//! splitting each signed variable into a positive and a negative part. A
//! self-contained dense two-phase simplex with Bland's rule solves them
//! exactly (up to floating rounding), providing reference objectives,
//! exactly feasible primal solutions, and dual potentials for the
//! primal-dual solver to be checked against.
//!
//! Instances are capped at desk scale; determinism matters more than speed
//! here, which is why Bland's anti-cycling rule is used throughout.

use thiserror::Error;

use crate::grid::{FluxField, FluxNorm, Grid, ScalarField};
use crate::pdhg::{solve, SolveError, SolverConfig};

/// Largest grid (total points) the LP oracle accepts.
pub const MAX_ORACLE_POINTS: usize = 4096;

/// Relative objective agreement demanded between PDHG and the LP.
pub const ORACLE_REL_TOL: f64 = 1e-5;

/// Feasibility residual allowed for the PDHG solution in an oracle check.
pub const ORACLE_RESIDUAL_TOL: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("instance too large for the LP oracle: {points} points > {max}")]
    TooLarge { points: usize, max: usize },
    #[error("linear program is infeasible (balanced mode with mismatched masses?)")]
    Infeasible,
    #[error("linear program is unbounded; the instance is malformed")]
    Unbounded,
    #[error("simplex failed to converge within the pivot budget")]
    PivotBudget,
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Which signed quantity an LP column encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LpColumn {
    FluxPos { point: usize, axis: usize },
    FluxNeg { point: usize, axis: usize },
    SourcePos { point: usize },
    SourceNeg { point: usize },
}

/// Dense equality-form LP `min c'x, Ax = b, x >= 0` built from a transport
/// instance. Rows are grid points; columns are split flux components per
/// admissible (point, axis) pair plus split source values in unbalanced mode.
#[derive(Debug, Clone)]
pub struct LpInstance {
    grid: Grid,
    alpha: f64,
    columns: Vec<LpColumn>,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    rows: usize,
}

impl LpInstance {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }
}

/// Exact primal-dual answer from the simplex.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub objective: f64,
    pub m: FluxField,
    pub eta: ScalarField,
    /// Dual potential in the solver's convention (`phi = -y / h^d` from the
    /// LP row duals `y`), usable to seed PDHG fixed-point checks.
    pub potential: ScalarField,
}

/// Mechanical reformulation of the `p = 1` transport problem as an LP.
/// `alpha = +inf` selects balanced mode, which drops all source columns.
pub fn build_lp(
    rho0: &ScalarField,
    rho1: &ScalarField,
    alpha: f64,
) -> Result<LpInstance, OracleError> {
    assert_eq!(rho0.grid(), rho1.grid(), "oracle inputs live on different grids");
    let grid = rho0.grid().clone();
    let points = grid.num_points();
    if points > MAX_ORACLE_POINTS {
        return Err(OracleError::TooLarge { points, max: MAX_ORACLE_POINTS });
    }

    let dim = grid.dim();
    let vol = grid.cell_volume();
    let mut columns = Vec::new();
    for point in 0..points {
        for axis in 0..dim {
            if !grid.is_upper_boundary(point, axis) {
                columns.push(LpColumn::FluxPos { point, axis });
                columns.push(LpColumn::FluxNeg { point, axis });
            }
        }
    }
    if alpha.is_finite() {
        for point in 0..points {
            columns.push(LpColumn::SourcePos { point });
            columns.push(LpColumn::SourceNeg { point });
        }
    }

    let ncols = columns.len();
    let mut a = vec![0.0; points * ncols];
    let mut c = vec![0.0; ncols];
    for (j, col) in columns.iter().enumerate() {
        match *col {
            LpColumn::FluxPos { point, axis } | LpColumn::FluxNeg { point, axis } => {
                let sign = if matches!(col, LpColumn::FluxPos { .. }) { 1.0 } else { -1.0 };
                let inv_h = 1.0 / grid.spacing(axis);
                let upper = point + grid.stride(axis);
                a[point * ncols + j] = sign * inv_h;
                a[upper * ncols + j] = -sign * inv_h;
                c[j] = vol;
            }
            LpColumn::SourcePos { point } => {
                a[point * ncols + j] = -1.0;
                c[j] = alpha * vol;
            }
            LpColumn::SourceNeg { point } => {
                a[point * ncols + j] = 1.0;
                c[j] = alpha * vol;
            }
        }
    }

    let b: Vec<f64> = rho0
        .values()
        .iter()
        .zip(rho1.values())
        .map(|(r0, r1)| r0 - r1)
        .collect();

    Ok(LpInstance { grid, alpha, columns, a, b, c, rows: points })
}

/// Solves the LP and reconstructs the signed flux, source, and potential.
pub fn solve_lp(lp: &LpInstance) -> Result<LpSolution, OracleError> {
    let simplex = simplex_two_phase(&lp.a, &lp.b, &lp.c, lp.rows, lp.cols())?;

    let dim = lp.grid.dim();
    let mut m_vals = vec![0.0; lp.grid.num_points() * dim];
    let mut eta_vals = vec![0.0; lp.grid.num_points()];
    for (j, col) in lp.columns.iter().enumerate() {
        let x = simplex.x[j];
        if x == 0.0 {
            continue;
        }
        match *col {
            LpColumn::FluxPos { point, axis } => m_vals[point * dim + axis] += x,
            LpColumn::FluxNeg { point, axis } => m_vals[point * dim + axis] -= x,
            LpColumn::SourcePos { point } => eta_vals[point] += x,
            LpColumn::SourceNeg { point } => eta_vals[point] -= x,
        }
    }

    let vol = lp.grid.cell_volume();
    let potential_vals: Vec<f64> = simplex.y.iter().map(|y| -y / vol).collect();

    let m = FluxField::from_values(&lp.grid, m_vals).expect("consistent sizes");
    let eta = ScalarField::from_values(&lp.grid, eta_vals).expect("consistent sizes");
    let potential = ScalarField::from_values(&lp.grid, potential_vals).expect("consistent sizes");
    let objective: f64 = lp.c.iter().zip(&simplex.x).map(|(c, x)| c * x).sum();

    let _ = lp.alpha;
    Ok(LpSolution { objective, m, eta, potential })
}

struct SimplexResult {
    x: Vec<f64>,
    /// Row duals of the original (unflipped) system.
    y: Vec<f64>,
}

const PIVOT_EPS: f64 = 1e-9;
const COST_EPS: f64 = 1e-9;

/// Dense two-phase tableau simplex, Bland's rule in both phases.
fn simplex_two_phase(
    a: &[f64],
    b: &[f64],
    c: &[f64],
    rows: usize,
    cols: usize,
) -> Result<SimplexResult, OracleError> {
    // Tableau layout: cols original variables, rows artificials, then rhs.
    let width = cols + rows + 1;
    let rhs = cols + rows;
    let mut t = vec![0.0; rows * width];
    let mut row_sign = vec![1.0; rows];
    for r in 0..rows {
        let sign = if b[r] < 0.0 { -1.0 } else { 1.0 };
        row_sign[r] = sign;
        for j in 0..cols {
            t[r * width + j] = sign * a[r * cols + j];
        }
        t[r * width + cols + r] = 1.0;
        t[r * width + rhs] = sign * b[r];
    }
    let mut basis: Vec<usize> = (cols..cols + rows).collect();

    // Phase 1 objective row: minimize the artificial sum.
    let mut obj = vec![0.0; width];
    for r in 0..rows {
        for j in 0..cols {
            obj[j] -= t[r * width + j];
        }
        obj[rhs] -= t[r * width + rhs];
    }

    let b_scale: f64 = b.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let budget = 50_000 + 200 * (rows + cols);

    pivot_loop(&mut t, &mut obj, &mut basis, rows, cols, width, true, budget)?;
    if -obj[rhs] > 1e-7 * b_scale {
        return Err(OracleError::Infeasible);
    }

    // Phase 2 objective row from the real costs over the current basis.
    obj.fill(0.0);
    obj[..cols].copy_from_slice(c);
    for r in 0..rows {
        let cb = if basis[r] < cols { c[basis[r]] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..width {
                obj[j] -= cb * t[r * width + j];
            }
        }
    }
    // Zero out reduced costs of basic columns explicitly.
    for r in 0..rows {
        if basis[r] < cols {
            obj[basis[r]] = 0.0;
        }
    }

    pivot_loop(&mut t, &mut obj, &mut basis, rows, cols, width, false, budget)?;

    let mut x = vec![0.0; cols];
    for r in 0..rows {
        if basis[r] < cols {
            x[basis[r]] = t[r * width + rhs].max(0.0);
        }
    }

    // Duals from the artificial columns, which track the basis inverse:
    // y_flipped = c_B' B^{-1}; undo the row flips afterwards.
    let mut y = vec![0.0; rows];
    for i in 0..rows {
        let mut yi = 0.0;
        for r in 0..rows {
            let cb = if basis[r] < cols { c[basis[r]] } else { 0.0 };
            yi += cb * t[r * width + cols + i];
        }
        y[i] = row_sign[i] * yi;
    }

    Ok(SimplexResult { x, y })
}

#[allow(clippy::too_many_arguments)]
fn pivot_loop(
    t: &mut [f64],
    obj: &mut [f64],
    basis: &mut [usize],
    rows: usize,
    cols: usize,
    width: usize,
    allow_artificial: bool,
    budget: usize,
) -> Result<(), OracleError> {
    let rhs = width - 1;
    let enter_limit = if allow_artificial { cols + rows } else { cols };
    for _ in 0..budget {
        // Bland: smallest-index column with a negative reduced cost.
        let entering = obj[..enter_limit].iter().position(|&r| r < -COST_EPS);
        let Some(e) = entering else {
            return Ok(());
        };

        // Ratio test; ties resolved by the smallest basic-variable index.
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..rows {
            let coef = t[r * width + e];
            if coef > PIVOT_EPS {
                let ratio = t[r * width + rhs] / coef;
                match leave {
                    None => leave = Some((r, ratio)),
                    Some((lr, lratio)) => {
                        if ratio < lratio - 1e-12
                            || ((ratio - lratio).abs() <= 1e-12 && basis[r] < basis[lr])
                        {
                            leave = Some((r, ratio));
                        }
                    }
                }
            }
        }
        let Some((lr, _)) = leave else {
            return Err(OracleError::Unbounded);
        };

        // Pivot on (lr, e).
        let pivot = t[lr * width + e];
        for j in 0..width {
            t[lr * width + j] /= pivot;
        }
        for r in 0..rows {
            if r != lr {
                let factor = t[r * width + e];
                if factor != 0.0 {
                    for j in 0..width {
                        t[r * width + j] -= factor * t[lr * width + j];
                    }
                }
            }
        }
        let factor = obj[e];
        if factor != 0.0 {
            for j in 0..width {
                obj[j] -= factor * t[lr * width + j];
            }
        }
        basis[lr] = e;
    }
    Err(OracleError::PivotBudget)
}

/// Outcome of one PDHG-versus-LP comparison.
#[derive(Debug, Clone)]
pub struct OracleCase {
    pub label: String,
    pub alpha: f64,
    pub lp_objective: f64,
    pub pdhg_objective: f64,
    pub relative_gap: f64,
    pub pdhg_residual: f64,
    pub lp_residual: f64,
    pub pdhg_iters: usize,
    pub pdhg_gap: f64,
    pub pdhg_converged: bool,
    /// `|sum(eta) h^d - (mass1 - mass0)|` of the PDHG solution.
    pub mass_identity_error: f64,
    pub passed: bool,
}

/// Runs both solvers on one instance and compares objectives at
/// [`ORACLE_REL_TOL`], plus the PDHG feasibility residual at
/// [`ORACLE_RESIDUAL_TOL`]. Only `p = 1` has an LP counterpart.
pub fn oracle_check(
    rho0: &ScalarField,
    rho1: &ScalarField,
    alpha: f64,
    cfg: &SolverConfig,
    label: impl Into<String>,
) -> Result<OracleCase, OracleError> {
    let mut cfg = cfg.clone();
    cfg.alpha = alpha;
    cfg.p = FluxNorm::L1;

    let lp = build_lp(rho0, rho1, alpha)?;
    let lp_sol = solve_lp(&lp)?;
    let pdhg_sol = solve(rho0, rho1, &cfg)?;

    let rho_vals: Vec<f64> = rho0
        .values()
        .iter()
        .zip(rho1.values())
        .map(|(a, b)| a - b)
        .collect();
    let rho = ScalarField::from_values(rho0.grid(), rho_vals).expect("same grid");

    let lp_as_solution = crate::pdhg::Solution {
        m: lp_sol.m.clone(),
        eta: lp_sol.eta.clone(),
        phi: lp_sol.potential.clone(),
        objective: lp_sol.objective,
        gap: 0.0,
        residual: 0.0,
        iters: 0,
        converged: true,
        history: None,
    };
    let lp_residual = lp_as_solution.feasibility_residual(&rho);
    let pdhg_residual = pdhg_sol.feasibility_residual(&rho);

    let relative_gap =
        (pdhg_sol.objective - lp_sol.objective).abs() / (1.0 + lp_sol.objective.abs());
    let passed = relative_gap <= ORACLE_REL_TOL && pdhg_residual <= ORACLE_RESIDUAL_TOL;
    let mass_identity_error =
        (pdhg_sol.eta.mass() - (rho1.mass() - rho0.mass())).abs();

    Ok(OracleCase {
        label: label.into(),
        alpha,
        lp_objective: lp_sol.objective,
        pdhg_objective: pdhg_sol.objective,
        relative_gap,
        pdhg_residual,
        lp_residual,
        pdhg_iters: pdhg_sol.iters,
        pdhg_gap: pdhg_sol.gap,
        pdhg_converged: pdhg_sol.converged,
        mass_identity_error,
        passed,
    })
}

/// Configuration for the randomized equivalence suite.
#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub seed: u64,
    pub cases_1d: usize,
    pub max_n_1d: usize,
    pub cases_2d: usize,
    pub max_n_2d: usize,
    pub mismatched_cases: usize,
    pub alphas: Vec<f64>,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 20240601,
            cases_1d: 20,
            max_n_1d: 16,
            cases_2d: 10,
            max_n_2d: 5,
            mismatched_cases: 5,
            alphas: vec![0.2, 0.5, 2.0, f64::INFINITY],
            tol: 1e-14,
            max_iters: 300_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub cases: Vec<OracleCase>,
    pub passed: bool,
    /// Gap tolerance the suite's PDHG solves ran at.
    pub tol: f64,
}

/// Seeded random equivalence suite: equal-mass instances across the alpha
/// grid (including balanced mode) plus mass-mismatched unbalanced instances.
pub fn oracle_suite(cfg: &SuiteConfig) -> Result<OracleReport, OracleError> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cases = Vec::new();

    let solver = SolverConfig::unbalanced(1.0)
        .with_p(FluxNorm::L1)
        .with_tol(cfg.tol)
        .with_max_iters(cfg.max_iters);

    let run_instance = |rng: &mut rand_chacha::ChaCha8Rng,
                            grid: &Grid,
                            equal_mass: bool,
                            alphas: &[f64],
                            label: &str,
                            cases: &mut Vec<OracleCase>|
     -> Result<(), OracleError> {
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
            (0..grid.num_points()).map(|_| rng.gen_range(0.05..1.0)).collect()
        };
        let v0 = draw(rng);
        let mut v1 = draw(rng);
        if !equal_mass {
            let scale = rng.gen_range(0.4..2.5);
            for v in &mut v1 {
                *v *= scale;
            }
        }
        let mut rho0 = ScalarField::from_values(grid, v0).expect("sized");
        let mut rho1 = ScalarField::from_values(grid, v1).expect("sized");
        if equal_mass {
            for (field, _) in [(&mut rho0, 0), (&mut rho1, 1)] {
                let mass = field.mass();
                for v in field.values_mut() {
                    *v /= mass;
                }
            }
        }
        for &alpha in alphas {
            if alpha.is_infinite() && !equal_mass {
                continue;
            }
            let case = oracle_check(
                &rho0,
                &rho1,
                alpha,
                &solver,
                format!("{label} alpha={alpha}"),
            )?;
            cases.push(case);
        }
        Ok(())
    };

    for i in 0..cfg.cases_1d {
        let n = rng.gen_range(2..=cfg.max_n_1d);
        let grid = Grid::new(1, 1.0, n).expect("valid grid");
        run_instance(&mut rng, &grid, true, &cfg.alphas, &format!("1d#{i} N={n}"), &mut cases)?;
    }
    for i in 0..cfg.cases_2d {
        let n = rng.gen_range(2..=cfg.max_n_2d);
        let grid = Grid::new(2, 1.0, n).expect("valid grid");
        run_instance(&mut rng, &grid, true, &cfg.alphas, &format!("2d#{i} N={n}"), &mut cases)?;
    }
    let finite_alphas: Vec<f64> =
        cfg.alphas.iter().copied().filter(|a| a.is_finite()).collect();
    for i in 0..cfg.mismatched_cases {
        let n = rng.gen_range(2..=cfg.max_n_1d);
        let grid = Grid::new(1, 1.0, n).expect("valid grid");
        run_instance(
            &mut rng,
            &grid,
            false,
            &finite_alphas,
            &format!("mismatch#{i} N={n}"),
            &mut cases,
        )?;
    }

    let passed = cases.iter().all(|c| c.passed);
    Ok(OracleReport { cases, passed, tol: cfg.tol })
}
