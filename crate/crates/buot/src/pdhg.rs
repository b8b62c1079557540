//! Primal-dual hybrid gradient solver for the discrete balanced (OT) and
//! unbalanced (UOT) transport problems
//!
//! ```text
//!   min_m           f(m)                 s.t.  div_h(m)       = rho0 - rho1
//!   min_{m,eta}     f(m) + alpha f(eta)  s.t.  div_h(m) - eta = rho0 - rho1
//! ```
//!
//! with `f` the volume-weighted `l_{p,1}` norm. Each iteration performs the
//! shrinkage step on the primal variables, extrapolates, and ascends the
//! dual; the run stops when the primal-dual gap falls below the tolerance.
//!
//! The balanced problem is solved by a separate code path without source
//! variables rather than by a huge `alpha`, so that a UOT run and an OT run
//! with the same step sizes execute identical floating-point operations
//! whenever the source iterate is exactly zero. That is what makes the
//! iterate-reduction behavior observable at the bit level.

use thiserror::Error;

use crate::grid::{FluxField, FluxNorm, Grid, GridError, ScalarField};
use crate::prox::{prox_flux_in_place, ShrinkParam};

/// Mass-balance slack admitted in OT mode, compared after `h^d` weighting.
/// Far above image-quantization noise on normalized inputs, far below any
/// real imbalance.
pub const MASS_MATCH_TOL: f64 = 1e-9;

/// Safety factor applied to the convergence condition when step sizes are
/// derived automatically: `mu = tau = sqrt(0.99 / bound)`.
pub const STEP_SAFETY: f64 = 0.99;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("input fields live on different grids")]
    GridMismatch,
    #[error("input fields contain non-finite values")]
    NonFiniteInput,
    #[error("balanced mode requires equal masses; |mass0 - mass1| = {imbalance:e} exceeds {tol:e}")]
    MassMismatch { imbalance: f64, tol: f64 },
    #[error("alpha must be positive (or infinite for balanced mode), got {0}")]
    InvalidAlpha(f64),
    #[error("step sizes must satisfy mu*tau*{bound} < 1; got mu = {mu}, tau = {tau}")]
    InvalidStepSizes { mu: f64, tau: f64, bound: f64 },
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("max_iters must be at least 1")]
    ZeroIterations,
    #[error("the unbalanced step requires finite alpha; use the balanced step instead")]
    NotUnbalanced,
    #[error("iterates became non-finite at iteration {iter}")]
    Diverged { iter: usize },
}

/// User-facing solver configuration. `alpha = +inf` selects the balanced
/// problem. Step sizes left unset are filled from the operator-norm bound.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub alpha: f64,
    pub p: FluxNorm,
    pub mu: Option<f64>,
    pub tau: Option<f64>,
    pub tol: f64,
    pub max_iters: usize,
    pub record_history: bool,
}

impl SolverConfig {
    /// Balanced transport (no source term).
    pub fn balanced() -> Self {
        Self::unbalanced(f64::INFINITY)
    }

    /// Unbalanced transport with source weight `alpha`.
    pub fn unbalanced(alpha: f64) -> Self {
        SolverConfig {
            alpha,
            p: FluxNorm::L2,
            mu: None,
            tau: None,
            tol: 1e-6,
            max_iters: 300_000,
            record_history: false,
        }
    }

    pub fn with_p(mut self, p: FluxNorm) -> Self {
        self.p = p;
        self
    }

    pub fn with_steps(mut self, mu: f64, tau: f64) -> Self {
        self.mu = Some(mu);
        self.tau = Some(tau);
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_history(mut self) -> Self {
        self.record_history = true;
        self
    }

    pub fn is_balanced(&self) -> bool {
        self.alpha.is_infinite()
    }

    /// Pins step sizes against the grid's operator-norm bound and validates
    /// everything the iteration relies on.
    pub fn resolve(&self, grid: &Grid) -> Result<ResolvedConfig, SolveError> {
        if self.alpha <= 0.0 || self.alpha.is_nan() {
            return Err(SolveError::InvalidAlpha(self.alpha));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(SolveError::InvalidTolerance(self.tol));
        }
        if self.max_iters == 0 {
            return Err(SolveError::ZeroIterations);
        }
        let bound = grid.operator_norm_bound(!self.is_balanced());
        let (mu, tau) = match (self.mu, self.tau) {
            (Some(mu), Some(tau)) => (mu, tau),
            (Some(mu), None) => (mu, STEP_SAFETY / (bound * mu)),
            (None, Some(tau)) => (STEP_SAFETY / (bound * tau), tau),
            (None, None) => {
                let s = (STEP_SAFETY / bound).sqrt();
                (s, s)
            }
        };
        if !(mu > 0.0 && tau > 0.0 && mu.is_finite() && tau.is_finite() && mu * tau * bound < 1.0)
        {
            return Err(SolveError::InvalidStepSizes { mu, tau, bound });
        }
        let flux_shrink = ShrinkParam::new(mu).expect("validated above");
        let source_shrink = if self.is_balanced() {
            None
        } else {
            Some(ShrinkParam::new(self.alpha * mu).map_err(|_| SolveError::InvalidAlpha(self.alpha))?)
        };
        Ok(ResolvedConfig {
            alpha: self.alpha,
            p: self.p,
            mu,
            tau,
            flux_shrink,
            source_shrink,
        })
    }
}

/// Configuration with concrete step sizes, ready to drive iterations.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub alpha: f64,
    pub p: FluxNorm,
    pub mu: f64,
    pub tau: f64,
    flux_shrink: ShrinkParam,
    source_shrink: Option<ShrinkParam>,
}

impl ResolvedConfig {
    pub fn is_balanced(&self) -> bool {
        self.source_shrink.is_none()
    }
}

/// One full iterate: primal variables, their extrapolated copies, and the
/// dual potential. `eta` stays identically zero in balanced mode.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub m: FluxField,
    pub eta: ScalarField,
    pub phi: ScalarField,
    pub m_bar: FluxField,
    pub eta_bar: ScalarField,
    pub k: usize,
}

impl SolverState {
    /// All-zero start; makes the `rho0 = rho1` case exact in one step.
    pub fn zeros(grid: &Grid) -> Self {
        SolverState {
            m: FluxField::zeros(grid),
            eta: ScalarField::zeros(grid),
            phi: ScalarField::zeros(grid),
            m_bar: FluxField::zeros(grid),
            eta_bar: ScalarField::zeros(grid),
            k: 0,
        }
    }
}

/// Per-iteration record kept when history recording is enabled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRecord {
    pub gap: f64,
    pub objective: f64,
    pub residual: f64,
}

/// Solver output: the optimal triple, objective, final gap, feasibility
/// residual, and iteration bookkeeping.
#[derive(Debug, Clone)]
pub struct Solution {
    pub m: FluxField,
    pub eta: ScalarField,
    pub phi: ScalarField,
    pub objective: f64,
    pub gap: f64,
    pub residual: f64,
    pub iters: usize,
    pub converged: bool,
    pub history: Option<Vec<HistoryRecord>>,
}

impl Solution {
    /// `||div_h(m) - eta - rho||_{h,2}` against a given right-hand side.
    pub fn feasibility_residual(&self, rho: &ScalarField) -> f64 {
        state_residual(&self.m, &self.eta, rho)
    }
}

/// Differences between an unbalanced and a balanced solution:
/// `m_dif = ||m_uot - m_ot||_{h,2}` and `eta_dif = ||eta_uot||_{h,2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionDiff {
    pub m_dif: f64,
    pub eta_dif: f64,
}

pub fn compare_solutions(uot: &Solution, ot: &Solution) -> Result<SolutionDiff, SolveError> {
    if uot.m.grid() != ot.m.grid() {
        return Err(SolveError::GridMismatch);
    }
    let diff: Vec<f64> = uot
        .m
        .values()
        .iter()
        .zip(ot.m.values())
        .map(|(a, b)| a - b)
        .collect();
    let diff = FluxField::from_values(uot.m.grid(), diff)?;
    Ok(SolutionDiff { m_dif: diff.norm_h2(), eta_dif: uot.eta.norm_h2() })
}

fn state_residual(m: &FluxField, eta: &ScalarField, rho: &ScalarField) -> f64 {
    let div = m.divergence();
    let vol = rho.grid().cell_volume();
    let sq: f64 = div
        .values()
        .iter()
        .zip(eta.values())
        .zip(rho.values())
        .map(|((d, e), r)| {
            let v = d - e - r;
            v * v
        })
        .sum();
    (sq * vol).sqrt()
}

/// Scratch buffers reused across iterations so the solve loop never
/// allocates.
struct StepBuffers {
    flux: FluxField,
    scalar: ScalarField,
}

impl StepBuffers {
    fn new(grid: &Grid) -> Self {
        StepBuffers { flux: FluxField::zeros(grid), scalar: ScalarField::zeros(grid) }
    }
}

/// Writes one iteration from `cur` into `next` (every field of `next` is
/// overwritten; `next.eta`/`next.eta_bar` must already equal `cur`'s in
/// balanced mode, where they are never touched).
fn step_into(
    cur: &SolverState,
    next: &mut SolverState,
    rho: &ScalarField,
    rc: &ResolvedConfig,
    bufs: &mut StepBuffers,
) {
    // Flux half-step: prox_{mu f}(m + mu * grad(phi)), via (div_h)^* = -grad_h.
    cur.phi.gradient_into(&mut next.m);
    for (t, m) in next.m.values_mut().iter_mut().zip(cur.m.values()) {
        *t = m + rc.mu * *t;
    }
    prox_flux_in_place(&mut next.m, rc.flux_shrink, rc.p);

    let (m_next, m_bar) = (&next.m, &mut next.m_bar);
    for ((b, n), p) in m_bar
        .values_mut()
        .iter_mut()
        .zip(m_next.values())
        .zip(cur.m.values())
    {
        *b = 2.0 * *n - p;
    }

    match rc.source_shrink {
        None => {
            // Balanced: no source variables; dual ascent on div(m_bar) - rho.
            next.m_bar.divergence_into(&mut bufs.scalar);
            for ((out, (d, phi)), r) in next
                .phi
                .values_mut()
                .iter_mut()
                .zip(bufs.scalar.values().iter().zip(cur.phi.values()))
                .zip(rho.values())
            {
                *out = phi + rc.tau * (*d - r);
            }
        }
        Some(shrink) => {
            let lam = shrink.lambda();
            for (out, (e, phi)) in next
                .eta
                .values_mut()
                .iter_mut()
                .zip(cur.eta.values().iter().zip(cur.phi.values()))
            {
                *out = crate::prox::shrink_scalar(e + rc.mu * phi, lam);
            }
            let (eta_next, eta_bar) = (&next.eta, &mut next.eta_bar);
            for ((b, n), p) in eta_bar
                .values_mut()
                .iter_mut()
                .zip(eta_next.values())
                .zip(cur.eta.values())
            {
                *b = 2.0 * *n - p;
            }
            next.m_bar.divergence_into(&mut bufs.scalar);
            // Written as (div - eta_bar) - rho so a bitwise-zero eta_bar
            // yields bit-identical results to the balanced update.
            for (((out, (d, phi)), e), r) in next
                .phi
                .values_mut()
                .iter_mut()
                .zip(bufs.scalar.values().iter().zip(cur.phi.values()))
                .zip(next.eta_bar.values().iter())
                .zip(rho.values())
            {
                *out = phi + rc.tau * ((*d - e) - r);
            }
        }
    }
    next.k = cur.k + 1;
}

/// One balanced PDHG iteration:
/// flux prox, extrapolation, dual ascent `phi + tau * (div_h(m_bar) - rho)`.
pub fn pdhg_step_ot(state: &SolverState, rho: &ScalarField, rc: &ResolvedConfig) -> SolverState {
    let mut next = state.clone();
    let mut bufs = StepBuffers::new(state.phi.grid());
    let balanced = ResolvedConfig { source_shrink: None, ..rc.clone() };
    step_into(state, &mut next, rho, &balanced, &mut bufs);
    next
}

/// One unbalanced PDHG iteration: flux prox, source prox with threshold
/// `alpha * mu`, extrapolation of both primals, dual ascent
/// `phi + tau * (div_h(m_bar) - eta_bar - rho)`.
///
/// Rejects balanced configurations; route those to [`pdhg_step_ot`].
pub fn pdhg_step_uot(
    state: &SolverState,
    rho: &ScalarField,
    rc: &ResolvedConfig,
) -> Result<SolverState, SolveError> {
    if rc.source_shrink.is_none() {
        return Err(SolveError::NotUnbalanced);
    }
    let mut next = state.clone();
    let mut bufs = StepBuffers::new(state.phi.grid());
    step_into(state, &mut next, rho, rc, &mut bufs);
    Ok(next)
}

/// Gap accumulation shared by the public function and the solve loop; the
/// difference flux and its divergence are computed into caller buffers.
fn gap_with_buffers(
    prev: &SolverState,
    next: &SolverState,
    rc: &ResolvedConfig,
    bufs: &mut StepBuffers,
) -> f64 {
    let grid = prev.phi.grid();
    let vol = grid.cell_volume();

    for ((d, a), b) in bufs
        .flux
        .values_mut()
        .iter_mut()
        .zip(next.m.values())
        .zip(prev.m.values())
    {
        *d = a - b;
    }
    bufs.flux.divergence_into(&mut bufs.scalar);

    let mut sq_m = 0.0;
    for v in bufs.flux.values() {
        sq_m += v * v;
    }
    let mut sq_eta = 0.0;
    let mut sq_phi = 0.0;
    let mut cross = 0.0;
    for i in 0..grid.num_points() {
        let de = next.eta.values()[i] - prev.eta.values()[i];
        let dphi = next.phi.values()[i] - prev.phi.values()[i];
        sq_eta += de * de;
        sq_phi += dphi * dphi;
        cross += dphi * (bufs.scalar.values()[i] - de);
    }
    (sq_m + sq_eta) * vol / rc.mu + sq_phi * vol / rc.tau - 2.0 * cross * vol
}

/// The stopping quantity
/// `R_h^k = (1/mu)(||dm||^2 + ||deta||^2) + (1/tau)||dphi||^2
///          - 2 <dphi, div_h(dm) - deta>_h`
/// between consecutive iterates. Nonnegative whenever
/// `mu * tau * bound < 1`, and zero exactly at a fixed point.
pub fn primal_dual_gap(prev: &SolverState, next: &SolverState, rc: &ResolvedConfig) -> f64 {
    let mut bufs = StepBuffers::new(prev.phi.grid());
    gap_with_buffers(prev, next, rc, &mut bufs)
}

fn check_finite_scalar(f: &ScalarField) -> Result<(), SolveError> {
    if f.values().iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(SolveError::NonFiniteInput)
    }
}

/// Runs PDHG from the all-zero start until the primal-dual gap drops below
/// `cfg.tol` or the iteration cap is hit.
///
/// In balanced mode the input masses must agree to within
/// [`MASS_MATCH_TOL`] after `h^d` weighting; unbalanced mode accepts any
/// masses (the source absorbs the imbalance).
pub fn solve(
    rho0: &ScalarField,
    rho1: &ScalarField,
    cfg: &SolverConfig,
) -> Result<Solution, SolveError> {
    if rho0.grid() != rho1.grid() {
        return Err(SolveError::GridMismatch);
    }
    check_finite_scalar(rho0)?;
    check_finite_scalar(rho1)?;
    let grid = rho0.grid().clone();
    let rc = cfg.resolve(&grid)?;

    if rc.is_balanced() {
        let imbalance = (rho0.mass() - rho1.mass()).abs();
        if imbalance > MASS_MATCH_TOL {
            return Err(SolveError::MassMismatch { imbalance, tol: MASS_MATCH_TOL });
        }
    }

    let rho_vals: Vec<f64> = rho0
        .values()
        .iter()
        .zip(rho1.values())
        .map(|(a, b)| a - b)
        .collect();
    let rho = ScalarField::from_values(&grid, rho_vals)?;

    let mut history = cfg.record_history.then(Vec::new);
    let mut state = SolverState::zeros(&grid);
    let mut next = SolverState::zeros(&grid);
    let mut bufs = StepBuffers::new(&grid);
    let mut gap = f64::INFINITY;
    let mut converged = false;

    while state.k < cfg.max_iters {
        step_into(&state, &mut next, &rho, &rc, &mut bufs);
        gap = gap_with_buffers(&state, &next, &rc, &mut bufs);
        std::mem::swap(&mut state, &mut next);
        if !gap.is_finite() {
            return Err(SolveError::Diverged { iter: state.k });
        }
        if let Some(h) = history.as_mut() {
            h.push(HistoryRecord {
                gap,
                objective: state_objective(&state, &rc),
                residual: state_residual(&state.m, &state.eta, &rho),
            });
        }
        if gap <= cfg.tol {
            converged = true;
            break;
        }
    }

    let objective = state_objective(&state, &rc);
    let residual = state_residual(&state.m, &state.eta, &rho);
    Ok(Solution {
        m: state.m,
        eta: state.eta,
        phi: state.phi,
        objective,
        gap,
        residual,
        iters: state.k,
        converged,
        history,
    })
}

fn state_objective(state: &SolverState, rc: &ResolvedConfig) -> f64 {
    let flux = state.m.objective(rc.p);
    if rc.is_balanced() {
        flux
    } else {
        flux + rc.alpha * state.eta.abs_mass()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1d(n: usize) -> Grid {
        Grid::new(1, 1.0, n).unwrap()
    }

    /// Unit Dirac pair: all mass at x = 0 in rho0, all at x = L in rho1.
    fn dirac_pair(grid: &Grid) -> (ScalarField, ScalarField) {
        let n = grid.subdivisions();
        let inv_h = 1.0 / grid.spacing(0);
        let mut r0 = vec![0.0; grid.num_points()];
        let mut r1 = vec![0.0; grid.num_points()];
        r0[0] = inv_h;
        r1[n] = inv_h;
        (
            ScalarField::from_values(grid, r0).unwrap(),
            ScalarField::from_values(grid, r1).unwrap(),
        )
    }

    #[test]
    fn default_steps_satisfy_convergence_condition() {
        let g = Grid::new(2, 1.0, 8).unwrap();
        for balanced in [true, false] {
            let cfg = if balanced {
                SolverConfig::balanced()
            } else {
                SolverConfig::unbalanced(0.5)
            };
            let rc = cfg.resolve(&g).unwrap();
            let bound = g.operator_norm_bound(!balanced);
            assert!(rc.mu * rc.tau * bound < 1.0);
            assert!((rc.mu - rc.tau).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_steps_rejected() {
        let g = Grid::new(1, 1.0, 4).unwrap();
        let cfg = SolverConfig::balanced().with_steps(1.0, 1.0);
        assert!(matches!(cfg.resolve(&g), Err(SolveError::InvalidStepSizes { .. })));
    }

    #[test]
    fn ot_step_hand_computed() {
        // 1-D N=1, h=1, rho = [1, -1], mu = tau = 0.1, zero start.
        // Step 1: m stays 0 (prox of 0), m_bar = 0, phi = -tau * rho.
        let g = grid1d(1);
        let rho = ScalarField::from_values(&g, vec![1.0, -1.0]).unwrap();
        let cfg = SolverConfig::balanced().with_steps(0.1, 0.1).with_p(FluxNorm::L1);
        let rc = cfg.resolve(&g).unwrap();
        let s1 = pdhg_step_ot(&SolverState::zeros(&g), &rho, &rc);
        assert_eq!(s1.m.values(), &[0.0, 0.0]);
        assert_eq!(s1.phi.values(), &[-0.1, 0.1]);
        assert_eq!(s1.k, 1);
        // Step 2: grad(phi) = [0.2, 0]; trial m = 0.1*0.2 = 0.02 inside the
        // dead zone, so m stays 0 and phi keeps marching: phi = [-0.2, 0.2].
        let s2 = pdhg_step_ot(&s1, &rho, &rc);
        assert_eq!(s2.m.values(), &[0.0, 0.0]);
        assert!((s2.phi.values()[0] + 0.2).abs() < 1e-15);
        assert!((s2.phi.values()[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn uot_step_hand_computed() {
        // Same instance with alpha = 0.1: eta's threshold is alpha*mu = 0.01;
        // eta^1 = prox(0 + mu * 0) = 0 and phi follows the OT value.
        let g = grid1d(1);
        let rho = ScalarField::from_values(&g, vec![1.0, -1.0]).unwrap();
        let cfg = SolverConfig::unbalanced(0.1).with_steps(0.1, 0.1).with_p(FluxNorm::L1);
        let rc = cfg.resolve(&g).unwrap();
        let s1 = pdhg_step_uot(&SolverState::zeros(&g), &rho, &rc).unwrap();
        assert_eq!(s1.m.values(), &[0.0, 0.0]);
        assert_eq!(s1.eta.values(), &[0.0, 0.0]);
        assert_eq!(s1.phi.values(), &[-0.1, 0.1]);
        // Step 2: eta trial = mu * phi = [-0.01, 0.01], exactly on the dead
        // zone edge, so eta stays 0.
        let s2 = pdhg_step_uot(&s1, &rho, &rc).unwrap();
        assert_eq!(s2.eta.values(), &[0.0, 0.0]);
        assert!((s2.phi.values()[0] + 0.2).abs() < 1e-15);
    }

    #[test]
    fn uot_step_rejects_balanced_config() {
        let g = grid1d(1);
        let rho = ScalarField::zeros(&g);
        let rc = SolverConfig::balanced().resolve(&g).unwrap();
        let err = pdhg_step_uot(&SolverState::zeros(&g), &rho, &rc).unwrap_err();
        assert_eq!(err, SolveError::NotUnbalanced);
    }

    #[test]
    fn uot_eta_dead_zone_mechanism() {
        // With eta = 0 and |phi| <= alpha (mu <= 1), the source prox keeps
        // eta at exactly zero.
        let g = grid1d(4);
        let rho = ScalarField::zeros(&g);
        let alpha = 0.7;
        let cfg = SolverConfig::unbalanced(alpha).with_steps(0.05, 0.05);
        let rc = cfg.resolve(&g).unwrap();
        let mut state = SolverState::zeros(&g);
        for (i, v) in state.phi.values_mut().iter_mut().enumerate() {
            *v = alpha * if i % 2 == 0 { 1.0 } else { -1.0 };
        }
        let next = pdhg_step_uot(&state, &rho, &rc).unwrap();
        assert!(next.eta.values().iter().all(|v| v.to_bits() == 0));
    }

    #[test]
    fn zero_instance_stays_zero() {
        let g = Grid::new(2, 1.0, 3).unwrap();
        let rho = ScalarField::zeros(&g);
        let cfg = SolverConfig::balanced();
        let rc = cfg.resolve(&g).unwrap();
        let s1 = pdhg_step_ot(&SolverState::zeros(&g), &rho, &rc);
        assert!(s1.m.values().iter().all(|&v| v == 0.0));
        assert!(s1.phi.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fixed_point_is_stationary() {
        // 1-D N=2 Dirac instance: m* = [1, 1, 0], phi* = [-0.5, 0, 0.5]
        // satisfies the first-order system, so one step must return it
        // unchanged (up to representation error).
        let g = grid1d(2);
        let (r0, r1) = dirac_pair(&g);
        let rho_vals: Vec<f64> = r0
            .values()
            .iter()
            .zip(r1.values())
            .map(|(a, b)| a - b)
            .collect();
        let rho = ScalarField::from_values(&g, rho_vals).unwrap();
        let cfg = SolverConfig::balanced().with_steps(0.1, 0.1).with_p(FluxNorm::L1);
        let rc = cfg.resolve(&g).unwrap();

        let mut state = SolverState::zeros(&g);
        let m_star = FluxField::from_values(&g, vec![1.0, 1.0, 0.0]).unwrap();
        let phi_star = ScalarField::from_values(&g, vec![-0.5, 0.0, 0.5]).unwrap();
        state.m = m_star.clone();
        state.m_bar = m_star.clone();
        state.phi = phi_star.clone();

        let next = pdhg_step_ot(&state, &rho, &rc);
        for (a, b) in next.m.values().iter().zip(m_star.values()) {
            assert!((a - b).abs() <= 1e-12);
        }
        for (a, b) in next.phi.values().iter().zip(phi_star.values()) {
            assert!((a - b).abs() <= 1e-12);
        }
        let gap = primal_dual_gap(&state, &next, &rc);
        assert!(gap.abs() <= 1e-12);
    }

    #[test]
    fn gap_hand_computed() {
        // 2-point grid, h=1: dm = [1, 0], deta = 0, dphi = [0, 1],
        // mu = tau = 0.1. div(dm) = [1, -1]; <dphi, div(dm)>_h = -1.
        // R = 10*1 + 10*1 - 2*(-1) = 22.
        let g = grid1d(1);
        let cfg = SolverConfig::balanced().with_steps(0.1, 0.1);
        let rc = cfg.resolve(&g).unwrap();
        let prev = SolverState::zeros(&g);
        let mut next = SolverState::zeros(&g);
        next.m = FluxField::from_values(&g, vec![1.0, 0.0]).unwrap();
        next.phi = ScalarField::from_values(&g, vec![0.0, 1.0]).unwrap();
        next.k = 1;
        let gap = primal_dual_gap(&prev, &next, &rc);
        assert!((gap - 22.0).abs() < 1e-12);
    }

    #[test]
    fn gap_identical_states_zero() {
        let g = Grid::new(2, 1.0, 2).unwrap();
        let rc = SolverConfig::balanced().resolve(&g).unwrap();
        let s = SolverState::zeros(&g);
        assert_eq!(primal_dual_gap(&s, &s, &rc), 0.0);
    }

    #[test]
    fn gap_nonnegative_under_valid_steps() {
        use rand::{Rng, SeedableRng};
        let g = Grid::new(2, 1.0, 3).unwrap();
        let rc = SolverConfig::unbalanced(0.5).resolve(&g).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let mut prev = SolverState::zeros(&g);
            let mut next = SolverState::zeros(&g);
            for s in [&mut prev, &mut next] {
                let mvals: Vec<f64> =
                    (0..g.num_points() * 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
                s.m = FluxField::from_values(&g, mvals).unwrap();
                for v in s.eta.values_mut() {
                    *v = rng.gen_range(-1.0..1.0);
                }
                for v in s.phi.values_mut() {
                    *v = rng.gen_range(-1.0..1.0);
                }
            }
            assert!(primal_dual_gap(&prev, &next, &rc) >= -1e-12);
        }
    }

    #[test]
    fn solve_identical_densities_is_trivial() {
        let g = Grid::new(2, 1.0, 4).unwrap();
        let rho = ScalarField::from_fn(&g, |x| 1.0 + x[0] + 0.5 * x[1]);
        let sol = solve(&rho, &rho, &SolverConfig::balanced()).unwrap();
        assert!(sol.converged);
        assert!(sol.iters <= 1);
        assert_eq!(sol.objective, 0.0);
        assert!(sol.m.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn solve_dirac_ot_gives_w1() {
        let g = grid1d(8);
        let (r0, r1) = dirac_pair(&g);
        let cfg = SolverConfig::balanced().with_tol(1e-10).with_p(FluxNorm::L1);
        let sol = solve(&r0, &r1, &cfg).unwrap();
        assert!(sol.converged);
        assert!((sol.objective - 1.0).abs() < 1e-4, "objective = {}", sol.objective);
    }

    #[test]
    fn solve_dirac_uot_caps_at_creation_cost() {
        let g = grid1d(8);
        let (r0, r1) = dirac_pair(&g);
        let cfg = SolverConfig::unbalanced(0.3).with_tol(1e-10).with_p(FluxNorm::L1);
        let sol = solve(&r0, &r1, &cfg).unwrap();
        assert!(sol.converged);
        assert!((sol.objective - 0.6).abs() < 1e-4, "objective = {}", sol.objective);
        assert!(sol.m.norm_h2() < 1e-3);
    }

    #[test]
    fn solve_rejects_mass_mismatch_in_balanced_mode() {
        let g = grid1d(4);
        let r0 = ScalarField::from_fn(&g, |_| 1.0);
        let r1 = ScalarField::from_fn(&g, |_| 2.0);
        assert!(matches!(
            solve(&r0, &r1, &SolverConfig::balanced()),
            Err(SolveError::MassMismatch { .. })
        ));
        // Unbalanced mode accepts the same inputs.
        assert!(solve(&r0, &r1, &SolverConfig::unbalanced(0.5)).is_ok());
    }

    #[test]
    fn solve_rejects_non_finite_input() {
        let g = grid1d(2);
        let mut r0 = ScalarField::zeros(&g);
        r0.values_mut()[0] = f64::NAN;
        let r1 = ScalarField::zeros(&g);
        assert!(matches!(
            solve(&r0, &r1, &SolverConfig::unbalanced(1.0)),
            Err(SolveError::NonFiniteInput)
        ));
    }

    #[test]
    fn source_mass_identity() {
        // For a feasible converged solve, sum(eta) h^d ~ (mass1 - mass0).
        let g = grid1d(8);
        let r0 = ScalarField::from_fn(&g, |x| 1.0 + x[0]);
        let r1 = ScalarField::from_fn(&g, |x| 2.0 - x[0]);
        let cfg = SolverConfig::unbalanced(0.4).with_tol(1e-10);
        let sol = solve(&r0, &r1, &cfg).unwrap();
        assert!(sol.converged);
        let expected = r1.mass() - r0.mass();
        assert!(
            (sol.eta.mass() - expected).abs() <= 1e-5 + sol.residual,
            "eta mass {} vs {}",
            sol.eta.mass(),
            expected
        );
    }

    #[test]
    fn history_recording() {
        let g = grid1d(4);
        let (r0, r1) = dirac_pair(&g);
        let cfg = SolverConfig::balanced().with_p(FluxNorm::L1).with_history();
        let sol = solve(&r0, &r1, &cfg).unwrap();
        let hist = sol.history.as_ref().unwrap();
        assert_eq!(hist.len(), sol.iters);
        assert!((hist.last().unwrap().gap - sol.gap).abs() < 1e-15);
    }
}
