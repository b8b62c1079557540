//! Rectangular grids, scalar/flux fields, and the finite-difference
//! divergence/gradient pair with zero-flux boundary conditions.
//!
//! All fields live on the `(N+1)^d` nodes of a box `[0, L_1] x ... x [0, L_d]`
//! with `N` subdivisions per axis. Storage is a flat row-major tensor (last
//! axis fastest) with explicit per-axis strides, so every stencil is written
//! in index arithmetic and the ghost value behind `x_i = 0` is an implicit
//! zero rather than allocated storage.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid dimension must be at least 1")]
    ZeroDimension,
    #[error("grid must have at least one subdivision per axis")]
    ZeroSubdivisions,
    #[error("grid side length must be positive and finite, got {0}")]
    InvalidLength(f64),
    #[error("expected {expected} axis lengths, got {got}")]
    LengthCount { expected: usize, got: usize },
    #[error("grid would have too many points ({points} > {max})")]
    TooManyPoints { points: u128, max: usize },
    #[error("expected {expected} field values, got {got}")]
    ValueCount { expected: usize, got: usize },
    #[error("fields live on different grids")]
    GridMismatch,
}

/// Cap on total grid points; keeps index arithmetic comfortably inside usize.
const MAX_POINTS: usize = 1 << 30;

/// Selects the pointwise norm applied to flux vectors in objectives and
/// proximal steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxNorm {
    /// Componentwise absolute values summed (anisotropic).
    L1,
    /// Euclidean norm of the d-vector (isotropic).
    L2,
}

impl FluxNorm {
    pub fn from_p(p: u32) -> Option<Self> {
        match p {
            1 => Some(FluxNorm::L1),
            2 => Some(FluxNorm::L2),
            _ => None,
        }
    }
}

/// Descriptor of a uniform node-centered mesh on a rectangular box.
///
/// Each axis `i` spans `[0, L_i]` with `N` subdivisions, so nodes sit at
/// `j * L_i / N` for `j = 0..=N`. The default constructor takes a single side
/// length for all axes; per-axis lengths are supported as a generalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    subdivisions: usize,
    lengths: Vec<f64>,
}

impl Grid {
    /// Uniform box `[0, length]^dim` with `subdivisions` cells per axis.
    pub fn new(dim: usize, length: f64, subdivisions: usize) -> Result<Self, GridError> {
        if dim == 0 {
            return Err(GridError::ZeroDimension);
        }
        Self::with_lengths(&vec![length; dim], subdivisions)
    }

    /// Box with a separate side length per axis (same subdivision count).
    pub fn with_lengths(lengths: &[f64], subdivisions: usize) -> Result<Self, GridError> {
        if lengths.is_empty() {
            return Err(GridError::ZeroDimension);
        }
        if subdivisions == 0 {
            return Err(GridError::ZeroSubdivisions);
        }
        for &l in lengths {
            if !(l.is_finite() && l > 0.0) {
                return Err(GridError::InvalidLength(l));
            }
        }
        let dim = lengths.len();
        let per_axis = subdivisions as u128 + 1;
        let mut points: u128 = 1;
        for _ in 0..dim {
            points = points.saturating_mul(per_axis);
            if points > MAX_POINTS as u128 {
                return Err(GridError::TooManyPoints { points, max: MAX_POINTS });
            }
        }
        Ok(Grid { dim, subdivisions, lengths: lengths.to_vec() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of cells per axis (the paper's `N`).
    pub fn subdivisions(&self) -> usize {
        self.subdivisions
    }

    /// Number of nodes per axis, `N + 1`.
    pub fn points_per_axis(&self) -> usize {
        self.subdivisions + 1
    }

    /// Total node count `(N + 1)^d`.
    pub fn num_points(&self) -> usize {
        self.points_per_axis().pow(self.dim as u32)
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.lengths[axis]
    }

    /// Node spacing along `axis`, `h_i = L_i / N` (derived, never stored).
    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.subdivisions as f64
    }

    /// Volume weight of one cell, `prod_i h_i` (equals `h^d` on uniform boxes).
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|i| self.spacing(i)).product()
    }

    /// Flat-index stride of `axis`; the last axis varies fastest.
    pub fn stride(&self, axis: usize) -> usize {
        self.points_per_axis().pow((self.dim - 1 - axis) as u32)
    }

    /// Per-axis node index of the flat `point` index.
    pub fn axis_index(&self, point: usize, axis: usize) -> usize {
        (point / self.stride(axis)) % self.points_per_axis()
    }

    /// Flat index of a node from its per-axis indices.
    pub fn index_of(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.dim);
        coords
            .iter()
            .enumerate()
            .map(|(axis, &c)| c * self.stride(axis))
            .sum()
    }

    /// True when `point` sits on the outflow face `x_axis = L_axis`.
    pub fn is_upper_boundary(&self, point: usize, axis: usize) -> bool {
        self.axis_index(point, axis) == self.subdivisions
    }

    /// Upper bound for `||div_h||^2`: each axis contributes at most `4 / h_i^2`
    /// (the 1-D second-difference spectral bound), so the total is `4d / h^2`
    /// on uniform boxes. `with_source` adds 1 for the `[div_h, -I]` block.
    pub fn operator_norm_bound(&self, with_source: bool) -> f64 {
        let mut bound = 0.0;
        for axis in 0..self.dim {
            let h = self.spacing(axis);
            bound += 4.0 / (h * h);
        }
        if with_source {
            bound += 1.0;
        }
        bound
    }

    /// Visits every 1-D line of nodes along `axis`, yielding the flat index of
    /// the line's first node; nodes then follow at multiples of `stride(axis)`.
    pub(crate) fn for_each_line(&self, axis: usize, mut f: impl FnMut(usize)) {
        let stride = self.stride(axis);
        let block = stride * self.points_per_axis();
        let total = self.num_points();
        let mut base = 0;
        while base < total {
            for offset in 0..stride {
                f(base + offset);
            }
            base += block;
        }
    }
}

/// Real values on every grid node; holds densities, sources, and potentials.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        ScalarField { grid: grid.clone(), values: vec![0.0; grid.num_points()] }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.num_points() {
            return Err(GridError::ValueCount { expected: grid.num_points(), got: values.len() });
        }
        Ok(ScalarField { grid: grid.clone(), values })
    }

    /// Evaluates `f` at every node (given per-axis physical coordinates).
    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let dim = grid.dim();
        let mut coords = vec![0.0_f64; dim];
        let values = (0..grid.num_points())
            .map(|p| {
                for (axis, c) in coords.iter_mut().enumerate() {
                    *c = grid.axis_index(p, axis) as f64 * grid.spacing(axis);
                }
                f(&coords)
            })
            .collect();
        ScalarField { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Weighted inner product `<a, b>_h = sum_x a(x) b(x) h^d`.
    pub fn inner_h(&self, other: &Self) -> f64 {
        assert_eq!(self.grid, other.grid, "inner_h: fields live on different grids");
        let dot: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        dot * self.grid.cell_volume()
    }

    /// Weighted norm `||a||_{h,2} = sqrt(<a, a>_h)`.
    pub fn norm_h2(&self) -> f64 {
        self.inner_h(self).sqrt()
    }

    /// Signed mass `sum_x a(x) h^d`.
    pub fn mass(&self) -> f64 {
        let s: f64 = self.values.iter().sum();
        s * self.grid.cell_volume()
    }

    /// Absolute mass `sum_x |a(x)| h^d`; the source objective is `alpha` times this.
    pub fn abs_mass(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.abs()).sum();
        s * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Discrete gradient: forward differences `(u(x + h e_i) - u(x)) / h_i`,
    /// zero on the face `x_i = L_i`. Satisfies `(div_h)^* = -grad_h` exactly.
    pub fn gradient(&self) -> FluxField {
        let mut out = FluxField::zeros(&self.grid);
        self.gradient_into(&mut out);
        out
    }

    /// Allocation-free gradient into an existing flux buffer on the same grid.
    pub(crate) fn gradient_into(&self, out: &mut FluxField) {
        let grid = &self.grid;
        debug_assert_eq!(grid, &out.grid);
        let dim = grid.dim();
        let np = grid.points_per_axis();
        let n = grid.subdivisions();
        for axis in 0..dim {
            let stride = grid.stride(axis);
            let inv_h = 1.0 / grid.spacing(axis);
            grid.for_each_line(axis, |base| {
                for j in 0..np {
                    let p = base + j * stride;
                    out.values[p * dim + axis] = if j < n {
                        (self.values[p + stride] - self.values[p]) * inv_h
                    } else {
                        0.0
                    };
                }
            });
        }
    }
}

/// A `d`-vector per grid node (the discrete flux), stored interleaved as
/// `values[point * d + axis]`.
///
/// Structural invariant: component `i` vanishes on the face `x_i = L_i`
/// (zero-flux boundary). Constructors and setters enforce it; writes that
/// would violate it are dropped and counted.
#[derive(Debug, Clone)]
pub struct FluxField {
    grid: Grid,
    values: Vec<f64>,
    ignored_boundary_writes: u64,
}

impl FluxField {
    pub fn zeros(grid: &Grid) -> Self {
        FluxField {
            grid: grid.clone(),
            values: vec![0.0; grid.num_points() * grid.dim()],
            ignored_boundary_writes: 0,
        }
    }

    /// Builds a flux from raw interleaved values. Entries on outflow faces are
    /// forced to zero; the number of nonzero entries dropped this way is
    /// reported by [`ignored_boundary_writes`](Self::ignored_boundary_writes).
    pub fn from_values(grid: &Grid, mut values: Vec<f64>) -> Result<Self, GridError> {
        let expected = grid.num_points() * grid.dim();
        if values.len() != expected {
            return Err(GridError::ValueCount { expected, got: values.len() });
        }
        let mut dropped = 0;
        let dim = grid.dim();
        for p in 0..grid.num_points() {
            for axis in 0..dim {
                if grid.is_upper_boundary(p, axis) && values[p * dim + axis] != 0.0 {
                    values[p * dim + axis] = 0.0;
                    dropped += 1;
                }
            }
        }
        Ok(FluxField { grid: grid.clone(), values, ignored_boundary_writes: dropped })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Raw mutable access for kernels whose arithmetic preserves the boundary
    /// invariant (zeros in, zeros out). Not public.
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn component(&self, point: usize, axis: usize) -> f64 {
        self.values[point * self.grid.dim() + axis]
    }

    /// Sets one component. On an outflow face this is a no-op recorded in the
    /// diagnostic counter, keeping the boundary invariant intact.
    pub fn set_component(&mut self, point: usize, axis: usize, value: f64) {
        if self.grid.is_upper_boundary(point, axis) {
            if value != 0.0 {
                self.ignored_boundary_writes += 1;
            }
            return;
        }
        self.values[point * self.grid.dim() + axis] = value;
    }

    /// How many nonzero boundary writes have been dropped on this field.
    pub fn ignored_boundary_writes(&self) -> u64 {
        self.ignored_boundary_writes
    }

    /// Checks the structural invariant directly (used by tests).
    pub fn boundary_invariant_holds(&self) -> bool {
        let dim = self.grid.dim();
        (0..self.grid.num_points()).all(|p| {
            (0..dim).all(|axis| {
                !self.grid.is_upper_boundary(p, axis) || self.values[p * dim + axis] == 0.0
            })
        })
    }

    /// Discrete divergence `div_h(m) = sum_i D_{h,i} m` with the three-case
    /// stencil: `m_i(x)/h` at `x_i = 0` (ghost value zero behind the
    /// boundary), backward difference in the interior, and
    /// `-m_i(x - h e_i)/h` at `x_i = L` where the component itself vanishes.
    pub fn divergence(&self) -> ScalarField {
        let mut out = ScalarField::zeros(&self.grid);
        self.divergence_into(&mut out);
        out
    }

    /// Allocation-free divergence into an existing scalar buffer.
    pub(crate) fn divergence_into(&self, out: &mut ScalarField) {
        let grid = &self.grid;
        debug_assert_eq!(grid, &out.grid);
        let dim = grid.dim();
        let np = grid.points_per_axis();
        out.values.fill(0.0);
        for axis in 0..dim {
            let stride = grid.stride(axis);
            let inv_h = 1.0 / grid.spacing(axis);
            grid.for_each_line(axis, |base| {
                let mut behind = 0.0; // ghost value at x_i = -h
                for j in 0..np {
                    let p = base + j * stride;
                    let cur = self.values[p * dim + axis];
                    out.values[p] += (cur - behind) * inv_h;
                    behind = cur;
                }
            });
        }
    }

    /// Weighted inner product; flux vectors are dotted pointwise.
    pub fn inner_h(&self, other: &Self) -> f64 {
        assert_eq!(self.grid, other.grid, "inner_h: fields live on different grids");
        let dot: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        dot * self.grid.cell_volume()
    }

    pub fn norm_h2(&self) -> f64 {
        self.inner_h(self).sqrt()
    }

    /// Transport objective `f(m) = sum_x |m(x)|_p h^d`.
    pub fn objective(&self, p: FluxNorm) -> f64 {
        let dim = self.grid.dim();
        let total: f64 = self
            .values
            .chunks_exact(dim)
            .map(|v| match p {
                FluxNorm::L1 => v.iter().map(|c| c.abs()).sum::<f64>(),
                FluxNorm::L2 => v.iter().map(|c| c * c).sum::<f64>().sqrt(),
            })
            .sum();
        total * self.grid.cell_volume()
    }
}
