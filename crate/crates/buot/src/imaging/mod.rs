//! Application layer: density ingestion from images and the histogram
//! color-transfer pipeline.
//!
//! Color transfer works per chromaticity channel. Both images are taken to
//! CIE-Lab, the a/b planes are normalized into `[0, 1]`, binned into
//! per-channel histograms, and a 1-D transport problem is solved between
//! them. The optimal flux induces a velocity field
//! `v(t; x) = m*(x) / (t rho1(x) + (1 - t) rho0(x) + eps)` which is
//! integrated by forward Euler to move every pixel's channel value; the
//! luminance plane is never touched.

pub mod color;
pub mod netpbm;

use thiserror::Error;

pub use color::{lab_to_rgb, rgb_to_lab, LabNormalization, LabPlanes};
pub use netpbm::{
    decode_pnm, encode_pnm, encode_pnm_with_comment, read_pnm, write_pnm,
    write_pnm_with_comment, PnmError,
};

use crate::grid::{FluxField, FluxNorm, Grid, GridError, ScalarField};
use crate::pdhg::{solve, SolveError, Solution, SolverConfig};

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("expected a {expected}-channel image, got {got} channels")]
    ChannelCount { expected: u8, got: u8 },
    #[error("image is {got_w}x{got_h} but the grid needs {want}x{want} samples")]
    DimensionMismatch { got_w: usize, got_h: usize, want: usize },
    #[error("density grid must be 2-D, got dimension {0}")]
    NotTwoDimensional(usize),
    #[error("transport grid must be 1-D with unit length")]
    NotUnitInterval,
    #[error("image has zero total intensity")]
    ZeroMass,
    #[error("histogram needs at least 2 bins, got {0}")]
    BadBins(usize),
    #[error("no values to bin")]
    EmptyValues,
    #[error("sample buffer holds {got} bytes, expected {expected}")]
    SampleCount { expected: usize, got: usize },
    #[error("image dimensions must be positive")]
    EmptyImage,
    #[error("channel count must be 1 or 3, got {0}")]
    BadChannels(u8),
    #[error("perturbation epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("transport needs at least one Euler step")]
    ZeroSteps,
    #[error(transparent)]
    Pnm(#[from] PnmError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// 8-bit raster image, row-major, samples interleaved per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: u8,
    samples: Vec<u8>,
}

impl RasterImage {
    pub fn new(
        width: usize,
        height: usize,
        channels: u8,
        samples: Vec<u8>,
    ) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyImage);
        }
        if channels != 1 && channels != 3 {
            return Err(ImagingError::BadChannels(channels));
        }
        let expected = width * height * channels as usize;
        if samples.len() != expected {
            return Err(ImagingError::SampleCount { expected, got: samples.len() });
        }
        Ok(RasterImage { width, height, channels, samples })
    }

    pub fn grayscale(width: usize, height: usize, samples: Vec<u8>) -> Result<Self, ImagingError> {
        Self::new(width, height, 1, samples)
    }

    pub fn rgb(width: usize, height: usize, samples: Vec<u8>) -> Result<Self, ImagingError> {
        Self::new(width, height, 3, samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }
}

/// Reads a grayscale image as a nonnegative density on a 2-D grid,
/// normalized to unit mass. The image must already match the grid's
/// `(N+1) x (N+1)` nodes; no implicit resampling.
pub fn load_density(img: &RasterImage, grid: &Grid) -> Result<ScalarField, ImagingError> {
    if img.channels() != 1 {
        return Err(ImagingError::ChannelCount { expected: 1, got: img.channels() });
    }
    if grid.dim() != 2 {
        return Err(ImagingError::NotTwoDimensional(grid.dim()));
    }
    let want = grid.points_per_axis();
    if img.width() != want || img.height() != want {
        return Err(ImagingError::DimensionMismatch {
            got_w: img.width(),
            got_h: img.height(),
            want,
        });
    }
    let total: f64 = img.samples().iter().map(|&v| v as f64).sum();
    if total == 0.0 {
        return Err(ImagingError::ZeroMass);
    }
    let scale = 1.0 / (total * grid.cell_volume());
    let values: Vec<f64> = img.samples().iter().map(|&v| v as f64 * scale).collect();
    Ok(ScalarField::from_values(grid, values)?)
}

/// Unit-mass 1-D histogram on the `bins`-point grid with spacing
/// `h = 1 / (bins - 1)`; bin centers sit on the grid nodes.
#[derive(Debug, Clone)]
pub struct Histogram1D {
    density: ScalarField,
    out_of_range: usize,
}

impl Histogram1D {
    pub fn density(&self) -> &ScalarField {
        &self.density
    }

    pub fn bins(&self) -> usize {
        self.density.grid().points_per_axis()
    }

    /// How many input values fell outside `[0, 1]` and were clamped.
    pub fn out_of_range(&self) -> usize {
        self.out_of_range
    }
}

/// Hard-assigns values in `[0, 1]` to the nearest of `bins` node-centered
/// bins, then normalizes to unit mass. Out-of-range values are clamped and
/// counted.
pub fn channel_histogram(values: &[f64], bins: usize) -> Result<Histogram1D, ImagingError> {
    if bins < 2 {
        return Err(ImagingError::BadBins(bins));
    }
    if values.is_empty() {
        return Err(ImagingError::EmptyValues);
    }
    let grid = Grid::new(1, 1.0, bins - 1)?;
    let mut counts = vec![0.0_f64; bins];
    let mut out_of_range = 0;
    for &v in values {
        if !(0.0..=1.0).contains(&v) {
            out_of_range += 1;
        }
        let clamped = v.clamp(0.0, 1.0);
        let idx = (clamped * (bins - 1) as f64).round() as usize;
        counts[idx.min(bins - 1)] += 1.0;
    }
    let h = grid.spacing(0);
    let total: f64 = counts.iter().sum();
    let scale = 1.0 / (total * h);
    for c in &mut counts {
        *c *= scale;
    }
    Ok(Histogram1D {
        density: ScalarField::from_values(&grid, counts)?,
        out_of_range,
    })
}

/// `W_1` between two unit-mass 1-D densities on the same grid, via the
/// integrated absolute CDF difference.
pub fn wasserstein1_1d(p: &ScalarField, q: &ScalarField) -> f64 {
    assert_eq!(p.grid(), q.grid(), "wasserstein1_1d: different grids");
    assert_eq!(p.grid().dim(), 1, "wasserstein1_1d: needs 1-D densities");
    let h = p.grid().spacing(0);
    let mut cdf_p = 0.0;
    let mut cdf_q = 0.0;
    let mut total = 0.0;
    for (a, b) in p.values().iter().zip(q.values()) {
        cdf_p += a * h;
        cdf_q += b * h;
        total += (cdf_p - cdf_q).abs() * h;
    }
    total
}

/// A solved 1-D transport problem packaged for pixel advection: the optimal
/// flux and source, both endpoint densities, the density floor `epsilon`,
/// and the Euler step count.
#[derive(Debug, Clone)]
pub struct TransportMap1D {
    flux: FluxField,
    source: ScalarField,
    rho0: ScalarField,
    rho1: ScalarField,
    epsilon: f64,
    steps: usize,
}

impl TransportMap1D {
    pub fn new(
        solution: &Solution,
        rho0: &ScalarField,
        rho1: &ScalarField,
        epsilon: f64,
        steps: usize,
    ) -> Result<Self, ImagingError> {
        let grid = solution.m.grid();
        if grid.dim() != 1 || (grid.length(0) - 1.0).abs() > 1e-12 {
            return Err(ImagingError::NotUnitInterval);
        }
        if rho0.grid() != grid || rho1.grid() != grid {
            return Err(ImagingError::Solve(SolveError::GridMismatch));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(ImagingError::BadEpsilon(epsilon));
        }
        if steps == 0 {
            return Err(ImagingError::ZeroSteps);
        }
        Ok(TransportMap1D {
            flux: solution.m.clone(),
            source: solution.eta.clone(),
            rho0: rho0.clone(),
            rho1: rho1.clone(),
            epsilon,
            steps,
        })
    }

    pub fn flux(&self) -> &FluxField {
        &self.flux
    }

    pub fn source(&self) -> &ScalarField {
        &self.source
    }
}

/// Piecewise-linear interpolation of node values at `x` in `[0, 1]`,
/// constant beyond the ends.
fn lerp_nodes(values: &[f64], n: usize, h: f64, x: f64) -> f64 {
    let u = (x / h).clamp(0.0, n as f64);
    let i = (u.floor() as usize).min(n - 1);
    let frac = u - i as f64;
    values[i] + frac * (values[i + 1] - values[i])
}

/// Moves each value along the velocity field
/// `v_eps(t; x) = m*(x) / ((1 - t) rho0(x) + t rho1(x) + eps)`
/// by forward Euler with `steps` increments of `dt = 1 / steps`, clamping to
/// `[0, 1]`. Flux and densities are evaluated by linear interpolation
/// between the histogram nodes.
pub fn transport_values(values: &[f64], map: &TransportMap1D) -> Vec<f64> {
    let grid = map.rho0.grid();
    let n = grid.subdivisions();
    let h = grid.spacing(0);
    let dt = 1.0 / map.steps as f64;
    // 1-D flux is stored contiguously (one component per node).
    let flux = map.flux.values();
    values
        .iter()
        .map(|&start| {
            let mut x = start.clamp(0.0, 1.0);
            for k in 1..=map.steps {
                let t = (k - 1) as f64 * dt;
                let density = (1.0 - t) * lerp_nodes(map.rho0.values(), n, h, x)
                    + t * lerp_nodes(map.rho1.values(), n, h, x);
                let velocity = lerp_nodes(flux, n, h, x) / (density + map.epsilon);
                x = (x + dt * velocity).clamp(0.0, 1.0);
            }
            x
        })
        .collect()
}

/// Which image's pixels move (and therefore which histogram is the
/// transport's starting density `rho0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferDirection {
    /// Recolor the target image toward the source palette: `rho0` is the
    /// target histogram, `rho1` the source histogram.
    TargetToSource,
    /// Recolor the source image toward the target palette.
    SourceToTarget,
}

#[derive(Debug, Clone)]
pub struct ColorTransferConfig {
    pub bins: usize,
    pub epsilon: f64,
    pub steps: usize,
    pub direction: TransferDirection,
    pub p: FluxNorm,
    pub tol: f64,
    pub max_iters: usize,
    pub mu: Option<f64>,
    pub tau: Option<f64>,
}

impl Default for ColorTransferConfig {
    fn default() -> Self {
        ColorTransferConfig {
            bins: 32,
            epsilon: 1e-6,
            steps: 64,
            direction: TransferDirection::TargetToSource,
            p: FluxNorm::L2,
            tol: 1e-6,
            max_iters: 300_000,
            mu: None,
            tau: None,
        }
    }
}

/// Per-channel transfer diagnostics: `W_1` from the moving histogram to the
/// destination histogram before and after transport, plus solver stats.
#[derive(Debug, Clone, Copy)]
pub struct ChannelReport {
    pub w1_initial: f64,
    pub w1_final: f64,
    pub iters: usize,
    pub gap: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct ColorTransferOutput {
    pub image: RasterImage,
    /// Transported planes; `l` is carried over bitwise from the moving image.
    pub planes: LabPlanes,
    pub channel_a: ChannelReport,
    pub channel_b: ChannelReport,
}

fn transfer_channel(
    moving: &[f64],
    dest: &[f64],
    alpha: f64,
    cfg: &ColorTransferConfig,
) -> Result<(Vec<f64>, ChannelReport), ImagingError> {
    let hist0 = channel_histogram(moving, cfg.bins)?;
    let hist1 = channel_histogram(dest, cfg.bins)?;

    let mut solver = SolverConfig::unbalanced(alpha)
        .with_p(cfg.p)
        .with_tol(cfg.tol)
        .with_max_iters(cfg.max_iters);
    solver.mu = cfg.mu;
    solver.tau = cfg.tau;

    let solution = solve(hist0.density(), hist1.density(), &solver)?;
    let map = TransportMap1D::new(&solution, hist0.density(), hist1.density(), cfg.epsilon, cfg.steps)?;
    let transported = transport_values(moving, &map);

    let after = channel_histogram(&transported, cfg.bins)?;
    let report = ChannelReport {
        w1_initial: wasserstein1_1d(hist0.density(), hist1.density()),
        w1_final: wasserstein1_1d(after.density(), hist1.density()),
        iters: solution.iters,
        gap: solution.gap,
        converged: solution.converged,
    };
    Ok((transported, report))
}

/// Full color transfer: Lab conversion, per-channel histogram transport of
/// the a and b planes, reassembly under the destination image's
/// normalization, with the moving image's luminance plane untouched.
///
/// `alpha = +inf` runs the balanced problem per channel (full transfer).
pub fn color_transfer(
    src: &RasterImage,
    tgt: &RasterImage,
    alpha: f64,
    cfg: &ColorTransferConfig,
) -> Result<ColorTransferOutput, ImagingError> {
    let src_planes = rgb_to_lab(src)?;
    let tgt_planes = rgb_to_lab(tgt)?;
    let (moving, dest) = match cfg.direction {
        TransferDirection::TargetToSource => (tgt_planes, src_planes),
        TransferDirection::SourceToTarget => (src_planes, tgt_planes),
    };

    let (new_a, channel_a) = transfer_channel(&moving.a, &dest.a, alpha, cfg)?;
    let (new_b, channel_b) = transfer_channel(&moving.b, &dest.b, alpha, cfg)?;

    let planes = LabPlanes {
        width: moving.width,
        height: moving.height,
        l: moving.l,
        a: new_a,
        b: new_b,
        norm: dest.norm,
    };
    let image = lab_to_rgb(&planes);
    Ok(ColorTransferOutput { image, planes, channel_a, channel_b })
}
