//! Subcommand implementations.

pub mod color_transfer;
pub mod mesh_study;
pub mod oracle_check;
pub mod solve;
pub mod sweep_alpha;

use std::path::{Path, PathBuf};

use buot::grid::{FluxNorm, Grid, ScalarField};
use buot::imaging::{load_density, read_pnm};
use buot::pdhg::SolverConfig;
use clap::Args;

use crate::config::ConfigFile;
use crate::error::CliError;
use crate::manifest::{digest_descriptor, digest_file, InputDigest};

/// Flags shared by every subcommand.
#[derive(Debug, Args, Clone)]
pub struct CommonOpts {
    /// Source-term weight; omit (or pass `inf`) together with --ot for
    /// balanced transport.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Balanced mode (no source term).
    #[arg(long)]
    pub ot: bool,
    /// Pointwise flux norm: 1 or 2.
    #[arg(long)]
    pub p: Option<u32>,
    /// Primal-dual gap threshold.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration cap.
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
    /// Primal step size (derived from the operator-norm bound when unset).
    #[arg(long)]
    pub mu: Option<f64>,
    /// Dual step size.
    #[arg(long)]
    pub tau: Option<f64>,
    /// RNG seed (used by oracle-check).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for result files.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// key=value configuration file (flags take precedence).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Fully resolved solver options after applying config-file fallbacks.
#[derive(Debug, Clone)]
pub struct ResolvedCommon {
    pub alpha: f64,
    pub p: FluxNorm,
    pub tol: f64,
    pub max_iters: usize,
    pub mu: Option<f64>,
    pub tau: Option<f64>,
    pub seed: u64,
    pub out: PathBuf,
}

impl CommonOpts {
    pub fn resolve(&self, cfg: &ConfigFile, require_alpha: bool) -> Result<ResolvedCommon, CliError> {
        let alpha = if self.ot {
            f64::INFINITY
        } else {
            match cfg.resolve_opt(self.alpha, "alpha")? {
                Some(a) => a,
                None if require_alpha => {
                    return Err(CliError::Validation(
                        "either --alpha or --ot is required".into(),
                    ))
                }
                None => f64::INFINITY,
            }
        };
        let p_raw = cfg.resolve(self.p, "p", 2u32)?;
        let p = FluxNorm::from_p(p_raw)
            .ok_or_else(|| CliError::Validation(format!("unsupported p = {p_raw}; use 1 or 2")))?;
        Ok(ResolvedCommon {
            alpha,
            p,
            tol: cfg.resolve(self.tol, "tol", 1e-6)?,
            max_iters: cfg.resolve(self.max_iters, "max_iters", 300_000)?,
            mu: cfg.resolve_opt(self.mu, "mu")?,
            tau: cfg.resolve_opt(self.tau, "tau")?,
            seed: cfg.resolve(self.seed, "seed", 20240601u64)?,
            out: cfg.resolve(self.out.clone(), "out", PathBuf::from("buot-out"))?,
        })
    }
}

impl ResolvedCommon {
    pub fn solver_config(&self) -> SolverConfig {
        let mut sc = SolverConfig::unbalanced(self.alpha)
            .with_p(self.p)
            .with_tol(self.tol)
            .with_max_iters(self.max_iters);
        sc.mu = self.mu;
        sc.tau = self.tau;
        sc
    }

    pub fn config_json(&self) -> serde_json::Value {
        serde_json::json!({
            "alpha": if self.alpha.is_finite() { serde_json::json!(self.alpha) } else { serde_json::json!("inf") },
            "p": match self.p { FluxNorm::L1 => 1, FluxNorm::L2 => 2 },
            "tol": self.tol,
            "max_iters": self.max_iters,
            "mu": self.mu,
            "tau": self.tau,
            "seed": self.seed,
        })
    }
}

/// Density inputs: either a pair of grayscale images or a named generator.
#[derive(Debug, Args, Clone)]
pub struct InputOpts {
    /// First density as a PGM image (requires --rho1).
    #[arg(long)]
    pub rho0: Option<PathBuf>,
    /// Second density as a PGM image.
    #[arg(long)]
    pub rho1: Option<PathBuf>,
    /// Built-in generator: diracs1d, gaussians2d, disks2d.
    #[arg(long)]
    pub generator: Option<String>,
    /// Grid subdivisions for generators.
    #[arg(long)]
    pub n: Option<usize>,
    /// Physical side length for image inputs.
    #[arg(long)]
    pub length: Option<f64>,
    /// Scale the second density's mass by this factor after loading.
    #[arg(long)]
    pub mass1: Option<f64>,
}

pub struct LoadedInputs {
    pub rho0: ScalarField,
    pub rho1: ScalarField,
    pub digests: Vec<InputDigest>,
    pub descriptor: String,
}

/// Reads one grayscale image onto the grid implied by its size.
fn load_image_density(path: &Path, length: f64) -> Result<(ScalarField, InputDigest), CliError> {
    let img = read_pnm(path).map_err(buot::imaging::ImagingError::from)?;
    if img.width() != img.height() {
        return Err(CliError::Validation(format!(
            "{}: density images must be square, got {}x{}",
            path.display(),
            img.width(),
            img.height()
        )));
    }
    if img.width() < 2 {
        return Err(CliError::Validation(format!(
            "{}: image too small for a grid",
            path.display()
        )));
    }
    let grid = Grid::new(2, length, img.width() - 1)?;
    let rho = load_density(&img, &grid)?;
    Ok((rho, digest_file(path)?))
}

impl InputOpts {
    pub fn load(&self, cfg: &ConfigFile) -> Result<LoadedInputs, CliError> {
        let generator = cfg.resolve_opt(self.generator.clone(), "generator")?;
        let n = cfg.resolve(self.n, "n", 32usize)?;
        let length = cfg.resolve(self.length, "length", 1.0f64)?;
        let mass1 = cfg.resolve_opt(self.mass1, "mass1")?;

        let mut loaded = match (&generator, &self.rho0, &self.rho1) {
            (Some(name), None, None) => {
                let pair = buot::generators::by_name(name, n).ok_or_else(|| {
                    CliError::Validation(format!(
                        "unknown generator {name:?}; expected diracs1d, gaussians2d, or disks2d"
                    ))
                })??;
                let descriptor = format!("generator:{name}:n={n}");
                LoadedInputs {
                    rho0: pair.0,
                    rho1: pair.1,
                    digests: vec![digest_descriptor("generator", &descriptor)],
                    descriptor,
                }
            }
            (None, Some(p0), Some(p1)) => {
                let (rho0, d0) = load_image_density(p0, length)?;
                let (rho1, d1) = load_image_density(p1, length)?;
                if rho0.grid() != rho1.grid() {
                    return Err(CliError::Validation(
                        "input images have different sizes".into(),
                    ));
                }
                LoadedInputs {
                    rho0,
                    rho1,
                    digests: vec![d0, d1],
                    descriptor: format!("files:{},{}", p0.display(), p1.display()),
                }
            }
            _ => {
                return Err(CliError::Validation(
                    "provide either --generator or both --rho0 and --rho1".into(),
                ))
            }
        };

        if let Some(scale) = mass1 {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(CliError::Validation(format!(
                    "--mass1 must be positive, got {scale}"
                )));
            }
            for v in loaded.rho1.values_mut() {
                *v *= scale;
            }
            loaded.descriptor.push_str(&format!(":mass1={scale}"));
        }
        Ok(loaded)
    }
}

/// Comma-separated float list flag value.
pub fn parse_list(raw: &[f64], name: &str) -> Result<Vec<f64>, CliError> {
    if raw.is_empty() {
        return Err(CliError::Validation(format!("--{name} needs at least one value")));
    }
    Ok(raw.to_vec())
}
