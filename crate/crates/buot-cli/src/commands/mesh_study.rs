//! `buot mesh-study`: the source-norm-versus-mesh table. For each alpha and
//! each grid size, solve the unbalanced problem on the same underlying
//! shapes rasterized at that size and report `||eta*||_{h,2}`.

use std::path::PathBuf;

use buot::grid::{Grid, ScalarField};
use buot::imaging::load_density;
use buot::pdhg::{solve, SolverConfig};
use clap::Args;

use super::CommonOpts;
use crate::config::ConfigFile;
use crate::error::CliError;
use crate::manifest::{digest_descriptor, RunManifest};
use crate::output::{ensure_out_dir, fmt_f64, CsvTable, SummaryWriter};
use crate::parallel::{run_indexed, thread_cap};

#[derive(Debug, Args)]
pub struct MeshStudyArgs {
    #[command(flatten)]
    pub common: CommonOpts,
    /// Alpha values (table rows).
    #[arg(long, value_delimiter = ',', required = true)]
    pub alphas: Vec<f64>,
    /// Grid sizes N (table columns).
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    /// Generator rasterized at every size: gaussians2d or disks2d.
    #[arg(long)]
    pub generator: Option<String>,
    /// Image path templates containing `{N}`, rasterized per size.
    #[arg(long)]
    pub rho0: Option<PathBuf>,
    #[arg(long)]
    pub rho1: Option<PathBuf>,
}

fn densities_for(
    args: &MeshStudyArgs,
    generator: &Option<String>,
    n: usize,
) -> Result<(ScalarField, ScalarField), CliError> {
    if let Some(name) = generator {
        return Ok(buot::generators::by_name(name, n).ok_or_else(|| {
            CliError::Validation(format!("unknown generator {name:?}"))
        })??);
    }
    let (Some(t0), Some(t1)) = (&args.rho0, &args.rho1) else {
        return Err(CliError::Validation(
            "provide --generator or both --rho0/--rho1 templates containing {N}".into(),
        ));
    };
    let substitute = |t: &PathBuf| PathBuf::from(t.display().to_string().replace("{N}", &n.to_string()));
    let load = |path: PathBuf| -> Result<ScalarField, CliError> {
        let img = buot::imaging::read_pnm(&path).map_err(buot::imaging::ImagingError::from)?;
        let grid = Grid::new(2, 1.0, img.width().max(2) - 1)?;
        Ok(load_density(&img, &grid)?)
    };
    let rho0 = load(substitute(t0))?;
    let rho1 = load(substitute(t1))?;
    if rho0.grid().subdivisions() != n || rho1.grid().subdivisions() != n {
        return Err(CliError::Validation(format!(
            "image templates for N={n} produced a different grid size"
        )));
    }
    Ok((rho0, rho1))
}

pub fn run(args: &MeshStudyArgs) -> Result<(), CliError> {
    let cfg_file = ConfigFile::load(args.common.config.as_deref())?;
    let common = args.common.resolve(&cfg_file, false)?;
    let out_dir = ensure_out_dir(&common.out)?;
    let alphas = super::parse_list(&args.alphas, "alphas")?;
    if args.sizes.is_empty() {
        return Err(CliError::Validation("--sizes needs at least one value".into()));
    }
    let generator = cfg_file.resolve_opt(args.generator.clone(), "generator")?
        .or(Some("gaussians2d".to_string()))
        .filter(|_| args.rho0.is_none());

    // One task per (alpha, N) cell, flattened row-major over alphas x sizes.
    let cells: Vec<(f64, usize)> = alphas
        .iter()
        .flat_map(|&a| args.sizes.iter().map(move |&n| (a, n)))
        .collect();
    let results = run_indexed(cells.len(), thread_cap(), |i| {
        let (alpha, n) = cells[i];
        let (rho0, rho1) = densities_for(args, &generator, n)?;
        let sc = SolverConfig::unbalanced(alpha)
            .with_p(common.p)
            .with_tol(common.tol)
            .with_max_iters(common.max_iters);
        let sol = solve(&rho0, &rho1, &sc)?;
        Ok::<_, CliError>((sol.eta.norm_h2(), sol.iters, sol.converged))
    });

    let descriptor = format!(
        "mesh-study:{}:sizes={:?}",
        generator.as_deref().unwrap_or("files"),
        args.sizes
    );
    let mut manifest_cfg = common.config_json();
    manifest_cfg["alphas"] = serde_json::json!(alphas);
    manifest_cfg["sizes"] = serde_json::json!(args.sizes);
    manifest_cfg["generator"] = serde_json::json!(generator);
    RunManifest::new(
        "mesh-study",
        manifest_cfg,
        vec![digest_descriptor("inputs", &descriptor)],
    )
    .write(&out_dir)?;

    let mut columns: Vec<String> = vec!["alpha".into()];
    columns.extend(args.sizes.iter().map(|n| format!("N{n}")));
    let cols_ref: Vec<&str> = columns.iter().map(|s| s.as_str()).collect();
    let mut table = CsvTable::new(&cols_ref);
    let mut summary = SummaryWriter::new(&out_dir);
    let mut all_converged = true;

    let mut it = results.into_iter();
    for &alpha in &alphas {
        let mut row = vec![fmt_f64(alpha)];
        for &n in &args.sizes {
            let (eta_dif, iters, converged) = it.next().expect("one result per cell")?;
            all_converged &= converged;
            row.push(fmt_f64(eta_dif));
            summary.record(serde_json::json!({
                "record": "mesh_cell",
                "alpha": alpha,
                "n": n,
                "eta_dif": eta_dif,
                "iters": iters,
                "converged": converged,
            }));
            println!("alpha {alpha}  N {n}  eta_dif {eta_dif:e}  iters {iters}");
        }
        table.row(&row);
    }
    table.write(&out_dir.join("mesh_study.csv"))?;
    summary.write()?;

    if !all_converged {
        return Err(CliError::NonConvergence(
            "one or more mesh-study solves hit the iteration cap".into(),
        ));
    }
    Ok(())
}
