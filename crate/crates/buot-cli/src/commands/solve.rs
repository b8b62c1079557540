//! `buot solve`: one transport solve, summary record, optional field dumps.

use buot::pdhg::solve;
use clap::Args;

use super::{CommonOpts, InputOpts};
use crate::config::ConfigFile;
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::output::{ensure_out_dir, fmt_f64, CsvTable, SummaryWriter};

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonOpts,
    #[command(flatten)]
    pub inputs: InputOpts,
    /// Also write the flux and source fields as CSV.
    #[arg(long = "dump-fields")]
    pub dump_fields: bool,
}

pub fn run(args: &SolveArgs) -> Result<(), CliError> {
    let cfg_file = ConfigFile::load(args.common.config.as_deref())?;
    let common = args.common.resolve(&cfg_file, true)?;
    let inputs = args.inputs.load(&cfg_file)?;
    let out_dir = ensure_out_dir(&common.out)?;

    let solution = solve(&inputs.rho0, &inputs.rho1, &common.solver_config())?;

    let mut manifest_cfg = common.config_json();
    manifest_cfg["inputs"] = serde_json::json!(inputs.descriptor);
    manifest_cfg["dump_fields"] = serde_json::json!(args.dump_fields);
    RunManifest::new("solve", manifest_cfg, inputs.digests).write(&out_dir)?;

    let mut summary = SummaryWriter::new(&out_dir);
    summary.record(serde_json::json!({
        "record": "solution",
        "objective": solution.objective,
        "gap": solution.gap,
        "residual": solution.residual,
        "iters": solution.iters,
        "converged": solution.converged,
        "mass0": inputs.rho0.mass(),
        "mass1": inputs.rho1.mass(),
        "eta_mass": solution.eta.mass(),
    }));
    summary.write()?;

    if args.dump_fields {
        dump_fields(&solution, &out_dir)?;
    }

    println!(
        "objective {}  gap {:e}  residual {:e}  iters {}  converged {}",
        solution.objective, solution.gap, solution.residual, solution.iters, solution.converged
    );

    if !solution.converged {
        return Err(CliError::NonConvergence(format!(
            "gap {:e} above tolerance {:e} after {} iterations",
            solution.gap, common.tol, solution.iters
        )));
    }
    Ok(())
}

fn dump_fields(solution: &buot::Solution, out_dir: &std::path::Path) -> Result<(), CliError> {
    let grid = solution.m.grid();
    let dim = grid.dim();

    let mut cols: Vec<String> = vec!["point".into()];
    cols.extend((0..dim).map(|a| format!("x{a}")));
    cols.extend((0..dim).map(|a| format!("m{a}")));
    let cols_ref: Vec<&str> = cols.iter().map(|s| s.as_str()).collect();
    let mut flux = CsvTable::new(&cols_ref);
    for p in 0..grid.num_points() {
        let mut row = vec![p.to_string()];
        for axis in 0..dim {
            row.push(fmt_f64(grid.axis_index(p, axis) as f64 * grid.spacing(axis)));
        }
        for axis in 0..dim {
            row.push(fmt_f64(solution.m.component(p, axis)));
        }
        flux.row(&row);
    }
    flux.write(&out_dir.join("flux.csv"))?;

    let mut cols: Vec<String> = vec!["point".into()];
    cols.extend((0..dim).map(|a| format!("x{a}")));
    cols.push("eta".into());
    cols.push("phi".into());
    let cols_ref: Vec<&str> = cols.iter().map(|s| s.as_str()).collect();
    let mut source = CsvTable::new(&cols_ref);
    for p in 0..grid.num_points() {
        let mut row = vec![p.to_string()];
        for axis in 0..dim {
            row.push(fmt_f64(grid.axis_index(p, axis) as f64 * grid.spacing(axis)));
        }
        row.push(fmt_f64(solution.eta.values()[p]));
        row.push(fmt_f64(solution.phi.values()[p]));
        source.row(&row);
    }
    source.write(&out_dir.join("source.csv"))?;
    Ok(())
}
