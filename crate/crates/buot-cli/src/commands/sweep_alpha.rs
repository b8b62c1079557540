//! `buot sweep-alpha`: solve the unbalanced problem across an alpha grid,
//! compare each solution against one balanced solve with the same step
//! sizes, and tabulate the differences.

use buot::pdhg::{compare_solutions, solve, SolverConfig};
use clap::Args;

use super::{CommonOpts, InputOpts};
use crate::config::ConfigFile;
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::output::{ensure_out_dir, fmt_f64, CsvTable, SummaryWriter};
use crate::parallel::{run_indexed, thread_cap};

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonOpts,
    #[command(flatten)]
    pub inputs: InputOpts,
    /// Alpha values to sweep.
    #[arg(long, value_delimiter = ',', required = true)]
    pub alphas: Vec<f64>,
}

pub fn run(args: &SweepArgs) -> Result<(), CliError> {
    let cfg_file = ConfigFile::load(args.common.config.as_deref())?;
    let common = args.common.resolve(&cfg_file, false)?;
    let inputs = args.inputs.load(&cfg_file)?;
    let out_dir = ensure_out_dir(&common.out)?;
    let alphas = super::parse_list(&args.alphas, "alphas")?;

    // The iterate-reduction comparison only makes sense when the balanced
    // and unbalanced runs share mu and tau, so resolve the steps once
    // against the unbalanced operator bound and pin them for every solve.
    let grid = inputs.rho0.grid().clone();
    let probe = {
        let mut sc = SolverConfig::unbalanced(1.0);
        sc.mu = common.mu;
        sc.tau = common.tau;
        sc.resolve(&grid)?
    };
    let make_config = |alpha: f64| -> SolverConfig {
        SolverConfig::unbalanced(alpha)
            .with_p(common.p)
            .with_tol(common.tol)
            .with_max_iters(common.max_iters)
            .with_steps(probe.mu, probe.tau)
    };

    let ot = solve(&inputs.rho0, &inputs.rho1, &make_config(f64::INFINITY))?;

    let results = run_indexed(alphas.len(), thread_cap(), |i| {
        solve(&inputs.rho0, &inputs.rho1, &make_config(alphas[i]))
    });

    let mut manifest_cfg = common.config_json();
    manifest_cfg["alphas"] = serde_json::json!(alphas);
    manifest_cfg["mu_resolved"] = serde_json::json!(probe.mu);
    manifest_cfg["tau_resolved"] = serde_json::json!(probe.tau);
    manifest_cfg["inputs"] = serde_json::json!(inputs.descriptor);
    RunManifest::new("sweep-alpha", manifest_cfg, inputs.digests).write(&out_dir)?;

    let mut table = CsvTable::new(&["alpha", "m_dif", "eta_dif", "objective", "iters", "converged"]);
    let mut summary = SummaryWriter::new(&out_dir);
    let mut all_converged = ot.converged;
    for (alpha, result) in alphas.iter().zip(results) {
        let uot = result?;
        let diff = compare_solutions(&uot, &ot)?;
        all_converged &= uot.converged;
        table.row(&[
            fmt_f64(*alpha),
            fmt_f64(diff.m_dif),
            fmt_f64(diff.eta_dif),
            fmt_f64(uot.objective),
            uot.iters.to_string(),
            uot.converged.to_string(),
        ]);
        summary.record(serde_json::json!({
            "record": "sweep_row",
            "alpha": alpha,
            "m_dif": diff.m_dif,
            "eta_dif": diff.eta_dif,
            "objective": uot.objective,
            "gap": uot.gap,
            "residual": uot.residual,
            "iters": uot.iters,
            "converged": uot.converged,
        }));
        println!(
            "alpha {}  m_dif {:e}  eta_dif {:e}  objective {}  iters {}",
            alpha, diff.m_dif, diff.eta_dif, uot.objective, uot.iters
        );
    }
    summary.record(serde_json::json!({
        "record": "ot_reference",
        "objective": ot.objective,
        "iters": ot.iters,
        "converged": ot.converged,
    }));
    table.write(&out_dir.join("sweep.csv"))?;
    summary.write()?;

    if !all_converged {
        return Err(CliError::NonConvergence(
            "one or more sweep solves hit the iteration cap".into(),
        ));
    }
    Ok(())
}
