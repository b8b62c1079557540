//! `buot oracle-check`: the randomized PDHG-versus-LP equivalence suite.

use buot::oracle::{oracle_suite, SuiteConfig};
use clap::Args;

use super::CommonOpts;
use crate::config::ConfigFile;
use crate::error::CliError;
use crate::manifest::{digest_descriptor, RunManifest};
use crate::output::{ensure_out_dir, fmt_f64, CsvTable, SummaryWriter};

#[derive(Debug, Args)]
pub struct OracleCheckArgs {
    #[command(flatten)]
    pub common: CommonOpts,
    /// Random instances per dimension family.
    #[arg(long)]
    pub cases: Option<usize>,
    /// Largest 1-D grid size drawn.
    #[arg(long = "max-n")]
    pub max_n: Option<usize>,
    /// Restrict to one dimension family: 1, 2, or both.
    #[arg(long, default_value = "both")]
    pub dims: String,
    /// Alpha grid; `inf` entries run balanced mode.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
}

pub fn run(args: &OracleCheckArgs) -> Result<(), CliError> {
    let cfg_file = ConfigFile::load(args.common.config.as_deref())?;
    let common = args.common.resolve(&cfg_file, false)?;
    let out_dir = ensure_out_dir(&common.out)?;

    let mut suite = SuiteConfig {
        seed: common.seed,
        ..SuiteConfig::default()
    };
    if let Some(cases) = cfg_file.resolve_opt(args.cases, "cases")? {
        suite.cases_1d = cases;
        suite.cases_2d = cases.div_ceil(2);
        suite.mismatched_cases = cases.div_ceil(4);
    }
    if let Some(max_n) = cfg_file.resolve_opt(args.max_n, "max_n")? {
        suite.max_n_1d = max_n.max(2);
    }
    match args.dims.as_str() {
        "1" => suite.cases_2d = 0,
        "2" => {
            suite.cases_1d = 0;
            suite.mismatched_cases = 0;
        }
        "both" => {}
        other => {
            return Err(CliError::Validation(format!(
                "--dims must be 1, 2, or both, got {other:?}"
            )))
        }
    }
    if let Some(alphas) = &args.alphas {
        suite.alphas = alphas.clone();
    }
    if args.common.tol.is_some() {
        suite.tol = common.tol;
    }

    let mut manifest_cfg = common.config_json();
    manifest_cfg["cases_1d"] = serde_json::json!(suite.cases_1d);
    manifest_cfg["cases_2d"] = serde_json::json!(suite.cases_2d);
    manifest_cfg["mismatched_cases"] = serde_json::json!(suite.mismatched_cases);
    manifest_cfg["max_n_1d"] = serde_json::json!(suite.max_n_1d);
    manifest_cfg["max_n_2d"] = serde_json::json!(suite.max_n_2d);
    manifest_cfg["suite_tol"] = serde_json::json!(suite.tol);
    let descriptor = format!("oracle-suite:seed={}", suite.seed);
    RunManifest::new(
        "oracle-check",
        manifest_cfg,
        vec![digest_descriptor("suite", &descriptor)],
    )
    .write(&out_dir)?;

    let report = oracle_suite(&suite)?;

    let mut table = CsvTable::new(&[
        "label",
        "alpha",
        "lp_objective",
        "pdhg_objective",
        "relative_gap",
        "pdhg_residual",
        "lp_residual",
        "iters",
        "passed",
    ]);
    let mut summary = SummaryWriter::new(&out_dir);
    for case in &report.cases {
        let alpha_label =
            if case.alpha.is_finite() { fmt_f64(case.alpha) } else { "inf".to_string() };
        table.row(&[
            case.label.clone(),
            alpha_label,
            fmt_f64(case.lp_objective),
            fmt_f64(case.pdhg_objective),
            fmt_f64(case.relative_gap),
            fmt_f64(case.pdhg_residual),
            fmt_f64(case.lp_residual),
            case.pdhg_iters.to_string(),
            case.passed.to_string(),
        ]);
        println!(
            "{} {}  lp {}  pdhg {}  rel {:e}  residual {:e}",
            if case.passed { "PASS" } else { "FAIL" },
            case.label,
            case.lp_objective,
            case.pdhg_objective,
            case.relative_gap,
            case.pdhg_residual
        );
    }
    summary.record(serde_json::json!({
        "record": "oracle_report",
        "cases": report.cases.len(),
        "passed": report.passed,
        "seed": suite.seed,
    }));
    table.write(&out_dir.join("report.csv"))?;
    summary.write()?;

    println!(
        "oracle-check: {}/{} cases passed",
        report.cases.iter().filter(|c| c.passed).count(),
        report.cases.len()
    );
    if !report.passed {
        return Err(CliError::NonConvergence(
            "oracle equivalence failed on at least one instance".into(),
        ));
    }
    Ok(())
}
