//! Configuration, run orchestration and result files for the `hphdg`
//! command line tool.

pub mod config;
pub mod output;

use std::fs;
use std::path::Path;

use hphdg::adapt::{adapt, AdaptConfig, AdaptResult, Criterion};
use hphdg::audit::{flux_oracle, verify_assumptions, AuditReport, FluxOracleReport};
use hphdg::friedrichs::System;
use hphdg::hdg::AssemblyOptions;
use hphdg::mesh::Mesh;
use hphdg::problems::{Problem, ProblemId, ProblemParams};
use hphdg::skeleton::Skeleton;

pub use config::{parse_config, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] hphdg::HdgError),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("assumption audit failed: {0}")]
    Audit(String),
}

pub fn read_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    parse_config(&text)
}

pub struct Prepared {
    pub problem: Problem,
    pub mesh: Mesh,
}

pub fn prepare(config: &RunConfig) -> Result<Prepared, CliError> {
    let problem = Problem::new(config.problem, &config.params)?;
    let mut mesh = problem.initial_mesh(config.nx, config.ny, config.p0)?;
    mesh.set_degree_bounds(config.p_min, config.p_max)?;
    Ok(Prepared { problem, mesh })
}

pub fn audit(config: &RunConfig) -> Result<AuditReport, CliError> {
    let prep = prepare(config)?;
    let skeleton = Skeleton::build(&prep.mesh)?;
    Ok(verify_assumptions(&prep.problem.system, &prep.mesh, &skeleton, config.strict)?)
}

pub struct RunOutcome {
    pub result: AdaptResult,
    pub audit: AuditReport,
}

/// Audits the system, runs the adaptive loop and writes the result files
/// into the configured output directory.
pub fn run(config: &RunConfig) -> Result<RunOutcome, CliError> {
    let prep = prepare(config)?;
    let skeleton = Skeleton::build(&prep.mesh)?;
    let audit = verify_assumptions(&prep.problem.system, &prep.mesh, &skeleton, config.strict)?;
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.display().to_string(), source })?;
    output::write_audit(&dir.join("audit.txt"), &audit)?;
    let functional = if config.functional == config.problem {
        prep.problem.functional.clone()
    } else {
        Problem::new(config.functional, &config.params)?.functional
    };
    let adapt_config = AdaptConfig {
        criterion: config.criterion,
        omega: config.omega,
        max_cycles: config.max_cycles,
        options: AssemblyOptions { quad_increment: config.quad_increment, strict: config.strict },
        functional: Some(functional),
    };
    let exact = prep.problem.exact.clone();
    let exact_ref = exact.as_ref().map(|u| u.as_ref() as &(dyn Fn(&hphdg::mesh::Point) -> f64 + Sync));
    let result = adapt(prep.mesh, &prep.problem.system, exact_ref, &adapt_config, |_| {})?;
    output::write_history(&dir.join("history.csv"), &result.history, config.criterion == Criterion::Adjoint)?;
    let skeleton = Skeleton::build(&result.mesh)?;
    output::write_mesh(&dir.join("mesh.json"), &result.mesh, &skeleton)?;
    let disc = hphdg::hdg::Discretization::new(&result.mesh, &skeleton, &prep.problem.system, 0, adapt_config.options)?;
    output::write_solution(&dir.join("solution.json"), &disc, &result.solution, result.status)?;
    Ok(RunOutcome { result, audit })
}

/// Two-field system registered under a name for the flux oracle.
pub fn oracle_system(name: &str) -> Result<(System, [f64; 4], Box<dyn Fn(&hphdg::mesh::Point) -> u32>), CliError> {
    let params = ProblemParams::default();
    let id = match name.to_ascii_lowercase().as_str() {
        "elliptic" | "e1" => ProblemId::E1,
        "e2" => ProblemId::E2,
        "e3" => ProblemId::E3,
        "convection-diffusion" | "hb1" => ProblemId::Hb1,
        other => return Err(CliError::Config(format!("no two-field system named '{other}'"))),
    };
    let p = Problem::new(id, &params)?;
    let region = p.region.clone();
    Ok((p.system, p.domain, Box::new(move |x| region(x))))
}

pub fn flux_check(name: &str, samples: usize, seed: u64) -> Result<FluxOracleReport, CliError> {
    let (system, domain, region) = oracle_system(name)?;
    match &system {
        System::TwoField(s) => Ok(flux_oracle(s, domain, region, samples, seed)?),
        System::OneField(_) => Err(CliError::Config(format!("'{name}' is not a two-field system"))),
    }
}
