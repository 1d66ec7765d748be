//! Run configuration read from TOML.

use std::path::PathBuf;

use serde::Deserialize;

use hphdg::adapt::Criterion;
use hphdg::problems::{ProblemId, ProblemParams};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMesh {
    nx: Option<usize>,
    ny: Option<usize>,
    p0: Option<usize>,
    p_min: Option<usize>,
    p_max: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: String,
    criterion: Option<String>,
    omega: Option<f64>,
    max_cycles: Option<usize>,
    strict: Option<bool>,
    output_dir: Option<PathBuf>,
    functional: Option<String>,
    quad_increment: Option<usize>,
    epsilon: Option<f64>,
    kappa_scale: Option<f64>,
    anisotropy: Option<f64>,
    series_terms: Option<usize>,
    mesh: Option<RawMesh>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: ProblemId,
    pub params: ProblemParams,
    pub nx: usize,
    pub ny: usize,
    pub p0: usize,
    pub p_min: usize,
    pub p_max: usize,
    pub criterion: Criterion,
    pub omega: f64,
    pub max_cycles: usize,
    pub quad_increment: usize,
    pub strict: bool,
    pub output_dir: PathBuf,
    /// Problem whose output functional drives adjoint runs.
    pub functional: ProblemId,
}

pub const DEFAULT_OMEGA: f64 = 0.01;
pub const DEFAULT_P0: usize = 2;
pub const DEFAULT_MAX_CYCLES: usize = 20;

fn line_of(text: &str, key: &str) -> usize {
    text.lines()
        .position(|l| {
            let t = l.trim_start();
            t.strip_prefix(key).is_some_and(|r| r.trim_start().starts_with('='))
        })
        .map_or(0, |i| i + 1)
}

fn functional_kind(s: &str) -> Result<ProblemId, String> {
    match s {
        "e1_boundary_sum" => Ok(ProblemId::E1),
        "e2_sinusoidal_boundary" => Ok(ProblemId::E2),
        "e3_left_boundary" => Ok(ProblemId::E3),
        "hp1_outflow_sinusoidal" => Ok(ProblemId::Hp1),
        "hb1_right_boundary" => Ok(ProblemId::Hb1),
        _ => Err(format!("unknown functional '{s}'")),
    }
}

/// Parses and validates a configuration, filling defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))?;
    let err = |key: &str, msg: String| CliError::Config(format!("line {}: {key}: {msg}", line_of(text, key)));
    let problem = ProblemId::parse(&raw.problem).map_err(|e| err("problem", e.to_string()))?;
    let criterion = match raw.criterion.as_deref().unwrap_or("dolejsi") {
        "dolejsi" => Criterion::Dolejsi,
        "adjoint" => Criterion::Adjoint,
        other => return Err(err("criterion", format!("expected 'dolejsi' or 'adjoint', got '{other}'"))),
    };
    let omega = raw.omega.unwrap_or(DEFAULT_OMEGA);
    if !(0.0..=1.0).contains(&omega) {
        return Err(err("omega", format!("{omega} is outside [0, 1]")));
    }
    let defaults = ProblemParams::default();
    let params = ProblemParams {
        kappa_scale: raw.kappa_scale.unwrap_or(defaults.kappa_scale),
        epsilon: raw.epsilon.unwrap_or(defaults.epsilon),
        series_terms: raw.series_terms.unwrap_or(defaults.series_terms),
        anisotropy: raw.anisotropy.unwrap_or(defaults.anisotropy),
    };
    if !(params.epsilon > 0.0) {
        return Err(err("epsilon", "must be positive".into()));
    }
    if !(params.kappa_scale > 0.0) {
        return Err(err("kappa_scale", "must be positive".into()));
    }
    if !(params.anisotropy >= 1.0) {
        return Err(err("anisotropy", "must be at least 1".into()));
    }
    if params.series_terms == 0 {
        return Err(err("series_terms", "must be positive".into()));
    }
    let mesh = raw.mesh.unwrap_or(RawMesh { nx: None, ny: None, p0: None, p_min: None, p_max: None });
    let nx = mesh.nx.unwrap_or(4);
    let ny = mesh.ny.unwrap_or(4);
    if nx == 0 || ny == 0 {
        return Err(err(if nx == 0 { "nx" } else { "ny" }, "must be positive".into()));
    }
    let p_min = mesh.p_min.unwrap_or(hphdg::mesh::DEFAULT_P_MIN);
    let p_max = mesh.p_max.unwrap_or(hphdg::mesh::DEFAULT_P_MAX);
    let p0 = mesh.p0.unwrap_or(DEFAULT_P0);
    if p_min == 0 || p_min > p_max {
        return Err(err("p_min", format!("need 1 <= p_min <= p_max, got {p_min} and {p_max}")));
    }
    if p_max > hphdg::mesh::DEFAULT_P_MAX + 4 {
        return Err(err("p_max", format!("{p_max} exceeds the supported maximum {}", hphdg::mesh::DEFAULT_P_MAX + 4)));
    }
    if !(p_min..=p_max).contains(&p0) {
        return Err(err("p0", format!("{p0} is outside [{p_min}, {p_max}]")));
    }
    let functional = match raw.functional.as_deref() {
        None => problem,
        Some(s) => functional_kind(s).map_err(|m| err("functional", m))?,
    };
    Ok(RunConfig {
        problem,
        params,
        nx,
        ny,
        p0,
        p_min,
        p_max,
        criterion,
        omega,
        max_cycles: raw.max_cycles.unwrap_or(DEFAULT_MAX_CYCLES),
        quad_increment: raw.quad_increment.unwrap_or(0),
        strict: raw.strict.unwrap_or(false),
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
        functional,
    })
}
