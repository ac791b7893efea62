use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use fixwing_core::{
    run_baseline_trajectory, run_scheme, BaselineKind, RunResult, ScenarioConfig, Scheme,
    TrajectorySamples,
};
use serde_json::json;

use crate::error::{io_err, CliError};
use crate::plot;

/// Scenario options shared by `run` and `sweep`.
#[derive(Clone, Debug, Default)]
pub struct ConfigSource {
    pub path: Option<PathBuf>,
    pub overrides: Vec<(String, String)>,
    pub seed: Option<u64>,
}

impl ConfigSource {
    pub fn load_with(&self, extra: &[(String, String)]) -> Result<ScenarioConfig, CliError> {
        let text = match &self.path {
            Some(p) => fs::read_to_string(p).map_err(io_err("read config", p))?,
            None => String::new(),
        };
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(("seed".into(), seed.to_string()));
        }
        overrides.extend_from_slice(extra);
        Ok(ScenarioConfig::parse_with_overrides(&text, &overrides)?)
    }
}

pub fn parse_override(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(format!("expected key=value, got {s:?}")),
    }
}

pub fn execute(
    config: &ScenarioConfig,
    scheme: Scheme,
    baseline: BaselineKind,
) -> Result<RunResult, CliError> {
    let result = match (scheme, baseline) {
        (_, BaselineKind::Optimized) => run_scheme(config, scheme)?,
        (Scheme::I, kind) => run_baseline_trajectory(config, kind)?,
        _ => {
            return Err(CliError::Usage(
                "schemes II and III only run on the optimized trajectory".into(),
            ))
        }
    };
    Ok(result)
}

fn units() -> serde_json::Value {
    json!({
        "eta_final": "bit/s",
        "eta_initial": "bit/s",
        "per_user_throughput": "bit/s",
        "alpha": "fraction of slot",
        "b": "Hz",
        "p": "W",
        "v_final": "m/s",
        "uav": "m",
        "trace.wallclock_s": "s",
    })
}

fn dual_trace_csv(r: &RunResult) -> String {
    let mut s = String::from("outer,inner,mu,beta,xi,varpi\n");
    for row in &r.dual_trace {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            row.outer, row.inner, row.mu, row.beta, row.xi, row.varpi
        );
    }
    s
}

fn sca_trace_csv(r: &RunResult) -> String {
    let mut s = String::from("iteration,objective\n");
    for row in &r.sca_trace {
        let _ = writeln!(s, "{},{}", row.iteration, row.objective);
    }
    s
}

/// Writes every artefact of one run into `dir`, creating it.
pub fn write_outputs(
    dir: &Path,
    config: &ScenarioConfig,
    result: &RunResult,
) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err("create", dir))?;
    let put = |name: &str, text: &str| {
        let path = dir.join(name);
        fs::write(&path, text).map_err(io_err("write", &path))
    };
    let doc = json!({ "config": config, "units": units(), "result": result });
    put(
        "result.json",
        &serde_json::to_string_pretty(&doc).expect("plain data serialises"),
    )?;
    put("trace.csv", &result.trace_csv())?;
    let samples = TrajectorySamples {
        positions: result.uav.clone(),
        speed: result.v_final,
    };
    put("trajectory.csv", &samples.to_csv())?;
    if let Some(track) = &result.track {
        put("tracks.csv", &track.to_csv())?;
    }
    if let Some(plan) = &result.plan {
        put("plan.json", &plan.summary_json())?;
    }
    put("dual_trace.csv", &dual_trace_csv(result))?;
    put("sca_trace.csv", &sca_trace_csv(result))?;
    plot::convergence(dir)?;
    if result.track.is_some() {
        plot::trajectory(dir)?;
    }
    Ok(())
}

pub fn cmd_run(
    source: &ConfigSource,
    out: &Path,
    scheme: Scheme,
    baseline: BaselineKind,
) -> Result<RunResult, CliError> {
    let config = source.load_with(&[])?;
    let result = execute(&config, scheme, baseline)?;
    write_outputs(out, &config, &result)?;
    Ok(result)
}
