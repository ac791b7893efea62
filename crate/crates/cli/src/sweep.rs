use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use fixwing_core::{BaselineKind, ScenarioConfig, Scheme};
use rayon::prelude::*;

use crate::error::{io_err, CliError};
use crate::plot;
use crate::run::{execute, write_outputs, ConfigSource};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepParam {
    #[value(name = "T")]
    Period,
    #[value(name = "Pmax")]
    PowerMax,
    #[value(name = "K")]
    Users,
    #[value(name = "Ve")]
    GroupSpeed,
    #[value(name = "scheme")]
    Scheme,
    #[value(name = "baseline")]
    Baseline,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Period => "T",
            SweepParam::PowerMax => "Pmax",
            SweepParam::Users => "K",
            SweepParam::GroupSpeed => "Ve",
            SweepParam::Scheme => "scheme",
            SweepParam::Baseline => "baseline",
        }
    }
}

/// A parameter, its values and the repetitions per value.
#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub parameter: SweepParam,
    pub values: Vec<String>,
    pub repetitions: usize,
}

pub fn parse_scheme(s: &str) -> Result<Scheme, CliError> {
    match s {
        "I" | "1" => Ok(Scheme::I),
        "II" | "2" => Ok(Scheme::II),
        "III" | "3" => Ok(Scheme::III),
        _ => Err(CliError::Usage(format!(
            "unknown scheme {s:?}, expected I, II or III"
        ))),
    }
}

pub fn parse_baseline(s: &str) -> Result<BaselineKind, CliError> {
    match s.to_ascii_lowercase().as_str() {
        "optimized" => Ok(BaselineKind::Optimized),
        "circular600" => Ok(BaselineKind::Circular600),
        "straight" => Ok(BaselineKind::Straight),
        _ => Err(CliError::Usage(format!(
            "unknown baseline {s:?}, expected optimized, circular600 or straight"
        ))),
    }
}

struct Job {
    point: usize,
    dir: std::path::PathBuf,
    config: ScenarioConfig,
    scheme: Scheme,
    baseline: BaselineKind,
}

/// Outcome of one sweep value.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: String,
    pub etas: Vec<f64>,
    pub failures: Vec<String>,
}

impl SweepRow {
    pub fn mean(&self) -> Option<f64> {
        (!self.etas.is_empty()).then(|| self.etas.iter().sum::<f64>() / self.etas.len() as f64)
    }
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn sweep_csv(parameter: &str, rows: &[SweepRow]) -> String {
    let mut s = plot::SWEEP_HEADER.join(",");
    s.push('\n');
    for row in rows {
        let min = row.etas.iter().cloned().reduce(f64::min);
        let max = row.etas.iter().cloned().reduce(f64::max);
        let status = if row.failures.is_empty() {
            "ok".to_string()
        } else {
            let first = row.failures[0].replace([',', '\n'], ";");
            format!("{} failed: {first}", row.failures.len())
        };
        let _ = writeln!(
            s,
            "{parameter},{},{},{},{},{},{status}",
            row.value,
            cell(row.mean()),
            cell(min),
            cell(max),
            row.etas.len()
        );
    }
    s
}

/// Runs every value and repetition, one output directory per point.
/// Seeds are the base seed plus the repetition index.
pub fn cmd_sweep(
    source: &ConfigSource,
    spec: &SweepSpec,
    out: &Path,
    jobs: usize,
) -> Result<Vec<SweepRow>, CliError> {
    if spec.values.is_empty() {
        return Err(CliError::Usage("the sweep needs at least one value".into()));
    }
    if spec.repetitions == 0 {
        return Err(CliError::Usage("repetitions must be at least 1".into()));
    }
    let base_seed = source.load_with(&[])?.seed;
    let mut plan = Vec::new();
    for (point, value) in spec.values.iter().enumerate() {
        let (mut scheme, mut baseline) = (Scheme::I, BaselineKind::Optimized);
        let mut extra = Vec::new();
        match spec.parameter {
            SweepParam::Scheme => scheme = parse_scheme(value)?,
            SweepParam::Baseline => baseline = parse_baseline(value)?,
            p => extra.push((p.name().to_string(), value.clone())),
        }
        for rep in 0..spec.repetitions {
            let mut with_seed = extra.clone();
            with_seed.push((
                "seed".into(),
                base_seed.wrapping_add(rep as u64).to_string(),
            ));
            let config = source.load_with(&with_seed)?;
            let dir = out
                .join(format!("{}_{}", spec.parameter.name(), value))
                .join(format!("rep{rep}"));
            plan.push(Job {
                point,
                dir,
                config,
                scheme,
                baseline,
            });
        }
    }

    fs::create_dir_all(out).map_err(io_err("create", out))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<Result<f64, CliError>> = pool.install(|| {
        plan.par_iter()
            .map(|job| {
                let result = execute(&job.config, job.scheme, job.baseline)?;
                write_outputs(&job.dir, &job.config, &result)?;
                Ok(result.eta_final)
            })
            .collect()
    });

    let mut rows: Vec<SweepRow> = spec
        .values
        .iter()
        .map(|v| SweepRow {
            value: v.clone(),
            etas: Vec::new(),
            failures: Vec::new(),
        })
        .collect();
    for (job, outcome) in plan.iter().zip(outcomes) {
        match outcome {
            Ok(eta) => rows[job.point].etas.push(eta),
            Err(e) => rows[job.point].failures.push(e.to_string()),
        }
    }
    let path = out.join("sweep.csv");
    fs::write(&path, sweep_csv(spec.parameter.name(), &rows)).map_err(io_err("write", &path))?;
    plot::sweep(out)?;
    if rows.iter().all(|r| r.etas.is_empty()) {
        return Err(CliError::SweepFailed);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failures_are_counted_without_breaking_the_row() {
        let rows = [
            SweepRow {
                value: "1".into(),
                etas: vec![1.0, 3.0],
                failures: vec![],
            },
            SweepRow {
                value: "2".into(),
                etas: vec![],
                failures: vec!["bad, really\nbad".into()],
            },
        ];
        let csv = sweep_csv("Pmax", &rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[1], "Pmax,1,2,1,3,2,ok");
        assert_eq!(lines[2], "Pmax,2,,,,0,1 failed: bad; really;bad");
    }

    #[test]
    fn names_parse() {
        assert_eq!(parse_scheme("II").unwrap(), Scheme::II);
        assert!(parse_scheme("IV").is_err());
        assert_eq!(
            parse_baseline("Circular600").unwrap(),
            BaselineKind::Circular600
        );
        assert!(parse_baseline("spiral").is_err());
    }
}
