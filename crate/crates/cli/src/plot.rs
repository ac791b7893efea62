//! SVG charts as pure functions of the CSV files in a result directory.

use std::fs;
use std::path::{Path, PathBuf};

use crate::csv::{numeric, Table};
use crate::error::{io_err, CliError};
use crate::svg::{render, Chart, Series};

pub const TRACE_HEADER: [&str; 5] = ["l", "eta_sched", "eta_res", "eta_traj", "v"];
pub const TRAJECTORY_HEADER: [&str; 3] = ["n", "x", "y"];
pub const TRACKS_HEADER: [&str; 4] = ["k", "n", "x", "y"];
pub const SWEEP_HEADER: [&str; 7] = [
    "parameter",
    "value",
    "mean_eta",
    "min_eta",
    "max_eta",
    "succeeded",
    "status",
];

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(io_err("write", path))
}

pub fn convergence(dir: &Path) -> Result<PathBuf, CliError> {
    let cols = numeric(&dir.join("trace.csv"), &TRACE_HEADER)?;
    let mbit = |c: &Vec<f64>| {
        cols[0]
            .iter()
            .zip(c)
            .map(|(&l, &e)| (l, e / 1e6))
            .collect::<Vec<_>>()
    };
    let series = [
        Series::line("after scheduling", mbit(&cols[1])).with_markers(),
        Series::line("after resources", mbit(&cols[2])).with_markers(),
        Series::line("after trajectory", mbit(&cols[3])).with_markers(),
    ];
    let chart = Chart {
        title: "Max-min average throughput per iteration",
        x_label: "outer iteration",
        y_label: "eta (Mbit/s)",
        equal_axes: false,
        x_categories: None,
    };
    let out = dir.join("convergence.svg");
    write(&out, &render(&chart, &series))?;
    Ok(out)
}

pub fn trajectory(dir: &Path) -> Result<PathBuf, CliError> {
    let uav = numeric(&dir.join("trajectory.csv"), &TRAJECTORY_HEADER)?;
    let tracks_path = dir.join("tracks.csv");
    if !tracks_path.is_file() {
        return Err(CliError::Csv {
            path: tracks_path,
            message: "missing user tracks for the trajectory plot".into(),
        });
    }
    let tracks = numeric(&tracks_path, &TRACKS_HEADER)?;
    let mut users: Vec<Vec<(f64, f64)>> = Vec::new();
    for i in 0..tracks[0].len() {
        let k = tracks[0][i];
        if !(k >= 0.0 && k.fract() == 0.0) {
            return Err(CliError::Csv {
                path: tracks_path,
                message: format!("row {}: bad user index {k}", i + 1),
            });
        }
        let k = k as usize;
        if users.len() <= k {
            users.resize(k + 1, Vec::new());
        }
        users[k].push((tracks[2][i], tracks[3][i]));
    }
    let mut series = vec![Series::line(
        "UAV",
        uav[1].iter().copied().zip(uav[2].iter().copied()).collect(),
    )
    .coloured("#000000")];
    for (k, pts) in users.into_iter().enumerate() {
        series.push(Series::line(format!("user {k}"), pts));
    }
    let chart = Chart {
        title: "UAV trajectory and user tracks",
        x_label: "x (m)",
        y_label: "y (m)",
        equal_axes: true,
        x_categories: None,
    };
    let out = dir.join("trajectory.svg");
    write(&out, &render(&chart, &series))?;
    Ok(out)
}

pub fn sweep(dir: &Path) -> Result<PathBuf, CliError> {
    let path = dir.join("sweep.csv");
    let table = Table::read(&path, &SWEEP_HEADER)?;
    let bad = |message: String| CliError::Csv {
        path: path.clone(),
        message,
    };
    let names: Vec<String> = table
        .rows
        .iter()
        .map(|r| r[table.column("value")].clone())
        .collect();
    let parameter = table
        .rows
        .first()
        .map(|r| r[table.column("parameter")].clone())
        .unwrap_or_default();
    let numeric_x: Option<Vec<f64>> = names.iter().map(|s| s.parse().ok()).collect();
    let xs = numeric_x
        .clone()
        .unwrap_or_else(|| (0..names.len()).map(|i| i as f64).collect());
    let col = |name: &str| -> Result<Vec<(f64, f64)>, CliError> {
        let ys = table.numbers(name).map_err(bad)?;
        Ok(xs.iter().zip(ys).map(|(&x, y)| (x, y / 1e6)).collect())
    };
    let series = [
        Series::line("mean", col("mean_eta")?).with_markers(),
        Series::line("min", col("min_eta")?),
        Series::line("max", col("max_eta")?),
    ];
    let title = format!("Max-min average throughput against {parameter}");
    let chart = Chart {
        title: &title,
        x_label: &parameter,
        y_label: "eta (Mbit/s)",
        equal_axes: false,
        x_categories: if numeric_x.is_some() {
            None
        } else {
            Some(names)
        },
    };
    let out = dir.join("sweep.svg");
    write(&out, &render(&chart, &series))?;
    Ok(out)
}

/// Regenerates every chart found under `root`, depth first in name order.
pub fn regenerate(root: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !root.is_dir() {
        return Err(CliError::Usage(format!(
            "{} is not a directory",
            root.display()
        )));
    }
    let mut written = Vec::new();
    visit(root, &mut written)?;
    if written.is_empty() {
        return Err(CliError::Usage(format!(
            "no trace.csv, trajectory.csv or sweep.csv under {}",
            root.display()
        )));
    }
    Ok(written)
}

fn visit(dir: &Path, written: &mut Vec<PathBuf>) -> Result<(), CliError> {
    if dir.join("trace.csv").is_file() {
        written.push(convergence(dir)?);
    }
    if dir.join("trajectory.csv").is_file() {
        written.push(trajectory(dir)?);
    }
    if dir.join("sweep.csv").is_file() {
        written.push(sweep(dir)?);
    }
    let mut children: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err("list", dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    children.sort();
    for child in children {
        visit(&child, written)?;
    }
    Ok(())
}
