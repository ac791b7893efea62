//! Reference-point group mobility.
//!
//! The group reference point starts at the origin and moves at `V_e` along a
//! single heading drawn once from the seed. Each user keeps a fixed offset
//! drawn uniformly from a disk of radius `R0` and gets an independent jitter
//! drawn uniformly from a disk of radius `r_pert` every slot. Offsets and
//! per-slot jitters are re-centred to zero mean over the group, so the group
//! centroid coincides with the reference point in every slot.
//!
//! Each user draws from its own seeded stream, so adding users to a scenario
//! never changes the offsets of the users already present (before
//! re-centring).

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::point::Point;
use crate::scenario::ScenarioConfig;

#[derive(Debug, Error, PartialEq)]
pub enum TrackError {
    #[error("slot index {index} out of range (track has {slots} slots)")]
    SlotOutOfRange { index: usize, slots: usize },
    #[error("track csv line {line}: {message}")]
    Csv { line: usize, message: String },
}

/// Per-slot user positions and the derived group statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserTrack {
    /// `positions[k][n]`: user `k` in slot `n` (m).
    pub positions: Vec<Vec<Point>>,
    /// Arithmetic mean of the users' positions per slot.
    pub centroids: Vec<Point>,
    /// Largest user distance from the centroid per slot.
    pub radii: Vec<f64>,
}

impl UserTrack {
    /// Builds a track from raw positions, deriving centroids and radii.
    ///
    /// # Panics
    /// If `positions` is empty or the per-user rows differ in length.
    pub fn from_positions(positions: Vec<Vec<Point>>) -> Self {
        assert!(!positions.is_empty(), "track needs at least one user");
        let slots = positions[0].len();
        assert!(
            positions.iter().all(|row| row.len() == slots),
            "ragged user track"
        );
        let centroids: Vec<Point> = (0..slots)
            .map(|n| Point::mean(positions.iter().map(|row| row[n])))
            .collect();
        let radii = centroids
            .iter()
            .enumerate()
            .map(|(n, &c)| {
                positions
                    .iter()
                    .map(|row| row[n].distance(c))
                    .fold(0.0, f64::max)
            })
            .collect();
        Self {
            positions,
            centroids,
            radii,
        }
    }

    pub fn users(&self) -> usize {
        self.positions.len()
    }

    pub fn slots(&self) -> usize {
        self.centroids.len()
    }

    pub fn position(&self, k: usize, n: usize) -> Point {
        self.positions[k][n]
    }

    /// Distribution radius of the group in slot `n` (0-based).
    pub fn distribution_radius(&self, n: usize) -> Result<f64, TrackError> {
        self.radii
            .get(n)
            .copied()
            .ok_or(TrackError::SlotOutOfRange {
                index: n,
                slots: self.slots(),
            })
    }

    /// CSV with header `k,n,x,y`, users outer, slots inner, 0-based indices.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,n,x,y\n");
        for (k, row) in self.positions.iter().enumerate() {
            for (n, p) in row.iter().enumerate() {
                let _ = writeln!(s, "{k},{n},{},{}", p.x, p.y);
            }
        }
        s
    }

    /// Parses the `k,n,x,y` CSV written by [`UserTrack::to_csv`]. Rows may
    /// come in any order but every `(k, n)` pair must appear exactly once.
    pub fn from_csv(text: &str) -> Result<Self, TrackError> {
        let mut entries = Vec::new();
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "k,n,x,y" => {}
            _ => {
                return Err(TrackError::Csv {
                    line: 1,
                    message: "expected header k,n,x,y".into(),
                })
            }
        }
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| TrackError::Csv {
                line: idx + 1,
                message,
            };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(bad(format!("expected 4 fields, found {}", fields.len())));
            }
            let k: usize = fields[0]
                .parse()
                .map_err(|_| bad("bad user index".into()))?;
            let n: usize = fields[1]
                .parse()
                .map_err(|_| bad("bad slot index".into()))?;
            let x: f64 = fields[2].parse().map_err(|_| bad("bad x".into()))?;
            let y: f64 = fields[3].parse().map_err(|_| bad("bad y".into()))?;
            entries.push((k, n, Point::new(x, y)));
        }
        let users = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
        let slots = entries.iter().map(|e| e.1 + 1).max().unwrap_or(0);
        if users == 0 || slots == 0 || entries.len() != users * slots {
            return Err(TrackError::Csv {
                line: 0,
                message: format!(
                    "expected a complete {users}x{slots} grid, found {} rows",
                    entries.len()
                ),
            });
        }
        let mut grid: Vec<Vec<Option<Point>>> = vec![vec![None; slots]; users];
        for (k, n, p) in entries {
            if grid[k][n].replace(p).is_some() {
                return Err(TrackError::Csv {
                    line: 0,
                    message: format!("duplicate entry for user {k}, slot {n}"),
                });
            }
        }
        let positions = grid
            .into_iter()
            .map(|row| row.into_iter().map(|p| p.expect("complete grid")).collect())
            .collect();
        Ok(Self::from_positions(positions))
    }
}

/// Uniform sample from a disk of the given radius about the origin.
fn sample_disk<R: Rng>(rng: &mut R, radius: f64) -> Point {
    if radius <= 0.0 {
        return Point::ORIGIN;
    }
    let r = radius * rng.gen::<f64>().sqrt();
    let a = rng.gen::<f64>() * TAU;
    Point::new(r * a.cos(), r * a.sin())
}

fn user_stream(seed: u64, user: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(user as u64 + 1);
    rng
}

/// Heading of the group reference point (rad), drawn once from the seed.
pub fn group_heading(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.gen::<f64>() * TAU
}

/// Generates the seeded group tracks for `config`.
pub fn generate_tracks(config: &ScenarioConfig) -> UserTrack {
    let heading = group_heading(config.seed);
    let dir = Point::new(heading.cos(), heading.sin());
    generate_tracks_with(config, dir)
}

/// Same as [`generate_tracks`] with an explicit unit heading vector.
pub fn generate_tracks_with(config: &ScenarioConfig, direction: Point) -> UserTrack {
    let k_users = config.users;
    let slots = config.slots;
    let mut offsets = Vec::with_capacity(k_users);
    let mut jitters = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let mut rng = user_stream(config.seed, k);
        offsets.push(sample_disk(&mut rng, config.group_radius));
        jitters.push(
            (0..slots)
                .map(|_| sample_disk(&mut rng, config.perturbation_radius))
                .collect::<Vec<_>>(),
        );
    }
    let mean_offset = Point::mean(offsets.iter().copied());
    let mean_jitter: Vec<Point> = (0..slots)
        .map(|n| Point::mean(jitters.iter().map(|j| j[n])))
        .collect();

    let step = config.group_speed * config.slot_length;
    let positions = (0..k_users)
        .map(|k| {
            (0..slots)
                .map(|n| {
                    let reference = direction * (step * n as f64);
                    reference + (offsets[k] - mean_offset) + (jitters[k][n] - mean_jitter[n])
                })
                .collect()
        })
        .collect();
    UserTrack::from_positions(positions)
}

/// Bound on a single user's per-slot jitter after re-centring.
pub fn jitter_bound(config: &ScenarioConfig) -> f64 {
    2.0 * config.perturbation_radius
}
