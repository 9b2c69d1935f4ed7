//! Ground truth: the field geometry, weed patches and isolated weeds.

use crate::grid::{CellCoord, Point};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

/// Rejection-sampling budget for placing a single patch.
const PATCH_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("invalid world config: {0}")]
    Config(String),
    #[error("could not place patch {patch} without overlap after {attempts} attempts")]
    Placement { patch: usize, attempts: usize },
    #[error("field file: {0}")]
    Io(#[from] std::io::Error),
    #[error("field file, line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Field geometry and weed layout parameters.
///
/// The camera footprint is abstracted away: one observation covers exactly
/// one cell, which is what flying at an altitude `h >= l_c / 2` with a 90°
/// aperture gives. Altitude therefore does not appear here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    /// Cells per side (`C`).
    pub c: usize,
    /// Cell side in meters (`l_c`).
    pub cell_side: f64,
    /// Maximum weeds per cell (`N_W`).
    pub n_w: usize,
    /// Number of square patches.
    pub c_p: usize,
    /// Patch side in cells.
    pub n_p: usize,
    /// Isolated weedy cells outside patches.
    pub c_i: usize,
    /// Cruise speed in m/s.
    pub cruise_speed: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            c: 50,
            cell_side: 4.0,
            n_w: 12,
            c_p: 4,
            n_p: 7,
            c_i: 40,
            cruise_speed: 0.4,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |msg: String| Err(WorldError::Config(msg));
        if self.c == 0 {
            return bad("c must be positive".into());
        }
        if !(self.cell_side > 0.0 && self.cell_side.is_finite()) {
            return bad(format!("cell_side must be positive, got {}", self.cell_side));
        }
        if !(self.cruise_speed > 0.0 && self.cruise_speed.is_finite()) {
            return bad(format!("cruise_speed must be positive, got {}", self.cruise_speed));
        }
        if self.n_w == 0 || self.n_w > u8::MAX as usize {
            return bad(format!("n_w must be in 1..=255, got {}", self.n_w));
        }
        if self.c_p > 0 && (self.n_p == 0 || self.n_p > self.c) {
            return bad(format!("n_p = {} does not fit a field of side {}", self.n_p, self.c));
        }
        if self.c_p * self.n_p * self.n_p + self.c_i > self.c * self.c {
            return bad(format!(
                "{} patches of {}x{} plus {} isolated cells exceed {} cells",
                self.c_p,
                self.n_p,
                self.n_p,
                self.c_i,
                self.c * self.c
            ));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.c * self.c
    }

    /// Cruise speed in cells per second.
    pub fn speed_cells(&self) -> f64 {
        self.cruise_speed / self.cell_side
    }

    /// Time for one agent to sweep every cell once.
    pub fn single_agent_cover_time(&self) -> f64 {
        (self.c * self.c) as f64 * self.cell_side / self.cruise_speed
    }

    /// Single-pass cover time for `n` agents that partition the field.
    pub fn cover_time(&self, n_agents: usize) -> f64 {
        self.single_agent_cover_time() / n_agents as f64
    }
}

/// Seconds to fly between two cell centres at cruise speed.
pub fn travel_time(from: CellCoord, to: CellCoord, config: &WorldConfig) -> f64 {
    from.center().distance(to.center()) * config.cell_side / config.cruise_speed
}

/// Ground-truth weed counts.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTruth {
    c: usize,
    cell_side: f64,
    n_w: usize,
    weeds: Vec<u8>,
    patch_centers: Vec<CellCoord>,
}

impl FieldTruth {
    pub fn from_grid(c: usize, cell_side: f64, n_w: usize, weeds: Vec<u8>) -> Self {
        assert_eq!(weeds.len(), c * c, "grid must have c*c cells");
        assert!(weeds.iter().all(|&w| (w as usize) <= n_w));
        Self {
            c,
            cell_side,
            n_w,
            weeds,
            patch_centers: Vec::new(),
        }
    }

    pub fn side(&self) -> usize {
        self.c
    }

    pub fn cell_side(&self) -> f64 {
        self.cell_side
    }

    pub fn n_w(&self) -> usize {
        self.n_w
    }

    pub fn weeds(&self, cell: CellCoord) -> usize {
        self.weeds[cell.index(self.c)] as usize
    }

    pub fn grid(&self) -> &[u8] {
        &self.weeds
    }

    pub fn patch_centers(&self) -> &[CellCoord] {
        &self.patch_centers
    }

    pub fn weedy_cells(&self) -> usize {
        self.weeds.iter().filter(|&&w| w > 0).count()
    }

    /// Grid text format: `#` header lines, then `c` rows of `c` counts,
    /// row `y = 0` first.
    pub fn to_text(&self, config: &WorldConfig, seed: u64) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# fieldswarm field");
        let _ = writeln!(
            out,
            "# c={} cell_side={} n_w={} c_p={} n_p={} c_i={} cruise_speed={} seed={}",
            config.c,
            config.cell_side,
            config.n_w,
            config.c_p,
            config.n_p,
            config.c_i,
            config.cruise_speed,
            seed
        );
        let centers: Vec<String> = self
            .patch_centers
            .iter()
            .map(|p| format!("{}:{}", p.x, p.y))
            .collect();
        let _ = writeln!(out, "# patch_centers={}", centers.join(" "));
        for row in self.weeds.chunks(self.c) {
            let line: Vec<String> = row.iter().map(u8::to_string).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>, config: &WorldConfig, seed: u64) -> Result<(), WorldError> {
        std::fs::write(path, self.to_text(config, seed))?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, WorldError> {
        let mut c = None;
        let mut cell_side = 1.0;
        let mut n_w = None;
        let mut centers = Vec::new();
        let mut rows: Vec<Vec<u8>> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| WorldError::Parse {
                line: line_no,
                message,
            };
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(header) = trimmed.strip_prefix('#') {
                for token in header.split_whitespace() {
                    let Some((key, value)) = token.split_once('=') else {
                        if let Some((x, y)) = token.split_once(':') {
                            centers.push(parse_center(x, y).map_err(err)?);
                        }
                        continue;
                    };
                    match key {
                        "c" => c = Some(value.parse().map_err(|e| err(format!("c: {e}")))?),
                        "n_w" => n_w = Some(value.parse().map_err(|e| err(format!("n_w: {e}")))?),
                        "cell_side" => {
                            cell_side = value.parse().map_err(|e| err(format!("cell_side: {e}")))?
                        }
                        "patch_centers" => {
                            if let Some((x, y)) = value.split_once(':') {
                                centers.push(parse_center(x, y).map_err(err)?);
                            }
                        }
                        _ => {}
                    }
                }
                continue;
            }
            let row = trimmed
                .split_whitespace()
                .map(|t| t.parse::<u8>().map_err(|e| err(format!("`{t}`: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        let c = c.unwrap_or(rows.len());
        if rows.len() != c || rows.iter().any(|r| r.len() != c) {
            return Err(WorldError::Parse {
                line: 0,
                message: format!("expected {c} rows of {c} counts"),
            });
        }
        let weeds: Vec<u8> = rows.into_iter().flatten().collect();
        let n_w = n_w.unwrap_or_else(|| weeds.iter().copied().max().unwrap_or(1).max(1) as usize);
        if let Some(&w) = weeds.iter().find(|&&w| w as usize > n_w) {
            return Err(WorldError::Parse {
                line: 0,
                message: format!("count {w} exceeds n_w = {n_w}"),
            });
        }
        Ok(Self {
            c,
            cell_side,
            n_w,
            weeds,
            patch_centers: centers,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, WorldError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

fn parse_center(x: &str, y: &str) -> Result<CellCoord, String> {
    let x = x.parse().map_err(|e| format!("patch centre x: {e}"))?;
    let y = y.parse().map_err(|e| format!("patch centre y: {e}"))?;
    Ok(CellCoord::new(x, y))
}

/// Lays out `c_p` non-overlapping Gaussian-profile patches and `c_i`
/// isolated weedy cells.
///
/// Inside a patch a cell at distance `d` from the patch centre holds
/// `clamp(round(n_w exp(-d² / (2 σ²)) + ε), 1, n_w)` weeds with
/// `σ = n_p / 4` and `ε ~ N(0, 1)`. Isolated cells draw uniformly from
/// `1..=n_w`.
pub fn generate_field<R: Rng + ?Sized>(config: &WorldConfig, rng: &mut R) -> Result<FieldTruth, WorldError> {
    config.validate()?;
    let c = config.c;
    let n_p = config.n_p;
    let n_w = config.n_w as f64;
    let mut weeds = vec![0u8; c * c];
    let mut in_patch = vec![false; c * c];
    let mut corners: Vec<(usize, usize)> = Vec::with_capacity(config.c_p);
    let mut patch_centers = Vec::with_capacity(config.c_p);

    for patch in 0..config.c_p {
        let span = c - n_p;
        let mut placed = None;
        for _ in 0..PATCH_ATTEMPTS {
            let x0 = rng.random_range(0..=span);
            let y0 = rng.random_range(0..=span);
            let overlaps = corners
                .iter()
                .any(|&(px, py)| x0 < px + n_p && px < x0 + n_p && y0 < py + n_p && py < y0 + n_p);
            if !overlaps {
                placed = Some((x0, y0));
                break;
            }
        }
        let (x0, y0) = placed.ok_or(WorldError::Placement {
            patch,
            attempts: PATCH_ATTEMPTS,
        })?;
        corners.push((x0, y0));

        let half = (n_p as f64 - 1.0) / 2.0;
        let center = Point::new(x0 as f64 + half, y0 as f64 + half);
        let sigma = n_p as f64 / 4.0;
        for y in y0..y0 + n_p {
            for x in x0..x0 + n_p {
                let d2 = CellCoord::new(x as i32, y as i32).center().sub(center).norm().powi(2);
                let noise: f64 = rng.sample(StandardNormal);
                let w = (n_w * (-d2 / (2.0 * sigma * sigma)).exp() + noise).round();
                let idx = y * c + x;
                weeds[idx] = w.clamp(1.0, n_w) as u8;
                in_patch[idx] = true;
            }
        }
        patch_centers.push(CellCoord::new((x0 + n_p / 2) as i32, (y0 + n_p / 2) as i32));
    }

    let free: Vec<usize> = (0..c * c).filter(|&i| !in_patch[i]).collect();
    for pick in rand::seq::index::sample(rng, free.len(), config.c_i).into_vec() {
        weeds[free[pick]] = rng.random_range(1..=config.n_w) as u8;
    }

    Ok(FieldTruth {
        c,
        cell_side: config.cell_side,
        n_w: config.n_w,
        weeds,
        patch_centers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn field(config: &WorldConfig, seed: u64) -> FieldTruth {
        generate_field(config, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn default_field_has_exact_weedy_count() {
        let config = WorldConfig::default();
        for seed in 0..20 {
            let f = field(&config, seed);
            assert_eq!(f.weedy_cells(), 236);
            assert!(f.weedy_cells() * 10 < 2500);
            assert!(f.grid().iter().all(|&w| w as usize <= 12));
            assert_eq!(f.patch_centers().len(), 4);
        }
    }

    #[test]
    fn empty_layout_is_all_zero() {
        let config = WorldConfig {
            c_p: 0,
            c_i: 0,
            ..WorldConfig::default()
        };
        assert!(field(&config, 1).grid().iter().all(|&w| w == 0));
    }

    #[test]
    fn deterministic_per_seed() {
        let config = WorldConfig::default();
        assert_eq!(field(&config, 9), field(&config, 9));
        assert_ne!(field(&config, 9), field(&config, 10));
    }

    #[test]
    fn patches_do_not_overlap() {
        let config = WorldConfig {
            c: 30,
            c_p: 6,
            n_p: 6,
            c_i: 10,
            ..WorldConfig::default()
        };
        for seed in 0..20 {
            let f = field(&config, seed);
            assert_eq!(f.weedy_cells(), 6 * 36 + 10);
        }
    }

    #[test]
    fn patch_profile_is_center_heavy() {
        let config = WorldConfig::default();
        let (mut center_sum, mut corner_sum) = (0.0, 0.0);
        for seed in 0..100 {
            let f = field(&config, seed);
            for &p in f.patch_centers() {
                center_sum += f.weeds(p) as f64;
                corner_sum += f.weeds(CellCoord::new(p.x - 3, p.y - 3)) as f64;
            }
        }
        let center_mean = center_sum / 400.0;
        let corner_mean = corner_sum / 400.0;
        assert!(center_mean > 10.5, "centre mean {center_mean}");
        assert!(corner_mean < center_mean);
    }

    #[test]
    fn rejects_overfull_layout() {
        let config = WorldConfig {
            c: 5,
            c_p: 1,
            n_p: 5,
            c_i: 1,
            ..WorldConfig::default()
        };
        assert!(matches!(config.validate(), Err(WorldError::Config(_))));
    }

    #[test]
    fn reports_placement_failure() {
        // Two 3x3 patches cannot both fit a 5x5 field without overlap.
        let config = WorldConfig {
            c: 5,
            c_p: 2,
            n_p: 3,
            c_i: 0,
            ..WorldConfig::default()
        };
        let err = generate_field(&config, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, WorldError::Placement { patch: 1, .. }));
    }

    #[test]
    fn travel_times() {
        let config = WorldConfig::default();
        let a = CellCoord::new(3, 3);
        assert!((travel_time(a, CellCoord::new(4, 3), &config) - 10.0).abs() < 1e-12);
        assert!((travel_time(a, CellCoord::new(4, 4), &config) - 10.0 * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(travel_time(a, a, &config), 0.0);
    }

    #[test]
    fn cover_times() {
        let config = WorldConfig::default();
        assert_eq!(config.single_agent_cover_time(), 25_000.0);
        assert_eq!(config.cover_time(50), 500.0);
    }

    #[test]
    fn text_roundtrip() {
        let config = WorldConfig::default();
        let f = field(&config, 4);
        let text = f.to_text(&config, 4);
        let back = FieldTruth::parse(&text).unwrap();
        assert_eq!(back, f);
        assert_eq!(text, field(&config, 4).to_text(&config, 4));
    }
}
