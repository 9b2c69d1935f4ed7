//! Cell coordinates, continuous field positions and Chebyshev neighbourhoods.
//!
//! Positions are expressed in cell units: the centre of cell `(x, y)` sits at
//! `(x as f64, y as f64)`, so a field of side `C` spans `[-0.5, C - 0.5]` on
//! both axes. Conversion to meters happens only where a speed or a range is
//! involved.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Integer coordinates of a grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellCoord {
    pub x: i32,
    pub y: i32,
}

impl CellCoord {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn in_field(self, c: usize) -> bool {
        let c = c as i32;
        self.x >= 0 && self.y >= 0 && self.x < c && self.y < c
    }

    /// Row-major index into a `c × c` grid. Caller guarantees `in_field`.
    #[inline]
    pub fn index(self, c: usize) -> usize {
        self.y as usize * c + self.x as usize
    }

    pub fn from_index(index: usize, c: usize) -> Self {
        Self::new((index % c) as i32, (index / c) as i32)
    }

    pub fn chebyshev(self, other: CellCoord) -> i32 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }

    pub fn center(self) -> Point {
        Point::new(self.x as f64, self.y as f64)
    }
}

impl fmt::Display for CellCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// A continuous position (or displacement) in cell units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ZERO: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    pub fn add(self, other: Point) -> Point {
        Point::new(self.x + other.x, self.y + other.y)
    }

    pub fn scale(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        self.sub(other).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Nearest cell centre. Does not clip to the field.
    pub fn nearest_cell(self) -> CellCoord {
        CellCoord::new(self.x.round() as i32, self.y.round() as i32)
    }
}

/// All in-field cells at Chebyshev distance exactly `d` from `center`,
/// in a fixed scan order (row by row, then column).
pub fn chebyshev_ring(center: CellCoord, d: i32, c: usize) -> Vec<CellCoord> {
    assert!(d >= 1, "ring distance must be at least 1");
    let mut out = Vec::with_capacity(8 * d as usize);
    for dy in -d..=d {
        for dx in -d..=d {
            if dx.abs().max(dy.abs()) != d {
                continue;
            }
            let cell = CellCoord::new(center.x + dx, center.y + dy);
            if cell.in_field(c) {
                out.push(cell);
            }
        }
    }
    out
}

/// All in-field cells at Chebyshev distance `1..=d` from `center`.
pub fn chebyshev_disc(center: CellCoord, d: i32, c: usize) -> Vec<CellCoord> {
    (1..=d).flat_map(|r| chebyshev_ring(center, r, c)).collect()
}
