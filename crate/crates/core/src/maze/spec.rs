use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in maze coordinates. Cell `(c, r)` covers
/// `[c - 0.5, c + 0.5) x [r - 0.5, r + 0.5)`.
pub type Vec2 = [f64; 2];

pub const DEFAULT_LAYOUT: &str = include_str!("../../assets/pointmaze_default.txt");

/// Occupancy grid plus task distribution and episode constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MazeSpec {
    pub width: usize,
    pub height: usize,
    /// Row-major, `true` for wall cells.
    pub walls: Vec<bool>,
    pub start_clusters: [Vec2; 3],
    pub goal_clusters: [Vec2; 3],
    pub start_radius: f64,
    pub goal_radius: f64,
    /// Success threshold on the Euclidean distance to the goal.
    pub epsilon: f64,
    /// Per-axis action limit.
    pub action_bound: f64,
    pub horizon: usize,
}

impl Default for MazeSpec {
    fn default() -> Self {
        Self::from_layout(DEFAULT_LAYOUT).expect("bundled layout is valid")
    }
}

impl MazeSpec {
    /// Parses a text layout: `#` wall, `.` free, `A`/`B`/`C` start
    /// centers, `1`/`2`/`3` goal centers. Remaining fields take defaults.
    pub fn from_layout(text: &str) -> Result<Self> {
        let rows: Vec<&str> = text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect();
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        if height < 3 || width < 3 {
            return Err(Error::Maze(format!("layout too small: {width}x{height}")));
        }
        let mut walls = Vec::with_capacity(width * height);
        let mut starts: [Option<Vec2>; 3] = [None; 3];
        let mut goals: [Option<Vec2>; 3] = [None; 3];
        for (r, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(Error::Maze(format!("row {r} has {} columns, expected {width}", row.chars().count())));
            }
            for (c, ch) in row.chars().enumerate() {
                let here = [c as f64, r as f64];
                let slot = match ch {
                    '#' => {
                        walls.push(true);
                        continue;
                    }
                    '.' => None,
                    'A' | 'B' | 'C' => Some(&mut starts[(ch as u8 - b'A') as usize]),
                    '1' | '2' | '3' => Some(&mut goals[(ch as u8 - b'1') as usize]),
                    other => return Err(Error::Maze(format!("unknown cell {other:?} at ({c}, {r})"))),
                };
                walls.push(false);
                if let Some(slot) = slot {
                    if slot.replace(here).is_some() {
                        return Err(Error::Maze(format!("duplicate marker {ch:?}")));
                    }
                }
            }
        }
        let collect = |v: [Option<Vec2>; 3], what: &str| -> Result<[Vec2; 3]> {
            let mut out = [[0.0; 2]; 3];
            for (i, p) in v.iter().enumerate() {
                out[i] = p.ok_or_else(|| Error::Maze(format!("missing {what} marker {}", i + 1)))?;
            }
            Ok(out)
        };
        let spec = Self {
            width,
            height,
            walls,
            start_clusters: collect(starts, "start")?,
            goal_clusters: collect(goals, "goal")?,
            start_radius: 0.5,
            goal_radius: 0.5,
            epsilon: 2.0,
            action_bound: 2.0,
            horizon: 60,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load_layout(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_layout(&text)
    }

    /// Renders the grid back to the text layout format.
    pub fn to_layout(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for r in 0..self.height {
            for c in 0..self.width {
                let here = [c as f64, r as f64];
                let ch = if self.walls[r * self.width + c] {
                    '#'
                } else if let Some(i) = self.start_clusters.iter().position(|p| *p == here) {
                    (b'A' + i as u8) as char
                } else if let Some(i) = self.goal_clusters.iter().position(|p| *p == here) {
                    (b'1' + i as u8) as char
                } else {
                    '.'
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.walls.len() != self.width * self.height {
            return Err(Error::Maze("wall map size does not match dimensions".into()));
        }
        for c in 0..self.width {
            if !self.is_wall_cell(c as i64, 0) || !self.is_wall_cell(c as i64, self.height as i64 - 1) {
                return Err(Error::Maze(format!("border cell in column {c} is not a wall")));
            }
        }
        for r in 0..self.height {
            if !self.is_wall_cell(0, r as i64) || !self.is_wall_cell(self.width as i64 - 1, r as i64) {
                return Err(Error::Maze(format!("border cell in row {r} is not a wall")));
            }
        }
        for p in self.start_clusters.iter().chain(&self.goal_clusters) {
            if !self.is_free(*p) {
                return Err(Error::Maze(format!("cluster center {p:?} is not in free space")));
            }
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.epsilon) || !positive(self.action_bound) || self.horizon == 0 {
            return Err(Error::Maze(format!(
                "epsilon {}, action_bound {} and horizon {} must be positive",
                self.epsilon, self.action_bound, self.horizon
            )));
        }
        if !(self.start_radius >= 0.0 && self.goal_radius >= 0.0) {
            return Err(Error::Maze("cluster radii must be non-negative".into()));
        }
        Ok(())
    }

    /// Cell index containing a coordinate.
    pub fn cell_of(v: f64) -> i64 {
        (v + 0.5).floor() as i64
    }

    pub fn cell(&self, p: Vec2) -> (i64, i64) {
        (Self::cell_of(p[0]), Self::cell_of(p[1]))
    }

    /// Out-of-grid cells count as walls.
    pub fn is_wall_cell(&self, c: i64, r: i64) -> bool {
        if c < 0 || r < 0 || c >= self.width as i64 || r >= self.height as i64 {
            return true;
        }
        self.walls[r as usize * self.width + c as usize]
    }

    pub fn is_free(&self, p: Vec2) -> bool {
        let (c, r) = self.cell(p);
        p[0].is_finite() && p[1].is_finite() && !self.is_wall_cell(c, r)
    }

    pub fn free_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.height)
            .flat_map(move |r| (0..self.width).map(move |c| (c, r)))
            .filter(move |&(c, r)| !self.walls[r * self.width + c])
    }

    /// Input normalisation: maps the maze extent onto roughly `[-1, 1]`.
    pub fn normalize(&self, p: Vec2) -> Vec2 {
        let hx = (self.width as f64 - 1.0) / 2.0;
        let hy = (self.height as f64 - 1.0) / 2.0;
        [(p[0] - hx) / hx, (p[1] - hy) / hy]
    }
}

/// Euclidean distance.
pub fn distance(a: Vec2, b: Vec2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Sparse training reward: `0` on success, `-1` otherwise.
pub fn sparse_reward(achieved: Vec2, goal: Vec2, epsilon: f64) -> f64 {
    if distance(achieved, goal) < epsilon {
        0.0
    } else {
        -1.0
    }
}
