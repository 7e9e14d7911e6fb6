//! Deterministic 2D navigation MDP.
//!
//! A [`GridSpec`] is a rectangular grid with a wall set; the free (non-wall)
//! cells are the states, and the four cardinal moves are the actions. Moves
//! into a wall or off the grid leave the state unchanged, so the transition
//! function is total and closed over free cells. Reward is 1 on entering the
//! goal cell and 0 otherwise, with the goal absorbing.
//!
//! The built-in constructors use a 1-based playable interior surrounded by
//! an explicit wall ring, so an "8x8" empty grid has playable coordinates
//! `1..=6` on both axes and a goal like `(6,6)` sits in the playable corner.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding;

/// A free cell, addressed by column `x` and row `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(u32, u32)", into = "(u32, u32)")]
pub struct GridState {
    pub x: u32,
    pub y: u32,
}

impl GridState {
    pub fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }

    /// Manhattan distance to another cell.
    pub fn manhattan(self, other: GridState) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    /// Euclidean distance to another cell.
    pub fn euclidean(self, other: GridState) -> f64 {
        let dx = other.x as f64 - self.x as f64;
        let dy = other.y as f64 - self.y as f64;
        (dx * dx + dy * dy).sqrt()
    }

    /// Displacement vector from `self` to `other`.
    pub fn displacement(self, other: GridState) -> (f64, f64) {
        (
            other.x as f64 - self.x as f64,
            other.y as f64 - self.y as f64,
        )
    }
}

impl From<(u32, u32)> for GridState {
    fn from((x, y): (u32, u32)) -> Self {
        Self { x, y }
    }
}

impl From<GridState> for (u32, u32) {
    fn from(s: GridState) -> Self {
        (s.x, s.y)
    }
}

impl fmt::Display for GridState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// The four cardinal moves, in the canonical serialization order `0..4`.
///
/// `Up` decreases `y` (row 0 is the top of the ASCII rendering), `Down`
/// increases it. The integer encoding is a wire contract and must not change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Action {
    Up = 0,
    Right = 1,
    Down = 2,
    Left = 3,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Right, Action::Down, Action::Left];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    /// `(dx, dy)` applied by this move.
    pub fn delta(self) -> (i64, i64) {
        match self {
            Action::Up => (0, -1),
            Action::Right => (1, 0),
            Action::Down => (0, 1),
            Action::Left => (-1, 0),
        }
    }

    pub fn opposite(self) -> Action {
        match self {
            Action::Up => Action::Down,
            Action::Right => Action::Left,
            Action::Down => Action::Up,
            Action::Left => Action::Right,
        }
    }
}

impl From<Action> for u8 {
    fn from(a: Action) -> u8 {
        a as u8
    }
}

impl TryFrom<u8> for Action {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        Action::from_index(v as usize).ok_or_else(|| format!("action encoding out of range: {v}"))
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Action::Up => "up",
            Action::Right => "right",
            Action::Down => "down",
            Action::Left => "left",
        };
        f.write_str(name)
    }
}

/// A free cell designated as an absorbing target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Goal(pub GridState);

impl Goal {
    pub fn new(x: u32, y: u32) -> Self {
        Goal(GridState::new(x, y))
    }

    pub fn state(self) -> GridState {
        self.0
    }
}

impl From<GridState> for Goal {
    fn from(s: GridState) -> Self {
        Goal(s)
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Grid geometry plus wall set.
///
/// Construction validates that walls are in bounds, that at least two free
/// cells exist, and that the free-cell graph under cardinal moves is
/// connected. The free cells and their row-major indexing are precomputed;
/// the struct is immutable afterwards and cheap to share behind an [`Arc`].
#[derive(Debug, Clone)]
pub struct GridSpec {
    width: u32,
    height: u32,
    walls: BTreeSet<GridState>,
    name: String,
    states: Vec<GridState>,
    index: Vec<Option<u32>>,
}

/// On-disk form: `{width, height, walls: [[x,y],...], name}`.
#[derive(Serialize, Deserialize)]
struct GridSpecFile {
    width: u32,
    height: u32,
    walls: Vec<GridState>,
    name: String,
}

impl PartialEq for GridSpec {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.walls == other.walls
            && self.name == other.name
    }
}

impl GridSpec {
    pub fn new(
        width: u32,
        height: u32,
        walls: BTreeSet<GridState>,
        name: impl Into<String>,
    ) -> Result<Self> {
        let name = name.into();
        if width == 0 || height == 0 {
            return Err(Error::InvalidSize(format!(
                "grid {name}: dimensions must be positive, got {width}x{height}"
            )));
        }
        for w in &walls {
            if w.x >= width || w.y >= height {
                return Err(Error::InvalidGrid(format!(
                    "grid {name}: wall {w} outside {width}x{height}"
                )));
            }
        }

        // Row-major free-cell enumeration; Q-table indexing relies on it.
        let mut states = Vec::new();
        let mut index = vec![None; (width * height) as usize];
        for y in 0..height {
            for x in 0..width {
                let s = GridState::new(x, y);
                if !walls.contains(&s) {
                    index[(y * width + x) as usize] = Some(states.len() as u32);
                    states.push(s);
                }
            }
        }
        if states.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "grid {name}: needs at least two free cells, found {}",
                states.len()
            )));
        }

        let spec = Self {
            width,
            height,
            walls,
            name,
            states,
            index,
        };
        spec.check_connected()?;
        Ok(spec)
    }

    /// BFS over free cells; all must be reachable from the first one.
    fn check_connected(&self) -> Result<()> {
        let mut seen = vec![false; self.states.len()];
        let mut queue = std::collections::VecDeque::new();
        seen[0] = true;
        queue.push_back(self.states[0]);
        let mut reached = 1usize;
        while let Some(s) = queue.pop_front() {
            for a in Action::ALL {
                let t = self.transition(s, a);
                let i = self.state_index(t).expect("transition stays on free cells");
                if !seen[i] {
                    seen[i] = true;
                    reached += 1;
                    queue.push_back(t);
                }
            }
        }
        if reached != self.states.len() {
            return Err(Error::InvalidGrid(format!(
                "grid {}: free cells are not connected ({reached} of {} reachable)",
                self.name,
                self.states.len()
            )));
        }
        Ok(())
    }

    /// An `n`x`n` grid whose border ring is walled off, leaving an empty
    /// playable interior with coordinates `1..=n-2` on both axes.
    pub fn make_empty(n: u32) -> Result<Arc<GridSpec>> {
        if n < 4 {
            return Err(Error::InvalidSize(format!(
                "empty grid needs n >= 4 for a playable interior, got {n}"
            )));
        }
        let mut walls = BTreeSet::new();
        for i in 0..n {
            walls.insert(GridState::new(i, 0));
            walls.insert(GridState::new(i, n - 1));
            walls.insert(GridState::new(0, i));
            walls.insert(GridState::new(n - 1, i));
        }
        Ok(Arc::new(Self::new(n, n, walls, format!("empty-{n}"))?))
    }

    /// An `n`x`n` grid with two full-length interior walls, each pierced by
    /// one gap cell, placed deterministically from `seed`.
    ///
    /// Both walls share one orientation (a seeded coin flip). Two crossing
    /// perpendicular walls with a single gap each would split the interior
    /// into four regions joined by only two openings, which can never leave
    /// every free cell mutually reachable, so parallel placement is the only
    /// layout that satisfies the connectivity invariant.
    pub fn make_simple_crossing(n: u32, seed: u64) -> Result<Arc<GridSpec>> {
        if n < 5 {
            return Err(Error::InvalidSize(format!(
                "crossing grid needs n >= 5, got {n}"
            )));
        }
        let mut rng = seeding::rng(seeding::mix(seed, 0xc05_51f));
        let vertical = rng.random::<bool>();

        // Prefer wall lines away from the playable border (the MiniGrid
        // river positions); fall back to the full interior for tiny grids.
        let pairs_in = |lo: u32, hi: u32| -> Vec<(u32, u32)> {
            let mut out = Vec::new();
            for a in lo..=hi {
                for b in (a + 2)..=hi {
                    out.push((a, b));
                }
            }
            out
        };
        let mut candidates = pairs_in(2, n.saturating_sub(3));
        if candidates.is_empty() {
            candidates = pairs_in(1, n - 2);
        }
        if candidates.is_empty() {
            return Err(Error::InvalidGrid(format!(
                "crossing grid {n}: no wall placement leaves the interior connected"
            )));
        }
        let (line_a, line_b) = candidates[rng.random_range(0..candidates.len())];
        let gap_a = rng.random_range(1..=n - 2);
        let gap_b = rng.random_range(1..=n - 2);

        let mut walls = BTreeSet::new();
        for i in 0..n {
            walls.insert(GridState::new(i, 0));
            walls.insert(GridState::new(i, n - 1));
            walls.insert(GridState::new(0, i));
            walls.insert(GridState::new(n - 1, i));
        }
        for j in 1..=n - 2 {
            let (wa, wb) = if vertical {
                (GridState::new(line_a, j), GridState::new(line_b, j))
            } else {
                (GridState::new(j, line_a), GridState::new(j, line_b))
            };
            walls.insert(wa);
            walls.insert(wb);
        }
        let (g1, g2) = if vertical {
            (GridState::new(line_a, gap_a), GridState::new(line_b, gap_b))
        } else {
            (GridState::new(gap_a, line_a), GridState::new(gap_b, line_b))
        };
        walls.remove(&g1);
        walls.remove(&g2);

        Ok(Arc::new(Self::new(
            n,
            n,
            walls,
            format!("crossing-{n}-s{seed}"),
        )?))
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn walls(&self) -> &BTreeSet<GridState> {
        &self.walls
    }

    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as u32) < self.width && (y as u32) < self.height
    }

    pub fn is_free(&self, s: GridState) -> bool {
        s.x < self.width && s.y < self.height && !self.walls.contains(&s)
    }

    /// All free cells in row-major order. Q-table rows and tie-breaking
    /// depend on this ordering being stable.
    pub fn states(&self) -> &[GridState] {
        &self.states
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    /// Row index of a free cell in [`Self::states`] order.
    pub fn state_index(&self, s: GridState) -> Option<usize> {
        if s.x >= self.width || s.y >= self.height {
            return None;
        }
        self.index[(s.y * self.width + s.x) as usize].map(|i| i as usize)
    }

    /// Validate that a goal is a free cell of this grid.
    pub fn check_goal(&self, goal: Goal) -> Result<()> {
        if self.is_free(goal.state()) {
            Ok(())
        } else {
            Err(Error::InvalidGoal(format!(
                "goal {goal} is a wall or outside grid {}",
                self.name
            )))
        }
    }

    /// Apply a cardinal move. Moves that would leave the grid or enter a
    /// wall return `s` unchanged, so the result is always a free cell.
    pub fn transition(&self, s: GridState, a: Action) -> GridState {
        let (dx, dy) = a.delta();
        let nx = s.x as i64 + dx;
        let ny = s.y as i64 + dy;
        if !self.in_bounds(nx, ny) {
            return s;
        }
        let next = GridState::new(nx as u32, ny as u32);
        if self.walls.contains(&next) {
            s
        } else {
            next
        }
    }

    /// ASCII rendering: `#` wall, `.` free, `G` the given goal.
    pub fn ascii(&self, goal: Option<Goal>) -> String {
        let mut out = String::with_capacity((self.width as usize + 1) * self.height as usize);
        for y in 0..self.height {
            for x in 0..self.width {
                let s = GridState::new(x, y);
                let ch = if goal.map(Goal::state) == Some(s) {
                    'G'
                } else if self.walls.contains(&s) {
                    '#'
                } else {
                    '.'
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let file = GridSpecFile {
            width: self.width,
            height: self.height,
            walls: self.walls.iter().copied().collect(),
            name: self.name.clone(),
        };
        serde_json::to_string_pretty(&file).expect("grid serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Arc<GridSpec>> {
        let file: GridSpecFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("grid json: {e}")))?;
        Ok(Arc::new(Self::new(
            file.width,
            file.height,
            file.walls.into_iter().collect(),
            file.name,
        )?))
    }
}

/// Goal-directed reward: 1 on entering the goal cell, 0 otherwise. The goal
/// is absorbing, so nothing is earned past entry. Depends only on the
/// successor state.
pub fn reward(goal: Goal, next: GridState) -> f64 {
    if next == goal.state() {
        1.0
    } else {
        0.0
    }
}
