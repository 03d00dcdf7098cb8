//! Frozen-Lake style grid environment.
//!
//! States are numbered row-major from the top-left cell, as the map is
//! rendered. The `(x, y)` frame used for movement semantics is y-up: `x` is
//! the column and `y = n_rows - 1 - row`, so `Up` increments `y`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

/// The bundled 4x4 default map.
pub const DEFAULT_MAP: &str = include_str!("../assets/default_4x4.txt");

pub type State = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MapError {
    #[error("EmptyMap: map text has no rows")]
    Empty,
    #[error("NonRectangular: row {row} has {found} cells, expected {expected}")]
    NonRectangular {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("IllegalCharacter: {ch:?} at row {row}, column {col}")]
    IllegalCharacter { ch: char, row: usize, col: usize },
    #[error("MissingOrDuplicateStart: found {0} start cells")]
    MissingOrDuplicateStart(usize),
    #[error("MissingGoal: found {0} goal cells, expected exactly one")]
    MissingGoal(usize),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StepError {
    #[error("SteppedFromTerminalState: state {0} is a hole or the goal")]
    SteppedFromTerminalState(State),
    #[error("InvalidState: state {0} is outside the map")]
    InvalidState(State),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellClass {
    Start,
    Frozen,
    Hole,
    Goal,
}

impl CellClass {
    pub fn from_char(ch: char) -> Option<Self> {
        match ch {
            'S' => Some(CellClass::Start),
            'F' => Some(CellClass::Frozen),
            'H' => Some(CellClass::Hole),
            'G' => Some(CellClass::Goal),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            CellClass::Start => 'S',
            CellClass::Frozen => 'F',
            CellClass::Hole => 'H',
            CellClass::Goal => 'G',
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, CellClass::Hole | CellClass::Goal)
    }
}

/// Grid action. The discriminants are the wire codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Action {
    Left = 0,
    Down = 1,
    Right = 2,
    Up = 3,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Left, Action::Down, Action::Right, Action::Up];
    pub const COUNT: usize = 4;

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    /// Coordinate delta in the y-up `(x, y)` frame.
    pub fn delta(self) -> (i64, i64) {
        match self {
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
            Action::Up => (0, 1),
            Action::Down => (0, -1),
        }
    }

    /// The two actions at right angles to this one.
    pub fn perpendicular(self) -> [Action; 2] {
        match self {
            Action::Left | Action::Right => [Action::Down, Action::Up],
            Action::Down | Action::Up => [Action::Left, Action::Right],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapSpec {
    n_rows: usize,
    n_cols: usize,
    cells: Vec<CellClass>,
    start_state: State,
    goal_state: State,
}

impl MapSpec {
    /// Parses rows of `S`/`F`/`H`/`G`. Blank trailing lines are ignored.
    pub fn parse(text: &str) -> Result<Self, MapError> {
        let rows: Vec<&str> = text
            .lines()
            .map(|l| l.trim_end_matches('\r'))
            .filter(|l| !l.is_empty())
            .collect();
        if rows.is_empty() {
            return Err(MapError::Empty);
        }
        let n_cols = rows[0].chars().count();
        let mut cells = Vec::with_capacity(rows.len() * n_cols);
        for (r, row) in rows.iter().enumerate() {
            let mut count = 0;
            for (c, ch) in row.chars().enumerate() {
                let cell = CellClass::from_char(ch).ok_or(MapError::IllegalCharacter {
                    ch,
                    row: r,
                    col: c,
                })?;
                cells.push(cell);
                count += 1;
            }
            if count != n_cols {
                return Err(MapError::NonRectangular {
                    row: r,
                    expected: n_cols,
                    found: count,
                });
            }
        }
        Self::from_cells(rows.len(), n_cols, cells)
    }

    pub fn from_cells(
        n_rows: usize,
        n_cols: usize,
        cells: Vec<CellClass>,
    ) -> Result<Self, MapError> {
        if n_rows == 0 || n_cols == 0 {
            return Err(MapError::Empty);
        }
        if cells.len() != n_rows * n_cols {
            return Err(MapError::NonRectangular {
                row: cells.len() / n_cols,
                expected: n_cols,
                found: cells.len() % n_cols,
            });
        }
        let starts: Vec<State> = positions(&cells, CellClass::Start);
        if starts.len() != 1 {
            return Err(MapError::MissingOrDuplicateStart(starts.len()));
        }
        let goals: Vec<State> = positions(&cells, CellClass::Goal);
        if goals.len() != 1 {
            return Err(MapError::MissingGoal(goals.len()));
        }
        Ok(MapSpec {
            n_rows,
            n_cols,
            cells,
            start_state: starts[0],
            goal_state: goals[0],
        })
    }

    pub fn default_4x4() -> Self {
        Self::parse(DEFAULT_MAP).expect("bundled map is valid")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn n_states(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[CellClass] {
        &self.cells
    }

    pub fn start_state(&self) -> State {
        self.start_state
    }

    pub fn goal_state(&self) -> State {
        self.goal_state
    }

    pub fn cell(&self, state: State) -> CellClass {
        self.cells[state]
    }

    pub fn is_terminal(&self, state: State) -> bool {
        self.cells[state].is_terminal()
    }

    pub fn is_hole(&self, state: State) -> bool {
        self.cells[state] == CellClass::Hole
    }

    /// `(row, col)` of a state in the rendered (top-left origin) layout.
    pub fn row_col(&self, state: State) -> (usize, usize) {
        (state / self.n_cols, state % self.n_cols)
    }

    /// Position in the y-up frame: `x` is the column, `y` counts rows from the bottom.
    pub fn state_xy(&self, state: State) -> (usize, usize) {
        let (row, col) = self.row_col(state);
        (col, self.n_rows - 1 - row)
    }

    pub fn xy_state(&self, x: usize, y: usize) -> Option<State> {
        (x < self.n_cols && y < self.n_rows).then(|| (self.n_rows - 1 - y) * self.n_cols + x)
    }

    /// Intended successor under `action`; off-grid moves stay put.
    pub fn neighbor(&self, state: State, action: Action) -> State {
        let (x, y) = self.state_xy(state);
        let (dx, dy) = action.delta();
        let nx = x as i64 + dx;
        let ny = y as i64 + dy;
        if nx < 0 || ny < 0 {
            return state;
        }
        self.xy_state(nx as usize, ny as usize).unwrap_or(state)
    }

    fn outcome(&self, next_state: State) -> StepOutcome {
        let goal = next_state == self.goal_state;
        StepOutcome {
            next_state,
            reward: if goal { 1.0 } else { 0.0 },
            terminated: self.is_terminal(next_state),
        }
    }

    /// One environment transition.
    ///
    /// In slippery mode the agent moves in the intended direction or either
    /// perpendicular direction, each with probability 1/3. The rng is only
    /// consumed in slippery mode.
    pub fn step<R: Rng + ?Sized>(
        &self,
        state: State,
        action: Action,
        slippery: bool,
        rng: &mut R,
    ) -> Result<StepOutcome, StepError> {
        if state >= self.n_states() {
            return Err(StepError::InvalidState(state));
        }
        if self.is_terminal(state) {
            return Err(StepError::SteppedFromTerminalState(state));
        }
        let taken = if slippery {
            let [a, b] = action.perpendicular();
            match rng.gen_range(0..3u8) {
                0 => action,
                1 => a,
                _ => b,
            }
        } else {
            action
        };
        Ok(self.outcome(self.neighbor(state, taken)))
    }

    /// Deterministic transition; never touches an rng.
    pub fn step_deterministic(
        &self,
        state: State,
        action: Action,
    ) -> Result<StepOutcome, StepError> {
        if state >= self.n_states() {
            return Err(StepError::InvalidState(state));
        }
        if self.is_terminal(state) {
            return Err(StepError::SteppedFromTerminalState(state));
        }
        Ok(self.outcome(self.neighbor(state, action)))
    }
}

impl FromStr for MapSpec {
    type Err = MapError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MapSpec::parse(s)
    }
}

/// Renders in the map file format: one row per line, newline-terminated.
impl fmt::Display for MapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.cells.chunks(self.n_cols) {
            for cell in row {
                write!(f, "{}", cell.as_char())?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn positions(cells: &[CellClass], class: CellClass) -> Vec<State> {
    cells
        .iter()
        .enumerate()
        .filter(|(_, c)| **c == class)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: State,
    pub reward: f64,
    pub terminated: bool,
}
