use std::collections::VecDeque;
use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Cell { x, y }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Cardinal moves; `y` grows southwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    North,
    South,
    East,
    West,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::North, Action::South, Action::East, Action::West];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Square,
    Circle,
}

impl Shape {
    pub const ALL: [Shape; 2] = [Shape::Square, Shape::Circle];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Square => "Square",
            Shape::Circle => "Circle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Blue,
    Beige,
    Purple,
}

impl Color {
    pub const ALL: [Color; 3] = [Color::Blue, Color::Beige, Color::Purple];

    pub fn name(self) -> &'static str {
        match self {
            Color::Blue => "Blue",
            Color::Beige => "Beige",
            Color::Purple => "Purple",
        }
    }

    pub fn rgb(self) -> [u8; 3] {
        match self {
            Color::Blue => [0, 0, 255],
            Color::Beige => [225, 200, 160],
            Color::Purple => [150, 50, 200],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Item {
    pub shape: Shape,
    pub color: Color,
    pub cell: Cell,
}

impl Item {
    pub fn name(&self) -> String {
        format!("{}{}", self.color.name(), self.shape.name())
    }
}

#[derive(Deserialize)]
struct RawGrid {
    width: usize,
    height: usize,
    #[serde(default)]
    walls: Vec<Cell>,
    #[serde(default)]
    rng_seed: u64,
}

/// Grid dimensions and walls. Non-wall cells are numbered row by row; that
/// numbering is the state index of every MDP built on the grid, and the
/// virtual goal comes last.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct GridSpec {
    width: usize,
    height: usize,
    walls: Vec<Cell>,
    rng_seed: u64,
    #[serde(skip)]
    cells: Vec<Cell>,
    #[serde(skip)]
    index: Vec<Option<usize>>,
}

impl TryFrom<RawGrid> for GridSpec {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        GridSpec::new(raw.width, raw.height, raw.walls, raw.rng_seed)
    }
}

impl GridSpec {
    pub fn new(width: usize, height: usize, mut walls: Vec<Cell>, rng_seed: u64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Layout(format!("grid must be nonempty, got {width}x{height}")));
        }
        if let Some(w) = walls.iter().find(|c| c.x >= width || c.y >= height) {
            return Err(Error::Layout(format!(
                "wall {w} lies outside the {width}x{height} grid"
            )));
        }
        walls.sort();
        walls.dedup();
        let mut index = vec![None; width * height];
        let mut cells = Vec::new();
        for y in 0..height {
            for x in 0..width {
                let c = Cell::new(x, y);
                if walls.binary_search(&c).is_err() {
                    index[y * width + x] = Some(cells.len());
                    cells.push(c);
                }
            }
        }
        if cells.is_empty() {
            return Err(Error::Layout("grid has no free cells".into()));
        }
        let grid = GridSpec {
            width,
            height,
            walls,
            rng_seed,
            cells,
            index,
        };
        let reached = grid.bfs_from(&[grid.cells[0]]).iter().filter(|d| d.is_some()).count();
        if reached != grid.cells.len() {
            return Err(Error::Layout(format!(
                "free cells are not connected: {} of {} reachable",
                reached,
                grid.cells.len()
            )));
        }
        Ok(grid)
    }

    /// Wall-free room.
    pub fn open(width: usize, height: usize, rng_seed: u64) -> Result<Self> {
        Self::new(width, height, Vec::new(), rng_seed)
    }

    /// Places up to `n_walls` random walls, skipping any that would
    /// disconnect the free cells.
    pub fn with_random_walls(width: usize, height: usize, n_walls: usize, seed: u64) -> Result<Self> {
        let mut rng = seeded(seed);
        let mut candidates: Vec<Cell> = (0..height)
            .flat_map(|y| (0..width).map(move |x| Cell::new(x, y)))
            .collect();
        candidates.shuffle(&mut rng);
        let mut grid = Self::open(width, height, seed)?;
        let mut walls = Vec::new();
        for c in candidates {
            if walls.len() == n_walls {
                break;
            }
            walls.push(c);
            match Self::new(width, height, walls.clone(), seed) {
                Ok(g) => grid = g,
                Err(_) => {
                    walls.pop();
                }
            }
        }
        Ok(grid)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn walls(&self) -> &[Cell] {
        &self.walls
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    pub fn is_wall(&self, c: Cell) -> bool {
        self.in_bounds(c) && self.index[c.y * self.width + c.x].is_none()
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.state_of(c).is_some()
    }

    /// Free cells in state order.
    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Cells plus the virtual goal.
    pub fn n_states(&self) -> usize {
        self.cells.len() + 1
    }

    pub fn goal_state(&self) -> usize {
        self.cells.len()
    }

    pub fn state_of(&self, c: Cell) -> Option<usize> {
        if !self.in_bounds(c) {
            return None;
        }
        self.index[c.y * self.width + c.x]
    }

    /// `None` for the virtual goal or out-of-range states.
    pub fn cell_of(&self, state: usize) -> Option<Cell> {
        self.cells.get(state).copied()
    }

    /// Where `action` leads from `c`; walls and borders block.
    pub fn neighbour(&self, c: Cell, action: Action) -> Cell {
        let target = match action {
            Action::North => c.y.checked_sub(1).map(|y| Cell::new(c.x, y)),
            Action::South => Some(Cell::new(c.x, c.y + 1)),
            Action::East => Some(Cell::new(c.x + 1, c.y)),
            Action::West => c.x.checked_sub(1).map(|x| Cell::new(x, c.y)),
        };
        match target {
            Some(t) if self.is_free(t) => t,
            _ => c,
        }
    }

    /// Move counts from the nearest source, indexed by state; `None` if unreachable.
    pub fn bfs_from(&self, sources: &[Cell]) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.cells.len()];
        let mut queue = VecDeque::new();
        for &c in sources {
            if let Some(s) = self.state_of(c) {
                if dist[s].is_none() {
                    dist[s] = Some(0);
                    queue.push_back(c);
                }
            }
        }
        while let Some(c) = queue.pop_front() {
            let d = dist[self.state_of(c).expect("queued cells are free")].expect("queued");
            for a in Action::ALL {
                let n = self.neighbour(c, a);
                let s = self.state_of(n).expect("neighbours are free");
                if dist[s].is_none() {
                    dist[s] = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }
}

/// A grid with items placed on distinct free cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLayout")]
pub struct Layout {
    grid: GridSpec,
    items: Vec<Item>,
}

#[derive(Deserialize)]
struct RawLayout {
    grid: GridSpec,
    items: Vec<Item>,
}

impl TryFrom<RawLayout> for Layout {
    type Error = Error;

    fn try_from(raw: RawLayout) -> Result<Self> {
        Layout::new(raw.grid, raw.items)
    }
}

impl Layout {
    pub fn new(grid: GridSpec, items: Vec<Item>) -> Result<Self> {
        for (i, item) in items.iter().enumerate() {
            if !grid.is_free(item.cell) {
                return Err(Error::Layout(format!(
                    "{} at {} is not on a free cell",
                    item.name(),
                    item.cell
                )));
            }
            if items[..i].iter().any(|other| other.cell == item.cell) {
                return Err(Error::Layout(format!("two items share cell {}", item.cell)));
            }
        }
        Ok(Layout { grid, items })
    }

    /// One item of every (shape, colour) pair on random free cells, seeded by
    /// the grid's `rng_seed`.
    pub fn sample_full(grid: GridSpec) -> Result<Self> {
        let kinds: Vec<(Shape, Color)> = Color::ALL
            .iter()
            .flat_map(|&c| Shape::ALL.iter().map(move |&s| (s, c)))
            .collect();
        Self::sample(grid, &kinds)
    }

    pub fn sample(grid: GridSpec, kinds: &[(Shape, Color)]) -> Result<Self> {
        if kinds.len() > grid.n_cells() {
            return Err(Error::Layout(format!(
                "{} items do not fit on {} free cells",
                kinds.len(),
                grid.n_cells()
            )));
        }
        let mut rng = seeded(grid.rng_seed());
        let cells: Vec<Cell> = grid.cells().choose_multiple(&mut rng, kinds.len()).copied().collect();
        let items = kinds
            .iter()
            .zip(cells)
            .map(|(&(shape, color), cell)| Item { shape, color, cell })
            .collect();
        Self::new(grid, items)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn item_at(&self, c: Cell) -> Option<&Item> {
        self.items.iter().find(|i| i.cell == c)
    }

    /// Free cells without items, as state indices; the default start set.
    pub fn start_states(&self) -> Vec<usize> {
        self.grid
            .cells()
            .iter()
            .enumerate()
            .filter(|(_, &c)| self.item_at(c).is_none())
            .map(|(s, _)| s)
            .collect()
    }

    /// Same grid with only the items whose indices are set in `keep`.
    pub fn with_items(&self, keep: impl Fn(usize) -> bool) -> Layout {
        Layout {
            grid: self.grid.clone(),
            items: self
                .items
                .iter()
                .enumerate()
                .filter(|(i, _)| keep(*i))
                .map(|(_, item)| *item)
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_numbering_skips_walls() {
        let grid = GridSpec::new(3, 2, vec![Cell::new(1, 0)], 0).unwrap();
        assert_eq!(grid.n_cells(), 5);
        assert_eq!(grid.state_of(Cell::new(0, 0)), Some(0));
        assert_eq!(grid.state_of(Cell::new(1, 0)), None);
        assert_eq!(grid.state_of(Cell::new(2, 0)), Some(1));
        assert_eq!(grid.state_of(Cell::new(0, 1)), Some(2));
        assert_eq!(grid.cell_of(4), Some(Cell::new(2, 1)));
        assert_eq!(grid.cell_of(5), None);
        assert_eq!(grid.goal_state(), 5);
    }

    #[test]
    fn moves_are_blocked_by_walls_and_borders() {
        let grid = GridSpec::new(3, 2, vec![Cell::new(1, 0)], 0).unwrap();
        let c = Cell::new(0, 0);
        assert_eq!(grid.neighbour(c, Action::East), c);
        assert_eq!(grid.neighbour(c, Action::North), c);
        assert_eq!(grid.neighbour(c, Action::West), c);
        assert_eq!(grid.neighbour(c, Action::South), Cell::new(0, 1));
    }

    #[test]
    fn disconnected_grids_are_rejected() {
        let walls = vec![Cell::new(1, 0), Cell::new(1, 1), Cell::new(1, 2)];
        assert!(matches!(GridSpec::new(3, 3, walls, 0), Err(Error::Layout(_))));
        assert!(GridSpec::new(0, 3, vec![], 0).is_err());
        assert!(GridSpec::new(2, 2, vec![Cell::new(5, 5)], 0).is_err());
    }

    #[test]
    fn random_walls_keep_connectivity() {
        for seed in 0..10 {
            let grid = GridSpec::with_random_walls(6, 6, 10, seed).unwrap();
            assert_eq!(grid.walls().len(), 10);
            assert!(grid.bfs_from(&[grid.cells()[0]]).iter().all(|d| d.is_some()));
        }
    }

    #[test]
    fn bfs_on_a_corridor() {
        let grid = GridSpec::open(4, 1, 0).unwrap();
        let d = grid.bfs_from(&[Cell::new(3, 0)]);
        assert_eq!(d, vec![Some(3), Some(2), Some(1), Some(0)]);
    }

    #[test]
    fn full_layout_has_six_distinct_items() {
        let layout = Layout::sample_full(GridSpec::open(10, 10, 7).unwrap()).unwrap();
        assert_eq!(layout.items().len(), 6);
        let again = Layout::sample_full(GridSpec::open(10, 10, 7).unwrap()).unwrap();
        assert_eq!(layout, again);
        let mut cells: Vec<Cell> = layout.items().iter().map(|i| i.cell).collect();
        cells.sort();
        cells.dedup();
        assert_eq!(cells.len(), 6);
    }

    #[test]
    fn layout_rejects_overlap_and_walls() {
        let grid = GridSpec::new(3, 1, vec![Cell::new(2, 0)], 0).unwrap();
        let item = |x| Item {
            shape: Shape::Square,
            color: Color::Blue,
            cell: Cell::new(x, 0),
        };
        assert!(Layout::new(grid.clone(), vec![item(0), item(0)]).is_err());
        assert!(Layout::new(grid.clone(), vec![item(2)]).is_err());
        assert!(Layout::new(grid, vec![item(0), item(1)]).is_ok());
    }

    #[test]
    fn layout_json_round_trip_rebuilds_the_index() {
        let layout = Layout::sample_full(GridSpec::with_random_walls(5, 4, 3, 2).unwrap()).unwrap();
        let json = serde_json::to_string(&layout).unwrap();
        let back: Layout = serde_json::from_str(&json).unwrap();
        assert_eq!(back, layout);
        assert!(!json.contains("index"));
    }
}
