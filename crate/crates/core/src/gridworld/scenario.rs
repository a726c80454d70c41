use rand::seq::SliceRandom;
use rand::Rng;

use super::layout::{GridSpec, Layout};
use super::task::GridTask;
use crate::error::Result;
use crate::rng::seeded;

/// Base tasks drawn by [`random_instance`].
pub const BASE_TASKS: [&str; 9] = [
    "Blue",
    "Beige",
    "Purple",
    "Square",
    "Circle",
    "BeigeSquare",
    "PurpleCircle",
    "BlueSquare",
    "BeigeCircle",
];

/// Seeded full six-item layout on a grid of side 4..=`max_side` with a few
/// random walls, plus two or three distinct base tasks.
pub fn random_instance(seed: u64, max_side: usize) -> Result<(Layout, Vec<GridTask>)> {
    let mut rng = seeded(seed);
    let max_side = max_side.max(4);
    let width = rng.gen_range(4..=max_side);
    let height = rng.gen_range(4..=max_side);
    let n_walls = rng.gen_range(0..=(width * height) / 8);
    let grid = GridSpec::with_random_walls(width, height, n_walls, rng.gen())?;
    let layout = Layout::sample_full(grid)?;
    let n_tasks = rng.gen_range(2..=3);
    let tasks = BASE_TASKS
        .choose_multiple(&mut rng, n_tasks)
        .map(|name| GridTask::parse(name))
        .collect::<Result<Vec<_>>>()?;
    Ok((layout, tasks))
}
