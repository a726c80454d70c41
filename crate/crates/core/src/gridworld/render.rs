//! Plain-text image output: PGM value heatmaps and PPM trajectory overlays.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::layout::{GridSpec, Layout};
use crate::error::{Error, Result};
use crate::tables::ValueTable;

const FLOOR: [u8; 3] = [220, 220, 220];
const WALL: [u8; 3] = [0, 0, 0];
/// Path cells keep their blue channel; red is saturated and green cleared.
pub const PATH_RED: u8 = 255;

/// Grey levels row by row, walls 0, free cells min-max scaled to 0..=255
/// (128 everywhere when all values coincide).
pub fn heatmap_levels(v: &ValueTable, grid: &GridSpec) -> Result<Vec<u8>> {
    if v.len() != grid.n_states() && v.len() != grid.n_cells() {
        return Err(Error::Dimension(format!(
            "value table has {} states, grid has {} cells",
            v.len(),
            grid.n_cells()
        )));
    }
    let values = &v.as_slice()[..grid.n_cells()];
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let mut levels = vec![0u8; grid.width() * grid.height()];
    for (s, c) in grid.cells().iter().enumerate() {
        levels[c.y * grid.width() + c.x] = if range > 0.0 && range.is_finite() {
            (255.0 * (values[s] - lo) / range).round() as u8
        } else {
            128
        };
    }
    Ok(levels)
}

/// Writes a P2 heatmap to `path` and the raw values to `path` with a `.csv` extension.
pub fn render_value_heatmap(v: &ValueTable, grid: &GridSpec, path: &Path) -> Result<()> {
    let levels = heatmap_levels(v, grid)?;
    let mut pgm = format!("P2\n{} {}\n255\n", grid.width(), grid.height());
    for row in levels.chunks(grid.width()) {
        let line: Vec<String> = row.iter().map(u8::to_string).collect();
        pgm.push_str(&line.join(" "));
        pgm.push('\n');
    }
    fs::write(path, pgm)?;

    let mut csv = csv::Writer::from_path(path.with_extension("csv"))?;
    csv.write_record(["x", "y", "value"])?;
    for (s, c) in grid.cells().iter().enumerate() {
        csv.write_record([c.x.to_string(), c.y.to_string(), v.get(s).to_string()])?;
    }
    csv.flush()?;
    Ok(())
}

/// RGB pixels row by row: walls black, floor light grey, items in their
/// colour, and cells of `path` (state indices) marked with [`PATH_RED`].
pub fn overlay_pixels(layout: &Layout, path: &[usize]) -> Vec<[u8; 3]> {
    let grid = layout.grid();
    let mut pixels = vec![WALL; grid.width() * grid.height()];
    for c in grid.cells() {
        pixels[c.y * grid.width() + c.x] = FLOOR;
    }
    for item in layout.items() {
        pixels[item.cell.y * grid.width() + item.cell.x] = item.color.rgb();
    }
    for c in path.iter().filter_map(|&s| grid.cell_of(s)) {
        let p = &mut pixels[c.y * grid.width() + c.x];
        *p = [PATH_RED, 0, p[2]];
    }
    pixels
}

/// Writes a P3 overlay of the visited cells in `path` onto the layout.
pub fn render_trajectory(path: &[usize], layout: &Layout, out: &Path) -> Result<()> {
    let grid = layout.grid();
    let pixels = overlay_pixels(layout, path);
    let mut ppm = format!("P3\n{} {}\n255\n", grid.width(), grid.height());
    for row in pixels.chunks(grid.width()) {
        let line: Vec<String> = row.iter().map(|[r, g, b]| format!("{r} {g} {b}")).collect();
        ppm.push_str(&line.join("  "));
        ppm.push('\n');
    }
    fs::write(out, ppm)?;
    Ok(())
}

/// Text view: `#` wall, `.` floor, item initials (lowercase for circles), `*` path.
pub fn ascii(layout: &Layout, path: &[usize]) -> String {
    let grid = layout.grid();
    let on_path: Vec<_> = path.iter().filter_map(|&s| grid.cell_of(s)).collect();
    let mut out = String::new();
    for y in 0..grid.height() {
        for x in 0..grid.width() {
            let c = super::layout::Cell::new(x, y);
            let ch = if grid.is_wall(c) {
                '#'
            } else if let Some(item) = layout.item_at(c) {
                let initial = item.color.name().chars().next().expect("nonempty name");
                match item.shape {
                    super::layout::Shape::Square => initial,
                    super::layout::Shape::Circle => initial.to_ascii_lowercase(),
                }
            } else if on_path.contains(&c) {
                '*'
            } else {
                '.'
            };
            out.push(ch);
        }
        let _ = writeln!(out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{Cell, Color, Item, Shape};

    fn corridor() -> Layout {
        let item = Item {
            shape: Shape::Square,
            color: Color::Blue,
            cell: Cell::new(3, 0),
        };
        Layout::new(GridSpec::open(4, 1, 0).unwrap(), vec![item]).unwrap()
    }

    #[test]
    fn constant_values_render_mid_grey() {
        let grid = GridSpec::new(3, 2, vec![Cell::new(1, 1)], 0).unwrap();
        let levels = heatmap_levels(&ValueTable::new(vec![0.3; 6]), &grid).unwrap();
        assert_eq!(levels, vec![128, 128, 128, 128, 0, 128]);
    }

    #[test]
    fn heatmap_scales_to_full_range() {
        let grid = GridSpec::open(4, 1, 0).unwrap();
        let v = ValueTable::new(vec![0.7, 0.8, 0.9, 1.0, 0.0]);
        assert_eq!(heatmap_levels(&v, &grid).unwrap(), vec![0, 85, 170, 255]);
        assert!(heatmap_levels(&ValueTable::new(vec![0.0; 2]), &grid).is_err());
    }

    #[test]
    fn heatmap_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.pgm");
        let grid = GridSpec::open(2, 2, 0).unwrap();
        render_value_heatmap(&ValueTable::new(vec![1.0, 2.0, 3.0, 4.0, 0.0]), &grid, &path).unwrap();
        let pgm = fs::read_to_string(&path).unwrap();
        assert_eq!(pgm, "P2\n2 2\n255\n0 85\n170 255\n");
        let csv = fs::read_to_string(dir.path().join("v.csv")).unwrap();
        assert_eq!(csv.lines().next(), Some("x,y,value"));
        assert_eq!(csv.lines().count(), 5);
    }

    fn marked(pixels: &[[u8; 3]]) -> usize {
        pixels.iter().filter(|p| p[0] == PATH_RED && p[1] == 0).count()
    }

    #[test]
    fn overlay_marks_path_cells() {
        let layout = corridor();
        assert_eq!(marked(&overlay_pixels(&layout, &[])), 0);
        // Three steps from cell 0 end on cell 3; the goal state is not drawn.
        assert_eq!(marked(&overlay_pixels(&layout, &[0, 1, 2, 3])), 4);
        assert_eq!(marked(&overlay_pixels(&layout, &[1, 2, 3, 4])), 3);
        assert_eq!(overlay_pixels(&layout, &[3])[3], [255, 0, 255]);
    }

    #[test]
    fn ascii_view() {
        assert_eq!(ascii(&corridor(), &[0, 1]), "**.B\n");
    }
}
