use std::fmt;

use serde::{Deserialize, Serialize};

use super::layout::{Cell, Color, Item, Layout, Shape};
use crate::error::{Error, Result};

/// Conjunction of an optional colour and an optional shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ItemPredicate {
    pub color: Option<Color>,
    pub shape: Option<Shape>,
}

impl ItemPredicate {
    pub fn matches(&self, item: &Item) -> bool {
        self.color.is_none_or(|c| c == item.color) && self.shape.is_none_or(|s| s == item.shape)
    }

    fn and(self, other: ItemPredicate, name: &str) -> Result<ItemPredicate> {
        fn merge<T: PartialEq + Copy>(a: Option<T>, b: Option<T>, name: &str) -> Result<Option<T>> {
            match (a, b) {
                (Some(x), Some(y)) if x != y => Err(Error::UnknownTask(format!("{name}: conjunction can never match"))),
                (x, y) => Ok(x.or(y)),
            }
        }
        Ok(ItemPredicate {
            color: merge(self.color, other.color, name)?,
            shape: merge(self.shape, other.shape, name)?,
        })
    }
}

impl fmt::Display for ItemPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(c) = self.color {
            f.write_str(c.name())?;
        }
        if let Some(s) = self.shape {
            f.write_str(s.name())?;
        }
        Ok(())
    }
}

/// Collect any item satisfying one of the clauses.
///
/// Names follow the game's conventions: `Purple`, `Square`, `BeigeSquare`,
/// `PurpleOrBlue`, `BlueAndSquare`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GridTask {
    name: String,
    clauses: Vec<ItemPredicate>,
}

impl GridTask {
    pub fn parse(name: &str) -> Result<Self> {
        let clauses = name
            .split("Or")
            .map(|clause| {
                clause.split("And").map(|atom| parse_atom(atom, name)).try_fold(
                    ItemPredicate {
                        color: None,
                        shape: None,
                    },
                    |acc, p| acc.and(p?, name),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GridTask {
            name: name.to_string(),
            clauses,
        })
    }

    /// Task satisfied only by `item`'s colour and shape.
    pub fn for_item(item: &Item) -> Self {
        GridTask {
            name: item.name(),
            clauses: vec![ItemPredicate {
                color: Some(item.color),
                shape: Some(item.shape),
            }],
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn clauses(&self) -> &[ItemPredicate] {
        &self.clauses
    }

    pub fn matches(&self, item: &Item) -> bool {
        self.clauses.iter().any(|c| c.matches(item))
    }

    /// Cells of matching items, in item order.
    pub fn goal_cells(&self, layout: &Layout) -> Vec<Cell> {
        layout
            .items()
            .iter()
            .filter(|i| self.matches(i))
            .map(|i| i.cell)
            .collect()
    }
}

fn parse_atom(atom: &str, name: &str) -> Result<ItemPredicate> {
    let unknown = || Error::UnknownTask(name.to_string());
    if atom.is_empty() {
        return Err(unknown());
    }
    let color = Color::ALL.into_iter().find(|c| atom.starts_with(c.name()));
    let rest = color.map_or(atom, |c| &atom[c.name().len()..]);
    let shape = match rest {
        "" => None,
        _ => Some(Shape::ALL.into_iter().find(|s| s.name() == rest).ok_or_else(unknown)?),
    };
    Ok(ItemPredicate { color, shape })
}

impl TryFrom<String> for GridTask {
    type Error = Error;

    fn try_from(name: String) -> Result<Self> {
        GridTask::parse(&name)
    }
}

impl From<GridTask> for String {
    fn from(t: GridTask) -> String {
        t.name
    }
}

impl fmt::Display for GridTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}
