//! Scene graphs: attributed entities with coordinates, and the spatial
//! predicates the executor reasons with.

mod generate;
mod io;
mod schema;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{generate_scene, SceneGenConfig};
pub use io::{load_scenes, parse_scenes, scenes_to_json, write_scenes};
pub use schema::{Attr, AttributeSchema};

/// Tolerance for spatial comparisons, in scene units.
pub const SPATIAL_EPS: f64 = 1e-6;

/// Upper bound on entities per scene unless configured otherwise.
pub const DEFAULT_MAX_ENTITIES: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("schema error{}: {message}", location(*scene_id, *entity))]
    Schema {
        scene_id: Option<u64>,
        entity: Option<usize>,
        message: String,
    },
    #[error("entity index {0} out of range")]
    Index(usize),
    #[error("empty candidate set")]
    EmptyCandidates,
    #[error("generation failed: {0}")]
    Generation(String),
    #[error("i/o error: {0}")]
    Io(String),
}

fn location(scene: Option<u64>, entity: Option<usize>) -> String {
    match (scene, entity) {
        (Some(s), Some(e)) => format!(" (scene {s}, entity {e})"),
        (Some(s), None) => format!(" (scene {s})"),
        _ => String::new(),
    }
}

impl SceneError {
    pub(crate) fn schema(message: impl Into<String>) -> Self {
        SceneError::Schema {
            scene_id: None,
            entity: None,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Right,
    Left,
    Front,
    Behind,
}

impl Position {
    pub const ALL: [Position; 4] = [
        Position::Right,
        Position::Left,
        Position::Front,
        Position::Behind,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Position::Right => "right",
            Position::Left => "left",
            Position::Front => "front",
            Position::Behind => "behind",
        }
    }

    pub fn opposite(self) -> Position {
        match self {
            Position::Right => Position::Left,
            Position::Left => Position::Right,
            Position::Front => Position::Behind,
            Position::Behind => Position::Front,
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Position {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Position::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or(())
    }
}

/// Target of an `extreme-*` caption.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    Towards(Position),
    Centre,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub index: usize,
    values: Vec<usize>,
    pub coords: [f64; 3],
}

impl Entity {
    /// `values[d]` is the value index for dimension `d` of `schema`.
    pub fn new(
        index: usize,
        values: Vec<usize>,
        coords: [f64; 3],
        schema: &AttributeSchema,
    ) -> Result<Self, SceneError> {
        if values.len() != schema.num_dimensions() {
            return Err(SceneError::Schema {
                scene_id: None,
                entity: Some(index),
                message: "attribute count does not match schema".into(),
            });
        }
        for (d, v) in values.iter().enumerate() {
            if *v >= schema.values(d).len() {
                return Err(SceneError::Schema {
                    scene_id: None,
                    entity: Some(index),
                    message: format!("value {v} out of range for `{}`", schema.dimension_name(d)),
                });
            }
        }
        Ok(Entity {
            index,
            values,
            coords,
        })
    }

    pub fn value(&self, dim: usize) -> usize {
        self.values[dim]
    }

    pub fn attr(&self, dim: usize) -> Attr {
        Attr {
            dim,
            value: self.values[dim],
        }
    }

    pub fn has(&self, attr: Attr) -> bool {
        self.values.get(attr.dim) == Some(&attr.value)
    }

    pub fn attrs(&self) -> impl Iterator<Item = Attr> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(dim, &value)| Attr { dim, value })
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Euclidean distance in the ground plane.
pub fn xy_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Axis-aligned directions: right = +x, front = -y.
pub fn default_directions() -> [[f64; 3]; 4] {
    [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 1.0, 0.0],
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub scene_id: u64,
    entities: Vec<Entity>,
    directions: [[f64; 3]; 4],
}

impl Scene {
    pub fn new(
        scene_id: u64,
        entities: Vec<Entity>,
        directions: [[f64; 3]; 4],
        max_entities: usize,
    ) -> Result<Self, SceneError> {
        let err = |message: String| SceneError::Schema {
            scene_id: Some(scene_id),
            entity: None,
            message,
        };
        if entities.is_empty() {
            return Err(err("scene has no entities".into()));
        }
        if entities.len() > max_entities {
            return Err(err(format!(
                "scene has {} entities, maximum is {max_entities}",
                entities.len()
            )));
        }
        if let Some(e) = entities.iter().enumerate().find(|(i, e)| e.index != *i) {
            return Err(err(format!(
                "entity at position {} has index {}",
                e.0, e.1.index
            )));
        }
        for (pos, opp) in [
            (Position::Right, Position::Left),
            (Position::Front, Position::Behind),
        ] {
            let a = directions[pos.slot()];
            let b = directions[opp.slot()];
            if (0..3).any(|k| (a[k] + b[k]).abs() > SPATIAL_EPS) {
                return Err(err(format!(
                    "direction `{opp}` is not the negation of `{pos}`"
                )));
            }
        }
        Ok(Scene {
            scene_id,
            entities,
            directions,
        })
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn entity(&self, index: usize) -> Result<&Entity, SceneError> {
        self.entities.get(index).ok_or(SceneError::Index(index))
    }

    pub fn direction(&self, pos: Position) -> [f64; 3] {
        self.directions[pos.slot()]
    }

    pub fn directions(&self) -> &[[f64; 3]; 4] {
        &self.directions
    }

    /// Whether entity `a` lies in direction `pos` of entity `b`.
    pub fn relates(&self, a: usize, b: usize, pos: Position) -> Result<bool, SceneError> {
        let ca = self.entity(a)?.coords;
        let cb = self.entity(b)?.coords;
        Ok(dot(sub(ca, cb), self.direction(pos)) > SPATIAL_EPS)
    }

    /// Projection of an entity onto a direction.
    pub fn projection(&self, index: usize, pos: Position) -> Result<f64, SceneError> {
        Ok(dot(self.entity(index)?.coords, self.direction(pos)))
    }

    /// XY centroid of every entity in the scene.
    pub fn centroid(&self) -> [f64; 3] {
        let n = self.entities.len() as f64;
        let mut c = [0.0; 3];
        for e in &self.entities {
            c[0] += e.coords[0] / n;
            c[1] += e.coords[1] / n;
            c[2] += e.coords[2] / n;
        }
        c
    }

    pub fn extreme(&self, candidates: &[usize], target: Extremum) -> Result<usize, SceneError> {
        self.extreme_with_tie(candidates, target).map(|(e, _)| e)
    }

    /// Like [`Scene::extreme`], also reporting whether another candidate was
    /// within [`SPATIAL_EPS`] of the winner (the lowest index wins ties).
    pub fn extreme_with_tie(
        &self,
        candidates: &[usize],
        target: Extremum,
    ) -> Result<(usize, bool), SceneError> {
        if candidates.is_empty() {
            return Err(SceneError::EmptyCandidates);
        }
        let centroid = self.centroid();
        // Lower score is better.
        let score = |i: usize| -> Result<f64, SceneError> {
            let c = self.entity(i)?.coords;
            Ok(match target {
                Extremum::Towards(pos) => -dot(c, self.direction(pos)),
                Extremum::Centre => xy_distance(c, centroid),
            })
        };
        let mut sorted = candidates.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut best = sorted[0];
        let mut best_score = score(best)?;
        for &i in &sorted[1..] {
            let s = score(i)?;
            if s < best_score - SPATIAL_EPS {
                best = i;
                best_score = s;
            }
        }
        let mut tied = false;
        for &i in &sorted {
            if i != best && (score(i)? - best_score).abs() <= SPATIAL_EPS {
                tied = true;
            }
        }
        Ok((best, tied))
    }

    /// Ascending indices of entities carrying every attribute in `constraints`.
    pub fn filter_by_attrs(&self, constraints: &[Attr]) -> Vec<usize> {
        self.entities
            .iter()
            .filter(|e| constraints.iter().all(|a| e.has(*a)))
            .map(|e| e.index)
            .collect()
    }
}
