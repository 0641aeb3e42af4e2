//! Reading and writing the CLEVR scene-annotation JSON layout.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{
    default_directions, AttributeSchema, Entity, Position, Scene, SceneError, DEFAULT_MAX_ENTITIES,
};

#[derive(Deserialize)]
struct RawFile {
    scenes: Vec<RawScene>,
}

#[derive(Deserialize)]
struct RawScene {
    image_index: u64,
    objects: Vec<Map<String, Value>>,
    #[serde(default)]
    directions: Option<BTreeMap<String, [f64; 3]>>,
}

#[derive(Serialize)]
struct OutFile {
    scenes: Vec<OutScene>,
}

#[derive(Serialize)]
struct OutScene {
    image_index: u64,
    objects: Vec<Map<String, Value>>,
    directions: BTreeMap<String, [f64; 3]>,
}

pub fn load_scenes(
    path: impl AsRef<Path>,
    schema: &AttributeSchema,
) -> Result<Vec<Scene>, SceneError> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| SceneError::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_scenes(&text, schema)
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let start: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (start + column.saturating_sub(1)).min(text.len())
}

pub fn parse_scenes(text: &str, schema: &AttributeSchema) -> Result<Vec<Scene>, SceneError> {
    let raw: RawFile = serde_json::from_str(text).map_err(|e| SceneError::Parse {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    raw.scenes.into_iter().map(|s| convert(s, schema)).collect()
}

fn convert(raw: RawScene, schema: &AttributeSchema) -> Result<Scene, SceneError> {
    let id = raw.image_index;
    let err = |entity: Option<usize>, message: String| SceneError::Schema {
        scene_id: Some(id),
        entity,
        message,
    };
    let mut entities = Vec::with_capacity(raw.objects.len());
    for (i, obj) in raw.objects.iter().enumerate() {
        let mut values = Vec::with_capacity(schema.num_dimensions());
        for d in 0..schema.num_dimensions() {
            let key = schema.file_key(d);
            let name = obj
                .get(key)
                .and_then(Value::as_str)
                .ok_or_else(|| err(Some(i), format!("missing string field `{key}`")))?;
            let pos = schema
                .values(d)
                .iter()
                .position(|v| v == name)
                .ok_or_else(|| {
                    err(
                        Some(i),
                        format!("unknown {} value `{name}`", schema.dimension_name(d)),
                    )
                })?;
            values.push(pos);
        }
        let coords: [f64; 3] = obj
            .get("3d_coords")
            .cloned()
            .and_then(|v| serde_json::from_value(v).ok())
            .ok_or_else(|| err(Some(i), "missing or malformed `3d_coords`".into()))?;
        entities.push(Entity::new(i, values, coords, schema).map_err(|e| match e {
            SceneError::Schema { message, .. } => err(Some(i), message),
            other => other,
        })?);
    }
    let directions = match raw.directions {
        None => default_directions(),
        Some(map) => {
            let mut d = [[0.0; 3]; 4];
            for p in Position::ALL {
                d[p as usize] = *map
                    .get(p.as_str())
                    .ok_or_else(|| err(None, format!("directions block lacks `{p}`")))?;
            }
            d
        }
    };
    Scene::new(id, entities, directions, DEFAULT_MAX_ENTITIES)
}

pub fn scenes_to_json(scenes: &[Scene], schema: &AttributeSchema) -> String {
    let out = OutFile {
        scenes: scenes
            .iter()
            .map(|s| OutScene {
                image_index: s.scene_id,
                objects: s
                    .entities()
                    .iter()
                    .map(|e| {
                        let mut m = Map::new();
                        for a in e.attrs() {
                            m.insert(
                                schema.file_key(a.dim).to_string(),
                                Value::String(schema.name(a).to_string()),
                            );
                        }
                        m.insert("3d_coords".into(), serde_json::json!(e.coords));
                        m
                    })
                    .collect(),
                directions: Position::ALL
                    .iter()
                    .map(|p| (p.as_str().to_string(), s.direction(*p)))
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&out).expect("scene serialization cannot fail")
}

pub fn write_scenes(
    path: impl AsRef<Path>,
    scenes: &[Scene],
    schema: &AttributeSchema,
) -> Result<(), SceneError> {
    std::fs::write(path.as_ref(), scenes_to_json(scenes, schema))
        .map_err(|e| SceneError::Io(format!("{}: {e}", path.as_ref().display())))
}
