use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Position, SceneError};

/// One attribute value, addressed by dimension index and value index within
/// that dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Attr {
    pub dim: usize,
    pub value: usize,
}

/// The attribute vocabulary of a scene domain.
///
/// Dimensions are ordered; that order is the canonical order used when a
/// handle is created. Every value name belongs to exactly one dimension, so
/// a bare token such as `red` resolves to an [`Attr`] without context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchemaDef", into = "SchemaDef")]
pub struct AttributeSchema {
    dimensions: Vec<String>,
    values: Vec<Vec<String>>,
    noun_dimension: usize,
    file_keys: Vec<String>,
    value_index: HashMap<String, Attr>,
    dim_index: HashMap<String, usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SchemaDef {
    dimensions: Vec<String>,
    values_per_dimension: BTreeMap<String, Vec<String>>,
    #[serde(default = "default_positions")]
    positions: Vec<String>,
    #[serde(default)]
    noun_dimension: Option<String>,
    #[serde(default)]
    file_keys: BTreeMap<String, String>,
}

fn default_positions() -> Vec<String> {
    Position::ALL
        .iter()
        .map(|p| p.as_str().to_string())
        .collect()
}

impl Default for AttributeSchema {
    fn default() -> Self {
        Self::clevr()
    }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-')
}

impl AttributeSchema {
    /// The CLEVR vocabulary: sizes, colours, materials and shapes.
    pub fn clevr() -> Self {
        let s = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        let mut file_keys = BTreeMap::new();
        file_keys.insert("colour".to_string(), "color".to_string());
        Self::new(
            s(&["size", "colour", "material", "shape"]),
            vec![
                s(&["large", "small"]),
                s(&[
                    "blue", "brown", "cyan", "grey", "green", "purple", "red", "yellow",
                ]),
                s(&["rubber", "metal"]),
                s(&["cube", "cylinder", "sphere"]),
            ],
            "shape",
            file_keys,
        )
        .expect("built-in schema is valid")
    }

    pub fn new(
        dimensions: Vec<String>,
        values: Vec<Vec<String>>,
        noun_dimension: &str,
        file_keys: BTreeMap<String, String>,
    ) -> Result<Self, SceneError> {
        if dimensions.is_empty() || dimensions.len() != values.len() {
            return Err(SceneError::schema(
                "dimension list and value lists disagree",
            ));
        }
        let mut seen: HashMap<&str, ()> = HashMap::new();
        let mut dim_index = HashMap::new();
        let mut value_index = HashMap::new();
        for (d, name) in dimensions.iter().enumerate() {
            if !valid_name(name) {
                return Err(SceneError::schema(format!(
                    "invalid dimension name `{name}`"
                )));
            }
            if seen.insert(name, ()).is_some() {
                return Err(SceneError::schema(format!("duplicate name `{name}`")));
            }
            dim_index.insert(name.clone(), d);
            if values[d].is_empty() {
                return Err(SceneError::schema(format!(
                    "dimension `{name}` has no values"
                )));
            }
            for (v, value) in values[d].iter().enumerate() {
                if !valid_name(value) {
                    return Err(SceneError::schema(format!("invalid value name `{value}`")));
                }
                if seen.insert(value, ()).is_some() {
                    return Err(SceneError::schema(format!("duplicate name `{value}`")));
                }
                value_index.insert(value.clone(), Attr { dim: d, value: v });
            }
        }
        let noun = *dim_index.get(noun_dimension).ok_or_else(|| {
            SceneError::schema(format!(
                "noun dimension `{noun_dimension}` is not a dimension"
            ))
        })?;
        let mut keys = dimensions.clone();
        for (dim, key) in file_keys {
            let d = *dim_index.get(&dim).ok_or_else(|| {
                SceneError::schema(format!("file key for unknown dimension `{dim}`"))
            })?;
            keys[d] = key;
        }
        Ok(Self {
            dimensions,
            values,
            noun_dimension: noun,
            file_keys: keys,
            value_index,
            dim_index,
        })
    }

    pub fn num_dimensions(&self) -> usize {
        self.dimensions.len()
    }

    pub fn dimension_name(&self, dim: usize) -> &str {
        &self.dimensions[dim]
    }

    pub fn dimension_names(&self) -> &[String] {
        &self.dimensions
    }

    /// Dimension index by name; the file spelling (e.g. `color`) is accepted too.
    pub fn dimension(&self, name: &str) -> Option<usize> {
        self.dim_index
            .get(name)
            .copied()
            .or_else(|| self.file_keys.iter().position(|k| k == name))
    }

    /// Key used for this dimension inside scene files.
    pub fn file_key(&self, dim: usize) -> &str {
        &self.file_keys[dim]
    }

    pub fn values(&self, dim: usize) -> &[String] {
        &self.values[dim]
    }

    pub fn noun_dimension(&self) -> usize {
        self.noun_dimension
    }

    pub fn attr(&self, token: &str) -> Option<Attr> {
        self.value_index.get(token).copied()
    }

    pub fn name(&self, attr: Attr) -> &str {
        &self.values[attr.dim][attr.value]
    }

    /// Every attribute of every dimension, dimension-major.
    pub fn all_attrs(&self) -> impl Iterator<Item = Attr> + '_ {
        self.values
            .iter()
            .enumerate()
            .flat_map(|(dim, vs)| (0..vs.len()).map(move |value| Attr { dim, value }))
    }

    /// Writes a handle as `small-cylinder-red`.
    pub fn display_handle(&self, handle: &[Attr]) -> String {
        handle
            .iter()
            .map(|a| self.name(*a))
            .collect::<Vec<_>>()
            .join("-")
    }
}

impl TryFrom<SchemaDef> for AttributeSchema {
    type Error = SceneError;

    fn try_from(def: SchemaDef) -> Result<Self, Self::Error> {
        if def.positions != default_positions() {
            return Err(SceneError::schema(
                "positions must be exactly [right, left, front, behind]",
            ));
        }
        let mut values = Vec::with_capacity(def.dimensions.len());
        for d in &def.dimensions {
            values.push(
                def.values_per_dimension
                    .get(d)
                    .cloned()
                    .ok_or_else(|| SceneError::schema(format!("no values for dimension `{d}`")))?,
            );
        }
        if def.values_per_dimension.len() != def.dimensions.len() {
            return Err(SceneError::schema(
                "values given for an undeclared dimension",
            ));
        }
        let noun = def
            .noun_dimension
            .unwrap_or_else(|| def.dimensions.last().cloned().unwrap_or_default());
        AttributeSchema::new(def.dimensions, values, &noun, def.file_keys)
    }
}

impl From<AttributeSchema> for SchemaDef {
    fn from(s: AttributeSchema) -> Self {
        let values_per_dimension = s
            .dimensions
            .iter()
            .cloned()
            .zip(s.values.iter().cloned())
            .collect();
        let file_keys = s
            .dimensions
            .iter()
            .zip(&s.file_keys)
            .filter(|(d, k)| d != k)
            .map(|(d, k)| (d.clone(), k.clone()))
            .collect();
        SchemaDef {
            dimensions: s.dimensions.clone(),
            values_per_dimension,
            positions: default_positions(),
            noun_dimension: Some(s.dimensions[s.noun_dimension].clone()),
            file_keys,
        }
    }
}

impl fmt::Display for Attr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.dim, self.value)
    }
}
