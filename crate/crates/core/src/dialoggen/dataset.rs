use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dialog;
use crate::dsl::Kind;
use crate::executor::{Executor, KnowledgeBase};
use crate::scene::{AttributeSchema, Scene};

pub const DATASET_VERSION: u32 = 1;

/// Share of dialogs replayed when a dataset is checked after loading.
pub const DEFAULT_REPLAY_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub version: u32,
    pub schema: AttributeSchema,
    pub dialogs: Vec<Dialog>,
}

impl Dataset {
    pub fn new(schema: AttributeSchema, dialogs: Vec<Dialog>) -> Self {
        Dataset {
            version: DATASET_VERSION,
            schema,
            dialogs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DatasetError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported dataset version {0}")]
    Version(u32),
    #[error("dialog {dialog}, round {round}: {message}")]
    InvalidProgram {
        dialog: usize,
        round: usize,
        message: String,
    },
    #[error("dialog {0}: no scene with id {1}")]
    MissingScene(usize, u64),
    #[error(
        "replay mismatch in dialog {dialog}, round {round}: recorded {expected:?}, got {got:?}"
    )]
    ReplayMismatch {
        dialog: usize,
        round: usize,
        expected: String,
        got: String,
    },
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<(), DatasetError> {
    let io = |e: std::io::Error| DatasetError::Io(format!("{}: {e}", path.display()));
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    serde_json::to_writer(&mut w, dataset).map_err(|e| DatasetError::Io(e.to_string()))?;
    w.write_all(b"\n").map_err(io)?;
    w.flush().map_err(io)
}

/// Reads a dataset and validates every program against its schema.
pub fn read_dataset(path: &Path) -> Result<Dataset, DatasetError> {
    let f = File::open(path).map_err(|e| DatasetError::Io(format!("{}: {e}", path.display())))?;
    let ds: Dataset =
        serde_json::from_reader(BufReader::new(f)).map_err(|e| DatasetError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
    if ds.version != DATASET_VERSION {
        return Err(DatasetError::Version(ds.version));
    }
    for (i, d) in ds.dialogs.iter().enumerate() {
        let invalid = |round: usize, message: String| DatasetError::InvalidProgram {
            dialog: i,
            round,
            message,
        };
        if d.rounds.is_empty() {
            return Err(invalid(0, "dialog has no rounds".into()));
        }
        let programs =
            std::iter::once(&d.caption_program).chain(d.rounds.iter().map(|r| &r.program));
        for (round, p) in programs.enumerate() {
            p.validate(&ds.schema)
                .map_err(|e| invalid(round, e.to_string()))?;
            let want = if round == 0 {
                Kind::Caption
            } else {
                Kind::Question
            };
            if p.function.kind() != want {
                return Err(invalid(
                    round,
                    format!("`{}` in the wrong position", p.function),
                ));
            }
        }
    }
    Ok(ds)
}

/// Re-executes a dialog's programs and compares every recorded answer.
/// On mismatch returns the round (0 for the caption) and both values.
pub fn replay_dialog<'s>(
    dialog: &Dialog,
    scene: &'s Scene,
    schema: &AttributeSchema,
) -> Result<KnowledgeBase<'s>, (usize, String, String)> {
    let ex = Executor::new(schema);
    let mut kb = ex.init_kb(scene);
    match ex.execute_caption(&mut kb, &dialog.caption_program) {
        Ok(out) if out.ambiguous == dialog.ambiguous_caption => {}
        Ok(out) => {
            return Err((
                0,
                format!("ambiguous_caption={}", dialog.ambiguous_caption),
                format!("ambiguous_caption={}", out.ambiguous),
            ))
        }
        Err(e) => return Err((0, "caption executes".into(), e.kind_name().into())),
    }
    for (i, r) in dialog.rounds.iter().enumerate() {
        kb.advance_round();
        let got = match ex.execute_question(&mut kb, &r.program) {
            Ok(a) => a.render(schema),
            Err(e) => e.kind_name().to_string(),
        };
        if got != r.answer {
            return Err((i + 1, r.answer.clone(), got));
        }
    }
    Ok(kb)
}

/// Replays a deterministic sample of `ceil(fraction * n)` dialogs. Returns
/// the number replayed.
pub fn verify_replay(
    dataset: &Dataset,
    scenes: &[Scene],
    fraction: f64,
    seed: u64,
) -> Result<usize, DatasetError> {
    let n = dataset.dialogs.len();
    let k = ((fraction.clamp(0.0, 1.0) * n as f64).ceil() as usize).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, k).into_vec();
    picked.sort_unstable();
    let by_id: HashMap<u64, &Scene> = scenes.iter().map(|s| (s.scene_id, s)).collect();
    for i in picked {
        let d = &dataset.dialogs[i];
        let scene = by_id
            .get(&d.scene_id)
            .ok_or(DatasetError::MissingScene(i, d.scene_id))?;
        replay_dialog(d, scene, &dataset.schema).map_err(|(round, expected, got)| {
            DatasetError::ReplayMismatch {
                dialog: i,
                round,
                expected,
                got,
            }
        })?;
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialoggen::{generate_dataset, GenConfig};
    use crate::scene::{generate_scene, SceneGenConfig};
    use crate::templates::TemplateSet;

    fn fixture(n: usize) -> (AttributeSchema, Vec<Scene>, Vec<Dialog>) {
        let s = AttributeSchema::clevr();
        let scenes: Vec<Scene> = (0..n as u64)
            .map(|i| generate_scene(&s, &SceneGenConfig::new(&s, 5), i, 100 + i).unwrap())
            .collect();
        let ts = TemplateSet::default_for(&s);
        let dialogs = generate_dataset(&scenes, &ts, &GenConfig::new(10), 1, 9).unwrap();
        (s, scenes, dialogs)
    }

    #[test]
    fn round_trip_and_tamper_detection() {
        let (s, scenes, dialogs) = fixture(50);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.json");
        let ds = Dataset::new(s.clone(), dialogs);
        write_dataset(&path, &ds).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back, ds);
        assert_eq!(
            verify_replay(&back, &scenes, DEFAULT_REPLAY_FRACTION, 0).unwrap(),
            1
        );
        assert_eq!(verify_replay(&back, &scenes, 1.0, 0).unwrap(), 50);

        let mut bad = ds.clone();
        let r = &mut bad.dialogs[17].rounds[4];
        r.answer = if r.answer == "yes" {
            "no".into()
        } else {
            "yes".into()
        };
        match verify_replay(&bad, &scenes, 1.0, 0) {
            Err(DatasetError::ReplayMismatch {
                dialog: 17,
                round: 5,
                ..
            }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_dataset_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.json");
        write_dataset(&path, &Dataset::new(AttributeSchema::clevr(), vec![])).unwrap();
        let back = read_dataset(&path).unwrap();
        assert!(back.dialogs.is_empty());
        assert_eq!(verify_replay(&back, &[], 1.0, 0).unwrap(), 0);
    }

    #[test]
    fn invalid_program_is_located() {
        let (s, _, dialogs) = fixture(2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.json");
        let mut ds = Dataset::new(s, dialogs);
        ds.dialogs[1].rounds[2].program.args = vec!["teal".into()];
        write_dataset(&path, &ds).unwrap();
        assert!(matches!(
            read_dataset(&path),
            Err(DatasetError::InvalidProgram {
                dialog: 1,
                round: 3,
                ..
            })
        ));
        std::fs::write(&path, "{\"version\": 1,").unwrap();
        assert!(matches!(
            read_dataset(&path),
            Err(DatasetError::Parse { .. })
        ));
    }
}
