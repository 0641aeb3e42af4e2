//! Synthetic dialog generation over scenes.
//!
//! A dialog is a caption program followed by `L` question programs, each
//! sampled among the functions that can execute in the current knowledge
//! base state, executed to obtain its answer and rendered through the
//! template set. Generation is deterministic in (scene, L, seed).

mod dataset;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dsl::{ArgKind, Category, Function, Kind, Program, Reference};
use crate::executor::{ExecError, Executor, KnowledgeBase};
use crate::scene::{Attr, AttributeSchema, Position, Scene};
use crate::templates::TemplateSet;

pub use dataset::{
    read_dataset, replay_dialog, verify_replay, write_dataset, Dataset, DatasetError,
    DEFAULT_REPLAY_FRACTION,
};

/// Attempts per caption or question slot before giving up.
pub const MAX_ATTEMPTS: usize = 200;

/// Co-reference label of a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coref {
    /// Stand-alone question.
    None,
    /// Depends on the accumulated history as a whole.
    All,
    /// Rounds since the referent's first mention; the caption is round 0.
    Distance(usize),
}

impl fmt::Display for Coref {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coref::None => f.write_str("none"),
            Coref::All => f.write_str("all"),
            Coref::Distance(d) => write!(f, "{d}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CorefRepr {
    Word(String),
    Distance(usize),
}

impl Serialize for Coref {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Coref::Distance(d) => CorefRepr::Distance(*d),
            other => CorefRepr::Word(other.to_string()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Coref {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match CorefRepr::deserialize(d)? {
            CorefRepr::Distance(0) => Err(serde::de::Error::custom("coref distance must be >= 1")),
            CorefRepr::Distance(n) => Ok(Coref::Distance(n)),
            CorefRepr::Word(w) if w == "none" => Ok(Coref::None),
            CorefRepr::Word(w) if w == "all" => Ok(Coref::All),
            CorefRepr::Word(w) => Err(serde::de::Error::custom(format!("bad coref label `{w}`"))),
        }
    }
}

/// Programs travel as canonical text.
mod program_text {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::dsl::{parse_program_unchecked, Program};

    pub fn serialize<S: Serializer>(p: &Program, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(p)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Program, D::Error> {
        let text = String::deserialize(d)?;
        parse_program_unchecked(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    pub question: String,
    #[serde(with = "program_text")]
    pub program: Program,
    pub answer: String,
    pub question_type: String,
    pub coref: Coref,
}

impl Round {
    pub fn category(&self) -> Category {
        self.program.category()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialog {
    pub scene_id: u64,
    pub seed: u64,
    pub ambiguous_caption: bool,
    pub caption: String,
    #[serde(with = "program_text")]
    pub caption_program: Program,
    pub rounds: Vec<Round>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error("scene {scene_id}: {message}")]
    Generation { scene_id: u64, message: String },
    #[error("invalid generation config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenConfig {
    pub rounds: usize,
    /// Restricts sampling to these functions. Captions are unrestricted
    /// unless the set names at least one caption function.
    pub allowed: Option<BTreeSet<Function>>,
}

impl GenConfig {
    pub fn new(rounds: usize) -> Self {
        GenConfig {
            rounds,
            allowed: None,
        }
    }

    pub fn with_functions(mut self, functions: impl IntoIterator<Item = Function>) -> Self {
        self.allowed = Some(functions.into_iter().collect());
        self
    }

    fn pool(&self, kind: Kind) -> Vec<Function> {
        let all: Vec<Function> = Function::ALL
            .iter()
            .copied()
            .filter(|f| f.kind() == kind)
            .collect();
        match &self.allowed {
            Some(set) if set.iter().any(|f| f.kind() == kind) => {
                all.into_iter().filter(|f| set.contains(f)).collect()
            }
            _ => all,
        }
    }

    /// Per-function occurrence cap within one dialog.
    pub fn balance_cap(&self) -> usize {
        (3 * self.rounds / 24).max(1)
    }
}

/// Co-reference label of `p` about to run in `kb` (whose round has already
/// been advanced).
pub fn coref_label_of(
    executor: &Executor<'_>,
    p: &Program,
    kb: &KnowledgeBase<'_>,
) -> Result<Coref, ExecError> {
    match p.function.reference() {
        Reference::Standalone => Ok(Coref::None),
        Reference::History => Ok(Coref::All),
        _ => {
            let r = executor
                .resolve_referent(kb, p)?
                .expect("single-referent functions resolve to an entity");
            let first = kb
                .record(r)
                .map(|rec| rec.first_mention_round)
                .unwrap_or(kb.round());
            Ok(Coref::Distance(kb.round() - first))
        }
    }
}

/// Splits the question functions into two halves, half of each category,
/// for held-out question-type experiments.
pub fn split_question_types(seed: u64) -> (Vec<Function>, Vec<Function>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for cat in [Category::Count, Category::Exist, Category::Seek] {
        let mut fs: Vec<Function> = Function::questions()
            .filter(|f| f.category() == cat)
            .collect();
        rand::seq::SliceRandom::shuffle(fs.as_mut_slice(), &mut rng);
        let half = fs.len() / 2;
        b.extend_from_slice(&fs[half..]);
        a.extend_from_slice(&fs[..half]);
    }
    a.sort();
    b.sort();
    (a, b)
}

/// Generates one dialog.
pub fn generate_dialog(
    scene: &Scene,
    templates: &TemplateSet,
    config: &GenConfig,
    seed: u64,
) -> Result<Dialog, GenError> {
    generate_dialog_with_state(scene, templates, config, seed).map(|(d, _)| d)
}

/// Like [`generate_dialog`], also returning the final knowledge base.
pub fn generate_dialog_with_state<'s>(
    scene: &'s Scene,
    templates: &TemplateSet,
    config: &GenConfig,
    seed: u64,
) -> Result<(Dialog, KnowledgeBase<'s>), GenError> {
    if config.rounds == 0 {
        return Err(GenError::Config("dialogs need at least one round".into()));
    }
    let schema = templates.schema();
    let ex = Executor::new(schema);
    let fail = |message: String| GenError::Generation {
        scene_id: scene.scene_id,
        message,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let captions = config.pool(Kind::Caption);
    let questions = config.pool(Kind::Question);
    if captions.is_empty() || questions.is_empty() {
        return Err(GenError::Config(
            "function subset leaves nothing to sample".into(),
        ));
    }

    // Caption: prefer an unambiguous one, fall back to the first ambiguous.
    let mut chosen: Option<(Program, KnowledgeBase<'s>, bool)> = None;
    for _ in 0..MAX_ATTEMPTS {
        let f = *captions.choose(&mut rng).unwrap();
        let Some(p) = sample_caption(f, scene, schema, &mut rng) else {
            continue;
        };
        let mut kb = ex.init_kb(scene);
        if let Ok(out) = ex.execute_caption(&mut kb, &p) {
            if !out.ambiguous {
                chosen = Some((p, kb, false));
                break;
            }
            if chosen.is_none() {
                chosen = Some((p, kb, true));
            }
        }
    }
    let (caption_program, mut kb, ambiguous_caption) =
        chosen.ok_or_else(|| fail("no executable caption found".into()))?;
    let caption = templates
        .render(
            &caption_program,
            rng.random_range(0..templates.variants(caption_program.function)),
        )
        .map_err(|e| fail(e.to_string()))?;

    let cap = config.balance_cap();
    let mut used: BTreeMap<Function, usize> = BTreeMap::new();
    let mut rounds = Vec::with_capacity(config.rounds);
    for _ in 0..config.rounds {
        kb.advance_round();
        let ready: Vec<Function> = questions
            .iter()
            .copied()
            .filter(|f| satisfiable(*f, &kb))
            .collect();
        let under_cap: Vec<Function> = ready
            .iter()
            .copied()
            .filter(|f| used.get(f).copied().unwrap_or(0) < cap)
            .collect();
        let mut accepted = None;
        for attempt in 0..MAX_ATTEMPTS {
            // Fall back to the full pool once the capped one keeps failing.
            let pool = if under_cap.is_empty() || attempt >= MAX_ATTEMPTS / 2 {
                &ready
            } else {
                &under_cap
            };
            let Some(&f) = pool.choose(&mut rng) else {
                break;
            };
            let p = sample_question(f, &kb, schema, &mut rng);
            let Ok(coref) = coref_label_of(&ex, &p, &kb) else {
                continue;
            };
            let mut next = kb.clone();
            if let Ok(answer) = ex.execute_question(&mut next, &p) {
                accepted = Some((p, coref, answer, next));
                break;
            }
        }
        let (program, coref, answer, next) = accepted
            .ok_or_else(|| fail(format!("no executable question at round {}", kb.round())))?;
        kb = next;
        *used.entry(program.function).or_default() += 1;
        let question = templates
            .render(
                &program,
                rng.random_range(0..templates.variants(program.function)),
            )
            .map_err(|e| fail(e.to_string()))?;
        rounds.push(Round {
            question,
            question_type: program.function.name().to_string(),
            answer: answer.render(schema),
            program,
            coref,
        });
    }
    let dialog = Dialog {
        scene_id: scene.scene_id,
        seed,
        ambiguous_caption,
        caption,
        caption_program,
        rounds,
    };
    Ok((dialog, kb))
}

/// Per-dialog seed for dialog `k` of the scene at position `scene_pos`.
pub fn dialog_seed(base: u64, scene_pos: usize, k: usize) -> u64 {
    // splitmix64 finalizer over a combined index.
    let mut z = base ^ ((scene_pos as u64) << 20 | k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `per_scene` dialogs for every scene, generated in parallel, in scene
/// order.
pub fn generate_dataset(
    scenes: &[Scene],
    templates: &TemplateSet,
    config: &GenConfig,
    per_scene: usize,
    seed: u64,
) -> Result<Vec<Dialog>, GenError> {
    let jobs: Vec<(usize, usize)> = (0..scenes.len())
        .flat_map(|s| (0..per_scene).map(move |k| (s, k)))
        .collect();
    jobs.par_iter()
        .map(|&(s, k)| generate_dialog(&scenes[s], templates, config, dialog_seed(seed, s, k)))
        .collect()
}

fn satisfiable(f: Function, kb: &KnowledgeBase<'_>) -> bool {
    let group_ok = !f.needs_group() || kb.group().is_some();
    group_ok
        && match f.reference() {
            Reference::Subject => kb.subject().is_some(),
            Reference::PrevSubject => kb.prev_subject().is_some(),
            Reference::Fetch => kb.seen().iter().any(|r| !r.handle.is_empty()),
            Reference::Standalone | Reference::History => true,
        }
}

fn random_attr(schema: &AttributeSchema, rng: &mut ChaCha8Rng) -> Attr {
    let dim = rng.random_range(0..schema.num_dimensions());
    Attr {
        dim,
        value: rng.random_range(0..schema.values(dim).len()),
    }
}

fn sample_caption(
    f: Function,
    scene: &Scene,
    schema: &AttributeSchema,
    rng: &mut ChaCha8Rng,
) -> Option<Program> {
    let entities = scene.entities();
    let e = entities.choose(rng)?;
    let dims = schema.num_dimensions();
    let args: Vec<String> = match f {
        Function::CountAtt => {
            vec![schema.name(e.attr(rng.random_range(0..dims))).to_string()]
        }
        Function::ObjRelation => {
            let pos = *Position::ALL.choose(rng)?;
            let partners: Vec<usize> = (0..scene.len())
                .filter(|y| *y != e.index && scene.relates(e.index, *y, pos).unwrap_or(false))
                .collect();
            let y = &entities[*partners.choose(rng)?];
            vec![
                schema.name(e.attr(rng.random_range(0..dims))).to_string(),
                pos.as_str().to_string(),
                schema.name(y.attr(rng.random_range(0..dims))).to_string(),
            ]
        }
        _ => {
            let size = rng.random_range(1..=dims);
            let picked = rand::seq::index::sample(rng, dims, size);
            picked
                .iter()
                .map(|d| schema.name(e.attr(d)).to_string())
                .collect()
        }
    };
    Some(Program::new(f, args).canonical(schema))
}

fn sample_question(
    f: Function,
    kb: &KnowledgeBase<'_>,
    schema: &AttributeSchema,
    rng: &mut ChaCha8Rng,
) -> Program {
    let known: Vec<Attr> = kb
        .seen()
        .iter()
        .flat_map(|r| r.handle.iter().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let sig = f.signature().args;
    let early = f.reference() == Reference::Fetch;
    let mut args = sig
        .iter()
        .enumerate()
        .map(|(i, kind)| match kind {
            // The last attribute of an early function is its fetch key.
            ArgKind::Attr if early && i == sig.len() - 1 => schema
                .name(*known.choose(rng).expect("checked by satisfiable"))
                .to_string(),
            ArgKind::Attr => schema.name(random_attr(schema, rng)).to_string(),
            ArgKind::AttrType => schema
                .dimension_name(rng.random_range(0..schema.num_dimensions()))
                .to_string(),
            ArgKind::Pos => Position::ALL.choose(rng).unwrap().as_str().to_string(),
            ArgKind::AttrList => unreachable!("questions take no attribute lists"),
        })
        .collect::<Vec<String>>();
    // Asking an early seek for the dimension of its own key is trivial.
    if matches!(f, Function::SeekAttrEarly | Function::SeekAttrSimEarly)
        && schema.num_dimensions() > 1
    {
        let key = schema.attr(&args[1]).expect("sampled from the schema").dim;
        let dims: Vec<usize> = (0..schema.num_dimensions()).filter(|d| *d != key).collect();
        args[0] = schema
            .dimension_name(*dims.choose(rng).unwrap())
            .to_string();
    }
    Program::new(f, args)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{default_directions, generate_scene, Entity, SceneGenConfig};

    fn scene(n: usize, seed: u64) -> Scene {
        let s = AttributeSchema::clevr();
        generate_scene(&s, &SceneGenConfig::new(&s, n), seed, seed).unwrap()
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let ts = TemplateSet::default_for(&AttributeSchema::clevr());
        let sc = scene(6, 3);
        let cfg = GenConfig::new(10);
        let a = generate_dialog(&sc, &ts, &cfg, 42).unwrap();
        let b = generate_dialog(&sc, &ts, &cfg, 42).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_eq!(a.rounds.len(), 10);
    }

    #[test]
    fn single_object_scene() {
        let s = AttributeSchema::clevr();
        let ts = TemplateSet::default_for(&s);
        let e = Entity::new(0, vec![0, 0, 0, 0], [0.0, 0.0, 0.7], &s).unwrap();
        let sc = Scene::new(7, vec![e], default_directions(), 20).unwrap();
        for seed in 0..20 {
            let d = generate_dialog(&sc, &ts, &GenConfig::new(1), seed).unwrap();
            let f = d.caption_program.function;
            assert_ne!(f, Function::ObjRelation);
            let q = d.rounds[0].program.function;
            assert_ne!(q.reference(), Reference::PrevSubject);
            // Only the count-att caption leaves a group behind.
            assert!(!q.needs_group() || f == Function::CountAtt, "{q}");
        }
    }

    #[test]
    fn balance_guard_caps_repeats() {
        let ts = TemplateSet::default_for(&AttributeSchema::clevr());
        let cfg = GenConfig::new(10);
        for seed in 0..30 {
            let d = generate_dialog(&scene(8, seed), &ts, &cfg, seed).unwrap();
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for r in &d.rounds {
                *counts.entry(r.question_type.as_str()).or_default() += 1;
            }
            assert!(
                counts.values().all(|c| *c <= cfg.balance_cap()),
                "{counts:?}"
            );
        }
    }

    #[test]
    fn restricted_functions_are_respected() {
        let ts = TemplateSet::default_for(&AttributeSchema::clevr());
        let (a, _) = split_question_types(9);
        assert_eq!(a.len(), 12);
        let cfg = GenConfig::new(10).with_functions(a.iter().copied());
        let d = generate_dialog(&scene(6, 1), &ts, &cfg, 5).unwrap();
        assert!(d.rounds.iter().all(|r| a.contains(&r.program.function)));
    }

    #[test]
    fn coref_serialization() {
        for (c, j) in [
            (Coref::None, "\"none\""),
            (Coref::All, "\"all\""),
            (Coref::Distance(3), "3"),
        ] {
            assert_eq!(serde_json::to_string(&c).unwrap(), j);
            assert_eq!(serde_json::from_str::<Coref>(j).unwrap(), c);
        }
        assert!(serde_json::from_str::<Coref>("0").is_err());
        assert!(serde_json::from_str::<Coref>("\"some\"").is_err());
    }
}
