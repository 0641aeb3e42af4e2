//! Shared fixtures and an independent brute-force answer oracle.
//!
//! The oracle works from its own record of dialog state and from raw scene
//! coordinates; it does not call the executor, the knowledge base lookups
//! or the scene's relation helpers.

#![allow(dead_code)]

use nsvd_core::dsl::{enumerate_args, Category, Function, KbMask, Program};
use nsvd_core::executor::{KnowledgeBase, Update};
use nsvd_core::scene::{generate_scene, Attr, AttributeSchema, Position, Scene, SceneGenConfig};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_scene(schema: &AttributeSchema, id: u64, n: usize, seed: u64) -> Scene {
    generate_scene(schema, &SceneGenConfig::new(schema, n), id, seed).unwrap()
}

/// Dialog state as the oracle tracks it.
#[derive(Debug, Clone, Default)]
pub struct OracleState {
    /// (entity, known values) in mention order.
    pub seen: Vec<(usize, Vec<Attr>)>,
    pub subject: Option<usize>,
    pub prev: Option<usize>,
    pub group: Option<Vec<usize>>,
}

/// A random, internally consistent state over `scene`.
pub fn random_state(scene: &Scene, r: &mut ChaCha8Rng) -> OracleState {
    let n = scene.len();
    let mut order: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), r);
    let k = r.random_range(0..=n);
    let mut st = OracleState::default();
    for &e in &order[..k] {
        let ent = &scene.entities()[e];
        let known: Vec<Attr> = (0..ent.attrs().count())
            .filter(|_| r.random_bool(0.5))
            .map(|d| ent.attr(d))
            .collect();
        st.seen.push((e, known));
    }
    if k >= 1 && r.random_bool(0.8) {
        let s = st.seen[r.random_range(0..k)].0;
        if k >= 2 && r.random_bool(0.7) {
            let p = st
                .seen
                .iter()
                .map(|x| x.0)
                .filter(|x| *x != s)
                .collect::<Vec<_>>();
            st.prev = Some(*p.choose(r).unwrap());
        }
        st.subject = Some(s);
    }
    if r.random_bool(0.7) {
        st.group = Some((0..n).filter(|_| r.random_bool(0.5)).collect());
    }
    st
}

/// Builds the matching knowledge base through the public update API.
pub fn build_kb<'s>(scene: &'s Scene, st: &OracleState) -> KnowledgeBase<'s> {
    let mut kb = KnowledgeBase::new(scene);
    let all = KbMask::ALL;
    for (e, h) in &st.seen {
        kb.apply_update(
            &all,
            Update::Seen {
                entity: *e,
                handle: h.clone(),
            },
        )
        .unwrap();
    }
    if let Some(p) = st.prev {
        kb.apply_update(&all, Update::Subject(p)).unwrap();
    }
    if let Some(s) = st.subject {
        kb.apply_update(&all, Update::Subject(s)).unwrap();
    }
    if let Some(g) = &st.group {
        kb.apply_update(&all, Update::Group(g.clone())).unwrap();
    }
    kb.mark_initialized();
    kb
}

fn direction(pos: Position) -> [f64; 3] {
    match pos {
        Position::Right => [1.0, 0.0, 0.0],
        Position::Left => [-1.0, 0.0, 0.0],
        Position::Front => [0.0, -1.0, 0.0],
        Position::Behind => [0.0, 1.0, 0.0],
    }
}

/// `a` lies in direction `pos` of `b` (default scene directions).
pub fn oracle_relates(scene: &Scene, a: usize, b: usize, pos: Position) -> bool {
    let (ca, cb) = (scene.entities()[a].coords, scene.entities()[b].coords);
    let d = direction(pos);
    (0..3).map(|i| (ca[i] - cb[i]) * d[i]).sum::<f64>() > 1e-6
}

fn has(scene: &Scene, e: usize, a: Attr) -> bool {
    scene.entities()[e].value(a.dim) == a.value
}

/// Expected rendered answer of a count/exist question, or `None` when it
/// should fail.
pub fn oracle_answer(
    scene: &Scene,
    schema: &AttributeSchema,
    st: &OracleState,
    p: &Program,
) -> Option<String> {
    use Function::*;
    let n = scene.len();
    let tok = |i: usize| p.args[i].as_str();
    let attr = |i: usize| schema.attr(tok(i)).unwrap();
    let fetch = |a: Attr| {
        st.seen
            .iter()
            .find(|(_, h)| h.contains(&a))
            .map(|(e, _)| *e)
    };
    let referent = |i_attr: Option<usize>| -> Option<usize> {
        match p.function {
            CountObjRelImm | ExistObjRelImm | CountObjExcludeImm | ExistObjExcludeImm => st.subject,
            CountObjRelImm2 | ExistObjRelImm2 => st.prev,
            _ => fetch(attr(i_attr.unwrap())),
        }
    };
    let count = match p.function {
        CountAll => n,
        CountOther | ExistOther => (0..n)
            .filter(|e| !st.seen.iter().any(|(s, _)| s == e))
            .count(),
        CountAllGroup => st.group.as_ref()?.len(),
        CountAttribute | ExistAttribute => (0..n).filter(|e| has(scene, *e, attr(0))).count(),
        CountAttributeGroup | ExistAttributeGroup => st
            .group
            .as_ref()?
            .iter()
            .filter(|e| has(scene, **e, attr(0)))
            .count(),
        CountObjRelImm | CountObjRelImm2 | ExistObjRelImm | ExistObjRelImm2 | CountObjRelEarly
        | ExistObjRelEarly => {
            let r = referent(Some(1))?;
            let pos: Position = tok(0).parse().unwrap();
            (0..n)
                .filter(|e| *e != r && oracle_relates(scene, *e, r, pos))
                .count()
        }
        CountObjExcludeImm | ExistObjExcludeImm | CountObjExcludeEarly | ExistObjExcludeEarly => {
            let r = referent(Some(1))?;
            let d = schema.dimension(tok(0)).unwrap();
            let v = scene.entities()[r].value(d);
            (0..n)
                .filter(|e| *e != r && scene.entities()[*e].value(d) == v)
                .count()
        }
        _ => panic!("oracle covers count/exist questions only"),
    };
    Some(match p.function.category() {
        Category::Count => count.to_string(),
        _ => (if count > 0 { "yes" } else { "no" }).to_string(),
    })
}

/// Every count/exist program with every valid argument list.
pub fn count_exist_programs(schema: &AttributeSchema) -> Vec<Program> {
    Function::questions()
        .filter(|f| matches!(f.category(), Category::Count | Category::Exist))
        .flat_map(|f| {
            enumerate_args(f, schema)
                .into_iter()
                .map(move |a| Program::new(f, a))
        })
        .collect()
}

/// A uniformly random valid program of function `f`.
pub fn random_program(f: Function, schema: &AttributeSchema, r: &mut ChaCha8Rng) -> Program {
    let all = enumerate_args(f, schema);
    Program::new(f, all.choose(r).unwrap().clone())
}

/// Snapshot of the mutable knowledge-base fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub seen: Vec<(usize, Vec<Attr>)>,
    pub subject: Option<usize>,
    pub prev: Option<usize>,
    pub group: Option<Vec<usize>>,
}

pub fn snapshot(kb: &KnowledgeBase<'_>) -> Snapshot {
    Snapshot {
        seen: kb
            .seen()
            .iter()
            .map(|r| (r.entity, r.handle.clone()))
            .collect(),
        subject: kb.subject(),
        prev: kb.prev_subject(),
        group: kb.group().map(|g| g.members.clone()),
    }
}

/// Names of the fields that changed although `mask` forbids it.
pub fn mask_violations(before: &Snapshot, after: &Snapshot, mask: &KbMask) -> Vec<&'static str> {
    let mut out = Vec::new();
    let old: Vec<usize> = before.seen.iter().map(|x| x.0).collect();
    let added = after.seen.iter().any(|(e, _)| !old.contains(e));
    let removed = before
        .seen
        .iter()
        .any(|(e, _)| !after.seen.iter().any(|x| x.0 == *e));
    if removed {
        out.push("seen (removed)");
    }
    if added && !mask.seen {
        out.push("seen");
    }
    let handles_changed = before.seen.iter().any(|(e, h)| {
        after
            .seen
            .iter()
            .find(|x| x.0 == *e)
            .is_some_and(|x| &x.1 != h)
    });
    if handles_changed && !mask.handle {
        out.push("handle");
    }
    if (before.subject != after.subject || before.prev != after.prev) && !mask.subject {
        out.push("subject");
    }
    if before.group != after.group && !mask.groups {
        out.push("groups");
    }
    out
}
