//! Symbolic execution of DSL programs against a dynamic knowledge base.
//!
//! Every question function resolves its referent (conversation subject,
//! previous subject, or a `fetch` over seen handles), computes its answer
//! from the scene and then applies the knowledge-base updates its
//! signature's mask permits. All resolution errors are raised before any
//! update, so a failed program leaves the knowledge base untouched.

mod kb;

use std::fmt;

use thiserror::Error;

use crate::dsl::{Arg, DslError, Function, KbMask, Kind, Program};
use crate::scene::{xy_distance, Attr, AttributeSchema, Extremum, Position, SceneError};

pub use kb::{Group, KnowledgeBase, SeenRecord, Update};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExecError {
    #[error("no entity satisfies the caption")]
    NoReferent,
    #[error("execution state error: {0}")]
    ExecutionState(String),
    #[error("no {0} to refer to")]
    MissingSubject(&'static str),
    #[error("no active group")]
    NoActiveGroup,
    #[error("fetch failed: {0}")]
    Fetch(String),
    #[error("expected exactly one similar entity, found {0}")]
    AmbiguousSimilar(usize),
    #[error("{0} update not permitted by the function's mask")]
    MaskViolation(&'static str),
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

impl ExecError {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ExecError::NoReferent => "NoReferent",
            ExecError::ExecutionState(_) => "ExecutionStateError",
            ExecError::MissingSubject(_) => "MissingSubject",
            ExecError::NoActiveGroup => "NoActiveGroup",
            ExecError::Fetch(_) => "FetchError",
            ExecError::AmbiguousSimilar(_) => "AmbiguousSimilar",
            ExecError::MaskViolation(_) => "MaskViolation",
            ExecError::Dsl(e) => e.kind_name(),
            ExecError::Scene(_) => "SceneError",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Answer {
    Number(usize),
    YesNo(bool),
    Attribute(Attr),
    /// A relational seek with nothing in that direction.
    NoneToken,
}

impl Answer {
    pub fn render(&self, schema: &AttributeSchema) -> String {
        match self {
            Answer::Number(n) => n.to_string(),
            Answer::YesNo(true) => "yes".into(),
            Answer::YesNo(false) => "no".into(),
            Answer::Attribute(a) => schema.name(*a).to_string(),
            Answer::NoneToken => "none".into(),
        }
    }
}

/// What executing a caption established.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CaptionOutcome {
    /// The caption's referent was not unique and a tie-break decided it.
    pub ambiguous: bool,
}

/// Stateless program interpreter; all dialog state lives in the
/// [`KnowledgeBase`].
#[derive(Debug, Clone, Copy)]
pub struct Executor<'a> {
    schema: &'a AttributeSchema,
}

struct Updater<'k, 's> {
    kb: &'k mut KnowledgeBase<'s>,
    mask: KbMask,
}

impl Updater<'_, '_> {
    /// Records that `entity` was addressed and that `revealed` is now known.
    fn mention(&mut self, entity: usize, revealed: &[Attr]) -> Result<(), ExecError> {
        if let Some(rec) = self.kb.record(entity) {
            let mut new: Vec<Attr> = revealed
                .iter()
                .copied()
                .filter(|a| !rec.knows(*a))
                .collect();
            new.sort_by_key(|a| a.dim);
            new.dedup();
            if self.mask.handle {
                for attr in new {
                    self.kb
                        .apply_update(&self.mask, Update::Handle { entity, attr })?;
                }
            }
        } else if self.mask.seen {
            self.kb.apply_update(
                &self.mask,
                Update::Seen {
                    entity,
                    handle: revealed.to_vec(),
                },
            )?;
        }
        Ok(())
    }

    fn focus(&mut self, entity: usize) -> Result<(), ExecError> {
        if self.mask.subject && self.kb.is_seen(entity) {
            self.kb.apply_update(&self.mask, Update::Subject(entity))?;
        }
        Ok(())
    }

    fn set_group(&mut self, members: Vec<usize>) -> Result<(), ExecError> {
        if self.mask.groups {
            self.kb.apply_update(&self.mask, Update::Group(members))?;
        }
        Ok(())
    }

    /// A single-member answer set addresses a new entity.
    fn promote_singleton(&mut self, set: &[usize], revealed: &[Attr]) -> Result<(), ExecError> {
        if let [only] = set {
            self.mention(*only, revealed)?;
            self.focus(*only)?;
        }
        Ok(())
    }
}

fn attr_arg(args: &[Arg], i: usize) -> Attr {
    match &args[i] {
        Arg::Attr(a) => *a,
        other => unreachable!("argument {i} bound as {other:?}"),
    }
}

fn type_arg(args: &[Arg], i: usize) -> usize {
    match &args[i] {
        Arg::AttrType(d) => *d,
        other => unreachable!("argument {i} bound as {other:?}"),
    }
}

fn pos_arg(args: &[Arg], i: usize) -> Position {
    match &args[i] {
        Arg::Pos(p) => *p,
        other => unreachable!("argument {i} bound as {other:?}"),
    }
}

impl<'a> Executor<'a> {
    pub fn new(schema: &'a AttributeSchema) -> Self {
        Executor { schema }
    }

    pub fn schema(&self) -> &'a AttributeSchema {
        self.schema
    }

    pub fn init_kb<'s>(&self, scene: &'s crate::scene::Scene) -> KnowledgeBase<'s> {
        KnowledgeBase::new(scene)
    }

    /// Runs a caption program, seeding the knowledge base.
    pub fn execute_caption(
        &self,
        kb: &mut KnowledgeBase<'_>,
        program: &Program,
    ) -> Result<CaptionOutcome, ExecError> {
        if program.function.kind() != Kind::Caption {
            return Err(ExecError::ExecutionState(format!(
                "`{}` is not a caption program",
                program.function
            )));
        }
        if kb.round() != 0 || kb.is_initialized() {
            return Err(ExecError::ExecutionState(
                "caption must run first, exactly once".into(),
            ));
        }
        let args = program.bind(self.schema)?;
        let scene = kb.scene();
        let mask = program.signature().mask;
        let extremum = match program.function {
            Function::ExtremeRight => Some(Extremum::Towards(Position::Right)),
            Function::ExtremeLeft => Some(Extremum::Towards(Position::Left)),
            Function::ExtremeFront => Some(Extremum::Towards(Position::Front)),
            Function::ExtremeBehind => Some(Extremum::Towards(Position::Behind)),
            Function::ExtremeCentre => Some(Extremum::Centre),
            _ => None,
        };

        let mut outcome = CaptionOutcome::default();
        let mut up = Updater { kb, mask };
        match program.function {
            Function::CountAtt => {
                let a = attr_arg(&args, 0);
                let members = scene.filter_by_attrs(&[a]);
                if members.is_empty() {
                    return Err(ExecError::NoReferent);
                }
                for &m in &members {
                    up.mention(m, &[a])?;
                }
                up.set_group(members)?;
            }
            Function::ObjRelation => {
                let (a1, pos, a2) = (attr_arg(&args, 0), pos_arg(&args, 1), attr_arg(&args, 2));
                let xs = scene.filter_by_attrs(&[a1]);
                let ys = scene.filter_by_attrs(&[a2]);
                let mut pairs = Vec::new();
                for &x in &xs {
                    for &y in &ys {
                        if x != y && scene.relates(x, y, pos)? {
                            pairs.push((x, y));
                        }
                    }
                }
                let &(x, y) = pairs.first().ok_or(ExecError::NoReferent)?;
                outcome.ambiguous = pairs.len() > 1;
                up.mention(x, &[a1])?;
                up.mention(y, &[a2])?;
                up.focus(x)?;
            }
            _ => {
                let list = match &args[0] {
                    Arg::AttrList(l) => l.clone(),
                    other => unreachable!("caption list bound as {other:?}"),
                };
                let cands = scene.filter_by_attrs(&list);
                if cands.is_empty() {
                    return Err(ExecError::NoReferent);
                }
                let target = match extremum {
                    Some(x) => {
                        let (e, tied) = scene.extreme_with_tie(&cands, x)?;
                        outcome.ambiguous = tied;
                        e
                    }
                    None => {
                        outcome.ambiguous = cands.len() > 1;
                        cands[0]
                    }
                };
                up.mention(target, &list)?;
                up.focus(target)?;
            }
        }
        up.kb.mark_initialized();
        Ok(outcome)
    }

    fn referent(
        &self,
        kb: &KnowledgeBase<'_>,
        function: Function,
        fetch_by: Option<Attr>,
    ) -> Result<usize, ExecError> {
        use crate::dsl::Reference;
        match function.reference() {
            Reference::Subject => kb.subject().ok_or(ExecError::MissingSubject("subject")),
            Reference::PrevSubject => kb
                .prev_subject()
                .ok_or(ExecError::MissingSubject("previous subject")),
            Reference::Fetch => kb.fetch(&[fetch_by.expect("early functions take an attr")]),
            _ => unreachable!("{function} has no single referent"),
        }
    }

    /// Resolves the entity an `imm`, `imm2` or `early` question refers to,
    /// without executing it.
    pub fn resolve_referent(
        &self,
        kb: &KnowledgeBase<'_>,
        program: &Program,
    ) -> Result<Option<usize>, ExecError> {
        use crate::dsl::Reference;
        match program.function.reference() {
            Reference::Standalone | Reference::History => Ok(None),
            _ => {
                let args = program.bind(self.schema)?;
                let fetch_by = args.iter().rev().find_map(|a| match a {
                    Arg::Attr(a) => Some(*a),
                    _ => None,
                });
                self.referent(kb, program.function, fetch_by).map(Some)
            }
        }
    }

    /// Answers a question and applies its knowledge-base updates.
    ///
    /// The caller advances the round with [`KnowledgeBase::advance_round`]
    /// before each question.
    pub fn execute_question(
        &self,
        kb: &mut KnowledgeBase<'_>,
        program: &Program,
    ) -> Result<Answer, ExecError> {
        use Function::*;
        if program.function.kind() != Kind::Question {
            return Err(ExecError::ExecutionState(format!(
                "`{}` is not a question program",
                program.function
            )));
        }
        if !kb.is_initialized() {
            return Err(ExecError::ExecutionState(
                "no caption has been executed".into(),
            ));
        }
        if kb.round() == 0 {
            return Err(ExecError::ExecutionState(
                "round not advanced past the caption".into(),
            ));
        }
        let args = program.bind(self.schema)?;
        let scene = kb.scene();
        let f = program.function;
        let mask = program.signature().mask;
        let n = scene.len();

        let group_members = |kb: &KnowledgeBase<'_>| -> Result<Vec<usize>, ExecError> {
            kb.group()
                .map(|g| g.members.clone())
                .ok_or(ExecError::NoActiveGroup)
        };

        match f {
            CountAll => {
                Updater { kb, mask }.set_group((0..n).collect())?;
                Ok(Answer::Number(n))
            }
            CountOther | ExistOther => {
                let others: Vec<usize> = (0..n).filter(|e| !kb.is_seen(*e)).collect();
                let count = others.len();
                let mut up = Updater { kb, mask };
                up.promote_singleton(&others, &[])?;
                up.set_group(others)?;
                Ok(if f == CountOther {
                    Answer::Number(count)
                } else {
                    Answer::YesNo(count > 0)
                })
            }
            CountAllGroup => Ok(Answer::Number(group_members(kb)?.len())),
            CountAttribute | ExistAttribute | CountAttributeGroup | ExistAttributeGroup => {
                let a = attr_arg(&args, 0);
                let set: Vec<usize> = if matches!(f, CountAttribute | ExistAttribute) {
                    scene.filter_by_attrs(&[a])
                } else {
                    group_members(kb)?
                        .into_iter()
                        .filter(|m| scene.entities()[*m].has(a))
                        .collect()
                };
                let count = set.len();
                let mut up = Updater { kb, mask };
                up.promote_singleton(&set, &[a])?;
                up.set_group(set)?;
                Ok(if f.category() == crate::dsl::Category::Count {
                    Answer::Number(count)
                } else {
                    Answer::YesNo(count > 0)
                })
            }
            CountObjRelImm | CountObjRelImm2 | CountObjRelEarly | ExistObjRelImm
            | ExistObjRelImm2 | ExistObjRelEarly => {
                let pos = pos_arg(&args, 0);
                let fetch_by = (args.len() > 1).then(|| attr_arg(&args, 1));
                let r = self.referent(kb, f, fetch_by)?;
                let mut set = Vec::new();
                for e in 0..n {
                    if e != r && scene.relates(e, r, pos)? {
                        set.push(e);
                    }
                }
                let count = set.len();
                let mut up = Updater { kb, mask };
                if count == 1 {
                    up.promote_singleton(&set, &[])?;
                } else {
                    up.set_group(set)?;
                }
                Ok(if f.category() == crate::dsl::Category::Count {
                    Answer::Number(count)
                } else {
                    Answer::YesNo(count > 0)
                })
            }
            CountObjExcludeImm | CountObjExcludeEarly | ExistObjExcludeImm
            | ExistObjExcludeEarly => {
                let dim = type_arg(&args, 0);
                let fetch_by = (args.len() > 1).then(|| attr_arg(&args, 1));
                let r = self.referent(kb, f, fetch_by)?;
                let value = scene.entities()[r].value(dim);
                let set: Vec<usize> = (0..n)
                    .filter(|e| *e != r && scene.entities()[*e].value(dim) == value)
                    .collect();
                let count = set.len();
                let mut up = Updater { kb, mask };
                up.promote_singleton(&set, &[])?;
                up.set_group(set)?;
                Ok(if f.category() == crate::dsl::Category::Count {
                    Answer::Number(count)
                } else {
                    Answer::YesNo(count > 0)
                })
            }
            SeekAttrImm | SeekAttrImm2 | SeekAttrEarly => {
                let dim = type_arg(&args, 0);
                let fetch_by = (args.len() > 1).then(|| attr_arg(&args, 1));
                let r = self.referent(kb, f, fetch_by)?;
                let value = scene.entities()[r].attr(dim);
                let mut up = Updater { kb, mask };
                up.mention(r, &[value])?;
                up.focus(r)?;
                Ok(Answer::Attribute(value))
            }
            SeekAttrSimEarly => {
                let dim = type_arg(&args, 0);
                let a = attr_arg(&args, 1);
                let r = self.referent(kb, f, Some(a))?;
                let similar: Vec<usize> = scene
                    .filter_by_attrs(&[a])
                    .into_iter()
                    .filter(|e| *e != r)
                    .collect();
                let &[e] = similar.as_slice() else {
                    return Err(ExecError::AmbiguousSimilar(similar.len()));
                };
                let value = scene.entities()[e].attr(dim);
                let mut up = Updater { kb, mask };
                up.mention(e, &[a, value])?;
                up.focus(e)?;
                Ok(Answer::Attribute(value))
            }
            SeekAttrRelImm | SeekAttrRelEarly => {
                let dim = type_arg(&args, 0);
                let pos = pos_arg(&args, 1);
                let fetch_by = (args.len() > 2).then(|| attr_arg(&args, 2));
                let r = self.referent(kb, f, fetch_by)?;
                let origin = scene.entities()[r].coords;
                let mut nearest: Option<(usize, f64)> = None;
                for e in 0..n {
                    if e == r || !scene.relates(e, r, pos)? {
                        continue;
                    }
                    let d = xy_distance(scene.entities()[e].coords, origin);
                    if nearest.is_none_or(|(_, best)| d < best - crate::scene::SPATIAL_EPS) {
                        nearest = Some((e, d));
                    }
                }
                let Some((e, _)) = nearest else {
                    return Ok(Answer::NoneToken);
                };
                let value = scene.entities()[e].attr(dim);
                let mut up = Updater { kb, mask };
                up.mention(e, &[value])?;
                up.focus(e)?;
                Ok(Answer::Attribute(value))
            }
            CountAtt | ExtremeRight | ExtremeLeft | ExtremeBehind | ExtremeFront
            | ExtremeCentre | UniqueObj | ObjRelation => {
                unreachable!("caption kinds rejected above")
            }
        }
    }
}

impl fmt::Display for KnowledgeBase<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "round {}", self.round())?;
        write!(
            f,
            ", subject {:?}, prev_subject {:?}",
            self.subject(),
            self.prev_subject()
        )?;
        match self.group() {
            Some(g) => write!(f, ", group {:?}", g.members),
            None => write!(f, ", no group"),
        }
    }
}

/// Human-readable dump of the knowledge base.
pub fn describe_kb(kb: &KnowledgeBase<'_>, schema: &AttributeSchema) -> String {
    let mut out = format!("{kb}\n");
    for r in kb.seen() {
        let mut marks = String::new();
        if kb.subject() == Some(r.entity) {
            marks.push_str(" [subject]");
        }
        if kb.prev_subject() == Some(r.entity) {
            marks.push_str(" [prev]");
        }
        out.push_str(&format!(
            "  #{} `{}` (round {}){}\n",
            r.entity,
            schema.display_handle(&r.handle),
            r.first_mention_round,
            marks
        ));
    }
    out
}
