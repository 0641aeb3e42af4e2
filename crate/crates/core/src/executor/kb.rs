use crate::dsl::KbMask;
use crate::scene::{Attr, Scene};

use super::ExecError;

/// A mentioned entity and what the dialog has revealed about it so far.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeenRecord {
    pub entity: usize,
    /// Known attribute values in the order they were established.
    pub handle: Vec<Attr>,
    /// Round of first mention; the caption is round 0.
    pub first_mention_round: usize,
}

impl SeenRecord {
    pub fn known(&self, dim: usize) -> Option<Attr> {
        self.handle.iter().copied().find(|a| a.dim == dim)
    }

    pub fn knows(&self, attr: Attr) -> bool {
        self.handle.contains(&attr)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub members: Vec<usize>,
    pub created_round: usize,
}

/// One knowledge-base mutation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Update {
    /// Append a newly revealed value to an existing record's handle.
    Handle { entity: usize, attr: Attr },
    /// Make an entity the conversation subject; the old one is demoted.
    Subject(usize),
    /// Insert a record for an entity not seen before.
    Seen { entity: usize, handle: Vec<Attr> },
    /// Replace the active group.
    Group(Vec<usize>),
}

impl Update {
    fn permitted(&self, mask: &KbMask) -> bool {
        match self {
            Update::Handle { .. } => mask.handle,
            Update::Subject(_) => mask.subject,
            Update::Seen { .. } => mask.seen,
            Update::Group(_) => mask.groups,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Update::Handle { .. } => "handle",
            Update::Subject(_) => "subject",
            Update::Seen { .. } => "seen",
            Update::Group(_) => "group",
        }
    }
}

/// Dialog state for one dialog over one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase<'s> {
    scene: &'s Scene,
    seen: Vec<SeenRecord>,
    subject: Option<usize>,
    prev_subject: Option<usize>,
    group: Option<Group>,
    round: usize,
    initialized: bool,
}

impl<'s> KnowledgeBase<'s> {
    pub fn new(scene: &'s Scene) -> Self {
        KnowledgeBase {
            scene,
            seen: Vec::new(),
            subject: None,
            prev_subject: None,
            group: None,
            round: 0,
            initialized: false,
        }
    }

    pub fn scene(&self) -> &'s Scene {
        self.scene
    }

    pub fn seen(&self) -> &[SeenRecord] {
        &self.seen
    }

    pub fn record(&self, entity: usize) -> Option<&SeenRecord> {
        self.seen.iter().find(|r| r.entity == entity)
    }

    pub fn is_seen(&self, entity: usize) -> bool {
        self.record(entity).is_some()
    }

    pub fn subject(&self) -> Option<usize> {
        self.subject
    }

    pub fn prev_subject(&self) -> Option<usize> {
        self.prev_subject
    }

    pub fn group(&self) -> Option<&Group> {
        self.group.as_ref()
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// Whether a caption has been executed.
    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    /// Marks the caption as done; for KBs rebuilt from stored state.
    pub fn mark_initialized(&mut self) {
        self.initialized = true;
    }

    /// Moves to the next question round.
    pub fn advance_round(&mut self) {
        self.round += 1;
    }

    /// Earliest-mentioned record whose known values include every constraint.
    pub fn fetch(&self, constraints: &[Attr]) -> Result<usize, ExecError> {
        if constraints.is_empty() {
            return Err(ExecError::Fetch("empty constraint set".into()));
        }
        self.seen
            .iter()
            .find(|r| constraints.iter().all(|a| r.knows(*a)))
            .map(|r| r.entity)
            .ok_or_else(|| ExecError::Fetch(format!("no seen entity matches {constraints:?}")))
    }

    /// Applies one update if `mask` permits it.
    pub fn apply_update(&mut self, mask: &KbMask, update: Update) -> Result<(), ExecError> {
        if !update.permitted(mask) {
            return Err(ExecError::MaskViolation(update.name()));
        }
        match update {
            Update::Handle { entity, attr } => {
                if !self.scene.entity(entity)?.has(attr) {
                    return Err(ExecError::ExecutionState(format!(
                        "entity {entity} does not carry the handle value"
                    )));
                }
                let rec = self
                    .seen
                    .iter_mut()
                    .find(|r| r.entity == entity)
                    .ok_or_else(|| {
                        ExecError::ExecutionState(format!("entity {entity} is not seen"))
                    })?;
                if !rec.handle.contains(&attr) {
                    rec.handle.push(attr);
                }
            }
            Update::Subject(entity) => {
                if !self.is_seen(entity) {
                    return Err(ExecError::ExecutionState(format!(
                        "subject {entity} has no seen record"
                    )));
                }
                if self.subject != Some(entity) {
                    self.prev_subject = self.subject;
                    self.subject = Some(entity);
                }
            }
            Update::Seen { entity, mut handle } => {
                let e = self.scene.entity(entity)?;
                if !handle.iter().all(|a| e.has(*a)) {
                    return Err(ExecError::ExecutionState(format!(
                        "handle does not describe entity {entity}"
                    )));
                }
                if !self.is_seen(entity) {
                    handle.sort_by_key(|a| a.dim);
                    handle.dedup();
                    self.seen.push(SeenRecord {
                        entity,
                        handle,
                        first_mention_round: self.round,
                    });
                }
            }
            Update::Group(members) => {
                for m in &members {
                    self.scene.entity(*m)?;
                }
                self.group = Some(Group {
                    members,
                    created_round: self.round,
                });
            }
        }
        Ok(())
    }
}
