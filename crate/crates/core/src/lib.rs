//! Symbolic visual dialog over scene graphs.
//!
//! A dialog starts with a caption program that seeds a dynamic knowledge
//! base; each question is a single DSL call that answers from the scene and
//! updates the knowledge base (handles, conversation subject, seen
//! entities, active group). Around that core sit a template layer for
//! English, a dataset generator and an evaluation harness.

pub mod dialoggen;
pub mod dsl;
pub mod eval;
pub mod executor;
pub mod scene;
pub mod templates;

pub use dsl::{parse_program, Function, Program};
pub use executor::{Answer, Executor, KnowledgeBase};
pub use scene::{AttributeSchema, Scene};
