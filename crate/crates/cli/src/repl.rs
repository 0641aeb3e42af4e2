//! Line-oriented interactive loop over one scene.
//!
//! The first accepted line is the caption; every later line is a question.
//! Lines starting with `!` are read as raw programs. `:kb` dumps the
//! knowledge base and `:quit` leaves.

use std::io::{self, BufRead, Write};

use nsvd_core::dsl::Kind;
use nsvd_core::executor::{describe_kb, Executor, KnowledgeBase};
use nsvd_core::templates::{TemplateError, TemplateSet};
use nsvd_core::Scene;

/// What changed between two knowledge-base states, one line per change.
pub fn kb_delta(
    before: &KnowledgeBase<'_>,
    after: &KnowledgeBase<'_>,
    templates: &TemplateSet,
) -> Vec<String> {
    let schema = templates.schema();
    let mut out = Vec::new();
    for r in after.seen() {
        match before.record(r.entity) {
            None => out.push(format!(
                "+ seen #{} `{}`",
                r.entity,
                schema.display_handle(&r.handle)
            )),
            Some(old) if old.handle != r.handle => out.push(format!(
                "~ handle #{} `{}`",
                r.entity,
                schema.display_handle(&r.handle)
            )),
            Some(_) => {}
        }
    }
    if before.subject() != after.subject() {
        out.push(format!(
            "~ subject {:?} (previous {:?})",
            after.subject(),
            after.prev_subject()
        ));
    }
    if before.group() != after.group() {
        out.push(format!("~ group {:?}", after.group().map(|g| &g.members)));
    }
    out
}

pub fn run_repl<R: BufRead>(
    scene: &Scene,
    templates: &TemplateSet,
    input: R,
    out: &mut dyn Write,
) -> io::Result<()> {
    let schema = templates.schema();
    let ex = Executor::new(schema);
    let mut kb = ex.init_kb(scene);
    writeln!(
        out,
        "scene {} with {} objects; enter a caption",
        scene.scene_id,
        scene.len()
    )?;
    for line in input.lines() {
        let line = line?;
        let text = line.trim();
        match text {
            "" => continue,
            ":quit" | ":q" => break,
            ":kb" => {
                write!(out, "{}", describe_kb(&kb, schema))?;
                continue;
            }
            _ => {}
        }
        let kind = if kb.is_initialized() {
            Kind::Question
        } else {
            Kind::Caption
        };
        let program = match templates.parse_input(text, kind) {
            Ok(p) => p,
            Err(TemplateError::NoTemplateMatch { closest, .. }) => {
                writeln!(out, "error: NoTemplateMatch; did you mean:")?;
                for c in closest {
                    writeln!(out, "  {c}")?;
                }
                continue;
            }
            Err(e) => {
                writeln!(out, "error: {}: {e}", e.kind_name())?;
                continue;
            }
        };
        writeln!(out, "program: {program}")?;
        let before = kb.clone();
        let result = if kind == Kind::Caption {
            ex.execute_caption(&mut kb, &program).map(|o| {
                if o.ambiguous {
                    "ok (ambiguous)".to_string()
                } else {
                    "ok".to_string()
                }
            })
        } else {
            kb.advance_round();
            ex.execute_question(&mut kb, &program)
                .map(|a| a.render(schema))
        };
        match result {
            Ok(answer) => {
                writeln!(out, "answer: {answer}")?;
                for d in kb_delta(&before, &kb, templates) {
                    writeln!(out, "  {d}")?;
                }
            }
            Err(e) => {
                kb = before;
                writeln!(out, "error: {}: {e}", e.kind_name())?;
            }
        }
    }
    Ok(())
}
