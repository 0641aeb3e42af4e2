//! English surface forms for programs, in both directions.
//!
//! A template set maps every DSL function to one or more surface forms. A
//! form is plain text with typed slots that are filled from the program
//! arguments, left to right:
//!
//! | slot     | argument    | renders as                          |
//! |----------|-------------|-------------------------------------|
//! | `{list}` | `attr_list` | `small red cylinder`, `red object`  |
//! | `{one}`  | `attr`      | `cylinder`, `red object`            |
//! | `{many}` | `attr`      | `cylinders`, `red objects`          |
//! | `{value}`| `attr`      | `red`                               |
//! | `{type}` | `attr_type` | `colour`                            |
//! | `{pos}`  | `pos`       | `to the right of`, `behind`         |
//!
//! Parsing is the inverse: input is lowercased, trailing punctuation and
//! commas are dropped, `an` is read as `a`, and each form is matched against
//! the whole token sequence with backtracking over slot lengths.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dsl::{parse_program_unchecked, Arg, ArgKind, DslError, Function, Kind, Program};
use crate::scene::{Attr, AttributeSchema, Position};

const DEFAULT_SET: &str = include_str!("default.json");

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("no template matches {text:?}; closest: {}", closest.join(" | "))]
    NoTemplateMatch { text: String, closest: Vec<String> },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid template set: {0}")]
    Load(String),
    #[error(transparent)]
    Dsl(#[from] DslError),
}

impl TemplateError {
    pub fn kind_name(&self) -> &'static str {
        match self {
            TemplateError::NoTemplateMatch { .. } => "NoTemplateMatch",
            TemplateError::Schema(_) => "SchemaError",
            TemplateError::Load(_) => "TemplateLoadError",
            TemplateError::Dsl(e) => e.kind_name(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    List,
    One,
    Many,
    Value,
    Type,
    Pos,
}

impl Slot {
    fn from_name(name: &str) -> Option<Slot> {
        Some(match name {
            "list" => Slot::List,
            "one" => Slot::One,
            "many" => Slot::Many,
            "value" => Slot::Value,
            "type" => Slot::Type,
            "pos" => Slot::Pos,
            _ => return None,
        })
    }

    fn fits(self, kind: ArgKind) -> bool {
        matches!(
            (self, kind),
            (Slot::List, ArgKind::AttrList)
                | (Slot::One | Slot::Many | Slot::Value, ArgKind::Attr)
                | (Slot::Type, ArgKind::AttrType)
                | (Slot::Pos, ArgKind::Pos)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Word(String),
    Slot(Slot),
}

#[derive(Debug, Clone)]
struct Form {
    text: String,
    pieces: Vec<Piece>,
    terminal: String,
    words: HashSet<String>,
}

#[derive(Debug, Clone)]
pub struct Template {
    pub function: Function,
    pub kind: Kind,
    forms: Vec<Form>,
}

impl Template {
    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.forms.iter().map(|f| f.text.as_str())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TemplateFile {
    #[serde(default)]
    vocabulary: Option<Vocabulary>,
    templates: Vec<TemplateDef>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TemplateDef {
    program: String,
    kind: Kind,
    forms: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Vocabulary {
    object: String,
    objects: String,
    positions: BTreeMap<String, String>,
    /// Irregular plurals of noun values.
    #[serde(default)]
    plurals: BTreeMap<String, String>,
}

/// Splits text into normalized tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .replace(',', " ")
        .split_whitespace()
        .map(|w| w.trim_end_matches(['?', '.', '!', ';', ':']))
        .filter(|w| !w.is_empty())
        .map(|w| {
            if w == "an" {
                "a".to_string()
            } else {
                w.to_string()
            }
        })
        .collect()
}

fn plural(word: &str) -> String {
    let consonant_y =
        word.ends_with('y') && !word[..word.len() - 1].ends_with(['a', 'e', 'i', 'o', 'u']);
    if consonant_y {
        format!("{}ies", &word[..word.len() - 1])
    } else if ["s", "x", "z", "ch", "sh"]
        .iter()
        .any(|e| word.ends_with(e))
    {
        format!("{word}es")
    } else {
        format!("{word}s")
    }
}

/// A loaded, immutable template registry bound to one attribute schema.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    schema: AttributeSchema,
    templates: Vec<Template>,
    object: String,
    objects: String,
    positions: Vec<Vec<String>>,
    plurals: Vec<String>,
}

/// One way a slot can consume tokens.
#[derive(Debug, Clone)]
enum Fill {
    Args(Vec<String>),
    Bad(String),
}

impl TemplateSet {
    /// The built-in English set.
    pub fn default_for(schema: &AttributeSchema) -> Self {
        Self::from_json(DEFAULT_SET, schema).expect("built-in templates are valid")
    }

    pub fn load(path: &Path, schema: &AttributeSchema) -> Result<Self, TemplateError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TemplateError::Load(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, schema)
    }

    pub fn from_json(text: &str, schema: &AttributeSchema) -> Result<Self, TemplateError> {
        let file: TemplateFile =
            serde_json::from_str(text).map_err(|e| TemplateError::Load(e.to_string()))?;
        let vocab = file.vocabulary.unwrap_or_else(|| {
            let d: TemplateFile = serde_json::from_str(DEFAULT_SET).unwrap();
            d.vocabulary.unwrap()
        });
        let mut positions = Vec::new();
        for p in Position::ALL {
            let phrase = vocab
                .positions
                .get(p.as_str())
                .ok_or_else(|| TemplateError::Load(format!("no phrase for position `{p}`")))?;
            positions.push(tokenize(phrase));
        }
        let noun = schema.noun_dimension();
        let plurals = schema
            .values(noun)
            .iter()
            .map(|v| vocab.plurals.get(v).cloned().unwrap_or_else(|| plural(v)))
            .collect();

        let mut slots: Vec<Option<Template>> = vec![None; Function::ALL.len()];
        for def in file.templates {
            let function = Function::from_name(&def.program).ok_or_else(|| {
                TemplateError::Load(format!("unknown function `{}`", def.program))
            })?;
            if function.kind() != def.kind {
                return Err(TemplateError::Load(format!(
                    "`{}` is not a {:?} function",
                    def.program, def.kind
                )));
            }
            if slots[function as usize].is_some() {
                return Err(TemplateError::Load(format!(
                    "`{}` listed twice",
                    def.program
                )));
            }
            if def.forms.is_empty() {
                return Err(TemplateError::Load(format!(
                    "`{}` has no forms",
                    def.program
                )));
            }
            let forms = def
                .forms
                .iter()
                .map(|f| compile_form(f, function))
                .collect::<Result<Vec<_>, _>>()?;
            slots[function as usize] = Some(Template {
                function,
                kind: def.kind,
                forms,
            });
        }
        let templates = slots
            .into_iter()
            .zip(Function::ALL)
            .map(|(t, f)| {
                t.ok_or_else(|| TemplateError::Load(format!("`{}` has no template", f.name())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TemplateSet {
            schema: schema.clone(),
            templates,
            object: vocab.object.to_lowercase(),
            objects: vocab.objects.to_lowercase(),
            positions,
            plurals,
        })
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn template(&self, function: Function) -> &Template {
        &self.templates[function as usize]
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn variants(&self, function: Function) -> usize {
        self.template(function).forms.len()
    }

    /// Renders `p` with form `variant` (taken modulo the number of forms).
    pub fn render(&self, p: &Program, variant: usize) -> Result<String, TemplateError> {
        let args = p.bind(&self.schema)?;
        let t = self.template(p.function);
        let form = &t.forms[variant % t.forms.len()];
        let mut words: Vec<String> = Vec::new();
        let mut next = args.iter();
        for piece in &form.pieces {
            match piece {
                Piece::Word(w) => words.push(w.clone()),
                Piece::Slot(s) => {
                    let arg = next.next().expect("slot count checked at load");
                    self.render_slot(*s, arg, &mut words);
                }
            }
        }
        for i in 1..words.len() {
            if words[i - 1] == "a" && words[i].starts_with(['a', 'e', 'i', 'o', 'u']) {
                words[i - 1] = "an".into();
            }
        }
        let mut text = words.join(" ");
        if let Some(c) = text.get(..1) {
            text.replace_range(..1, &c.to_uppercase());
        }
        text.push_str(&form.terminal);
        Ok(text)
    }

    fn render_slot(&self, slot: Slot, arg: &Arg, out: &mut Vec<String>) {
        let s = &self.schema;
        let noun = s.noun_dimension();
        match (slot, arg) {
            (Slot::List, Arg::AttrList(list)) => {
                let mut adjectives: Vec<Attr> =
                    list.iter().copied().filter(|a| a.dim != noun).collect();
                adjectives.sort_by_key(|a| a.dim);
                out.extend(adjectives.iter().map(|a| s.name(*a).to_string()));
                match list.iter().find(|a| a.dim == noun) {
                    Some(a) => out.push(s.name(*a).to_string()),
                    None => out.push(self.object.clone()),
                }
            }
            (Slot::One, Arg::Attr(a)) => {
                out.push(s.name(*a).to_string());
                if a.dim != noun {
                    out.push(self.object.clone());
                }
            }
            (Slot::Many, Arg::Attr(a)) => {
                if a.dim == noun {
                    out.push(self.plurals[a.value].clone());
                } else {
                    out.push(s.name(*a).to_string());
                    out.push(self.objects.clone());
                }
            }
            (Slot::Value, Arg::Attr(a)) => out.push(s.name(*a).to_string()),
            (Slot::Type, Arg::AttrType(d)) => out.push(s.dimension_name(*d).to_string()),
            (Slot::Pos, Arg::Pos(p)) => out.extend(self.positions[*p as usize].iter().cloned()),
            _ => unreachable!("slot kinds checked at load"),
        }
    }

    /// Parses English into a program of the given kind.
    pub fn parse_nl(&self, text: &str, kind: Kind) -> Result<Program, TemplateError> {
        let tokens = tokenize(text);
        let mut schema_error = None;
        for t in self.templates.iter().filter(|t| t.kind == kind) {
            for form in &t.forms {
                for fills in self.matches(&form.pieces, &tokens) {
                    match self.build(t.function, fills) {
                        Ok(p) => return Ok(p),
                        Err(e) => {
                            schema_error.get_or_insert(e);
                        }
                    }
                }
            }
        }
        if let Some(e) = schema_error {
            return Err(e);
        }
        Err(TemplateError::NoTemplateMatch {
            text: text.to_string(),
            closest: self.closest(&tokens, kind),
        })
    }

    /// Every distinct valid program that some form of `kind` reads `text` as.
    pub fn parse_all(&self, text: &str, kind: Kind) -> Vec<Program> {
        let tokens = tokenize(text);
        let mut out: Vec<Program> = Vec::new();
        for t in self.templates.iter().filter(|t| t.kind == kind) {
            for form in &t.forms {
                for fills in self.matches(&form.pieces, &tokens) {
                    if let Ok(p) = self.build(t.function, fills) {
                        if !out.contains(&p) {
                            out.push(p);
                        }
                    }
                }
            }
        }
        out
    }

    fn build(&self, function: Function, fills: Vec<Fill>) -> Result<Program, TemplateError> {
        let mut args = Vec::new();
        for f in fills {
            match f {
                Fill::Args(a) => args.extend(a),
                Fill::Bad(msg) => return Err(TemplateError::Schema(msg)),
            }
        }
        let p = Program::new(function, args).canonical(&self.schema);
        p.validate(&self.schema)
            .map_err(|e| TemplateError::Schema(e.to_string()))?;
        Ok(p)
    }

    fn closest(&self, tokens: &[String], kind: Kind) -> Vec<String> {
        let input: HashSet<&str> = tokens.iter().map(String::as_str).collect();
        let mut scored: Vec<(usize, usize, String)> = Vec::new();
        for t in self.templates.iter().filter(|t| t.kind == kind) {
            for form in &t.forms {
                let overlap = form
                    .words
                    .iter()
                    .filter(|w| input.contains(w.as_str()))
                    .count();
                scored.push((
                    overlap,
                    scored.len(),
                    format!("{}: {}", t.function.name(), form.text),
                ));
            }
        }
        scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        scored.into_iter().take(3).map(|s| s.2).collect()
    }

    /// All complete matches of `pieces` against `tokens`.
    fn matches(&self, pieces: &[Piece], tokens: &[String]) -> Vec<Vec<Fill>> {
        let mut out = Vec::new();
        let mut acc = Vec::new();
        self.match_from(pieces, tokens, &mut acc, &mut out);
        out
    }

    fn match_from(
        &self,
        pieces: &[Piece],
        tokens: &[String],
        acc: &mut Vec<Fill>,
        out: &mut Vec<Vec<Fill>>,
    ) {
        let Some((first, rest)) = pieces.split_first() else {
            if tokens.is_empty() {
                out.push(acc.clone());
            }
            return;
        };
        match first {
            Piece::Word(w) => {
                if tokens.first() == Some(w) {
                    self.match_from(rest, &tokens[1..], acc, out);
                }
            }
            Piece::Slot(s) => {
                for (used, fill) in self.slot_options(*s, tokens) {
                    acc.push(fill);
                    self.match_from(rest, &tokens[used..], acc, out);
                    acc.pop();
                }
            }
        }
    }

    fn slot_options(&self, slot: Slot, tokens: &[String]) -> Vec<(usize, Fill)> {
        let s = &self.schema;
        let noun = s.noun_dimension();
        let mut out = Vec::new();
        let is_noun = |t: &str| s.attr(t).is_some_and(|a| a.dim == noun);
        // `X object` with an unknown or noun `X` still matches, so that the
        // caller can report what was wrong with the value.
        let qualified = |t: &str| match s.attr(t) {
            Some(a) if a.dim != noun => Fill::Args(vec![t.to_string()]),
            Some(_) => Fill::Bad(format!("`{t}` cannot qualify `{}`", self.object)),
            None => Fill::Bad(format!("`{t}` is not an attribute value")),
        };
        match slot {
            Slot::List => {
                let mut adjectives = Vec::new();
                for (i, t) in tokens.iter().enumerate() {
                    if is_noun(t) {
                        let mut args = vec![t.clone()];
                        args.extend(adjectives.iter().cloned());
                        out.push((i + 1, Fill::Args(args)));
                        break;
                    }
                    if *t == self.object && !adjectives.is_empty() {
                        out.push((i + 1, Fill::Args(adjectives.clone())));
                        break;
                    }
                    match s.attr(t) {
                        Some(_) if adjectives.len() < s.num_dimensions() => {
                            adjectives.push(t.clone())
                        }
                        _ => break,
                    }
                }
            }
            Slot::One => {
                if let Some(t) = tokens.first() {
                    if is_noun(t) {
                        out.push((1, Fill::Args(vec![t.clone()])));
                    }
                    if tokens.get(1) == Some(&self.object) {
                        out.push((2, qualified(t)));
                    }
                }
            }
            Slot::Many => {
                if let Some(t) = tokens.first() {
                    if let Some(v) = self.plurals.iter().position(|p| p == t) {
                        out.push((1, Fill::Args(vec![s.values(noun)[v].clone()])));
                    }
                    if tokens.get(1) == Some(&self.objects) {
                        out.push((2, qualified(t)));
                    }
                }
            }
            Slot::Value => {
                if let Some(t) = tokens.first() {
                    if s.attr(t).is_some() {
                        out.push((1, Fill::Args(vec![t.clone()])));
                    }
                }
            }
            Slot::Type => {
                if let Some(d) = tokens.first().and_then(|t| s.dimension(t)) {
                    out.push((1, Fill::Args(vec![s.dimension_name(d).to_string()])));
                }
            }
            Slot::Pos => {
                for (i, phrase) in self.positions.iter().enumerate() {
                    if tokens.starts_with(phrase) {
                        out.push((
                            phrase.len(),
                            Fill::Args(vec![Position::ALL[i].as_str().to_string()]),
                        ));
                    }
                }
            }
        }
        out
    }

    /// Parses either English or, with a leading `!`, raw program syntax.
    pub fn parse_input(&self, text: &str, kind: Kind) -> Result<Program, TemplateError> {
        match text.trim().strip_prefix('!') {
            Some(raw) => {
                let p = parse_program_unchecked(raw)?;
                p.validate(&self.schema)?;
                if p.function.kind() != kind {
                    return Err(TemplateError::Schema(format!(
                        "`{}` is not a {} program",
                        p.function.name(),
                        if kind == Kind::Caption {
                            "caption"
                        } else {
                            "question"
                        }
                    )));
                }
                Ok(p)
            }
            None => self.parse_nl(text, kind),
        }
    }
}

fn compile_form(text: &str, function: Function) -> Result<Form, TemplateError> {
    let bad = |m: String| TemplateError::Load(format!("`{}` form {text:?}: {m}", function.name()));
    let trimmed = text.trim();
    let body = trimmed.trim_end_matches(['?', '.', '!']);
    let terminal = trimmed[body.len()..].to_string();
    let mut pieces = Vec::new();
    for tok in tokenize(body) {
        if let Some(name) = tok.strip_prefix('{').and_then(|t| t.strip_suffix('}')) {
            let slot = Slot::from_name(name).ok_or_else(|| bad(format!("unknown slot `{tok}`")))?;
            pieces.push(Piece::Slot(slot));
        } else {
            pieces.push(Piece::Word(tok));
        }
    }
    let slots: Vec<Slot> = pieces
        .iter()
        .filter_map(|p| match p {
            Piece::Slot(s) => Some(*s),
            Piece::Word(_) => None,
        })
        .collect();
    let args = function.signature().args;
    if slots.len() != args.len() || !slots.iter().zip(args).all(|(s, a)| s.fits(*a)) {
        return Err(bad(format!(
            "slots do not follow the argument list ({})",
            args.iter()
                .map(|a| a.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }
    let words = pieces
        .iter()
        .filter_map(|p| match p {
            Piece::Word(w) => Some(w.clone()),
            Piece::Slot(_) => None,
        })
        .collect();
    Ok(Form {
        text: trimmed.to_string(),
        pieces,
        terminal,
        words,
    })
}
