//! The dialog DSL: single-call programs such as `extreme-centre(cylinder, small)`.
//!
//! A [`Program`] is one function applied to a flat list of argument tokens;
//! programs never nest. Text syntax is `name(arg, arg)`, with a bare `name`
//! for zero-argument functions.

mod registry;

use std::fmt;

use thiserror::Error;

use crate::scene::{Attr, AttributeSchema, Position};

pub use registry::{ArgKind, Category, Function, KbMask, Kind, Output, Reference, Signature};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DslError {
    #[error("syntax error at {position}: expected {expected}")]
    Syntax { position: usize, expected: String },
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("bad arguments for `{function}`: {message}")]
    Argument { function: String, message: String },
}

impl DslError {
    pub fn kind_name(&self) -> &'static str {
        match self {
            DslError::Syntax { .. } => "SyntaxError",
            DslError::UnknownFunction(_) => "UnknownFunction",
            DslError::Argument { .. } => "ArgumentError",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Program {
    pub function: Function,
    pub args: Vec<String>,
}

/// A program argument resolved against a schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Arg {
    Attr(Attr),
    AttrType(usize),
    Pos(Position),
    AttrList(Vec<Attr>),
}

impl Program {
    pub fn new<S: Into<String>>(function: Function, args: impl IntoIterator<Item = S>) -> Self {
        Program {
            function,
            args: args.into_iter().map(Into::into).collect(),
        }
    }

    pub fn signature(&self) -> &'static Signature {
        self.function.signature()
    }

    pub fn category(&self) -> Category {
        self.function.category()
    }

    fn arg_error(&self, message: String) -> DslError {
        DslError::Argument {
            function: self.function.name().to_string(),
            message,
        }
    }

    /// Type-checks the arguments and resolves them to schema values.
    pub fn bind(&self, schema: &AttributeSchema) -> Result<Vec<Arg>, DslError> {
        let spec = self.signature().args;
        if spec == [ArgKind::AttrList] {
            if self.args.is_empty() || self.args.len() > schema.num_dimensions() {
                return Err(self.arg_error(format!(
                    "expected 1 to {} attributes, got {}",
                    schema.num_dimensions(),
                    self.args.len()
                )));
            }
            let mut list = Vec::with_capacity(self.args.len());
            for tok in &self.args {
                let a = schema
                    .attr(tok)
                    .ok_or_else(|| self.arg_error(format!("`{tok}` is not an attribute value")))?;
                if let Some(prev) = list.iter().find(|p: &&Attr| p.dim == a.dim) {
                    return Err(self.arg_error(format!(
                        "`{tok}` repeats the {} dimension of `{}`",
                        schema.dimension_name(a.dim),
                        schema.name(*prev)
                    )));
                }
                list.push(a);
            }
            return Ok(vec![Arg::AttrList(list)]);
        }
        if self.args.len() != spec.len() {
            return Err(self.arg_error(format!(
                "expected {} arguments, got {}",
                spec.len(),
                self.args.len()
            )));
        }
        spec.iter()
            .zip(&self.args)
            .map(|(kind, tok)| {
                let bad = || self.arg_error(format!("`{tok}` is not a valid {}", kind.as_str()));
                match kind {
                    ArgKind::Attr => schema.attr(tok).map(Arg::Attr).ok_or_else(bad),
                    ArgKind::AttrType => {
                        // Only canonical dimension names, not file spellings.
                        (0..schema.num_dimensions())
                            .find(|d| schema.dimension_name(*d) == tok)
                            .map(Arg::AttrType)
                            .ok_or_else(bad)
                    }
                    ArgKind::Pos => tok.parse().map(Arg::Pos).map_err(|_| bad()),
                    ArgKind::AttrList => unreachable!("attr_list is only used alone"),
                }
            })
            .collect()
    }

    pub fn validate(&self, schema: &AttributeSchema) -> Result<(), DslError> {
        self.bind(schema).map(|_| ())
    }

    /// Reorders attribute lists into the canonical program order: the noun
    /// dimension first, then the remaining dimensions in schema order.
    pub fn canonical(&self, schema: &AttributeSchema) -> Program {
        if self.signature().args != [ArgKind::AttrList] {
            return self.clone();
        }
        let mut args = self.args.clone();
        let rank = |tok: &String| {
            schema
                .attr(tok)
                .map(|a| attr_list_rank(schema, a.dim))
                .unwrap_or(usize::MAX)
        };
        args.sort_by_key(rank);
        Program {
            function: self.function,
            args,
        }
    }
}

/// Sort key of a dimension inside an attribute list.
pub fn attr_list_rank(schema: &AttributeSchema, dim: usize) -> usize {
    if dim == schema.noun_dimension() {
        0
    } else {
        dim + 1
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.function.name())?;
        if !self.args.is_empty() {
            write!(f, "({})", self.args.join(", "))?;
        }
        Ok(())
    }
}

pub fn serialize_program(p: &Program) -> String {
    p.to_string()
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.text[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn ident(&mut self, what: &str) -> Result<&'a str, DslError> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == '_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        if self.pos == start {
            return Err(self.expected(what));
        }
        Ok(&self.text[start..self.pos])
    }

    fn expected(&self, what: &str) -> DslError {
        DslError::Syntax {
            position: self.pos,
            expected: what.to_string(),
        }
    }
}

/// Parses program text without checking arguments against a schema.
pub fn parse_program_unchecked(text: &str) -> Result<Program, DslError> {
    let mut cur = Cursor { text, pos: 0 };
    cur.skip_ws();
    let name = cur.ident("function name")?;
    let function =
        Function::from_name(name).ok_or_else(|| DslError::UnknownFunction(name.to_string()))?;
    cur.skip_ws();
    let mut args = Vec::new();
    if cur.peek() == Some('(') {
        cur.pos += 1;
        cur.skip_ws();
        if cur.peek() == Some(')') {
            cur.pos += 1;
        } else {
            loop {
                cur.skip_ws();
                args.push(cur.ident("argument")?.to_string());
                cur.skip_ws();
                match cur.peek() {
                    Some(',') => cur.pos += 1,
                    Some(')') => {
                        cur.pos += 1;
                        break;
                    }
                    _ => return Err(cur.expected("`,` or `)`")),
                }
            }
        }
        cur.skip_ws();
    }
    if cur.pos != text.len() {
        return Err(cur.expected(if args.is_empty() {
            "`(` or end of input"
        } else {
            "end of input"
        }));
    }
    Ok(Program { function, args })
}

pub fn parse_program(text: &str, schema: &AttributeSchema) -> Result<Program, DslError> {
    let p = parse_program_unchecked(text)?;
    p.validate(schema)?;
    Ok(p)
}

/// Every valid argument list for `function`, attribute lists in canonical order.
pub fn enumerate_args(function: Function, schema: &AttributeSchema) -> Vec<Vec<String>> {
    let spec = function.signature().args;
    if spec == [ArgKind::AttrList] {
        let mut dims: Vec<usize> = (0..schema.num_dimensions()).collect();
        dims.sort_by_key(|d| attr_list_rank(schema, *d));
        let mut out: Vec<Vec<String>> = vec![vec![]];
        for d in dims {
            let mut next = Vec::new();
            for prefix in &out {
                next.push(prefix.clone());
                for v in schema.values(d) {
                    let mut p = prefix.clone();
                    p.push(v.clone());
                    next.push(p);
                }
            }
            out = next;
        }
        out.retain(|l| !l.is_empty());
        return out;
    }
    let mut out: Vec<Vec<String>> = vec![vec![]];
    for kind in spec {
        let choices: Vec<String> = match kind {
            ArgKind::Attr => schema
                .all_attrs()
                .map(|a| schema.name(a).to_string())
                .collect(),
            ArgKind::AttrType => schema.dimension_names().to_vec(),
            ArgKind::Pos => Position::ALL
                .iter()
                .map(|p| p.as_str().to_string())
                .collect(),
            ArgKind::AttrList => unreachable!(),
        };
        out = out
            .into_iter()
            .flat_map(|prefix| {
                choices.iter().map(move |c| {
                    let mut p = prefix.clone();
                    p.push(c.clone());
                    p
                })
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> AttributeSchema {
        AttributeSchema::clevr()
    }

    #[test]
    fn parses_figure_example() {
        let p = parse_program("extreme-centre(cylinder, small)", &schema()).unwrap();
        assert_eq!(
            p,
            Program::new(Function::ExtremeCentre, ["cylinder", "small"])
        );
    }

    #[test]
    fn zero_arity_forms() {
        let s = schema();
        let p = Program::new(Function::CountAll, Vec::<String>::new());
        assert_eq!(parse_program("count-all", &s).unwrap(), p);
        assert_eq!(parse_program(" count-all ( ) ", &s).unwrap(), p);
        assert_eq!(serialize_program(&p), "count-all");
    }

    #[test]
    fn arity_mismatch_is_argument_error() {
        let e = parse_program("seek-attr-early(colour, cylinder, red)", &schema()).unwrap_err();
        assert!(matches!(e, DslError::Argument { .. }), "{e:?}");
        assert!(e.to_string().contains("expected 2"));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let s = schema();
        assert_eq!(
            parse_program("count-attribute(red", &s),
            Err(DslError::Syntax {
                position: 19,
                expected: "`,` or `)`".into()
            })
        );
        assert!(matches!(
            parse_program("count-attribute(red,)", &s),
            Err(DslError::Syntax { position: 20, .. })
        ));
        assert!(matches!(
            parse_program("", &s),
            Err(DslError::Syntax { position: 0, .. })
        ));
        assert!(matches!(
            parse_program("count-all x", &s),
            Err(DslError::Syntax { .. })
        ));
        assert_eq!(
            parse_program("count-everything", &s),
            Err(DslError::UnknownFunction("count-everything".into()))
        );
    }

    #[test]
    fn alias_resolves_to_table_name() {
        let p = parse_program("seek-attribute-early(colour, cylinder)", &schema()).unwrap();
        assert_eq!(p.function, Function::SeekAttrEarly);
        assert_eq!(p.to_string(), "seek-attr-early(colour, cylinder)");
    }

    #[test]
    fn validate_examples() {
        let s = schema();
        assert!(
            Program::new(Function::UniqueObj, ["small", "red", "rubber", "cube"])
                .validate(&s)
                .is_ok()
        );
        let e = Program::new(Function::UniqueObj, ["red", "blue"])
            .validate(&s)
            .unwrap_err();
        assert!(e.to_string().contains("blue"));
        assert!(Program::new(Function::CountObjRelEarly, ["behind", "red"])
            .validate(&s)
            .is_ok());
        assert!(Program::new(Function::CountObjRelEarly, ["red", "behind"])
            .validate(&s)
            .is_err());
        assert!(Program::new(Function::SeekAttrImm, ["color"])
            .validate(&s)
            .is_err());
        assert!(Program::new(Function::UniqueObj, Vec::<String>::new())
            .validate(&s)
            .is_err());
    }

    #[test]
    fn categories() {
        let s = schema();
        let cat = |t: &str| parse_program(t, &s).unwrap().category();
        assert_eq!(cat("count-obj-exclude-imm(colour)"), Category::Count);
        assert_eq!(cat("obj-relation(red, left, cube)"), Category::Caption);
        assert_eq!(cat("seek-attr-sim-early(shape, red)"), Category::Seek);
    }

    #[test]
    fn serialization_examples() {
        let p = Program::new(Function::SeekAttrEarly, ["colour", "cylinder"]);
        assert_eq!(serialize_program(&p), "seek-attr-early(colour, cylinder)");
    }

    #[test]
    fn canonical_attr_list_order() {
        let s = schema();
        let p = Program::new(Function::UniqueObj, ["red", "small", "cube", "metal"]);
        assert_eq!(p.canonical(&s).args, vec!["cube", "small", "red", "metal"]);
        let fig = Program::new(Function::ExtremeCentre, ["cylinder", "small"]);
        assert_eq!(fig.canonical(&s), fig);
    }

    #[test]
    fn enumeration_sizes() {
        let s = schema();
        assert_eq!(
            enumerate_args(Function::UniqueObj, &s).len(),
            3 * 9 * 3 * 4 - 1
        );
        assert_eq!(
            enumerate_args(Function::CountAll, &s),
            vec![Vec::<String>::new()]
        );
        assert_eq!(
            enumerate_args(Function::SeekAttrRelEarly, &s).len(),
            4 * 4 * 15
        );
        for f in Function::ALL {
            for args in enumerate_args(*f, &s) {
                Program::new(*f, args).validate(&s).unwrap();
            }
        }
    }
}
