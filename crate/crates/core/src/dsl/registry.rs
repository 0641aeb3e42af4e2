use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Caption,
    Question,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Caption,
    Count,
    Exist,
    Seek,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Caption => "Caption",
            Category::Count => "Count",
            Category::Exist => "Exist",
            Category::Seek => "Seek",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArgKind {
    /// A single attribute value, e.g. `red`.
    Attr,
    /// A dimension name, e.g. `colour`.
    AttrType,
    /// One of `right`, `left`, `front`, `behind`.
    Pos,
    /// One to four attribute values from pairwise distinct dimensions.
    AttrList,
}

impl ArgKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ArgKind::Attr => "attr",
            ArgKind::AttrType => "attr_type",
            ArgKind::Pos => "pos",
            ArgKind::AttrList => "attr_list",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Output {
    None,
    Num,
    YesNo,
    Attr,
}

/// Which knowledge-base operations a function may perform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct KbMask {
    pub fetch: bool,
    pub handle: bool,
    pub subject: bool,
    pub seen: bool,
    pub groups: bool,
}

impl KbMask {
    pub const ALL: KbMask = KbMask {
        fetch: true,
        handle: true,
        subject: true,
        seen: true,
        groups: true,
    };

    const fn of(bits: [bool; 5]) -> KbMask {
        KbMask {
            fetch: bits[0],
            handle: bits[1],
            subject: bits[2],
            seen: bits[3],
            groups: bits[4],
        }
    }
}

macro_rules! functions {
    ($( $variant:ident => $name:literal ),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Function {
            $( $variant, )*
        }

        impl Function {
            pub const ALL: &'static [Function] = &[ $( Function::$variant, )* ];

            pub fn name(self) -> &'static str {
                match self {
                    $( Function::$variant => $name, )*
                }
            }

            /// Resolves a canonical name or a known long-form alias.
            pub fn from_name(name: &str) -> Option<Function> {
                match name {
                    $( $name => Some(Function::$variant), )*
                    "seek-attribute-early" => Some(Function::SeekAttrEarly),
                    _ => None,
                }
            }
        }
    };
}

functions! {
    CountAtt => "count-att",
    ExtremeRight => "extreme-right",
    ExtremeLeft => "extreme-left",
    ExtremeBehind => "extreme-behind",
    ExtremeFront => "extreme-front",
    ExtremeCentre => "extreme-centre",
    UniqueObj => "unique-obj",
    ObjRelation => "obj-relation",
    CountAll => "count-all",
    CountOther => "count-other",
    CountAllGroup => "count-all-group",
    CountAttribute => "count-attribute",
    CountAttributeGroup => "count-attribute-group",
    CountObjRelImm => "count-obj-rel-imm",
    CountObjRelImm2 => "count-obj-rel-imm-2",
    CountObjRelEarly => "count-obj-rel-early",
    CountObjExcludeImm => "count-obj-exclude-imm",
    CountObjExcludeEarly => "count-obj-exclude-early",
    ExistOther => "exist-other",
    ExistAttribute => "exist-attribute",
    ExistAttributeGroup => "exist-attribute-group",
    ExistObjRelImm => "exist-obj-rel-imm",
    ExistObjRelImm2 => "exist-obj-rel-imm2",
    ExistObjRelEarly => "exist-obj-rel-early",
    ExistObjExcludeImm => "exist-obj-exclude-imm",
    ExistObjExcludeEarly => "exist-obj-exclude-early",
    SeekAttrImm => "seek-attr-imm",
    SeekAttrImm2 => "seek-attr-imm2",
    SeekAttrEarly => "seek-attr-early",
    SeekAttrSimEarly => "seek-attr-sim-early",
    SeekAttrRelImm => "seek-attr-rel-imm",
    SeekAttrRelEarly => "seek-attr-rel-early",
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Signature {
    pub function: Function,
    pub kind: Kind,
    pub category: Category,
    pub args: &'static [ArgKind],
    pub output: Output,
    pub mask: KbMask,
}

impl Signature {
    pub fn name(&self) -> &'static str {
        self.function.name()
    }
}

use ArgKind::{Attr as A, AttrList as L, AttrType as T, Pos as P};

const fn sig(
    function: Function,
    kind: Kind,
    category: Category,
    args: &'static [ArgKind],
    output: Output,
    mask: [bool; 5],
) -> Signature {
    Signature {
        function,
        kind,
        category,
        args,
        output,
        mask: KbMask::of(mask),
    }
}

const Y: bool = true;
const N: bool = false;

/// Indexed by `Function as usize`. Mask columns: fetch, handle, conv. subject,
/// seen objects, groups.
static SIGNATURES: [Signature; 32] = {
    use Category::*;
    use Function::*;
    use Kind::{Caption as Cap, Question as Q};
    [
        sig(CountAtt, Cap, Caption, &[A], Output::None, [N, Y, N, Y, Y]),
        sig(
            ExtremeRight,
            Cap,
            Caption,
            &[L],
            Output::None,
            [N, Y, Y, Y, N],
        ),
        sig(
            ExtremeLeft,
            Cap,
            Caption,
            &[L],
            Output::None,
            [N, Y, Y, Y, N],
        ),
        sig(
            ExtremeBehind,
            Cap,
            Caption,
            &[L],
            Output::None,
            [N, Y, Y, Y, N],
        ),
        sig(
            ExtremeFront,
            Cap,
            Caption,
            &[L],
            Output::None,
            [N, Y, Y, Y, N],
        ),
        sig(
            ExtremeCentre,
            Cap,
            Caption,
            &[L],
            Output::None,
            [N, Y, Y, Y, N],
        ),
        sig(UniqueObj, Cap, Caption, &[L], Output::None, [N, Y, Y, Y, N]),
        sig(
            ObjRelation,
            Cap,
            Caption,
            &[A, P, A],
            Output::None,
            [N, Y, Y, Y, N],
        ),
        sig(CountAll, Q, Count, &[], Output::Num, [N, N, N, N, Y]),
        sig(CountOther, Q, Count, &[], Output::Num, [N, N, Y, Y, N]),
        sig(CountAllGroup, Q, Count, &[], Output::Num, [N, N, N, N, N]),
        sig(CountAttribute, Q, Count, &[A], Output::Num, [N, Y, Y, Y, Y]),
        sig(
            CountAttributeGroup,
            Q,
            Count,
            &[A],
            Output::Num,
            [N, Y, Y, Y, Y],
        ),
        sig(CountObjRelImm, Q, Count, &[P], Output::Num, [N, N, Y, Y, Y]),
        sig(
            CountObjRelImm2,
            Q,
            Count,
            &[P],
            Output::Num,
            [N, N, Y, Y, Y],
        ),
        sig(
            CountObjRelEarly,
            Q,
            Count,
            &[P, A],
            Output::Num,
            [Y, Y, Y, Y, Y],
        ),
        sig(
            CountObjExcludeImm,
            Q,
            Count,
            &[T],
            Output::Num,
            [N, N, Y, Y, Y],
        ),
        sig(
            CountObjExcludeEarly,
            Q,
            Count,
            &[T, A],
            Output::Num,
            [Y, N, Y, Y, Y],
        ),
        sig(ExistOther, Q, Exist, &[], Output::YesNo, [N, N, N, Y, Y]),
        sig(
            ExistAttribute,
            Q,
            Exist,
            &[A],
            Output::YesNo,
            [N, Y, N, Y, Y],
        ),
        sig(
            ExistAttributeGroup,
            Q,
            Exist,
            &[A],
            Output::YesNo,
            [N, Y, Y, Y, Y],
        ),
        sig(
            ExistObjRelImm,
            Q,
            Exist,
            &[P],
            Output::YesNo,
            [N, N, Y, Y, Y],
        ),
        sig(
            ExistObjRelImm2,
            Q,
            Exist,
            &[P],
            Output::YesNo,
            [N, N, Y, Y, Y],
        ),
        sig(
            ExistObjRelEarly,
            Q,
            Exist,
            &[P, A],
            Output::YesNo,
            [Y, Y, Y, Y, Y],
        ),
        sig(
            ExistObjExcludeImm,
            Q,
            Exist,
            &[T],
            Output::YesNo,
            [N, N, Y, Y, Y],
        ),
        sig(
            ExistObjExcludeEarly,
            Q,
            Exist,
            &[T, A],
            Output::YesNo,
            [Y, N, N, N, Y],
        ),
        sig(SeekAttrImm, Q, Seek, &[T], Output::Attr, [N, Y, N, N, N]),
        sig(SeekAttrImm2, Q, Seek, &[T], Output::Attr, [N, Y, N, N, N]),
        sig(
            SeekAttrEarly,
            Q,
            Seek,
            &[T, A],
            Output::Attr,
            [Y, Y, Y, Y, N],
        ),
        sig(
            SeekAttrSimEarly,
            Q,
            Seek,
            &[T, A],
            Output::Attr,
            [Y, Y, Y, Y, N],
        ),
        // The table lists only attr_type; the relation needs a position.
        sig(
            SeekAttrRelImm,
            Q,
            Seek,
            &[T, P],
            Output::Attr,
            [N, Y, Y, Y, N],
        ),
        sig(
            SeekAttrRelEarly,
            Q,
            Seek,
            &[T, P, A],
            Output::Attr,
            [Y, Y, Y, Y, N],
        ),
    ]
};

impl Function {
    pub fn signature(self) -> &'static Signature {
        &SIGNATURES[self as usize]
    }

    pub fn kind(self) -> Kind {
        self.signature().kind
    }

    pub fn category(self) -> Category {
        self.signature().category
    }

    pub fn questions() -> impl Iterator<Item = Function> {
        Function::ALL
            .iter()
            .copied()
            .filter(|f| f.kind() == Kind::Question)
    }

    pub fn captions() -> impl Iterator<Item = Function> {
        Function::ALL
            .iter()
            .copied()
            .filter(|f| f.kind() == Kind::Caption)
    }

    /// How the referent of a question is resolved.
    pub fn reference(self) -> Reference {
        use Function::*;
        match self {
            CountObjRelImm | CountObjExcludeImm | ExistObjRelImm | ExistObjExcludeImm
            | SeekAttrImm | SeekAttrRelImm => Reference::Subject,
            CountObjRelImm2 | ExistObjRelImm2 | SeekAttrImm2 => Reference::PrevSubject,
            CountObjRelEarly | CountObjExcludeEarly | ExistObjRelEarly | ExistObjExcludeEarly
            | SeekAttrEarly | SeekAttrSimEarly | SeekAttrRelEarly => Reference::Fetch,
            CountOther | ExistOther | CountAllGroup | CountAttributeGroup | ExistAttributeGroup => {
                Reference::History
            }
            _ => Reference::Standalone,
        }
    }

    pub fn needs_group(self) -> bool {
        matches!(
            self,
            Function::CountAllGroup | Function::CountAttributeGroup | Function::ExistAttributeGroup
        )
    }
}

/// Referent resolution class of a question function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    /// Does not depend on the dialog history.
    Standalone,
    /// Depends on the whole history (seen set or active group).
    History,
    /// The current conversation subject.
    Subject,
    /// The subject before the last subject change.
    PrevSubject,
    /// Fetched from the knowledge base by attributes.
    Fetch,
}

impl fmt::Display for Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Function {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Function::from_name(s).ok_or(())
    }
}
