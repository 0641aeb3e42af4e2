mod common;

use common::*;
use nsvd_core::dsl::{Function, Reference};
use nsvd_core::templates::{tokenize, TemplateError, TemplateSet};
use nsvd_core::AttributeSchema;
use proptest::prelude::*;

fn any_function() -> impl Strategy<Value = Function> {
    (0..Function::ALL.len()).prop_map(|i| Function::ALL[i])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn render_then_parse_is_identity(f in any_function(), variant in 0usize..2, seed in any::<u64>()) {
        let schema = AttributeSchema::clevr();
        let t = TemplateSet::default_for(&schema);
        let p = random_program(f, &schema, &mut rng(seed)).canonical(&schema);
        let text = t.render(&p, variant % t.variants(f)).unwrap();
        prop_assert_eq!(t.parse_all(&text, f.kind()), vec![p.clone()], "{}", text);
    }

    #[test]
    fn rendered_text_has_no_program_syntax(f in any_function(), variant in 0usize..2, seed in any::<u64>()) {
        let schema = AttributeSchema::clevr();
        let t = TemplateSet::default_for(&schema);
        let p = random_program(f, &schema, &mut rng(seed));
        let text = t.render(&p, variant % t.variants(f)).unwrap();
        prop_assert!(!text.contains(['(', ')', '{', '}', '_']), "{}", text);
        for d in 0..schema.num_dimensions() {
            prop_assert!(!text.contains(schema.file_key(d)) || schema.file_key(d) == schema.dimension_name(d));
        }
        for g in Function::ALL {
            prop_assert!(!text.contains(g.name()), "{}", text);
        }
    }

    #[test]
    fn pronouns_only_in_immediate_references(f in any_function(), variant in 0usize..2, seed in any::<u64>()) {
        let schema = AttributeSchema::clevr();
        let t = TemplateSet::default_for(&schema);
        let p = random_program(f, &schema, &mut rng(seed));
        let text = t.render(&p, variant % t.variants(f)).unwrap();
        let pronoun = tokenize(&text).iter().any(|w| w == "it" || w == "its");
        if pronoun {
            prop_assert!(matches!(f.reference(), Reference::Subject | Reference::PrevSubject), "{}", text);
        }
    }
}

#[test]
fn out_of_grammar_reports_closest_forms() {
    let schema = AttributeSchema::clevr();
    let t = TemplateSet::default_for(&schema);
    match t.parse_nl(
        "What colour might the thing be?",
        nsvd_core::dsl::Kind::Question,
    ) {
        Err(TemplateError::NoTemplateMatch { closest, .. }) => assert!(!closest.is_empty()),
        other => panic!("unexpected {other:?}"),
    }
}
