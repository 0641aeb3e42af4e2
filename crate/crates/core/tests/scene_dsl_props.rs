mod common;

use common::*;
use nsvd_core::dsl::{parse_program, Function};
use nsvd_core::scene::{parse_scenes, scenes_to_json, Position};
use nsvd_core::AttributeSchema;
use proptest::prelude::*;

proptest! {
    #[test]
    fn program_text_round_trips(i in 0usize..32, seed in any::<u64>()) {
        let schema = AttributeSchema::clevr();
        let f = Function::ALL[i];
        let p = random_program(f, &schema, &mut rng(seed)).canonical(&schema);
        let text = p.to_string();
        prop_assert_eq!(parse_program(&text, &schema).unwrap(), p);
        let spaced = text.replace(',', " , ").replace('(', " ( ");
        prop_assert_eq!(parse_program(&spaced, &schema).unwrap().to_string(), text);
    }

    #[test]
    fn scene_json_round_trips(seed in any::<u64>(), n in 1usize..=20) {
        let schema = AttributeSchema::clevr();
        let scenes: Vec<_> = (0..3).map(|k| random_scene(&schema, k, n, seed.wrapping_add(k))).collect();
        let back = parse_scenes(&scenes_to_json(&scenes, &schema), &schema).unwrap();
        prop_assert_eq!(back, scenes);
    }

    #[test]
    fn relations_match_coordinates(seed in any::<u64>(), n in 2usize..=10) {
        let schema = AttributeSchema::clevr();
        let s = random_scene(&schema, 0, n, seed);
        for a in 0..n {
            for b in 0..n {
                for pos in Position::ALL {
                    let got = s.relates(a, b, pos).unwrap();
                    prop_assert_eq!(got, oracle_relates(&s, a, b, pos));
                    if got {
                        prop_assert!(s.relates(b, a, pos.opposite()).unwrap());
                        prop_assert!(!s.relates(b, a, pos).unwrap());
                    }
                }
            }
        }
    }
}

#[test]
fn malformed_programs_are_rejected() {
    let schema = AttributeSchema::clevr();
    for bad in [
        "",
        "count-all(",
        "count-everything()",
        "seek-attr-imm(red)",
        "count-attribute(red, blue)",
        "extreme-right()",
        "seek-attr-early(colour)",
    ] {
        assert!(parse_program(bad, &schema).is_err(), "{bad}");
    }
}
