mod common;

use common::*;
use nsvd_core::dsl::{Function, Kind};
use nsvd_core::executor::Executor;
use nsvd_core::AttributeSchema;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn count_and_exist_match_brute_force(seed in any::<u64>(), n in 1usize..=6) {
        let schema = AttributeSchema::clevr();
        let scene = random_scene(&schema, 0, n, seed);
        let mut r = rng(seed ^ 0xA5A5);
        let st = random_state(&scene, &mut r);
        let ex = Executor::new(&schema);
        let mut base = build_kb(&scene, &st);
        base.advance_round();
        for p in count_exist_programs(&schema) {
            let mut kb = base.clone();
            let got = ex.execute_question(&mut kb, &p).ok().map(|a| a.render(&schema));
            let want = oracle_answer(&scene, &schema, &st, &p);
            prop_assert_eq!(got, want, "{}", p);
        }
    }

    #[test]
    fn masks_bound_every_mutation(seed in any::<u64>(), n in 1usize..=8) {
        let schema = AttributeSchema::clevr();
        let scene = random_scene(&schema, 0, n, seed);
        let mut r = rng(seed);
        let ex = Executor::new(&schema);
        let mut kb = build_kb(&scene, &random_state(&scene, &mut r));
        for _ in 0..20 {
            let f = *rand::seq::IndexedRandom::choose(Function::ALL, &mut r).unwrap();
            if f.kind() == Kind::Caption {
                continue;
            }
            let p = random_program(f, &schema, &mut r);
            kb.advance_round();
            let before = snapshot(&kb);
            let ok = ex.execute_question(&mut kb, &p).is_ok();
            let after = snapshot(&kb);
            if !ok {
                prop_assert_eq!(&before, &after);
            }
            prop_assert!(mask_violations(&before, &after, &f.signature().mask).is_empty(), "{}", p);
        }
    }
}
