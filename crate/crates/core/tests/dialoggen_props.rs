mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use nsvd_core::dialoggen::{
    generate_dataset, generate_dialog_with_state, read_dataset, replay_dialog, verify_replay,
    write_dataset, Coref, Dataset, GenConfig,
};
use nsvd_core::dsl::{Category, Function, Reference};
use nsvd_core::templates::TemplateSet;
use nsvd_core::{AttributeSchema, Scene};
use proptest::prelude::*;

fn scenes(schema: &AttributeSchema, n: usize, objects: usize, seed: u64) -> Vec<Scene> {
    (0..n)
        .map(|i| random_scene(schema, i as u64, objects, seed + i as u64))
        .collect()
}

#[test]
fn replay_reaches_the_generator_state() {
    let schema = AttributeSchema::clevr();
    let t = TemplateSet::default_for(&schema);
    let sc = scenes(&schema, 100, 6, 7);
    for (i, s) in sc.iter().enumerate() {
        let (d, kb) =
            generate_dialog_with_state(s, &t, &GenConfig::new(10), 1000 + i as u64).unwrap();
        let replayed = replay_dialog(&d, s, &schema).unwrap();
        assert_eq!(snapshot(&kb), snapshot(&replayed));
        assert_eq!(kb.round(), 10);
    }
}

#[test]
fn dataset_file_round_trip() {
    let schema = AttributeSchema::clevr();
    let t = TemplateSet::default_for(&schema);
    let sc = scenes(&schema, 10, 5, 3);
    let dialogs = generate_dataset(&sc, &t, &GenConfig::new(8), 2, 11).unwrap();
    let ds = Dataset::new(schema.clone(), dialogs);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.json");
    write_dataset(&path, &ds).unwrap();
    let back = read_dataset(&path).unwrap();
    assert_eq!(back.dialogs, ds.dialogs);
    assert_eq!(verify_replay(&back, &sc, 1.0, 0).unwrap(), 20);
}

#[test]
fn generation_is_deterministic() {
    let schema = AttributeSchema::clevr();
    let t = TemplateSet::default_for(&schema);
    let sc = scenes(&schema, 20, 7, 5);
    let a = generate_dataset(&sc, &t, &GenConfig::new(10), 3, 42).unwrap();
    let b = generate_dataset(&sc, &t, &GenConfig::new(10), 3, 42).unwrap();
    let c = generate_dataset(&sc, &t, &GenConfig::new(10), 3, 43).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn distribution_covers_every_function_and_round() {
    let schema = AttributeSchema::clevr();
    let t = TemplateSet::default_for(&schema);
    let sc: Vec<Scene> = (0..200)
        .map(|i| random_scene(&schema, i, 3 + (i as usize % 8), 900 + i))
        .collect();
    let dialogs = generate_dataset(&sc, &t, &GenConfig::new(10), 5, 1).unwrap();
    assert_eq!(dialogs.len(), 1000);
    let mut per_fn: BTreeMap<Function, usize> = BTreeMap::new();
    let mut per_round: Vec<BTreeSet<Category>> = vec![BTreeSet::new(); 10];
    for d in &dialogs {
        for (i, r) in d.rounds.iter().enumerate() {
            *per_fn.entry(r.program.function).or_default() += 1;
            per_round[i].insert(r.category());
        }
    }
    for f in Function::questions() {
        assert!(
            per_fn.get(&f).copied().unwrap_or(0) > 0,
            "{} never generated",
            f.name()
        );
    }
    for (i, cats) in per_round.iter().enumerate() {
        assert_eq!(cats.len(), 3, "round {}", i + 1);
    }
    let total: usize = per_fn.values().sum();
    let max = *per_fn.values().max().unwrap();
    assert!(max * 4 < total, "one function dominates: {max} of {total}");
}

#[test]
fn restricted_function_subset_is_respected() {
    let schema = AttributeSchema::clevr();
    let t = TemplateSet::default_for(&schema);
    let allowed = [
        Function::UniqueObj,
        Function::CountAll,
        Function::SeekAttrImm,
        Function::ExistAttribute,
    ];
    let cfg = GenConfig::new(10).with_functions(allowed);
    let sc = scenes(&schema, 10, 6, 2);
    for d in generate_dataset(&sc, &t, &cfg, 2, 9).unwrap() {
        assert!(allowed.contains(&d.caption_program.function));
        for r in &d.rounds {
            assert!(allowed.contains(&r.program.function), "{}", r.program);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn coref_labels_are_consistent(seed in any::<u64>(), n in 3usize..=10, rounds in 1usize..=15) {
        let schema = AttributeSchema::clevr();
        let t = TemplateSet::default_for(&schema);
        let s = random_scene(&schema, 0, n, seed);
        let (d, _) = generate_dialog_with_state(&s, &t, &GenConfig::new(rounds), seed).unwrap();
        prop_assert_eq!(d.rounds.len(), rounds);
        for (i, r) in d.rounds.iter().enumerate() {
            match (r.program.function.reference(), r.coref) {
                (Reference::Standalone, Coref::None) | (Reference::History, Coref::All) => {}
                (Reference::Subject | Reference::PrevSubject | Reference::Fetch, Coref::Distance(k)) => {
                    prop_assert!(k >= 1 && k <= i + 1, "round {} coref {}", i + 1, k);
                }
                (rf, c) => prop_assert!(false, "{:?} labelled {}", rf, c),
            }
            prop_assert_eq!(&r.question_type, r.program.function.name());
            prop_assert_eq!(t.parse_nl(&r.question, r.program.function.kind()).unwrap(), r.program.clone());
        }
    }
}
