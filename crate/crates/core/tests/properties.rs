//! Property tests for the pure structural layers: paths, side vectors,
//! repetition lists, tree assignment, timed sets, and roster round-trips.

use proptest::prelude::*;

use splitsim_core::adversary::{RtSet, SetSpec, StageElems};
use splitsim_core::sampler;
use splitsim_core::tree::{
    higher_priority, left_of, parse_g, render_g, switch_g, update_lists, Outcome, Path, Regime,
    Requirement, Side, TreeBuilder,
};
use splitsim_core::Roster;

const OUTCOMES: [Outcome; 10] = [
    Outcome::Inf,
    Outcome::C,
    Outcome::H,
    Outcome::Split,
    Outcome::Fin,
    Outcome::K,
    Outcome::S,
    Outcome::A,
    Outcome::D,
    Outcome::Blank,
];

fn arb_outcome() -> impl Strategy<Value = Outcome> {
    (0usize..OUTCOMES.len()).prop_map(|i| OUTCOMES[i])
}

fn arb_path() -> impl Strategy<Value = Path> {
    prop::collection::vec(arb_outcome(), 0..8).prop_map(Path)
}

fn arb_regime() -> impl Strategy<Value = Regime> {
    prop_oneof![
        Just(Regime::OneSplit),
        Just(Regime::TwoSplit),
        (2usize..6).prop_map(|splits| Regime::General { splits }),
    ]
}

/// Walk the tree from the root taking the successor selected by each index,
/// so the resulting path is always one the builder itself offers.
fn valid_path(builder: &TreeBuilder, picks: &[usize]) -> Path {
    let mut path = Path::root();
    for &i in picks {
        let node = builder.assign(&path);
        let succ = node.successors[i % node.successors.len()];
        path.0.push(succ);
    }
    path
}

proptest! {
    #[test]
    fn path_render_parse_roundtrip(p in arb_path()) {
        let rendered = p.render();
        prop_assert_eq!(Path::parse(&rendered).unwrap(), p);
    }

    #[test]
    fn left_of_is_irreflexive_and_asymmetric(a in arb_path(), b in arb_path()) {
        prop_assert!(!left_of(&a, &a));
        if left_of(&a, &b) {
            prop_assert!(!left_of(&b, &a));
            prop_assert!(higher_priority(&a, &b));
        }
    }

    #[test]
    fn prefix_has_higher_priority(p in arb_path(), ext in arb_outcome()) {
        let mut longer = p.clone();
        longer.0.push(ext);
        prop_assert!(higher_priority(&p, &longer));
        prop_assert!(!higher_priority(&longer, &p));
    }

    #[test]
    fn switch_g_roundtrip_and_progress(g in prop::collection::vec(
        prop_oneof![Just(Side::X), Just(Side::Y)], 0..6)) {
        let rendered = render_g(&g);
        prop_assert_eq!(parse_g(&rendered).unwrap(), g.clone());

        let next = switch_g(&g);
        prop_assert_eq!(next.len(), g.len());
        if g.contains(&Side::X) {
            prop_assert_ne!(&next, &g);
        } else {
            // all-Y is the fixpoint
            prop_assert_eq!(&next, &g);
        }
    }

    #[test]
    fn switch_g_terminates_within_bound(g in prop::collection::vec(
        prop_oneof![Just(Side::X), Just(Side::Y)], 0..6)) {
        // Each switch strictly decreases the vector read as a binary number
        // with X=1, so at most 2^n steps reach the all-Y fixpoint.
        let mut cur = g.clone();
        let mut steps = 0usize;
        while cur.contains(&Side::X) {
            cur = switch_g(&cur);
            steps += 1;
            prop_assert!(steps <= (1usize << g.len()));
        }
        prop_assert_eq!(switch_g(&cur), cur);
    }

    #[test]
    fn assignment_total_on_reachable_paths(
        regime in arb_regime(),
        v_count in 0usize..4,
        picks in prop::collection::vec(0usize..8, 0..12),
    ) {
        let builder = TreeBuilder::new(regime, v_count);
        let path = valid_path(&builder, &picks);
        let node = builder.assign(&path);
        prop_assert!(!node.successors.is_empty());
        // Memoization must be stable.
        let again = builder.assign(&path);
        prop_assert_eq!(&node.req, &again.req);
        prop_assert_eq!(&node.g, &again.g);
    }

    #[test]
    fn q_c_edge_resets_lists(
        l1 in prop::collection::vec((0usize..5).prop_map(|h| Requirement::Q { h }), 0..4),
        l2 in prop::collection::vec((0usize..5).prop_map(|h| Requirement::Q { h }), 0..4),
        h in 0usize..5,
    ) {
        let (n1, n2) = update_lists(&l1, &l2, Requirement::Q { h }, Outcome::C);
        prop_assert!(n1.is_empty());
        prop_assert_eq!(n2, l1);
    }

    #[test]
    fn s_pred_moves_between_lists(i in 0usize..4, v in 0usize..3) {
        let pred = Requirement::SChild { i, v };
        let l1 = vec![Requirement::Q { h: 0 }];
        let l2 = vec![pred, Requirement::Q { h: 1 }];
        let (n1, n2) = update_lists(&l1, &l2, pred, Outcome::Split);
        prop_assert_eq!(n1.last(), Some(&pred));
        prop_assert!(!n2.contains(&pred));
        let kept = Requirement::Q { h: 1 };
        prop_assert!(n2.contains(&kept));
    }

    #[test]
    fn rtset_entry_stage_is_first_insert(
        x in 0u64..100,
        s1 in 1u32..50,
        s2 in 1u32..50,
    ) {
        let mut set = RtSet::from_spec(&SetSpec::Empty);
        prop_assert!(set.insert(x, s1.min(s2)));
        prop_assert!(!set.insert(x, s1.max(s2)));
        prop_assert_eq!(set.entry_stage(x), Some(s1.min(s2)));
        // Membership is monotone in the stage.
        prop_assert!(!set.contains_at(x, s1.min(s2) - 1));
        prop_assert!(set.contains_at(x, s1.max(s2)));
    }

    #[test]
    fn scripted_set_honors_schedule(stage in 2u32..40, x in 0u64..50) {
        let spec = SetSpec::Scripted {
            entries: vec![StageElems { stage, elements: vec![x] }],
        };
        let set = RtSet::from_spec(&spec);
        prop_assert!(!set.contains_at(x, stage - 1));
        prop_assert!(set.contains_at(x, stage));
        prop_assert_eq!(set.entry_stage(x), Some(stage));
    }

    #[test]
    fn sampled_roster_toml_roundtrip(seed in 0u64..500) {
        let (_, roster) = sampler::sample(seed);
        roster.validate().unwrap();
        let text = roster.to_toml();
        let back = Roster::parse(&text).unwrap();
        prop_assert_eq!(back, roster);
    }
}
