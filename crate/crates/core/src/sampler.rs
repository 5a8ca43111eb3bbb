//! Seeded random roster generation for robustness sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adversary::{
    MirrorTargets, PairSpec, PartialFn, Roster, SetSpec, StageElems, TableEntry, TrackingRule,
};
use crate::trace::ConstructionConfig;
use crate::tree::Regime;

fn random_fn(rng: &mut ChaCha8Rng, binary: bool) -> PartialFn {
    match rng.gen_range(0..4) {
        0 => PartialFn::Affine {
            add: rng.gen_range(0..4),
        },
        1 => PartialFn::ConstZero {
            max_arg: rng.gen_range(5..80),
        },
        2 => PartialFn::Divergent,
        _ => {
            let n = rng.gen_range(1..5);
            let entries = (0..n)
                .map(|_| {
                    let x = rng.gen_range(0..40u64);
                    let args = if binary {
                        vec![x, rng.gen_range(1..60u64)]
                    } else {
                        vec![x]
                    };
                    TableEntry {
                        args,
                        value: if binary { rng.gen_range(0..60) } else { 0 },
                        conv: rng.gen_range(1..40),
                    }
                })
                .collect();
            PartialFn::Table { entries }
        }
    }
}

fn random_set(rng: &mut ChaCha8Rng) -> SetSpec {
    match rng.gen_range(0..3) {
        0 => SetSpec::Empty,
        1 => SetSpec::Mirror {
            targets: MirrorTargets::All("all-q".into()),
        },
        _ => {
            let n = rng.gen_range(1..4);
            let mut taken = std::collections::BTreeSet::new();
            let entries = (0..n)
                .map(|_| StageElems {
                    stage: rng.gen_range(1..50),
                    elements: (0..rng.gen_range(1..4))
                        .map(|_| rng.gen_range(0..60u64))
                        .filter(|x| taken.insert(*x))
                        .collect(),
                })
                .collect();
            SetSpec::Scripted { entries }
        }
    }
}

/// Deterministic roster + config from a seed. Scripted pair sides keep evens
/// on one side and odds on the other so the roster always validates.
pub fn sample(seed: u64) -> (ConstructionConfig, Roster) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let regime = match seed % 3 {
        0 => Regime::OneSplit,
        1 => Regime::TwoSplit,
        _ => Regime::General {
            splits: rng.gen_range(2..5),
        },
    };
    let horizon = rng.gen_range(20..90);
    let pair_count = match regime {
        Regime::OneSplit => 1,
        Regime::TwoSplit => 2,
        Regime::General { splits } => splits,
    };
    let h: Vec<PartialFn> = (0..rng.gen_range(1..4))
        .map(|_| random_fn(&mut rng, true))
        .collect();
    let delta: Vec<PartialFn> = (0..rng.gen_range(1..4))
        .map(|_| random_fn(&mut rng, false))
        .collect();
    let v: Vec<SetSpec> = (0..rng.gen_range(0..3))
        .map(|_| random_set(&mut rng))
        .collect();
    let pair: Vec<PairSpec> = (0..pair_count)
        .map(|_| {
            let tracking = match rng.gen_range(0..4) {
                0 => Some(TrackingRule::AllToX),
                1 => Some(TrackingRule::RoundRobin),
                2 => Some(TrackingRule::Threshold {
                    threshold: rng.gen_range(5..40),
                }),
                _ => None,
            };
            let scripted = rng.gen_bool(0.3);
            let (x_entries, y_entries) = if scripted {
                let mut evens: Vec<u64> = (0..rng.gen_range(1..4))
                    .map(|_| rng.gen_range(0..30u64) * 2)
                    .collect();
                evens.sort_unstable();
                evens.dedup();
                let mut odds: Vec<u64> = (0..rng.gen_range(1..4))
                    .map(|_| rng.gen_range(0..30u64) * 2 + 1)
                    .collect();
                odds.sort_unstable();
                odds.dedup();
                let xs = StageElems {
                    stage: rng.gen_range(1..30),
                    elements: evens,
                };
                let ys = StageElems {
                    stage: rng.gen_range(1..30),
                    elements: odds,
                };
                (vec![xs], vec![ys])
            } else {
                (vec![], vec![])
            };
            PairSpec {
                tracking,
                x_entries,
                y_entries,
            }
        })
        .collect();
    let cfg = ConstructionConfig {
        regime,
        horizon,
        seed,
    };
    (cfg, Roster { h, delta, v, pair })
}
