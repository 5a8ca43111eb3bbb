//! Canned adversary scenarios with known finite-horizon behaviour.

use crate::adversary::{MirrorTargets, PairSpec, PartialFn, Roster, SetSpec, TrackingRule};
use crate::trace::ConstructionConfig;
use crate::tree::{Path, Regime};

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: &'static str,
    pub summary: &'static str,
    pub cfg: ConstructionConfig,
    pub roster: Roster,
    /// Designated node the scenario's checks focus on.
    pub focus: Path,
    /// Whether the focus node's set equation is expected to be exact.
    pub check_equation: bool,
}

fn cfg(regime: Regime, horizon: u32) -> ConstructionConfig {
    ConstructionConfig {
        regime,
        horizon,
        seed: 0,
    }
}

/// Single-pair regime, everything converges fast: the root keeps harvesting
/// overdue waiters, so the slow route fires on a fixed cadence.
pub fn a1() -> Scenario {
    Scenario {
        name: "a1",
        summary: "single-pair cadence; root harvests on a period-4 schedule",
        cfg: cfg(Regime::OneSplit, 50),
        roster: Roster {
            h: vec![PartialFn::Affine { add: 0 }],
            delta: vec![PartialFn::ConstZero { max_arg: u64::MAX }],
            v: vec![],
            pair: vec![PairSpec {
                tracking: Some(TrackingRule::AllToX),
                x_entries: vec![],
                y_entries: vec![],
            }],
        },
        focus: Path::root(),
        check_equation: true,
    }
}

/// Two-pair regime with a scripted diagonalizer: after two root harvests the
/// adversary goes quiet, a committed strategy on the discarded branch pulls
/// the designated node's single waiter, and that node settles on c.
pub fn a2() -> Scenario {
    Scenario {
        name: "a2",
        summary: "designated node settles on c with an exact set equation",
        cfg: cfg(Regime::TwoSplit, 100),
        roster: Roster {
            h: vec![PartialFn::Affine { add: 0 }, PartialFn::Affine { add: 0 }],
            delta: vec![
                PartialFn::Table {
                    entries: vec![
                        crate::adversary::TableEntry {
                            args: vec![0],
                            value: 0,
                            conv: 1,
                        },
                        crate::adversary::TableEntry {
                            args: vec![5],
                            value: 0,
                            conv: 6,
                        },
                    ],
                },
                PartialFn::ConstZero { max_arg: 40 },
            ],
            v: vec![SetSpec::Mirror {
                targets: MirrorTargets::Paths(vec!["h.d.blank".into()]),
            }],
            pair: vec![
                PairSpec {
                    tracking: Some(TrackingRule::AllToX),
                    x_entries: vec![],
                    y_entries: vec![],
                },
                PairSpec {
                    tracking: Some(TrackingRule::AllToX),
                    x_entries: vec![],
                    y_entries: vec![],
                },
            ],
        },
        focus: Path::parse("h.d.blank").unwrap(),
        check_equation: true,
    }
}

/// Two-pair regime, mirror on every waiting queue: pulls land early at each
/// level, driving a cascade of c outcomes and the full side-vector ladder.
pub fn fig2() -> Scenario {
    Scenario {
        name: "fig2",
        summary: "c-cascade exhausting the two-slot side-vector ladder",
        cfg: cfg(Regime::TwoSplit, 60),
        roster: Roster {
            h: vec![PartialFn::Affine { add: 0 }],
            delta: vec![PartialFn::ConstZero { max_arg: u64::MAX }],
            v: vec![SetSpec::Mirror {
                targets: MirrorTargets::All("all-q".into()),
            }],
            pair: vec![
                PairSpec {
                    tracking: Some(TrackingRule::AllToX),
                    x_entries: vec![],
                    y_entries: vec![],
                },
                PairSpec {
                    tracking: Some(TrackingRule::AllToX),
                    x_entries: vec![],
                    y_entries: vec![],
                },
            ],
        },
        focus: Path::root(),
        check_equation: false,
    }
}

/// General regime with three pairs and delayed pulls: committed emissions
/// wait out the adversary's bounds but still land early enough for c.
pub fn gen3() -> Scenario {
    Scenario {
        name: "gen3",
        summary: "three-pair regime; delayed pulls still sustain the cascade",
        cfg: cfg(Regime::General { splits: 3 }, 80),
        roster: Roster {
            h: vec![PartialFn::Affine { add: 0 }],
            delta: vec![PartialFn::ConstZero { max_arg: u64::MAX }],
            v: vec![SetSpec::Mirror {
                targets: MirrorTargets::All("all-q".into()),
            }],
            pair: vec![
                PairSpec {
                    tracking: Some(TrackingRule::AllToX),
                    x_entries: vec![],
                    y_entries: vec![],
                },
                PairSpec {
                    tracking: Some(TrackingRule::AllToX),
                    x_entries: vec![],
                    y_entries: vec![],
                },
                PairSpec {
                    tracking: Some(TrackingRule::AllToX),
                    x_entries: vec![],
                    y_entries: vec![],
                },
            ],
        },
        focus: Path::root(),
        check_equation: false,
    }
}

pub fn all() -> Vec<Scenario> {
    vec![a1(), a2(), fig2(), gen3()]
}

pub fn by_name(name: &str) -> Option<Scenario> {
    all().into_iter().find(|s| s.name == name)
}
