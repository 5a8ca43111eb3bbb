//! Scripted adversary objects: enumerated sets, partial functions, split
//! pairs, and the reactive variants (tracking pairs, mirror sets).
//!
//! A roster is immutable input; the runtime copies (`RtSet`) accumulate the
//! entries produced by reactive rules during a run.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::tree::Path;

/// Stage-indexed enumeration entries: all `elements` appear at `stage`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageElems {
    pub stage: u32,
    pub elements: Vec<u64>,
}

/// A table row of a scripted partial function.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    pub args: Vec<u64>,
    pub value: u64,
    /// Stage at which this value becomes visible.
    pub conv: u32,
}

/// Scripted partial function. `eval` returns `Some` only once the entry has
/// converged by the queried stage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PartialFn {
    /// f(x, s) = s + add, converged from the start.
    Affine { add: u64 },
    /// f(x) = 0 for x <= max_arg, divergent beyond.
    ConstZero { max_arg: u64 },
    /// Divergent everywhere.
    Divergent,
    /// Explicit finite table.
    Table { entries: Vec<TableEntry> },
}

impl PartialFn {
    pub fn eval(&self, args: &[u64], stage: u32) -> Option<u64> {
        match self {
            PartialFn::Affine { add } => args.get(1).map(|s| s + add),
            PartialFn::ConstZero { max_arg } => {
                if args.first().is_some_and(|x| x <= max_arg) {
                    Some(0)
                } else {
                    None
                }
            }
            PartialFn::Divergent => None,
            PartialFn::Table { entries } => entries
                .iter()
                .find(|e| e.args == args && e.conv <= stage)
                .map(|e| e.value),
        }
    }

    /// Largest value of f(x, t) over converged t <= s (used by delay bounds).
    pub fn max_over_second_arg(&self, x: u64, s: u32, stage: u32) -> Option<u64> {
        match self {
            PartialFn::Affine { add } => Some(s as u64 + add),
            PartialFn::ConstZero { max_arg } => (x <= *max_arg).then_some(0),
            PartialFn::Divergent => None,
            PartialFn::Table { entries } => entries
                .iter()
                .filter(|e| {
                    e.args.len() == 2
                        && e.args[0] == x
                        && e.args[1] <= s as u64
                        && e.conv <= stage
                })
                .map(|e| e.value)
                .max(),
        }
    }
}

/// Which constructed-set events a mirror feeds on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MirrorTargets {
    /// "all-q": every element entering any waiting queue.
    All(String),
    /// Specific tree paths (rendered outcome strings).
    Paths(Vec<String>),
}

impl MirrorTargets {
    pub fn matches(&self, q: &Path) -> Result<bool, ModelError> {
        match self {
            MirrorTargets::All(s) => {
                if s == "all-q" {
                    Ok(true)
                } else {
                    Err(ModelError::Roster(format!("unknown mirror target `{s}`")))
                }
            }
            MirrorTargets::Paths(ps) => {
                let r = q.render();
                Ok(ps.contains(&r))
            }
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            MirrorTargets::All(s) if s != "all-q" => {
                Err(ModelError::Roster(format!("unknown mirror target `{s}`")))
            }
            MirrorTargets::Paths(ps) => {
                for p in ps {
                    Path::parse(p)?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Scripted or reactive enumerated set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SetSpec {
    Empty,
    Scripted { entries: Vec<StageElems> },
    /// Receives every element entering a waiting queue of a matching node,
    /// at the same stage.
    Mirror { targets: MirrorTargets },
}

/// Side-assignment rule for a tracking split pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TrackingRule {
    AllToX,
    RoundRobin,
    /// Values below the threshold go to the X side, the rest to Y.
    Threshold { threshold: u64 },
}

/// A split-pair candidate: either fully scripted sides or a tracking rule
/// that assigns each constructed-set entrant to a side one stage later.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    #[serde(default)]
    pub tracking: Option<TrackingRule>,
    #[serde(default)]
    pub x_entries: Vec<StageElems>,
    #[serde(default)]
    pub y_entries: Vec<StageElems>,
}

/// Full adversary roster for one run. Position in each list is the
/// requirement index.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Roster {
    /// Delay bounds h_j, binary (x, s).
    #[serde(default)]
    pub h: Vec<PartialFn>,
    /// Candidate reductions, unary.
    #[serde(default)]
    pub delta: Vec<PartialFn>,
    /// Test sets V_v.
    #[serde(default)]
    pub v: Vec<SetSpec>,
    /// Split pairs (X_i, Y_i).
    #[serde(default)]
    pub pair: Vec<PairSpec>,
}

impl Roster {
    pub fn parse(text: &str) -> Result<Roster, ModelError> {
        let r: Roster = toml::from_str(text)?;
        r.validate()?;
        Ok(r)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("roster serializes")
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (vi, set) in self.v.iter().enumerate() {
            if let SetSpec::Mirror { targets } = set {
                targets
                    .validate()
                    .map_err(|e| ModelError::Roster(format!("v[{vi}]: {e}")))?;
            }
        }
        for (pi, pair) in self.pair.iter().enumerate() {
            let xs = flatten(&pair.x_entries);
            let ys = flatten(&pair.y_entries);
            for x in xs.keys() {
                if ys.contains_key(x) {
                    return Err(ModelError::Roster(format!(
                        "pair[{pi}]: element {x} scripted on both sides"
                    )));
                }
            }
            for entries in [&pair.x_entries, &pair.y_entries] {
                check_no_dup(entries)
                    .map_err(|e| ModelError::Roster(format!("pair[{pi}]: {e}")))?;
            }
        }
        for (vi, set) in self.v.iter().enumerate() {
            if let SetSpec::Scripted { entries } = set {
                check_no_dup(entries).map_err(|e| ModelError::Roster(format!("v[{vi}]: {e}")))?;
            }
        }
        Ok(())
    }

    pub fn h_eval(&self, j: usize, x: u64, s: u64, stage: u32) -> Option<u64> {
        self.h.get(j).and_then(|f| f.eval(&[x, s], stage))
    }

    pub fn delta_eval(&self, i: usize, x: u64, stage: u32) -> Option<u64> {
        self.delta.get(i).and_then(|f| f.eval(&[x], stage))
    }
}

fn flatten(entries: &[StageElems]) -> BTreeMap<u64, u32> {
    let mut m = BTreeMap::new();
    for se in entries {
        for &x in &se.elements {
            m.entry(x).or_insert(se.stage);
        }
    }
    m
}

fn check_no_dup(entries: &[StageElems]) -> Result<(), String> {
    let mut seen = BTreeMap::new();
    for se in entries {
        for &x in &se.elements {
            if let Some(prev) = seen.insert(x, se.stage) {
                if prev != se.stage {
                    return Err(format!("element {x} enumerated at two stages"));
                }
            }
        }
    }
    Ok(())
}

/// Runtime view of an enumerated set: scripted entries preloaded, reactive
/// entries appended during the run. Monotone; an element has one entry stage.
#[derive(Clone, Debug, Default)]
pub struct RtSet {
    entries: BTreeMap<u64, u32>,
}

impl RtSet {
    pub fn from_schedule(entries: &[StageElems]) -> RtSet {
        RtSet {
            entries: flatten(entries),
        }
    }

    pub fn from_spec(spec: &SetSpec) -> RtSet {
        match spec {
            SetSpec::Scripted { entries } => RtSet::from_schedule(entries),
            _ => RtSet::default(),
        }
    }

    /// Insert returning true if this is a new entry.
    pub fn insert(&mut self, x: u64, stage: u32) -> bool {
        if let std::collections::btree_map::Entry::Vacant(e) = self.entries.entry(x) {
            e.insert(stage);
            true
        } else {
            false
        }
    }

    pub fn entry_stage(&self, x: u64) -> Option<u32> {
        self.entries.get(&x).copied()
    }

    pub fn contains_at(&self, x: u64, stage: u32) -> bool {
        self.entry_stage(x).is_some_and(|t| t <= stage)
    }

    pub fn iter_at(&self, stage: u32) -> impl Iterator<Item = u64> + '_ {
        self.entries
            .iter()
            .filter(move |(_, t)| **t <= stage)
            .map(|(x, _)| *x)
    }

    pub fn iter_all(&self) -> impl Iterator<Item = (u64, u32)> + '_ {
        self.entries.iter().map(|(x, t)| (*x, *t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_fn_eval() {
        assert_eq!(PartialFn::Affine { add: 2 }.eval(&[9, 5], 1), Some(7));
        assert_eq!(PartialFn::ConstZero { max_arg: 3 }.eval(&[3], 1), Some(0));
        assert_eq!(PartialFn::ConstZero { max_arg: 3 }.eval(&[4], 1), None);
        assert_eq!(PartialFn::Divergent.eval(&[0], 99), None);
    }

    #[test]
    fn table_gates_on_convergence_stage() {
        let f = PartialFn::Table {
            entries: vec![TableEntry {
                args: vec![5],
                value: 0,
                conv: 6,
            }],
        };
        assert_eq!(f.eval(&[5], 5), None);
        assert_eq!(f.eval(&[5], 6), Some(0));
        assert_eq!(f.eval(&[6], 10), None);
    }

    #[test]
    fn max_over_second_arg_respects_bounds() {
        let f = PartialFn::Table {
            entries: vec![
                TableEntry { args: vec![1, 2], value: 10, conv: 1 },
                TableEntry { args: vec![1, 5], value: 30, conv: 1 },
                TableEntry { args: vec![2, 2], value: 99, conv: 1 },
            ],
        };
        assert_eq!(f.max_over_second_arg(1, 3, 9), Some(10));
        assert_eq!(f.max_over_second_arg(1, 9, 9), Some(30));
        assert_eq!(f.max_over_second_arg(3, 9, 9), None);
    }

    #[test]
    fn roster_rejects_overlapping_pair_sides() {
        let text = r#"
[[h]]
kind = "affine"
add = 0

[[delta]]
kind = "const-zero"
max_arg = 10

[[pair]]
x_entries = [{ stage = 1, elements = [4] }]
y_entries = [{ stage = 2, elements = [4] }]
"#;
        let err = Roster::parse(text).unwrap_err();
        assert!(err.to_string().contains("both sides"), "{err}");
    }

    #[test]
    fn rt_set_entry_stages() {
        let mut s = RtSet::from_schedule(&[StageElems {
            stage: 3,
            elements: vec![7],
        }]);
        assert!(!s.contains_at(7, 2));
        assert!(s.contains_at(7, 3));
        assert!(s.insert(9, 5));
        assert!(!s.insert(9, 6));
        assert_eq!(s.entry_stage(9), Some(5));
    }
}
