//! Driving a construction to a horizon and summarizing the visit pattern.

use std::collections::BTreeMap;

use crate::adversary::Roster;
use crate::engine::Construction;
use crate::trace::{ConstructionConfig, Event, Trace};
use crate::tree::{left_of, Path};

/// Run the whole construction and return its trace.
pub fn run_construction(cfg: ConstructionConfig, roster: Roster) -> Trace {
    Construction::new(cfg, roster).run()
}

/// Count, per node, how many stages evaluated it.
pub fn visit_counts(trace: &Trace) -> BTreeMap<Path, u32> {
    let mut counts: BTreeMap<Path, u32> = BTreeMap::new();
    for ev in &trace.events {
        if let Event::Outcome { path, .. } = ev {
            if let Ok(p) = Path::parse(path) {
                *counts.entry(p).or_default() += 1;
            }
        }
    }
    counts
}

/// Approximate true path at a finite horizon: the longest chain of nodes,
/// each leftmost among its visited siblings, visited at least `threshold`
/// times.
pub fn true_path_estimate(trace: &Trace, threshold: u32) -> Path {
    let counts = visit_counts(trace);
    let mut cur = Path::root();
    loop {
        let mut best: Option<Path> = None;
        for (p, n) in &counts {
            if *n < threshold || p.len() != cur.len() + 1 || !cur.is_prefix_of(p) {
                continue;
            }
            if best.as_ref().is_none_or(|b| left_of(p, b)) {
                best = Some(p.clone());
            }
        }
        match best {
            Some(p) => cur = p,
            None => return cur,
        }
    }
}
