//! Post-hoc trace checks. Every checker replays the event log on its own and
//! reports violations with a line locator (line 1 is the header; event k is
//! line k + 2).

use std::collections::{BTreeMap, BTreeSet};

use crate::adversary::SetSpec;
use crate::trace::{set_ids, Event, Trace};
use crate::tree::{higher_priority, Outcome, Path, Regime, Requirement, Side, TreeBuilder};

#[derive(Clone, Debug)]
pub struct CheckReport {
    pub name: String,
    pub pass: bool,
    pub details: Vec<String>,
}

impl CheckReport {
    fn new(name: &str) -> Self {
        CheckReport {
            name: name.into(),
            pass: true,
            details: Vec::new(),
        }
    }

    fn fail(&mut self, idx: usize, msg: String) {
        self.pass = false;
        if self.details.len() < 20 {
            self.details.push(format!("line {}: {}", idx + 2, msg));
        }
    }
}

fn set_path(set: &str, prefix: &str) -> Option<Path> {
    set.strip_prefix(prefix)
        .and_then(|rest| rest.strip_prefix('@'))
        .and_then(|p| Path::parse(p).ok())
}

fn builder_for(trace: &Trace) -> TreeBuilder {
    TreeBuilder::new(trace.header.config.regime, trace.header.roster.v.len())
}

// ---------------------------------------------------------------------------
// Structural checks
// ---------------------------------------------------------------------------

/// Stage markers are strictly increasing, every stage carries a path of
/// matching length with outcomes for each proper prefix, and B never admits
/// the same element twice.
pub fn check_wellformed(trace: &Trace) -> CheckReport {
    let mut rep = CheckReport::new("wellformed");
    let mut cur_stage = 0u32;
    let mut outcomes_this_stage = 0usize;
    let mut delta_len: Option<usize> = None;
    let mut b_seen: BTreeSet<u64> = BTreeSet::new();
    let mut saw_final = false;
    for (idx, ev) in trace.events.iter().enumerate() {
        if saw_final {
            rep.fail(idx, "event after final record".into());
        }
        match ev {
            Event::Stage { s } => {
                if *s != cur_stage + 1 {
                    rep.fail(idx, format!("stage {} follows stage {}", s, cur_stage));
                }
                cur_stage = *s;
                outcomes_this_stage = 0;
                delta_len = None;
            }
            Event::Outcome { s, path, .. } => {
                if *s != cur_stage {
                    rep.fail(idx, format!("outcome for stage {s} inside {cur_stage}"));
                }
                match Path::parse(path) {
                    Ok(p) if p.len() == outcomes_this_stage => outcomes_this_stage += 1,
                    Ok(p) => rep.fail(
                        idx,
                        format!("outcome depth {} out of order", p.len()),
                    ),
                    Err(_) => rep.fail(idx, format!("unparseable path {path}")),
                }
            }
            Event::Delta { s, path } => {
                if *s != cur_stage {
                    rep.fail(idx, format!("path record for stage {s} inside {cur_stage}"));
                }
                match Path::parse(path) {
                    Ok(p) => {
                        if p.len() != *s as usize {
                            rep.fail(
                                idx,
                                format!("stage {} path has length {}", s, p.len()),
                            );
                        }
                        delta_len = Some(p.len());
                    }
                    Err(_) => rep.fail(idx, format!("unparseable path {path}")),
                }
            }
            Event::Enum { set, x, .. } if set == set_ids::B => {
                if !b_seen.insert(*x) {
                    rep.fail(idx, format!("duplicate B entry {x}"));
                }
            }
            Event::Final { b } => {
                saw_final = true;
                let replayed: Vec<u64> = b_seen.iter().copied().collect();
                if *b != replayed {
                    rep.fail(idx, "final B differs from enumerated B".into());
                }
            }
            _ => {}
        }
        let _ = delta_len;
    }
    if cur_stage != trace.header.config.horizon {
        rep.pass = false;
        rep.details
            .push(format!("last stage {} != horizon", cur_stage));
    }
    if !saw_final {
        rep.pass = false;
        rep.details.push("missing final record".into());
    }
    rep
}

/// Once an element is consumed (enters B, a waiting set, or is picked as a
/// witness) it is never selected fresh again.
pub fn check_used_forever(trace: &Trace) -> CheckReport {
    let mut rep = CheckReport::new("used-forever");
    let tree = builder_for(trace);
    let mut used: BTreeSet<u64> = BTreeSet::new();
    for (idx, ev) in trace.events.iter().enumerate() {
        match ev {
            Event::Pick { path, x, .. } => {
                // Split strategies may adopt an element already in play;
                // diagonalization witnesses must be fresh.
                let adopter = Path::parse(path)
                    .map(|p| matches!(tree.assign(&p).req, Requirement::SChild { .. }))
                    .unwrap_or(false);
                if used.contains(x) && !adopter {
                    rep.fail(idx, format!("witness pick of used element {x}"));
                }
                used.insert(*x);
            }
            Event::Enum { set, x, .. } => {
                let fresh_sel = set.starts_with("R@") || set.starts_with("Pinf@");
                if fresh_sel && used.contains(x) {
                    rep.fail(idx, format!("staged used element {x} into {set}"));
                }
                if set == set_ids::B || set.starts_with("M@") {
                    used.insert(*x);
                }
            }
            _ => {}
        }
    }
    rep
}

/// No element enters B while a restraint on it is open. Restraints close via
/// an explicit release or a reset of the holder.
pub fn check_restraint_integrity(trace: &Trace) -> CheckReport {
    let mut rep = CheckReport::new("restraint-integrity");
    let mut open: BTreeMap<u64, BTreeSet<String>> = BTreeMap::new();
    for (idx, ev) in trace.events.iter().enumerate() {
        match ev {
            Event::Restrain { path, x, .. } => {
                open.entry(*x).or_default().insert(path.clone());
            }
            Event::Unrestrain { path, x, .. } => {
                open.entry(*x).or_default().remove(path);
            }
            Event::Reset { path, .. } => {
                for holders in open.values_mut() {
                    holders.remove(path);
                }
            }
            Event::Enum { set, x, .. } if set == set_ids::B => {
                if let Some(holders) = open.get(x) {
                    if let Some(h) = holders.iter().next() {
                        rep.fail(idx, format!("{x} entered B under restraint by {h}"));
                    }
                }
            }
            _ => {}
        }
    }
    rep
}

/// Staged candidates and witness picks come from the selecting node's pool:
/// the staging or reserve set of the nearest strategy ancestor with one,
/// minus witnesses held strictly in between.
pub fn check_pool_discipline(trace: &Trace) -> CheckReport {
    let mut rep = CheckReport::new("pool-discipline");
    let tree = builder_for(trace);
    let mut r_cur: BTreeMap<Path, BTreeSet<u64>> = BTreeMap::new();
    let mut pinf: BTreeMap<Path, BTreeSet<u64>> = BTreeMap::new();
    let mut witness: BTreeMap<Path, u64> = BTreeMap::new();

    // Pool membership for a value chosen at node p, given current replay state.
    let pool_ok = |p: &Path,
                   x: u64,
                   r_cur: &BTreeMap<Path, BTreeSet<u64>>,
                   pinf: &BTreeMap<Path, BTreeSet<u64>>,
                   witness: &BTreeMap<Path, u64>|
     -> Result<bool, String> {
        let mut cur = p.clone();
        loop {
            let Some(parent) = cur.parent() else {
                return Ok(true); // unbounded pool at the root
            };
            let edge = *cur.0.last().unwrap();
            match tree.assign(&parent).req {
                Requirement::Q { .. } => {
                    let src = if edge == Outcome::Inf {
                        pinf.get(&parent)
                    } else {
                        r_cur.get(&parent)
                    };
                    return Ok(src.is_some_and(|s| s.contains(&x)));
                }
                Requirement::D { .. } | Requirement::SChild { .. } => {
                    if witness.get(&parent) == Some(&x) {
                        return Err(format!("{x} is the witness of {}", parent.render()));
                    }
                }
                Requirement::SParent { .. } => {}
            }
            cur = parent;
        }
    };

    for (idx, ev) in trace.events.iter().enumerate() {
        match ev {
            Event::Enum { set, x, reason, .. } => {
                if let Some(q) = set_path(set, "R") {
                    if reason.as_deref() == Some("picked") {
                        match pool_ok(&q, *x, &r_cur, &pinf, &witness) {
                            Ok(true) => {}
                            Ok(false) => {
                                rep.fail(idx, format!("{x} staged at {} outside pool", q.render()))
                            }
                            Err(m) => rep.fail(idx, m),
                        }
                    }
                    r_cur.entry(q).or_default().insert(*x);
                } else if let Some(q) = set_path(set, "Pinf") {
                    match pool_ok(&q, *x, &r_cur, &pinf, &witness) {
                        Ok(true) => {}
                        Ok(false) => {
                            rep.fail(idx, format!("{x} reserved at {} outside pool", q.render()))
                        }
                        Err(m) => rep.fail(idx, m),
                    }
                    pinf.entry(q).or_default().insert(*x);
                }
            }
            Event::Pick { path, x, .. } => {
                if let Ok(p) = Path::parse(path) {
                    if matches!(tree.assign(&p).req, Requirement::D { .. }) {
                        match pool_ok(&p, *x, &r_cur, &pinf, &witness) {
                            Ok(true) => {}
                            Ok(false) => {
                                rep.fail(idx, format!("witness {x} at {path} outside pool"))
                            }
                            Err(m) => rep.fail(idx, m),
                        }
                    }
                    witness.insert(p, *x);
                }
            }
            Event::RReset { path, .. } => {
                if let Ok(p) = Path::parse(path) {
                    r_cur.remove(&p);
                }
            }
            Event::Reset { path, .. } => {
                if let Ok(p) = Path::parse(path) {
                    r_cur.remove(&p);
                    pinf.remove(&p);
                    witness.remove(&p);
                }
            }
            _ => {}
        }
    }
    rep
}

/// Each new reserve element strictly exceeds the node's previous reserve
/// bound, so the reserve reads as an increasing ladder between resets.
pub fn check_pinf_prefix(trace: &Trace) -> CheckReport {
    let mut rep = CheckReport::new("pinf-prefix");
    let mut bound: BTreeMap<Path, u64> = BTreeMap::new();
    for (idx, ev) in trace.events.iter().enumerate() {
        match ev {
            Event::Enum { set, x, .. } => {
                if let Some(q) = set_path(set, "Pinf") {
                    if let Some(b) = bound.get(&q) {
                        if *x <= *b {
                            rep.fail(
                                idx,
                                format!("reserve entry {x} at {} not above bound {b}", q.render()),
                            );
                        }
                    }
                }
            }
            Event::PinfExtend { path, bound: b, .. } => {
                if let Ok(p) = Path::parse(path) {
                    bound.insert(p, *b);
                }
            }
            Event::Reset { path, .. } => {
                if let Ok(p) = Path::parse(path) {
                    bound.remove(&p);
                }
            }
            _ => {}
        }
    }
    rep
}

/// An element's first arrival at any collector must be a diagonalization
/// witness emission; later hops may come from collector forwarding.
pub fn check_climb_origination(trace: &Trace) -> CheckReport {
    let mut rep = CheckReport::new("climb-origination");
    let tree = builder_for(trace);
    let mut seen: BTreeSet<u64> = BTreeSet::new();
    for (idx, ev) in trace.events.iter().enumerate() {
        if let Event::Enum { set, x, src, .. } = ev {
            if set_path(set, "Bc").is_none() {
                continue;
            }
            let first = seen.insert(*x);
            let Some(src) = src else {
                rep.fail(idx, format!("collector entry {x} without source"));
                continue;
            };
            let Ok(sp) = Path::parse(src) else {
                rep.fail(idx, format!("bad source path {src}"));
                continue;
            };
            let req = tree.assign(&sp).req;
            let ok = if first {
                matches!(req, Requirement::D { .. })
            } else {
                matches!(req, Requirement::D { .. } | Requirement::Q { .. })
            };
            if !ok {
                rep.fail(
                    idx,
                    format!("collector entry {x} from {} ({:?})", sp.render(), req),
                );
            }
        }
    }
    rep
}

// ---------------------------------------------------------------------------
// Scenario-level checks
// ---------------------------------------------------------------------------

/// Reconstruct the contents of a named adversary set at the end of the trace:
/// scripted entries plus mirror feeds recorded as events.
fn adversary_set(trace: &Trace, set_id: &str) -> BTreeSet<u64> {
    let mut out = BTreeSet::new();
    let roster = &trace.header.roster;
    let horizon = trace.header.config.horizon;
    if let Some(j) = set_id.strip_prefix('V').and_then(|t| t.parse::<usize>().ok()) {
        if let Some(SetSpec::Scripted { entries }) = roster.v.get(j) {
            for e in entries {
                if e.stage <= horizon {
                    out.extend(&e.elements);
                }
            }
        }
    }
    if let Some(i) = set_id.strip_prefix('X').and_then(|t| t.parse::<usize>().ok()) {
        if let Some(p) = roster.pair.get(i) {
            for e in &p.x_entries {
                if e.stage <= horizon {
                    out.extend(&e.elements);
                }
            }
        }
    }
    if let Some(i) = set_id.strip_prefix('Y').and_then(|t| t.parse::<usize>().ok()) {
        if let Some(p) = roster.pair.get(i) {
            for e in &p.y_entries {
                if e.stage <= horizon {
                    out.extend(&e.elements);
                }
            }
        }
    }
    for ev in &trace.events {
        if let Event::Enum { set, x, .. } = ev {
            if set == set_id {
                out.insert(*x);
            }
        }
    }
    out
}

/// The set equation at a Q-node: restricted to the node's current staging set,
/// B, the waiting set, each puller's test set, and each puller's tracked side
/// agree up to F, where F counts active higher-priority S-strategies
/// restraining one of the node's waiting elements.
pub fn check_equation_in_r(trace: &Trace, q: &Path) -> CheckReport {
    let mut rep = CheckReport::new("equation-in-r");
    let tree = builder_for(trace);
    let qr = q.render();
    let mut r_cur: BTreeSet<u64> = BTreeSet::new();
    let mut m: BTreeSet<u64> = BTreeSet::new();
    let mut b: BTreeSet<u64> = BTreeSet::new();
    let mut pullers: BTreeSet<String> = BTreeSet::new();
    let mut open: BTreeMap<u64, BTreeSet<String>> = BTreeMap::new();
    for ev in &trace.events {
        match ev {
            Event::Enum { set, x, .. } => {
                if *set == set_ids::r(q) {
                    r_cur.insert(*x);
                } else if *set == set_ids::m(q) {
                    m.insert(*x);
                } else if set == set_ids::B {
                    b.insert(*x);
                }
            }
            Event::RReset { path, .. } if *path == qr => r_cur.clear(),
            Event::Pull { q: pq, puller, .. } if *pq == qr => {
                pullers.insert(puller.clone());
            }
            Event::Restrain { path, x, .. } => {
                open.entry(*x).or_default().insert(path.clone());
            }
            Event::Unrestrain { path, x, .. } => {
                open.entry(*x).or_default().remove(path);
            }
            Event::Reset { path, .. } => {
                if *path == qr {
                    r_cur.clear();
                    m.clear();
                }
                for h in open.values_mut() {
                    h.remove(path);
                }
            }
            _ => {}
        }
    }
    // F: distinct higher-priority S-strategies holding a restraint on an
    // element of the waiting set.
    let mut f_holders: BTreeSet<String> = BTreeSet::new();
    for x in &m {
        if let Some(hs) = open.get(x) {
            for hp in hs {
                let Ok(p) = Path::parse(hp) else { continue };
                if higher_priority(&p, q)
                    && matches!(tree.assign(&p).req, Requirement::SChild { .. })
                {
                    f_holders.insert(hp.clone());
                }
            }
        }
    }
    let f = f_holders.len();

    // Waiters still unresolved at the horizon are transient and excluded
    // from the waiting-set side of the equation.
    let m_settled: BTreeSet<u64> = m.intersection(&b).copied().collect();
    let mut family: Vec<(String, BTreeSet<u64>)> = vec![
        ("B".into(), b.intersection(&r_cur).copied().collect()),
        ("M".into(), m_settled.intersection(&r_cur).copied().collect()),
    ];
    for puller in &pullers {
        let Ok(p) = Path::parse(puller) else { continue };
        let Requirement::SChild { i, v } = tree.assign(&p).req else {
            continue;
        };
        let vset = adversary_set(trace, &set_ids::v(v));
        family.push((
            set_ids::v(v),
            vset.intersection(&r_cur).copied().collect(),
        ));
        let side = tree.assign(&p).g.get(i).copied().unwrap_or(Side::X);
        let zid = match side {
            Side::X => set_ids::x_side(i),
            Side::Y => set_ids::y_side(i),
        };
        let z = adversary_set(trace, &zid);
        family.push((zid, z.intersection(&r_cur).copied().collect()));
    }
    family.dedup_by(|a, b| a.0 == b.0);
    for a in 0..family.len() {
        for c in a + 1..family.len() {
            let d: BTreeSet<u64> = family[a]
                .1
                .symmetric_difference(&family[c].1)
                .copied()
                .collect();
            if d.len() > f {
                rep.pass = false;
                rep.details.push(format!(
                    "{} vs {} differ on {:?} (allowance {})",
                    family[a].0, family[c].0, d, f
                ));
            }
        }
    }
    rep.details.push(format!("allowance F = {f}"));
    rep
}

/// Count waiting-set elements of a Q-node that beat the adversary's bound:
/// elements the node had to enumerate through the slow route (forwarded past
/// their bound, or displaced by a staging-set retirement) rather than via a
/// committed strategy's pull.
pub fn count_speedup_witnesses(trace: &Trace, q: &Path) -> usize {
    let mid = set_ids::m(q);
    let mut m_elems: BTreeSet<u64> = BTreeSet::new();
    let mut slow: BTreeSet<u64> = BTreeSet::new();
    for ev in &trace.events {
        if let Event::Enum { set, x, reason, .. } = ev {
            if *set == mid {
                m_elems.insert(*x);
            } else if set == set_ids::B
                && matches!(reason.as_deref(), Some("slow") | Some("flush"))
            {
                slow.insert(*x);
            }
        }
    }
    m_elems.intersection(&slow).count()
}

/// Outcome history of one node, in stage order.
pub fn outcome_history(trace: &Trace, q: &Path) -> Vec<(u32, Outcome)> {
    let qr = q.render();
    let mut out = Vec::new();
    for ev in &trace.events {
        if let Event::Outcome { s, path, o } = ev {
            if *path == qr {
                if let Ok(oc) = Outcome::parse(o) {
                    out.push((*s, oc));
                }
            }
        }
    }
    out
}

/// Recompute every expected side-vector switch from the visited paths alone
/// and compare against the recorded switch events.
pub fn check_switch_sequence(trace: &Trace) -> CheckReport {
    let mut rep = CheckReport::new("switch-sequence");
    let tree = builder_for(trace);
    let regime = trace.header.config.regime;
    // Independent fold of the side-vector along a path.
    let derive_g = |p: &Path| -> Vec<Side> {
        let mut g: Vec<Side> = match regime {
            Regime::OneSplit => vec![Side::X],
            _ => vec![Side::X, Side::X],
        };
        for k in 0..p.len() {
            let node = p.prefix(k);
            let edge = p.0[k];
            match tree.assign(&node).req {
                Requirement::Q { .. } if edge == Outcome::C && regime != Regime::OneSplit => {
                    if let Some(j) = g.iter().rposition(|s| *s == Side::X) {
                        g[j] = Side::Y;
                        for s in g.iter_mut().skip(j + 1) {
                            *s = Side::X;
                        }
                    }
                }
                Requirement::SParent { i } if edge == Outcome::Split => {
                    while g.len() <= i {
                        g.push(Side::X);
                    }
                }
                _ => {}
            }
        }
        g
    };

    let mut seen: BTreeSet<Path> = BTreeSet::new();
    seen.insert(Path::root());
    let mut expected: Vec<(u32, String)> = Vec::new();
    for ev in &trace.events {
        if let Event::Delta { s, path } = ev {
            let Ok(delta) = Path::parse(path) else {
                continue;
            };
            for t in 1..=delta.len() {
                let node = delta.prefix(t);
                if !seen.insert(node.clone()) {
                    continue;
                }
                let parent = node.parent().unwrap();
                if derive_g(&node) != derive_g(&parent) {
                    expected.push((*s, node.render()));
                }
            }
        }
    }
    let actual: Vec<(u32, String)> = trace
        .events
        .iter()
        .filter_map(|ev| match ev {
            Event::Switch { s, path, .. } => Some((*s, path.clone())),
            _ => None,
        })
        .collect();
    if expected != actual {
        rep.pass = false;
        rep.details
            .push(format!("expected {:?}, recorded {:?}", expected, actual));
    } else {
        rep.details.push(format!("{} switches", actual.len()));
    }
    rep
}

/// The six structural invariants, in a fixed order.
pub fn standard_checks(trace: &Trace) -> Vec<CheckReport> {
    vec![
        check_wellformed(trace),
        check_used_forever(trace),
        check_restraint_integrity(trace),
        check_pool_discipline(trace),
        check_pinf_prefix(trace),
        check_climb_origination(trace),
    ]
}
